use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Floating-point element type of a network: `f32` for training and
/// inference, `f64` for gradient checking.
pub trait Scalar:
    Float + Default + Debug + Send + Sync + AddAssign + SubAssign + MulAssign + Sum + 'static
{
    /// `C = A·B (+ C)` for row-major operands.
    ///
    /// `A` is `m×k` (stored `k×m` when `a_trans`), `B` is `k×n` (stored
    /// `n×k` when `b_trans`), `C` is `m×n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: &[Self],
        a_trans: bool,
        b: &[Self],
        b_trans: bool,
        c: &mut [Self],
        accumulate: bool,
    );

    fn from_f64(x: f64) -> Self;

    fn as_f64(self) -> f64;

    fn from_f32(x: f32) -> Self;

    fn as_f32(self) -> f32;
}

struct Strides {
    rsa: isize,
    csa: isize,
    rsb: isize,
    csb: isize,
}

fn strides(m: usize, k: usize, n: usize, a_trans: bool, b_trans: bool) -> Strides {
    let (rsa, csa) = if a_trans { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if b_trans { (1, k as isize) } else { (n as isize, 1) };
    Strides { rsa, csa, rsb, csb }
}

fn check_lengths(m: usize, k: usize, n: usize, a: usize, b: usize, c: usize) {
    assert!(a >= m * k && b >= k * n && c >= m * n, "gemm operand too short");
}

/// Plain loops for `n == 1` (matrix-vector) and `k == 1` (outer product).
#[allow(clippy::too_many_arguments)]
fn vector_gemm<T: Float + AddAssign>(
    m: usize,
    k: usize,
    n: usize,
    a: &[T],
    a_trans: bool,
    b: &[T],
    // a vector operand has no storage order
    _b_trans: bool,
    c: &mut [T],
    accumulate: bool,
) {
    if !accumulate {
        c[..m * n].fill(T::zero());
    }
    if k == 1 {
        // a and b are vectors whatever their storage order
        for (row, &ai) in c.chunks_exact_mut(n).zip(&a[..m]) {
            for (cij, &bj) in row.iter_mut().zip(&b[..n]) {
                *cij += ai * bj;
            }
        }
    } else if a_trans {
        // c += Σ_l b_l · (row l of the stored k×m matrix)
        for (stored_row, &bl) in a.chunks_exact(m).zip(&b[..k]) {
            for (ci, &x) in c[..m].iter_mut().zip(stored_row) {
                *ci += x * bl;
            }
        }
    } else {
        for (ci, row) in c[..m].iter_mut().zip(a.chunks_exact(k)) {
            *ci += row.iter().zip(&b[..k]).fold(T::zero(), |acc, (&x, &y)| acc + x * y);
        }
    }
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                a: &[Self],
                a_trans: bool,
                b: &[Self],
                b_trans: bool,
                c: &mut [Self],
                accumulate: bool,
            ) {
                check_lengths(m, k, n, a.len(), b.len(), c.len());
                if m == 0 || n == 0 {
                    return;
                }
                // matrixmultiply packs both operands, which dominates for the
                // matrix-vector and outer products of the dense layers
                if n == 1 || k == 1 {
                    return vector_gemm(m, k, n, a, a_trans, b, b_trans, c, accumulate);
                }
                let s = strides(m, k, n, a_trans, b_trans);
                let beta = if accumulate { 1.0 } else { 0.0 };
                // SAFETY: lengths checked above; strides describe dense row-major
                // storage of the stated shapes.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        1.0,
                        a.as_ptr(),
                        s.rsa,
                        s.csa,
                        b.as_ptr(),
                        s.rsb,
                        s.csb,
                        beta,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }

            fn from_f64(x: f64) -> Self {
                x as $t
            }

            fn as_f64(self) -> f64 {
                self as f64
            }

            fn from_f32(x: f32) -> Self {
                x as $t
            }

            fn as_f32(self) -> f32 {
                self as f32
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);
