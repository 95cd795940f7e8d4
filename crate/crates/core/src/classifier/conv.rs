//! im2col convolution helpers and 2×2 max pooling on CHW tensors.

use super::scalar::Scalar;

/// Unrolls `input` (`channels × size × size`) into a
/// `(channels·k·k) × (size·size)` matrix for a stride-1 convolution with
/// zero padding `pad`.
pub(crate) fn im2col<T: Scalar>(input: &[T], channels: usize, size: usize, k: usize, pad: usize, cols: &mut [T]) {
    let hw = size * size;
    debug_assert_eq!(cols.len(), channels * k * k * hw);
    for c in 0..channels {
        let plane = &input[c * hw..(c + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let dst = &mut cols[row * hw..(row + 1) * hw];
                for y in 0..size {
                    let out = &mut dst[y * size..(y + 1) * size];
                    let sy = y as isize + ky as isize - pad as isize;
                    if sy < 0 || sy >= size as isize {
                        out.fill(T::zero());
                        continue;
                    }
                    let src = &plane[sy as usize * size..(sy as usize + 1) * size];
                    // output x reads source x + kx - pad
                    let shift = kx as isize - pad as isize;
                    let x0 = (-shift).max(0) as usize;
                    let x1 = (size as isize - shift).min(size as isize).max(0) as usize;
                    out[..x0.min(size)].fill(T::zero());
                    if x1 > x0 {
                        let s0 = (x0 as isize + shift) as usize;
                        out[x0..x1].copy_from_slice(&src[s0..s0 + (x1 - x0)]);
                    }
                    out[x1.max(x0).min(size)..].fill(T::zero());
                }
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates `cols` back into `out`.
pub(crate) fn col2im<T: Scalar>(cols: &[T], channels: usize, size: usize, k: usize, pad: usize, out: &mut [T]) {
    let hw = size * size;
    for c in 0..channels {
        let plane = &mut out[c * hw..(c + 1) * hw];
        for ky in 0..k {
            for kx in 0..k {
                let row = (c * k + ky) * k + kx;
                let src = &cols[row * hw..(row + 1) * hw];
                let shift = kx as isize - pad as isize;
                let x0 = (-shift).max(0) as usize;
                let x1 = (size as isize - shift).min(size as isize).max(0) as usize;
                if x1 <= x0 {
                    continue;
                }
                for y in 0..size {
                    let sy = y as isize + ky as isize - pad as isize;
                    if sy < 0 || sy >= size as isize {
                        continue;
                    }
                    let d0 = sy as usize * size + (x0 as isize + shift) as usize;
                    let dst = &mut plane[d0..d0 + (x1 - x0)];
                    for (d, &s) in dst.iter_mut().zip(&src[y * size + x0..y * size + x1]) {
                        *d += s;
                    }
                }
            }
        }
    }
}

/// 2×2 stride-2 max pooling; `argmax` records the winning flat index
/// into `input` (first maximum on ties).
pub(crate) fn maxpool2<T: Scalar>(input: &[T], channels: usize, size: usize, out: &mut [T], argmax: &mut [u32]) {
    let half = size / 2;
    for c in 0..channels {
        let base = c * size * size;
        for y in 0..half {
            for x in 0..half {
                let candidates = [
                    base + 2 * y * size + 2 * x,
                    base + 2 * y * size + 2 * x + 1,
                    base + (2 * y + 1) * size + 2 * x,
                    base + (2 * y + 1) * size + 2 * x + 1,
                ];
                let mut best = candidates[0];
                for &i in &candidates[1..] {
                    if input[i] > input[best] {
                        best = i;
                    }
                }
                let o = c * half * half + y * half + x;
                out[o] = input[best];
                argmax[o] = best as u32;
            }
        }
    }
}

/// Routes pooled gradients back to the winning positions.
pub(crate) fn maxpool2_backward<T: Scalar>(dout: &[T], argmax: &[u32], din: &mut [T]) {
    din.fill(T::zero());
    for (&g, &i) in dout.iter().zip(argmax) {
        din[i as usize] += g;
    }
}
