//! Synthetic multi-person FMCW scenes.
//!
//! Every person is a handful of point scatterers (torso, hands, forearm)
//! sharing one azimuth. Each scatterer follows a radial motion profile
//! `ρ(t)` on top of its base range. The dechirped return of a scatterer
//! during pulse `q` is
//!
//! ```text
//! a·exp(j·(4π·r(t_q)/λ + 2π·(f_b + f_D(t_q))·p/f_s)),   p = 0..P
//! ```
//!
//! with beat frequency `f_b = 2·slope·r₀/c` taken at the base range (no
//! range migration) and Doppler `f_D = 2·ρ'(t_q)/λ`. Returns are spread
//! over the array with [`steering_vector`] and noise is added per element.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::array::{steering_vector, ArrayConfig, SnapshotMatrix};
use crate::seed::derive;
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Nominal duration the sign templates are authored for, in seconds.
const TEMPLATE_DURATION: f64 = 4.0;

/// Relative jitter applied to template rates and amplitudes.
pub const JITTER: f64 = 0.15;

/// Chirp and sampling parameters. The chirp spans the whole PRI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarParams {
    pub carrier: f64,
    pub bandwidth: f64,
    pub pri: f64,
    pub adc_rate: f64,
    pub observation_time: f64,
}

impl Default for RadarParams {
    fn default() -> Self {
        Self {
            carrier: 77e9,
            bandwidth: 4e9,
            pri: 1e-3,
            adc_rate: 512e3,
            observation_time: 4.0,
        }
    }
}

fn integral_ratio(num: f64, den: f64, what: &str) -> Result<usize> {
    let x = num / den;
    let n = x.round();
    if !(x.is_finite() && n >= 1.0 && (x - n).abs() <= 1e-6 * n) {
        return Err(Error::invalid(format!("{what} = {x} is not a positive integer")));
    }
    Ok(n as usize)
}

impl RadarParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("carrier", self.carrier),
            ("bandwidth", self.bandwidth),
            ("pri", self.pri),
            ("adc_rate", self.adc_rate),
            ("observation_time", self.observation_time),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("radar {name} must be > 0, got {v}")));
            }
        }
        self.fast_time_samples()?;
        self.pulses()?;
        Ok(())
    }

    /// P, samples per pulse.
    pub fn fast_time_samples(&self) -> Result<usize> {
        integral_ratio(self.adc_rate * self.pri, 1.0, "adc_rate·pri")
    }

    /// Q, pulses per observation.
    pub fn pulses(&self) -> Result<usize> {
        integral_ratio(self.observation_time, self.pri, "observation_time/pri")
    }

    /// N = P·Q.
    pub fn total_samples(&self) -> Result<usize> {
        Ok(self.fast_time_samples()? * self.pulses()?)
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier
    }

    /// Chirp slope in Hz/s.
    pub fn slope(&self) -> f64 {
        self.bandwidth / self.pri
    }

    pub fn prf(&self) -> f64 {
        1.0 / self.pri
    }

    /// Meters per range bin, `c/(2B)`.
    pub fn range_resolution(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.bandwidth)
    }

    pub fn beat_frequency(&self, range: f64) -> f64 {
        2.0 * self.slope() * range / SPEED_OF_LIGHT
    }

    /// Nearest range bin of a static reflector at `range`.
    pub fn beat_bin(&self, range: f64) -> Result<usize> {
        let p = self.fast_time_samples()?;
        Ok((self.beat_frequency(range) * p as f64 / self.adc_rate).round() as usize % p)
    }

    pub fn doppler(&self, radial_velocity: f64) -> f64 {
        2.0 * radial_velocity / self.wavelength()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SignClass {
    Breathe,
    Come,
    Drink,
}

impl SignClass {
    pub const ALL: [SignClass; 3] = [SignClass::Breathe, SignClass::Come, SignClass::Drink];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::invalid(format!("sign index {i} out of range")))
    }

    pub fn letter(self) -> char {
        match self {
            SignClass::Breathe => 'B',
            SignClass::Come => 'C',
            SignClass::Drink => 'D',
        }
    }
}

impl fmt::Display for SignClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SignClass::Breathe => "breathe",
            SignClass::Come => "come",
            SignClass::Drink => "drink",
        };
        f.write_str(name)
    }
}

impl FromStr for SignClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "b" | "breathe" => Ok(SignClass::Breathe),
            "c" | "come" => Ok(SignClass::Come),
            "d" | "drink" => Ok(SignClass::Drink),
            _ => Err(Error::invalid(format!("unknown sign '{s}'"))),
        }
    }
}

pub const NUM_CLASSES: usize = 9;

/// Label of a scene with `first` signed at θ₁ and `second` at θ₂:
/// B-B, B-C, B-D, C-B, … D-D map to 0..9.
pub fn encode_label(first: SignClass, second: SignClass) -> usize {
    3 * first.index() + second.index()
}

pub fn decode_label(label: usize) -> Result<(SignClass, SignClass)> {
    if label >= NUM_CLASSES {
        return Err(Error::invalid(format!("label {label} outside 0..{NUM_CLASSES}")));
    }
    Ok((SignClass::from_index(label / 3)?, SignClass::from_index(label % 3)?))
}

/// Short name such as `D-B`.
pub fn label_name(label: usize) -> String {
    match decode_label(label) {
        Ok((a, b)) => format!("{}-{}", a.letter(), b.letter()),
        Err(_) => format!("#{label}"),
    }
}

/// One component of a radial motion profile, in meters (positive = away).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    /// `amplitude·sin(2π·frequency·t + phase)`.
    Oscillation {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    /// Raised-cosine move out by `depth`, hold, and raised-cosine return.
    Excursion {
        start: f64,
        rise: f64,
        hold: f64,
        fall: f64,
        depth: f64,
    },
}

impl Motion {
    pub fn displacement(&self, t: f64) -> f64 {
        match *self {
            Motion::Oscillation {
                amplitude,
                frequency,
                phase,
            } => amplitude * (2.0 * PI * frequency * t + phase).sin(),
            Motion::Excursion {
                start,
                rise,
                hold,
                fall,
                depth,
            } => {
                let s = t - start;
                if s <= 0.0 || s >= rise + hold + fall {
                    0.0
                } else if s < rise {
                    depth * 0.5 * (1.0 - (PI * s / rise).cos())
                } else if s < rise + hold {
                    depth
                } else {
                    depth * 0.5 * (1.0 + (PI * (s - rise - hold) / fall).cos())
                }
            }
        }
    }

    pub fn velocity(&self, t: f64) -> f64 {
        match *self {
            Motion::Oscillation {
                amplitude,
                frequency,
                phase,
            } => amplitude * 2.0 * PI * frequency * (2.0 * PI * frequency * t + phase).cos(),
            Motion::Excursion {
                start,
                rise,
                hold,
                fall,
                depth,
            } => {
                let s = t - start;
                if s <= 0.0 || s >= rise + hold + fall {
                    0.0
                } else if s < rise {
                    depth * 0.5 * PI / rise * (PI * s / rise).sin()
                } else if s < rise + hold {
                    0.0
                } else {
                    -depth * 0.5 * PI / fall * (PI * (s - rise - hold) / fall).sin()
                }
            }
        }
    }

    /// Upper bound on |velocity|.
    pub fn peak_speed(&self) -> f64 {
        match *self {
            Motion::Oscillation {
                amplitude,
                frequency,
                ..
            } => (amplitude * 2.0 * PI * frequency).abs(),
            Motion::Excursion {
                rise, fall, depth, ..
            } => depth.abs() * 0.5 * PI / rise.min(fall),
        }
    }

    fn end_time(&self) -> f64 {
        match *self {
            Motion::Oscillation { .. } => f64::INFINITY,
            Motion::Excursion {
                start,
                rise,
                hold,
                fall,
                ..
            } => start + rise + hold + fall,
        }
    }
}

/// A moving point reflector belonging to one person.
#[derive(Debug, Clone, PartialEq)]
pub struct LimbScatterer {
    pub name: String,
    /// Offset from the person's range, meters (negative = nearer the radar).
    pub range_offset: f64,
    pub reflectivity: f64,
    pub motions: Vec<Motion>,
    /// Motion is frozen outside `[start, stop]`.
    pub start: f64,
    pub stop: f64,
}

impl LimbScatterer {
    pub fn fixed(name: &str, range_offset: f64, reflectivity: f64) -> Self {
        Self {
            name: name.to_string(),
            range_offset,
            reflectivity,
            motions: Vec::new(),
            start: 0.0,
            stop: f64::INFINITY,
        }
    }

    /// Radial displacement ρ(t).
    pub fn displacement(&self, t: f64) -> f64 {
        let t = t.clamp(self.start, self.stop);
        self.motions.iter().map(|m| m.displacement(t)).sum()
    }

    /// ρ'(t).
    pub fn velocity(&self, t: f64) -> f64 {
        if t < self.start || t > self.stop {
            return 0.0;
        }
        self.motions.iter().map(|m| m.velocity(t)).sum()
    }

    /// Largest |ρ'| seen at the pulse instants `k·pri`, `k < pulses`.
    pub fn max_sampled_speed(&self, pri: f64, pulses: usize) -> f64 {
        (0..pulses)
            .map(|k| self.velocity(k as f64 * pri).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignKinematics {
    pub class: SignClass,
    pub scatterers: Vec<LimbScatterer>,
}

impl SignKinematics {
    /// Latest time at which any excursion is still moving.
    pub fn motion_end(&self) -> f64 {
        self.scatterers
            .iter()
            .flat_map(|s| s.motions.iter().map(Motion::end_time))
            .filter(|t| t.is_finite())
            .fold(0.0, f64::max)
    }
}

struct Jitter(ChaCha8Rng);

impl Jitter {
    fn scale(&mut self) -> f64 {
        self.0.random_range(1.0 - JITTER..=1.0 + JITTER)
    }

    fn phase(&mut self) -> f64 {
        self.0.random_range(0.0..2.0 * PI)
    }
}

fn torso(j: &mut Jitter, amplitude: f64, ts: f64) -> LimbScatterer {
    LimbScatterer {
        motions: vec![Motion::Oscillation {
            amplitude: amplitude * j.scale() * ts,
            frequency: 0.3 * j.scale() / ts,
            phase: j.phase(),
        }],
        ..LimbScatterer::fixed("torso", 0.0, 1.0)
    }
}

/// Excursion template in nominal seconds/meters, jittered and time-scaled.
fn excursion(j: &mut Jitter, ts: f64, start: f64, rise: f64, hold: f64, fall: f64, depth: f64) -> Motion {
    let pace = j.scale();
    Motion::Excursion {
        start: start * j.scale() * ts,
        rise: rise * pace * ts,
        hold: hold * j.scale() * ts,
        fall: fall * pace * ts,
        depth: depth * j.scale() * ts,
    }
}

/// Kinematic template for `class`, jittered by `variation`.
///
/// Templates are authored for a 4 s observation; other durations rescale
/// times and displacements together so Doppler excursions keep their size.
/// Every rate and amplitude is perturbed by up to ±15%.
///
/// * Breathe: slow torso oscillation plus both hands drifting a few cm off
///   the chest twice; all Doppler stays well under 50 Hz.
/// * Come: both hands sweep away and back twice in quick bursts.
/// * Drink: one hand (and forearm) rises, holds, and lowers once.
pub fn kinematics_for(class: SignClass, variation: u64, observation_time: f64) -> SignKinematics {
    let mut j = Jitter(ChaCha8Rng::seed_from_u64(derive(variation, &[class.index() as u64])));
    let ts = observation_time / TEMPLATE_DURATION;
    let scatterers = match class {
        SignClass::Breathe => {
            let torso = torso(&mut j, 0.005, ts);
            let hands = ["left_hand", "right_hand"].map(|name| {
                let first = excursion(&mut j, ts, 0.4, 0.7, 0.2, 0.7, -0.03);
                let second = excursion(&mut j, ts, 2.2, 0.7, 0.2, 0.7, -0.03);
                LimbScatterer {
                    motions: vec![first, second],
                    ..LimbScatterer::fixed(name, -0.15, 0.6)
                }
            });
            let [l, r] = hands;
            vec![torso, l, r]
        }
        SignClass::Come => {
            let torso = torso(&mut j, 0.003, ts);
            let hands = ["left_hand", "right_hand"].map(|name| {
                let first = excursion(&mut j, ts, 0.9, 0.3, 0.05, 0.3, 0.10);
                let second = excursion(&mut j, ts, 2.3, 0.3, 0.05, 0.3, 0.10);
                LimbScatterer {
                    motions: vec![first, second],
                    ..LimbScatterer::fixed(name, -0.2, 0.8)
                }
            });
            let [l, r] = hands;
            vec![torso, l, r]
        }
        SignClass::Drink => {
            let torso = torso(&mut j, 0.003, ts);
            let arc = excursion(&mut j, ts, 0.8, 0.8, 0.8, 0.8, 0.20);
            let forearm = match arc {
                Motion::Excursion {
                    start,
                    rise,
                    hold,
                    fall,
                    depth,
                } => Motion::Excursion {
                    start,
                    rise,
                    hold,
                    fall,
                    depth: depth * 0.5,
                },
                other => other,
            };
            vec![
                torso,
                LimbScatterer {
                    motions: vec![arc],
                    ..LimbScatterer::fixed("hand", -0.2, 1.0)
                },
                LimbScatterer {
                    motions: vec![forearm],
                    ..LimbScatterer::fixed("forearm", -0.12, 0.5)
                },
                LimbScatterer::fixed("rest_hand", -0.1, 0.3),
            ]
        }
    };
    let scatterers = scatterers
        .into_iter()
        .map(|s| LimbScatterer {
            start: 0.0,
            stop: observation_time,
            ..s
        })
        .collect();
    SignKinematics { class, scatterers }
}

/// One signer in a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct Person {
    /// Azimuth in radians, `cos θ` convention (broadside = π/2).
    pub azimuth: f64,
    pub range: f64,
    pub sign: SignClass,
    pub kinematics: SignKinematics,
    pub reflectivity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub persons: Vec<Person>,
    pub noise_variance: f64,
    pub radar: RadarParams,
    pub array: ArrayConfig,
    pub seed: u64,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        if self.persons.is_empty() || self.persons.len() > 2 {
            return Err(Error::invalid(format!(
                "a scene holds one or two persons, got {}",
                self.persons.len()
            )));
        }
        if self.persons.len() == 2 && self.persons[0].azimuth == self.persons[1].azimuth {
            return Err(Error::invalid("the two persons share an azimuth"));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::invalid(format!(
                "noise variance must be >= 0, got {}",
                self.noise_variance
            )));
        }
        let limit = self.radar.prf() / 2.0;
        let pulses = self.radar.pulses()?;
        for (i, person) in self.persons.iter().enumerate() {
            if !person.azimuth.is_finite() || !person.range.is_finite() || person.range <= 0.0 {
                return Err(Error::invalid(format!("person {i} has an invalid position")));
            }
            for s in &person.kinematics.scatterers {
                let fd = self.radar.doppler(s.max_sampled_speed(self.radar.pri, pulses));
                if fd >= limit {
                    return Err(Error::DopplerAliasing(format!(
                        "person {i} scatterer '{}' reaches {fd:.1} Hz, beyond the ±{limit:.1} Hz slow-time band",
                        s.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Sum of one person's scatterer returns, length N.
pub fn person_baseband(person: &Person, radar: &RadarParams) -> Result<Vec<Complex64>> {
    let p = radar.fast_time_samples()?;
    let q = radar.pulses()?;
    let lambda = radar.wavelength();
    let mut out = vec![Complex64::new(0.0, 0.0); p * q];
    for s in &person.kinematics.scatterers {
        let amp = person.reflectivity * s.reflectivity;
        if amp == 0.0 {
            continue;
        }
        let r0 = person.range + s.range_offset;
        let fb = radar.beat_frequency(r0);
        for (pulse, chunk) in out.chunks_exact_mut(p).enumerate() {
            let t = pulse as f64 * radar.pri;
            let r = r0 + s.displacement(t);
            let fd = radar.doppler(s.velocity(t));
            let mut z = Complex64::from_polar(amp, 4.0 * PI * r / lambda);
            let step = Complex64::from_polar(1.0, 2.0 * PI * (fb + fd) / radar.adc_rate);
            for x in chunk.iter_mut() {
                *x += z;
                z *= step;
            }
        }
    }
    Ok(out)
}

/// Noise-free array data of a scene.
pub fn synthesize_clean(spec: &SceneSpec) -> Result<SnapshotMatrix> {
    spec.validate()?;
    let n = spec.radar.total_samples()?;
    let mut snapshot = SnapshotMatrix::zeros(n, spec.array.num_elements(), spec.radar.adc_rate);
    for person in &spec.persons {
        let steering = steering_vector(&spec.array, person.azimuth)?;
        let bb = person_baseband(person, &spec.radar)?;
        snapshot.add_source(&steering, &bb)?;
    }
    Ok(snapshot)
}

/// Array data `N × M` of a scene, noise drawn from `spec.seed`.
pub fn synthesize_scene(spec: &SceneSpec) -> Result<SnapshotMatrix> {
    let mut snapshot = synthesize_clean(spec)?;
    snapshot.add_noise(spec.noise_variance, derive(spec.seed, &[0x6e6f_6973_65]))?;
    Ok(snapshot)
}

/// Fixed scene geometry shared by every sample of a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneTemplate {
    pub radar: RadarParams,
    pub array: ArrayConfig,
    /// Azimuths of the first and second signer.
    pub azimuths: [f64; 2],
    pub person_range: f64,
    pub reflectivity: [f64; 2],
    pub noise_variance: f64,
}

impl SceneTemplate {
    /// Noise variance giving `snr_db` per element against the summed
    /// unit-torso power of both signers.
    pub fn noise_for_snr(reflectivity: [f64; 2], snr_db: f64) -> f64 {
        let signal: f64 = reflectivity.iter().map(|r| r * r).sum();
        signal / 10f64.powf(snr_db / 10.0)
    }
}

/// Recipe for one dataset sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenePlan {
    pub label: usize,
    pub pair: usize,
    pub repetition: usize,
    pub seed: u64,
}

impl ScenePlan {
    pub fn signs(&self) -> Result<(SignClass, SignClass)> {
        decode_label(self.label)
    }

    /// Scene for this sample; person `k` draws its kinematics from
    /// `derive(seed, [k])`.
    pub fn scene_spec(&self, template: &SceneTemplate) -> Result<SceneSpec> {
        scene_from_seed(template, self.label, self.seed)
    }
}

/// Rebuilds a sample scene from its label and sample seed.
pub fn scene_from_seed(template: &SceneTemplate, label: usize, seed: u64) -> Result<SceneSpec> {
    let (first, second) = decode_label(label)?;
    let persons = [first, second]
        .into_iter()
        .enumerate()
        .map(|(k, sign)| Person {
            azimuth: template.azimuths[k],
            range: template.person_range,
            sign,
            kinematics: kinematics_for(sign, derive(seed, &[k as u64]), template.radar.observation_time),
            reflectivity: template.reflectivity[k],
        })
        .collect();
    Ok(SceneSpec {
        persons,
        noise_variance: template.noise_variance,
        radar: template.radar,
        array: template.array,
        seed,
    })
}

/// Sample recipes: `samples_per_class` repetitions for each of the 9
/// labels and each subject pair, ordered label, pair, repetition.
pub fn dataset_plan(samples_per_class: usize, subject_pairs: usize, seed: u64) -> Result<Vec<ScenePlan>> {
    if samples_per_class == 0 || subject_pairs == 0 {
        return Err(Error::invalid("need at least one sample per class and one subject pair"));
    }
    let mut plan = Vec::with_capacity(NUM_CLASSES * subject_pairs * samples_per_class);
    for label in 0..NUM_CLASSES {
        for pair in 0..subject_pairs {
            for repetition in 0..samples_per_class {
                plan.push(ScenePlan {
                    label,
                    pair,
                    repetition,
                    seed: derive(seed, &[label as u64, pair as u64, repetition as u64]),
                });
            }
        }
    }
    Ok(plan)
}

/// Materializes every sample of a dataset plan. Intended for small radar
/// configurations; full-size snapshots are better streamed one at a time.
pub fn dataset(
    template: &SceneTemplate,
    samples_per_class: usize,
    subject_pairs: usize,
    seed: u64,
) -> Result<Vec<(SnapshotMatrix, usize)>> {
    dataset_plan(samples_per_class, subject_pairs, seed)?
        .iter()
        .map(|plan| Ok((synthesize_scene(&plan.scene_spec(template)?)?, plan.label)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::range::{range_map, reshape_pulses};
    use std::f64::consts::FRAC_PI_2;

    fn small_radar() -> RadarParams {
        RadarParams {
            adc_rate: 64e3,
            observation_time: 0.25,
            ..RadarParams::default()
        }
    }

    fn template(radar: RadarParams) -> SceneTemplate {
        SceneTemplate {
            radar,
            array: ArrayConfig::half_wavelength(4, radar.wavelength()).unwrap(),
            azimuths: [60f64.to_radians(), 120f64.to_radians()],
            person_range: 2.0,
            reflectivity: [1.0, 1.0],
            noise_variance: 0.0,
        }
    }

    fn static_person(range: f64, azimuth: f64) -> Person {
        Person {
            azimuth,
            range,
            sign: SignClass::Breathe,
            kinematics: SignKinematics {
                class: SignClass::Breathe,
                scatterers: vec![LimbScatterer::fixed("point", 0.0, 1.0)],
            },
            reflectivity: 1.0,
        }
    }

    #[test]
    fn default_dimensions() {
        let r = RadarParams::default();
        assert_eq!(r.fast_time_samples().unwrap(), 512);
        assert_eq!(r.pulses().unwrap(), 4000);
        assert_eq!(r.total_samples().unwrap(), 2_048_000);
        assert!((r.range_resolution() - 0.0375).abs() < 1e-4);
        let bad = RadarParams {
            adc_rate: 1000.5e3,
            ..r
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn label_codec_round_trip() {
        for label in 0..NUM_CLASSES {
            let (a, b) = decode_label(label).unwrap();
            assert_eq!(encode_label(a, b), label);
        }
        assert_eq!(label_name(0), "B-B");
        assert_eq!(label_name(6), "D-B");
        assert_eq!(label_name(8), "D-D");
        assert!(decode_label(9).is_err());
        assert_eq!("Drink".parse::<SignClass>().unwrap(), SignClass::Drink);
    }

    #[test]
    fn kinematics_deterministic_and_jittered() {
        let a = kinematics_for(SignClass::Breathe, 0, 4.0);
        let b = kinematics_for(SignClass::Breathe, 0, 4.0);
        let c = kinematics_for(SignClass::Breathe, 1, 4.0);
        assert_eq!(a, b);
        assert_ne!(a, c);
        // every jittered parameter stays inside the ±15% band of the template
        for (sa, sc) in a.scatterers.iter().zip(&c.scatterers) {
            for (ma, mc) in sa.motions.iter().zip(&sc.motions) {
                match (ma, mc) {
                    (Motion::Excursion { depth: da, rise: ra, .. }, Motion::Excursion { depth: dc, rise: rc, .. }) => {
                        let lo = (1.0 - JITTER) / (1.0 + JITTER);
                        let hi = (1.0 + JITTER) / (1.0 - JITTER);
                        assert!((lo..=hi).contains(&(dc / da)));
                        assert!((lo..=hi).contains(&(rc / ra)));
                    }
                    (Motion::Oscillation { amplitude: aa, .. }, Motion::Oscillation { amplitude: ac, .. }) => {
                        assert!((0.005 * 0.85..=0.005 * 1.15).contains(aa));
                        assert!((0.005 * 0.85..=0.005 * 1.15).contains(ac));
                    }
                    _ => panic!("template shape changed between seeds"),
                }
            }
        }
    }

    #[test]
    fn drink_hand_returns_to_rest() {
        for seed in 0..20 {
            let k = kinematics_for(SignClass::Drink, seed, 4.0);
            let hand = k.scatterers.iter().find(|s| s.name == "hand").unwrap();
            // trapezoidal integral of ρ'(t)
            let dt = 1e-4;
            let steps = (4.0 / dt) as usize;
            let mut disp = 0.0;
            let mut max_disp: f64 = 0.0;
            for i in 0..steps {
                let t = i as f64 * dt;
                disp += 0.5 * (hand.velocity(t) + hand.velocity(t + dt)) * dt;
                max_disp = max_disp.max(disp.abs());
            }
            assert!(disp.abs() < 1e-6, "net displacement {disp}");
            assert!(max_disp > 0.1);
            assert!(k.motion_end() < 4.0);
        }
    }

    #[test]
    fn templates_respect_slow_time_band() {
        let radar = RadarParams::default();
        for class in SignClass::ALL {
            for seed in 0..50 {
                let k = kinematics_for(class, seed, 4.0);
                for s in &k.scatterers {
                    let fd = radar.doppler(s.max_sampled_speed(1e-4, 40_000));
                    assert!(fd < radar.prf() / 2.0, "{class} {}: {fd}", s.name);
                    if class == SignClass::Breathe {
                        assert!(fd < 50.0, "breathe {} at {fd} Hz", s.name);
                    }
                }
            }
        }
    }

    #[test]
    fn static_scatterer_beat_bin() {
        let radar = small_radar();
        let p = radar.fast_time_samples().unwrap();
        let range = 1.7;
        let spec = SceneSpec {
            persons: vec![static_person(range, FRAC_PI_2)],
            noise_variance: 0.0,
            radar,
            array: ArrayConfig::half_wavelength(2, radar.wavelength()).unwrap(),
            seed: 0,
        };
        let s = synthesize_scene(&spec).unwrap();
        let expected = radar.beat_bin(range).unwrap();
        for m in 0..2 {
            let r = range_map(&reshape_pulses(s.column(m), p).unwrap());
            for q in 0..r.pulses() {
                let col = r.column(q);
                let peak = (0..p).max_by(|&a, &b| col[a].norm().total_cmp(&col[b].norm())).unwrap();
                assert_eq!(peak, expected);
            }
        }
    }

    #[test]
    fn zero_reflectivity_second_person() {
        let t = template(small_radar());
        let mut spec = scene_from_seed(&t, encode_label(SignClass::Drink, SignClass::Come), 11).unwrap();
        spec.persons[1].reflectivity = 0.0;
        let both = synthesize_scene(&spec).unwrap();
        spec.persons.truncate(1);
        let single = synthesize_scene(&spec).unwrap();
        assert_eq!(both, single);
    }

    #[test]
    fn superposition_and_energy_scaling() {
        let t = template(small_radar());
        let spec = scene_from_seed(&t, encode_label(SignClass::Come, SignClass::Drink), 3).unwrap();
        let both = synthesize_clean(&spec).unwrap();
        let mut a = spec.clone();
        a.persons.truncate(1);
        let mut b = spec.clone();
        b.persons.remove(0);
        let sa = synthesize_clean(&a).unwrap();
        let sb = synthesize_clean(&b).unwrap();
        for ((x, y), z) in both.as_slice().iter().zip(sa.as_slice()).zip(sb.as_slice()) {
            assert!((x - (y + z)).norm() < 1e-12);
        }
        let mut doubled = spec.clone();
        doubled.persons.iter_mut().for_each(|p| p.reflectivity *= 2.0);
        let e1 = both.energy();
        let e2 = synthesize_clean(&doubled).unwrap().energy();
        assert!((e2 / e1 - 4.0).abs() < 1e-9);
    }

    #[test]
    fn determinism_and_noise() {
        let mut t = template(small_radar());
        t.noise_variance = 0.5;
        let spec = scene_from_seed(&t, 4, 99).unwrap();
        let a = synthesize_scene(&spec).unwrap();
        let b = synthesize_scene(&spec).unwrap();
        assert_eq!(a, b);
        let clean = synthesize_clean(&spec).unwrap();
        assert_ne!(a, clean);
    }

    #[test]
    fn aliasing_rejected_with_scatterer_name() {
        let radar = small_radar();
        let mut person = static_person(2.0, 1.0);
        person.kinematics.scatterers[0] = LimbScatterer {
            name: "whip".into(),
            motions: vec![Motion::Oscillation {
                amplitude: 0.05,
                frequency: 5.0,
                phase: 0.0,
            }],
            ..LimbScatterer::fixed("whip", 0.0, 1.0)
        };
        let spec = SceneSpec {
            persons: vec![person],
            noise_variance: 0.0,
            radar,
            array: ArrayConfig::half_wavelength(2, radar.wavelength()).unwrap(),
            seed: 0,
        };
        match synthesize_scene(&spec) {
            Err(Error::DopplerAliasing(msg)) => assert!(msg.contains("whip"), "{msg}"),
            other => panic!("expected aliasing error, got {other:?}"),
        }
    }

    #[test]
    fn scene_validation() {
        let t = template(small_radar());
        let mut spec = scene_from_seed(&t, 0, 0).unwrap();
        spec.persons[1].azimuth = spec.persons[0].azimuth;
        assert!(synthesize_scene(&spec).is_err());
        spec.persons.clear();
        assert!(synthesize_scene(&spec).is_err());
    }

    #[test]
    fn dataset_labels_and_counts() {
        let plan = dataset_plan(20, 2, 7).unwrap();
        assert_eq!(plan.len(), 360);
        let one = dataset_plan(1, 1, 7).unwrap();
        let labels: Vec<usize> = one.iter().map(|p| p.label).collect();
        assert_eq!(labels, (0..9).collect::<Vec<_>>());
        assert!(dataset_plan(0, 1, 0).is_err());
        let t = template(small_radar());
        for p in &plan {
            let spec = p.scene_spec(&t).unwrap();
            let (a, b) = decode_label(p.label).unwrap();
            assert_eq!((spec.persons[0].sign, spec.persons[1].sign), (a, b));
            assert_eq!(spec.persons[0].kinematics.class, a);
        }
        let samples = dataset(&t, 1, 1, 3).unwrap();
        assert_eq!(samples.len(), 9);
        assert_eq!(samples[4].1, 4);
        assert_eq!(samples[0].0.cols(), 4);
    }
}
