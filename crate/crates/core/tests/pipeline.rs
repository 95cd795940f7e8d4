use std::fs;
use std::path::Path;

use sign_radar::array::SnapshotMatrix;
use sign_radar::harness::experiment::{generate_dataset, preprocess_dataset};
use sign_radar::harness::io::{self, Manifest};
use sign_radar::harness::pipeline::{build_features, plan, slow_time_signals};
use sign_radar::harness::{preprocess, run_experiment, PipelineConfig};
use sign_radar::scene::{kinematics_for, synthesize_clean, synthesize_scene, Person, SceneSpec, SignClass};
use sign_radar::tfr::{spectrogram, SpecImage};
use sign_radar::Error;

/// Full slow-time length (4 s of pulses) at a reduced fast-time rate:
/// P = 64 covers 2.4 m of range at the default bandwidth.
fn small_config() -> PipelineConfig {
    PipelineConfig::parse("adc_rate_hz = 64000\n").unwrap()
}

fn person(cfg: &PipelineConfig, slot: usize, sign: SignClass, variation: u64) -> Person {
    Person {
        azimuth: cfg.look_angles()[slot],
        range: cfg.person_range_m,
        sign,
        kinematics: kinematics_for(sign, variation, cfg.radar.observation_time),
        reflectivity: 1.0,
    }
}

fn scene(cfg: &PipelineConfig, persons: Vec<Person>, noise_variance: f64, seed: u64) -> SceneSpec {
    SceneSpec {
        persons,
        noise_variance,
        radar: cfg.radar,
        array: cfg.array().unwrap(),
        seed,
    }
}

fn noise(cfg: &PipelineConfig) -> f64 {
    cfg.scene_template().unwrap().noise_variance
}

#[test]
fn beam_image_follows_its_signer() {
    let cfg = small_config();
    let breathe = person(&cfg, 0, SignClass::Breathe, 5);
    let drink = person(&cfg, 1, SignClass::Drink, 6);
    let both = synthesize_scene(&scene(&cfg, vec![breathe.clone(), drink.clone()], noise(&cfg), 1)).unwrap();
    let alone = synthesize_scene(&scene(&cfg, vec![breathe], noise(&cfg), 2)).unwrap();
    let [mixed_combined, mixed_beam1, mixed_beam2] = preprocess(&both, &cfg).unwrap();
    let [_, ref_beam1, _] = preprocess(&alone, &cfg).unwrap();
    let drink_only = synthesize_scene(&scene(&cfg, vec![drink], noise(&cfg), 3)).unwrap();
    let [_, _, ref_beam2] = preprocess(&drink_only, &cfg).unwrap();

    let sim = mixed_beam1.cosine_similarity(&ref_beam1);
    assert!(sim >= 0.8, "θ1 image vs Breathe reference: {sim}");
    assert!(mixed_beam2.cosine_similarity(&ref_beam2) >= 0.8);
    // the combined receiver sees both signers, so it resembles neither beam exactly
    assert!(mixed_combined.cosine_similarity(&mixed_beam1) < 0.999);
}

#[test]
fn single_person_combined_matches_matched_beam() {
    let cfg = small_config();
    let p = person(&cfg, 0, SignClass::Come, 9);
    // without noise the matched beam is the combined signal scaled by M,
    // which the image normalization removes
    let s = synthesize_clean(&scene(&cfg, vec![p], 0.0, 4)).unwrap();
    let [combined, beam1, _] = preprocess(&s, &cfg).unwrap();
    let sim = combined.cosine_similarity(&beam1);
    assert!(sim >= 0.999, "combined vs matched beam: {sim}");
}

#[test]
fn empty_scene_is_an_error_with_context() {
    let cfg = small_config();
    let n = cfg.radar.total_samples().unwrap();
    let s = SnapshotMatrix::zeros(n, cfg.num_elements, cfg.radar.adc_rate);
    let err = preprocess(&s, &cfg).unwrap_err();
    assert!(matches!(err.root(), Error::InvalidArgument(_)), "{err}");
    assert!(err.to_string().contains("combined path"), "{err}");
}

#[test]
fn wrong_dimensions_are_rejected() {
    let cfg = small_config();
    let s = SnapshotMatrix::zeros(100, cfg.num_elements, cfg.radar.adc_rate);
    assert!(preprocess(&s, &cfg).is_err());
}

/// With the exact null between 60° and 120° and no noise, the θ₁ image of
/// scene(A, B) is the θ₂ image of scene(B, A).
#[test]
fn swapping_signers_swaps_beam_images() {
    let cfg = small_config();
    let a = |slot| person(&cfg, slot, SignClass::Drink, 21);
    let b = |slot| person(&cfg, slot, SignClass::Come, 22);
    let ab = synthesize_clean(&scene(&cfg, vec![a(0), b(1)], 0.0, 0)).unwrap();
    let ba = synthesize_clean(&scene(&cfg, vec![b(0), a(1)], 0.0, 0)).unwrap();
    let [_, ab1, ab2] = preprocess(&ab, &cfg).unwrap();
    let [_, ba1, ba2] = preprocess(&ba, &cfg).unwrap();
    let max_diff = |x: &SpecImage, y: &SpecImage| {
        x.pixels().iter().zip(y.pixels()).map(|(p, q)| (p - q).abs()).fold(0.0f32, f32::max)
    };
    assert!(max_diff(&ab1, &ba2) < 1e-6, "{}", max_diff(&ab1, &ba2));
    assert!(max_diff(&ab2, &ba1) < 1e-6, "{}", max_diff(&ab2, &ba1));
    assert!(max_diff(&ab1, &ab2) > 0.1);
}

fn doppler_fraction_above(cfg: &PipelineConfig, sign: SignClass, variation: u64, hz: f64) -> f64 {
    let s = synthesize_clean(&scene(cfg, vec![person(cfg, 0, sign, variation)], 0.0, 0)).unwrap();
    let ([combined, _, _], _) = slow_time_signals(&s, cfg).unwrap();
    let spec = spectrogram(&combined, &cfg.stft_params().unwrap(), cfg.radar.prf()).unwrap();
    let freqs = spec.column_frequencies();
    let mut above = 0.0;
    for f in 0..spec.frames() {
        for (p, fq) in spec.frame(f).iter().zip(&freqs) {
            if fq.abs() > hz {
                above += p;
            }
        }
    }
    above / spec.total_power()
}

#[test]
fn breathe_stays_narrowband_and_drink_does_not() {
    let cfg = small_config();
    for variation in 0..4 {
        let b = doppler_fraction_above(&cfg, SignClass::Breathe, variation, 50.0);
        assert!(b < 0.01, "Breathe energy above 50 Hz: {b}");
        let d = doppler_fraction_above(&cfg, SignClass::Drink, variation, 50.0);
        assert!(d >= 0.10, "Drink energy above 50 Hz: {d}");
    }
}

#[test]
fn snapshot_file_round_trip_is_bit_exact() {
    let cfg = small_config();
    let plans = plan(&cfg).unwrap();
    let s = sign_radar::harness::pipeline::generate_sample(&cfg, &plans[3]).unwrap();
    let mut bytes = Vec::new();
    io::write_snapshot(&s, &mut bytes).unwrap();
    assert_eq!(&bytes[..4], b"SNAP");
    assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize, s.rows());
    assert_eq!(bytes.len(), 12 + s.rows() * s.cols() * 8);
    let back = io::read_snapshot(&bytes[..], cfg.radar.adc_rate).unwrap();
    assert_eq!(back, s);
    let mut again = Vec::new();
    io::write_snapshot(&back, &mut again).unwrap();
    assert_eq!(bytes, again);
    assert!(io::read_snapshot(&bytes[..bytes.len() - 1], 1.0).is_err());
}

#[test]
fn manifest_round_trip() {
    let mut cfg = small_config();
    cfg.samples_per_class = 2;
    cfg.subject_pairs = 1;
    cfg.train.stop_at_accuracy = Some(0.5);
    let manifest = Manifest {
        config: cfg.clone(),
        samples: plan(&cfg)
            .unwrap()
            .iter()
            .enumerate()
            .map(|(i, p)| io::ManifestEntry {
                seed: p.seed,
                label: p.label,
                path: Manifest::sample_path(i),
            })
            .collect(),
    };
    let text = manifest.to_text();
    assert!(text.contains("label.7 = D-C"));
    assert_eq!(Manifest::parse(&text).unwrap(), manifest);
    assert!(Manifest::parse(&text.replace("format_version = 1", "format_version = 9")).is_err());
    assert!(Manifest::parse(&text.replace("label.7 = D-C", "label.7 = C-D")).is_err());
}

fn files_equal(a: &Path, b: &Path) {
    let (x, y) = (fs::read(a).unwrap(), fs::read(b).unwrap());
    assert!(x == y, "{} and {} differ", a.display(), b.display());
}

/// generate → files → preprocess reproduces the in-memory features, and
/// generation is byte-deterministic.
#[test]
fn on_disk_pipeline_matches_in_memory() {
    let mut cfg = small_config();
    cfg.samples_per_class = 1;
    cfg.subject_pairs = 1;
    let tmp = tempfile::tempdir().unwrap();
    let (d1, d2) = (tmp.path().join("d1"), tmp.path().join("d2"));
    let manifest = generate_dataset(&cfg, &d1).unwrap();
    generate_dataset(&cfg, &d2).unwrap();
    assert_eq!(manifest.samples.len(), 9);
    files_equal(&d1.join("manifest.txt"), &d2.join("manifest.txt"));
    for e in &manifest.samples {
        files_equal(&d1.join(&e.path), &d2.join(&e.path));
    }
    let (_, from_disk) = preprocess_dataset(&d1, &tmp.path().join("f")).unwrap();
    let in_memory = build_features(&cfg, &plan(&cfg).unwrap(), None).unwrap();
    assert_eq!(from_disk, in_memory);
    let reread = io::load_features(&tmp.path().join("f")).unwrap();
    assert_eq!(reread, in_memory);
}

#[test]
fn smoke_experiment_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let mut cfg = PipelineConfig::parse(
            "adc_rate_hz = 64000\nobservation_time_s = 1\nsamples_per_class = 2\nsubject_pairs = 1\n\
             epochs = 2\nsplit_ratio = 0.5\nsave_samples = true\n",
        )
        .unwrap();
        cfg.output_dir = tmp.path().join(name);
        run_experiment(&cfg, |_| {}).unwrap()
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a.confusion.classes(), 9);
    assert_eq!(a.test_size, 9);
    assert_eq!(a.train_log.epochs.len(), 2);
    for row in a.confusion.row_percentages() {
        assert!((row.iter().sum::<f64>() - 100.0).abs() < 0.1);
    }
    assert_eq!(a.report, b.report);
    let (ra, rb) = (tmp.path().join("a"), tmp.path().join("b"));
    for f in [
        "report.txt",
        "confusion.csv",
        "model.bin",
        "features/features.bin",
        "dataset/samples/sample_00017.bin",
    ] {
        files_equal(&ra.join(f), &rb.join(f));
    }
    // config echoes differ only in output_dir
    let strip = |p: &Path, f: &str| {
        fs::read_to_string(p.join(f))
            .unwrap()
            .lines()
            .filter(|l| !l.contains("output_dir"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    for f in ["dataset/manifest.txt", "features/config.txt"] {
        assert_eq!(strip(&ra, f), strip(&rb, f));
    }
    let report = fs::read_to_string(ra.join("report.txt")).unwrap();
    assert!(report.contains("Class-9 (D-D)"));
}
