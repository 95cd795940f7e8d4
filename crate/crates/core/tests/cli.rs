use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sign_radar::harness::io::{load_snapshot, Manifest};
use sign_radar::harness::preprocess;

fn sign_radar(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sign-radar"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

const SMOKE: &str = "# small and fast
adc_rate_hz = 64000
observation_time_s = 1
samples_per_class = 2
subject_pairs = 1
epochs = 2
split_ratio = 0.5
";

#[test]
fn staged_commands_produce_every_artifact() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("smoke.cfg"), SMOKE).unwrap();

    ok(sign_radar(dir, &["generate", "--config", "smoke.cfg", "--out", "data"]));
    let manifest = Manifest::load(&dir.join("data")).unwrap();
    assert_eq!(manifest.samples.len(), 18);
    assert!(dir.join("data/samples/sample_00017.bin").is_file());

    ok(sign_radar(dir, &["preprocess", "--dataset", "data", "--out", "feat"]));
    assert!(dir.join("feat/features.bin").is_file());

    ok(sign_radar(dir, &["train", "--features", "feat", "--model", "model.bin"]));
    let out = ok(sign_radar(
        dir,
        &["evaluate", "--features", "feat", "--model", "model.bin", "--report", "eval/report.txt"],
    ));
    let report = fs::read_to_string(dir.join("eval/report.txt")).unwrap();
    assert_eq!(String::from_utf8(out.stdout).unwrap(), report);
    assert!(report.contains("Overall accuracy"));
    let csv = fs::read_to_string(dir.join("eval/report.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);

    // the exported image is the library's image for that sample
    ok(sign_radar(
        dir,
        &[
            "export-spectrogram",
            "--sample",
            "data/samples/sample_00004.bin",
            "--out",
            "beam2.pgm",
            "--view",
            "beam2",
            "--csv",
            "beam2.csv",
        ],
    ));
    let s = load_snapshot(&dir.join("data/samples/sample_00004.bin"), manifest.config.radar.adc_rate).unwrap();
    let [_, _, beam2] = preprocess(&s, &manifest.config).unwrap();
    let mut pgm = Vec::new();
    beam2.write_pgm(&mut pgm).unwrap();
    assert_eq!(fs::read(dir.join("beam2.pgm")).unwrap(), pgm);
    let mut csv = Vec::new();
    beam2.write_csv(&mut csv).unwrap();
    assert_eq!(fs::read(dir.join("beam2.csv")).unwrap(), csv);
}

#[test]
fn bad_inputs_exit_nonzero_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("bad.cfg"), "snr_db = loud\n").unwrap();
    fs::write(dir.join("unknown.cfg"), "beams = 3\n").unwrap();
    for args in [
        &["run-all", "--config", "bad.cfg"][..],
        &["run-all", "--config", "unknown.cfg"],
        &["run-all", "--config", "missing.cfg"],
        &["preprocess", "--dataset", "nowhere", "--out", "f"],
        &["export-spectrogram", "--sample", "nothing.bin", "--out", "x.pgm"],
    ] {
        let out = sign_radar(dir, args);
        assert!(!out.status.success(), "{args:?} succeeded");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.starts_with("error: "), "{args:?}: {err}");
    }
}
