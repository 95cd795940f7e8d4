//! On-disk formats: raw snapshots, dataset manifests and feature files.
//!
//! All binaries are little-endian.
//!
//! * Snapshot: `SNAP`, u32 N, u32 M, then N·M `(re, im)` f32 pairs,
//!   row-major.
//! * Features: `SFEA`, u32 version, u32 count, u32 image side, then per
//!   sample u32 label, u64 seed and three images of side² f32 (combined,
//!   beam 1, beam 2), row-major.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use super::config::PipelineConfig;
use super::pipeline::SampleTriple;
use crate::array::SnapshotMatrix;
use crate::scene::{label_name, NUM_CLASSES};
use crate::tfr::{SpecImage, IMAGE_SIZE};
use crate::{Error, Result};

const SNAPSHOT_MAGIC: &[u8; 4] = b"SNAP";
const FEATURES_MAGIC: &[u8; 4] = b"SFEA";
const FEATURES_VERSION: u32 = 1;
pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const FEATURES_FILE: &str = "features.bin";
/// Config copy stored beside preprocessed features.
pub const FEATURES_CONFIG_FILE: &str = "config.txt";

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f32s(r: &mut impl Read, n: usize) -> Result<Vec<f32>> {
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect())
}

fn expect_end(r: &mut impl Read, what: &'static str) -> Result<()> {
    let mut b = [0u8; 1];
    if r.read(&mut b)? != 0 {
        return Err(Error::format(what, "trailing bytes"));
    }
    Ok(())
}

/// Rounds every entry to single precision, the resolution of the sample
/// file, so in-memory and on-disk pipelines see identical data.
pub fn quantize_f32(s: &mut SnapshotMatrix) {
    for z in s.as_mut_slice() {
        *z = Complex64::new(z.re as f32 as f64, z.im as f32 as f64);
    }
}

pub fn write_snapshot(s: &SnapshotMatrix, out: impl Write) -> Result<()> {
    let rows = u32::try_from(s.rows()).map_err(|_| Error::invalid("snapshot too tall for u32"))?;
    let cols = u32::try_from(s.cols()).map_err(|_| Error::invalid("snapshot too wide for u32"))?;
    let mut out = BufWriter::new(out);
    out.write_all(SNAPSHOT_MAGIC)?;
    out.write_all(&rows.to_le_bytes())?;
    out.write_all(&cols.to_le_bytes())?;
    for z in s.as_slice() {
        out.write_all(&(z.re as f32).to_le_bytes())?;
        out.write_all(&(z.im as f32).to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_snapshot(input: impl Read, sample_rate: f64) -> Result<SnapshotMatrix> {
    let mut r = BufReader::new(input);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::format("snapshot file", "bad magic"));
    }
    let rows = read_u32(&mut r)? as usize;
    let cols = read_u32(&mut r)? as usize;
    let values = read_f32s(&mut r, rows * cols * 2)?;
    expect_end(&mut r, "snapshot file")?;
    let data = values
        .chunks_exact(2)
        .map(|c| Complex64::new(c[0] as f64, c[1] as f64))
        .collect();
    SnapshotMatrix::from_row_major(data, rows, cols, sample_rate)
        .map_err(|e| Error::format("snapshot file", e.to_string()))
}

pub fn save_snapshot(s: &SnapshotMatrix, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::from(e).context(format!("creating {}", path.display())))?;
    write_snapshot(s, file).map_err(|e| e.context(format!("writing {}", path.display())))
}

pub fn load_snapshot(path: &Path, sample_rate: f64) -> Result<SnapshotMatrix> {
    let file = File::open(path).map_err(|e| Error::from(e).context(format!("opening {}", path.display())))?;
    read_snapshot(file, sample_rate).map_err(|e| e.context(format!("reading {}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub seed: u64,
    pub label: usize,
    /// Sample file path relative to the manifest's directory.
    pub path: String,
}

/// Dataset description: generating config plus one line per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub config: PipelineConfig,
    pub samples: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn sample_path(index: usize) -> String {
        format!("samples/sample_{index:05}.bin")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# sign-radar dataset manifest");
        let _ = writeln!(s, "format_version = {MANIFEST_VERSION}");
        for (k, v) in self.config.entries() {
            let _ = writeln!(s, "config.{k} = {v}");
        }
        for label in 0..NUM_CLASSES {
            let _ = writeln!(s, "label.{label} = {}", label_name(label));
        }
        for e in &self.samples {
            let _ = writeln!(s, "sample = {} {} {}", e.seed, e.label, e.path);
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::format("manifest", format!("line {line}: {msg}"));
        let mut version = None;
        let mut config_text = String::new();
        let mut samples = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| bad(i + 1, "expected key = value".into()))?;
            if key == "format_version" {
                version = Some(value.parse::<u32>().map_err(|_| bad(i + 1, "bad version".into()))?);
            } else if let Some(k) = key.strip_prefix("config.") {
                let _ = writeln!(config_text, "{k} = {value}");
            } else if let Some(l) = key.strip_prefix("label.") {
                let label: usize = l.parse().map_err(|_| bad(i + 1, format!("bad label index '{l}'")))?;
                if label >= NUM_CLASSES || label_name(label) != value {
                    return Err(bad(i + 1, format!("label map entry {label} = {value} disagrees with the codec")));
                }
            } else if key == "sample" {
                let mut parts = value.splitn(3, ' ');
                let mut field = |name: &str| {
                    parts
                        .next()
                        .filter(|p| !p.is_empty())
                        .ok_or_else(|| bad(i + 1, format!("sample line lacks {name}")))
                };
                let seed = field("seed")?.parse().map_err(|_| bad(i + 1, "bad seed".into()))?;
                let label: usize = field("label")?.parse().map_err(|_| bad(i + 1, "bad label".into()))?;
                let path = field("path")?.to_string();
                if label >= NUM_CLASSES {
                    return Err(bad(i + 1, format!("label {label} out of range")));
                }
                samples.push(ManifestEntry { seed, label, path });
            } else {
                return Err(bad(i + 1, format!("unknown key '{key}'")));
            }
        }
        match version {
            Some(MANIFEST_VERSION) => {}
            Some(v) => return Err(Error::format("manifest", format!("unsupported format version {v}"))),
            None => return Err(Error::format("manifest", "missing format_version")),
        }
        let config = PipelineConfig::parse(&config_text).map_err(|e| e.context("manifest config"))?;
        Ok(Self { config, samples })
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, self.to_text()).map_err(|e| Error::from(e).context(format!("writing {}", path.display())))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::from(e).context(format!("reading {}", path.display())))?;
        Self::parse(&text).map_err(|e| e.context(path.display().to_string()))
    }

    /// Looks for a manifest in the sample's directory and its ancestors.
    pub fn find_for_sample(sample: &Path) -> Result<(PathBuf, Self)> {
        let start = sample.parent().unwrap_or(Path::new("."));
        for dir in start.ancestors() {
            let dir = if dir.as_os_str().is_empty() { Path::new(".") } else { dir };
            if dir.join(MANIFEST_FILE).is_file() {
                return Ok((dir.to_path_buf(), Self::load(dir)?));
            }
        }
        Err(Error::Config(format!(
            "no {MANIFEST_FILE} found above {}; pass --config",
            sample.display()
        )))
    }
}

/// Preprocessed image triples with their labels and sample seeds.
pub fn write_features(samples: &[SampleTriple], out: impl Write) -> Result<()> {
    let mut out = BufWriter::new(out);
    out.write_all(FEATURES_MAGIC)?;
    out.write_all(&FEATURES_VERSION.to_le_bytes())?;
    out.write_all(&(samples.len() as u32).to_le_bytes())?;
    out.write_all(&(IMAGE_SIZE as u32).to_le_bytes())?;
    for s in samples {
        out.write_all(&(s.label as u32).to_le_bytes())?;
        out.write_all(&s.seed.to_le_bytes())?;
        for img in s.images() {
            for p in img.pixels() {
                out.write_all(&p.to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_features(input: impl Read) -> Result<Vec<SampleTriple>> {
    let mut r = BufReader::new(input);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FEATURES_MAGIC {
        return Err(Error::format("features file", "bad magic"));
    }
    let version = read_u32(&mut r)?;
    if version != FEATURES_VERSION {
        return Err(Error::format("features file", format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)? as usize;
    let side = read_u32(&mut r)? as usize;
    if side != IMAGE_SIZE {
        return Err(Error::format("features file", format!("image side {side}, expected {IMAGE_SIZE}")));
    }
    let mut samples = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let label = read_u32(&mut r)? as usize;
        if label >= NUM_CLASSES {
            return Err(Error::format("features file", format!("label {label} out of range")));
        }
        let seed = read_u64(&mut r)?;
        let mut img = || -> Result<SpecImage> {
            SpecImage::from_pixels(read_f32s(&mut r, side * side)?)
                .map_err(|e| Error::format("features file", e.to_string()))
        };
        let combined = img()?;
        let beam1 = img()?;
        let beam2 = img()?;
        samples.push(SampleTriple {
            combined,
            beam1,
            beam2,
            label,
            seed,
        });
    }
    expect_end(&mut r, "features file")?;
    Ok(samples)
}

pub fn save_features(samples: &[SampleTriple], dir: &Path) -> Result<()> {
    let path = dir.join(FEATURES_FILE);
    let file = File::create(&path).map_err(|e| Error::from(e).context(format!("creating {}", path.display())))?;
    write_features(samples, file).map_err(|e| e.context(format!("writing {}", path.display())))
}

pub fn load_features(dir: &Path) -> Result<Vec<SampleTriple>> {
    let path = dir.join(FEATURES_FILE);
    let file = File::open(&path).map_err(|e| Error::from(e).context(format!("opening {}", path.display())))?;
    read_features(file).map_err(|e| e.context(format!("reading {}", path.display())))
}
