//! Desk-scale image datasets: a CSV loader and a seeded synthetic generator.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of samples placed in the training split.
pub const TRAIN_FRACTION: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    /// (channels, height, width).
    pub shape: [usize; 3],
    pub classes: usize,
    /// Row-major samples, values in [0, 1].
    pub inputs: Vec<f64>,
    pub labels: Vec<usize>,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        shape: [usize; 3],
        classes: usize,
        inputs: Vec<f64>,
        labels: Vec<usize>,
        split_seed: u64,
    ) -> Result<Self> {
        let sample = shape.iter().product::<usize>();
        if sample == 0 || inputs.len() != labels.len() * sample {
            return Err(Error::Shape {
                expected: format!("{} x {:?}", labels.len(), shape),
                found: inputs.len().to_string(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::Schema(format!("label {bad} outside [0, {classes})")));
        }
        let (train, val) = split_indices(labels.len(), split_seed);
        Ok(Dataset {
            name: name.into(),
            shape,
            classes,
            inputs,
            labels,
            train,
            val,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample_len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let n = self.sample_len();
        &self.inputs[i * n..(i + 1) * n]
    }
}

/// Deterministic shuffled 80/20 split.
pub fn split_indices(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((n as f64) * TRAIN_FRACTION).round() as usize;
    let cut = cut.min(n);
    let mut train = idx[..cut].to_vec();
    let mut val = idx[cut..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

#[derive(Clone, Debug)]
pub struct CsvOptions {
    /// Channels per sample; height and width are inferred as a square.
    pub channels: usize,
    /// Class count; inferred as `max label + 1` when absent.
    pub classes: Option<usize>,
    pub split_seed: u64,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions {
            channels: 1,
            classes: None,
            split_seed: 0,
        }
    }
}

/// Loads `label,p0,p1,...` rows. Pixels are row-major and either in [0, 1]
/// or in [0, 255]; the latter is detected by a maximum above 1.
pub fn load_csv(path: &Path, opts: &CsvOptions) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    read_csv(file, &name, opts)
}

pub fn read_csv<R: std::io::Read>(reader: R, name: &str, opts: &CsvOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let parse_err = |e: csv::Error| {
        let (line, column) = e
            .position()
            .map(|p| (p.line() as usize, p.byte() as usize))
            .unwrap_or((0, 0));
        Error::Parse {
            message: e.to_string(),
            line,
            column,
        }
    };
    let header = rdr.headers().map_err(parse_err)?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Parse {
            message: "empty file".into(),
            line: 1,
            column: 0,
        });
    }
    let width = header.len() - 1;
    if width == 0 || &header[0] != "label" {
        return Err(Error::Schema("header must start with `label` followed by pixel columns".into()));
    }
    if width % opts.channels != 0 {
        return Err(Error::Schema(format!("{width} pixels not divisible by {} channels", opts.channels)));
    }
    let plane = width / opts.channels;
    let side = (plane as f64).sqrt().round() as usize;
    if side * side != plane {
        return Err(Error::Schema(format!("{plane} pixels per channel is not a square image")));
    }

    let mut labels = Vec::new();
    let mut inputs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(parse_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let field_err = |col: usize, msg: String| Error::Parse {
            message: msg,
            line,
            column: col,
        };
        let label: i64 = rec[0]
            .trim()
            .parse()
            .map_err(|_| field_err(0, format!("label {:?} is not an integer", &rec[0])))?;
        if label < 0 {
            return Err(Error::Schema(format!("negative label {label} on line {line}")));
        }
        labels.push(label as usize);
        for (c, field) in rec.iter().enumerate().skip(1) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| field_err(c, format!("pixel {field:?} is not a number")))?;
            if !v.is_finite() || !(0.0..=255.0).contains(&v) {
                return Err(Error::Schema(format!("pixel {v} on line {line} outside [0, 255]")));
            }
            inputs.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::Parse {
            message: "no data rows".into(),
            line: 2,
            column: 0,
        });
    }
    if inputs.iter().any(|&v| v > 1.0) {
        inputs.iter_mut().for_each(|v| *v /= 255.0);
    }
    let max_label = *labels.iter().max().unwrap();
    let classes = match opts.classes {
        Some(c) if max_label >= c => {
            return Err(Error::Schema(format!("label {max_label} outside [0, {c})")));
        }
        Some(c) => c,
        None => max_label + 1,
    };
    Dataset::new(name, [opts.channels, side, side], classes.max(2), inputs, labels, opts.split_seed)
}

/// Writes a dataset in the loader's CSV format (pixels in [0, 1]).
pub fn write_csv<W: std::io::Write>(data: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["label".to_string()];
    header.extend((0..data.sample_len()).map(|i| format!("p{i}")));
    w.write_record(&header).map_err(|e| Error::Io(e.into()))?;
    for i in 0..data.len() {
        let mut row = vec![data.labels[i].to_string()];
        row.extend(data.sample(i).iter().map(|v| format!("{v}")));
        w.write_record(&row).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

/// Two linearly separable classes of single Gaussian blobs on an 8x8 grid.
///
/// Class 0 blobs are narrow, class 1 blobs are wide, so total intensity
/// separates them regardless of blob position. Labels alternate 0, 1, 0, ...
pub fn synthetic_blobs(n: usize, seed: u64) -> Dataset {
    const SIDE: usize = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.05).expect("valid sigma");
    let mut inputs = Vec::with_capacity(n * SIDE * SIDE);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let sigma = if label == 0 {
            rng.random_range(0.7..1.1)
        } else {
            rng.random_range(1.6..2.2)
        };
        let cy: f64 = rng.random_range(2.0..5.0);
        let cx: f64 = rng.random_range(2.0..5.0);
        for y in 0..SIDE {
            for x in 0..SIDE {
                let d2 = (y as f64 - cy).powi(2) + (x as f64 - cx).powi(2);
                let v = (-d2 / (2.0 * sigma * sigma)).exp() + noise.sample(&mut rng);
                inputs.push(v.clamp(0.0, 1.0));
            }
        }
        labels.push(label);
    }
    Dataset::new("synthetic-blobs", [1, SIDE, SIDE], 2, inputs, labels, seed)
        .expect("generator output is well formed")
}
