use std::path::{Path, PathBuf};
use std::str::FromStr;

use evosnn_core::data::{load_csv, synthetic_blobs, CsvOptions, Dataset};
use evosnn_core::{Evaluator, SearchConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Contents of a `--config` file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub search: SearchConfig,
    pub evaluator: Evaluator,
}

impl RunConfig {
    pub fn desk() -> Self {
        RunConfig {
            search: SearchConfig::desk(),
            evaluator: Evaluator::default(),
        }
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| evosnn_core::Error::file(path, e))?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::Core(evosnn_core::Error::Parse {
                message: format!("{}: {e}", path.display()),
                line: e.line(),
                column: e.column(),
            })
        })
    }
}

/// Where samples come from: `synthetic`, `synthetic:<n>:<seed>` or a CSV
/// path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum DatasetSource {
    Synthetic { n: usize, seed: u64 },
    Csv(PathBuf),
}

impl FromStr for DatasetSource {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        if s == "synthetic" {
            return Ok(DatasetSource::Synthetic { n: 700, seed: 7 });
        }
        if let Some(rest) = s.strip_prefix("synthetic:") {
            let parts: Vec<&str> = rest.split(':').collect();
            let bad = || CliError::Usage(format!("expected synthetic:<n>:<seed>, got {s:?}"));
            if parts.len() != 2 {
                return Err(bad());
            }
            let n = parts[0].parse().map_err(|_| bad())?;
            let seed = parts[1].parse().map_err(|_| bad())?;
            if n < 4 {
                return Err(CliError::Usage("synthetic dataset needs at least 4 samples".into()));
            }
            return Ok(DatasetSource::Synthetic { n, seed });
        }
        Ok(DatasetSource::Csv(PathBuf::from(s)))
    }
}

impl std::fmt::Display for DatasetSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DatasetSource::Synthetic { n, seed } => write!(f, "synthetic:{n}:{seed}"),
            DatasetSource::Csv(p) => write!(f, "{}", p.display()),
        }
    }
}

impl From<DatasetSource> for String {
    fn from(d: DatasetSource) -> String {
        d.to_string()
    }
}

impl TryFrom<String> for DatasetSource {
    type Error = CliError;

    fn try_from(s: String) -> CliResult<Self> {
        s.parse()
    }
}

impl DatasetSource {
    pub fn load(&self) -> CliResult<Dataset> {
        Ok(match self {
            DatasetSource::Synthetic { n, seed } => synthetic_blobs(*n, *seed),
            DatasetSource::Csv(p) => load_csv(p, &CsvOptions::default())?,
        })
    }
}

/// SHA-256 over shape, labels, inputs and the split.
pub fn fingerprint(data: &Dataset) -> String {
    let mut h = Sha256::new();
    for d in data.shape {
        h.update((d as u64).to_le_bytes());
    }
    h.update((data.classes as u64).to_le_bytes());
    for &l in &data.labels {
        h.update((l as u64).to_le_bytes());
    }
    for &x in &data.inputs {
        h.update(x.to_le_bytes());
    }
    for list in [&data.train, &data.val] {
        h.update((list.len() as u64).to_le_bytes());
        for &i in list {
            h.update((i as u64).to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub source: DatasetSource,
    pub sha256: String,
    pub samples: usize,
    pub shape: [usize; 3],
    pub classes: usize,
}

impl DatasetInfo {
    pub fn new(source: DatasetSource, data: &Dataset) -> Self {
        DatasetInfo {
            source,
            sha256: fingerprint(data),
            samples: data.len(),
            shape: data.shape,
            classes: data.classes,
        }
    }
}

/// Written before a search starts; enough to repeat it exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub mode: String,
    pub seed: u64,
    pub config: RunConfig,
    pub dataset: DatasetInfo,
    pub started_unix: u64,
    pub outputs: Vec<String>,
}

pub const MANIFEST: &str = "manifest.json";
pub const KNOWLEDGE: &str = "knowledge.jsonl";
pub const ARCHIVE: &str = "archive.jsonl";
pub const PARETO: &str = "pareto.csv";
pub const HYPERVOLUME: &str = "hypervolume.csv";
pub const PREDICTOR: &str = "predictor.csv";
pub const BEST_GENOME: &str = "best_genome.json";
pub const FINAL: &str = "final.json";
pub const WEIGHTS_BIN: &str = "best_weights.bin";
pub const WEIGHTS_JSON: &str = "best_weights.json";
pub const CHECKPOINT: &str = "checkpoint/state.json";
pub const PREDICTOR_JSON: &str = "checkpoint/predictor.json";

impl Manifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| evosnn_core::Error::file(path, e))?;
        Ok(serde_json::from_str(&text).map_err(evosnn_core::Error::from)?)
    }

    pub fn layout() -> Vec<String> {
        [
            MANIFEST,
            KNOWLEDGE,
            ARCHIVE,
            PARETO,
            HYPERVOLUME,
            PREDICTOR,
            BEST_GENOME,
            FINAL,
            WEIGHTS_BIN,
            WEIGHTS_JSON,
            CHECKPOINT,
            PREDICTOR_JSON,
        ]
        .map(String::from)
        .to_vec()
    }
}
