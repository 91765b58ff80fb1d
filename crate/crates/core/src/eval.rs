//! True fitness evaluation of genomes and the persistent knowledge set.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::genome::Genome;
use crate::graph::{decode, DecodeConfig, NetworkGraph};
use crate::snn::network::{InitParams, InputEncoding};
use crate::snn::{train, EvalStats, Network, NeuronParams, TrainConfig, TrainReport, Trace};

/// f1 assigned to genomes that cannot be trained: well above the loss of a
/// uniform guess over any practical number of classes.
pub const SENTINEL_LOSS: f64 = 10.0;
/// f2 assigned alongside [`SENTINEL_LOSS`].
pub const SENTINEL_SPIKES: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub genome: Genome,
    /// Validation loss after training.
    pub f1: f64,
    /// Mean spikes per validation sample.
    pub f2: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Seconds spent; not part of any reproducibility guarantee.
    pub wall_time: f64,
    pub degenerate: bool,
}

impl EvaluationRecord {
    pub fn sentinel(genome: Genome, epochs: usize, seed: u64, wall_time: f64) -> Self {
        EvaluationRecord {
            genome,
            f1: SENTINEL_LOSS,
            f2: SENTINEL_SPIKES,
            epochs,
            seed,
            wall_time,
            degenerate: true,
        }
    }
}

/// Everything needed to turn a genome into a trained network, except the
/// genome, epoch count and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Evaluator {
    pub stem_channels: usize,
    pub timesteps: usize,
    pub neuron: NeuronParams,
    pub init: InitParams,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Validation samples used to count spikes of untrained networks.
    pub calibration_samples: usize,
    pub encoding: InputEncoding,
    /// Force `g[i][i+1] = 1` before decoding so every genome has the
    /// hierarchical backbone. Records keep the genome as given.
    pub repair_backbone: bool,
}

impl Default for Evaluator {
    fn default() -> Self {
        let d = DecodeConfig::default();
        let t = TrainConfig::default();
        Evaluator {
            stem_channels: d.stem_channels,
            timesteps: d.timesteps,
            neuron: NeuronParams::default(),
            init: InitParams::default(),
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            calibration_samples: 256,
            encoding: InputEncoding::Constant,
            repair_backbone: false,
        }
    }
}

/// Output of a full training run.
#[derive(Debug)]
pub struct Trained {
    pub record: EvaluationRecord,
    pub network: Option<Network>,
    pub report: Option<TrainReport>,
}

impl Evaluator {
    pub fn check(&self) -> Result<()> {
        self.neuron.check()?;
        self.decode_config([1, 1, 1]).check()?;
        self.train_config(1, 0).check()?;
        if self.calibration_samples == 0 {
            return Err(Error::Config("calibration batch must be non-empty".into()));
        }
        Ok(())
    }

    pub fn decode_config(&self, input_shape: [usize; 3]) -> DecodeConfig {
        DecodeConfig {
            input_shape,
            stem_channels: self.stem_channels,
            timesteps: self.timesteps,
        }
    }

    fn train_config(&self, epochs: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            epochs,
            seed,
        }
    }

    fn decode(&self, genome: &Genome, data: &Dataset) -> Result<NetworkGraph> {
        if !self.repair_backbone {
            return decode(genome, &self.decode_config(data.shape));
        }
        let mut g = genome.clone();
        let cfg = *g.config();
        for i in 1..cfg.l {
            g.genes_mut()[cfg.connection_index(i - 1, i)] = 1;
        }
        decode(&g, &self.decode_config(data.shape))
    }

    /// Decodes `genome` for `data`; `None` when the readout cannot see the
    /// input.
    fn graph(&self, genome: &Genome, data: &Dataset) -> Result<Option<NetworkGraph>> {
        let graph = self.decode(genome, data)?;
        Ok(graph.output_reachable().then_some(graph))
    }

    fn network(&self, graph: NetworkGraph, data: &Dataset, seed: u64) -> Result<Network> {
        let mut net = Network::with_init(graph, data.classes, self.neuron, seed, self.init)?;
        net.encoding = self.encoding;
        Ok(net)
    }

    /// Trains `genome` for `epochs` and records validation loss and spikes.
    /// Unreachable outputs and divergent training yield a sentinel record.
    pub fn evaluate(&self, genome: &Genome, data: &Dataset, epochs: usize, seed: u64) -> Result<EvaluationRecord> {
        Ok(self.train_genome(genome, data, epochs, seed)?.record)
    }

    pub fn train_genome(&self, genome: &Genome, data: &Dataset, epochs: usize, seed: u64) -> Result<Trained> {
        if epochs == 0 {
            return Err(Error::Config("evaluation needs at least one epoch".into()));
        }
        let start = Instant::now();
        let sentinel = |start: Instant| Trained {
            record: EvaluationRecord::sentinel(genome.clone(), epochs, seed, start.elapsed().as_secs_f64()),
            network: None,
            report: None,
        };
        let Some(graph) = self.graph(genome, data)? else {
            return Ok(sentinel(start));
        };
        let mut net = self.network(graph, data, seed)?;
        let report = match train(&mut net, data, &self.train_config(epochs, seed)) {
            Ok(r) => r,
            Err(Error::Divergence { .. }) => return Ok(sentinel(start)),
            Err(e) => return Err(e),
        };
        let EvalStats {
            loss,
            spikes_per_sample,
            ..
        } = report.final_val;
        Ok(Trained {
            record: EvaluationRecord {
                genome: genome.clone(),
                f1: loss,
                f2: spikes_per_sample,
                epochs,
                seed,
                wall_time: start.elapsed().as_secs_f64(),
                degenerate: false,
            },
            network: Some(net),
            report: Some(report),
        })
    }

    /// Mean spikes per sample of a freshly initialized network over the
    /// calibration batch (the first validation samples). Counts every
    /// decodable genome, reachable or not.
    pub fn measure_f2(&self, genome: &Genome, data: &Dataset, seed: u64) -> Result<f64> {
        let graph = self.decode(genome, data)?;
        let net = self.network(graph, data, seed)?;
        let batch = &data.val[..data.val.len().min(self.calibration_samples)];
        if batch.is_empty() {
            return Err(Error::Config("dataset has no validation samples".into()));
        }
        let mut trace = Trace::default();
        let mut total = 0u64;
        for &i in batch {
            net.forward(data.sample(i), &mut trace)?;
            total += trace.module_spikes.iter().sum::<u64>();
        }
        Ok(total as f64 / batch.len() as f64)
    }

    /// Spike objective for candidates that are never trained: degenerate
    /// genomes get the sentinel so they sort with their trained peers.
    pub fn quick_f2(&self, genome: &Genome, data: &Dataset, seed: u64) -> Result<f64> {
        if self.graph(genome, data)?.is_none() {
            return Ok(SENTINEL_SPIKES);
        }
        self.measure_f2(genome, data, seed)
    }
}

/// Append-only store of evaluation records, optionally backed by a JSON
/// Lines file.
#[derive(Debug, Default)]
pub struct KnowledgeSet {
    records: Vec<EvaluationRecord>,
    path: Option<PathBuf>,
}

impl KnowledgeSet {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens `path`, loading any records already there.
    pub fn open(path: &Path) -> Result<Self> {
        let records = if path.exists() { Self::load(path)? } else { Vec::new() };
        Ok(KnowledgeSet {
            records,
            path: Some(path.to_path_buf()),
        })
    }

    pub fn load(path: &Path) -> Result<Vec<EvaluationRecord>> {
        let file = File::open(path).map_err(|e| Error::file(path, e))?;
        let mut out = Vec::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::file(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
                message: e.to_string(),
                line: n + 1,
                column: e.column(),
            })?;
            out.push(rec);
        }
        Ok(out)
    }

    pub fn append(&mut self, record: EvaluationRecord) -> Result<()> {
        if !record.f1.is_finite() || !record.f2.is_finite() || record.f1 < 0.0 || record.f2 < 0.0 {
            return Err(Error::NonFinite("evaluation record objectives"));
        }
        if let Some(path) = &self.path {
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| Error::file(path, e))?;
            let mut line = serde_json::to_string(&record)?;
            line.push('\n');
            f.write_all(line.as_bytes()).map_err(|e| Error::file(path, e))?;
        }
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[EvaluationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn contains(&self, genome: &Genome) -> bool {
        self.records.iter().any(|r| r.genome.genes() == genome.genes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synthetic_blobs;
    use crate::genome::{random_genome, GenomeConfig};

    fn chain_genome(l: usize) -> Genome {
        let cfg = GenomeConfig::new(l, 2, 2).unwrap();
        let mut g = random_genome(&cfg, 3).unwrap();
        for i in 0..l {
            for j in 0..l {
                g.set_connection(i, j, u8::from(j == i + 1));
            }
        }
        g
    }

    fn small() -> Evaluator {
        Evaluator {
            stem_channels: 2,
            ..Default::default()
        }
    }

    #[test]
    fn zero_epochs_rejected() {
        let d = synthetic_blobs(40, 1);
        let err = small().evaluate(&chain_genome(1), &d, 0, 0).unwrap_err();
        assert_eq!(err.kind(), "config");
    }

    #[test]
    fn unreachable_output_is_degenerate() {
        let d = synthetic_blobs(40, 1);
        let mut g = chain_genome(2);
        g.set_connection(0, 1, 0);
        let r = small().evaluate(&g, &d, 1, 0).unwrap();
        assert!(r.degenerate);
        assert_eq!((r.f1, r.f2), (SENTINEL_LOSS, SENTINEL_SPIKES));
        assert_eq!(small().quick_f2(&g, &d, 0).unwrap(), SENTINEL_SPIKES);
        assert!(small().measure_f2(&g, &d, 0).unwrap() < SENTINEL_SPIKES);
    }

    #[test]
    fn repair_restores_the_backbone() {
        let d = synthetic_blobs(40, 1);
        let mut g = chain_genome(2);
        g.set_connection(0, 1, 0);
        let ev = Evaluator {
            repair_backbone: true,
            ..small()
        };
        let r = ev.evaluate(&g, &d, 1, 0).unwrap();
        assert!(!r.degenerate);
        assert_eq!(r.genome, g);
        assert!(ev.quick_f2(&g, &d, 0).unwrap() < SENTINEL_SPIKES);
    }

    #[test]
    fn same_seed_same_objectives() {
        let d = synthetic_blobs(60, 2);
        let g = chain_genome(2);
        let a = small().evaluate(&g, &d, 1, 9).unwrap();
        let b = small().evaluate(&g, &d, 1, 9).unwrap();
        assert!(!a.degenerate);
        assert_eq!((a.f1.to_bits(), a.f2.to_bits()), (b.f1.to_bits(), b.f2.to_bits()));
    }

    #[test]
    fn zero_input_gives_zero_f2() {
        let mut d = synthetic_blobs(40, 1);
        d.inputs.iter_mut().for_each(|x| *x = 0.0);
        let g = chain_genome(2);
        assert_eq!(small().measure_f2(&g, &d, 0).unwrap(), 0.0);
    }

    #[test]
    fn f2_ignores_batch_order() {
        let mut d = synthetic_blobs(80, 4);
        let g = chain_genome(2);
        let a = small().measure_f2(&g, &d, 1).unwrap();
        d.val.reverse();
        let b = small().measure_f2(&g, &d, 1).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn knowledge_set_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.jsonl");
        let mut ks = KnowledgeSet::open(&path).unwrap();
        let cfg = GenomeConfig::default();
        for s in 0..5 {
            let mut r = EvaluationRecord::sentinel(random_genome(&cfg, s).unwrap(), 3, s, 0.1 * s as f64);
            r.f1 = 1.0 / (s as f64 + 3.0);
            r.f2 = (s as f64).sqrt() * 1e3;
            r.degenerate = s % 2 == 0;
            ks.append(r).unwrap();
        }
        let back = KnowledgeSet::open(&path).unwrap();
        assert_eq!(back.records(), ks.records());
        assert_eq!(back.len(), 5);
    }

    #[test]
    fn non_finite_records_are_refused() {
        let mut ks = KnowledgeSet::in_memory();
        let mut r = EvaluationRecord::sentinel(chain_genome(1), 1, 0, 0.0);
        r.f1 = f64::NAN;
        assert!(ks.append(r).is_err());
        assert!(ks.is_empty());
    }
}
