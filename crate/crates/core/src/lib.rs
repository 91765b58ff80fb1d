//! Evolutionary architecture search for spiking neural networks.
//!
//! Genomes encode modules built from five neural circuit motifs plus a free
//! module-to-module connection matrix. An NSGA-II loop guided by an online
//! regression-tree predictor searches for architectures with low validation
//! loss and few spikes.

pub mod data;
pub mod error;
pub mod eval;
pub mod evolve;
pub mod genome;
pub mod graph;
pub mod metrics;
pub mod motif;
pub mod snn;
pub mod surrogate;
pub mod variation;

pub use error::{Error, Result};
pub use eval::{EvaluationRecord, Evaluator, KnowledgeSet};
pub use evolve::{run_random_baseline, run_search, ParetoArchive, SearchConfig, SearchSpace};
pub use genome::{random_genome, Genome, GenomeConfig};
pub use graph::{decode, graph_stats, DecodeConfig, GraphStats, NetworkGraph};
pub use motif::{template_for, MotifKind, MotifTemplate};
pub use metrics::{hypervolume_2d, spearman};
pub use surrogate::{Predictor, RegressionTree, TreeParams};
pub use variation::VariationParams;
