//! Multi-objective architecture search.

pub mod archive;
pub mod mode;
pub mod nsga;
pub mod search;

pub use archive::{ArchiveEntry, ParetoArchive};
pub use mode::SearchSpace;
pub use nsga::{crowding_distance, dominates, fast_nondominated_sort, nsga2_generation, Individual, ObjectivePoint, Provenance};
pub use search::{
    run, run_random_baseline, run_search, FinalTraining, IterationLog, PredictorKind, Problem, RunOptions,
    SearchConfig, SearchOutcome, SearchState, SnnProblem, Strategy,
};
