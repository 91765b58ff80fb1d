//! The outer search loop: true evaluations feed a regression-tree predictor,
//! which steers NSGA-II over freshly sampled populations each iteration.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{EvaluationRecord, Evaluator};
use crate::evolve::archive::ParetoArchive;
use crate::evolve::mode::SearchSpace;
use crate::evolve::nsga::{crowded_order, nsga2_generation, rank_and_crowding, score_all};
use crate::genome::{random_genome_with, Genome, GenomeConfig};
use crate::metrics::Spearman;
use crate::snn::Network;
use crate::surrogate::{predictor_report, Predictor, TreeParams};
use crate::variation::VariationParams;

/// What the search optimizes over.
pub trait Problem: Sync {
    /// Trains `genome` for `epochs` and measures its objectives.
    fn evaluate(&self, genome: &Genome, epochs: usize, seed: u64) -> Result<EvaluationRecord>;
    /// Spike objective of an untrained candidate.
    fn quick_f2(&self, genome: &Genome, seed: u64) -> Result<f64>;
    /// Long training of the selected genome.
    fn final_train(&self, genome: &Genome, epochs: usize, seed: u64) -> Result<FinalTraining>;
}

#[derive(Debug)]
pub struct FinalTraining {
    pub record: EvaluationRecord,
    pub accuracy: f64,
    pub network: Option<Network>,
}

/// Spiking networks trained on a dataset.
pub struct SnnProblem<'a> {
    pub evaluator: Evaluator,
    pub data: &'a Dataset,
}

impl Problem for SnnProblem<'_> {
    fn evaluate(&self, genome: &Genome, epochs: usize, seed: u64) -> Result<EvaluationRecord> {
        self.evaluator.evaluate(genome, self.data, epochs, seed)
    }

    fn quick_f2(&self, genome: &Genome, seed: u64) -> Result<f64> {
        self.evaluator.quick_f2(genome, self.data, seed)
    }

    fn final_train(&self, genome: &Genome, epochs: usize, seed: u64) -> Result<FinalTraining> {
        let t = self.evaluator.train_genome(genome, self.data, epochs, seed)?;
        Ok(FinalTraining {
            accuracy: t.report.as_ref().map_or(0.0, |r| r.final_val.accuracy),
            record: t.record,
            network: t.network,
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    /// Regression tree refitted on the knowledge set every iteration.
    #[default]
    Tree,
    /// The true evaluator itself (only sensible for cheap problems).
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Predictor-guided NSGA-II proposals.
    Guided,
    /// Uniform random proposals with the same evaluation budget.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub genome: GenomeConfig,
    /// Initial population evaluated before the first iteration.
    pub n0: usize,
    pub iters: usize,
    /// Population size of the inner NSGA-II.
    pub n_new: usize,
    /// Generations of the inner NSGA-II, counting the sampled population.
    pub gens: usize,
    /// Training epochs per true evaluation.
    pub e_eval: usize,
    /// Training epochs of the finally selected genome.
    pub e_trn: usize,
    /// Candidates truly evaluated per iteration.
    pub k: usize,
    pub seed: u64,
    pub space: SearchSpace,
    pub predictor: PredictorKind,
    pub tree: TreeParams,
    pub variation: VariationParams,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            genome: GenomeConfig::default(),
            n0: 300,
            iters: 50,
            n_new: 60,
            gens: 40,
            e_eval: 10,
            e_trn: 600,
            k: 10,
            seed: 0,
            space: SearchSpace::Full,
            predictor: PredictorKind::Tree,
            tree: TreeParams::default(),
            variation: VariationParams::default(),
        }
    }
}

impl SearchConfig {
    /// Scaled-down budget that runs on a laptop core.
    pub fn desk() -> Self {
        SearchConfig {
            n0: 20,
            iters: 5,
            n_new: 12,
            gens: 8,
            e_eval: 3,
            e_trn: 10,
            k: 4,
            ..Default::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        self.genome.check()?;
        self.variation.check()?;
        self.tree.check()?;
        let sizes = [
            ("n0", self.n0),
            ("iters", self.iters),
            ("n_new", self.n_new),
            ("gens", self.gens),
            ("e_eval", self.e_eval),
            ("e_trn", self.e_trn),
            ("k", self.k),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.k > self.n_new {
            return Err(Error::Config(format!("k = {} exceeds n_new = {}", self.k, self.n_new)));
        }
        if self.predictor == PredictorKind::Tree && self.n0 < self.tree.min_samples_leaf {
            return Err(Error::Config(format!(
                "n0 = {} is below min_samples_leaf = {}",
                self.n0, self.tree.min_samples_leaf
            )));
        }
        Ok(())
    }

    /// Genomes scored by the predictor in one guided iteration when every
    /// generation breeds a full set of distinct offspring.
    pub fn nominal_scored_per_iteration(&self) -> usize {
        self.n_new * self.gens
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    /// 1-based.
    pub iteration: usize,
    pub hypervolume: f64,
    /// Candidates scored by the predictor.
    pub scored: usize,
    /// Candidates truly evaluated.
    pub evaluated: usize,
    /// Random genomes used because too few distinct proposals were left.
    pub filled: usize,
    pub archive_size: usize,
    /// Rank agreement of the predictor with the measured f1 of the
    /// candidates it proposed.
    pub spearman: Option<Spearman>,
}

/// Everything needed to resume a search after the last finished iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    pub strategy: Strategy,
    pub config: SearchConfig,
    /// The knowledge set, in evaluation order.
    pub records: Vec<EvaluationRecord>,
    pub archive: ParetoArchive,
    pub iterations: Vec<IterationLog>,
}

impl SearchState {
    pub fn completed_iterations(&self) -> usize {
        self.iterations.len()
    }

    pub fn initialized(&self) -> bool {
        self.records.len() >= self.config.n0
    }

    pub fn true_evaluations(&self) -> usize {
        self.records.len()
    }
}

#[derive(Debug)]
pub struct SearchOutcome {
    pub state: SearchState,
    pub final_training: Option<FinalTraining>,
}

/// Called after initialization and after every iteration; an error stops
/// the run.
pub type CheckpointHook<'a> = &'a mut dyn FnMut(&SearchState) -> Result<()>;

/// Options beyond the search configuration itself.
pub struct RunOptions<'a> {
    pub strategy: Strategy,
    /// Train the selected genome for `e_trn` epochs at the end.
    pub final_training: bool,
    pub resume: Option<SearchState>,
    /// Called after initialization and after every iteration; an error stops
    /// the run.
    pub on_checkpoint: Option<CheckpointHook<'a>>,
}

impl RunOptions<'_> {
    pub fn new(strategy: Strategy) -> Self {
        RunOptions {
            strategy,
            final_training: strategy == Strategy::Guided,
            resume: None,
            on_checkpoint: None,
        }
    }
}

/// Predictor-guided search with final training of the best genome.
pub fn run_search<P: Problem>(problem: &P, cfg: &SearchConfig) -> Result<SearchOutcome> {
    run(problem, cfg, RunOptions::new(Strategy::Guided))
}

/// Same initialization and evaluation budget, random proposals, no final
/// training.
pub fn run_random_baseline<P: Problem>(problem: &P, cfg: &SearchConfig) -> Result<SearchOutcome> {
    run(problem, cfg, RunOptions::new(Strategy::Random))
}

/// RNG of one search phase; phase 0 is initialization, phase t iteration t.
fn phase_rng(cfg: &SearchConfig, phase: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ cfg.variation.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(phase);
    rng
}

/// Draws a genome of the search space that is not in `seen`, giving up on
/// uniqueness after a bounded number of tries (tiny spaces).
fn draw_fresh<R: Rng + ?Sized>(cfg: &SearchConfig, seen: &mut HashSet<Vec<u8>>, rng: &mut R) -> Genome {
    let mut g = random_genome_with(&cfg.genome, rng);
    cfg.space.clamp(&mut g);
    for _ in 0..64 {
        if !seen.contains(g.genes()) {
            break;
        }
        g = random_genome_with(&cfg.genome, rng);
        cfg.space.clamp(&mut g);
    }
    seen.insert(g.genes().to_vec());
    g
}

fn evaluate_all<P: Problem>(problem: &P, cfg: &SearchConfig, genomes: &[Genome]) -> Result<Vec<EvaluationRecord>> {
    genomes
        .par_iter()
        .map(|g| problem.evaluate(g, cfg.e_eval, cfg.seed))
        .collect()
}

pub fn run<P: Problem>(problem: &P, cfg: &SearchConfig, mut opts: RunOptions<'_>) -> Result<SearchOutcome> {
    cfg.check()?;
    let mut state = match opts.resume.take() {
        Some(s) => {
            if s.config != *cfg || s.strategy != opts.strategy {
                return Err(Error::Config("checkpoint was written by a different configuration".into()));
            }
            s
        }
        None => SearchState {
            strategy: opts.strategy,
            config: cfg.clone(),
            records: Vec::new(),
            archive: ParetoArchive::default(),
            iterations: Vec::new(),
        },
    };
    let mut checkpoint = |s: &SearchState| match opts.on_checkpoint.as_mut() {
        Some(f) => f(s),
        None => Ok(()),
    };

    if !state.initialized() {
        let mut rng = phase_rng(cfg, 0);
        let mut seen = HashSet::new();
        let genomes: Vec<Genome> = (0..cfg.n0).map(|_| draw_fresh(cfg, &mut seen, &mut rng)).collect();
        state.records = evaluate_all(problem, cfg, &genomes)?;
        state.archive = ParetoArchive {
            reference: Some(ParetoArchive::reference_from(&state.records)),
            ..Default::default()
        };
        for r in &state.records {
            state.archive.insert(r);
        }
        checkpoint(&state)?;
    }

    for t in state.completed_iterations() + 1..=cfg.iters {
        let mut rng = phase_rng(cfg, t as u64);
        let mut seen: HashSet<Vec<u8>> = state.records.iter().map(|r| r.genome.genes().to_vec()).collect();
        let (chosen, scored, filled, predictor) = match opts.strategy {
            Strategy::Guided => propose(problem, cfg, &state.records, &mut seen, &mut rng)?,
            Strategy::Random => {
                let g = (0..cfg.k).map(|_| draw_fresh(cfg, &mut seen, &mut rng)).collect();
                (g, 0, 0, None)
            }
        };
        let new = evaluate_all(problem, cfg, &chosen)?;
        let spearman = match &predictor {
            Some(p) if new.len() >= 3 => Some(predictor_report(p, &new)?),
            _ => None,
        };
        for r in &new {
            state.archive.insert(r);
        }
        state.records.extend(new);
        let hypervolume = state.archive.record_iteration()?;
        state.iterations.push(IterationLog {
            iteration: t,
            hypervolume,
            scored,
            evaluated: chosen.len(),
            filled,
            archive_size: state.archive.members.len(),
            spearman,
        });
        checkpoint(&state)?;
    }

    let final_training = if opts.final_training {
        let best = match state.archive.lowest_loss() {
            Some(m) => m.genome.clone(),
            None => state
                .records
                .iter()
                .min_by(|a, b| a.f1.total_cmp(&b.f1))
                .map(|r| r.genome.clone())
                .ok_or_else(|| Error::Config("search produced no records".into()))?,
        };
        Some(problem.final_train(&best, cfg.e_trn, cfg.seed)?)
    } else {
        None
    };
    Ok(SearchOutcome { state, final_training })
}

type Proposal = (Vec<Genome>, usize, usize, Option<Predictor>);

/// One guided iteration up to the choice of the `k` candidates.
fn propose<P: Problem>(
    problem: &P,
    cfg: &SearchConfig,
    records: &[EvaluationRecord],
    seen: &mut HashSet<Vec<u8>>,
    rng: &mut ChaCha8Rng,
) -> Result<Proposal> {
    let predictor = match cfg.predictor {
        PredictorKind::Tree => Some(Predictor::fit(records, cfg.tree)?),
        PredictorKind::Oracle => None,
    };
    let score = |g: &Genome| -> Result<(f64, f64)> {
        let f1 = match &predictor {
            Some(p) => p.predict(g)?,
            None => problem.evaluate(g, cfg.e_eval, cfg.seed)?.f1,
        };
        Ok((f1, problem.quick_f2(g, cfg.seed)?))
    };
    let clamp = |g: &mut Genome| cfg.space.clamp(g);

    let mut local = HashSet::new();
    let first: Vec<Genome> = (0..cfg.n_new).map(|_| draw_fresh(cfg, &mut local, rng)).collect();
    let mut pop = score_all(first, &score)?;
    let mut scored = pop.len();
    for _ in 1..cfg.gens {
        let (next, s) = nsga2_generation(pop, &score, &cfg.variation, &clamp, rng)?;
        pop = next;
        scored += s;
    }

    let points: Vec<(f64, f64)> = pop.iter().map(|p| p.objectives.pair()).collect();
    let (rank, crowd) = rank_and_crowding(&points);
    let mut chosen = Vec::with_capacity(cfg.k);
    for i in crowded_order(&rank, &crowd) {
        if chosen.len() == cfg.k {
            break;
        }
        if seen.insert(pop[i].genome.genes().to_vec()) {
            chosen.push(pop[i].genome.clone());
        }
    }
    let filled = cfg.k - chosen.len();
    for _ in 0..filled {
        chosen.push(draw_fresh(cfg, seen, rng));
    }
    Ok((chosen, scored, filled, predictor))
}
