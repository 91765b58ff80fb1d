//! Non-dominated sorting, crowding distance and one NSGA-II generation.

use std::cmp::Ordering;
use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::genome::Genome;
use crate::variation::{polynomial_mutation, two_point_crossover, VariationParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Predicted,
    Measured,
}

/// Loss and spike objectives, both minimized.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePoint {
    pub f1: f64,
    pub f2: f64,
    pub provenance: Provenance,
}

impl ObjectivePoint {
    pub fn pair(&self) -> (f64, f64) {
        (self.f1, self.f2)
    }
}

/// `a` is no worse than `b` in both objectives and strictly better in one.
pub fn dominates(a: (f64, f64), b: (f64, f64)) -> bool {
    a.0 <= b.0 && a.1 <= b.1 && (a.0 < b.0 || a.1 < b.1)
}

/// Fronts of increasing rank; indices within a front are ascending.
pub fn fast_nondominated_sort(points: &[(f64, f64)]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut counts = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(points[i], points[j]) {
                dominated_by[i].push(j);
                counts[j] += 1;
            } else if dominates(points[j], points[i]) {
                dominated_by[j].push(i);
                counts[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                counts[j] -= 1;
                if counts[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each point of one front. Boundary points of every
/// objective are infinite; an objective with zero range adds nothing.
pub fn crowding_distance(front: &[(f64, f64)]) -> Vec<f64> {
    let n = front.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    for key in [|p: &(f64, f64)| p.0, |p: &(f64, f64)| p.1] {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| key(&front[a]).total_cmp(&key(&front[b])));
        let lo = key(&front[order[0]]);
        let hi = key(&front[order[n - 1]]);
        let range = hi - lo;
        if range == 0.0 {
            continue;
        }
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        for w in 1..n - 1 {
            let gap = key(&front[order[w + 1]]) - key(&front[order[w - 1]]);
            dist[order[w]] += gap / range;
        }
    }
    dist
}

/// Front rank and crowding distance of every point.
pub fn rank_and_crowding(points: &[(f64, f64)]) -> (Vec<usize>, Vec<f64>) {
    let mut rank = vec![0; points.len()];
    let mut crowd = vec![0.0; points.len()];
    for (r, front) in fast_nondominated_sort(points).iter().enumerate() {
        let pts: Vec<(f64, f64)> = front.iter().map(|&i| points[i]).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&pts)) {
            rank[i] = r;
            crowd[i] = d;
        }
    }
    (rank, crowd)
}

/// Lower rank first, then larger crowding distance, then lower index.
pub fn crowded_order(rank: &[usize], crowd: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..rank.len()).collect();
    order.sort_by(|&a, &b| crowded_cmp(a, b, rank, crowd));
    order
}

fn crowded_cmp(a: usize, b: usize, rank: &[usize], crowd: &[f64]) -> Ordering {
    rank[a]
        .cmp(&rank[b])
        .then_with(|| crowd[b].total_cmp(&crowd[a]))
        .then(a.cmp(&b))
}

/// A genome with its (predicted or measured) objectives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Genome,
    pub objectives: ObjectivePoint,
}

/// Keeps `n` members of `pool` by rank, then crowding; survivors stay in
/// pool order.
pub fn environmental_selection(pool: Vec<Individual>, n: usize) -> Vec<Individual> {
    if pool.len() <= n {
        return pool;
    }
    let points: Vec<(f64, f64)> = pool.iter().map(|p| p.objectives.pair()).collect();
    let (rank, crowd) = rank_and_crowding(&points);
    let mut keep = crowded_order(&rank, &crowd);
    keep.truncate(n);
    keep.sort_unstable();
    let mut slots: Vec<Option<Individual>> = pool.into_iter().map(Some).collect();
    keep.into_iter().map(|i| slots[i].take().expect("indices are distinct")).collect()
}

fn tournament<R: Rng + ?Sized>(rank: &[usize], crowd: &[f64], rng: &mut R) -> usize {
    let a = rng.random_range(0..rank.len());
    let b = rng.random_range(0..rank.len());
    match crowded_cmp(a, b, rank, crowd) {
        Ordering::Greater => b,
        _ => a,
    }
}

/// Breeds up to `pop.len()` offspring that differ from every parent and from
/// each other. Gives up after a bounded number of attempts, so disabled
/// variation yields no offspring at all.
pub fn breed<R: Rng + ?Sized>(
    pop: &[Individual],
    variation: &VariationParams,
    clamp: &(dyn Fn(&mut Genome) + Sync),
    rng: &mut R,
) -> Result<Vec<Genome>> {
    let n = pop.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let points: Vec<(f64, f64)> = pop.iter().map(|p| p.objectives.pair()).collect();
    let (rank, crowd) = rank_and_crowding(&points);
    let mut seen: HashSet<Vec<u8>> = pop.iter().map(|p| p.genome.genes().to_vec()).collect();
    let mut out = Vec::with_capacity(n);
    let max_attempts = 4 * n + 8;
    for _ in 0..max_attempts {
        if out.len() >= n {
            break;
        }
        let a = &pop[tournament(&rank, &crowd, rng)].genome;
        let b = &pop[tournament(&rank, &crowd, rng)].genome;
        let (c1, c2) = two_point_crossover(a, b, variation, rng)?;
        for child in [c1, c2] {
            let mut child = polynomial_mutation(&child, variation, rng);
            clamp(&mut child);
            if out.len() < n && seen.insert(child.genes().to_vec()) {
                out.push(child);
            }
        }
    }
    Ok(out)
}

/// Scores genomes in parallel; results keep input order.
pub fn score_all(
    genomes: Vec<Genome>,
    score: &(dyn Fn(&Genome) -> Result<(f64, f64)> + Sync),
) -> Result<Vec<Individual>> {
    genomes
        .into_par_iter()
        .map(|genome| {
            let (f1, f2) = score(&genome)?;
            Ok(Individual {
                genome,
                objectives: ObjectivePoint {
                    f1,
                    f2,
                    provenance: Provenance::Predicted,
                },
            })
        })
        .collect()
}

/// One generation: tournament, crossover, mutation, scoring of the new
/// offspring and elitist selection of `pop.len()` survivors from parents and
/// offspring. Returns the survivors and the number of genomes scored.
pub fn nsga2_generation<R: Rng + ?Sized>(
    pop: Vec<Individual>,
    score: &(dyn Fn(&Genome) -> Result<(f64, f64)> + Sync),
    variation: &VariationParams,
    clamp: &(dyn Fn(&mut Genome) + Sync),
    rng: &mut R,
) -> Result<(Vec<Individual>, usize)> {
    let n = pop.len();
    let children = breed(&pop, variation, clamp, rng)?;
    let scored = children.len();
    let mut pool = pop;
    pool.extend(score_all(children, score)?);
    Ok((environmental_selection(pool, n), scored))
}
