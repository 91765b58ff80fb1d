//! NSGA-II variation operators on integer genomes: two-point crossover over
//! the flat gene vector and polynomial mutation applied in the real relaxation
//! of each gene's range.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::Genome;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VariationParams {
    pub crossover_probability: f64,
    /// Per-gene mutation probability; `None` means `1 / genome length`.
    pub mutation_probability: Option<f64>,
    /// Distribution index of polynomial mutation.
    pub eta: f64,
    /// Seed of the variation stream.
    pub seed: u64,
}

impl Default for VariationParams {
    fn default() -> Self {
        VariationParams {
            crossover_probability: 0.9,
            mutation_probability: None,
            eta: 2.0,
            seed: 0,
        }
    }
}

impl VariationParams {
    /// Both operators switched off.
    pub fn disabled() -> Self {
        VariationParams {
            crossover_probability: 0.0,
            mutation_probability: Some(0.0),
            ..Default::default()
        }
    }

    pub fn check(&self) -> Result<()> {
        let in_unit = |p: f64| (0.0..=1.0).contains(&p);
        if !in_unit(self.crossover_probability) {
            return Err(Error::Config("crossover probability must lie in [0, 1]".into()));
        }
        if let Some(p) = self.mutation_probability {
            if !in_unit(p) {
                return Err(Error::Config("mutation probability must lie in [0, 1]".into()));
            }
        }
        if !(self.eta >= 0.0) || !self.eta.is_finite() {
            return Err(Error::Config("polynomial eta must be finite and >= 0".into()));
        }
        Ok(())
    }

    pub fn mutation_rate(&self, genome_len: usize) -> f64 {
        self.mutation_probability
            .unwrap_or(1.0 / genome_len.max(1) as f64)
    }
}

/// Swaps `genes[lo..hi]` between copies of the parents.
pub fn crossover_at(a: &Genome, b: &Genome, lo: usize, hi: usize) -> Result<(Genome, Genome)> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let (lo, hi) = (lo.min(hi), lo.max(hi).min(a.len()));
    let mut c1 = a.clone();
    let mut c2 = b.clone();
    c1.genes_mut()[lo..hi].copy_from_slice(&b.genes()[lo..hi]);
    c2.genes_mut()[lo..hi].copy_from_slice(&a.genes()[lo..hi]);
    c1.clear_self_loops();
    c2.clear_self_loops();
    Ok((c1, c2))
}

/// Two-point crossover. With probability `1 - crossover_probability` the
/// children are plain copies of the parents.
pub fn two_point_crossover<R: Rng + ?Sized>(
    a: &Genome,
    b: &Genome,
    params: &VariationParams,
    rng: &mut R,
) -> Result<(Genome, Genome)> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.len() < 2 || rng.random::<f64>() >= params.crossover_probability {
        return Ok((a.clone(), b.clone()));
    }
    // two distinct cut points in 0..=len
    let n = a.len();
    let c1 = rng.random_range(0..=n);
    let mut c2 = rng.random_range(0..n);
    if c2 >= c1 {
        c2 += 1;
    }
    crossover_at(a, b, c1, c2)
}

/// Deb's bounded polynomial perturbation of `x` in `[lo, hi]` for a uniform
/// draw `u`. Returns `x` unchanged at `u = 0.5`.
pub fn polynomial_perturb(x: f64, lo: f64, hi: f64, u: f64, eta: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return x;
    }
    let d1 = (x - lo) / span;
    let d2 = (hi - x) / span;
    let pow = 1.0 / (eta + 1.0);
    let dq = if u < 0.5 {
        let xy = 1.0 - d1;
        let val = 2.0 * u + (1.0 - 2.0 * u) * xy.powf(eta + 1.0);
        val.powf(pow) - 1.0
    } else {
        let xy = 1.0 - d2;
        let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * xy.powf(eta + 1.0);
        1.0 - val.powf(pow)
    };
    (x + dq * span).clamp(lo, hi)
}

/// Mutates an integer gene with value range `[lo, hi]` using the draw `u`.
///
/// The gene is relaxed onto `[lo - 0.5, hi + 0.5]` so every integer owns an
/// equal-width basin, perturbed, then rounded back into range.
pub fn mutate_gene(value: u8, lo: u8, hi: u8, u: f64, eta: f64) -> u8 {
    if lo == hi {
        return lo;
    }
    let rl = lo as f64 - 0.5;
    let rh = hi as f64 + 0.5;
    let y = polynomial_perturb(value as f64, rl, rh, u, eta);
    y.round().clamp(lo as f64, hi as f64) as u8
}

/// Polynomial mutation with per-gene probability; `g_ii` is re-clamped to 0.
pub fn polynomial_mutation<R: Rng + ?Sized>(
    genome: &Genome,
    params: &VariationParams,
    rng: &mut R,
) -> Genome {
    let cfg = *genome.config();
    let rate = params.mutation_rate(genome.len());
    let mut out = genome.clone();
    if rate > 0.0 {
        for (i, gene) in out.genes_mut().iter_mut().enumerate() {
            if rng.random::<f64>() < rate {
                let (lo, hi) = cfg.range(i);
                let u: f64 = rng.random();
                *gene = mutate_gene(*gene, lo, hi, u, params.eta);
            }
        }
    }
    out.clear_self_loops();
    out
}
