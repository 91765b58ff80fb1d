//! Fixed-length integer genome for motif-based SNN architectures.
//!
//! A genome encodes `l` modules followed by an `l x l` global connection
//! matrix. Each module holds five motifs, each motif `b` genes wide: one
//! motif-type gene followed by `b - 1` operation genes.
//!
//! ```text
//! [ module_1 | module_2 | ... | module_l | g_11 g_12 ... g_ll ]
//! module_i = [ m_1 x_1^2 .. x_1^b | m_2 x_2^2 .. x_2^b | ... | m_5 x_5^2 .. x_5^b ]
//! ```

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of motif kinds (FE, FI, FbI, LI, MI).
pub const MOTIF_KINDS: u8 = 5;
/// Motifs per module.
pub const MOTIFS_PER_MODULE: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GenomeConfig {
    /// Module count.
    pub l: usize,
    /// Genes per motif, including the motif-type gene.
    pub b: usize,
    /// Size of the operation alphabet.
    pub ops: usize,
}

impl Default for GenomeConfig {
    fn default() -> Self {
        GenomeConfig { l: 4, b: 20, ops: 2 }
    }
}

/// What a gene position encodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GeneRole {
    Motif { module: usize, motif: usize },
    Op { module: usize, motif: usize, slot: usize },
    Connection { from: usize, to: usize },
}

impl GenomeConfig {
    pub fn new(l: usize, b: usize, ops: usize) -> Result<Self> {
        let cfg = GenomeConfig { l, b, ops };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<()> {
        if self.l < 1 {
            return Err(Error::Config("module count l must be >= 1".into()));
        }
        if self.b < 2 {
            return Err(Error::Config("genes per motif b must be >= 2".into()));
        }
        if self.ops < 1 || self.ops > u8::MAX as usize {
            return Err(Error::Config("operation alphabet size must be in 1..=255".into()));
        }
        Ok(())
    }

    pub fn module_len(&self) -> usize {
        MOTIFS_PER_MODULE * self.b
    }

    /// `l*5*b + l*l`
    pub fn genome_len(&self) -> usize {
        self.l * self.module_len() + self.l * self.l
    }

    /// Index of the first connection gene.
    pub fn connection_offset(&self) -> usize {
        self.l * self.module_len()
    }

    pub fn motif_offset(&self, module: usize, motif: usize) -> usize {
        module * self.module_len() + motif * self.b
    }

    pub fn connection_index(&self, from: usize, to: usize) -> usize {
        self.connection_offset() + from * self.l + to
    }

    pub fn role(&self, index: usize) -> GeneRole {
        let conn = self.connection_offset();
        if index >= conn {
            let k = index - conn;
            return GeneRole::Connection {
                from: k / self.l,
                to: k % self.l,
            };
        }
        let module = index / self.module_len();
        let within = index % self.module_len();
        let motif = within / self.b;
        match within % self.b {
            0 => GeneRole::Motif { module, motif },
            s => GeneRole::Op {
                module,
                motif,
                slot: s - 1,
            },
        }
    }

    /// Inclusive alphabet range at a gene position. Self-loop genes share the
    /// connection alphabet but are additionally pinned to 0.
    pub fn range(&self, index: usize) -> (u8, u8) {
        match self.role(index) {
            GeneRole::Motif { .. } => (1, MOTIF_KINDS),
            GeneRole::Op { .. } => (1, self.ops as u8),
            GeneRole::Connection { .. } => (0, 1),
        }
    }
}

/// A single broken rule found by [`Genome::validate`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Violation {
    Length { expected: usize, found: usize },
    Alphabet { index: usize, value: u8, lo: u8, hi: u8 },
    SelfLoop { index: usize, module: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Length { expected, found } => {
                write!(f, "genome has {found} genes, expected {expected}")
            }
            Violation::Alphabet { index, value, lo, hi } => {
                write!(f, "gene {index} = {value} outside [{lo}, {hi}]")
            }
            // modules are reported 1-based, matching g_ii notation
            Violation::SelfLoop { index, module } => {
                write!(f, "self-loop at module {} (gene {index})", module + 1)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Genome {
    config: GenomeConfig,
    genes: Vec<u8>,
}

impl Genome {
    /// Wraps raw genes without checking them; see [`Genome::validate`].
    pub fn from_genes(config: GenomeConfig, genes: Vec<u8>) -> Self {
        Genome { config, genes }
    }

    /// Wraps raw genes, rejecting any that break an invariant.
    pub fn new(config: GenomeConfig, genes: Vec<u8>) -> Result<Self> {
        config.check()?;
        let g = Genome { config, genes };
        let v = g.validate();
        if v.is_empty() {
            Ok(g)
        } else {
            Err(Error::InvalidGenome(v))
        }
    }

    pub fn config(&self) -> &GenomeConfig {
        &self.config
    }

    pub fn genes(&self) -> &[u8] {
        &self.genes
    }

    pub fn genes_mut(&mut self) -> &mut [u8] {
        &mut self.genes
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn motif_kind(&self, module: usize, motif: usize) -> u8 {
        self.genes[self.config.motif_offset(module, motif)]
    }

    /// Operation genes `x^2 .. x^b` of one motif.
    pub fn motif_ops(&self, module: usize, motif: usize) -> &[u8] {
        let start = self.config.motif_offset(module, motif) + 1;
        &self.genes[start..start + self.config.b - 1]
    }

    pub fn connection(&self, from: usize, to: usize) -> u8 {
        self.genes[self.config.connection_index(from, to)]
    }

    pub fn set_connection(&mut self, from: usize, to: usize, value: u8) {
        let i = self.config.connection_index(from, to);
        self.genes[i] = value;
    }

    /// Forces every `g_ii` to zero.
    pub fn clear_self_loops(&mut self) {
        for i in 0..self.config.l {
            let idx = self.config.connection_index(i, i);
            if idx < self.genes.len() {
                self.genes[idx] = 0;
            }
        }
    }

    /// Lists every invariant violation; empty iff the genome is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let cfg = &self.config;
        let expected = cfg.genome_len();
        if self.genes.len() != expected {
            return vec![Violation::Length {
                expected,
                found: self.genes.len(),
            }];
        }
        let mut out = Vec::new();
        for (index, &value) in self.genes.iter().enumerate() {
            match cfg.role(index) {
                GeneRole::Connection { from, to } if from == to && value != 0 => {
                    out.push(Violation::SelfLoop {
                        index,
                        module: from,
                    });
                }
                _ => {
                    let (lo, hi) = cfg.range(index);
                    if value < lo || value > hi {
                        out.push(Violation::Alphabet {
                            index,
                            value,
                            lo,
                            hi,
                        });
                    }
                }
            }
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.config.check().is_ok() && self.validate().is_empty()
    }

    /// Single-line JSON record: `{"config":{"l":..,"b":..,"ops":..},"genes":[..]}`.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("genome serialization is infallible")
    }

    /// Parses a JSON record. The gene count must match the declared config;
    /// alphabet rules are left to [`Genome::validate`].
    pub fn from_json(text: &str) -> Result<Self> {
        let g: Genome = serde_json::from_str(text).map_err(|e| Error::Parse {
            message: e.to_string(),
            line: e.line(),
            column: e.column(),
        })?;
        g.config.check()?;
        if g.genes.len() != g.config.genome_len() {
            return Err(Error::Schema(format!(
                "record declares {} genes for l={}, b={} but holds {}",
                g.config.genome_len(),
                g.config.l,
                g.config.b,
                g.genes.len()
            )));
        }
        Ok(g)
    }
}

/// Uniform random genome from a seeded stream.
pub fn random_genome(config: &GenomeConfig, seed: u64) -> Result<Genome> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(random_genome_with(config, &mut rng))
}

/// Draws each gene uniformly over its alphabet; `g_ii` is always 0.
pub fn random_genome_with<R: Rng + ?Sized>(config: &GenomeConfig, rng: &mut R) -> Genome {
    let genes = (0..config.genome_len())
        .map(|i| {
            let (lo, hi) = config.range(i);
            rng.random_range(lo..=hi)
        })
        .collect();
    let mut g = Genome {
        config: *config,
        genes,
    };
    g.clear_self_loops();
    g
}
