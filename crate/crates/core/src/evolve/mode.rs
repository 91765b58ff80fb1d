//! Search-space restrictions used for ablations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::{Genome, MOTIFS_PER_MODULE};
use crate::motif::MotifKind;

/// Which genomes the search may propose.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SearchSpace {
    #[default]
    Full,
    /// Every motif gene fixed to one kind.
    SingleMotif(MotifKind),
    /// Connections fixed to the chain 1 -> 2 -> ... -> l.
    Hierarchical,
}

impl SearchSpace {
    pub fn clamp(&self, genome: &mut Genome) {
        let cfg = *genome.config();
        match self {
            SearchSpace::Full => {}
            SearchSpace::SingleMotif(kind) => {
                for m in 0..cfg.l {
                    for s in 0..MOTIFS_PER_MODULE {
                        let at = cfg.motif_offset(m, s);
                        genome.genes_mut()[at] = kind.gene();
                    }
                }
            }
            SearchSpace::Hierarchical => {
                for i in 0..cfg.l {
                    for j in 0..cfg.l {
                        genome.set_connection(i, j, u8::from(j == i + 1));
                    }
                }
            }
        }
    }

    /// Whether `genome` already lies in this space.
    pub fn contains(&self, genome: &Genome) -> bool {
        let mut g = genome.clone();
        self.clamp(&mut g);
        g.genes() == genome.genes()
    }
}

impl fmt::Display for SearchSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SearchSpace::Full => f.write_str("full"),
            SearchSpace::SingleMotif(k) => write!(f, "{k}"),
            SearchSpace::Hierarchical => f.write_str("CL-0"),
        }
    }
}

impl FromStr for SearchSpace {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(SearchSpace::Full),
            "CL-0" => Ok(SearchSpace::Hierarchical),
            other => other
                .parse::<MotifKind>()
                .map(SearchSpace::SingleMotif)
                .map_err(|_| Error::Config(format!("unknown search mode {other:?}"))),
        }
    }
}

impl From<SearchSpace> for String {
    fn from(s: SearchSpace) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for SearchSpace {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{random_genome, GenomeConfig};
    use crate::graph::{decode, graph_stats, DecodeConfig};

    #[test]
    fn parse_and_display() {
        for name in ["full", "FE", "FI", "FbI", "LI", "MI", "CL-0"] {
            let m: SearchSpace = name.parse().unwrap();
            assert_eq!(m.to_string(), name);
        }
        assert_eq!("bogus".parse::<SearchSpace>().unwrap_err().kind(), "config");
    }

    #[test]
    fn clamps_hold_after_decoding() {
        let cfg = GenomeConfig::default();
        for seed in 0..50 {
            let base = random_genome(&cfg, seed).unwrap();
            let mut g = base.clone();
            SearchSpace::SingleMotif(MotifKind::FE).clamp(&mut g);
            let st = graph_stats(&decode(&g, &DecodeConfig::default()).unwrap());
            assert_eq!(st.motif_counts, [5 * cfg.l, 0, 0, 0, 0]);
            let mut g = base.clone();
            SearchSpace::Hierarchical.clamp(&mut g);
            assert!(g.is_valid());
            let st = graph_stats(&decode(&g, &DecodeConfig::default()).unwrap());
            assert_eq!((st.feedback_edges, st.global_edges), (0, cfg.l - 1));
            assert!(SearchSpace::Full.contains(&base));
        }
    }
}
