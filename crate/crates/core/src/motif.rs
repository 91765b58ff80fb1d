//! The five circuit motifs as excitatory/inhibitory wiring plans.
//!
//! Every template reads from a single input port (the previous motif's
//! output, or the module input) and writes its output as the sum of the
//! spikes of its `outputs` populations. Edges inside a template carry an
//! operation slot; slot `s` takes its operation from gene `x^(2+s)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MotifKind {
    /// Feedforward excitation.
    FE,
    /// Feedforward inhibition.
    FI,
    /// Feedback inhibition.
    FbI,
    /// Lateral inhibition.
    LI,
    /// Mutual inhibition.
    MI,
}

impl MotifKind {
    pub const ALL: [MotifKind; 5] = [
        MotifKind::FE,
        MotifKind::FI,
        MotifKind::FbI,
        MotifKind::LI,
        MotifKind::MI,
    ];

    /// Gene value 1..=5.
    pub fn from_gene(value: u8) -> Option<Self> {
        match value {
            1..=5 => Some(Self::ALL[value as usize - 1]),
            _ => None,
        }
    }

    pub fn gene(self) -> u8 {
        self as u8 + 1
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            MotifKind::FE => "FE",
            MotifKind::FI => "FI",
            MotifKind::FbI => "FbI",
            MotifKind::LI => "LI",
            MotifKind::MI => "MI",
        }
    }
}

impl fmt::Display for MotifKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MotifKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MotifKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown motif kind {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PopSign {
    Excitatory,
    Inhibitory,
}

impl PopSign {
    pub fn factor(self) -> f64 {
        match self {
            PopSign::Excitatory => 1.0,
            PopSign::Inhibitory => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Delay {
    SameStep,
    OneStep,
}

impl Delay {
    pub fn steps(self) -> usize {
        match self {
            Delay::SameStep => 0,
            Delay::OneStep => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Source {
    /// The motif's input port.
    Input,
    Pop(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TemplateEdge {
    pub src: Source,
    pub dst: usize,
    pub sign: PopSign,
    pub slot: usize,
    pub delay: Delay,
}

#[derive(Debug, PartialEq, Eq)]
pub struct MotifTemplate {
    pub kind: MotifKind,
    pub populations: &'static [(&'static str, PopSign)],
    /// Listed so that same-step edges always point forward.
    pub edges: &'static [TemplateEdge],
    pub outputs: &'static [usize],
}

impl MotifTemplate {
    pub fn slot_count(&self) -> usize {
        self.edges.iter().map(|e| e.slot + 1).max().unwrap_or(0)
    }

    pub fn inhibitory_count(&self) -> usize {
        self.populations
            .iter()
            .filter(|(_, s)| *s == PopSign::Inhibitory)
            .count()
    }

    pub fn source_sign(&self, src: Source) -> PopSign {
        match src {
            Source::Input => PopSign::Excitatory,
            Source::Pop(p) => self.populations[p].1,
        }
    }
}

use Delay::{OneStep, SameStep};
use PopSign::{Excitatory as Exc, Inhibitory as Inh};
use Source::{Input, Pop};

const fn edge(src: Source, dst: usize, sign: PopSign, slot: usize, delay: Delay) -> TemplateEdge {
    TemplateEdge {
        src,
        dst,
        sign,
        slot,
        delay,
    }
}

static FE: MotifTemplate = MotifTemplate {
    kind: MotifKind::FE,
    populations: &[("E1", Exc), ("E2", Exc)],
    edges: &[
        edge(Input, 0, Exc, 0, SameStep),
        edge(Pop(0), 1, Exc, 1, SameStep),
    ],
    outputs: &[1],
};

static FI: MotifTemplate = MotifTemplate {
    kind: MotifKind::FI,
    populations: &[("I", Inh), ("E", Exc)],
    edges: &[
        edge(Input, 0, Exc, 1, SameStep),
        edge(Input, 1, Exc, 0, SameStep),
        edge(Pop(0), 1, Inh, 2, SameStep),
    ],
    outputs: &[1],
};

static FBI: MotifTemplate = MotifTemplate {
    kind: MotifKind::FbI,
    populations: &[("E", Exc), ("I", Inh)],
    edges: &[
        edge(Input, 0, Exc, 0, SameStep),
        edge(Pop(0), 1, Exc, 1, SameStep),
        edge(Pop(1), 0, Inh, 2, OneStep),
    ],
    outputs: &[0],
};

static LI: MotifTemplate = MotifTemplate {
    kind: MotifKind::LI,
    populations: &[("I1", Inh), ("I2", Inh), ("E1", Exc), ("E2", Exc)],
    edges: &[
        edge(Input, 0, Exc, 2, SameStep),
        edge(Input, 1, Exc, 2, SameStep),
        edge(Input, 2, Exc, 0, SameStep),
        edge(Pop(1), 2, Inh, 3, SameStep),
        edge(Input, 3, Exc, 1, SameStep),
        edge(Pop(0), 3, Inh, 3, SameStep),
    ],
    outputs: &[2, 3],
};

static MI: MotifTemplate = MotifTemplate {
    kind: MotifKind::MI,
    populations: &[("I1", Inh), ("I2", Inh), ("E", Exc)],
    edges: &[
        edge(Input, 0, Exc, 0, SameStep),
        edge(Pop(1), 0, Inh, 2, OneStep),
        edge(Input, 1, Exc, 1, SameStep),
        edge(Pop(0), 1, Inh, 2, OneStep),
        edge(Input, 2, Exc, 3, SameStep),
        edge(Pop(0), 2, Inh, 3, SameStep),
        edge(Pop(1), 2, Inh, 3, SameStep),
    ],
    outputs: &[2],
};

/// Canonical wiring of a motif kind.
pub fn template_for(kind: MotifKind) -> &'static MotifTemplate {
    match kind {
        MotifKind::FE => &FE,
        MotifKind::FI => &FI,
        MotifKind::FbI => &FBI,
        MotifKind::LI => &LI,
        MotifKind::MI => &MI,
    }
}

/// Operation applied on a synaptic edge: a `k x k` stride-1 convolution with
/// shape-preserving zero padding. Gene value `v` selects `k = 2v + 1`
/// (1 = 3x3, 2 = 5x5).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OpKind(pub u8);

impl OpKind {
    pub const CONV3X3: OpKind = OpKind(1);
    pub const CONV5X5: OpKind = OpKind(2);

    pub fn kernel(self) -> usize {
        2 * self.0 as usize + 1
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = self.kernel();
        write!(f, "conv{k}x{k}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn negative_edges(t: &MotifTemplate) -> usize {
        t.edges.iter().filter(|e| e.sign == PopSign::Inhibitory).count()
    }

    /// Independent DFS cycle search over a template's edges, optionally
    /// restricted to one delay class.
    fn has_cycle(t: &MotifTemplate, only: Option<Delay>) -> bool {
        let n = t.populations.len();
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|p| {
                t.edges
                    .iter()
                    .filter(|e| e.src == Source::Pop(p) && only.is_none_or(|d| e.delay == d))
                    .map(|e| e.dst)
                    .collect()
            })
            .collect();
        fn visit(v: usize, adj: &[Vec<usize>], state: &mut [u8]) -> bool {
            state[v] = 1;
            for &w in &adj[v] {
                if state[w] == 1 || (state[w] == 0 && visit(w, adj, state)) {
                    return true;
                }
            }
            state[v] = 2;
            false
        }
        let mut state = vec![0u8; n];
        (0..n).any(|v| state[v] == 0 && visit(v, &adj, &mut state))
    }

    #[test]
    fn gene_mapping() {
        for (i, k) in MotifKind::ALL.iter().enumerate() {
            assert_eq!(k.gene() as usize, i + 1);
            assert_eq!(MotifKind::from_gene(k.gene()), Some(*k));
            assert_eq!(k.name().parse::<MotifKind>().unwrap(), *k);
        }
        assert_eq!(MotifKind::from_gene(0), None);
        assert_eq!(MotifKind::from_gene(6), None);
    }

    #[test]
    fn fe_is_purely_excitatory() {
        let t = template_for(MotifKind::FE);
        assert_eq!(t.inhibitory_count(), 0);
        assert_eq!(negative_edges(t), 0);
    }

    #[test]
    fn fi_has_one_inhibitory_branch() {
        let t = template_for(MotifKind::FI);
        assert_eq!(t.inhibitory_count(), 1);
        assert_eq!(negative_edges(t), 1);
    }

    #[test]
    fn mi_has_delayed_two_cycle() {
        let t = template_for(MotifKind::MI);
        let delayed: Vec<_> = t.edges.iter().filter(|e| e.delay == Delay::OneStep).collect();
        assert_eq!(delayed.len(), 2);
        assert!(delayed.iter().all(|e| e.sign == PopSign::Inhibitory));
        let (a, b) = (delayed[0], delayed[1]);
        assert_eq!(a.src, Source::Pop(b.dst));
        assert_eq!(b.src, Source::Pop(a.dst));
        assert!(has_cycle(t, Some(Delay::OneStep)));
    }

    #[test]
    fn template_invariants() {
        for kind in MotifKind::ALL {
            let t = template_for(kind);
            assert_eq!(t.kind, kind);
            for e in t.edges {
                // sign follows the source population
                assert_eq!(e.sign, t.source_sign(e.src), "{kind}: {e:?}");
                if e.delay == Delay::SameStep {
                    if let Source::Pop(p) = e.src {
                        assert!(p < e.dst, "{kind}: same-step edge points backward");
                    }
                }
            }
            // dense slots
            let slots = t.slot_count();
            assert!(slots <= 4);
            for s in 0..slots {
                assert!(t.edges.iter().any(|e| e.slot == s), "{kind}: slot {s} unused");
            }
            // same-step part acyclic; one-step edges exist only where they close a cycle
            assert!(!has_cycle(t, Some(Delay::SameStep)));
            let cyclic = has_cycle(t, None);
            let delayed = t.edges.iter().any(|e| e.delay == Delay::OneStep);
            assert_eq!(cyclic, delayed, "{kind}");
            assert_eq!(delayed, matches!(kind, MotifKind::FbI | MotifKind::MI));
            assert!(!t.outputs.is_empty());
            for &o in t.outputs {
                assert_eq!(t.populations[o].1, PopSign::Excitatory);
            }
        }
    }

    #[test]
    fn op_kernels() {
        assert_eq!(OpKind::CONV3X3.kernel(), 3);
        assert_eq!(OpKind::CONV5X5.kernel(), 5);
        assert_eq!(OpKind(2).to_string(), "conv5x5");
    }
}
