//! Decoding a genome into an executable network graph.
//!
//! The graph is a flat list of nodes and synapses. Spiking nodes are LIF
//! populations (the stem and every motif population); the remaining nodes are
//! summing junctions (module inputs and motif outputs) that add their inbound
//! spike tensors. Nodes are stored in an order in which every same-step
//! synapse points forward, so a single pass per timestep evaluates the graph.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::{Genome, GenomeConfig, MOTIFS_PER_MODULE};
use crate::motif::{template_for, Delay, MotifKind, OpKind, PopSign, Source};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    /// (channels, height, width) of one input sample.
    pub input_shape: [usize; 3],
    pub stem_channels: usize,
    pub timesteps: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            input_shape: [1, 8, 8],
            stem_channels: 4,
            timesteps: 4,
        }
    }
}

impl DecodeConfig {
    pub fn check(&self) -> Result<()> {
        if self.input_shape.contains(&0) || self.stem_channels == 0 || self.timesteps == 0 {
            return Err(Error::Config(
                "input shape, stem channels and timesteps must all be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn plane(&self) -> usize {
        self.input_shape[1] * self.input_shape[2]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum NodeKind {
    Input,
    Stem,
    ModuleInput {
        module: usize,
    },
    Population {
        module: usize,
        motif: usize,
        kind: MotifKind,
        name: &'static str,
        sign: PopSign,
    },
    MotifOutput {
        module: usize,
        motif: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    pub channels: usize,
}

impl Node {
    /// LIF population (as opposed to the input or a summing junction).
    pub fn is_spiking(&self) -> bool {
        matches!(self.kind, NodeKind::Stem | NodeKind::Population { .. })
    }

    pub fn module(&self) -> Option<usize> {
        match self.kind {
            NodeKind::ModuleInput { module }
            | NodeKind::Population { module, .. }
            | NodeKind::MotifOutput { module, .. } => Some(module),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Synapse {
    pub src: usize,
    pub dst: usize,
    pub sign: PopSign,
    pub delay: Delay,
    /// `None` is an identity pass-through into a summing junction.
    pub op: Option<OpKind>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MotifInstance {
    pub kind: MotifKind,
    /// Operation per template slot.
    pub ops: Vec<OpKind>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GlobalEdge {
    pub from: usize,
    pub to: usize,
    pub delay: Delay,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NetworkGraph {
    pub genome_config: GenomeConfig,
    pub decode: DecodeConfig,
    pub modules: Vec<Vec<MotifInstance>>,
    pub global_edges: Vec<GlobalEdge>,
    pub nodes: Vec<Node>,
    pub synapses: Vec<Synapse>,
    /// Output node of each module (its last motif's output junction).
    pub module_outputs: Vec<usize>,
    /// Node averaged over space and time by the linear readout.
    pub readout_source: usize,
}

/// Operation used by template slot `slot`. Slots beyond the available
/// operation genes reuse them cyclically.
pub fn slot_op(ops: &[u8], slot: usize) -> OpKind {
    OpKind(ops[slot % ops.len()])
}

/// Decodes a valid genome. Motifs are chained in gene order inside each
/// module; module 1 is fed by the stem and the last module feeds the readout.
pub fn decode(genome: &Genome, cfg: &DecodeConfig) -> Result<NetworkGraph> {
    cfg.check()?;
    genome.config().check()?;
    let violations = genome.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidGenome(violations));
    }
    let gcfg = *genome.config();
    let channels = cfg.stem_channels;

    let modules: Vec<Vec<MotifInstance>> = (0..gcfg.l)
        .map(|m| {
            (0..MOTIFS_PER_MODULE)
                .map(|s| {
                    let kind = MotifKind::from_gene(genome.motif_kind(m, s))
                        .expect("validated motif gene");
                    let ops = genome.motif_ops(m, s);
                    let slots = template_for(kind).slot_count();
                    MotifInstance {
                        kind,
                        ops: (0..slots).map(|slot| slot_op(ops, slot)).collect(),
                    }
                })
                .collect()
        })
        .collect();

    let mut global_edges = Vec::new();
    for from in 0..gcfg.l {
        for to in 0..gcfg.l {
            if from != to && genome.connection(from, to) == 1 {
                let delay = if from < to {
                    Delay::SameStep
                } else {
                    Delay::OneStep
                };
                global_edges.push(GlobalEdge { from, to, delay });
            }
        }
    }

    let mut nodes = vec![
        Node {
            name: "input".into(),
            kind: NodeKind::Input,
            channels: cfg.input_shape[0],
        },
        Node {
            name: "stem".into(),
            kind: NodeKind::Stem,
            channels,
        },
    ];
    let mut synapses = vec![Synapse {
        src: 0,
        dst: 1,
        sign: PopSign::Excitatory,
        delay: Delay::SameStep,
        op: Some(OpKind::CONV3X3),
    }];

    let mut module_inputs = Vec::with_capacity(gcfg.l);
    let mut module_outputs = Vec::with_capacity(gcfg.l);
    for (m, motifs) in modules.iter().enumerate() {
        let input = nodes.len();
        nodes.push(Node {
            name: format!("m{}.in", m + 1),
            kind: NodeKind::ModuleInput { module: m },
            channels,
        });
        module_inputs.push(input);
        let mut port = input;
        for (s, inst) in motifs.iter().enumerate() {
            let t = template_for(inst.kind);
            let base = nodes.len();
            for &(name, sign) in t.populations {
                nodes.push(Node {
                    name: format!("m{}.s{}.{}.{}", m + 1, s + 1, inst.kind, name),
                    kind: NodeKind::Population {
                        module: m,
                        motif: s,
                        kind: inst.kind,
                        name,
                        sign,
                    },
                    channels,
                });
            }
            for e in t.edges {
                let src = match e.src {
                    Source::Input => port,
                    Source::Pop(p) => base + p,
                };
                synapses.push(Synapse {
                    src,
                    dst: base + e.dst,
                    sign: e.sign,
                    delay: e.delay,
                    op: Some(inst.ops[e.slot]),
                });
            }
            let out = nodes.len();
            nodes.push(Node {
                name: format!("m{}.s{}.out", m + 1, s + 1),
                kind: NodeKind::MotifOutput { module: m, motif: s },
                channels,
            });
            for &o in t.outputs {
                synapses.push(Synapse {
                    src: base + o,
                    dst: out,
                    sign: PopSign::Excitatory,
                    delay: Delay::SameStep,
                    op: None,
                });
            }
            port = out;
        }
        module_outputs.push(port);
    }

    // stem drives module 1
    synapses.push(Synapse {
        src: 1,
        dst: module_inputs[0],
        sign: PopSign::Excitatory,
        delay: Delay::SameStep,
        op: None,
    });
    for e in &global_edges {
        synapses.push(Synapse {
            src: module_outputs[e.from],
            dst: module_inputs[e.to],
            sign: PopSign::Excitatory,
            delay: e.delay,
            op: None,
        });
    }

    let readout_source = module_outputs[gcfg.l - 1];
    Ok(NetworkGraph {
        genome_config: gcfg,
        decode: *cfg,
        modules,
        global_edges,
        nodes,
        synapses,
        module_outputs,
        readout_source,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GraphStats {
    /// LIF populations, stem included.
    pub populations: usize,
    pub neurons: usize,
    /// Convolutional synapses inside motifs.
    pub motif_edges: usize,
    /// Motif synapses that carry a one-step delay.
    pub motif_recurrent_edges: usize,
    pub global_edges: usize,
    /// Global edges pointing to an earlier module (realized through time).
    pub feedback_edges: usize,
    /// Motif instances per kind, in FE, FI, FbI, LI, MI order.
    pub motif_counts: [usize; 5],
    /// Motif synapses per operation value (index 0 = op 1).
    pub op_counts: Vec<usize>,
}

pub fn graph_stats(net: &NetworkGraph) -> GraphStats {
    let plane = net.decode.plane();
    let mut populations = 0;
    let mut neurons = 0;
    for n in net.nodes.iter().filter(|n| n.is_spiking()) {
        populations += 1;
        neurons += n.channels * plane;
    }
    let mut motif_counts = [0; 5];
    for inst in net.modules.iter().flatten() {
        motif_counts[inst.kind.index()] += 1;
    }
    let mut op_counts = vec![0; net.genome_config.ops];
    let mut motif_edges = 0;
    let mut motif_recurrent_edges = 0;
    for s in &net.synapses {
        if let (Some(op), NodeKind::Population { .. }) = (s.op, &net.nodes[s.dst].kind) {
            motif_edges += 1;
            if s.delay == Delay::OneStep {
                motif_recurrent_edges += 1;
            }
            if let Some(c) = op_counts.get_mut(op.0 as usize - 1) {
                *c += 1;
            }
        }
    }
    GraphStats {
        populations,
        neurons,
        motif_edges,
        motif_recurrent_edges,
        global_edges: net.global_edges.len(),
        feedback_edges: net
            .global_edges
            .iter()
            .filter(|e| e.delay == Delay::OneStep)
            .count(),
        motif_counts,
        op_counts,
    }
}

/// Architecture summary computed straight from the genes, without building
/// the node list. Agrees with [`graph_stats`] on the shared fields.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GenomeSummary {
    pub motif_counts: [usize; 5],
    pub global_edges: usize,
    pub feedback_edges: usize,
    pub op_counts: Vec<usize>,
}

pub fn genome_summary(genome: &Genome) -> GenomeSummary {
    let cfg = genome.config();
    let mut motif_counts = [0; 5];
    let mut op_counts = vec![0; cfg.ops];
    for m in 0..cfg.l {
        for s in 0..MOTIFS_PER_MODULE {
            let Some(kind) = MotifKind::from_gene(genome.motif_kind(m, s)) else {
                continue;
            };
            motif_counts[kind.index()] += 1;
            let ops = genome.motif_ops(m, s);
            for e in template_for(kind).edges {
                let v = slot_op(ops, e.slot).0 as usize;
                if (1..=cfg.ops).contains(&v) {
                    op_counts[v - 1] += 1;
                }
            }
        }
    }
    let mut global_edges = 0;
    let mut feedback_edges = 0;
    for i in 0..cfg.l {
        for j in 0..cfg.l {
            if i != j && genome.connection(i, j) == 1 {
                global_edges += 1;
                if i > j {
                    feedback_edges += 1;
                }
            }
        }
    }
    GenomeSummary {
        motif_counts,
        global_edges,
        feedback_edges,
        op_counts,
    }
}

impl NetworkGraph {
    /// Whether the last module can receive activity from the stem through
    /// global edges of either delay.
    pub fn output_reachable(&self) -> bool {
        let l = self.genome_config.l;
        let mut seen = vec![false; l];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(m) = queue.pop_front() {
            for e in self.global_edges.iter().filter(|e| e.from == m) {
                if !seen[e.to] {
                    seen[e.to] = true;
                    queue.push_back(e.to);
                }
            }
        }
        seen[l - 1]
    }

    /// Topological order of the same-step subgraph, or `None` if it has a
    /// cycle (Kahn's algorithm).
    pub fn same_step_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for s in self.synapses.iter().filter(|s| s.delay == Delay::SameStep) {
            indeg[s.dst] += 1;
            out[s.src].push(s.dst);
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &out[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    queue.push_back(w);
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// JSON adjacency description for visualization tools.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serialization is infallible")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::random_genome;

    fn genome_with(cfg: GenomeConfig, kind: MotifKind, conn: &[(usize, usize)]) -> Genome {
        let mut g = random_genome(&cfg, 5).unwrap();
        for m in 0..cfg.l {
            for s in 0..MOTIFS_PER_MODULE {
                let i = cfg.motif_offset(m, s);
                g.genes_mut()[i] = kind.gene();
            }
        }
        for i in 0..cfg.l {
            for j in 0..cfg.l {
                g.set_connection(i, j, 0);
            }
        }
        for &(i, j) in conn {
            g.set_connection(i, j, 1);
        }
        g
    }

    fn hierarchical(l: usize) -> Vec<(usize, usize)> {
        (0..l - 1).map(|i| (i, i + 1)).collect()
    }

    #[test]
    fn empty_connection_matrix() {
        let cfg = GenomeConfig::default();
        let g = genome_with(cfg, MotifKind::FI, &[]);
        let net = decode(&g, &DecodeConfig::default()).unwrap();
        assert!(net.global_edges.is_empty());
        assert!(!net.output_reachable());
        assert_eq!(graph_stats(&net).feedback_edges, 0);
    }

    #[test]
    fn hierarchical_chain_has_no_delays() {
        let cfg = GenomeConfig::default();
        let g = genome_with(cfg, MotifKind::LI, &hierarchical(4));
        let net = decode(&g, &DecodeConfig::default()).unwrap();
        assert_eq!(net.global_edges.len(), 3);
        assert!(net.global_edges.iter().all(|e| e.delay == Delay::SameStep));
        assert!(net.output_reachable());
        assert_eq!(graph_stats(&net).feedback_edges, 0);
    }

    #[test]
    fn backward_edge_is_delayed() {
        let cfg = GenomeConfig::default();
        let g = genome_with(cfg, MotifKind::FE, &[(3, 0)]);
        let net = decode(&g, &DecodeConfig::default()).unwrap();
        assert_eq!(
            net.global_edges,
            vec![GlobalEdge { from: 3, to: 0, delay: Delay::OneStep }]
        );
        assert_eq!(graph_stats(&net).feedback_edges, 1);
    }

    #[test]
    fn all_fe_counts() {
        let cfg = GenomeConfig::default();
        let g = genome_with(cfg, MotifKind::FE, &hierarchical(4));
        let st = graph_stats(&decode(&g, &DecodeConfig::default()).unwrap());
        assert_eq!(st.motif_counts, [20, 0, 0, 0, 0]);
        assert_eq!(st.motif_edges, 40);
        assert_eq!(st.op_counts.iter().sum::<usize>(), 40);
        // stem + 2 populations per FE motif
        assert_eq!(st.populations, 1 + 40);
        assert_eq!(st.neurons, 41 * 4 * 64);
    }

    #[test]
    fn invalid_genome_rejected() {
        let cfg = GenomeConfig::default();
        let mut g = random_genome(&cfg, 1).unwrap();
        g.set_connection(2, 2, 1);
        match decode(&g, &DecodeConfig::default()) {
            Err(Error::InvalidGenome(v)) => assert_eq!(v.len(), 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ops_follow_slot_genes() {
        let cfg = GenomeConfig::default();
        let mut g = genome_with(cfg, MotifKind::FE, &[]);
        let off = cfg.motif_offset(0, 0);
        g.genes_mut()[off + 1] = 2;
        g.genes_mut()[off + 2] = 1;
        let net = decode(&g, &DecodeConfig::default()).unwrap();
        assert_eq!(net.modules[0][0].ops, vec![OpKind::CONV5X5, OpKind::CONV3X3]);
    }

    #[test]
    fn short_motifs_reuse_op_genes() {
        let cfg = GenomeConfig::new(2, 2, 2).unwrap();
        let g = genome_with(cfg, MotifKind::MI, &[(0, 1)]);
        let net = decode(&g, &DecodeConfig::default()).unwrap();
        let op = g.motif_ops(0, 0)[0];
        assert!(net.modules[0][0].ops.iter().all(|o| o.0 == op));
    }

    #[test]
    fn summary_matches_stats() {
        for seed in 0..50 {
            let cfg = GenomeConfig::default();
            let g = random_genome(&cfg, seed).unwrap();
            let net = decode(&g, &DecodeConfig::default()).unwrap();
            let st = graph_stats(&net);
            let sum = genome_summary(&g);
            assert_eq!(sum.motif_counts, st.motif_counts);
            assert_eq!(sum.global_edges, st.global_edges);
            assert_eq!(sum.feedback_edges, st.feedback_edges);
            assert_eq!(sum.op_counts, st.op_counts);
        }
    }

    #[test]
    fn node_order_is_topological() {
        for seed in 0..50 {
            let g = random_genome(&GenomeConfig::default(), seed).unwrap();
            let net = decode(&g, &DecodeConfig::default()).unwrap();
            assert!(net.same_step_order().is_some());
            for s in net.synapses.iter().filter(|s| s.delay == Delay::SameStep) {
                assert!(s.src < s.dst);
            }
        }
    }

    #[test]
    fn exports_json() {
        let g = random_genome(&GenomeConfig::new(2, 4, 2).unwrap(), 0).unwrap();
        let net = decode(&g, &DecodeConfig::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&net.to_json()).unwrap();
        assert_eq!(v["nodes"][1]["name"], "stem");
        assert!(v["synapses"].as_array().unwrap().len() > 10);
    }
}
