//! Time-unrolled simulation of a decoded network and its backward pass.
//!
//! Every synaptic operation is a same-padded convolution. Convolutions are
//! evaluated by scattering from nonzero source entries, which keeps the cost
//! proportional to spike counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NetworkGraph, NodeKind};
use crate::snn::neuron::NeuronParams;

/// Weight initialization: synaptic weights are normal with
/// std = `gain * sqrt(2 / fan_in)`; population biases start at `bias`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitParams {
    pub gain: f64,
    pub bias: f64,
}

impl Default for InitParams {
    fn default() -> Self {
        InitParams { gain: 1.5, bias: 0.0 }
    }
}

/// Firing nonlinearity used in the forward pass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SpikeFn {
    /// Binary spikes; backward uses the boxcar surrogate.
    Heaviside,
    /// Smooth relaxation `sigmoid(slope * (v - v_th))`; backward is exact.
    Sigmoid { slope: f64 },
}

/// How a static sample drives the input node at each step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum InputEncoding {
    /// The same analog frame at every step.
    #[default]
    Constant,
    /// Bernoulli spikes with probability equal to the intensity clamped to
    /// [0, 1]. Draws are a pure function of (seed, sample, step, pixel).
    Poisson { seed: u64 },
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl InputEncoding {
    fn encode(&self, input: &[f64], t: usize, out: &mut [f64]) {
        match *self {
            InputEncoding::Constant => out.copy_from_slice(input),
            InputEncoding::Poisson { seed } => {
                let sample = input.iter().fold(seed, |h, x| splitmix(h ^ x.to_bits()));
                let base = splitmix(sample ^ t as u64);
                for (i, (o, &x)) in out.iter_mut().zip(input).enumerate() {
                    let u = (splitmix(base ^ i as u64) >> 11) as f64 / (1u64 << 53) as f64;
                    *o = f64::from(u8::from(u < x.clamp(0.0, 1.0)));
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub name: String,
    pub offset: usize,
    pub shape: Vec<usize>,
}

impl ParamBlock {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    graph: NetworkGraph,
    pub neuron: NeuronParams,
    pub spike_fn: SpikeFn,
    /// Treat the reset as a constant in the backward pass.
    pub detach_reset: bool,
    pub encoding: InputEncoding,
    classes: usize,
    params: Vec<f64>,
    blocks: Vec<ParamBlock>,
    syn_block: Vec<Option<usize>>,
    bias_block: Vec<Option<usize>>,
    readout_w: usize,
    readout_b: usize,
    inbound: Vec<Vec<usize>>,
    node_offset: Vec<usize>,
    frame_len: usize,
}

/// Recorded activity of one sample.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    /// `[t][frame]` node outputs (spikes for populations).
    values: Vec<f64>,
    /// `[t][frame]` pre-reset membrane potentials of populations.
    v_pre: Vec<f64>,
    membrane: Vec<f64>,
    scratch: Vec<f64>,
    pub module_spikes: Vec<u64>,
    pub features: Vec<f64>,
    pub logits: Vec<f64>,
}

/// Scratch space for [`Network::backward`].
#[derive(Clone, Debug, Default)]
pub struct GradBuffers {
    grad_values: Vec<f64>,
    carry: Vec<f64>,
    g_current: Vec<f64>,
}

fn mix(seed: u64, name: &str) -> u64 {
    // FNV-1a over the block name, folded with the seed through splitmix64.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Network {
    /// Builds a network with freshly initialized weights. Each parameter block
    /// draws from its own stream keyed by its name, so a block's initial
    /// values do not depend on the rest of the architecture.
    pub fn new(graph: NetworkGraph, classes: usize, neuron: NeuronParams, seed: u64) -> Result<Self> {
        Self::with_init(graph, classes, neuron, seed, InitParams::default())
    }

    pub fn with_init(
        graph: NetworkGraph,
        classes: usize,
        neuron: NeuronParams,
        seed: u64,
        init: InitParams,
    ) -> Result<Self> {
        neuron.check()?;
        graph.decode.check()?;
        if classes < 2 {
            return Err(Error::Config("readout needs at least 2 classes".into()));
        }
        let plane = graph.decode.plane();
        let mut blocks = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, shape: Vec<usize>| {
            let b = ParamBlock { name, offset, shape };
            offset += b.len();
            blocks.push(b);
            blocks.len() - 1
        };

        let mut syn_block = vec![None; graph.synapses.len()];
        for (i, s) in graph.synapses.iter().enumerate() {
            if let Some(op) = s.op {
                let k = op.kernel();
                let name = format!("{}->{}", graph.nodes[s.src].name, graph.nodes[s.dst].name);
                let shape = vec![graph.nodes[s.dst].channels, graph.nodes[s.src].channels, k, k];
                syn_block[i] = Some(push(name, shape));
            }
        }
        let mut bias_block = vec![None; graph.nodes.len()];
        for (i, n) in graph.nodes.iter().enumerate() {
            if n.is_spiking() {
                bias_block[i] = Some(push(format!("bias:{}", n.name), vec![n.channels]));
            }
        }
        let feat = graph.nodes[graph.readout_source].channels;
        let readout_w = push("readout.weight".into(), vec![classes, feat]);
        let readout_b = push("readout.bias".into(), vec![classes]);

        let mut params = vec![0.0; offset];
        for block in syn_block.iter().flatten().map(|&b| &blocks[b]) {
            let fan_in = (block.shape[1] * block.shape[2] * block.shape[3]) as f64;
            let std = init.gain * (2.0 / fan_in).sqrt();
            fill_normal(&mut params[block.range()], std, mix(seed, &block.name));
        }
        for block in bias_block.iter().flatten().map(|&b| &blocks[b]) {
            params[block.range()].iter_mut().for_each(|x| *x = init.bias);
        }
        let rw = &blocks[readout_w];
        fill_normal(&mut params[rw.range()], (1.0 / feat as f64).sqrt(), mix(seed, &rw.name));

        let mut inbound = vec![Vec::new(); graph.nodes.len()];
        for (i, s) in graph.synapses.iter().enumerate() {
            inbound[s.dst].push(i);
        }
        let mut node_offset = Vec::with_capacity(graph.nodes.len());
        let mut frame_len = 0;
        for n in &graph.nodes {
            node_offset.push(frame_len);
            frame_len += n.channels * plane;
        }

        Ok(Network {
            graph,
            neuron,
            spike_fn: SpikeFn::Heaviside,
            detach_reset: true,
            encoding: InputEncoding::Constant,
            classes,
            params,
            blocks,
            syn_block,
            bias_block,
            readout_w,
            readout_b,
            inbound,
            node_offset,
            frame_len,
        })
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn timesteps(&self) -> usize {
        self.graph.decode.timesteps
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn blocks(&self) -> &[ParamBlock] {
        &self.blocks
    }

    /// Reorders the inbound synapses of every node (test hook for checking
    /// that accumulation order does not matter).
    pub fn permute_inbound(&mut self, seed: u64) {
        use rand::seq::SliceRandom;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for list in &mut self.inbound {
            list.shuffle(&mut rng);
        }
    }

    fn node_len(&self, node: usize) -> usize {
        self.graph.nodes[node].channels * self.graph.decode.plane()
    }

    #[inline]
    fn fire(&self, v: f64) -> f64 {
        match self.spike_fn {
            SpikeFn::Heaviside => {
                if v >= self.neuron.v_th {
                    1.0
                } else {
                    0.0
                }
            }
            SpikeFn::Sigmoid { slope } => 1.0 / (1.0 + (-slope * (v - self.neuron.v_th)).exp()),
        }
    }

    /// Runs `T` timesteps on one static sample presented as constant input.
    pub fn forward(&self, input: &[f64], trace: &mut Trace) -> Result<()> {
        let dc = &self.graph.decode;
        let expected: usize = dc.input_shape.iter().product();
        if input.len() != expected {
            return Err(Error::Shape {
                expected: format!("{:?}", dc.input_shape),
                found: input.len().to_string(),
            });
        }
        let t_steps = dc.timesteps;
        let (h, w) = (dc.input_shape[1], dc.input_shape[2]);
        let plane = h * w;
        let frame = self.frame_len;
        trace.values.clear();
        trace.values.resize(t_steps * frame, 0.0);
        trace.v_pre.clear();
        trace.v_pre.resize(t_steps * frame, 0.0);
        trace.membrane.clear();
        trace.membrane.resize(frame, self.neuron.v_rest);
        trace.module_spikes.clear();
        trace.module_spikes.resize(self.graph.genome_config.l, 0);

        for t in 0..t_steps {
            for (n, node) in self.graph.nodes.iter().enumerate() {
                let off = t * frame + self.node_offset[n];
                let len = self.node_len(n);
                let (before, rest) = trace.values.split_at_mut(off);
                let out = &mut rest[..len];
                match node.kind {
                    NodeKind::Input => self.encoding.encode(input, t, out),
                    NodeKind::ModuleInput { .. } | NodeKind::MotifOutput { .. } => {
                        for &si in &self.inbound[n] {
                            let s = &self.graph.synapses[si];
                            let d = s.delay.steps();
                            if t < d {
                                continue;
                            }
                            let so = (t - d) * frame + self.node_offset[s.src];
                            for (o, v) in out.iter_mut().zip(&before[so..so + len]) {
                                *o += v;
                            }
                        }
                    }
                    NodeKind::Stem | NodeKind::Population { .. } => {
                        let cur = &mut trace.scratch;
                        cur.clear();
                        cur.resize(len, 0.0);
                        let bias = &self.params[self.blocks[self.bias_block[n].unwrap()].range()];
                        for (c, b) in bias.iter().enumerate() {
                            cur[c * plane..(c + 1) * plane].iter_mut().for_each(|x| *x = *b);
                        }
                        for &si in &self.inbound[n] {
                            let s = &self.graph.synapses[si];
                            let d = s.delay.steps();
                            if t < d {
                                continue;
                            }
                            let block = &self.blocks[self.syn_block[si].unwrap()];
                            let so = (t - d) * frame + self.node_offset[s.src];
                            let cin = block.shape[1];
                            conv_forward(
                                &before[so..so + cin * plane],
                                cin,
                                &self.params[block.range()],
                                block.shape[0],
                                block.shape[2],
                                h,
                                w,
                                s.sign.factor(),
                                cur,
                            );
                        }
                        let mem = &mut trace.membrane[self.node_offset[n]..self.node_offset[n] + len];
                        let vp = &mut trace.v_pre[off..off + len];
                        let mut count = 0u64;
                        for i in 0..len {
                            let pre = self.neuron.integrate(mem[i], cur[i]);
                            let s = self.fire(pre);
                            vp[i] = pre;
                            out[i] = s;
                            mem[i] = pre * (1.0 - s) + self.neuron.v_rest * s;
                            if s >= 0.5 {
                                count += 1;
                            }
                        }
                        if let Some(m) = node.module() {
                            trace.module_spikes[m] += count;
                        }
                    }
                }
            }
        }

        // readout: time- and space-averaged output rates
        let src = self.graph.readout_source;
        let channels = self.graph.nodes[src].channels;
        let norm = 1.0 / (t_steps * plane) as f64;
        trace.features.clear();
        trace.features.resize(channels, 0.0);
        for t in 0..t_steps {
            let off = t * frame + self.node_offset[src];
            for c in 0..channels {
                trace.features[c] += trace.values[off + c * plane..off + (c + 1) * plane].iter().sum::<f64>();
            }
        }
        trace.features.iter_mut().for_each(|f| *f *= norm);
        let rw = &self.params[self.blocks[self.readout_w].range()];
        let rb = &self.params[self.blocks[self.readout_b].range()];
        trace.logits.clear();
        for k in 0..self.classes {
            let row = &rw[k * channels..(k + 1) * channels];
            let z: f64 = row.iter().zip(&trace.features).map(|(a, b)| a * b).sum::<f64>() + rb[k];
            trace.logits.push(z);
        }
        if trace.logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite("logits"));
        }
        Ok(())
    }

    /// Spike tensor of `node` at step `t` from a recorded trace.
    pub fn node_values<'a>(&self, trace: &'a Trace, t: usize, node: usize) -> &'a [f64] {
        let off = t * self.frame_len + self.node_offset[node];
        &trace.values[off..off + self.node_len(node)]
    }

    /// Backpropagates the cross-entropy of `label` through time, adding
    /// `scale * dL/dparam` into `grad`. Returns the loss.
    pub fn backward(
        &self,
        trace: &Trace,
        label: usize,
        scale: f64,
        grad: &mut [f64],
        buf: &mut GradBuffers,
    ) -> f64 {
        let dc = &self.graph.decode;
        let t_steps = dc.timesteps;
        let (h, w) = (dc.input_shape[1], dc.input_shape[2]);
        let plane = h * w;
        let frame = self.frame_len;

        let (loss, probs) = cross_entropy(&trace.logits, label);
        let mut g_logits = probs;
        g_logits[label] -= 1.0;
        g_logits.iter_mut().for_each(|g| *g *= scale);

        let src = self.graph.readout_source;
        let channels = self.graph.nodes[src].channels;
        let rw_block = &self.blocks[self.readout_w];
        let rb_block = &self.blocks[self.readout_b];
        let mut g_feat = vec![0.0; channels];
        for k in 0..self.classes {
            grad[rb_block.offset + k] += g_logits[k];
            for c in 0..channels {
                grad[rw_block.offset + k * channels + c] += g_logits[k] * trace.features[c];
                g_feat[c] += g_logits[k] * self.params[rw_block.offset + k * channels + c];
            }
        }

        buf.grad_values.clear();
        buf.grad_values.resize(t_steps * frame, 0.0);
        buf.carry.clear();
        buf.carry.resize(frame, 0.0);
        let norm = 1.0 / (t_steps * plane) as f64;
        for t in 0..t_steps {
            let off = t * frame + self.node_offset[src];
            for c in 0..channels {
                let g = g_feat[c] * norm;
                buf.grad_values[off + c * plane..off + (c + 1) * plane]
                    .iter_mut()
                    .for_each(|x| *x += g);
            }
        }

        let p = &self.neuron;
        let inv_tau = 1.0 / p.tau;
        for t in (0..t_steps).rev() {
            for n in (0..self.graph.nodes.len()).rev() {
                let node = &self.graph.nodes[n];
                let len = self.node_len(n);
                let off = t * frame + self.node_offset[n];
                let (before, rest) = buf.grad_values.split_at_mut(off);
                let g_out = &rest[..len];
                match node.kind {
                    NodeKind::Input => {}
                    NodeKind::ModuleInput { .. } | NodeKind::MotifOutput { .. } => {
                        for &si in &self.inbound[n] {
                            let s = &self.graph.synapses[si];
                            let d = s.delay.steps();
                            if t < d {
                                continue;
                            }
                            let so = (t - d) * frame + self.node_offset[s.src];
                            for (gs, g) in before[so..so + len].iter_mut().zip(g_out) {
                                *gs += g;
                            }
                        }
                    }
                    NodeKind::Stem | NodeKind::Population { .. } => {
                        let carry = &mut buf.carry[self.node_offset[n]..self.node_offset[n] + len];
                        let v_pre = &trace.v_pre[off..off + len];
                        let spikes = &trace.values[off..off + len];
                        let g_cur = &mut buf.g_current;
                        g_cur.clear();
                        g_cur.resize(len, 0.0);
                        let mut any = false;
                        for i in 0..len {
                            let s = spikes[i];
                            let pre = v_pre[i];
                            let sg = match self.spike_fn {
                                SpikeFn::Heaviside => p.surrogate_grad(pre),
                                SpikeFn::Sigmoid { slope } => slope * s * (1.0 - s),
                            };
                            let mut dv_dpre = 1.0 - s;
                            if !self.detach_reset {
                                dv_dpre += (p.v_rest - pre) * sg;
                            }
                            let g_pre = carry[i] * dv_dpre + g_out[i] * sg;
                            carry[i] = g_pre * (1.0 - inv_tau);
                            g_cur[i] = g_pre * inv_tau;
                            any |= g_cur[i] != 0.0;
                        }
                        if !any {
                            continue;
                        }
                        let bb = &self.blocks[self.bias_block[n].unwrap()];
                        for c in 0..node.channels {
                            grad[bb.offset + c] += g_cur[c * plane..(c + 1) * plane].iter().sum::<f64>();
                        }
                        for &si in &self.inbound[n] {
                            let s = &self.graph.synapses[si];
                            let d = s.delay.steps();
                            if t < d {
                                continue;
                            }
                            let block = &self.blocks[self.syn_block[si].unwrap()];
                            let cin = block.shape[1];
                            let so = (t - d) * frame + self.node_offset[s.src];
                            let src_vals = &trace.values[so..so + cin * plane];
                            let g_src = match self.graph.nodes[s.src].kind {
                                NodeKind::Input => None,
                                _ => Some(&mut before[so..so + cin * plane]),
                            };
                            conv_backward(
                                src_vals,
                                cin,
                                &self.params[block.range()],
                                block.shape[0],
                                block.shape[2],
                                h,
                                w,
                                s.sign.factor(),
                                g_cur,
                                &mut grad[block.range()],
                                g_src,
                            );
                        }
                    }
                }
            }
        }
        loss
    }
}

fn fill_normal(out: &mut [f64], std: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::new(0.0, std).expect("finite std");
    for x in out {
        *x = dist.sample(&mut rng);
    }
}

/// Softmax cross-entropy; returns (loss, probabilities).
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = -(logits[label] - max - sum.ln());
    (loss, exps.into_iter().map(|e| e / sum).collect())
}

/// `out[co][oy][ox] += sign * sum w[co][ci][ky][kx] * src[ci][oy+ky-p][ox+kx-p]`,
/// scattered from the nonzero entries of `src`.
#[allow(clippy::too_many_arguments)]
fn conv_forward(
    src: &[f64],
    cin: usize,
    weights: &[f64],
    cout: usize,
    k: usize,
    h: usize,
    w: usize,
    sign: f64,
    out: &mut [f64],
) {
    let p = k / 2;
    let kk = k * k;
    for ci in 0..cin {
        for iy in 0..h {
            let ky_lo = (iy + p).saturating_sub(h - 1);
            let ky_hi = (k - 1).min(iy + p);
            for ix in 0..w {
                let v = src[(ci * h + iy) * w + ix];
                if v == 0.0 {
                    continue;
                }
                let v = v * sign;
                let kx_lo = (ix + p).saturating_sub(w - 1);
                let kx_hi = (k - 1).min(ix + p);
                for co in 0..cout {
                    let wb = (co * cin + ci) * kk;
                    let ob = co * h * w;
                    for ky in ky_lo..=ky_hi {
                        let orow = ob + (iy + p - ky) * w + ix + p;
                        let wrow = wb + ky * k;
                        for kx in kx_lo..=kx_hi {
                            out[orow - kx] += v * weights[wrow + kx];
                        }
                    }
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    src: &[f64],
    cin: usize,
    weights: &[f64],
    cout: usize,
    k: usize,
    h: usize,
    w: usize,
    sign: f64,
    g_out: &[f64],
    g_weights: &mut [f64],
    g_src: Option<&mut [f64]>,
) {
    let p = k / 2;
    let kk = k * k;
    for ci in 0..cin {
        for iy in 0..h {
            let ky_lo = (iy + p).saturating_sub(h - 1);
            let ky_hi = (k - 1).min(iy + p);
            for ix in 0..w {
                let v = src[(ci * h + iy) * w + ix];
                if v == 0.0 {
                    continue;
                }
                let v = v * sign;
                let kx_lo = (ix + p).saturating_sub(w - 1);
                let kx_hi = (k - 1).min(ix + p);
                for co in 0..cout {
                    let wb = (co * cin + ci) * kk;
                    let ob = co * h * w;
                    for ky in ky_lo..=ky_hi {
                        let orow = ob + (iy + p - ky) * w + ix + p;
                        let wrow = wb + ky * k;
                        for kx in kx_lo..=kx_hi {
                            g_weights[wrow + kx] += v * g_out[orow - kx];
                        }
                    }
                }
            }
        }
    }
    let Some(g_src) = g_src else { return };
    for co in 0..cout {
        for oy in 0..h {
            let ky_lo = p.saturating_sub(oy);
            let ky_hi = (k - 1).min(p + h - 1 - oy);
            for ox in 0..w {
                let g = g_out[(co * h + oy) * w + ox];
                if g == 0.0 {
                    continue;
                }
                let g = g * sign;
                let kx_lo = p.saturating_sub(ox);
                let kx_hi = (k - 1).min(p + w - 1 - ox);
                for ci in 0..cin {
                    let wb = (co * cin + ci) * kk;
                    let sb = ci * h * w;
                    for ky in ky_lo..=ky_hi {
                        let srow = sb + (oy + ky - p) * w + ox;
                        let wrow = wb + ky * k;
                        for kx in kx_lo..=kx_hi {
                            g_src[srow + kx - p] += g * weights[wrow + kx];
                        }
                    }
                }
            }
        }
    }
}
