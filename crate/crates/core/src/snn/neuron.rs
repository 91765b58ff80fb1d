use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Leaky integrate-and-fire parameters. `tau` stands for the product RC.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NeuronParams {
    pub tau: f64,
    pub v_rest: f64,
    pub v_th: f64,
    /// Surrogate steepness; the boxcar has half-width `1 / alpha`.
    pub alpha: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams {
            tau: 2.0,
            v_rest: 0.0,
            v_th: 0.5,
            alpha: 2.0,
        }
    }
}

impl NeuronParams {
    pub fn check(&self) -> Result<()> {
        if !(self.tau > 0.0) || !(self.v_th > self.v_rest) || !(self.alpha > 0.0) {
            return Err(Error::Config(
                "neuron parameters need tau > 0, v_th > v_rest and alpha > 0".into(),
            ));
        }
        Ok(())
    }

    /// One Euler step (dt = 1) of the membrane equation, before firing.
    #[inline]
    pub fn integrate(&self, v_prev: f64, current: f64) -> f64 {
        v_prev + (-(v_prev - self.v_rest) + current) / self.tau
    }

    /// Boxcar surrogate of the spike derivative: 1 inside
    /// `[v_th - 1/alpha, v_th + 1/alpha]`, 0 outside.
    #[inline]
    pub fn surrogate_grad(&self, v: f64) -> f64 {
        let d = v - self.v_th;
        let half = 1.0 / self.alpha;
        if -half <= d && d <= half {
            1.0
        } else {
            0.0
        }
    }
}

/// Scalar form of [`NeuronParams::surrogate_grad`].
pub fn surrogate_grad(v: f64, p: &NeuronParams) -> f64 {
    p.surrogate_grad(v)
}

/// Advances a population by one step: integrate, fire where the potential
/// reaches threshold, hard-reset fired neurons to `v_rest`.
pub fn lif_step(v_prev: &[f64], current: &[f64], p: &NeuronParams) -> Result<(Vec<f64>, Vec<u8>)> {
    if v_prev.len() != current.len() {
        return Err(Error::Shape {
            expected: v_prev.len().to_string(),
            found: current.len().to_string(),
        });
    }
    if v_prev.iter().chain(current).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("lif_step input"));
    }
    let mut v = Vec::with_capacity(v_prev.len());
    let mut s = Vec::with_capacity(v_prev.len());
    for (&vp, &i) in v_prev.iter().zip(current) {
        let pre = p.integrate(vp, i);
        if pre >= p.v_th {
            v.push(p.v_rest);
            s.push(1);
        } else {
            v.push(pre);
            s.push(0);
        }
    }
    Ok((v, s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(current: f64, v0: f64, steps: usize) -> (Vec<f64>, Vec<u8>) {
        let p = NeuronParams::default();
        let mut v = vec![v0];
        let mut vs = Vec::new();
        let mut ss = Vec::new();
        for _ in 0..steps {
            let (nv, s) = lif_step(&v, &[current], &p).unwrap();
            vs.push(nv[0]);
            ss.push(s[0]);
            v = nv;
        }
        (vs, ss)
    }

    #[test]
    fn unit_current_fires_every_step() {
        let p = NeuronParams::default();
        assert_eq!(p.integrate(0.0, 1.0), 0.5);
        let (v, s) = run(1.0, 0.0, 6);
        assert_eq!(s, vec![1; 6]);
        assert_eq!(v, vec![0.0; 6]);
    }

    #[test]
    fn current_point_six_fires_every_third_step() {
        let (v, s) = run(0.6, 0.0, 9);
        assert_eq!(s, vec![0, 0, 1, 0, 0, 1, 0, 0, 1]);
        assert!((v[0] - 0.3).abs() < 1e-15);
        assert!((v[1] - 0.45).abs() < 1e-15);
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn subthreshold_decay() {
        let (v, s) = run(0.0, 0.4, 20);
        assert!(s.iter().all(|&x| x == 0));
        assert!(v.windows(2).all(|w| w[1] < w[0]));
        assert!(v[19] < 1e-5);
    }

    #[test]
    fn rest_is_a_fixed_point() {
        let (v, s) = run(0.0, 0.0, 5);
        assert_eq!(v, vec![0.0; 5]);
        assert_eq!(s, vec![0; 5]);
    }

    #[test]
    fn non_finite_rejected() {
        let p = NeuronParams::default();
        assert!(lif_step(&[0.0], &[f64::NAN], &p).is_err());
        assert!(lif_step(&[0.0, 1.0], &[0.0], &p).is_err());
    }

    #[test]
    fn boxcar_window() {
        let p = NeuronParams::default();
        assert_eq!(surrogate_grad(0.5, &p), 1.0);
        assert_eq!(surrogate_grad(0.0, &p), 1.0);
        assert_eq!(surrogate_grad(1.0, &p), 1.0);
        assert_eq!(surrogate_grad(1.1, &p), 0.0);
        assert_eq!(surrogate_grad(-0.1, &p), 0.0);
    }

    #[test]
    fn boxcar_symmetry_and_width() {
        let p = NeuronParams { alpha: 4.0, ..Default::default() };
        for k in 0..200 {
            let d = k as f64 * 0.01;
            assert_eq!(p.surrogate_grad(p.v_th + d), p.surrogate_grad(p.v_th - d));
        }
        // support is exactly [v_th - 0.25, v_th + 0.25]
        assert_eq!(p.surrogate_grad(p.v_th + 0.25), 1.0);
        assert_eq!(p.surrogate_grad(p.v_th + 0.25 + 1e-12), 0.0);
        assert_eq!(p.surrogate_grad(p.v_th - 0.25), 1.0);
        assert_eq!(p.surrogate_grad(p.v_th - 0.25 - 1e-12), 0.0);
    }
}
