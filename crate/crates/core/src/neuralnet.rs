//! Dense feed-forward networks with exact reverse-mode gradients, a
//! diagonal Gaussian policy head, and Adam.
//!
//! Parameters of a network live in one flat vector, layer by layer, each
//! layer's weights (row-major, `out × in`) followed by its biases.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    /// Layer widths, input first.
    pub dims: Vec<usize>,
    pub activations: Vec<Activation>,
    pub params: Vec<f64>,
}

/// Activations retained by a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `inputs[k]` feeds layer `k`; the last entry is the network output.
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.inputs.last().expect("cache holds at least the input")
    }
}

/// Orthonormal rows (or columns, whichever is fewer) scaled by `gain`.
fn orthogonal<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let (n, m) = if rows >= cols { (rows, cols) } else { (cols, rows) };
    // m vectors of length n, Gram–Schmidt orthonormalized.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    while basis.len() < m {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    let mut w = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            // rows >= cols: basis vectors are columns; otherwise rows.
            w[r * cols + c] = gain * if rows >= cols { basis[c][r] } else { basis[r][c] };
        }
    }
    w
}

impl DenseNet {
    /// Zero-initialized network; `activations[k]` follows layer `k`.
    pub fn zeros(dims: &[usize], activations: &[Activation]) -> Result<Self> {
        if dims.len() < 2 || activations.len() != dims.len() - 1 {
            return Err(Error::contract("need at least one layer and one activation per layer"));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::contract("layer widths must be positive"));
        }
        let n: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(DenseNet { dims: dims.to_vec(), activations: activations.to_vec(), params: vec![0.0; n] })
    }

    /// ReLU hidden layers with orthogonal weights (gain √2), identity output
    /// with gain `output_gain`, zero biases.
    pub fn mlp<R: Rng + ?Sized>(dims: &[usize], output_gain: f64, rng: &mut R) -> Result<Self> {
        let mut acts = vec![Activation::Relu; dims.len().saturating_sub(2)];
        acts.push(Activation::Identity);
        let mut net = Self::zeros(dims, &acts)?;
        let mut off = 0;
        for k in 0..net.num_layers() {
            let (i, o) = (dims[k], dims[k + 1]);
            let gain = if k + 1 == net.num_layers() { output_gain } else { std::f64::consts::SQRT_2 };
            let w = orthogonal(o, i, gain, rng);
            net.params[off..off + o * i].copy_from_slice(&w);
            off += o * i + o;
        }
        Ok(net)
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("non-empty dims")
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension { expected: self.input_dim(), got: x.len() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x)?.inputs.pop().expect("output present"))
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.dims.len());
        let mut pre = Vec::with_capacity(self.num_layers());
        inputs.push(x.to_vec());
        let mut off = 0;
        for k in 0..self.num_layers() {
            let (ni, no) = (self.dims[k], self.dims[k + 1]);
            let w = &self.params[off..off + no * ni];
            let b = &self.params[off + no * ni..off + no * ni + no];
            let a = &inputs[k];
            let z: Vec<f64> =
                (0..no).map(|o| b[o] + w[o * ni..(o + 1) * ni].iter().zip(a).map(|(wi, ai)| wi * ai).sum::<f64>()).collect();
            let act = self.activations[k];
            inputs.push(z.iter().map(|&v| act.apply(v)).collect());
            pre.push(z);
            off += no * ni + no;
        }
        Ok(ForwardCache { inputs, pre })
    }

    /// Accumulates `∂(upstream·output)/∂params` into `grad` and returns the
    /// input gradient.
    pub fn backward(&self, cache: &ForwardCache, upstream: &[f64], grad: &mut [f64]) -> Result<Vec<f64>> {
        if upstream.len() != self.output_dim() {
            return Err(Error::Dimension { expected: self.output_dim(), got: upstream.len() });
        }
        if grad.len() != self.num_params() {
            return Err(Error::Dimension { expected: self.num_params(), got: grad.len() });
        }
        let mut offsets = Vec::with_capacity(self.num_layers());
        let mut off = 0;
        for k in 0..self.num_layers() {
            offsets.push(off);
            off += self.dims[k] * self.dims[k + 1] + self.dims[k + 1];
        }
        let mut delta = upstream.to_vec();
        for k in (0..self.num_layers()).rev() {
            let (ni, no) = (self.dims[k], self.dims[k + 1]);
            let act = self.activations[k];
            let dz: Vec<f64> = delta.iter().zip(&cache.pre[k]).map(|(d, &z)| d * act.derivative(z)).collect();
            let a = &cache.inputs[k];
            let off = offsets[k];
            let w = &self.params[off..off + no * ni];
            let mut da = vec![0.0; ni];
            for o in 0..no {
                let g = dz[o];
                if g == 0.0 {
                    continue;
                }
                let row = off + o * ni;
                grad[row..row + ni].iter_mut().zip(a).for_each(|(gw, ai)| *gw += g * ai);
                da.iter_mut().zip(&w[o * ni..(o + 1) * ni]).for_each(|(d, wi)| *d += g * wi);
            }
            let boff = off + no * ni;
            grad[boff..boff + no].iter_mut().zip(&dz).for_each(|(gb, d)| *gb += d);
            delta = da;
        }
        Ok(delta)
    }

    /// Parameter gradient (fresh buffer) and input gradient.
    pub fn grad(&self, x: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let cache = self.forward_cached(x)?;
        let mut g = vec![0.0; self.num_params()];
        let dx = self.backward(&cache, upstream, &mut g)?;
        Ok((g, dx))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(n: usize, lr: f64) -> Self {
        AdamState { m: vec![0.0; n], v: vec![0.0; n], t: 0, lr, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// One bias-corrected Adam descent step on `params`.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState) -> Result<()> {
    let n = params.len();
    if grads.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::Dimension { expected: n, got: grads.len().min(state.m.len()).min(state.v.len()) });
    }
    state.t += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.t as i32);
    let c2 = 1.0 - b2.powi(state.t as i32);
    for i in 0..n {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        params[i] -= state.lr * mh / (vh.sqrt() + state.epsilon);
    }
    Ok(())
}

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Diagonal Gaussian with network mean and state-independent `log_std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub net: DenseNet,
    pub log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(net: DenseNet, init_std: f64) -> Result<Self> {
        if !(init_std > 0.0) {
            return Err(Error::contract("initial std must be positive"));
        }
        let d = net.output_dim();
        Ok(GaussianPolicy { net, log_std: vec![init_std.ln(); d] })
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn mean(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.net.forward(obs)
    }

    pub fn log_prob_given_mean(&self, mean: &[f64], action: &[f64]) -> f64 {
        mean.iter()
            .zip(action)
            .zip(&self.log_std)
            .map(|((m, a), ls)| {
                let z = (a - m) / ls.exp();
                -0.5 * z * z - ls - 0.5 * LN_2PI
            })
            .sum()
    }

    pub fn log_prob(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        if action.len() != self.action_dim() {
            return Err(Error::Dimension { expected: self.action_dim(), got: action.len() });
        }
        Ok(self.log_prob_given_mean(&self.mean(obs)?, action))
    }

    /// Unclipped sample and its exact log density.
    pub fn sample<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64)> {
        let mean = self.mean(obs)?;
        let action: Vec<f64> = mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| {
                let e: f64 = rng.sample(StandardNormal);
                m + ls.exp() * e
            })
            .collect();
        let lp = self.log_prob_given_mean(&mean, &action);
        Ok((action, lp))
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|ls| 0.5 * (LN_2PI + 1.0) + ls).sum()
    }

    /// Gradients of `log π(a|s)` with respect to the mean and to `log_std`.
    pub fn log_prob_grads(&self, mean: &[f64], action: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut dm = Vec::with_capacity(mean.len());
        let mut ds = Vec::with_capacity(mean.len());
        for ((m, a), ls) in mean.iter().zip(action).zip(&self.log_std) {
            let var = (2.0 * ls).exp();
            dm.push((a - m) / var);
            ds.push((a - m) * (a - m) / var - 1.0);
        }
        (dm, ds)
    }

    /// Flat parameter view: network parameters followed by `log_std`.
    pub fn params(&self) -> Vec<f64> {
        let mut p = self.net.params.clone();
        p.extend_from_slice(&self.log_std);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        let n = self.net.num_params();
        if p.len() != n + self.log_std.len() {
            return Err(Error::Dimension { expected: n + self.log_std.len(), got: p.len() });
        }
        self.net.params.copy_from_slice(&p[..n]);
        self.log_std.copy_from_slice(&p[n..]);
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.net.num_params() + self.log_std.len()
    }
}

/// Draws from a standard normal; shared by tests and samplers.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent forward pass over explicit layer matrices.
    fn reference_forward(net: &DenseNet, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        let mut off = 0;
        for k in 0..net.dims.len() - 1 {
            let (ni, no) = (net.dims[k], net.dims[k + 1]);
            let mut out = vec![0.0; no];
            for o in 0..no {
                let mut s = net.params[off + no * ni + o];
                for i in 0..ni {
                    s += net.params[off + o * ni + i] * a[i];
                }
                out[o] = match net.activations[k] {
                    Activation::Relu => {
                        if s > 0.0 {
                            s
                        } else {
                            0.0
                        }
                    }
                    Activation::Identity => s,
                };
            }
            off += no * ni + no;
            a = out;
        }
        a
    }

    fn random_net(rng: &mut ChaCha8Rng) -> DenseNet {
        let depth = rng.random_range(1..4);
        let mut dims = vec![rng.random_range(1..7)];
        for _ in 0..depth {
            dims.push(rng.random_range(1..9));
        }
        let mut net = DenseNet::mlp(&dims, 1.0, rng).unwrap();
        // Non-zero biases so ReLU kinks move around.
        for p in net.params.iter_mut() {
            *p += 0.1 * standard_normal(rng);
        }
        net
    }

    #[test]
    fn identity_and_relu_cases() {
        let mut net = DenseNet::zeros(&[3, 3], &[Activation::Identity]).unwrap();
        for i in 0..3 {
            net.params[i * 3 + i] = 1.0;
        }
        assert_eq!(net.forward(&[1.5, -2.0, 0.25]).unwrap(), vec![1.5, -2.0, 0.25]);
        let mut relu = DenseNet::zeros(&[1, 1], &[Activation::Relu]).unwrap();
        relu.params[0] = 1.0;
        assert_eq!(relu.forward(&[-1.0]).unwrap(), vec![0.0]);
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn forward_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let net = random_net(&mut rng);
            let x: Vec<f64> = (0..net.input_dim()).map(|_| standard_normal(&mut rng)).collect();
            let a = net.forward(&x).unwrap();
            let b = reference_forward(&net, &x);
            for (u, v) in a.iter().zip(&b) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_gradient() {
        let net = DenseNet::zeros(&[3, 1], &[Activation::Identity]).unwrap();
        let (g, _) = net.grad(&[2.0, -1.0, 0.5], &[1.0]).unwrap();
        assert_eq!(g, vec![2.0, -1.0, 0.5, 1.0]);
    }

    #[test]
    fn relu_blocks_negative_preactivation() {
        let mut net = DenseNet::zeros(&[1, 1, 1], &[Activation::Relu, Activation::Identity]).unwrap();
        net.params = vec![1.0, -5.0, 1.0, 0.0];
        let (g, dx) = net.grad(&[1.0], &[1.0]).unwrap();
        assert_eq!(g[0], 0.0);
        assert_eq!(g[1], 0.0);
        assert_eq!(dx, vec![0.0]);
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = 1e-5;
        for _ in 0..100 {
            let mut net = random_net(&mut rng);
            let x: Vec<f64> = (0..net.input_dim()).map(|_| standard_normal(&mut rng)).collect();
            let up: Vec<f64> = (0..net.output_dim()).map(|_| standard_normal(&mut rng)).collect();
            let (g, dx) = net.grad(&x, &up).unwrap();
            let obj = |n: &DenseNet, x: &[f64]| n.forward(x).unwrap().iter().zip(&up).map(|(o, u)| o * u).sum::<f64>();
            for i in 0..net.num_params() {
                let p0 = net.params[i];
                net.params[i] = p0 + h;
                let fp = obj(&net, &x);
                net.params[i] = p0 - h;
                let fm = obj(&net, &x);
                net.params[i] = p0;
                let fd = (fp - fm) / (2.0 * h);
                assert!(rel_err(g[i], fd) < 1e-4, "param {i}: {} vs {fd}", g[i]);
            }
            for i in 0..x.len() {
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let fd = (obj(&net, &xp) - obj(&net, &xm)) / (2.0 * h);
                assert!(rel_err(dx[i], fd) < 1e-4);
            }
        }
    }

    #[test]
    fn orthogonal_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (r, c) in [(8, 4), (4, 8), (5, 5)] {
            let w = orthogonal(r, c, 2.0, &mut rng);
            let (small, big) = (r.min(c), r.max(c));
            // Gram matrix over the shorter side is 4·I.
            for a in 0..small {
                for b in 0..small {
                    let d: f64 = (0..big)
                        .map(|k| if r >= c { w[k * c + a] * w[k * c + b] } else { w[a * c + k] * w[b * c + k] })
                        .sum();
                    let want = if a == b { 4.0 } else { 0.0 };
                    assert!((d - want).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn adam_first_step_and_zero_grad() {
        let mut p = vec![0.5, -0.5];
        let mut s = AdamState::new(2, 1e-3);
        adam_step(&mut p, &[1.0, 1.0], &mut s).unwrap();
        assert!((p[0] - (0.5 - 1e-3)).abs() < 1e-10);
        assert!((p[1] - (-0.5 - 1e-3)).abs() < 1e-10);
        assert_eq!(s.t, 1);

        let mut q = vec![1.0, 2.0, 3.0];
        let mut s0 = AdamState::new(3, 1e-3);
        adam_step(&mut q, &[0.0; 3], &mut s0).unwrap();
        assert_eq!(q, vec![1.0, 2.0, 3.0]);
        assert!(adam_step(&mut q, &[0.0; 2], &mut s0).is_err());
    }

    #[test]
    fn adam_updates_are_independent_and_reproducible() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a0: Vec<f64> = (0..10).map(|_| standard_normal(&mut rng)).collect();
        let b0: Vec<f64> = (0..6).map(|_| standard_normal(&mut rng)).collect();
        let ga: Vec<f64> = (0..10).map(|_| standard_normal(&mut rng)).collect();
        let gb: Vec<f64> = (0..6).map(|_| standard_normal(&mut rng)).collect();
        let run = |a_first: bool| {
            let (mut a, mut b) = (a0.clone(), b0.clone());
            let (mut sa, mut sb) = (AdamState::new(10, 2e-4), AdamState::new(6, 2e-4));
            for _ in 0..3 {
                if a_first {
                    adam_step(&mut a, &ga, &mut sa).unwrap();
                    adam_step(&mut b, &gb, &mut sb).unwrap();
                } else {
                    adam_step(&mut b, &gb, &mut sb).unwrap();
                    adam_step(&mut a, &ga, &mut sa).unwrap();
                }
            }
            (a, b, sa, sb)
        };
        assert_eq!(run(true), run(false));
    }

    #[test]
    fn policy_density_and_entropy() {
        let net = DenseNet::zeros(&[2, 3], &[Activation::Identity]).unwrap();
        let p = GaussianPolicy::new(net, 1.0).unwrap();
        let lp = p.log_prob(&[0.3, -0.2], &[0.0, 0.0, 0.0]).unwrap();
        assert!((lp - 3.0 * -0.918_938_533_204_672_7).abs() < 1e-12);
        assert!((lp / 3.0 + 0.9189).abs() < 1e-4);

        let one = GaussianPolicy::new(DenseNet::zeros(&[1, 1], &[Activation::Identity]).unwrap(), 1.0).unwrap();
        assert!((one.entropy() - 1.4189).abs() < 1e-4);
        let two = GaussianPolicy::new(DenseNet::zeros(&[1, 1], &[Activation::Identity]).unwrap(), 2.0).unwrap();
        assert!((two.entropy() - one.entropy() - 2f64.ln()).abs() < 1e-12);
        let mut shifted = one.clone();
        shifted.net.params[1] = 5.0;
        assert_eq!(shifted.entropy(), one.entropy());
    }

    #[test]
    fn degenerate_and_reproducible_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = DenseNet::mlp(&[4, 8, 2], 0.5, &mut rng).unwrap();
        let mut p = GaussianPolicy::new(net, 1.0).unwrap();
        let obs = [0.1, 0.2, -0.3, 0.4];
        p.log_std = vec![-20.0; 2];
        let mean = p.mean(&obs).unwrap();
        let (a, _) = p.sample(&obs, &mut rng).unwrap();
        for (x, m) in a.iter().zip(&mean) {
            assert!((x - m).abs() < 1e-7);
        }
        p.log_std = vec![0.0; 2];
        let s1 = p.sample(&obs, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let s2 = p.sample(&obs, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(s1, s2);
        assert!((s1.1 - p.log_prob(&obs, &s1.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn log_prob_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = DenseNet::zeros(&[1, 3], &[Activation::Identity]).unwrap();
        let mut p = GaussianPolicy::new(net, 0.7).unwrap();
        p.log_std = vec![-0.3, 0.1, 0.4];
        let mean = vec![0.2, -0.4, 1.0];
        let a: Vec<f64> = (0..3).map(|_| standard_normal(&mut rng)).collect();
        let (dm, ds) = p.log_prob_grads(&mean, &a);
        let h = 1e-6;
        for i in 0..3 {
            let mut mp = mean.clone();
            mp[i] += h;
            let mut mm = mean.clone();
            mm[i] -= h;
            let fd = (p.log_prob_given_mean(&mp, &a) - p.log_prob_given_mean(&mm, &a)) / (2.0 * h);
            assert!(rel_err(dm[i], fd) < 1e-6);
            let mut q = p.clone();
            q.log_std[i] += h;
            let up = q.log_prob_given_mean(&mean, &a);
            q.log_std[i] -= 2.0 * h;
            let dn = q.log_prob_given_mean(&mean, &a);
            assert!(rel_err(ds[i], (up - dn) / (2.0 * h)) < 1e-6);
        }
    }

    #[test]
    fn batch_order_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = DenseNet::mlp(&[3, 16, 16, 2], 1.0, &mut rng).unwrap();
        let xs: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| standard_normal(&mut rng)).collect()).collect();
        let fwd: Vec<Vec<f64>> = xs.iter().map(|x| net.forward(x).unwrap()).collect();
        let rev: Vec<Vec<f64>> = xs.iter().rev().map(|x| net.forward(x).unwrap()).collect();
        for (a, b) in fwd.iter().zip(rev.iter().rev()) {
            assert_eq!(a, b);
        }
    }
}
