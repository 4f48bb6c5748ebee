//! Feedforward networks with exact reverse-mode gradients, Adam and gradient clipping.
//!
//! Parameters live in one flat vector per network: for each layer the weight matrix
//! (row-major, `out × in`) followed by the bias vector. Optimisers and
//! finite-difference checks work on that view directly.

use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("input has length {got}, network expects {expected}")]
    InputDim { expected: usize, got: usize },
    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("a network needs at least an input and an output layer")]
    TooFewLayers,
    #[error("checkpoint line {line}: {msg}")]
    Checkpoint { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Self::Identity => x,
            Self::Relu => x.max(0.0),
            Self::Tanh => x.tanh(),
        }
    }

    /// Derivative given the pre-activation `x` and the output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Self::Identity => 1.0,
            Self::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Tanh => 1.0 - y * y,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Relu => "relu",
            Self::Tanh => "tanh",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "identity" => Some(Self::Identity),
            "relu" => Some(Self::Relu),
            "tanh" => Some(Self::Tanh),
            _ => None,
        }
    }
}

/// Multilayer perceptron: rectified-linear hidden layers and a configurable output activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    output: Activation,
    params: Vec<f64>,
}

/// Forward-pass record needed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct Tape {
    /// Input of every layer, plus the final output as the last entry.
    activations: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("non-empty tape")
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

impl Mlp {
    /// Uniform `[-1/√fan_in, 1/√fan_in]` initialisation for weights and biases.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need input and output layers");
        let mut params = Vec::with_capacity(param_count(sizes));
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..(w[0] + 1) * w[1] {
                params.push(rng.random_range(-bound..=bound));
            }
        }
        Self {
            sizes: sizes.to_vec(),
            output,
            params,
        }
    }

    pub fn from_params(
        sizes: &[usize],
        output: Activation,
        params: Vec<f64>,
    ) -> Result<Self, NeuralError> {
        if sizes.len() < 2 {
            return Err(NeuralError::TooFewLayers);
        }
        let expected = param_count(sizes);
        if params.len() != expected {
            return Err(NeuralError::ParamCount {
                expected,
                got: params.len(),
            });
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            output,
            params,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("sizes")
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) {
        self.params.copy_from_slice(params);
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 2 == self.sizes.len() {
            self.output
        } else {
            Activation::Relu
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<(), NeuralError> {
        if x.len() != self.sizes[0] {
            return Err(NeuralError::InputDim {
                expected: self.sizes[0],
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NeuralError> {
        self.check_input(x)?;
        let mut cur = x.to_vec();
        let mut offset = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + (n_in + 1) * n_out];
            let act = self.activation(l);
            cur = (0..n_out)
                .map(|o| {
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    act.apply(bias[o] + dot(row, &cur))
                })
                .collect();
            offset += (n_in + 1) * n_out;
        }
        Ok(cur)
    }

    pub fn forward_tape(&self, x: &[f64]) -> Result<Tape, NeuralError> {
        self.check_input(x)?;
        let n_layers = self.sizes.len() - 1;
        let mut activations = Vec::with_capacity(n_layers + 1);
        let mut pre = Vec::with_capacity(n_layers);
        activations.push(x.to_vec());
        let mut offset = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_in * n_out];
            let bias = &self.params[offset + n_in * n_out..offset + (n_in + 1) * n_out];
            let input = &activations[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| bias[o] + dot(&weights[o * n_in..(o + 1) * n_in], input))
                .collect();
            let act = self.activation(l);
            activations.push(z.iter().map(|v| act.apply(*v)).collect());
            pre.push(z);
            offset += (n_in + 1) * n_out;
        }
        Ok(Tape { activations, pre })
    }

    /// Accumulates `∂(upstream·y)/∂θ` into `grad` and returns `∂(upstream·y)/∂x`.
    pub fn backward(&self, tape: &Tape, upstream: &[f64], grad: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(grad.len(), self.params.len());
        debug_assert_eq!(upstream.len(), self.output_dim());
        let n_layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut acc = 0;
        for w in self.sizes.windows(2) {
            offsets.push(acc);
            acc += (w[0] + 1) * w[1];
        }
        let mut delta = upstream.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let act = self.activation(l);
            let z = &tape.pre[l];
            let y = &tape.activations[l + 1];
            for o in 0..n_out {
                delta[o] *= act.derivative(z[o], y[o]);
            }
            let off = offsets[l];
            let input = &tape.activations[l];
            let (gw, rest) = grad[off..off + (n_in + 1) * n_out].split_at_mut(n_in * n_out);
            let weights = &self.params[off..off + n_in * n_out];
            let mut next = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                rest[o] += d;
                let grow = &mut gw[o * n_in..(o + 1) * n_in];
                for (g, x) in grow.iter_mut().zip(input) {
                    *g += d * x;
                }
                let wrow = &weights[o * n_in..(o + 1) * n_in];
                for (nx, w) in next.iter_mut().zip(wrow) {
                    *nx += d * w;
                }
            }
            delta = next;
        }
        delta
    }

    /// Parameter gradient of `upstream · forward(x)`.
    pub fn param_gradient(&self, x: &[f64], upstream: &[f64]) -> Result<Vec<f64>, NeuralError> {
        let tape = self.forward_tape(x)?;
        let mut grad = vec![0.0; self.params.len()];
        self.backward(&tape, upstream, &mut grad);
        Ok(grad)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Rescales `grads` to global norm `max_norm` if larger; returns the norm before clipping.
pub fn clip_grad_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = l2_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// Bias-corrected Adam step, with optional global-norm clipping applied first.
    /// Returns the gradient norm before clipping.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], clip_norm: Option<f64>) -> f64 {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        let norm = l2_norm(grads);
        let scale = match clip_norm {
            Some(c) if norm > c && norm > 0.0 => c / norm,
            _ => 1.0,
        };
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i] * scale;
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        norm
    }
}

/// Central finite-difference gradient of `f` at `params` with step `h`.
pub fn central_difference<F>(mut f: F, params: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let plus = f(&p);
            p[i] = orig - h;
            let minus = f(&p);
            p[i] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Largest entrywise relative error `|a-b| / max(|a|, |b|, floor)`.
pub fn max_relative_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Worst relative error between `analytic` and central differences of `f`.
///
/// Each entry is compared at step `h`; an entry that disagrees is re-measured at
/// `h/100`, so that a perturbation straddling a rectifier kink is not mistaken for a
/// wrong gradient.
pub fn gradient_check<F>(mut f: F, params: &[f64], analytic: &[f64], h: f64) -> f64
where
    F: FnMut(&[f64]) -> f64,
{
    let mut p = params.to_vec();
    let mut diff = |p: &mut Vec<f64>, i: usize, h: f64| {
        let orig = p[i];
        p[i] = orig + h;
        let plus = f(p);
        p[i] = orig - h;
        let minus = f(p);
        p[i] = orig;
        (plus - minus) / (2.0 * h)
    };
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
    let mut worst = 0.0f64;
    for i in 0..p.len() {
        let mut e = rel(analytic[i], diff(&mut p, i, h));
        if e >= 1e-4 {
            e = e.min(rel(analytic[i], diff(&mut p, i, h / 100.0)));
        }
        worst = worst.max(e);
    }
    worst
}

/// Text checkpoint of named networks.
///
/// Each block is a header `# mlp name=<name> sizes=<a,b,..> output=<act>` followed by
/// one parameter per line in `{:.16e}` form (17 significant digits, bit-exact).
pub fn write_checkpoint(nets: &[(&str, &Mlp)]) -> String {
    let mut out = String::new();
    for (name, net) in nets {
        let sizes: Vec<String> = net.sizes.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(
            out,
            "# mlp name={} sizes={} output={}",
            name,
            sizes.join(","),
            net.output.name()
        );
        for p in &net.params {
            let _ = writeln!(out, "{p:.16e}");
        }
    }
    out
}

pub fn read_checkpoint(text: &str) -> Result<Vec<(String, Mlp)>, NeuralError> {
    let err = |line: usize, msg: String| NeuralError::Checkpoint { line, msg };
    let mut nets = Vec::new();
    let mut current: Option<(String, Vec<usize>, Activation, Vec<f64>, usize)> = None;
    let finish = |c: Option<(String, Vec<usize>, Activation, Vec<f64>, usize)>,
                  nets: &mut Vec<(String, Mlp)>|
     -> Result<(), NeuralError> {
        if let Some((name, sizes, act, params, line)) = c {
            let mlp =
                Mlp::from_params(&sizes, act, params).map_err(|e| err(line, e.to_string()))?;
            nets.push((name, mlp));
        }
        Ok(())
    };
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        if let Some(h) = raw.strip_prefix("# mlp") {
            finish(current.take(), &mut nets)?;
            let (mut name, mut sizes, mut act) = (None, None, None);
            for tok in h.split_whitespace() {
                match tok.split_once('=') {
                    Some(("name", v)) => name = Some(v.to_string()),
                    Some(("sizes", v)) => {
                        sizes = Some(
                            v.split(',')
                                .map(|x| x.parse::<usize>())
                                .collect::<Result<Vec<_>, _>>()
                                .map_err(|e| err(line, format!("sizes: {e}")))?,
                        )
                    }
                    Some(("output", v)) => {
                        act = Some(
                            Activation::parse(v)
                                .ok_or_else(|| err(line, format!("unknown activation '{v}'")))?,
                        )
                    }
                    _ => return Err(err(line, format!("unexpected header token '{tok}'"))),
                }
            }
            current = Some((
                name.ok_or_else(|| err(line, "missing name".into()))?,
                sizes.ok_or_else(|| err(line, "missing sizes".into()))?,
                act.ok_or_else(|| err(line, "missing output".into()))?,
                Vec::new(),
                line,
            ));
        } else {
            let value: f64 = raw
                .parse()
                .map_err(|e| err(line, format!("'{raw}': {e}")))?;
            match current.as_mut() {
                Some(c) => c.3.push(value),
                None => return Err(err(line, "parameter before any header".into())),
            }
        }
    }
    finish(current, &mut nets)?;
    Ok(nets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    #[test]
    fn forward_examples() {
        let zero = Mlp::from_params(
            &[3, 4, 2],
            Activation::Identity,
            vec![0.0; param_count(&[3, 4, 2])],
        )
        .unwrap();
        assert_eq!(zero.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);

        let affine = Mlp::from_params(&[1, 1], Activation::Identity, vec![2.0, 1.0]).unwrap();
        assert_eq!(affine.forward(&[3.0]).unwrap(), vec![7.0]);

        let relu = Mlp::from_params(
            &[2, 2],
            Activation::Relu,
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(relu.forward(&[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);

        assert!(matches!(
            affine.forward(&[1.0, 2.0]),
            Err(NeuralError::InputDim {
                expected: 1,
                got: 2
            })
        ));
        assert!(Mlp::from_params(&[2, 2], Activation::Relu, vec![0.0; 5]).is_err());
    }

    #[test]
    fn parameter_count_formula() {
        let mut rng = rng_from_seed(0);
        let net = Mlp::new(&[4, 100, 100, 1], Activation::Identity, &mut rng);
        assert_eq!(net.n_params(), 5 * 100 + 101 * 100 + 101);
    }

    #[test]
    fn backward_examples() {
        let linear = Mlp::from_params(&[1, 1], Activation::Identity, vec![0.5, 0.0]).unwrap();
        let g = linear.param_gradient(&[3.0], &[1.0]).unwrap();
        assert_eq!(g[0], 3.0);
        assert_eq!(g[1], 1.0);

        // Hidden unit 0 is dead (negative pre-activation): its incoming weights get no gradient.
        let net = Mlp::from_params(
            &[1, 2, 1],
            Activation::Identity,
            vec![-1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0],
        )
        .unwrap();
        let g = net.param_gradient(&[2.0], &[1.0]).unwrap();
        assert_eq!(g[0], 0.0);
        assert_eq!(g[2], 0.0);
        assert_eq!(
            g[4], 0.0,
            "zero-activation unit gives zero outgoing-weight gradient"
        );
        assert_eq!(g[1], 2.0);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(42);
        let net = Mlp::new(&[3, 8, 5, 2], Activation::Tanh, &mut rng);
        let x = [0.3, -0.7, 1.1];
        let up = [0.9, -1.3];
        let g = net.param_gradient(&x, &up).unwrap();
        let fd = central_difference(
            |p| {
                let n = Mlp::from_params(net.sizes(), net.output_activation(), p.to_vec()).unwrap();
                let y = n.forward(&x).unwrap();
                y[0] * up[0] + y[1] * up[1]
            },
            net.params(),
            1e-5,
        );
        assert!(max_relative_error(&g, &fd, 1e-6) < 1e-4);
    }

    #[test]
    fn adam_examples() {
        let mut adam = AdamState::new(2, 0.1);
        let mut p = vec![1.0, -2.0];
        adam.step(&mut p, &[0.0, 0.0], None);
        assert_eq!(p, vec![1.0, -2.0]);

        let mut adam = AdamState::new(1, 0.1);
        let mut w = vec![0.0];
        adam.step(&mut w, &[1.0], None);
        let m1 = adam.m[0];
        adam.step(&mut w, &[0.0], None);
        assert!((adam.m[0] - 0.9 * m1).abs() < 1e-15, "moments decay");

        let mut g = vec![12.0, 16.0];
        let before = clip_grad_norm(&mut g, 10.0);
        assert_eq!(before, 20.0);
        assert!((l2_norm(&g) - 10.0).abs() < 1e-12);

        let mut adam = AdamState::new(1, 0.1);
        let mut w = vec![0.0];
        for _ in 0..200 {
            let grad = 2.0 * (w[0] - 3.0);
            adam.step(&mut w, &[grad], None);
        }
        assert!((w[0] - 3.0).abs() < 0.05, "w = {}", w[0]);
    }

    #[test]
    fn adam_clips_before_update() {
        // With clipping at 10 a gradient of norm 20 behaves like its half.
        let mut a = AdamState::new(2, 0.01);
        let mut b = AdamState::new(2, 0.01);
        let (mut pa, mut pb) = (vec![0.0; 2], vec![0.0; 2]);
        a.step(&mut pa, &[12.0, 16.0], Some(10.0));
        b.step(&mut pb, &[6.0, 8.0], None);
        assert_eq!(pa, pb);
        assert_eq!(a.m, b.m);
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut rng = rng_from_seed(7);
        let a = Mlp::new(&[2, 5, 1], Activation::Identity, &mut rng);
        let b = Mlp::new(&[1, 3, 2], Activation::Tanh, &mut rng);
        let text = write_checkpoint(&[("r", &a), ("phi", &b)]);
        let back = read_checkpoint(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[0].0, "r");
        assert_eq!(back[0].1, a);
        assert_eq!(back[1].1, b);
        assert!(read_checkpoint("1.0\n").is_err());
        assert!(read_checkpoint("# mlp name=x sizes=1,1 output=relu\n1.0\n").is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn random_shapes_pass_gradient_check(
            seed in any::<u64>(),
            depth in 1usize..=3,
            widths in proptest::collection::vec(1usize..=16, 4),
            tanh_out in any::<bool>(),
        ) {
            let mut rng = rng_from_seed(seed);
            let mut sizes = vec![widths[0]];
            sizes.extend(widths[1..=depth].iter().copied());
            let act = if tanh_out { Activation::Tanh } else { Activation::Identity };
            let net = Mlp::new(&sizes, act, &mut rng);
            let x: Vec<f64> = (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
            let up: Vec<f64> = (0..net.output_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = net.param_gradient(&x, &up).unwrap();
            let fd = central_difference(|p| {
                let n = Mlp::from_params(&sizes, act, p.to_vec()).unwrap();
                n.forward(&x).unwrap().iter().zip(&up).map(|(y, u)| y * u).sum()
            }, net.params(), 1e-5);
            // A parameter whose perturbation crosses a rectifier kink is not differentiable there.
            let kink = |i: usize| {
                let mut p = net.params().to_vec();
                p[i] += 1e-5;
                let up_tape = Mlp::from_params(&sizes, act, p.clone()).unwrap().forward_tape(&x).unwrap();
                p[i] -= 2e-5;
                let dn_tape = Mlp::from_params(&sizes, act, p).unwrap().forward_tape(&x).unwrap();
                up_tape.pre.iter().zip(&dn_tape.pre).any(|(a, b)| a.iter().zip(b).any(|(u, d)| u.signum() != d.signum()))
            };
            for i in 0..g.len() {
                let rel = (g[i] - fd[i]).abs() / g[i].abs().max(fd[i].abs()).max(1e-6);
                prop_assert!(rel < 1e-4 || kink(i), "param {} analytic {} fd {}", i, g[i], fd[i]);
            }
        }

        #[test]
        fn clipping_never_increases_norm(v in proptest::collection::vec(-100.0f64..100.0, 1..20), c in 0.1f64..50.0) {
            let mut g = v.clone();
            let before = clip_grad_norm(&mut g, c);
            prop_assert!(l2_norm(&g) <= before + 1e-12);
            prop_assert!(l2_norm(&g) <= c.max(before) + 1e-9);
        }
    }

    #[test]
    fn seeded_init_is_deterministic() {
        let a = Mlp::new(&[3, 16, 1], Activation::Identity, &mut rng_from_seed(5));
        let b = Mlp::new(&[3, 16, 1], Activation::Identity, &mut rng_from_seed(5));
        assert_eq!(a, b);
        let bound = 1.0 / 3f64.sqrt();
        assert!(a.params()[..48].iter().all(|p| p.abs() <= bound));
    }
}
