//! Scoring network: dense layers, the factorized tensor layer, and their
//! hand-derived backward passes.
//!
//! The plain model is `input → tanh dense → linear output`. The tensor model
//! replaces the hidden layer with a factorized tensor layer
//!
//! ```text
//! h_i = tanh( (eᵀ P[i]) · (Q[i] e) + (W e + b)_i )
//! ```
//!
//! where each slice `P[i] Q[i]` is an `h1 × h1` bilinear form of rank `r`
//! that is never materialized. An optional extra tanh dense layer may sit
//! between the tensor layer and the output.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

/// `y = g(W x + b)` with `W` stored row-major as `outputs × inputs`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

fn glorot<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-limit..=limit)).collect()
}

impl DenseLayer {
    pub fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        DenseLayer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            activation,
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn random<R: Rng>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        DenseLayer {
            weights: glorot(rng, inputs, outputs, inputs * outputs),
            ..DenseLayer::zeros(inputs, outputs, activation)
        }
    }

    fn check(&self) -> Result<()> {
        if self.weights.len() != self.inputs * self.outputs || self.bias.len() != self.outputs {
            return Err(Error::Shape(format!(
                "dense layer {}×{} has {} weights and {} biases",
                self.outputs,
                self.inputs,
                self.weights.len(),
                self.bias.len()
            )));
        }
        Ok(())
    }

    /// `W x + b` without the activation.
    pub fn affine(&self, x: &[f64], out: &mut Vec<f64>) -> Result<()> {
        if x.len() != self.inputs {
            return Err(Error::Shape(format!(
                "layer expects {} inputs, got {}",
                self.inputs,
                x.len()
            )));
        }
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.bias).map(|(row, b)| {
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.outputs);
        self.affine(x, &mut out)?;
        for v in &mut out {
            *v = self.activation.apply(*v);
        }
        Ok(out)
    }

    /// Backward through `y = g(W x + b)` given `dy`; accumulates into `grads`
    /// and adds the gradient w.r.t. `x` into `dx`.
    fn backward(&self, x: &[f64], y: &[f64], dy: &[f64], grads: &mut DenseLayer, dx: &mut [f64]) {
        for o in 0..self.outputs {
            let dz = dy[o] * self.activation.derivative_from_output(y[o]);
            if dz == 0.0 {
                continue;
            }
            grads.bias[o] += dz;
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let grow = &mut grads.weights[o * self.inputs..(o + 1) * self.inputs];
            for ((g, w), (xi, dxi)) in grow.iter_mut().zip(row).zip(x.iter().zip(dx.iter_mut())) {
                *g += dz * xi;
                *dxi += dz * w;
            }
        }
    }
}

/// Tensor layer with each `h1 × h1` slice factorized as `P[i] Q[i]`.
///
/// `p` holds the `h2` matrices `P[i]` (`h1 × r`, row-major) back to back;
/// `q` holds the `h2` matrices `Q[i]` (`r × h1`, row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct FactorizedTensorLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub factors: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub linear: DenseLayer,
}

impl FactorizedTensorLayer {
    pub fn zeros(inputs: usize, outputs: usize, factors: usize) -> Self {
        FactorizedTensorLayer {
            inputs,
            outputs,
            factors,
            p: vec![0.0; outputs * inputs * factors],
            q: vec![0.0; outputs * factors * inputs],
            linear: DenseLayer::zeros(inputs, outputs, Activation::Tanh),
        }
    }

    pub fn random<R: Rng>(inputs: usize, outputs: usize, factors: usize, rng: &mut R) -> Self {
        let n = outputs * inputs * factors;
        FactorizedTensorLayer {
            inputs,
            outputs,
            factors,
            p: glorot(rng, inputs, factors, n),
            q: glorot(rng, inputs, factors, n),
            linear: DenseLayer::random(inputs, outputs, Activation::Tanh, rng),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.p.len() + self.q.len() + self.linear.weights.len() + self.linear.bias.len()
    }

    pub fn slice_p(&self, i: usize) -> &[f64] {
        let n = self.inputs * self.factors;
        &self.p[i * n..(i + 1) * n]
    }

    pub fn slice_q(&self, i: usize) -> &[f64] {
        let n = self.inputs * self.factors;
        &self.q[i * n..(i + 1) * n]
    }

    fn check(&self) -> Result<()> {
        let n = self.outputs * self.inputs * self.factors;
        if self.factors == 0 || self.p.len() != n || self.q.len() != n {
            return Err(Error::Shape("tensor factor shapes are inconsistent".into()));
        }
        if self.linear.inputs != self.inputs || self.linear.outputs != self.outputs {
            return Err(Error::Shape("tensor linear term has the wrong shape".into()));
        }
        self.linear.check()
    }

    /// Forward pass; `u` and `v` receive `Pᵀe` and `Q e` for every slice.
    fn forward_cached(&self, e: &[f64], u: &mut Vec<f64>, v: &mut Vec<f64>) -> Result<Vec<f64>> {
        let (h1, r) = (self.inputs, self.factors);
        let mut z = Vec::with_capacity(self.outputs);
        self.linear.affine(e, &mut z)?;
        u.clear();
        v.clear();
        u.resize(self.outputs * r, 0.0);
        v.resize(self.outputs * r, 0.0);
        for i in 0..self.outputs {
            let p = self.slice_p(i);
            let q = self.slice_q(i);
            let ui = &mut u[i * r..(i + 1) * r];
            for (a, &ea) in e.iter().enumerate() {
                if ea != 0.0 {
                    for (k, uk) in ui.iter_mut().enumerate() {
                        *uk += ea * p[a * r + k];
                    }
                }
            }
            let vi = &mut v[i * r..(i + 1) * r];
            for (k, vk) in vi.iter_mut().enumerate() {
                *vk = q[k * h1..(k + 1) * h1].iter().zip(e).map(|(qa, ea)| qa * ea).sum();
            }
            let quadratic: f64 = ui.iter().zip(vi.iter()).map(|(a, b)| a * b).sum();
            z[i] = (quadratic + z[i]).tanh();
        }
        Ok(z)
    }

    pub fn forward(&self, e: &[f64]) -> Result<Vec<f64>> {
        self.check()?;
        self.forward_cached(e, &mut Vec::new(), &mut Vec::new())
    }

    fn backward(
        &self,
        e: &[f64],
        u: &[f64],
        v: &[f64],
        h: &[f64],
        dh: &[f64],
        grads: &mut FactorizedTensorLayer,
        de: &mut [f64],
    ) {
        let (h1, r) = (self.inputs, self.factors);
        for i in 0..self.outputs {
            let dz = dh[i] * (1.0 - h[i] * h[i]);
            if dz == 0.0 {
                continue;
            }
            let ui = &u[i * r..(i + 1) * r];
            let vi = &v[i * r..(i + 1) * r];
            let p = self.slice_p(i);
            let q = self.slice_q(i);
            let n = h1 * r;
            let gp = &mut grads.p[i * n..(i + 1) * n];
            // d/dP[a][k] = e_a v_k ; d/de_a += Σ_k P[a][k] v_k
            for a in 0..h1 {
                let mut acc = 0.0;
                for k in 0..r {
                    gp[a * r + k] += dz * e[a] * vi[k];
                    acc += p[a * r + k] * vi[k];
                }
                de[a] += dz * acc;
            }
            // d/dQ[k][a] = u_k e_a ; d/de_a += Σ_k Q[k][a] u_k
            let gq = &mut grads.q[i * n..(i + 1) * n];
            for k in 0..r {
                let s = dz * ui[k];
                for a in 0..h1 {
                    gq[k * h1 + a] += s * e[a];
                    de[a] += s * q[k * h1 + a];
                }
            }
            grads.linear.bias[i] += dz;
            let row = &self.linear.weights[i * h1..(i + 1) * h1];
            let grow = &mut grads.linear.weights[i * h1..(i + 1) * h1];
            for a in 0..h1 {
                grow[a] += dz * e[a];
                de[a] += dz * row[a];
            }
        }
    }
}

/// Plain forward: `output(tanh(hidden(input)))`.
pub fn forward_plain(input: &[f64], hidden: &DenseLayer, output: &DenseLayer) -> Result<Vec<f64>> {
    if output.activation != Activation::Identity {
        return Err(Error::Shape("output layer must be linear".into()));
    }
    hidden.check()?;
    output.check()?;
    output.forward(&hidden.forward(input)?)
}

/// Factorized tensor layer forward.
pub fn forward_tensor(input: &[f64], layer: &FactorizedTensorLayer) -> Result<Vec<f64>> {
    layer.forward(input)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Architecture {
    Plain,
    Tensor,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetworkConfig {
    pub architecture: Architecture,
    pub hidden_size: usize,
    pub tensor_size: usize,
    pub factors: usize,
    /// Extra tanh dense layer of this size after the tensor layer.
    pub extra_hidden: Option<usize>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            architecture: Architecture::Plain,
            hidden_size: 300,
            tensor_size: 50,
            factors: 3,
            extra_hidden: None,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = match self.architecture {
            Architecture::Plain => self.hidden_size >= 1,
            Architecture::Tensor => {
                self.tensor_size >= 1 && self.factors >= 1 && self.extra_hidden != Some(0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid network configuration {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Network {
    Plain {
        hidden: DenseLayer,
        output: DenseLayer,
    },
    Tensor {
        tensor: FactorizedTensorLayer,
        extra: Option<DenseLayer>,
        output: DenseLayer,
    },
}

/// Activations cached by a forward pass for the matching backward pass.
#[derive(Clone, Debug, Default)]
pub struct Trace {
    input: Vec<f64>,
    first: Vec<f64>,
    u: Vec<f64>,
    v: Vec<f64>,
    extra: Vec<f64>,
    scores: Vec<f64>,
}

impl Trace {
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }
}

impl Network {
    pub fn random<R: Rng>(config: &NetworkConfig, inputs: usize, tags: usize, rng: &mut R) -> Result<Self> {
        config.validate()?;
        Ok(match config.architecture {
            Architecture::Plain => {
                let hidden = DenseLayer::random(inputs, config.hidden_size, Activation::Tanh, rng);
                let output = DenseLayer::random(config.hidden_size, tags, Activation::Identity, rng);
                Network::Plain { hidden, output }
            }
            Architecture::Tensor => {
                let tensor = FactorizedTensorLayer::random(inputs, config.tensor_size, config.factors, rng);
                let extra = config
                    .extra_hidden
                    .map(|n| DenseLayer::random(config.tensor_size, n, Activation::Tanh, rng));
                let last = config.extra_hidden.unwrap_or(config.tensor_size);
                let output = DenseLayer::random(last, tags, Activation::Identity, rng);
                Network::Tensor {
                    tensor,
                    extra,
                    output,
                }
            }
        })
    }

    /// A network of the same shape with every parameter zero; used as the
    /// gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, p) in z.params_mut() {
            p.fill(0.0);
        }
        z
    }

    pub fn input_len(&self) -> usize {
        match self {
            Network::Plain { hidden, .. } => hidden.inputs,
            Network::Tensor { tensor, .. } => tensor.inputs,
        }
    }

    pub fn output_len(&self) -> usize {
        match self {
            Network::Plain { output, .. } | Network::Tensor { output, .. } => output.outputs,
        }
    }

    pub fn check(&self) -> Result<()> {
        match self {
            Network::Plain { hidden, output } => {
                hidden.check()?;
                output.check()?;
                if output.inputs != hidden.outputs {
                    return Err(Error::Shape("hidden and output layers do not chain".into()));
                }
            }
            Network::Tensor {
                tensor,
                extra,
                output,
            } => {
                tensor.check()?;
                output.check()?;
                let last = match extra {
                    Some(e) => {
                        e.check()?;
                        if e.inputs != tensor.outputs {
                            return Err(Error::Shape("tensor and extra layers do not chain".into()));
                        }
                        e.outputs
                    }
                    None => tensor.outputs,
                };
                if output.inputs != last {
                    return Err(Error::Shape("output layer does not chain".into()));
                }
            }
        }
        Ok(())
    }

    /// Named parameter tensors in a fixed order.
    pub fn params(&self) -> Vec<(&'static str, &[f64])> {
        match self {
            Network::Plain { hidden, output } => vec![
                ("hidden.w", &hidden.weights[..]),
                ("hidden.b", &hidden.bias[..]),
                ("output.w", &output.weights[..]),
                ("output.b", &output.bias[..]),
            ],
            Network::Tensor {
                tensor,
                extra,
                output,
            } => {
                let mut v = vec![
                    ("tensor.p", &tensor.p[..]),
                    ("tensor.q", &tensor.q[..]),
                    ("tensor.w", &tensor.linear.weights[..]),
                    ("tensor.b", &tensor.linear.bias[..]),
                ];
                if let Some(e) = extra {
                    v.push(("extra.w", &e.weights[..]));
                    v.push(("extra.b", &e.bias[..]));
                }
                v.push(("output.w", &output.weights[..]));
                v.push(("output.b", &output.bias[..]));
                v
            }
        }
    }

    pub fn params_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        match self {
            Network::Plain { hidden, output } => vec![
                ("hidden.w", &mut hidden.weights[..]),
                ("hidden.b", &mut hidden.bias[..]),
                ("output.w", &mut output.weights[..]),
                ("output.b", &mut output.bias[..]),
            ],
            Network::Tensor {
                tensor,
                extra,
                output,
            } => {
                let mut v: Vec<(&'static str, &mut [f64])> = vec![
                    ("tensor.p", &mut tensor.p[..]),
                    ("tensor.q", &mut tensor.q[..]),
                    ("tensor.w", &mut tensor.linear.weights[..]),
                    ("tensor.b", &mut tensor.linear.bias[..]),
                ];
                if let Some(e) = extra {
                    v.push(("extra.w", &mut e.weights[..]));
                    v.push(("extra.b", &mut e.bias[..]));
                }
                v.push(("output.w", &mut output.weights[..]));
                v.push(("output.b", &mut output.bias[..]));
                v
            }
        }
    }

    /// Scores for every tag, with the activations needed by [`Network::backward`].
    pub fn forward_traced(&self, input: &[f64], trace: &mut Trace) -> Result<()> {
        if input.len() != self.input_len() {
            return Err(Error::Shape(format!(
                "network expects {} inputs, got {}",
                self.input_len(),
                input.len()
            )));
        }
        trace.input.clear();
        trace.input.extend_from_slice(input);
        match self {
            Network::Plain { hidden, output } => {
                trace.first = hidden.forward(input)?;
                trace.scores = output.forward(&trace.first)?;
            }
            Network::Tensor {
                tensor,
                extra,
                output,
            } => {
                trace.first = tensor.forward_cached(input, &mut trace.u, &mut trace.v)?;
                let last = match extra {
                    Some(e) => {
                        trace.extra = e.forward(&trace.first)?;
                        &trace.extra
                    }
                    None => &trace.first,
                };
                trace.scores = output.forward(last)?;
            }
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut trace = Trace::default();
        self.forward_traced(input, &mut trace)?;
        Ok(trace.scores)
    }

    /// Backpropagates `upstream` (∂loss/∂scores) through the pass recorded in
    /// `trace`. Parameter gradients are added to `grads` (shaped like `self`);
    /// the gradient w.r.t. the input is returned.
    pub fn backward(&self, trace: &Trace, upstream: &[f64], grads: &mut Network) -> Result<Vec<f64>> {
        if trace.scores.len() != self.output_len() || trace.input.len() != self.input_len() {
            return Err(Error::Shape(
                "backward needs a forward trace from this network".into(),
            ));
        }
        if upstream.len() != self.output_len() {
            return Err(Error::Shape(format!(
                "upstream gradient has length {}, expected {}",
                upstream.len(),
                self.output_len()
            )));
        }
        let mut d_input = vec![0.0; self.input_len()];
        match (self, grads) {
            (Network::Plain { hidden, output }, Network::Plain { hidden: gh, output: go }) => {
                let mut d_first = vec![0.0; hidden.outputs];
                output.backward(&trace.first, &trace.scores, upstream, go, &mut d_first);
                hidden.backward(&trace.input, &trace.first, &d_first, gh, &mut d_input);
            }
            (
                Network::Tensor {
                    tensor,
                    extra,
                    output,
                },
                Network::Tensor {
                    tensor: gt,
                    extra: ge,
                    output: go,
                },
            ) => {
                let mut d_first = vec![0.0; tensor.outputs];
                match (extra, ge) {
                    (Some(e), Some(ge)) => {
                        let mut d_extra = vec![0.0; e.outputs];
                        output.backward(&trace.extra, &trace.scores, upstream, go, &mut d_extra);
                        e.backward(&trace.first, &trace.extra, &d_extra, ge, &mut d_first);
                    }
                    (None, None) => {
                        output.backward(&trace.first, &trace.scores, upstream, go, &mut d_first);
                    }
                    _ => return Err(Error::Shape("gradient container shape differs".into())),
                }
                tensor.backward(&trace.input, &trace.u, &trace.v, &trace.first, &d_first, gt, &mut d_input);
            }
            _ => return Err(Error::Shape("gradient container shape differs".into())),
        }
        Ok(d_input)
    }
}
