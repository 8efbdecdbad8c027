//! Dense feed-forward networks with hand-written reverse-mode gradients.
//!
//! Parameters live in one flat buffer. Layer `l` owns an `out x in`
//! row-major weight block followed by its `out` biases, so optimizers and
//! soft updates can treat a network as a plain vector.

use rand::Rng;

use crate::error::{check_dim, Error, Result};

/// Hidden-layer nonlinearity. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    Tanh,
    #[default]
    Swish,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Swish => x * sigmoid(x),
        }
    }

    /// Derivative with respect to the pre-activation `x`.
    #[inline]
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Swish => {
                let s = sigmoid(x);
                s + x * s * (1.0 - s)
            }
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Swish => "swish",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "tanh" => Some(Activation::Tanh),
            "swish" => Some(Activation::Swish),
            _ => None,
        }
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Multilayer perceptron.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    activation: Activation,
    params: Vec<f64>,
    /// Start of each layer's weight block in `params`.
    offsets: Vec<usize>,
}

fn layout(layer_sizes: &[usize]) -> Result<(Vec<usize>, usize)> {
    if layer_sizes.len() < 2 {
        return Err(Error::Config(
            "a network needs at least an input and an output layer".into(),
        ));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::Config("layer sizes must be positive".into()));
    }
    let mut offsets = Vec::with_capacity(layer_sizes.len() - 1);
    let mut total = 0;
    for pair in layer_sizes.windows(2) {
        offsets.push(total);
        total += pair[0] * pair[1] + pair[1];
    }
    Ok((offsets, total))
}

impl Mlp {
    /// All-zero network.
    pub fn zeros(layer_sizes: &[usize], activation: Activation) -> Result<Self> {
        let (offsets, total) = layout(layer_sizes)?;
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            params: vec![0.0; total],
            offsets,
        })
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn new<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes, activation)?;
        for l in 0..net.num_layers() {
            let (fan_in, fan_out) = (net.layer_sizes[l], net.layer_sizes[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let start = net.offsets[l];
            for w in &mut net.params[start..start + fan_in * fan_out] {
                *w = rng.random_range(-limit..=limit);
            }
        }
        Ok(net)
    }

    pub fn from_params(
        layer_sizes: &[usize],
        activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        let (offsets, total) = layout(layer_sizes)?;
        check_dim("Mlp::from_params", total, params.len())?;
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            activation,
            params,
            offsets,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Weight block (`out x in`, row-major) and bias vector of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        let start = self.offsets[l];
        let (w, rest) = self.params[start..].split_at(fan_in * fan_out);
        (w, &rest[..fan_out])
    }

    /// Last-layer (linear) output for one input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_trace(input)?.output().to_vec())
    }

    /// Forward pass that keeps every pre-activation for a later backward pass.
    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace> {
        check_dim("Mlp::forward input", self.input_size(), input.len())?;
        let act = self.activation;
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(self.num_layers());
        let mut pre: Vec<Vec<f64>> = Vec::with_capacity(self.num_layers());
        inputs.push(input.to_vec());
        for l in 0..self.num_layers() {
            let (w, b) = self.layer(l);
            let z = affine(w, b, self.layer_sizes[l], &inputs[l]);
            if l + 1 < self.num_layers() {
                inputs.push(z.iter().map(|&x| act.apply(x)).collect());
            }
            pre.push(z);
        }
        Ok(Trace { inputs, pre })
    }

    /// Accumulates `d(cotangent . output) / d(params)` into `grads`.
    pub fn backward(
        &self,
        input: &[f64],
        output_cotangent: &[f64],
        grads: &mut GradBuffer,
    ) -> Result<()> {
        let trace = self.forward_trace(input)?;
        self.backward_trace(&trace, output_cotangent, grads)
    }

    /// Backward pass reusing a trace produced by [`Mlp::forward_trace`] on
    /// this same network.
    pub fn backward_trace(
        &self,
        trace: &Trace,
        output_cotangent: &[f64],
        grads: &mut GradBuffer,
    ) -> Result<()> {
        check_dim(
            "Mlp::backward cotangent",
            self.output_size(),
            output_cotangent.len(),
        )?;
        check_dim("Mlp::backward grads", self.parameter_count(), grads.len())?;
        if output_cotangent.iter().all(|&c| c == 0.0) {
            return Ok(());
        }
        let act = self.activation;
        let mut delta = output_cotangent.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (fan_in, fan_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let start = self.offsets[l];
            let g = &mut grads.values[start..start + fan_in * fan_out + fan_out];
            let (gw, gb) = g.split_at_mut(fan_in * fan_out);
            for (j, &d) in delta.iter().enumerate() {
                gb[j] += d;
                if d == 0.0 {
                    continue;
                }
                let row = &mut gw[j * fan_in..(j + 1) * fan_in];
                for (gij, &x) in row.iter_mut().zip(&trace.inputs[l]) {
                    *gij += d * x;
                }
            }
            if l > 0 {
                let (w, _) = self.layer(l);
                let mut upstream = vec![0.0; fan_in];
                for (j, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    for (u, &wij) in upstream.iter_mut().zip(&w[j * fan_in..(j + 1) * fan_in]) {
                        *u += d * wij;
                    }
                }
                for (u, &z) in upstream.iter_mut().zip(&trace.pre[l - 1]) {
                    *u *= act.derivative(z);
                }
                delta = upstream;
            }
        }
        Ok(())
    }

    /// `self <- (1 - rate) * self + rate * source`, elementwise.
    pub fn soft_update_from(&mut self, source: &Mlp, rate: f64) -> Result<()> {
        if self.layer_sizes != source.layer_sizes {
            return Err(Error::Config(
                "soft update between networks of different shapes".into(),
            ));
        }
        if rate == 1.0 {
            self.params.copy_from_slice(&source.params);
        } else {
            for (t, &s) in self.params.iter_mut().zip(&source.params) {
                *t = (1.0 - rate) * *t + rate * s;
            }
        }
        Ok(())
    }

    pub fn new_grad_buffer(&self) -> GradBuffer {
        GradBuffer::zeros(self.parameter_count())
    }
}

#[inline]
fn affine(w: &[f64], b: &[f64], fan_in: usize, x: &[f64]) -> Vec<f64> {
    b.iter()
        .zip(w.chunks_exact(fan_in))
        .map(|(&bj, row)| bj + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

/// Saved activations from one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Input vector fed to each layer.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation output of each layer.
    pre: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.pre.last().unwrap()
    }
}

/// Gradient accumulator aligned with an [`Mlp`]'s flat parameter layout.
#[derive(Debug, Clone, PartialEq)]
pub struct GradBuffer {
    values: Vec<f64>,
}

impl GradBuffer {
    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn zero(&mut self) {
        self.values.iter_mut().for_each(|g| *g = 0.0);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Bias-corrected adaptive-moment optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(learning_rate: f64, parameter_count: usize) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            first_moment: vec![0.0; parameter_count],
            second_moment: vec![0.0; parameter_count],
        }
    }

    pub fn for_net(learning_rate: f64, net: &Mlp) -> Self {
        Self::new(learning_rate, net.parameter_count())
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }
}

/// One descent step on `net` along `grads`. Rejects the whole update if any
/// gradient element is non-finite.
pub fn optimize_step(net: &mut Mlp, grads: &GradBuffer, state: &mut AdamState) -> Result<()> {
    check_dim("optimize_step grads", net.parameter_count(), grads.len())?;
    check_dim(
        "optimize_step state",
        net.parameter_count(),
        state.first_moment.len(),
    )?;
    if grads.values.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let correction1 = 1.0 - b1.powi(t);
    let correction2 = 1.0 - b2.powi(t);
    let lr = state.learning_rate;
    for (((p, &g), m), v) in net
        .params
        .iter_mut()
        .zip(&grads.values)
        .zip(&mut state.first_moment)
        .zip(&mut state.second_moment)
    {
        *m = b1 * *m + (1.0 - b1) * g;
        *v = b2 * *v + (1.0 - b2) * g * g;
        let m_hat = *m / correction1;
        let v_hat = *v / correction2;
        *p -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}
