use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use super::{Critic, Policy, PolicyKind};
use crate::env::Environment;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Linear,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(x),
            Activation::Relu => x.max(0.0),
            Activation::Linear => x,
        }
    }

    /// Derivative expressed through the activation's output `y = f(x)`.
    pub(crate) fn derivative_at_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "linear" | "identity" => Ok(Activation::Linear),
            other => Err(Error::UnknownActivation(other.to_string())),
        }
    }
}

/// Affine map followed by an element-wise activation. Weights are stored
/// row-major with one row per output.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    /// `index` is only used to label errors.
    pub fn new(
        index: usize,
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.len() != inputs * outputs {
            return Err(Error::WeightShape {
                layer: index,
                what: "weights",
                expected: inputs * outputs,
                found: weights.len(),
            });
        }
        if bias.len() != outputs {
            return Err(Error::WeightShape {
                layer: index,
                what: "bias",
                expected: outputs,
                found: bias.len(),
            });
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            bias,
            activation,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn forward_into(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for (row, b) in self.weights.chunks_exact(self.inputs).zip(&self.bias) {
            let z = row.iter().zip(input).fold(*b, |acc, (w, x)| acc + w * x);
            out.push(self.activation.apply(z));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputRole {
    PolicyMean,
    Value,
}

impl OutputRole {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputRole::PolicyMean => "policy-mean",
            OutputRole::Value => "value",
        }
    }
}

impl FromStr for OutputRole {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "policy-mean" | "policy" => Ok(OutputRole::PolicyMean),
            "value" => Ok(OutputRole::Value),
            other => Err(Error::InvalidConfig(alloc::format!(
                "unknown role `{other}`"
            ))),
        }
    }
}

/// How raw policy outputs become actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionTransform {
    /// Raw output is in action units and clipped to the bounds.
    Clip,
    /// Raw output is clipped to `[-1, 1]` and mapped affinely onto the bounds.
    Scale,
}

impl ActionTransform {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionTransform::Clip => "clip",
            ActionTransform::Scale => "scale",
        }
    }
}

impl FromStr for ActionTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clip" => Ok(ActionTransform::Clip),
            "scale" => Ok(ActionTransform::Scale),
            other => Err(Error::InvalidConfig(alloc::format!(
                "unknown action transform `{other}`"
            ))),
        }
    }
}

/// Feed-forward network used for both base policies and critics.
#[derive(Debug, Clone, PartialEq)]
pub struct PortableNetwork {
    layers: Vec<Layer>,
    role: OutputRole,
    action_low: Vec<f64>,
    action_high: Vec<f64>,
    action_transform: ActionTransform,
}

impl PortableNetwork {
    pub fn new(
        layers: Vec<Layer>,
        role: OutputRole,
        action_low: Vec<f64>,
        action_high: Vec<f64>,
        action_transform: ActionTransform,
    ) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::EmptyNetwork);
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[1].inputs != pair[0].outputs {
                return Err(Error::DimChain {
                    layer: i + 1,
                    expected: pair[1].inputs,
                    found: pair[0].outputs,
                });
            }
        }
        let out_dim = layers[layers.len() - 1].outputs;
        if role == OutputRole::PolicyMean {
            if action_low.len() != out_dim || action_high.len() != out_dim {
                return Err(Error::ActionBounds(alloc::format!(
                    "policy has {out_dim} outputs but {} low / {} high bounds",
                    action_low.len(),
                    action_high.len()
                )));
            }
            if action_low
                .iter()
                .zip(&action_high)
                .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi))
            {
                return Err(Error::ActionBounds(
                    "each low must be finite and below its high".to_string(),
                ));
            }
        }
        Ok(Self {
            layers,
            role,
            action_low,
            action_high,
            action_transform,
        })
    }

    pub fn value(layers: Vec<Layer>) -> Result<Self> {
        Self::new(
            layers,
            OutputRole::Value,
            Vec::new(),
            Vec::new(),
            ActionTransform::Clip,
        )
    }

    /// Randomly initialised multilayer perceptron. Weights and biases are
    /// uniform in `+-1/sqrt(fan_in)`; the output layer is further scaled by
    /// `output_scale`.
    #[allow(clippy::too_many_arguments)]
    pub fn mlp<R: Rng + ?Sized>(
        observation_dim: usize,
        hidden: &[usize],
        hidden_activation: Activation,
        output_dim: usize,
        output_activation: Activation,
        output_scale: f64,
        role: OutputRole,
        bounds: (Vec<f64>, Vec<f64>),
        action_transform: ActionTransform,
        rng: &mut R,
    ) -> Result<Self> {
        let mut dims = vec![observation_dim];
        dims.extend_from_slice(hidden);
        dims.push(output_dim);
        let n = dims.len() - 1;
        let mut layers = Vec::with_capacity(n);
        for (i, w) in dims.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let last = i + 1 == n;
            let limit = 1.0 / libm::sqrt(fan_in as f64) * if last { output_scale } else { 1.0 };
            let mut draw = || limit * (2.0 * rng.random::<f64>() - 1.0);
            let weights = (0..fan_in * fan_out).map(|_| draw()).collect();
            let bias = (0..fan_out).map(|_| draw()).collect();
            let act = if last {
                output_activation
            } else {
                hidden_activation
            };
            layers.push(Layer::new(i, fan_in, fan_out, weights, bias, act)?);
        }
        Self::new(layers, role, bounds.0, bounds.1, action_transform)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn role(&self) -> OutputRole {
        self.role
    }

    pub fn action_low(&self) -> &[f64] {
        &self.action_low
    }

    pub fn action_high(&self) -> &[f64] {
        &self.action_high
    }

    pub fn action_transform(&self) -> ActionTransform {
        self.action_transform
    }

    pub fn observation_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    /// Raw network output.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.observation_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.observation_dim(),
                found: input.len(),
            });
        }
        let mut cur = input.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.forward_into(&cur, &mut next);
            core::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }

    /// Network output after the role's post-processing: policies map into
    /// the action box, values pass through.
    pub fn output(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.forward(input)?;
        if self.role == OutputRole::PolicyMean {
            for ((v, lo), hi) in y.iter_mut().zip(&self.action_low).zip(&self.action_high) {
                *v = match self.action_transform {
                    ActionTransform::Clip => v.clamp(*lo, *hi),
                    ActionTransform::Scale => lo + 0.5 * (v.clamp(-1.0, 1.0) + 1.0) * (hi - lo),
                };
            }
        }
        Ok(y)
    }

    /// Forward pass keeping every layer's post-activation output;
    /// `acts[0]` is the input.
    pub(crate) fn forward_cached(&self, input: &[f64], acts: &mut Vec<Vec<f64>>) {
        acts.resize_with(self.layers.len() + 1, Vec::new);
        acts[0].clear();
        acts[0].extend_from_slice(input);
        for (i, layer) in self.layers.iter().enumerate() {
            let (head, tail) = acts.split_at_mut(i + 1);
            layer.forward_into(&head[i], &mut tail[0]);
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Flattened parameters, layer by layer, weights then bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.bias);
        }
        p
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::DimensionMismatch {
                expected: self.parameter_count(),
                found: params.len(),
            });
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, r) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, r) = r.split_at(l.bias.len());
            l.bias.copy_from_slice(b);
            rest = r;
        }
        Ok(())
    }

    pub fn with_parameters(&self, params: &[f64]) -> Result<Self> {
        let mut net = self.clone();
        net.set_parameters(params)?;
        Ok(net)
    }
}

/// A policy-mean network acting on observations.
#[derive(Debug, Clone)]
pub struct NetworkPolicy(pub PortableNetwork);

impl<E: Environment + ?Sized> Policy<E> for NetworkPolicy {
    fn act(&self, env: &E, state: &E::State) -> Result<f64> {
        let desc = env.descriptor();
        let obs = env.observe(state);
        let out = self.0.output(&obs)?;
        Ok(desc.clamp_action(out[0]))
    }

    fn kind(&self) -> PolicyKind {
        PolicyKind::Network
    }
}

/// A value network evaluated on observations.
#[derive(Debug, Clone)]
pub struct NetworkCritic(pub PortableNetwork);

impl<E: Environment + ?Sized> Critic<E> for NetworkCritic {
    fn value(&self, env: &E, state: &E::State) -> Result<f64> {
        let obs = env.observe(state);
        Ok(self.0.forward(&obs)?[0])
    }

    /// Finite whenever every hidden layer saturates (tanh): the output layer
    /// then sees inputs in `[-1, 1]`.
    fn upper_bound(&self) -> Option<f64> {
        let layers = self.0.layers();
        let (last, hidden) = layers.split_last()?;
        if hidden.is_empty() || hidden.iter().any(|l| l.activation != Activation::Tanh) {
            return None;
        }
        let row = &last.weights[..last.inputs];
        let bound = last.bias[0] + row.iter().map(|w| w.abs()).sum::<f64>();
        match last.activation {
            Activation::Linear => Some(bound),
            Activation::Tanh => Some(libm::tanh(bound)),
            Activation::Relu => Some(bound.max(0.0)),
        }
    }
}
