//! Stimulus representations and the classification machinery: dense
//! layers, stacks, degree of perception, focus, association horizons and
//! perceived correlation.

use crate::error::{Error, Result};
use crate::numerics::{analytic_layer_jacobian, Activation, DenseMatrix, DenseVector};

/// A stimulus together with the layer it lives in. Layer 0 is the external
/// representation; layer `n` is the response of classification layer `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusVector {
    pub values: DenseVector,
    layer: usize,
}

impl StimulusVector {
    pub fn external(values: DenseVector) -> Self {
        Self { values, layer: 0 }
    }

    pub fn internal(values: DenseVector, layer: usize) -> Self {
        Self { values, layer }
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn is_external(&self) -> bool {
        self.layer == 0
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One dense layer: `out_j = act_j(W_j . x + b_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    weights: DenseMatrix,
    bias: DenseVector,
    activations: Vec<Activation>,
}

impl Layer {
    pub fn new(weights: DenseMatrix, bias: Vec<f64>, activations: Vec<Activation>) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(Error::dims("layer bias", weights.rows(), bias.len()));
        }
        if activations.len() != weights.rows() {
            return Err(Error::dims(
                "layer activations",
                weights.rows(),
                activations.len(),
            ));
        }
        if activations.iter().any(|a| match a {
            Activation::BinaryThreshold(t) => !t.is_finite(),
            _ => false,
        }) {
            return Err(Error::NonFinite {
                context: "activation threshold".into(),
            });
        }
        Ok(Self {
            weights,
            bias: DenseVector::new(bias)?,
            activations,
        })
    }

    /// Same activation on every unit.
    pub fn uniform(weights: DenseMatrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        let n = weights.rows();
        Self::new(weights, bias, vec![activation; n])
    }

    pub fn weights(&self) -> &DenseMatrix {
        &self.weights
    }

    pub fn bias(&self) -> &DenseVector {
        &self.bias
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn pre_activation(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut z = self.weights.mul_vec(x)?;
        for (zj, bj) in z.iter_mut().zip(self.bias.iter()) {
            *zj += bj;
        }
        Ok(z)
    }

    pub fn activate(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.activations)
            .map(|(&zj, a)| a.apply(zj))
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.activate(&self.pre_activation(x)?))
    }
}

/// Ordered composition of layers, applied first to last.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkStack {
    layers: Vec<Layer>,
}

impl NetworkStack {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::dims("network stack depth", 1, 0));
        }
        for pair in layers.windows(2) {
            if pair[1].input_dim() != pair[0].output_dim() {
                return Err(Error::dims(
                    "network stack chaining",
                    pair[0].output_dim(),
                    pair[1].input_dim(),
                ));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    /// Output of every layer in order.
    pub fn forward_all(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        if x.len() != self.input_dim() {
            return Err(Error::dims("stack input", self.input_dim(), x.len()));
        }
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = outputs.last().map_or(x, |v| v.as_slice());
            let out = layer.forward(input)?;
            outputs.push(out);
        }
        Ok(outputs)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_all(x)?.pop().unwrap_or_default())
    }
}

/// Runs the classification stack and keeps every intermediate response,
/// each tagged with its layer.
pub fn classify(stack: &NetworkStack, stimulus: &StimulusVector) -> Result<Vec<StimulusVector>> {
    if !stimulus.is_external() {
        return Err(Error::SpaceMismatch {
            left: 0,
            right: stimulus.layer(),
        });
    }
    stack
        .forward_all(&stimulus.values)?
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            Ok(StimulusVector::internal(
                DenseVector::checked(v, "classification")?,
                k + 1,
            ))
        })
        .collect()
}

/// Deviation of component `i` from the reference bias.
pub fn degree_of_perception(s: &StimulusVector, s_ref: &StimulusVector, i: usize) -> Result<f64> {
    if s.layer() != s_ref.layer() {
        return Err(Error::SpaceMismatch {
            left: s.layer(),
            right: s_ref.layer(),
        });
    }
    if s.len() != s_ref.len() {
        return Err(Error::dims("reference stimulus", s.len(), s_ref.len()));
    }
    if i >= s.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: s.len(),
        });
    }
    Ok(s.values[i] - s_ref.values[i])
}

/// `d s_j^(n) / d s_i^(n-1)` for layer `n` (1-based), evaluated at the
/// previous layer's response `s_prev`.
pub fn perceived_correlation(
    stack: &NetworkStack,
    n: usize,
    s_prev: &[f64],
    i: usize,
    j: usize,
) -> Result<f64> {
    if n == 0 || n > stack.depth() {
        return Err(Error::IndexOutOfRange {
            index: n,
            len: stack.depth() + 1,
        });
    }
    let layer = &stack.layers()[n - 1];
    if s_prev.len() != layer.input_dim() {
        return Err(Error::dims("perceived correlation input", layer.input_dim(), s_prev.len()));
    }
    if i >= layer.input_dim() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: layer.input_dim(),
        });
    }
    if j >= layer.output_dim() {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: layer.output_dim(),
        });
    }
    let single = NetworkStack::new(vec![layer.clone()])?;
    let jac = analytic_layer_jacobian(&single, s_prev)?;
    if let Some((_, unit)) = jac.at_threshold {
        return Err(Error::AtThreshold { layer: n, unit });
    }
    Ok(jac.matrix.get(j, i))
}

/// A known stimulus prototype and the cosine-similarity radius within which
/// a perceived stimulus is identified with it.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedStimulus {
    pub label: String,
    pub prototype: DenseVector,
    pub horizon: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Constellation {
    stimuli: Vec<NamedStimulus>,
}

impl Constellation {
    pub fn new(stimuli: Vec<NamedStimulus>) -> Result<Self> {
        for s in &stimuli {
            if s.prototype.norm() == 0.0 {
                return Err(Error::ZeroVector);
            }
            if !(-1.0..=1.0).contains(&s.horizon) {
                return Err(Error::InvalidParams(format!(
                    "horizon {} of `{}` outside [-1, 1]",
                    s.horizon, s.label
                )));
            }
        }
        Ok(Self { stimuli })
    }

    pub fn stimuli(&self) -> &[NamedStimulus] {
        &self.stimuli
    }
}

/// Every known stimulus whose association horizon contains `s`, most
/// similar first. Overlapping horizons yield several matches.
pub fn quantize(c: &Constellation, s: &[f64]) -> Result<Vec<(String, f64)>> {
    let norm = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    let mut hits = Vec::new();
    for known in c.stimuli() {
        if known.prototype.len() != s.len() {
            return Err(Error::dims(
                format!("prototype `{}`", known.label),
                s.len(),
                known.prototype.len(),
            ));
        }
        let sim = known.prototype.dot(s) / (known.prototype.norm() * norm);
        if sim >= known.horizon {
            hits.push((known.label.clone(), sim));
        }
    }
    hits.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(hits)
}

/// Per-unit gains for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct FocusProfile {
    pub gains: Vec<f64>,
}

/// Scales row `j` of the weights and bias `j` by `gains[j]`.
pub fn apply_focus(layer: &Layer, focus: &FocusProfile) -> Result<Layer> {
    if focus.gains.len() != layer.output_dim() {
        return Err(Error::dims("focus gains", layer.output_dim(), focus.gains.len()));
    }
    if focus.gains.iter().any(|g| !g.is_finite() || *g < 0.0) {
        return Err(Error::InvalidParams("focus gains must be finite and >= 0".into()));
    }
    let mut weights = layer.weights.clone();
    let mut bias = layer.bias.to_vec();
    for (j, &g) in focus.gains.iter().enumerate() {
        for c in 0..weights.cols() {
            let w = weights.get(j, c);
            weights.set(j, c, w * g);
        }
        bias[j] *= g;
    }
    Layer::new(weights, bias, layer.activations.clone())
}
