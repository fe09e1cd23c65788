//! Decision stack, the prosocial benefit model and indecision detection.

use serde::{Deserialize, Serialize};

use crate::appraisal::{Agent, CoreValueVector};
use crate::error::{Error, Result};
use crate::numerics::{Activation, DenseMatrix, DenseVector};
use crate::perception::Layer;

#[derive(Debug, Clone, PartialEq)]
pub struct ActionVector {
    pub values: DenseVector,
    pub labels: Vec<String>,
}

pub fn decide(agent: &Agent, v: &CoreValueVector) -> Result<ActionVector> {
    if v.values.len() != agent.decision.input_dim() {
        return Err(Error::dims("decision input", agent.decision.input_dim(), v.values.len()));
    }
    let a = agent.decision.forward(&v.values)?;
    Ok(ActionVector {
        values: DenseVector::checked(a, "decision")?,
        labels: agent.action_labels().to_vec(),
    })
}

/// Parameters of the two-value, single-action prosocial decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProsocialParams {
    /// Prioritisation multiplier `M'`.
    pub m_prime: f64,
    /// Recipient-agnostic bias for or against acting, `D'`.
    pub d_prime: f64,
    pub b_self: f64,
    /// Relationship between recipient and agent.
    pub k: f64,
    pub b_rec: f64,
    pub c_inact: f64,
    pub c_act: f64,
}

/// The benefit written as one linear unit: `sum_c W_c v_c + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProsocialAssembly {
    pub weights: [f64; 2],
    pub values: [f64; 2],
    pub bias: f64,
}

impl ProsocialAssembly {
    pub fn evaluate(&self) -> f64 {
        self.weights[0] * self.values[0] + self.weights[1] * self.values[1] + self.bias
    }
}

impl ProsocialParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.m_prime,
            self.d_prime,
            self.b_self,
            self.k,
            self.b_rec,
            self.c_inact,
            self.c_act,
        ];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "prosocial parameters".into(),
            });
        }
        Ok(())
    }

    /// `W = [M' D', M']`, `v = [B_self, K B_rec]`, `b = M' (D' + C_inact)`.
    pub fn assembly(&self) -> ProsocialAssembly {
        ProsocialAssembly {
            weights: [self.m_prime * self.d_prime, self.m_prime],
            values: [self.b_self, self.k * self.b_rec],
            bias: self.m_prime * (self.d_prime + self.c_inact),
        }
    }

    /// The assembly as a decision layer whose binary unit fires above `C_act`.
    pub fn decision_layer(&self) -> Result<Layer> {
        let a = self.assembly();
        Layer::new(
            DenseMatrix::from_rows(&[a.weights])?,
            vec![a.bias],
            vec![Activation::BinaryThreshold(self.c_act)],
        )
    }
}

/// Net benefit of acting: `M' (D' (1 + B_self) + K B_rec + C_inact)`.
pub fn prosocial_benefit(p: &ProsocialParams) -> f64 {
    p.m_prime * (p.d_prime * (1.0 + p.b_self) + p.k * p.b_rec + p.c_inact)
}

/// 1 when the benefit strictly exceeds the cost of acting, else 0.
pub fn prosocial_act(p: &ProsocialParams) -> u8 {
    u8::from(prosocial_benefit(p) > p.c_act)
}

/// True when the benefit crosses the action threshold at least twice.
/// A benefit equal to the threshold counts as below it.
pub fn detect_indecision(benefit_trace: &[f64], c_act: f64) -> bool {
    let crossings = benefit_trace
        .windows(2)
        .filter(|w| (w[0] > c_act) != (w[1] > c_act))
        .count();
    crossings >= 2
}
