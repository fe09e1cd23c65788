//! The agent and its derivative-defined appraisal quantities: valence,
//! perceived valence, self worth, relative self efficacy, efficacy,
//! self-efficacy and cognitive dissonance.

use std::collections::BTreeMap;

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::numerics::{analytic_layer_jacobian, fd_jacobian, DenseMatrix, DenseVector, StepPolicy};
use crate::perception::{classify, degree_of_perception, perceived_correlation, NetworkStack, StimulusVector};

/// Classification, judgement and decision stacks plus the reference
/// stimuli appraisals are measured against.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub classification: NetworkStack,
    pub judgement: NetworkStack,
    pub decision: NetworkStack,
    s_ref: StimulusVector,
    self_index: usize,
    ability_index: usize,
    ability_ref: f64,
    value_labels: Vec<String>,
    action_labels: Vec<String>,
}

impl Agent {
    /// Builds an agent with a zero reference stimulus, zero ability
    /// reference and generated labels.
    pub fn new(
        classification: NetworkStack,
        judgement: NetworkStack,
        decision: NetworkStack,
        self_index: usize,
        ability_index: usize,
    ) -> Result<Self> {
        if judgement.input_dim() != classification.output_dim() {
            return Err(Error::dims(
                "judgement input",
                classification.output_dim(),
                judgement.input_dim(),
            ));
        }
        if decision.input_dim() != judgement.output_dim() {
            return Err(Error::dims("decision input", judgement.output_dim(), decision.input_dim()));
        }
        let n = judgement.input_dim();
        for index in [self_index, ability_index] {
            if index >= n {
                return Err(Error::IndexOutOfRange { index, len: n });
            }
        }
        if self_index == ability_index {
            return Err(Error::InvalidAgent(
                "self and ability stimuli must be distinct".into(),
            ));
        }
        let s_ref = StimulusVector::internal(DenseVector::zeros(n), classification.depth());
        let value_labels = (0..judgement.output_dim()).map(|c| format!("v{c}")).collect();
        let action_labels = (0..decision.output_dim()).map(|k| format!("a{k}")).collect();
        Ok(Self {
            classification,
            judgement,
            decision,
            s_ref,
            self_index,
            ability_index,
            ability_ref: 0.0,
            value_labels,
            action_labels,
        })
    }

    pub fn with_s_ref(mut self, s_ref: DenseVector) -> Result<Self> {
        if s_ref.len() != self.judgement.input_dim() {
            return Err(Error::dims("reference stimulus", self.judgement.input_dim(), s_ref.len()));
        }
        self.s_ref = StimulusVector::internal(s_ref, self.classification.depth());
        Ok(self)
    }

    pub fn with_ability_ref(mut self, ability_ref: f64) -> Result<Self> {
        if !ability_ref.is_finite() {
            return Err(Error::NonFinite {
                context: "ability reference".into(),
            });
        }
        self.ability_ref = ability_ref;
        Ok(self)
    }

    pub fn with_value_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.judgement.output_dim() {
            return Err(Error::dims("core value labels", self.judgement.output_dim(), labels.len()));
        }
        self.value_labels = labels;
        Ok(self)
    }

    pub fn with_action_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.decision.output_dim() {
            return Err(Error::dims("action labels", self.decision.output_dim(), labels.len()));
        }
        self.action_labels = labels;
        Ok(self)
    }

    pub fn s_ref(&self) -> &StimulusVector {
        &self.s_ref
    }

    pub fn self_index(&self) -> usize {
        self.self_index
    }

    pub fn ability_index(&self) -> usize {
        self.ability_index
    }

    pub fn ability_ref(&self) -> f64 {
        self.ability_ref
    }

    pub fn value_labels(&self) -> &[String] {
        &self.value_labels
    }

    pub fn action_labels(&self) -> &[String] {
        &self.action_labels
    }

    /// Width of the internal stimulus the judgement stack reads.
    pub fn stimulus_dim(&self) -> usize {
        self.judgement.input_dim()
    }

    pub fn core_value_dim(&self) -> usize {
        self.judgement.output_dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoreValueVector {
    pub values: DenseVector,
    pub labels: Vec<String>,
}

impl CoreValueVector {
    pub fn unlabeled(values: DenseVector) -> Self {
        let labels = (0..values.len()).map(|c| format!("v{c}")).collect();
        Self { values, labels }
    }
}

/// A stimulus as the agent saw it: the external vector and every
/// classification response, the last being the judgement input.
#[derive(Debug, Clone, PartialEq)]
pub struct Percept {
    pub external: StimulusVector,
    pub responses: Vec<StimulusVector>,
}

impl Percept {
    pub fn new(agent: &Agent, s_tilde: &DenseVector) -> Result<Self> {
        let external = StimulusVector::external(s_tilde.clone());
        let responses = classify(&agent.classification, &external)?;
        Ok(Self { external, responses })
    }

    pub fn internal(&self) -> &StimulusVector {
        self.responses.last().expect("classification stacks are never empty")
    }

    /// Input of the last classification layer.
    pub fn penultimate(&self) -> &StimulusVector {
        match self.responses.len() {
            0 | 1 => &self.external,
            n => &self.responses[n - 2],
        }
    }
}

fn check_input(agent: &Agent, s: &StimulusVector) -> Result<()> {
    if s.len() != agent.stimulus_dim() {
        return Err(Error::dims("judgement input", agent.stimulus_dim(), s.len()));
    }
    Ok(())
}

fn check_index(index: usize, len: usize) -> Result<()> {
    if index >= len {
        return Err(Error::IndexOutOfRange { index, len });
    }
    Ok(())
}

pub fn judge(agent: &Agent, s: &StimulusVector) -> Result<CoreValueVector> {
    check_input(agent, s)?;
    let v = agent.judgement.forward(&s.values)?;
    Ok(CoreValueVector {
        values: DenseVector::checked(v, "judgement")?,
        labels: agent.value_labels.clone(),
    })
}

/// Jacobian of the judgement stack at `s`; row `c`, column `i` is
/// `dv_c / ds_i`.
pub fn judgement_jacobian(agent: &Agent, s: &StimulusVector) -> Result<DenseMatrix> {
    check_input(agent, s)?;
    analytic_layer_jacobian(&agent.judgement, &s.values)?.require_defined()
}

/// Valence `eta_{i,c}`.
pub fn valence(agent: &Agent, s: &StimulusVector, i: usize, c: usize) -> Result<f64> {
    check_index(i, agent.stimulus_dim())?;
    check_index(c, agent.core_value_dim())?;
    Ok(judgement_jacobian(agent, s)?.get(c, i))
}

/// Perceived valence `gamma_{i,c} = eta_{i,c} * delta_s_i` for every core
/// value `c`.
pub fn perceived_valence(agent: &Agent, s: &StimulusVector, i: usize) -> Result<Vec<f64>> {
    check_index(i, agent.stimulus_dim())?;
    let jac = judgement_jacobian(agent, s)?;
    let delta = degree_of_perception(s, agent.s_ref(), i)?;
    Ok(jac.column(i).into_iter().map(|eta| eta * delta).collect())
}

/// Self worth: perceived valence of the self-associated stimulus.
pub fn self_worth(agent: &Agent, s: &StimulusVector) -> Result<Vec<f64>> {
    perceived_valence(agent, s, agent.self_index)
}

/// Core value response to the perceived ability stimulus relative to the
/// agent's reference ability.
pub fn relative_self_efficacy(agent: &Agent, s: &StimulusVector) -> Result<Vec<f64>> {
    let jac = judgement_jacobian(agent, s)?;
    let gap = s.values[agent.ability_index] - agent.ability_ref;
    Ok(jac.column(agent.ability_index).into_iter().map(|eta| eta * gap).collect())
}

/// Change in every external stimulus caused by moving action channel `n`
/// by `delta_a`, differentiated numerically through the environment.
pub fn efficacy(env: &Environment, a: &[f64], n: usize, delta_a: f64) -> Result<Vec<f64>> {
    check_index(n, env.action_dim())?;
    let jac = fd_jacobian(|x| Ok(env.clone().step(x)?.into_vec()), a, StepPolicy::default())?;
    Ok(jac.column(n).into_iter().map(|d| d * delta_a).collect())
}

/// Change in every internal stimulus when the agent moves its own action
/// channel `n` by `delta_a`, through `C(M_P(a))`.
pub fn self_efficacy(
    agent: &Agent,
    perceived_env: &Environment,
    a0: &[f64],
    n: usize,
    delta_a: f64,
) -> Result<Vec<f64>> {
    if perceived_env.stimulus_dim() != agent.classification.input_dim() {
        return Err(Error::dims(
            "perceived environment stimulus",
            agent.classification.input_dim(),
            perceived_env.stimulus_dim(),
        ));
    }
    check_index(n, perceived_env.action_dim())?;
    let jac = fd_jacobian(
        |x| {
            let s_tilde = perceived_env.clone().step(x)?;
            agent.classification.forward(&s_tilde)
        },
        a0,
        StepPolicy::default(),
    )?;
    Ok(jac.column(n).into_iter().map(|d| d * delta_a).collect())
}

/// Cosine between the judgement gradients of core values `c1` and `c2`.
/// Negative means locally improving one works against the other.
pub fn dissonance(agent: &Agent, s: &StimulusVector, c1: usize, c2: usize) -> Result<f64> {
    check_index(c1, agent.core_value_dim())?;
    check_index(c2, agent.core_value_dim())?;
    if c1 == c2 {
        return Err(Error::InvalidParams("dissonance needs two distinct core values".into()));
    }
    let jac = judgement_jacobian(agent, s)?;
    gradient_cosine(jac.row(c1), jac.row(c2)).map_err(|row| Error::ZeroGradient(if row == 0 { c1 } else { c2 }))
}

/// Cosine of two gradient rows; `Err(k)` names the zero row.
pub fn gradient_cosine(g1: &[f64], g2: &[f64]) -> std::result::Result<f64, usize> {
    let n1 = g1.iter().map(|x| x * x).sum::<f64>().sqrt();
    let n2 = g2.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n1 == 0.0 {
        return Err(0);
    }
    if n2 == 0.0 {
        return Err(1);
    }
    let dot: f64 = g1.iter().zip(g2).map(|(a, b)| a * b).sum();
    Ok((dot / (n1 * n2)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StimulusAppraisal {
    pub index: usize,
    /// `eta_{i,c}` per core value.
    pub eta: Vec<f64>,
    pub delta_s: f64,
    /// `gamma_{i,c}` per core value.
    pub gamma: Vec<f64>,
}

impl StimulusAppraisal {
    pub fn new(index: usize, eta: Vec<f64>, delta_s: f64) -> Self {
        let gamma = eta.iter().map(|e| e * delta_s).collect();
        Self {
            index,
            eta,
            delta_s,
            gamma,
        }
    }
}

/// Every appraisal quantity the emotion table reads, at one instant.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AppraisalSnapshot {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub stimuli: Vec<StimulusAppraisal>,
    pub rho: BTreeMap<(usize, usize), f64>,
}

impl AppraisalSnapshot {
    pub fn stimulus(&self, index: usize) -> Option<&StimulusAppraisal> {
        self.stimuli.iter().find(|s| s.index == index)
    }
}

/// Assembles alpha, beta, per-stimulus eta / delta_s / gamma and the
/// requested perceived correlations. `rho_pairs` index the input (`i`) and
/// output (`j`) of the last classification layer.
pub fn build_snapshot(
    agent: &Agent,
    percept: &Percept,
    tracked: &[usize],
    rho_pairs: &[(usize, usize)],
) -> Result<AppraisalSnapshot> {
    let s = percept.internal();
    let jac = judgement_jacobian(agent, s)?;
    let alpha = self_worth(agent, s)?;
    let beta = relative_self_efficacy(agent, s)?;

    let mut stimuli = Vec::with_capacity(tracked.len());
    for &i in tracked {
        check_index(i, agent.stimulus_dim())?;
        let delta_s = degree_of_perception(s, agent.s_ref(), i)?;
        stimuli.push(StimulusAppraisal::new(i, jac.column(i), delta_s));
    }

    let depth = agent.classification.depth();
    let prev = percept.penultimate();
    let mut rho = BTreeMap::new();
    for &(i, j) in rho_pairs {
        let r = perceived_correlation(&agent.classification, depth, &prev.values, i, j)?;
        rho.insert((i, j), r);
    }
    Ok(AppraisalSnapshot {
        alpha,
        beta,
        stimuli,
        rho,
    })
}
