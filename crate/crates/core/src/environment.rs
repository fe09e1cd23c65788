//! Real and perceived environments, dyadic affect dynamics and the
//! agent-environment loop.

use crate::action::decide;
use crate::appraisal::{build_snapshot, judge, Agent, AppraisalSnapshot, CoreValueVector, Percept};
use crate::emotion::{classify_emotions, surprise, EmotionMatch, EmotionTable};
use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, DenseVector};
use crate::perception::{classify, StimulusVector};

/// Scalar influence of one partner's expressed affect on the other.
#[derive(Debug, Clone, PartialEq)]
pub enum InfluenceFunction {
    Linear { slope: f64 },
    /// Linear interpolation between breakpoints; the end segments extend
    /// to infinity. A single breakpoint is a constant.
    PiecewiseLinear { points: Vec<(f64, f64)> },
}

impl InfluenceFunction {
    pub fn piecewise(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParams("piecewise influence needs a breakpoint".into()));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::NonFinite {
                context: "influence breakpoints".into(),
            });
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidParams(
                "influence breakpoints must be strictly increasing".into(),
            ));
        }
        Ok(Self::PiecewiseLinear { points })
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            InfluenceFunction::Linear { slope } => slope * x,
            InfluenceFunction::PiecewiseLinear { points } => {
                if points.len() == 1 {
                    return points[0].1;
                }
                // segment containing x, clamped to the end segments
                let k = points
                    .windows(2)
                    .position(|w| x < w[1].0)
                    .unwrap_or(points.len() - 2);
                let (x0, y0) = points[k];
                let (x1, y1) = points[k + 1];
                y0 + (y1 - y0) * (x - x0) / (x1 - x0)
            }
        }
    }
}

/// Coupled update `s0' = r0 s0 + I10(s1) + b0`, `s1' = r1 s1 + I01(s0) + b1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadParams {
    pub r0: f64,
    pub r1: f64,
    pub i10: InfluenceFunction,
    pub i01: InfluenceFunction,
    pub b_j0: f64,
    pub b_j1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Environment {
    Linear(DenseMatrix),
    Dyad { params: DyadParams, state: [f64; 2] },
    Identity(usize),
}

impl Environment {
    /// Newtonian free fall over one time step; the state is
    /// (acceleration, velocity, position).
    pub fn ballistic(dt: f64) -> Self {
        let m = DenseMatrix::from_rows(&[
            [1.0, 0.0, 0.0],
            [dt, 1.0, 0.0],
            [0.5 * dt * dt, dt, 1.0],
        ])
        .expect("finite ballistic matrix");
        Environment::Linear(m)
    }

    pub fn dyad(params: DyadParams, initial: [f64; 2]) -> Self {
        Environment::Dyad {
            params,
            state: initial,
        }
    }

    /// Length of the action vector the environment accepts.
    pub fn action_dim(&self) -> usize {
        match self {
            Environment::Linear(m) => m.cols(),
            // the modeled agent acts through one actuator: its own expressed affect
            Environment::Dyad { .. } => 1,
            Environment::Identity(n) => *n,
        }
    }

    /// Length of the stimulus vector the environment emits.
    pub fn stimulus_dim(&self) -> usize {
        match self {
            Environment::Linear(m) => m.rows(),
            Environment::Dyad { .. } => 2,
            Environment::Identity(n) => *n,
        }
    }

    /// Maps an action to the next external stimulus.
    ///
    /// For a dyad the agent's action becomes its own expressed affect
    /// `s0`, while the partner follows its coupled update from the previous
    /// state.
    pub fn step(&mut self, a: &[f64]) -> Result<DenseVector> {
        if a.len() != self.action_dim() {
            return Err(Error::dims("environment action", self.action_dim(), a.len()));
        }
        let out = match self {
            Environment::Linear(m) => m.mul_vec(a)?,
            Environment::Identity(_) => a.to_vec(),
            Environment::Dyad { params, state } => {
                let s1 = params.r1 * state[1] + params.i01.eval(state[0]) + params.b_j1;
                *state = [a[0], s1];
                state.to_vec()
            }
        };
        DenseVector::checked(out, "environment step")
    }

    pub fn state(&self) -> Option<[f64; 2]> {
        match self {
            Environment::Dyad { state, .. } => Some(*state),
            _ => None,
        }
    }
}

/// Matrix-vector step of a linear environment.
pub fn step_linear(env: &Environment, a: &[f64]) -> Result<DenseVector> {
    match env {
        Environment::Linear(m) => DenseVector::checked(m.mul_vec(a)?, "linear environment"),
        _ => Err(Error::InvalidParams("step_linear needs a linear environment".into())),
    }
}

/// Advances both coupled equations simultaneously from the old state.
pub fn step_dyad(env: &mut Environment) -> Result<(f64, f64)> {
    match env {
        Environment::Dyad { params, state } => {
            let [s0, s1] = *state;
            let next0 = params.r0 * s0 + params.i10.eval(s1) + params.b_j0;
            let next1 = params.r1 * s1 + params.i01.eval(s0) + params.b_j1;
            if !next0.is_finite() || !next1.is_finite() {
                return Err(Error::NonFiniteResult {
                    context: "dyad update".into(),
                });
            }
            *state = [next0, next1];
            Ok((next0, next1))
        }
        _ => Err(Error::InvalidParams("step_dyad needs a dyad environment".into())),
    }
}

/// Core values the agent expects after acting `a` in the perceived
/// environment. Advances `perceived_env` when it carries state.
pub fn expected_core_values(
    agent: &Agent,
    perceived_env: &mut Environment,
    a: &[f64],
) -> Result<CoreValueVector> {
    let s_tilde = perceived_env.step(a)?;
    let s = internal_response(agent, &StimulusVector::external(s_tilde))?;
    judge(agent, &s)
}

fn internal_response(agent: &Agent, s_tilde: &StimulusVector) -> Result<StimulusVector> {
    Ok(classify(&agent.classification, s_tilde)?
        .pop()
        .expect("classification stacks are never empty"))
}

/// Settings for [`run_loop`] beyond the agent and environments.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub steps: usize,
    pub tracked: Vec<usize>,
    pub rho_pairs: Vec<(usize, usize)>,
    pub core_value: usize,
    pub table: EmotionTable,
}

impl RunSettings {
    pub fn new(steps: usize) -> Self {
        Self {
            steps,
            tracked: Vec::new(),
            rho_pairs: Vec::new(),
            core_value: 0,
            table: EmotionTable::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub s_tilde: DenseVector,
    pub s_internal: DenseVector,
    pub v: DenseVector,
    pub a_tilde: DenseVector,
    pub emotions: Vec<String>,
    /// Present only when a perceived environment is supplied and `t > 0`.
    pub surprise: Option<f64>,
    /// Core-value change attributed to the previous action; zero at `t = 0`.
    pub reward: DenseVector,
}

/// A loop that stopped early keeps the records emitted before the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub records: Vec<TrajectoryRecord>,
    pub error: Error,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} (after {} records)", self.error, self.records.len())
    }
}

impl std::error::Error for RunFailure {}

/// Alternates agent cycles (classify, judge, appraise, decide) with
/// environment steps, starting from `s_tilde0`.
pub fn run_loop(
    agent: &Agent,
    real_env: &Environment,
    perceived_env: Option<&Environment>,
    s_tilde0: &DenseVector,
    settings: &RunSettings,
) -> std::result::Result<Vec<TrajectoryRecord>, RunFailure> {
    let mut records = Vec::with_capacity(settings.steps + 1);
    match drive(agent, real_env, perceived_env, s_tilde0, settings, &mut records) {
        Ok(()) => Ok(records),
        Err(error) => Err(RunFailure { records, error }),
    }
}

fn drive(
    agent: &Agent,
    real_env: &Environment,
    perceived_env: Option<&Environment>,
    s_tilde0: &DenseVector,
    settings: &RunSettings,
    records: &mut Vec<TrajectoryRecord>,
) -> Result<()> {
    check_chain(agent, real_env, perceived_env, s_tilde0)?;
    let mut real = real_env.clone();
    let mut perceived = perceived_env.cloned();
    let mut s_tilde = s_tilde0.clone();
    let mut prev: Option<(DenseVector, DenseVector)> = None;

    for t in 0..=settings.steps {
        if t > 0 {
            let (_, a_prev) = prev.as_ref().expect("previous cycle");
            s_tilde = real.step(a_prev)?;
        }
        let percept = Percept::new(agent, &s_tilde)?;
        let s = percept.internal();
        let v = judge(agent, s)?;
        let emotions = appraise_emotions(agent, &percept, settings)?;
        let a = decide(agent, &v)?;

        let (surprise_t, reward) = match &prev {
            None => (None, DenseVector::zeros(v.values.len())),
            Some((v_prev, a_prev)) => {
                let surprise_t = match perceived.as_mut() {
                    Some(env) => {
                        let expected = expected_core_values(agent, env, a_prev)?;
                        Some(surprise(&expected, &v)?)
                    }
                    None => None,
                };
                let reward = v.values.sub(v_prev)?;
                (surprise_t, DenseVector::checked(reward.into_vec(), "reward")?)
            }
        };

        records.push(TrajectoryRecord {
            t,
            s_tilde: s_tilde.clone(),
            s_internal: s.values.clone(),
            v: v.values.clone(),
            a_tilde: a.values.clone(),
            emotions,
            surprise: surprise_t,
            reward,
        });
        prev = Some((v.values, a.values));
    }
    Ok(())
}

fn check_chain(
    agent: &Agent,
    real_env: &Environment,
    perceived_env: Option<&Environment>,
    s_tilde0: &DenseVector,
) -> Result<()> {
    let c_in = agent.classification.input_dim();
    let d_out = agent.decision.output_dim();
    if s_tilde0.len() != c_in {
        return Err(Error::dims("initial stimulus", c_in, s_tilde0.len()));
    }
    for env in std::iter::once(real_env).chain(perceived_env) {
        if env.action_dim() != d_out {
            return Err(Error::dims("environment action", d_out, env.action_dim()));
        }
        if env.stimulus_dim() != c_in {
            return Err(Error::dims("environment stimulus", c_in, env.stimulus_dim()));
        }
    }
    Ok(())
}

/// Snapshot and emotion matches for one percept, as the run loop sees it:
/// the first two tracked stimuli play `s1` and `s2`, and their perceived
/// correlation is added to the requested pairs. With a single tracked
/// stimulus only rows that ignore stimulus 2 are considered.
pub fn appraise_percept(
    agent: &Agent,
    percept: &Percept,
    settings: &RunSettings,
) -> Result<(AppraisalSnapshot, Vec<EmotionMatch>)> {
    let (s1, s2) = match settings.tracked.as_slice() {
        [] => {
            let snap = build_snapshot(agent, percept, &[], &settings.rho_pairs)?;
            return Ok((snap, Vec::new()));
        }
        [only] => (*only, *only),
        [first, second, ..] => (*first, *second),
    };
    let mut pairs = settings.rho_pairs.clone();
    if settings.tracked.len() >= 2 && !pairs.contains(&(s1, s2)) {
        pairs.push((s1, s2));
    }
    let snap = build_snapshot(agent, percept, &settings.tracked, &pairs)?;
    let matches = if settings.tracked.len() >= 2 {
        classify_emotions(&snap, &settings.table, settings.core_value, s1, s2)?
    } else {
        let table = settings.table.single_stimulus_rows();
        classify_emotions(&snap, &table, settings.core_value, s1, s1)?
    };
    Ok((snap, matches))
}

fn appraise_emotions(agent: &Agent, percept: &Percept, settings: &RunSettings) -> Result<Vec<String>> {
    if settings.tracked.is_empty() {
        return Ok(Vec::new());
    }
    let (_, matches) = appraise_percept(agent, percept, settings)?;
    Ok(matches.into_iter().map(|m| m.label).collect())
}
