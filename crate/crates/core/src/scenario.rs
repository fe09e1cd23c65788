//! Scenario files (strict JSON) and trajectory CSV output.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::action::ProsocialParams;
use crate::appraisal::Agent;
use crate::emotion::{default_rows, EmotionRow, EmotionTable, DEFAULT_SIGN_EPSILON};
use crate::environment::{DyadParams, Environment, InfluenceFunction, RunSettings, TrajectoryRecord};
use crate::error::{Error, Result};
use crate::numerics::{Activation, DenseMatrix, DenseVector};
use crate::perception::{Layer, NetworkStack};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub version: u32,
    pub agents: BTreeMap<String, AgentSpec>,
    pub environment: EnvironmentSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perceived_environment: Option<EnvironmentSpec>,
    #[serde(default = "default_rows")]
    pub emotion_table: Vec<EmotionRow>,
    pub run: RunSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiments: Option<Experiments>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub classification: Vec<LayerSpec>,
    pub judgement: Vec<LayerSpec>,
    pub decision: Vec<LayerSpec>,
    /// Reference stimulus at the judgement input; zero when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_ref: Option<Vec<f64>>,
    pub self_index: usize,
    pub ability_index: usize,
    #[serde(default)]
    pub ability_ref: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    /// Row-major: one inner array per output unit.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
    pub activation: ActivationSpec,
}

/// One activation for the whole layer, or one per unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActivationSpec {
    Uniform(Activation),
    PerUnit(Vec<Activation>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    Linear {
        matrix: Vec<Vec<f64>>,
    },
    Dyad {
        r0: f64,
        r1: f64,
        influences: InfluencesSpec,
        biases: Vec<f64>,
        initial: Vec<f64>,
    },
    Identity {
        dim: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InfluencesSpec {
    /// Influence of partner affect `s1` on the agent.
    pub i10: InfluenceSpec,
    /// Influence of the agent's affect `s0` on the partner.
    pub i01: InfluenceSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InfluenceSpec {
    Linear { slope: f64 },
    Piecewise { points: Vec<[f64; 2]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    /// Which agent to run; may be omitted when there is only one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
    pub steps: usize,
    pub initial_stimulus: Vec<f64>,
    #[serde(default)]
    pub tracked_stimuli: Vec<usize>,
    #[serde(default)]
    pub rho_pairs: Vec<[usize; 2]>,
    #[serde(default)]
    pub core_value: usize,
    /// Absent means "not set in the file"; see [`RunSpec::sign_epsilon`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sign_epsilon: Option<f64>,
}

impl RunSpec {
    pub fn sign_epsilon(&self) -> f64 {
        self.sign_epsilon.unwrap_or(DEFAULT_SIGN_EPSILON)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiments {
    #[serde(default)]
    pub prosocial: Vec<ProsocialExperiment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProsocialExperiment {
    pub name: String,
    pub params: ProsocialParams,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown key at {path}")]
    UnknownKey { path: String },
    #[error("type mismatch at {path}: {message}")]
    TypeMismatch { path: String, message: String },
}

fn join_path(base: &str, key: &str) -> String {
    if base.is_empty() || base == "." {
        key.to_string()
    } else {
        format!("{base}.{key}")
    }
}

/// Strict parse: unknown keys are rejected and optional blocks defaulted.
pub fn parse_scenario(text: &str) -> std::result::Result<ScenarioDoc, ScenarioError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let doc: ScenarioDoc = match serde_path_to_error::deserialize(&mut de) {
        Ok(doc) => doc,
        Err(err) => {
            let path = err.path().to_string();
            let inner = err.into_inner();
            return Err(classify_json_error(path, inner));
        }
    };
    de.end().map_err(|e| classify_json_error(String::new(), e))?;
    Ok(doc)
}

fn classify_json_error(path: String, err: serde_json::Error) -> ScenarioError {
    use serde_json::error::Category;
    match err.classify() {
        Category::Syntax | Category::Eof | Category::Io => ScenarioError::Syntax {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        },
        Category::Data => {
            let message = err.to_string();
            let unknown = message
                .strip_prefix("unknown field `")
                .and_then(|rest| rest.split('`').next());
            match unknown {
                Some(key) => {
                    // the reported path already ends at the offending key
                    let path = if path.ends_with(key) { path } else { join_path(&path, key) };
                    ScenarioError::UnknownKey { path }
                }
                None => ScenarioError::TypeMismatch {
                    path: if path.is_empty() { ".".into() } else { path },
                    message,
                },
            }
        }
    }
}

/// Pretty-printed JSON with a trailing newline.
pub fn serialize_scenario(doc: &ScenarioDoc) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("scenario documents always serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub errors: Vec<(String, String)>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push((path.into(), message.into()));
    }
}

/// Walks a stack spec, reporting every shape problem. Returns the stack's
/// (input, output) dims when it is well formed.
fn validate_stack(layers: &[LayerSpec], path: &str, report: &mut ValidationReport) -> Option<(usize, usize)> {
    if layers.is_empty() {
        report.push(path, "stack needs at least one layer");
        return None;
    }
    let mut ok = true;
    let mut dims: Vec<(usize, usize)> = Vec::with_capacity(layers.len());
    for (k, layer) in layers.iter().enumerate() {
        let lp = format!("{path}[{k}]");
        let rows = layer.weights.len();
        let cols = layer.weights.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            report.push(format!("{lp}.weights"), "weights must be a non-empty matrix");
            ok = false;
            continue;
        }
        if let Some(r) = layer.weights.iter().position(|row| row.len() != cols) {
            report.push(
                format!("{lp}.weights[{r}]"),
                format!("ragged weights: expected {cols} columns, found {}", layer.weights[r].len()),
            );
            ok = false;
            continue;
        }
        if layer.bias.len() != rows {
            report.push(
                format!("{lp}.bias"),
                format!("bias length {} != weight rows {rows}", layer.bias.len()),
            );
            ok = false;
        }
        if let ActivationSpec::PerUnit(acts) = &layer.activation {
            if acts.len() != rows {
                report.push(
                    format!("{lp}.activation"),
                    format!("{} activations for {rows} units", acts.len()),
                );
                ok = false;
            }
        }
        if layer.weights.iter().flatten().chain(&layer.bias).any(|x| !x.is_finite()) {
            report.push(lp.clone(), "non-finite weight or bias");
            ok = false;
        }
        dims.push((cols, rows));
    }
    if dims.len() != layers.len() {
        return None;
    }
    for k in 1..dims.len() {
        if dims[k].0 != dims[k - 1].1 {
            report.push(
                format!("{path}[{k}].weights"),
                format!("layer input {} != previous layer output {}", dims[k].0, dims[k - 1].1),
            );
            ok = false;
        }
    }
    ok.then(|| (dims[0].0, dims[dims.len() - 1].1))
}

/// Returns (action dim, stimulus dim) for a well-formed environment.
fn validate_environment(env: &EnvironmentSpec, path: &str, report: &mut ValidationReport) -> Option<(usize, usize)> {
    match env {
        EnvironmentSpec::Identity { dim } => {
            if *dim == 0 {
                report.push(format!("{path}.identity.dim"), "dim must be positive");
                return None;
            }
            Some((*dim, *dim))
        }
        EnvironmentSpec::Linear { matrix } => {
            let rows = matrix.len();
            let cols = matrix.first().map_or(0, Vec::len);
            if rows == 0 || cols == 0 {
                report.push(format!("{path}.linear.matrix"), "matrix must be non-empty");
                return None;
            }
            if let Some(r) = matrix.iter().position(|row| row.len() != cols) {
                report.push(format!("{path}.linear.matrix[{r}]"), "ragged matrix");
                return None;
            }
            if matrix.iter().flatten().any(|x| !x.is_finite()) {
                report.push(format!("{path}.linear.matrix"), "non-finite entry");
                return None;
            }
            Some((cols, rows))
        }
        EnvironmentSpec::Dyad {
            r0,
            r1,
            influences,
            biases,
            initial,
        } => {
            let mut ok = true;
            let dp = format!("{path}.dyad");
            if biases.len() != 2 {
                report.push(format!("{dp}.biases"), format!("expected 2 biases, found {}", biases.len()));
                ok = false;
            }
            if initial.len() != 2 {
                report.push(format!("{dp}.initial"), format!("expected 2 initial values, found {}", initial.len()));
                ok = false;
            }
            if [*r0, *r1].iter().chain(biases).chain(initial).any(|x| !x.is_finite()) {
                report.push(dp.clone(), "non-finite coefficient");
                ok = false;
            }
            for (name, inf) in [("i10", &influences.i10), ("i01", &influences.i01)] {
                if let Err(e) = influence(inf) {
                    report.push(format!("{dp}.influences.{name}"), e.to_string());
                    ok = false;
                }
            }
            ok.then_some((1, 2))
        }
    }
}

/// Checks every cross-dimension and index invariant the engine relies on.
pub fn validate(doc: &ScenarioDoc) -> ValidationReport {
    let mut report = ValidationReport::default();
    if doc.version != SCENARIO_VERSION {
        report.push("version", format!("unsupported version {}, expected {SCENARIO_VERSION}", doc.version));
    }
    if doc.agents.is_empty() {
        report.push("agents", "at least one agent is required");
    }

    let mut agent_dims = BTreeMap::new();
    for (name, spec) in &doc.agents {
        if let Some(dims) = validate_agent(spec, &format!("agents.{name}"), &mut report) {
            agent_dims.insert(name.as_str(), dims);
        }
    }

    let env = validate_environment(&doc.environment, "environment", &mut report);
    let perceived = doc
        .perceived_environment
        .as_ref()
        .map(|e| validate_environment(e, "perceived_environment", &mut report));

    if let Err(e) = EmotionTable::new(doc.emotion_table.clone(), doc.run.sign_epsilon()) {
        let path = if doc.run.sign_epsilon() > 0.0 { "emotion_table" } else { "run.sign_epsilon" };
        report.push(path, e.to_string());
    }

    let selected = match selected_agent(doc) {
        Ok(name) => Some(name),
        Err(msg) => {
            report.push("run.agent", msg);
            None
        }
    };
    if let Some(dims) = selected.as_deref().and_then(|n| agent_dims.get(n)) {
        let AgentDims {
            c_in,
            j_in,
            v_dim,
            d_out,
        } = *dims;
        if doc.run.initial_stimulus.len() != c_in {
            report.push(
                "run.initial_stimulus",
                format!("length {} != classification input {c_in}", doc.run.initial_stimulus.len()),
            );
        }
        if doc.run.initial_stimulus.iter().any(|x| !x.is_finite()) {
            report.push("run.initial_stimulus", "non-finite value");
        }
        let envs = [("environment", env), ("perceived_environment", perceived.flatten())];
        for (path, dims) in envs {
            if let Some((action, stimulus)) = dims {
                if action != d_out {
                    report.push(path, format!("accepts {action} actions but the agent emits {d_out}"));
                }
                if stimulus != c_in {
                    report.push(path, format!("emits {stimulus} stimuli but the agent reads {c_in}"));
                }
            }
        }
        for (k, &i) in doc.run.tracked_stimuli.iter().enumerate() {
            if i >= j_in {
                report.push(format!("run.tracked_stimuli[{k}]"), format!("index {i} out of range {j_in}"));
            }
        }
        let last = last_layer_dims(&doc.agents[selected.as_deref().unwrap_or_default()]);
        let mut pairs: Vec<[usize; 2]> = doc.run.rho_pairs.clone();
        if let [s1, s2, ..] = doc.run.tracked_stimuli[..] {
            pairs.push([s1, s2]);
        }
        for [i, j] in pairs {
            if i >= last.0 || j >= last.1 {
                report.push("run.rho_pairs", format!("pair ({i}, {j}) outside last classification layer {}x{}", last.1, last.0));
            }
        }
        if doc.run.core_value >= v_dim {
            report.push("run.core_value", format!("index {} out of range {v_dim}", doc.run.core_value));
        }
    }

    if let Some(exp) = &doc.experiments {
        for (k, e) in exp.prosocial.iter().enumerate() {
            if let Err(err) = e.params.validate() {
                report.push(format!("experiments.prosocial[{k}].params"), err.to_string());
            }
        }
    }
    report
}

#[derive(Debug, Clone, Copy)]
struct AgentDims {
    c_in: usize,
    j_in: usize,
    v_dim: usize,
    d_out: usize,
}

fn last_layer_dims(spec: &AgentSpec) -> (usize, usize) {
    let last = &spec.classification[spec.classification.len() - 1];
    (last.weights.first().map_or(0, Vec::len), last.weights.len())
}

fn validate_agent(spec: &AgentSpec, path: &str, report: &mut ValidationReport) -> Option<AgentDims> {
    let c = validate_stack(&spec.classification, &format!("{path}.classification"), report);
    let j = validate_stack(&spec.judgement, &format!("{path}.judgement"), report);
    let d = validate_stack(&spec.decision, &format!("{path}.decision"), report);
    let (c, j, d) = (c?, j?, d?);
    let mut ok = true;
    if j.0 != c.1 {
        report.push(
            format!("{path}.judgement"),
            format!("judgement input {} != classification output {}", j.0, c.1),
        );
        ok = false;
    }
    if d.0 != j.1 {
        report.push(
            format!("{path}.decision"),
            format!("decision input {} != judgement output {}", d.0, j.1),
        );
        ok = false;
    }
    let n = j.0;
    if let Some(s_ref) = &spec.s_ref {
        if s_ref.len() != n {
            report.push(format!("{path}.s_ref"), format!("length {} != judgement input {n}", s_ref.len()));
            ok = false;
        }
        if s_ref.iter().any(|x| !x.is_finite()) {
            report.push(format!("{path}.s_ref"), "non-finite value");
            ok = false;
        }
    }
    for (key, index) in [("self_index", spec.self_index), ("ability_index", spec.ability_index)] {
        if index >= n {
            report.push(format!("{path}.{key}"), format!("index {index} out of range {n}"));
            ok = false;
        }
    }
    if spec.self_index == spec.ability_index {
        report.push(
            format!("{path}.ability_index"),
            "Agent invariant: self_index and ability_index must differ",
        );
        ok = false;
    }
    if !spec.ability_ref.is_finite() {
        report.push(format!("{path}.ability_ref"), "non-finite value");
        ok = false;
    }
    if let Some(labels) = &spec.value_labels {
        if labels.len() != j.1 {
            report.push(format!("{path}.value_labels"), format!("{} labels for {} core values", labels.len(), j.1));
            ok = false;
        }
    }
    if let Some(labels) = &spec.action_labels {
        if labels.len() != d.1 {
            report.push(format!("{path}.action_labels"), format!("{} labels for {} actions", labels.len(), d.1));
            ok = false;
        }
    }
    ok.then_some(AgentDims {
        c_in: c.0,
        j_in: n,
        v_dim: j.1,
        d_out: d.1,
    })
}

fn selected_agent(doc: &ScenarioDoc) -> std::result::Result<String, String> {
    match &doc.run.agent {
        Some(name) if doc.agents.contains_key(name) => Ok(name.clone()),
        Some(name) => Err(format!("no agent named `{name}`")),
        None if doc.agents.len() == 1 => Ok(doc.agents.keys().next().cloned().unwrap_or_default()),
        None => Err("several agents defined; run.agent must name one".into()),
    }
}

fn layer(spec: &LayerSpec) -> Result<Layer> {
    let weights = DenseMatrix::from_rows(&spec.weights)?;
    let acts = match &spec.activation {
        ActivationSpec::Uniform(a) => vec![*a; weights.rows()],
        ActivationSpec::PerUnit(list) => list.clone(),
    };
    Layer::new(weights, spec.bias.clone(), acts)
}

fn stack(specs: &[LayerSpec]) -> Result<NetworkStack> {
    NetworkStack::new(specs.iter().map(layer).collect::<Result<_>>()?)
}

impl AgentSpec {
    pub fn build(&self) -> Result<Agent> {
        let mut agent = Agent::new(
            stack(&self.classification)?,
            stack(&self.judgement)?,
            stack(&self.decision)?,
            self.self_index,
            self.ability_index,
        )?;
        if let Some(s_ref) = &self.s_ref {
            agent = agent.with_s_ref(DenseVector::new(s_ref.clone())?)?;
        }
        agent = agent.with_ability_ref(self.ability_ref)?;
        if let Some(labels) = &self.value_labels {
            agent = agent.with_value_labels(labels.clone())?;
        }
        if let Some(labels) = &self.action_labels {
            agent = agent.with_action_labels(labels.clone())?;
        }
        Ok(agent)
    }

    /// Scenario entry for an agent built from existing stacks.
    pub fn from_stacks(c: &NetworkStack, j: &NetworkStack, d: &NetworkStack, self_index: usize, ability_index: usize) -> Self {
        Self {
            classification: layer_specs(c),
            judgement: layer_specs(j),
            decision: layer_specs(d),
            s_ref: None,
            self_index,
            ability_index,
            ability_ref: 0.0,
            value_labels: None,
            action_labels: None,
        }
    }
}

fn layer_specs(stack: &NetworkStack) -> Vec<LayerSpec> {
    stack
        .layers()
        .iter()
        .map(|l| {
            let acts = l.activations();
            let activation = if acts.iter().all(|a| *a == acts[0]) {
                ActivationSpec::Uniform(acts[0])
            } else {
                ActivationSpec::PerUnit(acts.to_vec())
            };
            LayerSpec {
                weights: l.weights().to_rows(),
                bias: l.bias().to_vec(),
                activation,
            }
        })
        .collect()
}

fn influence(spec: &InfluenceSpec) -> Result<InfluenceFunction> {
    match spec {
        InfluenceSpec::Linear { slope } => {
            if !slope.is_finite() {
                return Err(Error::NonFinite {
                    context: "influence slope".into(),
                });
            }
            Ok(InfluenceFunction::Linear { slope: *slope })
        }
        InfluenceSpec::Piecewise { points } => {
            InfluenceFunction::piecewise(points.iter().map(|[x, y]| (*x, *y)).collect())
        }
    }
}

impl EnvironmentSpec {
    pub fn build(&self) -> Result<Environment> {
        match self {
            EnvironmentSpec::Identity { dim } => Ok(Environment::Identity(*dim)),
            EnvironmentSpec::Linear { matrix } => Ok(Environment::Linear(DenseMatrix::from_rows(matrix)?)),
            EnvironmentSpec::Dyad {
                r0,
                r1,
                influences,
                biases,
                initial,
            } => {
                let two = |v: &[f64], what: &str| -> Result<[f64; 2]> {
                    <[f64; 2]>::try_from(v).map_err(|_| Error::dims(what, 2, v.len()))
                };
                let [b_j0, b_j1] = two(biases, "dyad biases")?;
                let state = two(initial, "dyad initial state")?;
                if !(r0.is_finite() && r1.is_finite() && b_j0.is_finite() && b_j1.is_finite())
                    || state.iter().any(|x| !x.is_finite())
                {
                    return Err(Error::NonFinite {
                        context: "dyad coefficients".into(),
                    });
                }
                Ok(Environment::dyad(
                    DyadParams {
                        r0: *r0,
                        r1: *r1,
                        i10: influence(&influences.i10)?,
                        i01: influence(&influences.i01)?,
                        b_j0,
                        b_j1,
                    },
                    state,
                ))
            }
        }
    }
}

/// Everything needed to call [`crate::environment::run_loop`].
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub agent_name: String,
    pub agent: Agent,
    pub environment: Environment,
    pub perceived_environment: Option<Environment>,
    pub initial_stimulus: DenseVector,
    pub settings: RunSettings,
}

impl Scenario {
    /// Builds the selected agent and environments. Shape problems surface as
    /// [`Error::DimensionMismatch`]; the run loop checks the agent/environment
    /// chain itself.
    pub fn build(doc: &ScenarioDoc) -> Result<Self> {
        let agent_name = selected_agent(doc).map_err(Error::InvalidParams)?;
        let agent = doc.agents[&agent_name].build()?;
        let environment = doc.environment.build()?;
        let perceived_environment = doc.perceived_environment.as_ref().map(|e| e.build()).transpose()?;
        let table = EmotionTable::new(doc.emotion_table.clone(), doc.run.sign_epsilon())?;
        Ok(Self {
            agent_name,
            agent,
            environment,
            perceived_environment,
            initial_stimulus: DenseVector::new(doc.run.initial_stimulus.clone())?,
            settings: RunSettings {
                steps: doc.run.steps,
                tracked: doc.run.tracked_stimuli.clone(),
                rho_pairs: doc.run.rho_pairs.iter().map(|[i, j]| (*i, *j)).collect(),
                core_value: doc.run.core_value,
                table,
            },
        })
    }

    pub fn run(&self) -> std::result::Result<Vec<TrajectoryRecord>, crate::environment::RunFailure> {
        crate::environment::run_loop(
            &self.agent,
            &self.environment,
            self.perceived_environment.as_ref(),
            &self.initial_stimulus,
            &self.settings,
        )
    }
}

/// Formats like C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    format_significant(x, 9)
}

pub fn format_significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("exponent");
    let negative = mantissa.starts_with('-');
    let digits_str: String = mantissa.chars().filter(char::is_ascii_digit).collect();
    let body = if exp < -4 || exp >= digits as i32 {
        let m = trim_fraction(&format!("{}.{}", &digits_str[..1], &digits_str[1..]));
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    } else if exp >= 0 {
        let split = exp as usize + 1;
        trim_fraction(&format!("{}.{}", &digits_str[..split], &digits_str[split..]))
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        trim_fraction(&format!("0.{zeros}{digits_str}"))
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

fn trim_fraction(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Column widths of a trajectory CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrajectoryLayout {
    pub s_tilde: usize,
    pub s: usize,
    pub v: usize,
    pub a: usize,
}

impl TrajectoryLayout {
    pub fn of(record: &TrajectoryRecord) -> Self {
        Self {
            s_tilde: record.s_tilde.len(),
            s: record.s_internal.len(),
            v: record.v.len(),
            a: record.a_tilde.len(),
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        let groups = [("s_tilde", self.s_tilde), ("s", self.s), ("v", self.v), ("a", self.a)];
        for (name, n) in groups {
            h.extend((0..n).map(|k| format!("{name}_{k}")));
        }
        h.push("emotions".into());
        h.push("surprise".into());
        h.extend((0..self.v).map(|k| format!("reward_{k}")));
        h
    }
}

struct Counting<W> {
    inner: W,
    bytes: usize,
}

impl<W: Write> Write for Counting<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.bytes += n;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Writes records as CSV (LF endings, 9 significant digits) and returns
/// the number of bytes written. The layout follows the first record; an
/// empty trajectory produces the fixed columns only.
pub fn write_trajectory<W: Write>(records: &[TrajectoryRecord], sink: W) -> io::Result<usize> {
    let layout = records.first().map(TrajectoryLayout::of).unwrap_or_default();
    let mut counting = Counting { inner: sink, bytes: 0 };
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(&mut counting);
        w.write_record(layout.header())?;
        for r in records {
            if TrajectoryLayout::of(r) != layout {
                return Err(io::Error::new(io::ErrorKind::InvalidData, format!("record t={} has inconsistent dimensions", r.t)));
            }
            let mut row = vec![r.t.to_string()];
            for v in [&r.s_tilde, &r.s_internal, &r.v, &r.a_tilde] {
                row.extend(v.iter().map(|x| format_sig9(*x)));
            }
            row.push(r.emotions.join(";"));
            row.push(r.surprise.map(format_sig9).unwrap_or_default());
            row.extend(r.reward.iter().map(|x| format_sig9(*x)));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(counting.bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "version": 1,
        "agents": {
            "solo": {
                "classification": [{"weights": [[1,0],[0,1]], "bias": [0,0], "activation": "identity"}],
                "judgement": [{"weights": [[1,0],[0,1]], "bias": [0,0], "activation": "identity"}],
                "decision": [{"weights": [[1,0],[0,1]], "bias": [0,0], "activation": "identity"}],
                "self_index": 0,
                "ability_index": 1
            }
        },
        "environment": {"identity": {"dim": 2}},
        "run": {"steps": 1, "initial_stimulus": [0.5, -0.5]}
    }"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let doc = parse_scenario(MINIMAL).unwrap();
        assert_eq!(doc.emotion_table, default_rows());
        assert_eq!(doc.run.sign_epsilon(), 1e-9);
        assert!(doc.perceived_environment.is_none());
        assert!(validate(&doc).ok(), "{:?}", validate(&doc));
        let scenario = Scenario::build(&doc).unwrap();
        assert_eq!(scenario.run().unwrap().len(), 2);
    }

    #[test]
    fn unknown_key_is_located() {
        let text = MINIMAL.replacen("\"weights\"", "\"wieghts\"", 1);
        match parse_scenario(&text) {
            Err(ScenarioError::UnknownKey { path }) => {
                assert_eq!(path, "agents.solo.classification[0].wieghts");
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = MINIMAL.replacen("\"steps\"", "\"stpes\"", 1);
        assert!(matches!(parse_scenario(&text), Err(ScenarioError::UnknownKey { path }) if path == "run.stpes"));
    }

    #[test]
    fn syntax_and_type_errors() {
        assert!(matches!(parse_scenario("{\"version\": 1,"), Err(ScenarioError::Syntax { line: 1, .. })));
        let text = MINIMAL.replacen("\"steps\": 1", "\"steps\": \"one\"", 1);
        match parse_scenario(&text) {
            Err(ScenarioError::TypeMismatch { path, .. }) => assert_eq!(path, "run.steps"),
            other => panic!("unexpected {other:?}"),
        }
        let text = MINIMAL.replacen("\"identity\"}]", "\"softplus\"}]", 1);
        assert!(matches!(parse_scenario(&text), Err(ScenarioError::TypeMismatch { .. })));
    }

    #[test]
    fn bias_length_is_a_validation_error() {
        let text = MINIMAL.replacen("\"bias\": [0,0]", "\"bias\": [0]", 1);
        let doc = parse_scenario(&text).unwrap();
        let report = validate(&doc);
        assert!(!report.ok());
        assert_eq!(report.errors[0].0, "agents.solo.classification[0].bias");
        assert!(Scenario::build(&doc).unwrap_err().is_dimension_mismatch());
    }

    #[test]
    fn judgement_mismatch_reported_at_stack() {
        let mut doc = parse_scenario(MINIMAL).unwrap();
        let j = &mut doc.agents.get_mut("solo").unwrap().judgement[0];
        j.weights = vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let report = validate(&doc);
        assert!(report.errors.iter().any(|(p, _)| p == "agents.solo.judgement"), "{report:?}");
    }

    #[test]
    fn self_equals_ability_rejected() {
        let mut doc = parse_scenario(MINIMAL).unwrap();
        doc.agents.get_mut("solo").unwrap().ability_index = 0;
        let report = validate(&doc);
        assert!(report.errors.iter().any(|(_, m)| m.contains("Agent invariant")), "{report:?}");
    }

    #[test]
    fn other_invariants() {
        let mut doc = parse_scenario(MINIMAL).unwrap();
        doc.version = 2;
        doc.run.tracked_stimuli = vec![0, 5];
        doc.run.core_value = 2;
        doc.run.sign_epsilon = Some(0.0);
        doc.environment = EnvironmentSpec::Identity { dim: 3 };
        let paths: Vec<String> = validate(&doc).errors.into_iter().map(|e| e.0).collect();
        for p in ["version", "run.tracked_stimuli[1]", "run.core_value", "run.sign_epsilon", "environment", "run.rho_pairs"] {
            assert!(paths.iter().any(|q| q == p), "missing {p} in {paths:?}");
        }
    }

    #[test]
    fn round_trip_is_stable() {
        let doc = parse_scenario(MINIMAL).unwrap();
        let text = serialize_scenario(&doc);
        let again = parse_scenario(&text).unwrap();
        assert_eq!(doc, again);
        assert_eq!(serialize_scenario(&again), text);
    }

    #[test]
    fn significant_digit_formatting() {
        let cases = [
            (95.1, "95.1"),
            (-9.8, "-9.8"),
            (100.0, "100"),
            (0.0, "0"),
            (1.0 / 3.0, "0.333333333"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (0.0001, "0.0001"),
            (0.00001234, "1.234e-05"),
            (-2.5e-7, "-2.5e-07"),
            (9.9999999999, "10"),
            (80.39999999999999, "80.4"),
        ];
        for (x, s) in cases {
            assert_eq!(format_sig9(x), s, "{x}");
        }
    }

    fn record(t: usize, emotions: &[&str], surprise: Option<f64>) -> TrajectoryRecord {
        let v = |x: &[f64]| DenseVector::new(x.to_vec()).unwrap();
        TrajectoryRecord {
            t,
            s_tilde: v(&[1.0, 2.0]),
            s_internal: v(&[1.0, 2.0]),
            v: v(&[0.5]),
            a_tilde: v(&[0.25]),
            emotions: emotions.iter().map(|s| s.to_string()).collect(),
            surprise,
            reward: v(&[0.0]),
        }
    }

    #[test]
    fn trajectory_csv() {
        let mut buf = Vec::new();
        let n = write_trajectory(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,emotions,surprise\n");
        assert_eq!(n, 20);

        let mut buf = Vec::new();
        let recs = [record(0, &["Fear", "Disgust"], None), record(1, &[], Some(0.125))];
        let n = write_trajectory(&recs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(n, text.len());
        assert_eq!(
            text,
            "t,s_tilde_0,s_tilde_1,s_0,s_1,v_0,a_0,emotions,surprise,reward_0\n\
             0,1,2,1,2,0.5,0.25,Fear;Disgust,,0\n\
             1,1,2,1,2,0.5,0.25,,0.125,0\n"
        );
    }
}
