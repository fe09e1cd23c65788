//! The `share` command line.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use share_core::appraisal::Percept;
use share_core::environment::{appraise_percept, step_dyad, Environment, TrajectoryRecord};
use share_core::neuroware::{generate_profile, render_heatmap, ProfileKind, ProfileParams};
use share_core::scenario::{
    format_sig9, parse_scenario, validate, write_trajectory, AgentSpec, Scenario, ScenarioDoc,
};
use share_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERIC: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

pub const SIGN_EPS_ENV: &str = "SHARE_SIGN_EPS";

#[derive(Debug, Parser)]
#[command(name = "share", version, about = "Appraisal-driven emotion simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the agent-environment loop and write the trajectory as CSV.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        /// Write `<stem>.csv` here and print the emotion summary instead.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        eps: EpsArg,
    },
    /// Print the appraisal snapshot at one step of the run.
    Appraise {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        at_step: usize,
        #[command(flatten)]
        eps: EpsArg,
    },
    /// List matching emotions with their specificity.
    Emotions {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        at_step: usize,
        #[command(flatten)]
        eps: EpsArg,
    },
    /// Render one layer of an agent's neuroware as an SVG heatmap.
    Render {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        block: Block,
        /// Defaults to the scenario's run agent.
        #[arg(long)]
        agent: Option<String>,
        /// Zero-based layer within the block.
        #[arg(long, default_value_t = 0)]
        layer: usize,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a neuroware archetype as a scenario fragment.
    Profiles {
        #[arg(long)]
        kind: ProfileKind,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write one heatmap per block into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Iterate the dyad equations alone and print `s0,s1` per step.
    Dyad {
        scenario: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct EpsArg {
    /// Sign tolerance; beats the file, which beats SHARE_SIGN_EPS.
    #[arg(long = "sign-eps")]
    pub sign_eps: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Block {
    #[value(name = "C")]
    C,
    #[value(name = "J")]
    J,
    #[value(name = "D")]
    D,
}

/// A failed command: exit code plus a one-line diagnostic per entry.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub messages: Vec<String>,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            messages: vec![message.into()],
        }
    }

    fn numeric(err: &Error) -> Self {
        Self::new(EXIT_NUMERIC, format!("runtime error: {err}"))
    }
}

type CmdResult = Result<(), Failure>;

/// Parses `argv` (including the program name) and runs it. Data goes to
/// `out`, diagnostics to `err`.
pub fn run_command<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let env_eps = std::env::var(SIGN_EPS_ENV).ok();
    run_command_with_env(argv, env_eps.as_deref(), out, err)
}

/// Like [`run_command`] with the `SHARE_SIGN_EPS` value passed explicitly.
pub fn run_command_with_env<I, T>(argv: I, env_eps: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
            } else {
                let _ = out.write_all(text.as_bytes());
            }
            return code;
        }
    };
    match dispatch(cli.command, env_eps, out) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            for m in &f.messages {
                let _ = writeln!(err, "share: {m}");
            }
            f.code
        }
    }
}

fn dispatch(command: Command, env_eps: Option<&str>, out: &mut dyn Write) -> CmdResult {
    match command {
        Command::Run {
            scenario,
            steps,
            out: dir,
            eps,
        } => cmd_run(&scenario, steps, dir.as_deref(), eps.sign_eps, env_eps, out),
        Command::Appraise { scenario, at_step, eps } => {
            cmd_appraise(&scenario, at_step, eps.sign_eps, env_eps, out)
        }
        Command::Emotions { scenario, at_step, eps } => {
            cmd_emotions(&scenario, at_step, eps.sign_eps, env_eps, out)
        }
        Command::Render {
            scenario,
            block,
            agent,
            layer,
            out: file,
        } => cmd_render(&scenario, block, agent.as_deref(), layer, file.as_deref(), out),
        Command::Profiles { kind, n, seed, out: dir } => cmd_profiles(kind, n, seed, dir.as_deref(), out),
        Command::Dyad { scenario, steps } => cmd_dyad(&scenario, steps, out),
    }
}

fn write_out(out: &mut dyn Write, bytes: &[u8]) -> CmdResult {
    out.write_all(bytes)
        .and_then(|()| out.flush())
        .map_err(|e| Failure::new(EXIT_NUMERIC, format!("cannot write output: {e}")))
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    fs::write(path, bytes).map_err(|e| Failure::new(EXIT_NUMERIC, format!("cannot write {}: {e}", path.display())))
}

/// Reads, parses and validates a scenario, applying flag and environment
/// overrides. Parse and validation problems exit with code 1.
fn load(path: &Path, steps: Option<usize>, flag_eps: Option<f64>, env_eps: Option<&str>) -> Result<ScenarioDoc, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_INVALID, format!("cannot read {}: {e}", path.display())))?;
    let mut doc = parse_scenario(&text).map_err(|e| Failure::new(EXIT_INVALID, format!("{}: {e}", path.display())))?;
    if let Some(steps) = steps {
        doc.run.steps = steps;
    }
    if let Some(eps) = flag_eps {
        doc.run.sign_epsilon = Some(eps);
    } else if doc.run.sign_epsilon.is_none() {
        if let Some(raw) = env_eps {
            let eps = raw
                .trim()
                .parse::<f64>()
                .map_err(|_| Failure::new(EXIT_USAGE, format!("{SIGN_EPS_ENV}={raw:?} is not a number")))?;
            doc.run.sign_epsilon = Some(eps);
        }
    }
    let report = validate(&doc);
    if !report.ok() {
        return Err(Failure {
            code: EXIT_INVALID,
            messages: report
                .errors
                .iter()
                .map(|(p, m)| format!("{}: error at {p}: {m}", path.display()))
                .collect(),
        });
    }
    Ok(doc)
}

fn build(doc: &ScenarioDoc, path: &Path) -> Result<Scenario, Failure> {
    Scenario::build(doc).map_err(|e| Failure::new(EXIT_INVALID, format!("{}: {e}", path.display())))
}

fn csv_bytes(records: &[TrajectoryRecord]) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    write_trajectory(records, &mut buf).map_err(|e| Failure::new(EXIT_NUMERIC, format!("cannot write trajectory: {e}")))?;
    Ok(buf)
}

fn cmd_run(
    path: &Path,
    steps: Option<usize>,
    dir: Option<&Path>,
    flag_eps: Option<f64>,
    env_eps: Option<&str>,
    out: &mut dyn Write,
) -> CmdResult {
    let doc = load(path, steps, flag_eps, env_eps)?;
    let scenario = build(&doc, path)?;
    let (records, failure) = match scenario.run() {
        Ok(records) => (records, None),
        Err(f) => (f.records, Some(f.error)),
    };
    let csv = csv_bytes(&records)?;
    match dir {
        None => write_out(out, &csv)?,
        Some(dir) => {
            fs::create_dir_all(dir)
                .map_err(|e| Failure::new(EXIT_NUMERIC, format!("cannot create {}: {e}", dir.display())))?;
            let stem = path.file_stem().map_or("trajectory".into(), |s| s.to_string_lossy());
            write_file(&dir.join(format!("{stem}.csv")), &csv)?;
            let mut summary = String::new();
            for r in &records {
                let labels = if r.emotions.is_empty() { "-".to_string() } else { r.emotions.join(";") };
                summary.push_str(&format!("t={} {labels}\n", r.t));
            }
            write_out(out, summary.as_bytes())?;
        }
    }
    match failure {
        None => Ok(()),
        Some(e) => Err(Failure::numeric(&e)),
    }
}

/// Percept at step `at_step` of the scenario's run.
fn percept_at(scenario: &Scenario, at_step: usize) -> Result<Percept, Failure> {
    let mut probe = scenario.clone();
    probe.settings.steps = at_step;
    probe.settings.tracked.clear();
    let records = probe.run().map_err(|f| Failure::numeric(&f.error))?;
    let last = records.last().expect("a run always records t = 0");
    Percept::new(&scenario.agent, &last.s_tilde).map_err(|e| Failure::numeric(&e))
}

fn cmd_appraise(path: &Path, at_step: usize, flag_eps: Option<f64>, env_eps: Option<&str>, out: &mut dyn Write) -> CmdResult {
    let doc = load(path, None, flag_eps, env_eps)?;
    let mut scenario = build(&doc, path)?;
    let percept = percept_at(&scenario, at_step)?;
    if scenario.settings.tracked.is_empty() {
        scenario.settings.tracked = (0..scenario.agent.stimulus_dim()).collect();
    }
    let (snap, _) = appraise_percept(&scenario.agent, &percept, &scenario.settings).map_err(|e| Failure::numeric(&e))?;

    let mut text = String::from("quantity,i,j,c,value\n");
    for (c, x) in snap.alpha.iter().enumerate() {
        text.push_str(&format!("alpha,,,{c},{}\n", format_sig9(*x)));
    }
    for (c, x) in snap.beta.iter().enumerate() {
        text.push_str(&format!("beta,,,{c},{}\n", format_sig9(*x)));
    }
    for st in &snap.stimuli {
        for (c, x) in st.eta.iter().enumerate() {
            text.push_str(&format!("eta,{},,{c},{}\n", st.index, format_sig9(*x)));
        }
        text.push_str(&format!("delta_s,{},,,{}\n", st.index, format_sig9(st.delta_s)));
        for (c, x) in st.gamma.iter().enumerate() {
            text.push_str(&format!("gamma,{},,{c},{}\n", st.index, format_sig9(*x)));
        }
    }
    for ((i, j), x) in &snap.rho {
        text.push_str(&format!("rho,{i},{j},,{}\n", format_sig9(*x)));
    }
    write_out(out, text.as_bytes())
}

fn cmd_emotions(path: &Path, at_step: usize, flag_eps: Option<f64>, env_eps: Option<&str>, out: &mut dyn Write) -> CmdResult {
    let doc = load(path, None, flag_eps, env_eps)?;
    let scenario = build(&doc, path)?;
    let percept = percept_at(&scenario, at_step)?;
    let (_, matches) = appraise_percept(&scenario.agent, &percept, &scenario.settings).map_err(|e| Failure::numeric(&e))?;
    let mut text = String::from("emotion,specificity\n");
    for m in matches {
        text.push_str(&format!("{},{}\n", m.label, m.specificity));
    }
    write_out(out, text.as_bytes())
}

fn cmd_render(
    path: &Path,
    block: Block,
    agent: Option<&str>,
    layer: usize,
    file: Option<&Path>,
    out: &mut dyn Write,
) -> CmdResult {
    let doc = load(path, None, None, None)?;
    let name = match agent {
        Some(name) => name.to_string(),
        None => build(&doc, path)?.agent_name,
    };
    let spec = doc
        .agents
        .get(&name)
        .ok_or_else(|| Failure::new(EXIT_INVALID, format!("{}: no agent named `{name}`", path.display())))?;
    let built = spec.build().map_err(|e| Failure::new(EXIT_INVALID, format!("{}: {e}", path.display())))?;
    let stack = match block {
        Block::C => &built.classification,
        Block::J => &built.judgement,
        Block::D => &built.decision,
    };
    let l = stack.layers().get(layer).ok_or_else(|| {
        Failure::new(
            EXIT_USAGE,
            format!("--layer {layer} out of range: block has {} layers", stack.depth()),
        )
    })?;
    let svg = render_heatmap(l.weights(), l.bias()).map_err(|e| Failure::numeric(&e))?;
    match file {
        Some(file) => write_file(file, svg.as_bytes()),
        None => write_out(out, svg.as_bytes()),
    }
}

fn cmd_profiles(kind: ProfileKind, n: usize, seed: u64, dir: Option<&Path>, out: &mut dyn Write) -> CmdResult {
    let params = ProfileParams {
        n,
        seed,
        ..ProfileParams::default()
    };
    let profile = generate_profile(kind, &params).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
    let spec = AgentSpec::from_stacks(&profile.classification, &profile.judgement, &profile.decision, 0, 1);
    let agents = BTreeMap::from([(profile.name.clone(), spec)]);
    let fragment = BTreeMap::from([("agents", agents)]);
    let mut text = serde_json::to_string_pretty(&fragment).expect("agent specs serialize");
    text.push('\n');
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| Failure::new(EXIT_NUMERIC, format!("cannot create {}: {e}", dir.display())))?;
        for (block, layer) in profile.blocks() {
            let svg = render_heatmap(layer.weights(), layer.bias()).map_err(|e| Failure::numeric(&e))?;
            write_file(&dir.join(format!("{}_{block}.svg", profile.name)), svg.as_bytes())?;
        }
    }
    write_out(out, text.as_bytes())
}

fn cmd_dyad(path: &Path, steps: Option<usize>, out: &mut dyn Write) -> CmdResult {
    let doc = load(path, steps, None, None)?;
    let mut env = doc
        .environment
        .build()
        .map_err(|e| Failure::new(EXIT_INVALID, format!("{}: {e}", path.display())))?;
    let Some([s0, s1]) = env.state() else {
        return Err(Failure::new(
            EXIT_INVALID,
            format!("{}: error at environment: not a dyad environment", path.display()),
        ));
    };
    debug_assert!(matches!(env, Environment::Dyad { .. }));
    let mut text = format!("s0,s1\n{},{}\n", format_sig9(s0), format_sig9(s1));
    for _ in 0..doc.run.steps {
        let (a, b) = step_dyad(&mut env).map_err(|e| Failure::numeric(&e))?;
        text.push_str(&format!("{},{}\n", format_sig9(a), format_sig9(b)));
    }
    write_out(out, text.as_bytes())
}
