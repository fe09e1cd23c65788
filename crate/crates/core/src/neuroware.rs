//! Archetypal weight/bias configurations ("neuroware") and heatmap
//! rendering of weight blocks.
//!
//! Profiles are generated, not tabulated: each kind is a seeded generator
//! with structural guarantees that [`check_structure`] verifies.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{Activation, DenseMatrix, DenseVector};
use crate::perception::{Layer, NetworkStack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProfileKind {
    Normal,
    Schizophrenia,
    Depression,
    Psychopathy,
    Ocd,
}

impl ProfileKind {
    pub const ALL: [ProfileKind; 5] = [
        ProfileKind::Normal,
        ProfileKind::Schizophrenia,
        ProfileKind::Depression,
        ProfileKind::Psychopathy,
        ProfileKind::Ocd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProfileKind::Normal => "normal",
            ProfileKind::Schizophrenia => "schizophrenia",
            ProfileKind::Depression => "depression",
            ProfileKind::Psychopathy => "psychopathy",
            ProfileKind::Ocd => "ocd",
        }
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProfileKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidParams(format!("unknown profile kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileParams {
    pub n: usize,
    /// Magnitude of the one-to-one (diagonal) associations.
    pub diag: f64,
    /// Magnitude bound of the off-diagonal priming background.
    pub bg: f64,
    pub bias_level: f64,
    pub seed: u64,
}

impl Default for ProfileParams {
    fn default() -> Self {
        Self {
            n: 4,
            diag: 1.0,
            bg: 0.05,
            bias_level: 0.05,
            seed: 0,
        }
    }
}

impl ProfileParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParams(format!("n must be at least 2, got {}", self.n)));
        }
        if ![self.diag, self.bg, self.bias_level].iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidParams("profile parameters must be finite".into()));
        }
        if self.bg < 0.0 || self.diag <= self.bg {
            return Err(Error::InvalidParams(format!(
                "need diag > bg >= 0, got diag={} bg={}",
                self.diag, self.bg
            )));
        }
        Ok(())
    }

    /// Background bound actually used: capped so every row of a normal
    /// matrix stays strictly diagonally dominant.
    pub fn effective_bg(&self) -> f64 {
        self.bg.min(0.9 * self.diag / (self.n - 1) as f64)
    }
}

/// Square single-layer C, J and D stacks for one archetype.
#[derive(Debug, Clone, PartialEq)]
pub struct NeurowareProfile {
    pub name: String,
    pub kind: ProfileKind,
    pub classification: NetworkStack,
    pub judgement: NetworkStack,
    pub decision: NetworkStack,
}

impl NeurowareProfile {
    pub fn blocks(&self) -> [(&'static str, &Layer); 3] {
        [
            ("C", &self.classification.layers()[0]),
            ("J", &self.judgement.layers()[0]),
            ("D", &self.decision.layers()[0]),
        ]
    }
}

/// Raw block before it becomes a layer.
#[derive(Debug, Clone)]
struct Block {
    w: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Block {
    fn into_stack(self) -> Result<NetworkStack> {
        let layer = Layer::uniform(DenseMatrix::from_rows(&self.w)?, self.b, Activation::Tanh)?;
        NetworkStack::new(vec![layer])
    }
}

/// Diagonal associations, uniform background in `[-bg, bg]` and mild
/// biases in `[-|bias_level|, |bias_level|]`.
fn normal_block(rng: &mut ChaCha8Rng, p: &ProfileParams, bg: f64) -> Block {
    let n = p.n;
    let level = p.bias_level.abs();
    let mut w = vec![vec![0.0; n]; n];
    for (r, row) in w.iter_mut().enumerate() {
        for (c, x) in row.iter_mut().enumerate() {
            let u: f64 = rng.gen_range(-1.0..=1.0);
            *x = if r == c { p.diag } else { bg * u };
        }
    }
    let b = (0..n).map(|_| level * rng.gen_range(-1.0..=1.0)).collect();
    Block { w, b }
}

fn pick_off_diagonal(rng: &mut ChaCha8Rng, n: usize, r: usize) -> usize {
    let c = rng.gen_range(0..n - 1);
    if c >= r {
        c + 1
    } else {
        c
    }
}

/// Rows whose strongest association points at another stimulus.
fn misassociate(rng: &mut ChaCha8Rng, block: &mut Block, diag: f64, keep_diag: f64) {
    let n = block.w.len();
    let mut rows: Vec<usize> = (0..n).collect();
    rows.shuffle(rng);
    for &r in rows.iter().take((n / 3).max(1)) {
        let c = pick_off_diagonal(rng, n, r);
        block.w[r][c] = diag;
        block.w[r][r] = keep_diag;
    }
}

pub fn generate_profile(kind: ProfileKind, p: &ProfileParams) -> Result<NeurowareProfile> {
    p.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let bg = p.effective_bg();
    let mut c = normal_block(&mut rng, p, bg);
    let mut j = normal_block(&mut rng, p, bg);
    let mut d = normal_block(&mut rng, p, bg);

    // modifications draw from a separate stream so shared blocks stay
    // identical to the normal profile for the same seed
    let mut mods = ChaCha8Rng::seed_from_u64(p.seed ^ 0x005e_ed0f_a7c4);
    match kind {
        ProfileKind::Normal => {}
        ProfileKind::Schizophrenia => {
            misassociate(&mut mods, &mut c, p.diag, 0.5 * p.diag);
            misassociate(&mut mods, &mut j, p.diag, 0.5 * p.diag);
            misassociate(&mut mods, &mut d, p.diag, 0.0);
        }
        ProfileKind::Depression => {
            // slight attentional modulation only
            for (r, row) in c.w.iter_mut().enumerate() {
                row[r] *= mods.gen_range(0.9..=1.0);
            }
            for block in [&mut j, &mut d] {
                for row in &mut block.w {
                    for x in row.iter_mut() {
                        *x *= 0.3;
                    }
                }
                for b in &mut block.b {
                    let u: f64 = mods.gen_range(0.0..=1.0);
                    *b = -(p.bias_level.abs() + 0.25 * p.diag * (1.0 + u));
                }
            }
        }
        ProfileKind::Psychopathy => {
            for (r, row) in c.w.iter_mut().enumerate() {
                for (col, x) in row.iter_mut().enumerate() {
                    if r != col {
                        *x *= 0.25;
                    }
                }
            }
            let dominant = mods.gen_range(0..p.n);
            for (r, row) in j.w.iter_mut().enumerate() {
                if r != dominant {
                    for x in row.iter_mut() {
                        *x *= 0.25;
                    }
                }
            }
            for (r, row) in d.w.iter_mut().enumerate() {
                for (col, x) in row.iter_mut().enumerate() {
                    if r != col {
                        *x = 0.0;
                    }
                }
            }
            let mut kept = 0;
            for r in 0..p.n {
                if mods.gen_bool(0.5) {
                    kept += 1;
                } else {
                    d.w[r][r] = 0.0;
                }
            }
            if kept == 0 {
                d.w[0][0] = p.diag;
            }
            let r = mods.gen_range(0..p.n);
            let col = pick_off_diagonal(&mut mods, p.n, r);
            d.w[r][col] = p.diag * mods.gen_range(0.5..=1.0);
        }
        ProfileKind::Ocd => {
            for block in [&mut j, &mut d] {
                let r = mods.gen_range(0..p.n);
                let col = pick_off_diagonal(&mut mods, p.n, r);
                block.w[r][col] = 1.5 * p.diag;
            }
        }
    }

    Ok(NeurowareProfile {
        name: format!("{kind}-n{}-seed{}", p.n, p.seed),
        kind,
        classification: c.into_stack()?,
        judgement: j.into_stack()?,
        decision: d.into_stack()?,
    })
}

fn off_diagonal(w: &DenseMatrix) -> impl Iterator<Item = f64> + '_ {
    (0..w.rows()).flat_map(move |r| (0..w.cols()).filter(move |c| *c != r).map(move |c| w.get(r, c)))
}

pub fn strictly_diagonally_dominant(w: &DenseMatrix) -> bool {
    (0..w.rows()).all(|r| {
        let off: f64 = (0..w.cols()).filter(|c| *c != r).map(|c| w.get(r, c).abs()).sum();
        w.get(r, r).abs() > off
    })
}

fn has_offdiag_row_max(w: &DenseMatrix) -> bool {
    (0..w.rows()).any(|r| {
        let row = w.row(r);
        let (argmax, _) = row
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |best, (c, x)| if x.abs() > best.1 { (c, x.abs()) } else { best });
        argmax != r
    })
}

fn mean_abs(w: &DenseMatrix) -> f64 {
    w.as_slice().iter().map(|x| x.abs()).sum::<f64>() / w.as_slice().len() as f64
}

fn diag_mean(w: &DenseMatrix) -> f64 {
    (0..w.rows()).map(|r| w.get(r, r).abs()).sum::<f64>() / w.rows() as f64
}

/// Checks the structural guarantee of `profile.kind`, returning the first
/// violated property.
pub fn check_structure(profile: &NeurowareProfile, p: &ProfileParams) -> std::result::Result<(), String> {
    let [(_, c), (_, j), (_, d)] = profile.blocks();
    let n = p.n;
    for (name, layer) in profile.blocks() {
        if layer.weights().rows() != n || layer.weights().cols() != n || layer.bias().len() != n {
            return Err(format!("{name} block is not {n}x{n}"));
        }
    }
    match profile.kind {
        ProfileKind::Normal => {
            for (name, layer) in profile.blocks() {
                let w = layer.weights();
                if !strictly_diagonally_dominant(w) {
                    return Err(format!("{name} not strictly diagonally dominant"));
                }
                if (0..n).any(|r| w.get(r, r) != p.diag) {
                    return Err(format!("{name} diagonal differs from {}", p.diag));
                }
                if off_diagonal(w).any(|x| x.abs() > p.bg) {
                    return Err(format!("{name} background exceeds {}", p.bg));
                }
            }
        }
        ProfileKind::Schizophrenia => {
            for (name, layer) in profile.blocks() {
                if !has_offdiag_row_max(layer.weights()) {
                    return Err(format!("{name} has no row dominated off the diagonal"));
                }
            }
            if (0..n).all(|r| d.weights().get(r, r) != 0.0) {
                return Err("D keeps every on-diagonal association".into());
            }
        }
        ProfileKind::Depression => {
            let normal = generate_profile(ProfileKind::Normal, p).map_err(|e| e.to_string())?;
            let [_, (_, nj), (_, nd)] = normal.blocks();
            for ((name, layer), base) in [("J", j), ("D", d)].into_iter().zip([nj, nd]) {
                if layer.bias().iter().any(|b| *b > -p.bias_level.abs() || *b >= 0.0) {
                    return Err(format!("{name} bias above -|bias_level|"));
                }
                if mean_abs(layer.weights()) > 0.5 * mean_abs(base.weights()) {
                    return Err(format!("{name} weights not attenuated"));
                }
            }
        }
        ProfileKind::Psychopathy => {
            if off_diagonal(c.weights()).any(|x| x.abs() > 0.5 * p.bg) {
                return Err("C background not reduced".into());
            }
            let w = j.weights();
            let peak = w.max_abs();
            let dominant = (0..n)
                .filter(|&r| w.row(r).iter().fold(0.0f64, |m, x| m.max(x.abs())) >= 0.5 * peak)
                .count();
            if dominant != 1 {
                return Err(format!("J has {dominant} dominant rows, expected 1"));
            }
        }
        ProfileKind::Ocd => {
            if !strictly_diagonally_dominant(c.weights()) {
                return Err("C lost its direct correlation".into());
            }
            for (name, layer) in [("J", j), ("D", d)] {
                let w = layer.weights();
                let mean = diag_mean(w);
                if !off_diagonal(w).any(|x| x.abs() > mean) {
                    return Err(format!("{name} has no compulsive off-diagonal entry"));
                }
            }
        }
    }
    Ok(())
}

pub const CELL_PX: usize = 20;
pub const MAX_RADIUS_PX: f64 = 9.0;

/// SVG heatmap of a weight block with its bias as the last column.
/// Positive values are blue, negative red; circle area and opacity scale
/// with `|value| / max|value|` over the whole block. Zeros draw nothing.
pub fn render_heatmap(weights: &DenseMatrix, bias: &DenseVector) -> Result<String> {
    if bias.len() != weights.rows() {
        return Err(Error::dims("heatmap bias", weights.rows(), bias.len()));
    }
    let rows = weights.rows();
    let cols = weights.cols() + 1;
    let value = |r: usize, c: usize| {
        if c < weights.cols() {
            weights.get(r, c)
        } else {
            bias[r]
        }
    };
    let max = weights.max_abs().max(bias.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    let (width, height) = (cols * CELL_PX, rows * CELL_PX);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(svg, r##"<g fill="none" stroke="#dddddd" stroke-width="1">"##);
    for r in 0..rows {
        for c in 0..cols {
            let _ = writeln!(
                svg,
                r#"<rect x="{}" y="{}" width="{CELL_PX}" height="{CELL_PX}"/>"#,
                c * CELL_PX,
                r * CELL_PX
            );
        }
    }
    let _ = writeln!(svg, "</g>");
    let bias_x = weights.cols() * CELL_PX;
    let _ = writeln!(
        svg,
        r##"<line x1="{bias_x}" y1="0" x2="{bias_x}" y2="{height}" stroke="#888888" stroke-width="1"/>"##
    );
    let _ = writeln!(svg, r#"<g stroke="none">"#);
    for r in 0..rows {
        for c in 0..cols {
            let x = value(r, c);
            if x == 0.0 {
                continue;
            }
            let rel = x.abs() / max;
            let fill = if x > 0.0 { "#0000ff" } else { "#ff0000" };
            let _ = writeln!(
                svg,
                r#"<circle cx="{}" cy="{}" r="{:.4}" fill="{fill}" fill-opacity="{:.4}"/>"#,
                c * CELL_PX + CELL_PX / 2,
                r * CELL_PX + CELL_PX / 2,
                MAX_RADIUS_PX * rel.sqrt(),
                rel
            );
        }
    }
    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}
