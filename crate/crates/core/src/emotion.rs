//! Sign-pattern emotion classification, surprise, and the drawing
//! conventions for sentiment maps.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::appraisal::{AppraisalSnapshot, CoreValueVector};
use crate::error::{Error, Result};

pub const DEFAULT_SIGN_EPSILON: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
    Zero,
}

/// Sign of `x` with a dead band of half-width `eps` around zero.
pub fn sign_of(x: f64, eps: f64) -> Sign {
    if x.abs() <= eps {
        Sign::Zero
    } else if x > 0.0 {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

/// One cell of a sign pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignConstraint {
    Plus,
    Minus,
    Zero,
    Any,
}

impl SignConstraint {
    pub fn admits(self, sign: Sign) -> bool {
        match self {
            SignConstraint::Any => true,
            SignConstraint::Plus => sign == Sign::Plus,
            SignConstraint::Minus => sign == Sign::Minus,
            SignConstraint::Zero => sign == Sign::Zero,
        }
    }

    pub fn sign(self) -> Option<Sign> {
        match self {
            SignConstraint::Plus => Some(Sign::Plus),
            SignConstraint::Minus => Some(Sign::Minus),
            SignConstraint::Zero => Some(Sign::Zero),
            SignConstraint::Any => None,
        }
    }
}

impl fmt::Display for SignConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SignConstraint::Plus => "+",
            SignConstraint::Minus => "-",
            SignConstraint::Zero => "0",
            SignConstraint::Any => "any",
        })
    }
}

impl FromStr for SignConstraint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "+" | "plus" => Ok(SignConstraint::Plus),
            "-" | "minus" => Ok(SignConstraint::Minus),
            "0" | "zero" => Ok(SignConstraint::Zero),
            "any" | "" => Ok(SignConstraint::Any),
            other => Err(format!("unknown sign constraint `{other}`")),
        }
    }
}

/// The seven appraisal quantities a pattern constrains, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cell {
    Alpha,
    Beta,
    Eta1,
    DeltaS1,
    Rho12,
    Eta2,
    DeltaS2,
}

impl Cell {
    pub const ALL: [Cell; 7] = [
        Cell::Alpha,
        Cell::Beta,
        Cell::Eta1,
        Cell::DeltaS1,
        Cell::Rho12,
        Cell::Eta2,
        Cell::DeltaS2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Cell::Alpha => "alpha",
            Cell::Beta => "beta",
            Cell::Eta1 => "eta1",
            Cell::DeltaS1 => "delta_s1",
            Cell::Rho12 => "rho12",
            Cell::Eta2 => "eta2",
            Cell::DeltaS2 => "delta_s2",
        }
    }

    fn reads_stimulus2(self) -> bool {
        matches!(self, Cell::Rho12 | Cell::Eta2 | Cell::DeltaS2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignPattern {
    cells: [SignConstraint; 7],
}

impl SignPattern {
    pub fn new(cells: [SignConstraint; 7]) -> Result<Self> {
        if cells.iter().all(|c| *c == SignConstraint::Any) {
            return Err(Error::InvalidParams(
                "a sign pattern must constrain at least one cell".into(),
            ));
        }
        Ok(Self { cells })
    }

    pub fn get(&self, cell: Cell) -> SignConstraint {
        self.cells[cell as usize]
    }

    pub fn cells(&self) -> &[SignConstraint; 7] {
        &self.cells
    }

    /// Number of constrained cells.
    pub fn specificity(&self) -> usize {
        self.cells.iter().filter(|c| **c != SignConstraint::Any).count()
    }

    fn constrains_stimulus2(&self) -> bool {
        Cell::ALL
            .iter()
            .any(|c| c.reads_stimulus2() && self.get(*c) != SignConstraint::Any)
    }
}

impl fmt::Display for SignPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<String> = self.cells.iter().map(|c| c.to_string()).collect();
        write!(f, "[{}]", cells.join(","))
    }
}

impl FromStr for SignPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| format!("sign pattern `{s}` must be bracketed"))?;
        let parsed: Vec<SignConstraint> = inner
            .split(',')
            .map(str::parse)
            .collect::<Result<_, _>>()?;
        let cells: [SignConstraint; 7] = parsed
            .try_into()
            .map_err(|v: Vec<_>| format!("sign pattern needs 7 cells, found {}", v.len()))?;
        SignPattern::new(cells).map_err(|e| e.to_string())
    }
}

/// A labelled row, written `Label: [c1,...,c7]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct EmotionRow {
    pub label: String,
    pub pattern: SignPattern,
}

impl FromStr for EmotionRow {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (label, pattern) = s
            .split_once(':')
            .ok_or_else(|| format!("emotion row `{s}` must look like `Label: [..]`"))?;
        let label = label.trim();
        if label.is_empty() {
            return Err("emotion label is empty".into());
        }
        Ok(Self {
            label: label.to_string(),
            pattern: pattern.parse()?,
        })
    }
}

impl TryFrom<String> for EmotionRow {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<EmotionRow> for String {
    fn from(row: EmotionRow) -> String {
        row.to_string()
    }
}

impl fmt::Display for EmotionRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.label, self.pattern)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmotionTable {
    rows: Vec<EmotionRow>,
    sign_epsilon: f64,
}

impl Default for EmotionTable {
    /// The six reference rows: fear, sadness, disgust, happiness, anger, guilt.
    fn default() -> Self {
        Self::new(default_rows(), DEFAULT_SIGN_EPSILON).expect("default table is valid")
    }
}

/// Reference sign patterns; blank cells are `any`.
pub fn default_rows() -> Vec<EmotionRow> {
    const ROWS: [&str; 6] = [
        "Fear: [any,0,-,+,any,any,any]",
        "Sadness: [any,0,+,-,any,any,any]",
        "Disgust: [any,any,-,+,any,any,any]",
        "Happiness: [+,+,+,+,any,any,any]",
        "Anger: [any,any,-,+,-,+,-]",
        "Guilt: [-,any,any,any,any,any,any]",
    ];
    ROWS.iter().map(|r| r.parse().expect("valid row")).collect()
}

impl EmotionTable {
    pub fn new(rows: Vec<EmotionRow>, sign_epsilon: f64) -> Result<Self> {
        if !(sign_epsilon > 0.0 && sign_epsilon.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "sign_epsilon must be positive, got {sign_epsilon}"
            )));
        }
        for (k, row) in rows.iter().enumerate() {
            if rows[..k].iter().any(|r| r.label == row.label) {
                return Err(Error::InvalidParams(format!("duplicate emotion label `{}`", row.label)));
            }
        }
        Ok(Self { rows, sign_epsilon })
    }

    pub fn with_sign_epsilon(self, sign_epsilon: f64) -> Result<Self> {
        Self::new(self.rows, sign_epsilon)
    }

    pub fn rows(&self) -> &[EmotionRow] {
        &self.rows
    }

    pub fn sign_epsilon(&self) -> f64 {
        self.sign_epsilon
    }

    pub fn pattern(&self, label: &str) -> Option<&SignPattern> {
        self.rows.iter().find(|r| r.label == label).map(|r| &r.pattern)
    }

    /// Rows that read nothing from a second stimulus.
    pub fn single_stimulus_rows(&self) -> Self {
        Self {
            rows: self
                .rows
                .iter()
                .filter(|r| !r.pattern.constrains_stimulus2())
                .cloned()
                .collect(),
            sign_epsilon: self.sign_epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmotionMatch {
    pub label: String,
    pub specificity: usize,
}

fn cell_value(snap: &AppraisalSnapshot, cell: Cell, c: usize, s1: usize, s2: usize) -> Option<f64> {
    match cell {
        Cell::Alpha => snap.alpha.get(c).copied(),
        Cell::Beta => snap.beta.get(c).copied(),
        Cell::Eta1 => snap.stimulus(s1)?.eta.get(c).copied(),
        Cell::DeltaS1 => Some(snap.stimulus(s1)?.delta_s),
        Cell::Rho12 => snap.rho.get(&(s1, s2)).copied(),
        Cell::Eta2 => snap.stimulus(s2)?.eta.get(c).copied(),
        Cell::DeltaS2 => Some(snap.stimulus(s2)?.delta_s),
    }
}

/// Every row whose constrained cells all agree in sign with the snapshot,
/// most specific first, ties broken by label.
pub fn classify_emotions(
    snap: &AppraisalSnapshot,
    table: &EmotionTable,
    c: usize,
    s1: usize,
    s2: usize,
) -> Result<Vec<EmotionMatch>> {
    let eps = table.sign_epsilon();
    let mut matches = Vec::new();
    for row in table.rows() {
        let mut all = true;
        for cell in Cell::ALL {
            let constraint = row.pattern.get(cell);
            if constraint == SignConstraint::Any {
                continue;
            }
            let value = cell_value(snap, cell, c, s1, s2)
                .ok_or_else(|| Error::MissingField(cell.name().to_string()))?;
            if !constraint.admits(sign_of(value, eps)) {
                all = false;
            }
        }
        if all {
            matches.push(EmotionMatch {
                label: row.label.clone(),
                specificity: row.pattern.specificity(),
            });
        }
    }
    matches.sort_by(|a, b| b.specificity.cmp(&a.specificity).then_with(|| a.label.cmp(&b.label)));
    Ok(matches)
}

/// Euclidean distance between expected and realised core values.
pub fn surprise(expected: &CoreValueVector, actual: &CoreValueVector) -> Result<f64> {
    Ok(actual.values.sub(&expected.values)?.norm())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrokeColor {
    Blue,
    Black,
    Red,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineStyle {
    Solid,
    Dashed,
    Dotted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Color(StrokeColor),
    Line(LineStyle),
}

/// One outlined region of a sentiment map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stroke {
    pub axis: Cell,
    pub sign: Sign,
    pub mark: Mark,
}

/// Drawing instructions for an emotion's sentiment map. Valence-type cells
/// (alpha, beta, eta) map sign to outline color; degree-of-perception cells
/// map sign to line style. The correlation cell links the two stimulus
/// regions and is not drawn.
pub fn sentiment_map_spec(table: &EmotionTable, label: &str) -> Result<Vec<Stroke>> {
    let pattern = table
        .pattern(label)
        .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
    let mut strokes = Vec::new();
    for cell in Cell::ALL {
        let Some(sign) = pattern.get(cell).sign() else {
            continue;
        };
        let mark = match cell {
            Cell::Rho12 => continue,
            Cell::DeltaS1 | Cell::DeltaS2 => Mark::Line(match sign {
                Sign::Plus => LineStyle::Solid,
                Sign::Minus => LineStyle::Dashed,
                Sign::Zero => LineStyle::Dotted,
            }),
            _ => Mark::Color(match sign {
                Sign::Plus => StrokeColor::Blue,
                Sign::Zero => StrokeColor::Black,
                Sign::Minus => StrokeColor::Red,
            }),
        };
        strokes.push(Stroke { axis: cell, sign, mark });
    }
    Ok(strokes)
}
