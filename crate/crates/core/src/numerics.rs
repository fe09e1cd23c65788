//! Dense linear algebra, unit activations and the two differentiation
//! routes (central finite differences and the analytic chain rule) that
//! every appraisal quantity is built on.

use std::fmt;
use std::ops::{Deref, Index};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perception::NetworkStack;

/// A fixed-length vector of finite reals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "vector".into(),
            });
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    /// Standard basis vector `e_index`.
    pub fn basis(len: usize, index: usize) -> Self {
        let mut v = vec![0.0; len];
        v[index] = 1.0;
        Self(v)
    }

    /// Like [`DenseVector::new`] but reports a computed value going non-finite.
    pub(crate) fn checked(values: Vec<f64>, context: &str) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteResult {
                context: context.into(),
            });
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.0.iter().zip(other).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(&self.0).sqrt()
    }

    pub fn sub(&self, other: &DenseVector) -> Result<DenseVector> {
        if self.len() != other.len() {
            return Err(Error::dims("vector subtraction", self.len(), other.len()));
        }
        Ok(Self(
            self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn scale(&self, k: f64) -> DenseVector {
        Self(self.0.iter().map(|x| x * k).collect())
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Row-major dense matrix of finite reals.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::dims("matrix shape", 1, 0));
        }
        if data.len() != rows * cols {
            return Err(Error::dims("matrix data", rows * cols, data.len()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                context: "matrix".into(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows; ragged input is a dimension mismatch.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(Error::dims("matrix row", cols, row.len()));
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    pub(crate) fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub(crate) fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, col)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::dims("matrix-vector product", self.cols, x.len()));
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(w, v)| w * v).sum())
            .collect())
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::dims("matrix product", self.cols, other.rows));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Largest absolute entrywise difference; shapes must agree.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl fmt::Display for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let row: Vec<String> = self.row(r).iter().map(|x| format!("{x:.6}")).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// Per-unit transfer function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    Tanh,
    /// Fires 1 strictly above the threshold, 0 otherwise.
    BinaryThreshold(f64),
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        apply_activation(self, z)
    }

    /// Derivative at `z`. `None` when a binary unit sits exactly on its
    /// threshold, where no derivative exists.
    pub fn derivative(self, z: f64) -> Option<f64> {
        Some(match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
            Activation::BinaryThreshold(theta) => {
                if z == theta {
                    return None;
                }
                0.0
            }
        })
    }

    pub fn is_smooth(self) -> bool {
        matches!(
            self,
            Activation::Identity | Activation::Sigmoid | Activation::Tanh
        )
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub fn apply_activation(a: Activation, z: f64) -> f64 {
    match a {
        Activation::Identity => z,
        Activation::Relu => z.max(0.0),
        Activation::Sigmoid => sigmoid(z),
        Activation::Tanh => z.tanh(),
        Activation::BinaryThreshold(theta) => {
            if z > theta {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Probe step for central differences: `h_i = max(abs_floor, rel * |x_i|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPolicy {
    pub abs_floor: f64,
    pub rel: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            abs_floor: 1e-6,
            rel: 1e-6,
        }
    }
}

impl StepPolicy {
    pub fn step(&self, x: f64) -> f64 {
        self.abs_floor.max(self.rel * x.abs())
    }
}

/// Central-difference Jacobian of `f` at `x`; entry `(j, i)` is
/// `df_j/dx_i`.
pub fn fd_jacobian<F>(mut f: F, x: &[f64], h: StepPolicy) -> Result<DenseMatrix>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let mut probe = x.to_vec();
    let mut columns = Vec::with_capacity(n);
    let mut out_dim = None;
    for i in 0..n {
        let step = h.step(x[i]);
        let hi = x[i] + step;
        let lo = x[i] - step;
        // the representable spacing, not the nominal 2h
        let span = hi - lo;

        probe[i] = hi;
        let f_hi = eval_finite(&mut f, &probe, i)?;
        probe[i] = lo;
        let f_lo = eval_finite(&mut f, &probe, i)?;
        probe[i] = x[i];

        let m = *out_dim.get_or_insert(f_hi.len());
        if f_hi.len() != m || f_lo.len() != m {
            return Err(Error::dims("fd_jacobian output", m, f_lo.len()));
        }
        let col: Vec<f64> = f_hi.iter().zip(&f_lo).map(|(a, b)| (a - b) / span).collect();
        if col.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteResult {
                context: format!("fd_jacobian column {i}"),
            });
        }
        columns.push(col);
    }
    let m = match out_dim {
        Some(m) => m,
        None => f(x)?.len(),
    };
    let mut jac = DenseMatrix::zeros(m, n);
    for (i, col) in columns.iter().enumerate() {
        for (j, v) in col.iter().enumerate() {
            jac.set(j, i, *v);
        }
    }
    Ok(jac)
}

fn eval_finite<F>(f: &mut F, x: &[f64], axis: usize) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let y = f(x)?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteResult {
            context: format!("fd_jacobian probe along axis {axis}"),
        });
    }
    Ok(y)
}

/// Analytic Jacobian together with the first binary unit found sitting on
/// its threshold, if any. The matrix treats such units as derivative zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian {
    pub matrix: DenseMatrix,
    pub at_threshold: Option<(usize, usize)>,
}

impl Jacobian {
    /// Fails with [`Error::AtThreshold`] when the derivative is undefined.
    pub fn require_defined(self) -> Result<DenseMatrix> {
        match self.at_threshold {
            Some((layer, unit)) => Err(Error::AtThreshold { layer, unit }),
            None => Ok(self.matrix),
        }
    }
}

/// Chain-rule Jacobian of a whole stack: the product over layers of
/// `diag(act'(z)) * W`.
pub fn analytic_layer_jacobian(stack: &NetworkStack, x: &[f64]) -> Result<Jacobian> {
    let mut input = x.to_vec();
    let mut acc: Option<DenseMatrix> = None;
    let mut at_threshold = None;
    for (k, layer) in stack.layers().iter().enumerate() {
        let z = layer.pre_activation(&input)?;
        let mut local = layer.weights().clone();
        for (unit, &zj) in z.iter().enumerate() {
            let act = layer.activations()[unit];
            let d = match act.derivative(zj) {
                Some(d) => d,
                None => {
                    at_threshold.get_or_insert((k + 1, unit));
                    0.0
                }
            };
            for c in 0..local.cols() {
                let w = local.get(unit, c);
                local.set(unit, c, d * w);
            }
        }
        acc = Some(match acc {
            None => local,
            Some(prev) => local.matmul(&prev)?,
        });
        input = layer.activate(&z);
    }
    let matrix = acc.ok_or_else(|| Error::dims("network stack depth", 1, 0))?;
    Ok(Jacobian {
        matrix,
        at_threshold,
    })
}
