//! Charts, metric and density specifications, dense tensors, and the
//! jet-valued metric inverse.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{coordinate_jets, Bindings, Expr, ExprError};
use crate::jet::Jet;
use crate::linalg;

/// Largest condition number accepted for the value part of a metric.
pub const MAX_CONDITION: f64 = 1e12;
/// Eigenvalues closer than this to zero make the signature undefined.
pub const EIGEN_ZERO: f64 = 1e-10;
/// Convergence tolerance of the Jacobi sweeps.
pub const JACOBI_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("chart needs at least two coordinates, got {0}")]
    ChartTooSmall(usize),
    #[error("coordinate `{0}` is declared twice")]
    DuplicateCoordinate(String),
    #[error("expected {expected} components, got {found}")]
    ComponentCount { expected: usize, found: usize },
    #[error("point has {found} coordinates, chart has {expected}")]
    PointDimension { expected: usize, found: usize },
    #[error("point {point:?} violates domain constraint `{constraint}` (value {value})")]
    Domain {
        point: Vec<f64>,
        constraint: String,
        value: f64,
    },
    #[error("metric is singular or ill-conditioned (condition number {condition:e})")]
    Singular { condition: f64 },
    #[error("eigenvalue {eigenvalue:e} is within {EIGEN_ZERO:e} of zero")]
    DegenerateEigenvalue { eigenvalue: f64 },
    #[error("slot {slot} out of range for a rank-{rank} tensor")]
    SlotOutOfRange { slot: usize, rank: usize },
    #[error("signature ({minus},{plus}) does not match a {kind} metric")]
    WrongSignature {
        minus: usize,
        plus: usize,
        kind: MetricKind,
    },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variance {
    Up,
    Down,
}

/// Dense tensor with `dim^rank` components in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    dim: usize,
    variance: Vec<Variance>,
    data: Vec<T>,
}

pub type PointTensor = Tensor<f64>;
pub type JetTensor = Tensor<Jet>;

/// Iterates every multi-index of a given rank in row-major order.
pub fn multi_indices(dim: usize, rank: usize) -> impl Iterator<Item = Vec<usize>> {
    let total = dim.pow(rank as u32);
    (0..total).map(move |mut flat| {
        let mut idx = vec![0; rank];
        for slot in (0..rank).rev() {
            idx[slot] = flat % dim;
            flat /= dim;
        }
        idx
    })
}

impl<T> Tensor<T> {
    pub fn from_fn(
        dim: usize,
        variance: Vec<Variance>,
        mut f: impl FnMut(&[usize]) -> T,
    ) -> Tensor<T> {
        let data = multi_indices(dim, variance.len()).map(|i| f(&i)).collect();
        Tensor {
            dim,
            variance,
            data,
        }
    }

    pub fn from_data(dim: usize, variance: Vec<Variance>, data: Vec<T>) -> Tensor<T> {
        assert_eq!(
            data.len(),
            dim.pow(variance.len() as u32),
            "component count"
        );
        Tensor {
            dim,
            variance,
            data,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    pub fn variance(&self) -> &[Variance] {
        &self.variance
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank());
        idx.iter().fold(0, |acc, &i| acc * self.dim + i)
    }

    pub fn get(&self, idx: &[usize]) -> &T {
        &self.data[self.flat_index(idx)]
    }

    pub fn get_mut(&mut self, idx: &[usize]) -> &mut T {
        let i = self.flat_index(idx);
        &mut self.data[i]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Tensor<U> {
        Tensor {
            dim: self.dim,
            variance: self.variance.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl Tensor<Jet> {
    /// Base-point values.
    pub fn values(&self) -> PointTensor {
        self.map(Jet::value)
    }

    pub fn truncate(&self, order: usize) -> JetTensor {
        self.map(|j| j.truncate(order))
    }

    pub fn order(&self) -> usize {
        self.data.first().map_or(0, Jet::order)
    }
}

impl Tensor<f64> {
    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.data)
    }

    pub fn zeros(dim: usize, variance: Vec<Variance>) -> PointTensor {
        let len = dim.pow(variance.len() as u32);
        Tensor::from_data(dim, variance, vec![0.0; len])
    }
}

/// Scalars a tensor can hold: reals and jets of a common shape.
pub trait Component: Clone {
    fn zero_like(&self) -> Self;
    /// `self += a * b`.
    fn mul_add(&mut self, a: &Self, b: &Self);
}

impl Component for f64 {
    fn zero_like(&self) -> f64 {
        0.0
    }

    fn mul_add(&mut self, a: &f64, b: &f64) {
        *self += a * b;
    }
}

impl Component for Jet {
    fn zero_like(&self) -> Jet {
        self.constant_like(0.0)
    }

    fn mul_add(&mut self, a: &Jet, b: &Jet) {
        self.add_product(a, b);
    }
}

/// Contracts `slot` of `t` with the first index of the symmetric matrix
/// `metric` (either `g` or its inverse), flipping the slot's variance.
/// Down slots are raised with `g_inv`, up slots lowered with `g`.
pub fn raise_lower<T: Component>(
    t: &Tensor<T>,
    slot: usize,
    g: &Tensor<T>,
    g_inv: &Tensor<T>,
) -> Result<Tensor<T>, TensorError> {
    let rank = t.rank();
    if slot >= rank {
        return Err(TensorError::SlotOutOfRange { slot, rank });
    }
    let (metric, flipped) = match t.variance[slot] {
        Variance::Down => (g_inv, Variance::Up),
        Variance::Up => (g, Variance::Down),
    };
    let mut variance = t.variance.clone();
    variance[slot] = flipped;
    let zero = t.data[0].zero_like();
    let n = t.dim;
    Ok(Tensor::from_fn(n, variance, |idx| {
        let mut acc = zero.clone();
        let mut src = idx.to_vec();
        for m in 0..n {
            src[slot] = m;
            acc.mul_add(metric.get(&[idx[slot], m]), t.get(&src));
        }
        acc
    }))
}

/// Matrix product of two rank-2 tensors, `(a b)_ij = a_ik b_kj`.
pub fn matmul<T: Component>(a: &Tensor<T>, b: &Tensor<T>, variance: Vec<Variance>) -> Tensor<T> {
    let n = a.dim;
    let zero = a.data[0].zero_like();
    Tensor::from_fn(n, variance, |idx| {
        let mut acc = zero.clone();
        for k in 0..n {
            acc.mul_add(a.get(&[idx[0], k]), b.get(&[k, idx[1]]));
        }
        acc
    })
}

/// Coordinate names plus strict positivity constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    coords: Vec<String>,
    constraints: Vec<Expr>,
}

impl Chart {
    pub fn new(coords: Vec<String>, constraints: Vec<Expr>) -> Result<Chart, TensorError> {
        if coords.len() < 2 {
            return Err(TensorError::ChartTooSmall(coords.len()));
        }
        for (i, c) in coords.iter().enumerate() {
            if coords[..i].contains(c) {
                return Err(TensorError::DuplicateCoordinate(c.clone()));
            }
        }
        Ok(Chart {
            coords,
            constraints,
        })
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn constraints(&self) -> &[Expr] {
        &self.constraints
    }

    pub fn with_constraint(mut self, constraint: Expr) -> Chart {
        self.constraints.push(constraint);
        self
    }

    /// Checks every constraint is strictly greater than `margin`.
    pub fn check(
        &self,
        point: &[f64],
        bindings: &Bindings,
        margin: f64,
    ) -> Result<(), TensorError> {
        if point.len() != self.dim() {
            return Err(TensorError::PointDimension {
                expected: self.dim(),
                found: point.len(),
            });
        }
        for c in &self.constraints {
            let value = c.eval(point, bindings)?;
            if !(value > margin) {
                return Err(TensorError::Domain {
                    point: point.to_vec(),
                    constraint: c.to_string(),
                    value,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Lorentzian,
    Riemannian,
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricKind::Lorentzian => "lorentzian",
            MetricKind::Riemannian => "riemannian",
        })
    }
}

/// Position of `(i, j)`, `i <= j`, in the packed upper triangle.
pub fn packed_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - i * (i + 1) / 2 + j
}

/// A fully bound symmetric metric over a chart.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub chart: Chart,
    /// Upper triangle, row by row; see [`packed_index`].
    pub components: Vec<Expr>,
    pub kind: MetricKind,
    pub bindings: Bindings,
}

impl MetricSpec {
    pub fn new(
        chart: Chart,
        components: Vec<Expr>,
        kind: MetricKind,
        bindings: Bindings,
    ) -> Result<MetricSpec, TensorError> {
        let n = chart.dim();
        let expected = n * (n + 1) / 2;
        if components.len() != expected {
            return Err(TensorError::ComponentCount {
                expected,
                found: components.len(),
            });
        }
        Ok(MetricSpec {
            chart,
            components,
            kind,
            bindings,
        })
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn component(&self, i: usize, j: usize) -> &Expr {
        &self.components[packed_index(self.dim(), i, j)]
    }

    /// Evaluates the metric as jets at an admissible point.
    pub fn eval(&self, point: &[f64], order: usize) -> Result<JetTensor, TensorError> {
        self.chart.check(point, &self.bindings, 0.0)?;
        let coords = coordinate_jets(point, order);
        self.eval_with(&coords)
    }

    /// Evaluates the metric from precomputed coordinate jets, without
    /// checking the chart constraints.
    pub fn eval_with(&self, coords: &[Jet]) -> Result<JetTensor, TensorError> {
        let n = self.dim();
        let packed = self
            .components
            .iter()
            .map(|e| e.eval_jet(coords, &self.bindings))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Tensor::from_fn(n, vec![Variance::Down; 2], |idx| {
            packed[packed_index(n, idx[0], idx[1])].clone()
        }))
    }
}

/// A positive scalar function bound to the same parameters as a metric.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySpec {
    pub expr: Expr,
    pub bindings: Bindings,
}

impl DensitySpec {
    pub fn new(expr: Expr, bindings: Bindings) -> DensitySpec {
        DensitySpec { expr, bindings }
    }

    pub fn eval_with(&self, coords: &[Jet]) -> Result<Jet, ExprError> {
        self.expr.eval_jet(coords, &self.bindings)
    }
}

/// Jet-valued inverse of a symmetric jet matrix.
///
/// With `g = A + N`, `A` the value part and `N` nilpotent, the inverse is
/// `Σ_k (-A⁻¹N)^k A⁻¹`, which terminates after `order` terms.
pub fn metric_inverse(g: &JetTensor) -> Result<JetTensor, TensorError> {
    let n = g.dim();
    let order = g.order();
    let values = g.values();
    let a0 = values.data();
    let eig = linalg::symmetric_eigenvalues(a0, n, JACOBI_TOL);
    let largest = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let smallest = eig.iter().fold(f64::INFINITY, |m, e| m.min(e.abs()));
    let condition = if smallest > 0.0 {
        largest / smallest
    } else {
        f64::INFINITY
    };
    if !(condition <= MAX_CONDITION) {
        return Err(TensorError::Singular { condition });
    }
    let inv0 = linalg::invert(a0, n).ok_or(TensorError::Singular { condition })?;
    let dim = g.data()[0].dim();
    let b0 = Tensor::from_data(
        n,
        vec![Variance::Up; 2],
        inv0.iter().map(|&v| Jet::constant(v, dim, order)).collect(),
    );
    let nilpotent = g.map(|j| {
        let mut j = j.clone();
        j.add_scaled(-1.0, &j.constant_like(j.value()));
        j
    });
    // step = -A⁻¹ N
    let step = matmul(&b0, &nilpotent, vec![Variance::Up, Variance::Down]).map(|j| -j);
    let mut term = b0.clone();
    let mut sum = b0;
    for _ in 0..order {
        term = matmul(&step, &term, vec![Variance::Up; 2]);
        for (s, t) in sum.data.iter_mut().zip(&term.data) {
            *s += t;
        }
    }
    Ok(sum)
}

/// Counts of negative and positive eigenvalues.
pub fn signature(g: &PointTensor) -> Result<(usize, usize), TensorError> {
    let n = g.dim();
    let eig = linalg::symmetric_eigenvalues(g.data(), n, JACOBI_TOL);
    if let Some(&e) = eig.iter().find(|e| e.abs() < EIGEN_ZERO) {
        return Err(TensorError::DegenerateEigenvalue { eigenvalue: e });
    }
    let minus = eig.iter().filter(|&&e| e < 0.0).count();
    Ok((minus, n - minus))
}

/// Checks the signature against the declared kind.
pub fn check_signature(g: &PointTensor, kind: MetricKind) -> Result<(usize, usize), TensorError> {
    let (minus, plus) = signature(g)?;
    let expected_minus = match kind {
        MetricKind::Lorentzian => 1,
        MetricKind::Riemannian => 0,
    };
    if minus != expected_minus {
        return Err(TensorError::WrongSignature { minus, plus, kind });
    }
    Ok((minus, plus))
}
