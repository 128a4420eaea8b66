//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] holds the Taylor coefficients of a scalar function of `dim`
//! variables at a fixed point, truncated after total degree `order`. The
//! coefficient of the monomial `x^a` is `∂^a f / a!`, so arithmetic on jets
//! is polynomial arithmetic with every monomial of degree above `order`
//! dropped. All partial derivatives up to `order` come out exact up to
//! floating point rounding.
//!
//! Coefficients are stored in graded lexicographic order: all degree-0
//! monomials, then degree 1, and so on; within a degree the first variable's
//! exponent is compared first, larger exponents first. A consequence used
//! throughout this module is that the layout of order `K - 1` is a prefix of
//! the layout of order `K`, so truncation is slicing.

mod series;

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::{Arc, LazyLock, Mutex};

use thiserror::Error;

pub use series::taylor_coefficients;

/// Distance from a pole of `tan` inside which evaluation is refused.
pub const TAN_POLE_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("coordinate index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("jet shape mismatch: (dim {0}, order {1}) against (dim {2}, order {3})")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("division by a jet whose value is zero")]
    DivisionByZero,
    #[error("{func} is undefined at {value}")]
    Domain { func: &'static str, value: f64 },
    #[error("multi-index of degree {degree} exceeds jet order {order}")]
    DegreeExceedsOrder { degree: usize, order: usize },
    #[error("multi-index has {len} entries but the jet has {dim} variables")]
    MultiIndexLength { len: usize, dim: usize },
    #[error("a jet of order {order} cannot be differentiated {times} more time(s)")]
    InsufficientOrder { order: usize, times: usize },
}

/// Outer functions available to [`Jet::apply`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Univariate {
    Exp,
    Log,
    Sin,
    Cos,
    Sinh,
    Cosh,
    Tan,
    Arctanh,
    Sqrt,
    /// `x^p` for real `p`, defined for `x > 0`.
    Pow(f64),
}

impl Univariate {
    pub fn name(self) -> &'static str {
        match self {
            Univariate::Exp => "exp",
            Univariate::Log => "log",
            Univariate::Sin => "sin",
            Univariate::Cos => "cos",
            Univariate::Sinh => "sinh",
            Univariate::Cosh => "cosh",
            Univariate::Tan => "tan",
            Univariate::Arctanh => "arctanh",
            Univariate::Sqrt => "sqrt",
            Univariate::Pow(_) => "pow",
        }
    }

    /// Plain double evaluation with the same domain rules as the jet path.
    pub fn eval(self, x: f64) -> Result<f64, JetError> {
        self.check_domain(x)?;
        Ok(match self {
            Univariate::Exp => x.exp(),
            Univariate::Log => x.ln(),
            Univariate::Sin => x.sin(),
            Univariate::Cos => x.cos(),
            Univariate::Sinh => x.sinh(),
            Univariate::Cosh => x.cosh(),
            Univariate::Tan => x.tan(),
            Univariate::Arctanh => x.atanh(),
            Univariate::Sqrt => x.sqrt(),
            Univariate::Pow(p) => x.powf(p),
        })
    }

    pub(crate) fn check_domain(self, x: f64) -> Result<(), JetError> {
        let ok = match self {
            Univariate::Log | Univariate::Sqrt | Univariate::Pow(_) => x > 0.0,
            Univariate::Arctanh => x.abs() < 1.0,
            Univariate::Tan => {
                let half_pi = std::f64::consts::FRAC_PI_2;
                let pole =
                    ((x - half_pi) / std::f64::consts::PI).round() * std::f64::consts::PI + half_pi;
                (x - pole).abs() >= TAN_POLE_MARGIN
            }
            _ => x.is_finite(),
        };
        if ok && x.is_finite() {
            Ok(())
        } else {
            Err(JetError::Domain {
                func: self.name(),
                value: x,
            })
        }
    }
}

/// Index tables shared by every jet of one `(dim, order)` shape.
pub struct Layout {
    dim: usize,
    order: usize,
    monomials: Vec<Box<[u8]>>,
    /// `degree_start[d]` is the offset of the first monomial of degree `d`;
    /// the last entry is the total length.
    degree_start: Vec<usize>,
    /// `raise[var][i]` is the index of `monomials[i] + e_var`, or `NONE`.
    raise: Vec<Vec<u32>>,
    /// Products `(a, b, out)` with `monomials[a] + monomials[b] = monomials[out]`,
    /// grouped by `out`.
    products: Vec<(u32, u32, u32)>,
    product_start: Vec<usize>,
    factorials: Vec<f64>,
    lookup: HashMap<Box<[u8]>, usize>,
}

const NONE: u32 = u32::MAX;

type LayoutCache = Mutex<HashMap<(usize, usize), Arc<Layout>>>;

static LAYOUTS: LazyLock<LayoutCache> = LazyLock::new(|| Mutex::new(HashMap::new()));

thread_local! {
    static LOCAL_LAYOUTS: RefCell<HashMap<(usize, usize), Arc<Layout>>> =
        RefCell::new(HashMap::new());
}

impl Layout {
    /// Shared layout for the given shape.
    pub fn get(dim: usize, order: usize) -> Arc<Layout> {
        LOCAL_LAYOUTS.with(|local| {
            if let Some(layout) = local.borrow().get(&(dim, order)) {
                return layout.clone();
            }
            let layout = LAYOUTS
                .lock()
                .expect("layout cache poisoned")
                .entry((dim, order))
                .or_insert_with(|| Arc::new(Layout::build(dim, order)))
                .clone();
            local.borrow_mut().insert((dim, order), layout.clone());
            layout
        })
    }

    fn build(dim: usize, order: usize) -> Layout {
        assert!(dim >= 1, "jets need at least one variable");
        assert!(order < 64, "jet order {order} is unreasonably large");
        let mut monomials: Vec<Box<[u8]>> = Vec::new();
        let mut degree_start = Vec::with_capacity(order + 2);
        for degree in 0..=order {
            degree_start.push(monomials.len());
            let mut current = vec![0u8; dim];
            push_graded(&mut monomials, &mut current, 0, degree);
        }
        degree_start.push(monomials.len());

        let lookup: HashMap<Box<[u8]>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();

        let raise = (0..dim)
            .map(|var| {
                monomials
                    .iter()
                    .map(|m| {
                        let mut up = m.to_vec();
                        up[var] += 1;
                        lookup.get(up.as_slice()).map_or(NONE, |&i| i as u32)
                    })
                    .collect()
            })
            .collect();

        let mut products = Vec::new();
        let mut product_start = Vec::with_capacity(monomials.len() + 1);
        for (out, m) in monomials.iter().enumerate() {
            product_start.push(products.len());
            for (a, ma) in monomials.iter().enumerate() {
                if ma.iter().zip(m.iter()).all(|(x, y)| x <= y) {
                    let mb: Vec<u8> = m.iter().zip(ma.iter()).map(|(y, x)| y - x).collect();
                    let b = lookup[mb.as_slice()];
                    products.push((a as u32, b as u32, out as u32));
                }
            }
        }
        product_start.push(products.len());

        let factorials = monomials
            .iter()
            .map(|m| m.iter().map(|&k| factorial(k as usize)).product())
            .collect();

        Layout {
            dim,
            order,
            monomials,
            degree_start,
            raise,
            products,
            product_start,
            factorials,
            lookup,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    /// Multi-indices in storage order.
    pub fn monomials(&self) -> impl Iterator<Item = &[u8]> {
        self.monomials.iter().map(|m| &m[..])
    }

    /// Number of coefficients of total degree at most `degree`.
    pub fn prefix_len(&self, degree: usize) -> usize {
        self.degree_start[degree.min(self.order) + 1]
    }

    /// Storage index of a multi-index.
    pub fn index_of(&self, multi: &[usize]) -> Result<usize, JetError> {
        if multi.len() != self.dim {
            return Err(JetError::MultiIndexLength {
                len: multi.len(),
                dim: self.dim,
            });
        }
        let degree: usize = multi.iter().sum();
        if degree > self.order {
            return Err(JetError::DegreeExceedsOrder {
                degree,
                order: self.order,
            });
        }
        let key: Vec<u8> = multi.iter().map(|&k| k as u8).collect();
        Ok(self.lookup[key.as_slice()])
    }
}

impl fmt::Debug for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Layout")
            .field("dim", &self.dim)
            .field("order", &self.order)
            .finish_non_exhaustive()
    }
}

fn push_graded(out: &mut Vec<Box<[u8]>>, current: &mut [u8], var: usize, remaining: usize) {
    if var + 1 == current.len() {
        current[var] = remaining as u8;
        out.push(current.to_vec().into_boxed_slice());
        current[var] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        current[var] = k as u8;
        push_graded(out, current, var + 1, remaining - k);
    }
    current[var] = 0;
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Truncated Taylor expansion of a scalar function at a point.
#[derive(Clone)]
pub struct Jet {
    layout: Arc<Layout>,
    coeffs: Vec<f64>,
}

impl Jet {
    pub fn zero(dim: usize, order: usize) -> Jet {
        let layout = Layout::get(dim, order);
        let coeffs = vec![0.0; layout.len()];
        Jet { layout, coeffs }
    }

    pub fn constant(value: f64, dim: usize, order: usize) -> Jet {
        let mut jet = Jet::zero(dim, order);
        jet.coeffs[0] = value;
        jet
    }

    /// Constant jet with the same shape as `self`.
    pub fn constant_like(&self, value: f64) -> Jet {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        coeffs[0] = value;
        Jet {
            layout: self.layout.clone(),
            coeffs,
        }
    }

    /// Jet of the coordinate function `x_index` at a point where it takes `value`.
    pub fn variable(index: usize, value: f64, dim: usize, order: usize) -> Result<Jet, JetError> {
        if index >= dim {
            return Err(JetError::IndexOutOfRange { index, dim });
        }
        let mut jet = Jet::constant(value, dim, order);
        if order >= 1 {
            // degree-1 monomials are e_0, e_1, ... in that order
            jet.coeffs[1 + index] = 1.0;
        }
        Ok(jet)
    }

    /// Builds a jet from raw coefficients in storage order.
    pub fn from_coefficients(dim: usize, order: usize, coeffs: Vec<f64>) -> Jet {
        let layout = Layout::get(dim, order);
        assert_eq!(coeffs.len(), layout.len(), "coefficient count");
        Jet { layout, coeffs }
    }

    pub fn dim(&self) -> usize {
        self.layout.dim
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Taylor coefficient of a monomial: the partial derivative divided by
    /// the multi-index factorial.
    pub fn coefficient(&self, multi: &[usize]) -> Result<f64, JetError> {
        Ok(self.coeffs[self.layout.index_of(multi)?])
    }

    /// Partial derivative `∂^multi f` at the base point.
    pub fn partial(&self, multi: &[usize]) -> Result<f64, JetError> {
        let i = self.layout.index_of(multi)?;
        Ok(self.coeffs[i] * self.layout.factorials[i])
    }

    /// First partial `∂_var f`.
    pub fn d(&self, var: usize) -> f64 {
        if self.layout.order == 0 {
            return 0.0;
        }
        self.coeffs[1 + var]
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn same_shape(&self, other: &Jet) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout)
            || (self.layout.dim == other.layout.dim && self.layout.order == other.layout.order)
    }

    fn check_shape(&self, other: &Jet) -> Result<(), JetError> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(JetError::ShapeMismatch(
                self.dim(),
                self.order(),
                other.dim(),
                other.order(),
            ))
        }
    }

    /// Drops every coefficient of degree above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let layout = Layout::get(self.dim(), order);
        let coeffs = self.coeffs[..layout.len()].to_vec();
        Jet { layout, coeffs }
    }

    /// The jet of `∂_var f`, one order lower.
    pub fn derivative(&self, var: usize) -> Result<Jet, JetError> {
        if var >= self.dim() {
            return Err(JetError::IndexOutOfRange {
                index: var,
                dim: self.dim(),
            });
        }
        if self.order() == 0 {
            return Err(JetError::InsufficientOrder { order: 0, times: 1 });
        }
        let layout = Layout::get(self.dim(), self.order() - 1);
        let raise = &self.layout.raise[var];
        let coeffs = (0..layout.len())
            .map(|i| {
                let up = raise[i] as usize;
                self.coeffs[up] * (layout.monomials[i][var] as f64 + 1.0)
            })
            .collect();
        Ok(Jet { layout, coeffs })
    }

    pub fn scale(&self, factor: f64) -> Jet {
        Jet {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// `self += factor * other`.
    pub fn add_scaled(&mut self, factor: f64, other: &Jet) {
        assert!(self.same_shape(other), "jet shape mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += factor * b;
        }
    }

    /// `self += a * b`, the truncated Cauchy product accumulated in place.
    pub fn add_product(&mut self, a: &Jet, b: &Jet) {
        assert!(
            self.same_shape(a) && self.same_shape(b),
            "jet shape mismatch"
        );
        for &(i, j, out) in &self.layout.products {
            self.coeffs[out as usize] += a.coeffs[i as usize] * b.coeffs[j as usize];
        }
    }

    fn product(&self, other: &Jet) -> Jet {
        let mut out = Jet {
            layout: self.layout.clone(),
            coeffs: vec![0.0; self.coeffs.len()],
        };
        out.add_product(self, other);
        out
    }

    /// Quotient solved degree by degree from `self = other * q`.
    pub fn checked_div(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_shape(other)?;
        let b0 = other.coeffs[0];
        if b0 == 0.0 || !b0.is_finite() {
            return Err(JetError::DivisionByZero);
        }
        let layout = &self.layout;
        let mut q = vec![0.0; self.coeffs.len()];
        for m in 0..q.len() {
            let mut acc = self.coeffs[m];
            for &(p, r, _) in &layout.products[layout.product_start[m]..layout.product_start[m + 1]]
            {
                if p != 0 {
                    acc -= other.coeffs[p as usize] * q[r as usize];
                }
            }
            q[m] = acc / b0;
        }
        Ok(Jet {
            layout: self.layout.clone(),
            coeffs: q,
        })
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        self.constant_like(1.0).checked_div(self)
    }

    /// Integer power by repeated multiplication; negative powers divide.
    pub fn powi(&self, n: i32) -> Result<Jet, JetError> {
        let mut result = self.constant_like(1.0);
        let mut base = self.clone();
        let mut e = n.unsigned_abs();
        while e > 0 {
            if e & 1 == 1 {
                result = result.product(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.product(&base);
            }
        }
        if n < 0 {
            result.recip()
        } else {
            Ok(result)
        }
    }

    /// Composition `f ∘ self`, by Horner evaluation of the Taylor polynomial
    /// of `f` at `self.value()` in the nilpotent part of `self`.
    pub fn apply(&self, f: Univariate) -> Result<Jet, JetError> {
        let taylor = taylor_coefficients(f, self.value(), self.order())?;
        Ok(self.compose_series(&taylor))
    }

    /// Evaluates `Σ_k series[k] (self - self.value())^k`.
    pub fn compose_series(&self, series: &[f64]) -> Jet {
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let top = series.len().min(self.order() + 1);
        let mut result =
            self.constant_like(series.get(top.wrapping_sub(1)).copied().unwrap_or(0.0));
        for k in (0..top.saturating_sub(1)).rev() {
            result = result.product(&delta);
            result.coeffs[0] += series[k];
        }
        result
    }
}

/// Binary jet operations with shape checking, for callers that cannot
/// guarantee matching shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

pub fn jet_arith(a: &Jet, b: &Jet, op: ArithOp) -> Result<Jet, JetError> {
    a.check_shape(b)?;
    Ok(match op {
        ArithOp::Add => a + b,
        ArithOp::Sub => a - b,
        ArithOp::Mul => a * b,
        ArithOp::Div => a.checked_div(b)?,
    })
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("dim", &self.dim())
            .field("order", &self.order())
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Jet) -> bool {
        self.same_shape(other) && self.coeffs == other.coeffs
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        assert!(self.same_shape(rhs), "jet shape mismatch");
        Jet {
            layout: self.layout.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        assert!(self.same_shape(rhs), "jet shape mismatch");
        Jet {
            layout: self.layout.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        assert!(self.same_shape(rhs), "jet shape mismatch");
        self.product(rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul<&Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        rhs.scale(self)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $method:ident) => {
        impl $tr for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        self.add_scaled(1.0, rhs);
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        self.add_scaled(-1.0, rhs);
    }
}
