//! Scalar expression language for metric components, densities and
//! parameter functions.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' exponent)*
//! exponent:= number | '-' number | '(' '-'? number ')'
//! atom    := number | name | func '(' sum ')' | slot '\''* '(' sum ')' | '(' sum ')'
//! ```
//!
//! Names resolve against a [`Scope`]: chart coordinates, real parameters, and
//! slots. A slot is a named scalar function of one variable whose body is
//! supplied at binding time; `alpha''(v)` is the second derivative of slot
//! `alpha` evaluated at `v`. Slot derivatives are taken with jets, never
//! symbolically.

mod parse;

use std::fmt;

use thiserror::Error;

use crate::jet::{Jet, JetError, Univariate};

pub use parse::parse;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("`{name}` at offset {offset} takes exactly one argument")]
    Arity { name: String, offset: usize },
    #[error("invalid scope: {0}")]
    Scope(String),
    #[error("expected {expected} {what} values, got {found}")]
    Binding {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("evaluating `{expr}`: {source}")]
    Eval {
        expr: String,
        #[source]
        source: JetError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Sinh,
    Cosh,
    Tan,
    Arctanh,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Exp,
        Func::Log,
        Func::Sin,
        Func::Cos,
        Func::Sinh,
        Func::Cosh,
        Func::Tan,
        Func::Arctanh,
        Func::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        self.univariate().name()
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    pub fn univariate(self) -> Univariate {
        match self {
            Func::Exp => Univariate::Exp,
            Func::Log => Univariate::Log,
            Func::Sin => Univariate::Sin,
            Func::Cos => Univariate::Cos,
            Func::Sinh => Univariate::Sinh,
            Func::Cosh => Univariate::Cosh,
            Func::Tan => Univariate::Tan,
            Func::Arctanh => Univariate::Arctanh,
            Func::Sqrt => Univariate::Sqrt,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

/// Literal exponent of a power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exponent {
    Int(i32),
    Real(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(f64),
    Coord {
        index: usize,
        name: String,
    },
    Param {
        index: usize,
        name: String,
    },
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Exponent),
    Call(Func, Box<Expr>),
    Slot {
        index: usize,
        name: String,
        derivative: u8,
        arg: Box<Expr>,
    },
}

/// Names visible to an expression, in binding order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Scope {
    pub coords: Vec<String>,
    pub params: Vec<String>,
    pub slots: Vec<String>,
}

impl Scope {
    pub fn new(
        coords: impl IntoIterator<Item = impl Into<String>>,
        params: impl IntoIterator<Item = impl Into<String>>,
        slots: impl IntoIterator<Item = impl Into<String>>,
    ) -> Result<Scope, ExprError> {
        let scope = Scope {
            coords: coords.into_iter().map(Into::into).collect(),
            params: params.into_iter().map(Into::into).collect(),
            slots: slots.into_iter().map(Into::into).collect(),
        };
        let mut seen = std::collections::HashSet::new();
        for name in scope.coords.iter().chain(&scope.params).chain(&scope.slots) {
            if !is_identifier(name) {
                return Err(ExprError::Scope(format!(
                    "`{name}` is not a valid identifier"
                )));
            }
            if Func::from_name(name).is_some() {
                return Err(ExprError::Scope(format!(
                    "`{name}` is a reserved function name"
                )));
            }
            if !seen.insert(name.as_str()) {
                return Err(ExprError::Scope(format!("`{name}` is declared twice")));
            }
        }
        Ok(scope)
    }

    /// Scope of a slot body: its single variable plus the real parameters.
    pub fn for_slot(var: &str, params: &[String]) -> Result<Scope, ExprError> {
        Scope::new([var], params.iter().cloned(), Vec::<String>::new())
    }
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Body of a slot: an expression in one variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotFn {
    pub name: String,
    pub var: String,
    pub body: Expr,
}

/// Values for the parameters and slots of a [`Scope`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings {
    pub params: Vec<f64>,
    pub slots: Vec<SlotFn>,
}

impl Bindings {
    pub fn params(params: Vec<f64>) -> Bindings {
        Bindings {
            params,
            slots: Vec::new(),
        }
    }

    pub fn check(&self, scope: &Scope) -> Result<(), ExprError> {
        if self.params.len() != scope.params.len() {
            return Err(ExprError::Binding {
                what: "parameter",
                expected: scope.params.len(),
                found: self.params.len(),
            });
        }
        if self.slots.len() != scope.slots.len() {
            return Err(ExprError::Binding {
                what: "slot",
                expected: scope.slots.len(),
                found: self.slots.len(),
            });
        }
        Ok(())
    }
}

/// Coordinate jets `x_i` at `point`.
pub fn coordinate_jets(point: &[f64], order: usize) -> Vec<Jet> {
    let dim = point.len();
    point
        .iter()
        .enumerate()
        .map(|(i, &x)| Jet::variable(i, x, dim, order).expect("index in range"))
        .collect()
}

impl Expr {
    pub fn lit(v: f64) -> Expr {
        Expr::Lit(v)
    }

    pub fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }

    /// Canonical text; `parse` of the result is structurally equal to `self`.
    pub fn serialize(&self) -> String {
        self.to_string()
    }

    /// Jet of the expression given the coordinate jets.
    pub fn eval_jet(&self, coords: &[Jet], bindings: &Bindings) -> Result<Jet, ExprError> {
        let wrap = |source: JetError| ExprError::Eval {
            expr: self.to_string(),
            source,
        };
        let like = &coords[0];
        Ok(match self {
            Expr::Lit(v) => like.constant_like(*v),
            Expr::Coord { index, .. } => coords[*index].clone(),
            Expr::Param { index, .. } => like.constant_like(bindings.params[*index]),
            Expr::Neg(a) => -a.eval_jet(coords, bindings)?,
            Expr::Binary(op, a, b) => {
                let a = a.eval_jet(coords, bindings)?;
                let b = b.eval_jet(coords, bindings)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a.checked_div(&b).map_err(wrap)?,
                }
            }
            Expr::Pow(base, exponent) => {
                let base = base.eval_jet(coords, bindings)?;
                match *exponent {
                    Exponent::Int(n) => base.powi(n).map_err(wrap)?,
                    // exp(p log b): requires a positive base
                    Exponent::Real(p) => base
                        .apply(Univariate::Log)
                        .map(|l| l.scale(p))
                        .and_then(|l| l.apply(Univariate::Exp))
                        .map_err(wrap)?,
                }
            }
            Expr::Call(f, a) => a
                .eval_jet(coords, bindings)?
                .apply(f.univariate())
                .map_err(wrap)?,
            Expr::Slot {
                index,
                derivative,
                arg,
                ..
            } => {
                let arg = arg.eval_jet(coords, bindings)?;
                let series = slot_series(
                    &bindings.slots[*index],
                    &bindings.params,
                    arg.value(),
                    arg.order(),
                    *derivative as usize,
                )?;
                arg.compose_series(&series)
            }
        })
    }

    /// Plain double evaluation at a point.
    pub fn eval(&self, point: &[f64], bindings: &Bindings) -> Result<f64, ExprError> {
        let wrap = |source: JetError| ExprError::Eval {
            expr: self.to_string(),
            source,
        };
        Ok(match self {
            Expr::Lit(v) => *v,
            Expr::Coord { index, .. } => point[*index],
            Expr::Param { index, .. } => bindings.params[*index],
            Expr::Neg(a) => -a.eval(point, bindings)?,
            Expr::Binary(op, a, b) => {
                let a = a.eval(point, bindings)?;
                let b = b.eval(point, bindings)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(wrap(JetError::DivisionByZero));
                        }
                        a / b
                    }
                }
            }
            Expr::Pow(base, exponent) => {
                let b = base.eval(point, bindings)?;
                match *exponent {
                    Exponent::Int(n) => {
                        if n < 0 && b == 0.0 {
                            return Err(wrap(JetError::DivisionByZero));
                        }
                        b.powi(n)
                    }
                    Exponent::Real(p) => {
                        let l = Univariate::Log.eval(b).map_err(wrap)?;
                        (p * l).exp()
                    }
                }
            }
            Expr::Call(f, a) => f
                .univariate()
                .eval(a.eval(point, bindings)?)
                .map_err(wrap)?,
            Expr::Slot {
                index,
                derivative,
                arg,
                ..
            } => {
                let x = arg.eval(point, bindings)?;
                slot_series(
                    &bindings.slots[*index],
                    &bindings.params,
                    x,
                    0,
                    *derivative as usize,
                )?[0]
            }
        })
    }

    /// Visits every node, parents before children.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Expr)) {
        visit(self);
        match self {
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.walk(visit),
            Expr::Binary(_, a, b) => {
                a.walk(visit);
                b.walk(visit);
            }
            Expr::Slot { arg, .. } => arg.walk(visit),
            _ => {}
        }
    }

    /// Whether any coordinate appears in the expression.
    pub fn is_constant(&self) -> bool {
        let mut constant = true;
        self.walk(&mut |e| {
            if matches!(e, Expr::Coord { .. }) {
                constant = false;
            }
        });
        constant
    }
}

/// Taylor coefficients of `slot^(derivative)` at `x0`, up to `order`.
fn slot_series(
    slot: &SlotFn,
    params: &[f64],
    x0: f64,
    order: usize,
    derivative: usize,
) -> Result<Vec<f64>, ExprError> {
    let inner = Bindings::params(params.to_vec());
    let var = Jet::variable(0, x0, 1, order + derivative).expect("one variable");
    let jet = slot.body.eval_jet(std::slice::from_ref(&var), &inner)?;
    let coeffs = jet.coefficients();
    // c_m of f^(d) is c_{m+d} (m+d)!/m!
    Ok((0..=order)
        .map(|m| {
            let rising: f64 = ((m + 1)..=(m + derivative)).map(|k| k as f64).product();
            coeffs[m + derivative] * rising
        })
        .collect())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Lit(v) => {
                if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) {
                    // only reachable for programmatically built trees
                    write!(f, "(0-{})", -v)
                } else {
                    write!(f, "{v}")
                }
            }
            Expr::Coord { name, .. } | Expr::Param { name, .. } => f.write_str(name),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, a.precedence() < 3)
            }
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                write_child(f, a, a.precedence() < p)?;
                write!(f, "{}", op.symbol())?;
                write_child(f, b, b.precedence() <= p)
            }
            Expr::Pow(base, exponent) => {
                write_child(f, base, base.precedence() < 5)?;
                match exponent {
                    Exponent::Int(n) if *n < 0 => write!(f, "^({n})"),
                    Exponent::Int(n) => write!(f, "^{n}"),
                    Exponent::Real(p) if *p < 0.0 => write!(f, "^({p:?})"),
                    Exponent::Real(p) => write!(f, "^{p:?}"),
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Slot {
                name,
                derivative,
                arg,
                ..
            } => {
                f.write_str(name)?;
                for _ in 0..*derivative {
                    f.write_str("'")?;
                }
                write!(f, "({arg})")
            }
        }
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, paren: bool) -> fmt::Result {
    if paren {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scope(coords: &[&str], params: &[&str]) -> Scope {
        Scope::new(
            coords.iter().copied(),
            params.iter().copied(),
            Vec::<String>::new(),
        )
        .unwrap()
    }

    #[test]
    fn parse_sum_with_call() {
        let s = scope(&["u", "v", "x"], &[]);
        let e = parse("2+sin(v)", &s).unwrap();
        assert_eq!(
            e,
            Expr::binary(
                BinOp::Add,
                Expr::Lit(2.0),
                Expr::Call(
                    Func::Sin,
                    Box::new(Expr::Coord {
                        index: 1,
                        name: "v".into()
                    })
                )
            )
        );
    }

    #[test]
    fn parse_positive_curvature_profile() {
        let s = scope(&["u", "v", "x"], &["k"]);
        assert!(parse("arctanh(tan(x*sqrt(k)/(2*sqrt(2))))", &s).is_ok());
    }

    #[test]
    fn unterminated_call_offset() {
        let s = scope(&["x"], &[]);
        match parse("log(", &s) {
            Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_and_implicit_multiplication() {
        let s = scope(&["x"], &[]);
        assert!(matches!(
            parse("y+1", &s),
            Err(ExprError::UnknownIdentifier { ref name, offset: 0 }) if name == "y"
        ));
        assert!(matches!(
            parse("2x", &s),
            Err(ExprError::Syntax { offset: 1, .. })
        ));
        assert!(matches!(
            parse("sin(x, x)", &s),
            Err(ExprError::Arity { .. })
        ));
        assert!(matches!(parse("sin()", &s), Err(ExprError::Arity { .. })));
        assert!(matches!(
            parse("atanh(x)", &s),
            Err(ExprError::UnknownIdentifier { .. })
        ));
        assert!(matches!(parse("x^x", &s), Err(ExprError::Syntax { .. })));
    }

    #[test]
    fn precedence() {
        let s = scope(&["x", "y"], &[]);
        let b = Bindings::default();
        let at = |text: &str| parse(text, &s).unwrap().eval(&[2.0, 3.0], &b).unwrap();
        assert_eq!(at("-x^2"), -4.0);
        assert_eq!(at("1-x-y"), -4.0);
        assert_eq!(at("x/y*y"), 2.0);
        assert_eq!(at("2*x^3^2"), 128.0);
        assert_eq!(at("x^-1"), 0.5);
        assert_eq!(at("x^(-2)"), 0.25);
        assert_eq!(at("(x+y)*2"), 10.0);
    }

    #[test]
    fn eval_product_jet() {
        let s = scope(&["u", "v"], &[]);
        let e = parse("u*v", &s).unwrap();
        let j = e
            .eval_jet(&coordinate_jets(&[2.0, 3.0], 2), &Bindings::default())
            .unwrap();
        assert_eq!(j.value(), 6.0);
        assert_eq!(j.partial(&[1, 0]).unwrap(), 3.0);
        assert_eq!(j.partial(&[0, 1]).unwrap(), 2.0);
        assert_eq!(j.partial(&[1, 1]).unwrap(), 1.0);
    }

    #[test]
    fn eval_domain_errors() {
        let s = scope(&["u", "v", "x"], &[]);
        let e = parse("log(v*x)", &s).unwrap();
        let err = e
            .eval_jet(&coordinate_jets(&[0.0, -1.0, 1.0], 1), &Bindings::default())
            .unwrap_err();
        assert!(matches!(
            err,
            ExprError::Eval {
                source: JetError::Domain { func: "log", .. },
                ..
            }
        ));
        assert!(e.eval(&[0.0, -1.0, 1.0], &Bindings::default()).is_err());
        let r = parse("x^0.5", &s).unwrap();
        assert!(r.eval(&[0.0, 0.0, -4.0], &Bindings::default()).is_err());
    }

    #[test]
    fn serialize_round_trips() {
        let s = scope(&["u", "v", "x"], &["k"]);
        for text in [
            "2+sin(v)",
            "x^2 * (log(x)-2)",
            "x^2*((log(x)-2)*log(x)+2)/v^2+x^2*0*(1-log(x))/v",
            "-(u-v)-(-x)",
            "1e-7*x^2.5+x^(-0.25)-k^-3",
            "--x",
            "x/(u*v)/(u/v)",
            "(x^2)^3",
        ] {
            let parsed = match parse(text, &s) {
                Ok(e) => e,
                Err(_) => continue,
            };
            let again = parse(&parsed.serialize(), &s).unwrap();
            assert_eq!(parsed, again, "{text} -> {}", parsed.serialize());
        }
    }

    #[test]
    fn slots_and_derivatives() {
        let s = Scope::new(["u", "v", "x"], Vec::<String>::new(), ["alpha"]).unwrap();
        let slot_scope = Scope::for_slot("v", &[]).unwrap();
        let b = Bindings {
            params: vec![],
            slots: vec![SlotFn {
                name: "alpha".into(),
                var: "v".into(),
                body: parse("2+sin(v)", &slot_scope).unwrap(),
            }],
        };
        let e = parse("alpha''(v)/alpha(v)*x^2", &s).unwrap();
        let p = [0.3, 0.7, 1.1];
        let want = -0.7f64.sin() / (2.0 + 0.7f64.sin()) * 1.21;
        assert!((e.eval(&p, &b).unwrap() - want).abs() < 1e-14);
        let j = e.eval_jet(&coordinate_jets(&p, 3), &b).unwrap();
        assert!((j.value() - want).abs() < 1e-14);
        // d/dx of the above is 2 x alpha''/alpha
        let dx = -0.7f64.sin() / (2.0 + 0.7f64.sin()) * 2.2;
        assert!((j.partial(&[0, 0, 1]).unwrap() - dx).abs() < 1e-14);
        assert_eq!(parse(&e.serialize(), &s).unwrap(), e);
        // alpha'(2x) = cos(2x), so d/dx = -2 sin(2x)
        let chained = parse("alpha'(2*x)", &s).unwrap();
        let j = chained.eval_jet(&coordinate_jets(&p, 2), &b).unwrap();
        assert!((j.value() - 2.2f64.cos()).abs() < 1e-14);
        assert!((j.partial(&[0, 0, 1]).unwrap() + 2.0 * 2.2f64.sin()).abs() < 1e-13);
        assert!((j.partial(&[0, 0, 2]).unwrap() + 4.0 * 2.2f64.cos()).abs() < 1e-13);
    }

    #[test]
    fn scope_validation() {
        assert!(Scope::new(["x", "x"], Vec::<String>::new(), Vec::<String>::new()).is_err());
        assert!(Scope::new(["sin"], Vec::<String>::new(), Vec::<String>::new()).is_err());
        assert!(Scope::new(["2x"], Vec::<String>::new(), Vec::<String>::new()).is_err());
    }
}
