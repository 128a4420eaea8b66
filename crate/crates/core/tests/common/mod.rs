//! Fixtures shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wefe_core::catalog::{self, FamilyDef};
use wefe_core::{parse, Bindings, Expr, Scope};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random smooth expression over `coords`, finite and well conditioned on
/// `[-1, 1]^n`: every division, log, root and inverse-hyperbolic argument is
/// kept away from its singular set by construction.
pub fn random_expr(rng: &mut impl Rng, coords: &[&str], depth: u32) -> String {
    if depth == 0 || rng.random_bool(0.2) {
        let c = coords[rng.random_range(0..coords.len())];
        let k: f64 = (rng.random_range(-20..=20) as f64) / 10.0;
        return match rng.random_range(0..3) {
            0 => c.to_string(),
            1 => format!("{k}"),
            _ => format!("{k}*{c}"),
        };
    }
    let a = random_expr(rng, coords, depth - 1);
    match rng.random_range(0..15) {
        0 => format!("{a}+{}", random_expr(rng, coords, depth - 1)),
        1 => format!("{a}-({})", random_expr(rng, coords, depth - 1)),
        2 => format!("({a})*({})", random_expr(rng, coords, depth - 1)),
        3 => format!("({a})/(2+sin({}))", random_expr(rng, coords, depth - 1)),
        4 => format!("({a})^2"),
        5 => format!("sin({a})"),
        6 => format!("cos({a})"),
        7 => format!("exp(0.5*sin({a}))"),
        8 => format!("sinh(sin({a}))"),
        9 => format!("cosh(cos({a}))"),
        10 => format!("log(2+cos({a}))"),
        11 => format!("sqrt(2+sin({a}))"),
        12 => format!("tan(0.5*sin({a}))"),
        13 => format!("arctanh(0.5*cos({a}))"),
        _ => format!("(2+sin({a}))^1.5"),
    }
}

pub fn coord_scope(coords: &[&str]) -> Scope {
    Scope::new(
        coords.iter().copied(),
        Vec::<String>::new(),
        Vec::<String>::new(),
    )
    .unwrap()
}

pub fn parse_in(src: &str, coords: &[&str]) -> Expr {
    parse(src, &coord_scope(coords)).unwrap_or_else(|e| panic!("`{src}`: {e}"))
}

/// All multi-indices in `dim` variables of total degree `1..=max_degree`.
pub fn multi_indices(dim: usize, max_degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut stack = vec![(Vec::new(), 0usize)];
    while let Some((prefix, degree)) = stack.pop() {
        if prefix.len() == dim {
            if degree > 0 {
                out.push(prefix);
            }
            continue;
        }
        for k in 0..=(max_degree - degree) {
            let mut next = prefix.clone();
            next.push(k);
            stack.push((next, degree + k));
        }
    }
    out.sort_by_key(|m| (m.iter().sum::<usize>(), m.clone()));
    out
}

/// Central-difference weights for the `n`-th derivative, as (offset, weight)
/// in units of the step; each has an `O(step^2)` leading error.
fn stencil(n: usize) -> &'static [(f64, f64)] {
    match n {
        0 => &[(0.0, 1.0)],
        1 => &[(-1.0, -0.5), (1.0, 0.5)],
        2 => &[(-1.0, 1.0), (0.0, -2.0), (1.0, 1.0)],
        3 => &[(-2.0, -0.5), (-1.0, 1.0), (1.0, -1.0), (2.0, 0.5)],
        _ => panic!("stencil for order {n} not tabulated"),
    }
}

fn central_difference(f: &dyn Fn(&[f64]) -> f64, point: &[f64], multi: &[usize], step: f64) -> f64 {
    // tensor product of the one-dimensional stencils
    let mut terms: Vec<(Vec<f64>, f64)> = vec![(point.to_vec(), 1.0)];
    for (var, &n) in multi.iter().enumerate() {
        terms = terms
            .into_iter()
            .flat_map(|(p, w)| {
                stencil(n).iter().map(move |&(offset, weight)| {
                    let mut q = p.clone();
                    q[var] += offset * step;
                    (q, w * weight)
                })
            })
            .collect();
    }
    let total: f64 = terms.iter().map(|(p, w)| w * f(p)).sum();
    let degree = multi.iter().sum::<usize>() as i32;
    total / step.powi(degree)
}

/// Finite-difference partial with two Richardson levels over steps
/// `s, s/2, s/4`, cancelling the `s^2` and `s^4` error terms. The base step
/// grows with the derivative order to balance truncation against rounding.
pub fn fd_partial(f: &dyn Fn(&[f64]) -> f64, point: &[f64], multi: &[usize]) -> f64 {
    let step = match multi.iter().sum::<usize>() {
        1 => 1e-3,
        2 => 4e-3,
        _ => 1e-2,
    };
    let d = [1.0, 2.0, 4.0].map(|k| central_difference(f, point, multi, step / k));
    let r1 = (4.0 * d[1] - d[0]) / 3.0;
    let r2 = (4.0 * d[2] - d[1]) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

/// Worst relative disagreement between the jet partials of `src` at `point`
/// and the finite-difference oracle, over all multi-indices up to `order`.
/// Each order is measured against `max(1, largest partial of that order)`.
pub fn jet_vs_fd(src: &str, coords: &[&str], point: &[f64], order: usize) -> f64 {
    let e = parse_in(src, coords);
    let bindings = Bindings::default();
    let jet = e
        .eval_jet(&wefe_core::expr::coordinate_jets(point, order), &bindings)
        .unwrap_or_else(|err| panic!("`{src}` at {point:?}: {err}"));
    let f = |p: &[f64]| e.eval(p, &bindings).unwrap();
    let all = multi_indices(coords.len(), order);
    let mut worst: f64 = 0.0;
    for degree in 1..=order {
        let of_degree: Vec<&Vec<usize>> = all
            .iter()
            .filter(|m| m.iter().sum::<usize>() == degree)
            .collect();
        let exact: Vec<f64> = of_degree.iter().map(|m| jet.partial(m).unwrap()).collect();
        let scale = exact.iter().fold(1.0f64, |s, d| s.max(d.abs()));
        for (m, d) in of_degree.iter().zip(&exact) {
            let fd = fd_partial(&f, point, m);
            worst = worst.max((d - fd).abs() / scale);
        }
    }
    worst
}

pub const MINKOWSKI_COORDS: [&str; 4] = ["t", "x", "y", "z"];

/// A Lorentzian metric `η + 0.1 P` on `[-1, 1]^4` with random bounded
/// perturbations `P_ij = sin(e_ij)`; Gershgorin keeps the signature fixed.
pub fn perturbed_minkowski(seed: u64) -> FamilyDef {
    let mut r = rng(seed);
    let mut components = String::new();
    for (i, ci) in MINKOWSKI_COORDS.iter().enumerate() {
        for (j, cj) in MINKOWSKI_COORDS.iter().enumerate().skip(i) {
            let base = match (i, j) {
                (0, 0) => "-1",
                _ if i == j => "1",
                _ => "0",
            };
            let e = random_expr(&mut r, &MINKOWSKI_COORDS, 2);
            components.push_str(&format!("\"{ci},{cj}\" = \"{base}+0.1*sin({e})\"\n"));
        }
    }
    let h = random_expr(&mut r, &MINKOWSKI_COORDS, 2);
    let text = format!(
        r#"
id = "perturbed-minkowski-{seed}"
description = "random perturbation of flat space"
class = "brinkmann"

[chart]
coords = ["t", "x", "y", "z"]

[metric.components]
{components}
[density]
h = "2+sin({h})"

[sampling.box]
t = [-1.0, 1.0]
x = [-1.0, 1.0]
y = [-1.0, 1.0]
z = [-1.0, 1.0]
"#
    );
    catalog::from_toml(&text).unwrap_or_else(|e| panic!("{e}\n{text}"))
}
