use super::*;
use crate::expr::{coordinate_jets, parse, Bindings, Scope};
use crate::tensor::{Chart, MetricKind};

fn metric(coords: &[&str], comps: &[(usize, usize, &str)]) -> MetricSpec {
    let n = coords.len();
    let scope = Scope::new(
        coords.iter().copied(),
        Vec::<String>::new(),
        Vec::<String>::new(),
    )
    .unwrap();
    let mut packed = vec![Expr::Lit(0.0); n * (n + 1) / 2];
    for &(i, j, text) in comps {
        packed[packed_index(n, i, j)] = parse(text, &scope).unwrap();
    }
    let chart = Chart::new(coords.iter().map(|s| s.to_string()).collect(), vec![]).unwrap();
    MetricSpec::new(chart, packed, MetricKind::Lorentzian, Bindings::default()).unwrap()
}

fn scalar(m: &MetricSpec, text: &str, p: &[f64], order: usize) -> Jet {
    let scope = Scope::new(
        m.chart.coords().iter().cloned(),
        Vec::<String>::new(),
        Vec::<String>::new(),
    )
    .unwrap();
    parse(text, &scope)
        .unwrap()
        .eval_jet(&coordinate_jets(p, order), &Bindings::default())
        .unwrap()
}

fn pack(m: &MetricSpec, p: &[f64], order: usize) -> CurvaturePack {
    CurvaturePack::from_metric(m.eval(p, order).unwrap()).unwrap()
}

fn brinkmann(f: &str) -> MetricSpec {
    metric(&["u", "v", "x"], &[(0, 1, "1"), (1, 1, f), (2, 2, "1")])
}

fn de_sitter(kappa: f64) -> MetricSpec {
    let k2 = format!("{}", kappa * kappa);
    metric(
        &["x", "y", "z"],
        &[
            (0, 0, &format!("-{k2}*cos(y)^2")),
            (1, 1, &k2),
            (2, 2, &format!("{k2}*sin(y)^2")),
        ],
    )
}

const KUNDT_F: &str = "u^2/x^2+(0-2*log(x)/v)*u+x^2*((log(x)-2)*log(x)+2)/v^2";

/// Kundt solution with vanishing free functions; `g_uv = 1`, `g_vx = W`.
fn kundt() -> MetricSpec {
    metric(
        &["u", "v", "x"],
        &[(0, 1, "1"), (1, 1, KUNDT_F), (1, 2, "-2*u/x"), (2, 2, "1")],
    )
}

/// Central differences with one Richardson step.
fn fd_gradient(f: &dyn Fn(&[f64]) -> Vec<f64>, p: &[f64], var: usize, step: f64) -> Vec<f64> {
    let central = |h: f64| {
        let mut a = p.to_vec();
        let mut b = p.to_vec();
        a[var] += h;
        b[var] -= h;
        f(&a)
            .iter()
            .zip(f(&b))
            .map(|(x, y)| (x - y) / (2.0 * h))
            .collect::<Vec<_>>()
    };
    let coarse = central(step);
    let fine = central(step / 2.0);
    fine.iter()
        .zip(coarse)
        .map(|(f, c)| (4.0 * f - c) / 3.0)
        .collect()
}

fn fd_christoffel(g: &dyn Fn(&[f64]) -> Vec<f64>, p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let dg: Vec<Vec<f64>> = (0..n).map(|l| fd_gradient(g, p, l, 1e-4)).collect();
    let g_inv = crate::linalg::invert(&g(p), n).unwrap();
    let mut out = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                out[(k * n + i) * n + j] = (0..n)
                    .map(|l| {
                        0.5 * g_inv[k * n + l]
                            * (dg[i][j * n + l] + dg[j][i * n + l] - dg[l][i * n + j])
                    })
                    .sum();
            }
        }
    }
    out
}

fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol * (1.0 + b.abs()), "{what}: {a} vs {b}");
}

#[test]
fn minkowski_connection_vanishes() {
    let m = metric(&["t", "x", "y"], &[(0, 0, "-1"), (1, 1, "1"), (2, 2, "1")]);
    let c = pack(&m, &[0.1, 0.2, 0.3], 3);
    assert_eq!(c.christoffel.values().max_abs(), 0.0);
    assert_eq!(c.riemann.values().max_abs(), 0.0);
    assert_eq!(c.scalar_invariants(), (0.0, 0.0, 0.0));
}

#[test]
fn de_sitter_christoffel_matches_finite_differences() {
    let p = [0.2, 0.7, 0.4];
    let c = pack(&de_sitter(1.0), &p, 3);
    let g = |q: &[f64]| {
        vec![
            -q[1].cos().powi(2),
            0.0,
            0.0,
            0.0,
            1.0,
            0.0,
            0.0,
            0.0,
            q[1].sin().powi(2),
        ]
    };
    let oracle = fd_christoffel(&g, &p);
    let mut independent = 0;
    for k in 0..3 {
        for i in 0..3 {
            for j in i..3 {
                independent += 1;
                assert_close(
                    c.christoffel.get(&[k, i, j]).value(),
                    oracle[(k * 3 + i) * 3 + j],
                    1e-6,
                    "Γ",
                );
            }
        }
    }
    assert_eq!(independent, 18);
}

#[test]
fn brinkmann_christoffel_matches_finite_differences() {
    let m = brinkmann("sin(v)*x^2+v*x");
    let p = [0.3, 1.1, -0.6];
    let c = pack(&m, &p, 3);
    let g = |q: &[f64]| {
        let f = q[1].sin() * q[2] * q[2] + q[1] * q[2];
        vec![0.0, 1.0, 0.0, 1.0, f, 0.0, 0.0, 0.0, 1.0]
    };
    let oracle = fd_christoffel(&g, &p);
    for (a, b) in c.christoffel.values().data().iter().zip(&oracle) {
        assert_close(*a, *b, 1e-6, "Γ");
    }
}

#[test]
fn de_sitter_and_anti_de_sitter_scalar_curvature() {
    for kappa in [1.0, 1.5, 2.0] {
        let c = pack(&de_sitter(kappa), &[0.2, 0.7, 0.4], 2);
        assert_close(c.scalar.value(), 6.0 / (kappa * kappa), 1e-12, "τ(dS)");
        let (tau, ricci_sq, _) = c.scalar_invariants();
        assert_close(tau, 6.0 / (kappa * kappa), 1e-12, "τ");
        // Einstein in dimension 3: ρ = (τ/3) g, so ρ·ρ = τ²/3
        assert_close(ricci_sq, 12.0 / kappa.powi(4), 1e-12, "ρ·ρ");
    }
    let k2 = "2.25";
    let ads = metric(
        &["x", "y", "z"],
        &[
            (0, 0, &format!("-{k2}*cosh(y)^2")),
            (1, 1, k2),
            (2, 2, &format!("{k2}*sinh(y)^2")),
        ],
    );
    let c = pack(&ads, &[0.1, 0.8, -0.3], 2);
    assert_close(c.scalar.value(), -6.0 / 2.25, 1e-12, "τ(AdS)");
}

#[test]
fn brinkmann_scalar_curvature_is_second_u_derivative() {
    // ∂_u² (u² x sin v + u x³) = 2 x sin v
    let m = brinkmann("u^2*x*sin(v)+u*x^3");
    for p in [[0.3, 1.1, -0.6], [1.2, -0.4, 0.9]] {
        let c = pack(&m, &p, 2);
        assert_close(c.scalar.value(), 2.0 * p[2] * p[1].sin(), 1e-12, "τ");
    }
}

#[test]
fn pp_wave_ricci_has_single_component() {
    let m = metric(
        &["u", "v", "x1", "x2"],
        &[
            (0, 1, "1"),
            (1, 1, "sin(x1)*x2^2+v*x1^3"),
            (2, 2, "1"),
            (3, 3, "1"),
        ],
    );
    let p = [0.5, 0.7, 0.3, -1.1];
    let c = pack(&m, &p, 2);
    let (v, x1, x2) = (p[1], p[2], p[3]);
    let laplacian = -x1.sin() * x2 * x2 + 2.0 * x1.sin() + 6.0 * v * x1;
    for idx in multi_indices(4, 2) {
        let want = if idx == [1, 1] { -0.5 * laplacian } else { 0.0 };
        assert_close(c.ricci.get(&idx).value(), want, 1e-12, "ρ");
    }
    // Ricci operator squares to zero
    let ric = c.ricci_operator();
    let sq = crate::tensor::matmul(&ric, &ric, vec![Up, Down]);
    assert!(sq.max_abs() < 1e-14);
}

#[test]
fn riemann_symmetries_and_bianchi_on_a_generic_metric() {
    let m = metric(
        &["t", "x", "y", "z"],
        &[
            (0, 0, "-1-0.2*x*y+0.1*z^3"),
            (0, 1, "0.1*sin(x*z)"),
            (1, 1, "1+0.3*t*x^2"),
            (1, 3, "0.2*y*t"),
            (2, 2, "1+0.1*exp(z)"),
            (2, 3, "-0.15*x^2"),
            (3, 3, "1+0.25*t*y"),
        ],
    );
    let c = pack(&m, &[0.2, -0.3, 0.4, 0.1], 3);
    let r = c.riemann.values();
    let scale = 1.0 + r.max_abs();
    for idx in multi_indices(4, 4) {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        let v = r.get(&idx);
        assert!((v + r.get(&[j, i, k, l])).abs() < 1e-12 * scale);
        assert!((v + r.get(&[i, j, l, k])).abs() < 1e-12 * scale);
        assert!((v - r.get(&[k, l, i, j])).abs() < 1e-12 * scale);
        let cyclic = v + r.get(&[i, k, l, j]) + r.get(&[i, l, j, k]);
        assert!(cyclic.abs() < 1e-12 * scale);
    }
    // contracted Bianchi: div ρ = ½ dτ
    let div = divergence(&c.ricci, &c.g_inv, &c.christoffel).unwrap();
    for j in 0..4 {
        let dtau = c.scalar.derivative(j).unwrap().value();
        assert!((div.get(&[j]).value() - 0.5 * dtau).abs() < 1e-11);
    }
    // Weyl is totally traceless
    let w = c.weyl();
    assert!(!w.vanishes_by_dimension);
    let g_inv = c.g_inv.values();
    let wv = w.tensor.values();
    for j in 0..4 {
        for l in 0..4 {
            let tr: f64 = (0..4)
                .flat_map(|i| (0..4).map(move |k| (i, k)))
                .map(|(i, k)| g_inv.get(&[i, k]) * wv.get(&[i, j, k, l]))
                .sum();
            assert!(tr.abs() < 1e-12, "trace {tr}");
        }
    }
    // metric compatibility
    let nabla_g = cov_derivative(&c.g, &c.christoffel).unwrap();
    assert!(nabla_g.data().iter().all(|j| j.max_abs() < 1e-12));
}

#[test]
fn bochner_formula() {
    let m = metric(
        &["t", "x", "y"],
        &[
            (0, 0, "-1+0.2*x*y"),
            (0, 2, "0.1*t^2"),
            (1, 1, "1+0.3*sin(y)"),
            (2, 2, "1+0.1*t*x"),
        ],
    );
    let p = [0.3, 0.2, -0.4];
    let c = pack(&m, &p, 3);
    let h = scalar(&m, "2+sin(t*x)+y^2*x", &p, 3);
    let d = DensityPack::new(&h, &c, 0.0, 1.0).unwrap();
    let div_hes = divergence(&d.h.hessian, &c.g_inv, &c.christoffel).unwrap();
    for j in 0..3 {
        let dlap = d.h.laplacian.derivative(j).unwrap().value();
        let ric_grad: f64 = (0..3)
            .map(|i| c.ricci.get(&[i, j]).value() * d.h.gradient.get(&[i]).value())
            .sum();
        let res = div_hes.get(&[j]).value() - dlap - ric_grad;
        assert!(res.abs() < 1e-11, "Bochner residual {res}");
    }
    // ∇(dh) is Hes_h
    let nabla_dh = cov_derivative(&d.h.differential, &c.christoffel).unwrap();
    for idx in multi_indices(3, 2) {
        assert!((nabla_dh.get(&idx).value() - d.h.hessian.get(&idx).value()).abs() < 1e-13);
        assert!(
            (nabla_dh.get(&idx).value() - nabla_dh.get(&[idx[1], idx[0]]).value()).abs() < 1e-13
        );
    }
    // trace identity: tr G^h = hτ + (n−1)Δh + nΛ
    let d = DensityPack { lambda: 0.7, ..d };
    let gh = weighted_einstein(&c, &d);
    let tr = trace(&gh, &c.g_inv.truncate(1)).value();
    let want = h.value() * c.scalar.value() + 2.0 * d.h.laplacian.value() + 3.0 * 0.7;
    assert!((tr - want).abs() < 1e-12);
}

#[test]
fn corrupted_connection_breaks_contracted_bianchi() {
    let m = metric(
        &["t", "x", "y"],
        &[
            (0, 0, "-1+0.2*x*y"),
            (1, 1, "1+0.3*sin(y)"),
            (2, 2, "1+0.1*t*x"),
        ],
    );
    let g = m.eval(&[0.3, 0.2, -0.4], 3).unwrap();
    let good = CurvaturePack::from_metric(g.clone()).unwrap();
    let mut gamma = good.christoffel.clone();
    // corrupt one component with a non-constant perturbation
    let bump = {
        let coords = coordinate_jets(&[0.3, 0.2, -0.4], 2);
        coords[1].scale(1e-3)
    };
    *gamma.get_mut(&[0, 1, 1]) += &bump;
    let bad = CurvaturePack::from_connection(g, good.g_inv.clone(), gamma).unwrap();
    let residual = |c: &CurvaturePack| {
        let div = divergence(&c.ricci, &c.g_inv, &c.christoffel).unwrap();
        (0..3)
            .map(|j| (div.get(&[j]).value() - 0.5 * c.scalar.derivative(j).unwrap().value()).abs())
            .fold(0.0, f64::max)
    };
    assert!(residual(&good) < 1e-12);
    assert!(residual(&bad) > 1e-6, "{}", residual(&bad));
}

#[test]
fn plane_wave_solution_and_pp_wave_gh_uu() {
    let m = brinkmann("sin(v)/(2+sin(v))*x^2");
    for p in [[0.4, 0.9, 1.3], [-1.0, 2.5, -0.7]] {
        let c = pack(&m, &p, 3);
        let h = scalar(&m, "2+sin(v)", &p, 3);
        let d = DensityPack::new(&h, &c, 0.0, 1.0).unwrap();
        let gh = weighted_einstein(&c, &d).values();
        assert!(gh.max_abs() < 1e-12 * weighted_einstein_scale(&c, &d));
        assert!(d.h.grad_norm2.value().abs() < 1e-15);
        let os = optical_scalars(&c, &d.h).unwrap();
        assert!(
            os.expansion.abs() < 1e-12 && os.shear_sq.abs() < 1e-12 && os.twist_sq.abs() < 1e-12
        );
    }
    // generic h on a pp-wave: G^h(∂_u,∂_u) = −∂_u² h
    let m = brinkmann("x^3*v");
    let p = [0.6, 0.4, 0.8];
    let c = pack(&m, &p, 3);
    let h = scalar(&m, "3+u^2*v+sin(u*x)", &p, 3);
    let d = DensityPack::new(&h, &c, 0.2, 1.0).unwrap();
    let gh = weighted_einstein(&c, &d);
    let huu = 2.0 * p[1] - (p[0] * p[2]).sin() * p[2] * p[2];
    assert!((gh.get(&[0, 0]).value() + huu).abs() < 1e-12);
}

#[test]
fn flat_space_with_unit_density_has_zero_gh() {
    let m = metric(&["t", "x", "y"], &[(0, 0, "-1"), (1, 1, "1"), (2, 2, "1")]);
    let p = [0.1, 0.2, 0.3];
    let c = pack(&m, &p, 3);
    let d = DensityPack::new(&scalar(&m, "1", &p, 3), &c, 0.0, 1.0).unwrap();
    assert_eq!(weighted_einstein(&c, &d).values().max_abs(), 0.0);
    assert_eq!(d.h.hessian.values().max_abs(), 0.0);
    assert_eq!(d.h.laplacian.value(), 0.0);
    // μ = 0, f = x: Bakry-Émery tensor vanishes
    let f = ScalarDerivatives::new(&scalar(&m, "x", &p, 3), &c).unwrap();
    assert_eq!(bakry_emery(&c, &f, 0.0).values().max_abs(), 0.0);
    assert!(DensityPack::new(&scalar(&m, "x-1", &p, 3), &c, 0.0, 1.0).is_err());
}

#[test]
fn bakry_emery_reproduces_gh() {
    let m = brinkmann("u*x^2+sin(v)");
    let p = [0.3, 0.5, 0.7];
    let c = pack(&m, &p, 3);
    let h = scalar(&m, "2+u*v+x^2", &p, 3);
    let f = scalar(&m, "-log(2+u*v+x^2)", &p, 3);
    let d = DensityPack::new(&h, &c, 0.4, 1.0).unwrap();
    let gh = weighted_einstein(&c, &d).values();
    let fd = ScalarDerivatives::new(&f, &c).unwrap();
    let be = bakry_emery(&c, &fd, 1.0).values();
    let coeff = d.h.laplacian.value() + 0.4;
    let g = c.g.values();
    for idx in multi_indices(3, 2) {
        let lhs = h.value() * be.get(&idx) + coeff * g.get(&idx);
        assert!((lhs - gh.get(&idx)).abs() < 1e-12);
    }
    // constant f leaves ρ unchanged
    let fc = ScalarDerivatives::new(&scalar(&m, "1.5", &p, 3), &c).unwrap();
    assert_eq!(bakry_emery(&c, &fc, 1.0).values(), c.ricci.values());
}

#[test]
fn cahen_wallach_cpe() {
    // F = −εx² with the printed profiles
    for (eps, f) in [
        (0.5, "exp(v*sqrt(0.5))+0.3*exp(-v*sqrt(0.5))-1"),
        (-0.5, "cos(v*sqrt(0.5))+0.4*sin(v*sqrt(0.5))-1"),
    ] {
        let m = brinkmann(&format!("{}*x^2", -eps));
        let p = [0.3, 0.8, -1.2];
        let c = pack(&m, &p, 3);
        let fd = ScalarDerivatives::new(&scalar(&m, f, &p, 3), &c).unwrap();
        assert!(cpe_tensor(&c, &fd).values().max_abs() < 1e-13);
    }
    // Einstein metric with f = 0
    let c = pack(&de_sitter(1.3), &[0.1, 0.6, 0.2], 3);
    let zero = ScalarDerivatives::new(&c.g.get(&[0, 0]).constant_like(0.0), &c).unwrap();
    assert!(cpe_tensor(&c, &zero).values().max_abs() < 1e-13);
}

#[test]
fn kundt_solution_gradient_and_invariants() {
    let m = kundt();
    for p in [[0.5, 1.2, 0.7], [1.8, 0.3, 1.9]] {
        let c = pack(&m, &p, 3);
        let h = scalar(&m, "v", &p, 3);
        let d = DensityPack::new(&h, &c, 0.0, 1.0).unwrap();
        let scale = weighted_einstein_scale(&c, &d);
        assert!(weighted_einstein(&c, &d).values().max_abs() < 1e-12 * scale);
        // ∇h = ∂_u
        let grad = d.h.gradient.values();
        assert!(
            (grad.get(&[0]) - 1.0).abs() < 1e-14
                && grad.get(&[1]).abs() < 1e-14
                && grad.get(&[2]).abs() < 1e-14
        );
        assert!(d.h.grad_norm2.value().abs() < 1e-14);
        let os = optical_scalars(&c, &d.h).unwrap();
        assert!(
            os.expansion.abs() < 1e-12 && os.shear_sq.abs() < 1e-12 && os.twist_sq.abs() < 1e-12
        );
        assert!((os.shear_sq - os.shear_sq_hessian).abs() < 1e-12);
        let (tau, rr, kr) = c.scalar_invariants();
        let s = 1.0 + c.riemann.values().max_abs();
        assert!(
            tau.abs() < 1e-11 * s && rr.abs() < 1e-11 * s * s && kr.abs() < 1e-11 * s * s,
            "{tau} {rr} {kr}"
        );
    }
}

#[test]
fn density_gradients() {
    // h = vx on the non-isotropic Brinkmann example: ‖∇h‖² = v²
    let m = brinkmann("((4*u*v-x^2)*log(v*x)+x^2)/(2*v^2)");
    let p = [0.4, 1.3, 0.8];
    let c = pack(&m, &p, 3);
    let d = DensityPack::new(&scalar(&m, "v*x", &p, 3), &c, 0.0, 1.0).unwrap();
    assert!((d.h.grad_norm2.value() - 1.69).abs() < 1e-13);
    assert!(weighted_einstein(&c, &d).values().max_abs() < 1e-12 * weighted_einstein_scale(&c, &d));
    assert!(matches!(
        optical_scalars(&c, &d.h),
        Err(CurvatureError::NotLightlike { .. })
    ));
}

#[test]
fn order_requirements() {
    let m = brinkmann("x^2");
    assert!(matches!(
        CurvaturePack::from_metric(m.eval(&[0.0, 0.0, 0.0], 1).unwrap()),
        Err(CurvatureError::InsufficientOrder {
            order: 1,
            needed: 2
        })
    ));
    let c = pack(&m, &[0.0, 0.0, 0.0], 2);
    assert!(divergence(&c.ricci, &c.g_inv, &c.christoffel).is_err());
    assert!(c.weyl().vanishes_by_dimension);
}

#[test]
fn warped_product_ricci_formulas() {
    let base = brinkmann("sin(v)*x^2+u*x");
    let scope = Scope::new(["u", "v", "x"], Vec::<String>::new(), Vec::<String>::new()).unwrap();
    let warp = DensitySpec::new(parse("2+x*v^2", &scope).unwrap(), Bindings::default());
    let m = warped_product(&base, &warp).unwrap();
    assert_eq!(m.chart.coords(), ["u", "v", "x", "t"]);
    let p3 = [0.3, 0.6, 0.9];
    let p4 = [0.3, 0.6, 0.9, 0.25];
    let c4 = pack(&m, &p4, 3);
    let c3 = pack(&base, &p3, 3);
    let f = scalar(&base, "2+x*v^2", &p3, 3);
    let fd = ScalarDerivatives::new(&f, &c3).unwrap();
    // ρ(∂_t,∂_t) = −Δf f and ρ(X,Y) = ρ^N − Hes_f / f
    assert_close(
        c4.ricci.get(&[3, 3]).value(),
        -fd.laplacian.value() * f.value(),
        1e-12,
        "ρ_tt",
    );
    for idx in multi_indices(3, 2) {
        let want = c3.ricci.get(&idx).value() - fd.hessian.get(&idx).value() / f.value();
        assert_close(c4.ricci.get(&idx).value(), want, 1e-12, "ρ_XY");
        assert!(c4.ricci.get(&[idx[0], 3]).value().abs() < 1e-13);
    }
    // constant warp: no fiber curvature
    let flat_warp = DensitySpec::new(parse("3", &scope).unwrap(), Bindings::default());
    let m = warped_product(&base, &flat_warp).unwrap();
    let c = pack(&m, &p4, 3);
    for i in 0..4 {
        assert!(c.ricci.get(&[i, 3]).value().abs() < 1e-14);
    }
}

#[test]
fn warped_kundt_weyl_values() {
    let base = kundt();
    let scope = Scope::new(["u", "v", "x"], Vec::<String>::new(), Vec::<String>::new()).unwrap();
    let warp = DensitySpec::new(parse("v", &scope).unwrap(), Bindings::default());
    let m = warped_product(&base, &warp).unwrap();
    let p = [0.7, 1.1, 0.6, 0.2];
    let c = pack(&m, &p, 3);
    assert!(c.ricci.values().max_abs() < 1e-11);
    let w = c.weyl().tensor.values();
    let (u, v, x) = (p[0], p[1], p[2]);
    assert_close(*w.get(&[0, 1, 1, 2]), -1.0 / (v * x), 1e-10, "W(u,v,v,x)");
    assert_close(
        *w.get(&[1, 3, 1, 3]),
        x.ln() - u * v / (x * x),
        1e-10,
        "W(v,t,v,t)",
    );
    assert_close(*w.get(&[1, 3, 2, 3]), v / x, 1e-10, "W(v,t,x,t)");
    let vxvx = (-6.0 * u * v / (x * x) - 2.0 * x.ln()) / (2.0 * v * v);
    assert_close(*w.get(&[1, 2, 1, 2]), vxvx, 1e-10, "W(v,x,v,x)");
}

#[test]
fn warped_plane_wave_weyl_values() {
    let base = brinkmann("sin(v)/(2+sin(v))*x^2");
    let scope = Scope::new(["u", "v", "x"], Vec::<String>::new(), Vec::<String>::new()).unwrap();
    let warp = DensitySpec::new(parse("2+sin(v)", &scope).unwrap(), Bindings::default());
    let m = warped_product(&base, &warp).unwrap();
    let p = [0.7, 1.1, 0.6, 0.2];
    let c = pack(&m, &p, 3);
    assert!(c.ricci.values().max_abs() < 1e-12);
    let w = c.weyl().tensor.values();
    let alpha = 2.0 + p[1].sin();
    let alpha2 = -p[1].sin();
    assert_close(*w.get(&[1, 2, 1, 2]), alpha2 / alpha, 1e-12, "W(v,x,v,x)");
    assert_close(*w.get(&[1, 3, 1, 3]), -alpha * alpha2, 1e-12, "W(v,t,v,t)");
}
