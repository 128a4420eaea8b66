//! Pointwise classification, identity residuals, and family verification.
//!
//! Every residual is reported relative to a scale built from the magnitudes
//! of the terms that enter it, so a single tolerance serves all families.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{
    instantiate, sample_points, CatalogError, FamilyDef, FamilyInstance, KundtConvention,
};
use crate::curvature::{
    bakry_emery, cov_derivative, cpe_tensor, divergence, optical_scalars, trace, weighted_einstein,
    weighted_einstein_scale, CurvatureError, CurvaturePack, DensityPack, OpticalScalars,
    ScalarDerivatives, LIGHTLIKE_TOL,
};
use crate::expr::coordinate_jets;
use crate::linalg::max_abs;
use crate::tensor::{multi_indices, JetTensor, PointTensor, Tensor, Variance};

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_TOL: f64 = 1e-9;
/// A discriminating quantity within this factor of its threshold marks the
/// sample as degenerate.
pub const DEGENERATE_FACTOR: f64 = 10.0;
/// Fraction of non-degenerate samples that must agree with an expected tag.
pub const MODAL_AGREEMENT: f64 = 0.99;
pub const RESOLUTION_SAMPLES: usize = 20;
/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "WEFE_THREADS";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("gradient vanishes at the point (max |grad h| = {0:e})")]
    VanishingGradient(f64),
    #[error("family `{0}` is not given in Kundt form")]
    NotKundt(String),
    #[error("jet order {0} is too low; the identity suite needs at least 3")]
    OrderTooLow(usize),
    #[error("the Weyl tensor needs dimension at least 4, got {0}")]
    WeylDimension(usize),
    #[error("vector has {found} components, expected {expected}")]
    VectorLength { expected: usize, found: usize },
    #[error("evaluation failed at sample {index} {point:?}: {source}")]
    AtPoint {
        index: usize,
        point: Vec<f64>,
        #[source]
        source: Box<CurvatureError>,
    },
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
    #[error("invalid thread count in {THREADS_ENV}: `{0}`")]
    Threads(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientStatus {
    Parallel,
    RecurrentNotParallel,
    Neither,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Nilpotency {
    /// Smallest `k` with `Ric^k = 0` at tolerance; 0 if none up to the dimension.
    pub index: u8,
    /// Some power sits within a decade of its threshold.
    pub degenerate: bool,
}

/// Nilpotency index of a mixed `(1,1)` operator. `Ric^k` is compared with
/// `tol * scale^k` where `scale = 1 + max |Ric|`.
pub fn nilpotency_index(ric: &PointTensor, tol: f64) -> Nilpotency {
    let n = ric.dim();
    let a = ric.data();
    let scale = 1.0 + max_abs(a);
    let mut power = a.to_vec();
    let mut threshold = tol * scale;
    let mut degenerate = false;
    for k in 1..=n {
        let norm = max_abs(&power);
        if norm >= threshold / DEGENERATE_FACTOR && norm < threshold * DEGENERATE_FACTOR {
            degenerate = true;
        }
        if norm < threshold {
            return Nilpotency {
                index: k as u8,
                degenerate,
            };
        }
        power = crate::linalg::matmul(&power, a, n);
        threshold *= scale;
    }
    Nilpotency {
        index: 0,
        degenerate,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GradientCheck {
    pub status: GradientStatus,
    pub degenerate: bool,
}

/// Parallel if the Hessian operator vanishes; recurrent if it maps every
/// basis vector into the span of the gradient, tested through the 2×2
/// minors of `[hes(e_i) | grad]`.
pub fn gradient_status(
    grad: &[f64],
    hes_op: &PointTensor,
    tol: f64,
) -> Result<GradientCheck, AnalysisError> {
    let n = hes_op.dim();
    if grad.len() != n {
        return Err(AnalysisError::VectorLength {
            expected: n,
            found: grad.len(),
        });
    }
    let grad_max = max_abs(grad);
    if grad_max < DEGENERATE_FACTOR * tol {
        return Err(AnalysisError::VanishingGradient(grad_max));
    }
    let hes_max = hes_op.max_abs();
    let scale = 1.0 + hes_max;
    let near = |value: f64, threshold: f64| {
        value >= threshold / DEGENERATE_FACTOR && value < threshold * DEGENERATE_FACTOR
    };
    let parallel_threshold = tol * scale;
    if hes_max < parallel_threshold {
        return Ok(GradientCheck {
            status: GradientStatus::Parallel,
            degenerate: near(hes_max, parallel_threshold),
        });
    }
    let mut minor_max: f64 = 0.0;
    for i in 0..n {
        for a in 0..n {
            for b in (a + 1)..n {
                let m = hes_op.get(&[a, i]) * grad[b] - hes_op.get(&[b, i]) * grad[a];
                minor_max = minor_max.max(m.abs());
            }
        }
    }
    let minor_threshold = tol * scale * (1.0 + grad_max);
    let status = if minor_max < minor_threshold {
        GradientStatus::RecurrentNotParallel
    } else {
        GradientStatus::Neither
    };
    Ok(GradientCheck {
        status,
        degenerate: near(hes_max, parallel_threshold) || near(minor_max, minor_threshold),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KundtCheck {
    /// `|hes(grad h)|`, relative.
    pub geodesic: f64,
    pub expansion: f64,
    pub shear_sq: f64,
    pub twist_sq: f64,
    /// Difference of the two shear expressions, relative.
    pub shear_forms_gap: f64,
    pub is_kundt: bool,
}

/// Geodesic, expansion-, shear- and twist-free test for a lightlike gradient.
pub fn kundt_check(
    pack: &CurvaturePack,
    h: &ScalarDerivatives,
    tol: f64,
) -> Result<KundtCheck, AnalysisError> {
    let os: OpticalScalars = optical_scalars(pack, h)?;
    let grad = h.gradient.values();
    let hes_op = h.hessian_operator(pack);
    let n = pack.dim();
    let mut geo: f64 = 0.0;
    for a in 0..n {
        let v: f64 = (0..n).map(|i| hes_op.get(&[a, i]) * grad.get(&[i])).sum();
        geo = geo.max(v.abs());
    }
    let s = os.scale;
    let geodesic = geo / (s * (1.0 + grad.max_abs()));
    let expansion = os.expansion.abs() / s;
    let shear_sq = os.shear_sq.abs() / (s * s);
    let twist_sq = os.twist_sq.abs() / (s * s);
    let shear_forms_gap = (os.shear_sq - os.shear_sq_hessian).abs() / (s * s);
    let is_kundt = geodesic < tol && expansion < tol && shear_sq < tol && twist_sq < tol;
    Ok(KundtCheck {
        geodesic,
        expansion,
        shear_sq,
        twist_sq,
        shear_forms_gap,
        is_kundt,
    })
}

#[derive(Debug, Clone)]
pub struct WeylContraction {
    /// `(ι_V C)_jkl = V^i C_ijkl`.
    pub tensor: PointTensor,
    pub max_abs: f64,
}

pub fn weyl_null_contraction(
    weyl: &PointTensor,
    v: &[f64],
) -> Result<WeylContraction, AnalysisError> {
    let n = weyl.dim();
    if n < 4 {
        return Err(AnalysisError::WeylDimension(n));
    }
    if v.len() != n {
        return Err(AnalysisError::VectorLength {
            expected: n,
            found: v.len(),
        });
    }
    let tensor = Tensor::from_fn(n, vec![Variance::Down; 3], |idx| {
        (0..n)
            .map(|i| v[i] * weyl.get(&[i, idx[0], idx[1], idx[2]]))
            .sum()
    });
    let max_abs = tensor.max_abs();
    Ok(WeylContraction { tensor, max_abs })
}

/// Quantities forced to vanish for isotropic solutions, each relative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IsotropicLemma {
    pub grad_norm2: f64,
    pub tau: f64,
    pub laplacian: f64,
    pub hes_grad: f64,
    pub ricci_grad: f64,
    pub h_rho_minus_hes: f64,
}

impl IsotropicLemma {
    pub fn max(&self) -> f64 {
        [
            self.grad_norm2,
            self.tau,
            self.laplacian,
            self.hes_grad,
            self.ricci_grad,
            self.h_rho_minus_hes,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

fn lower_apply(t: &PointTensor, v: &PointTensor) -> f64 {
    let n = t.dim();
    (0..n)
        .map(|j| {
            (0..n)
                .map(|i| t.get(&[i, j]) * v.get(&[i]))
                .sum::<f64>()
                .abs()
        })
        .fold(0.0, f64::max)
}

pub fn isotropic_lemma(pack: &CurvaturePack, density: &DensityPack) -> IsotropicLemma {
    let grad = density.h.gradient.values();
    let hes = density.h.hessian.values();
    let rho = pack.ricci.values();
    let g_inv_scale = 1.0 + pack.g_inv.values().max_abs();
    let grad_scale = 1.0
        + grad
            .max_abs()
            .max(density.h.differential.values().max_abs());
    let hes_scale = 1.0 + hes.max_abs();
    let rho_scale = 1.0 + rho.max_abs();
    let h = density.h.value.value();
    let n = pack.dim();
    let mut diff: f64 = 0.0;
    for idx in multi_indices(n, 2) {
        diff = diff.max((h * rho.get(&idx) - hes.get(&idx)).abs());
    }
    IsotropicLemma {
        grad_norm2: density.h.grad_norm2.value().abs() / (grad_scale * grad_scale),
        tau: pack.scalar.value().abs() / (rho_scale * g_inv_scale),
        laplacian: density.h.laplacian.value().abs() / (hes_scale * g_inv_scale),
        hes_grad: lower_apply(&hes, &grad) / (hes_scale * grad_scale),
        ricci_grad: lower_apply(&rho, &grad) / (rho_scale * grad_scale),
        h_rho_minus_hes: diff / weighted_einstein_scale(pack, density),
    }
}

/// Relative residuals of the identities every metric and density satisfy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IdentityResiduals {
    pub riemann_symmetry: f64,
    pub first_bianchi: f64,
    /// `div ρ − ½ dτ`.
    pub contracted_bianchi: f64,
    /// `div Hes_h − dΔh − ρ(∇h, ·)`.
    pub bochner: f64,
    /// `tr G^h − (hτ + (n−1)Δh + nΛ)`.
    pub trace: f64,
    /// `∇g`.
    pub metric_compatibility: f64,
}

impl IdentityResiduals {
    pub const NAMES: [&'static str; 6] = [
        "riemann_symmetry",
        "first_bianchi",
        "contracted_bianchi",
        "bochner",
        "trace",
        "metric_compatibility",
    ];

    pub fn values(&self) -> [f64; 6] {
        [
            self.riemann_symmetry,
            self.first_bianchi,
            self.contracted_bianchi,
            self.bochner,
            self.trace,
            self.metric_compatibility,
        ]
    }

    pub fn max(&self) -> f64 {
        self.values().into_iter().fold(0.0, f64::max)
    }
}

pub fn identity_residuals(
    pack: &CurvaturePack,
    density: &DensityPack,
) -> Result<IdentityResiduals, AnalysisError> {
    if pack.order < 3 {
        return Err(AnalysisError::OrderTooLow(pack.order));
    }
    let n = pack.dim();
    let r = pack.riemann.values();
    let r_scale = 1.0 + r.max_abs();
    let mut sym: f64 = 0.0;
    let mut cyc: f64 = 0.0;
    for idx in multi_indices(n, 4) {
        let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
        let v = r.get(&idx);
        sym = sym
            .max((v + r.get(&[j, i, k, l])).abs())
            .max((v + r.get(&[i, j, l, k])).abs())
            .max((v - r.get(&[k, l, i, j])).abs());
        cyc = cyc.max((v + r.get(&[i, k, l, j]) + r.get(&[i, l, j, k])).abs());
    }

    let div_rho = divergence(&pack.ricci, &pack.g_inv, &pack.christoffel)?.values();
    let dtau: Vec<f64> = (0..n)
        .map(|j| pack.scalar.derivative(j).map(|d| 0.5 * d.value()))
        .collect::<Result<_, _>>()
        .map_err(CurvatureError::from)?;
    let bianchi_scale = 1.0 + div_rho.max_abs().max(max_abs(&dtau));
    let bianchi = (0..n)
        .map(|j| (div_rho.get(&[j]) - dtau[j]).abs())
        .fold(0.0, f64::max)
        / bianchi_scale;

    let h = &density.h;
    let div_hes = divergence(&h.hessian, &pack.g_inv, &pack.christoffel)?.values();
    let grad = h.gradient.values();
    let rho = pack.ricci.values();
    let mut bochner: f64 = 0.0;
    let mut bochner_scale: f64 = 0.0;
    for j in 0..n {
        let dlap = h
            .laplacian
            .derivative(j)
            .map_err(CurvatureError::from)?
            .value();
        let ric_grad: f64 = (0..n).map(|i| rho.get(&[i, j]) * grad.get(&[i])).sum();
        let a = *div_hes.get(&[j]);
        bochner = bochner.max((a - dlap - ric_grad).abs());
        bochner_scale = bochner_scale
            .max(a.abs())
            .max(dlap.abs())
            .max(ric_grad.abs());
    }
    let bochner = bochner / (1.0 + bochner_scale);

    let gh = weighted_einstein(pack, density);
    let low = gh.order();
    let tr = trace(&gh, &pack.g_inv.truncate(low)).value();
    let hv = h.value.value();
    let terms = [
        hv * pack.scalar.value(),
        (n as f64 - 1.0) * h.laplacian.value(),
        n as f64 * density.lambda,
    ];
    let trace_res = (tr - terms.iter().sum::<f64>()).abs() / (1.0 + max_abs(&terms).max(tr.abs()));

    let nabla_g = cov_derivative(&pack.g, &pack.christoffel)?.values();
    let gamma_scale = 1.0 + pack.christoffel.values().max_abs() * pack.g.values().max_abs();
    let compat = nabla_g.max_abs() / gamma_scale;

    Ok(IdentityResiduals {
        riemann_symmetry: sym / r_scale,
        first_bianchi: cyc / r_scale,
        contracted_bianchi: bianchi,
        bochner,
        trace: trace_res,
        metric_compatibility: compat,
    })
}

/// Curvature and density derivatives of an instance at one point.
pub struct PointState {
    pub pack: CurvaturePack,
    pub density: DensityPack,
}

pub fn point_state(
    inst: &FamilyInstance,
    point: &[f64],
    order: usize,
) -> Result<PointState, CurvatureError> {
    let g = inst.metric.eval(point, order)?;
    let pack = CurvaturePack::from_metric(g)?;
    let h = inst.density.eval_with(&coordinate_jets(point, order))?;
    let density = DensityPack::new(&h, &pack, inst.lambda, inst.mu)?;
    Ok(PointState { pack, density })
}

/// Relative `G^h` residual at a point.
pub fn gh_residual(state: &PointState) -> f64 {
    weighted_einstein(&state.pack, &state.density)
        .values()
        .max_abs()
        / weighted_einstein_scale(&state.pack, &state.density)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Checks {
    pub gh: bool,
    pub identities: bool,
    pub classification: bool,
}

impl Default for Checks {
    fn default() -> Checks {
        Checks {
            gh: true,
            identities: true,
            classification: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub points: usize,
    pub seed: u64,
    pub order: usize,
    pub tol: f64,
    pub checks: Checks,
}

impl Default for VerifyOptions {
    fn default() -> VerifyOptions {
        VerifyOptions {
            points: 200,
            seed: 0,
            order: DEFAULT_ORDER,
            tol: DEFAULT_TOL,
            checks: Checks::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residuals {
    pub gh: f64,
    pub bianchi: Option<f64>,
    pub bochner: Option<f64>,
    pub trace: Option<f64>,
    pub riemann_symmetry: Option<f64>,
    pub first_bianchi: Option<f64>,
    pub metric_compatibility: Option<f64>,
    pub cpe: Option<f64>,
    pub isotropic_lemma: Option<f64>,
    /// `max |ρ|` relative to the curvature scale.
    pub ricci: f64,
    /// Distance from the expected scalar curvature, relative.
    pub tau: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub nilpotency: u8,
    pub nilpotency_degenerate: bool,
    /// `None` where the gradient vanishes.
    pub gradient_status: Option<GradientStatus>,
    pub gradient_degenerate: bool,
    pub isotropic: bool,
    pub kundt: Option<bool>,
    /// `max |ι_{∇h} C|` in dimension at least 4 for a lightlike gradient.
    pub weyl_null: Option<f64>,
    /// Disagreement between the two shear forms of a lightlike gradient.
    pub shear_forms_gap: Option<f64>,
    pub failed_preconditions: Vec<String>,
}

impl Classification {
    pub fn degenerate(&self) -> bool {
        self.nilpotency_degenerate
            || self.gradient_degenerate
            || !self.failed_preconditions.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointRecord {
    pub index: usize,
    pub coords: Vec<f64>,
    pub residuals: Residuals,
    pub classification: Classification,
    /// `(τ, ρ·ρ, Kretschmann)`.
    pub invariants: [f64; 3],
}

fn at_point(index: usize, point: &[f64]) -> impl Fn(CurvatureError) -> AnalysisError + '_ {
    move |e| AnalysisError::AtPoint {
        index,
        point: point.to_vec(),
        source: Box::new(e),
    }
}

fn analysis_at_point(index: usize, point: &[f64]) -> impl Fn(AnalysisError) -> AnalysisError + '_ {
    move |e| match e {
        AnalysisError::Curvature(c) => at_point(index, point)(c),
        other => other,
    }
}

pub fn evaluate_point(
    inst: &FamilyInstance,
    index: usize,
    point: &[f64],
    opts: &VerifyOptions,
) -> Result<PointRecord, AnalysisError> {
    let wrap = at_point(index, point);
    let wrap_analysis = analysis_at_point(index, point);
    let state = point_state(inst, point, opts.order).map_err(&wrap)?;
    let PointState { pack, density } = &state;
    let tol = opts.tol;
    let n = pack.dim();

    let identities = if opts.checks.identities {
        Some(identity_residuals(pack, density).map_err(&wrap_analysis)?)
    } else {
        None
    };
    let cpe = match &inst.cpe_potential {
        Some(f) => {
            let f = f
                .eval_with(&coordinate_jets(point, opts.order))
                .map_err(|e| wrap(e.into()))?;
            let fd = ScalarDerivatives::new(&f, pack).map_err(&wrap)?;
            let t = cpe_tensor(pack, &fd).values();
            let scale = 1.0
                + (fd.value.value().abs() + 1.0) * pack.ricci.values().max_abs()
                + fd.hessian.values().max_abs()
                + (fd.laplacian.value().abs() + pack.scalar.value().abs() / n as f64)
                    * pack.g.values().max_abs();
            Some(t.max_abs() / scale)
        }
        None => None,
    };
    let grad = density.h.gradient.values();
    let grad_scale = 1.0
        + grad
            .max_abs()
            .max(density.h.differential.values().max_abs());
    let isotropic = density.h.grad_norm2.value().abs() < LIGHTLIKE_TOL * grad_scale * grad_scale;
    let lemma = isotropic_lemma(pack, density);
    let r_scale = 1.0 + pack.riemann.values().max_abs();
    let (tau, rho_sq, kretschmann) = pack.scalar_invariants();
    let tau_res = inst.expected_tau.map(|want| {
        let scale = (1.0 + pack.ricci.values().max_abs()) * (1.0 + pack.g_inv.values().max_abs());
        (tau - want).abs() / scale.max(1.0 + want.abs())
    });

    let mut classification = Classification {
        nilpotency: 0,
        nilpotency_degenerate: false,
        gradient_status: None,
        gradient_degenerate: false,
        isotropic,
        kundt: None,
        weyl_null: None,
        shear_forms_gap: None,
        failed_preconditions: Vec::new(),
    };
    for p in &inst.preconditions {
        let v = p
            .expr
            .eval(point, inst.bindings())
            .map_err(|e| wrap(e.into()))?;
        if !(v.abs() >= DEGENERATE_FACTOR * tol) {
            classification.failed_preconditions.push(p.label.clone());
        }
    }
    if opts.checks.classification {
        let nil = nilpotency_index(&pack.ricci_operator(), tol);
        classification.nilpotency = nil.index;
        classification.nilpotency_degenerate = nil.degenerate;
        match gradient_status(grad.data(), &density.h.hessian_operator(pack), tol) {
            Ok(g) => {
                classification.gradient_status = Some(g.status);
                classification.gradient_degenerate = g.degenerate;
            }
            Err(AnalysisError::VanishingGradient(_)) => {}
            Err(e) => return Err(e),
        }
        if isotropic && classification.gradient_status.is_some() {
            let k = kundt_check(pack, &density.h, tol).map_err(&wrap_analysis)?;
            classification.kundt = Some(k.is_kundt);
            classification.shear_forms_gap = Some(k.shear_forms_gap);
            if n >= 4 {
                let w = pack.weyl().tensor.values();
                let c = weyl_null_contraction(&w, grad.data())?;
                classification.weyl_null = Some(c.max_abs / ((1.0 + w.max_abs()) * grad_scale));
            }
        }
    }

    Ok(PointRecord {
        index,
        coords: point.to_vec(),
        residuals: Residuals {
            gh: gh_residual(&state),
            bianchi: identities.map(|r| r.contracted_bianchi),
            bochner: identities.map(|r| r.bochner),
            trace: identities.map(|r| r.trace),
            riemann_symmetry: identities.map(|r| r.riemann_symmetry),
            first_bianchi: identities.map(|r| r.first_bianchi),
            metric_compatibility: identities.map(|r| r.metric_compatibility),
            cpe,
            isotropic_lemma: isotropic.then(|| lemma.max()),
            ricci: pack.ricci.values().max_abs() / r_scale,
            tau: tau_res,
        },
        classification,
        invariants: [tau, rho_sq, kretschmann],
    })
}

/// Runs `f` on a pool sized by `WEFE_THREADS` when set.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, AnalysisError> {
    match std::env::var(THREADS_ENV) {
        Ok(text) => {
            let threads: usize = text
                .trim()
                .parse()
                .ok()
                .filter(|&t| t > 0)
                .ok_or_else(|| AnalysisError::Threads(text.clone()))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| AnalysisError::Threads(e.to_string()))?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}

/// Identity residuals at each point, in point order.
pub fn identity_suite(
    inst: &FamilyInstance,
    points: &[Vec<f64>],
    order: usize,
) -> Result<Vec<IdentityResiduals>, AnalysisError> {
    if order < 3 {
        return Err(AnalysisError::OrderTooLow(order));
    }
    with_pool(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let state = point_state(inst, p, order).map_err(at_point(i, p))?;
                identity_residuals(&state.pack, &state.density).map_err(analysis_at_point(i, p))
            })
            .collect()
    })?
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConventionResolution {
    pub selected: Option<KundtConvention>,
    pub ambiguous: bool,
    /// Max relative `G^h` residual per convention; `None` if evaluation failed.
    pub max_residuals: BTreeMap<String, Option<f64>>,
    pub samples: usize,
    pub seed: u64,
}

/// Evaluates `G^h` for every Kundt cross-term reading on the same samples
/// and keeps the one that solves the equation.
pub fn resolve_kundt_convention(
    def: &FamilyDef,
    overrides: &[(String, String)],
    seed: u64,
    order: usize,
    tol: f64,
) -> Result<ConventionResolution, AnalysisError> {
    if def.metric.kundt.is_none() {
        return Err(AnalysisError::NotKundt(def.id.clone()));
    }
    let mut max_residuals = BTreeMap::new();
    let mut passing = Vec::new();
    for conv in KundtConvention::ALL {
        let mut variant = def.clone();
        if let Some(k) = variant.metric.kundt.as_mut() {
            k.convention = conv;
        }
        let inst = instantiate(&variant, overrides)?;
        let points = sample_points(&inst, RESOLUTION_SAMPLES, seed)?;
        let worst = points
            .iter()
            .map(|p| point_state(&inst, p, order).map(|s| gh_residual(&s)))
            .try_fold(0.0f64, |m, r| {
                r.map(|v| if v.is_nan() { f64::INFINITY } else { m.max(v) })
            })
            .ok()
            .filter(|v| v.is_finite());
        if worst.is_some_and(|v| v < tol) {
            passing.push(conv);
        }
        max_residuals.insert(conv.name().to_string(), worst);
    }
    let selected = (passing.len() == 1).then(|| passing[0]);
    Ok(ConventionResolution {
        selected,
        ambiguous: selected.is_none(),
        max_residuals,
        samples: RESOLUTION_SAMPLES,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub max_residuals: BTreeMap<String, f64>,
    pub modal_nilpotency: Option<u8>,
    pub modal_gradient_status: Option<GradientStatus>,
    pub degenerate_samples: Vec<usize>,
    pub checks: Vec<CheckOutcome>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConventionMeta {
    pub declared: KundtConvention,
    pub resolution: ConventionResolution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub family: String,
    /// Real parameters as numbers, slots as expression strings.
    pub params: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
    pub points: usize,
    pub order: usize,
    pub tol: f64,
    pub lightlike_tol: f64,
    pub degenerate_factor: f64,
    pub modal_agreement: f64,
    pub checks: Checks,
    pub convention: Option<ConventionMeta>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub meta: Meta,
    pub points: Vec<PointRecord>,
    pub aggregate: Aggregate,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.aggregate.verdict == Verdict::Pass
    }
}

fn modal<T: Copy + Ord>(values: impl Iterator<Item = T>) -> Option<(T, usize, usize)> {
    let mut counts: BTreeMap<T, usize> = BTreeMap::new();
    let mut total = 0;
    for v in values {
        *counts.entry(v).or_default() += 1;
        total += 1;
    }
    // ties resolve to the smallest value so the result is deterministic
    let (value, count) = counts
        .into_iter()
        .fold(None, |best: Option<(T, usize)>, (v, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((v, c)),
        })?;
    Some((value, count, total))
}

fn params_meta(def: &FamilyDef) -> BTreeMap<String, serde_json::Value> {
    let mut out = BTreeMap::new();
    for (k, v) in &def.params {
        out.insert(k.clone(), serde_json::json!(v));
    }
    for (k, s) in &def.slots {
        out.insert(k.clone(), serde_json::Value::String(s.expr.clone()));
    }
    out
}

fn aggregate(inst: &FamilyInstance, records: &[PointRecord], opts: &VerifyOptions) -> Aggregate {
    let tol = opts.tol;
    let expect = &inst.def.expect;
    let mut max_residuals = BTreeMap::new();
    let mut record_max = |name: &str, f: &dyn Fn(&PointRecord) -> Option<f64>| {
        let values: Vec<f64> = records.iter().filter_map(f).collect();
        if values.is_empty() {
            return None;
        }
        let m = values.iter().copied().fold(
            0.0,
            |a: f64, b| if b.is_nan() { f64::INFINITY } else { a.max(b) },
        );
        max_residuals.insert(name.to_string(), m);
        Some(m)
    };
    let mut checks = Vec::new();
    let mut bound = |name: &str, value: Option<f64>, limit: f64| {
        if let Some(v) = value {
            checks.push(CheckOutcome {
                name: name.to_string(),
                passed: v < limit,
                detail: format!("max {v:.3e} against {limit:.1e}"),
            });
        }
    };
    if opts.checks.gh {
        bound("gh", record_max("gh", &|r| Some(r.residuals.gh)), tol);
    }
    bound(
        "bianchi",
        record_max("bianchi", &|r| r.residuals.bianchi),
        tol,
    );
    bound(
        "bochner",
        record_max("bochner", &|r| r.residuals.bochner),
        tol,
    );
    bound("trace", record_max("trace", &|r| r.residuals.trace), tol);
    bound(
        "riemann_symmetry",
        record_max("riemann_symmetry", &|r| r.residuals.riemann_symmetry),
        tol,
    );
    bound(
        "first_bianchi",
        record_max("first_bianchi", &|r| r.residuals.first_bianchi),
        tol,
    );
    bound(
        "metric_compatibility",
        record_max("metric_compatibility", &|r| {
            r.residuals.metric_compatibility
        }),
        tol,
    );
    bound("cpe", record_max("cpe", &|r| r.residuals.cpe), tol);
    bound("tau", record_max("tau", &|r| r.residuals.tau), tol);
    let ricci = record_max("ricci", &|r| Some(r.residuals.ricci));
    if expect.ricci_flat {
        bound("ricci_flat", ricci, tol);
    }
    let lemma = record_max("isotropic_lemma", &|r| r.residuals.isotropic_lemma);

    let failed_pre: Vec<usize> = records
        .iter()
        .filter(|r| !r.classification.failed_preconditions.is_empty())
        .map(|r| r.index)
        .collect();
    if !inst.preconditions.is_empty() {
        let labels: Vec<&str> = inst
            .preconditions
            .iter()
            .map(|p| p.label.as_str())
            .collect();
        checks.push(CheckOutcome {
            name: "preconditions".into(),
            passed: failed_pre.is_empty(),
            detail: if failed_pre.is_empty() {
                format!("{} hold at every sample", labels.join(", "))
            } else {
                format!(
                    "{} violated at {} of {} samples; the family excludes this case",
                    labels.join(", "),
                    failed_pre.len(),
                    records.len()
                )
            },
        });
    }

    let degenerate_samples: Vec<usize> = records
        .iter()
        .filter(|r| r.classification.degenerate())
        .map(|r| r.index)
        .collect();
    let clean: Vec<&PointRecord> = records
        .iter()
        .filter(|r| !r.classification.degenerate())
        .collect();
    let mut modal_nilpotency = None;
    let mut modal_gradient_status = None;
    if opts.checks.classification {
        let nil = modal(clean.iter().map(|r| r.classification.nilpotency));
        modal_nilpotency = nil.map(|(v, _, _)| v);
        if let Some(want) = expect.nilpotency {
            let matching = clean
                .iter()
                .filter(|r| r.classification.nilpotency == want)
                .count();
            agreement(
                &mut checks,
                "nilpotency",
                &format!("index {want}"),
                matching,
                clean.len(),
            );
        }
        let grad = modal(
            clean
                .iter()
                .filter_map(|r| r.classification.gradient_status),
        );
        modal_gradient_status = grad.map(|(v, _, _)| v);
        if let Some(want) = expect.gradient {
            let matching = clean
                .iter()
                .filter(|r| r.classification.gradient_status == Some(want))
                .count();
            agreement(
                &mut checks,
                "gradient_status",
                &format!("{want:?}"),
                matching,
                clean.len(),
            );
        }
        if expect.isotropic {
            let not_null = records
                .iter()
                .filter(|r| !r.classification.isotropic)
                .count();
            let passed = not_null == 0 && lemma.is_some_and(|m| m < tol);
            checks.push(CheckOutcome {
                name: "isotropic".into(),
                passed,
                detail: match lemma {
                    Some(m) => {
                        format!("{not_null} non-null samples; lemma max {m:.3e} against {tol:.1e}")
                    }
                    None => format!("{not_null} non-null samples"),
                },
            });
        }
        let shear_gap = records
            .iter()
            .filter_map(|r| r.classification.shear_forms_gap)
            .reduce(f64::max);
        if let Some(gap) = shear_gap {
            checks.push(CheckOutcome {
                name: "shear_forms".into(),
                passed: gap < tol,
                detail: format!("max gap {gap:.3e} against {tol:.1e}"),
            });
        }
        if let Some(want) = expect.kundt {
            let matching = clean
                .iter()
                .filter(|r| r.classification.kundt == Some(want))
                .count();
            agreement(
                &mut checks,
                "kundt",
                &format!("{want}"),
                matching,
                clean.len(),
            );
        }
        if expect.isotropic {
            // index 1 ⇒ parallel, 2 ⇒ parallel or recurrent, 3 ⇒ Kundt
            let bad = clean
                .iter()
                .filter(|r| {
                    let c = &r.classification;
                    match c.nilpotency {
                        1 => c
                            .gradient_status
                            .is_some_and(|s| s != GradientStatus::Parallel),
                        2 => c.gradient_status == Some(GradientStatus::Neither),
                        3 => c.kundt == Some(false),
                        _ => false,
                    }
                })
                .count();
            checks.push(CheckOutcome {
                name: "classification_consistency".into(),
                passed: bad == 0,
                detail: format!("{bad} samples contradict the nilpotency/gradient dichotomy"),
            });
        }
    }
    let verdict = if checks.iter().all(|c| c.passed) {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Aggregate {
        max_residuals,
        modal_nilpotency,
        modal_gradient_status,
        degenerate_samples,
        checks,
        verdict,
    }
}

fn agreement(
    checks: &mut Vec<CheckOutcome>,
    name: &str,
    want: &str,
    matching: usize,
    total: usize,
) {
    let passed = total > 0 && matching as f64 >= MODAL_AGREEMENT * total as f64;
    checks.push(CheckOutcome {
        name: name.to_string(),
        passed,
        detail: format!("{matching} of {total} non-degenerate samples match {want}"),
    });
}

/// Samples the family, evaluates every point concurrently, and reduces the
/// records in sample order.
pub fn verify(
    def: &FamilyDef,
    overrides: &[(String, String)],
    opts: &VerifyOptions,
) -> Result<VerificationReport, AnalysisError> {
    let inst = instantiate(def, overrides)?;
    let points = sample_points(&inst, opts.points, opts.seed)?;
    let records: Vec<PointRecord> = with_pool(|| {
        points
            .par_iter()
            .enumerate()
            .map(|(i, p)| evaluate_point(&inst, i, p, opts))
            .collect::<Result<Vec<_>, _>>()
    })??;
    let mut aggregate = aggregate(&inst, &records, opts);
    let convention = match &def.metric.kundt {
        Some(k) => {
            let resolution =
                resolve_kundt_convention(def, overrides, opts.seed, opts.order, opts.tol)?;
            let agrees = resolution.selected == Some(k.convention);
            aggregate.checks.push(CheckOutcome {
                name: "kundt_convention".into(),
                passed: agrees,
                detail: match resolution.selected {
                    Some(c) => {
                        format!("resolved to {}, declared {}", c.name(), k.convention.name())
                    }
                    None => "ambiguous: needs review".into(),
                },
            });
            if !agrees {
                aggregate.verdict = Verdict::Fail;
            }
            Some(ConventionMeta {
                declared: k.convention,
                resolution,
            })
        }
        None => None,
    };
    Ok(VerificationReport {
        meta: Meta {
            family: inst.def.id.clone(),
            params: params_meta(&inst.def),
            seed: opts.seed,
            points: opts.points,
            order: opts.order,
            tol: opts.tol,
            lightlike_tol: LIGHTLIKE_TOL,
            degenerate_factor: DEGENERATE_FACTOR,
            modal_agreement: MODAL_AGREEMENT,
            checks: opts.checks,
            convention,
        },
        points: records,
        aggregate,
    })
}

/// Quantities printable by the `eval` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Christoffel,
    Riemann,
    Ricci,
    Tau,
    Weyl,
    Gh,
    BakryEmery,
    Cpe,
    Optical,
    Invariants,
}

impl Quantity {
    pub const ALL: [Quantity; 10] = [
        Quantity::Christoffel,
        Quantity::Riemann,
        Quantity::Ricci,
        Quantity::Tau,
        Quantity::Weyl,
        Quantity::Gh,
        Quantity::BakryEmery,
        Quantity::Cpe,
        Quantity::Optical,
        Quantity::Invariants,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::Christoffel => "christoffel",
            Quantity::Riemann => "riemann",
            Quantity::Ricci => "ricci",
            Quantity::Tau => "tau",
            Quantity::Weyl => "weyl",
            Quantity::Gh => "gh",
            Quantity::BakryEmery => "bakry_emery",
            Quantity::Cpe => "cpe",
            Quantity::Optical => "optical",
            Quantity::Invariants => "invariants",
        }
    }

    pub fn from_name(name: &str) -> Option<Quantity> {
        Quantity::ALL.into_iter().find(|q| q.name() == name)
    }
}

fn tensor_json(t: &PointTensor) -> serde_json::Value {
    serde_json::json!({
        "variance": t.variance(),
        "values": t.data(),
    })
}

fn jet_tensor_json(t: &JetTensor) -> serde_json::Value {
    tensor_json(&t.values())
}

/// Evaluates the requested quantities at one point. Bakry-Émery uses
/// `f = −log h` and the family's `μ`; the CPE tensor uses the family's
/// potential, or `h` when none is declared. Optical scalars are only
/// defined for a lightlike gradient; otherwise its norm is reported, or
/// a flag when it vanishes.
pub fn evaluate_quantities(
    inst: &FamilyInstance,
    point: &[f64],
    order: usize,
    quantities: &[Quantity],
) -> Result<serde_json::Map<String, serde_json::Value>, AnalysisError> {
    let wrap = at_point(0, point);
    let state = point_state(inst, point, order).map_err(&wrap)?;
    let PointState { pack, density } = &state;
    let mut out = serde_json::Map::new();
    for &q in quantities {
        let value = match q {
            Quantity::Christoffel => jet_tensor_json(&pack.christoffel),
            Quantity::Riemann => jet_tensor_json(&pack.riemann),
            Quantity::Ricci => jet_tensor_json(&pack.ricci),
            Quantity::Tau => serde_json::json!(pack.scalar.value()),
            Quantity::Weyl => {
                let w = pack.weyl();
                serde_json::json!({
                    "vanishes_by_dimension": w.vanishes_by_dimension,
                    "tensor": jet_tensor_json(&w.tensor),
                })
            }
            Quantity::Gh => jet_tensor_json(&weighted_einstein(pack, density)),
            Quantity::BakryEmery => {
                let f = density
                    .h
                    .value
                    .apply(crate::jet::Univariate::Log)
                    .map_err(|e| wrap(e.into()))?;
                let fd = ScalarDerivatives::new(&f.scale(-1.0), pack).map_err(&wrap)?;
                jet_tensor_json(&bakry_emery(pack, &fd, inst.mu))
            }
            Quantity::Cpe => {
                let f = match &inst.cpe_potential {
                    Some(p) => p
                        .eval_with(&coordinate_jets(point, order))
                        .map_err(|e| wrap(e.into()))?,
                    None => density.h.value.clone(),
                };
                let fd = ScalarDerivatives::new(&f, pack).map_err(&wrap)?;
                jet_tensor_json(&cpe_tensor(pack, &fd))
            }
            Quantity::Optical => {
                let grad_max = density.h.gradient.values().max_abs();
                if grad_max < DEGENERATE_FACTOR * DEFAULT_TOL {
                    serde_json::json!({ "lightlike": false, "vanishing_gradient": true, "grad_max": grad_max })
                } else {
                    match optical_scalars(pack, &density.h) {
                        Ok(os) => serde_json::json!({
                            "lightlike": true,
                            "expansion": os.expansion,
                            "shear_sq": os.shear_sq,
                            "shear_sq_hessian": os.shear_sq_hessian,
                            "twist_sq": os.twist_sq,
                        }),
                        Err(CurvatureError::NotLightlike { norm, .. }) => {
                            serde_json::json!({ "lightlike": false, "grad_norm2": norm })
                        }
                        Err(e) => return Err(wrap(e)),
                    }
                }
            }
            Quantity::Invariants => {
                let (tau, rr, kr) = pack.scalar_invariants();
                serde_json::json!({ "tau": tau, "ricci_sq": rr, "kretschmann": kr })
            }
        };
        out.insert(q.name().to_string(), value);
    }
    Ok(out)
}
