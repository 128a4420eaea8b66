//! Levi-Civita curvature and the density tensors built on it, all as jets.
//!
//! Conventions: `R(X,Y) = ∇_X∇_Y − ∇_Y∇_X − ∇_[X,Y]`, stored as
//! `R^l_ijk = dx^l(R(∂_i,∂_j)∂_k)`. The lowered tensor is
//! `R_ijkl = g(R(∂_i,∂_j)∂_l, ∂_k)`, so `R_ijij` is the sectional numerator,
//! `ρ_jk = R^i_ijk = g^il R_ijlk`, and the round sphere has `τ > 0`.
//!
//! With metric jets of order K, Christoffel symbols carry order K−1,
//! curvature and Hessians K−2, and divergences K−3.

use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::jet::{Jet, JetError};
use crate::tensor::{
    metric_inverse, multi_indices, packed_index, Component, DensitySpec, JetTensor, MetricSpec,
    PointTensor, Tensor, TensorError, Variance,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CurvatureError {
    #[error("jet order {order} is too low; {needed} is required")]
    InsufficientOrder { order: usize, needed: usize },
    #[error("density must be positive, got {0}")]
    NonPositiveDensity(f64),
    #[error("vector field is not lightlike (norm² {norm:e}, scale {scale:e})")]
    NotLightlike { norm: f64, scale: f64 },
    #[error("the base chart already has a coordinate named `t`")]
    FiberNameTaken,
    #[error("warp function and base metric are bound to different parameters")]
    BindingMismatch,
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

use Variance::{Down, Up};

fn require_order(order: usize, needed: usize) -> Result<(), CurvatureError> {
    if order < needed {
        Err(CurvatureError::InsufficientOrder { order, needed })
    } else {
        Ok(())
    }
}

fn zero_jet(dim: usize, order: usize) -> Jet {
    Jet::zero(dim, order)
}

/// `Γ^k_ij = ½ g^kl (∂_i g_jl + ∂_j g_il − ∂_l g_ij)`, symmetric in `i, j`.
pub fn christoffel(g: &JetTensor, g_inv: &JetTensor) -> Result<JetTensor, CurvatureError> {
    let order = g.order();
    require_order(order, 1)?;
    let n = g.dim();
    let mut dg = Vec::with_capacity(n);
    for l in 0..n {
        dg.push(
            g.data()
                .iter()
                .map(|j| j.derivative(l))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    // dg[l][a*n+b] = ∂_l g_ab
    let gi = g_inv.truncate(order - 1);
    let lowered: Vec<Jet> = multi_indices(n, 3)
        .map(|idx| {
            let (i, j, l) = (idx[0], idx[1], idx[2]);
            let mut s = dg[i][j * n + l].clone();
            s += &dg[j][i * n + l];
            s -= &dg[l][i * n + j];
            s.scale(0.5)
        })
        .collect();
    let mut gamma = Tensor::from_fn(n, vec![Up, Down, Down], |_| {
        zero_jet(g.data()[0].dim(), order - 1)
    });
    for k in 0..n {
        for i in 0..n {
            for j in i..n {
                let mut acc = zero_jet(g.data()[0].dim(), order - 1);
                for l in 0..n {
                    acc.add_product(gi.get(&[k, l]), &lowered[(i * n + j) * n + l]);
                }
                *gamma.get_mut(&[k, j, i]) = acc.clone();
                *gamma.get_mut(&[k, i, j]) = acc;
            }
        }
    }
    Ok(gamma)
}

/// Curvature of a metric (or of an arbitrary torsion-free connection) at a point.
#[derive(Debug, Clone)]
pub struct CurvaturePack {
    /// Order of the metric jets.
    pub order: usize,
    pub g: JetTensor,
    pub g_inv: JetTensor,
    /// `Γ^k_ij`, order K−1.
    pub christoffel: JetTensor,
    /// `R^l_ijk`, order K−2.
    pub riemann_up: JetTensor,
    /// `R_ijkl`, order K−2.
    pub riemann: JetTensor,
    /// `ρ_ij`, order K−2.
    pub ricci: JetTensor,
    /// `τ`, order K−2.
    pub scalar: Jet,
}

impl CurvaturePack {
    pub fn from_metric(g: JetTensor) -> Result<CurvaturePack, CurvatureError> {
        require_order(g.order(), 2)?;
        let g_inv = metric_inverse(&g)?;
        let gamma = christoffel(&g, &g_inv)?;
        CurvaturePack::from_connection(g, g_inv, gamma)
    }

    /// Assembles curvature from a given connection; used to check that the
    /// identity suite notices a corrupted one.
    pub fn from_connection(
        g: JetTensor,
        g_inv: JetTensor,
        christoffel: JetTensor,
    ) -> Result<CurvaturePack, CurvatureError> {
        let order = g.order();
        require_order(order, 2)?;
        let n = g.dim();
        let vars = g.data()[0].dim();
        let low = order - 2;
        let mut d_gamma = Vec::with_capacity(n);
        for m in 0..n {
            d_gamma.push(
                christoffel
                    .data()
                    .iter()
                    .map(|j| j.derivative(m))
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
        let gt = christoffel.truncate(low);
        let gamma_at = |l: usize, i: usize, j: usize| gt.get(&[l, i, j]);
        let flat3 = |l: usize, i: usize, j: usize| (l * n + i) * n + j;
        let mut riemann_up =
            Tensor::from_fn(n, vec![Up, Down, Down, Down], |_| zero_jet(vars, low));
        for l in 0..n {
            for i in 0..n {
                for j in (i + 1)..n {
                    for k in 0..n {
                        let mut r = d_gamma[i][flat3(l, j, k)].clone();
                        r -= &d_gamma[j][flat3(l, i, k)];
                        let mut neg = zero_jet(vars, low);
                        for m in 0..n {
                            r.add_product(gamma_at(l, i, m), gamma_at(m, j, k));
                            neg.add_product(gamma_at(l, j, m), gamma_at(m, i, k));
                        }
                        r -= &neg;
                        *riemann_up.get_mut(&[l, j, i, k]) = -&r;
                        *riemann_up.get_mut(&[l, i, j, k]) = r;
                    }
                }
            }
        }
        let g_low = g.truncate(low);
        let g_inv_low = g_inv.truncate(low);
        let riemann = Tensor::from_fn(n, vec![Down; 4], |idx| {
            let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
            let mut acc = zero_jet(vars, low);
            for m in 0..n {
                acc.add_product(g_low.get(&[k, m]), riemann_up.get(&[m, i, j, l]));
            }
            acc
        });
        let ricci = Tensor::from_fn(n, vec![Down; 2], |idx| {
            let mut acc = zero_jet(vars, low);
            for i in 0..n {
                acc += riemann_up.get(&[i, i, idx[0], idx[1]]);
            }
            acc
        });
        let scalar = trace(&ricci, &g_inv_low);
        Ok(CurvaturePack {
            order,
            g,
            g_inv,
            christoffel,
            riemann_up,
            riemann,
            ricci,
            scalar,
        })
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    /// Order of curvature-level quantities.
    pub fn curvature_order(&self) -> usize {
        self.order - 2
    }

    /// Mixed Ricci operator `Ric^i_j = g^ik ρ_kj` at the base point.
    pub fn ricci_operator(&self) -> PointTensor {
        let g_inv = self.g_inv.values();
        let rho = self.ricci.values();
        crate::tensor::matmul(&g_inv, &rho, vec![Up, Down])
    }

    /// Weyl tensor; identically zero in dimension three.
    pub fn weyl(&self) -> Weyl {
        let n = self.dim();
        let low = self.curvature_order();
        if n < 4 {
            return Weyl {
                tensor: self.riemann.map(|j| j.constant_like(0.0)),
                vanishes_by_dimension: true,
            };
        }
        let g = self.g.truncate(low);
        let rho = &self.ricci;
        let tau = &self.scalar;
        let a = 1.0 / (n as f64 - 2.0);
        let b = 1.0 / ((n as f64 - 1.0) * (n as f64 - 2.0));
        let tensor = Tensor::from_fn(n, vec![Down; 4], |idx| {
            let (i, j, k, l) = (idx[0], idx[1], idx[2], idx[3]);
            let gg = |p: usize, q: usize| g.get(&[p, q]);
            let r = |p: usize, q: usize| rho.get(&[p, q]);
            let mut kulkarni = gg(i, k) * r(j, l);
            kulkarni -= &(gg(i, l) * r(j, k));
            kulkarni -= &(gg(j, k) * r(i, l));
            kulkarni += &(gg(j, l) * r(i, k));
            let mut gg2 = gg(i, k) * gg(j, l);
            gg2 -= &(gg(i, l) * gg(j, k));
            let mut c = self.riemann.get(idx).clone();
            c.add_scaled(-a, &kulkarni);
            c.add_scaled(b, &(tau * &gg2));
            c
        });
        Weyl {
            tensor,
            vanishes_by_dimension: false,
        }
    }

    /// `(τ, ρ_ij ρ^ij, R_ijkl R^ijkl)` at the base point.
    pub fn scalar_invariants(&self) -> (f64, f64, f64) {
        let g_inv = self.g_inv.values();
        let rho = self.ricci.values();
        let riem = self.riemann.values();
        let n = self.dim();
        let rho_up = raise_all(&rho, &g_inv);
        let riem_up = raise_all(&riem, &g_inv);
        let ricci_sq = rho
            .data()
            .iter()
            .zip(rho_up.data())
            .map(|(a, b)| a * b)
            .sum();
        let kretschmann = riem
            .data()
            .iter()
            .zip(riem_up.data())
            .map(|(a, b)| a * b)
            .sum();
        debug_assert_eq!(rho.dim(), n);
        (self.scalar.value(), ricci_sq, kretschmann)
    }
}

/// Raises every index of an all-covariant point tensor.
pub fn raise_all(t: &PointTensor, g_inv: &PointTensor) -> PointTensor {
    let mut out = t.clone();
    for slot in 0..t.rank() {
        out = crate::tensor::raise_lower(&out, slot, g_inv, g_inv).expect("slot in range");
    }
    out
}

/// `g^ij T_ij` with both at the same order.
pub fn trace(t: &JetTensor, g_inv: &JetTensor) -> Jet {
    let mut acc = t.data()[0].zero_like();
    for (a, b) in t.data().iter().zip(g_inv.data()) {
        acc.add_product(a, b);
    }
    acc
}

#[derive(Debug, Clone)]
pub struct Weyl {
    pub tensor: JetTensor,
    pub vanishes_by_dimension: bool,
}

/// Gradient, Hessian and Laplacian of a scalar jet.
#[derive(Debug, Clone)]
pub struct ScalarDerivatives {
    /// Order K.
    pub value: Jet,
    /// `∂_i f`, order K−1.
    pub differential: JetTensor,
    /// `g^ij ∂_j f`, order K−1.
    pub gradient: JetTensor,
    /// `∂_i∂_j f − Γ^k_ij ∂_k f`, order K−2.
    pub hessian: JetTensor,
    /// `g^ij Hes_ij`, order K−2.
    pub laplacian: Jet,
    /// `g^ij ∂_i f ∂_j f`, order K−1.
    pub grad_norm2: Jet,
}

impl ScalarDerivatives {
    pub fn new(f: &Jet, pack: &CurvaturePack) -> Result<ScalarDerivatives, CurvatureError> {
        let order = pack.order;
        if f.order() != order {
            return Err(
                JetError::ShapeMismatch(f.dim(), f.order(), pack.g.data()[0].dim(), order).into(),
            );
        }
        let n = pack.dim();
        let differential = Tensor::from_data(
            n,
            vec![Down],
            (0..n)
                .map(|i| f.derivative(i))
                .collect::<Result<Vec<_>, _>>()?,
        );
        let g_inv = pack.g_inv.truncate(order - 1);
        let gradient = Tensor::from_fn(n, vec![Up], |idx| {
            let mut acc = f.truncate(order - 1).zero_like();
            for j in 0..n {
                acc.add_product(g_inv.get(&[idx[0], j]), differential.get(&[j]));
            }
            acc
        });
        let mut grad_norm2 = f.truncate(order - 1).zero_like();
        for i in 0..n {
            grad_norm2.add_product(gradient.get(&[i]), differential.get(&[i]));
        }
        let low = order - 2;
        let d_low = differential.truncate(low);
        let gamma = pack.christoffel.truncate(low);
        let mut hessian = Tensor::from_fn(n, vec![Down, Down], |_| f.truncate(low).zero_like());
        for i in 0..n {
            for j in i..n {
                let mut h = differential.get(&[j]).derivative(i)?;
                let mut conn = h.zero_like();
                for k in 0..n {
                    conn.add_product(gamma.get(&[k, i, j]), d_low.get(&[k]));
                }
                h -= &conn;
                *hessian.get_mut(&[j, i]) = h.clone();
                *hessian.get_mut(&[i, j]) = h;
            }
        }
        let laplacian = trace(&hessian, &pack.g_inv.truncate(low));
        Ok(ScalarDerivatives {
            value: f.clone(),
            differential,
            gradient,
            hessian,
            laplacian,
            grad_norm2,
        })
    }

    /// `hes(X)^a = g^ab Hes_bc X^c` at the base point.
    pub fn hessian_operator(&self, pack: &CurvaturePack) -> PointTensor {
        crate::tensor::matmul(&pack.g_inv.values(), &self.hessian.values(), vec![Up, Down])
    }
}

/// Density `h` together with the cosmological constant and Bakry-Émery parameter.
#[derive(Debug, Clone)]
pub struct DensityPack {
    pub h: ScalarDerivatives,
    pub lambda: f64,
    pub mu: f64,
}

impl DensityPack {
    pub fn new(
        h: &Jet,
        pack: &CurvaturePack,
        lambda: f64,
        mu: f64,
    ) -> Result<DensityPack, CurvatureError> {
        if !(h.value() > 0.0) {
            return Err(CurvatureError::NonPositiveDensity(h.value()));
        }
        Ok(DensityPack {
            h: ScalarDerivatives::new(h, pack)?,
            lambda,
            mu,
        })
    }
}

/// `G^h = hρ − Hes_h + (Δh + Λ) g`, order K−2.
pub fn weighted_einstein(pack: &CurvaturePack, density: &DensityPack) -> JetTensor {
    let low = pack.curvature_order();
    let h = density.h.value.truncate(low);
    let mut coeff = density.h.laplacian.clone();
    coeff.add_scaled(1.0, &coeff.constant_like(density.lambda));
    let g = pack.g.truncate(low);
    Tensor::from_fn(pack.dim(), vec![Down, Down], |idx| {
        let mut t = &h * pack.ricci.get(idx);
        t -= density.h.hessian.get(idx);
        t.add_product(&coeff, g.get(idx));
        t
    })
}

/// `1 + max` over the summands of `G^h` at the base point.
pub fn weighted_einstein_scale(pack: &CurvaturePack, density: &DensityPack) -> f64 {
    let h = density.h.value.value();
    let coeff = density.h.laplacian.value() + density.lambda;
    let mut m: f64 = 0.0;
    for idx in multi_indices(pack.dim(), 2) {
        m = m
            .max((h * pack.ricci.get(&idx).value()).abs())
            .max(density.h.hessian.get(&idx).value().abs())
            .max((coeff * pack.g.get(&idx).value()).abs());
    }
    1.0 + m
}

/// `ρ^f = ρ + Hes_f − μ df⊗df`, order K−2.
pub fn bakry_emery(pack: &CurvaturePack, f: &ScalarDerivatives, mu: f64) -> JetTensor {
    let low = pack.curvature_order();
    let df = f.differential.truncate(low);
    Tensor::from_fn(pack.dim(), vec![Down, Down], |idx| {
        let mut t = pack.ricci.get(idx) + f.hessian.get(idx);
        t.add_scaled(-mu, &(df.get(&idx[..1]) * df.get(&idx[1..])));
        t
    })
}

/// `(f+1)ρ − Hes_f + (Δf − τ/n) g`, order K−2.
pub fn cpe_tensor(pack: &CurvaturePack, f: &ScalarDerivatives) -> JetTensor {
    let low = pack.curvature_order();
    let n = pack.dim();
    let mut f1 = f.value.truncate(low);
    f1.add_scaled(1.0, &f1.constant_like(1.0));
    let mut coeff = f.laplacian.clone();
    coeff.add_scaled(-1.0 / n as f64, &pack.scalar);
    let g = pack.g.truncate(low);
    Tensor::from_fn(n, vec![Down, Down], |idx| {
        let mut t = &f1 * pack.ricci.get(idx);
        t -= f.hessian.get(idx);
        t.add_product(&coeff, g.get(idx));
        t
    })
}

/// `(∇T)_{k i₁…i_s} = ∂_k T_{i₁…i_s} − Σ_m Γ^l_{k i_m} T_{…l…}` for an
/// all-covariant tensor; one order lower than `t`.
pub fn cov_derivative(t: &JetTensor, christoffel: &JetTensor) -> Result<JetTensor, CurvatureError> {
    let order = t.order();
    require_order(order, 1)?;
    debug_assert!(t.variance().iter().all(|v| *v == Down));
    let n = t.dim();
    let s = t.rank();
    let low = order - 1;
    let gamma = christoffel.truncate(low);
    let t_low = t.truncate(low);
    let mut derivs = Vec::with_capacity(n);
    for k in 0..n {
        derivs.push(
            t.data()
                .iter()
                .map(|j| j.derivative(k))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    let mut out = Vec::with_capacity(n.pow(s as u32 + 1));
    for idx in multi_indices(n, s + 1) {
        let k = idx[0];
        let rest = &idx[1..];
        let mut acc = derivs[k][t.flat_index(rest)].clone();
        let mut conn = acc.zero_like();
        let mut src = rest.to_vec();
        for m in 0..s {
            for l in 0..n {
                src[m] = l;
                conn.add_product(gamma.get(&[l, k, rest[m]]), t_low.get(&src));
            }
            src[m] = rest[m];
        }
        acc -= &conn;
        out.push(acc);
    }
    Ok(Tensor::from_data(n, vec![Down; s + 1], out))
}

/// `(div T)_j = g^ik (∇T)_ikj` for a covariant 2-tensor.
pub fn divergence(
    t: &JetTensor,
    g_inv: &JetTensor,
    christoffel: &JetTensor,
) -> Result<JetTensor, CurvatureError> {
    let nabla = cov_derivative(t, christoffel)?;
    let low = nabla.order();
    let gi = g_inv.truncate(low);
    let n = t.dim();
    Ok(Tensor::from_fn(n, vec![Down], |idx| {
        let mut acc = nabla.data()[0].zero_like();
        for i in 0..n {
            for k in 0..n {
                acc.add_product(gi.get(&[i, k]), nabla.get(&[i, k, idx[0]]));
            }
        }
        acc
    }))
}

/// Expansion, shear and twist of the gradient of a scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalScalars {
    pub expansion: f64,
    /// `(∇^iV^j) ∇_(iV_j) − (n−2)θ²`.
    pub shear_sq: f64,
    /// `‖Hes‖² − (n−2)θ²`; equals `shear_sq` for gradient fields.
    pub shear_sq_hessian: f64,
    /// `(∇^iV^j) ∇_[iV_j]`.
    pub twist_sq: f64,
    /// `1 + max |∇_iV_j|`, for normalizing the above.
    pub scale: f64,
}

/// Lightlike threshold, relative to `1 + max |V|`.
pub const LIGHTLIKE_TOL: f64 = 1e-10;

pub fn optical_scalars(
    pack: &CurvaturePack,
    v: &ScalarDerivatives,
) -> Result<OpticalScalars, CurvatureError> {
    let n = pack.dim();
    require_order(v.differential.order(), 1)?;
    let norm = v.grad_norm2.value();
    let v_scale = 1.0
        + v.gradient
            .values()
            .max_abs()
            .max(v.differential.values().max_abs());
    if norm.abs() >= LIGHTLIKE_TOL * v_scale * v_scale {
        return Err(CurvatureError::NotLightlike {
            norm,
            scale: v_scale,
        });
    }
    // ∇_i V_j through the generic covariant derivative of the 1-form
    let nabla_v = cov_derivative(&v.differential, &pack.christoffel)?.values();
    let g_inv = pack.g_inv.values();
    let up = raise_all(&nabla_v, &g_inv);
    let theta = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| g_inv.get(&[i, j]) * nabla_v.get(&[i, j]))
        .sum::<f64>()
        / (n as f64 - 2.0);
    let mut sym = 0.0;
    let mut anti = 0.0;
    for i in 0..n {
        for j in 0..n {
            let a = nabla_v.get(&[i, j]);
            let b = nabla_v.get(&[j, i]);
            sym += up.get(&[i, j]) * 0.5 * (a + b);
            anti += up.get(&[i, j]) * 0.5 * (a - b);
        }
    }
    let hes = v.hessian.values();
    let hes_up = raise_all(&hes, &g_inv);
    let hes_sq: f64 = hes
        .data()
        .iter()
        .zip(hes_up.data())
        .map(|(a, b)| a * b)
        .sum();
    let tail = (n as f64 - 2.0) * theta * theta;
    Ok(OpticalScalars {
        expansion: theta,
        shear_sq: sym - tail,
        shear_sq_hessian: hes_sq - tail,
        twist_sq: anti,
        scale: 1.0 + nabla_v.max_abs().max(up.max_abs()),
    })
}

/// The warped product `base ×_warp ℝ` with fiber coordinate `t` appended
/// and `g_tt = warp²`.
pub fn warped_product(base: &MetricSpec, warp: &DensitySpec) -> Result<MetricSpec, CurvatureError> {
    if base.chart.coords().iter().any(|c| c == "t") {
        return Err(CurvatureError::FiberNameTaken);
    }
    if base.bindings != warp.bindings {
        return Err(CurvatureError::BindingMismatch);
    }
    let n = base.dim();
    let mut coords = base.chart.coords().to_vec();
    coords.push("t".into());
    let chart = crate::tensor::Chart::new(coords, base.chart.constraints().to_vec())?
        .with_constraint(warp.expr.clone());
    let m = n + 1;
    let mut components = vec![Expr::Lit(0.0); m * (m + 1) / 2];
    for i in 0..n {
        for j in i..n {
            components[packed_index(m, i, j)] = base.component(i, j).clone();
        }
    }
    components[packed_index(m, n, n)] =
        Expr::Pow(Box::new(warp.expr.clone()), crate::expr::Exponent::Int(2));
    Ok(MetricSpec::new(
        chart,
        components,
        base.kind,
        base.bindings.clone(),
    )?)
}

#[cfg(test)]
mod tests;
