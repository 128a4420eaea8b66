//! Solution families: a TOML definition format, the built-in roster,
//! instantiation with parameter overrides, and seeded sampling.
//!
//! A definition is a self-contained document; see `families/*.toml` for the
//! built-in ones and the crate README for the grammar.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::GradientStatus;
use crate::curvature::{warped_product, CurvatureError};
use crate::expr::{parse, Bindings, Expr, ExprError, Scope, SlotFn};
use crate::tensor::{packed_index, Chart, DensitySpec, MetricKind, MetricSpec, TensorError};

/// Default rejection margin for sampling.
pub const DEFAULT_MARGIN: f64 = 1e-3;
/// Sampling gives up after this many attempts per requested point.
pub const ATTEMPTS_PER_POINT: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("unknown family `{0}`")]
    UnknownFamily(String),
    #[error("family has no parameter or slot named `{0}`")]
    UnknownParameter(String),
    #[error("invalid family definition: {0}")]
    Definition(String),
    #[error("in {context}: {source}")]
    Expr {
        context: String,
        #[source]
        source: ExprError,
    },
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
    #[error("sampling accepted {accepted} of {requested} points in {attempts} attempts; box and constraints look inconsistent")]
    RejectionCap {
        requested: usize,
        accepted: usize,
        attempts: usize,
    },
}

fn expr_err(context: impl Into<String>) -> impl FnOnce(ExprError) -> CatalogError {
    let context = context.into();
    move |source| CatalogError::Expr { context, source }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyClass {
    PlaneWave,
    PpWave,
    Brinkmann,
    Kundt,
    EinsteinBackground,
    WarpedProduct,
}

/// Reading of the cross terms in the 3-dim Kundt form
/// `dv(c du + F dv + W dx) + dx²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KundtConvention {
    /// `g_uv = 1`, `g_vv = F`, `g_vx = W`: each product of distinct
    /// differentials in `dv(du + F dv + W dx)` is one symmetric pair of
    /// matrix entries.
    #[serde(rename = "du")]
    Du,
    /// `g_uv = 1`, `g_vv = F`, `g_vx = W/2`: `dv(2du + F dv + W dx)` read as
    /// a symmetrized product.
    #[serde(rename = "2du")]
    TwoDu,
}

impl KundtConvention {
    pub const ALL: [KundtConvention; 2] = [KundtConvention::Du, KundtConvention::TwoDu];

    pub fn name(self) -> &'static str {
        match self {
            KundtConvention::Du => "du",
            KundtConvention::TwoDu => "2du",
        }
    }

    /// Multiplier of `W` in `g_vx`.
    pub fn cross_factor(self) -> f64 {
        match self {
            KundtConvention::Du => 1.0,
            KundtConvention::TwoDu => 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartDef {
    pub coords: Vec<String>,
    /// Expressions that must be strictly positive.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraints: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlotDef {
    pub var: String,
    pub expr: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KundtDef {
    pub f: String,
    pub w: String,
    pub convention: KundtConvention,
}

fn lorentzian() -> MetricKind {
    MetricKind::Lorentzian
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricDef {
    #[serde(default = "lorentzian")]
    pub signature: MetricKind,
    /// `"i,j"` → expression, with `i` and `j` coordinate names or indices.
    /// Unlisted entries are zero; either triangle may be given.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub components: BTreeMap<String, String>,
    /// Alternative to `components` for the 3-dim Kundt form in `(u, v, x)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kundt: Option<KundtDef>,
}

fn zero_text() -> String {
    "0".into()
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityDef {
    pub h: String,
    /// Cosmological constant; a constant expression in the parameters.
    #[serde(default = "zero_text")]
    pub lambda: String,
    /// Bakry-Émery parameter.
    #[serde(default = "one")]
    pub mu: f64,
}

fn default_margin() -> f64 {
    DEFAULT_MARGIN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingDef {
    #[serde(default = "default_margin")]
    pub margin: f64,
    #[serde(rename = "box")]
    pub bounds: BTreeMap<String, [f64; 2]>,
}

/// An expression that must be nonzero at every sample for the family's
/// claims to apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreconditionDef {
    pub label: String,
    pub nonzero: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    #[serde(default)]
    pub isotropic: bool,
    #[serde(default)]
    pub ricci_flat: bool,
    /// Expected nilpotency index of the Ricci operator; 0 means not nilpotent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nilpotency: Option<u8>,
    /// Constant scalar curvature, as an expression in the parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient: Option<GradientStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kundt: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyDef {
    pub id: String,
    pub description: String,
    /// Short locator of the construction this family transcribes.
    #[serde(default)]
    pub anchor: String,
    pub class: FamilyClass,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Warp function; when present the family is `base ×_warp ℝ` with fiber
    /// coordinate `t`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warp: Option<String>,
    /// Potential `f` for the critical point equation check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpe_potential: Option<String>,
    pub chart: ChartDef,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub slots: BTreeMap<String, SlotDef>,
    pub metric: MetricDef,
    pub density: DensityDef,
    pub sampling: SamplingDef,
    #[serde(default)]
    pub expect: Expectations,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub preconditions: Vec<PreconditionDef>,
}

macro_rules! builtin {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../families/", $name, ".toml")))),*]
    };
}

/// Built-in definitions in listing order.
const BUILTIN: &[(&str, &str)] = builtin!(
    "plane-wave-3d",
    "pp-wave-spacelike",
    "kundt-3d",
    "ds-density",
    "ads-density",
    "pc-family",
    "cahen-wallach-pos",
    "cahen-wallach-neg",
    "brinkmann-nonisotropic",
    "tau-positive",
    "tau-negative",
    "brinkmann-4d-nonpp",
    "warped-m1",
    "warped-m2",
    "warped-m3",
    "pp-wave-nd-ricciflat",
);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilySummary {
    pub id: String,
    pub description: String,
    pub anchor: String,
    pub class: FamilyClass,
}

pub fn list_families() -> Vec<FamilySummary> {
    BUILTIN
        .iter()
        .map(|(id, _)| {
            let def = builtin(id).expect("built-in definitions parse");
            FamilySummary {
                id: def.id,
                description: def.description,
                anchor: def.anchor,
                class: def.class,
            }
        })
        .collect()
}

pub fn builtin(id: &str) -> Result<FamilyDef, CatalogError> {
    let (_, text) = BUILTIN
        .iter()
        .find(|(name, _)| *name == id)
        .ok_or_else(|| CatalogError::UnknownFamily(id.to_string()))?;
    from_toml(text)
}

pub fn from_toml(text: &str) -> Result<FamilyDef, CatalogError> {
    toml::from_str(text).map_err(|e| CatalogError::Definition(e.to_string()))
}

/// Serializes a definition to the config format.
pub fn export(def: &FamilyDef) -> String {
    toml::to_string_pretty(def).expect("definitions serialize")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Precondition {
    pub label: String,
    pub expr: Expr,
}

/// A definition with every parameter bound and every expression parsed.
#[derive(Debug, Clone)]
pub struct FamilyInstance {
    pub def: FamilyDef,
    /// Coordinates (including `t` for warped products), parameters and slots.
    pub scope: Scope,
    pub metric: MetricSpec,
    pub density: DensitySpec,
    pub lambda: f64,
    pub mu: f64,
    pub cpe_potential: Option<DensitySpec>,
    pub expected_tau: Option<f64>,
    pub preconditions: Vec<Precondition>,
    pub bounds: Vec<(f64, f64)>,
}

impl FamilyInstance {
    pub fn id(&self) -> &str {
        &self.def.id
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn bindings(&self) -> &Bindings {
        &self.metric.bindings
    }

    pub fn coord_index(&self, name: &str) -> Option<usize> {
        self.scope.coords.iter().position(|c| c == name)
    }
}

/// Applies `name = value` overrides. Slots take an expression in their
/// variable; real parameters take a constant expression.
pub fn apply_overrides(
    def: &FamilyDef,
    overrides: &[(String, String)],
) -> Result<FamilyDef, CatalogError> {
    let mut def = def.clone();
    let param_names: Vec<String> = def.params.keys().cloned().collect();
    for (name, text) in overrides {
        if let Some(slot) = def.slots.get_mut(name) {
            slot.expr = text.clone();
        } else if def.params.contains_key(name) {
            let scope = Scope::new(
                Vec::<String>::new(),
                param_names.clone(),
                Vec::<String>::new(),
            )
            .map_err(expr_err("parameter scope"))?;
            let e = parse(text, &scope).map_err(expr_err(format!("parameter `{name}`")))?;
            let values: Vec<f64> = def.params.values().copied().collect();
            let v = e
                .eval(&[], &Bindings::params(values))
                .map_err(expr_err(format!("parameter `{name}`")))?;
            def.params.insert(name.clone(), v);
        } else {
            return Err(CatalogError::UnknownParameter(name.clone()));
        }
    }
    Ok(def)
}

fn component_index(key: &str, coords: &[String]) -> Result<(usize, usize), CatalogError> {
    let bad = || CatalogError::Definition(format!("invalid component key `{key}`"));
    let (a, b) = key.split_once(',').ok_or_else(bad)?;
    let resolve = |s: &str| -> Result<usize, CatalogError> {
        let s = s.trim();
        if let Some(i) = coords.iter().position(|c| c == s) {
            return Ok(i);
        }
        s.parse::<usize>()
            .ok()
            .filter(|&i| i < coords.len())
            .ok_or_else(bad)
    };
    Ok((resolve(a)?, resolve(b)?))
}

fn kundt_components(
    kundt: &KundtDef,
    coords: &[String],
) -> Result<BTreeMap<String, String>, CatalogError> {
    if coords != ["u", "v", "x"] {
        return Err(CatalogError::Definition(
            "the Kundt form needs coordinates (u, v, x)".into(),
        ));
    }
    let mut m = BTreeMap::new();
    m.insert("u,v".to_string(), "1".to_string());
    m.insert("v,v".to_string(), kundt.f.clone());
    let cross = match kundt.convention {
        KundtConvention::Du => format!("({})", kundt.w),
        KundtConvention::TwoDu => format!("({})/2", kundt.w),
    };
    m.insert("v,x".to_string(), cross);
    m.insert("x,x".to_string(), "1".to_string());
    Ok(m)
}

pub fn instantiate(
    def: &FamilyDef,
    overrides: &[(String, String)],
) -> Result<FamilyInstance, CatalogError> {
    let def = apply_overrides(def, overrides)?;
    let param_names: Vec<String> = def.params.keys().cloned().collect();
    let param_values: Vec<f64> = def.params.values().copied().collect();
    let constants = Scope::new(
        Vec::<String>::new(),
        param_names.clone(),
        Vec::<String>::new(),
    )
    .map_err(expr_err("parameter scope"))?;
    let constant = |text: &str, what: &str| -> Result<f64, CatalogError> {
        parse(text, &constants)
            .and_then(|e| e.eval(&[], &Bindings::params(param_values.clone())))
            .map_err(expr_err(what.to_string()))
    };

    let mut slots = Vec::with_capacity(def.slots.len());
    for (name, slot) in &def.slots {
        let scope =
            Scope::for_slot(&slot.var, &param_names).map_err(expr_err(format!("slot `{name}`")))?;
        let body = parse(&slot.expr, &scope).map_err(expr_err(format!("slot `{name}`")))?;
        slots.push(SlotFn {
            name: name.clone(),
            var: slot.var.clone(),
            body,
        });
    }
    let bindings = Bindings {
        params: param_values.clone(),
        slots,
    };
    let slot_names: Vec<String> = def.slots.keys().cloned().collect();
    let coords = def.chart.coords.clone();
    let base_scope = Scope::new(coords.clone(), param_names.clone(), slot_names.clone())
        .map_err(expr_err("chart scope"))?;
    let parse_in =
        |scope: &Scope, text: &str, what: String| parse(text, scope).map_err(expr_err(what));

    let component_text = match &def.metric.kundt {
        Some(k) => {
            if !def.metric.components.is_empty() {
                return Err(CatalogError::Definition(
                    "give either metric components or a Kundt form, not both".into(),
                ));
            }
            kundt_components(k, &coords)?
        }
        None => def.metric.components.clone(),
    };
    let n = coords.len();
    let mut components = vec![Expr::Lit(0.0); n * (n + 1) / 2];
    let mut seen = vec![false; components.len()];
    for (key, text) in &component_text {
        let (i, j) = component_index(key, &coords)?;
        let slot = packed_index(n, i, j);
        if seen[slot] {
            return Err(CatalogError::Definition(format!(
                "component `{key}` given twice"
            )));
        }
        seen[slot] = true;
        components[slot] = parse_in(&base_scope, text, format!("metric component `{key}`"))?;
    }
    let constraints = def
        .chart
        .constraints
        .iter()
        .map(|c| parse_in(&base_scope, c, format!("constraint `{c}`")))
        .collect::<Result<Vec<_>, _>>()?;
    let chart = Chart::new(coords.clone(), constraints)?;
    let mut metric = MetricSpec::new(chart, components, def.metric.signature, bindings.clone())?;

    let mut scope = base_scope;
    if let Some(warp) = &def.warp {
        let w = parse_in(&scope, warp, "warp function".into())?;
        metric = warped_product(&metric, &DensitySpec::new(w, bindings.clone()))?;
        let mut full = coords.clone();
        full.push("t".into());
        scope =
            Scope::new(full, param_names.clone(), slot_names).map_err(expr_err("warped scope"))?;
    }

    let h = parse_in(&scope, &def.density.h, "density".into())?;
    metric.chart = metric.chart.clone().with_constraint(h.clone());
    let density = DensitySpec::new(h, bindings.clone());
    let lambda = constant(&def.density.lambda, "lambda")?;
    let cpe_potential = def
        .cpe_potential
        .as_deref()
        .map(|f| {
            parse_in(&scope, f, "CPE potential".into())
                .map(|e| DensitySpec::new(e, bindings.clone()))
        })
        .transpose()?;
    let expected_tau = def
        .expect
        .tau
        .as_deref()
        .map(|t| constant(t, "expected tau"))
        .transpose()?;
    let preconditions = def
        .preconditions
        .iter()
        .map(|p| {
            Ok(Precondition {
                label: p.label.clone(),
                expr: parse_in(&scope, &p.nonzero, format!("precondition `{}`", p.label))?,
            })
        })
        .collect::<Result<Vec<_>, CatalogError>>()?;
    let bounds = scope
        .coords
        .iter()
        .map(|c| {
            let [lo, hi] = *def.sampling.bounds.get(c).ok_or_else(|| {
                CatalogError::Definition(format!("sampling box has no range for `{c}`"))
            })?;
            if !(lo <= hi) {
                return Err(CatalogError::Definition(format!(
                    "empty sampling range for `{c}`"
                )));
            }
            Ok((lo, hi))
        })
        .collect::<Result<Vec<_>, CatalogError>>()?;
    Ok(FamilyInstance {
        mu: def.density.mu,
        def,
        scope,
        metric,
        density,
        lambda,
        cpe_potential,
        expected_tau,
        preconditions,
        bounds,
    })
}

/// Instantiates a built-in family with overrides.
pub fn instantiate_builtin(
    id: &str,
    overrides: &[(String, String)],
) -> Result<FamilyInstance, CatalogError> {
    instantiate(&builtin(id)?, overrides)
}

/// Draws `count` points uniformly from the box, rejecting any that fail a
/// chart constraint by less than the margin. Deterministic per seed.
pub fn sample_points(
    inst: &FamilyInstance,
    count: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, CatalogError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cap = ATTEMPTS_PER_POINT * count.max(1);
    let margin = inst.def.sampling.margin;
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0;
    while out.len() < count {
        if attempts == cap {
            return Err(CatalogError::RejectionCap {
                requested: count,
                accepted: out.len(),
                attempts,
            });
        }
        attempts += 1;
        let point: Vec<f64> = inst
            .bounds
            .iter()
            .map(|&(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect();
        if inst
            .metric
            .chart
            .check(&point, inst.bindings(), margin)
            .is_ok()
        {
            out.push(point);
        }
    }
    Ok(out)
}
