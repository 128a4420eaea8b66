//! Jet-based evaluation of curvature and weighted field equations on
//! pseudo-Riemannian metrics given in closed form.

// Guards are written as `!(x > bound)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod catalog;
pub mod curvature;
pub mod expr;
pub mod jet;
pub mod linalg;
pub mod report;
pub mod tensor;

pub use analysis::{verify, AnalysisError, GradientStatus, VerificationReport, VerifyOptions};
pub use catalog::{
    instantiate, list_families, CatalogError, FamilyDef, FamilyInstance, KundtConvention,
};
pub use curvature::{CurvatureError, CurvaturePack, DensityPack};
pub use expr::{parse, Bindings, Expr, ExprError, Scope, SlotFn};
pub use jet::{Jet, JetError, Univariate};
pub use tensor::{MetricKind, MetricSpec, TensorError};
