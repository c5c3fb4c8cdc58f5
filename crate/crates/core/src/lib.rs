//! Faber, weighted Faber and Chebyshev polynomials on Jordan curves given by
//! exterior conformal maps.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chebyshev;
pub mod curve;
pub mod error;
pub mod experiment;
pub mod faber;
pub mod laurent;
pub mod norms;
pub mod precise;
pub mod variation;
pub mod weighted;

pub use curve::{BoundaryMesh, BuiltinKind, CornerInfo, CornerSpec, CurveKind, CurveSpec, ExteriorMap};
pub use error::{Error, Result};
pub use faber::{FaberBasis, Polynomial};
pub use laurent::LaurentSeries;
pub use norms::{sup_norm_on_curve, BoundaryFn, NormEstimate};
pub use weighted::{weight_plan, WeightPlan};
pub use chebyshev::{chebyshev_monic, widom_factor, widom_table, ChebyshevOptions, MinimaxResult, TableSettings, WidomRow, WidomTable};
