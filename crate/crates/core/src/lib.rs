//! Conformal curvature toolkit: closed-form metrics, curvature tensors on
//! Taylor jets, the n-harmonic gauge, principal symbols, a variational
//! coordinate solver and symbol smoothing on a torus.

// `!(a < b)` is used on purpose wherever NaN must be rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundled;
pub mod error;
pub mod expr;
pub mod metric;
pub mod smoothing;
pub mod solver;
pub mod suite;
pub mod symbol;
pub mod taylor;
pub mod tensor;

pub use error::{Error, Result};
pub use expr::{parse, Expr};
pub use metric::{MetricJet, MetricSpec, MetricSpecFile};
pub use smoothing::{LPBundle, SplitResult, SynthConfig, TorusSymbol};
pub use solver::{Grid, GridMap, SolveReport, SolveStatus, SolverConfig};
pub use symbol::{Certificate, Covector, FrozenPoint, SymPerturbation};
pub use tensor::{CurvatureBundle, PointTensor, Variance};
