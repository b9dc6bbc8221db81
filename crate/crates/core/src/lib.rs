//! Numerics for von Neumann-type inequalities of commuting matrix row contractions on the
//! unit ball of `C^d`.

// `!(x > 0.0)` style comparisons are deliberate: they reject NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ball;
pub mod calculus;
pub mod error;
pub mod experiments;
pub mod expr;
pub mod gleason;
pub mod json;
pub mod linalg;
pub mod optim;
pub mod par;
pub mod pick;
pub mod poly;
pub mod sampling;
pub mod schur;
pub mod series;
pub mod tuple;

pub use ball::BallAutomorphism;
pub use error::{Error, ErrorClass, Result};
pub use expr::{Expr, FunctionExpr};
pub use linalg::{c64, CMat, C64};
pub use par::Exec;
pub use pick::{KernelSpec, PointConfiguration};
pub use poly::Polynomial;
pub use tuple::MatrixTuple;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
