//! Interval arithmetic, axis-aligned boxes, and the scalar abstraction that
//! lets plant models run over points, intervals, and forward-mode duals.

mod interval;
mod rect;
mod scalar;

pub use interval::{interval_arith, interval_trig, ArithOp, Interval, Operand, TrigFn};
pub use rect::{affine_interval_eval, HyperRect};
pub use scalar::{Dual, Scalar};
