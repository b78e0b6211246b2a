//! Dense arrays, recorded differentiable primitives, gradient checking
//! and optimization.

mod array;
pub mod container;
mod dd;
mod dropout;
mod gradcheck;
pub mod ops;
mod optim;
mod params;
mod scalar;
mod tape;

pub use array::{matmul, Array};
pub use dropout::{dropout_mask, DropoutKind, Mode};
pub use gradcheck::{finite_diff_check, finite_diff_check_with, GradCheck, Objective};
pub use optim::{adam_step, clip_global_norm, AdamState};
pub use params::{ParamEntry, ParamFlags, ParamId, ParamSet};
pub use dd::DoubleDouble;
pub use scalar::{DType, Scalar, Storable};
pub use tape::{Graph, NodeId};
