//! Dense tensors, a reverse-mode tape and the finite-difference oracle.

mod gradcheck;
mod params;
mod tape;
pub(crate) mod tensor;

pub use gradcheck::{compare_gradients, finite_diff_gradient, relative_error, SlotCheck};
pub use params::{ParameterStore, Slot};
pub use tape::{sigmoid, Activation, Tape, Var};
pub use tensor::{gemm, Tensor};
