//! Minimal complex-valued network engine: labeled arrays, the layer
//! primitives of the Hammerstein architectures, reverse-mode gradients,
//! Adam and the MSE losses.

mod adam;
mod array;
mod graph;
mod loss;
pub mod ops;
mod param;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use array::{Axis, CxArray};
pub use graph::{Gradients, Graph, Var};
pub use loss::{mse_db, mse_loss, MSE_DB_FLOOR};
pub use param::{Parameter, Role};
pub(crate) use loss::energy_ratio_db;
