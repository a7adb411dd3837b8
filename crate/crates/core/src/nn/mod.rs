//! Scratch reverse-mode autodiff, the four-subnetwork backbone and Adam.

pub mod adam;
pub mod cycle;
pub mod net;
pub mod tape;
pub mod tensor;

pub use adam::{AdamState, OptimizerKind};
pub use cycle::{
    forward_cycle_2d, forward_cycle_3d, forward_cycles_joint, run_cycles, wrap_jvp,
    wrap_jvp_joint, CycleOutputs, GridLattice,
};
pub use net::{Mlp, MlpIds, MlpTrace, ParamNet, ParamNetIds, LEAKY_SLOPE};
pub use tape::{Grads, NodeId, Tape};
pub use tensor::{Scalar, Tensor};
