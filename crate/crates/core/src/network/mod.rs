//! The unrolled reconstruction network: conv operators J, G, G̃, J̃, the
//! shrinkage on sparse features, and the phase-wise update.

pub mod arch;
pub mod model;
pub mod shrink;
pub mod stack;

pub use arch::{Activation, Architecture, ConvStackSpec, LayerSpec};
pub use model::{
    apply_g, apply_g_linear, apply_j, forward_pass, phase_update, InitialGuess, NetworkParams,
    Operator, PhaseParams, Reconstruction,
};
pub use shrink::{shrink_l21, shrink_l21_backward, ShrinkMode};
pub use stack::{xavier_bound, ActivationMode, ConvLayer, ConvStack, StackTape};
