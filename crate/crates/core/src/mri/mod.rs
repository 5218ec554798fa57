//! Sampling masks, the per-coil encoding operators, the synthetic data
//! simulator and a CG-SENSE reference reconstruction.

pub mod cg_sense;
pub mod encoding;
pub mod mask;
pub mod phantom;
pub mod simulate;

pub use cg_sense::{cg_sense_baseline, CgSenseResult};
pub use encoding::{
    adjoint_op, forward_op, gradient_step, zero_filled_recon, Encoder, KSpaceData, TrainingSample,
};
pub use mask::{make_cartesian_mask, SamplingMask};
pub use phantom::{PhantomSpec, SensitivityMaps, SensitivitySpec};
pub use simulate::{simulate_sample, simulate_with_maps, SimulatedSample};
