// SPDX-License-Identifier: MIT OR Apache-2.0

//! Composite experiments built from labeling and probing: band sweeps,
//! perturbation robustness, and checkpoint curves.

mod checkpoints;
mod robustness;
mod sweep;

pub use checkpoints::{checkpoint_curve, checkpoint_rows, CheckpointCurve, CheckpointRow};
pub use robustness::{perturbation_eval, robustness_rows, RobustnessCsvRow, RobustnessReport, RobustnessRow};
pub use sweep::{kl_sweep, sweep_layer_rows, sweep_rows, SweepCell, SweepGrid, SweepLayerRow, SweepRow};
