//! PET SUV normalization, percentage-of-SUVmax threshold contouring and
//! segmentation metrics for volumetric images.
//!
//! Volumes are stored x-fastest (`x + nx * (y + ny * z)`) with a
//! [`GridGeometry`] describing spacing, origin and direction in mm.

pub mod cli;
pub mod components;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod nifti;
pub mod normalize;
pub mod phantom;
pub mod report;
pub mod resample;
pub mod stats;
pub mod sweep;
pub mod volume;

pub use error::{Error, Result};
pub use metrics::{evaluate, MetricsResult, WilcoxonResult};
pub use normalize::{DatasetFingerprint, MaskScope, Scheme};
pub use sweep::{fcn_sweep, SweepCase, SweepConfig, SweepResult};
pub use volume::{GridGeometry, Mask, MultiChannelVolume, Volume};
