//! Overlap and surface metrics between binary masks, and the paired
//! Wilcoxon signed-rank test.
//!
//! Empty-mask conventions:
//!
//! | pred  | gt    | DSC | NSD | HD-95                 |
//! |-------|-------|-----|-----|-----------------------|
//! | empty | empty | 1   | 1   | 0                     |
//! | one empty     || 0   | 0   | grid physical diagonal |
//!
//! HD-95 is the larger of the two directed 95th-percentile boundary
//! distances, with the linear-interpolation percentile from
//! [`crate::stats`].

pub mod edt;
pub mod surface;
pub mod wilcoxon;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::percentile;
use crate::volume::Mask;

pub use surface::{boundary_voxels, surface_distances, SurfaceDistanceSet};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonResult};

/// NSD tolerance used when none is given (one voxel at 2 mm).
pub const DEFAULT_NSD_TAU_MM: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsResult {
    pub dsc: f64,
    pub nsd: f64,
    pub nsd_tau_mm: f64,
    pub hd95_mm: f64,
    pub flag_empty_pred: bool,
    pub flag_empty_gt: bool,
}

/// Dice similarity coefficient.
pub fn dsc(pred: &Mask, gt: &Mask) -> Result<f64> {
    pred.geometry().ensure_matches(gt.geometry(), "dsc")?;
    let (mut p, mut g, mut both) = (0usize, 0usize, 0usize);
    for (&a, &b) in pred.data().iter().zip(gt.data()) {
        p += a as usize;
        g += b as usize;
        both += (a & b) as usize;
    }
    Ok(if p + g == 0 {
        1.0
    } else {
        2.0 * both as f64 / (p + g) as f64
    })
}

fn check_tau(tau_mm: f64) -> Result<()> {
    if !(tau_mm >= 0.0) || !tau_mm.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "NSD tolerance must be finite and >= 0, got {tau_mm}"
        )));
    }
    Ok(())
}

/// Fraction of boundary voxels (of both masks) within `tau_mm` of the
/// other mask's boundary.
pub fn nsd_from_distances(s: &SurfaceDistanceSet, tau_mm: f64) -> f64 {
    let within = s
        .d_pred_to_gt
        .iter()
        .chain(&s.d_gt_to_pred)
        .filter(|&&d| d <= tau_mm)
        .count();
    within as f64 / (s.d_pred_to_gt.len() + s.d_gt_to_pred.len()) as f64
}

pub fn hd95_from_distances(s: &SurfaceDistanceSet) -> f64 {
    let a = percentile(&s.d_pred_to_gt, 95.0).unwrap_or(0.0);
    let b = percentile(&s.d_gt_to_pred, 95.0).unwrap_or(0.0);
    a.max(b)
}

/// Normalized surface Dice at tolerance `tau_mm`.
pub fn nsd(pred: &Mask, gt: &Mask, tau_mm: f64) -> Result<f64> {
    check_tau(tau_mm)?;
    Ok(evaluate(pred, gt, tau_mm)?.nsd)
}

/// 95th-percentile Hausdorff distance (mm).
pub fn hd95(pred: &Mask, gt: &Mask) -> Result<f64> {
    Ok(evaluate(pred, gt, DEFAULT_NSD_TAU_MM)?.hd95_mm)
}

/// All three metrics from one boundary-distance computation.
pub fn evaluate(pred: &Mask, gt: &Mask, tau_mm: f64) -> Result<MetricsResult> {
    check_tau(tau_mm)?;
    pred.geometry().ensure_matches(gt.geometry(), "evaluate")?;
    let empty_pred = pred.is_empty();
    let empty_gt = gt.is_empty();
    let dsc = dsc(pred, gt)?;
    let (nsd, hd95_mm) = match (empty_pred, empty_gt) {
        (true, true) => (1.0, 0.0),
        (true, false) | (false, true) => (0.0, pred.geometry().physical_diagonal()),
        (false, false) => {
            let s = surface_distances(pred, gt)?;
            (nsd_from_distances(&s, tau_mm), hd95_from_distances(&s))
        }
    };
    Ok(MetricsResult {
        dsc,
        nsd,
        nsd_tau_mm: tau_mm,
        hd95_mm,
        flag_empty_pred: empty_pred,
        flag_empty_gt: empty_gt,
    })
}
