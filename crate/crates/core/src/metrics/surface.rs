//! Boundary extraction and boundary-to-boundary distances.
//!
//! A boundary voxel is a foreground voxel with at least one face neighbour
//! that is background or outside the grid. Distances are centre-to-centre
//! in mm, from each boundary voxel of one mask to the nearest boundary voxel
//! of the other.

use serde::{Deserialize, Serialize};

use super::edt::squared_edt;
use crate::error::{Error, Result};
use crate::volume::Mask;

/// Directed boundary distances between two masks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDistanceSet {
    /// One entry per boundary voxel of the prediction, in linear order.
    pub d_pred_to_gt: Vec<f64>,
    /// One entry per boundary voxel of the ground truth, in linear order.
    pub d_gt_to_pred: Vec<f64>,
}

/// Linear indices of the boundary voxels of `mask`.
pub fn boundary_voxels(mask: &Mask) -> Vec<usize> {
    let g = mask.geometry();
    let [nx, ny, nz] = g.dims;
    let mut out = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = g.index(x, y, z);
                if !mask.contains(i) {
                    continue;
                }
                let edge = x == 0 || y == 0 || z == 0 || x + 1 == nx || y + 1 == ny || z + 1 == nz;
                if edge
                    || !mask.contains(i - 1)
                    || !mask.contains(i + 1)
                    || !mask.contains(i - nx)
                    || !mask.contains(i + nx)
                    || !mask.contains(i - nx * ny)
                    || !mask.contains(i + nx * ny)
                {
                    out.push(i);
                }
            }
        }
    }
    out
}

/// Distances (mm) from each voxel in `from` to the nearest voxel in `to`,
/// computed by an exact EDT restricted to the joint bounding box.
fn directed(from: &[usize], to: &[usize], mask: &Mask) -> Vec<f64> {
    let g = mask.geometry();
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    for &i in from.iter().chain(to) {
        let c = g.coords(i);
        for a in 0..3 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    let dims = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
    let local = |i: usize| {
        let c = g.coords(i);
        (c[0] - lo[0]) + dims[0] * ((c[1] - lo[1]) + dims[1] * (c[2] - lo[2]))
    };
    let mut features = vec![false; dims.iter().product()];
    for &i in to {
        features[local(i)] = true;
    }
    let d2 = squared_edt(&features, dims, g.spacing);
    from.iter().map(|&i| d2[local(i)].sqrt()).collect()
}

/// Boundary-to-boundary distances in both directions. Both masks must be
/// nonempty and share a grid.
pub fn surface_distances(pred: &Mask, gt: &Mask) -> Result<SurfaceDistanceSet> {
    pred.geometry().ensure_matches(gt.geometry(), "surface_distances")?;
    let bp = boundary_voxels(pred);
    let bg = boundary_voxels(gt);
    if bp.is_empty() {
        return Err(Error::EmptyMask("prediction is empty".into()));
    }
    if bg.is_empty() {
        return Err(Error::EmptyMask("ground truth is empty".into()));
    }
    Ok(SurfaceDistanceSet {
        d_pred_to_gt: directed(&bp, &bg, pred),
        d_gt_to_pred: directed(&bg, &bp, pred),
    })
}
