//! Connected-component labelling of binary masks.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Mask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    /// Face neighbours.
    Six,
    /// Face, edge and corner neighbours.
    TwentySix,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Result<Self> {
        match n {
            6 => Ok(Connectivity::Six),
            26 => Ok(Connectivity::TwentySix),
            other => Err(Error::InvalidArgument(format!(
                "connectivity must be 6 or 26, got {other}"
            ))),
        }
    }

    fn offsets(self) -> Vec<[isize; 3]> {
        let mut out = Vec::new();
        for dz in -1isize..=1 {
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let manhattan = dx.abs() + dy.abs() + dz.abs();
                    let keep = match self {
                        Connectivity::Six => manhattan == 1,
                        Connectivity::TwentySix => manhattan > 0,
                    };
                    if keep {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

/// Labels components with ids starting at 1 (0 = background), numbered in
/// order of their first voxel in linear order. Returns labels and sizes,
/// where `sizes[k]` is the size of component `k + 1`.
pub fn label_components(mask: &Mask, connectivity: Connectivity) -> (Vec<u32>, Vec<usize>) {
    let g = mask.geometry();
    let dims = g.dims;
    let offsets = connectivity.offsets();
    let mut labels = vec![0u32; g.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..g.len() {
        if !mask.contains(start) || labels[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        labels[start] = id;
        queue.push_back(start);
        let mut size = 0;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let c = g.coords(i);
            for off in &offsets {
                let mut n = [0usize; 3];
                let mut inside = true;
                for a in 0..3 {
                    let v = c[a] as isize + off[a];
                    if v < 0 || v >= dims[a] as isize {
                        inside = false;
                        break;
                    }
                    n[a] = v as usize;
                }
                if !inside {
                    continue;
                }
                let j = g.index(n[0], n[1], n[2]);
                if mask.contains(j) && labels[j] == 0 {
                    labels[j] = id;
                    queue.push_back(j);
                }
            }
        }
        sizes.push(size);
    }
    (labels, sizes)
}

/// Keeps only the largest connected component. Size ties go to the component
/// whose first voxel comes first in linear order. Empty in, empty out.
pub fn largest_component(mask: &Mask, connectivity: Connectivity) -> Mask {
    let (labels, sizes) = label_components(mask, connectivity);
    let Some(best) = sizes
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| a.cmp(b).then(ib.cmp(ia)))
        .map(|(i, _)| i as u32 + 1)
    else {
        return Mask::empty(mask.geometry().clone());
    };
    Mask::from_parts_unchecked(
        mask.geometry().clone(),
        labels.iter().map(|&l| (l == best) as u8).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::GridGeometry;
    use proptest::prelude::*;

    fn grid(n: [usize; 3]) -> GridGeometry {
        GridGeometry::axis_aligned(n, [2.0; 3], [0.0; 3]).unwrap()
    }

    /// Recursive flood fill, independent of the queue-based labeller.
    fn flood_sizes(mask: &Mask, conn: Connectivity) -> Vec<(usize, Vec<usize>)> {
        fn fill(mask: &Mask, seen: &mut [bool], i: usize, offs: &[[isize; 3]], acc: &mut Vec<usize>) {
            seen[i] = true;
            acc.push(i);
            let g = mask.geometry();
            let c = g.coords(i);
            for o in offs {
                let n: Vec<isize> = (0..3).map(|a| c[a] as isize + o[a]).collect();
                if (0..3).any(|a| n[a] < 0 || n[a] >= g.dims[a] as isize) {
                    continue;
                }
                let j = g.index(n[0] as usize, n[1] as usize, n[2] as usize);
                if mask.contains(j) && !seen[j] {
                    fill(mask, seen, j, offs, acc);
                }
            }
        }
        let offs = conn.offsets();
        let mut seen = vec![false; mask.data().len()];
        let mut out = Vec::new();
        for i in 0..mask.data().len() {
            if mask.contains(i) && !seen[i] {
                let mut acc = Vec::new();
                fill(mask, &mut seen, i, &offs, &mut acc);
                acc.sort();
                out.push((acc.len(), acc));
            }
        }
        out
    }

    #[test]
    fn keeps_larger_of_two_blobs() {
        let g = grid([8, 3, 3]);
        // 5-voxel bar at y=0,z=0 and 3-voxel bar at y=2,z=2
        let m = Mask::from_fn(g, |x, y, z| (y == 0 && z == 0 && x < 5) || (y == 2 && z == 2 && x >= 5));
        let oracle = flood_sizes(&m, Connectivity::Six);
        assert_eq!(oracle.iter().map(|c| c.0).collect::<Vec<_>>(), vec![5, 3]);
        let out = largest_component(&m, Connectivity::Six);
        assert_eq!(out.count(), 5);
        let kept: Vec<usize> = (0..out.data().len()).filter(|&i| out.contains(i)).collect();
        assert_eq!(kept, oracle[0].1);
    }

    #[test]
    fn single_blob_unchanged_and_empty_stays_empty() {
        let g = grid([4, 4, 4]);
        let blob = Mask::from_fn(g.clone(), |x, y, z| x < 2 && y < 3 && z == 1);
        assert_eq!(largest_component(&blob, Connectivity::Six), blob);
        let empty = Mask::empty(g);
        assert_eq!(largest_component(&empty, Connectivity::TwentySix), empty);
    }

    #[test]
    fn diagonal_voxels_join_only_under_26() {
        let g = grid([3, 3, 3]);
        let m = Mask::from_fn(g, |x, y, z| x == y && y == z);
        assert_eq!(largest_component(&m, Connectivity::Six).count(), 1);
        assert_eq!(largest_component(&m, Connectivity::TwentySix).count(), 3);
    }

    #[test]
    fn connectivity_parsing() {
        assert_eq!(Connectivity::from_count(6).unwrap(), Connectivity::Six);
        assert!(Connectivity::from_count(18).is_err());
    }

    proptest! {
        #[test]
        fn matches_flood_fill_and_is_idempotent(
            bits in prop::collection::vec(0u8..2, 5 * 4 * 3),
            twenty_six in any::<bool>(),
        ) {
            let conn = if twenty_six { Connectivity::TwentySix } else { Connectivity::Six };
            let m = Mask::new(grid([5, 4, 3]), bits).unwrap();
            let once = largest_component(&m, conn);
            prop_assert_eq!(&largest_component(&once, conn), &once);
            let oracle = flood_sizes(&m, conn);
            let max = oracle.iter().map(|c| c.0).max().unwrap_or(0);
            prop_assert_eq!(once.count(), max);
            for (a, b) in once.data().iter().zip(m.data()) {
                prop_assert!(a <= b);
            }
            if max > 0 {
                let kept: Vec<usize> = (0..once.data().len()).filter(|&i| once.contains(i)).collect();
                prop_assert!(oracle.iter().any(|c| c.1 == kept));
            }
        }
    }
}
