//! Voxel grids with physical geometry.
//!
//! All grids are linearized x-fastest: the voxel `(x, y, z)` lives at
//! `x + nx * (y + ny * z)`. This order is part of the public contract and is
//! what the NIfTI reader and writer use on disk.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-6;
const GEOMETRY_TOL: f64 = 1e-6;

pub const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Placement of a voxel grid in world space (millimetres).
///
/// `direction[r][c]` is row `r`, column `c`; column `c` is the world-space
/// unit vector of voxel axis `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
    #[serde(default = "identity")]
    pub direction: [[f64; 3]; 3],
}

fn identity() -> [[f64; 3]; 3] {
    IDENTITY
}

impl GridGeometry {
    pub fn new(
        dims: [usize; 3],
        spacing: [f64; 3],
        origin: [f64; 3],
        direction: [[f64; 3]; 3],
    ) -> Result<Self> {
        let geometry = GridGeometry {
            dims,
            spacing,
            origin,
            direction,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    /// Axis-aligned grid with identity direction.
    pub fn axis_aligned(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        Self::new(dims, spacing, origin, IDENTITY)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "grid dims must be >= 1, got {:?}",
                self.dims
            )));
        }
        if self.spacing.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "voxel spacing must be finite and > 0, got {:?}",
                self.spacing
            )));
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "origin must be finite, got {:?}",
                self.origin
            )));
        }
        let d = &self.direction;
        for a in 0..3 {
            for b in 0..3 {
                let dot: f64 = (0..3).map(|r| d[r][a] * d[r][b]).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                if !dot.is_finite() || (dot - want).abs() > ORTHONORMAL_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "direction matrix is not orthonormal: {:?}",
                        self.direction
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, index: usize) -> [usize; 3] {
        let nx = self.dims[0];
        let ny = self.dims[1];
        [index % nx, (index / nx) % ny, index / (nx * ny)]
    }

    /// World position (mm) of a voxel centre given continuous voxel coordinates.
    pub fn world(&self, voxel: [f64; 3]) -> [f64; 3] {
        let mut out = self.origin;
        for (r, o) in out.iter_mut().enumerate() {
            for c in 0..3 {
                *o += self.direction[r][c] * self.spacing[c] * voxel[c];
            }
        }
        out
    }

    /// Length (mm) of the diagonal of the physical box covered by the grid.
    pub fn physical_diagonal(&self) -> f64 {
        (0..3)
            .map(|a| {
                let e = self.dims[a] as f64 * self.spacing[a];
                e * e
            })
            .sum::<f64>()
            .sqrt()
    }

    /// True when every direction entry is 0 or ±1, i.e. voxel axes map onto
    /// world axes up to permutation and sign.
    pub fn is_axis_aligned(&self) -> bool {
        self.direction.iter().flatten().all(|v| {
            v.abs() < ORTHONORMAL_TOL || (v.abs() - 1.0).abs() < ORTHONORMAL_TOL
        })
    }

    /// Same dims, and spacing, origin and direction equal within 1e-6.
    pub fn matches(&self, other: &GridGeometry) -> bool {
        let close = |a: f64, b: f64| (a - b).abs() <= GEOMETRY_TOL;
        self.dims == other.dims
            && self.spacing.iter().zip(&other.spacing).all(|(a, b)| close(*a, *b))
            && self.origin.iter().zip(&other.origin).all(|(a, b)| close(*a, *b))
            && self
                .direction
                .iter()
                .flatten()
                .zip(other.direction.iter().flatten())
                .all(|(a, b)| close(*a, *b))
    }

    pub fn ensure_matches(&self, other: &GridGeometry, what: &str) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::Geometry(format!(
                "{what}: dims {:?} spacing {:?} vs dims {:?} spacing {:?}",
                self.dims, self.spacing, other.dims, other.spacing
            )))
        }
    }
}

/// Scalar intensity volume (SUV, g/ml).
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    geometry: GridGeometry,
    data: Vec<f64>,
}

impl Volume {
    pub fn new(geometry: GridGeometry, data: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        if data.len() != geometry.len() {
            return Err(Error::InvalidArgument(format!(
                "volume data length {} does not match grid {:?}",
                data.len(),
                geometry.dims
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite value {} at voxel {:?}",
                data[i],
                geometry.coords(i)
            )));
        }
        Ok(Volume { geometry, data })
    }

    pub fn filled(geometry: GridGeometry, value: f64) -> Result<Self> {
        let n = geometry.len();
        Self::new(geometry, vec![value; n])
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.geometry.index(x, y, z)]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Applies `f` voxelwise. Fails if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Volume> {
        Volume::new(
            self.geometry.clone(),
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    pub(crate) fn from_parts_unchecked(geometry: GridGeometry, data: Vec<f64>) -> Self {
        debug_assert_eq!(geometry.len(), data.len());
        Volume { geometry, data }
    }
}

/// Binary mask; every voxel is 0 or 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    geometry: GridGeometry,
    data: Vec<u8>,
}

impl Mask {
    pub fn new(geometry: GridGeometry, data: Vec<u8>) -> Result<Self> {
        geometry.validate()?;
        if data.len() != geometry.len() {
            return Err(Error::InvalidArgument(format!(
                "mask data length {} does not match grid {:?}",
                data.len(),
                geometry.dims
            )));
        }
        if let Some(i) = data.iter().position(|&v| v > 1) {
            return Err(Error::InvalidMask(format!(
                "value {} at voxel {:?} is not 0 or 1",
                data[i],
                geometry.coords(i)
            )));
        }
        Ok(Mask { geometry, data })
    }

    pub fn empty(geometry: GridGeometry) -> Self {
        let n = geometry.len();
        Mask {
            geometry,
            data: vec![0; n],
        }
    }

    pub fn full(geometry: GridGeometry) -> Self {
        let n = geometry.len();
        Mask {
            geometry,
            data: vec![1; n],
        }
    }

    pub fn from_fn(geometry: GridGeometry, f: impl Fn(usize, usize, usize) -> bool) -> Self {
        let [nx, ny, nz] = geometry.dims;
        let mut data = Vec::with_capacity(geometry.len());
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    data.push(f(x, y, z) as u8);
                }
            }
        }
        Mask { geometry, data }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn contains(&self, index: usize) -> bool {
        self.data[index] != 0
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.data[self.geometry.index(x, y, z)] != 0
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    /// Voxelwise AND. Geometries must match.
    pub fn intersect(&self, other: &Mask) -> Result<Mask> {
        self.geometry.ensure_matches(&other.geometry, "mask intersection")?;
        Ok(Mask {
            geometry: self.geometry.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a & b)
                .collect(),
        })
    }

    pub fn to_volume(&self) -> Volume {
        Volume::from_parts_unchecked(
            self.geometry.clone(),
            self.data.iter().map(|&v| v as f64).collect(),
        )
    }

    /// Inclusive voxel bounding box `(lo, hi)` of the nonzero voxels.
    pub fn bounding_box(&self) -> Option<([usize; 3], [usize; 3])> {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for (i, &v) in self.data.iter().enumerate() {
            if v != 0 {
                any = true;
                let c = self.geometry.coords(i);
                for a in 0..3 {
                    lo[a] = lo[a].min(c[a]);
                    hi[a] = hi[a].max(c[a]);
                }
            }
        }
        any.then_some((lo, hi))
    }

    pub(crate) fn from_parts_unchecked(geometry: GridGeometry, data: Vec<u8>) -> Self {
        debug_assert_eq!(geometry.len(), data.len());
        Mask { geometry, data }
    }
}

/// Channels sharing one grid; channel 0 is PET and channel 1, when present,
/// is the prostate mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiChannelVolume {
    geometry: GridGeometry,
    channels: Vec<Vec<f64>>,
}

impl MultiChannelVolume {
    pub fn new(geometry: GridGeometry, channels: Vec<Vec<f64>>) -> Result<Self> {
        geometry.validate()?;
        let n = geometry.len();
        if let Some((i, c)) = channels.iter().enumerate().find(|(_, c)| c.len() != n) {
            return Err(Error::Geometry(format!(
                "channel {i} has {} voxels, grid has {n}",
                c.len()
            )));
        }
        if let Some(mask) = channels.get(1) {
            if mask.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidMask(
                    "channel 1 must contain only 0 and 1".into(),
                ));
            }
        }
        Ok(MultiChannelVolume { geometry, channels })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, index: usize) -> Option<&[f64]> {
        self.channels.get(index).map(Vec::as_slice)
    }

    pub fn channel_volume(&self, index: usize) -> Option<Volume> {
        self.channels
            .get(index)
            .map(|c| Volume::from_parts_unchecked(self.geometry.clone(), c.clone()))
    }

    pub fn channel_mask(&self, index: usize) -> Option<Mask> {
        self.channels.get(index).map(|c| {
            Mask::from_parts_unchecked(
                self.geometry.clone(),
                c.iter().map(|&v| (v != 0.0) as u8).collect(),
            )
        })
    }

    pub(crate) fn replace_channel(&mut self, index: usize, data: Vec<f64>) {
        debug_assert_eq!(data.len(), self.geometry.len());
        self.channels[index] = data;
    }
}

/// Stacks PET (channel 0) and the prostate mask (channel 1).
pub fn stack_channels(pet: &Volume, prostate: &Mask) -> Result<MultiChannelVolume> {
    pet.geometry()
        .ensure_matches(prostate.geometry(), "stack_channels")?;
    Ok(MultiChannelVolume {
        geometry: pet.geometry().clone(),
        channels: vec![
            pet.data().to_vec(),
            prostate.data().iter().map(|&v| v as f64).collect(),
        ],
    })
}

/// Maximum of `vol` over the nonzero voxels of `mask`.
pub fn masked_max(vol: &Volume, mask: &Mask) -> Result<f64> {
    vol.geometry().ensure_matches(mask.geometry(), "masked_max")?;
    vol.data()
        .iter()
        .zip(mask.data())
        .filter(|(_, &m)| m != 0)
        .map(|(&v, _)| v)
        .reduce(f64::max)
        .ok_or_else(|| Error::EmptyMask("masked_max needs a nonempty mask".into()))
}

fn crop_geometry(geometry: &GridGeometry, lo: [usize; 3], hi: [usize; 3]) -> GridGeometry {
    let offset = [lo[0] as f64, lo[1] as f64, lo[2] as f64];
    GridGeometry {
        dims: [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1],
        spacing: geometry.spacing,
        origin: geometry.world(offset),
        direction: geometry.direction,
    }
}

fn crop_box(mask: &Mask, margin: usize) -> Result<([usize; 3], [usize; 3])> {
    let (lo, hi) = mask
        .bounding_box()
        .ok_or_else(|| Error::EmptyMask("crop_to_mask needs a nonempty mask".into()))?;
    let dims = mask.geometry().dims;
    let mut clo = [0; 3];
    let mut chi = [0; 3];
    for a in 0..3 {
        clo[a] = lo[a].saturating_sub(margin);
        chi[a] = (hi[a] + margin).min(dims[a] - 1);
    }
    Ok((clo, chi))
}

fn extract<T: Copy>(geometry: &GridGeometry, data: &[T], lo: [usize; 3], hi: [usize; 3]) -> Vec<T> {
    let mut out = Vec::with_capacity((hi[0] - lo[0] + 1) * (hi[1] - lo[1] + 1) * (hi[2] - lo[2] + 1));
    for z in lo[2]..=hi[2] {
        for y in lo[1]..=hi[1] {
            let row = geometry.index(lo[0], y, z);
            out.extend_from_slice(&data[row..row + hi[0] - lo[0] + 1]);
        }
    }
    out
}

/// Crops `vol` to the bounding box of `mask` grown by `margin_voxels` and
/// clamped to the grid. Returns the cropped volume and the voxel offset of
/// its first voxel in the source grid; world coordinates are preserved.
pub fn crop_to_mask(vol: &Volume, mask: &Mask, margin_voxels: usize) -> Result<(Volume, [usize; 3])> {
    vol.geometry().ensure_matches(mask.geometry(), "crop_to_mask")?;
    let (lo, hi) = crop_box(mask, margin_voxels)?;
    let geometry = crop_geometry(vol.geometry(), lo, hi);
    let data = extract(vol.geometry(), vol.data(), lo, hi);
    Ok((Volume::from_parts_unchecked(geometry, data), lo))
}

/// Same crop as [`crop_to_mask`] applied to another mask on the grid
/// (tumour labels are cropped with the prostate box).
pub fn crop_mask_to_mask(target: &Mask, mask: &Mask, margin_voxels: usize) -> Result<(Mask, [usize; 3])> {
    target.geometry().ensure_matches(mask.geometry(), "crop_to_mask")?;
    let (lo, hi) = crop_box(mask, margin_voxels)?;
    let geometry = crop_geometry(target.geometry(), lo, hi);
    let data = extract(target.geometry(), target.data(), lo, hi);
    Ok((Mask::from_parts_unchecked(geometry, data), lo))
}
