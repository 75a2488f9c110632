//! Resampling of axis-aligned grids to a new voxel spacing.
//!
//! Output dims are `round(n * old_spacing / new_spacing)` per axis (half away
//! from zero, at least 1). The output grid covers the same physical box
//! starting corner as the input: output voxel `i` samples the input at
//! continuous index `(i + 0.5) * new / old - 0.5`.
//!
//! Interpolation is separable and applied one axis at a time. Axes whose
//! spacing is unchanged are copied verbatim. Cubic B-spline interpolation
//! prefilters the samples into spline coefficients with mirror
//! (whole-sample symmetric) boundaries before evaluation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{GridGeometry, Mask, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Nearest,
    Trilinear,
    Bspline3,
}

impl std::str::FromStr for Interpolation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(Interpolation::Nearest),
            "trilinear" | "linear" => Ok(Interpolation::Trilinear),
            "bspline3" | "bspline" => Ok(Interpolation::Bspline3),
            other => Err(Error::InvalidArgument(format!(
                "unknown interpolation mode {other:?}"
            ))),
        }
    }
}

/// Output grid dimension for one axis.
pub fn resampled_len(n: usize, old_spacing: f64, new_spacing: f64) -> usize {
    ((n as f64 * old_spacing / new_spacing).round() as usize).max(1)
}

fn target_geometry(geometry: &GridGeometry, target: [f64; 3]) -> Result<GridGeometry> {
    if target.iter().any(|s| !s.is_finite() || *s <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "target spacing must be finite and > 0, got {target:?}"
        )));
    }
    if !geometry.is_axis_aligned() {
        return Err(Error::Unsupported(
            "resampling requires an axis-aligned direction matrix".into(),
        ));
    }
    let mut dims = [0; 3];
    let mut first = [0.0; 3];
    for a in 0..3 {
        dims[a] = resampled_len(geometry.dims[a], geometry.spacing[a], target[a]);
        first[a] = if target[a] == geometry.spacing[a] {
            0.0
        } else {
            0.5 * target[a] / geometry.spacing[a] - 0.5
        };
    }
    GridGeometry::new(dims, target, geometry.world(first), geometry.direction)
}

fn sample_position(i: usize, ratio: f64) -> f64 {
    (i as f64 + 0.5) * ratio - 0.5
}

/// Runs `f(input_line, output_line)` over every line along `axis`.
fn map_lines(
    data: &[f64],
    dims: [usize; 3],
    axis: usize,
    new_len: usize,
    mut f: impl FnMut(&[f64], &mut [f64]),
) -> (Vec<f64>, [usize; 3]) {
    let mut out_dims = dims;
    out_dims[axis] = new_len;
    let mut out = vec![0.0; out_dims.iter().product()];
    let in_stride: usize = dims[..axis].iter().product();
    let out_stride: usize = out_dims[..axis].iter().product();
    let (u, v) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let n = dims[axis];
    let mut line_in = vec![0.0; n];
    let mut line_out = vec![0.0; new_len];
    let index = |d: [usize; 3], p: [usize; 3]| p[0] + d[0] * (p[1] + d[1] * p[2]);
    for j in 0..dims[v] {
        for i in 0..dims[u] {
            let mut p = [0; 3];
            p[u] = i;
            p[v] = j;
            let base_in = index(dims, p);
            let base_out = index(out_dims, p);
            for (k, slot) in line_in.iter_mut().enumerate() {
                *slot = data[base_in + k * in_stride];
            }
            f(&line_in, &mut line_out);
            for (k, value) in line_out.iter().enumerate() {
                out[base_out + k * out_stride] = *value;
            }
        }
    }
    (out, out_dims)
}

fn nearest_line(input: &[f64], output: &mut [f64], ratio: f64) {
    let last = input.len() - 1;
    for (i, o) in output.iter_mut().enumerate() {
        let c = sample_position(i, ratio);
        let k = (c + 0.5).floor().clamp(0.0, last as f64) as usize;
        *o = input[k];
    }
}

fn linear_line(input: &[f64], output: &mut [f64], ratio: f64) {
    let last = input.len() - 1;
    for (i, o) in output.iter_mut().enumerate() {
        let c = sample_position(i, ratio).clamp(0.0, last as f64);
        let k = c.floor() as usize;
        if k >= last {
            *o = input[last];
        } else {
            let t = c - k as f64;
            let (a, b) = (input[k], input[k + 1]);
            *o = a + t * (b - a);
        }
    }
}

const POLE: f64 = -0.267_949_192_431_122_7; // sqrt(3) - 2
const PREFILTER_TOL: f64 = 1e-12;

fn causal_init(c: &[f64]) -> f64 {
    let n = c.len();
    let z = POLE;
    let horizon = (PREFILTER_TOL.ln() / z.abs().ln()).ceil() as usize;
    if horizon < n {
        let mut zn = z;
        let mut sum = c[0];
        for &ck in &c[1..horizon] {
            sum += zn * ck;
            zn *= z;
        }
        sum
    } else {
        let mut zn = z;
        let iz = 1.0 / z;
        let mut z2n = z.powi(n as i32 - 1);
        let mut sum = c[0] + z2n * c[n - 1];
        z2n *= z2n * iz;
        for &ck in &c[1..n - 1] {
            sum += (zn + z2n) * ck;
            zn *= z;
            z2n *= iz;
        }
        sum / (1.0 - zn * zn)
    }
}

/// In-place conversion of samples to cubic B-spline coefficients.
fn prefilter_line(c: &mut [f64]) {
    let n = c.len();
    if n < 2 {
        return;
    }
    let z = POLE;
    let gain = (1.0 - z) * (1.0 - 1.0 / z);
    for v in c.iter_mut() {
        *v *= gain;
    }
    c[0] = causal_init(c);
    for k in 1..n {
        c[k] += z * c[k - 1];
    }
    c[n - 1] = (z / (z * z - 1.0)) * (c[n - 1] + z * c[n - 2]);
    for k in (0..n - 1).rev() {
        c[k] = z * (c[k + 1] - c[k]);
    }
}

fn mirror(k: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let mut k = k.rem_euclid(period);
    if k >= n as isize {
        k = period - k;
    }
    k as usize
}

fn cubic_weights(t: f64) -> [f64; 4] {
    let s = 1.0 - t;
    [
        s * s * s / 6.0,
        2.0 / 3.0 - t * t + 0.5 * t * t * t,
        2.0 / 3.0 - s * s + 0.5 * s * s * s,
        t * t * t / 6.0,
    ]
}

fn bspline_line(coeffs: &[f64], output: &mut [f64], ratio: f64) {
    let n = coeffs.len();
    for (i, o) in output.iter_mut().enumerate() {
        let c = sample_position(i, ratio);
        let k = c.floor();
        let w = cubic_weights(c - k);
        let k = k as isize;
        *o = (0..4)
            .map(|j| w[j] * coeffs[mirror(k - 1 + j as isize, n)])
            .sum();
    }
}

fn resample_data(
    geometry: &GridGeometry,
    data: &[f64],
    target: [f64; 3],
    mode: Interpolation,
) -> Result<(GridGeometry, Vec<f64>)> {
    let out_geometry = target_geometry(geometry, target)?;
    let mut dims = geometry.dims;
    let mut buf = data.to_vec();
    for axis in 0..3 {
        let old = geometry.spacing[axis];
        let new = target[axis];
        if old == new {
            continue;
        }
        let ratio = new / old;
        let new_len = out_geometry.dims[axis];
        let (next, next_dims) = match mode {
            Interpolation::Nearest => map_lines(&buf, dims, axis, new_len, |i, o| {
                nearest_line(i, o, ratio)
            }),
            Interpolation::Trilinear => map_lines(&buf, dims, axis, new_len, |i, o| {
                linear_line(i, o, ratio)
            }),
            Interpolation::Bspline3 => {
                let mut scratch = Vec::new();
                map_lines(&buf, dims, axis, new_len, |i, o| {
                    scratch.clear();
                    scratch.extend_from_slice(i);
                    prefilter_line(&mut scratch);
                    bspline_line(&scratch, o, ratio)
                })
            }
        };
        buf = next;
        dims = next_dims;
    }
    debug_assert_eq!(dims, out_geometry.dims);
    Ok((out_geometry, buf))
}

/// Resamples an intensity volume to `target_spacing` (mm).
pub fn resample(vol: &Volume, target_spacing: [f64; 3], mode: Interpolation) -> Result<Volume> {
    let (geometry, data) = resample_data(vol.geometry(), vol.data(), target_spacing, mode)?;
    Volume::new(geometry, data)
}

/// Resamples a label mask with nearest-neighbour interpolation.
pub fn resample_mask(mask: &Mask, target_spacing: [f64; 3]) -> Result<Mask> {
    let data: Vec<f64> = mask.data().iter().map(|&v| v as f64).collect();
    let (geometry, out) =
        resample_data(mask.geometry(), &data, target_spacing, Interpolation::Nearest)?;
    Mask::new(geometry, out.into_iter().map(|v| v as u8).collect())
}
