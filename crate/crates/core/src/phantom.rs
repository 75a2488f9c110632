//! Synthetic PET phantoms with known optimal thresholds.
//!
//! The noiseless field is a constant background plus lesions, each
//! `peak * (1 - r^exponent)` inside its ellipsoid (`r` is the normalized
//! ellipsoidal radius) and zero outside. Values are rounded to f32 so the
//! in-memory phantom equals what a float32 NIfTI file stores. The label is
//! every prostate voxel whose noiseless value is at least
//! `gt_fraction * S`, with `S` the noiseless intra-prostatic maximum, so
//! thresholding the noiseless PET at `gt_fraction * S` reproduces it
//! exactly. Gaussian noise is added afterwards and clamped at zero.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`. A family uses one stream per case index (`set_stream`),
//! so cases are independent of each other and of the thread count.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{write_dataset, Case, DatasetDescriptor, DatasetLayout};
use crate::error::{Error, Result};
use crate::volume::{masked_max, GridGeometry, Mask, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    pub center: [f64; 3],
    pub radii: [f64; 3],
}

impl Ellipsoid {
    /// Normalized ellipsoidal radius of a world point (1 on the surface).
    pub fn radius_at(&self, p: [f64; 3]) -> f64 {
        (0..3)
            .map(|a| ((p[a] - self.center[a]) / self.radii[a]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lesion {
    pub center: [f64; 3],
    pub radii: [f64; 3],
    pub peak_suv: f64,
    pub exponent: f64,
}

impl Lesion {
    fn shape(&self) -> Ellipsoid {
        Ellipsoid {
            center: self.center,
            radii: self.radii,
        }
    }

    pub fn uptake_at(&self, p: [f64; 3]) -> f64 {
        let r = self.shape().radius_at(p);
        if r >= 1.0 {
            0.0
        } else {
            (self.peak_suv * (1.0 - r.powf(self.exponent))).max(0.0)
        }
    }
}

/// Per-case variation within a family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    /// Lesion centres move by a whole number of voxels in
    /// `-center_voxels..=center_voxels` per axis (one shift for all lesions).
    #[serde(default)]
    pub center_voxels: u32,
    /// Every lesion peak is scaled by one factor drawn uniformly from
    /// `[1 - peak_fraction, 1 + peak_fraction]`.
    #[serde(default)]
    pub peak_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub grid: GridGeometry,
    pub prostate: Ellipsoid,
    pub lesions: Vec<Lesion>,
    pub background_suv: f64,
    pub noise_sigma: f64,
    pub gt_fraction: f64,
    pub rng_seed: u64,
    #[serde(default)]
    pub jitter: Jitter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub pet: Volume,
    pub prostate: Mask,
    pub label: Mask,
    /// Noiseless intra-prostatic maximum.
    pub suvmax_noiseless: f64,
}

fn spec_err(msg: impl Into<String>) -> Error {
    Error::Spec(msg.into())
}

/// Points on the unit sphere used to test lesion containment.
fn sphere_samples() -> Vec<[f64; 3]> {
    let (n_theta, n_phi) = (24, 48);
    let mut out = vec![[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]];
    for i in 1..n_theta {
        let theta = std::f64::consts::PI * i as f64 / n_theta as f64;
        for j in 0..n_phi {
            let phi = 2.0 * std::f64::consts::PI * j as f64 / n_phi as f64;
            out.push([theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]);
        }
    }
    out
}

impl PhantomSpec {
    /// Reference design: 64^3 at 2 mm, one main lesion whose 35% level set
    /// is separated from the rest of the field, and a faint distractor that
    /// only enters predictions at 32% and below.
    pub fn reference() -> PhantomSpec {
        PhantomSpec {
            grid: GridGeometry::axis_aligned([64, 64, 64], [2.0; 3], [0.0; 3])
                .expect("valid grid"),
            prostate: Ellipsoid {
                center: [64.0, 64.0, 64.0],
                radii: [36.0, 28.0, 30.0],
            },
            lesions: vec![
                Lesion {
                    center: [58.0, 64.0, 60.0],
                    radii: [12.0; 3],
                    peak_suv: 12.0,
                    exponent: 3.0,
                },
                Lesion {
                    center: [86.0, 58.0, 72.0],
                    radii: [6.0; 3],
                    peak_suv: 3.29,
                    exponent: 3.0,
                },
            ],
            background_suv: 1.0,
            noise_sigma: 0.0,
            gt_fraction: 0.35,
            rng_seed: 20240601,
            jitter: Jitter {
                center_voxels: 1,
                peak_fraction: 0.1,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let finite3 = |v: &[f64; 3]| v.iter().all(|x| x.is_finite());
        if !finite3(&self.prostate.center) || !self.prostate.radii.iter().all(|&r| r > 0.0 && r.is_finite()) {
            return Err(spec_err("prostate centre must be finite and radii > 0"));
        }
        if !(self.background_suv >= 0.0 && self.background_suv.is_finite()) {
            return Err(spec_err("background_suv must be finite and >= 0"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(spec_err("noise_sigma must be finite and >= 0"));
        }
        if !(self.gt_fraction > 0.0 && self.gt_fraction < 1.0) {
            return Err(spec_err(format!("gt_fraction must lie in (0, 1), got {}", self.gt_fraction)));
        }
        let j = self.jitter;
        if !(j.peak_fraction >= 0.0 && j.peak_fraction < 1.0) {
            return Err(spec_err("jitter.peak_fraction must lie in [0, 1)"));
        }
        if self.lesions.is_empty() {
            return Err(spec_err("at least one lesion is required"));
        }
        let samples = sphere_samples();
        for (i, l) in self.lesions.iter().enumerate() {
            if !finite3(&l.center) || !l.radii.iter().all(|&r| r > 0.0 && r.is_finite()) {
                return Err(spec_err(format!("lesion {i}: centre must be finite and radii > 0")));
            }
            if !(l.exponent > 0.0 && l.exponent.is_finite()) {
                return Err(spec_err(format!("lesion {i}: exponent must be > 0")));
            }
            // the weakest allowed peak must still exceed the background
            let weakest = l.peak_suv * (1.0 - j.peak_fraction);
            if !(l.peak_suv.is_finite() && weakest > self.background_suv) {
                return Err(spec_err(format!(
                    "lesion {i}: peak_suv {} must exceed background_suv {} after jitter",
                    l.peak_suv, self.background_suv
                )));
            }
            // containment for every allowed centre shift
            let reach: Vec<f64> = (0..3)
                .map(|a| j.center_voxels as f64 * self.grid.spacing[a])
                .collect();
            for u in &samples {
                for corner in 0..8 {
                    let p: [f64; 3] = std::array::from_fn(|a| {
                        let shift = if corner >> a & 1 == 1 { reach[a] } else { -reach[a] };
                        l.center[a] + shift + l.radii[a] * u[a]
                    });
                    if self.prostate.radius_at(p) > 1.0 {
                        return Err(spec_err(format!("lesion {i} extends outside the prostate ellipsoid")));
                    }
                }
            }
        }
        Ok(())
    }

    /// Noiseless field, rounded to f32 values.
    fn noiseless(&self) -> Vec<f64> {
        let g = &self.grid;
        (0..g.len())
            .into_par_iter()
            .map(|i| {
                let c = g.coords(i);
                let p = g.world([c[0] as f64, c[1] as f64, c[2] as f64]);
                let v = self.background_suv + self.lesions.iter().map(|l| l.uptake_at(p)).sum::<f64>();
                v as f32 as f64
            })
            .collect()
    }

    fn prostate_mask(&self) -> Mask {
        let g = self.grid.clone();
        let e = self.prostate;
        Mask::from_fn(g.clone(), |x, y, z| {
            e.radius_at(g.world([x as f64, y as f64, z as f64])) <= 1.0
        })
    }

    /// Noiseless intra-prostatic maximum, without generating the phantom.
    pub fn noiseless_suvmax(&self) -> Result<f64> {
        self.validate()?;
        let field = Volume::from_parts_unchecked(self.grid.clone(), self.noiseless());
        masked_max(&field, &self.prostate_mask())
    }

    /// Copy with one case's jitter drawn from `rng`.
    fn jittered(&self, rng: &mut ChaCha8Rng) -> PhantomSpec {
        let j = self.jitter;
        let scale = if j.peak_fraction > 0.0 {
            rng.random_range(1.0 - j.peak_fraction..=1.0 + j.peak_fraction)
        } else {
            1.0
        };
        let k = j.center_voxels as i64;
        let shift: [f64; 3] = std::array::from_fn(|a| {
            let s = if k > 0 { rng.random_range(-k..=k) } else { 0 };
            s as f64 * self.grid.spacing[a]
        });
        let mut out = self.clone();
        for l in &mut out.lesions {
            l.peak_suv *= scale;
            for a in 0..3 {
                l.center[a] += shift[a];
            }
        }
        out.jitter = Jitter::default();
        out
    }
}

fn generate_with(spec: &PhantomSpec, rng: &mut ChaCha8Rng) -> Result<Phantom> {
    spec.validate()?;
    let g = spec.grid.clone();
    let field = spec.noiseless();
    let prostate = spec.prostate_mask();
    let suvmax = masked_max(&Volume::from_parts_unchecked(g.clone(), field.clone()), &prostate)?;
    let cut = spec.gt_fraction * suvmax;
    let label_data = field
        .iter()
        .zip(prostate.data())
        .map(|(&v, &p)| (p != 0 && v >= cut) as u8)
        .collect();
    let label = Mask::from_parts_unchecked(g.clone(), label_data);

    let pet = if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).map_err(|e| spec_err(e.to_string()))?;
        field
            .iter()
            .map(|&v| ((v + normal.sample(rng)).max(0.0) as f32) as f64)
            .collect()
    } else {
        field
    };
    Ok(Phantom {
        pet: Volume::from_parts_unchecked(g, pet),
        prostate,
        label,
        suvmax_noiseless: suvmax,
    })
}

fn case_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// One phantom from `spec` (no jitter), noise seeded by `spec.rng_seed`.
pub fn generate(spec: &PhantomSpec) -> Result<Phantom> {
    let mut plain = spec.clone();
    plain.jitter = Jitter::default();
    generate_with(&plain, &mut case_rng(spec.rng_seed, 0))
}

/// Case identifier for family member `index`.
pub fn case_id(index: usize) -> String {
    format!("case_{index:03}")
}

/// The jittered per-case specs of a family, in case order.
pub fn family_specs(spec: &PhantomSpec, n_cases: usize, seed: u64) -> Result<Vec<PhantomSpec>> {
    spec.validate()?;
    Ok((0..n_cases)
        .map(|i| spec.jittered(&mut case_rng(seed, i)))
        .collect())
}

/// Generates a family in memory. Case `i` draws its jitter and then its
/// noise from stream `i` of `seed`.
pub fn generate_family_cases(spec: &PhantomSpec, n_cases: usize, seed: u64) -> Result<Vec<Case>> {
    if n_cases == 0 {
        return Err(Error::InvalidArgument("a family needs at least one case".into()));
    }
    spec.validate()?;
    (0..n_cases)
        .into_par_iter()
        .map(|i| {
            let mut rng = case_rng(seed, i);
            let case_spec = spec.jittered(&mut rng);
            let p = generate_with(&case_spec, &mut rng)?;
            Ok(Case {
                id: case_id(i),
                pet: p.pet,
                prostate: p.prostate,
                label: p.label,
            })
        })
        .collect()
}

/// Generates a family and writes it as a dataset under `root`.
pub fn generate_family(spec: &PhantomSpec, n_cases: usize, seed: u64, root: &Path) -> Result<DatasetLayout> {
    let cases = generate_family_cases(spec, n_cases, seed)?;
    let descriptor = DatasetDescriptor {
        tracer_tag: "phantom".into(),
        ..DatasetDescriptor::default()
    };
    write_dataset(root, &descriptor, &cases)
}

/// Designed optimum of a single noiseless phantom:
/// `(100 * gt_fraction, gt_fraction * S)`.
pub fn designed_optimum(spec: &PhantomSpec) -> Result<(f64, f64)> {
    if spec.noise_sigma != 0.0 {
        return Err(Error::Unsupported(
            "the designed optimum is only defined for noiseless phantoms".into(),
        ));
    }
    let mut plain = spec.clone();
    plain.jitter = Jitter::default();
    let s = plain.noiseless_suvmax()?;
    Ok((100.0 * spec.gt_fraction, spec.gt_fraction * s))
}

/// Designed optimum of a family: the maxT part is the mean of the per-case
/// `gt_fraction * S_i`.
pub fn designed_optimum_family(spec: &PhantomSpec, n_cases: usize, seed: u64) -> Result<(f64, f64)> {
    if spec.noise_sigma != 0.0 {
        return Err(Error::Unsupported(
            "the designed optimum is only defined for noiseless phantoms".into(),
        ));
    }
    if n_cases == 0 {
        return Err(Error::InvalidArgument("a family needs at least one case".into()));
    }
    let specs = family_specs(spec, n_cases, seed)?;
    let maxima: Vec<f64> = specs
        .par_iter()
        .map(|s| s.noiseless_suvmax())
        .collect::<Result<_>>()?;
    let mean = maxima.iter().sum::<f64>() / n_cases as f64;
    Ok((100.0 * spec.gt_fraction, spec.gt_fraction * mean))
}
