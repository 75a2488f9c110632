//! Intensity normalization schemes and dataset fingerprinting.
//!
//! Moments use the population (1/N) standard deviation. Percentiles use
//! linear interpolation between order statistics (see [`crate::stats`]).
//! A standard deviation below `1e-8` is treated as degenerate and the
//! standardizing schemes return all zeros.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::stats::{mean_std, percentile_sorted};
use crate::volume::{Mask, MultiChannelVolume, Volume};

pub const DEGENERATE_STD: f64 = 1e-8;
pub const CT_PCT_LOW: f64 = 0.5;
pub const CT_PCT_HIGH: f64 = 99.5;

/// Region whose voxels enter the statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MaskScope {
    WholeImage,
    #[default]
    ProstateOnly,
}

impl FromStr for MaskScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whole" | "whole_image" => Ok(MaskScope::WholeImage),
            "prostate" | "prostate_only" => Ok(MaskScope::ProstateOnly),
            other => Err(Error::InvalidArgument(format!(
                "scope must be 'prostate' or 'whole', got {other:?}"
            ))),
        }
    }
}

impl fmt::Display for MaskScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MaskScope::WholeImage => "whole_image",
            MaskScope::ProstateOnly => "prostate_only",
        })
    }
}

impl MaskScope {
    /// The mask restricting a case: the prostate, or the full grid.
    pub fn resolve(self, prostate: &Mask) -> Mask {
        match self {
            MaskScope::ProstateOnly => prostate.clone(),
            MaskScope::WholeImage => Mask::full(prostate.geometry().clone()),
        }
    }
}

/// Dataset-wide intensity statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    pub n_samples: usize,
    pub global_mean: f64,
    pub global_std: f64,
    pub pct_low: f64,
    pub pct_high: f64,
    pub per_image_suvmax: Vec<f64>,
    #[serde(rename = "maxT", default, skip_serializing_if = "Option::is_none")]
    pub max_t: Option<f64>,
    #[serde(rename = "minT", default)]
    pub min_t: f64,
}

impl DatasetFingerprint {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.global_mean, self.global_std, self.pct_low, self.pct_high, self.min_t]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidArgument("fingerprint has non-finite fields".into()));
        }
        if self.global_std < 0.0 {
            return Err(Error::InvalidArgument("fingerprint global_std < 0".into()));
        }
        if self.pct_low > self.pct_high {
            return Err(Error::InvalidArgument("fingerprint pct_low > pct_high".into()));
        }
        if self.per_image_suvmax.len() != self.n_samples {
            return Err(Error::InvalidArgument(format!(
                "fingerprint lists {} SUVmax values for {} samples",
                self.per_image_suvmax.len(),
                self.n_samples
            )));
        }
        if let Some(max_t) = self.max_t {
            if !(max_t > self.min_t) {
                return Err(Error::InvalidArgument(format!(
                    "fingerprint maxT {max_t} must exceed minT {}",
                    self.min_t
                )));
            }
        }
        Ok(())
    }

    pub fn is_degenerate(&self) -> bool {
        self.global_std < DEGENERATE_STD
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FingerprintOptions {
    pub scope: MaskScope,
    /// Keep every `stride`-th in-scope voxel of each case for the moment and
    /// percentile statistics. `1` uses every voxel. SUVmax always uses all.
    pub stride: usize,
}

impl Default for FingerprintOptions {
    fn default() -> Self {
        FingerprintOptions {
            scope: MaskScope::ProstateOnly,
            stride: 1,
        }
    }
}

/// Computes the fingerprint over the in-scope voxels of every case.
///
/// Statistics are computed from the sorted pool of sampled voxels, so the
/// result does not depend on case order apart from `per_image_suvmax`,
/// which follows the input order.
pub fn fingerprint(cases: &[(&Volume, &Mask)], options: FingerprintOptions) -> Result<DatasetFingerprint> {
    if cases.is_empty() {
        return Err(Error::InvalidArgument("fingerprint needs at least one case".into()));
    }
    if options.stride == 0 {
        return Err(Error::InvalidArgument("fingerprint stride must be >= 1".into()));
    }
    let per_case: Vec<Result<(Vec<f64>, f64)>> = cases
        .par_iter()
        .enumerate()
        .map(|(i, (pet, prostate))| {
            pet.geometry()
                .ensure_matches(prostate.geometry(), &format!("fingerprint case {i}"))?;
            let in_scope = |k: usize| match options.scope {
                MaskScope::WholeImage => true,
                MaskScope::ProstateOnly => prostate.contains(k),
            };
            let mut max = f64::NEG_INFINITY;
            let mut sampled = Vec::new();
            let mut seen = 0usize;
            for (k, &v) in pet.data().iter().enumerate() {
                if !in_scope(k) {
                    continue;
                }
                max = max.max(v);
                if seen % options.stride == 0 {
                    sampled.push(v);
                }
                seen += 1;
            }
            if seen == 0 {
                return Err(Error::EmptyMask(format!("case {i} has no in-scope voxels")));
            }
            Ok((sampled, max))
        })
        .collect();
    let mut pool = Vec::new();
    let mut per_image_suvmax = Vec::with_capacity(cases.len());
    for r in per_case {
        let (values, max) = r?;
        pool.extend(values);
        per_image_suvmax.push(max);
    }
    pool.par_sort_unstable_by(f64::total_cmp);
    let (global_mean, global_std) = mean_std(&pool).expect("pool is nonempty");
    Ok(DatasetFingerprint {
        n_samples: cases.len(),
        global_mean,
        global_std,
        pct_low: percentile_sorted(&pool, CT_PCT_LOW).expect("pool is nonempty"),
        pct_high: percentile_sorted(&pool, CT_PCT_HIGH).expect("pool is nonempty"),
        per_image_suvmax,
        max_t: None,
        min_t: 0.0,
    })
}

/// Per-image standardization with the image's own mean and std.
pub fn zscore(vol: &Volume) -> Volume {
    let (mean, std) = mean_std(vol.data()).expect("volumes are nonempty");
    let data = if std < DEGENERATE_STD {
        vec![0.0; vol.len()]
    } else {
        vol.data().iter().map(|v| (v - mean) / std).collect()
    };
    Volume::from_parts_unchecked(vol.geometry().clone(), data)
}

/// Clips to the fingerprint's percentile band, then standardizes with the
/// dataset-wide mean and std.
pub fn global_clip_standardize(vol: &Volume, fp: &DatasetFingerprint) -> Volume {
    let data = if fp.is_degenerate() {
        vec![0.0; vol.len()]
    } else {
        vol.data()
            .iter()
            .map(|v| (v.clamp(fp.pct_low, fp.pct_high) - fp.global_mean) / fp.global_std)
            .collect()
    };
    Volume::from_parts_unchecked(vol.geometry().clone(), data)
}

/// Saturates every voxel into `[min_t, max_t]`.
pub fn clip(vol: &Volume, min_t: f64, max_t: f64) -> Result<Volume> {
    if !min_t.is_finite() || !max_t.is_finite() || max_t <= min_t {
        return Err(Error::InvalidArgument(format!(
            "clip bounds must be finite with maxT > minT, got [{min_t}, {max_t}]"
        )));
    }
    Ok(Volume::from_parts_unchecked(
        vol.geometry().clone(),
        vol.data().iter().map(|v| v.clamp(min_t, max_t)).collect(),
    ))
}

/// A normalization scheme as named in a dataset descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    ZScore,
    /// Percentile clipping (0.5 / 99.5) and global standardization.
    GlobalCt,
    FixedClip { min_t: f64, max_t: f64 },
    /// Clip to `[minT, maxT]` taken from the fingerprint.
    Fcn,
    None,
}

impl Scheme {
    pub fn needs_fingerprint(&self) -> bool {
        matches!(self, Scheme::GlobalCt | Scheme::Fcn)
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zscore" => Ok(Scheme::ZScore),
            "ct" => Ok(Scheme::GlobalCt),
            "fcn" => Ok(Scheme::Fcn),
            "none" => Ok(Scheme::None),
            _ => {
                let bad = || Error::InvalidArgument(format!("unknown normalization scheme {s:?}"));
                let rest = s.strip_prefix("fixedclip:").ok_or_else(bad)?;
                let (lo, hi) = rest.split_once(':').ok_or_else(bad)?;
                let min_t: f64 = lo.parse().map_err(|_| bad())?;
                let max_t: f64 = hi.parse().map_err(|_| bad())?;
                if !min_t.is_finite() || !max_t.is_finite() || max_t <= min_t {
                    return Err(Error::InvalidArgument(format!(
                        "fixedclip needs finite bounds with max > min, got {s:?}"
                    )));
                }
                Ok(Scheme::FixedClip { min_t, max_t })
            }
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::ZScore => f.write_str("zscore"),
            Scheme::GlobalCt => f.write_str("ct"),
            Scheme::FixedClip { min_t, max_t } => write!(f, "fixedclip:{min_t}:{max_t}"),
            Scheme::Fcn => f.write_str("fcn"),
            Scheme::None => f.write_str("none"),
        }
    }
}

impl Serialize for Scheme {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scheme {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ApplyOptions {
    /// Divide FCN-clipped intensities by maxT, mapping them into [0, 1]
    /// when minT is 0.
    pub fcn_rescale: bool,
}

/// Transforms one intensity volume with `scheme`.
pub fn normalize_volume(
    vol: &Volume,
    scheme: Scheme,
    fp: Option<&DatasetFingerprint>,
    options: ApplyOptions,
) -> Result<Volume> {
    match scheme {
        Scheme::None => Ok(vol.clone()),
        Scheme::ZScore => Ok(zscore(vol)),
        Scheme::GlobalCt => {
            let fp = fp.ok_or_else(|| {
                Error::MissingFingerprint("scheme 'ct' needs a dataset fingerprint".into())
            })?;
            Ok(global_clip_standardize(vol, fp))
        }
        Scheme::FixedClip { min_t, max_t } => clip(vol, min_t, max_t),
        Scheme::Fcn => {
            let fp = fp.ok_or_else(|| {
                Error::MissingFingerprint("scheme 'fcn' needs a dataset fingerprint".into())
            })?;
            let max_t = fp.max_t.ok_or_else(|| {
                Error::MissingFingerprint(
                    "fingerprint has no maxT; run the FCN threshold sweep first".into(),
                )
            })?;
            let clipped = clip(vol, fp.min_t, max_t)?;
            if options.fcn_rescale {
                clipped.map(|v| v / max_t)
            } else {
                Ok(clipped)
            }
        }
    }
}

/// Applies channel 0's scheme from the descriptor. Other channels are
/// returned unchanged; their schemes must be `none`.
pub fn apply_scheme(
    mcv: &MultiChannelVolume,
    schemes: &[Scheme],
    fp: Option<&DatasetFingerprint>,
    options: ApplyOptions,
) -> Result<MultiChannelVolume> {
    let first = *schemes
        .first()
        .ok_or_else(|| Error::Descriptor("no normalization scheme for channel 0".into()))?;
    if let Some((i, s)) = schemes.iter().enumerate().skip(1).find(|(_, s)| **s != Scheme::None) {
        return Err(Error::Descriptor(format!(
            "channel {i} must use scheme 'none', got '{s}'"
        )));
    }
    let pet = mcv
        .channel_volume(0)
        .ok_or_else(|| Error::InvalidArgument("volume has no channels".into()))?;
    let out = normalize_volume(&pet, first, fp, options)?;
    let mut result = mcv.clone();
    result.replace_channel(0, out.into_data());
    Ok(result)
}
