//! Percentage-of-SUVmax threshold sweep and derivation of the FCN upper
//! clipping bound.
//!
//! For every percentage `p` on the grid and every case, voxels in scope with
//! uptake at or above `p / 100 * SUVmax` are predicted as tumour and scored
//! against the label (restricted to the same scope). The percentages with
//! the best mean DSC and the best mean NSD are located (ties go to the
//! smaller `p`), the per-case thresholds at each are averaged, and maxT is
//! the midpoint of those two averages. HD-95 is reported but never used for
//! selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{evaluate, DEFAULT_NSD_TAU_MM};
use crate::normalize::MaskScope;
use crate::volume::{masked_max, Mask, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub p_start: f64,
    pub p_end: f64,
    pub p_step: f64,
    pub mask_scope: MaskScope,
    pub nsd_tau_mm: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            p_start: 20.0,
            p_end: 70.0,
            p_step: 2.0,
            mask_scope: MaskScope::ProstateOnly,
            nsd_tau_mm: DEFAULT_NSD_TAU_MM,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.p_start > 0.0
            && self.p_start <= self.p_end
            && self.p_end <= 100.0
            && self.p_step > 0.0
            && self.p_step.is_finite()
            && self.nsd_tau_mm >= 0.0
            && self.nsd_tau_mm.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "sweep needs 0 < p_start <= p_end <= 100, p_step > 0 and tau >= 0, got {self:?}"
            )))
        }
    }

    /// Grid `p_start, p_start + p_step, ...` up to and including `p_end`.
    pub fn p_values(&self) -> Vec<f64> {
        let count = ((self.p_end - self.p_start) / self.p_step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|k| self.p_start + k as f64 * self.p_step)
            .collect()
    }
}

/// Full trace of a sweep. Per-case tables are indexed `[case][p]` with cases
/// in `case_ids` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub case_ids: Vec<String>,
    pub case_suvmax: Vec<f64>,
    pub p_values: Vec<f64>,
    pub avg_dsc: Vec<f64>,
    pub avg_nsd: Vec<f64>,
    pub avg_hd95: Vec<f64>,
    pub thresholds: Vec<Vec<f64>>,
    pub case_dsc: Vec<Vec<f64>>,
    pub case_nsd: Vec<Vec<f64>>,
    pub case_hd95: Vec<Vec<f64>>,
    #[serde(rename = "p_maxDSC")]
    pub p_max_dsc: f64,
    #[serde(rename = "p_maxNSD")]
    pub p_max_nsd: f64,
    #[serde(rename = "t_maxDSC")]
    pub t_max_dsc: f64,
    #[serde(rename = "t_maxNSD")]
    pub t_max_nsd: f64,
    #[serde(rename = "maxT")]
    pub max_t: f64,
}

/// One case fed to the sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepCase<'a> {
    pub id: &'a str,
    pub pet: &'a Volume,
    pub prostate: &'a Mask,
    pub label: &'a Mask,
}

/// Absolute threshold for percentage `p` of `suvmax`.
pub fn compute_threshold(p: f64, suvmax: f64) -> f64 {
    p / 100.0 * suvmax
}

/// Voxels in `scope` whose uptake is at least `threshold`.
pub fn threshold_segment(pet: &Volume, scope: &Mask, threshold: f64) -> Result<Mask> {
    pet.geometry().ensure_matches(scope.geometry(), "threshold_segment")?;
    if !threshold.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "threshold must be finite, got {threshold}"
        )));
    }
    let data = pet
        .data()
        .iter()
        .zip(scope.data())
        .map(|(&v, &s)| (s != 0 && v >= threshold) as u8)
        .collect();
    Ok(Mask::from_parts_unchecked(pet.geometry().clone(), data))
}

/// Midpoint of the DSC- and NSD-optimal mean thresholds.
pub fn fcn_max_t(sweep: &SweepResult) -> f64 {
    (sweep.t_max_dsc + sweep.t_max_nsd) / 2.0
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn column_mean(table: &[Vec<f64>], k: usize) -> f64 {
    table.iter().map(|row| row[k]).sum::<f64>() / table.len() as f64
}

struct Prepared<'a> {
    id: &'a str,
    pet: &'a Volume,
    scope: Mask,
    label: Mask,
    suvmax: f64,
}

/// Runs the sweep. Cases are processed in case-id order regardless of input
/// order, and the result does not depend on the rayon thread count.
pub fn fcn_sweep(cases: &[SweepCase<'_>], config: &SweepConfig) -> Result<SweepResult> {
    config.validate()?;
    if cases.is_empty() {
        return Err(Error::InvalidArgument("sweep needs at least one case".into()));
    }
    let mut ordered: Vec<&SweepCase> = cases.iter().collect();
    ordered.sort_by(|a, b| a.id.cmp(b.id));
    if let Some(w) = ordered.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::InvalidArgument(format!("duplicate case id {:?}", w[0].id)));
    }

    let prepared: Vec<Prepared> = ordered
        .par_iter()
        .map(|c| {
            let ctx = |e: Error| match e {
                Error::Geometry(m) => Error::Geometry(format!("case {}: {m}", c.id)),
                other => other,
            };
            c.pet.geometry().ensure_matches(c.prostate.geometry(), "pet vs prostate").map_err(ctx)?;
            c.pet.geometry().ensure_matches(c.label.geometry(), "pet vs label").map_err(ctx)?;
            if c.prostate.is_empty() {
                return Err(Error::EmptyMask(format!("case {} has an empty prostate mask", c.id)));
            }
            let scope = config.mask_scope.resolve(c.prostate);
            let suvmax = masked_max(c.pet, &scope)?;
            let label = c.label.intersect(&scope)?;
            Ok(Prepared {
                id: c.id,
                pet: c.pet,
                scope,
                label,
                suvmax,
            })
        })
        .collect::<Result<_>>()?;

    let p_values = config.p_values();
    let np = p_values.len();
    let grid: Vec<(usize, usize)> = (0..prepared.len())
        .flat_map(|c| (0..np).map(move |k| (c, k)))
        .collect();
    let scored: Vec<(f64, f64, f64, f64)> = grid
        .par_iter()
        .map(|&(c, k)| {
            let case = &prepared[c];
            let t = compute_threshold(p_values[k], case.suvmax);
            let pred = threshold_segment(case.pet, &case.scope, t)?;
            let m = evaluate(&pred, &case.label, config.nsd_tau_mm)?;
            Ok((t, m.dsc, m.nsd, m.hd95_mm))
        })
        .collect::<Result<_>>()?;

    let table = |f: fn(&(f64, f64, f64, f64)) -> f64| -> Vec<Vec<f64>> {
        scored.chunks(np).map(|row| row.iter().map(f).collect()).collect()
    };
    let thresholds = table(|s| s.0);
    let case_dsc = table(|s| s.1);
    let case_nsd = table(|s| s.2);
    let case_hd95 = table(|s| s.3);
    let avg = |t: &[Vec<f64>]| (0..np).map(|k| column_mean(t, k)).collect::<Vec<f64>>();
    let avg_dsc = avg(&case_dsc);
    let avg_nsd = avg(&case_nsd);
    let avg_hd95 = avg(&case_hd95);

    let k_dsc = argmax_first(&avg_dsc);
    let k_nsd = argmax_first(&avg_nsd);
    let t_max_dsc = column_mean(&thresholds, k_dsc);
    let t_max_nsd = column_mean(&thresholds, k_nsd);
    let mut result = SweepResult {
        config: *config,
        case_ids: prepared.iter().map(|c| c.id.to_string()).collect(),
        case_suvmax: prepared.iter().map(|c| c.suvmax).collect(),
        p_values: p_values.clone(),
        avg_dsc,
        avg_nsd,
        avg_hd95,
        thresholds,
        case_dsc,
        case_nsd,
        case_hd95,
        p_max_dsc: p_values[k_dsc],
        p_max_nsd: p_values[k_nsd],
        t_max_dsc,
        t_max_nsd,
        max_t: 0.0,
    };
    result.max_t = fcn_max_t(&result);
    Ok(result)
}
