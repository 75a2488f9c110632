use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::warn;
use rayon::prelude::*;
use serde_json::{json, Value};

use super::manifest::{default_path, RunManifest};
use super::{Cli, Command, EvaluateArgs, FcnFitArgs, FingerprintArgs, NormalizeArgs, PhantomArgs, SegmentArgs};
use crate::components::{largest_component, Connectivity};
use crate::dataset::{load_dataset, load_mask_dir, read_json, write_json, Dataset, DatasetLayout};
use crate::error::{Error, Result};
use crate::metrics::evaluate;
use crate::nifti;
use crate::normalize::{fingerprint, normalize_volume, ApplyOptions, DatasetFingerprint, FingerprintOptions, Scheme};
use crate::phantom::{generate_family, PhantomSpec};
use crate::report::{write_curves_csv, write_sweep_json, write_thresholds_csv, MetricsRow, MetricsTable};
use crate::sweep::{compute_threshold, fcn_sweep, threshold_segment, SweepCase, SweepConfig};
use crate::volume::masked_max;

struct Outcome {
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    case_count: usize,
    details: Value,
    /// Main output and whether it is a directory; decides the manifest path.
    anchor: (PathBuf, bool),
}

pub(super) fn dispatch(cli: &Cli) -> Result<()> {
    let start = Instant::now();
    let outcome = match &cli.command {
        Command::Phantom(a) => phantom(a)?,
        Command::Fingerprint(a) => fingerprint_cmd(a)?,
        Command::FcnFit(a) => fcn_fit(a)?,
        Command::Normalize(a) => normalize(a)?,
        Command::Segment(a) => segment(a)?,
        Command::Evaluate(a) => evaluate_cmd(a)?,
    };
    let mut config = serde_json::to_value(cli).expect("flags serialize");
    if let Value::Object(m) = &mut config {
        m.insert(
            "jobs".into(),
            json!(cli.jobs.unwrap_or_else(rayon::current_num_threads)),
        );
    }
    let manifest = RunManifest {
        command: cli.command.name().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config,
        inputs: outcome.inputs,
        outputs: outcome.outputs,
        duration_s: start.elapsed().as_secs_f64(),
        case_count: outcome.case_count,
        details: outcome.details,
    };
    let path = cli
        .manifest
        .clone()
        .unwrap_or_else(|| default_path(&outcome.anchor.0, outcome.anchor.1));
    manifest.write(&path)?;
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&manifest).expect("manifest serializes"));
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Refuses to write into (or over) an input directory.
fn ensure_distinct(input: &Path, output: &Path) -> Result<()> {
    let canon = |p: &Path| p.canonicalize().ok();
    if let (Some(i), Some(o)) = (canon(input), canon(output)) {
        if o.starts_with(&i) || i.starts_with(&o) {
            return Err(Error::InvalidArgument(format!(
                "output {} overlaps input {}",
                output.display(),
                input.display()
            )));
        }
    }
    Ok(())
}

fn phantom(a: &PhantomArgs) -> Result<Outcome> {
    let spec: PhantomSpec = read_json(&a.spec)?;
    spec.validate()?;
    let seed = a.seed.unwrap_or(spec.rng_seed);
    let layout = generate_family(&spec, a.n, seed, &a.out)?;
    Ok(Outcome {
        inputs: vec![a.spec.clone()],
        outputs: vec![layout.root.clone()],
        case_count: a.n,
        details: json!({ "seed": seed }),
        anchor: (a.out.clone(), true),
    })
}

fn dataset_fingerprint(ds: &Dataset, options: FingerprintOptions) -> Result<DatasetFingerprint> {
    let pairs: Vec<_> = ds.cases.iter().map(|c| (&c.pet, &c.prostate)).collect();
    let fp = fingerprint(&pairs, options)?;
    if fp.is_degenerate() {
        warn!(
            "dataset intensities are constant (global_std = {}); standardizing schemes will output zeros",
            fp.global_std
        );
    }
    Ok(fp)
}

fn fingerprint_cmd(a: &FingerprintArgs) -> Result<Outcome> {
    let ds = load_dataset(&a.dataset)?;
    let fp = dataset_fingerprint(
        &ds,
        FingerprintOptions {
            scope: a.scope,
            stride: a.stride,
        },
    )?;
    write_json(&fp, &a.out)?;
    Ok(Outcome {
        inputs: vec![a.dataset.clone()],
        outputs: vec![a.out.clone()],
        case_count: ds.cases.len(),
        details: serde_json::to_value(&fp).expect("fingerprint serializes"),
        anchor: (a.out.clone(), false),
    })
}

fn fcn_fit(a: &FcnFitArgs) -> Result<Outcome> {
    let config = SweepConfig {
        p_start: a.p_start,
        p_end: a.p_end,
        p_step: a.p_step,
        mask_scope: a.scope,
        nsd_tau_mm: a.tau,
    };
    config.validate()?;
    let ds = load_dataset(&a.dataset)?;
    let cases: Vec<SweepCase> = ds
        .cases
        .iter()
        .map(|c| SweepCase {
            id: &c.id,
            pet: &c.pet,
            prostate: &c.prostate,
            label: &c.label,
        })
        .collect();
    let sweep = fcn_sweep(&cases, &config)?;
    write_sweep_json(&sweep, &a.out)?;
    write_curves_csv(&sweep, &a.curves)?;
    let mut outputs = vec![a.out.clone(), a.curves.clone()];
    if let Some(path) = &a.thresholds {
        write_thresholds_csv(&sweep, path)?;
        outputs.push(path.clone());
    }
    if let Some(path) = &a.fingerprint {
        let mut fp: DatasetFingerprint = if path.exists() {
            read_json(path)?
        } else {
            dataset_fingerprint(&ds, FingerprintOptions { scope: a.scope, stride: 1 })?
        };
        fp.max_t = Some(sweep.max_t);
        fp.validate()?;
        write_json(&fp, path)?;
        outputs.push(path.clone());
    }
    Ok(Outcome {
        inputs: vec![a.dataset.clone()],
        outputs,
        case_count: ds.cases.len(),
        details: json!({
            "p_maxDSC": sweep.p_max_dsc,
            "p_maxNSD": sweep.p_max_nsd,
            "t_maxDSC": sweep.t_max_dsc,
            "t_maxNSD": sweep.t_max_nsd,
            "maxT": sweep.max_t,
        }),
        anchor: (a.out.clone(), false),
    })
}

fn normalize(a: &NormalizeArgs) -> Result<Outcome> {
    let fp: Option<DatasetFingerprint> = match &a.fingerprint {
        Some(p) => {
            let fp: DatasetFingerprint = read_json(p)?;
            fp.validate()?;
            Some(fp)
        }
        None => None,
    };
    if a.scheme.needs_fingerprint() && fp.is_none() {
        return Err(Error::MissingFingerprint(format!(
            "scheme '{}' needs --fingerprint (run `suvclip fingerprint`{})",
            a.scheme,
            if a.scheme == Scheme::Fcn { " and `suvclip fcn-fit --fingerprint`" } else { "" }
        )));
    }
    let options = ApplyOptions { fcn_rescale: a.rescale };
    if a.rescale && a.scheme != Scheme::Fcn {
        return Err(Error::InvalidArgument("--rescale only applies to scheme 'fcn'".into()));
    }
    let ds = load_dataset(&a.dataset)?;
    create_dir(&a.out)?;
    ensure_distinct(&a.dataset, &a.out)?;
    let mut descriptor = ds.descriptor.clone();
    descriptor.normalization_schemes[0] = a.scheme;
    let out = DatasetLayout::new(&a.out);
    out.create_dirs()?;
    descriptor.write(&out.descriptor_path())?;
    let ending = &ds.descriptor.file_ending;
    ds.cases.par_iter().try_for_each(|c| -> Result<()> {
        let v = normalize_volume(&c.pet, a.scheme, fp.as_ref(), options)?;
        nifti::write_volume(&v, out.image_path(&c.id, ending))?;
        // mask channels are copied byte for byte
        for (src, dst) in [
            (ds.layout.label_path(&c.id, ending), out.label_path(&c.id, ending)),
            (ds.layout.prostate_path(&c.id, ending), out.prostate_path(&c.id, ending)),
        ] {
            fs::copy(&src, &dst).map_err(|e| Error::io(&dst, e))?;
        }
        Ok(())
    })?;
    let bounds = match a.scheme {
        Scheme::FixedClip { min_t, max_t } => json!({ "minT": min_t, "maxT": max_t }),
        Scheme::Fcn => {
            let fp = fp.as_ref().expect("checked above");
            json!({ "minT": fp.min_t, "maxT": fp.max_t, "rescale": a.rescale })
        }
        Scheme::GlobalCt => {
            let fp = fp.as_ref().expect("checked above");
            json!({
                "pct_low": fp.pct_low,
                "pct_high": fp.pct_high,
                "global_mean": fp.global_mean,
                "global_std": fp.global_std,
            })
        }
        Scheme::ZScore | Scheme::None => Value::Null,
    };
    let mut inputs = vec![a.dataset.clone()];
    inputs.extend(a.fingerprint.clone());
    Ok(Outcome {
        inputs,
        outputs: vec![a.out.clone()],
        case_count: ds.cases.len(),
        details: json!({ "scheme": a.scheme.to_string(), "bounds": bounds }),
        anchor: (a.out.clone(), true),
    })
}

fn segment(a: &SegmentArgs) -> Result<Outcome> {
    match (a.percent, a.threshold) {
        (Some(p), None) if !(p > 0.0 && p <= 100.0) => {
            return Err(Error::InvalidArgument(format!("--percent must lie in (0, 100], got {p}")))
        }
        (None, Some(t)) if !t.is_finite() => {
            return Err(Error::InvalidArgument(format!("--threshold must be finite, got {t}")))
        }
        (Some(_), Some(_)) | (None, None) => {
            return Err(Error::InvalidArgument("give exactly one of --percent and --threshold".into()))
        }
        _ => {}
    }
    let connectivity = a.largest_component.map(Connectivity::from_count).transpose()?;
    let ds = load_dataset(&a.dataset)?;
    create_dir(&a.out)?;
    ensure_distinct(&a.dataset, &a.out)?;
    let ending = &ds.descriptor.file_ending;
    let thresholds: Vec<f64> = ds
        .cases
        .par_iter()
        .map(|c| -> Result<f64> {
            let scope = a.scope.resolve(&c.prostate);
            let t = match a.percent {
                Some(p) => compute_threshold(p, masked_max(&c.pet, &scope)?),
                None => a.threshold.expect("checked above"),
            };
            let mut pred = threshold_segment(&c.pet, &scope, t)?;
            if let Some(conn) = connectivity {
                pred = largest_component(&pred, conn);
            }
            nifti::write_mask(&pred, a.out.join(format!("{}{ending}", c.id)))?;
            Ok(t)
        })
        .collect::<Result<_>>()?;
    let per_case: Vec<Value> = ds
        .cases
        .iter()
        .zip(&thresholds)
        .map(|(c, t)| json!({ "case_id": c.id, "threshold_suv": t }))
        .collect();
    Ok(Outcome {
        inputs: vec![a.dataset.clone()],
        outputs: vec![a.out.clone()],
        case_count: ds.cases.len(),
        details: json!({ "thresholds": per_case }),
        anchor: (a.out.clone(), true),
    })
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<Outcome> {
    let pred = load_mask_dir(&a.pred, &a.file_ending)?;
    let gt = load_mask_dir(&a.gt, &a.file_ending)?;
    let ids = |v: &[(String, _)]| v.iter().map(|(id, _)| id.clone()).collect::<Vec<_>>();
    let (pred_ids, gt_ids) = (ids(&pred), ids(&gt));
    if pred_ids != gt_ids {
        let only_pred: Vec<_> = pred_ids.iter().filter(|i| !gt_ids.contains(i)).collect();
        let only_gt: Vec<_> = gt_ids.iter().filter(|i| !pred_ids.contains(i)).collect();
        return Err(Error::InvalidArgument(format!(
            "case ids differ: only in --pred {only_pred:?}, only in --gt {only_gt:?}"
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no '*{}' masks in {}",
            a.file_ending,
            a.pred.display()
        )));
    }
    let rows: Vec<MetricsRow> = pred
        .par_iter()
        .zip(&gt)
        .map(|((id, p), (_, g))| {
            let m = evaluate(p, g, a.tau).map_err(|e| match e {
                Error::Geometry(msg) => Error::Geometry(format!("case {id}: {msg}")),
                other => other,
            })?;
            Ok(MetricsRow::new(id.clone(), &m))
        })
        .collect::<Result<_>>()?;
    let mut table = MetricsTable { rows, wilcoxon: None };
    let mut inputs = vec![a.pred.clone(), a.gt.clone()];
    if let Some(other) = &a.wilcoxon {
        let other_table = MetricsTable::read_csv(other)?;
        table.wilcoxon = Some(table.compare(&other_table)?);
        inputs.push(other.clone());
    }
    table.write_csv(&a.out)?;
    let means = table.means().expect("nonempty");
    let mut details = json!({
        "mean_dsc": means[0],
        "mean_nsd": means[1],
        "mean_hd95_mm": means[2],
        "tau_mm": a.tau,
    });
    if let Some(w) = &table.wilcoxon {
        details["wilcoxon"] = serde_json::to_value(w).expect("serializes");
    }
    Ok(Outcome {
        inputs,
        outputs: vec![a.out.clone()],
        case_count: table.rows.len(),
        details,
        anchor: (a.out.clone(), false),
    })
}
