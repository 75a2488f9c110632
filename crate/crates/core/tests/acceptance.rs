//! End-to-end acceptance checks. Each test prints one `AC-n PASS|FAIL` line
//! straight to stdout (bypassing libtest capture) and then asserts.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use suvclip::dataset::{load_dataset, Dataset};
use suvclip::metrics::wilcoxon_signed_rank;
use suvclip::nifti::{read_volume, write_volume};
use suvclip::normalize::{apply_scheme, fingerprint, normalize_volume, ApplyOptions, FingerprintOptions};
use suvclip::phantom::{designed_optimum_family, generate_family_cases, PhantomSpec};
use suvclip::report::read_sweep_json;
use suvclip::volume::stack_channels;
use suvclip::{evaluate, fcn_sweep, GridGeometry, Mask, Scheme, SweepCase, SweepConfig, SweepResult, Volume};

const FAMILY_SIZE: usize = 20;

fn report(id: &str, pass: bool, detail: &str) {
    let line = format!("{id} {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
}

fn suvclip(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_suvclip")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn reference_spec_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/phantom_reference.json")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

// ---------------------------------------------------------------- AC-1

fn oracle_boundary(m: &Mask) -> Vec<[i64; 3]> {
    let [nx, ny, nz] = m.geometry().dims;
    let inside = |x: i64, y: i64, z: i64| {
        x >= 0 && y >= 0 && z >= 0 && (x as usize) < nx && (y as usize) < ny && (z as usize) < nz
            && m.get(x as usize, y as usize, z as usize)
    };
    let mut out = Vec::new();
    for z in 0..nz as i64 {
        for y in 0..ny as i64 {
            for x in 0..nx as i64 {
                if !inside(x, y, z) {
                    continue;
                }
                let n = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)];
                if n.iter().any(|(dx, dy, dz)| !inside(x + dx, y + dy, z + dz)) {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out
}

fn oracle_directed(from: &[[i64; 3]], to: &[[i64; 3]], spacing: f64) -> Vec<f64> {
    from.iter()
        .map(|a| {
            to.iter()
                .map(|b| {
                    let d: f64 = (0..3).map(|k| ((a[k] - b[k]) as f64 * spacing).powi(2)).sum();
                    d.sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

fn oracle_p95(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = 0.95 * (v.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(v.len() - 1);
    v[i] + (pos - i as f64) * (v[j] - v[i])
}

/// DSC, NSD and HD-95 by brute force over all boundary pairs.
fn oracle_metrics(pred: &Mask, gt: &Mask, tau: f64) -> (f64, f64, f64) {
    let p = pred.data().iter().filter(|&&v| v == 1).count();
    let g = gt.data().iter().filter(|&&v| v == 1).count();
    let both = pred.data().iter().zip(gt.data()).filter(|(a, b)| **a == 1 && **b == 1).count();
    let dsc = if p + g == 0 { 1.0 } else { 2.0 * both as f64 / (p + g) as f64 };
    let dims = pred.geometry().dims;
    let diagonal = dims.iter().map(|&n| (n as f64 * 2.0).powi(2)).sum::<f64>().sqrt();
    match (p == 0, g == 0) {
        (true, true) => return (dsc, 1.0, 0.0),
        (true, false) | (false, true) => return (dsc, 0.0, diagonal),
        _ => {}
    }
    let (bp, bg) = (oracle_boundary(pred), oracle_boundary(gt));
    let dpg = oracle_directed(&bp, &bg, 2.0);
    let dgp = oracle_directed(&bg, &bp, 2.0);
    let within = dpg.iter().chain(&dgp).filter(|&&d| d <= tau).count();
    let nsd = within as f64 / (dpg.len() + dgp.len()) as f64;
    (dsc, nsd, oracle_p95(dpg).max(oracle_p95(dgp)))
}

fn random_blob(rng: &mut ChaCha8Rng, g: &GridGeometry) -> Mask {
    let [nx, ny, nz] = g.dims;
    let balls: Vec<([f64; 3], f64)> = (0..rng.random_range(1..=3))
        .map(|_| {
            let c = [
                rng.random_range(0.0..nx as f64),
                rng.random_range(0.0..ny as f64),
                rng.random_range(0.0..nz as f64),
            ];
            (c, rng.random_range(0.5..6.0))
        })
        .collect();
    let flip = rng.random_range(0.0..0.1);
    let noise: Vec<bool> = (0..g.len()).map(|_| rng.random_bool(flip)).collect();
    Mask::from_fn(g.clone(), |x, y, z| {
        let hit = balls.iter().any(|(c, r)| {
            let d2 = (x as f64 - c[0]).powi(2) + (y as f64 - c[1]).powi(2) + (z as f64 - c[2]).powi(2);
            d2 <= r * r
        });
        hit ^ noise[g.index(x, y, z)]
    })
}

#[test]
fn ac1_metric_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC1);
    let taus = [0.0, 1.0, 2.0, 2.5, 3.0, 4.0];
    let mut failures = Vec::new();
    let mut worst_hd: f64 = 0.0;
    for i in 0..200 {
        let dims = [rng.random_range(1..=16), rng.random_range(1..=16), rng.random_range(1..=16)];
        let g = GridGeometry::axis_aligned(dims, [2.0; 3], [0.0; 3]).unwrap();
        let gt = match i % 20 {
            0 => Mask::empty(g.clone()),
            _ => random_blob(&mut rng, &g),
        };
        let pred = match i % 25 {
            1 => Mask::empty(g.clone()),
            2 => gt.clone(),
            _ => random_blob(&mut rng, &g),
        };
        let tau = taus[i % taus.len()];
        let got = evaluate(&pred, &gt, tau).unwrap();
        let (dsc, nsd, hd) = oracle_metrics(&pred, &gt, tau);
        worst_hd = worst_hd.max((got.hd95_mm - hd).abs());
        if got.dsc != dsc || got.nsd != nsd || (got.hd95_mm - hd).abs() > 1e-9 {
            failures.push(format!("pair {i}: got {got:?}, oracle ({dsc}, {nsd}, {hd})"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs < 30.0;
    report(
        "AC-1",
        pass,
        &format!("200 pairs, {} mismatches, max |dHD95| {worst_hd:.1e} mm, {secs:.1} s", failures.len()),
    );
    assert!(pass, "{failures:#?} ({secs:.1} s)");
}

// ---------------------------------------------------------------- AC-2 / AC-3

struct FitRun {
    _dir: tempfile::TempDir,
    dataset: PathBuf,
    sweep: SweepResult,
    curves: String,
    secs: f64,
}

fn fit_family(spec: &Path) -> FitRun {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds");
    let out = dir.path().join("sweep.json");
    let curves = dir.path().join("curves.csv");
    let start = Instant::now();
    let n = FAMILY_SIZE.to_string();
    let (code, err) = suvclip(&["phantom", "--spec", s(spec), "--n", &n, "--out", s(&ds)]);
    assert_eq!(code, 0, "{err}");
    let (code, err) = suvclip(&["fcn-fit", "--dataset", s(&ds), "--out", s(&out), "--curves", s(&curves)]);
    assert_eq!(code, 0, "{err}");
    let secs = start.elapsed().as_secs_f64();
    FitRun {
        sweep: read_sweep_json(&out).unwrap(),
        curves: std::fs::read_to_string(&curves).unwrap(),
        dataset: ds,
        secs,
        _dir: dir,
    }
}

/// Grid points at which thresholding reproduces every label exactly,
/// decided voxel by voxel from the stored images.
fn perfect_grid_points(ds: &Dataset, p_values: &[f64]) -> Vec<f64> {
    p_values
        .iter()
        .copied()
        .filter(|&p| {
            ds.cases.iter().all(|c| {
                let inside: Vec<usize> = (0..c.pet.len()).filter(|&i| c.prostate.contains(i)).collect();
                let s = inside.iter().map(|&i| c.pet.data()[i]).fold(f64::MIN, f64::max);
                let t = p / 100.0 * s;
                (0..c.pet.len()).all(|i| {
                    let pred = c.prostate.contains(i) && c.pet.data()[i] >= t;
                    pred == c.label.contains(i)
                })
            })
        })
        .collect()
}

#[test]
fn ac2_fcn_fit_recovers_designed_optimum() {
    let spec = PhantomSpec::reference();
    let run = fit_family(&reference_spec_path());
    let ds = load_dataset(&run.dataset).unwrap();
    let sw = &run.sweep;
    let step = sw.config.p_step;
    let perfect = perfect_grid_points(&ds, &sw.p_values);
    let near = |p: f64| perfect.iter().any(|&g| (p - g).abs() <= step + 1e-9);
    let k = sw.p_values.iter().position(|&p| p == sw.p_max_dsc).unwrap();

    let (_, designed_t) = designed_optimum_family(&spec, FAMILY_SIZE, spec.rng_seed).unwrap();
    let maxima: Vec<f64> = ds
        .cases
        .iter()
        .map(|c| (0..c.pet.len()).filter(|&i| c.prostate.contains(i)).map(|i| c.pet.data()[i]).fold(f64::MIN, f64::max))
        .collect();
    let mean_s = maxima.iter().sum::<f64>() / maxima.len() as f64;
    let independent_t = spec.gt_fraction * mean_s;
    let tol = step * mean_s * 0.01;

    let pass = !perfect.is_empty()
        && near(sw.p_max_dsc)
        && near(sw.p_max_nsd)
        && sw.avg_dsc[k] == 1.0
        && (sw.max_t - designed_t).abs() <= tol
        && (designed_t - independent_t).abs() <= 1e-6 * independent_t
        && run.curves.lines().count() == 1 + sw.p_values.len()
        && run.secs < 60.0;
    report(
        "AC-2",
        pass,
        &format!(
            "perfect p {perfect:?}, p_maxDSC {} p_maxNSD {}, avg_dsc {}, maxT {:.4} vs designed {:.4} (tol {:.4}), {:.1} s",
            sw.p_max_dsc, sw.p_max_nsd, sw.avg_dsc[k], sw.max_t, designed_t, tol, run.secs
        ),
    );
    assert!(pass);
}

#[test]
fn ac3_scale_equivariance() {
    let cases = generate_family_cases(&PhantomSpec::reference(), FAMILY_SIZE, PhantomSpec::reference().rng_seed).unwrap();
    let scaled: Vec<Volume> = cases.iter().map(|c| c.pet.map(|v| v * 2.5).unwrap()).collect();
    let base: Vec<SweepCase> = cases
        .iter()
        .map(|c| SweepCase { id: &c.id, pet: &c.pet, prostate: &c.prostate, label: &c.label })
        .collect();
    let up: Vec<SweepCase> = cases
        .iter()
        .zip(&scaled)
        .map(|(c, pet)| SweepCase { id: &c.id, pet, prostate: &c.prostate, label: &c.label })
        .collect();
    let config = SweepConfig::default();
    let a = fcn_sweep(&base, &config).unwrap();
    let b = fcn_sweep(&up, &config).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    let curves_equal = bits(&a.avg_dsc) == bits(&b.avg_dsc) && bits(&a.avg_nsd) == bits(&b.avg_nsd);
    let rel = (b.max_t - 2.5 * a.max_t).abs() / (2.5 * a.max_t);
    let pass = a.p_max_dsc.to_bits() == b.p_max_dsc.to_bits()
        && a.p_max_nsd.to_bits() == b.p_max_nsd.to_bits()
        && curves_equal
        && rel < 1e-12;
    report(
        "AC-3",
        pass,
        &format!(
            "p_max {}/{} vs {}/{}, curves bit-identical {curves_equal}, maxT rel err {rel:.1e}",
            a.p_max_dsc, a.p_max_nsd, b.p_max_dsc, b.p_max_nsd
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- AC-4

fn check_clip(input: &Volume, output: &Volume, lo: f64, hi: f64) -> bool {
    input.data().iter().zip(output.data()).all(|(&x, &y)| {
        if x < lo {
            y == lo
        } else if x > hi {
            y == hi
        } else {
            x.to_bits() == y.to_bits()
        }
    }) && output.data().iter().all(|&y| (lo..=hi).contains(&y))
}

#[test]
fn ac4_normalization_contracts() {
    let reference = PhantomSpec::reference();
    let mut noisy = reference.clone();
    noisy.noise_sigma = 0.3;
    let mut cases = generate_family_cases(&reference, 5, 1).unwrap();
    cases.extend(generate_family_cases(&noisy, 5, 2).unwrap().into_iter().map(|mut c| {
        c.id = format!("noisy_{}", c.id);
        c
    }));

    let pairs: Vec<(&Volume, &Mask)> = cases.iter().map(|c| (&c.pet, &c.prostate)).collect();
    let mut fp = fingerprint(&pairs, FingerprintOptions::default()).unwrap();
    let sc: Vec<SweepCase> = cases
        .iter()
        .map(|c| SweepCase { id: &c.id, pet: &c.pet, prostate: &c.prostate, label: &c.label })
        .collect();
    let max_t = fcn_sweep(&sc, &SweepConfig::default()).unwrap().max_t;
    fp.max_t = Some(max_t);

    let opts = ApplyOptions::default();
    let fixed: Scheme = "fixedclip:0:15".parse().unwrap();
    let schemes = [Scheme::ZScore, Scheme::GlobalCt, fixed, Scheme::Fcn, Scheme::None];
    let (mut worst_mean, mut worst_std) = (0.0f64, 0.0f64);
    let mut failures = Vec::new();
    for c in &cases {
        let z = normalize_volume(&c.pet, Scheme::ZScore, None, opts).unwrap();
        let n = z.len() as f64;
        let mean = z.data().iter().sum::<f64>() / n;
        let std = (z.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        worst_mean = worst_mean.max(mean.abs());
        worst_std = worst_std.max((std - 1.0).abs());
        if mean.abs() >= 1e-5 || (std - 1.0).abs() >= 1e-5 {
            failures.push(format!("{} zscore mean {mean} std {std}", c.id));
        }
        let f = normalize_volume(&c.pet, fixed, None, opts).unwrap();
        if !check_clip(&c.pet, &f, 0.0, 15.0) {
            failures.push(format!("{} fixedclip", c.id));
        }
        let f = normalize_volume(&c.pet, Scheme::Fcn, Some(&fp), opts).unwrap();
        if !check_clip(&c.pet, &f, fp.min_t, max_t) {
            failures.push(format!("{} fcn", c.id));
        }
        let mcv = stack_channels(&c.pet, &c.prostate).unwrap();
        for scheme in schemes {
            let out = apply_scheme(&mcv, &[scheme, Scheme::None], Some(&fp), opts).unwrap();
            let before = mcv.channel(1).unwrap().iter().map(|v| v.to_bits());
            let after = out.channel(1).unwrap().iter().map(|v| v.to_bits());
            if !before.eq(after) {
                failures.push(format!("{} mask channel changed under {scheme}", c.id));
            }
        }
    }
    let pass = failures.is_empty();
    report(
        "AC-4",
        pass,
        &format!(
            "{} phantoms, max |mean| {worst_mean:.1e}, max |std-1| {worst_std:.1e}, clip and mask checks {}",
            cases.len(),
            if pass { "ok" } else { "failed" }
        ),
    );
    assert!(pass, "{failures:#?}");
}

// ---------------------------------------------------------------- AC-5

#[test]
fn ac5_noise_robustness() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(reference_spec_path()).unwrap()).unwrap();
    v["noise_sigma"] = Value::from(0.3 * v["background_suv"].as_f64().unwrap());
    let spec = dir.path().join("noisy.json");
    std::fs::write(&spec, v.to_string()).unwrap();
    let run = fit_family(&spec);
    let sw = &run.sweep;
    let curve = &sw.avg_dsc;
    let k = sw.p_values.iter().position(|&p| p == sw.p_max_dsc).unwrap();
    let rises_late = (k + 2..curve.len().saturating_sub(1)).filter(|&i| curve[i + 1] > curve[i]).count();
    let falls_early = (0..k.saturating_sub(2)).filter(|&i| curve[i + 1] < curve[i]).count();
    let pass = rises_late == 0 && falls_early == 0 && (sw.p_max_dsc - 35.0).abs() <= 6.0;
    report(
        "AC-5",
        pass,
        &format!(
            "argmax avg_dsc at p = {} (avg_dsc {:.4}), {} monotonicity breaks outside +-2 grid points",
            sw.p_max_dsc,
            curve[k],
            rises_late + falls_early
        ),
    );
    assert!(pass, "{curve:?}");
}

// ---------------------------------------------------------------- AC-6

fn oracle_midranks(abs: &[f64]) -> Vec<f64> {
    abs.iter()
        .map(|&a| {
            let below = abs.iter().filter(|&&b| b < a).count() as f64;
            let tied = abs.iter().filter(|&&b| b == a).count() as f64;
            below + (tied + 1.0) / 2.0
        })
        .collect()
}

/// Two-sided p by enumerating all 2^n sign assignments.
fn oracle_wilcoxon(a: &[f64], b: &[f64]) -> Option<f64> {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|&d| d != 0.0).collect();
    if d.is_empty() {
        return None;
    }
    let ranks = oracle_midranks(&d.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let total: f64 = ranks.iter().sum();
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let lo = w_plus.min(total - w_plus);
    let hi = total - lo;
    let n = d.len();
    let mut extreme = 0u64;
    for signs in 0u32..(1 << n) {
        let w: f64 = (0..n).filter(|k| signs >> k & 1 == 1).map(|k| ranks[k]).sum();
        if w <= lo + 1e-9 || w >= hi - 1e-9 {
            extreme += 1;
        }
    }
    Some((extreme as f64 / (1u64 << n) as f64).min(1.0))
}

#[test]
fn ac6_wilcoxon_exactness() {
    let six = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0.0; 6]).unwrap();
    let same = wilcoxon_signed_rank(&[0.3, 0.7, 0.9], &[0.3, 0.7, 0.9]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC6);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for trial in 0..300 {
        let n = rng.random_range(1..=12);
        // coarse rounding on some trials produces ties and zero differences
        let grain = if trial % 3 == 0 { 4.0 } else { 1e6 };
        let mut draw = || (rng.random_range(0.0..1.0f64) * grain).round() / grain;
        let a: Vec<f64> = (0..n).map(|_| draw()).collect();
        let b: Vec<f64> = (0..n).map(|_| draw()).collect();
        let got = wilcoxon_signed_rank(&a, &b).unwrap();
        match oracle_wilcoxon(&a, &b) {
            Some(p) => {
                worst = worst.max((got.p_value - p).abs());
                checked += 1;
            }
            None => worst = worst.max(if got.degenerate && got.p_value == 1.0 { 0.0 } else { 1.0 }),
        }
    }
    let pass = six.p_value == 0.03125 && same.p_value == 1.0 && same.degenerate && worst <= 1e-12;
    report(
        "AC-6",
        pass,
        &format!(
            "n=6 p {}, identical p {} degenerate {}, {checked} enumerations max |dp| {worst:.1e}",
            six.p_value, same.p_value, same.degenerate
        ),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- AC-7

fn random_geometry(rng: &mut ChaCha8Rng) -> GridGeometry {
    let dims = [rng.random_range(1..=20), rng.random_range(1..=20), rng.random_range(1..=20)];
    let spacing = [(); 3].map(|_| rng.random_range(0.5f32..4.0) as f64);
    let origin = [(); 3].map(|_| rng.random_range(-300.0f32..300.0) as f64);
    let q: [f64; 4] = [(); 4].map(|_| rng.random_range(-1.0..1.0));
    let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
    let [a, b, c, d] = q.map(|v| v / norm);
    let direction = [
        [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
        [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
        [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - b * b - c * c],
    ];
    GridGeometry::new(dims, spacing, origin, direction).unwrap()
}

#[test]
fn ac7_io_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC7);
    let mut worst_geom: f64 = 0.0;
    let mut data_ok = true;
    for i in 0..50 {
        let g = random_geometry(&mut rng);
        let data: Vec<f64> = (0..g.len())
            .map(|_| f32::from_bits(rng.random::<u32>() & 0xBFFF_FFFF) as f64)
            .map(|v| if v.is_finite() { v } else { 0.0 })
            .collect();
        let v = Volume::new(g.clone(), data).unwrap();
        let path = dir.path().join(if i % 2 == 0 { format!("{i}.nii") } else { format!("{i}.nii.gz") });
        write_volume(&v, &path).unwrap();
        let back = read_volume(&path).unwrap();
        let bits = |x: &Volume| x.data().iter().map(|&f| (f as f32).to_bits()).collect::<Vec<_>>();
        data_ok &= back.geometry().dims == g.dims && bits(&back) == bits(&v);
        let bg = back.geometry();
        for k in 0..3 {
            worst_geom = worst_geom.max((bg.spacing[k] - g.spacing[k]).abs());
            worst_geom = worst_geom.max((bg.origin[k] - g.origin[k]).abs());
            for j in 0..3 {
                worst_geom = worst_geom.max((bg.direction[k][j] - g.direction[k][j]).abs());
            }
        }
    }
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut fixture_ok = true;
    for name in ["ref_float32.nii", "ref_float32_be.nii", "ref_int16_scaled.nii.gz", "ref_qform_rot.nii"] {
        let f = read_volume(fixtures.join(name)).unwrap();
        for z in 0..4 {
            for y in 0..4 {
                for x in 0..4 {
                    fixture_ok &= f.get(x, y, z) == 0.25 * (x + 4 * y + 16 * z) as f64 - 3.0;
                }
            }
        }
    }
    let pass = data_ok && worst_geom <= 1e-6 && fixture_ok;
    report(
        "AC-7",
        pass,
        &format!("50 volumes bitwise {data_ok}, max geometry error {worst_geom:.1e}, reference fixtures exact {fixture_ok}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------- AC-8

#[test]
fn ac8_pipeline_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let start = Instant::now();
    let mut stages = Vec::new();
    let mut run = |name: &str, args: &[&str]| {
        let (code, err) = suvclip(args);
        stages.push(format!("{name}={code}"));
        assert_eq!(code, 0, "{name}: {err}");
    };
    run("phantom", &["phantom", "--spec", s(&reference_spec_path()), "--n", "5", "--out", s(&p("ds"))]);
    run("fingerprint", &["fingerprint", "--dataset", s(&p("ds")), "--out", s(&p("fp.json"))]);
    run(
        "fcn-fit",
        &[
            "fcn-fit", "--dataset", s(&p("ds")), "--out", s(&p("sweep.json")), "--curves", s(&p("curves.csv")),
            "--fingerprint", s(&p("fp.json")),
        ],
    );
    let sweep = read_sweep_json(&p("sweep.json")).unwrap();
    run(
        "normalize",
        &["normalize", "--dataset", s(&p("ds")), "--scheme", "fcn", "--fingerprint", s(&p("fp.json")), "--out", s(&p("norm"))],
    );
    let percent = sweep.p_max_dsc.to_string();
    run("segment", &["segment", "--dataset", s(&p("ds")), "--percent", &percent, "--out", s(&p("seg"))]);
    run(
        "evaluate",
        &["evaluate", "--pred", s(&p("seg")), "--gt", s(&p("ds/labelsTr")), "--out", s(&p("metrics.csv"))],
    );
    let secs = start.elapsed().as_secs_f64();
    let curves = std::fs::read_to_string(p("curves.csv")).unwrap();
    let rows = curves.lines().skip(1).filter(|l| !l.is_empty()).count();
    let normalized = load_dataset(p("norm")).unwrap();
    let pass = rows == 26 && secs < 120.0 && normalized.cases.len() == 5;
    report(
        "AC-8",
        pass,
        &format!("stages {}, {rows} curve rows, segment at p = {percent}, {secs:.1} s", stages.join(" ")),
    );
    assert!(pass);
}
