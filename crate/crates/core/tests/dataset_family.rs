use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use suvclip::dataset::{load_dataset, DatasetLayout};
use suvclip::phantom::{generate_family, generate_family_cases, PhantomSpec};
use suvclip::sweep::{compute_threshold, threshold_segment};
use suvclip::volume::masked_max;
use suvclip::{fcn_sweep, Error, GridGeometry, Mask, SweepCase, SweepConfig};

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn bundled_spec_matches_reference() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/phantom_reference.json");
    let spec: PhantomSpec = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(spec, PhantomSpec::reference());
}

#[test]
fn family_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let spec = PhantomSpec::reference();
    generate_family(&spec, 3, 11, a.path()).unwrap();
    generate_family(&spec, 3, 11, b.path()).unwrap();
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    assert_eq!(ta.len(), 10);
    assert!(ta == tb);

    let c = tempfile::tempdir().unwrap();
    generate_family(&spec, 3, 12, c.path()).unwrap();
    assert!(ta != tree(c.path()));
}

#[test]
fn family_loads_back_in_id_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = PhantomSpec::reference();
    spec.noise_sigma = 0.2;
    generate_family(&spec, 3, 5, dir.path()).unwrap();
    let ds = load_dataset(dir.path()).unwrap();
    let memory = generate_family_cases(&spec, 3, 5).unwrap();
    let ids: Vec<&str> = ds.cases.iter().map(|c| c.id.as_str()).collect();
    assert_eq!(ids, ["case_000", "case_001", "case_002"]);
    for (disk, mem) in ds.cases.iter().zip(&memory) {
        assert_eq!(disk.pet.data(), mem.pet.data());
        assert_eq!(disk.prostate.data(), mem.prostate.data());
        assert_eq!(disk.label.data(), mem.label.data());
    }
}

fn problem_text(err: Error) -> String {
    match err {
        Error::DatasetValidation(report) => report.to_string(),
        other => panic!("expected a validation error, got {other}"),
    }
}

#[test]
fn missing_label_names_the_case() {
    let dir = tempfile::tempdir().unwrap();
    let layout = generate_family(&PhantomSpec::reference(), 3, 1, dir.path()).unwrap();
    std::fs::remove_file(layout.label_path("case_001", ".nii.gz")).unwrap();
    let text = problem_text(load_dataset(dir.path()).unwrap_err());
    assert!(text.contains("case_001"), "{text}");
    assert!(!text.contains("case_000"), "{text}");
}

#[test]
fn mismatched_dims_name_the_case() {
    let dir = tempfile::tempdir().unwrap();
    let layout = generate_family(&PhantomSpec::reference(), 3, 1, dir.path()).unwrap();
    let g = GridGeometry::axis_aligned([8, 8, 8], [2.0; 3], [0.0; 3]).unwrap();
    suvclip::nifti::write_mask(&Mask::empty(g), layout.prostate_path("case_002", ".nii.gz")).unwrap();
    let text = problem_text(load_dataset(dir.path()).unwrap_err());
    assert!(text.contains("case_002"), "{text}");
}

#[test]
fn missing_descriptor_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let layout = generate_family(&PhantomSpec::reference(), 1, 1, dir.path()).unwrap();
    std::fs::remove_file(DatasetLayout::new(dir.path()).descriptor_path()).unwrap();
    assert!(load_dataset(&layout.root).is_err());
}

#[test]
fn sweep_is_invariant_to_case_order() {
    let cases = generate_family_cases(&PhantomSpec::reference(), 4, 3).unwrap();
    let forward: Vec<SweepCase> = cases
        .iter()
        .map(|c| SweepCase { id: &c.id, pet: &c.pet, prostate: &c.prostate, label: &c.label })
        .collect();
    let mut backward = forward.clone();
    backward.reverse();
    let config = SweepConfig::default();
    let a = fcn_sweep(&forward, &config).unwrap();
    let b = fcn_sweep(&backward, &config).unwrap();
    assert_eq!(a.p_max_dsc, b.p_max_dsc);
    assert_eq!(a.p_max_nsd, b.p_max_nsd);
    assert!((a.max_t - b.max_t).abs() <= 1e-12 * a.max_t);
    for (x, y) in a.avg_dsc.iter().zip(&b.avg_dsc) {
        assert!((x - y).abs() <= 1e-12);
    }
}

#[test]
fn predicted_volume_shrinks_with_percent() {
    let cases = generate_family_cases(&PhantomSpec::reference(), 2, 9).unwrap();
    for c in &cases {
        let s = masked_max(&c.pet, &c.prostate).unwrap();
        let mut last = usize::MAX;
        for p in (20..=70).step_by(2) {
            let m = threshold_segment(&c.pet, &c.prostate, compute_threshold(p as f64, s)).unwrap();
            assert!(m.count() <= last);
            last = m.count();
        }
        assert!(last > 0);
    }
}
