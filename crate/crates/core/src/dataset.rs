//! On-disk dataset layout and descriptor.
//!
//! ```text
//! <root>/
//!   dataset.json        descriptor
//!   imagesTr/<id>.nii.gz    PET (SUV)
//!   labelsTr/<id>.nii.gz    tumour label
//!   prostateTr/<id>.nii.gz  prostate mask
//! ```

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ValidationReport};
use crate::nifti;
use crate::normalize::Scheme;
use crate::volume::{Mask, Volume};

pub const DESCRIPTOR_FILE: &str = "dataset.json";
pub const IMAGES_DIR: &str = "imagesTr";
pub const LABELS_DIR: &str = "labelsTr";
pub const PROSTATE_DIR: &str = "prostateTr";
pub const DEFAULT_FILE_ENDING: &str = ".nii.gz";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetLayout {
    pub root: PathBuf,
    pub images_dir: String,
    pub labels_dir: String,
    pub prostate_dir: String,
    pub descriptor_file: String,
}

impl DatasetLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DatasetLayout {
            root: root.into(),
            images_dir: IMAGES_DIR.into(),
            labels_dir: LABELS_DIR.into(),
            prostate_dir: PROSTATE_DIR.into(),
            descriptor_file: DESCRIPTOR_FILE.into(),
        }
    }

    pub fn descriptor_path(&self) -> PathBuf {
        self.root.join(&self.descriptor_file)
    }

    pub fn images(&self) -> PathBuf {
        self.root.join(&self.images_dir)
    }

    pub fn labels(&self) -> PathBuf {
        self.root.join(&self.labels_dir)
    }

    pub fn prostates(&self) -> PathBuf {
        self.root.join(&self.prostate_dir)
    }

    pub fn image_path(&self, id: &str, ending: &str) -> PathBuf {
        self.images().join(format!("{id}{ending}"))
    }

    pub fn label_path(&self, id: &str, ending: &str) -> PathBuf {
        self.labels().join(format!("{id}{ending}"))
    }

    pub fn prostate_path(&self, id: &str, ending: &str) -> PathBuf {
        self.prostates().join(format!("{id}{ending}"))
    }

    /// Creates the root and the three case subdirectories.
    pub fn create_dirs(&self) -> Result<()> {
        for dir in [self.images(), self.labels(), self.prostates()] {
            fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub channel_names: Vec<String>,
    pub normalization_schemes: Vec<Scheme>,
    pub file_ending: String,
    #[serde(default)]
    pub tracer_tag: String,
}

impl Default for DatasetDescriptor {
    fn default() -> Self {
        DatasetDescriptor {
            channel_names: vec!["PET".into(), "prostate".into()],
            normalization_schemes: vec![Scheme::Fcn, Scheme::None],
            file_ending: DEFAULT_FILE_ENDING.into(),
            tracer_tag: String::new(),
        }
    }
}

impl DatasetDescriptor {
    pub fn validate(&self) -> Result<()> {
        if self.channel_names.is_empty() {
            return Err(Error::Descriptor("channel_names is empty".into()));
        }
        if self.channel_names.len() != self.normalization_schemes.len() {
            return Err(Error::Descriptor(format!(
                "{} channel names but {} normalization schemes",
                self.channel_names.len(),
                self.normalization_schemes.len()
            )));
        }
        if let Some((i, s)) = self
            .normalization_schemes
            .iter()
            .enumerate()
            .skip(1)
            .find(|(_, s)| **s != Scheme::None)
        {
            return Err(Error::Descriptor(format!(
                "mask channel {i} must use scheme 'none', got '{s}'"
            )));
        }
        if !self.file_ending.starts_with('.') {
            return Err(Error::Descriptor(format!(
                "file_ending must start with '.', got {:?}",
                self.file_ending
            )));
        }
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let d: DatasetDescriptor = serde_json::from_str(&text)
            .map_err(|e| Error::Descriptor(format!("{}: {e}", path.display())))?;
        d.validate()?;
        Ok(d)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.validate()?;
        write_json(self, path)
    }
}

pub(crate) fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub id: String,
    pub pet: Volume,
    pub prostate: Mask,
    pub label: Mask,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub layout: DatasetLayout,
    pub descriptor: DatasetDescriptor,
    pub cases: Vec<Case>,
}

/// Case ids of files in `dir` ending with `ending`, sorted. A missing
/// directory yields no ids.
pub fn case_ids_in(dir: &Path, ending: &str) -> Result<BTreeSet<String>> {
    let mut ids = BTreeSet::new();
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(ids),
        Err(e) => return Err(Error::io(dir, e)),
    };
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(id) = name.strip_suffix(ending) {
            if !id.is_empty() {
                ids.insert(id.to_string());
            }
        }
    }
    Ok(ids)
}

fn load_case(layout: &DatasetLayout, id: &str, ending: &str) -> std::result::Result<Case, Vec<String>> {
    let image = layout.image_path(id, ending);
    let label = layout.label_path(id, ending);
    let prostate = layout.prostate_path(id, ending);
    let mut problems = Vec::new();
    for (what, path) in [("image", &image), ("label", &label), ("prostate mask", &prostate)] {
        if !path.exists() {
            problems.push(format!("missing {what} file {}", path.display()));
        }
    }
    if !problems.is_empty() {
        return Err(problems);
    }
    let pet = nifti::read_volume(&image).map_err(|e| problems.push(e.to_string()));
    let lab = nifti::read_mask(&label).map_err(|e| problems.push(e.to_string()));
    let pro = nifti::read_mask(&prostate).map_err(|e| problems.push(e.to_string()));
    let (Ok(pet), Ok(label), Ok(prostate)) = (pet, lab, pro) else {
        return Err(problems);
    };
    for (what, g) in [("label", label.geometry()), ("prostate mask", prostate.geometry())] {
        if !pet.geometry().matches(g) {
            problems.push(format!(
                "geometry mismatch: image dims {:?} spacing {:?}, {what} dims {:?} spacing {:?}",
                pet.geometry().dims,
                pet.geometry().spacing,
                g.dims,
                g.spacing
            ));
        }
    }
    if !problems.is_empty() {
        return Err(problems);
    }
    Ok(Case {
        id: id.to_string(),
        pet,
        prostate,
        label,
    })
}

/// Loads and validates every case under `root`. All per-case problems are
/// collected into one [`Error::DatasetValidation`].
pub fn load_dataset(root: impl AsRef<Path>) -> Result<Dataset> {
    let layout = DatasetLayout::new(root.as_ref());
    let descriptor = DatasetDescriptor::read(&layout.descriptor_path())?;
    let ending = descriptor.file_ending.clone();
    let mut ids = case_ids_in(&layout.images(), &ending)?;
    ids.extend(case_ids_in(&layout.labels(), &ending)?);
    ids.extend(case_ids_in(&layout.prostates(), &ending)?);
    let ids: Vec<String> = ids.into_iter().collect();

    let loaded: Vec<_> = ids
        .par_iter()
        .map(|id| (id, load_case(&layout, id, &ending)))
        .collect();
    let mut report = ValidationReport::default();
    let mut cases = Vec::with_capacity(loaded.len());
    for (id, r) in loaded {
        match r {
            Ok(c) => cases.push(c),
            Err(problems) => {
                for p in problems {
                    report.push(id.clone(), p);
                }
            }
        }
    }
    if !report.is_empty() {
        return Err(Error::DatasetValidation(report));
    }
    Ok(Dataset {
        layout,
        descriptor,
        cases,
    })
}

/// Writes one case's three volumes into the layout.
pub fn write_case(layout: &DatasetLayout, ending: &str, case: &Case) -> Result<()> {
    nifti::write_volume(&case.pet, layout.image_path(&case.id, ending))?;
    nifti::write_mask(&case.label, layout.label_path(&case.id, ending))?;
    nifti::write_mask(&case.prostate, layout.prostate_path(&case.id, ending))
}

/// Writes a complete dataset: directories, descriptor and every case.
pub fn write_dataset(root: impl AsRef<Path>, descriptor: &DatasetDescriptor, cases: &[Case]) -> Result<DatasetLayout> {
    descriptor.validate()?;
    let layout = DatasetLayout::new(root.as_ref());
    layout.create_dirs()?;
    descriptor.write(&layout.descriptor_path())?;
    cases
        .par_iter()
        .try_for_each(|c| write_case(&layout, &descriptor.file_ending, c))?;
    Ok(layout)
}

/// Loads every mask `<id><ending>` in `dir`, sorted by id.
pub fn load_mask_dir(dir: &Path, ending: &str) -> Result<Vec<(String, Mask)>> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let ids: Vec<String> = case_ids_in(dir, ending)?.into_iter().collect();
    ids.par_iter()
        .map(|id| Ok((id.clone(), nifti::read_mask(dir.join(format!("{id}{ending}")))?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn descriptor_validation() {
        let mut d = DatasetDescriptor::default();
        d.validate().unwrap();
        d.normalization_schemes[1] = Scheme::ZScore;
        assert!(matches!(d.validate(), Err(Error::Descriptor(_))));
        let mut d = DatasetDescriptor::default();
        d.channel_names.pop();
        assert!(d.validate().is_err());
        let mut d = DatasetDescriptor::default();
        d.file_ending = "nii".into();
        assert!(d.validate().is_err());
    }

    #[test]
    fn descriptor_json_rejects_unknown_scheme() {
        let ok = r#"{"channel_names":["PET","prostate"],"normalization_schemes":["fixedclip:0:15","none"],"file_ending":".nii.gz","tracer_tag":"68Ga"}"#;
        let d: DatasetDescriptor = serde_json::from_str(ok).unwrap();
        assert_eq!(d.normalization_schemes[0], Scheme::FixedClip { min_t: 0.0, max_t: 15.0 });
        let bad = ok.replace("fixedclip:0:15", "minmax");
        assert!(serde_json::from_str::<DatasetDescriptor>(&bad).is_err());
    }

    #[test]
    fn descriptor_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dataset.json");
        let d = DatasetDescriptor {
            tracer_tag: "18F".into(),
            ..DatasetDescriptor::default()
        };
        d.write(&path).unwrap();
        assert_eq!(DatasetDescriptor::read(&path).unwrap(), d);
    }
}
