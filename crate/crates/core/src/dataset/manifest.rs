use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use super::{DatasetError, EmotionLabel, LabelScheme};
use crate::audio::probe_wav;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub label: EmotionLabel,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub scheme_name: String,
    pub class_names: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    path: String,
    label: String,
    duration_s: f64,
    scheme: String,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>, scheme_name: impl Into<String>, class_names: Vec<String>) -> Result<Self, DatasetError> {
        let mut seen = std::collections::HashSet::new();
        for e in &entries {
            if class_names.get(e.label.index) != Some(&e.label.name) {
                return Err(DatasetError::BadManifest(format!(
                    "{}: label {} does not match class list",
                    e.path.display(),
                    e.label.name
                )));
            }
            if !seen.insert(&e.path) {
                return Err(DatasetError::BadManifest(format!("duplicate path {}", e.path.display())));
            }
        }
        Ok(Self {
            entries,
            scheme_name: scheme_name.into(),
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.label.index).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for e in &self.entries {
            counts[e.label.index] += 1;
        }
        counts
    }

    /// Entries at `indices`, keeping the class list.
    pub fn subset(&self, indices: &[usize]) -> DatasetManifest {
        DatasetManifest {
            entries: indices.iter().map(|&i| self.entries[i].clone()).collect(),
            scheme_name: self.scheme_name.clone(),
            class_names: self.class_names.clone(),
        }
    }

    /// CSV with columns `path,label,duration_s,scheme`.
    pub fn to_csv(&self) -> Result<String, DatasetError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.entries {
            w.serialize(CsvRow {
                path: e.path.to_string_lossy().into_owned(),
                label: e.label.name.clone(),
                duration_s: e.duration_s,
                scheme: self.scheme_name.clone(),
            })
            .map_err(|e| DatasetError::BadManifest(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| DatasetError::BadManifest(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Parses [`to_csv`](Self::to_csv) output. Label indices follow
    /// `class_names` when given, otherwise the sorted set of labels seen.
    pub fn from_csv(text: &str, class_names: Option<&[String]>) -> Result<Self, DatasetError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let rows: Vec<CsvRow> = r
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(|e| DatasetError::BadManifest(e.to_string()))?;
        let classes: Vec<String> = match class_names {
            Some(c) => c.to_vec(),
            None => {
                let mut c: Vec<String> = rows.iter().map(|r| r.label.clone()).collect();
                c.sort();
                c.dedup();
                c
            }
        };
        let scheme = rows.first().map(|r| r.scheme.clone()).unwrap_or_default();
        let entries = rows
            .into_iter()
            .map(|r| {
                let index = classes
                    .iter()
                    .position(|c| *c == r.label)
                    .ok_or_else(|| DatasetError::BadManifest(format!("unknown label {}", r.label)))?;
                Ok(ManifestEntry {
                    path: PathBuf::from(r.path),
                    label: EmotionLabel { name: r.label, index },
                    duration_s: r.duration_s,
                })
            })
            .collect::<Result<Vec<_>, DatasetError>>()?;
        Self::new(entries, scheme, classes)
    }
}

/// A file that could not be used, with the reason.
#[derive(Debug, Clone, PartialEq)]
pub struct Reject {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct ScanOutcome {
    pub manifest: DatasetManifest,
    pub rejects: Vec<Reject>,
}

fn is_wav(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

fn probe_entry(path: &Path, scheme: &LabelScheme) -> Result<ManifestEntry, String> {
    if !is_wav(path) {
        return Err("not a .wav file".into());
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let label = scheme.parse_label(name).map_err(|e| e.to_string())?;
    let bytes = std::fs::read(path).map_err(|e| e.to_string())?;
    let info = probe_wav(&bytes).map_err(|e| e.to_string())?;
    Ok(ManifestEntry {
        path: path.to_path_buf(),
        label,
        duration_s: info.duration_s(),
    })
}

/// Recursively labels and probes every WAV under `root`, in sorted path
/// order. Anything unusable lands in `rejects`.
pub fn scan_dataset(root: &Path, scheme: &LabelScheme) -> Result<ScanOutcome, DatasetError> {
    let mut entries = Vec::new();
    let mut rejects = Vec::new();
    for item in WalkDir::new(root).sort_by_file_name() {
        let item = item.map_err(|e| DatasetError::Io(e.into()))?;
        if !item.file_type().is_file() {
            continue;
        }
        let path = item.into_path();
        match probe_entry(&path, scheme) {
            Ok(entry) => entries.push(entry),
            Err(reason) => rejects.push(Reject { path, reason }),
        }
    }
    if entries.is_empty() {
        return Err(DatasetError::EmptyDataset { rejects });
    }
    Ok(ScanOutcome {
        manifest: DatasetManifest::new(entries, scheme.name(), scheme.class_names().to_vec())?,
        rejects,
    })
}
