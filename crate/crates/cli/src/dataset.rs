//! Dataset manifests: `{"samples":[{"x":"path.ten","y":"path.ten","label":"..."}]}`.
//! Paths are relative to the manifest's directory.

use std::path::{Path, PathBuf};

use ectensor::io::{load_tensor, save_tensor};
use ectensor::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{usage, CliError, CliResult};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SampleEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub samples: Vec<SampleEntry>,
}

/// A loaded dataset; every entry of a field is present or the field is `None`.
pub struct Dataset {
    pub xs: Option<Vec<Tensor>>,
    pub ys: Option<Vec<Tensor>>,
    pub labels: Option<Vec<String>>,
}

impl Dataset {
    pub fn responses(&self) -> CliResult<&[Tensor]> {
        match &self.ys {
            Some(ys) if !ys.is_empty() => Ok(ys),
            _ => usage("dataset has no responses (\"y\")"),
        }
    }

    pub fn covariates(&self) -> CliResult<&[Tensor]> {
        match &self.xs {
            Some(xs) if !xs.is_empty() => Ok(xs),
            _ => usage("dataset has no covariates (\"x\")"),
        }
    }

    pub fn require_labels(&self) -> CliResult<&[String]> {
        match &self.labels {
            Some(l) if !l.is_empty() => Ok(l),
            _ => usage("dataset has no labels"),
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json { path: path.into(), source })?;
    std::fs::write(path, text + "\n").map_err(|source| CliError::Io { path: path.into(), source })
}

/// Collects one optional field across all entries.
fn column<T>(
    entries: &[SampleEntry],
    name: &str,
    get: impl Fn(&SampleEntry) -> Option<&String>,
    load: impl Fn(&str) -> CliResult<T>,
) -> CliResult<Option<Vec<T>>> {
    let present = entries.iter().filter(|e| get(e).is_some()).count();
    if present == 0 {
        return Ok(None);
    }
    if present != entries.len() {
        return usage(format!("field {name:?} is present in only {present} of {} samples", entries.len()));
    }
    entries.iter().map(|e| load(get(e).unwrap())).collect::<CliResult<Vec<T>>>().map(Some)
}

pub fn load(path: &Path) -> CliResult<Dataset> {
    let manifest: Manifest = read_json(path)?;
    let dir = path.parent().unwrap_or(Path::new(""));
    let tensor = |p: &str| -> CliResult<Tensor> {
        let full = dir.join(p);
        load_tensor(&full).map_err(|e| CliError::at(&full, e))
    };
    let s = &manifest.samples;
    Ok(Dataset {
        xs: column(s, "x", |e| e.x.as_ref(), tensor)?,
        ys: column(s, "y", |e| e.y.as_ref(), tensor)?,
        labels: column(s, "label", |e| e.label.as_ref(), |l| Ok(l.to_string()))?,
    })
}

/// Writes tensors as `<prefix>_<index>.ten` files under `dir` and the manifest as `dir/dataset.json`.
pub fn write(
    dir: &Path,
    xs: Option<&[Tensor]>,
    ys: Option<&[Tensor]>,
    labels: Option<&[String]>,
) -> CliResult<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.into(), source })?;
    let n = xs.map(<[_]>::len).or(ys.map(<[_]>::len)).or(labels.map(<[_]>::len)).unwrap_or(0);
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let mut entry = SampleEntry::default();
        for (prefix, set, slot) in [("x", xs, &mut entry.x), ("y", ys, &mut entry.y)] {
            if let Some(ts) = set {
                let name = format!("{prefix}_{i:05}.ten");
                let full = dir.join(&name);
                save_tensor(&full, &ts[i]).map_err(|e| CliError::at(&full, e))?;
                *slot = Some(name);
            }
        }
        entry.label = labels.map(|l| l[i].clone());
        samples.push(entry);
    }
    let path = dir.join("dataset.json");
    write_json(&path, &Manifest { samples })?;
    Ok(path)
}
