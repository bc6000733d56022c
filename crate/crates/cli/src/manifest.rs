use std::path::{Path, PathBuf};

use hysterlab::epnn::Architecture;
use hysterlab::refmodels::ReferenceModelSpec;
use hysterlab::signals::{estimate_rate, load_csv, TimeSeriesPair};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum DatasetRef {
    One(PathBuf),
    Many(Vec<PathBuf>),
}

impl DatasetRef {
    pub fn paths(&self) -> Vec<&Path> {
        match self {
            DatasetRef::One(p) => vec![p.as_path()],
            DatasetRef::Many(ps) => ps.iter().map(|p| p.as_path()).collect(),
        }
    }
}

fn default_seed() -> u64 {
    42
}

fn default_split() -> f64 {
    0.8
}

/// Training experiment description. Relative paths resolve against the
/// manifest's own directory.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub dataset: DatasetRef,
    pub arch: Architecture,
    #[serde(default)]
    pub config: Option<PathBuf>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_split")]
    pub split: f64,
    /// Report of a companion run on the same data; its test MSE is compared
    /// against this run's.
    #[serde(default)]
    pub companion_report: Option<PathBuf>,
}

fn schema_error(path: &Path, e: serde_path_to_error::Error<serde_json::Error>) -> CliError {
    let at = e.path().to_string();
    CliError::file(path, format!("at `{at}`: {}", e.into_inner()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| schema_error(path, e))
}

fn body<T: DeserializeOwned>(path: &Path, value: serde_json::Value) -> Result<T, CliError> {
    serde_path_to_error::deserialize(value).map_err(|e| schema_error(path, e))
}

/// Reads a reference-model spec. The `model` tag is split off first so that
/// schema errors inside the body keep their field path.
pub fn read_model_spec(path: &Path) -> Result<ReferenceModelSpec, CliError> {
    let mut value: serde_json::Value = read_json(path)?;
    let tag = value
        .as_object_mut()
        .and_then(|m| m.remove("model"))
        .ok_or_else(|| CliError::file(path, "missing field `model`"))?;
    let spec = match tag.as_str() {
        Some("pi") => ReferenceModelSpec::Pi(body(path, value)?),
        Some("gpnn") => ReferenceModelSpec::Gpnn(body(path, value)?),
        Some("preisach") => ReferenceModelSpec::Preisach(body(path, value)?),
        Some("preisach-grid") => ReferenceModelSpec::PreisachGrid(body(path, value)?),
        Some("rdpi") => ReferenceModelSpec::Rdpi(body(path, value)?),
        _ => {
            return Err(CliError::file(
                path,
                format!("at `model`: unknown model {tag}, expected one of pi, gpnn, preisach, preisach-grid, rdpi"),
            ))
        }
    };
    Ok(spec)
}

pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_relative() {
        base.join(p)
    } else {
        p.to_path_buf()
    }
}

pub fn load_series(path: &Path) -> Result<TimeSeriesPair, CliError> {
    if !path.exists() {
        return Err(CliError::file(path, "file not found"));
    }
    load_csv(path).map_err(|e| CliError::at(path)(e.into()))
}

/// Loads every dataset, estimates the rate per file when `need_rate` and the
/// column is missing, and joins them end to end. Later files are shifted in
/// time so the joined record stays strictly increasing.
pub fn load_datasets(paths: &[PathBuf], need_rate: bool) -> Result<TimeSeriesPair, CliError> {
    let mut joined: Option<TimeSeriesPair> = None;
    for path in paths {
        let mut s = load_series(path)?;
        if s.y().is_none() {
            return Err(CliError::file(path, "dataset has no `y` column"));
        }
        if need_rate && s.xdot().is_none() {
            s = estimate_rate(&s);
        }
        joined = Some(match joined {
            None => s,
            Some(prev) => {
                let t = s.t();
                let step = t.get(1).map_or(1.0, |t1| t1 - t[0]);
                let shift = prev.t().last().unwrap() + step - t[0];
                let shifted: Vec<f64> = t.iter().map(|v| v + shift).collect();
                let mut moved = TimeSeriesPair::new(shifted, s.x().to_vec(), s.y().map(|y| y.to_vec()))?;
                if let Some(d) = s.xdot() {
                    moved = moved.with_xdot(d.to_vec())?;
                }
                prev.concat(&moved).map_err(|e| CliError::at(path)(e.into()))?
            }
        });
    }
    joined.ok_or_else(|| CliError::Usage("manifest lists no dataset".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_accepts_string_or_list() {
        let one: Manifest = serde_json::from_str(
            r#"{"dataset": "a.csv", "arch": {"n_stop": 2, "n_tanh": 1, "rate_input": false}, "output_dir": "out"}"#,
        )
        .unwrap();
        assert_eq!(one.dataset.paths(), vec![Path::new("a.csv")]);
        assert_eq!(one.seed, 42);
        assert_eq!(one.split, 0.8);
        let many: Manifest = serde_json::from_str(
            r#"{"dataset": ["a.csv", "b.csv"], "arch": {"n_stop": 2, "n_tanh": 1, "rate_input": true}, "output_dir": "o", "seed": 7}"#,
        )
        .unwrap();
        assert_eq!(many.dataset.paths().len(), 2);
        assert_eq!(many.seed, 7);
    }

    #[test]
    fn model_spec_errors_keep_field_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("spec.json");
        std::fs::write(&path, r#"{"model": "gpnn", "terms": [{"r": 0.2, "beta": "big", "w": 1}]}"#).unwrap();
        let msg = read_model_spec(&path).unwrap_err().to_string();
        assert!(msg.contains("terms[0].beta"), "{msg}");
        std::fs::write(&path, r#"{"model": "pi", "thresholds": [0.5], "weights": [2.0]}"#).unwrap();
        assert!(matches!(read_model_spec(&path).unwrap(), ReferenceModelSpec::Pi(_)));
    }

    #[test]
    fn unknown_field_is_rejected() {
        let text = r#"{"dataset": "a.csv", "arch": {"n_stop": 2, "n_tanh": 1, "rate_input": false}, "output_dir": "o", "epochs": 3}"#;
        assert!(serde_json::from_str::<Manifest>(text).is_err());
    }
}
