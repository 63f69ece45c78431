//! Versioned text container for trained models.
//!
//! The format is line-oriented with explicit field labels and
//! full-precision decimal floats (every value is written with the shortest
//! decimal string that parses back to the identical bits), so files are
//! human-inspectable and a save/load round trip reproduces predictions
//! bit-exactly. Layout, in order:
//!
//! ```text
//! dbnwp-model v1
//! seed <u64>
//! config <one-line settings summary>
//! architecture <input> <h1,h2,...> <output>
//! features <count>
//! range <col> <min> <max>        (one line per feature column)
//! target <min> <max>
//! rbm <index> <visible> <hidden> (per layer)
//! w <row values...>              (visible rows of the weight matrix)
//! b <visible bias values...>
//! c <hidden bias values...>
//! head <width>
//! hw <head weights...>
//! hb <head bias>
//! end
//! ```

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use dbnwp_core::dataset::Normalization;
use dbnwp_core::dbn::{DbnArchitecture, DbnModel, Provenance};
use dbnwp_core::numerics::{Matrix, Vector};
use dbnwp_core::rbm::RbmParams;

/// Version tag written to and required from every model file.
pub const FORMAT_VERSION: &str = "dbnwp-model v1";

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported model file version: expected `{expected}`, found `{found}`")]
    Version { expected: String, found: String },
    #[error("model file corrupt at line {line}: {message}")]
    Corrupt { line: usize, message: String },
    #[error("model file holds an inconsistent model: {0}")]
    Inconsistent(String),
}

/// Writes a model to `path` in the versioned text format.
pub fn save_model(model: &DbnModel, path: &Path) -> Result<(), ModelFileError> {
    let mut out = String::new();
    let _ = writeln!(out, "{FORMAT_VERSION}");
    let _ = writeln!(out, "seed {}", model.provenance.seed);
    let _ = writeln!(out, "config {}", model.provenance.config_summary);
    let hidden: Vec<String> = model
        .architecture
        .hidden_sizes
        .iter()
        .map(|s| s.to_string())
        .collect();
    let _ = writeln!(
        out,
        "architecture {} {} {}",
        model.architecture.input_dim,
        hidden.join(","),
        model.architecture.output_dim
    );
    let _ = writeln!(out, "features {}", model.normalization.width());
    for (col, (min, max)) in model.normalization.feature_ranges.iter().enumerate() {
        let _ = writeln!(out, "range {col} {min} {max}");
    }
    let (tmin, tmax) = model.normalization.target_range;
    let _ = writeln!(out, "target {tmin} {tmax}");
    for (index, rbm) in model.rbm_stack.iter().enumerate() {
        let _ = writeln!(out, "rbm {index} {} {}", rbm.n_visible(), rbm.n_hidden());
        for row in 0..rbm.n_visible() {
            out.push('w');
            for value in rbm.weights.row(row) {
                let _ = write!(out, " {value}");
            }
            out.push('\n');
        }
        out.push('b');
        for value in rbm.visible_bias.as_slice() {
            let _ = write!(out, " {value}");
        }
        out.push('\n');
        out.push('c');
        for value in rbm.hidden_bias.as_slice() {
            let _ = write!(out, " {value}");
        }
        out.push('\n');
    }
    let _ = writeln!(out, "head {}", model.head_weights.len());
    out.push_str("hw");
    for value in model.head_weights.as_slice() {
        let _ = write!(out, " {value}");
    }
    out.push('\n');
    let _ = writeln!(out, "hb {}", model.head_bias);
    out.push_str("end\n");

    std::fs::write(path, out).map_err(|source| ModelFileError::Io {
        path: path.display().to_string(),
        source,
    })
}

struct Reader<'a> {
    lines: std::str::Lines<'a>,
    line: usize,
}

impl<'a> Reader<'a> {
    fn next(&mut self) -> Result<&'a str, ModelFileError> {
        self.line += 1;
        self.lines.next().ok_or(ModelFileError::Corrupt {
            line: self.line,
            message: "unexpected end of file".into(),
        })
    }

    fn corrupt(&self, message: impl Into<String>) -> ModelFileError {
        ModelFileError::Corrupt {
            line: self.line,
            message: message.into(),
        }
    }

    /// Next line, which must start with `label` followed by exactly `count`
    /// floats.
    fn floats(&mut self, label: &str, count: usize) -> Result<Vec<f64>, ModelFileError> {
        let line = self.next()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(label) {
            return Err(self.corrupt(format!("expected `{label}` record, found `{line}`")));
        }
        let values: Vec<f64> = parts
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| self.corrupt(format!("bad float in `{label}` record: {e}")))?;
        if values.len() != count {
            return Err(self.corrupt(format!(
                "`{label}` record holds {} values, expected {count}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(self.corrupt(format!("non-finite value {bad} in `{label}` record")));
        }
        Ok(values)
    }
}

/// Loads a model from the versioned text format, checking the version tag
/// and structural consistency.
pub fn load_model(path: &Path) -> Result<DbnModel, ModelFileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut r = Reader {
        lines: text.lines(),
        line: 0,
    };

    let version = r.next()?;
    if version != FORMAT_VERSION {
        return Err(ModelFileError::Version {
            expected: FORMAT_VERSION.to_string(),
            found: version.to_string(),
        });
    }

    let seed_line = r.next()?;
    let seed: u64 = seed_line
        .strip_prefix("seed ")
        .ok_or_else(|| r.corrupt("expected `seed` record"))?
        .parse()
        .map_err(|e| r.corrupt(format!("bad seed: {e}")))?;

    let config = r
        .next()?
        .strip_prefix("config ")
        .ok_or_else(|| r.corrupt("expected `config` record"))?
        .to_string();

    let arch_line = r.next()?;
    let parts: Vec<&str> = arch_line.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "architecture" {
        return Err(r.corrupt("expected `architecture <input> <hidden,..> <output>`"));
    }
    let input_dim: usize = parts[1]
        .parse()
        .map_err(|e| r.corrupt(format!("bad input dimension: {e}")))?;
    let hidden_sizes: Vec<usize> = parts[2]
        .split(',')
        .map(str::parse)
        .collect::<Result<_, _>>()
        .map_err(|e| r.corrupt(format!("bad hidden sizes: {e}")))?;
    let output_dim: usize = parts[3]
        .parse()
        .map_err(|e| r.corrupt(format!("bad output dimension: {e}")))?;
    if output_dim != 1 {
        return Err(r.corrupt(format!("output dimension must be 1, found {output_dim}")));
    }
    let architecture = DbnArchitecture::new(input_dim, hidden_sizes)
        .map_err(|e| ModelFileError::Inconsistent(e.to_string()))?;

    let features_line = r.next()?;
    let width: usize = features_line
        .strip_prefix("features ")
        .ok_or_else(|| r.corrupt("expected `features` record"))?
        .parse()
        .map_err(|e| r.corrupt(format!("bad feature count: {e}")))?;

    let mut feature_ranges = Vec::with_capacity(width);
    for col in 0..width {
        let values = r.floats("range", 3)?;
        if values[0] as usize != col {
            return Err(r.corrupt(format!(
                "range record out of order: expected column {col}, found {}",
                values[0]
            )));
        }
        feature_ranges.push((values[1], values[2]));
    }
    let target = r.floats("target", 2)?;
    let normalization = Normalization {
        feature_ranges,
        target_range: (target[0], target[1]),
    };

    let mut rbm_stack = Vec::with_capacity(architecture.hidden_sizes.len());
    for index in 0..architecture.hidden_sizes.len() {
        let header = r.next()?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "rbm" {
            return Err(r.corrupt(format!("expected `rbm` header, found `{header}`")));
        }
        let got_index: usize = parts[1]
            .parse()
            .map_err(|e| r.corrupt(format!("bad rbm index: {e}")))?;
        if got_index != index {
            return Err(r.corrupt(format!("expected rbm {index}, found {got_index}")));
        }
        let n_visible: usize = parts[2]
            .parse()
            .map_err(|e| r.corrupt(format!("bad visible count: {e}")))?;
        let n_hidden: usize = parts[3]
            .parse()
            .map_err(|e| r.corrupt(format!("bad hidden count: {e}")))?;

        let mut weights = Vec::with_capacity(n_visible * n_hidden);
        for _ in 0..n_visible {
            weights.extend(r.floats("w", n_hidden)?);
        }
        let visible_bias = r.floats("b", n_visible)?;
        let hidden_bias = r.floats("c", n_hidden)?;
        let params = RbmParams::new(
            Matrix::from_vec(n_visible, n_hidden, weights)
                .map_err(|e| ModelFileError::Inconsistent(e.to_string()))?,
            Vector::from_vec(visible_bias).map_err(|e| ModelFileError::Inconsistent(e.to_string()))?,
            Vector::from_vec(hidden_bias).map_err(|e| ModelFileError::Inconsistent(e.to_string()))?,
        )
        .map_err(|e| ModelFileError::Inconsistent(e.to_string()))?;
        rbm_stack.push(params);
    }

    let head_line = r.next()?;
    let head_width: usize = head_line
        .strip_prefix("head ")
        .ok_or_else(|| r.corrupt("expected `head` record"))?
        .parse()
        .map_err(|e| r.corrupt(format!("bad head width: {e}")))?;
    let head_weights = r.floats("hw", head_width)?;
    let head_bias = r.floats("hb", 1)?[0];
    let end = r.next()?;
    if end != "end" {
        return Err(r.corrupt(format!("expected `end`, found `{end}`")));
    }

    DbnModel::new(
        architecture,
        rbm_stack,
        Vector::from_vec(head_weights).map_err(|e| ModelFileError::Inconsistent(e.to_string()))?,
        head_bias,
        normalization,
        Provenance {
            seed,
            config_summary: config,
        },
    )
    .map_err(|e| ModelFileError::Inconsistent(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use dbnwp_core::dataset::{build_samples, synthesize};
    use dbnwp_core::dbn::{train_dbn, FineTuneConfig};
    use dbnwp_core::rbm::CdConfig;

    fn small_model() -> DbnModel {
        let records = synthesize(160, 9).unwrap();
        let samples = build_samples(&records).unwrap();
        let arch = DbnArchitecture::new(samples.width(), vec![6, 3]).unwrap();
        let cd = CdConfig {
            epochs: 2,
            batch_size: 32,
            learning_rate: 0.1,
            ..CdConfig::default()
        };
        let ft = FineTuneConfig {
            epochs: 3,
            batch_size: 32,
            learning_rate: 0.3,
            momentum: 0.05,
        };
        train_dbn(&samples, &arch, &cd, &ft, 5).unwrap().model
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let model = small_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.dbnwp");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(model, loaded);
        // Saving the loaded model reproduces the same bytes.
        let path2 = dir.path().join("model2.dbnwp");
        save_model(&loaded, &path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn truncated_file_reports_corruption() {
        let model = small_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.dbnwp");
        save_model(&model, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let cut = text.len() / 2;
        std::fs::write(&path, &text[..cut]).unwrap();
        match load_model(&path) {
            Err(ModelFileError::Corrupt { .. }) => {}
            other => panic!("expected corruption error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_version_names_expected_and_found() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.dbnwp");
        std::fs::write(&path, "dbnwp-model v999\nseed 0\n").unwrap();
        match load_model(&path) {
            Err(ModelFileError::Version { expected, found }) => {
                assert_eq!(expected, FORMAT_VERSION);
                assert_eq!(found, "dbnwp-model v999");
            }
            other => panic!("expected version error, got {other:?}"),
        }
    }

    #[test]
    fn loaded_model_predicts_identically() {
        let records = synthesize(160, 9).unwrap();
        let samples = build_samples(&records).unwrap();
        let model = small_model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.dbnwp");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        for row in 0..samples.len().min(10) {
            let a = model.predict(samples.feature_row(row)).unwrap();
            let b = loaded.predict(samples.feature_row(row)).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
