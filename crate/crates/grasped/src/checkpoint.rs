//! Versioned text checkpoints.
//!
//! ```text
//! grasped-checkpoint 1
//! feature_dim = 16
//! lambda_d = 0
//! ...
//! tensor encoder.0.theta 16
//! 1.0000000000000000e0 1.0000000000000000e0 ...
//! ...
//! end
//! ```
//!
//! Each tensor line gives its name and shape; the next line holds its values
//! in row-major order with 17 significant digits.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use grasped_core::rng::{stream, Purpose};
use grasped_core::{HyperParams, ModelParams};

use crate::config::{hyper_lines, set_hyper};
use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "grasped-checkpoint";

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub hyper: HyperParams,
    pub feature_dim: usize,
    pub params: ModelParams,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CheckpointError {
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint format version {found}, this build reads version {FORMAT_VERSION}")]
    VersionMismatch { found: u32 },
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl Checkpoint {
    pub fn to_text(&self) -> String {
        let mut s = format!("{MAGIC} {FORMAT_VERSION}\n");
        writeln!(s, "feature_dim = {}", self.feature_dim).unwrap();
        for (k, v) in hyper_lines(&self.hyper) {
            writeln!(s, "{k} = {v}").unwrap();
        }
        self.params.visit_tensors(&mut |name, shape, data, _| {
            let dims: Vec<String> = shape.iter().map(|d| d.to_string()).collect();
            writeln!(s, "tensor {name} {}", dims.join(" ")).unwrap();
            let values: Vec<String> = data.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(s, "{}", values.join(" ")).unwrap();
        });
        s.push_str("end\n");
        s
    }

    pub fn parse(text: &str) -> Result<Self, CheckpointError> {
        let corrupt = |m: String| CheckpointError::Corrupt(m);
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| corrupt("empty file".into()))?;
        let version = header
            .strip_prefix(MAGIC)
            .and_then(|v| v.trim().parse::<u32>().ok())
            .ok_or_else(|| corrupt(format!("bad header {header:?}")))?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::VersionMismatch { found: version });
        }

        let mut hyper = HyperParams::default();
        let mut feature_dim = None;
        let mut tensors: HashMap<String, (Vec<usize>, Vec<f64>)> = HashMap::new();
        let mut ended = false;
        while let Some(line) = lines.next() {
            if line == "end" {
                ended = true;
                break;
            }
            if let Some(rest) = line.strip_prefix("tensor ") {
                let mut parts = rest.split(' ');
                let name = parts
                    .next()
                    .filter(|n| !n.is_empty())
                    .ok_or_else(|| corrupt("unnamed tensor".into()))?;
                let shape = parts
                    .map(|d| d.parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| corrupt(format!("bad shape for {name}")))?;
                let values_line = lines
                    .next()
                    .ok_or_else(|| corrupt(format!("missing values for {name}")))?;
                let values = values_line
                    .split(' ')
                    .filter(|v| !v.is_empty())
                    .map(|v| v.parse::<f64>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|_| corrupt(format!("bad value in {name}")))?;
                if values.len() != shape.iter().product::<usize>() {
                    return Err(corrupt(format!("{name}: {} values for shape {shape:?}", values.len())));
                }
                tensors.insert(name.to_string(), (shape, values));
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| corrupt(format!("unexpected line {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if key == "feature_dim" {
                feature_dim = Some(value.parse().map_err(|_| corrupt("bad feature_dim".into()))?);
            } else {
                set_hyper(&mut hyper, key, value).map_err(corrupt)?;
            }
        }
        if !ended {
            return Err(corrupt("missing `end` line (truncated file?)".into()));
        }
        let feature_dim = feature_dim.ok_or_else(|| corrupt("missing feature_dim".into()))?;

        // Build the architecture, then overwrite every tensor.
        let mut params = ModelParams::init(&hyper, feature_dim, &mut stream(0, Purpose::Init))
            .map_err(|e| corrupt(format!("hyperparameters: {e}")))?;
        let mut problem = None;
        let mut used = 0;
        params.visit_tensors_mut(&mut |name, shape, data, _| {
            if problem.is_some() {
                return;
            }
            match tensors.get(name) {
                Some((s, v)) if s.as_slice() == shape => {
                    data.copy_from_slice(v);
                    used += 1;
                }
                Some((s, _)) => problem = Some(format!("{name}: shape {s:?}, expected {shape:?}")),
                None => problem = Some(format!("missing tensor {name}")),
            }
        });
        if let Some(p) = problem {
            return Err(corrupt(p));
        }
        if used != tensors.len() {
            return Err(corrupt(format!("{} unexpected tensors", tensors.len() - used)));
        }
        Ok(Self {
            hyper,
            feature_dim,
            params,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}
