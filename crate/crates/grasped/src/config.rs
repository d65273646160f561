//! Run configuration in `key = value` text form.
//!
//! Keys are the `HyperParams` field names plus `dataset`, `out`, `repeat`,
//! `seeds` and `grid.<field>` axes. `#` starts a comment. Lists are comma
//! separated.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use grasped_core::{AttrDecoderKind, EncoderKind, HyperParams};

use crate::error::{CliError, Result};

/// Numeric hyperparameters that may appear as grid axes.
pub const GRID_AXES: &[&str] = &[
    "lambda_d",
    "lambda_n",
    "lambda_x",
    "bins",
    "noise_scale",
    "sample_size",
    "depth",
    "hidden",
    "lr",
    "epochs",
    "cov_eps",
    "remez_order",
];

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub hyper: HyperParams,
    pub repeat: Option<usize>,
    pub seeds: Option<Vec<u64>>,
    pub grid: Vec<(String, Vec<f64>)>,
}

fn usage(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(format!("config line {line}: {msg}"))
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .trim()
        .parse()
        .map_err(|_| format!("invalid value {value:?} for {key}"))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, String> {
    value
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

/// Sets one hyperparameter from its text form.
pub fn set_hyper(h: &mut HyperParams, key: &str, value: &str) -> Result<(), String> {
    match key {
        "lambda_d" => h.lambda_d = parse_num(key, value)?,
        "lambda_n" => h.lambda_n = parse_num(key, value)?,
        "lambda_x" => h.lambda_x = parse_num(key, value)?,
        "bins" => h.bins = parse_num(key, value)?,
        "noise_scale" => h.noise_scale = parse_num(key, value)?,
        "sample_size" => h.sample_size = parse_num(key, value)?,
        "depth" => h.depth = parse_num(key, value)?,
        "hidden" => h.hidden = parse_num(key, value)?,
        "lr" => h.lr = parse_num(key, value)?,
        "epochs" => h.epochs = parse_num(key, value)?,
        "cov_eps" => h.cov_eps = parse_num(key, value)?,
        "remez_order" => h.remez_order = parse_num(key, value)?,
        "aer_grid" => h.aer_grid = parse_list(key, value)?,
        "seed" => h.seed = parse_num(key, value)?,
        "encoder" => {
            h.encoder = EncoderKind::parse(value.trim()).ok_or_else(|| format!("unknown encoder {value:?}"))?
        }
        "attr_decoder" => {
            h.attr_decoder =
                AttrDecoderKind::parse(value.trim()).ok_or_else(|| format!("unknown attr_decoder {value:?}"))?
        }
        _ => return Err(format!("unknown key {key:?}")),
    }
    Ok(())
}

/// Sets a grid axis value, rejecting fractional values for integer fields.
pub fn set_axis(h: &mut HyperParams, axis: &str, value: f64) -> Result<(), String> {
    if !GRID_AXES.contains(&axis) {
        return Err(format!("{axis:?} cannot be a grid axis"));
    }
    set_hyper(h, axis, &format_f64(value))
}

fn format_f64(v: f64) -> String {
    format!("{v}")
}

fn join<T: std::fmt::Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

/// `key = value` lines for every hyperparameter.
pub fn hyper_lines(h: &HyperParams) -> Vec<(&'static str, String)> {
    vec![
        ("lambda_d", format_f64(h.lambda_d)),
        ("lambda_n", format_f64(h.lambda_n)),
        ("lambda_x", format_f64(h.lambda_x)),
        ("bins", h.bins.to_string()),
        ("noise_scale", format_f64(h.noise_scale)),
        ("sample_size", h.sample_size.to_string()),
        ("depth", h.depth.to_string()),
        ("hidden", h.hidden.to_string()),
        ("lr", format_f64(h.lr)),
        ("epochs", h.epochs.to_string()),
        ("cov_eps", format_f64(h.cov_eps)),
        ("remez_order", h.remez_order.to_string()),
        ("aer_grid", join(&h.aer_grid)),
        ("seed", h.seed.to_string()),
        ("encoder", h.encoder.as_str().to_string()),
        ("attr_decoder", h.attr_decoder.as_str().to_string()),
    ]
}

impl RunConfig {
    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "dataset" => self.dataset = Some(PathBuf::from(value)),
            "out" => self.out = Some(PathBuf::from(value)),
            "repeat" => self.repeat = Some(parse_num(key, value)?),
            "seeds" => self.seeds = Some(parse_list(key, value)?),
            _ if key.starts_with("grid.") => {
                let axis = &key["grid.".len()..];
                if !GRID_AXES.contains(&axis) {
                    return Err(format!("{axis:?} cannot be a grid axis"));
                }
                let values: Vec<f64> = parse_list(key, value)?;
                if values.is_empty() {
                    return Err(format!("grid axis {axis} is empty"));
                }
                for &v in &values {
                    set_axis(&mut HyperParams::default(), axis, v)?;
                }
                match self.grid.iter_mut().find(|(a, _)| a == axis) {
                    Some(entry) => entry.1 = values,
                    None => self.grid.push((axis.to_string(), values)),
                }
            }
            _ => set_hyper(&mut self.hyper, key, value)?,
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(line_no, format!("expected `key = value`, got {line:?}")))?;
            cfg.set(key.trim(), value.trim()).map_err(|m| usage(line_no, m))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(d) = &self.dataset {
            writeln!(s, "dataset = {}", d.display()).unwrap();
        }
        if let Some(o) = &self.out {
            writeln!(s, "out = {}", o.display()).unwrap();
        }
        for (k, v) in hyper_lines(&self.hyper) {
            writeln!(s, "{k} = {v}").unwrap();
        }
        if let Some(r) = self.repeat {
            writeln!(s, "repeat = {r}").unwrap();
        }
        if let Some(seeds) = &self.seeds {
            writeln!(s, "seeds = {}", join(seeds)).unwrap();
        }
        for (axis, values) in &self.grid {
            writeln!(s, "grid.{axis} = {}", join(values)).unwrap();
        }
        s
    }

    /// Checks hyperparameters and the repeat/seed-list agreement.
    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if let (Some(r), Some(seeds)) = (self.repeat, &self.seeds) {
            if r != seeds.len() {
                return Err(CliError::Usage(format!(
                    "repeat = {r} but {} seeds listed",
                    seeds.len()
                )));
            }
        }
        if self.repeat == Some(0) || self.seeds.as_ref().is_some_and(|s| s.is_empty()) {
            return Err(CliError::Usage("at least one run is required".into()));
        }
        Ok(())
    }

    /// Seeds to run: the explicit list, else `seed, seed+1, …` for `repeat` runs.
    pub fn run_seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (0..self.repeat.unwrap_or(1) as u64)
                .map(|i| self.hyper.seed + i)
                .collect(),
        }
    }
}
