//! Run settings shared by every command.
//!
//! Settings come from a `key = value` file and from command-line flags with
//! the same names; a flag overrides the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cctc_core::ctc::ExtremeCount;
use cctc_core::delay::PCCF_THRESHOLDS;
use cctc_core::simulate::{Method, ModelId, NoiseFamily};
use cctc_core::ImpactParams;
use serde::Serialize;

use crate::error::{CliError, Result};

/// Every recognised key, in the order they are documented.
pub const KEYS: &[&str] = &[
    "input",
    "columns",
    "time-column",
    "flip",
    "p",
    "p-range",
    "k",
    "alpha",
    "weights",
    "threshold-cbar",
    "blocks",
    "b",
    "shift",
    "seed",
    "level",
    "variant",
    "out",
    "model",
    "models",
    "noise",
    "n",
    "reps",
    "methods",
    "threads",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightSpec {
    Uniform,
    Optimize,
    Explicit(Vec<f64>),
}

/// Statistic used by `test` and `profile`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Compound,
    Max,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Estimator::Compound => "compound",
            Estimator::Max => "max",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub columns: Option<Vec<String>>,
    pub time_column: Option<String>,
    pub flip: Vec<String>,
    pub p: usize,
    pub p_range: (usize, usize),
    pub k: ExtremeCount,
    pub alpha: f64,
    pub weights: WeightSpec,
    pub threshold_cbar: Vec<f64>,
    pub blocks: Option<usize>,
    pub b: usize,
    pub shift: Option<usize>,
    pub seed: u64,
    pub level: f64,
    pub variant: Estimator,
    pub out: PathBuf,
    pub model: Option<ModelId>,
    pub models: Vec<ModelId>,
    /// `None` means every family for `benchmark` and Student-t for `simulate`.
    pub noise: Option<Vec<NoiseFamily>>,
    pub n: usize,
    pub reps: usize,
    pub methods: Vec<Method>,
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            columns: None,
            time_column: None,
            flip: Vec::new(),
            p: 3,
            p_range: (1, 10),
            k: ExtremeCount::Auto,
            alpha: 1e4,
            weights: WeightSpec::Uniform,
            threshold_cbar: PCCF_THRESHOLDS.to_vec(),
            blocks: None,
            b: 100,
            shift: None,
            seed: 0,
            level: 0.05,
            variant: Estimator::Compound,
            out: PathBuf::from("cctc-out"),
            model: None,
            models: ModelId::BIVARIATE.to_vec(),
            noise: None,
            n: 1000,
            reps: 100,
            methods: vec![Method::CompoundCtcBootstrap],
            threads: None,
        }
    }
}

/// Parses a `key = value` file. Blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str, origin: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::usage(format!("{origin}:{}: expected 'key = value', got '{raw}'", i + 1))
        })?;
        let key = key.trim().trim_start_matches("--").to_string();
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::usage(format!("{origin}:{}: unknown key '{key}'", i + 1)));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config_text(&text, &path.display().to_string())
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn number<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| CliError::usage(format!("--{key}: cannot parse '{v}'")))
}

fn parse_all<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items = list(v);
    if items.is_empty() {
        return Err(CliError::usage(format!("--{key}: empty list")));
    }
    items
        .iter()
        .map(|s| s.parse().map_err(|e: T::Err| CliError::usage(format!("--{key}: {e}"))))
        .collect()
}

fn parse_range(v: &str) -> Result<(usize, usize)> {
    let (lo, hi) = match v.split_once("..") {
        Some((lo, hi)) => (lo, hi.trim_start_matches('=')),
        None => v.split_once(':').or_else(|| v.split_once('-')).unwrap_or((v, v)),
    };
    let lo: usize = number("p-range", lo)?;
    let hi: usize = number("p-range", hi)?;
    if lo == 0 || lo > hi {
        return Err(CliError::usage(format!("--p-range: empty lag range '{v}'")));
    }
    Ok((lo, hi))
}

impl RunConfig {
    /// Builds a config from settings, applying defaults for absent keys.
    pub fn from_settings(settings: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = RunConfig::default();
        for (key, v) in settings {
            match key.as_str() {
                "input" => c.input = Some(PathBuf::from(v)),
                "columns" => c.columns = Some(list(v)),
                "time-column" => c.time_column = Some(v.clone()),
                "flip" => c.flip = list(v),
                "p" => c.p = number(key, v)?,
                "p-range" => c.p_range = parse_range(v)?,
                "k" => {
                    c.k = if v.eq_ignore_ascii_case("auto") {
                        ExtremeCount::Auto
                    } else {
                        ExtremeCount::Fixed(number(key, v)?)
                    }
                }
                "alpha" => c.alpha = number(key, v)?,
                "weights" => {
                    c.weights = match v.to_ascii_lowercase().as_str() {
                        "uniform" => WeightSpec::Uniform,
                        "optimize" => WeightSpec::Optimize,
                        _ => WeightSpec::Explicit(parse_all(key, v)?),
                    }
                }
                "threshold-cbar" => c.threshold_cbar = parse_all(key, v)?,
                "blocks" => c.blocks = Some(number(key, v)?),
                "b" => c.b = number(key, v)?,
                "shift" => c.shift = Some(number(key, v)?),
                "seed" => c.seed = number(key, v)?,
                "level" => c.level = number(key, v)?,
                "variant" => {
                    c.variant = match v.to_ascii_lowercase().as_str() {
                        "compound" => Estimator::Compound,
                        "max" => Estimator::Max,
                        _ => {
                            return Err(CliError::usage(format!(
                                "--variant: unknown estimator '{v}'; valid: compound, max"
                            )))
                        }
                    }
                }
                "out" => c.out = PathBuf::from(v),
                "model" => c.model = Some(v.parse().map_err(CliError::from)?),
                "models" => c.models = parse_all(key, v)?,
                "noise" => c.noise = Some(parse_all(key, v)?),
                "n" => c.n = number(key, v)?,
                "reps" => c.reps = number(key, v)?,
                "methods" => c.methods = parse_all(key, v)?,
                "threads" => c.threads = Some(number(key, v)?),
                other => return Err(CliError::usage(format!("unknown setting '{other}'"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(CliError::usage("--p must be positive"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(CliError::usage(format!("--alpha must be positive, got {}", self.alpha)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CliError::usage(format!("--level must lie in (0,1), got {}", self.level)));
        }
        if self.b == 0 {
            return Err(CliError::usage("--b must be positive"));
        }
        if self.blocks == Some(0) {
            return Err(CliError::usage("--blocks must be positive"));
        }
        if let Some(c) = self.threshold_cbar.iter().find(|c| !(-1.0..=1.0).contains(*c)) {
            return Err(CliError::usage(format!("--threshold-cbar values must lie in [-1,1], got {c}")));
        }
        if let WeightSpec::Explicit(w) = &self.weights {
            if w.len() != self.p {
                return Err(CliError::usage(format!(
                    "--weights has {} entries but --p is {}",
                    w.len(),
                    self.p
                )));
            }
            ImpactParams::new(self.alpha, w.clone())?;
        }
        if self.threads == Some(0) {
            return Err(CliError::usage("--threads must be positive"));
        }
        Ok(())
    }
}

/// Overlays `flags` on `file`.
pub fn merge(
    file: BTreeMap<String, String>,
    flags: BTreeMap<String, String>,
) -> BTreeMap<String, String> {
    let mut out = file;
    out.extend(flags);
    out
}
