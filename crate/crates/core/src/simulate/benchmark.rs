//! Monte Carlo comparison of causal-discovery methods on the model zoo.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::methods::{granger_test, gpd_permutation_test, hard_threshold_decision};
use super::{generate, ModelId, ModelSpec, NoiseFamily};
use crate::bootstrap::{mbb_test_multi, BootstrapConfig, Statistic};
use crate::ctc::ExtremeCount;
use crate::error::{CtcError, Result};
use crate::impact::ImpactParams;
use crate::rng;
use crate::series::Series;

/// Largest tolerated share of failed repetitions per table row.
pub const MAX_EXCLUDED_SHARE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    CompoundCtcBootstrap,
    MaxCtcBootstrap,
    MaxCtcHardThreshold,
    GrangerF,
    GpdPermutation,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::CompoundCtcBootstrap,
        Method::MaxCtcBootstrap,
        Method::MaxCtcHardThreshold,
        Method::GrangerF,
        Method::GpdPermutation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::CompoundCtcBootstrap => "compound",
            Method::MaxCtcBootstrap => "max-bootstrap",
            Method::MaxCtcHardThreshold => "max-threshold",
            Method::GrangerF => "granger",
            Method::GpdPermutation => "gpd-permutation",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Method::CompoundCtcBootstrap => "Compound CTC w. bootstrap",
            Method::MaxCtcBootstrap => "Max CTC w. bootstrap",
            Method::MaxCtcHardThreshold => "Max CTC w. threshold",
            Method::GrangerF => "Granger F-test",
            Method::GpdPermutation => "GPD permutation",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = CtcError;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let valid: Vec<&str> = Method::ALL.iter().map(|m| m.as_str()).collect();
                CtcError::usage(format!("unknown method '{s}'; valid: {}", valid.join(", ")))
            })
    }
}

/// Simulation and test settings shared by every cell of a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub n: usize,
    pub p: usize,
    pub k: ExtremeCount,
    pub alpha: f64,
    pub b: usize,
    pub block_len: Option<usize>,
    pub shift: Option<usize>,
    pub level: f64,
    /// Permutations for the GPD test.
    pub permutations: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            n: 1000,
            p: 3,
            k: ExtremeCount::Auto,
            alpha: 1e4,
            b: 100,
            block_len: None,
            shift: None,
            level: 0.05,
            permutations: 100,
        }
    }
}

/// Percent of correct decisions per direction for one (model, noise, method).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub model: ModelId,
    pub noise: NoiseFamily,
    pub method: Method,
    pub pct_correct_xy: f64,
    pub pct_correct_yx: f64,
    pub reps: usize,
    pub excluded_reps: usize,
}

type Decisions = Result<(bool, bool)>;

/// Decisions `(forward, backward)` of one method on one simulated sample.
fn decide(
    method: Method,
    model: ModelId,
    series: &[Series],
    cfg: &BenchmarkConfig,
    seed: u64,
) -> Decisions {
    let (x, y) = (&series[0], &series[1]);
    let bcfg = BootstrapConfig {
        b: cfg.b,
        block_len: cfg.block_len,
        shift: cfg.shift,
        seed,
        level: cfg.level,
    };
    let boot = |statistic: &Statistic| -> Decisions {
        let fwd = mbb_test_multi(x, std::slice::from_ref(y), cfg.p, cfg.k, statistic, &bcfg)?;
        let back = mbb_test_multi(y, std::slice::from_ref(x), cfg.p, cfg.k, statistic, &bcfg)?;
        Ok((fwd.reject, back.reject))
    };
    match method {
        Method::CompoundCtcBootstrap if model.is_multivariate() => {
            let statistic = Statistic::Compound(ImpactParams::uniform(2 * cfg.p, cfg.alpha)?);
            let fwd = mbb_test_multi(x, &series[1..], cfg.p, cfg.k, &statistic, &bcfg)?;
            let back_effects = [series[0].clone(), series[2].clone()];
            let back = mbb_test_multi(y, &back_effects, cfg.p, cfg.k, &statistic, &bcfg)?;
            Ok((fwd.reject, back.reject))
        }
        Method::CompoundCtcBootstrap => {
            boot(&Statistic::Compound(ImpactParams::uniform(cfg.p, cfg.alpha)?))
        }
        Method::MaxCtcBootstrap => boot(&Statistic::Max),
        Method::MaxCtcHardThreshold => Ok((
            hard_threshold_decision(x, y, cfg.p, cfg.k)?,
            hard_threshold_decision(y, x, cfg.p, cfg.k)?,
        )),
        Method::GrangerF => Ok((
            granger_test(x, y, cfg.p, cfg.level)?.reject,
            granger_test(y, x, cfg.p, cfg.level)?.reject,
        )),
        Method::GpdPermutation => Ok((
            gpd_permutation_test(x, y, cfg.p, cfg.k, cfg.permutations, seed, cfg.level)?.reject,
            gpd_permutation_test(y, x, cfg.p, cfg.k, cfg.permutations, seed ^ 1, cfg.level)?.reject,
        )),
    }
}

fn model_key(m: ModelId) -> u64 {
    ModelId::all().position(|x| x == m).unwrap_or(0) as u64
}

fn noise_key(f: NoiseFamily) -> u64 {
    NoiseFamily::ALL.iter().position(|&x| x == f).unwrap_or(0) as u64
}

/// Runs every (model, noise, method) cell for `reps` repetitions.
///
/// Repetition `r` of (model, noise) simulates one sample from the stream keyed
/// by `(seed, model, noise, r)`; all methods are applied to that same sample.
/// Failed repetitions are excluded per method and counted; a row with
/// `MAX_EXCLUDED_SHARE` or more failures aborts the run. Models with a
/// bivariate effect only support the compound method.
pub fn run_benchmark(
    models: &[ModelId],
    noises: &[NoiseFamily],
    reps: usize,
    methods: &[Method],
    seed: u64,
    parallelism: Option<usize>,
    cfg: &BenchmarkConfig,
) -> Result<Vec<BenchmarkRow>> {
    if reps == 0 || models.is_empty() || noises.is_empty() || methods.is_empty() {
        return Ok(Vec::new());
    }
    for &m in models {
        if m.is_multivariate() && methods.iter().any(|&x| x != Method::CompoundCtcBootstrap) {
            return Err(CtcError::usage(format!(
                "model {m} has a bivariate effect; only the compound method applies"
            )));
        }
    }
    let work = || -> Result<Vec<BenchmarkRow>> {
        let mut rows = Vec::new();
        for &model in models {
            for &noise in noises {
                let spec = ModelSpec::new(model, noise, cfg.n);
                let outcomes: Vec<Vec<Decisions>> = (0..reps)
                    .into_par_iter()
                    .map(|r| {
                        let mut key = rng::keyed(&[seed, model_key(model), noise_key(noise), r as u64]);
                        let sim_seed: u64 = key.random();
                        let test_seed: u64 = key.random();
                        match generate(&spec, sim_seed) {
                            Ok(series) => methods
                                .iter()
                                .map(|&m| decide(m, model, &series, cfg, test_seed))
                                .collect(),
                            Err(e) => methods.iter().map(|_| Err(e.clone())).collect(),
                        }
                    })
                    .collect();
                let (truth_xy, truth_yx) = model.truth();
                for (mi, &method) in methods.iter().enumerate() {
                    let (mut ok_xy, mut ok_yx, mut excluded) = (0usize, 0usize, 0usize);
                    let mut first_error = None;
                    for rep in &outcomes {
                        match &rep[mi] {
                            Ok((xy, yx)) => {
                                ok_xy += usize::from(*xy == truth_xy);
                                ok_yx += usize::from(*yx == truth_yx);
                            }
                            Err(e) => {
                                excluded += 1;
                                first_error.get_or_insert_with(|| e.clone());
                            }
                        }
                    }
                    if excluded as f64 >= MAX_EXCLUDED_SHARE * reps as f64 {
                        return Err(first_error.unwrap_or_else(|| {
                            CtcError::Degenerate("too many failed repetitions".into())
                        }));
                    }
                    let used = (reps - excluded) as f64;
                    rows.push(BenchmarkRow {
                        model,
                        noise,
                        method,
                        pct_correct_xy: 100.0 * ok_xy as f64 / used,
                        pct_correct_yx: 100.0 * ok_yx as f64 / used,
                        reps,
                        excluded_reps: excluded,
                    });
                }
            }
        }
        Ok(rows)
    };
    match parallelism {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| CtcError::usage(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// CSV with one line per (row, direction).
pub fn benchmark_csv(rows: &[BenchmarkRow]) -> String {
    let mut out = String::from("model,noise,method,direction,pct_correct,reps,excluded_reps\n");
    for r in rows {
        let (fwd, back) = if r.model.is_multivariate() {
            ("X->Y1+Y2", "Y1->X+Y2")
        } else {
            ("X->Y", "Y->X")
        };
        for (dir, pct) in [(fwd, r.pct_correct_xy), (back, r.pct_correct_yx)] {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.16e},{},{}",
                r.model, r.noise, r.method, dir, pct, r.reps, r.excluded_reps
            );
        }
    }
    out
}

/// Aligned text table: one line per (model, noise), two columns per method.
pub fn benchmark_table(rows: &[BenchmarkRow]) -> String {
    let mut methods: Vec<Method> = Vec::new();
    let mut keys: Vec<(ModelId, NoiseFamily)> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
        if !keys.contains(&(r.model, r.noise)) {
            keys.push((r.model, r.noise));
        }
    }
    let cell = 28;
    let mut out = String::new();
    let _ = write!(out, "{:<6}{:<11}", "", "");
    for m in &methods {
        let _ = write!(out, "| {:^w$}", m.title(), w = cell - 2);
    }
    out.push('\n');
    let _ = write!(out, "{:<6}{:<11}", "Model", "Noise");
    for _ in &methods {
        let _ = write!(out, "| {:^12}{:^12}  ", "fwd", "back");
    }
    out.push('\n');
    out.push_str(&"-".repeat(17 + cell * methods.len()));
    out.push('\n');
    for (model, noise) in keys {
        let _ = write!(out, "{:<6}{:<11}", model.as_str(), noise.as_str());
        for m in &methods {
            match rows.iter().find(|r| r.model == model && r.noise == noise && r.method == *m) {
                Some(r) => {
                    let _ = write!(
                        out,
                        "| {:^12}{:^12}  ",
                        format!("{:.0}%", r.pct_correct_xy),
                        format!("{:.0}%", r.pct_correct_yx)
                    );
                }
                None => {
                    let _ = write!(out, "| {:^12}{:^12}  ", "-", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}
