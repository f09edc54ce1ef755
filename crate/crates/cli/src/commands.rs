//! The `test`, `profile`, `simulate` and `benchmark` commands.

use std::path::{Path, PathBuf};

use cctc_core::bootstrap::{default_block_len, mbb_test, BootstrapConfig, Statistic};
use cctc_core::delay::{cross_extremogram, pccf, select_delay, LagProfile};
use cctc_core::rng::derive_seed;
use cctc_core::simulate::{
    benchmark_csv, benchmark_table, generate, run_benchmark, BenchmarkConfig, BenchmarkRow, ModelId,
    ModelSpec, NoiseFamily,
};
use cctc_core::weights::{optimize_weights, DeConfig};
use cctc_core::{ImpactParams, Series};
use serde::Serialize;

use crate::config::{Estimator, RunConfig, WeightSpec};
use crate::error::{CliError, Result};
use crate::ingest::{cmd_ingest, fmt_real, series_csv, write_file, Ingested, RejectedRow, Schema};

/// Quantile defining exceedances in the extremogram column of a profile.
pub const EXTREMOGRAM_QUANTILE: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairResult {
    pub cause: String,
    pub effect: String,
    pub variant: &'static str,
    pub p: usize,
    pub k: usize,
    pub alpha: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub coefficient: f64,
    pub p_value: f64,
    pub decision: &'static str,
    pub b: usize,
    pub block_len: usize,
    pub shift: usize,
    pub level: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub cause: String,
    pub effect: String,
    pub p: Option<usize>,
    pub stage: &'static str,
    pub exit_code: i32,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub config: RunConfig,
    pub rows: usize,
    pub rejected_rows: Vec<RejectedRow>,
    pub results: Vec<PairResult>,
    pub failures: Vec<Failure>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub cause: String,
    pub effect: String,
    pub p: usize,
    pub coefficient: Option<f64>,
    pub p_value: Option<f64>,
    pub pccf: Option<f64>,
    pub extremogram: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayChoice {
    pub cause: String,
    pub effect: String,
    pub cbar: f64,
    pub selected_p: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileReport {
    pub config: RunConfig,
    pub rows: usize,
    pub rejected_rows: Vec<RejectedRow>,
    pub curves: Vec<ProfilePoint>,
    pub delays: Vec<DelayChoice>,
    pub failures: Vec<Failure>,
}

pub fn schema(cfg: &RunConfig) -> Schema {
    Schema {
        columns: cfg.columns.clone(),
        time_column: cfg.time_column.clone(),
        flip: cfg.flip.clone(),
    }
}

/// Ingests `--input` with the configured schema.
pub fn load(cfg: &RunConfig) -> Result<Ingested> {
    let path = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::usage("--input is required"))?;
    cmd_ingest(path, &schema(cfg))
}

fn pairs(series: &[Series]) -> Result<Vec<(usize, usize)>> {
    if series.len() < 2 {
        return Err(CliError::usage(format!(
            "at least two series are required, got {}",
            series.len()
        )));
    }
    let m = series.len();
    Ok((0..m)
        .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect())
}

/// Block length used when `--blocks` is absent: `ceil(n^(1/3))`, raised to
/// `shift + 1` when needed.
pub fn block_len_for(cfg: &RunConfig, n: usize, shift: usize) -> usize {
    cfg.blocks
        .unwrap_or_else(|| default_block_len(n).max(shift + 1))
}

/// Estimator plus bootstrap test of `x -> y` at delay `p`.
pub fn test_pair(cfg: &RunConfig, x: &Series, y: &Series, p: usize, seed: u64) -> Result<PairResult> {
    let (statistic, weights) = match cfg.variant {
        Estimator::Max => (Statistic::Max, None),
        Estimator::Compound => {
            let w = match &cfg.weights {
                WeightSpec::Uniform => ImpactParams::uniform(p, cfg.alpha)?.weights().to_vec(),
                WeightSpec::Explicit(w) if w.len() == p => w.clone(),
                WeightSpec::Explicit(w) => {
                    return Err(CliError::usage(format!(
                        "{} weights given for delay {p}",
                        w.len()
                    )))
                }
                WeightSpec::Optimize => {
                    optimize_weights(x, y, p, cfg.k, cfg.alpha, &DeConfig::with_seed(seed))?.weights
                }
            };
            (Statistic::Compound(ImpactParams::new(cfg.alpha, w.clone())?), Some(w))
        }
    };
    let shift = cfg.shift.unwrap_or(p);
    let bcfg = BootstrapConfig {
        b: cfg.b,
        block_len: Some(block_len_for(cfg, x.len(), shift)),
        shift: Some(shift),
        seed,
        level: cfg.level,
    };
    let res = mbb_test(x, y, p, cfg.k, &statistic, &bcfg)?;
    Ok(PairResult {
        cause: x.name().to_string(),
        effect: y.name().to_string(),
        variant: cfg.variant.as_str(),
        p,
        k: res.observed.k,
        alpha: weights.as_ref().map(|_| cfg.alpha),
        weights,
        coefficient: res.observed.value,
        p_value: res.p_value,
        decision: if res.reject { "reject" } else { "accept" },
        b: res.config.b,
        block_len: res.config.block_len,
        shift: res.config.shift,
        level: res.config.level,
        seed,
    })
}

fn failure(cause: &Series, effect: &Series, p: Option<usize>, stage: &'static str, e: &CliError) -> Failure {
    Failure {
        cause: cause.name().to_string(),
        effect: effect.name().to_string(),
        p,
        stage,
        exit_code: e.exit_code(),
        error: e.to_string(),
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)
        .map_err(|e| CliError::data(e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| CliError::data(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

fn opt_real(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

/// Writes the failure manifest and turns failures into an error.
fn finish(out: &Path, name: &str, failures: &[Failure], total: usize) -> Result<()> {
    if failures.is_empty() {
        return Ok(());
    }
    let manifest = out.join(name);
    write_file(&manifest, &to_json(&failures))?;
    Err(CliError::Partial {
        failed: failures.len(),
        total,
        manifest: manifest.display().to_string(),
        code: failures[0].exit_code,
    })
}

/// Tests every ordered pair of ingested series.
///
/// Writes `results.csv` and `results.json` to `--out`; failed pairs go to
/// `failures.json` and make the call return [`CliError::Partial`].
pub fn cmd_test(cfg: &RunConfig) -> Result<TestReport> {
    let data = load(cfg)?;
    let series = &data.series;
    let pairs = pairs(series)?;
    let mut results = Vec::new();
    let mut failures = Vec::new();
    for &(i, j) in &pairs {
        let seed = derive_seed(&[cfg.seed, i as u64, j as u64, cfg.p as u64]);
        match test_pair(cfg, &series[i], &series[j], cfg.p, seed) {
            Ok(r) => results.push(r),
            Err(e) => failures.push(failure(&series[i], &series[j], Some(cfg.p), "test", &e)),
        }
    }
    let report = TestReport {
        config: cfg.clone(),
        rows: series[0].len(),
        rejected_rows: data.rejected,
        results,
        failures,
    };
    let csv = csv_text(
        &[
            "cause", "effect", "variant", "p", "k", "alpha", "weights", "coefficient", "p_value",
            "decision", "b", "block_len", "shift", "level", "seed",
        ],
        report.results.iter().map(|r| {
            vec![
                r.cause.clone(),
                r.effect.clone(),
                r.variant.to_string(),
                r.p.to_string(),
                r.k.to_string(),
                opt_real(r.alpha),
                r.weights
                    .as_ref()
                    .map(|w| w.iter().map(|v| fmt_real(*v)).collect::<Vec<_>>().join(";"))
                    .unwrap_or_default(),
                fmt_real(r.coefficient),
                fmt_real(r.p_value),
                r.decision.to_string(),
                r.b.to_string(),
                r.block_len.to_string(),
                r.shift.to_string(),
                fmt_real(r.level),
                r.seed.to_string(),
            ]
        }),
    )?;
    write_file(&cfg.out.join("results.csv"), &csv)?;
    write_file(&cfg.out.join("results.json"), &to_json(&report))?;
    finish(&cfg.out, "failures.json", &report.failures, pairs.len())?;
    Ok(report)
}

fn lag_value(profile: &Option<LagProfile>, p: usize) -> Option<f64> {
    profile.as_ref().and_then(|pr| pr.at(p))
}

/// Per-lag coefficient, p-value, PCCF and extremogram curves for every
/// ordered pair, plus the PCCF-selected delay for each threshold.
///
/// Writes `profile.csv`, `delays.csv` and `profile.json` to `--out`.
pub fn cmd_profile(cfg: &RunConfig) -> Result<ProfileReport> {
    let (lo, hi) = cfg.p_range;
    if lo == 0 || lo > hi {
        return Err(CliError::usage("empty lag range"));
    }
    if let WeightSpec::Explicit(w) = &cfg.weights {
        if lo != hi || w.len() != lo {
            return Err(CliError::usage(
                "explicit weights need a single-lag range matching their length",
            ));
        }
    }
    let data = load(cfg)?;
    let series = &data.series;
    let pairs = pairs(series)?;
    let mut curves = Vec::new();
    let mut delays = Vec::new();
    let mut failures = Vec::new();
    let mut total = 0;
    for &(i, j) in &pairs {
        let (x, y) = (&series[i], &series[j]);
        total += 2;
        let pc = pccf(x, y, hi)
            .map_err(|e| failures.push(failure(x, y, None, "pccf", &e.into())))
            .ok();
        let ext = cross_extremogram(x, y, hi, EXTREMOGRAM_QUANTILE)
            .map_err(|e| failures.push(failure(x, y, None, "extremogram", &e.into())))
            .ok();
        for p in lo..=hi {
            total += 1;
            let seed = derive_seed(&[cfg.seed, i as u64, j as u64, p as u64]);
            let (coefficient, p_value) = match test_pair(cfg, x, y, p, seed) {
                Ok(r) => (Some(r.coefficient), Some(r.p_value)),
                Err(e) => {
                    failures.push(failure(x, y, Some(p), "test", &e));
                    (None, None)
                }
            };
            curves.push(ProfilePoint {
                cause: x.name().to_string(),
                effect: y.name().to_string(),
                p,
                coefficient,
                p_value,
                pccf: lag_value(&pc, p),
                extremogram: lag_value(&ext, p),
            });
        }
        for &cbar in &cfg.threshold_cbar {
            delays.push(DelayChoice {
                cause: x.name().to_string(),
                effect: y.name().to_string(),
                cbar,
                selected_p: pc.as_ref().and_then(|pr| select_delay(pr, cbar).ok()),
            });
        }
    }
    let report = ProfileReport {
        config: cfg.clone(),
        rows: series[0].len(),
        rejected_rows: data.rejected,
        curves,
        delays,
        failures,
    };
    let profile = csv_text(
        &["cause", "effect", "p", "coefficient", "p_value", "pccf", "extremogram"],
        report.curves.iter().map(|c| {
            vec![
                c.cause.clone(),
                c.effect.clone(),
                c.p.to_string(),
                opt_real(c.coefficient),
                opt_real(c.p_value),
                opt_real(c.pccf),
                opt_real(c.extremogram),
            ]
        }),
    )?;
    let delays = csv_text(
        &["cause", "effect", "cbar", "selected_p"],
        report.delays.iter().map(|d| {
            vec![
                d.cause.clone(),
                d.effect.clone(),
                fmt_real(d.cbar),
                d.selected_p.map(|p| p.to_string()).unwrap_or_default(),
            ]
        }),
    )?;
    write_file(&cfg.out.join("profile.csv"), &profile)?;
    write_file(&cfg.out.join("delays.csv"), &delays)?;
    write_file(&cfg.out.join("profile.json"), &to_json(&report))?;
    finish(&cfg.out, "failures.json", &report.failures, total)?;
    Ok(report)
}

/// Simulates one path and writes it to `path` in the ingestion format.
pub fn cmd_simulate(spec: &ModelSpec, seed: u64, path: &Path) -> Result<Vec<Series>> {
    let series = generate(spec, seed)?;
    write_file(path, &series_csv(&series))?;
    Ok(series)
}

/// Resolves `simulate` settings into a spec and output file.
pub fn simulate_target(cfg: &RunConfig) -> Result<(ModelSpec, PathBuf)> {
    let model = cfg.model.ok_or_else(|| {
        let valid: Vec<&str> = ModelId::all().map(ModelId::as_str).collect();
        CliError::usage(format!("--model is required; valid: {}", valid.join(", ")))
    })?;
    let family = match cfg.noise.as_deref() {
        None => NoiseFamily::StudentT,
        Some([one]) => *one,
        Some(_) => return Err(CliError::usage("simulate takes a single --noise family")),
    };
    let path = cfg
        .out
        .join(format!("{}_{}.csv", model.as_str(), family.as_str()));
    Ok((ModelSpec::new(model, family, cfg.n), path))
}

/// Runs the benchmark and writes `benchmark.csv` and `benchmark.txt`.
pub fn cmd_benchmark(cfg: &RunConfig) -> Result<Vec<BenchmarkRow>> {
    let bcfg = BenchmarkConfig {
        n: cfg.n,
        p: cfg.p,
        k: cfg.k,
        alpha: cfg.alpha,
        b: cfg.b,
        block_len: cfg.blocks,
        shift: cfg.shift,
        level: cfg.level,
        permutations: cfg.b,
    };
    let noises = cfg.noise.clone().unwrap_or_else(|| NoiseFamily::ALL.to_vec());
    let rows = run_benchmark(
        &cfg.models,
        &noises,
        cfg.reps,
        &cfg.methods,
        cfg.seed,
        cfg.threads,
        &bcfg,
    );
    let rows = match rows {
        Ok(rows) => rows,
        Err(e) => {
            let e = CliError::from(e);
            #[derive(Serialize)]
            struct Manifest<'a> {
                config: &'a RunConfig,
                exit_code: i32,
                error: String,
            }
            let manifest = Manifest {
                config: cfg,
                exit_code: e.exit_code(),
                error: e.to_string(),
            };
            write_file(&cfg.out.join("failures.json"), &to_json(&manifest))?;
            return Err(e);
        }
    };
    write_file(&cfg.out.join("benchmark.csv"), &benchmark_csv(&rows))?;
    write_file(&cfg.out.join("benchmark.txt"), &benchmark_table(&rows))?;
    Ok(rows)
}
