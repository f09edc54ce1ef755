//! Benchmark model zoo.
//!
//! Nine bivariate models (`M1`..`M9`, some with a hidden confounder `Z`) and
//! six models with a bivariate effect (`S1`..`S6`), each driven by one of
//! three innovation families. Every model shares a true extremal delay of 3.
//!
//! Innovations are drawn in the fixed order (first, second, third series) at
//! every step whether or not a model uses the third one, so `S1`..`S6`
//! reproduce the `X` and `Y` paths of `M1`..`M6` under the same seed.

mod benchmark;
mod methods;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use rand::SeedableRng;
use rand_distr::{Distribution, Pareto, Poisson, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{CtcError, Result};
use crate::rng::StreamRng;
use crate::series::{kth_largest, Series};

pub use benchmark::{
    benchmark_csv, benchmark_table, run_benchmark, BenchmarkConfig, BenchmarkRow, Method,
};
pub use methods::{granger_test, gpd_permutation_test, hard_threshold_decision, TestDecision};

/// Default discarded warm-up length.
pub const BURN_IN: usize = 500;
/// Length of the pilot run that pins the threshold of `M7`/`M9`.
pub const PILOT_LEN: usize = 100_000;
const PILOT_SEED: u64 = 0x5EED_0F_7417;

/// Innovation distribution of one series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseDist {
    StudentT { df: f64 },
    Pareto { shape: f64, scale: f64 },
    Poisson { rate: f64 },
}

impl NoiseDist {
    fn validate(self) -> Result<Self> {
        let ok = match self {
            NoiseDist::StudentT { df } => df > 0.0,
            NoiseDist::Pareto { shape, scale } => shape > 0.0 && scale > 0.0,
            NoiseDist::Poisson { rate } => rate > 0.0,
        };
        if ok {
            Ok(self)
        } else {
            Err(CtcError::usage(format!("noise parameters must be positive: {self:?}")))
        }
    }
}

enum Sampler {
    T(StudentT<f64>),
    Pareto(Pareto<f64>),
    Poisson(Poisson<f64>),
}

impl Sampler {
    fn new(d: NoiseDist) -> Result<Self> {
        let err = |e: &dyn fmt::Display| CtcError::usage(format!("invalid noise {d:?}: {e}"));
        Ok(match d.validate()? {
            NoiseDist::StudentT { df } => Sampler::T(StudentT::new(df).map_err(|e| err(&e))?),
            NoiseDist::Pareto { shape, scale } => {
                Sampler::Pareto(Pareto::new(scale, shape).map_err(|e| err(&e))?)
            }
            NoiseDist::Poisson { rate } => Sampler::Poisson(Poisson::new(rate).map_err(|e| err(&e))?),
        })
    }

    fn draw(&self, rng: &mut StreamRng) -> f64 {
        match self {
            Sampler::T(d) => d.sample(rng),
            Sampler::Pareto(d) => d.sample(rng),
            Sampler::Poisson(d) => d.sample(rng),
        }
    }
}

/// Innovation family shared by all series of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NoiseFamily {
    StudentT,
    Pareto,
    Poisson,
}

impl NoiseFamily {
    pub const ALL: [NoiseFamily; 3] = [NoiseFamily::StudentT, NoiseFamily::Pareto, NoiseFamily::Poisson];

    /// Per-series distributions: heavy `t(2)` on the second series, `t(10)` elsewhere;
    /// standard Pareto; Poisson with rate 3.
    pub fn dists(self) -> [NoiseDist; 3] {
        match self {
            NoiseFamily::StudentT => [
                NoiseDist::StudentT { df: 10.0 },
                NoiseDist::StudentT { df: 2.0 },
                NoiseDist::StudentT { df: 10.0 },
            ],
            NoiseFamily::Pareto => [NoiseDist::Pareto { shape: 1.0, scale: 1.0 }; 3],
            NoiseFamily::Poisson => [NoiseDist::Poisson { rate: 3.0 }; 3],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseFamily::StudentT => "student-t",
            NoiseFamily::Pareto => "pareto",
            NoiseFamily::Poisson => "poisson",
        }
    }
}

impl fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NoiseFamily {
    type Err = CtcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "student-t" | "studentt" | "t" => Ok(NoiseFamily::StudentT),
            "pareto" => Ok(NoiseFamily::Pareto),
            "poisson" => Ok(NoiseFamily::Poisson),
            _ => Err(CtcError::usage(format!(
                "unknown noise family '{s}'; valid: student-t, pareto, poisson"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelId {
    M1,
    M2,
    M3,
    M4,
    M5,
    M6,
    M7,
    M8,
    M9,
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
}

impl ModelId {
    pub const BIVARIATE: [ModelId; 9] = [
        ModelId::M1,
        ModelId::M2,
        ModelId::M3,
        ModelId::M4,
        ModelId::M5,
        ModelId::M6,
        ModelId::M7,
        ModelId::M8,
        ModelId::M9,
    ];
    pub const MULTIVARIATE: [ModelId; 6] = [
        ModelId::S1,
        ModelId::S2,
        ModelId::S3,
        ModelId::S4,
        ModelId::S5,
        ModelId::S6,
    ];

    pub fn all() -> impl Iterator<Item = ModelId> {
        Self::BIVARIATE.into_iter().chain(Self::MULTIVARIATE)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::M1 => "M1",
            ModelId::M2 => "M2",
            ModelId::M3 => "M3",
            ModelId::M4 => "M4",
            ModelId::M5 => "M5",
            ModelId::M6 => "M6",
            ModelId::M7 => "M7",
            ModelId::M8 => "M8",
            ModelId::M9 => "M9",
            ModelId::S1 => "S1",
            ModelId::S2 => "S2",
            ModelId::S3 => "S3",
            ModelId::S4 => "S4",
            ModelId::S5 => "S5",
            ModelId::S6 => "S6",
        }
    }

    pub fn is_multivariate(self) -> bool {
        Self::MULTIVARIATE.contains(&self)
    }

    pub fn is_thresholded(self) -> bool {
        matches!(self, ModelId::M7 | ModelId::M9)
    }

    pub fn has_confounder(self) -> bool {
        matches!(self, ModelId::M8 | ModelId::M9)
    }

    /// Names of the generated series.
    pub fn series_names(self) -> &'static [&'static str] {
        if self.is_multivariate() {
            &["X", "Y1", "Y2"]
        } else if self.has_confounder() {
            &["X", "Y", "Z"]
        } else {
            &["X", "Y"]
        }
    }

    /// Ground truth `(forward, backward)`.
    ///
    /// Bivariate models: forward is `X -> Y`, backward `Y -> X`. Models with a
    /// bivariate effect: forward is `X -> (Y1, Y2)`, backward `Y1 -> (X, Y2)`.
    pub fn truth(self) -> (bool, bool) {
        match self {
            ModelId::M1 | ModelId::S1 => (false, false),
            ModelId::M4 | ModelId::S4 => (true, true),
            _ => (true, false),
        }
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelId {
    type Err = CtcError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_uppercase();
        let t = t.strip_prefix("MODEL").unwrap_or(&t).trim_start_matches(['-', '_', ' ']);
        let t = match t.strip_prefix("S-") {
            Some(rest) => format!("S{rest}"),
            None if t.starts_with(|c: char| c.is_ascii_digit()) => format!("M{t}"),
            None => t.to_string(),
        };
        ModelId::all().find(|m| m.as_str() == t).ok_or_else(|| {
            let valid: Vec<&str> = ModelId::all().map(ModelId::as_str).collect();
            CtcError::usage(format!("unknown model '{s}'; valid: {}", valid.join(", ")))
        })
    }
}

/// A generative model with its innovations and sample length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: ModelId,
    pub family: NoiseFamily,
    pub noise: [NoiseDist; 3],
    pub n: usize,
    pub burn_in: usize,
    /// Stationary quantile of `X` used as threshold by `M7`/`M9`.
    pub u_x_quantile: f64,
}

impl ModelSpec {
    pub fn new(id: ModelId, family: NoiseFamily, n: usize) -> Self {
        ModelSpec {
            id,
            family,
            noise: family.dists(),
            n,
            burn_in: BURN_IN,
            u_x_quantile: 0.95,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(CtcError::usage("series length must be positive"));
        }
        if self.id.is_thresholded() && !(self.u_x_quantile > 0.0 && self.u_x_quantile < 1.0) {
            return Err(CtcError::usage("threshold quantile must lie in (0,1)"));
        }
        for d in self.noise {
            d.validate()?;
        }
        Ok(())
    }
}

#[inline]
fn lag(v: &[f64], t: usize, l: usize) -> f64 {
    if t >= l {
        v[t - l]
    } else {
        0.0
    }
}

#[inline]
fn excess_drive(x: f64, u: f64) -> f64 {
    if x > u {
        x.powf(0.75)
    } else {
        0.0
    }
}

/// Simulates `burn_in + n` steps and returns all three raw paths, burn-in included.
fn simulate_paths(spec: &ModelSpec, u_x: f64, rng: &mut StreamRng) -> Result<[Vec<f64>; 3]> {
    let total = spec.burn_in + spec.n;
    let samplers = [
        Sampler::new(spec.noise[0])?,
        Sampler::new(spec.noise[1])?,
        Sampler::new(spec.noise[2])?,
    ];
    let mut a = vec![0.0; total];
    let mut b = vec![0.0; total];
    let mut c = vec![0.0; total];
    for t in 0..total {
        let e = [samplers[0].draw(rng), samplers[1].draw(rng), samplers[2].draw(rng)];
        let (x, y, z) = (&a, &b, &c);
        let (nx, ny, nz) = match spec.id {
            ModelId::M1 => (e[0], e[1], 0.0),
            ModelId::M2 => (0.5 * lag(x, t, 1) + e[0], 0.5 * lag(x, t, 3) + e[1], 0.0),
            ModelId::M3 => (
                0.5 * lag(x, t, 1) + e[0],
                0.5 * lag(y, t, 1) + 0.5 * lag(x, t, 3) + e[1],
                0.0,
            ),
            ModelId::M4 => (
                0.25 * lag(x, t, 1) + 0.5 * lag(y, t, 3) + e[0],
                0.25 * lag(y, t, 1) + 0.5 * lag(x, t, 3) + e[1],
                0.0,
            ),
            ModelId::M5 => (
                0.5 * lag(x, t, 1) + e[0],
                0.25 * (lag(x, t, 1) + lag(x, t, 2) + lag(x, t, 3)) + e[1],
                0.0,
            ),
            ModelId::M6 => (
                0.5 * lag(x, t, 1) + e[0],
                0.5 * lag(y, t, 1) + 0.25 * (lag(x, t, 1) + lag(x, t, 2) + lag(x, t, 3)) + e[1],
                0.0,
            ),
            ModelId::M7 => (
                0.5 * lag(x, t, 1) + e[0],
                0.5 * lag(y, t, 1) + excess_drive(lag(x, t, 3), u_x) + e[1],
                0.0,
            ),
            ModelId::M8 => (
                0.5 * lag(x, t, 1) + 0.5 * lag(z, t, 2) + e[0],
                0.5 * lag(x, t, 3) + 0.5 * lag(z, t, 1) + e[1],
                0.5 * lag(z, t, 1) + e[2],
            ),
            ModelId::M9 => (
                0.5 * lag(x, t, 1) + 0.5 * lag(z, t, 2) + e[0],
                0.5 * lag(y, t, 1) + 0.5 * lag(z, t, 1) + excess_drive(lag(x, t, 3), u_x) + e[1],
                0.5 * lag(z, t, 1) + e[2],
            ),
            ModelId::S1 => (e[0], e[1], e[2]),
            ModelId::S2 => (
                0.5 * lag(x, t, 1) + e[0],
                0.5 * lag(x, t, 3) + e[1],
                0.5 * lag(x, t, 3) + e[2],
            ),
            ModelId::S3 => (
                0.5 * lag(x, t, 1) + e[0],
                0.5 * lag(y, t, 1) + 0.5 * lag(x, t, 3) + e[1],
                0.5 * lag(z, t, 1) + 0.5 * lag(x, t, 3) + e[2],
            ),
            ModelId::S4 => (
                0.25 * lag(x, t, 1) + 0.5 * lag(y, t, 3) + e[0],
                0.5 * lag(x, t, 3) + 0.25 * lag(y, t, 1) + e[1],
                0.5 * lag(x, t, 3) + 0.25 * lag(y, t, 3) + e[2],
            ),
            ModelId::S5 => (
                0.5 * lag(x, t, 1) + e[0],
                0.25 * (lag(x, t, 1) + lag(x, t, 2) + lag(x, t, 3)) + e[1],
                0.5 * lag(x, t, 3) + e[2],
            ),
            ModelId::S6 => {
                let drive = 0.25 * (lag(x, t, 1) + lag(x, t, 2) + lag(x, t, 3));
                (
                    0.5 * lag(x, t, 1) + e[0],
                    0.5 * lag(y, t, 1) + drive + e[1],
                    0.5 * lag(z, t, 1) + drive + e[2],
                )
            }
        };
        if !(nx.is_finite() && ny.is_finite() && nz.is_finite()) {
            return Err(CtcError::Simulation(format!(
                "{} left the finite range at step {t}",
                spec.id
            )));
        }
        a[t] = nx;
        b[t] = ny;
        c[t] = nz;
    }
    Ok([a, b, c])
}

type PilotKey = (ModelId, NoiseFamily, u64, [u64; 6]);

fn noise_bits(noise: &[NoiseDist; 3]) -> [u64; 6] {
    let mut out = [0u64; 6];
    for (i, d) in noise.iter().enumerate() {
        let (a, b) = match *d {
            NoiseDist::StudentT { df } => (df, 0.0),
            NoiseDist::Pareto { shape, scale } => (shape, scale),
            NoiseDist::Poisson { rate } => (rate, -1.0),
        };
        out[2 * i] = a.to_bits();
        out[2 * i + 1] = b.to_bits();
    }
    out
}

/// Threshold `u_X` for a thresholded model: the empirical `u_x_quantile` of
/// `X` over a long pilot run with a fixed seed. Cached per configuration.
pub fn pilot_threshold(spec: &ModelSpec) -> Result<f64> {
    static CACHE: OnceLock<Mutex<HashMap<PilotKey, f64>>> = OnceLock::new();
    let key = (spec.id, spec.family, spec.u_x_quantile.to_bits(), noise_bits(&spec.noise));
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&u) = cache.lock().unwrap().get(&key) {
        return Ok(u);
    }
    // X never depends on the threshold, so the pilot can run with it disabled.
    let pilot = ModelSpec {
        n: PILOT_LEN,
        burn_in: BURN_IN,
        ..spec.clone()
    };
    let mut rng = StreamRng::seed_from_u64(PILOT_SEED);
    let [x, _, _] = simulate_paths(&pilot, f64::INFINITY, &mut rng)?;
    let x = &x[BURN_IN..];
    let k = (((1.0 - spec.u_x_quantile) * x.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    let u = kth_largest(x, k)?;
    cache.lock().unwrap().insert(key, u);
    Ok(u)
}

/// Simulates the model and returns its observed series, burn-in discarded.
pub fn generate(spec: &ModelSpec, seed: u64) -> Result<Vec<Series>> {
    spec.validate()?;
    let u_x = if spec.id.is_thresholded() {
        pilot_threshold(spec)?
    } else {
        f64::INFINITY
    };
    let mut rng = StreamRng::seed_from_u64(seed);
    let paths = simulate_paths(spec, u_x, &mut rng)?;
    spec.id
        .series_names()
        .iter()
        .zip(paths)
        .map(|(name, path)| Series::new(*name, path[spec.burn_in..].to_vec()))
        .collect()
}
