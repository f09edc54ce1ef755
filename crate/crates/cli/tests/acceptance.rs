//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::collections::BTreeMap;
use std::time::Instant;

use cctc_cli::commands::{cmd_benchmark, cmd_profile, load};
use cctc_cli::config::RunConfig;
use cctc_cli::ingest::fmt_real;
use cctc_core::bootstrap::{mbb_test, BootstrapConfig, Statistic};
use cctc_core::ctc::{
    compound_ctc, conditional_compound_ctc, max_ctc, multivariate_compound_ctc, ExtremeCount,
};
use cctc_core::rng::{keyed, StreamRng};
use cctc_core::simulate::{
    generate, BenchmarkRow, Method, ModelId, ModelSpec, NoiseFamily,
};
use cctc_core::weights::{optimize_weights, DeConfig};
use cctc_core::{ImpactParams, Series};
use rand::Rng;
use tempfile::TempDir;

const SEED: u64 = 20_240_601;
const TOL_PP: f64 = 8.0;

type Outcome = (bool, String);

fn settings(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

fn benchmark(models: &str, noise: &str) -> Vec<BenchmarkRow> {
    let dir = TempDir::new().unwrap();
    let cfg = RunConfig::from_settings(&settings(&[
        ("models", models.into()),
        ("noise", noise.into()),
        ("reps", "100".into()),
        ("methods", "compound".into()),
        ("n", "1000".into()),
        ("p", "3".into()),
        ("k", "auto".into()),
        ("alpha", "1e4".into()),
        ("b", "100".into()),
        ("seed", SEED.to_string()),
        ("out", dir.path().display().to_string()),
    ]))
    .unwrap();
    cmd_benchmark(&cfg).expect("benchmark runs")
}

/// Compares benchmark cells with reference percentages.
fn cells(rows: &[BenchmarkRow], want: &[(ModelId, f64, f64)]) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for &(id, fwd, back) in want {
        let row = rows.iter().find(|r| r.model == id).expect("row present");
        let good = (row.pct_correct_xy - fwd).abs() <= TOL_PP && (row.pct_correct_yx - back).abs() <= TOL_PP;
        ok &= good;
        parts.push(format!(
            "{id} {:.0}/{:.0} (ref {fwd:.0}/{back:.0}){}",
            row.pct_correct_xy,
            row.pct_correct_yx,
            if good { "" } else { " OUT" }
        ));
    }
    (ok, parts.join(", "))
}

fn path(id: ModelId, family: NoiseFamily, n: usize, rep: u64) -> Vec<Series> {
    let seed = keyed(&[SEED, id as u64, rep]).random::<u64>();
    generate(&ModelSpec::new(id, family, n), seed).unwrap()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

// Naive transcriptions for the oracle criterion.

fn ecdf(sample: &[f64], q: f64) -> f64 {
    sample.iter().filter(|&&v| v <= q).count() as f64 / sample.len() as f64
}

fn kth_largest(sample: &[f64], k: usize) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s[k - 1]
}

fn h(v: &[f64], w: &[f64], alpha: f64) -> f64 {
    let c = 1.0 - (-alpha).exp();
    let prod: f64 = v.iter().zip(w).map(|(vi, wi)| (1.0 - vi * c).powf(*wi)).product();
    (1.0 - prod) / c
}

fn naive(x: &[f64], ys: &[&[f64]], z: Option<&[f64]>, p: usize, k: usize, agg: &dyn Fn(&[f64]) -> f64) -> Option<f64> {
    let n = x.len();
    let tx = kth_largest(x, k);
    let tz = z.map(|z| kth_largest(z, k));
    let (mut total, mut count) = (0.0, 0usize);
    for i in 0..n - p {
        if x[i] < tx {
            continue;
        }
        if let (Some(z), Some(tz)) = (z, tz) {
            if (1..=p).any(|j| j <= i && z[i - j] >= tz) {
                continue;
            }
        }
        let v: Vec<f64> = ys
            .iter()
            .flat_map(|y| (1..=p).map(move |j| ecdf(y, y[i + j])))
            .collect();
        total += agg(&v);
        count += 1;
    }
    let divisor = if z.is_some() { count } else { k };
    (count > 0).then(|| (total / divisor as f64).min(1.0))
}

fn simplex(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..d).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    let mut w: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let drift = 1.0 - w.iter().sum::<f64>();
    w[0] += drift;
    w
}

fn criterion_oracle() -> Outcome {
    let close = |a: Option<f64>, b: Option<f64>| match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= 1e-12,
        (None, None) => true,
        _ => false,
    };
    let mut mismatches = 0;
    for inst in 0..500u64 {
        let mut rng = keyed(&[SEED, 5, inst]);
        let n = rng.random_range(4..=50);
        let p = rng.random_range(1..=(n - 1).min(6));
        let k = rng.random_range(1..=n);
        let tied = rng.random::<bool>();
        let draw = |rng: &mut StreamRng| -> Vec<f64> {
            (0..n)
                .map(|_| if tied { f64::from(rng.random_range(0..6)) } else { rng.random::<f64>() * 10.0 - 5.0 })
                .collect()
        };
        let (x, y, y2, z) = (draw(&mut rng), draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let w = simplex(&mut rng, p);
        let w2 = simplex(&mut rng, 2 * p);
        let alpha = rng.random_range(0.05..20.0);
        let s = |name: &str, v: &Vec<f64>| Series::new(name, v.clone()).unwrap();
        let params = ImpactParams::new(alpha, w.clone()).unwrap();
        let params2 = ImpactParams::new(alpha, w2.clone()).unwrap();
        let hw = |v: &[f64]| h(v, &w, alpha);
        let hw2 = |v: &[f64]| h(v, &w2, alpha);
        let mx = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);

        let checks = [
            close(
                compound_ctc(&s("x", &x), &s("y", &y), p, k, &params).ok().map(|e| e.value),
                naive(&x, &[&y], None, p, k, &hw),
            ),
            close(
                max_ctc(&s("x", &x), &s("y", &y), p, k).ok().map(|e| e.value),
                naive(&x, &[&y], None, p, k, &mx),
            ),
            close(
                conditional_compound_ctc(&s("x", &x), &s("y", &y), &s("z", &z), p, k, &params)
                    .ok()
                    .map(|e| e.value),
                naive(&x, &[&y], Some(&z), p, k, &hw),
            ),
            close(
                multivariate_compound_ctc(&s("x", &x), &[s("y", &y), s("y2", &y2)], p, k, &params2)
                    .ok()
                    .map(|e| e.value),
                naive(&x, &[&y, &y2], None, p, k, &hw2),
            ),
        ];
        mismatches += checks.iter().filter(|c| !**c).count();
    }
    (mismatches == 0, format!("500 instances x 4 variants, {mismatches} mismatches at 1e-12"))
}

fn criterion_impact() -> Outcome {
    const DRAWS: usize = 10_000;
    let mut rng = keyed(&[SEED, 6]);
    let mut violations = [0usize; 6];
    for _ in 0..DRAWS {
        let p = rng.random_range(1..=8);
        let w = simplex(&mut rng, p);
        let v: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
        let alpha = 10f64.powf(rng.random_range(-3.0..=3.0));
        let params = ImpactParams::new(alpha, w.clone()).unwrap();
        let val = params.evaluate(&v).unwrap();
        let weighted: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let upper = v.iter().cloned().fold(0.0, f64::max);

        // Range and sandwich.
        if !(0.0..=1.0).contains(&val) {
            violations[0] += 1;
        }
        if val < weighted - 1e-12 || val > upper + 1e-12 {
            violations[1] += 1;
        }
        // Monotonicity.
        let i = rng.random_range(0..p);
        let mut bumped = v.clone();
        bumped[i] = (bumped[i] + rng.random::<f64>() * 0.1).min(1.0);
        if params.evaluate(&bumped).unwrap() < val - 1e-15 {
            violations[2] += 1;
        }
        // All ones on the weight support.
        let mut ones = v.clone();
        let support = rng.random_range(0..p);
        let mut sparse = vec![0.0; p];
        sparse[support] = 1.0;
        ones[support] = 1.0;
        if ImpactParams::new(alpha, sparse).unwrap().evaluate(&ones).unwrap() != 1.0
            || params.evaluate(&vec![1.0; p]).unwrap() != 1.0
        {
            violations[3] += 1;
        }
        // Limits in the shape parameter.
        let v95: Vec<f64> = v.iter().map(|a| a * 0.95).collect();
        let lin: f64 = v95.iter().zip(&w).map(|(a, b)| a * b).sum();
        if (ImpactParams::new(1e-6, w.clone()).unwrap().evaluate(&v95).unwrap() - lin).abs() > 1e-6 {
            violations[4] += 1;
        }
        let prod = 1.0 - v95.iter().zip(&w).map(|(a, b)| (1.0 - a).powf(*b)).product::<f64>();
        if (ImpactParams::new(20.0, w).unwrap().evaluate(&v95).unwrap() - prod).abs() > 1e-6 {
            violations[5] += 1;
        }
    }
    let total: usize = violations.iter().sum();
    (
        total == 0,
        format!(
            "{DRAWS} draws each; violations range {} sandwich {} monotone {} ones {} small-alpha {} large-alpha {}",
            violations[0], violations[1], violations[2], violations[3], violations[4], violations[5]
        ),
    )
}

fn criterion_delay_curve() -> Outcome {
    let mut sums = [0.0; 10];
    for rep in 0..100 {
        let s = path(ModelId::M6, NoiseFamily::StudentT, 1000, rep);
        for (i, p) in (1..=10).enumerate() {
            let params = ImpactParams::uniform(p, 1e4).unwrap();
            sums[i] += compound_ctc(&s[0], &s[1], p, ExtremeCount::Auto, &params).unwrap().value;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / 100.0).collect();
    let best = (0..10).max_by(|&a, &b| means[a].total_cmp(&means[b])).unwrap() + 1;
    let curve: Vec<String> = means.iter().map(|m| format!("{m:.3}")).collect();
    ((2..=4).contains(&best), format!("argmax p = {best}; mean curve [{}]", curve.join(" ")))
}

fn criterion_shift() -> Outcome {
    let statistic = Statistic::Compound(ImpactParams::uniform(3, 1e4).unwrap());
    let (mut at3, mut at0) = (0, 0);
    for rep in 0..100u64 {
        let s = path(ModelId::M6, NoiseFamily::StudentT, 1000, 1000 + rep);
        let test = |shift: usize| {
            let cfg = BootstrapConfig {
                shift: Some(shift),
                seed: rep,
                ..Default::default()
            };
            mbb_test(&s[0], &s[1], 3, ExtremeCount::Auto, &statistic, &cfg).unwrap().reject
        };
        at3 += usize::from(test(3));
        at0 += usize::from(test(0));
    }
    (
        at3 >= 95 && at0 <= 20,
        format!("rejections s=3: {at3}/100 (need >= 95), s=0: {at0}/100 (need <= 20)"),
    )
}

fn criterion_weights() -> Outcome {
    let mut sums = [0.0; 5];
    for rep in 0..100u64 {
        let s = path(ModelId::M2, NoiseFamily::StudentT, 1000, 2000 + rep);
        let opt = optimize_weights(&s[0], &s[1], 5, ExtremeCount::Auto, 1e4, &DeConfig::with_seed(rep)).unwrap();
        for (acc, w) in sums.iter_mut().zip(&opt.weights) {
            *acc += w;
        }
    }
    let means: Vec<f64> = sums.iter().map(|s| s / 100.0).collect();
    let largest = means.iter().enumerate().all(|(i, &m)| i == 2 || m < means[2]);
    let shown: Vec<String> = means.iter().map(|m| format!("{m:.3}")).collect();
    (largest, format!("mean weights [{}]", shown.join(" ")))
}

fn criterion_confounder() -> Outcome {
    let params = ImpactParams::uniform(3, 1e4).unwrap();
    let (mut plain, mut cond) = (Vec::new(), Vec::new());
    for rep in 0..1000u64 {
        let s = path(ModelId::M8, NoiseFamily::StudentT, 1000, 3000 + rep);
        let (x, y, z) = (&s[0], &s[1], &s[2]);
        plain.push(compound_ctc(y, x, 3, ExtremeCount::Auto, &params).unwrap().value);
        cond.push(conditional_compound_ctc(y, x, z, 3, ExtremeCount::Auto, &params).unwrap().value);
    }
    let gap = mean(&plain) - mean(&cond);
    (
        gap > 0.01,
        format!("Y->X unconditional {:.4}, conditional {:.4}, gap {gap:.4}", mean(&plain), mean(&cond)),
    )
}

fn criterion_space_weather_substitute() -> Outcome {
    let dir = TempDir::new().unwrap();
    let s = path(ModelId::M8, NoiseFamily::Pareto, 50_000, 4000);
    // The file stores Y and Z with reversed sign; ingestion flips them back.
    let mut text = String::from("time,X,Y,Z\n");
    for i in 0..s[0].len() {
        text.push_str(&format!(
            "{i},{},{},{}\n",
            fmt_real(s[0].values()[i]),
            fmt_real(-s[1].values()[i]),
            fmt_real(-s[2].values()[i])
        ));
    }
    let input = dir.path().join("synthetic.csv");
    std::fs::write(&input, text).unwrap();

    let run = |sub: &str| -> Result<(String, String), String> {
        let cfg = RunConfig::from_settings(&settings(&[
            ("input", input.display().to_string()),
            ("flip", "Y,Z".into()),
            ("p-range", "1..10".into()),
            ("seed", "7".into()),
            ("out", dir.path().join(sub).display().to_string()),
        ]))
        .map_err(|e| e.to_string())?;
        let data = load(&cfg).map_err(|e| e.to_string())?;
        if data.series != s || !data.rejected.is_empty() {
            return Err("ingested series differ from the generated ones".into());
        }
        cmd_profile(&cfg).map_err(|e| e.to_string())?;
        let read = |f: &str| std::fs::read_to_string(dir.path().join(sub).join(f)).map_err(|e| e.to_string());
        Ok((read("profile.csv")?, read("delays.csv")?))
    };
    let started = Instant::now();
    let first = match run("a") {
        Ok(v) => v,
        Err(e) => return (false, e),
    };
    let second = match run("b") {
        Ok(v) => v,
        Err(e) => return (false, e),
    };
    let mut pairs: Vec<String> = first
        .0
        .lines()
        .skip(1)
        .map(|l| l.split(',').take(2).collect::<Vec<_>>().join("->"))
        .collect();
    pairs.dedup();
    let complete = first.0.lines().skip(1).all(|l| l.split(',').nth(3).is_some_and(|c| !c.is_empty()));
    let ok = first == second && pairs.len() == 6 && complete && first.0.lines().count() == 61;
    (
        ok,
        format!(
            "n=50000, {} directed pairs, identical outputs across runs: {}, {:.0}s for two runs",
            pairs.len(),
            first == second,
            started.elapsed().as_secs_f64()
        ),
    )
}

fn main() {
    let started = Instant::now();
    let pareto = benchmark("M1,M2,M3,M4,M5,M6,M7,M8,M9", "pareto");
    let student = benchmark("M1,M5,M7", "student-t");
    let poisson = benchmark("M4", "poisson");
    let multi = benchmark("S5", "pareto");

    let size = |rows: &[BenchmarkRow]| {
        let r = rows.iter().find(|r| r.model == ModelId::M1 && r.method == Method::CompoundCtcBootstrap).unwrap();
        (100.0 - r.pct_correct_xy, 100.0 - r.pct_correct_yx)
    };
    let (pf, pb) = size(&pareto);
    let (tf, tb) = size(&student);
    let size_ok = [pf, pb, tf, tb].iter().all(|r| (1.0..=11.0).contains(r));

    let results: Vec<(&str, Outcome)> = vec![
        (
            "Table 2 compound columns, Pareto",
            cells(
                &pareto,
                &[
                    (ModelId::M1, 95.0, 93.0),
                    (ModelId::M2, 100.0, 100.0),
                    (ModelId::M3, 100.0, 100.0),
                    (ModelId::M4, 100.0, 100.0),
                    (ModelId::M5, 100.0, 100.0),
                    (ModelId::M6, 100.0, 100.0),
                    (ModelId::M7, 100.0, 100.0),
                    (ModelId::M8, 100.0, 90.0),
                    (ModelId::M9, 100.0, 79.0),
                ],
            ),
        ),
        (
            "Table 1 spot cells, Student-t",
            cells(
                &student,
                &[(ModelId::M1, 96.0, 96.0), (ModelId::M5, 100.0, 99.0), (ModelId::M7, 100.0, 97.0)],
            ),
        ),
        ("Table 3 spot cell, Poisson", cells(&poisson, &[(ModelId::M4, 100.0, 100.0)])),
        (
            "Size control on M1",
            (
                size_ok,
                format!("rejection % Pareto {pf:.0}/{pb:.0}, Student-t {tf:.0}/{tb:.0}; need [1, 11]"),
            ),
        ),
        ("Oracle equivalence", criterion_oracle()),
        ("Impact function properties", criterion_impact()),
        ("Delay curve shape, M6", criterion_delay_curve()),
        ("Shift parameter, M6", criterion_shift()),
        ("Weight recovery, M2 with p = 5", criterion_weights()),
        ("Confounder mitigation, M8", criterion_confounder()),
        ("Ingest and profile on 50k synthetic series", criterion_space_weather_substitute()),
        ("Table S1 spot cell, S5 Pareto", cells(&multi, &[(ModelId::S5, 100.0, 99.0)])),
    ];

    let mut failed = 0;
    for (i, (name, (ok, detail))) in results.iter().enumerate() {
        println!("{} {:>2} {name}: {detail}", if *ok { "PASS" } else { "FAIL" }, i + 1);
        failed += usize::from(!ok);
    }
    println!(
        "{} of {} criteria passed in {:.0}s",
        results.len() - failed,
        results.len(),
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
