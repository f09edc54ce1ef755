use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use cctc_cli::commands::{cmd_benchmark, cmd_profile, cmd_simulate, cmd_test, load, simulate_target};
use cctc_cli::config::{merge, read_config_file, RunConfig};
use cctc_cli::ingest::{series_csv, write_file};
use cctc_cli::Result;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cctc", version, about = "Causal inference for compound extremes in time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a CSV, report rejected rows and write the cleaned series.
    Ingest(Flags),
    /// Bootstrap test of every ordered pair of series.
    Test(Flags),
    /// Coefficient, p-value, PCCF and extremogram curves over a lag range.
    Profile(Flags),
    /// Simulate one benchmark model path.
    Simulate(Flags),
    /// Monte Carlo comparison of inference methods.
    Benchmark(Flags),
}

/// Settings may also come from `--config`; flags take precedence.
#[derive(Args, Default)]
struct Flags {
    /// Key-value settings file using the flag names as keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV with a header row.
    #[arg(long)]
    input: Option<String>,
    /// Comma-separated data columns (default: all but the timestamp).
    #[arg(long)]
    columns: Option<String>,
    /// Timestamp column to skip (default: a first column named t/time/date).
    #[arg(long = "time-column")]
    time_column: Option<String>,
    /// Comma-separated columns whose sign is reversed.
    #[arg(long)]
    flip: Option<String>,
    /// Extremal delay.
    #[arg(long)]
    p: Option<String>,
    /// Lag range for `profile`, e.g. 1..10.
    #[arg(long = "p-range")]
    p_range: Option<String>,
    /// Number of extremes, or "auto" for floor(sqrt(n)).
    #[arg(long)]
    k: Option<String>,
    /// Impact function shape (default 1e4).
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    /// "uniform", "optimize" or a comma-separated weight vector.
    #[arg(long)]
    weights: Option<String>,
    /// Comma-separated PCCF thresholds for delay selection.
    #[arg(long = "threshold-cbar", allow_hyphen_values = true)]
    threshold_cbar: Option<String>,
    /// Bootstrap block length (default ceil(n^(1/3))).
    #[arg(long)]
    blocks: Option<String>,
    /// Bootstrap replicates.
    #[arg(long)]
    b: Option<String>,
    /// Time shift applied before resampling (default p).
    #[arg(long)]
    shift: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Significance level.
    #[arg(long)]
    level: Option<String>,
    /// Estimator: compound or max.
    #[arg(long)]
    variant: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Model id for `simulate`, e.g. M2 or S5.
    #[arg(long)]
    model: Option<String>,
    /// Comma-separated model ids for `benchmark`.
    #[arg(long)]
    models: Option<String>,
    /// Noise families: student-t, pareto, poisson.
    #[arg(long)]
    noise: Option<String>,
    /// Simulated series length.
    #[arg(long)]
    n: Option<String>,
    /// Monte Carlo repetitions.
    #[arg(long)]
    reps: Option<String>,
    /// Comma-separated benchmark methods.
    #[arg(long)]
    methods: Option<String>,
    /// Worker threads for `benchmark`.
    #[arg(long)]
    threads: Option<String>,
}

impl Flags {
    fn settings(&self) -> BTreeMap<String, String> {
        let pairs = [
            ("input", &self.input),
            ("columns", &self.columns),
            ("time-column", &self.time_column),
            ("flip", &self.flip),
            ("p", &self.p),
            ("p-range", &self.p_range),
            ("k", &self.k),
            ("alpha", &self.alpha),
            ("weights", &self.weights),
            ("threshold-cbar", &self.threshold_cbar),
            ("blocks", &self.blocks),
            ("b", &self.b),
            ("shift", &self.shift),
            ("seed", &self.seed),
            ("level", &self.level),
            ("variant", &self.variant),
            ("out", &self.out),
            ("model", &self.model),
            ("models", &self.models),
            ("noise", &self.noise),
            ("n", &self.n),
            ("reps", &self.reps),
            ("methods", &self.methods),
            ("threads", &self.threads),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }

    fn resolve(&self) -> Result<RunConfig> {
        let file = match &self.config {
            Some(path) => read_config_file(path)?,
            None => BTreeMap::new(),
        };
        RunConfig::from_settings(&merge(file, self.settings()))
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Ingest(f) => {
            let cfg = f.resolve()?;
            let data = load(&cfg)?;
            for r in &data.rejected {
                eprintln!("line {}: rejected: {}", r.line, r.reason);
            }
            let names: Vec<&str> = data.series.iter().map(|s| s.name()).collect();
            println!(
                "{} rows, {} rejected, columns: {}",
                data.series[0].len(),
                data.rejected.len(),
                names.join(", ")
            );
            write_file(&cfg.out.join("ingested.csv"), &series_csv(&data.series))
        }
        Command::Test(f) => {
            let cfg = f.resolve()?;
            let report = cmd_test(&cfg)?;
            for r in &report.results {
                println!(
                    "{} -> {}: coefficient {:.4}, p-value {:.3}, {}",
                    r.cause, r.effect, r.coefficient, r.p_value, r.decision
                );
            }
            Ok(())
        }
        Command::Profile(f) => {
            let cfg = f.resolve()?;
            let report = cmd_profile(&cfg)?;
            for d in &report.delays {
                let p = d.selected_p.map_or("-".to_string(), |p| p.to_string());
                println!("{} -> {}: cbar {} selects p = {p}", d.cause, d.effect, d.cbar);
            }
            Ok(())
        }
        Command::Simulate(f) => {
            let cfg = f.resolve()?;
            let (spec, path) = simulate_target(&cfg)?;
            cmd_simulate(&spec, cfg.seed, &path)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Benchmark(f) => {
            let cfg = f.resolve()?;
            let rows = cmd_benchmark(&cfg)?;
            print!("{}", cctc_core::simulate::benchmark_table(&rows));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cctc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
