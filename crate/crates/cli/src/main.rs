use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hybrid_sched::{generate_demand, Algorithm, SearchStrategy, SystemParams, TrafficGenConfig};
use hybrid_sched_cli::{run_single, run_sweep, validate_files, ExperimentConfig, OUT_DIR_ENV};

#[derive(Parser)]
#[command(name = "hybrid-sched", version, about = "Hybrid circuit/packet switch schedulers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a synthetic demand matrix.
    Gen(GenArgs),
    /// Schedule one demand file.
    Run(RunArgs),
    /// Run a parameter sweep.
    Sweep(SweepArgs),
    /// Audit a schedule file against its demand.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 4)]
    n_large: usize,
    #[arg(long, default_value_t = 12)]
    n_small: usize,
    #[arg(long, default_value_t = 0.3)]
    c_small: f64,
    /// Disable both noise terms.
    #[arg(long)]
    no_noise: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SwitchArgs {
    /// Reconfiguration delay.
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    /// r_c / r_p; ignored when --rp is given.
    #[arg(long, default_value_t = 10.0)]
    ratio: f64,
    /// Packet switch rate (r_c = 1).
    #[arg(long)]
    rp: Option<f64>,
}

impl SwitchArgs {
    fn params(&self) -> Result<SystemParams> {
        Ok(match self.rp {
            Some(rp) => SystemParams::new(self.delta, rp)?,
            None => SystemParams::from_ratio(self.delta, self.ratio)?,
        })
    }
}

fn parse_search(s: &str) -> Result<SearchStrategy, String> {
    match s {
        "full" | "full_scan" => Ok(SearchStrategy::FullScan),
        "bitonic" | "bitonic_binary" => Ok(SearchStrategy::BitonicBinary),
        _ => match s.strip_prefix("sampled:") {
            Some(m) => m
                .parse()
                .map(|m| SearchStrategy::Sampled { m })
                .map_err(|e| format!("bad sampling factor {m:?}: {e}")),
            None => Err(format!("expected full, bitonic or sampled:M, got {s:?}")),
        },
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    algorithm: Algorithm,
    /// Demand matrix, CSV or JSON.
    #[arg(long)]
    demand: PathBuf,
    #[command(flatten)]
    switch: SwitchArgs,
    /// Duration search: full, bitonic or sampled:M.
    #[arg(long, value_parser = parse_search, default_value = "bitonic")]
    search: SearchStrategy,
    #[arg(long, env = OUT_DIR_ENV, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// TOML experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    base_seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    algorithms: Option<Vec<Algorithm>>,
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    ratio: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_search)]
    search: Option<Vec<SearchStrategy>>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Write zero wall times so repeated sweeps produce identical files.
    #[arg(long)]
    no_timing: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl SweepArgs {
    fn resolve(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(n) = self.n {
            cfg.n = n;
        }
        if let Some(runs) = self.runs {
            cfg.runs = runs;
        }
        if let Some(seed) = self.base_seed {
            cfg.base_seed = seed;
        }
        if let Some(a) = &self.algorithms {
            cfg.algorithms = a.clone();
        }
        if let Some(d) = &self.delta {
            cfg.grid.delta = d.clone();
        }
        if let Some(r) = &self.ratio {
            cfg.grid.rate_ratio = r.clone();
        }
        if let Some(s) = &self.search {
            cfg.grid.search = s.clone();
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        if self.no_timing {
            cfg.timing = false;
        }
        let out = self
            .out_dir
            .clone()
            .or_else(|| cfg.output.clone())
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        Ok((cfg, out))
    }
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    demand: PathBuf,
    /// Schedule JSON (matching schedule or BFF timeline).
    #[arg(long)]
    schedule: PathBuf,
    /// 2-hop booking ledger (JSON lines).
    #[arg(long)]
    ledger: Option<PathBuf>,
    #[command(flatten)]
    switch: SwitchArgs,
}

fn gen(args: GenArgs) -> Result<()> {
    let mut cfg = TrafficGenConfig {
        n: args.n,
        n_large: args.n_large,
        n_small: args.n_small,
        c_large: 1.0 - args.c_small,
        c_small: args.c_small,
        seed: args.seed,
        ..Default::default()
    };
    if args.no_noise {
        cfg = cfg.without_noise();
    }
    let d = generate_demand(&cfg)?;
    let text = match args.format {
        Format::Csv => d.to_csv(),
        Format::Json => d.to_json() + "\n",
    };
    match args.out {
        Some(path) => std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let params = args.switch.params()?;
    let r = run_single(args.algorithm, &args.demand, &params, args.search, &args.out_dir)?;
    println!("T = {}", r.outcome.transmission_time());
    println!("K = {}", r.outcome.configurations());
    println!("wall_time_ms = {:.3}", r.wall_time.as_secs_f64() * 1e3);
    println!("schedule: {}", r.schedule_path.display());
    if let Some(ledger) = &r.ledger_path {
        println!("ledger: {}", ledger.display());
    }
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<bool> {
    let (cfg, out) = args.resolve()?;
    let report = run_sweep(&cfg, &out)?;
    for s in &report.summaries {
        println!(
            "cell {} {:<8} delta={} ratio={} mean T = {:.4} (median {:.4})",
            s.cell,
            s.algorithm,
            s.params.delta,
            s.params.rate_ratio,
            s.transmission_time.mean,
            s.transmission_time.median
        );
    }
    println!("results: {}", report.csv_path.display());
    println!("summary: {}", report.summary_path.display());
    let invalid = report.invalid_runs();
    if invalid > 0 {
        eprintln!("{invalid} runs failed validation");
    }
    Ok(invalid == 0)
}

fn validate(args: ValidateArgs) -> Result<bool> {
    let params = args.switch.params()?;
    let report = validate_files(&args.demand, &args.schedule, args.ledger.as_deref(), &params)?;
    println!("{}", report.to_json());
    for v in &report.violations {
        eprintln!("violation: {v}");
    }
    Ok(report.is_clean())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => gen(a).map(|_| true),
        Command::Run(a) => run(a).map(|_| true),
        Command::Sweep(a) => sweep(a),
        Command::Validate(a) => validate(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
