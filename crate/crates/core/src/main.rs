use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use armax::harness::bench::{run_bench, BenchOptions};
use armax::harness::experiment::{
    estimate_trajectory, identify_stream, simulate_to_dir, summarize_estimate, write_estimate_csv,
};
use armax::harness::io::{write_json, TrajectoryRows};
use armax::harness::{load_trajectory, run_experiment, ExperimentConfig, ExperimentKind, ExperimentReport};
use armax::offline::{armax_identify_offline, IdentificationReport};
use armax::online::DEFAULT_P0;

#[derive(Parser)]
#[command(name = "armax", version, about = "ARMAX identification, model-free estimation and LQG experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for reports and CSV artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Run only this seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct DataArgs {
    /// Recorded trajectory CSV (`k,u,y[,w][,x1..xn]`) instead of a simulation.
    #[arg(long, requires = "orders")]
    data: Option<PathBuf>,
    /// Model orders `n,m,p` for `--data`.
    #[arg(long, value_delimiter = ',', value_name = "N,M,P")]
    orders: Option<Vec<usize>>,
    /// Initial scale of the recursive IV matrix.
    #[arg(long, default_value_t = DEFAULT_P0)]
    p0: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured model and write one trajectory CSV per seed.
    Simulate(Common),
    /// Identify a model, offline (JSON report) or online (per-step CSV).
    Identify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Recursive identification instead of the batch pipeline.
        #[arg(long)]
        online: bool,
        /// Value-iteration sweeps of the batch pipeline.
        #[arg(long, default_value_t = 200)]
        vi_iterations: usize,
    },
    /// Model-free state estimation.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Trailing samples for the summary statistics.
        #[arg(long, default_value_t = 10_000)]
        window: usize,
    },
    /// Closed-loop model-free LQG control.
    Lqg(Common),
    /// The two realizations of one output process and their filters.
    DemoPitfall(Common),
    /// Runs every acceptance criterion; exits nonzero if any fails.
    Bench {
        /// Number of Monte Carlo seeds (0..N).
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[arg(long, default_value_t = 200_000)]
        horizon: usize,
        /// Also write the results as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(common: &Common, kind: ExperimentKind) -> anyhow::Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None if kind == ExperimentKind::PitfallDemo => ExperimentConfig::new(kind, None, 100_000, vec![0]),
        None => bail!("--config is required unless --data is given"),
    };
    config.kind = kind;
    if let Some(seed) = common.seed {
        config.seeds = vec![seed];
    }
    config.validate()?;
    Ok(config)
}

fn orders(data: &DataArgs) -> anyhow::Result<(usize, usize, usize)> {
    match data.orders.as_deref() {
        Some(&[n, m, p]) => Ok((n, m, p)),
        _ => bail!("--orders expects n,m,p"),
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn print_summary(report: &ExperimentReport, out: &Path) {
    println!("{} over {} seed(s); artifacts in {}", report.kind.as_str(), report.seeds.len(), out.display());
    for (name, values) in &report.reference {
        println!("  reference {name} = {values:?}");
    }
    for (name, s) in &report.aggregate {
        println!("  {name}: median {:.6e} [min {:.6e}, max {:.6e}]", s.median, s.min, s.max);
    }
    for f in &report.failures {
        println!("  seed {} failed: {}", f.seed, f.error);
    }
}

fn experiment(common: &Common, kind: ExperimentKind) -> anyhow::Result<()> {
    let config = load_config(common, kind)?;
    let report = run_experiment(&config, Some(&common.out))?;
    print_summary(&report, &common.out);
    Ok(())
}

fn identify(common: &Common, data: &DataArgs, online: bool, vi_iterations: usize) -> anyhow::Result<()> {
    let Some(path) = &data.data else {
        let kind = if online { ExperimentKind::IdentifyOnline } else { ExperimentKind::IdentifyOffline };
        return experiment(common, kind);
    };
    let (n, m, p) = orders(data)?;
    create_dir(&common.out)?;
    if online {
        let csv = common.out.join("online.csv");
        let (ident, _) = identify_stream(TrajectoryRows::open(path)?, (n, m, p), data.p0, 1, Some(&csv))?;
        let params = ident.params();
        let summary = serde_json::json!({
            "samples": ident.samples(),
            "theta": ident.theta().iter().collect::<Vec<_>>(),
            "sigma2": params.sigma2,
            "rejected_updates": ident.issues().1,
        });
        write_json(&summary, &common.out.join("online_summary.json"))?;
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        let traj = load_trajectory(path)?;
        let id = armax_identify_offline(&traj, n, m, p, vi_iterations)?;
        let report = IdentificationReport::from(&id);
        write_json(&report, &common.out.join("identification.json"))?;
        println!("theta_tilde = {:?}\nc = {:?}\nsigma2 = {}", report.theta_tilde, report.c, report.sigma2);
    }
    Ok(())
}

fn estimate(common: &Common, data: &DataArgs, window: usize) -> anyhow::Result<()> {
    let Some(path) = &data.data else {
        return experiment(common, ExperimentKind::Estimate);
    };
    let traj = load_trajectory(path)?;
    let run = estimate_trajectory(&traj, orders(data)?, data.p0)?;
    let summary = summarize_estimate(&run, &traj, window);
    create_dir(&common.out)?;
    write_estimate_csv(&run, 1, &common.out.join("estimate.csv"))?;
    write_json(&summary, &common.out.join("estimate_summary.json"))?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn bench(seeds: u64, horizon: usize, out: Option<&Path>) -> anyhow::Result<bool> {
    let opts = BenchOptions { seeds: (0..seeds).collect(), horizon };
    let results = run_bench(&opts);
    for r in &results {
        println!("{}", r.line());
    }
    if let Some(dir) = out {
        create_dir(dir)?;
        write_json(&results, &dir.join("bench.json"))?;
    }
    Ok(results.iter().all(|r| r.passed))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(common) => load_config(common, ExperimentKind::IdentifyOffline).and_then(|config| {
            for path in simulate_to_dir(&config, &common.out)? {
                println!("{}", path.display());
            }
            Ok(true)
        }),
        Command::Identify { common, data, online, vi_iterations } => {
            identify(common, data, *online, *vi_iterations).map(|_| true)
        }
        Command::Estimate { common, data, window } => estimate(common, data, *window).map(|_| true),
        Command::Lqg(common) => experiment(common, ExperimentKind::Lqg).map(|_| true),
        Command::DemoPitfall(common) => experiment(common, ExperimentKind::PitfallDemo).map(|_| true),
        Command::Bench { seeds, horizon, out } => bench(*seeds, *horizon, out.as_deref()),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
