use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use fdd_core::channel::{variance_vector, Band, ScatteringProfile};
use fdd_core::harness::{
    draw_clusters, empirical_variance, ilp_instances, run_experiment, support_demo, write_report, ExperimentConfig,
    ScaleProfile,
};
use fdd_core::rng::stream;
use fdd_core::sparsify::{exhaustive_objective, read_instance, solve_ilp_with, write_instance, IlpOptions};

macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(io::stdout(), $($arg)*)
    };
}

#[derive(Parser)]
#[command(
    name = "fddsim",
    version,
    about = "FDD massive-MIMO probing and sparsification simulator"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "profile")]
    config: Option<PathBuf>,

    /// Built-in scale profile when no config file is given.
    #[arg(long, default_value = "desk", value_parser = ["desk", "full"])]
    profile: String,

    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,

    /// Geometry seed count override.
    #[arg(long)]
    geometries: Option<usize>,

    /// Rate trials per cell override.
    #[arg(long)]
    trials: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => self.profile.parse::<ScaleProfile>()?.config(),
        };
        if let Some(s) = self.seed {
            cfg.scenario.master_seed = s;
        }
        if let Some(g) = self.geometries {
            cfg.scenario.geometry_seeds = g;
        }
        if let Some(t) = self.trials {
            cfg.scenario.rate_trials = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Full sweep over pilot dimensions and DL SNR for both methods.
    Run {
        #[command(flatten)]
        config: ConfigArgs,

        /// CSV report path.
        #[arg(long, short, default_value = "report.csv")]
        output: PathBuf,

        /// Record per-cell wall time (makes the CSV run-dependent).
        #[arg(long)]
        timing: bool,

        /// Also write every selection instance of the sweep into this directory.
        #[arg(long)]
        dump_ilp: Option<PathBuf>,
    },
    /// UL→DL support estimation for one single-cluster user.
    Support {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Solve a dumped selection instance.
    Ilp {
        instance: PathBuf,

        #[arg(long, default_value_t = IlpOptions::default().node_limit)]
        node_limit: usize,
    },
    /// Brute-force cross-checks.
    #[command(subcommand)]
    Oracle(Oracle),
}

#[derive(Subcommand)]
enum Oracle {
    /// Compare branch-and-bound with exhaustive search on an instance.
    Ilp { instance: PathBuf },
    /// Compare the analytic beamspace variance with Monte-Carlo estimates.
    Variance {
        #[command(flatten)]
        config: ConfigArgs,

        #[arg(long, default_value_t = 10_000)]
        draws: usize,

        /// Allowed relative error on significant indices.
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        // reader went away, e.g. `| head`
        Err(e)
            if e.downcast_ref::<io::Error>()
                .is_some_and(|e| e.kind() == io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Ok(false) means the command ran but something it checked failed.
fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Run {
            config,
            output,
            timing,
            dump_ilp,
        } => {
            let mut cfg = config.load()?;
            cfg.scenario.record_timing = timing;
            if let Some(dir) = dump_ilp {
                dump_instances(&cfg, &dir)?;
            }
            run(&cfg, &output)
        }
        Command::Support { config } => support(&config.load()?),
        Command::Ilp { instance, node_limit } => {
            let inst = read_instance(&instance)?;
            let sol = solve_ilp_with(&inst.graph, inst.pilots, inst.antennas, &IlpOptions { node_limit })?;
            let beams: Vec<usize> = (0..inst.graph.beam_count())
                .filter(|&a| sol.z[a])
                .map(|a| inst.graph.beams()[a])
                .collect();
            let users: Vec<usize> = (0..inst.graph.user_count())
                .filter(|&k| sol.u[k])
                .map(|k| inst.graph.users()[k])
                .collect();
            out!("objective {}", sol.objective)?;
            out!("optimal {}", sol.proven_optimal)?;
            out!("nodes {}", sol.nodes)?;
            out!("beams {}", join(&beams))?;
            out!("users {}", join(&users))?;
            Ok(sol.proven_optimal)
        }
        Command::Oracle(Oracle::Ilp { instance }) => {
            let inst = read_instance(&instance)?;
            let bb = solve_ilp_with(&inst.graph, inst.pilots, inst.antennas, &IlpOptions::default())?;
            let brute = exhaustive_objective(&inst.graph, inst.pilots, inst.antennas)?;
            out!("branch-and-bound {}", bb.objective)?;
            out!("exhaustive {brute}")?;
            Ok(bb.objective == brute)
        }
        Command::Oracle(Oracle::Variance {
            config,
            draws,
            tolerance,
        }) => variance_check(&config.load()?, draws, tolerance),
    }
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn run(cfg: &ExperimentConfig, output: &Path) -> Result<bool> {
    let report = run_experiment(&cfg.scenario, &cfg.system)?;
    write_report(&report.rows, output)?;
    info!("wrote {} rows to {}", report.rows.len(), output.display());
    for f in &report.failures {
        eprintln!("failed cell: {f}");
    }
    Ok(report.failures.is_empty())
}

fn dump_instances(cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let instances = ilp_instances(&cfg.scenario, &cfg.system)?;
    for (seed, inst) in &instances {
        let path = dir.join(format!("seed{seed}_T{}.ilp", inst.pilots));
        std::fs::write(&path, write_instance(inst)).with_context(|| format!("writing {}", path.display()))?;
    }
    info!("wrote {} instances to {}", instances.len(), dir.display());
    Ok(())
}

fn support(cfg: &ExperimentConfig) -> Result<bool> {
    let demo = support_demo(&cfg.system, &cfg.scenario, cfg.scenario.master_seed)?;
    let iv = demo.profile.support();
    let deg = |x: f64| x.to_degrees();
    for piece in iv.intervals() {
        out!("cluster [{:.2}°, {:.2}°]", deg(piece.lo), deg(piece.hi))?;
    }
    out!("true UL support      {}", join(demo.true_ul.indices()))?;
    out!("estimated UL support {}", join(demo.estimate.ul.indices()))?;
    out!("true DL support      {}", join(demo.true_dl.indices()))?;
    out!("estimated DL support {}", join(demo.estimate.dl.indices()))?;
    out!("contains truth {}, excess {}", demo.contains_truth(), demo.excess())?;
    Ok(true)
}

fn variance_check(cfg: &ExperimentConfig, draws: usize, tolerance: f64) -> Result<bool> {
    let sys = &cfg.system;
    let spec = &cfg.scenario;
    let seed = spec.master_seed;
    let clusters = draw_clusters(
        sys,
        spec.cluster_count,
        spec.cluster_width,
        &mut stream(seed, "geometry", 0, 0),
    );
    let profile = ScatteringProfile::equal_power_clusters(sys.theta_max, &clusters, 1.0)?;
    let mut ok = true;
    for band in [Band::Uplink, Band::Downlink] {
        let analytic = variance_vector(sys, &profile, band)?;
        let empirical = empirical_variance(sys, &profile, band, draws, seed)?;
        let peak = analytic.iter().cloned().fold(0.0, f64::max);
        if peak <= 0.0 {
            bail!("analytic variance is identically zero");
        }
        let worst = analytic
            .iter()
            .zip(&empirical)
            .filter(|(a, _)| **a >= 0.1 * peak)
            .map(|(a, e)| (e - a).abs() / a)
            .fold(0.0, f64::max);
        out!("{band:?}: worst relative error {worst:.4} on indices above 10% of peak")?;
        ok &= worst <= tolerance;
    }
    Ok(ok)
}
