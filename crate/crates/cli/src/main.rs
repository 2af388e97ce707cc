//! `akvf`: mesh generation, solves, convergence studies, kernel reports and
//! particle tracking for near-isometric velocity fields.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error, 3 degenerate
//! level set (policy `fail`), 4 solver failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use akvf_core::fields::DegeneracyPolicy;
use akvf_core::tracking::SolveRegion;
use akvf_core::Error;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use commands::RunLog;
use config::{parse_levels, RunConfig};

#[derive(Parser)]
#[command(name = "akvf", version, about = "Near-isometric velocity fields for evolving curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the problem's mesh at the finest level.
    Mesh(Common),
    /// Solve the bordered saddle system once.
    Solve(Common),
    /// Run a convergence study over all levels.
    Converge {
        #[command(flatten)]
        common: Common,
        /// Compare against a solve this many levels above the finest.
        #[arg(long)]
        reference_finer: Option<usize>,
    },
    /// Track particles with the near-isometric and the normal velocity.
    Track {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long)]
        seeds: Option<usize>,
        /// Half-width of the solve band in level-set units; 0 solves on the full mesh.
        #[arg(long)]
        band_width: Option<f64>,
    },
    /// Detect the discrete kernel and report the sampled rank diagnostic.
    Kernel(Common),
    /// Print the JSON schema of the config file.
    Schema,
}

/// A parsed `--levels` value (one argument, not a repeated flag).
#[derive(Clone)]
struct Levels(Vec<usize>);

#[derive(Args)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    /// Extra quadrature exactness for the operators.
    #[arg(long)]
    boost: Option<usize>,
    /// `3`, `0,1,2` or `0..4`.
    #[arg(long, value_parser = |s: &str| parse_levels(s).map(Levels))]
    levels: Option<Levels>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_parser = ["fail", "warn"])]
    degeneracy: Option<String>,
    #[arg(long)]
    time: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(p) = &self.problem {
            cfg.problem = p.clone();
        }
        if let Some(k) = self.k {
            cfg.k = k;
        }
        if let Some(b) = self.boost {
            cfg.boost = b;
        }
        if let Some(l) = &self.levels {
            cfg.levels = l.0.clone();
        }
        if let Some(t) = self.tau {
            cfg.tau = t;
        }
        if let Some(d) = &self.degeneracy {
            cfg.degeneracy = d.parse::<DegeneracyPolicy>()?;
        }
        if let Some(t) = self.time {
            cfg.time = Some(t);
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        Ok(cfg)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } => 2,
        Error::Degenerate { .. } => 3,
        Error::Solver(_) | Error::KernelMisdetection(_) | Error::Dimension(_) | Error::NonFinite { .. } => 4,
        Error::Io(_) | Error::OutsideMesh { .. } => 1,
    }
}

fn run(
    name: &str,
    cfg: Result<RunConfig, Error>,
    cmd: fn(&RunConfig, &mut RunLog) -> akvf_core::Result<()>,
) -> ExitCode {
    let start = Instant::now();
    let cfg = match cfg.and_then(|c| c.validate().map(|_| c)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    if let Err(e) = std::fs::create_dir_all(&cfg.out) {
        eprintln!("error: cannot create {}: {e}", cfg.out.display());
        return ExitCode::from(1);
    }
    let mut log = RunLog::default();
    let result = cmd(&cfg, &mut log);
    let status = match &result {
        Ok(()) => json!({ "ok": true }),
        Err(e) => json!({ "ok": false, "exit_code": exit_code(e), "error": e.to_string() }),
    };
    let manifest = json!({
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "status": status,
        "timings_s": log.timings.iter().map(|(k, v)| json!({ "phase": k, "seconds": v })).collect::<Vec<_>>(),
        "total_s": start.elapsed().as_secs_f64(),
        "outputs": log.outputs,
    });
    let manifest_path = cfg.out.join("manifest.json");
    if let Err(e) =
        std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).expect("manifest serializes"))
    {
        eprintln!("error: cannot write {}: {e}", manifest_path.display());
        return ExitCode::from(1);
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Mesh(c) => run("mesh", c.resolve(), commands::mesh),
        Command::Solve(c) => run("solve", c.resolve(), commands::solve),
        Command::Kernel(c) => run("kernel", c.resolve(), commands::kernel),
        Command::Converge { common, reference_finer } => {
            let cfg = common.resolve().map(|mut c| {
                if reference_finer.is_some() {
                    c.converge.reference_levels_finer = reference_finer;
                }
                c
            });
            run("converge", cfg, commands::converge)
        }
        Command::Track { common, steps, t_end, seeds, band_width } => {
            let cfg = common.resolve().map(|mut c| {
                c.track.steps = steps.unwrap_or(c.track.steps);
                c.track.t_end = t_end.or(c.track.t_end);
                c.track.seeds = seeds.unwrap_or(c.track.seeds);
                match band_width {
                    Some(0.0) => c.track.region = SolveRegion::Full,
                    Some(width) => c.track.region = SolveRegion::Band { width },
                    None => {}
                }
                c
            });
            run("track", cfg, commands::track)
        }
        Command::Schema => {
            print!("{}", config::SCHEMA);
            ExitCode::SUCCESS
        }
    }
}
