use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info};

use containsim::discovery::run_discovery;
use containsim::local_view::build_local_views;
use containsim::pipeline::{self, RunOutcome, Stage, StageError};
use containsim::scenario::{parse_k1_file, Scenario};
use containsim::{Error, Exec};

/// Distributed containment control: discovery, influence rows, gain
/// synthesis and closed-loop simulation from a scenario file.
#[derive(Debug, Parser)]
#[command(name = "containsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check the standing assumptions and name every violation.
    Validate {
        scenario: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Print each follower's discovered leader, follower and edge sets.
    Discover {
        scenario: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Print each follower's influence row with its leader ordering.
    Nli {
        scenario: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Print regulator solutions, feedback gains and residuals.
    Gains {
        scenario: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Run the pipeline and write artifacts; a directory runs every
    /// scenario file in it.
    Run {
        scenario: PathBuf,
        /// Output directory for artifacts.
        #[arg(long)]
        out: PathBuf,
        /// Last stage to run.
        #[arg(long, value_enum, default_value_t = StageArg::Simulate)]
        stage: StageArg,
        /// Parallel jobs when running a directory of scenarios.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        opts: Overrides,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum StageArg {
    Validate,
    Discover,
    Nli,
    Gains,
    Simulate,
}

impl From<StageArg> for Stage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::Validate => Stage::Validate,
            StageArg::Discover => Stage::Discover,
            StageArg::Nli => Stage::Nli,
            StageArg::Gains => Stage::Gains,
            StageArg::Simulate => Stage::Simulate,
        }
    }
}

#[derive(Debug, Clone, Args)]
struct Overrides {
    /// Seed for randomized pole placement.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON object mapping follower identifiers to K¹ matrices.
    #[arg(long)]
    k1_from_file: Option<PathBuf>,
    /// Residual bound on the regulator equations.
    #[arg(long)]
    tol_regulator: Option<f64>,
    /// Residual bound on the closed-loop certificate.
    #[arg(long)]
    tol_closed_loop: Option<f64>,
    /// Bound on the characteristic polynomial at each desired pole.
    #[arg(long)]
    tol_pole: Option<f64>,
    /// Pivot below which the Sylvester operator counts as singular.
    #[arg(long)]
    tol_sylvester_pivot: Option<f64>,
    /// Relative singular-value cutoff for least-squares solves.
    #[arg(long)]
    tol_rank: Option<f64>,
}

impl Overrides {
    fn load(&self, path: &Path) -> Result<Scenario, Error> {
        let mut s = Scenario::load(path)?;
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(file) = &self.k1_from_file {
            s.set_k1(&parse_k1_file(&std::fs::read_to_string(file)?)?)?;
        }
        let t = &mut s.tolerances;
        for (slot, v) in [
            (&mut t.regulator, self.tol_regulator),
            (&mut t.closed_loop, self.tol_closed_loop),
            (&mut t.pole, self.tol_pole),
            (&mut t.sylvester_pivot, self.tol_sylvester_pivot),
            (&mut t.rank, self.tol_rank),
        ] {
            if let Some(v) = v {
                *slot = v;
            }
        }
        Ok(s)
    }
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 1,
        Error::Divergence { .. } => 4,
        Error::Synthesis(_)
        | Error::RegulatorUnsolvable { .. }
        | Error::Assembly(_)
        | Error::SpectraOverlap
        | Error::Singular { .. } => 3,
        _ => 2,
    }
}

fn stage_code(e: &StageError) -> u8 {
    match (&e.source, e.stage) {
        (Error::Io(_), _) => 1,
        (Error::Divergence { .. }, _) => 4,
        (_, Stage::Gains) => 3,
        (_, Stage::Simulate) => error_code(&e.source),
        _ => 2,
    }
}

fn outcome_code(r: &Result<RunOutcome, StageError>) -> u8 {
    match r {
        Ok(o) => match o.contained() {
            Some(false) => 1,
            _ => 0,
        },
        Err(e) => stage_code(e),
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<(), Error> {
    use std::io::Write;
    let text = serde_json::to_string_pretty(v).map_err(|e| Error::Scenario(e.to_string()))?;
    writeln!(std::io::stdout().lock(), "{text}")?;
    Ok(())
}

fn cmd_validate(path: &Path, opts: &Overrides) -> Result<u8, Error> {
    let s = opts.load(path)?;
    let report = pipeline::validate(&s, Exec::default());
    for c in &report.checks {
        eprintln!(
            "{:<7} assumption {} ({}) {}: {}",
            format!("{:?}", c.status).to_uppercase(),
            c.assumption,
            c.title,
            c.subject,
            c.detail
        );
    }
    print_json(&report)?;
    Ok(if report.passed() { 0 } else { 2 })
}

fn cmd_discover(path: &Path, opts: &Overrides) -> Result<u8, Error> {
    let s = opts.load(path)?;
    let d = run_discovery(&s.graph, Exec::default())?;
    print_json(&pipeline::discovery_artifact(&s, &d))?;
    Ok(0)
}

fn cmd_nli(path: &Path, opts: &Overrides) -> Result<u8, Error> {
    let s = opts.load(path)?;
    let d = run_discovery(&s.graph, Exec::default())?;
    let views = build_local_views(&d, Exec::default())?;
    let artifact = pipeline::nli_artifact(&s, &views);
    for e in &artifact.followers {
        let cells: Vec<String> = e
            .leader_labels
            .iter()
            .zip(&e.view.phi)
            .map(|(l, p)| format!("{l}: {p:.6}"))
            .collect();
        eprintln!("follower {:<6} {}", e.label.to_string(), cells.join("  "));
    }
    print_json(&artifact)?;
    Ok(0)
}

fn cmd_gains(path: &Path, opts: &Overrides) -> Result<u8, Error> {
    let s = opts.load(path)?;
    let exec = Exec::default();
    let d = run_discovery(&s.graph, exec)?;
    let views = build_local_views(&d, exec)?;
    let syn = pipeline::synthesize(&s, &d, &views, exec)?;
    print_json(&pipeline::gains_artifact(&s, &syn))?;
    Ok(if syn.closed_loop_hurwitz { 0 } else { 3 })
}

fn report_run(name: &str, r: &Result<RunOutcome, StageError>) {
    match r {
        Ok(o) => match &o.summary {
            Some(s) => {
                let worst = s.followers.iter().map(|f| f.terminal_error).fold(0.0, f64::max);
                println!(
                    "{name}: containment {} (max terminal error {worst:.3e})",
                    if s.containment_achieved { "achieved" } else { "not achieved" }
                );
            }
            None => println!("{name}: stages completed"),
        },
        Err(e) => error!("{name}: {e}"),
    }
}

fn cmd_run(path: &Path, out: &Path, stage: Stage, jobs: usize, opts: &Overrides) -> Result<u8, Error> {
    if path.is_dir() {
        let files = pipeline::scenario_files(path)?;
        info!("running {} scenarios with {jobs} jobs", files.len());
        let results = run_batch(&files, out, stage, jobs, opts)?;
        let mut code = 0;
        for (f, r) in files.iter().zip(&results) {
            report_run(&f.display().to_string(), r);
            code = code.max(outcome_code(r));
        }
        return Ok(code);
    }
    let s = opts.load(path)?;
    let r = pipeline::run(&s, Some(out), stage, Exec::default());
    report_run(&path.display().to_string(), &r);
    Ok(outcome_code(&r))
}

fn run_batch(
    files: &[PathBuf],
    out: &Path,
    stage: Stage,
    jobs: usize,
    opts: &Overrides,
) -> Result<Vec<Result<RunOutcome, StageError>>, Error> {
    let one = |path: &PathBuf| {
        let s = opts.load(path).map_err(|source| StageError {
            stage: Stage::Validate,
            source,
        })?;
        let dir = out.join(path.file_stem().unwrap_or_default());
        pipeline::run(&s, Some(&dir), stage, Exec::Sequential)
    };
    #[cfg(feature = "parallel")]
    if jobs > 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Scenario(format!("thread pool: {e}")))?;
        return Ok(pool.install(|| files.par_iter().map(one).collect()));
    }
    let _ = jobs;
    Ok(files.iter().map(one).collect())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CONTAINSIM_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { scenario, opts } => cmd_validate(scenario, opts),
        Command::Discover { scenario, opts } => cmd_discover(scenario, opts),
        Command::Nli { scenario, opts } => cmd_nli(scenario, opts),
        Command::Gains { scenario, opts } => cmd_gains(scenario, opts),
        Command::Run {
            scenario,
            out,
            stage,
            jobs,
            opts,
        } => cmd_run(scenario, out, (*stage).into(), *jobs, opts),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(error_code(&e))
        }
    }
}
