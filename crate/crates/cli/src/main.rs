use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use snsrom::bench::{self, verify, BenchError, ExperimentConfig, StMethod, Sweep};
use snsrom::compression::{run_training, solution_snapshots, Pod};
use snsrom::hyper::{orthogonalized_projector, sns_basis};
use snsrom::integrators::{solve_fom, IntegrationOptions};
use snsrom::io::{save_matrix, write_plan_csv, ContentKind, IoError};
use snsrom::par::Execution;
use snsrom::rom::RomMethod;

#[derive(Parser)]
#[command(name = "snsrom", version, about = "Hyper-reduced ROM experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment: diffusion, burgers, burgers_st, euler, euler_st, smoke.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the data-parallel kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the full-order model at the target parameter.
    Fom,
    /// Collect training snapshots and write the solution bases.
    Train,
    /// Run one reduced model over its configured sweep.
    Rom {
        /// Method name, e.g. gnat_sns or st_gnat.
        #[arg(long)]
        method: String,
        /// Restrict the sweep to one basis width.
        #[arg(long, alias = "n_basis")]
        n_basis: Option<usize>,
    },
    /// Run the full sweep and write the error and offline tables.
    Bench,
    /// Run the invariant suites.
    Verify,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0} row(s) failed")]
    FailedRows(usize),
    #[error("{0} check(s) failed")]
    FailedChecks(usize),
    #[error(transparent)]
    Bench(BenchError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Std(#[from] std::io::Error),
    #[error("{0}")]
    Run(String),
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Config(_) | BenchError::UnknownPreset(_) => CliError::Config(e.to_string()),
            e => CliError::Bench(e),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, CliError> {
    let mut config = match (&common.config, &common.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_toml(&text)?
        }
        (None, Some(name)) => bench::preset(name)?,
        (None, None) => return Err(CliError::Config("pass --config <path> or --preset <name>".into())),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn run_fom(config: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    let model = config.problem.build()?;
    for &s in &config.time.schemes {
        let scheme = config.time.scheme(s);
        let traj = solve_fom(model.as_ref(), &config.training.target, &scheme, &IntegrationOptions::default())
            .map_err(|e| CliError::Run(e.to_string()))?;
        let states = bench::trajectory_matrix(&traj.states);
        save_matrix(&out.join(format!("fom_{}.bin", s.name())), ContentKind::Trajectory, &states)?;
        let mut summary = String::from("step,time,norm,newton_iterations\n");
        for (n, u) in traj.states.iter().enumerate() {
            let iters = if n == 0 { 0 } else { traj.newton_iterations[n - 1] };
            summary.push_str(&format!("{n},{},{:e},{iters}\n", traj.times[n], u.norm()));
        }
        fs::write(out.join(format!("fom_{}.csv", s.name())), summary)?;
        println!("fom {}: {} steps, final norm {:.6e}", s.name(), scheme.n_steps, traj.final_state().norm());
    }
    Ok(())
}

fn run_train(config: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    let model = config.problem.build()?;
    let training = &config.training.points;
    for &s in &config.time.schemes {
        let scheme = config.time.scheme(s);
        let runs = run_training(model.as_ref(), &scheme, training, &IntegrationOptions::default(), Execution::default())
            .map_err(|e| CliError::Run(e.to_string()))?;
        let snaps = solution_snapshots(&runs, training, s);
        let pod = Pod::compute(&snaps, Execution::default()).map_err(|e| CliError::Run(e.to_string()))?;
        let width = config.spatial.as_ref().map_or(pod.rank(), |sp| {
            sp.n_basis.values().into_iter().max().unwrap_or(sp.n_s).max(sp.n_s).min(pod.rank())
        });
        let basis = pod.basis(width).map_err(|e| CliError::Run(e.to_string()))?;
        save_matrix(&out.join(format!("basis_{}.bin", s.name())), ContentKind::Basis, &basis.columns)?;
        let mut sv = String::from("index,singular_value\n");
        for (i, v) in pod.singular_values().iter().enumerate() {
            sv.push_str(&format!("{i},{v:e}\n"));
        }
        fs::write(out.join(format!("singular_values_{}.csv", s.name())), sv)?;
        if let Some(sp) = &config.spatial {
            if let Some(n_z) = sp.n_z {
                let sns = sns_basis(&basis.leading(sp.n_s), model.mass());
                let proj = orthogonalized_projector(&sns, sp.sampling, n_z, None).map_err(|e| CliError::Run(e.to_string()))?;
                write_plan_csv(fs::File::create(out.join(format!("plan_{}.csv", s.name())))?, &proj.plan)?;
            }
        }
        println!("train {}: {} snapshots, rank {}, basis width {width}", s.name(), snaps.n_cols(), pod.rank());
    }
    Ok(())
}

fn restrict(mut config: ExperimentConfig, method: &str, n_basis: Option<usize>) -> Result<ExperimentConfig, CliError> {
    let only = |sweep: &mut Sweep| {
        if let Some(n) = n_basis {
            *sweep = Sweep::List(vec![n]);
        }
    };
    if let Some(m) = RomMethod::parse(method) {
        let mut sp = config.spatial.take().ok_or_else(|| CliError::Config("configuration has no [spatial] section".into()))?;
        sp.methods = vec![m];
        only(&mut sp.n_basis);
        config.spatial = Some(sp);
        config.space_time = None;
    } else {
        let m = [StMethod::StLspg, StMethod::StGnat, StMethod::StGnatSns]
            .into_iter()
            .find(|m| m.name() == method)
            .ok_or_else(|| CliError::Config(format!("unknown method {method:?}")))?;
        let mut st =
            config.space_time.take().ok_or_else(|| CliError::Config("configuration has no [space_time] section".into()))?;
        st.methods = vec![m];
        only(&mut st.n_basis);
        config.space_time = Some(st);
        config.spatial = None;
    }
    config.validate()?;
    Ok(config)
}

fn run_bench(config: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let report = bench::run_experiment(config)?;
    bench::emit_report(&report, config, out)?;
    for r in &report.rows {
        match &r.failure {
            None => println!(
                "{} {} n_basis={} n_z={} error={:.3e} offline={:.2}s online={:.2}s",
                r.method,
                r.scheme,
                r.n_basis,
                r.n_z,
                r.relative_error,
                r.offline_seconds(),
                r.online_s
            ),
            Some(f) => println!("{} {} n_basis={} FAILED: {f}", r.method, r.scheme, r.n_basis),
        }
    }
    match report.failures().count() {
        0 => Ok(()),
        n => Err(CliError::FailedRows(n)),
    }
}

fn run_verify(seed: u64, out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out)?;
    let checks = verify::run_all(seed);
    let mut csv = String::from("suite,check,value,threshold,passed\n");
    for c in &checks {
        csv.push_str(&format!("{},{},{:e},{:e},{}\n", c.suite, c.name, c.value, c.threshold, c.passed));
        let status = if c.passed { "ok" } else { "FAIL" };
        match &c.detail {
            Some(d) => println!("{status:4} {} / {}: {d}", c.suite, c.name),
            None => println!("{status:4} {} / {}: {:.3e} (limit {:.0e})", c.suite, c.name, c.value, c.threshold),
        }
    }
    fs::write(out.join("verify.csv"), csv)?;
    match checks.iter().filter(|c| !c.passed).count() {
        0 => Ok(()),
        n => Err(CliError::FailedChecks(n)),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let out = &cli.common.out;
    match cli.command {
        Command::Verify => run_verify(cli.common.seed.unwrap_or(0), out),
        Command::Fom => run_fom(&load_config(&cli.common)?, out),
        Command::Train => run_train(&load_config(&cli.common)?, out),
        Command::Bench => run_bench(&load_config(&cli.common)?, out),
        Command::Rom { method, n_basis } => run_bench(&restrict(load_config(&cli.common)?, &method, n_basis)?, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
