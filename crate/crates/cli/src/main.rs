//! `generic-mm`: structural checks, simulations and convergence tables for
//! the thermodynamic oscillator.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 usage error.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use generic_mm::diagnostics::{convergence_study, dyadic_steps, ConvergenceTable};
use generic_mm::generic::{
    check_antisymmetry, check_jacobi, check_noninteraction, check_onsager_psd, PoissonDerivative,
    ValidationReport,
};
use generic_mm::oscillator::{energy, entropy, random_states, Oscillator, DEFAULT_SEED};
use generic_mm::reference::{
    solve_reference, ReferenceSolution, DEFAULT_ABS_TOL, DEFAULT_MAX_STEP,
};
use generic_mm::schemes::{run, MmOptions, Partition, Scheme, Trajectory};
use generic_mm::{OscillatorParams, State};

use config::ConfigFile;

const SEED_ENV: &str = "GENERIC_MM_SEED";

#[derive(Parser)]
#[command(
    name = "generic-mm",
    version,
    about = "Minimizing movements for a thermodynamic oscillator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check antisymmetry, positivity, noninteraction and Jacobi on sampled states.
    Validate(ValidateArgs),
    /// Run one scheme and write `t,q,p,theta,E,S`.
    Simulate(SimulateArgs),
    /// Minimizing movements, implicit Euler and the reference side by side.
    Compare(CompareArgs),
    /// Uniform errors for tau = 2^-n and fitted orders.
    Converge(ConvergeArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// `key = value` file; flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    q0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    p0: Option<f64>,
    #[arg(long)]
    theta0: Option<f64>,
    /// Final time T.
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Args)]
struct SolverArgs {
    /// Absolute tolerance of the reference integrator.
    #[arg(long)]
    abs_tol: Option<f64>,
    /// Step-size cap of the reference integrator.
    #[arg(long)]
    max_step: Option<f64>,
    #[arg(long, default_value_t = MmOptions::default().max_newton_iterations)]
    max_newton_iterations: usize,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    samples: Option<usize>,
    /// Overridden by the GENERIC_MM_SEED environment variable.
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance of the antisymmetry, positivity and noninteraction checks.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = 1e-6)]
    jacobi_tol: f64,
    #[arg(long, default_value_t = 1e-6)]
    fd_step: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Mm,
    Euler,
    Reference,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_enum, default_value = "mm")]
    scheme: SchemeArg,
    #[arg(long)]
    tau: Option<f64>,
    /// Defaults to stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = -1, allow_negative_numbers = true)]
    n_min: i32,
    #[arg(long, default_value_t = 11, allow_negative_numbers = true)]
    n_max: i32,
    /// Slopes are fitted over n in [fit_min, fit_max].
    #[arg(long, default_value_t = 2, allow_negative_numbers = true)]
    fit_min: i32,
    #[arg(long, default_value_t = 8, allow_negative_numbers = true)]
    fit_max: i32,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Numerical(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Numerical(e)
    }
}

type Outcome<T> = Result<T, Failure>;

fn usage<T>(msg: impl Into<String>) -> Outcome<T> {
    Err(Failure::Usage(msg.into()))
}

struct Setup {
    cfg: ConfigFile,
    params: OscillatorParams,
    y0: State,
    horizon: f64,
}

impl ModelArgs {
    fn resolve(&self) -> Outcome<Setup> {
        let cfg = match &self.config {
            Some(path) => ConfigFile::load(path).map_err(Failure::Usage)?,
            None => ConfigFile::default(),
        };
        let get = |key: &str, flag: Option<f64>, default: f64| {
            cfg.resolve(key, flag, default).map_err(Failure::Usage)
        };
        let params = OscillatorParams::new(
            get("m", self.m, 1.0)?,
            get("nu", self.nu, 1.0)?,
            get("kappa", self.kappa, 1.0)?,
            get("lambda", self.lambda, 1.0)?,
            get("c", self.c, 1.0)?,
        )
        .map_err(|e| Failure::Usage(e.to_string()))?;
        let y0 = State::new(
            get("q0", self.q0, 1.0)?,
            get("p0", self.p0, 1.0)?,
            get("theta0", self.theta0, 1.0)?,
        )
        .map_err(|e| Failure::Usage(e.to_string()))?;
        let horizon = get("horizon", self.horizon, 15.0)?;
        if !(horizon > 0.0 && horizon.is_finite()) {
            return usage(format!("horizon must be positive, got {horizon}"));
        }
        Ok(Setup {
            cfg,
            params,
            y0,
            horizon,
        })
    }
}

impl Setup {
    fn positive(&self, key: &str, flag: Option<f64>, default: f64) -> Outcome<f64> {
        let v = self
            .cfg
            .resolve(key, flag, default)
            .map_err(Failure::Usage)?;
        if !(v > 0.0 && v.is_finite()) {
            return usage(format!("{key} must be positive, got {v}"));
        }
        Ok(v)
    }

    fn reference(&self, solver: &SolverArgs) -> Outcome<ReferenceSolution> {
        let abs_tol = self.positive("abs_tol", solver.abs_tol, DEFAULT_ABS_TOL)?;
        let max_step = self.positive("max_step", solver.max_step, DEFAULT_MAX_STEP)?;
        solve_reference(&self.params, &self.y0, self.horizon, abs_tol, max_step)
            .context("reference integration failed")
            .map_err(Failure::from)
    }

    fn partition(&self, tau: Option<f64>) -> Outcome<Partition> {
        let tau = self.positive("tau", tau, 0.25)?;
        Partition::uniform(self.horizon, tau).map_err(|e| Failure::Usage(e.to_string()))
    }

    fn scheme(
        &self,
        scheme: Scheme,
        partition: &Partition,
        solver: &SolverArgs,
    ) -> Outcome<Trajectory> {
        let opts = MmOptions {
            max_newton_iterations: solver.max_newton_iterations,
            ..MmOptions::default()
        };
        let name = match scheme {
            Scheme::MinimizingMovements => "minimizing movements",
            Scheme::ImplicitEuler => "implicit Euler",
        };
        run(scheme, &self.y0, partition, &self.params, &opts)
            .map(|r| r.trajectory)
            .map_err(|f| Failure::Numerical(anyhow!("{name}: {f}")))
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn entropy_of(params: &OscillatorParams, y: &State) -> f64 {
    entropy(params, y).expect("states produced by the solvers have theta > 0")
}

/// Writes `body` to `output` (or stdout). A failed command leaves no file
/// behind, not even one from an earlier run.
fn emit(output: Option<&Path>, body: Outcome<String>) -> Outcome<()> {
    match body {
        Ok(text) => match output {
            Some(path) => fs::write(path, text)
                .with_context(|| format!("cannot write {}", path.display()))
                .map_err(Failure::from),
            None => {
                print!("{text}");
                Ok(())
            }
        },
        Err(e) => {
            if let Some(path) = output {
                let _ = fs::remove_file(path);
            }
            Err(e)
        }
    }
}

fn print_report(out: &mut String, report: &ValidationReport) {
    for check in &report.checks {
        let _ = writeln!(
            out,
            "{:<34} {:>24} {:>10.1e}  {}",
            check.name,
            num(check.max_residual),
            report.tolerance,
            if check.passed { "pass" } else { "FAIL" }
        );
    }
}

fn cmd_validate(args: &ValidateArgs) -> Outcome<()> {
    let setup = args.model.resolve()?;
    let samples = setup
        .cfg
        .resolve("samples", args.samples, 100)
        .map_err(Failure::Usage)?;
    if samples == 0 {
        return usage("--samples must be at least 1");
    }
    let seed = match std::env::var(SEED_ENV) {
        Ok(raw) => raw
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}: cannot parse '{raw}' as a seed")))?,
        Err(_) => setup
            .cfg
            .resolve("seed", args.seed, DEFAULT_SEED)
            .map_err(Failure::Usage)?,
    };
    let tol = setup
        .cfg
        .resolve("tol", args.tol, 1e-12)
        .map_err(Failure::Usage)?;
    let valid = tol >= 0.0 && args.jacobi_tol >= 0.0 && args.fd_step > 0.0;
    if !valid {
        return usage("tolerances must be nonnegative and --fd-step positive");
    }

    let model = Oscillator::new(setup.params);
    let states: Vec<_> = random_states(samples, seed)
        .iter()
        .map(|y| y.to_dvector())
        .collect();
    let numerical = |e: generic_mm::Error| Failure::Numerical(e.into());
    let reports = [
        check_antisymmetry(&model, &states, tol).map_err(numerical)?,
        check_onsager_psd(&model, &states, tol).map_err(numerical)?,
        check_noninteraction(&model, &states, tol).map_err(numerical)?,
        check_jacobi(
            &model,
            &states,
            args.jacobi_tol,
            PoissonDerivative::CentralDifference {
                fd_step: args.fd_step,
            },
        )
        .map_err(numerical)?,
    ];

    let mut out = format!("{samples} samples, seed {seed}\n");
    let _ = writeln!(
        out,
        "{:<34} {:>24} {:>10}  result",
        "check", "max residual", "tol"
    );
    reports.iter().for_each(|r| print_report(&mut out, r));
    print!("{out}");
    if reports.iter().all(ValidationReport::passed) {
        Ok(())
    } else {
        Err(Failure::Numerical(anyhow!("structural validation failed")))
    }
}

fn simulate_csv(args: &SimulateArgs) -> Outcome<String> {
    let setup = args.model.resolve()?;
    let mut csv = String::from("t,q,p,theta,E,S\n");
    let mut row = |t: f64, y: &State| {
        let e = energy(&setup.params, y);
        let s = entropy_of(&setup.params, y);
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            num(t),
            num(y.q),
            num(y.p),
            num(y.theta),
            num(e),
            num(s)
        );
    };
    match args.scheme {
        SchemeArg::Reference => {
            let reference = setup.reference(&args.solver)?;
            reference.samples().for_each(|(t, y)| row(t, y));
        }
        SchemeArg::Mm | SchemeArg::Euler => {
            let scheme = match args.scheme {
                SchemeArg::Mm => Scheme::MinimizingMovements,
                _ => Scheme::ImplicitEuler,
            };
            let partition = setup.partition(args.tau)?;
            let traj = setup.scheme(scheme, &partition, &args.solver)?;
            traj.times()
                .iter()
                .zip(&traj.states)
                .for_each(|(&t, y)| row(t, y));
        }
    }
    Ok(csv)
}

fn compare_csv(args: &CompareArgs) -> Outcome<String> {
    let setup = args.model.resolve()?;
    let partition = setup.partition(args.tau)?;
    let mm = setup.scheme(Scheme::MinimizingMovements, &partition, &args.solver)?;
    let euler = setup.scheme(Scheme::ImplicitEuler, &partition, &args.solver)?;
    let reference = setup.reference(&args.solver)?;
    let params = &setup.params;

    let mut csv = String::from(
        "t,q_mm,p_mm,theta_mm,q_eu,p_eu,theta_eu,q_ref,p_ref,theta_ref,E_mm,E_eu,S_mm,S_eu\n",
    );
    for (i, &t) in partition.nodes().iter().enumerate() {
        let (a, b, r) = (&mm.states[i], &euler.states[i], reference.eval(t));
        let fields = [
            t,
            a.q,
            a.p,
            a.theta,
            b.q,
            b.p,
            b.theta,
            r.q,
            r.p,
            r.theta,
            energy(params, a),
            energy(params, b),
            entropy_of(params, a),
            entropy_of(params, b),
        ];
        let line: Vec<String> = fields.iter().map(|&x| num(x)).collect();
        let _ = writeln!(csv, "{}", line.join(","));
    }
    Ok(csv)
}

fn format_table(table: &ConvergenceTable, fit: (i32, i32)) -> String {
    let cell = |v: Option<f64>| v.map(num).unwrap_or_default();
    let mut csv = String::from("tau,err_theta_mm,err_theta_euler,err_E_mm,err_E_euler\n");
    for row in &table.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            num(row.tau),
            cell(row.mm.map(|c| c.theta)),
            cell(row.euler.map(|c| c.theta)),
            cell(row.mm.map(|c| c.energy)),
            cell(row.euler.map(|c| c.energy)),
        );
    }
    let slopes = table.slopes(2f64.powi(-fit.1), 2f64.powi(-fit.0));
    let _ = writeln!(
        csv,
        "# slopes (n = {}..{}): theta_mm={},theta_euler={},E_mm={},E_euler={}",
        fit.0,
        fit.1,
        cell(slopes.theta_mm),
        cell(slopes.theta_euler),
        cell(slopes.energy_mm),
        cell(slopes.energy_euler),
    );
    csv
}

fn converge_csv(args: &ConvergeArgs) -> Outcome<String> {
    if args.n_min > args.n_max || args.fit_min > args.fit_max {
        return usage("need --n-min <= --n-max and --fit-min <= --fit-max");
    }
    if args.n_min < -8 || args.n_max > 30 {
        return usage("n must lie in -8..=30");
    }
    let setup = args.model.resolve()?;
    let reference = setup.reference(&args.solver)?;
    let opts = MmOptions {
        max_newton_iterations: args.solver.max_newton_iterations,
        ..MmOptions::default()
    };
    let taus = dyadic_steps(args.n_min, args.n_max);
    let table = convergence_study(&setup.params, &setup.y0, &reference, &taus, &opts)
        .map_err(|e| Failure::Numerical(e.into()))?;
    Ok(format_table(&table, (args.fit_min, args.fit_max)))
}

fn dispatch(cli: &Cli) -> Outcome<()> {
    match &cli.command {
        Command::Validate(args) => cmd_validate(args),
        Command::Simulate(args) => emit(args.output.as_deref(), simulate_csv(args)),
        Command::Compare(args) => emit(args.output.as_deref(), compare_csv(args)),
        Command::Converge(args) => emit(args.output.as_deref(), converge_csv(args)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
