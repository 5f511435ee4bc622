//! The `tamsi` command line.
//!
//! Exit codes: 0 on success, 1 when a run fails, 2 for usage or
//! configuration errors.

pub mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::bench::{
    convergence_study, format_number, work_precision_sweep, write_convergence_csv,
    write_work_precision_csv, ConvergenceSettings, Measured, MethodSpec, SweepSettings, CSV_SCHEMA,
};
use crate::checks::{run_all, CheckOptions};
use crate::solver::{IntegratorKind, SolverError};
use crate::system::{Scenario, SystemModel};
use config::Settings;

#[derive(Debug, Parser)]
#[command(name = "tamsi", version, about = "Contact dynamics integrators and benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate a scenario and write the trajectory as CSV.
    Simulate(CommonArgs),
    /// Sweep methods over step sizes or accuracies and report error against work.
    WorkPrecision(CommonArgs),
    /// Measure the convergence order on the gripper.
    Convergence(CommonArgs),
    /// Run the randomized derivative and line-search checks.
    Check(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// INI-style settings file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// box_slide, planar_gripper or particle_drop.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Scenario parameter override, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// rk3, ie, ie-ec, semi-implicit or tamsi.
    #[arg(long)]
    pub integrator: Option<String>,
    /// full or quasi.
    #[arg(long)]
    pub newton: Option<String>,
    /// on or off.
    #[arg(long)]
    pub tals: Option<String>,
    /// Step size, s (initial step for error-controlled runs).
    #[arg(long)]
    pub h: Option<f64>,
    /// Accuracy of error-controlled runs.
    #[arg(long)]
    pub accuracy: Option<f64>,
    /// Simulated time, s.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated method labels such as ie+fn+tals.
    #[arg(long)]
    pub methods: Option<String>,
    /// Comma-separated step sizes.
    #[arg(long)]
    pub knobs: Option<String>,
    /// Comma-separated accuracies for error-controlled methods.
    #[arg(long)]
    pub accuracies: Option<String>,
    /// Comma-separated step sizes for the convergence study.
    #[arg(long)]
    pub steps: Option<String>,
    #[arg(long)]
    pub window: Option<f64>,
    #[arg(long)]
    pub reference_step: Option<f64>,
    /// Number of sampled states per check.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Relative error injected into analytic Jacobians.
    #[arg(long)]
    pub perturb_jacobian: Option<f64>,
    /// Any setting as SECTION.KEY=VALUE, repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

fn runtime(e: io::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Parses `args` and runs the command, returning the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{rendered}");
            } else {
                let _ = write!(stderr, "{rendered}");
            }
            return code;
        }
    };
    match execute(&cli.command, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let args = match command {
        Command::Simulate(a) | Command::WorkPrecision(a) | Command::Convergence(a) | Command::Check(a) => a,
    };
    let settings = resolve(args)?;
    match command {
        Command::Simulate(_) => simulate(&settings, stdout, stderr),
        Command::WorkPrecision(_) => work_precision(&settings, stdout, stderr),
        Command::Convergence(_) => convergence(&settings, stdout),
        Command::Check(_) => check(&settings, stdout),
    }
}

/// Defaults, then the config file, then flags.
pub fn resolve(args: &CommonArgs) -> Result<Settings, CliError> {
    let mut settings = Settings::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        settings
            .apply_file(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    }
    let mut flags: Vec<(String, String, String)> = Vec::new();
    let mut flag = |section: &str, key: &str, value: Option<String>| {
        if let Some(value) = value {
            flags.push((section.into(), key.into(), value));
        }
    };
    flag("scenario", "name", args.scenario.clone());
    flag("solver", "integrator", args.integrator.clone());
    flag("solver", "newton", args.newton.clone());
    flag("solver", "tals", args.tals.clone());
    flag("solver", "h", args.h.map(|x| x.to_string()));
    flag("solver", "accuracy", args.accuracy.map(|x| x.to_string()));
    flag("bench", "horizon", args.horizon.map(|x| x.to_string()));
    flag("bench", "seed", args.seed.map(|x| x.to_string()));
    flag("bench", "methods", args.methods.clone());
    flag("bench", "knobs", args.knobs.clone());
    flag("bench", "accuracies", args.accuracies.clone());
    flag("bench", "steps", args.steps.clone());
    flag("bench", "window", args.window.map(|x| x.to_string()));
    flag("bench", "reference_step", args.reference_step.map(|x| x.to_string()));
    flag("bench", "samples", args.samples.map(|x| x.to_string()));
    flag("bench", "perturb_jacobian", args.perturb_jacobian.map(|x| x.to_string()));
    flag("output", "out", args.out.as_ref().map(|p| p.display().to_string()));
    for param in &args.params {
        let (key, value) = param
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--param expects KEY=VALUE, got `{param}`")))?;
        flags.push(("scenario".into(), key.trim().into(), value.trim().into()));
    }
    for item in &args.set {
        let parsed = item
            .split_once('=')
            .and_then(|(path, value)| path.split_once('.').map(|(s, k)| (s, k, value)));
        let (section, key, value) = parsed
            .ok_or_else(|| CliError::Usage(format!("--set expects SECTION.KEY=VALUE, got `{item}`")))?;
        flags.push((section.trim().into(), key.trim().into(), value.trim().into()));
    }
    for (section, key, value) in flags {
        settings.apply(&section, &key, &value).map_err(CliError::Usage)?;
    }
    Ok(settings)
}

fn scenario(settings: &Settings) -> Result<Scenario, CliError> {
    Scenario::from_name(&settings.scenario, &settings.scenario_overrides)
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn open_output<'a>(
    settings: &Settings,
    stdout: &'a mut dyn Write,
) -> Result<Box<dyn Write + 'a>, CliError> {
    match &settings.out {
        Some(path) => {
            let file = File::create(path)
                .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(stdout)),
    }
}

fn usage(e: SolverError) -> CliError {
    CliError::Usage(e.to_string())
}

fn simulate(settings: &Settings, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let scenario = scenario(settings)?;
    let model = scenario.model();
    let kind = settings.integrator_or(IntegratorKind::Tamsi);
    let config = settings.solver;
    config.validate().map_err(usage)?;
    let horizon = settings.horizon.unwrap_or(1.0);
    let h = config.h;

    let mut state = model.initial_state();
    let n_contacts = model.contact_query(&state.q, state.t).len();
    let mut out = open_output(settings, stdout)?;
    let mut header: Vec<String> = vec!["t".into()];
    header.extend((0..state.q.len()).map(|i| format!("q{i}")));
    header.extend((0..state.v.len()).map(|i| format!("v{i}")));
    for i in 0..n_contacts {
        header.extend([format!("delta_{i}"), format!("vt_norm_{i}"), format!("pi_{i}")]);
    }
    header.push("f_evals".into());
    writeln!(out, "{CSV_SCHEMA}").map_err(runtime)?;
    writeln!(out, "{}", header.join(",")).map_err(runtime)?;

    let ratio = horizon / h;
    let steps = if (ratio - ratio.round()).abs() <= 1e-9 * ratio.max(1.0) {
        ratio.round() as usize
    } else {
        ratio.ceil() as usize
    };
    let t0 = state.t;
    let mut integrator = kind.build(config);
    let clock = Instant::now();
    let mut failure = None;
    for k in 1..=steps {
        let end = (t0 + k as f64 * h).min(t0 + horizon);
        match integrator.advance(model, &state, end - state.t) {
            Ok(step) => {
                state = step.state;
                state.t = end;
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
        let mut row: Vec<String> = vec![format_number(state.t)];
        row.extend(state.q.iter().map(|&x| format_number(x)));
        row.extend(state.v.iter().map(|&x| format_number(x)));
        for point in model.contact_query(&state.q, state.t).points {
            let velocity = point.velocity(&state.v);
            let force = point.force(&velocity);
            row.extend([
                format_number(point.delta),
                format_number(velocity.v_t.norm()),
                format_number(force.normal),
            ]);
        }
        row.push(integrator.work().f_evals.to_string());
        writeln!(out, "{}", row.join(",")).map_err(runtime)?;
    }
    out.flush().map_err(runtime)?;
    drop(out);

    let work = integrator.work();
    let _ = writeln!(
        stderr,
        "{} on {}: t = {} s, steps = {}, f_evals = {}, jacobian_factorizations = {}, newton_iters = {}, shrinks = {}, wall = {:.3} s",
        kind,
        settings.scenario,
        state.t,
        work.steps,
        work.f_evals,
        work.jacobian_factorizations,
        work.newton_iters,
        work.step_shrinks,
        clock.elapsed().as_secs_f64()
    );
    match failure {
        Some(e) => Err(CliError::Runtime(format!("simulation stopped at t = {} s: {e}", state.t))),
        None => Ok(()),
    }
}

const DEFAULT_STEPS: [f64; 7] = [1e-2, 5e-3, 2e-3, 1e-3, 5e-4, 2e-4, 1e-4];
const DEFAULT_ACCURACIES: [f64; 5] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5];

fn measured_for(scenario: &Scenario) -> Measured {
    match scenario {
        Scenario::PlanarGripper(_) => Measured::Velocity(1),
        _ => Measured::Velocity(0),
    }
}

fn work_precision(settings: &Settings, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let scenario = scenario(settings)?;
    settings.solver.validate().map_err(usage)?;
    let sweep = SweepSettings {
        horizon: settings.horizon.unwrap_or(1.0),
        window: settings.window,
        reference_step: settings.reference_step,
        measured: measured_for(&scenario),
        base: settings.solver,
    };
    if !(sweep.window > 0.0 && sweep.reference_step > 0.0 && sweep.horizon >= sweep.window) {
        return Err(CliError::Usage(format!(
            "need window > 0, reference_step > 0 and horizon >= window (got {}, {}, {})",
            sweep.window, sweep.reference_step, sweep.horizon
        )));
    }
    let methods = settings.methods.clone().unwrap_or_else(|| {
        let mut all = MethodSpec::implicit_euler_grid();
        all.push(MethodSpec::tamsi());
        all
    });
    let knobs = settings.knobs.clone().unwrap_or(DEFAULT_STEPS.to_vec());
    let accuracies = settings.accuracies.clone().unwrap_or(DEFAULT_ACCURACIES.to_vec());
    let mut records = Vec::new();
    for method in &methods {
        let ladder = if method.integrator.is_error_controlled() { &accuracies } else { &knobs };
        records.extend(work_precision_sweep(scenario.model(), &[*method], ladder, &sweep));
    }
    let mut out = open_output(settings, stdout)?;
    write_work_precision_csv(&mut out, &records).map_err(runtime)?;
    out.flush().map_err(runtime)?;
    let ok = records.iter().filter(|r| r.status.is_ok()).count();
    let _ = writeln!(stderr, "{ok} of {} cells succeeded", records.len());
    if ok == 0 {
        return Err(CliError::Runtime("every cell failed".into()));
    }
    Ok(())
}

const DEFAULT_CONVERGENCE_STEPS: [f64; 4] = [3e-3, 1e-3, 3e-4, 1e-4];

fn convergence(settings: &Settings, stdout: &mut dyn Write) -> Result<(), CliError> {
    let scenario = scenario(settings)?;
    let Scenario::PlanarGripper(gripper) = &scenario else {
        return Err(CliError::Usage(format!(
            "the convergence study runs on planar_gripper, not {}",
            settings.scenario
        )));
    };
    settings.solver.validate().map_err(usage)?;
    let defaults = ConvergenceSettings::for_gripper(gripper);
    let study_settings = ConvergenceSettings {
        horizon: settings.horizon.unwrap_or(defaults.horizon),
        sample_interval: settings.sample_interval.unwrap_or(defaults.sample_interval),
        reference_step: settings.reference_step,
        integrator: settings.integrator_or(defaults.integrator),
        base: settings.solver,
        ..defaults
    };
    let steps = settings.steps.clone().unwrap_or(DEFAULT_CONVERGENCE_STEPS.to_vec());
    let study = convergence_study(gripper as &dyn SystemModel, &steps, &study_settings)
        .map_err(CliError::Runtime)?;
    let mut out = open_output(settings, stdout)?;
    write_convergence_csv(&mut out, &study).map_err(runtime)?;
    out.flush().map_err(runtime)?;
    drop(out);
    for (name, fit) in [("translational", study.translational_fit), ("rotational", study.rotational_fit)] {
        match fit {
            Some(f) => writeln!(
                stdout,
                "# slope_{name} = {:.4} (rms log residual {:.3e}, {} points)",
                f.slope, f.residual, f.points
            ),
            None => writeln!(stdout, "# slope_{name} = nan (too few successful runs)"),
        }
        .map_err(runtime)?;
    }
    if study.records.iter().all(|r| r.failure.is_some()) {
        return Err(CliError::Runtime("every run failed".into()));
    }
    Ok(())
}

fn check(settings: &Settings, stdout: &mut dyn Write) -> Result<(), CliError> {
    let options = CheckOptions {
        seed: settings.seed,
        samples: settings.samples,
        perturb_jacobian: settings.perturb_jacobian,
    };
    let outcomes = run_all(&options);
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    for outcome in &outcomes {
        writeln!(stdout, "{outcome}").map_err(runtime)?;
    }
    writeln!(stdout, "{} passed, {failed} failed (seed {})", outcomes.len() - failed, options.seed)
        .map_err(runtime)?;
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} checks failed")));
    }
    Ok(())
}
