//! One scenario per invocation: parse, run the pipeline, write artifacts and
//! `report.txt`. The report is written on every exit path.

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slosh::chebyshev::{to_coeffs, GridFunction};
use slosh::control::{synthesize, ControlProblem, ControlWindow, SynthesisOptions, TargetState};
use slosh::elliptic::{eigenmodes, GalerkinSystem};
use slosh::evolution::{simulate, LipschitzRhs, RhsSpec, WaveState};
use slosh::io::{control_report, write_control, write_modes, write_trajectory, Report};
use slosh::operator::{inner_l2, norm_h12};
use slosh::verify::run_suite;
use slosh::{ChebCoeffs, SloshError};

use crate::config::{InitialData, Mode, RhsKind, ScenarioConfig, TargetSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

enum Failure {
    Config(String),
    Numerical(String),
    Runtime(String),
}

impl From<SloshError> for Failure {
    fn from(e: SloshError) -> Self {
        match e {
            SloshError::StepFailure { .. } | SloshError::LinearSolve(_) => {
                Failure::Numerical(e.to_string())
            }
            SloshError::Io(_) | SloshError::Csv(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Artifacts go to `--out`, else `output.dir` from the config, else
/// `out/<config stem>`.
fn default_out(config: &Path) -> PathBuf {
    let stem = config
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    Path::new("out").join(stem)
}

pub fn run(mode: Mode, config_path: &Path, out: Option<&Path>) -> i32 {
    let mut report = Report::new();
    let parsed = fs::read_to_string(config_path)
        .map_err(|e| format!("cannot read {}: {e}", config_path.display()))
        .and_then(|text| ScenarioConfig::parse(&text).map_err(|e| e.to_string()))
        .and_then(|cfg| match cfg.mode {
            Some(m) if m != mode => Err(format!(
                "config declares mode {} but subcommand is {}",
                m.name(),
                mode.name()
            )),
            _ => Ok(cfg),
        });
    let cfg = match parsed {
        Ok(cfg) => cfg,
        Err(msg) => {
            let dir = out
                .map(Path::to_path_buf)
                .unwrap_or_else(|| default_out(config_path));
            report
                .push("status", "config_error")
                .push("exit_code", EXIT_CONFIG)
                .push("error", msg.replace('\n', " "));
            finish(&dir, &report);
            return EXIT_CONFIG;
        }
    };
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| default_out(config_path));
    for (k, v) in cfg.effective(mode) {
        report.push(k, v);
    }
    report.push("config.output.dir", dir.display());

    let mut results = Report::new();
    let outcome = fs::create_dir_all(&dir)
        .map_err(Failure::from)
        .and_then(|()| match mode {
            Mode::Simulate => run_simulate(&cfg, &dir, &mut results),
            Mode::Eigen => run_eigen(&cfg, &dir, &mut results),
            Mode::Control => run_control(&cfg, &dir, &mut results),
            Mode::Verify => run_verify(&cfg, &mut results),
        });
    let (status, code, error) = match outcome {
        Ok(true) => ("ok", EXIT_OK, None),
        Ok(false) => ("nonconvergence", EXIT_NONCONVERGENCE, None),
        Err(Failure::Config(m)) => ("config_error", EXIT_CONFIG, Some(m)),
        Err(Failure::Numerical(m)) => ("nonconvergence", EXIT_NONCONVERGENCE, Some(m)),
        Err(Failure::Runtime(m)) => ("error", EXIT_RUNTIME, Some(m)),
    };
    report.push("status", status).push("exit_code", code);
    if let Some(m) = error {
        report.push("error", m.replace('\n', " "));
    }
    for (k, v) in results.entries() {
        report.push(k.clone(), v);
    }
    finish(&dir, &report);
    code
}

fn finish(dir: &Path, report: &Report) {
    let written = fs::create_dir_all(dir)
        .map_err(SloshError::from)
        .and_then(|()| File::create(dir.join("report.txt")).map_err(SloshError::from))
        .and_then(|f| report.write(BufWriter::new(f)));
    if let Err(e) = written {
        eprintln!("sloshctl: cannot write report in {}: {e}", dir.display());
    }
}

fn coeffs(values: &[f64], n: usize) -> Result<ChebCoeffs, Failure> {
    Ok(ChebCoeffs::new(values.to_vec())?.resized(n))
}

fn initial_state(cfg: &ScenarioConfig, sys: &GalerkinSystem) -> Result<WaveState, Failure> {
    let n = cfg.n;
    let a = match &cfg.initial {
        InitialData::Zero => ChebCoeffs::zeros(n),
        InitialData::Eigenmode(k) => eigenmodes(sys, k + 1)?.vectors[*k].clone(),
        InitialData::Gaussian { mu, sigma } => {
            let bump = GridFunction::from_fn(sys.grid(), |x| {
                (-(x - mu) * (x - mu) / (2.0 * sigma * sigma)).exp()
            })?;
            to_coeffs(&bump)
        }
        InitialData::Coeffs(c) => coeffs(c, n)?,
    };
    Ok(WaveState::new(0.0, a, coeffs(&cfg.velocity, n)?)?)
}

fn trajectory_file(dir: &Path) -> Result<BufWriter<File>, Failure> {
    Ok(BufWriter::new(File::create(dir.join("trajectory.csv"))?))
}

fn run_simulate(cfg: &ScenarioConfig, dir: &Path, report: &mut Report) -> Result<bool, Failure> {
    let sys = GalerkinSystem::build(cfg.n)?;
    let state = initial_state(cfg, &sys)?;
    let rhs = match cfg.rhs {
        RhsKind::Zero => RhsSpec::Zero,
        RhsKind::Linear(c) => RhsSpec::Lipschitz(LipschitzRhs::linear(c)?),
        RhsKind::Sine(c) => RhsSpec::Lipschitz(LipschitzRhs::sine(c)?),
    };
    let traj = simulate(&state, cfg.t, cfg.dt, &rhs, &sys)?;
    write_trajectory(&traj, trajectory_file(dir)?)?;
    let first = traj.energies[0];
    let last = traj.energies[traj.energies.len() - 1];
    report
        .push("simulate.steps", traj.states.len() - 1)
        .push_f64("simulate.final_time", traj.last().t)
        .push_f64("energy.initial_total", first.total)
        .push_f64("energy.final_total", last.total)
        .push_f64("energy.initial_conserved", first.conserved)
        .push_f64("energy.final_conserved", last.conserved)
        .push_f64("energy.conserved_drift", traj.conserved_drift())
        .push_f64("energy.growth_exponent", traj.growth_exponent());
    Ok(true)
}

fn run_eigen(cfg: &ScenarioConfig, dir: &Path, report: &mut Report) -> Result<bool, Failure> {
    let sys = GalerkinSystem::build(cfg.n)?;
    let eig = eigenmodes(&sys, cfg.modes)?;
    write_modes(&eig, BufWriter::new(File::create(dir.join("modes.csv"))?))?;
    report.push("eigen.count", eig.len());
    for (n, l) in eig.values.iter().enumerate() {
        report.push_f64(format!("eigen.lambda_{n}"), *l);
    }
    Ok(true)
}

/// Seeded smooth control `A_j sin(ω_j t + φ_j)` on the window nodes.
fn manufactured_control(problem: &ControlProblem<'_>, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let active = problem.window().active_nodes().len();
    let params: Vec<(f64, f64, f64)> = (0..active)
        .map(|_| {
            (
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.0..2.0 * PI),
            )
        })
        .collect();
    (0..=problem.steps())
        .flat_map(|k| {
            let t = k as f64 * problem.dt();
            params
                .iter()
                .map(move |(amp, omega, phase)| amp * (omega * t + phase).sin())
        })
        .collect()
}

fn run_control(cfg: &ScenarioConfig, dir: &Path, report: &mut Report) -> Result<bool, Failure> {
    let c = &cfg.control;
    let n = cfg.n;
    let sys = GalerkinSystem::build(n)?;
    let window = ControlWindow::new(c.lo, c.hi, sys.grid())?;
    let init = initial_state(cfg, &sys)?;
    let target = match &c.target {
        TargetSpec::Zero => TargetState::zeros(n),
        TargetSpec::Eigenmode(k) => TargetState::new(
            eigenmodes(&sys, k + 1)?.vectors[*k].clone(),
            ChebCoeffs::zeros(n),
        )?,
        TargetSpec::Coeffs { g0, g1 } => TargetState::new(coeffs(g0, n)?, coeffs(g1, n)?)?,
        TargetSpec::Manufactured => {
            let problem = ControlProblem::new(&sys, &window, cfg.t, cfg.dt)?;
            let v = problem.to_signal(&manufactured_control(&problem, cfg.seed))?;
            report.push_f64("control.manufactured_norm", v.norm_sq().sqrt());
            let traj = simulate(&init, cfg.t, cfg.dt, &RhsSpec::Source(v), &sys)?;
            TargetState::from_state(traj.last())
        }
    };
    let opts = SynthesisOptions {
        eps: c.eps,
        reg: c.reg,
        max_iter: c.max_iter,
    };
    let result = synthesize(&init, &target, &window, cfg.t, cfg.dt, &opts, &sys)?;
    write_control(
        &result.signal,
        BufWriter::new(File::create(dir.join("control.csv"))?),
    )?;

    // independent confirmation through the plain forward solver
    let traj = simulate(
        &init,
        cfg.t,
        cfg.dt,
        &RhsSpec::Source(result.signal.clone()),
        &sys,
    )?;
    write_trajectory(&traj, trajectory_file(dir)?)?;
    let end = traj.last();
    let e0 = end.a.axpy(-1.0, &target.g0)?;
    let e1 = end.adot.axpy(-1.0, &target.g1)?;
    let terminal = (norm_h12(&e0) + inner_l2(&e1, &e1)?).max(0.0).sqrt();

    report
        .push("control.window_nodes", window.active_nodes().len())
        .push("control.steps", result.signal.steps());
    control_report(&result, report);
    report.push_f64("control.terminal_misfit", terminal);
    Ok(result.converged)
}

fn run_verify(cfg: &ScenarioConfig, report: &mut Report) -> Result<bool, Failure> {
    let outcomes = run_suite(cfg.seed);
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    report
        .push("verify.checks", outcomes.len())
        .push("verify.failed", failed);
    for o in &outcomes {
        report.push(
            format!("check.{}", o.name),
            format!(
                "{} max_error:{:.3e} tolerance:{:.1e}",
                if o.passed { "pass" } else { "fail" },
                o.max_error,
                o.tolerance
            ),
        );
    }
    Ok(failed == 0)
}
