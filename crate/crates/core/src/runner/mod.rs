//! Experiment runner behind the `parastab` binary: runs one command,
//! writes CSV results, a manifest and a summary, and maps the outcome to an
//! exit status.

mod config;

pub use config::{number_list, Command, InlineCoefficients, RunConfig, OUT_ENV};

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use ndarray::Array2;

use crate::carleman::{j1_identity_check, sweep_constant, CarlemanWeight};
use crate::csvio;
use crate::discretize::{
    boundary_tolerance, norm, trajectory_boundary_defect, Grid, NormKind, Trajectory,
};
use crate::error::{Error, Result};
use crate::forward::{robin_compatible_profile, solve_setup};
use crate::model::{lipschitz_sweep, validate, BoundaryCondition, ProblemSetup};
use crate::reconstruct::{error_rate_sweep, reconstruct, ReconstructOptions};
use crate::stability::{holder_experiment, log_experiment, HolderConfig, LogConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

/// One invariant checked during a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub command: Command,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            EXIT_OK
        } else {
            EXIT_INVARIANT
        }
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "command: {}", self.command);
        for c in &self.checks {
            let _ = writeln!(
                s,
                "[{}] {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        let _ = writeln!(s, "result: {}", if self.passed() { "pass" } else { "fail" });
        s
    }
}

/// Exit status for an error: configuration problems map to 1, numerical
/// failures to 2.
pub fn error_exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

struct Ctx {
    cfg: RunConfig,
    setup: ProblemSetup,
    grid: Grid,
    checks: Vec<Check>,
    notes: Vec<String>,
    files: Vec<PathBuf>,
}

impl Ctx {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.cfg.out_dir().join(name);
        self.files.push(p.clone());
        p
    }

    fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check::new(name, passed, detail));
    }

    fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }
}

/// `amplitude · sin x` per component, or the Robin-compatible profile.
fn initial_state(setup: &ProblemSetup, grid: &Grid, amplitude: f64) -> Result<Array2<f64>> {
    let nc = setup.coeffs.components();
    let u0 = match setup.bc {
        BoundaryCondition::Dirichlet => grid.sample(nc, |x, _| x.sin()),
        BoundaryCondition::Robin => robin_compatible_profile(&setup.coeffs, grid, 0.0)?,
    };
    Ok(u0 * amplitude)
}

fn solve(ctx: &Ctx) -> Result<Trajectory> {
    let u0 = initial_state(&ctx.setup, &ctx.grid, ctx.cfg.amplitude.unwrap_or(1.0))?;
    solve_setup(&ctx.setup, u0.view(), &ctx.grid, &ctx.cfg.options())
}

fn run_validate(ctx: &mut Ctx) -> Result<()> {
    let samples = ctx.cfg.samples.unwrap_or(256);
    let report = validate(&ctx.setup.coeffs, samples, ctx.cfg.seed())?;
    ctx.check(
        "symmetry",
        report.symmetry_defect <= crate::model::SYMMETRY_TOLERANCE,
        format!(
            "relative defect {:e} over {} samples",
            report.symmetry_defect, report.samples
        ),
    );
    ctx.check(
        "ellipticity",
        report.passed,
        format!(
            "min eigenvalue {}, probe minimum {}, sigma {}, margin {:e}",
            report.min_form_eigenvalue,
            report.min_probe_quotient,
            report.sigma,
            report.ellipticity_margin
        ),
    );
    let mut extra = Vec::new();
    if !ctx.setup.source.is_zero() {
        let pairs = ctx.cfg.pairs.unwrap_or(100);
        let worst = lipschitz_sweep(&ctx.setup.source, &ctx.grid, pairs, ctx.cfg.seed())?;
        let bound = ctx.setup.source.lipschitz();
        ctx.check(
            "lipschitz",
            worst <= bound * (1.0 + 1e-9),
            format!("largest ratio {worst} over {pairs} pairs, declared L = {bound}"),
        );
        extra.push(("lipschitz_ratio", worst));
    }
    let path = ctx.path("validation.csv");
    csvio::write_validation(&path, &report, &extra)
}

fn run_forward(ctx: &mut Ctx) -> Result<()> {
    let traj = solve(ctx)?;
    let defect = trajectory_boundary_defect(&traj, &ctx.setup.coeffs)?;
    let tol = boundary_tolerance(&ctx.grid, ctx.setup.bc);
    ctx.check(
        "boundary",
        defect <= tol,
        format!("largest defect {defect:e}, tolerance {tol:e}"),
    );
    let l2 = norm(traj.terminal(), &ctx.grid, NormKind::L2)?;
    let h1 = norm(traj.terminal(), &ctx.grid, NormKind::H1)?;
    ctx.note(format!("terminal L2 norm {l2}, H1 norm {h1}"));
    let path = ctx.path("trajectory.csv");
    csvio::write_trajectory(&path, &traj, ctx.cfg.stride.unwrap_or(10))
}

fn run_carleman(ctx: &mut Ctx) -> Result<()> {
    let z = solve(ctx)?;
    let s = ctx.cfg.s.clone().unwrap_or_default();
    let lambda = ctx.cfg.lambda.clone().unwrap_or_default();
    let report = sweep_constant(&z, &ctx.setup.coeffs, &s, &lambda)?;
    ctx.check(
        "sup_c_star_finite",
        report.sup_c_star.is_finite(),
        format!(
            "sup c* = {} at (s, lambda) = {:?}",
            report.sup_c_star, report.argmax
        ),
    );
    let top = lambda.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let spread = report.spread_at(top).unwrap_or(f64::NAN);
    ctx.check(
        "top_octave_spread",
        spread < 2.0,
        format!("max/min of c* over the top octave of s at lambda = {top}: {spread}"),
    );
    if report.bc_warning {
        ctx.note(format!(
            "warning: trajectory violates the boundary condition (defect {:e})",
            report.bc_defect.unwrap_or(f64::NAN)
        ));
    }
    for (l, mono) in &report.nonincreasing_in_s {
        ctx.note(format!("lambda = {l}: c* nonincreasing in s: {mono}"));
    }
    let w = CarlemanWeight::new(lambda[0], s[0])?;
    let j1 = j1_identity_check(&z, &w)?;
    ctx.note(format!(
        "J1 identity at (s, lambda) = ({}, {}): relative defect {:e}",
        s[0], lambda[0], j1.defect
    ));
    let path = ctx.path("carleman_sweep.csv");
    csvio::write_sweep(&path, &report)
}

fn run_holder(ctx: &mut Ctx) -> Result<()> {
    let lambda = ctx.cfg.lambda.as_ref().map(|l| l[0]).unwrap_or(4.0);
    let mut hc = HolderConfig::new(
        ctx.setup.clone(),
        ctx.grid,
        ctx.cfg.t0.unwrap_or(0.5),
        lambda,
        ctx.cfg.eps.clone().unwrap_or_default(),
    );
    hc.family = ctx.cfg.family()?;
    hc.base_amplitude = ctx.cfg.amplitude.unwrap_or(1.0);
    hc.bound = ctx.cfg.bound;
    hc.options = ctx.cfg.options();
    let report = holder_experiment(&hc)?;
    let slope = report.slope.unwrap_or(f64::NAN);
    ctx.check(
        "slope",
        report.slope_ok,
        format!(
            "fitted slope {slope}, theta {}, required ≥ theta − 0.02",
            report.theta
        ),
    );
    ctx.check(
        "holder_inequality",
        report.violations == 0,
        format!(
            "{} violations with C = {} (calibrated {} × {})",
            report.violations, report.c, report.c_calibrated, hc.c_margin
        ),
    );
    ctx.check(
        "solver",
        report.failures == 0,
        format!("{} failed amplitudes", report.failures),
    );
    if hc.bound.is_some() {
        ctx.check(
            "a_priori_bound",
            report.within_bound,
            format!("observed sup H1 norm {}", report.observed_bound),
        );
    }
    let summary = format!(
        "theta={} slope={} C={} violations={} failures={}",
        report.theta, slope, report.c, report.violations, report.failures
    );
    let path = ctx.path("holder_records.csv");
    csvio::write_records(
        &path,
        &report.records,
        Some(report.theta),
        report.slope,
        &summary,
    )
}

fn run_lograte(ctx: &mut Ctx) -> Result<()> {
    let mut lc = LogConfig::new(
        ctx.setup.clone(),
        ctx.grid,
        ctx.cfg.alpha.unwrap_or(0.5),
        ctx.cfg.eps.clone().unwrap_or_default(),
    );
    lc.family = ctx.cfg.family()?;
    lc.options = ctx.cfg.options();
    let report = log_experiment(&lc)?;
    ctx.check(
        "bounded_nonincreasing",
        report.nonincreasing && report.sup_product.is_finite(),
        format!(
            "sup of E0 (log 1/D)^alpha = {} (alpha = {})",
            report.sup_product, report.alpha
        ),
    );
    ctx.check(
        "solver",
        report.failures == 0,
        format!("{} failed amplitudes", report.failures),
    );
    for r in report.records.iter().filter(|r| r.excluded.is_some()) {
        ctx.note(format!(
            "epsilon {} excluded: {}",
            r.epsilon,
            r.excluded.as_deref().unwrap_or("")
        ));
    }
    ctx.note(format!(
        "M1 = {}, derivative cross-check gap {:e}",
        report.m1, report.derivative_gap
    ));
    let summary = format!(
        "alpha={} sup_product={} nonincreasing={} M1={}",
        report.alpha, report.sup_product, report.nonincreasing, report.m1
    );
    let path = ctx.path("lograte_records.csv");
    csvio::write_records(&path, &report.records, None, None, &summary)
}

fn run_reconstruct(ctx: &mut Ctx) -> Result<()> {
    let filter = ctx.cfg.filter.unwrap_or_default();
    let alpha = ctx.cfg.alpha.unwrap_or(0.5);
    let deltas = ctx.cfg.delta.clone().unwrap_or_default();
    if let Some(input) = ctx.cfg.input.clone() {
        let terminal = csvio::read_grid_function(&input, &ctx.grid)?;
        let opts = ReconstructOptions::new(filter, alpha, deltas.first().copied().unwrap_or(0.0))?;
        let rec = reconstruct(
            terminal.view(),
            &ctx.setup.coeffs,
            &ctx.grid,
            ctx.setup.bc,
            &opts,
        )?;
        ctx.check(
            "finite",
            rec.field.iter().all(|v| v.is_finite()),
            format!("{} of {} modes retained", rec.retained, rec.modes),
        );
        let path = ctx.path("reconstruction.csv");
        return csvio::write_grid_function(&path, rec.field.view(), &ctx.grid);
    }
    let report = error_rate_sweep(&ctx.setup.coeffs, &ctx.grid, filter, alpha, &deltas)?;
    let slope = report.slope.unwrap_or(f64::NAN);
    ctx.check(
        "error_rate",
        report.passed(),
        format!(
            "slope of log error vs log log(1/delta) = {slope}, required ≤ {}",
            -alpha + 0.1
        ),
    );
    ctx.note(format!("noise mode k = {}", report.noise_mode));
    let rows: Vec<Vec<f64>> = report
        .deltas
        .iter()
        .zip(&report.errors)
        .map(|(d, e)| vec![*d, *e])
        .collect();
    let path = ctx.path("reconstruction.csv");
    csvio::write_table(&path, &["delta", "error"], &rows)
}

fn manifest(cfg: &RunConfig, outcome: &Outcome, timing_ms: f64) -> Result<String> {
    let mut text = cfg.to_toml()?;
    let mut run = toml::Table::new();
    run.insert("version".into(), env!("CARGO_PKG_VERSION").into());
    run.insert("passed".into(), outcome.passed().into());
    run.insert("elapsed_ms".into(), timing_ms.into());
    let files: Vec<toml::Value> = outcome
        .files
        .iter()
        .filter_map(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned().into())
        .collect();
    run.insert("files".into(), toml::Value::Array(files));
    let mut wrapper = toml::Table::new();
    wrapper.insert("run".into(), toml::Value::Table(run));
    text.push('\n');
    text.push_str(&toml::to_string(&wrapper).map_err(|e| Error::Config(e.to_string()))?);
    Ok(text)
}

/// Resolves `cfg`, runs its command and writes all artifacts.
pub fn run(cfg: RunConfig) -> Result<Outcome> {
    let start = Instant::now();
    let cfg = cfg.resolve()?;
    let out = cfg.out_dir().to_path_buf();
    std::fs::create_dir_all(&out)?;
    let mut ctx = Ctx {
        setup: cfg.setup()?,
        grid: cfg.grid()?,
        cfg,
        checks: Vec::new(),
        notes: Vec::new(),
        files: Vec::new(),
    };
    match ctx.cfg.command() {
        Command::Validate => run_validate(&mut ctx)?,
        Command::Forward => run_forward(&mut ctx)?,
        Command::Carleman => run_carleman(&mut ctx)?,
        Command::Holder => run_holder(&mut ctx)?,
        Command::Lograte => run_lograte(&mut ctx)?,
        Command::Reconstruct => run_reconstruct(&mut ctx)?,
    }
    let mut outcome = Outcome {
        command: ctx.cfg.command(),
        checks: ctx.checks,
        notes: ctx.notes,
        files: ctx.files,
    };
    let summary_path = out.join("summary.txt");
    std::fs::write(&summary_path, outcome.summary())?;
    outcome.files.push(summary_path);
    let manifest_path = out.join("manifest.toml");
    outcome.files.push(manifest_path.clone());
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    std::fs::write(&manifest_path, manifest(&ctx.cfg, &outcome, elapsed)?)?;
    Ok(outcome)
}
