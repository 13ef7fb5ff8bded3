//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints its PASS/FAIL line, and runs them one at a time so the
//! wall-clock limits are meaningful.

use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use parastab::carleman::{j1_identity_check, sweep_constant, CarlemanWeight};
use parastab::discretize::{trace_check, Grid, Trajectory};
use parastab::forward::{robin_compatible_profile, solve_setup, SolveOptions};
use parastab::model::{lipschitz_sweep, preset, validate, CoefficientSet, Preset, Region};
use parastab::reconstruct::{error_rate_sweep, Filter};
use parastab::runner::{self, Command, RunConfig};
use parastab::stability::{holder_experiment, log_experiment, theta, HolderConfig, LogConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    passed: bool,
    detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Verdict {
            passed,
            detail: detail.into(),
        }
    }
}

type Outcome = parastab::Result<Verdict>;
type Criterion = (&'static str, fn() -> Outcome);

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() <= limit_s
}

fn sup_error(traj: &Trajectory, exact: impl Fn(f64, usize) -> f64) -> f64 {
    let grid = traj.grid();
    let mut err = 0.0_f64;
    for ((i, k), v) in traj.terminal().indexed_iter() {
        err = err.max((v - exact(grid.x(i), k)).abs());
    }
    err
}

fn forward_accuracy() -> Outcome {
    let grid = Grid::on_pi(200, 1.0, 2000)?;
    let opts = SolveOptions::default();
    let start = Instant::now();
    let heat = solve_setup(
        &preset(Preset::Heat1d),
        grid.sample(1, |x, _| x.sin()).view(),
        &grid,
        &opts,
    )?;
    let heat_time = start.elapsed();
    let heat_err = sup_error(&heat, |x, _| (-1.0f64).exp() * x.sin());

    // (1, 1) is an eigenvector of the cross-diffusion matrix with eigenvalue 3
    let start = Instant::now();
    let coupled = solve_setup(
        &preset(Preset::Coupled2),
        grid.sample(2, |x, _| x.sin()).view(),
        &grid,
        &opts,
    )?;
    let coupled_time = start.elapsed();
    let coupled_err = sup_error(&coupled, |x, _| (-3.0f64).exp() * x.sin());

    Ok(Verdict::new(
        heat_err <= 1e-3 && coupled_err <= 1e-3 && within(heat_time, 5.0) && within(coupled_time, 5.0),
        format!(
            "heat1d sup error {heat_err:.3e} in {heat_time:.2?}, coupled2 sup error {coupled_err:.3e} in {coupled_time:.2?}"
        ),
    ))
}

fn carleman_constant() -> Outcome {
    let grid = Grid::on_pi(100, 1.0, 1000)?;
    let s = [2.0, 4.0, 8.0, 16.0, 32.0];
    let lambda = [2.0, 4.0, 8.0];
    let start = Instant::now();
    let mut passed = true;
    let mut parts = Vec::new();
    for (name, which) in [("heat1d", Preset::Heat1d), ("coupled2", Preset::Coupled2)] {
        for robin in [false, true] {
            let mut setup = preset(which);
            let nc = setup.coeffs.components();
            let u0 = if robin {
                setup = setup.with_robin(0.5);
                robin_compatible_profile(&setup.coeffs, &grid, 0.0)?
            } else {
                grid.sample(nc, |x, _| x.sin())
            };
            let z = solve_setup(&setup, u0.view(), &grid, &SolveOptions::default())?;
            let report = sweep_constant(&z, &setup.coeffs, &s, &lambda)?;
            let spread = report.spread_at(8.0).unwrap_or(f64::NAN);
            let ok = report.sup_c_star.is_finite() && spread < 2.0 && !report.bc_warning;
            passed &= ok;
            parts.push(format!(
                "{name}/{}: sup {:.3e}, spread {spread:.4}",
                if robin { "robin" } else { "dirichlet" },
                report.sup_c_star
            ));
        }
    }
    let elapsed = start.elapsed();
    parts.push(format!("{elapsed:.2?}"));
    Ok(Verdict::new(
        passed && within(elapsed, 60.0),
        parts.join("; "),
    ))
}

fn j1_identity() -> Outcome {
    let w = CarlemanWeight::new(1.0, 1.0)?;
    let setup = preset(Preset::Heat1d);
    let defect = |nt: usize| -> parastab::Result<f64> {
        let grid = Grid::on_pi(200, 1.0, nt)?;
        let z = solve_setup(
            &setup,
            grid.sample(1, |x, _| x.sin()).view(),
            &grid,
            &SolveOptions::default(),
        )?;
        Ok(j1_identity_check(&z, &w)?.defect)
    };
    let coarse = defect(2000)?;
    let fine = defect(4000)?;
    let ratio = coarse / fine;
    Ok(Verdict::new(
        coarse <= 1e-3 && ratio >= 3.5,
        format!("defect {coarse:.3e} at nt = 2000, {fine:.3e} at nt = 4000, ratio {ratio:.2}"),
    ))
}

fn holder_rate() -> Outcome {
    let grid = Grid::on_pi(100, 1.0, 1000)?;
    let eps = vec![1e-1, 1e-2, 1e-3, 1e-4];
    let th = theta(0.5, 1.0, 4.0)?;

    let start = Instant::now();
    let linear = holder_experiment(&HolderConfig::new(
        preset(Preset::Heat1d),
        grid,
        0.5,
        4.0,
        eps.clone(),
    ))?;
    let linear_time = start.elapsed();
    let slope = linear.slope.unwrap_or(f64::NAN);

    let start = Instant::now();
    let semi = holder_experiment(&HolderConfig::new(
        preset(Preset::SineGradient),
        grid,
        0.5,
        4.0,
        eps,
    ))?;
    let semi_time = start.elapsed();

    let passed = (slope - 1.0).abs() <= 0.02
        && slope >= th
        && linear.violations == 0
        && linear.failures == 0
        && semi.violations == 0
        && semi.failures == 0
        && within(linear_time, 30.0)
        && within(semi_time, 30.0);
    Ok(Verdict::new(
        passed,
        format!(
            "linear slope {slope:.4} vs theta {th:.6} ({linear_time:.2?}); semilinear C = {:.4e}, {} violations ({semi_time:.2?})",
            semi.c, semi.violations
        ),
    ))
}

fn log_rate() -> Outcome {
    let grid = Grid::on_pi(200, 1.0, 2000)?;
    let eps = vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let report = log_experiment(&LogConfig::new(preset(Preset::Heat1d), grid, 0.5, eps))?;

    // z = ε e^{-t} sin x, so every ∂_t^k z(T) has H¹ norm ε e^{-1} √π
    let mut worst = 0.0_f64;
    for r in &report.records {
        let exact = 3.0 * r.epsilon * (-1.0f64).exp() * PI.sqrt();
        let d = r.d.unwrap_or(f64::NAN);
        worst = worst.max(((d - exact) / exact).abs());
    }
    let included = report.included().count();
    Ok(Verdict::new(
        report.passed() && included == 5 && worst <= 1e-3,
        format!(
            "sup product {:.4e}, nonincreasing {}, {included} records, closed-form D relative gap {worst:.2e}",
            report.sup_product, report.nonincreasing
        ),
    ))
}

fn assumptions() -> Outcome {
    let mut passed = true;
    let mut parts = Vec::new();
    for which in [Preset::Heat1d, Preset::Coupled2, Preset::SineGradient] {
        let report = validate(&preset(which).coeffs, 256, 0)?;
        passed &= report.passed;
        parts.push(format!(
            "{} {}",
            which.name(),
            if report.passed { "ok" } else { "rejected" }
        ));
    }

    let skew = CoefficientSet::constant_1d(
        &[vec![2.0, 1.0], vec![0.0, 2.0]],
        None,
        None,
        1.0,
        Region::interval(PI, 1.0),
    )?;
    let report = validate(&skew, 64, 0)?;
    let caught = !report.passed && report.symmetry_defect > parastab::model::SYMMETRY_TOLERANCE;
    passed &= caught;
    parts.push(format!(
        "asymmetric set defect {:.3}",
        report.symmetry_defect
    ));

    let setup = preset(Preset::SineGradient);
    let grid = Grid::on_pi(100, 1.0, 10)?;
    let ratio = lipschitz_sweep(&setup.source, &grid, 100, 0)?;
    passed &= ratio <= 1.0 + 1e-9;
    parts.push(format!("Lipschitz ratio {ratio:.6}"));
    Ok(Verdict::new(passed, parts.join("; ")))
}

fn trace_inequality() -> Outcome {
    let grid = Grid::on_pi(200, 1.0, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut held = 0;
    let mut tightest = 0.0_f64;
    for _ in 0..100 {
        let components = rng.random_range(1..=2);
        let modes: Vec<(f64, f64, f64)> = (0..components * 9)
            .map(|_| {
                (
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(0.0..PI),
                )
            })
            .collect();
        let u = grid.sample(components, |x, k| {
            (0..9)
                .map(|j| {
                    let (a, b, shift) = modes[k * 9 + j];
                    let f = j as f64;
                    (a * (f * x + shift).cos() + b * (f * x).sin()) / (1.0 + f)
                })
                .sum()
        });
        let c = trace_check(u.view(), &grid, 0.5)?;
        if c.holds {
            held += 1;
        }
        if c.rhs > 0.0 {
            tightest = tightest.max(c.lhs / c.rhs);
        }
    }
    Ok(Verdict::new(
        held == 100,
        format!("{held}/100 fields, largest lhs/rhs {tightest:.4}"),
    ))
}

fn reconstruction_trend() -> Outcome {
    let grid = Grid::on_pi(100, 1.0, 10)?;
    let deltas = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let report = error_rate_sweep(
        &preset(Preset::Heat1d).coeffs,
        &grid,
        Filter::Tikhonov,
        0.5,
        &deltas,
    )?;
    Ok(Verdict::new(
        report.passed(),
        format!(
            "slope {:.4} (needs ≤ -0.4), noise mode k = {}",
            report.slope.unwrap_or(f64::NAN),
            report.noise_mode
        ),
    ))
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .expect("output directory exists")
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir()?;
    let mut passed = true;
    let mut compared = 0;
    for command in Command::ALL {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let cfg = RunConfig {
                command: Some(command),
                preset: Some(
                    if command == Command::Validate {
                        "sine_gradient"
                    } else {
                        "heat1d"
                    }
                    .into(),
                ),
                nx: Some(60),
                nt: Some(300),
                family: (command == Command::Holder).then(|| "random_smooth:6".into()),
                seed: Some(11),
                out: Some(root.path().join(format!("{command}-{rep}"))),
                ..RunConfig::default()
            };
            let dir = cfg.out.clone().unwrap();
            runner::run(cfg)?;
            outputs.push(csv_files(&dir));
        }
        compared += outputs[0].len();
        passed &= !outputs[0].is_empty() && outputs[0] == outputs[1];
    }
    Ok(Verdict::new(
        passed,
        format!("{compared} CSV files compared across 6 commands"),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("forward accuracy", forward_accuracy),
        ("Carleman constant", carleman_constant),
        ("J1 identity", j1_identity),
        ("Hölder rate", holder_rate),
        ("logarithmic rate", log_rate),
        ("assumption suite", assumptions),
        ("trace inequality", trace_inequality),
        ("reconstruction trend", reconstruction_trend),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let (passed, detail) = match check() {
            Ok(v) => (v.passed, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !passed {
            failed += 1;
        }
        println!(
            "criterion {} ({name}): {} - {detail}",
            n + 1,
            if passed { "PASS" } else { "FAIL" }
        );
    }
    println!("acceptance: {}/9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
