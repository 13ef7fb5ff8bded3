//! Implicit time stepping for `∂_t u = A(t) u + f(x, t, u, ∇u)`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use ndarray::{s, Array2, Array3, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::banded::BandLu;
use crate::discretize::{
    assemble_operator, boundary_defect, boundary_tolerance, evaluate_source, BlockTridiagonal,
    Grid, Trajectory,
};
use crate::error::{Error, Result};
use crate::model::{BoundaryCondition, CoefficientSet, ProblemSetup, Semilinearity};

/// Largest admissible `Δt · L` for the Picard step.
pub const PICARD_STEP_BOUND: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    BackwardEuler,
    #[default]
    CrankNicolson,
}

impl Scheme {
    /// Implicitness `θ` of the one-step θ-method.
    fn theta(self) -> f64 {
        match self {
            Scheme::BackwardEuler => 1.0,
            Scheme::CrankNicolson => 0.5,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::BackwardEuler => "backward_euler",
            Scheme::CrankNicolson => "crank_nicolson",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backward_euler" | "be" => Ok(Scheme::BackwardEuler),
            "crank_nicolson" | "cn" => Ok(Scheme::CrankNicolson),
            _ => Err(Error::Config(format!(
                "unknown scheme '{s}' (expected backward_euler or crank_nicolson)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub scheme: Scheme,
    pub picard_max: usize,
    pub picard_tol: f64,
    /// Evaluate `f` at the previous step instead of iterating.
    pub freeze_nonlinearity: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            scheme: Scheme::CrankNicolson,
            picard_max: 50,
            picard_tol: 1e-12,
            freeze_nonlinearity: false,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.picard_tol > 0.0) {
            return Err(Error::Config(format!(
                "picard_tol = {} must be positive",
                self.picard_tol
            )));
        }
        if self.picard_max == 0 {
            return Err(Error::Config("picard_max must be at least 1".into()));
        }
        Ok(())
    }
}

fn max_abs<'a>(it: impl IntoIterator<Item = &'a f64>) -> f64 {
    it.into_iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Operator at one time level together with the factored step matrix.
struct Level {
    op: BlockTridiagonal,
    lu: BandLu,
}

struct Stepper<'a> {
    coeffs: &'a CoefficientSet,
    bc: BoundaryCondition,
    grid: Grid,
    theta: f64,
    cached: Option<Level>,
}

impl<'a> Stepper<'a> {
    fn new(coeffs: &'a CoefficientSet, bc: BoundaryCondition, grid: Grid, scheme: Scheme) -> Self {
        Stepper {
            coeffs,
            bc,
            grid,
            theta: scheme.theta(),
            cached: None,
        }
    }

    fn level(&self, t: f64) -> Result<Level> {
        let op = assemble_operator(self.coeffs, t, &self.grid, self.bc)?.full();
        let lu = op.shifted_band(self.theta * self.grid.dt()).factor()?;
        Ok(Level { op, lu })
    }

    /// Operator at `t_m`; reused for every level when coefficients are frozen in time.
    fn operator_at(&mut self, m: usize) -> Result<Option<Level>> {
        if self.coeffs.is_time_independent() {
            if self.cached.is_none() {
                self.cached = Some(self.level(0.0)?);
            }
            Ok(None)
        } else {
            Ok(Some(self.level(self.grid.t(m))?))
        }
    }
}

fn solve_level(lu: &BandLu, op: &BlockTridiagonal, rhs: &Array2<f64>) -> Array2<f64> {
    let mut flat: Vec<f64> = rhs.iter().copied().collect();
    let nc = op.components();
    let pin = |flat: &mut [f64]| {
        for i in (0..op.nodes()).filter(|&i| op.is_pinned(i)) {
            flat[i * nc..(i + 1) * nc].fill(0.0);
        }
    };
    pin(&mut flat);
    lu.solve(&mut flat);
    // pivoting can leave round-off on the identity rows
    pin(&mut flat);
    Array2::from_shape_vec(rhs.raw_dim(), flat).expect("shape preserved")
}

fn integrate(
    coeffs: &CoefficientSet,
    bc: BoundaryCondition,
    source: &Semilinearity,
    u0: ArrayView2<f64>,
    grid: &Grid,
    opts: &SolveOptions,
) -> Result<Trajectory> {
    opts.validate()?;
    let nc = coeffs.components();
    if u0.dim() != (grid.nodes(), nc) {
        return Err(Error::Config(format!(
            "initial state has shape {:?}, expected ({}, {nc})",
            u0.dim(),
            grid.nodes()
        )));
    }
    let nonlinear = !source.is_zero();
    if nonlinear && !opts.freeze_nonlinearity && grid.dt() * source.lipschitz() > PICARD_STEP_BOUND
    {
        return Err(Error::Config(format!(
            "Δt·L = {} exceeds {PICARD_STEP_BOUND}; refine the time grid",
            grid.dt() * source.lipschitz()
        )));
    }

    let dt = grid.dt();
    let mut stepper = Stepper::new(coeffs, bc, *grid, opts.scheme);
    let theta = stepper.theta;
    let mut values = Array3::zeros((grid.nt + 1, grid.nodes(), nc));
    values.slice_mut(s![0, .., ..]).assign(&u0);

    let mut prev_level = stepper.operator_at(0)?;
    let mut u = u0.to_owned();
    for m in 0..grid.nt {
        let (t0, t1) = (grid.t(m), grid.t(m + 1));
        let next_level = stepper.operator_at(m + 1)?;
        let (op_now, op_next, lu_next) = {
            let cached = stepper.cached.as_ref();
            let now = prev_level.as_ref().or(cached).expect("operator available");
            let next = next_level.as_ref().or(cached).expect("operator available");
            (&now.op, &next.op, &next.lu)
        };

        let mut base = u.clone();
        if theta < 1.0 {
            base.scaled_add((1.0 - theta) * dt, &op_now.apply(u.view()));
        }

        let f_now = if nonlinear {
            Some(evaluate_source(source, u.view(), grid, t0)?)
        } else {
            None
        };

        let mut next = match &f_now {
            None => solve_level(lu_next, op_next, &base),
            Some(f0) => {
                let mut rhs = base.clone();
                rhs.scaled_add(dt, f0);
                solve_level(lu_next, op_next, &rhs)
            }
        };

        if nonlinear && !opts.freeze_nonlinearity {
            let f0 = f_now.as_ref().expect("nonlinear step has f at t_m");
            let (w_now, w_next) = match opts.scheme {
                Scheme::BackwardEuler => (0.0, 1.0),
                Scheme::CrankNicolson => (0.5, 0.5),
            };
            let mut converged = false;
            let mut residual = f64::INFINITY;
            for _ in 0..opts.picard_max {
                let f1 = evaluate_source(source, next.view(), grid, t1)?;
                let mut rhs = base.clone();
                if w_now != 0.0 {
                    rhs.scaled_add(dt * w_now, f0);
                }
                rhs.scaled_add(dt * w_next, &f1);
                let candidate = solve_level(lu_next, op_next, &rhs);
                let change = max_abs((&candidate - &next).iter());
                let size = max_abs(candidate.iter());
                residual = if change == 0.0 {
                    0.0
                } else {
                    change / size.max(f64::MIN_POSITIVE)
                };
                next = candidate;
                if !residual.is_finite() {
                    return Err(Error::Divergence { step: m + 1 });
                }
                if residual <= opts.picard_tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::PicardNonConvergence {
                    step: m + 1,
                    iterations: opts.picard_max,
                    residual,
                });
            }
        }

        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step: m + 1 });
        }
        values.slice_mut(s![m + 1, .., ..]).assign(&next);
        u = next;
        prev_level = next_level;
    }
    Trajectory::new(values, *grid, bc)
}

/// Checks `u0` against the boundary condition at `t = 0`.
pub fn check_initial_state(
    coeffs: &CoefficientSet,
    bc: BoundaryCondition,
    u0: ArrayView2<f64>,
    grid: &Grid,
) -> Result<()> {
    let defect = boundary_defect(u0, coeffs, 0.0, grid, bc)?;
    let tolerance = boundary_tolerance(grid, bc);
    if defect > tolerance {
        return Err(Error::BoundaryViolation { defect, tolerance });
    }
    Ok(())
}

/// Solves the system on `grid` from `u0` with the θ-method of `opts.scheme`.
///
/// Each step solves `(I − θΔt A(t_{m+1})) u_{m+1} = (I + (1−θ)Δt A(t_m)) u_m + Δt f̄`,
/// where `f̄` is `f(u_{m+1})` (backward Euler), the average of `f(u_m)` and
/// `f(u_{m+1})` (Crank–Nicolson), or `f(u_m)` when the nonlinearity is frozen.
/// Pinned Dirichlet nodes are set to zero exactly.
pub fn solve_forward(
    coeffs: &CoefficientSet,
    bc: BoundaryCondition,
    source: &Semilinearity,
    u0: ArrayView2<f64>,
    grid: &Grid,
    opts: &SolveOptions,
) -> Result<Trajectory> {
    if u0.dim() == (grid.nodes(), coeffs.components()) {
        check_initial_state(coeffs, bc, u0, grid)?;
    }
    integrate(coeffs, bc, source, u0, grid, opts)
}

/// [`solve_forward`] on a [`ProblemSetup`].
pub fn solve_setup(
    setup: &ProblemSetup,
    u0: ArrayView2<f64>,
    grid: &Grid,
    opts: &SolveOptions,
) -> Result<Trajectory> {
    solve_forward(&setup.coeffs, setup.bc, &setup.source, u0, grid, opts)
}

/// Trajectories of `∂_t^j u`, `j = 0..=order`, for the linear problem with
/// time-independent coefficients. Each one solves the same system from
/// `A^j u_0`.
pub fn time_derivative_trajectories(
    coeffs: &CoefficientSet,
    bc: BoundaryCondition,
    u0: ArrayView2<f64>,
    grid: &Grid,
    opts: &SolveOptions,
    order: usize,
) -> Result<Vec<Trajectory>> {
    if !coeffs.is_time_independent() {
        return Err(Error::Unsupported(
            "time derivatives from A^j u0 need time-independent coefficients".into(),
        ));
    }
    if order > 2 {
        return Err(Error::Unsupported(format!("derivative order {order} > 2")));
    }
    let zero = Semilinearity::zero(coeffs.components(), coeffs.dim());
    let base = solve_forward(coeffs, bc, &zero, u0, grid, opts)?;
    let op = assemble_operator(coeffs, 0.0, grid, bc)?.full();
    let mut out = vec![base];
    let mut data = u0.to_owned();
    for _ in 0..order {
        data = op.apply(data.view());
        // A^j u0 is only boundary compatible up to discretization error
        out.push(integrate(coeffs, bc, &zero, data.view(), grid, opts)?);
    }
    Ok(out)
}

/// Relative gap between second-order time differences of `trajs[j-1]` and
/// `trajs[j]`, over interior time levels.
pub fn derivative_consistency(trajs: &[Trajectory]) -> Vec<f64> {
    trajs
        .windows(2)
        .map(|w| {
            let nt = w[0].grid().nt;
            let mut gap = 0.0_f64;
            let mut scale = 0.0_f64;
            for m in 1..nt {
                let fd = w[0].time_derivative(m);
                let direct = w[1].slice(m);
                gap = gap.max(max_abs((&fd - &direct).iter()));
                scale = scale.max(max_abs(direct.iter()));
            }
            if scale == 0.0 {
                gap
            } else {
                gap / scale
            }
        })
        .collect()
}

/// A smooth state satisfying the Robin condition exactly at time `t`:
/// `u = 1 + q_0 φ_0 + r φ_X` with `φ_0 = x(X−x)²/X²`, `φ_X = −x²(X−x)/X²`,
/// where `M(0) q_0 = p(0)` and `M(X) r = −p(X)` componentwise.
pub fn robin_compatible_profile(
    coeffs: &CoefficientSet,
    grid: &Grid,
    t: f64,
) -> Result<Array2<f64>> {
    let p = coeffs
        .robin()
        .ok_or_else(|| Error::Config("Robin coefficient p is not set".into()))?;
    let nc = coeffs.components();
    let len = grid.length;
    let mut slopes = Vec::with_capacity(2);
    for (x, sign) in [(0.0, 1.0), (len, -1.0)] {
        let mut m = DMatrix::zeros(nc, nc);
        for l in 0..nc {
            for k in 0..nc {
                m[(l, k)] = coeffs
                    .diffusion(0, 0, k, l)
                    .eval_checked(&[x], t, "diffusion")?;
            }
        }
        let pv = p.eval_checked(&[x], t, "Robin coefficient")?;
        let rhs = nalgebra::DVector::from_element(nc, sign * pv);
        let q = m.lu().solve(&rhs).ok_or_else(|| {
            Error::Config(format!("boundary diffusion matrix at x = {x} is singular"))
        })?;
        slopes.push(q);
    }
    Ok(grid.sample(nc, |x, k| {
        let phi0 = x * (len - x).powi(2) / (len * len);
        let phix = -x * x * (len - x) / (len * len);
        1.0 + slopes[0][k] * phi0 + slopes[1][k] * phix
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::trajectory_boundary_defect;
    use crate::model::{preset, Preset, ScalarField};

    fn sup_error(traj: &Trajectory, m: usize, f: impl Fn(f64, usize) -> f64) -> f64 {
        let grid = traj.grid();
        let u = traj.slice(m);
        let mut e = 0.0_f64;
        for i in 0..grid.nodes() {
            for k in 0..traj.components() {
                e = e.max((u[[i, k]] - f(grid.x(i), k)).abs());
            }
        }
        e
    }

    #[test]
    fn heat_sine_mode_decays_like_exp_minus_t() {
        let setup = preset(Preset::Heat1d);
        let grid = Grid::on_pi(200, 1.0, 2000).unwrap();
        let u0 = grid.sample(1, |x, _| x.sin());
        let traj = solve_setup(&setup, u0.view(), &grid, &SolveOptions::default()).unwrap();
        let err = sup_error(&traj, grid.nt, |x, _| (-1.0f64).exp() * x.sin());
        assert!(err <= 1e-3, "{err}");
    }

    #[test]
    fn coupled_eigenvector_decays_at_rate_three() {
        let setup = preset(Preset::Coupled2);
        let grid = Grid::on_pi(200, 1.0, 2000).unwrap();
        let u0 = grid.sample(2, |x, _| x.sin());
        let traj = solve_setup(&setup, u0.view(), &grid, &SolveOptions::default()).unwrap();
        let err = sup_error(&traj, grid.nt, |x, _| (-3.0f64).exp() * x.sin());
        assert!(err <= 1e-3, "{err}");
    }

    #[test]
    fn semilinear_zero_state_stays_zero() {
        let setup = preset(Preset::SineGradient);
        let grid = Grid::on_pi(50, 1.0, 100).unwrap();
        let u0 = grid.sample(1, |_, _| 0.0);
        let traj = solve_setup(&setup, u0.view(), &grid, &SolveOptions::default()).unwrap();
        assert!(traj.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn crank_nicolson_converges_at_second_order() {
        let setup = preset(Preset::Heat1d);
        let err = |nx: usize, nt: usize| {
            let grid = Grid::on_pi(nx, 1.0, nt).unwrap();
            let u0 = grid.sample(1, |x, _| x.sin());
            let traj = solve_setup(&setup, u0.view(), &grid, &SolveOptions::default()).unwrap();
            sup_error(&traj, nt, |x, _| (-1.0f64).exp() * x.sin())
        };
        let coarse = err(19, 20);
        let fine = err(39, 40);
        assert!(coarse / fine >= 3.5, "{coarse} / {fine}");
    }

    #[test]
    fn linear_solves_superpose() {
        let setup = preset(Preset::Coupled2);
        let grid = Grid::on_pi(40, 1.0, 50).unwrap();
        let opts = SolveOptions::default();
        let u0 = grid.sample(2, |x, k| (x * (k + 1) as f64).sin());
        let v0 = grid.sample(2, |x, k| x * (std::f64::consts::PI - x) * (1.0 + k as f64));
        let w0 = &u0 * 2.0 - &v0 * 0.5;
        let u = solve_setup(&setup, u0.view(), &grid, &opts).unwrap();
        let v = solve_setup(&setup, v0.view(), &grid, &opts).unwrap();
        let w = solve_setup(&setup, w0.view(), &grid, &opts).unwrap();
        let combo = u.values() * 2.0 - v.values() * 0.5;
        let gap = max_abs((&combo - w.values()).iter());
        assert!(gap < 1e-12, "{gap}");
    }

    #[test]
    fn dirichlet_boundary_nodes_are_exactly_zero() {
        let setup = preset(Preset::SineGradient);
        let grid = Grid::on_pi(30, 1.0, 40).unwrap();
        let u0 = grid.sample(1, |x, _| x.sin() + 0.3 * (2.0 * x).sin());
        let traj = solve_setup(&setup, u0.view(), &grid, &SolveOptions::default()).unwrap();
        let last = grid.nodes() - 1;
        for m in 1..=grid.nt {
            assert_eq!(traj.slice(m)[[0, 0]], 0.0);
            assert_eq!(traj.slice(m)[[last, 0]], 0.0);
        }
    }

    #[test]
    fn robin_trajectory_stays_boundary_compatible() {
        let setup = preset(Preset::Coupled2).with_robin(0.5);
        let grid = Grid::on_pi(100, 1.0, 100).unwrap();
        let u0 = robin_compatible_profile(&setup.coeffs, &grid, 0.0).unwrap();
        assert!(boundary_defect(u0.view(), &setup.coeffs, 0.0, &grid, setup.bc).unwrap() < 1e-12);
        let traj = solve_setup(&setup, u0.view(), &grid, &SolveOptions::default()).unwrap();
        let defect = trajectory_boundary_defect(&traj, &setup.coeffs).unwrap();
        assert!(defect <= boundary_tolerance(&grid, setup.bc), "{defect}");
    }

    #[test]
    fn incompatible_initial_state_is_rejected() {
        let setup = preset(Preset::Heat1d);
        let grid = Grid::on_pi(20, 1.0, 10).unwrap();
        let u0 = grid.sample(1, |x, _| x.cos());
        let r = solve_setup(&setup, u0.view(), &grid, &SolveOptions::default());
        assert!(matches!(r, Err(Error::BoundaryViolation { .. })));
    }

    #[test]
    fn coarse_time_step_with_nonlinearity_is_rejected() {
        let setup = preset(Preset::SineGradient);
        let grid = Grid::on_pi(20, 1.5, 2).unwrap();
        let u0 = grid.sample(1, |x, _| x.sin());
        let r = solve_setup(&setup, u0.view(), &grid, &SolveOptions::default());
        assert!(matches!(r, Err(Error::Config(_))));
        let frozen = SolveOptions {
            freeze_nonlinearity: true,
            ..SolveOptions::default()
        };
        assert!(solve_setup(&setup, u0.view(), &grid, &frozen).is_ok());
    }

    #[test]
    fn picard_cap_is_reported_with_residual() {
        let setup = preset(Preset::SineGradient);
        let grid = Grid::on_pi(20, 1.0, 10).unwrap();
        let u0 = grid.sample(1, |x, _| x.sin());
        let opts = SolveOptions {
            picard_max: 1,
            ..SolveOptions::default()
        };
        match solve_setup(&setup, u0.view(), &grid, &opts) {
            Err(Error::PicardNonConvergence {
                step,
                iterations,
                residual,
            }) => {
                assert_eq!((step, iterations), (1, 1));
                assert!(residual > opts.picard_tol);
            }
            other => panic!("expected Picard failure, got {other:?}"),
        }
    }

    #[test]
    fn backward_euler_and_crank_nicolson_agree_to_first_order() {
        let setup = preset(Preset::SineGradient);
        let grid = Grid::on_pi(60, 1.0, 400).unwrap();
        let u0 = grid.sample(1, |x, _| x.sin());
        let cn = solve_setup(&setup, u0.view(), &grid, &SolveOptions::default()).unwrap();
        let be = solve_setup(
            &setup,
            u0.view(),
            &grid,
            &SolveOptions {
                scheme: Scheme::BackwardEuler,
                ..SolveOptions::default()
            },
        )
        .unwrap();
        let gap = max_abs((cn.values() - be.values()).iter());
        assert!(gap < 5.0 * grid.dt(), "{gap}");
    }

    #[test]
    fn time_derivatives_of_heat_mode_match_closed_forms() {
        let setup = preset(Preset::Heat1d);
        let grid = Grid::on_pi(200, 1.0, 2000).unwrap();
        let u0 = grid.sample(1, |x, _| x.sin());
        let trajs = time_derivative_trajectories(
            &setup.coeffs,
            setup.bc,
            u0.view(),
            &grid,
            &SolveOptions::default(),
            2,
        )
        .unwrap();
        assert_eq!(trajs.len(), 3);
        for m in [0, 1000, 2000] {
            let t = grid.t(m);
            assert!(sup_error(&trajs[1], m, |x, _| -(-t).exp() * x.sin()) <= 1e-3);
            assert!(sup_error(&trajs[2], m, |x, _| (-t).exp() * x.sin()) <= 1e-3);
        }
        for gap in derivative_consistency(&trajs) {
            assert!(gap < 10.0 * grid.dt() * grid.dt(), "{gap}");
        }
    }

    #[test]
    fn time_dependent_coefficients_are_unsupported_for_derivatives() {
        let mut coeffs = preset(Preset::Heat1d).coeffs.with_time_independent(false);
        coeffs.set_diffusion(0, 0, 0, 0, ScalarField::new(|_, t| 1.0 + t));
        let grid = Grid::on_pi(10, 1.0, 10).unwrap();
        let u0 = grid.sample(1, |x, _| x.sin());
        let r = time_derivative_trajectories(
            &coeffs,
            BoundaryCondition::Dirichlet,
            u0.view(),
            &grid,
            &SolveOptions::default(),
            1,
        );
        assert!(matches!(r, Err(Error::Unsupported(_))));
    }

    #[test]
    fn time_dependent_diffusion_matches_closed_form() {
        // a = 1 + t: u = exp(−(t + t²/2)) sin x
        let mut coeffs = preset(Preset::Heat1d).coeffs.with_time_independent(false);
        coeffs.set_diffusion(0, 0, 0, 0, ScalarField::new(|_, t| 1.0 + t));
        let grid = Grid::on_pi(200, 1.0, 1000).unwrap();
        let u0 = grid.sample(1, |x, _| x.sin());
        let zero = Semilinearity::zero(1, 1);
        let traj = solve_forward(
            &coeffs,
            BoundaryCondition::Dirichlet,
            &zero,
            u0.view(),
            &grid,
            &SolveOptions::default(),
        )
        .unwrap();
        let err = sup_error(&traj, grid.nt, |x, _| (-1.5f64).exp() * x.sin());
        assert!(err <= 1e-3, "{err}");
    }
}
