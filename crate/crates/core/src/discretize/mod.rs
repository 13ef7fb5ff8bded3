//! Spatial grid, discrete operators `A(t)`, `P` and `P⁰`, quadrature and the
//! `L²`, `H¹`, `H^β` norms shared by every estimate.

mod grid;
mod norms;
mod operator;
mod trace;

pub use grid::{Grid, Trajectory};
pub use norms::{
    boundary_squared, dirichlet_eigenvalues, gradient_squared, l2_squared, norm, sine_coefficients,
    NormKind,
};
pub use operator::{
    assemble_operator, boundary_defect, boundary_tolerance, BlockTridiagonal, DiscreteOperator,
};
pub use trace::{calibrate_trace_constant, trace_check, trace_constant, TraceCheck};

use ndarray::{s, Array2, Array3, ArrayView2};

use crate::error::{Error, Result};
use crate::model::{CoefficientSet, Semilinearity};

/// Nodal `∂_x u`: centred in the interior, one-sided first order at the ends.
pub fn nodal_gradient(u: ArrayView2<f64>, grid: &Grid) -> Array2<f64> {
    let (nodes, nc) = u.dim();
    let h = grid.h();
    let last = nodes - 1;
    Array2::from_shape_fn((nodes, nc), |(i, k)| {
        if i == 0 {
            (u[[1, k]] - u[[0, k]]) / h
        } else if i == last {
            (u[[last, k]] - u[[last - 1, k]]) / h
        } else {
            (u[[i + 1, k]] - u[[i - 1, k]]) / (2.0 * h)
        }
    })
}

/// `f(x_i, t, u(x_i), ∇u(x_i))` at every node.
pub fn evaluate_source(
    source: &Semilinearity,
    u: ArrayView2<f64>,
    grid: &Grid,
    t: f64,
) -> Result<Array2<f64>> {
    let (nodes, nc) = u.dim();
    if source.components() != nc {
        return Err(Error::Config(format!(
            "source has {} components, state has {nc}",
            source.components()
        )));
    }
    let mut out = Array2::zeros((nodes, nc));
    if source.is_zero() {
        return Ok(out);
    }
    let grad = nodal_gradient(u, grid);
    let mut buf = vec![0.0; nc];
    for i in 0..nodes {
        let x = [grid.x(i)];
        let ui: Vec<f64> = u.row(i).to_vec();
        let gi: Vec<f64> = grad.row(i).to_vec();
        source.evaluate(&x, t, &ui, &gi, &mut buf);
        for k in 0..nc {
            if !buf[k].is_finite() {
                return Err(Error::Evaluation {
                    x: x.to_vec(),
                    t,
                    what: format!("source component {k} evaluated to {}", buf[k]),
                });
            }
            out[[i, k]] = buf[k];
        }
    }
    Ok(out)
}

/// Which parts of `A` enter the residual of [`apply_p`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorPart {
    /// `P = ∂_t − A`.
    Full,
    /// `P⁰ = ∂_t − Σ ∂_i(a_ij ∂_j ·)`.
    Principal,
}

fn operators_per_slice<'a>(
    traj: &'a Trajectory,
    coeffs: &'a CoefficientSet,
) -> impl Iterator<Item = Result<DiscreteOperator>> + 'a {
    let grid = *traj.grid();
    let bc = traj.bc();
    let fixed = if coeffs.is_time_independent() {
        Some(assemble_operator(coeffs, 0.0, &grid, bc))
    } else {
        None
    };
    (0..=grid.nt).map(move |m| match &fixed {
        Some(Ok(op)) => Ok(op.clone()),
        Some(Err(_)) => assemble_operator(coeffs, 0.0, &grid, bc),
        None => assemble_operator(coeffs, grid.t(m), &grid, bc),
    })
}

/// Space–time residual `P u` (or `P⁰ u`) on every time slice, with
/// second-order time differences. Pinned boundary rows get `∂_t u` only.
pub fn apply_p(
    traj: &Trajectory,
    coeffs: &CoefficientSet,
    part: OperatorPart,
) -> Result<Array3<f64>> {
    let grid = traj.grid();
    if coeffs.components() != traj.components() {
        return Err(Error::Config(
            "coefficient and trajectory component counts differ".into(),
        ));
    }
    let mut out = Array3::zeros(traj.values().dim());
    for (m, op) in operators_per_slice(traj, coeffs).enumerate() {
        let op = op?;
        let u = traj.slice(m);
        let mut r = traj.time_derivative(m) - op.principal.apply(u);
        if part == OperatorPart::Full {
            r -= &op.lower_order.apply(u);
        }
        out.slice_mut(s![m, .., ..]).assign(&r);
    }
    debug_assert_eq!(out.dim().0, grid.nt + 1);
    Ok(out)
}

/// `Σ b ∂u + Σ c u` on every slice, i.e. `P⁰ u − P u`.
pub fn lower_order_action(traj: &Trajectory, coeffs: &CoefficientSet) -> Result<Array3<f64>> {
    let mut out = Array3::zeros(traj.values().dim());
    for (m, op) in operators_per_slice(traj, coeffs).enumerate() {
        let r = op?.lower_order.apply(traj.slice(m));
        out.slice_mut(s![m, .., ..]).assign(&r);
    }
    Ok(out)
}

/// Largest [`boundary_defect`] over all slices of a trajectory.
pub fn trajectory_boundary_defect(traj: &Trajectory, coeffs: &CoefficientSet) -> Result<f64> {
    let grid = traj.grid();
    let mut worst = 0.0_f64;
    for m in 0..=grid.nt {
        worst = worst.max(boundary_defect(
            traj.slice(m),
            coeffs,
            grid.t(m),
            grid,
            traj.bc(),
        )?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{preset, BoundaryCondition, Preset, ScalarField};

    #[test]
    fn exact_heat_solution_has_small_residual() {
        let grid = Grid::on_pi(200, 1.0, 2000).unwrap();
        let traj = Trajectory::from_fn(grid, 1, BoundaryCondition::Dirichlet, |x, t, _| {
            (-t).exp() * x.sin()
        })
        .unwrap();
        let r = apply_p(&traj, &preset(Preset::Heat1d).coeffs, OperatorPart::Full).unwrap();
        let max = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(max <= 1e-3, "max residual {max}");
    }

    #[test]
    fn stationary_constant_under_neumann_has_zero_residual() {
        let grid = Grid::on_pi(40, 1.0, 20).unwrap();
        let setup = preset(Preset::Heat1d).with_robin(0.0);
        let traj = Trajectory::from_fn(grid, 1, BoundaryCondition::Robin, |_, _, _| 3.0).unwrap();
        let r = apply_p(&traj, &setup.coeffs, OperatorPart::Full).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn full_minus_principal_is_the_lower_order_action() {
        let grid = Grid::on_pi(30, 1.0, 10).unwrap();
        let mut coeffs = preset(Preset::Coupled2).coeffs.with_time_independent(false);
        coeffs.set_drift(0, 0, 1, ScalarField::new(|x, t| x[0].cos() + t));
        coeffs.set_reaction(1, 0, ScalarField::constant(0.7));
        let traj = Trajectory::from_fn(grid, 2, BoundaryCondition::Dirichlet, |x, t, k| {
            (1.0 + t + k as f64) * (x * (k + 1) as f64).sin()
        })
        .unwrap();
        let full = apply_p(&traj, &coeffs, OperatorPart::Full).unwrap();
        let principal = apply_p(&traj, &coeffs, OperatorPart::Principal).unwrap();
        let lower = lower_order_action(&traj, &coeffs).unwrap();
        let diff = &principal - &full - &lower;
        let scale = lower.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(diff.iter().all(|v| v.abs() <= 1e-12 * scale.max(1.0)));
    }

    #[test]
    fn nodal_gradient_is_exact_on_linear_functions() {
        let grid = Grid::on_pi(12, 1.0, 2).unwrap();
        let u = grid.sample(1, |x, _| 2.0 * x - 1.0);
        let g = nodal_gradient(u.view(), &grid);
        assert!(g.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }
}
