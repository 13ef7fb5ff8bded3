use std::f64::consts::PI;

use ndarray::ArrayView2;

use super::Grid;
use crate::error::{Error, Result};

/// Which norm [`norm`] computes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NormKind {
    L2,
    H1,
    /// Spectral `H^β`, `β ∈ [0, 1]`.
    Hbeta(f64),
}

/// Trapezoidal `∫ |u|² dx` summed over components.
pub fn l2_squared(u: ArrayView2<f64>, grid: &Grid) -> f64 {
    u.outer_iter()
        .enumerate()
        .map(|(i, row)| grid.weight(i) * row.iter().map(|v| v * v).sum::<f64>())
        .sum()
}

/// `∫ |∇u|² dx` from cell-centred differences `(u_{i+1} − u_i)/h` and the
/// midpoint rule. With zero boundary values this equals the discrete
/// Dirichlet form `⟨−Δ_h u, u⟩`.
pub fn gradient_squared(u: ArrayView2<f64>, grid: &Grid) -> f64 {
    let h = grid.h();
    let nodes = u.nrows();
    let nc = u.ncols();
    let mut acc = 0.0;
    for i in 0..nodes - 1 {
        for k in 0..nc {
            let d = (u[[i + 1, k]] - u[[i, k]]) / h;
            acc += d * d;
        }
    }
    acc * h
}

/// Boundary term `Σ_k |u_k(0)|² + |u_k(X)|²`.
pub fn boundary_squared(u: ArrayView2<f64>) -> f64 {
    let last = u.nrows() - 1;
    u.row(0)
        .iter()
        .chain(u.row(last).iter())
        .map(|v| v * v)
        .sum()
}

fn check_shape(u: &ArrayView2<f64>, grid: &Grid) -> Result<()> {
    if u.nrows() != grid.nodes() || u.ncols() == 0 {
        return Err(Error::Config(format!(
            "grid function has {} nodes, grid has {}",
            u.nrows(),
            grid.nodes()
        )));
    }
    Ok(())
}

/// Eigenvalues `μ_m = (4/h²) sin²(mπ/(2(nx+1)))` of the discrete Dirichlet
/// Laplacian, `m = 1..=nx`.
pub fn dirichlet_eigenvalues(grid: &Grid) -> Vec<f64> {
    let h = grid.h();
    let n1 = (grid.nx + 1) as f64;
    (1..=grid.nx)
        .map(|m| {
            let s = (m as f64 * PI / (2.0 * n1)).sin();
            4.0 * s * s / (h * h)
        })
        .collect()
}

/// Sine coefficients `ĉ_m` of one component on the interior nodes,
/// normalized so that `u_i = Σ_m ĉ_m sin(mπ i/(nx+1))`.
pub fn sine_coefficients(column: &[f64], grid: &Grid) -> Vec<f64> {
    let nx = grid.nx;
    let n1 = nx + 1;
    let period = 2 * n1;
    let table: Vec<f64> = (0..period)
        .map(|q| (PI * q as f64 / n1 as f64).sin())
        .collect();
    (1..=nx)
        .map(|m| {
            let mut acc = 0.0;
            for i in 1..=nx {
                acc += column[i] * table[(m * i) % period];
            }
            2.0 * acc / n1 as f64
        })
        .collect()
}

/// `(Σ_m (1 + μ_m)^β |ĉ_m|² · X/2)^{1/2}`, summed over components.
fn hbeta(u: ArrayView2<f64>, grid: &Grid, beta: f64) -> f64 {
    let mu = dirichlet_eigenvalues(grid);
    let half = 0.5 * grid.length;
    let mut total = 0.0;
    for col in u.columns() {
        let column: Vec<f64> = col.iter().copied().collect();
        let c = sine_coefficients(&column, grid);
        total += c
            .iter()
            .zip(&mu)
            .map(|(ck, m)| (1.0 + m).powf(beta) * ck * ck)
            .sum::<f64>()
            * half;
    }
    total.sqrt()
}

/// `L²`, `H¹ = (‖u‖² + ‖∇u‖²)^{1/2}`, or spectral `H^β` norm of a grid function.
///
/// `H^β` uses the eigenbasis of the discrete Dirichlet Laplacian, so it
/// only sees interior values; for fields vanishing on the boundary
/// `β = 0` and `β = 1` reproduce `L²` and `H¹` to round-off.
pub fn norm(u: ArrayView2<f64>, grid: &Grid, kind: NormKind) -> Result<f64> {
    check_shape(&u, grid)?;
    match kind {
        NormKind::L2 => Ok(l2_squared(u, grid).sqrt()),
        NormKind::H1 => Ok((l2_squared(u, grid) + gradient_squared(u, grid)).sqrt()),
        NormKind::Hbeta(beta) => {
            if !(0.0..=1.0).contains(&beta) {
                return Err(Error::Domain(format!("β = {beta} outside [0, 1]")));
            }
            Ok(hbeta(u, grid, beta))
        }
    }
}
