//! Boundary trace inequality `‖u‖²_{∂Ω} ≤ ε‖∇u‖² + C(ε)‖u‖²` with
//! `C(ε) = K/ε`.

use std::sync::Mutex;

use ndarray::ArrayView2;

use super::norms::{boundary_squared, gradient_squared, l2_squared};
use super::Grid;
use crate::error::{Error, Result};

/// Resolution of the calibration grid.
const CALIBRATION_NX: usize = 256;

static CALIBRATED: Mutex<Vec<(u64, f64)>> = Mutex::new(Vec::new());

/// Both sides of the trace inequality for one field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub holds: bool,
}

fn calibration_eps() -> impl Iterator<Item = f64> {
    (1..20).map(|j| j as f64 * 0.05)
}

/// `K = max ε (‖u‖²_{∂Ω} − ε‖∇u‖²) / ‖u‖²` over a probe family and
/// `ε ∈ {0.05, 0.10, …, 0.95}` on `(0, length)`.
///
/// The probes contain the boundary-layer profiles `cosh(κ(x − L/2))`,
/// which are the minimizers of `ε‖∇u‖² + C‖u‖² − ‖u‖²_{∂Ω}`, plus
/// one-sided exponentials, monomials and cosines.
pub fn calibrate_trace_constant(length: f64) -> Result<f64> {
    let grid = Grid::new(length, CALIBRATION_NX, 1.0, 2)?;
    let mut probes: Vec<Box<dyn Fn(f64) -> f64>> = Vec::new();
    for j in 0..80 {
        let kappa = 0.05 * 1.12f64.powi(j) / length * std::f64::consts::PI;
        // cosh and sinh about the midpoint, rescaled to stay finite
        probes.push(Box::new(move |x| {
            (-kappa * x).exp() + (kappa * (x - length)).exp()
        }));
        probes.push(Box::new(move |x| {
            (kappa * (x - length)).exp() - (-kappa * x).exp()
        }));
        probes.push(Box::new(move |x| (-kappa * x).exp()));
    }
    for p in 1..6 {
        probes.push(Box::new(move |x| (x / length).powi(p)));
    }
    for k in 0..8 {
        let w = k as f64 * std::f64::consts::PI / length;
        probes.push(Box::new(move |x| (w * x).cos()));
    }
    let mut best = 0.0_f64;
    for probe in &probes {
        let u = grid.sample(1, |x, _| probe(x));
        let b = boundary_squared(u.view());
        let g = gradient_squared(u.view(), &grid);
        let l = l2_squared(u.view(), &grid);
        if !(l > 0.0) || !b.is_finite() || !g.is_finite() {
            continue;
        }
        for eps in calibration_eps() {
            best = best.max(eps * (b - eps * g) / l);
        }
    }
    Ok(best)
}

/// Calibrated `K` for a domain of the given length, computed once per length.
pub fn trace_constant(length: f64) -> Result<f64> {
    let key = length.to_bits();
    {
        let cache = CALIBRATED.lock().expect("trace cache poisoned");
        if let Some(&(_, k)) = cache.iter().find(|(l, _)| *l == key) {
            return Ok(k);
        }
    }
    let k = calibrate_trace_constant(length)?;
    CALIBRATED
        .lock()
        .expect("trace cache poisoned")
        .push((key, k));
    Ok(k)
}

/// Evaluates `lhs = ‖u‖²_{∂Ω}` and `rhs = ε‖∇u‖² + (K/ε)‖u‖²`.
pub fn trace_check(u: ArrayView2<f64>, grid: &Grid, eps: f64) -> Result<TraceCheck> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("ε = {eps} outside (0, 1)")));
    }
    if u.nrows() != grid.nodes() {
        return Err(Error::Config("field does not match grid".into()));
    }
    let k = trace_constant(grid.length)?;
    let lhs = boundary_squared(u);
    let rhs = eps * gradient_squared(u, grid) + k / eps * l2_squared(u, grid);
    Ok(TraceCheck {
        lhs,
        rhs,
        constant: k / eps,
        holds: lhs <= rhs,
    })
}
