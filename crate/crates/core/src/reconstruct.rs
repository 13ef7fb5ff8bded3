//! Spectral-filter backward reconstruction for self-adjoint,
//! time-independent Dirichlet problems.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DVector, SymmetricEigen};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::discretize::{assemble_operator, dirichlet_eigenvalues, norm, Grid, NormKind};
use crate::error::{Error, Result};
use crate::model::{BoundaryCondition, CoefficientSet};
use crate::stability::fit_slope;

/// Relative asymmetry above which the discrete operator is not self-adjoint.
const SYMMETRY_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Filter {
    /// Mode multiplier `1 / (e^{−μT} + δ)`.
    #[default]
    Tikhonov,
    /// Keeps modes with `e^{μT} ≤ 1/δ`; `δ = 0` keeps all.
    Truncation,
}

impl fmt::Display for Filter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Filter::Tikhonov => "tikhonov",
            Filter::Truncation => "truncation",
        })
    }
}

impl FromStr for Filter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tikhonov" => Ok(Filter::Tikhonov),
            "truncation" => Ok(Filter::Truncation),
            _ => Err(Error::Config(format!(
                "unknown filter '{s}' (expected tikhonov or truncation)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructOptions {
    pub filter: Filter,
    /// Rate exponent for the error-trend check, in `(0, 1)`.
    pub alpha: f64,
    /// Noise level `δ ≥ 0`; also the Tikhonov parameter.
    pub noise_level: f64,
}

impl ReconstructOptions {
    pub fn new(filter: Filter, alpha: f64, noise_level: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("α = {alpha} outside (0, 1)")));
        }
        if !(noise_level >= 0.0 && noise_level.is_finite()) {
            return Err(Error::Config(format!(
                "noise level {noise_level} must be finite and ≥ 0"
            )));
        }
        Ok(ReconstructOptions {
            filter,
            alpha,
            noise_level,
        })
    }
}

/// Eigen-decomposition `−A = V diag(μ) Vᵀ` on the free nodes.
#[derive(Clone, Debug)]
pub struct SpectralOperator {
    grid: Grid,
    components: usize,
    free: Vec<usize>,
    eigenvalues: DVector<f64>,
    eigenvectors: nalgebra::DMatrix<f64>,
}

impl SpectralOperator {
    pub fn new(coeffs: &CoefficientSet, grid: &Grid, bc: BoundaryCondition) -> Result<Self> {
        if bc != BoundaryCondition::Dirichlet {
            return Err(Error::Unsupported(
                "reconstruction needs Dirichlet boundary conditions".into(),
            ));
        }
        if !coeffs.is_time_independent() {
            return Err(Error::Unsupported(
                "reconstruction needs time-independent coefficients".into(),
            ));
        }
        if !coeffs.drift_is_zero() {
            return Err(Error::Unsupported(
                "reconstruction needs zero drift (self-adjoint operator)".into(),
            ));
        }
        let (dense, free) = assemble_operator(coeffs, 0.0, grid, bc)?
            .full()
            .free_dense();
        let scale = dense.amax();
        let asym = (&dense - dense.transpose()).amax();
        if asym > SYMMETRY_TOLERANCE * scale.max(1.0) {
            return Err(Error::Unsupported(format!(
                "discrete operator is not symmetric (defect {asym:e})"
            )));
        }
        let eig = SymmetricEigen::new(-dense);
        Ok(SpectralOperator {
            grid: *grid,
            components: coeffs.components(),
            free,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.eigenvalues.as_slice()
    }

    fn flatten(&self, field: ArrayView2<f64>) -> DVector<f64> {
        let nc = self.components;
        DVector::from_fn(self.free.len() * nc, |r, _| {
            field[[self.free[r / nc], r % nc]]
        })
    }

    fn unflatten(&self, v: &DVector<f64>) -> Array2<f64> {
        let nc = self.components;
        let mut out = Array2::zeros((self.grid.nodes(), nc));
        for (r, val) in v.iter().enumerate() {
            out[[self.free[r / nc], r % nc]] = *val;
        }
        out
    }

    /// Applies `g(μ_k)` to every eigenmode of `field`.
    pub fn filter_with(&self, field: ArrayView2<f64>, g: impl Fn(f64) -> f64) -> Array2<f64> {
        let coeffs = self.eigenvectors.tr_mul(&self.flatten(field));
        let scaled = DVector::from_fn(coeffs.len(), |k, _| coeffs[k] * g(self.eigenvalues[k]));
        self.unflatten(&(&self.eigenvectors * scaled))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub field: Array2<f64>,
    /// Modes with `μT ≤ log(1/δ)`.
    pub retained: usize,
    pub modes: usize,
}

/// Back-propagates `terminal` from `T = grid.t_final` to `t = 0` with the
/// chosen spectral filter.
pub fn reconstruct(
    terminal: ArrayView2<f64>,
    coeffs: &CoefficientSet,
    grid: &Grid,
    bc: BoundaryCondition,
    opts: &ReconstructOptions,
) -> Result<Reconstruction> {
    if terminal.dim() != (grid.nodes(), coeffs.components()) {
        return Err(Error::Config("terminal data does not match grid".into()));
    }
    let spectral = SpectralOperator::new(coeffs, grid, bc)?;
    Ok(reconstruct_with(&spectral, terminal, opts))
}

/// [`reconstruct`] with a precomputed decomposition.
pub fn reconstruct_with(
    spectral: &SpectralOperator,
    terminal: ArrayView2<f64>,
    opts: &ReconstructOptions,
) -> Reconstruction {
    let horizon = spectral.grid.t_final;
    let delta = opts.noise_level;
    let threshold = if delta > 0.0 {
        (1.0 / delta).ln()
    } else {
        f64::INFINITY
    };
    let keep = |mu: f64| mu * horizon <= threshold;
    let field = match opts.filter {
        Filter::Tikhonov => {
            spectral.filter_with(terminal, |mu| 1.0 / ((-mu * horizon).exp() + delta))
        }
        Filter::Truncation => {
            spectral.filter_with(
                terminal,
                |mu| if keep(mu) { (mu * horizon).exp() } else { 0.0 },
            )
        }
    };
    Reconstruction {
        field,
        retained: spectral
            .eigenvalues()
            .iter()
            .filter(|&&mu| keep(mu))
            .count(),
        modes: spectral.eigenvalues().len(),
    }
}

/// Largest mode index `k` with discrete `μ_k T ≤ log(1/δ)`.
pub fn noise_mode(grid: &Grid, delta_min: f64) -> usize {
    let limit = (1.0 / delta_min).ln();
    dirichlet_eigenvalues(grid)
        .iter()
        .take_while(|&&mu| mu * grid.t_final <= limit)
        .count()
        .max(1)
}

/// Outcome of the error-rate sweep on the two-mode problem.
#[derive(Clone, Debug, PartialEq)]
pub struct RateReport {
    pub deltas: Vec<f64>,
    pub errors: Vec<f64>,
    pub noise_mode: usize,
    /// Slope of `log error` against `log log(1/δ)`.
    pub slope: Option<f64>,
    pub alpha: f64,
}

impl RateReport {
    pub fn passed(&self) -> bool {
        self.slope.is_some_and(|s| s <= -self.alpha + 0.1)
    }
}

/// Terminal data `e^{−μ₁T} sin(πx/X) + δ sin(kπx/X)` for the scalar
/// unit-diffusion problem; `μ₁` is the discrete eigenvalue so the noiseless
/// inversion is exact. Returns `(terminal, truth)`.
pub fn two_mode_problem(grid: &Grid, delta: f64, k: usize) -> (Array2<f64>, Array2<f64>) {
    let mu1 = dirichlet_eigenvalues(grid)[0];
    let w = std::f64::consts::PI / grid.length;
    let decay = (-mu1 * grid.t_final).exp();
    let terminal = grid.sample(1, |x, _| {
        decay * (w * x).sin() + delta * (k as f64 * w * x).sin()
    });
    let truth = grid.sample(1, |x, _| (w * x).sin());
    (terminal, truth)
}

/// Reconstruction `L²` error over a `δ` sweep on [`two_mode_problem`], with
/// the noise mode chosen from the smallest `δ`.
pub fn error_rate_sweep(
    coeffs: &CoefficientSet,
    grid: &Grid,
    filter: Filter,
    alpha: f64,
    deltas: &[f64],
) -> Result<RateReport> {
    if coeffs.components() != 1 {
        return Err(Error::Unsupported("the two-mode problem is scalar".into()));
    }
    if deltas.len() < 2 || deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
        return Err(Error::Config(
            "need at least two noise levels in (0, 1)".into(),
        ));
    }
    let spectral = SpectralOperator::new(coeffs, grid, BoundaryCondition::Dirichlet)?;
    let delta_min = deltas.iter().cloned().fold(f64::INFINITY, f64::min);
    let k = noise_mode(grid, delta_min);
    let mut errors = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let (terminal, truth) = two_mode_problem(grid, delta, k);
        let opts = ReconstructOptions::new(filter, alpha, delta)?;
        let rec = reconstruct_with(&spectral, terminal.view(), &opts);
        errors.push(norm((&rec.field - &truth).view(), grid, NormKind::L2)?);
    }
    let pts: Vec<(f64, f64)> = deltas
        .iter()
        .zip(&errors)
        .filter(|(_, e)| **e > 0.0)
        .map(|(d, e)| ((1.0 / d).ln().ln(), e.ln()))
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    Ok(RateReport {
        deltas: deltas.to_vec(),
        errors,
        noise_mode: k,
        slope: fit_slope(&x, &y),
        alpha,
    })
}
