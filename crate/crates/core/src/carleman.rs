//! Weighted energy budget for the weight `e^{2sφ}`, `φ(t) = e^{λt}`.
//!
//! All weighted integrals are returned as mantissas relative to the shared
//! factor `e^{E}` with `E = 2sφ(T)`, the largest exponent on `[0, T]`.

use ndarray::ArrayView2;
use rayon::prelude::*;

use crate::discretize::{
    apply_p, boundary_tolerance, gradient_squared, l2_squared, trajectory_boundary_defect, Grid,
    OperatorPart, Trajectory,
};
use crate::error::{Error, Result};
use crate::model::CoefficientSet;

/// Exponents above this no longer fit an `f64` after `exp`.
pub const SCALED_THRESHOLD: f64 = 709.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarlemanWeight {
    pub lambda: f64,
    pub s: f64,
}

/// `φ(t)`, `μ(t)` and the factor `e^{2sφ(t)}` at one time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightValue {
    pub phi: f64,
    pub mu: f64,
    /// `2sφ(t)`.
    pub log_factor: f64,
    /// `e^{2sφ(t)}` when representable.
    pub factor: Option<f64>,
    pub scaled: bool,
}

impl CarlemanWeight {
    pub fn new(lambda: f64, s: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) || !(s > 0.0 && s.is_finite()) {
            return Err(Error::Domain(format!(
                "need λ > 0 and s > 0, got λ = {lambda}, s = {s}"
            )));
        }
        Ok(CarlemanWeight { lambda, s })
    }

    pub fn phi(&self, t: f64) -> f64 {
        (self.lambda * t).exp()
    }

    /// `μ = φ − 1`, accurate for small `λt`.
    pub fn mu(&self, t: f64) -> f64 {
        (self.lambda * t).exp_m1()
    }

    pub fn log_factor(&self, t: f64) -> f64 {
        2.0 * self.s * self.phi(t)
    }

    pub fn at(&self, t: f64) -> WeightValue {
        let log_factor = self.log_factor(t);
        let scaled = log_factor > SCALED_THRESHOLD;
        WeightValue {
            phi: self.phi(t),
            mu: self.mu(t),
            log_factor,
            factor: (!scaled).then(|| log_factor.exp()),
            scaled,
        }
    }
}

/// Evaluates the weight at `t ∈ [0, horizon]`.
pub fn weight(t: f64, w: &CarlemanWeight, horizon: f64) -> Result<WeightValue> {
    if !(0.0..=horizon).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, {horizon}]")));
    }
    Ok(w.at(t))
}

/// The three terms of the weighted left-hand side, as mantissas of `e^{exponent}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LhsParts {
    pub exponent: f64,
    /// `∫ (sφ)^{-1} |∂_t z|² e^{2sφ}`
    pub time_derivative: f64,
    /// `∫ λ |∇z|² e^{2sφ}`
    pub gradient: f64,
    /// `∫ sλ²φ |z|² e^{2sφ}`
    pub zeroth_order: f64,
}

impl LhsParts {
    pub fn total(&self) -> f64 {
        self.time_derivative + self.gradient + self.zeroth_order
    }

    /// Unscaled total; infinite when `e^{exponent}` overflows.
    pub fn value(&self) -> f64 {
        unscale(self.total(), self.exponent)
    }
}

/// Both sides of the weighted estimate at one `(s, λ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CarlemanBudget {
    pub s: f64,
    pub lambda: f64,
    /// Shared exponent `E = 2sφ(T)`; every field below is a mantissa of `e^E`.
    pub exponent: f64,
    pub lhs: f64,
    pub lhs_parts: LhsParts,
    pub rhs_interior: f64,
    pub rhs_terminal: f64,
    pub rhs_initial: f64,
    /// `lhs / (rhs_interior + rhs_terminal + rhs_initial)`, `0` for `0/0`.
    pub c_star: f64,
    pub scaled: bool,
    pub bc_warning: bool,
}

impl CarlemanBudget {
    pub fn rhs(&self) -> f64 {
        self.rhs_interior + self.rhs_terminal + self.rhs_initial
    }

    pub fn unscaled(&self, mantissa: f64) -> f64 {
        unscale(mantissa, self.exponent)
    }
}

fn unscale(mantissa: f64, exponent: f64) -> f64 {
    if mantissa == 0.0 {
        0.0
    } else {
        mantissa * exponent.exp()
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 && den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn inner(a: ArrayView2<f64>, b: ArrayView2<f64>, grid: &Grid) -> f64 {
    a.outer_iter()
        .zip(b.outer_iter())
        .enumerate()
        .map(|(i, (ra, rb))| grid.weight(i) * ra.dot(&rb))
        .sum()
}

fn time_weights(grid: &Grid) -> Vec<f64> {
    let dt = grid.dt();
    (0..=grid.nt)
        .map(|m| if m == 0 || m == grid.nt { 0.5 * dt } else { dt })
        .collect()
}

/// Per-slice spatial integrals of a trajectory. Each `(s, λ)` evaluation
/// is then a weighted sum over time levels.
#[derive(Clone, Debug)]
pub struct CarlemanProfile {
    grid: Grid,
    dt_sq: Vec<f64>,
    grad_sq: Vec<f64>,
    z_sq: Vec<f64>,
    pz_sq: Option<Vec<f64>>,
    bc_defect: Option<f64>,
    bc_warning: bool,
}

impl CarlemanProfile {
    /// Integrals needed for the left-hand side only.
    pub fn new(z: &Trajectory) -> Self {
        let grid = *z.grid();
        let mut dt_sq = Vec::with_capacity(grid.nt + 1);
        let mut grad_sq = Vec::with_capacity(grid.nt + 1);
        let mut z_sq = Vec::with_capacity(grid.nt + 1);
        for m in 0..=grid.nt {
            let dz = z.time_derivative(m);
            dt_sq.push(l2_squared(dz.view(), &grid));
            grad_sq.push(gradient_squared(z.slice(m), &grid));
            z_sq.push(l2_squared(z.slice(m), &grid));
        }
        CarlemanProfile {
            grid,
            dt_sq,
            grad_sq,
            z_sq,
            pz_sq: None,
            bc_defect: None,
            bc_warning: false,
        }
    }

    /// Adds `‖Pz‖²` per slice and the boundary-compliance diagnostic.
    /// A non-compliant trajectory is still evaluated, with `bc_warning` set.
    pub fn with_operator(z: &Trajectory, coeffs: &CoefficientSet) -> Result<Self> {
        let mut profile = Self::new(z);
        let pz = apply_p(z, coeffs, OperatorPart::Full)?;
        let grid = profile.grid;
        profile.pz_sq = Some(
            pz.outer_iter()
                .map(|slice| l2_squared(slice, &grid))
                .collect(),
        );
        let defect = trajectory_boundary_defect(z, coeffs)?;
        profile.bc_defect = Some(defect);
        profile.bc_warning = defect > boundary_tolerance(&grid, z.bc());
        Ok(profile)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn bc_defect(&self) -> Option<f64> {
        self.bc_defect
    }

    pub fn bc_warning(&self) -> bool {
        self.bc_warning
    }

    fn exponent(&self, w: &CarlemanWeight) -> f64 {
        w.log_factor(self.grid.t_final)
    }

    /// `e^{2sφ(t_m) − E}` times the trapezoid weight.
    fn weighted_levels(&self, w: &CarlemanWeight) -> Vec<f64> {
        let e = self.exponent(w);
        time_weights(&self.grid)
            .into_iter()
            .enumerate()
            .map(|(m, q)| q * (w.log_factor(self.grid.t(m)) - e).exp())
            .collect()
    }

    pub fn lhs(&self, w: &CarlemanWeight) -> LhsParts {
        let mut parts = LhsParts {
            exponent: self.exponent(w),
            time_derivative: 0.0,
            gradient: 0.0,
            zeroth_order: 0.0,
        };
        for (m, q) in self.weighted_levels(w).into_iter().enumerate() {
            if q == 0.0 {
                continue;
            }
            let phi = w.phi(self.grid.t(m));
            parts.time_derivative += q * self.dt_sq[m] / (w.s * phi);
            parts.gradient += q * w.lambda * self.grad_sq[m];
            parts.zeroth_order += q * w.s * w.lambda * w.lambda * phi * self.z_sq[m];
        }
        parts
    }

    pub fn budget(&self, w: &CarlemanWeight) -> Result<CarlemanBudget> {
        let pz_sq = self.pz_sq.as_ref().ok_or_else(|| {
            Error::Config("right-hand side needs a profile built with the operator".into())
        })?;
        let lhs_parts = self.lhs(w);
        let e = lhs_parts.exponent;
        let rhs_interior = self
            .weighted_levels(w)
            .into_iter()
            .zip(pz_sq)
            .map(|(q, p)| q * p)
            .sum();
        let nt = self.grid.nt;
        let phi_t = w.phi(self.grid.t_final);
        let rhs_terminal = w.s * w.lambda * phi_t * self.z_sq[nt] + self.grad_sq[nt];
        let rhs_initial =
            (w.s * w.lambda * self.z_sq[0] + self.grad_sq[0]) * (w.log_factor(0.0) - e).exp();
        let lhs = lhs_parts.total();
        let budget = CarlemanBudget {
            s: w.s,
            lambda: w.lambda,
            exponent: e,
            lhs,
            lhs_parts,
            rhs_interior,
            rhs_terminal,
            rhs_initial,
            c_star: ratio(lhs, rhs_interior + rhs_terminal + rhs_initial),
            scaled: e > SCALED_THRESHOLD,
            bc_warning: self.bc_warning,
        };
        let fields = [
            budget.lhs,
            budget.rhs_interior,
            budget.rhs_terminal,
            budget.rhs_initial,
        ];
        if fields.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Evaluation {
                x: vec![],
                t: self.grid.t_final,
                what: format!(
                    "non-finite weighted integral at s = {}, λ = {}",
                    w.s, w.lambda
                ),
            });
        }
        Ok(budget)
    }
}

/// Weighted interior energy of `z`.
pub fn lhs_car(z: &Trajectory, w: &CarlemanWeight) -> LhsParts {
    CarlemanProfile::new(z).lhs(w)
}

/// Full budget: left-hand side plus interior, terminal and initial terms.
pub fn rhs_car(
    z: &Trajectory,
    coeffs: &CoefficientSet,
    w: &CarlemanWeight,
) -> Result<CarlemanBudget> {
    CarlemanProfile::with_operator(z, coeffs)?.budget(w)
}

/// One `(s, λ)` cell of a sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepCell {
    pub s: f64,
    pub lambda: f64,
    pub budget: CarlemanBudget,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    pub sup_c_star: f64,
    pub argmax: (f64, f64),
    /// Per `λ`: whether `c_star` is nonincreasing along increasing `s`.
    pub nonincreasing_in_s: Vec<(f64, bool)>,
    /// Per `λ`: `max / min` of `c_star` over `s ∈ [s_max/2, s_max]`.
    pub top_octave_spread: Vec<(f64, f64)>,
    pub bc_warning: bool,
    pub bc_defect: Option<f64>,
}

impl SweepReport {
    pub fn spread_at(&self, lambda: f64) -> Option<f64> {
        self.top_octave_spread
            .iter()
            .find(|(l, _)| *l == lambda)
            .map(|(_, r)| *r)
    }
}

fn check_list(name: &str, list: &[f64]) -> Result<()> {
    if list.is_empty() {
        return Err(Error::Config(format!("{name} list is empty")));
    }
    if list.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Config(format!(
            "{name} values must be positive and finite"
        )));
    }
    Ok(())
}

/// Evaluates the budget on every `(s, λ)` pair, in parallel.
pub fn sweep_constant(
    z: &Trajectory,
    coeffs: &CoefficientSet,
    s_list: &[f64],
    lambda_list: &[f64],
) -> Result<SweepReport> {
    check_list("s", s_list)?;
    check_list("lambda", lambda_list)?;
    let profile = CarlemanProfile::with_operator(z, coeffs)?;
    let pairs: Vec<(f64, f64)> = lambda_list
        .iter()
        .flat_map(|&l| s_list.iter().map(move |&s| (s, l)))
        .collect();
    let cells = pairs
        .par_iter()
        .map(|&(s, lambda)| {
            let w = CarlemanWeight::new(lambda, s)?;
            Ok(SweepCell {
                s,
                lambda,
                budget: profile.budget(&w)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (sup_c_star, argmax) = cells
        .iter()
        .fold((f64::NEG_INFINITY, (0.0, 0.0)), |acc, c| {
            if c.budget.c_star > acc.0 {
                (c.budget.c_star, (c.s, c.lambda))
            } else {
                acc
            }
        });

    let s_max = s_list.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut nonincreasing_in_s = Vec::new();
    let mut top_octave_spread = Vec::new();
    for &lambda in lambda_list {
        let mut row: Vec<(f64, f64)> = cells
            .iter()
            .filter(|c| c.lambda == lambda)
            .map(|c| (c.s, c.budget.c_star))
            .collect();
        row.sort_by(|a, b| a.0.total_cmp(&b.0));
        nonincreasing_in_s.push((lambda, row.windows(2).all(|p| p[1].1 <= p[0].1)));
        let top: Vec<f64> = row
            .iter()
            .filter(|(s, _)| *s >= 0.5 * s_max)
            .map(|(_, c)| *c)
            .collect();
        let hi = top.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = top.iter().cloned().fold(f64::INFINITY, f64::min);
        top_octave_spread.push((lambda, ratio(hi, lo)));
    }

    Ok(SweepReport {
        cells,
        sup_c_star,
        argmax,
        nonincreasing_in_s,
        top_octave_spread,
        bc_warning: profile.bc_warning(),
        bc_defect: profile.bc_defect(),
    })
}

/// `J₁ = −2sλ ∫_Q φ (∂_t v, v)` with `v = e^{sφ} z`, computed directly and
/// after integrating by parts in time. Values are mantissas of `e^{exponent}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct J1Check {
    pub exponent: f64,
    pub direct: f64,
    pub integrated: f64,
    pub defect: f64,
}

pub fn j1_identity_check(z: &Trajectory, w: &CarlemanWeight) -> Result<J1Check> {
    let grid = *z.grid();
    let e = w.log_factor(grid.t_final);
    let mut v = z.values().clone();
    for (m, mut slice) in v.outer_iter_mut().enumerate() {
        slice *= (0.5 * (w.log_factor(grid.t(m)) - e)).exp();
    }
    let v = Trajectory::new(v, grid, z.bc())?;
    let q = time_weights(&grid);
    let mut direct = 0.0;
    let mut volume = 0.0;
    for m in 0..=grid.nt {
        let phi = w.phi(grid.t(m));
        let dv = v.time_derivative(m);
        direct += q[m] * phi * inner(dv.view(), v.slice(m), &grid);
        volume += q[m] * phi * l2_squared(v.slice(m), &grid);
    }
    let direct = -2.0 * w.s * w.lambda * direct;
    let ends = w.phi(grid.t_final) * l2_squared(v.slice(grid.nt), &grid)
        - w.phi(0.0) * l2_squared(v.slice(0), &grid);
    let integrated = -w.s * w.lambda * ends + w.s * w.lambda * w.lambda * volume;
    let scale = direct.abs().max(integrated.abs());
    let defect = if scale == 0.0 {
        0.0
    } else {
        (direct - integrated).abs() / scale
    };
    Ok(J1Check {
        exponent: e,
        direct,
        integrated,
        defect,
    })
}
