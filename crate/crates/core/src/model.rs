//! The continuous problem: coefficient fields of the operator `A(t)`, the
//! lateral boundary condition and the semilinear source, together with a
//! numerical check of the structural assumptions (symmetry and strong
//! ellipticity of the diffusion tensor).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::ArrayView2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::discretize::{self, Grid, NormKind};
use crate::error::{Error, Result};

/// Relative tolerance on `a_ij^{kl} = a_ji^{kl} = a_ij^{lk}`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Round-off allowance on the ellipticity margin, relative to `max(σ, 1)`.
const ELLIPTICITY_ROUNDOFF: f64 = 1e-12;

/// Random unit directions probed per sample point in addition to the
/// canonical basis and the exact eigenvalue.
const RANDOM_PROBES: usize = 8;

type FieldFn = dyn Fn(&[f64], f64) -> f64 + Send + Sync;

/// A scalar coefficient `(x, t) ↦ value`.
#[derive(Clone)]
pub enum ScalarField {
    Constant(f64),
    Function(Arc<FieldFn>),
}

impl ScalarField {
    pub fn constant(value: f64) -> Self {
        ScalarField::Constant(value)
    }

    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
    {
        ScalarField::Function(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        match self {
            ScalarField::Constant(v) => *v,
            ScalarField::Function(f) => f(x, t),
        }
    }

    /// Evaluates and rejects non-finite output.
    pub fn eval_checked(&self, x: &[f64], t: f64, name: &str) -> Result<f64> {
        let v = self.eval(x, t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation {
                x: x.to_vec(),
                t,
                what: format!("{name} evaluated to {v}"),
            })
        }
    }

    pub fn is_zero_constant(&self) -> bool {
        matches!(self, ScalarField::Constant(v) if *v == 0.0)
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Constant(v) => write!(f, "Constant({v})"),
            ScalarField::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// The closed box `Π [0, extent_i]` times `[0, horizon]` on which the
/// coefficients are evaluable.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub extent: Vec<f64>,
    pub horizon: f64,
}

impl Region {
    pub fn interval(length: f64, horizon: f64) -> Self {
        Region {
            extent: vec![length],
            horizon,
        }
    }
}

/// Coefficients `a_ij^{kl}`, `b_i^{kl}`, `c^{kl}` and the Robin coefficient `p`.
///
/// Indices are zero based. Component indices follow the superscript order
/// of the operator: in equation `l` the term `a_ij^{kl} ∂_j u_k` appears.
#[derive(Clone, Debug)]
pub struct CoefficientSet {
    components: usize,
    dim: usize,
    diffusion: Vec<ScalarField>,
    drift: Vec<ScalarField>,
    reaction: Vec<ScalarField>,
    robin: Option<ScalarField>,
    sigma: f64,
    time_independent: bool,
    region: Region,
}

impl CoefficientSet {
    /// All coefficients zero, `σ = 1`, time independent.
    pub fn new(components: usize, dim: usize, region: Region) -> Result<Self> {
        if components == 0 {
            return Err(Error::Config("component count must be at least 1".into()));
        }
        if dim == 0 || dim > 2 {
            return Err(Error::Unsupported(format!(
                "spatial dimension {dim} (only 1 and 2 are modelled)"
            )));
        }
        if region.extent.len() != dim || region.extent.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::Config(format!(
                "region must have {dim} positive extents, got {:?}",
                region.extent
            )));
        }
        if !(region.horizon > 0.0) {
            return Err(Error::Config("time horizon must be positive".into()));
        }
        let zero = ScalarField::constant(0.0);
        let nn = components * components;
        Ok(CoefficientSet {
            components,
            dim,
            diffusion: vec![zero.clone(); nn * dim * dim],
            drift: vec![zero.clone(); nn * dim],
            reaction: vec![zero; nn],
            robin: None,
            sigma: 1.0,
            time_independent: true,
            region,
        })
    }

    /// Constant coefficients on an interval; matrices are indexed `[k][l]`.
    pub fn constant_1d(
        diffusion: &[Vec<f64>],
        drift: Option<&[Vec<f64>]>,
        reaction: Option<&[Vec<f64>]>,
        sigma: f64,
        region: Region,
    ) -> Result<Self> {
        let n = diffusion.len();
        let mut set = CoefficientSet::new(n, 1, region)?;
        let check = |m: &[Vec<f64>], name: &str| -> Result<()> {
            if m.len() != n || m.iter().any(|row| row.len() != n) {
                return Err(Error::Config(format!("{name} matrix must be {n}x{n}")));
            }
            Ok(())
        };
        check(diffusion, "diffusion")?;
        for k in 0..n {
            for l in 0..n {
                set.set_diffusion(0, 0, k, l, ScalarField::constant(diffusion[k][l]));
            }
        }
        if let Some(b) = drift {
            check(b, "drift")?;
            for k in 0..n {
                for l in 0..n {
                    set.set_drift(0, k, l, ScalarField::constant(b[k][l]));
                }
            }
        }
        if let Some(c) = reaction {
            check(c, "reaction")?;
            for k in 0..n {
                for l in 0..n {
                    set.set_reaction(k, l, ScalarField::constant(c[k][l]));
                }
            }
        }
        Ok(set.with_sigma(sigma))
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_time_independent(&self) -> bool {
        self.time_independent
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    fn diffusion_index(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        assert!(i < self.dim && j < self.dim && k < self.components && l < self.components);
        ((k * self.components + l) * self.dim + i) * self.dim + j
    }

    pub fn diffusion(&self, i: usize, j: usize, k: usize, l: usize) -> &ScalarField {
        &self.diffusion[self.diffusion_index(i, j, k, l)]
    }

    pub fn drift(&self, i: usize, k: usize, l: usize) -> &ScalarField {
        assert!(i < self.dim && k < self.components && l < self.components);
        &self.drift[(k * self.components + l) * self.dim + i]
    }

    pub fn reaction(&self, k: usize, l: usize) -> &ScalarField {
        assert!(k < self.components && l < self.components);
        &self.reaction[k * self.components + l]
    }

    pub fn robin(&self) -> Option<&ScalarField> {
        self.robin.as_ref()
    }

    /// Sets the single entry `a_ij^{kl}`; symmetric partners are untouched.
    pub fn set_diffusion(&mut self, i: usize, j: usize, k: usize, l: usize, field: ScalarField) {
        let idx = self.diffusion_index(i, j, k, l);
        self.diffusion[idx] = field;
    }

    /// Sets `a_ij^{kl}` together with all entries the symmetry condition ties to it.
    pub fn set_diffusion_symmetric(
        &mut self,
        i: usize,
        j: usize,
        k: usize,
        l: usize,
        field: ScalarField,
    ) {
        for (a, b) in [(i, j), (j, i)] {
            for (c, d) in [(k, l), (l, k)] {
                self.set_diffusion(a, b, c, d, field.clone());
            }
        }
    }

    pub fn set_drift(&mut self, i: usize, k: usize, l: usize, field: ScalarField) {
        assert!(i < self.dim && k < self.components && l < self.components);
        let idx = (k * self.components + l) * self.dim + i;
        self.drift[idx] = field;
    }

    pub fn set_reaction(&mut self, k: usize, l: usize, field: ScalarField) {
        assert!(k < self.components && l < self.components);
        let idx = k * self.components + l;
        self.reaction[idx] = field;
    }

    pub fn with_robin(mut self, p: ScalarField) -> Self {
        self.robin = Some(p);
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_time_independent(mut self, flag: bool) -> Self {
        self.time_independent = flag;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.region.horizon = horizon;
        self
    }

    /// True when every drift coefficient is the constant zero.
    pub fn drift_is_zero(&self) -> bool {
        self.drift.iter().all(ScalarField::is_zero_constant)
    }
}

/// Lateral boundary condition on `∂Ω × (0, T)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// `u = 0`.
    Dirichlet,
    /// `∂_{ν_A} u + p u = 0` with `p` taken from the coefficient set.
    Robin,
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::Dirichlet => f.write_str("dirichlet"),
            BoundaryCondition::Robin => f.write_str("robin"),
        }
    }
}

impl FromStr for BoundaryCondition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(BoundaryCondition::Dirichlet),
            "robin" => Ok(BoundaryCondition::Robin),
            other => Err(Error::Config(format!(
                "unknown boundary condition '{other}' (expected dirichlet or robin)"
            ))),
        }
    }
}

/// `(x, t, u, ∇u, out)`; `∇u` is laid out as `grad[k * n + i] = ∂_i u_k`.
type SemilinearFn = dyn Fn(&[f64], f64, &[f64], &[f64], &mut [f64]) + Send + Sync;

/// The source `f(x, t, u, ∇u)` with its declared Lipschitz constant and
/// smoothness index.
#[derive(Clone)]
pub struct Semilinearity {
    components: usize,
    dim: usize,
    eval: Option<Arc<SemilinearFn>>,
    lipschitz: f64,
    beta: f64,
}

impl Semilinearity {
    pub fn zero(components: usize, dim: usize) -> Self {
        Semilinearity {
            components,
            dim,
            eval: None,
            lipschitz: 0.0,
            beta: 0.0,
        }
    }

    pub fn new<F>(components: usize, dim: usize, lipschitz: f64, beta: f64, f: F) -> Result<Self>
    where
        F: Fn(&[f64], f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::Domain(format!(
                "smoothness index β = {beta} outside [0, 1]"
            )));
        }
        if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
            return Err(Error::Domain(format!(
                "Lipschitz constant {lipschitz} must be finite and ≥ 0"
            )));
        }
        Ok(Semilinearity {
            components,
            dim,
            eval: Some(Arc::new(f)),
            lipschitz,
            beta,
        })
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn is_zero(&self) -> bool {
        self.eval.is_none()
    }

    #[inline]
    pub fn evaluate(&self, x: &[f64], t: f64, u: &[f64], grad: &[f64], out: &mut [f64]) {
        match &self.eval {
            Some(f) => f(x, t, u, grad, out),
            None => out.iter_mut().for_each(|v| *v = 0.0),
        }
    }
}

impl fmt::Debug for Semilinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Semilinearity")
            .field("components", &self.components)
            .field("zero", &self.is_zero())
            .field("lipschitz", &self.lipschitz)
            .field("beta", &self.beta)
            .finish()
    }
}

/// Coefficients, boundary condition and source bundled together.
#[derive(Clone, Debug)]
pub struct ProblemSetup {
    pub coeffs: CoefficientSet,
    pub bc: BoundaryCondition,
    pub source: Semilinearity,
}

impl ProblemSetup {
    /// Switches to the Robin condition with a constant coefficient `p`.
    pub fn with_robin(mut self, p: f64) -> Self {
        self.coeffs = self.coeffs.with_robin(ScalarField::constant(p));
        self.bc = BoundaryCondition::Robin;
        self
    }

    /// The same problem with `f = 0`.
    pub fn linear_part(&self) -> Self {
        ProblemSetup {
            coeffs: self.coeffs.clone(),
            bc: self.bc,
            source: Semilinearity::zero(self.coeffs.components(), self.coeffs.dim()),
        }
    }
}

/// Named problem presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    /// Scalar heat equation on `(0, π)`, Dirichlet, `f = 0`.
    Heat1d,
    /// Two components with constant diffusion `[[2, 1], [1, 2]]`, `f = 0`.
    Coupled2,
    /// Heat diffusion with `f = e^{-t} sin(∂_x u)`.
    SineGradient,
}

/// Older spelling of `sine_gradient`, still accepted on input.
const LEGACY_SINE_GRADIENT: &str = "paper_example";

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Heat1d, Preset::Coupled2, Preset::SineGradient];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Heat1d => "heat1d",
            Preset::Coupled2 => "coupled2",
            Preset::SineGradient => "sine_gradient",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .or((s == LEGACY_SINE_GRADIENT).then_some(Preset::SineGradient))
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown preset '{s}' (expected one of heat1d, coupled2, sine_gradient)"
                ))
            })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Builds a preset on `(0, π) × (0, 1)`.
pub fn preset(which: Preset) -> ProblemSetup {
    let region = Region::interval(std::f64::consts::PI, 1.0);
    match which {
        Preset::Heat1d => ProblemSetup {
            coeffs: CoefficientSet::constant_1d(&[vec![1.0]], None, None, 1.0, region)
                .expect("heat1d preset is well formed"),
            bc: BoundaryCondition::Dirichlet,
            source: Semilinearity::zero(1, 1),
        },
        Preset::Coupled2 => ProblemSetup {
            coeffs: CoefficientSet::constant_1d(
                &[vec![2.0, 1.0], vec![1.0, 2.0]],
                None,
                None,
                1.0,
                region,
            )
            .expect("coupled2 preset is well formed"),
            bc: BoundaryCondition::Dirichlet,
            source: Semilinearity::zero(2, 1),
        },
        Preset::SineGradient => ProblemSetup {
            coeffs: CoefficientSet::constant_1d(&[vec![1.0]], None, None, 1.0, region)
                .expect("sine_gradient preset is well formed"),
            bc: BoundaryCondition::Dirichlet,
            source: sine_of_gradient(1),
        },
    }
}

pub fn preset_by_name(name: &str) -> Result<ProblemSetup> {
    Ok(preset(name.parse()?))
}

/// `f_l = e^{-t} sin(∂_x u_l)` for every component; `L = 1`, `β = 1`.
pub fn sine_of_gradient(components: usize) -> Semilinearity {
    Semilinearity::new(components, 1, 1.0, 1.0, |_x, t, _u, grad, out| {
        let decay = (-t).exp();
        for (o, g) in out.iter_mut().zip(grad) {
            *o = decay * g.sin();
        }
    })
    .expect("constants are in range")
}

/// A sample location reported by [`validate`].
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePoint {
    pub x: Vec<f64>,
    pub t: f64,
}

/// Outcome of [`validate`].
#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub passed: bool,
    pub samples: usize,
    /// Worst relative symmetry defect over all samples.
    pub symmetry_defect: f64,
    pub symmetry_worst: SamplePoint,
    /// Smallest eigenvalue of the quadratic form over all samples.
    pub min_form_eigenvalue: f64,
    /// Smallest Rayleigh quotient hit by canonical and random probes.
    pub min_probe_quotient: f64,
    /// `min(eigenvalue, probes) − σ`.
    pub ellipticity_margin: f64,
    pub ellipticity_worst: SamplePoint,
    pub sigma: f64,
}

fn sample_points(region: &Region, samples: usize, seed: u64) -> Vec<SamplePoint> {
    let dim = region.extent.len();
    let mut points = Vec::with_capacity(samples);
    // box corners at both ends of the time interval come first
    'corners: for t in [0.0, region.horizon] {
        for mask in 0..(1usize << dim) {
            if points.len() == samples {
                break 'corners;
            }
            let x = (0..dim)
                .map(|d| {
                    if mask >> d & 1 == 1 {
                        region.extent[d]
                    } else {
                        0.0
                    }
                })
                .collect();
            points.push(SamplePoint { x, t });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while points.len() < samples {
        let x = region
            .extent
            .iter()
            .map(|&l| rng.random::<f64>() * l)
            .collect();
        let t = rng.random::<f64>() * region.horizon;
        points.push(SamplePoint { x, t });
    }
    points
}

/// Checks symmetry and strong ellipticity of the diffusion tensor at
/// `samples` points (box corners first, then seeded uniform draws).
///
/// Ellipticity is assessed through the exact smallest eigenvalue of the
/// `(nN) × (nN)` quadratic-form matrix, cross-checked with the canonical
/// basis and seeded random directions.
pub fn validate(coeffs: &CoefficientSet, samples: usize, seed: u64) -> Result<ValidationReport> {
    if samples == 0 {
        return Err(Error::Config("validate needs at least one sample".into()));
    }
    let n = coeffs.dim();
    let nc = coeffs.components();
    let size = n * nc;
    let points = sample_points(coeffs.region(), samples, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_e111);

    let mut symmetry_defect = 0.0_f64;
    let mut symmetry_worst = points[0].clone();
    let mut min_eig = f64::INFINITY;
    let mut min_probe = f64::INFINITY;
    let mut ell_worst = points[0].clone();
    let mut worst_quotient = f64::INFINITY;

    for point in &points {
        let mut q = DMatrix::<f64>::zeros(size, size);
        let mut scale = 0.0_f64;
        for k in 0..nc {
            for l in 0..nc {
                for i in 0..n {
                    for j in 0..n {
                        let v = coeffs.diffusion(i, j, k, l).eval_checked(
                            &point.x,
                            point.t,
                            "diffusion coefficient",
                        )?;
                        q[(k * n + i, l * n + j)] = v;
                        scale = scale.max(v.abs());
                    }
                }
            }
        }
        let mut defect = 0.0_f64;
        for k in 0..nc {
            for l in 0..nc {
                for i in 0..n {
                    for j in 0..n {
                        let a = q[(k * n + i, l * n + j)];
                        let transposed = q[(k * n + j, l * n + i)];
                        let swapped = q[(l * n + i, k * n + j)];
                        defect = defect.max((a - transposed).abs()).max((a - swapped).abs());
                    }
                }
            }
        }
        let rel = if scale > 0.0 { defect / scale } else { 0.0 };
        if rel > symmetry_defect {
            symmetry_defect = rel;
            symmetry_worst = point.clone();
        }

        let sym = (&q + q.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym.clone()).eigenvalues.min();
        let mut probe = f64::INFINITY;
        for r in 0..size {
            probe = probe.min(sym[(r, r)]);
        }
        for _ in 0..RANDOM_PROBES {
            let xi =
                nalgebra::DVector::<f64>::from_fn(size, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let norm2 = xi.norm_squared();
            if norm2 > 0.0 {
                probe = probe.min((xi.transpose() * &sym * &xi)[(0, 0)] / norm2);
            }
        }
        min_eig = min_eig.min(eig);
        min_probe = min_probe.min(probe);
        let quotient = eig.min(probe);
        if quotient < worst_quotient {
            worst_quotient = quotient;
            ell_worst = point.clone();
        }
    }

    let sigma = coeffs.sigma();
    let margin = min_eig.min(min_probe) - sigma;
    let passed = symmetry_defect <= SYMMETRY_TOLERANCE
        && margin >= -ELLIPTICITY_ROUNDOFF * sigma.max(1.0)
        && sigma > 0.0;
    Ok(ValidationReport {
        passed,
        samples: points.len(),
        symmetry_defect,
        symmetry_worst,
        min_form_eigenvalue: min_eig,
        min_probe_quotient: min_probe,
        ellipticity_margin: margin,
        ellipticity_worst: ell_worst,
        sigma,
    })
}

/// `‖f(u) − f(v)‖_{L²} / ‖u − v‖` at time `t`, with the denominator measured in
/// `H¹` when `β = 1` and in the spectral `H^β` norm otherwise.
pub fn lipschitz_ratio(
    source: &Semilinearity,
    u: ArrayView2<f64>,
    v: ArrayView2<f64>,
    grid: &Grid,
    t: f64,
) -> Result<f64> {
    let fu = discretize::evaluate_source(source, u, grid, t)?;
    let fv = discretize::evaluate_source(source, v, grid, t)?;
    let num = discretize::norm((&fu - &fv).view(), grid, NormKind::L2)?;
    let kind = if source.beta() == 1.0 {
        NormKind::H1
    } else {
        NormKind::Hbeta(source.beta())
    };
    let den = discretize::norm((&u - &v).view(), grid, kind)?;
    if den == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(num / den)
}

/// Largest [`lipschitz_ratio`] over `pairs` seeded random smooth pairs at
/// random times in `[0, T]`.
///
/// Each field is `Σ_{k ≤ 8} c_k sin(kπx/X) / k` with `c_k` uniform in `[−2, 2]`.
pub fn lipschitz_sweep(
    source: &Semilinearity,
    grid: &Grid,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    let nc = source.components();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = std::f64::consts::PI / grid.length;
    let field = |rng: &mut ChaCha8Rng| {
        let c: Vec<f64> = (0..8 * nc).map(|_| rng.random_range(-2.0..=2.0)).collect();
        grid.sample(nc, |x, k| {
            (0..8)
                .map(|j| {
                    let m = (j + 1) as f64;
                    c[k * 8 + j] * (m * w * x).sin() / m
                })
                .sum()
        })
    };
    let mut worst = 0.0_f64;
    for _ in 0..pairs {
        let u = field(&mut rng);
        let v = field(&mut rng);
        let t = rng.random::<f64>() * grid.t_final;
        worst = worst.max(lipschitz_ratio(source, u.view(), v.view(), grid, t)?);
    }
    Ok(worst)
}
