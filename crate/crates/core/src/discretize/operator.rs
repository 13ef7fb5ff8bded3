use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};

use super::Grid;
use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::model::{BoundaryCondition, CoefficientSet};

/// Three-point block stencil: equation `l` at node `i` couples component `k`
/// at nodes `i-1, i, i+1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockTridiagonal {
    components: usize,
    nodes: usize,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    pinned: Vec<bool>,
}

impl BlockTridiagonal {
    fn zeros(components: usize, nodes: usize) -> Self {
        let len = nodes * components * components;
        BlockTridiagonal {
            components,
            nodes,
            lower: vec![0.0; len],
            diag: vec![0.0; len],
            upper: vec![0.0; len],
            pinned: vec![false; nodes],
        }
    }

    #[inline]
    fn idx(&self, i: usize, l: usize, k: usize) -> usize {
        (i * self.components + l) * self.components + k
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    /// Nodes whose value is prescribed (Dirichlet boundary).
    pub fn is_pinned(&self, i: usize) -> bool {
        self.pinned[i]
    }

    /// Stencil weights `(lower, diag, upper)` of `u_k` in equation `l` at node `i`.
    pub fn stencil(&self, i: usize, l: usize, k: usize) -> (f64, f64, f64) {
        let o = self.idx(i, l, k);
        (self.lower[o], self.diag[o], self.upper[o])
    }

    pub fn apply(&self, u: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.nodes, self.components));
        self.apply_into(u, &mut out);
        out
    }

    pub fn apply_into(&self, u: ArrayView2<f64>, out: &mut Array2<f64>) {
        assert_eq!(u.dim(), (self.nodes, self.components));
        let nc = self.components;
        for i in 0..self.nodes {
            for l in 0..nc {
                let mut acc = 0.0;
                for k in 0..nc {
                    let o = self.idx(i, l, k);
                    acc += self.diag[o] * u[[i, k]];
                    if i > 0 {
                        acc += self.lower[o] * u[[i - 1, k]];
                    }
                    if i + 1 < self.nodes {
                        acc += self.upper[o] * u[[i + 1, k]];
                    }
                }
                out[[i, l]] = acc;
            }
        }
    }

    pub fn sum(&self, other: &BlockTridiagonal) -> BlockTridiagonal {
        assert_eq!(
            (self.components, self.nodes),
            (other.components, other.nodes)
        );
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect();
        BlockTridiagonal {
            components: self.components,
            nodes: self.nodes,
            lower: add(&self.lower, &other.lower),
            diag: add(&self.diag, &other.diag),
            upper: add(&self.upper, &other.upper),
            pinned: self.pinned.clone(),
        }
    }

    /// `I − scale · A` in interleaved banded storage; pinned rows become identity rows.
    pub fn shifted_band(&self, scale: f64) -> BandMatrix {
        let nc = self.components;
        let n = self.nodes * nc;
        let bw = 2 * nc - 1;
        let mut band = BandMatrix::zeros(n, bw, bw);
        for i in 0..self.nodes {
            for l in 0..nc {
                let r = i * nc + l;
                if self.pinned[i] {
                    band.set(r, r, 1.0);
                    continue;
                }
                band.add(r, r, 1.0);
                for k in 0..nc {
                    let o = self.idx(i, l, k);
                    band.add(r, i * nc + k, -scale * self.diag[o]);
                    if i > 0 {
                        band.add(r, (i - 1) * nc + k, -scale * self.lower[o]);
                    }
                    if i + 1 < self.nodes {
                        band.add(r, (i + 1) * nc + k, -scale * self.upper[o]);
                    }
                }
            }
        }
        band
    }

    /// Dense matrix restricted to the unpinned nodes (interleaved ordering).
    pub fn free_dense(&self) -> (DMatrix<f64>, Vec<usize>) {
        let nc = self.components;
        let free: Vec<usize> = (0..self.nodes).filter(|&i| !self.pinned[i]).collect();
        let pos: Vec<Option<usize>> = {
            let mut p = vec![None; self.nodes];
            for (j, &i) in free.iter().enumerate() {
                p[i] = Some(j);
            }
            p
        };
        let m = free.len() * nc;
        let mut dense = DMatrix::zeros(m, m);
        for (fi, &i) in free.iter().enumerate() {
            for l in 0..nc {
                let r = fi * nc + l;
                for k in 0..nc {
                    let o = self.idx(i, l, k);
                    dense[(r, fi * nc + k)] += self.diag[o];
                    if i > 0 {
                        if let Some(j) = pos[i - 1] {
                            dense[(r, j * nc + k)] += self.lower[o];
                        }
                    }
                    if i + 1 < self.nodes {
                        if let Some(j) = pos[i + 1] {
                            dense[(r, j * nc + k)] += self.upper[o];
                        }
                    }
                }
            }
        }
        (dense, free)
    }
}

/// `A(t)` split into its principal part `Σ ∂_i(a_ij ∂_j ·)` and the
/// lower-order part `Σ b_i ∂_i · + Σ c ·`.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub principal: BlockTridiagonal,
    pub lower_order: BlockTridiagonal,
}

impl DiscreteOperator {
    pub fn full(&self) -> BlockTridiagonal {
        self.principal.sum(&self.lower_order)
    }

    pub fn apply(&self, u: ArrayView2<f64>) -> Array2<f64> {
        self.principal.apply(u) + self.lower_order.apply(u)
    }
}

fn require_1d(coeffs: &CoefficientSet) -> Result<()> {
    if coeffs.dim() != 1 {
        return Err(Error::Unsupported(format!(
            "discretization is one dimensional, coefficient set has dimension {}",
            coeffs.dim()
        )));
    }
    Ok(())
}

/// Inverse of `M[l][k] = a^{kl}(x, t)`, the matrix relating the conormal
/// derivative to `∂_x u` at a boundary point.
fn conormal_inverse(coeffs: &CoefficientSet, x: f64, t: f64) -> Result<DMatrix<f64>> {
    let nc = coeffs.components();
    let mut m = DMatrix::zeros(nc, nc);
    for l in 0..nc {
        for k in 0..nc {
            m[(l, k)] = coeffs
                .diffusion(0, 0, k, l)
                .eval_checked(&[x], t, "diffusion")?;
        }
    }
    m.try_inverse()
        .ok_or_else(|| Error::Config(format!("boundary diffusion matrix at x = {x} is singular")))
}

/// Second-order vertex-centred discretization of `A(t)`.
///
/// Interior rows use face-averaged flux differences for the principal part
/// and centred differences for the drift. Robin rows eliminate the ghost
/// node through `∂_{ν_A} u + p u = 0`, which yields a half-cell flux balance
/// with boundary flux `∓ p u`. Dirichlet boundary rows are pinned and zero.
pub fn assemble_operator(
    coeffs: &CoefficientSet,
    t: f64,
    grid: &Grid,
    bc: BoundaryCondition,
) -> Result<DiscreteOperator> {
    require_1d(coeffs)?;
    let nc = coeffs.components();
    let nodes = grid.nodes();
    let h = grid.h();
    let h2 = h * h;
    let last = nodes - 1;
    let mut principal = BlockTridiagonal::zeros(nc, nodes);
    let mut lower = BlockTridiagonal::zeros(nc, nodes);

    let robin = match bc {
        BoundaryCondition::Robin => Some(coeffs.robin().ok_or_else(|| {
            Error::Config("Robin boundary condition requested but p is not set".into())
        })?),
        BoundaryCondition::Dirichlet => None,
    };

    for i in 1..last {
        let x = grid.x(i);
        let xw = x - 0.5 * h;
        let xe = x + 0.5 * h;
        for l in 0..nc {
            for k in 0..nc {
                let a = coeffs.diffusion(0, 0, k, l);
                let aw = a.eval_checked(&[xw], t, "diffusion")?;
                let ae = a.eval_checked(&[xe], t, "diffusion")?;
                let o = principal.idx(i, l, k);
                principal.lower[o] = aw / h2;
                principal.upper[o] = ae / h2;
                principal.diag[o] = -(aw + ae) / h2;

                let b = coeffs.drift(0, k, l).eval_checked(&[x], t, "drift")?;
                let c = coeffs.reaction(k, l).eval_checked(&[x], t, "reaction")?;
                lower.lower[o] = -b / (2.0 * h);
                lower.upper[o] = b / (2.0 * h);
                lower.diag[o] = c;
            }
        }
    }

    match robin {
        None => {
            principal.pinned[0] = true;
            principal.pinned[last] = true;
            lower.pinned[0] = true;
            lower.pinned[last] = true;
        }
        Some(p) => {
            // (node, outward normal, neighbour, face midpoint)
            for (i, normal, nb, xf) in [
                (0usize, -1.0f64, 1usize, 0.5 * h),
                (last, 1.0, last - 1, grid.length - 0.5 * h),
            ] {
                let x = grid.x(i);
                let pv = p.eval_checked(&[x], t, "Robin coefficient")?;
                // ∂_x u = -normal · p · M^{-1} u at the boundary
                let minv = conormal_inverse(coeffs, x, t)?;
                for l in 0..nc {
                    for k in 0..nc {
                        let af =
                            coeffs
                                .diffusion(0, 0, k, l)
                                .eval_checked(&[xf], t, "diffusion")?;
                        let o = principal.idx(i, l, k);
                        let coupling = 2.0 * af / h2;
                        if nb > i {
                            principal.upper[o] += coupling;
                        } else {
                            principal.lower[o] += coupling;
                        }
                        principal.diag[o] -= coupling;
                        if k == l {
                            principal.diag[o] -= 2.0 * pv / h;
                        }

                        let c = coeffs.reaction(k, l).eval_checked(&[x], t, "reaction")?;
                        lower.diag[o] += c;
                        let mut drift = 0.0;
                        for j in 0..nc {
                            let b = coeffs.drift(0, j, l).eval_checked(&[x], t, "drift")?;
                            drift += b * minv[(j, k)];
                        }
                        lower.diag[o] += -normal * pv * drift;
                    }
                }
            }
        }
    }

    Ok(DiscreteOperator {
        principal,
        lower_order: lower,
    })
}

/// Relative defect of the boundary condition on one grid function.
///
/// Dirichlet: largest boundary value over the largest value. Robin: the
/// conormal residual `∂_{ν_A} u + p u` with three-point one-sided
/// derivatives, relative to the size of its two terms and of `u`.
pub fn boundary_defect(
    u: ArrayView2<f64>,
    coeffs: &CoefficientSet,
    t: f64,
    grid: &Grid,
    bc: BoundaryCondition,
) -> Result<f64> {
    require_1d(coeffs)?;
    let scale_u = u.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale_u == 0.0 {
        return Ok(0.0);
    }
    let last = grid.nodes() - 1;
    let nc = coeffs.components();
    match bc {
        BoundaryCondition::Dirichlet => {
            let b = (0..nc).fold(0.0_f64, |m, k| {
                m.max(u[[0, k]].abs()).max(u[[last, k]].abs())
            });
            Ok(b / scale_u)
        }
        BoundaryCondition::Robin => {
            let p = coeffs.robin().ok_or_else(|| {
                Error::Config("Robin boundary condition requested but p is not set".into())
            })?;
            let h = grid.h();
            let mut worst = 0.0_f64;
            let mut scale = scale_u;
            for (i, normal) in [(0usize, -1.0f64), (last, 1.0)] {
                let x = grid.x(i);
                let pv = p.eval_checked(&[x], t, "Robin coefficient")?;
                for l in 0..nc {
                    let mut flux = 0.0;
                    for k in 0..nc {
                        let a = coeffs
                            .diffusion(0, 0, k, l)
                            .eval_checked(&[x], t, "diffusion")?;
                        let d = if i == 0 {
                            (-3.0 * u[[0, k]] + 4.0 * u[[1, k]] - u[[2, k]]) / (2.0 * h)
                        } else {
                            (3.0 * u[[last, k]] - 4.0 * u[[last - 1, k]] + u[[last - 2, k]])
                                / (2.0 * h)
                        };
                        flux += normal * a * d;
                    }
                    let pu = pv * u[[i, l]];
                    worst = worst.max((flux + pu).abs());
                    scale = scale.max(flux.abs()).max(pu.abs());
                }
            }
            Ok(worst / scale)
        }
    }
}

/// Tolerance used by [`boundary_defect`] checks: round-off for Dirichlet,
/// first order in `h` for the one-sided Robin residual.
pub fn boundary_tolerance(grid: &Grid, bc: BoundaryCondition) -> f64 {
    match bc {
        BoundaryCondition::Dirichlet => 1e-12,
        BoundaryCondition::Robin => 10.0 * grid.h() / grid.length,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{preset, Preset, ScalarField};

    #[test]
    fn heat_interior_rows_are_the_standard_stencil() {
        let grid = Grid::on_pi(3, 1.0, 2).unwrap();
        let op = assemble_operator(
            &preset(Preset::Heat1d).coeffs,
            0.0,
            &grid,
            BoundaryCondition::Dirichlet,
        )
        .unwrap();
        let h2 = grid.h() * grid.h();
        for i in 1..=3 {
            let (lo, d, up) = op.principal.stencil(i, 0, 0);
            assert!((lo * h2 - 1.0).abs() < 1e-14);
            assert!((d * h2 + 2.0).abs() < 1e-14);
            assert!((up * h2 - 1.0).abs() < 1e-14);
        }
        assert!(op.principal.is_pinned(0) && op.principal.is_pinned(4));
    }

    #[test]
    fn neumann_annihilates_constants() {
        let grid = Grid::on_pi(20, 1.0, 2).unwrap();
        let setup = preset(Preset::Coupled2).with_robin(0.0);
        let op = assemble_operator(&setup.coeffs, 0.0, &grid, BoundaryCondition::Robin).unwrap();
        let ones = Array2::from_elem((grid.nodes(), 2), 1.0);
        let out = op.apply(ones.view());
        assert!(out.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn robin_without_p_is_a_configuration_error() {
        let grid = Grid::on_pi(5, 1.0, 2).unwrap();
        let r = assemble_operator(
            &preset(Preset::Heat1d).coeffs,
            0.0,
            &grid,
            BoundaryCondition::Robin,
        );
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn coupled_operator_on_sine_is_second_order() {
        // [[2,1],[1,2]] applied to (-sin x, 0) columnwise gives (-2 sin x, -sin x)
        let grid = Grid::on_pi(199, 1.0, 2).unwrap();
        let op = assemble_operator(
            &preset(Preset::Coupled2).coeffs,
            0.0,
            &grid,
            BoundaryCondition::Dirichlet,
        )
        .unwrap();
        let u = grid.sample(2, |x, k| if k == 0 { x.sin() } else { 0.0 });
        let out = op.apply(u.view());
        let err = (1..=grid.nx)
            .map(|i| {
                let s = grid.x(i).sin();
                (out[[i, 0]] + 2.0 * s).abs().max((out[[i, 1]] + s).abs())
            })
            .fold(0.0, f64::max);
        assert!(
            err < 2.0 * grid.h() * grid.h() / 12.0 * 2.0 + 1e-9,
            "err = {err}"
        );
    }

    #[test]
    fn drift_and_reaction_land_in_lower_order_part() {
        let grid = Grid::on_pi(10, 1.0, 2).unwrap();
        let mut coeffs = preset(Preset::Heat1d).coeffs;
        coeffs.set_drift(0, 0, 0, ScalarField::constant(0.5));
        coeffs.set_reaction(0, 0, ScalarField::constant(-2.0));
        let op = assemble_operator(&coeffs, 0.0, &grid, BoundaryCondition::Dirichlet).unwrap();
        let (lo, d, up) = op.lower_order.stencil(4, 0, 0);
        assert!((up - 0.5 / (2.0 * grid.h())).abs() < 1e-12);
        assert!((lo + 0.5 / (2.0 * grid.h())).abs() < 1e-12);
        assert_eq!(d, -2.0);
    }

    #[test]
    fn boundary_defect_flags_nonzero_dirichlet_values() {
        let grid = Grid::on_pi(30, 1.0, 2).unwrap();
        let coeffs = preset(Preset::Heat1d).coeffs;
        let ok = grid.sample(1, |x, _| x.sin());
        let bad = grid.sample(1, |x, _| x.cos());
        let d_ok =
            boundary_defect(ok.view(), &coeffs, 0.0, &grid, BoundaryCondition::Dirichlet).unwrap();
        let d_bad = boundary_defect(
            bad.view(),
            &coeffs,
            0.0,
            &grid,
            BoundaryCondition::Dirichlet,
        )
        .unwrap();
        assert!(d_ok < 1e-12);
        assert!(d_bad > 0.9);
    }

    #[test]
    fn robin_defect_separates_compatible_and_incompatible_profiles() {
        let grid = Grid::on_pi(100, 1.0, 2).unwrap();
        let setup = preset(Preset::Heat1d).with_robin(0.5);
        let pi = std::f64::consts::PI;
        // u' (0) = p u(0), u'(π) = -p u(π)
        let good = grid.sample(1, |x, _| 1.0 + 0.5 * x * (pi - x) / pi);
        let bad = grid.sample(1, |x, _| x.sin() + 0.1);
        let tol = boundary_tolerance(&grid, BoundaryCondition::Robin);
        let dg = boundary_defect(
            good.view(),
            &setup.coeffs,
            0.0,
            &grid,
            BoundaryCondition::Robin,
        )
        .unwrap();
        let db = boundary_defect(
            bad.view(),
            &setup.coeffs,
            0.0,
            &grid,
            BoundaryCondition::Robin,
        )
        .unwrap();
        assert!(dg < 1e-12, "{dg}");
        assert!(db > tol, "{db}");
    }
}
