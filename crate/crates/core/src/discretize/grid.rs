use ndarray::{s, Array2, Array3, ArrayView2};

use crate::error::{Error, Result};
use crate::model::BoundaryCondition;

/// Uniform vertex grid on `(0, length)` with `nx` interior nodes and a
/// uniform time lattice `t_m = m Δt`, `m = 0..=nt`.
///
/// Grid functions are `Array2` of shape `(nodes, components)`, so that the
/// row-major storage interleaves components node by node.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid {
    pub length: f64,
    pub nx: usize,
    pub t_final: f64,
    pub nt: usize,
}

impl Grid {
    pub fn new(length: f64, nx: usize, t_final: f64, nt: usize) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Config(format!(
                "domain length {length} must be positive"
            )));
        }
        if !(t_final > 0.0 && t_final.is_finite()) {
            return Err(Error::Config(format!(
                "final time {t_final} must be positive"
            )));
        }
        if nx < 3 {
            return Err(Error::Config(format!("nx = {nx} < 3")));
        }
        if nt < 2 {
            return Err(Error::Config(format!("nt = {nt} < 2")));
        }
        Ok(Grid {
            length,
            nx,
            t_final,
            nt,
        })
    }

    /// `(0, π)` with the given resolution.
    pub fn on_pi(nx: usize, t_final: f64, nt: usize) -> Result<Self> {
        Grid::new(std::f64::consts::PI, nx, t_final, nt)
    }

    pub fn h(&self) -> f64 {
        self.length / (self.nx + 1) as f64
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    /// Total node count including both boundary nodes.
    pub fn nodes(&self) -> usize {
        self.nx + 2
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx + 1 {
            self.length
        } else {
            i as f64 * self.h()
        }
    }

    pub fn t(&self, m: usize) -> f64 {
        if m == self.nt {
            self.t_final
        } else {
            m as f64 * self.dt()
        }
    }

    /// Nearest lattice index to `t`.
    pub fn time_index(&self, t: f64) -> usize {
        ((t / self.dt()).round().max(0.0) as usize).min(self.nt)
    }

    /// Trapezoid weight of node `i`.
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx + 1 {
            0.5 * self.h()
        } else {
            self.h()
        }
    }

    /// Samples `f(x)` into an `(nodes, components)` array.
    pub fn sample<F>(&self, components: usize, f: F) -> Array2<f64>
    where
        F: Fn(f64, usize) -> f64,
    {
        Array2::from_shape_fn((self.nodes(), components), |(i, k)| f(self.x(i), k))
    }

    pub fn with_time(&self, t_final: f64, nt: usize) -> Result<Self> {
        Grid::new(self.length, self.nx, t_final, nt)
    }
}

/// A space–time lattice of grid functions, one slice per time node.
#[derive(Clone, Debug)]
pub struct Trajectory {
    values: Array3<f64>,
    grid: Grid,
    bc: BoundaryCondition,
}

impl Trajectory {
    pub fn new(values: Array3<f64>, grid: Grid, bc: BoundaryCondition) -> Result<Self> {
        let (nt1, nodes, nc) = values.dim();
        if nt1 != grid.nt + 1 || nodes != grid.nodes() || nc == 0 {
            return Err(Error::Config(format!(
                "trajectory shape {:?} does not match grid ({} slices, {} nodes)",
                values.dim(),
                grid.nt + 1,
                grid.nodes()
            )));
        }
        if let Some(m) = values
            .outer_iter()
            .position(|slice| slice.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Divergence { step: m });
        }
        Ok(Trajectory { values, grid, bc })
    }

    /// Samples `f(x, t, component)` on every lattice point.
    pub fn from_fn<F>(grid: Grid, components: usize, bc: BoundaryCondition, f: F) -> Result<Self>
    where
        F: Fn(f64, f64, usize) -> f64,
    {
        let values = Array3::from_shape_fn((grid.nt + 1, grid.nodes(), components), |(m, i, k)| {
            f(grid.x(i), grid.t(m), k)
        });
        Trajectory::new(values, grid, bc)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn bc(&self) -> BoundaryCondition {
        self.bc
    }

    pub fn components(&self) -> usize {
        self.values.dim().2
    }

    pub fn slice(&self, m: usize) -> ArrayView2<'_, f64> {
        self.values.slice(s![m, .., ..])
    }

    pub fn terminal(&self) -> ArrayView2<'_, f64> {
        self.slice(self.grid.nt)
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array3<f64> {
        self.values
    }

    /// `self − other` slice by slice.
    pub fn difference(&self, other: &Trajectory) -> Result<Trajectory> {
        if self.values.dim() != other.values.dim() || self.grid != other.grid {
            return Err(Error::Config(
                "trajectories live on different lattices".into(),
            ));
        }
        Trajectory::new(&self.values - &other.values, self.grid, self.bc)
    }

    /// Multiplies every value by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Result<Trajectory> {
        Trajectory::new(&self.values * alpha, self.grid, self.bc)
    }

    /// Second-order time derivative at slice `m`: centered in the interior,
    /// one-sided three-point at both ends.
    pub fn time_derivative(&self, m: usize) -> Array2<f64> {
        let nt = self.grid.nt;
        let dt = self.grid.dt();
        let u = |j: usize| self.slice(j);
        if m == 0 {
            (&u(0) * -3.0 + &u(1) * 4.0 - u(2)) / (2.0 * dt)
        } else if m == nt {
            (&u(nt) * 3.0 - &u(nt - 1) * 4.0 + u(nt - 2)) / (2.0 * dt)
        } else {
            (&u(m + 1) - &u(m - 1)) / (2.0 * dt)
        }
    }
}
