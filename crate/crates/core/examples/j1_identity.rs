//! Integration-by-parts identity for the time-derivative cross term, and its
//! second-order convergence in the time step.

use parastab::carleman::{j1_identity_check, CarlemanWeight};
use parastab::discretize::{Grid, Trajectory};
use parastab::model::BoundaryCondition;

fn main() -> parastab::Result<()> {
    let w = CarlemanWeight::new(1.0, 1.0)?;
    let mut prev: Option<f64> = None;
    for nt in [250, 500, 1000, 2000, 4000] {
        let grid = Grid::on_pi(200, 1.0, nt)?;
        let z = Trajectory::from_fn(grid, 1, BoundaryCondition::Dirichlet, |x, t, _| {
            (-t).exp() * x.sin()
        })?;
        let j = j1_identity_check(&z, &w)?;
        let ratio = prev
            .map(|p| format!("{:.2}", p / j.defect))
            .unwrap_or_default();
        println!(
            "nt = {nt:>5}  direct = {:+.6e}  integrated = {:+.6e}  defect = {:.3e}  {ratio}",
            j.direct, j.integrated, j.defect
        );
        prev = Some(j.defect);
    }
    Ok(())
}
