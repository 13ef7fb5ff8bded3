//! Solves the heat equation and the coupled system from `sin x` and compares
//! with the exact decay `e^{-κt} sin x`.

use parastab::discretize::Grid;
use parastab::forward::{solve_setup, Scheme, SolveOptions};
use parastab::model::{preset, Preset};

fn main() -> parastab::Result<()> {
    let grid = Grid::on_pi(200, 1.0, 2000)?;
    for (which, rate) in [(Preset::Heat1d, 1.0), (Preset::Coupled2, 3.0)] {
        let setup = preset(which);
        let nc = setup.coeffs.components();
        for scheme in [Scheme::BackwardEuler, Scheme::CrankNicolson] {
            let opts = SolveOptions {
                scheme,
                ..SolveOptions::default()
            };
            let traj = solve_setup(&setup, grid.sample(nc, |x, _| x.sin()).view(), &grid, &opts)?;
            let err = traj
                .terminal()
                .indexed_iter()
                .map(|((i, _), v)| (v - (-rate * 1.0f64).exp() * grid.x(i).sin()).abs())
                .fold(0.0, f64::max);
            println!(
                "{:<9} {scheme}: sup error at T = 1 is {err:.3e}",
                which.name()
            );
        }
    }
    Ok(())
}
