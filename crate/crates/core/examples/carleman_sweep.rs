//! Sweeps the weighted Carleman constant `c*` over `(s, λ)` for a heat
//! trajectory and prints the grid of values.

use parastab::carleman::sweep_constant;
use parastab::discretize::Grid;
use parastab::forward::{solve_setup, SolveOptions};
use parastab::model::{preset, Preset};

fn main() -> parastab::Result<()> {
    let setup = preset(Preset::Coupled2);
    let grid = Grid::on_pi(100, 1.0, 1000)?;
    let z = solve_setup(
        &setup,
        grid.sample(2, |x, _| x.sin()).view(),
        &grid,
        &SolveOptions::default(),
    )?;
    let s = [2.0, 4.0, 8.0, 16.0, 32.0];
    let lambda = [2.0, 4.0, 8.0];
    let report = sweep_constant(&z, &setup.coeffs, &s, &lambda)?;
    print!("{:>8}", "s \\ λ");
    for l in lambda {
        print!("{l:>12}");
    }
    println!();
    for si in s {
        print!("{si:>8}");
        for l in lambda {
            let cell = report
                .cells
                .iter()
                .find(|c| c.s == si && c.lambda == l)
                .unwrap();
            print!("{:>12.4e}", cell.budget.c_star);
        }
        println!();
    }
    println!("sup c* = {:e} at {:?}", report.sup_c_star, report.argmax);
    for l in lambda {
        println!(
            "spread over the top octave at λ = {l}: {:.4}",
            report.spread_at(l).unwrap()
        );
    }
    Ok(())
}
