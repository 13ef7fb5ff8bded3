//! Twin experiment at an intermediate time: the fitted slope of
//! `log E(t0)` against `log E(T)` is compared with the Hölder exponent θ.

use parastab::discretize::Grid;
use parastab::model::{preset, Preset};
use parastab::stability::{holder_experiment, HolderConfig};

fn main() -> parastab::Result<()> {
    let grid = Grid::on_pi(100, 1.0, 1000)?;
    let eps = vec![1e-1, 1e-2, 1e-3, 1e-4];
    for which in [Preset::Heat1d, Preset::SineGradient] {
        let report = holder_experiment(&HolderConfig::new(
            preset(which),
            grid,
            0.5,
            4.0,
            eps.clone(),
        ))?;
        println!(
            "{}: θ = {:.6}, slope = {:.6}, C = {:.4e}",
            which.name(),
            report.theta,
            report.slope.unwrap(),
            report.c
        );
        for r in &report.records {
            println!(
                "  ε = {:e}  E_T = {:.4e}  E_t0 = {:.4e}  margin = {:.3e}",
                r.epsilon,
                r.e_t.unwrap(),
                r.e_t0.unwrap(),
                r.margin.unwrap()
            );
        }
        println!("  violations: {}", report.violations);
    }
    Ok(())
}
