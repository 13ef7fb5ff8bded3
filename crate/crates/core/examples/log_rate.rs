//! Initial-time experiment: `E_0 (log 1/D)^α` over a decade sweep of
//! perturbation amplitudes.

use parastab::discretize::Grid;
use parastab::model::{preset, Preset};
use parastab::stability::{log_experiment, LogConfig, PerturbationFamily};

fn main() -> parastab::Result<()> {
    let grid = Grid::on_pi(200, 1.0, 2000)?;
    let eps = vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    for family in [
        PerturbationFamily::SingleMode,
        PerturbationFamily::HighMode(4),
    ] {
        let mut cfg = LogConfig::new(preset(Preset::Heat1d), grid, 0.5, eps.clone());
        cfg.family = family;
        let report = log_experiment(&cfg)?;
        println!(
            "{family:?}: nonincreasing = {}, sup = {:.4e}",
            report.nonincreasing, report.sup_product
        );
        for r in report.included() {
            println!(
                "  ε = {:e}  E_0 = {:.4e}  D = {:.4e}  product = {:.4e}",
                r.epsilon,
                r.e_0.unwrap(),
                r.d.unwrap(),
                r.product.unwrap()
            );
        }
    }
    Ok(())
}
