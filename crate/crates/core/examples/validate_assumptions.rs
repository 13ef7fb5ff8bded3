//! Checks symmetry and strong ellipticity of every preset, and the Lipschitz
//! bound of the semilinear source on random smooth pairs.

use parastab::discretize::Grid;
use parastab::model::{lipschitz_sweep, preset, validate, Preset};

fn main() -> parastab::Result<()> {
    for which in Preset::ALL {
        let setup = preset(which);
        let report = validate(&setup.coeffs, 256, 0)?;
        println!(
            "{:<14} passed={} symmetry_defect={:e} min_eigenvalue={} sigma={}",
            which.name(),
            report.passed,
            report.symmetry_defect,
            report.min_form_eigenvalue,
            report.sigma
        );
        if !setup.source.is_zero() {
            let grid = Grid::on_pi(100, 1.0, 10)?;
            let ratio = lipschitz_sweep(&setup.source, &grid, 100, 0)?;
            println!(
                "{:<14} largest Lipschitz ratio {ratio} (L = {})",
                "",
                setup.source.lipschitz()
            );
        }
    }
    Ok(())
}
