//! Boundary trace bound `|u(0)|² + |u(π)|² ≤ ε‖u'‖² + (K/ε)‖u‖²` on random
//! smooth fields, with the calibrated constant `K`.

use parastab::discretize::{trace_check, trace_constant, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> parastab::Result<()> {
    let grid = Grid::on_pi(200, 1.0, 2)?;
    println!("K = {}", trace_constant(grid.length)?);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for eps in [0.1, 0.5, 0.9] {
        let mut worst = 0.0_f64;
        let mut held = 0;
        for _ in 0..100 {
            let c: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u = grid.sample(1, |x, _| {
                c.iter()
                    .enumerate()
                    .map(|(j, a)| a * (j as f64 * x).cos())
                    .sum()
            });
            let t = trace_check(u.view(), &grid, eps)?;
            held += t.holds as usize;
            worst = worst.max(t.lhs / t.rhs);
        }
        println!("ε = {eps}: {held}/100 hold, largest lhs/rhs = {worst:.4}");
    }
    Ok(())
}
