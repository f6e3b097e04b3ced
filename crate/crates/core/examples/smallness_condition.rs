//! Left side of the smallness condition along a delta sweep.

use sqg::condition::evaluate_condition;
use sqg::data::{DataRecipe, PerturbationSeed, VerificationParams};
use sqg::Grid;

fn main() -> sqg::Result<()> {
    let vp = VerificationParams::default();
    println!("{:>6} {:>12} {:>12} {:>12}", "delta", "L", "F", "lhs");
    for (delta, n) in [(0.1, 256), (0.05, 512)] {
        let grid = Grid::with_spacing(n, delta / 6.0)?;
        let c = evaluate_condition(&DataRecipe::corollary(delta, 1.0, 0.25), &grid, &vp)?;
        println!(
            "{delta:>6} {:>12.4e} {:>12.4e} {:>12.4e}",
            c.integrals.linf, c.integrals.forcing, c.lhs
        );
    }

    // a nonzero perturbation adds its H3 energy in front of the exponential
    let grid = Grid::with_spacing(256, 0.1 / 6.0)?;
    let recipe = DataRecipe::corollary(0.1, 1.0, 0.25).with_g0(PerturbationSeed::RandomBand {
        target_h3_sq: 0.01,
        k_max: 0.8,
        seed: 3,
    });
    let c = evaluate_condition(&recipe, &grid, &vp)?;
    println!(
        "with ||g0||_H3^2 = {}: lhs = {:.4e}, pass at eps = {}: {}",
        c.g0_h3_sq, c.lhs, c.eps, c.pass
    );
    Ok(())
}
