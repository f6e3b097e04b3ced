//! The annulus/strip initial data and its four lower bounds.

use sqg::condition::corollary_bounds;
use sqg::data::{build_family, DataRecipe};
use sqg::norms::sup_norm;
use sqg::Grid;

fn main() -> sqg::Result<()> {
    for delta in [0.1, 0.05] {
        let grid = Grid::with_spacing(256, delta / 6.0)?;
        let recipe = DataRecipe::corollary(delta, 1.0, 0.25);
        let fam = build_family(&recipe, &grid)?;
        println!(
            "delta = {delta}: amplitude {:.4}, sup |Theta0| = {:.4}",
            recipe.amplitude_value(),
            sup_norm(&fam.theta0)
        );
        let report = corollary_bounds(&recipe, &grid)?;
        for b in &report.bounds {
            println!(
                "  {:<22} {:>12.4e} >= {:>10.4e}  {}",
                b.name, b.computed, b.required, b.pass
            );
        }
    }
    Ok(())
}
