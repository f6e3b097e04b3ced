//! Fields, velocity, dealiasing and the norms used everywhere else.

use sqg::norms::{l2_norm, l2_norm_physical, sobolev_norm, sup_norm};
use sqg::ops::{dealias, velocity_from_scalar};
use sqg::random::{random_field, Band};
use sqg::{Grid, SpectralField};

fn main() -> sqg::Result<()> {
    let grid = Grid::unit(64)?;
    println!(
        "n = {}, dk = {}, dealias cutoff |j| <= {}",
        grid.n(),
        grid.dk(),
        grid.dealias_cutoff()
    );

    let mut theta = SpectralField::zeros(grid);
    theta.add_cosine(3, 4, 1.0)?;
    let u = velocity_from_scalar(&theta)?;
    println!(
        "cos(3x + 4y): ||theta||_L2 = {:.6}, ||theta||_H3 = {:.6}",
        l2_norm(&theta),
        sobolev_norm(&theta, 3, 0.0)
    );
    println!(
        "  div u defect {:.1e}, |u| coeff max {:.4}",
        u.divergence_defect(),
        u.max_abs_coeff()
    );

    let mut noisy = random_field(grid, Band::Disc(10.0), 1);
    noisy.add_cosine(25, 3, 5.0)?;
    let clean = dealias(&noisy);
    println!(
        "random field + cos(25x + 3y): L2 {:.4} (physical {:.4}), after 2/3 rule {:.4}, sup {:.4}",
        l2_norm(&noisy),
        l2_norm_physical(&noisy),
        l2_norm(&clean),
        sup_norm(&clean)
    );
    Ok(())
}
