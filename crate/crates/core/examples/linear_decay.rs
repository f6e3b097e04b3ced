//! With transport switched off every mode decays at its exact rate.

use sqg::data::Background;
use sqg::evolution::{Mode, SimParams, Simulation};
use sqg::ops::DEFAULT_VELOCITY_EXPONENT;
use sqg::{Grid, SpectralField};

fn main() -> sqg::Result<()> {
    let grid = Grid::unit(32)?;
    let (mu, alpha) = (1.0, 0.25);
    let mut theta = SpectralField::zeros(grid);
    theta.add_cosine(2, 1, 1.0)?;
    let k = 5f64.sqrt();

    let mut p = SimParams::new(mu, alpha);
    p.nonlinear = false;
    p.mode = Mode::FullTheta;
    p.t_end = 3.0;
    p.dt_max = 0.05;
    p.sample_every = 20;
    let bg = Background::new(SpectralField::zeros(grid), mu, alpha, DEFAULT_VELOCITY_EXPONENT);
    let tr = Simulation::from_fields(bg, p, (Mode::FullTheta, theta), None)?.run()?;
    for r in &tr.records {
        let exact = tr.records[0].l2_g_sq * (-2.0 * mu * k.powf(2.0 * alpha) * r.t).exp();
        println!(
            "t = {:>4.2}  ||theta||^2 = {:.12e}  rel err {:.1e}",
            r.t,
            r.l2_g_sq,
            (r.l2_g_sq / exact - 1.0).abs()
        );
    }
    Ok(())
}
