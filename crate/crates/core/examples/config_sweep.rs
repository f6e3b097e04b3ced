//! A config file with two sweep axes, run as a parallel sweep.

use sqg::experiment::{parse_config_text, sweep, ExperimentConfig};

const CONFIG: &str = "
grid.n = 32
grid.box_len = 2pi
recipe.background = modes
recipe.modes = 1:1:0.3, 2:-1:0.2
recipe.g0 = random
recipe.g0_h3_sq = 0.01
recipe.g0_k_max = 4
sim.t_end = 0.25
sim.dt_max = 0.0078125
sim.sample_every = 8
sweep.axis.recipe.mu = 0.5, 1
sweep.axis.recipe.alpha = 0.1, 0.3
sweep.max_parallel = 2
";

fn main() -> sqg::Result<()> {
    let dir = tempfile::tempdir()?;
    let mut pairs = parse_config_text(CONFIG)?;
    pairs.push(("output_dir".into(), dir.path().display().to_string()));
    let cfg = ExperimentConfig::from_pairs(pairs)?;
    println!("{} sweep points", cfg.sweep.points());
    for row in sweep(&cfg)? {
        println!(
            "job {} {:?}: condition lhs {:.3e}, max ||g||_H3^2 {:.3e}",
            row.job,
            row.values,
            row.condition_lhs.unwrap_or(f64::NAN),
            row.max_h3_g_sq.unwrap_or(f64::NAN)
        );
    }
    print!("{}", std::fs::read_to_string(dir.path().join("sweep.csv"))?);
    Ok(())
}
