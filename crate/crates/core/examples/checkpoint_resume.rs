//! Stop, checkpoint, resume: the result matches an uninterrupted run.

use sqg::checkpoint;
use sqg::data::{CosineMode, DataRecipe, PerturbationSeed};
use sqg::evolution::{SimParams, Simulation};
use sqg::Grid;

fn main() -> sqg::Result<()> {
    let grid = Grid::unit(32)?;
    let recipe = DataRecipe::with_modes(
        1.0,
        0.25,
        vec![CosineMode {
            j1: 1,
            j2: 1,
            amplitude: 0.3,
        }],
    )
    .with_g0(PerturbationSeed::RandomBand {
        target_h3_sq: 0.01,
        k_max: 4.0,
        seed: 5,
    });
    let params = |t_end| SimParams {
        t_end,
        dt_max: 1.0 / 64.0,
        ..SimParams::for_recipe(&recipe)
    };
    let dir = tempfile::tempdir()?;

    let straight = Simulation::new(&recipe, &grid, params(1.0))?.run()?;

    let mut first = Simulation::new(&recipe, &grid, params(0.5))?;
    first.run_with(|_| Ok(()))?;
    first.save_checkpoint(dir.path(), "state")?;
    let resumed = Simulation::resume(&recipe, &grid, params(1.0), dir.path(), "state")?.run()?;

    println!(
        "files: {:?}",
        std::fs::read_dir(dir.path())?
            .map(|e| e.map(|e| e.file_name()))
            .collect::<Result<Vec<_>, _>>()?
    );
    let g = checkpoint::load(dir.path().join("state.sqgf"))?;
    println!("checkpoint holds an n = {} field at t = 0.5", g.grid().n());
    println!(
        "final fields identical: {}",
        straight.final_state.field == resumed.final_state.field
    );
    Ok(())
}
