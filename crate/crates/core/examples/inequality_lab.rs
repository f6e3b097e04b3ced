//! Empirical constants of the commutator and interpolation inequalities.

use sqg::inequalities::{run_lab, summarize, LabConfig, TrialKind};
use sqg::Grid;

fn main() -> sqg::Result<()> {
    let cfg = LabConfig {
        grid: Grid::new(64, 8.0 * std::f64::consts::PI)?,
        ..LabConfig::standard()
    };
    let mut rows = Vec::new();
    rows.extend(run_lab(&cfg, TrialKind::KatoPonce, 0.0, 0..10)?);
    rows.extend(run_lab(&cfg, TrialKind::Leibniz, 0.0, 0..10)?);
    for alpha in [0.0, 0.25] {
        rows.extend(run_lab(&cfg, TrialKind::GnGrad, alpha, 0..10)?);
        rows.extend(run_lab(&cfg, TrialKind::GnDbeta, alpha, 0..10)?);
    }
    for s in summarize(&rows) {
        println!(
            "{:<10} {:>5}: max {:.4e}  mean {:.4e}  sd {:.2e}  rescale defect {:.1e}",
            s.trial_kind.name(),
            s.m_or_alpha,
            s.max,
            s.mean,
            s.stddev,
            s.max_rescale_defect
        );
    }
    Ok(())
}
