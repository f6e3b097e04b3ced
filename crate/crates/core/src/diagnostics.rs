//! Sampled diagnostics of a run: norms, the `H^3` energy ledger and the
//! a-priori bound of the perturbation.
//!
//! With `P1 = v.grad g`, `P2 = U.grad g`, `P3 = v.grad Theta` and
//! `P4 = U.grad Theta` the perturbation obeys
//! `g_t + mu Lambda^(2 alpha) g = -(P1 + P2 + P3 + P4)`, hence
//!
//! `1/2 d/dt ||g||_{H3}^2 + mu ||Lambda^alpha g||_{H3}^2 = I1 + I2 + I3 + I4 + rhs_l2`
//!
//! where `I_i = -sum_{1 <= |beta| <= 3} <D^beta P_i, D^beta g>` and `rhs_l2`
//! is the `|beta| = 0` level.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{Background, BackgroundSnapshot, DataRecipe, VerificationParams};
use crate::error::{Result, SqgError};
use crate::field::{forward_pair, inverse_pair, SpectralField};
use crate::grid::Grid;
use crate::norms::{l2_norm, max_abs, SobolevWeight};
use crate::ops::{dealias_in_place, derivative, velocity_with_exponent};

/// Which parts of the right-hand side are active in the dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveTerms {
    /// `P1`, `P2`, `P3`.
    pub transport: bool,
    /// `P4`.
    pub forcing: bool,
}

impl ActiveTerms {
    pub const ALL: ActiveTerms = ActiveTerms {
        transport: true,
        forcing: true,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LedgerTerms {
    pub i1: f64,
    pub i2: f64,
    pub i3: f64,
    pub i4: f64,
    pub rhs_l2: f64,
    /// `|int (v.grad g) g| / (||v.grad g|| ||g||)`.
    pub transport_vg_rel: f64,
    /// `|int (U.grad g) g| / (||U.grad g|| ||g||)`.
    pub transport_ug_rel: f64,
}

impl LedgerTerms {
    pub fn sum(&self) -> f64 {
        self.i1 + self.i2 + self.i3 + self.i4 + self.rhs_l2
    }
}

/// Weights reused at every sample of a run.
#[derive(Debug, Clone)]
pub struct LedgerContext {
    upper: SobolevWeight,
    h3: SobolevWeight,
    lam_h3: SobolevWeight,
    velocity_exponent: f64,
}

impl LedgerContext {
    pub fn new(grid: Grid, alpha: f64, velocity_exponent: f64) -> Self {
        LedgerContext {
            upper: SobolevWeight::new(grid, 1, 3, 0.0),
            h3: SobolevWeight::inhomogeneous(grid, 3, 0.0),
            lam_h3: SobolevWeight::inhomogeneous(grid, 3, alpha),
            velocity_exponent,
        }
    }

    pub fn h3_sq(&self, g: &SpectralField) -> f64 {
        self.h3.norm_sq(g)
    }

    /// `||Lambda^alpha g||_{H3}^2`.
    pub fn lam_h3_sq(&self, g: &SpectralField) -> f64 {
        self.lam_h3.norm_sq(g)
    }

    /// Ledger terms of `g` against the background snapshot `bg` (`None` for
    /// a vanishing background).
    pub fn ledger(
        &self,
        g: &SpectralField,
        bg: Option<&BackgroundSnapshot>,
        active: ActiveTerms,
    ) -> Result<LedgerTerms> {
        let grid = *g.grid();
        let zero = vec![0.0; grid.len()];
        let v = velocity_with_exponent(g, self.velocity_exponent)?;
        let (v1, v2) = v.to_physical();
        let (g1, g2) = inverse_pair(&derivative(g, (1, 0)), &derivative(g, (0, 1)));
        let (u1, u2, d1, d2) = match bg {
            Some(s) => (&s.u1[..], &s.u2[..], &s.d1[..], &s.d2[..]),
            None => (&zero[..], &zero[..], &zero[..], &zero[..]),
        };
        let n2 = grid.len();
        let (mut p1, mut p2, mut p3, mut p4) = (vec![0.0; n2], vec![0.0; n2], vec![0.0; n2], vec![0.0; n2]);
        for i in 0..n2 {
            p1[i] = v1[i] * g1[i] + v2[i] * g2[i];
            p2[i] = u1[i] * g1[i] + u2[i] * g2[i];
            p3[i] = v1[i] * d1[i] + v2[i] * d2[i];
            p4[i] = u1[i] * d1[i] + u2[i] * d2[i];
        }
        let (mut f1, mut f2) = forward_pair(grid, &p1, &p2);
        let (mut f3, mut f4) = forward_pair(grid, &p3, &p4);
        for f in [&mut f1, &mut f2, &mut f3, &mut f4] {
            dealias_in_place(f);
        }
        let l2 = |p: &SpectralField| {
            grid.area()
                * p.coeffs()
                    .iter()
                    .zip(g.coeffs())
                    .map(|(a, b)| (a * b.conj()).re)
                    .sum::<f64>()
        };
        let rel = |p: &SpectralField, raw: f64| {
            let s = l2_norm(p) * l2_norm(g);
            if s == 0.0 {
                0.0
            } else {
                raw.abs() / s
            }
        };
        let (t, fo) = (active.transport, active.forcing);
        let on = |b: bool, x: f64| if b { x } else { 0.0 };
        Ok(LedgerTerms {
            i1: on(t, -self.upper.inner(&f1, g)),
            i2: on(t, -self.upper.inner(&f2, g)),
            i3: on(t, -self.upper.inner(&f3, g)),
            i4: on(fo, -self.upper.inner(&f4, g)),
            rhs_l2: on(t, -l2(&f3)) + on(fo, -l2(&f4)),
            transport_vg_rel: rel(&f1, l2(&f1)),
            transport_ug_rel: rel(&f2, l2(&f2)),
        })
    }
}

/// Ledger terms of `g` at time `t` for the background of `recipe`.
pub fn energy_ledger(g: &SpectralField, recipe: &DataRecipe, t: f64) -> Result<LedgerTerms> {
    let bg = Background::from_recipe(recipe, g.grid())?;
    let snap = bg.snapshot(t)?;
    LedgerContext::new(*g.grid(), recipe.alpha, recipe.velocity_exponent).ledger(
        g,
        if bg.is_zero() { None } else { Some(&snap) },
        ActiveTerms::ALL,
    )
}

/// One sample of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub step: u64,
    pub l2_g_sq: f64,
    pub h3_g_sq: f64,
    pub lam_alpha_h3_g_sq: f64,
    /// `(mu/2) int_0^t ||Lambda^alpha g||_{H3}^2`.
    pub dissipation_integral: f64,
    /// `(mu/2) int_0^t ||g||_{H3}^2`.
    pub h3_integral: f64,
    pub linf_theta: f64,
    pub linf_u_cap: f64,
    pub h3_forcing: f64,
    pub ledger: LedgerTerms,
    pub ledger_residual: Option<f64>,
    pub tail_fraction: f64,
    pub paired_discrepancy: Option<f64>,
}

/// Background part of a record: `||Theta||_inf`, `||U||_inf`,
/// `||U.grad Theta||_{H3}`.
pub(crate) fn background_norms(
    ctx: &LedgerContext,
    bg: Option<(&BackgroundSnapshot, &SpectralField)>,
) -> (f64, f64, f64) {
    match bg {
        None => (0.0, 0.0, 0.0),
        Some((s, forcing)) => (
            max_abs(&s.theta.to_physical()),
            s.max_speed(),
            ctx.h3_sq(forcing).sqrt(),
        ),
    }
}

pub const CSV_HEADER: [&str; 15] = [
    "t",
    "l2_g_sq",
    "h3_g_sq",
    "lam_alpha_h3_g_sq",
    "dissipation_integral",
    "linf_theta",
    "linf_u",
    "h3_forcing",
    "i1",
    "i2",
    "i3",
    "i4",
    "ledger_residual",
    "tail_fraction",
    "paired_discrepancy",
];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the trajectory table; `None` cells are left blank.
pub fn write_trajectory_csv<W: Write>(w: W, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in records {
        out.write_record([
            r.t.to_string(),
            r.l2_g_sq.to_string(),
            r.h3_g_sq.to_string(),
            r.lam_alpha_h3_g_sq.to_string(),
            r.dissipation_integral.to_string(),
            r.linf_theta.to_string(),
            r.linf_u_cap.to_string(),
            r.h3_forcing.to_string(),
            r.ledger.i1.to_string(),
            r.ledger.i2.to_string(),
            r.ledger.i3.to_string(),
            r.ledger.i4.to_string(),
            opt(r.ledger_residual),
            r.tail_fraction.to_string(),
            opt(r.paired_discrepancy),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Largest sampling interval accepted by [`ledger_consistency`].
pub const MAX_SAMPLING_INTERVAL: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub max_relative: f64,
    pub mean_relative: f64,
    /// Largest magnitude among all ledger terms over the samples.
    pub scale: f64,
    pub max_interval: f64,
    /// Per-sample residual relative to `scale`.
    pub relative: Vec<f64>,
}

/// Points in the finite-difference stencil of the ledger check.
const STENCIL: usize = 5;

/// Weights for the first derivative at `x0` from values at `nodes`
/// (Fornberg's recursion).
fn first_derivative_weights(x0: f64, nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut w = vec![[0.0f64; 2]; n];
    w[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    for i in 1..n {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    w[i][k] = c1 * (k as f64 * w[i - 1][k - 1] - c5 * w[i - 1][k]) / c2;
                }
                w[i][0] = -c1 * c5 * w[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                w[j][k] = (c4 * w[j][k] - k as f64 * w[j][k - 1]) / c3;
            }
            w[j][0] = c4 * w[j][0] / c3;
        }
        c1 = c2;
    }
    w.into_iter().map(|r| r[1]).collect()
}

/// Derivative of samples on a non-uniform grid: centred stencils inside,
/// one-sided near the ends.
fn derivative_samples(t: &[f64], f: &[f64]) -> Vec<f64> {
    let n = t.len();
    let width = STENCIL.min(n);
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(width / 2).min(n - width);
            let nodes = &t[start..start + width];
            first_derivative_weights(t[i], nodes)
                .iter()
                .zip(&f[start..start + width])
                .map(|(w, v)| w * v)
                .sum()
        })
        .collect()
}

/// Residual of the energy identity along sampled records, with the time
/// derivative of `||g||_{H3}^2 / 2` taken by finite differences.
pub fn ledger_consistency(records: &[DiagnosticsRecord], mu: f64) -> Result<LedgerReport> {
    if records.len() < 3 {
        return Err(SqgError::InvalidParams(
            "ledger check needs at least three samples".into(),
        ));
    }
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let mut max_interval = 0.0f64;
    for w in t.windows(2) {
        let h = w[1] - w[0];
        if !(h > 0.0) {
            return Err(SqgError::InvalidParams(format!(
                "sample times not increasing at t = {}",
                w[0]
            )));
        }
        max_interval = max_interval.max(h);
    }
    if max_interval > MAX_SAMPLING_INTERVAL * (1.0 + 1e-9) {
        return Err(SqgError::InsufficientSampling {
            interval: max_interval,
            limit: MAX_SAMPLING_INTERVAL,
        });
    }
    let energy: Vec<f64> = records.iter().map(|r| 0.5 * r.h3_g_sq).collect();
    let de = derivative_samples(&t, &energy);
    let mut scale = 0.0f64;
    let mut raw = Vec::with_capacity(records.len());
    for (r, d) in records.iter().zip(&de) {
        let diss = mu * r.lam_alpha_h3_g_sq;
        let l = &r.ledger;
        for x in [*d, diss, l.i1, l.i2, l.i3, l.i4, l.rhs_l2] {
            scale = scale.max(x.abs());
        }
        raw.push((d + diss - l.sum()).abs());
    }
    let relative: Vec<f64> = if scale == 0.0 {
        vec![0.0; raw.len()]
    } else {
        raw.iter().map(|r| r / scale).collect()
    };
    let max_relative = relative.iter().cloned().fold(0.0, f64::max);
    let mean_relative = relative.iter().sum::<f64>() / relative.len() as f64;
    Ok(LedgerReport {
        max_relative,
        mean_relative,
        scale,
        max_interval,
        relative,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremBoundReport {
    pub pass: bool,
    /// `(C + 1) eps`.
    pub bound: f64,
    /// `min_t (bound - ||g||_{H3}^2 - dissipation)`.
    pub worst_margin: f64,
    pub worst_t: f64,
    /// Running supremum of the checked quantity.
    pub running_sup: Vec<f64>,
}

/// Checks `||g(t)||_{H3}^2 + (mu/2) int_0^t ||Lambda^alpha g||_{H3}^2 <= (C+1) eps`
/// at every sample.
pub fn theorem_bound_check(records: &[DiagnosticsRecord], vp: &VerificationParams) -> TheoremBoundReport {
    let bound = (vp.c_universal + 1.0) * vp.epsilon;
    let mut worst_margin = f64::INFINITY;
    let mut worst_t = 0.0;
    let mut sup = f64::NEG_INFINITY;
    let mut running_sup = Vec::with_capacity(records.len());
    for r in records {
        let q = r.h3_g_sq + r.dissipation_integral;
        let margin = bound - q;
        if margin < worst_margin || margin.is_nan() {
            worst_margin = margin;
            worst_t = r.t;
        }
        sup = sup.max(q);
        running_sup.push(sup);
    }
    TheoremBoundReport {
        pass: worst_margin >= 0.0,
        bound,
        worst_margin,
        worst_t,
        running_sup,
    }
}
