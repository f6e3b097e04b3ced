//! Smallness condition of the large-data theorem and the lower bounds that
//! make the initial family large.
//!
//! Time integrals use the Fourier-`L1` majorant of the sup norm,
//! `||f||_{L_inf} <= sum_k |c_k|`, which is exact for `Theta` when its
//! coefficients are non-negative, and the exact sparse convolution for the
//! forcing `U . grad Theta`.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::data::{build_a0, build_g0, DataRecipe, VerificationParams};
use crate::error::Result;
use crate::field::{SpectralField, VectorField};
use crate::grid::Grid;
use crate::norms::{
    l2_norm, l2_norm_sq, multi_index_weight, sobolev_norm_sq, sup_norm_refined, PointEvaluator,
};
use crate::ops::{derivative, velocity_with_exponent};
use crate::quadrature::adaptive_simpson;

#[derive(Debug, Clone, Copy)]
struct SparseMode {
    j: (i64, i64),
    k: (f64, f64),
    c: Complex64,
    rate: f64,
    /// `|k|^(2 s)` for the velocity exponent `s`.
    vel: f64,
}

/// Background restricted to its (sparse) spectral support.
#[derive(Debug, Clone)]
pub struct SparseBackground {
    modes: Vec<SparseMode>,
    area: f64,
    min_rate: f64,
}

impl SparseBackground {
    pub fn new(theta0: &SpectralField, mu: f64, alpha: f64, velocity_exponent: f64) -> Self {
        let g = theta0.grid();
        let modes: Vec<SparseMode> = theta0
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.re != 0.0 || c.im != 0.0)
            .map(|(idx, &c)| {
                let k = g.wavevector(idx);
                let (j1, j2) = g.lattice(idx);
                let r2 = k.0 * k.0 + k.1 * k.1;
                SparseMode {
                    j: (j1 as i64, j2 as i64),
                    k,
                    c,
                    rate: mu * r2.powf(alpha),
                    vel: r2.powf(velocity_exponent),
                }
            })
            .collect();
        let min_rate = modes.iter().map(|m| m.rate).fold(f64::INFINITY, f64::min);
        SparseBackground {
            modes,
            area: g.area(),
            min_rate,
        }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Majorant of `||Theta(t)||_{L_inf}`.
    pub fn theta_sup_bound(&self, t: f64) -> f64 {
        self.modes.iter().map(|m| m.c.norm() * (-m.rate * t).exp()).sum()
    }

    /// Majorant of `||U(t)||_{L_inf}` (Euclidean norm of `U`).
    pub fn velocity_sup_bound(&self, t: f64) -> f64 {
        self.modes
            .iter()
            .map(|m| {
                let kk = m.k.0.hypot(m.k.1);
                kk * m.vel * m.c.norm() * (-m.rate * t).exp()
            })
            .sum()
    }

    /// `||U||_{L_inf} + ||Theta||_{L_inf}` majorant.
    pub fn linf_integrand(&self, t: f64) -> f64 {
        self.theta_sup_bound(t) + self.velocity_sup_bound(t)
    }

    pub fn min_rate(&self) -> f64 {
        self.min_rate
    }
}

/// `U . grad Theta` as an exact sum over pairs of background modes.
///
/// The ordered pairs `(a, b)` and `(b, a)` land on the same output and are
/// merged, giving the coefficient `cross(a, b) (|a|^(2s) - |b|^(2s)) c_a c_b`.
#[derive(Debug, Clone)]
pub struct ForcingPairs {
    rates: Vec<f64>,
    pairs: Vec<(u32, u32, u32, Complex64)>,
    out_weight: Vec<f64>,
    area: f64,
}

impl ForcingPairs {
    pub fn new(bg: &SparseBackground) -> Self {
        let mut index: HashMap<(i64, i64), u32> = HashMap::new();
        let mut out_weight = Vec::new();
        let mut pairs = Vec::new();
        let m = &bg.modes;
        for a in 0..m.len() {
            for b in (a + 1)..m.len() {
                let (ka, kb) = (m[a].k, m[b].k);
                let cross = ka.0 * kb.1 - ka.1 * kb.0;
                let dv = m[a].vel - m[b].vel;
                if cross == 0.0 || dv == 0.0 {
                    continue;
                }
                let q = (ka.0 + kb.0, ka.1 + kb.1);
                let j = (m[a].j.0 + m[b].j.0, m[a].j.1 + m[b].j.1);
                let slot = *index.entry(j).or_insert_with(|| {
                    out_weight.push(multi_index_weight(q.0, q.1, 0, 3));
                    (out_weight.len() - 1) as u32
                });
                pairs.push((a as u32, b as u32, slot, m[a].c * m[b].c * (cross * dv)));
            }
        }
        pairs.sort_by_key(|p| p.2);
        ForcingPairs {
            rates: m.iter().map(|x| x.rate).collect(),
            pairs,
            out_weight,
            area: bg.area,
        }
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    fn accumulate(&self, t: f64, absolute: bool) -> f64 {
        if self.pairs.is_empty() {
            return 0.0;
        }
        let decay: Vec<f64> = self.rates.iter().map(|r| (-r * t).exp()).collect();
        let mut total = 0.0;
        let mut current = self.pairs[0].2;
        let mut acc = Complex64::new(0.0, 0.0);
        let mut acc_abs = 0.0;
        for &(a, b, q, coef) in &self.pairs {
            if q != current {
                let w = self.out_weight[current as usize];
                total += w * if absolute {
                    acc_abs * acc_abs
                } else {
                    acc.norm_sqr()
                };
                acc = Complex64::new(0.0, 0.0);
                acc_abs = 0.0;
                current = q;
            }
            let d = decay[a as usize] * decay[b as usize];
            acc += coef * d;
            acc_abs += coef.norm() * d;
        }
        let w = self.out_weight[current as usize];
        total += w * if absolute {
            acc_abs * acc_abs
        } else {
            acc.norm_sqr()
        };
        // Conjugate output pairs appear once each; the Fourier series of a
        // real field counts both, so no extra factor is needed.
        (self.area * total).sqrt()
    }

    /// `||U(t) . grad Theta(t)||_{H^3}`.
    pub fn h3_norm(&self, t: f64) -> f64 {
        self.accumulate(t, false)
    }

    /// Majorant of `h3_norm` decaying at least like `exp(-2 min_rate t)`.
    pub fn h3_majorant(&self, t: f64) -> f64 {
        self.accumulate(t, true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionIntegrals {
    /// `int_0^inf ||U, Theta||_{L_inf} dt`.
    pub linf: f64,
    /// `int_0^inf ||U . grad Theta||_{H^3} dt`.
    pub forcing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub lhs: f64,
    pub eps: f64,
    pub integrals: ConditionIntegrals,
    pub pass: bool,
    pub g0_h3_sq: f64,
    pub c_universal: f64,
    pub t_horizon: f64,
    /// Analytic tail contributions beyond the horizon, included above.
    pub tails: ConditionIntegrals,
    pub evaluations: usize,
}

/// Left-hand side of the smallness condition
/// `(||g0||_{H3}^2 + F) exp(C (L + F)) <= eps` with
/// `L = int ||U, Theta||_{L_inf}` and `F = int ||U . grad Theta||_{H3}`.
pub fn evaluate_condition(
    recipe: &DataRecipe,
    grid: &Grid,
    vp: &VerificationParams,
) -> Result<ConditionReport> {
    vp.validate()?;
    let theta0 = build_a0(recipe, grid)?;
    let g0 = build_g0(recipe, grid)?;
    let g0_h3_sq = sobolev_norm_sq(&g0, 3, 0.0);
    let bg = SparseBackground::new(&theta0, recipe.mu, recipe.alpha, recipe.velocity_exponent);
    let horizon = vp.horizon(recipe.mu, recipe.alpha);
    let (integrals, tails, evaluations) = if bg.is_empty() {
        let z = ConditionIntegrals {
            linf: 0.0,
            forcing: 0.0,
        };
        (z, z, 0)
    } else {
        let lambda = recipe.background_decay_rate(&theta0).min(bg.min_rate());
        let ql = adaptive_simpson(|t| Ok(bg.linf_integrand(t)), 0.0, horizon, vp.quad_tol)?;
        let pairs = ForcingPairs::new(&bg);
        let qf = adaptive_simpson(|t| Ok(pairs.h3_norm(t)), 0.0, horizon, vp.quad_tol)?;
        let tails = ConditionIntegrals {
            linf: bg.linf_integrand(horizon) / lambda,
            forcing: pairs.h3_majorant(horizon) / (2.0 * lambda),
        };
        (
            ConditionIntegrals {
                linf: ql.value + tails.linf,
                forcing: qf.value + tails.forcing,
            },
            tails,
            ql.evaluations + qf.evaluations,
        )
    };
    let lhs = (g0_h3_sq + integrals.forcing) * (vp.c_universal * (integrals.linf + integrals.forcing)).exp();
    Ok(ConditionReport {
        lhs,
        eps: vp.epsilon,
        integrals,
        pass: lhs <= vp.epsilon,
        g0_h3_sq,
        c_universal: vp.c_universal,
        t_horizon: horizon,
        tails,
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub computed: f64,
    pub required: f64,
    pub pass: bool,
}

impl BoundCheck {
    fn new(name: &str, computed: f64, required: f64) -> Self {
        BoundCheck {
            name: name.to_string(),
            computed,
            required,
            pass: computed >= required,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub delta: f64,
    pub amplitude: f64,
    pub log_log: f64,
    pub strip_resolved: bool,
    /// `pi ((3/2)^2 - (4/3)^2) (delta/3) * amplitude`, the area heuristic for
    /// `||a0_hat||_{L1}`.
    pub strip_area_heuristic: f64,
    pub bounds: Vec<BoundCheck>,
    pub all_pass: bool,
}

impl BoundsReport {
    pub fn get(&self, name: &str) -> Option<&BoundCheck> {
        self.bounds.iter().find(|b| b.name == name)
    }
}

/// Names of the four lower bounds on `a_0` (norms of `a0_hat` and of `a_0`).
pub const A0_BOUNDS: [&str; 4] = ["l1_hat_a0", "l2_hat_a0", "linf_a0_near_origin", "linf_d2_a0"];

/// `max |u|` (Euclidean) over the grid refined near the best sample.
fn vector_sup_refined(u: &VectorField) -> f64 {
    let (p1, p2) = u.to_physical();
    let (arg, coarse) = p1
        .iter()
        .zip(&p2)
        .enumerate()
        .fold((0usize, 0.0f64), |(ai, am), (i, (a, b))| {
            let v = a.hypot(*b);
            if v > am {
                (i, v)
            } else {
                (ai, am)
            }
        });
    if coarse == 0.0 {
        return 0.0;
    }
    let e1 = PointEvaluator::new(&u.u1);
    let e2 = PointEvaluator::new(&u.u2);
    let g = u.grid();
    let c = g.point(arg);
    let h = g.dx() / 8.0;
    let mut best = coarse;
    for a in -8..=8 {
        for b in -8..=8 {
            let x = (c.0 + a as f64 * h, c.1 + b as f64 * h);
            best = best.max(e1.eval(x.0, x.1).hypot(e2.eval(x.0, x.1)));
        }
    }
    best
}

/// Lower bounds making the initial data large, each reported as
/// `(computed, required, pass)`.
pub fn corollary_bounds(recipe: &DataRecipe, grid: &Grid) -> Result<BoundsReport> {
    let a0 = build_a0(recipe, grid)?;
    let delta = recipe.delta;
    let ll = (1.0 / delta).ln().ln();
    let sq = delta.powf(-0.5);
    let coeff_l1: f64 = a0.coeffs().iter().map(|c| c.norm()).sum();
    // sum |a_hat| dk^2 with a_hat = area * c and dk^2 = (2 pi)^2 / area.
    let l1_hat = (2.0 * PI).powi(2) * coeff_l1;
    let l2_hat = 2.0 * PI * grid.box_len() * (l2_norm_sq(&a0) / grid.area()).sqrt();

    let eval = PointEvaluator::new(&a0);
    let mut near = eval.eval(0.0, 0.0).abs();
    for &r in &[1.0 / 400.0, 1.0 / 200.0] {
        for s in 0..16 {
            let th = 2.0 * PI * s as f64 / 16.0;
            near = near.max(eval.eval(r * th.cos(), r * th.sin()).abs());
        }
    }
    let d2 = sup_norm_refined(&derivative(&a0, (0, 1)));
    let u0 = velocity_with_exponent(&a0, recipe.velocity_exponent)?;
    let u_sup = vector_sup_refined(&u0);
    let u_l2 = (l2_norm_sq(&u0.u1) + l2_norm_sq(&u0.u2)).sqrt();
    let th_sup = sup_norm_refined(&a0);
    let th_l2 = l2_norm(&a0);

    let bounds = vec![
        BoundCheck::new("l1_hat_a0", l1_hat, ll / 100.0),
        BoundCheck::new("l2_hat_a0", l2_hat, sq * ll / 100.0),
        BoundCheck::new("linf_a0_near_origin", near, ll / 5000.0),
        BoundCheck::new("linf_d2_a0", d2, ll / 5000.0),
        BoundCheck::new("linf_u0", u_sup, ll / 5000.0),
        BoundCheck::new("l2_u0", u_l2, sq * ll / 100.0),
        BoundCheck::new("linf_theta0", th_sup, ll / 5000.0),
        BoundCheck::new("l2_theta0", th_l2, sq * ll / 100.0),
    ];
    let all_pass = bounds.iter().all(|b| b.pass);
    let amplitude = recipe.amplitude_value();
    Ok(BoundsReport {
        delta,
        amplitude,
        log_log: ll,
        strip_resolved: recipe.strip_resolved(grid),
        strip_area_heuristic: PI * (2.25 - 16.0 / 9.0) * delta / 3.0 * amplitude,
        bounds,
        all_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CosineMode;

    #[test]
    fn single_mode_condition_is_zero_forcing() {
        let grid = Grid::with_spacing(64, 0.125).unwrap();
        let recipe = DataRecipe::with_modes(
            1.0,
            0.25,
            vec![CosineMode {
                j1: 8,
                j2: 8,
                amplitude: 0.3,
            }],
        );
        let r = evaluate_condition(&recipe, &grid, &VerificationParams::default()).unwrap();
        assert_eq!(r.integrals.forcing, 0.0);
        assert_eq!(r.lhs, 0.0);
        assert!(r.pass);
        assert!(r.integrals.linf > 0.0);
    }

    #[test]
    fn empty_background() {
        let grid = Grid::unit(16).unwrap();
        let mut recipe = DataRecipe::corollary(0.05, 1.0, 0.25);
        recipe.background = crate::data::BackgroundProfile::Zero;
        let r = evaluate_condition(&recipe, &grid, &VerificationParams::default()).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn linf_integral_matches_closed_form() {
        // Each mode contributes |c| (1 + |k|^(1+2s)) / rate.
        let grid = Grid::with_spacing(64, 0.125).unwrap();
        let recipe = DataRecipe::with_modes(
            0.7,
            0.3,
            vec![
                CosineMode {
                    j1: 8,
                    j2: 8,
                    amplitude: 0.3,
                },
                CosineMode {
                    j1: 11,
                    j2: 0,
                    amplitude: -0.2,
                },
            ],
        );
        let r = evaluate_condition(&recipe, &grid, &VerificationParams::default()).unwrap();
        let mut want = 0.0;
        for (j1, j2, a) in [(8.0, 8.0, 0.3f64), (11.0, 0.0, -0.2)] {
            let k: f64 = 0.125 * f64::hypot(j1, j2);
            let rate = 0.7 * k.powf(0.6);
            want += 2.0 * (0.5 * a.abs()) * 2.0 / rate;
        }
        assert!(
            (r.integrals.linf / want - 1.0).abs() < 1e-7,
            "{} vs {want}",
            r.integrals.linf
        );
    }
}
