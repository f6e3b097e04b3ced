//! Empirical constants of the commutator and interpolation inequalities.
//!
//! Products are formed on a grid padded by a factor of two, so for inputs
//! inside the retained block every product is resolved without aliasing.
//! Sup norms are maxima over the padded samples.

use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{ANNULUS_INNER, ANNULUS_OUTER};
use crate::error::{Result, SqgError};
use crate::field::{forward_real, SpectralField};
use crate::grid::Grid;
use crate::norms::{l2_norm, max_abs, sobolev_norm};
use crate::ops::derivative;
use crate::random::{random_field, Band};

/// Relative change of a ratio tolerated under amplitude rescaling.
pub const RESCALE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityTrial {
    pub seed: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

impl InequalityTrial {
    fn new(seed: u64, lhs: f64, rhs: f64, what: &'static str) -> Result<Self> {
        if !(rhs > 0.0) {
            return Err(SqgError::DegenerateTrial(what));
        }
        let ratio = lhs / rhs;
        if !ratio.is_finite() {
            return Err(SqgError::DegenerateTrial(what));
        }
        Ok(InequalityTrial {
            seed,
            lhs,
            rhs,
            ratio,
        })
    }
}

/// Multi-indices with `|beta| = order`.
fn multi_indices(order: u32) -> impl Iterator<Item = (u32, u32)> {
    (0..=order).map(move |b1| (b1, order - b1))
}

fn padded(f: &SpectralField) -> Result<SpectralField> {
    f.zero_padded(2)
}

/// Exact coefficients of the product of two padded fields.
fn product(a: &SpectralField, b: &SpectralField) -> SpectralField {
    let pa = a.to_physical();
    let pb = b.to_physical();
    let prod: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x * y).collect();
    forward_real(*a.grid(), &prod)
}

fn gradient_sup(f: &SpectralField) -> f64 {
    let d1 = derivative(f, (1, 0)).to_physical();
    let d2 = derivative(f, (0, 1)).to_physical();
    d1.iter()
        .zip(&d2)
        .fold(0.0f64, |m, (a, b)| m.max(a * a + b * b))
        .sqrt()
}

/// `sum_{|beta| <= m} ||D^beta(h f) - (D^beta h) f||_{L2}`.
pub fn kato_ponce_lhs(h: &SpectralField, f: &SpectralField, m: u32) -> Result<f64> {
    h.check_grid(f)?;
    let (hp, fp) = (padded(h)?, padded(f)?);
    let hf = product(&hp, &fp);
    let mut total = 0.0;
    for order in 1..=m {
        for beta in multi_indices(order) {
            let c = &derivative(&hf, beta) - &product(&derivative(&hp, beta), &fp);
            total += l2_norm(&c);
        }
    }
    Ok(total)
}

pub fn kato_ponce_trial(h: &SpectralField, f: &SpectralField, m: u32) -> Result<InequalityTrial> {
    trial_kato_ponce(0, h, f, m)
}

fn trial_kato_ponce(seed: u64, h: &SpectralField, f: &SpectralField, m: u32) -> Result<InequalityTrial> {
    if m == 0 {
        return Err(SqgError::InvalidParams("commutator order m must be >= 1".into()));
    }
    let lhs = kato_ponce_lhs(h, f, m)?;
    let (hp, fp) = (padded(h)?, padded(f)?);
    let rhs = sobolev_norm(h, m - 1, 0.0) * gradient_sup(&fp)
        + max_abs(&hp.to_physical()) * sobolev_norm(f, m, 0.0);
    InequalityTrial::new(seed, lhs, rhs, "Kato-Ponce right side vanishes")
}

/// `sum_{|beta| = m} ||D^beta(h f) - h D^beta f||_{L2}`.
pub fn leibniz_commutator_lhs(h: &SpectralField, f: &SpectralField, m: u32) -> Result<f64> {
    h.check_grid(f)?;
    let (hp, fp) = (padded(h)?, padded(f)?);
    let hf = product(&hp, &fp);
    Ok(multi_indices(m)
        .map(|beta| l2_norm(&(&derivative(&hf, beta) - &product(&hp, &derivative(&fp, beta)))))
        .sum())
}

pub fn leibniz_commutator_trial(h: &SpectralField, f: &SpectralField, m: u32) -> Result<InequalityTrial> {
    trial_leibniz(0, h, f, m)
}

fn trial_leibniz(seed: u64, h: &SpectralField, f: &SpectralField, m: u32) -> Result<InequalityTrial> {
    if m == 0 {
        return Err(SqgError::InvalidParams("commutator order m must be >= 1".into()));
    }
    let lhs = leibniz_commutator_lhs(h, f, m)?;
    let hp = padded(h)?;
    let top = multi_indices(m)
        .map(|beta| max_abs(&derivative(&hp, beta).to_physical()))
        .fold(0.0, f64::max);
    let rhs = (gradient_sup(&hp) + top) * sobolev_norm(f, m - 1, 0.0);
    InequalityTrial::new(seed, lhs, rhs, "Leibniz right side vanishes")
}

/// `||Lambda^s g||_{L2}`.
fn lambda_norm(g: &SpectralField, s: f64) -> f64 {
    sobolev_norm(g, 0, s)
}

/// Both interpolation trials: `||grad g||_inf` and
/// `(sum_{|beta| = 3} ||D^beta g||^2)^(1/2)` against their
/// `||Lambda^alpha g||`, `||Lambda^(alpha+3) g||` products.
pub fn gn_trial(g: &SpectralField, alpha: f64) -> Result<(InequalityTrial, InequalityTrial)> {
    trial_gn(0, g, alpha)
}

fn trial_gn(seed: u64, g: &SpectralField, alpha: f64) -> Result<(InequalityTrial, InequalityTrial)> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(SqgError::InvalidParams(format!(
            "interpolation exponent alpha = {alpha} outside [0, 1/2)"
        )));
    }
    if g.is_zero() {
        return Err(SqgError::ZeroField);
    }
    let low = lambda_norm(g, alpha);
    let high = lambda_norm(g, alpha + 3.0);
    let grad = InequalityTrial::new(
        seed,
        gradient_sup(&padded(g)?),
        low.powf((alpha + 1.0) / 3.0) * high.powf((2.0 - alpha) / 3.0),
        "interpolation right side vanishes",
    )?;
    let d3 = multi_indices(3)
        .map(|beta| l2_norm(&derivative(g, beta)).powi(2))
        .sum::<f64>()
        .sqrt();
    let dbeta = InequalityTrial::new(
        seed,
        d3,
        low.powf(alpha / 3.0) * high.powf(1.0 - alpha / 3.0),
        "interpolation right side vanishes",
    )?;
    Ok((grad, dbeta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialKind {
    KatoPonce,
    Leibniz,
    GnGrad,
    GnDbeta,
}

impl TrialKind {
    pub const ALL: [TrialKind; 4] = [
        TrialKind::KatoPonce,
        TrialKind::Leibniz,
        TrialKind::GnGrad,
        TrialKind::GnDbeta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrialKind::KatoPonce => "kato_ponce",
            TrialKind::Leibniz => "leibniz",
            TrialKind::GnGrad => "gn_grad",
            TrialKind::GnDbeta => "gn_dbeta",
        }
    }
}

impl FromStr for TrialKind {
    type Err = SqgError;

    fn from_str(s: &str) -> Result<Self> {
        TrialKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| {
            SqgError::InvalidParams(format!(
                "unknown trial kind `{s}` (expected kato_ponce, leibniz, gn_grad or gn_dbeta)"
            ))
        })
    }
}

/// Lab setup shared by all trial kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabConfig {
    pub grid: Grid,
    /// Commutator order for the Kato-Ponce and Leibniz kinds.
    pub m: u32,
    /// Amplitudes applied to `(h, f)` (or to `g`) in the rescaling check.
    pub rescale: (f64, f64),
}

impl LabConfig {
    /// `n = 128` on a box of side `16 pi`, `m = 3`.
    pub fn standard() -> Self {
        LabConfig {
            grid: Grid::new(128, 16.0 * std::f64::consts::PI).expect("valid lab grid"),
            m: 3,
            rescale: (3.7, 0.29),
        }
    }
}

/// One row of the lab output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabRow {
    pub trial_kind: TrialKind,
    pub seed: u64,
    pub m_or_alpha: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// `|ratio(rescaled) / ratio - 1|`.
    pub rescale_defect: f64,
}

fn trial_fields(cfg: &LabConfig, kind: TrialKind, seed: u64) -> (SpectralField, SpectralField) {
    let h_band = match kind {
        TrialKind::Leibniz => Band::Annulus(ANNULUS_INNER, ANNULUS_OUTER),
        _ => Band::Retained,
    };
    (
        random_field(cfg.grid, h_band, 2 * seed),
        random_field(cfg.grid, Band::Retained, 2 * seed + 1),
    )
}

fn evaluate(
    kind: TrialKind,
    seed: u64,
    param: f64,
    m: u32,
    h: &SpectralField,
    f: &SpectralField,
) -> Result<InequalityTrial> {
    match kind {
        TrialKind::KatoPonce => trial_kato_ponce(seed, h, f, m),
        TrialKind::Leibniz => trial_leibniz(seed, h, f, m),
        TrialKind::GnGrad => Ok(trial_gn(seed, f, param)?.0),
        TrialKind::GnDbeta => Ok(trial_gn(seed, f, param)?.1),
    }
}

/// Runs one trial of `kind` with its rescaling check. `param` is the
/// interpolation exponent for the GN kinds and ignored otherwise.
pub fn lab_trial(cfg: &LabConfig, kind: TrialKind, param: f64, seed: u64) -> Result<LabRow> {
    let (h, f) = trial_fields(cfg, kind, seed);
    let t = evaluate(kind, seed, param, cfg.m, &h, &f)?;
    let (a, b) = cfg.rescale;
    let s = evaluate(kind, seed, param, cfg.m, &h.scaled(a), &f.scaled(b))?;
    let m_or_alpha = match kind {
        TrialKind::KatoPonce | TrialKind::Leibniz => cfg.m as f64,
        TrialKind::GnGrad | TrialKind::GnDbeta => param,
    };
    Ok(LabRow {
        trial_kind: kind,
        seed,
        m_or_alpha,
        lhs: t.lhs,
        rhs: t.rhs,
        ratio: t.ratio,
        rescale_defect: (s.ratio / t.ratio - 1.0).abs(),
    })
}

/// Trials for every seed in `seeds`, in seed order.
pub fn run_lab(
    cfg: &LabConfig,
    kind: TrialKind,
    param: f64,
    seeds: impl IntoIterator<Item = u64>,
) -> Result<Vec<LabRow>> {
    seeds
        .into_iter()
        .map(|s| lab_trial(cfg, kind, param, s))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindSummary {
    pub trial_kind: TrialKind,
    pub m_or_alpha: f64,
    pub trials: usize,
    pub max: f64,
    pub mean: f64,
    pub stddev: f64,
    pub max_rescale_defect: f64,
    pub rescale_invariant: bool,
}

/// Per-kind (and per-parameter) statistics of the ratios.
pub fn summarize(rows: &[LabRow]) -> Vec<KindSummary> {
    let mut keys: Vec<(TrialKind, f64)> = Vec::new();
    for r in rows {
        if !keys.iter().any(|k| k.0 == r.trial_kind && k.1 == r.m_or_alpha) {
            keys.push((r.trial_kind, r.m_or_alpha));
        }
    }
    keys.into_iter()
        .map(|(kind, p)| {
            let sel: Vec<&LabRow> = rows
                .iter()
                .filter(|r| r.trial_kind == kind && r.m_or_alpha == p)
                .collect();
            let n = sel.len() as f64;
            let mean = sel.iter().map(|r| r.ratio).sum::<f64>() / n;
            let var = sel.iter().map(|r| (r.ratio - mean).powi(2)).sum::<f64>() / n;
            let max_rescale_defect = sel.iter().map(|r| r.rescale_defect).fold(0.0, f64::max);
            KindSummary {
                trial_kind: kind,
                m_or_alpha: p,
                trials: sel.len(),
                max: sel.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max),
                mean,
                stddev: var.sqrt(),
                max_rescale_defect,
                rescale_invariant: max_rescale_defect <= RESCALE_TOL,
            }
        })
        .collect()
}

pub const LAB_CSV_HEADER: [&str; 6] = ["trial_kind", "seed", "m_or_alpha", "lhs", "rhs", "ratio"];

pub fn write_lab_csv<W: Write>(w: W, rows: &[LabRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(LAB_CSV_HEADER)?;
    for r in rows {
        out.write_record([
            r.trial_kind.name().to_string(),
            r.seed.to_string(),
            r.m_or_alpha.to_string(),
            format!("{:e}", r.lhs),
            format!("{:e}", r.rhs),
            format!("{:e}", r.ratio),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(32, 4.0 * std::f64::consts::PI).unwrap()
    }

    #[test]
    fn constant_factors_give_zero_commutators() {
        let g = grid();
        let f = random_field(g, Band::Retained, 3);
        let c = SpectralField::from_fn(g, |_, _| 2.5);
        let t = kato_ponce_trial(&c, &f, 3).unwrap();
        let want: f64 = (1..=3)
            .flat_map(multi_indices)
            .map(|b| 2.5 * l2_norm(&derivative(&f, b)))
            .sum();
        assert!((t.lhs / want - 1.0).abs() < 1e-12, "{t:?} {want}");
        let t = kato_ponce_trial(&f, &c, 3).unwrap();
        assert!(t.lhs <= 1e-12 * t.rhs, "{t:?}");
        let scale: f64 = multi_indices(3).map(|b| 2.5 * l2_norm(&derivative(&f, b))).sum();
        assert!(leibniz_commutator_lhs(&c, &f, 3).unwrap() <= 1e-12 * scale);
        assert!(matches!(
            leibniz_commutator_trial(&c, &f, 3),
            Err(SqgError::DegenerateTrial(_))
        ));
        let z = SpectralField::zeros(g);
        assert!(matches!(
            kato_ponce_trial(&z, &z, 2),
            Err(SqgError::DegenerateTrial(_))
        ));
        assert!(matches!(
            leibniz_commutator_trial(&f, &z, 3),
            Err(SqgError::DegenerateTrial(_))
        ));
    }

    #[test]
    fn single_mode_interpolation() {
        let g = grid();
        let mut f = SpectralField::zeros(g);
        f.add_cosine(2, 0, 1.5).unwrap();
        let (grad, dbeta) = gn_trial(&f, 0.25).unwrap();
        let l = g.box_len();
        assert!((grad.ratio - 2f64.sqrt() / l).abs() < 1e-12);
        assert!((dbeta.ratio - 1.0).abs() < 1e-12);
        let mut f3 = SpectralField::zeros(g);
        f3.add_cosine(3, 4, 1.0).unwrap();
        let (grad, dbeta) = gn_trial(&f3, 0.4).unwrap();
        let l2 = l / 2f64.sqrt();
        let k = 2.5f64;
        let rhs = l2 * k.powf(0.4 * (1.4 / 3.0)) * k.powf(3.4 * (1.6 / 3.0));
        assert!((grad.ratio - k / rhs).abs() < 1e-12 * grad.ratio);
        let (k1, k2) = (1.5f64, 2.0f64);
        let d3 = (k1.powi(6) + k1.powi(4) * k2 * k2 + k1 * k1 * k2.powi(4) + k2.powi(6)).sqrt() * l2;
        let rhs = l2 * k.powf(0.4 * 0.4 / 3.0) * k.powf(3.4 * (1.0 - 0.4 / 3.0));
        assert!((dbeta.ratio - d3 / rhs).abs() < 1e-12 * dbeta.ratio);
        assert!(matches!(
            gn_trial(&SpectralField::zeros(g), 0.1),
            Err(SqgError::ZeroField)
        ));
        assert!(gn_trial(&f, 0.5).is_err());
    }

    #[test]
    fn lab_rows_are_reproducible_and_invariant() {
        let cfg = LabConfig {
            grid: grid(),
            ..LabConfig::standard()
        };
        for kind in TrialKind::ALL {
            let a = run_lab(&cfg, kind, 0.25, 0..3).unwrap();
            let b = run_lab(&cfg, kind, 0.25, 0..3).unwrap();
            assert_eq!(a, b);
            for r in &a {
                assert!(r.ratio.is_finite() && r.ratio > 0.0);
                assert!(r.rescale_defect <= RESCALE_TOL, "{r:?}");
            }
        }
        let s = summarize(&run_lab(&cfg, TrialKind::GnGrad, 0.1, 0..4).unwrap());
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].trials, 4);
        assert!(s[0].max >= s[0].mean);
    }

    #[test]
    fn kind_names_round_trip() {
        for k in TrialKind::ALL {
            assert_eq!(k.name().parse::<TrialKind>().unwrap(), k);
        }
        assert!("gn".parse::<TrialKind>().is_err());
    }
}
