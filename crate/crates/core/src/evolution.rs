//! Time integration of the full equation for `theta` and of the perturbation
//! equation for `g = theta - Theta` around the analytic background.
//!
//! The dissipation `-mu |k|^(2 alpha)` is integrated exactly by exponential
//! time differencing (ETDRK4, Cox and Matthews) or by Crank-Nicolson with
//! second-order Adams-Bashforth for the transport terms. Transport products
//! are pseudo-spectral with 2/3-rule dealiasing. The forcing `-U.grad Theta`
//! is evaluated at every stage time.

use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::data::{build_family, Background, BackgroundSnapshot, DataRecipe};
use crate::diagnostics::{background_norms, ActiveTerms, DiagnosticsRecord, LedgerContext};
use crate::error::{Result, SqgError};
use crate::field::{forward_real, inverse_pair, SpectralField};
use crate::grid::Grid;
use crate::norms::{l2_norm_sq, max_abs, tail_fraction};
use crate::ops::{dealias_in_place, derivative, velocity_with_exponent, DEFAULT_VELOCITY_EXPONENT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Etdrk4,
    ImexCnab2,
}

impl FromStr for Scheme {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "etdrk4" => Ok(Scheme::Etdrk4),
            "imex_cnab2" => Ok(Scheme::ImexCnab2),
            _ => Err(format!("unknown scheme `{s}` (expected etdrk4 or imex_cnab2)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    FullTheta,
    PerturbationG,
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full_theta" => Ok(Mode::FullTheta),
            "perturbation_g" => Ok(Mode::PerturbationG),
            _ => Err(format!(
                "unknown mode `{s}` (expected full_theta or perturbation_g)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub mu: f64,
    pub alpha: f64,
    pub dt_max: f64,
    pub cfl: f64,
    pub scheme: Scheme,
    pub t_end: f64,
    /// Diagnostics cadence in steps.
    pub sample_every: u64,
    pub mode: Mode,
    /// Run the full and the perturbation formulations side by side.
    pub paired: bool,
    /// Transport terms on (off gives the pure linear problem).
    pub nonlinear: bool,
    /// Background forcing on (perturbation formulation only).
    pub forcing: bool,
    pub tail_limit: f64,
    pub tail_patience: u32,
    pub blowup_factor: f64,
}

impl SimParams {
    pub fn new(mu: f64, alpha: f64) -> Self {
        SimParams {
            mu,
            alpha,
            dt_max: 0.01,
            cfl: 0.5,
            scheme: Scheme::Etdrk4,
            t_end: 1.0,
            sample_every: 1,
            mode: Mode::PerturbationG,
            paired: false,
            nonlinear: true,
            forcing: true,
            tail_limit: 1e-6,
            tail_patience: 100,
            blowup_factor: 1e8,
        }
    }

    pub fn for_recipe(recipe: &DataRecipe) -> Self {
        SimParams::new(recipe.mu, recipe.alpha)
    }

    /// `mu = 0` is accepted for inviscid control runs.
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|(_, msg)| SqgError::InvalidParams(msg))
    }

    /// Like [`SimParams::validate`], naming the offending field.
    pub fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(("mu", format!("mu = {} must be non-negative", self.mu)));
        }
        if !(self.alpha >= 0.0 && self.alpha < 1.0) {
            return Err(("alpha", format!("alpha = {} outside [0, 1)", self.alpha)));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(("dt_max", format!("dt_max = {} must be positive", self.dt_max)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(("cfl", format!("cfl = {} outside (0, 1]", self.cfl)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(("t_end", format!("t_end = {} must be non-negative", self.t_end)));
        }
        if self.sample_every == 0 {
            return Err(("sample_every", "sample_every must be at least 1".into()));
        }
        if !(self.tail_limit > 0.0) {
            return Err((
                "tail_limit",
                format!("tail_limit = {} must be positive", self.tail_limit),
            ));
        }
        if self.tail_patience == 0 {
            return Err(("tail_patience", "tail_patience must be at least 1".into()));
        }
        if !(self.blowup_factor > 1.0) {
            return Err((
                "blowup_factor",
                format!("blowup_factor = {} must exceed 1", self.blowup_factor),
            ));
        }
        Ok(())
    }

    fn active(&self, mode: Mode) -> ActiveTerms {
        ActiveTerms {
            transport: self.nonlinear,
            forcing: self.forcing || mode == Mode::FullTheta,
        }
    }
}

/// State of one formulation.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub step: u64,
    pub mode: Mode,
    /// `theta_hat` or `g_hat`.
    pub field: SpectralField,
    pub dissipation_integral: f64,
    pub h3_integral: f64,
    lam_h3: f64,
    h3: f64,
    tail_streak: u32,
    /// Previous right-hand side and step for the multistep scheme.
    history: Option<(SpectralField, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StateMeta {
    t: f64,
    step: u64,
    mode: Mode,
    dissipation_integral: f64,
    h3_integral: f64,
    lam_h3: f64,
    h3: f64,
    tail_streak: u32,
    history_dt: Option<f64>,
}

impl SimState {
    fn meta(&self) -> StateMeta {
        StateMeta {
            t: self.t,
            step: self.step,
            mode: self.mode,
            dissipation_integral: self.dissipation_integral,
            h3_integral: self.h3_integral,
            lam_h3: self.lam_h3,
            h3: self.h3,
            tail_streak: self.tail_streak,
            history_dt: self.history.as_ref().map(|h| h.1),
        }
    }
}

/// `phi_1, phi_2, phi_3` at real `z <= 0`.
fn phi123(z: f64) -> (f64, f64, f64) {
    if z.abs() < 1.0 {
        // phi_k(z) = sum_j z^j / (j + k)!
        let series = |k: u32, first: f64| {
            let mut term = first;
            let mut sum = 0.0;
            for j in 0..24 {
                sum += term;
                term *= z / (j + k + 1) as f64;
            }
            sum
        };
        (series(1, 1.0), series(2, 0.5), series(3, 1.0 / 6.0))
    } else {
        let e = z.exp();
        let p1 = (e - 1.0) / z;
        let p2 = (p1 - 1.0) / z;
        let p3 = (p2 - 0.5) / z;
        (p1, p2, p3)
    }
}

struct EtdCoefficients {
    e: Vec<f64>,
    e2: Vec<f64>,
    q: Vec<f64>,
    a1: Vec<f64>,
    a2: Vec<f64>,
    a3: Vec<f64>,
}

impl EtdCoefficients {
    fn new(rates: &[f64], h: f64) -> Self {
        let n = rates.len();
        let mut c = EtdCoefficients {
            e: Vec::with_capacity(n),
            e2: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            a1: Vec::with_capacity(n),
            a2: Vec::with_capacity(n),
            a3: Vec::with_capacity(n),
        };
        for &r in rates {
            let z = -r * h;
            let (p1, p2, p3) = phi123(z);
            let (h1, _, _) = phi123(0.5 * z);
            c.e.push(z.exp());
            c.e2.push((0.5 * z).exp());
            c.q.push(0.5 * h * h1);
            c.a1.push(h * (p1 - 3.0 * p2 + 4.0 * p3));
            c.a2.push(h * (p2 - 2.0 * p3));
            c.a3.push(h * (-p2 + 4.0 * p3));
        }
        c
    }
}

fn finish_product(grid: Grid, mut prod: Vec<f64>) -> SpectralField {
    prod.iter_mut().for_each(|p| *p = -*p);
    let mut out = forward_real(grid, &prod);
    dealias_in_place(&mut out);
    out.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
    out
}

fn speed(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max(x * x + y * y))
        .sqrt()
}

/// `-u.grad theta` (dealiased) and `max |u|` with `u` built from `theta`
/// using the velocity exponent `s`.
pub fn nonlinear_full_with(th: &SpectralField, s: f64) -> Result<(SpectralField, f64)> {
    let grid = *th.grid();
    let u = velocity_with_exponent(th, s)?;
    let (u1, u2) = u.to_physical();
    let (d1, d2) = inverse_pair(&derivative(th, (1, 0)), &derivative(th, (0, 1)));
    let prod: Vec<f64> = (0..grid.len()).map(|i| u1[i] * d1[i] + u2[i] * d2[i]).collect();
    Ok((finish_product(grid, prod), speed(&u1, &u2)))
}

/// `N(theta) = -u.grad theta` with the default velocity law.
pub fn nonlinear_full(th: &SpectralField) -> Result<SpectralField> {
    Ok(nonlinear_full_with(th, DEFAULT_VELOCITY_EXPONENT)?.0)
}

/// `-(v.grad g + U.grad g + v.grad Theta)` (forcing excluded) and
/// `max |v + U|`.
pub fn nonlinear_perturbation_with(
    g: &SpectralField,
    bg: &BackgroundSnapshot,
    s: f64,
) -> Result<(SpectralField, f64)> {
    let grid = *g.grid();
    g.check_grid(&bg.theta)?;
    let v = velocity_with_exponent(g, s)?;
    let (v1, v2) = v.to_physical();
    let (g1, g2) = inverse_pair(&derivative(g, (1, 0)), &derivative(g, (0, 1)));
    let mut w1 = Vec::with_capacity(grid.len());
    let mut w2 = Vec::with_capacity(grid.len());
    let prod: Vec<f64> = (0..grid.len())
        .map(|i| {
            let (a, b) = (v1[i] + bg.u1[i], v2[i] + bg.u2[i]);
            w1.push(a);
            w2.push(b);
            a * g1[i] + b * g2[i] + v1[i] * bg.d1[i] + v2[i] * bg.d2[i]
        })
        .collect();
    Ok((finish_product(grid, prod), speed(&w1, &w2)))
}

/// Perturbation nonlinearity at time `t` for the background of `recipe`.
pub fn nonlinear_perturbation(g: &SpectralField, recipe: &DataRecipe, t: f64) -> Result<SpectralField> {
    let bg = Background::from_recipe(recipe, g.grid())?;
    let snap = bg.snapshot(t)?;
    Ok(nonlinear_perturbation_with(g, &snap, recipe.velocity_exponent)?.0)
}

struct CachedSnapshot {
    t: f64,
    snap: Arc<BackgroundSnapshot>,
    forcing: Arc<SpectralField>,
}

/// Right-hand sides and time stepping for one grid, background and
/// parameter set.
pub struct Stepper {
    grid: Grid,
    params: SimParams,
    background: Background,
    rates: Vec<f64>,
    etd: Option<(f64, EtdCoefficients)>,
    snaps: Vec<CachedSnapshot>,
    ctx: LedgerContext,
}

const SNAPSHOT_CACHE: usize = 4;

impl Stepper {
    pub fn new(params: SimParams, background: Background) -> Result<Self> {
        params.validate()?;
        let grid = *background.grid();
        let rates = (0..grid.len())
            .map(|idx| {
                let (k1, k2) = grid.wavevector(idx);
                let r2 = k1 * k1 + k2 * k2;
                if r2 == 0.0 {
                    0.0
                } else {
                    params.mu * r2.powf(params.alpha)
                }
            })
            .collect();
        let ctx = LedgerContext::new(grid, params.alpha, background.velocity_exponent());
        Ok(Stepper {
            grid,
            params,
            background,
            rates,
            etd: None,
            snaps: Vec::new(),
            ctx,
        })
    }

    pub fn params(&self) -> &SimParams {
        &self.params
    }

    pub fn background(&self) -> &Background {
        &self.background
    }

    fn snapshot(&mut self, t: f64) -> Result<(Arc<BackgroundSnapshot>, Arc<SpectralField>)> {
        if let Some(c) = self.snaps.iter().find(|c| c.t.to_bits() == t.to_bits()) {
            return Ok((c.snap.clone(), c.forcing.clone()));
        }
        let snap = Arc::new(self.background.snapshot(t)?);
        let forcing = Arc::new(snap.forcing());
        if self.snaps.len() == SNAPSHOT_CACHE {
            self.snaps.remove(0);
        }
        self.snaps.push(CachedSnapshot {
            t,
            snap: snap.clone(),
            forcing: forcing.clone(),
        });
        Ok((snap, forcing))
    }

    /// Full right-hand side apart from the linear part, and the advecting
    /// speed used by the CFL rule.
    pub fn rhs(&mut self, mode: Mode, field: &SpectralField, t: f64) -> Result<(SpectralField, f64)> {
        let s = self.background.velocity_exponent();
        match mode {
            Mode::FullTheta => {
                if self.params.nonlinear {
                    nonlinear_full_with(field, s)
                } else {
                    Ok((SpectralField::zeros(self.grid), 0.0))
                }
            }
            Mode::PerturbationG => {
                if self.background.is_zero() {
                    return if self.params.nonlinear {
                        nonlinear_full_with(field, s)
                    } else {
                        Ok((SpectralField::zeros(self.grid), 0.0))
                    };
                }
                let (snap, forcing) = self.snapshot(t)?;
                let (mut out, umax) = if self.params.nonlinear {
                    nonlinear_perturbation_with(field, &snap, s)?
                } else {
                    (SpectralField::zeros(self.grid), 0.0)
                };
                if self.params.forcing {
                    out += &*forcing;
                }
                Ok((out, umax))
            }
        }
    }

    /// `min(dt_max, cfl dx / umax)`, clipped to land on `t_end`.
    pub fn choose_dt(&self, t: f64, umax: f64) -> f64 {
        let mut h = self.params.dt_max;
        if umax > 0.0 {
            h = h.min(self.params.cfl * self.grid.dx() / umax);
        }
        let remaining = self.params.t_end - t;
        if remaining <= h * (1.0 + 1e-9) {
            remaining
        } else {
            h
        }
    }

    fn coefficients(&mut self, h: f64) -> &EtdCoefficients {
        let stale = match &self.etd {
            Some((hh, _)) => hh.to_bits() != h.to_bits(),
            None => true,
        };
        if stale {
            self.etd = Some((h, EtdCoefficients::new(&self.rates, h)));
        }
        &self.etd.as_ref().expect("coefficients just built").1
    }

    /// Advances `u` from `t` by `h` given `n0 = rhs(u, t)`; returns the new
    /// field and the multistep history.
    fn advance(
        &mut self,
        mode: Mode,
        u: &SpectralField,
        t: f64,
        h: f64,
        n0: SpectralField,
        history: Option<&(SpectralField, f64)>,
    ) -> Result<(SpectralField, Option<(SpectralField, f64)>)> {
        let len = self.grid.len();
        match self.params.scheme {
            Scheme::Etdrk4 => {
                let th = t + 0.5 * h;
                let te = t + h;
                let uc = u.coeffs();
                let nu = n0.coeffs();
                let grid = self.grid;
                let c = self.coefficients(h);
                let a: Vec<Complex64> = (0..len).map(|i| uc[i] * c.e2[i] + nu[i] * c.q[i]).collect();
                let a = SpectralField::from_coeffs(grid, a)?;
                let (na, _) = self.rhs(mode, &a, th)?;
                let c = self.coefficients(h);
                let b: Vec<Complex64> = (0..len)
                    .map(|i| uc[i] * c.e2[i] + na.coeffs()[i] * c.q[i])
                    .collect();
                let b = SpectralField::from_coeffs(grid, b)?;
                let (nb, _) = self.rhs(mode, &b, th)?;
                let c = self.coefficients(h);
                let cc: Vec<Complex64> = (0..len)
                    .map(|i| a.coeffs()[i] * c.e2[i] + (nb.coeffs()[i] * 2.0 - nu[i]) * c.q[i])
                    .collect();
                let cc = SpectralField::from_coeffs(grid, cc)?;
                let (nc, _) = self.rhs(mode, &cc, te)?;
                let c = self.coefficients(h);
                let out: Vec<Complex64> = (0..len)
                    .map(|i| {
                        uc[i] * c.e[i]
                            + nu[i] * c.a1[i]
                            + (na.coeffs()[i] + nb.coeffs()[i]) * (2.0 * c.a2[i])
                            + nc.coeffs()[i] * c.a3[i]
                    })
                    .collect();
                let mut out = SpectralField::from_coeffs(grid, out)?;
                out.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
                Ok((out, None))
            }
            Scheme::ImexCnab2 => {
                let mut out = SpectralField::zeros(self.grid);
                let (w0, w1) = match history {
                    Some((_, hp)) => (1.0 + 0.5 * h / hp, -0.5 * h / hp),
                    None => (1.0, 0.0),
                };
                for i in 0..len {
                    let mut nstar = n0.coeffs()[i] * w0;
                    if let Some((prev, _)) = history {
                        nstar += prev.coeffs()[i] * w1;
                    }
                    let r = self.rates[i];
                    out.coeffs_mut()[i] =
                        (u.coeffs()[i] * (1.0 - 0.5 * h * r) + nstar * h) / (1.0 + 0.5 * h * r);
                }
                out.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
                Ok((out, Some((n0, h))))
            }
        }
    }

    /// Perturbation `g` carried by a state at its current time.
    fn perturbation_of(&mut self, state_mode: Mode, field: &SpectralField, t: f64) -> Result<SpectralField> {
        match state_mode {
            Mode::PerturbationG => Ok(field.clone()),
            Mode::FullTheta => {
                if self.background.is_zero() {
                    Ok(field.clone())
                } else {
                    let (snap, _) = self.snapshot(t)?;
                    Ok(field - &snap.theta)
                }
            }
        }
    }

    /// `theta` in physical space for the sup-norm health check.
    fn theta_sup(&mut self, mode: Mode, field: &SpectralField, t: f64) -> Result<f64> {
        match mode {
            Mode::FullTheta => Ok(max_abs(&field.to_physical())),
            Mode::PerturbationG => {
                if self.background.is_zero() {
                    Ok(max_abs(&field.to_physical()))
                } else {
                    let (snap, _) = self.snapshot(t)?;
                    Ok(max_abs(&(field + &snap.theta).to_physical()))
                }
            }
        }
    }

    fn record(&mut self, state: &SimState) -> Result<DiagnosticsRecord> {
        let g = self.perturbation_of(state.mode, &state.field, state.t)?;
        let snap = if self.background.is_zero() {
            None
        } else {
            Some(self.snapshot(state.t)?)
        };
        let active = self.params.active(state.mode);
        let ledger = self.ctx.ledger(&g, snap.as_ref().map(|s| &*s.0), active)?;
        let (linf_theta, linf_u_cap, h3_forcing) =
            background_norms(&self.ctx, snap.as_ref().map(|(s, f)| (&**s, &**f)));
        Ok(DiagnosticsRecord {
            t: state.t,
            step: state.step,
            l2_g_sq: l2_norm_sq(&g),
            h3_g_sq: state.h3,
            lam_alpha_h3_g_sq: state.lam_h3,
            dissipation_integral: state.dissipation_integral,
            h3_integral: state.h3_integral,
            linf_theta,
            linf_u_cap,
            h3_forcing,
            ledger,
            ledger_residual: None,
            tail_fraction: tail_fraction(&state.field),
            paired_discrepancy: None,
        })
    }

    fn h3_sq(&self, g: &SpectralField) -> f64 {
        self.ctx.h3_sq(g)
    }

    fn initial_state(&mut self, mode: Mode, field: SpectralField) -> Result<SimState> {
        let g = self.perturbation_of(mode, &field, 0.0)?;
        Ok(SimState {
            t: 0.0,
            step: 0,
            mode,
            h3: self.ctx.h3_sq(&g),
            lam_h3: self.ctx.lam_h3_sq(&g),
            field,
            dissipation_integral: 0.0,
            h3_integral: 0.0,
            tail_streak: 0,
            history: None,
        })
    }

    /// Moves `state` to `t + h` with the new field, updating the running
    /// integrals.
    fn commit(
        &mut self,
        state: &mut SimState,
        field: SpectralField,
        h: f64,
        t_new: f64,
        history: Option<(SpectralField, f64)>,
    ) -> Result<()> {
        let g = self.perturbation_of(state.mode, &field, t_new)?;
        let lam = self.ctx.lam_h3_sq(&g);
        let h3 = self.ctx.h3_sq(&g);
        let half_mu = 0.5 * self.params.mu;
        state.dissipation_integral += half_mu * 0.5 * h * (state.lam_h3 + lam);
        state.h3_integral += half_mu * 0.5 * h * (state.h3 + h3);
        state.lam_h3 = lam;
        state.h3 = h3;
        state.field = field;
        state.t = t_new;
        state.step += 1;
        state.history = history;
        Ok(())
    }
}

/// Why a run stopped early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlowupReason {
    NonFinite,
    SupNorm { value: f64, reference: f64 },
    TailHealth { fraction: f64, steps: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    /// Time of the last healthy state.
    pub t: f64,
    pub step: u64,
    pub reason: BlowupReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    Advanced,
    Finished,
    BlowUp,
}

/// Sampled output of a run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<DiagnosticsRecord>,
    pub final_state: SimState,
    /// Full-formulation state of a paired run.
    pub final_full: Option<SimState>,
    pub blowup: Option<BlowupReport>,
    pub mu: f64,
    pub alpha: f64,
}

impl Trajectory {
    /// `max_t ||(theta - Theta) - g||_{H3}` over the samples of a paired run.
    pub fn max_paired_discrepancy(&self) -> Option<f64> {
        self.records
            .iter()
            .filter_map(|r| r.paired_discrepancy)
            .fold(None, |m, d| Some(m.map_or(d, |x: f64| x.max(d))))
    }

    pub fn max_h3_g(&self) -> f64 {
        self.records.iter().map(|r| r.h3_g_sq.sqrt()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CheckpointMeta {
    primary: StateMeta,
    companion: Option<StateMeta>,
    sup_reference: f64,
    records: Vec<DiagnosticsRecord>,
}

/// A run in progress: the primary state, an optional full-formulation
/// companion stepped in lockstep, and the samples collected so far.
pub struct Simulation {
    stepper: Stepper,
    primary: SimState,
    companion: Option<SimState>,
    records: Vec<DiagnosticsRecord>,
    sup_reference: f64,
    blowup: Option<BlowupReport>,
}

fn require_matching(recipe: &DataRecipe, params: &SimParams) -> Result<()> {
    if recipe.mu != params.mu || recipe.alpha != params.alpha {
        return Err(SqgError::InvalidParams(format!(
            "simulation (mu, alpha) = ({}, {}) differs from the background's ({}, {})",
            params.mu, params.alpha, recipe.mu, recipe.alpha
        )));
    }
    Ok(())
}

impl Simulation {
    /// Builds the initial data of `recipe` and the states selected by
    /// `params`.
    pub fn new(recipe: &DataRecipe, grid: &Grid, params: SimParams) -> Result<Self> {
        let fam = build_family(recipe, grid)?;
        let background = Background::new(
            fam.theta0.clone(),
            recipe.mu,
            recipe.alpha,
            recipe.velocity_exponent,
        );
        if !background.is_zero() {
            require_matching(recipe, &params)?;
        }
        let theta0 = &fam.theta0 + &fam.g0;
        let (primary, companion) = if params.paired {
            (
                (Mode::PerturbationG, fam.g0.clone()),
                Some((Mode::FullTheta, theta0)),
            )
        } else {
            match params.mode {
                Mode::PerturbationG => ((Mode::PerturbationG, fam.g0.clone()), None),
                Mode::FullTheta => ((Mode::FullTheta, theta0), None),
            }
        };
        Simulation::from_fields(background, params, primary, companion)
    }

    /// Starts from explicit fields, e.g. an arbitrary `theta_0` with a zero
    /// background.
    pub fn from_fields(
        background: Background,
        params: SimParams,
        primary: (Mode, SpectralField),
        companion: Option<(Mode, SpectralField)>,
    ) -> Result<Self> {
        let mut stepper = Stepper::new(params, background)?;
        for f in std::iter::once(&primary.1).chain(companion.as_ref().map(|c| &c.1)) {
            stepper.background.theta0().check_grid(f)?;
            if f.has_non_finite() {
                return Err(SqgError::InvalidParams("initial field is not finite".into()));
            }
        }
        let mut primary_state = stepper.initial_state(primary.0, primary.1)?;
        primary_state.field.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
        let companion = match companion {
            Some((m, f)) => {
                let mut s = stepper.initial_state(m, f)?;
                s.field.coeffs_mut()[0] = Complex64::new(0.0, 0.0);
                Some(s)
            }
            None => None,
        };
        let sup_reference = stepper
            .theta_sup(primary_state.mode, &primary_state.field, 0.0)?
            .max(f64::MIN_POSITIVE);
        let mut sim = Simulation {
            stepper,
            primary: primary_state,
            companion,
            records: Vec::new(),
            sup_reference,
            blowup: None,
        };
        sim.sample()?;
        Ok(sim)
    }

    pub fn state(&self) -> &SimState {
        &self.primary
    }

    pub fn companion(&self) -> Option<&SimState> {
        self.companion.as_ref()
    }

    pub fn records(&self) -> &[DiagnosticsRecord] {
        &self.records
    }

    pub fn params(&self) -> &SimParams {
        self.stepper.params()
    }

    pub fn blowup(&self) -> Option<&BlowupReport> {
        self.blowup.as_ref()
    }

    fn sample(&mut self) -> Result<()> {
        let mut rec = self.stepper.record(&self.primary)?;
        if let Some(c) = &self.companion {
            let gc = self.stepper.perturbation_of(c.mode, &c.field, c.t)?;
            rec.paired_discrepancy = Some(self.stepper.h3_sq(&(&gc - &self.primary.field)).sqrt());
        }
        self.records.push(rec);
        Ok(())
    }

    fn check_health(
        &mut self,
        state: &mut SimState,
        field: &SpectralField,
        t_new: f64,
    ) -> Result<Option<BlowupReason>> {
        if field.has_non_finite() {
            return Ok(Some(BlowupReason::NonFinite));
        }
        let sup = self.stepper.theta_sup(state.mode, field, t_new)?;
        if !sup.is_finite() {
            return Ok(Some(BlowupReason::NonFinite));
        }
        if sup > self.stepper.params.blowup_factor * self.sup_reference {
            return Ok(Some(BlowupReason::SupNorm {
                value: sup,
                reference: self.sup_reference,
            }));
        }
        let tail = tail_fraction(field);
        if tail > self.stepper.params.tail_limit {
            state.tail_streak += 1;
            if state.tail_streak >= self.stepper.params.tail_patience {
                return Ok(Some(BlowupReason::TailHealth {
                    fraction: tail,
                    steps: state.tail_streak,
                }));
            }
        } else {
            state.tail_streak = 0;
        }
        Ok(None)
    }

    /// Takes one step (both formulations in a paired run share the step).
    pub fn step(&mut self) -> Result<StepStatus> {
        if self.blowup.is_some() {
            return Ok(StepStatus::BlowUp);
        }
        let t = self.primary.t;
        let t_end = self.stepper.params.t_end;
        if t >= t_end {
            return Ok(StepStatus::Finished);
        }
        let mode = self.primary.mode;
        let (n0, umax) = self.stepper.rhs(mode, &self.primary.field, t)?;
        let h = self.stepper.choose_dt(t, umax);
        let t_new = if h == t_end - t { t_end } else { t + h };
        let (field, hist) =
            self.stepper
                .advance(mode, &self.primary.field, t, h, n0, self.primary.history.as_ref())?;
        let companion_next = match &self.companion {
            Some(c) => {
                let (c0, _) = self.stepper.rhs(c.mode, &c.field, t)?;
                Some(
                    self.stepper
                        .advance(c.mode, &c.field, t, h, c0, c.history.as_ref())?,
                )
            }
            None => None,
        };
        let mut probe = self.primary.clone();
        if let Some(reason) = self.check_health(&mut probe, &field, t_new)? {
            self.blowup = Some(BlowupReport {
                t,
                step: self.primary.step,
                reason,
            });
            return Ok(StepStatus::BlowUp);
        }
        self.primary.tail_streak = probe.tail_streak;
        let mut primary = std::mem::replace(&mut self.primary, probe);
        self.stepper.commit(&mut primary, field, h, t_new, hist)?;
        self.primary = primary;
        if let (Some(c), Some((cf, ch))) = (self.companion.as_mut(), companion_next) {
            let mut cs = c.clone();
            self.stepper.commit(&mut cs, cf, h, t_new, ch)?;
            *c = cs;
        }
        let finished = self.primary.t >= t_end;
        if self.primary.step.is_multiple_of(self.stepper.params.sample_every) || finished {
            self.sample()?;
        }
        Ok(if finished {
            StepStatus::Finished
        } else {
            StepStatus::Advanced
        })
    }

    /// Steps until `t_end` or a blow-up, invoking `on_step` after every
    /// successful step.
    pub fn run_with(&mut self, mut on_step: impl FnMut(&Simulation) -> Result<()>) -> Result<()> {
        loop {
            match self.step()? {
                StepStatus::Advanced => on_step(self)?,
                StepStatus::Finished => {
                    on_step(self)?;
                    return Ok(());
                }
                StepStatus::BlowUp => return Ok(()),
            }
        }
    }

    pub fn finish(self) -> Trajectory {
        let params = self.stepper.params;
        Trajectory {
            records: self.records,
            final_state: self.primary,
            final_full: self.companion,
            blowup: self.blowup,
            mu: params.mu,
            alpha: params.alpha,
        }
    }

    pub fn run(mut self) -> Result<Trajectory> {
        self.run_with(|_| Ok(()))?;
        Ok(self.finish())
    }

    /// Writes `{stem}.sqgf` (primary field), `{stem}_full.sqgf` (companion),
    /// multistep history files and the `{stem}.json` sidecar.
    pub fn save_checkpoint(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        checkpoint::save(dir.join(format!("{stem}.sqgf")), &self.primary.field)?;
        if let Some((f, _)) = &self.primary.history {
            checkpoint::save(dir.join(format!("{stem}.prev.sqgf")), f)?;
        }
        if let Some(c) = &self.companion {
            checkpoint::save(dir.join(format!("{stem}_full.sqgf")), &c.field)?;
            if let Some((f, _)) = &c.history {
                checkpoint::save(dir.join(format!("{stem}_full.prev.sqgf")), f)?;
            }
        }
        let meta = CheckpointMeta {
            primary: self.primary.meta(),
            companion: self.companion.as_ref().map(|c| c.meta()),
            sup_reference: self.sup_reference,
            records: self.records.clone(),
        };
        fs::write(
            dir.join(format!("{stem}.json")),
            serde_json::to_vec_pretty(&meta)?,
        )?;
        Ok(())
    }

    /// Continues a run from a checkpoint written by [`save_checkpoint`].
    ///
    /// [`save_checkpoint`]: Simulation::save_checkpoint
    pub fn resume(
        recipe: &DataRecipe,
        grid: &Grid,
        params: SimParams,
        dir: &Path,
        stem: &str,
    ) -> Result<Self> {
        let background = Background::from_recipe(recipe, grid)?;
        if !background.is_zero() {
            require_matching(recipe, &params)?;
        }
        let meta: CheckpointMeta = serde_json::from_slice(&fs::read(dir.join(format!("{stem}.json")))?)?;
        let load_state = |m: &StateMeta, name: &str| -> Result<SimState> {
            let field = checkpoint::load(dir.join(format!("{name}.sqgf")))?;
            if field.grid() != grid {
                return Err(SqgError::Checkpoint(format!(
                    "checkpoint grid {:?} differs from the configured grid",
                    field.grid()
                )));
            }
            let history = match m.history_dt {
                Some(h) => Some((checkpoint::load(dir.join(format!("{name}.prev.sqgf")))?, h)),
                None => None,
            };
            Ok(SimState {
                t: m.t,
                step: m.step,
                mode: m.mode,
                field,
                dissipation_integral: m.dissipation_integral,
                h3_integral: m.h3_integral,
                lam_h3: m.lam_h3,
                h3: m.h3,
                tail_streak: m.tail_streak,
                history,
            })
        };
        let primary = load_state(&meta.primary, stem)?;
        let companion = match &meta.companion {
            Some(m) => Some(load_state(m, &format!("{stem}_full"))?),
            None => None,
        };
        if params.paired != companion.is_some() {
            return Err(SqgError::Checkpoint(
                "paired setting does not match the checkpoint".into(),
            ));
        }
        Ok(Simulation {
            stepper: Stepper::new(params, background)?,
            primary,
            companion,
            records: meta.records,
            sup_reference: meta.sup_reference,
            blowup: None,
        })
    }
}

/// Integrates the data of `recipe` to `params.t_end`.
pub fn run(recipe: &DataRecipe, grid: &Grid, params: SimParams) -> Result<Trajectory> {
    Simulation::new(recipe, grid, params)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CosineMode;
    use crate::random::{random_field, Band};

    #[test]
    fn phi_functions_agree_across_branches() {
        for &z in &[-0.999_999, -1.0, -1.000_001] {
            let (a1, a2, a3) = phi123(z);
            let e = f64::exp(z);
            let p1 = (e - 1.0) / z;
            let p2 = (p1 - 1.0) / z;
            let p3 = (p2 - 0.5) / z;
            assert!((a1 - p1).abs() < 1e-14 && (a2 - p2).abs() < 1e-14 && (a3 - p3).abs() < 1e-13);
        }
        assert_eq!(phi123(0.0), (1.0, 0.5, 1.0 / 6.0));
    }

    #[test]
    fn single_mode_full_nonlinearity_vanishes() {
        let grid = Grid::unit(16).unwrap();
        let mut th = SpectralField::zeros(grid);
        th.add_cosine(2, 1, 0.7).unwrap();
        let n = nonlinear_full(&th).unwrap();
        assert!(n.max_abs_coeff() < 1e-15);
    }

    #[test]
    fn linear_decay_is_exact() {
        let grid = Grid::unit(16).unwrap();
        let mut th = SpectralField::zeros(grid);
        th.add_cosine(1, 0, 1.0).unwrap();
        let bg = Background::new(SpectralField::zeros(grid), 1.0, 0.25, DEFAULT_VELOCITY_EXPONENT);
        let mut p = SimParams::new(1.0, 0.25);
        p.nonlinear = false;
        p.t_end = 2.0;
        p.dt_max = 0.1;
        p.mode = Mode::FullTheta;
        let tr = Simulation::from_fields(bg, p, (Mode::FullTheta, th), None)
            .unwrap()
            .run()
            .unwrap();
        let c = tr.final_state.field.coeff(1, 0).re;
        assert!((c / (0.5 * (-2.0f64).exp()) - 1.0).abs() < 1e-12);
        assert_eq!(tr.final_state.t, 2.0);
    }

    #[test]
    fn zero_perturbation_stays_zero_for_single_mode_background() {
        let grid = Grid::with_spacing(32, 0.125).unwrap();
        let recipe = DataRecipe::with_modes(
            1.0,
            0.25,
            vec![CosineMode {
                j1: 8,
                j2: 8,
                amplitude: 0.5,
            }],
        );
        let mut p = SimParams::for_recipe(&recipe);
        p.t_end = 0.5;
        p.dt_max = 0.05;
        let tr = run(&recipe, &grid, p).unwrap();
        assert!(tr.final_state.field.is_zero());
        assert!(tr.records.iter().all(|r| r.h3_g_sq == 0.0));
    }

    #[test]
    fn paired_routes_agree() {
        let grid = Grid::with_spacing(32, 0.25).unwrap();
        let recipe = DataRecipe::with_modes(
            1.0,
            0.25,
            vec![
                CosineMode {
                    j1: 4,
                    j2: 3,
                    amplitude: 0.4,
                },
                CosineMode {
                    j1: -2,
                    j2: 5,
                    amplitude: 0.3,
                },
            ],
        );
        let mut p = SimParams::for_recipe(&recipe);
        p.paired = true;
        p.t_end = 0.5;
        p.dt_max = 0.05;
        let tr = run(&recipe, &grid, p).unwrap();
        let d = tr.max_paired_discrepancy().unwrap();
        assert!(tr.max_h3_g() > 0.0);
        assert!(d <= 1e-10 * tr.max_h3_g(), "{d}");
    }

    #[test]
    fn cnab2_is_second_order() {
        let grid = Grid::unit(16).unwrap();
        let th = random_field(grid, Band::Disc(3.0), 5).scaled(0.3);
        let bg = Background::new(SpectralField::zeros(grid), 0.5, 0.3, DEFAULT_VELOCITY_EXPONENT);
        let go = |dt: f64, scheme: Scheme| {
            let mut p = SimParams::new(0.5, 0.3);
            p.mode = Mode::FullTheta;
            p.scheme = scheme;
            p.t_end = 0.4;
            p.dt_max = dt;
            p.cfl = 1.0;
            p.tail_limit = 1.0;
            Simulation::from_fields(bg.clone(), p, (Mode::FullTheta, th.clone()), None)
                .unwrap()
                .run()
                .unwrap()
                .final_state
                .field
        };
        let reference = go(0.0025, Scheme::Etdrk4);
        let e1 = crate::norms::l2_norm(&(&go(0.02, Scheme::ImexCnab2) - &reference));
        let e2 = crate::norms::l2_norm(&(&go(0.01, Scheme::ImexCnab2) - &reference));
        let order = (e1 / e2).log2();
        assert!(order > 1.7 && order < 2.5, "{order}");
    }
}
