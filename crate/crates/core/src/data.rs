//! Large-data initial family, the exactly solvable linear background and
//! the forcing it induces on the perturbation.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SqgError};
use crate::field::{forward_real, SpectralField, VectorField};
use crate::grid::Grid;
use crate::norms::sobolev_norm_sq;
use crate::ops::{
    dealias_in_place, gradient, transport_physical, velocity_with_exponent, DEFAULT_VELOCITY_EXPONENT,
};
use crate::random::{random_field, Band};

/// Inner radius of the spectral annulus carrying the background.
pub const ANNULUS_INNER: f64 = 4.0 / 3.0;
/// Outer radius of the spectral annulus carrying the background.
pub const ANNULUS_OUTER: f64 = 1.5;

/// `amplitude * cos(k . x)` with `k = (j1, j2) * dk`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineMode {
    pub j1: i32,
    pub j2: i32,
    pub amplitude: f64,
}

/// Shape of the initial background `Theta_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BackgroundProfile {
    /// `a_0 = amplitude * chi` with `chi_hat` concentrated on the strip
    /// `|k1 - k2| <= delta` inside the annulus.
    Corollary,
    /// Explicit superposition of cosine modes (controls and oracles).
    Modes(Vec<CosineMode>),
    Zero,
}

/// How the initial perturbation `g_0` is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PerturbationSeed {
    Zero,
    /// Random field on `|k| <= k_max` scaled to `||g_0||_{H^3}^2 = target_h3_sq`.
    RandomBand {
        target_h3_sq: f64,
        k_max: f64,
        seed: u64,
    },
    /// Explicit superposition of cosine modes.
    Modes(Vec<CosineMode>),
}

/// Parameters of one member of the initial-data family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRecipe {
    pub delta: f64,
    pub mu: f64,
    pub alpha: f64,
    /// Overrides the default amplitude `ln(ln(1/delta)) / delta`.
    pub amplitude: Option<f64>,
    pub background: BackgroundProfile,
    pub g0: PerturbationSeed,
    /// Exponent `s` of `u = grad_perp (-Laplacian)^s theta`.
    pub velocity_exponent: f64,
}

impl DataRecipe {
    pub fn corollary(delta: f64, mu: f64, alpha: f64) -> Self {
        DataRecipe {
            delta,
            mu,
            alpha,
            amplitude: None,
            background: BackgroundProfile::Corollary,
            g0: PerturbationSeed::Zero,
            velocity_exponent: DEFAULT_VELOCITY_EXPONENT,
        }
    }

    pub fn with_modes(mu: f64, alpha: f64, modes: Vec<CosineMode>) -> Self {
        DataRecipe {
            background: BackgroundProfile::Modes(modes),
            ..DataRecipe::corollary(0.05, mu, alpha)
        }
    }

    pub fn with_g0(mut self, g0: PerturbationSeed) -> Self {
        self.g0 = g0;
        self
    }

    pub fn amplitude_value(&self) -> f64 {
        self.amplitude
            .unwrap_or_else(|| (1.0 / self.delta).ln().ln() / self.delta)
    }

    /// Checks the hypotheses. With `theorem_mode` the dissipation exponent
    /// must lie in `[0, 1/2)`; otherwise `[0, 1)` is accepted.
    pub fn validate(&self, theorem_mode: bool) -> Result<()> {
        self.check(theorem_mode)
            .map_err(|(_, msg)| SqgError::InvalidRecipe(msg))
    }

    /// Like [`DataRecipe::validate`], naming the offending field.
    pub fn check(&self, theorem_mode: bool) -> std::result::Result<(), (&'static str, String)> {
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(("mu", format!("mu must be positive, got {}", self.mu)));
        }
        let alpha_max = if theorem_mode { 0.5 } else { 1.0 };
        if !(self.alpha >= 0.0 && self.alpha < alpha_max) {
            return Err((
                "alpha",
                if theorem_mode {
                    format!("alpha = {} violates the hypothesis 0 <= alpha < 1/2", self.alpha)
                } else {
                    format!("alpha = {} outside [0, 1)", self.alpha)
                },
            ));
        }
        if !(self.delta > 0.0 && self.delta <= 0.1) {
            return Err(("delta", format!("delta = {} outside (0, 1/10]", self.delta)));
        }
        if let Some(a) = self.amplitude {
            if !a.is_finite() {
                return Err(("amplitude", "amplitude must be finite".into()));
            }
        }
        if !self.velocity_exponent.is_finite() {
            return Err(("velocity_exponent", "velocity exponent must be finite".into()));
        }
        if let PerturbationSeed::RandomBand {
            target_h3_sq, k_max, ..
        } = self.g0
        {
            if !(target_h3_sq >= 0.0 && target_h3_sq.is_finite()) {
                return Err(("g0_h3_sq", "g0 target H3 norm must be non-negative".into()));
            }
            if !(k_max > 0.0) {
                return Err(("g0_k_max", "g0 band radius must be positive".into()));
            }
        }
        Ok(())
    }

    /// `dk <= delta / 6`: the inner strip `|k1 - k2| <= delta/3` is sampled
    /// by more than the diagonal.
    pub fn strip_resolved(&self, grid: &Grid) -> bool {
        grid.dk() <= self.delta / 6.0
    }

    /// Slowest background decay rate `mu * min(4/3, |k|_min)^(2 alpha)`.
    pub fn background_decay_rate(&self, theta0: &SpectralField) -> f64 {
        let g = theta0.grid();
        let kmin = theta0
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > 0.0)
            .map(|(i, _)| {
                let (k1, k2) = g.wavevector(i);
                k1.hypot(k2)
            })
            .fold(ANNULUS_INNER, f64::min);
        self.mu * kmin.powf(2.0 * self.alpha)
    }
}

/// Tolerances and stand-in constants for the smallness condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationParams {
    pub c_universal: f64,
    pub epsilon: f64,
    /// Quadrature horizon; `None` means `40 / (mu (4/3)^(2 alpha))`.
    pub t_horizon: Option<f64>,
    pub quad_tol: f64,
}

impl Default for VerificationParams {
    fn default() -> Self {
        VerificationParams {
            c_universal: 1.0,
            epsilon: 0.1,
            t_horizon: None,
            quad_tol: 1e-8,
        }
    }
}

impl VerificationParams {
    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|(_, msg)| SqgError::InvalidParams(msg))
    }

    /// Like [`VerificationParams::validate`], naming the offending field.
    pub fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        if !(self.c_universal >= 1.0) {
            return Err((
                "c_universal",
                format!("c_universal must be >= 1, got {}", self.c_universal),
            ));
        }
        if !(self.epsilon > 0.0) {
            return Err((
                "epsilon",
                format!("epsilon must be positive, got {}", self.epsilon),
            ));
        }
        if let Some(t) = self.t_horizon {
            if !(t > 0.0 && t.is_finite()) {
                return Err(("t_horizon", "t_horizon must be positive".into()));
            }
        }
        if !(self.quad_tol > 0.0) {
            return Err(("quad_tol", "quad_tol must be positive".into()));
        }
        Ok(())
    }

    pub fn horizon(&self, mu: f64, alpha: f64) -> f64 {
        self.t_horizon
            .unwrap_or_else(|| 40.0 / (mu * ANNULUS_INNER.powf(2.0 * alpha)))
    }
}

/// `6 r^5 - 15 r^4 + 10 r^3` clamped to `[0, 1]`.
pub fn smoothstep(r: f64) -> f64 {
    let r = r.clamp(0.0, 1.0);
    r * r * r * (r * (6.0 * r - 15.0) + 10.0)
}

/// Value of `chi_hat` at wavevector `k`.
pub fn chi_symbol(k1: f64, k2: f64, delta: f64) -> f64 {
    let r = k1.hypot(k2);
    if !(ANNULUS_INNER..=ANNULUS_OUTER).contains(&r) {
        return 0.0;
    }
    let strip = (k1 - k2).abs();
    let inner = delta / 3.0;
    if strip <= inner {
        1.0
    } else if strip > delta {
        0.0
    } else {
        1.0 - smoothstep((strip - inner) / (delta - inner))
    }
}

/// Continuum transform value `f_hat(k) = box_area * c_k` at a lattice point.
pub fn continuum_coeff(f: &SpectralField, j1: i32, j2: i32) -> Complex64 {
    f.coeff(j1, j2) * f.grid().area()
}

/// The cutoff `chi`, real and even, with `chi_hat = 1` on the inner strip
/// and support inside the outer strip.
pub fn build_chi(recipe: &DataRecipe, grid: &Grid) -> Result<SpectralField> {
    let area = grid.area();
    let inner = recipe.delta / 3.0;
    let mut chi = SpectralField::zeros(*grid);
    let mut inner_hits = 0usize;
    for (idx, c) in chi.coeffs_mut().iter_mut().enumerate() {
        let (k1, k2) = grid.wavevector(idx);
        let v = chi_symbol(k1, k2, recipe.delta);
        if v > 0.0 {
            *c = Complex64::new(v / area, 0.0);
            if (k1 - k2).abs() <= inner {
                inner_hits += 1;
            }
        }
    }
    if inner_hits == 0 {
        return Err(SqgError::UnresolvableStrip {
            width: inner,
            dk: grid.dk(),
        });
    }
    // chi_hat(k) = chi_hat(-k) except on the Nyquist lines, which lie outside
    // the annulus for any grid that resolves it.
    chi.symmetrize();
    Ok(chi)
}

/// Initial data `a_0`, `Theta_0 = a_0`, `U_0` and `g_0`.
#[derive(Debug, Clone)]
pub struct DataFamily {
    pub a0: SpectralField,
    pub theta0: SpectralField,
    pub u0: VectorField,
    pub g0: SpectralField,
}

pub fn build_a0(recipe: &DataRecipe, grid: &Grid) -> Result<SpectralField> {
    match &recipe.background {
        BackgroundProfile::Corollary => Ok(build_chi(recipe, grid)?.scaled(recipe.amplitude_value())),
        BackgroundProfile::Modes(modes) => {
            let mut f = SpectralField::zeros(*grid);
            for m in modes {
                if m.j1 == 0 && m.j2 == 0 {
                    return Err(SqgError::InvalidRecipe(
                        "background modes must have nonzero wavevector".into(),
                    ));
                }
                f.add_cosine(m.j1, m.j2, m.amplitude)?;
            }
            Ok(f)
        }
        BackgroundProfile::Zero => Ok(SpectralField::zeros(*grid)),
    }
}

pub fn build_g0(recipe: &DataRecipe, grid: &Grid) -> Result<SpectralField> {
    match &recipe.g0 {
        PerturbationSeed::Zero => Ok(SpectralField::zeros(*grid)),
        PerturbationSeed::Modes(modes) => {
            let mut f = SpectralField::zeros(*grid);
            for m in modes {
                if m.j1 == 0 && m.j2 == 0 {
                    return Err(SqgError::InvalidRecipe(
                        "perturbation modes must have nonzero wavevector".into(),
                    ));
                }
                f.add_cosine(m.j1, m.j2, m.amplitude)?;
            }
            Ok(f)
        }
        PerturbationSeed::RandomBand {
            target_h3_sq,
            k_max,
            seed,
        } => {
            let (target_h3_sq, k_max, seed) = (*target_h3_sq, *k_max, *seed);
            if target_h3_sq == 0.0 {
                return Ok(SpectralField::zeros(*grid));
            }
            let raw = random_field(*grid, Band::Disc(k_max), seed);
            let h3 = sobolev_norm_sq(&raw, 3, 0.0);
            if h3 == 0.0 {
                return Err(SqgError::InvalidRecipe(format!(
                    "g0 band |k| <= {k_max} holds no retained lattice point"
                )));
            }
            Ok(raw.scaled((target_h3_sq / h3).sqrt()))
        }
    }
}

pub fn build_family(recipe: &DataRecipe, grid: &Grid) -> Result<DataFamily> {
    let a0 = build_a0(recipe, grid)?;
    let theta0 = a0.clone();
    let u0 = velocity_with_exponent(&theta0, recipe.velocity_exponent)?;
    let g0 = build_g0(recipe, grid)?;
    Ok(DataFamily { a0, theta0, u0, g0 })
}

fn decay_rates(grid: &Grid, mu: f64, alpha: f64) -> Vec<f64> {
    (0..grid.len())
        .map(|idx| {
            let (k1, k2) = grid.wavevector(idx);
            let r2 = k1 * k1 + k2 * k2;
            if r2 == 0.0 {
                0.0
            } else {
                mu * r2.powf(alpha)
            }
        })
        .collect()
}

/// `Theta(t)` with `Theta_hat(t, k) = exp(-mu |k|^(2 alpha) t) Theta_hat_0(k)`.
pub fn background_at(theta0: &SpectralField, mu: f64, alpha: f64, t: f64) -> Result<SpectralField> {
    if !(t >= 0.0) {
        return Err(SqgError::NegativeTime(t));
    }
    let rates = decay_rates(theta0.grid(), mu, alpha);
    let mut out = theta0.clone();
    for (c, r) in out.coeffs_mut().iter_mut().zip(&rates) {
        if c.re != 0.0 || c.im != 0.0 {
            *c *= (-r * t).exp();
        }
    }
    Ok(out)
}

/// Analytic background reconstructed from `Theta_0` at any time.
#[derive(Debug, Clone)]
pub struct Background {
    theta0: SpectralField,
    rates: Vec<f64>,
    support: Vec<usize>,
    velocity_exponent: f64,
}

impl Background {
    pub fn new(theta0: SpectralField, mu: f64, alpha: f64, velocity_exponent: f64) -> Self {
        let rates = decay_rates(theta0.grid(), mu, alpha);
        let support = theta0
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.re != 0.0 || c.im != 0.0)
            .map(|(i, _)| i)
            .collect();
        Background {
            theta0,
            rates,
            support,
            velocity_exponent,
        }
    }

    pub fn from_recipe(recipe: &DataRecipe, grid: &Grid) -> Result<Self> {
        let theta0 = build_a0(recipe, grid)?;
        Ok(Background::new(
            theta0,
            recipe.mu,
            recipe.alpha,
            recipe.velocity_exponent,
        ))
    }

    pub fn grid(&self) -> &Grid {
        self.theta0.grid()
    }

    pub fn theta0(&self) -> &SpectralField {
        &self.theta0
    }

    pub fn is_zero(&self) -> bool {
        self.support.is_empty()
    }

    pub fn velocity_exponent(&self) -> f64 {
        self.velocity_exponent
    }

    pub fn theta_at(&self, t: f64) -> Result<SpectralField> {
        if !(t >= 0.0) {
            return Err(SqgError::NegativeTime(t));
        }
        let mut out = SpectralField::zeros(*self.grid());
        let src = self.theta0.coeffs();
        let dst = out.coeffs_mut();
        for &i in &self.support {
            dst[i] = src[i] * (-self.rates[i] * t).exp();
        }
        Ok(out)
    }

    /// Background fields at time `t`, with the physical samples needed by
    /// transport products.
    pub fn snapshot(&self, t: f64) -> Result<BackgroundSnapshot> {
        let theta = self.theta_at(t)?;
        let u = velocity_with_exponent(&theta, self.velocity_exponent)?;
        let (u1, u2) = u.to_physical();
        let (d1, d2) = gradient(&theta).to_physical();
        Ok(BackgroundSnapshot {
            t,
            theta,
            u,
            u1,
            u2,
            d1,
            d2,
        })
    }
}

/// `Theta(t)` and `U(t)` in both representations.
#[derive(Debug, Clone)]
pub struct BackgroundSnapshot {
    pub t: f64,
    pub theta: SpectralField,
    pub u: VectorField,
    pub(crate) u1: Vec<f64>,
    pub(crate) u2: Vec<f64>,
    pub(crate) d1: Vec<f64>,
    pub(crate) d2: Vec<f64>,
}

impl BackgroundSnapshot {
    /// Dealiased `U . grad Theta`.
    pub fn advection(&self) -> SpectralField {
        let prod = transport_physical(&self.u1, &self.u2, &self.d1, &self.d2);
        let mut out = forward_real(*self.theta.grid(), &prod);
        dealias_in_place(&mut out);
        out
    }

    /// Forcing `-U . grad Theta` of the perturbation equation.
    pub fn forcing(&self) -> SpectralField {
        self.advection().scaled(-1.0)
    }

    /// `max |U|` over the sampling grid.
    pub fn max_speed(&self) -> f64 {
        self.u1
            .iter()
            .zip(&self.u2)
            .fold(0.0f64, |m, (a, b)| m.max(a * a + b * b))
            .sqrt()
    }
}

/// Dealiased `-U(t) . grad Theta(t)`.
pub fn forcing_at(recipe: &DataRecipe, grid: &Grid, t: f64) -> Result<SpectralField> {
    Ok(Background::from_recipe(recipe, grid)?.snapshot(t)?.forcing())
}
