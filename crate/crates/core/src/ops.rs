//! Fourier-multiplier operators and dealiased products.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SqgError};
use crate::field::{forward_real, inverse_pair, SpectralField, VectorField};
use crate::grid::Grid;

/// Exponent of the inverse half-Laplacian in the velocity law
/// `u = grad_perp (-Laplacian)^s theta`.
pub const DEFAULT_VELOCITY_EXPONENT: f64 = -0.5;

/// Direction of a fractional Laplacian power.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Power {
    Positive,
    Negative,
}

/// Coefficients at or below this fraction of the largest coefficient count as
/// a zero mean.
const MEAN_TOL: f64 = 1e-12;

pub(crate) fn require_zero_mean(f: &SpectralField) -> Result<()> {
    let m = f.coeffs()[0].norm();
    if m > 0.0 && m > MEAN_TOL * f.max_abs_coeff().max(f64::MIN_POSITIVE) {
        return Err(SqgError::NonzeroMean(f.mean()));
    }
    Ok(())
}

/// `(-Laplacian)^(+-a) f`, i.e. multiplication by `|k|^(+-2a)`. The `k = 0`
/// multiplier is zero for both signs.
pub fn fractional_laplacian(f: &SpectralField, a: f64, sign: Power) -> Result<SpectralField> {
    if !(a >= 0.0) {
        return Err(SqgError::NegativeExponent(a));
    }
    if sign == Power::Negative {
        require_zero_mean(f)?;
    }
    let e = match sign {
        Power::Positive => a,
        Power::Negative => -a,
    };
    Ok(f.map_real_symbol(|k1, k2| {
        let r2 = k1 * k1 + k2 * k2;
        if r2 == 0.0 {
            0.0
        } else {
            r2.powf(e)
        }
    }))
}

/// Velocity of an active scalar, `u = grad_perp (-Laplacian)^(-1/2) theta`,
/// with `grad_perp = (d2, -d1)`.
pub fn velocity_from_scalar(theta: &SpectralField) -> Result<VectorField> {
    velocity_with_exponent(theta, DEFAULT_VELOCITY_EXPONENT)
}

/// `u_hat(k) = (i k2, -i k1) |k|^(2 s) theta_hat(k)`.
pub fn velocity_with_exponent(theta: &SpectralField, s: f64) -> Result<VectorField> {
    if s < 0.0 {
        require_zero_mean(theta)?;
    }
    let grid = *theta.grid();
    let mag = radial_power(&grid, s);
    let axis = grid.axis_wavenumbers();
    let n = grid.n();
    let mut c1 = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut c2 = vec![Complex64::new(0.0, 0.0); grid.len()];
    for i1 in 0..n {
        for i2 in 0..n {
            let idx = i1 * n + i2;
            let c = theta.coeffs()[idx];
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            let m = c * Complex64::new(0.0, mag[idx]);
            c1[idx] = m * axis[i2];
            c2[idx] = -m * axis[i1];
        }
    }
    let mut u1 = SpectralField::from_coeffs(grid, c1)?;
    let mut u2 = SpectralField::from_coeffs(grid, c2)?;
    u1.clear_nyquist(1);
    u2.clear_nyquist(0);
    VectorField::new(u1, u2)
}

/// `|k|^(2 s)` on every lattice point (zero at `k = 0`), cached per grid and
/// exponent.
fn radial_power(grid: &Grid, s: f64) -> Arc<Vec<f64>> {
    type Key = (usize, u64, u64);
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<Vec<f64>>>>> = OnceLock::new();
    let key = (grid.n(), grid.box_len().to_bits(), s.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("multiplier cache poisoned");
    guard
        .entry(key)
        .or_insert_with(|| {
            Arc::new(
                (0..grid.len())
                    .map(|idx| {
                        let (k1, k2) = grid.wavevector(idx);
                        let r2 = k1 * k1 + k2 * k2;
                        if r2 == 0.0 {
                            0.0
                        } else {
                            r2.powf(s)
                        }
                    })
                    .collect(),
            )
        })
        .clone()
}

/// `D^beta f = d1^b1 d2^b2 f`.
pub fn derivative(f: &SpectralField, beta: (u32, u32)) -> SpectralField {
    let (b1, b2) = beta;
    if b1 == 0 && b2 == 0 {
        return f.clone();
    }
    let i = Complex64::new(0.0, 1.0);
    let mut out = match beta {
        (1, 0) => f.map_symbol(|k1, _| Complex64::new(0.0, k1)),
        (0, 1) => f.map_symbol(|_, k2| Complex64::new(0.0, k2)),
        _ => f.map_symbol(|k1, k2| (i * k1).powu(b1) * (i * k2).powu(b2)),
    };
    if b1 % 2 == 1 {
        out.clear_nyquist(0);
    }
    if b2 % 2 == 1 {
        out.clear_nyquist(1);
    }
    out
}

pub fn gradient(f: &SpectralField) -> VectorField {
    VectorField {
        u1: derivative(f, (1, 0)),
        u2: derivative(f, (0, 1)),
    }
}

/// Zeroes every coefficient with `|j1| > n/3` or `|j2| > n/3`.
pub fn dealias(f: &SpectralField) -> SpectralField {
    let mut out = f.clone();
    dealias_in_place(&mut out);
    out
}

pub fn dealias_in_place(f: &mut SpectralField) {
    let g = *f.grid();
    let n = g.n();
    let cut = g.dealias_cutoff();
    let keep: Vec<bool> = (0..n).map(|i| g.lattice_of_slot(i).abs() <= cut).collect();
    for (row, k1) in f.coeffs_mut().chunks_exact_mut(n).zip(&keep) {
        for (c, k2) in row.iter_mut().zip(&keep) {
            if !(*k1 && *k2) {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }
}

/// Dealiased coefficients of `f * g`.
pub fn pointwise_product(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    f.check_grid(g)?;
    let (pf, pg) = inverse_pair(f, g);
    let prod: Vec<f64> = pf.iter().zip(&pg).map(|(a, b)| a * b).collect();
    let mut out = forward_real(*f.grid(), &prod);
    dealias_in_place(&mut out);
    Ok(out)
}

/// Physical samples of a vector field and of a scalar gradient, ready for
/// transport products.
pub(crate) struct TransportInputs {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

impl TransportInputs {
    pub fn new(u: &VectorField, f: &SpectralField) -> Self {
        let (u1, u2) = u.to_physical();
        let grad = gradient(f);
        let (d1, d2) = grad.to_physical();
        TransportInputs { u1, u2, d1, d2 }
    }
}

/// Physical samples of `u . grad f`.
pub(crate) fn transport_physical(u1: &[f64], u2: &[f64], d1: &[f64], d2: &[f64]) -> Vec<f64> {
    u1.iter()
        .zip(u2)
        .zip(d1.iter().zip(d2))
        .map(|((a, b), (c, d))| a * c + b * d)
        .collect()
}

/// Dealiased coefficients of `u . grad f`.
pub fn transport(u: &VectorField, f: &SpectralField) -> Result<SpectralField> {
    u.u1.check_grid(f)?;
    let t = TransportInputs::new(u, f);
    let prod = transport_physical(&t.u1, &t.u2, &t.d1, &t.d2);
    let mut out = forward_real(*f.grid(), &prod);
    dealias_in_place(&mut out);
    Ok(out)
}
