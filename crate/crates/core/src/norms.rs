//! Lebesgue and Sobolev norms on the periodic box.
//!
//! Integrals are physical-space integrals over the box, so
//! `||f||_{L2}^2 = box_area * sum_k |c_k|^2`.

use num_complex::Complex64;

use crate::error::{Result, SqgError};
use crate::field::SpectralField;
use crate::grid::Grid;

/// `||f||_{L^p}` for `p = 2` (Parseval) or `p = infinity` (maximum of `|f|`
/// over the sampling grid, a lower bound of the true supremum).
pub fn lebesgue_norm(f: &SpectralField, p: f64) -> Result<f64> {
    if p == 2.0 {
        Ok(l2_norm(f))
    } else if p == f64::INFINITY {
        Ok(sup_norm(f))
    } else {
        Err(SqgError::UnsupportedNorm(p))
    }
}

pub fn l2_norm_sq(f: &SpectralField) -> f64 {
    f.grid().area() * f.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>()
}

pub fn l2_norm(f: &SpectralField) -> f64 {
    l2_norm_sq(f).sqrt()
}

/// `L2` norm by midpoint quadrature of the physical samples.
pub fn l2_norm_physical(f: &SpectralField) -> f64 {
    let g = f.grid();
    let cell = g.dx() * g.dx();
    (f.to_physical().iter().map(|v| v * v).sum::<f64>() * cell).sqrt()
}

/// `max |f|` over the sampling grid.
pub fn sup_norm(f: &SpectralField) -> f64 {
    max_abs(&f.to_physical())
}

/// `max |f|` over a grid refined `factor` times by zero padding.
pub fn sup_norm_upsampled(f: &SpectralField, factor: usize) -> Result<f64> {
    if factor <= 1 {
        return Ok(sup_norm(f));
    }
    Ok(sup_norm(&f.zero_padded(factor)?))
}

pub(crate) fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Sum of coefficient moduli, an upper bound of `max |f|`.
pub fn coefficient_l1(f: &SpectralField) -> f64 {
    f.coeffs().iter().map(|c| c.norm()).sum()
}

/// `sum_{|beta| in [lo, hi]} k1^(2 b1) k2^(2 b2)`.
pub fn multi_index_weight(k1: f64, k2: f64, lo: u32, hi: u32) -> f64 {
    let a = k1 * k1;
    let b = k2 * k2;
    let mut total = 0.0;
    for order in lo..=hi {
        for b1 in 0..=order {
            total += a.powi(b1 as i32) * b.powi((order - b1) as i32);
        }
    }
    total
}

/// Precomputed spectral weight `w(k) |k|^(2 s)` with
/// `w(k) = sum_{lo <= |beta| <= hi} k^(2 beta)`.
#[derive(Debug, Clone)]
pub struct SobolevWeight {
    grid: Grid,
    weights: Vec<f64>,
}

impl SobolevWeight {
    pub fn new(grid: Grid, lo: u32, hi: u32, shift: f64) -> Self {
        let weights = (0..grid.len())
            .map(|idx| {
                let (k1, k2) = grid.wavevector(idx);
                let w = multi_index_weight(k1, k2, lo, hi);
                if shift == 0.0 {
                    w
                } else {
                    let r2 = k1 * k1 + k2 * k2;
                    if r2 == 0.0 {
                        0.0
                    } else {
                        w * r2.powf(shift)
                    }
                }
            })
            .collect();
        SobolevWeight { grid, weights }
    }

    /// Inhomogeneous `H^m` weight shifted by `Lambda^shift`.
    pub fn inhomogeneous(grid: Grid, m: u32, shift: f64) -> Self {
        SobolevWeight::new(grid, 0, m, shift)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn norm_sq(&self, f: &SpectralField) -> f64 {
        debug_assert_eq!(*f.grid(), self.grid);
        self.grid.area()
            * f.coeffs()
                .iter()
                .zip(&self.weights)
                .map(|(c, w)| w * c.norm_sqr())
                .sum::<f64>()
    }

    /// Weighted `L2` inner product `area * sum_k w(k) Re(a_k conj(b_k))`.
    pub fn inner(&self, a: &SpectralField, b: &SpectralField) -> f64 {
        self.grid.area()
            * a.coeffs()
                .iter()
                .zip(b.coeffs())
                .zip(&self.weights)
                .map(|((x, y), w)| w * (x * y.conj()).re)
                .sum::<f64>()
    }
}

/// `(sum_{|beta| <= m} ||D^beta Lambda^shift f||_{L2}^2)^(1/2)`.
pub fn sobolev_norm(f: &SpectralField, m: u32, alpha_shift: f64) -> f64 {
    sobolev_norm_sq(f, m, alpha_shift).sqrt()
}

pub fn sobolev_norm_sq(f: &SpectralField, m: u32, alpha_shift: f64) -> f64 {
    let g = f.grid();
    let area = g.area();
    let axis = g.axis_wavenumbers();
    let n = g.n();
    area * f
        .coeffs()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.re != 0.0 || c.im != 0.0)
        .map(|(idx, c)| {
            let (k1, k2) = (axis[idx / n], axis[idx % n]);
            let mut w = multi_index_weight(k1, k2, 0, m);
            if alpha_shift != 0.0 {
                let r2 = k1 * k1 + k2 * k2;
                w = if r2 == 0.0 { 0.0 } else { w * r2.powf(alpha_shift) };
            }
            w * c.norm_sqr()
        })
        .sum::<f64>()
}

/// Fraction of `L2` energy held by the outer third of the retained block,
/// i.e. modes with `max(|j1|, |j2|) > (2/3) (n/3)`.
pub fn tail_fraction(f: &SpectralField) -> f64 {
    let g = f.grid();
    let edge = 2.0 * g.dealias_cutoff() as f64 / 3.0;
    let mut tail = 0.0;
    let mut total = 0.0;
    for (idx, c) in f.coeffs().iter().enumerate() {
        let e = c.norm_sqr();
        if e == 0.0 {
            continue;
        }
        total += e;
        let (j1, j2) = g.lattice(idx);
        if j1.abs().max(j2.abs()) as f64 > edge {
            tail += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

/// Direct trigonometric-sum evaluation of a field at arbitrary points, from
/// its nonzero coefficients.
#[derive(Debug, Clone)]
pub struct PointEvaluator {
    modes: Vec<(f64, f64, Complex64)>,
}

impl PointEvaluator {
    pub fn new(f: &SpectralField) -> Self {
        let g = f.grid();
        let modes = f
            .coeffs()
            .iter()
            .enumerate()
            .filter(|(_, c)| c.re != 0.0 || c.im != 0.0)
            .map(|(idx, &c)| {
                let (k1, k2) = g.wavevector(idx);
                (k1, k2, c)
            })
            .collect();
        PointEvaluator { modes }
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        self.modes
            .iter()
            .map(|&(k1, k2, c)| {
                let (s, co) = (k1 * x1 + k2 * x2).sin_cos();
                c.re * co - c.im * s
            })
            .sum()
    }

    /// `max |f|` over a `(2 m + 1)^2` lattice of points with spacing `h`
    /// centred on `center`.
    pub fn patch_max(&self, center: (f64, f64), h: f64, m: i32) -> f64 {
        let mut best = 0.0f64;
        for a in -m..=m {
            for b in -m..=m {
                let v = self.eval(center.0 + a as f64 * h, center.1 + b as f64 * h);
                best = best.max(v.abs());
            }
        }
        best
    }
}

/// Grid maximum of `|f|`, refined by direct evaluation on a fine patch around
/// the best grid sample. Still a lower bound of the supremum.
pub fn sup_norm_refined(f: &SpectralField) -> f64 {
    let vals = f.to_physical();
    let (arg, coarse) = vals
        .iter()
        .enumerate()
        .fold((0usize, 0.0f64), |(ai, am), (i, v)| {
            if v.abs() > am {
                (i, v.abs())
            } else {
                (ai, am)
            }
        });
    if coarse == 0.0 {
        return 0.0;
    }
    let eval = PointEvaluator::new(f);
    let dx = f.grid().dx();
    coarse.max(eval.patch_max(f.grid().point(arg), dx / 8.0, 8))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cosine_norms() {
        let g = Grid::unit(16).unwrap();
        let f = SpectralField::from_fn(g, |x, _| x.cos());
        assert!((l2_norm_sq(&f) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((lebesgue_norm(&f, f64::INFINITY).unwrap() - 1.0).abs() < 1e-14);
        assert!((sobolev_norm_sq(&f, 3, 0.0) - 8.0 * PI * PI).abs() < 1e-11);
        assert!((multi_index_weight(1.0, 0.0, 0, 3) - 4.0).abs() < 1e-15);
        assert!(matches!(
            lebesgue_norm(&f, 1.0),
            Err(SqgError::UnsupportedNorm(_))
        ));
    }

    #[test]
    fn h0_is_l2() {
        let g = Grid::new(16, 5.0).unwrap();
        let f = SpectralField::from_fn(g, |x, y| (2.0 * PI * x / 5.0).sin() + (4.0 * PI * y / 5.0).cos());
        assert!((sobolev_norm(&f, 0, 0.0) - l2_norm(&f)).abs() < 1e-12);
        let w = SobolevWeight::inhomogeneous(g, 0, 0.0);
        assert!((w.norm_sq(&f) - l2_norm_sq(&f)).abs() < 1e-12);
    }

    #[test]
    fn tail_fraction_of_edge_mode() {
        let g = Grid::unit(36).unwrap();
        let mut f = SpectralField::zeros(g);
        f.add_cosine(2, 1, 1.0).unwrap();
        assert_eq!(tail_fraction(&f), 0.0);
        f.add_cosine(10, 0, 1.0).unwrap();
        assert!((tail_fraction(&f) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn point_evaluator_matches_samples() {
        let g = Grid::unit(16).unwrap();
        let f = SpectralField::from_fn(g, |x, y| (x - 2.0 * y).sin() + 0.3 * (3.0 * x).cos());
        let e = PointEvaluator::new(&f);
        let v = e.eval(0.37, 1.9);
        let want = (0.37f64 - 3.8).sin() + 0.3 * (1.11f64).cos();
        assert!((v - want).abs() < 1e-13);
        assert!(sup_norm_refined(&f) >= sup_norm(&f));
    }
}
