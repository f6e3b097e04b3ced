//! Spectral fields on a periodic box and the 2D transforms between
//! coefficients and physical samples.
//!
//! A field is stored as Fourier-series coefficients `c_k`, so the physical
//! value is `f(x) = sum_k c_k exp(i k.x)`. The continuum transform used in
//! the analysis relates to these by `f_hat(k) = box_area * c_k`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, SqgError};
use crate::grid::Grid;

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

fn plans(n: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                forward: planner.plan_fft_forward(n),
                inverse: planner.plan_fft_inverse(n),
            })
        })
        .clone()
}

/// `(n - i) % n` for every slot `i`.
fn neg_slots(n: usize) -> Vec<usize> {
    (0..n).map(|i| (n - i) % n).collect()
}

/// Unnormalised in-place 2D transform of a row-major `n x n` array.
fn fft2(data: &mut [Complex64], n: usize, inverse: bool) {
    let p = plans(n);
    let fft = if inverse { &p.inverse } else { &p.forward };
    thread_local! {
        static BUFFERS: RefCell<(Vec<Complex64>, Vec<Complex64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
    }
    BUFFERS.with(|b| {
        let (scratch, columns) = &mut *b.borrow_mut();
        scratch.resize(fft.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
        columns.resize(data.len(), Complex64::new(0.0, 0.0));
        fft.process_with_scratch(data, scratch);
        transpose::transpose(data, columns, n, n);
        fft.process_with_scratch(columns, scratch);
        transpose::transpose(columns, data, n, n);
    });
}

/// Complex Fourier coefficients of a real scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: Grid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: Grid) -> Self {
        SpectralField {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_coeffs(grid: Grid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(SqgError::InvalidGrid(format!(
                "expected {} coefficients, got {}",
                grid.len(),
                coeffs.len()
            )));
        }
        Ok(SpectralField { grid, coeffs })
    }

    /// Builds a field from physical samples taken in storage order.
    pub fn from_physical(grid: Grid, values: &[f64]) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(SqgError::InvalidGrid(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(forward_real(grid, values))
    }

    /// Field obtained by sampling `f` on the physical grid.
    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values: Vec<f64> = (0..grid.len())
            .map(|idx| {
                let (x1, x2) = grid.point(idx);
                f(x1, x2)
            })
            .collect();
        forward_real(grid, &values)
    }

    #[inline]
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient at lattice point `(j1, j2)`; zero when not representable.
    pub fn coeff(&self, j1: i32, j2: i32) -> Complex64 {
        self.grid
            .index(j1, j2)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    /// Sets `c(j) = value` and `c(-j) = conj(value)`.
    pub fn set_mode(&mut self, j1: i32, j2: i32, value: Complex64) -> Result<()> {
        let idx = self
            .grid
            .index(j1, j2)
            .ok_or_else(|| SqgError::InvalidGrid(format!("mode ({j1}, {j2}) is not representable")))?;
        let neg = self.grid.neg_index(idx);
        if neg == idx {
            self.coeffs[idx] = Complex64::new(value.re, 0.0);
        } else {
            self.coeffs[idx] = value;
            self.coeffs[neg] = value.conj();
        }
        Ok(())
    }

    /// Adds `amplitude * cos(k.x)` for the lattice vector `(j1, j2)`.
    pub fn add_cosine(&mut self, j1: i32, j2: i32, amplitude: f64) -> Result<()> {
        let idx = self
            .grid
            .index(j1, j2)
            .ok_or_else(|| SqgError::InvalidGrid(format!("mode ({j1}, {j2}) is not representable")))?;
        let neg = self.grid.neg_index(idx);
        if neg == idx {
            self.coeffs[idx] += Complex64::new(amplitude, 0.0);
        } else {
            self.coeffs[idx] += Complex64::new(0.5 * amplitude, 0.0);
            self.coeffs[neg] += Complex64::new(0.5 * amplitude, 0.0);
        }
        Ok(())
    }

    #[inline]
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs
            .iter()
            .map(|c| c.norm_sqr())
            .fold(0.0, f64::max)
            .sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }

    pub fn has_non_finite(&self) -> bool {
        self.coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite())
    }

    /// `max_k |c(-k) - conj c(k)|`.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[self.grid.neg_index(i)] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Projects onto real fields: `c(k) <- (c(k) + conj c(-k)) / 2`.
    pub fn symmetrize(&mut self) {
        let n = self.grid.n();
        let neg = neg_slots(n);
        for i1 in 0..n {
            for i2 in 0..n {
                let i = i1 * n + i2;
                let j = neg[i1] * n + neg[i2];
                if j < i {
                    continue;
                }
                if j == i {
                    self.coeffs[i].im = 0.0;
                } else {
                    let avg = (self.coeffs[i] + self.coeffs[j].conj()) * 0.5;
                    self.coeffs[i] = avg;
                    self.coeffs[j] = avg.conj();
                }
            }
        }
    }

    pub fn remove_mean(&mut self) {
        self.coeffs[0] = Complex64::new(0.0, 0.0);
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &SpectralField) -> Result<()> {
        self.check_grid(other)?;
        for (c, o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += o * a;
        }
        Ok(())
    }

    pub fn check_grid(&self, other: &SpectralField) -> Result<()> {
        if self.grid != other.grid {
            return Err(SqgError::GridMismatch);
        }
        Ok(())
    }

    /// Physical samples in storage order.
    pub fn to_physical(&self) -> Vec<f64> {
        let mut buf = self.coeffs.clone();
        fft2(&mut buf, self.grid.n(), true);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Multiplies every coefficient by `symbol(k1, k2)`.
    pub fn map_symbol(&self, symbol: impl Fn(f64, f64) -> Complex64) -> Self {
        let g = self.grid;
        let axis = g.axis_wavenumbers();
        let n = g.n();
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (row, k1) in self.coeffs.chunks_exact(n).zip(&axis) {
            coeffs.extend(row.iter().zip(&axis).map(|(c, k2)| c * symbol(*k1, *k2)));
        }
        SpectralField { grid: g, coeffs }
    }

    /// Multiplies every coefficient by the real `symbol(k1, k2)`.
    pub fn map_real_symbol(&self, symbol: impl Fn(f64, f64) -> f64) -> Self {
        let g = self.grid;
        let axis = g.axis_wavenumbers();
        let n = g.n();
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (row, k1) in self.coeffs.chunks_exact(n).zip(&axis) {
            coeffs.extend(row.iter().zip(&axis).map(|(c, k2)| c * symbol(*k1, *k2)));
        }
        SpectralField { grid: g, coeffs }
    }

    /// Zeroes the lattice lines `j1 = -n/2` (axis 0) or `j2 = -n/2` (axis 1).
    ///
    /// Odd symbols cannot keep conjugate symmetry on these lines.
    pub(crate) fn clear_nyquist(&mut self, axis: usize) {
        let n = self.grid.n();
        let half = n / 2;
        for i in 0..n {
            let idx = if axis == 0 { half * n + i } else { i * n + half };
            self.coeffs[idx] = Complex64::new(0.0, 0.0);
        }
    }

    /// Same field on a grid with `factor` times more points per axis and the
    /// same box. The Nyquist coefficients are split between `+-n/2`.
    pub fn zero_padded(&self, factor: usize) -> Result<SpectralField> {
        let big = Grid::new(self.grid.n() * factor, self.grid.box_len())?;
        let mut out = SpectralField::zeros(big);
        let half = (self.grid.n() / 2) as i32;
        for (idx, &c) in self.coeffs.iter().enumerate() {
            if c == Complex64::new(0.0, 0.0) {
                continue;
            }
            let (j1, j2) = self.grid.lattice(idx);
            let w1: &[i32] = if j1 == -half { &[-half, half] } else { &[j1] };
            let w2: &[i32] = if j2 == -half { &[-half, half] } else { &[j2] };
            let share = 1.0 / (w1.len() * w2.len()) as f64;
            for &a in w1 {
                for &b in w2 {
                    let t = big.index(a, b).expect("padded grid holds all modes");
                    out.coeffs[t] += c * share;
                }
            }
        }
        Ok(out)
    }

    /// Restriction to a grid of the same box with fewer points (modes that do
    /// not fit are dropped).
    pub fn truncated(&self, target: Grid) -> Result<SpectralField> {
        if target.box_len() != self.grid.box_len() {
            return Err(SqgError::GridMismatch);
        }
        let mut out = SpectralField::zeros(target);
        let half = (target.n() / 2) as i32;
        for (idx, &c) in self.coeffs.iter().enumerate() {
            let (j1, j2) = self.grid.lattice(idx);
            if j1.abs() < half && j2.abs() < half {
                if let Some(t) = target.index(j1, j2) {
                    out.coeffs[t] = c;
                }
            }
        }
        Ok(out)
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        let coeffs = self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a + b).collect();
        SpectralField {
            grid: self.grid,
            coeffs,
        }
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        let coeffs = self.coeffs.iter().zip(&rhs.coeffs).map(|(a, b)| a - b).collect();
        SpectralField {
            grid: self.grid,
            coeffs,
        }
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scaled(rhs)
    }
}

impl AddAssign<&SpectralField> for SpectralField {
    fn add_assign(&mut self, rhs: &SpectralField) {
        assert_eq!(self.grid, rhs.grid, "grid mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

/// Two-component field sharing one grid (velocities, gradients).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub u1: SpectralField,
    pub u2: SpectralField,
}

impl VectorField {
    pub fn new(u1: SpectralField, u2: SpectralField) -> Result<Self> {
        u1.check_grid(&u2)?;
        Ok(VectorField { u1, u2 })
    }

    pub fn grid(&self) -> &Grid {
        self.u1.grid()
    }

    /// `max_k |k . u_hat(k)|`.
    pub fn divergence_defect(&self) -> f64 {
        let g = self.u1.grid();
        (0..g.len())
            .map(|i| {
                let (k1, k2) = g.wavevector(i);
                (self.u1.coeffs()[i] * k1 + self.u2.coeffs()[i] * k2).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.u1.max_abs_coeff().max(self.u2.max_abs_coeff())
    }

    /// Physical samples of both components (one complex transform).
    pub fn to_physical(&self) -> (Vec<f64>, Vec<f64>) {
        inverse_pair(&self.u1, &self.u2)
    }
}

/// Physical samples of two real fields from a single complex transform.
pub fn inverse_pair(a: &SpectralField, b: &SpectralField) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(a.grid, b.grid, "grid mismatch");
    let i = Complex64::new(0.0, 1.0);
    let mut buf: Vec<Complex64> = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + i * y).collect();
    fft2(&mut buf, a.grid.n(), true);
    buf.into_iter().map(|z| (z.re, z.im)).unzip()
}

/// Coefficients of a real field from its physical samples; the result is
/// exactly conjugate symmetric.
pub fn forward_real(grid: Grid, values: &[f64]) -> SpectralField {
    let n2 = grid.len() as f64;
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft2(&mut buf, grid.n(), false);
    buf.iter_mut().for_each(|c| *c /= n2);
    let mut f = SpectralField { grid, coeffs: buf };
    f.symmetrize();
    f
}

/// Coefficients of two real fields from one complex transform.
pub fn forward_pair(grid: Grid, a: &[f64], b: &[f64]) -> (SpectralField, SpectralField) {
    let n2 = grid.len() as f64;
    let mut buf: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
    fft2(&mut buf, grid.n(), false);
    let mut fa = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut fb = vec![Complex64::new(0.0, 0.0); grid.len()];
    let half_i = Complex64::new(0.0, -0.5);
    let n = grid.n();
    let neg = neg_slots(n);
    for idx in 0..grid.len() {
        let z = buf[idx] / n2;
        let zn = buf[neg[idx / n] * n + neg[idx % n]].conj() / n2;
        fa[idx] = (z + zn) * 0.5;
        fb[idx] = (z - zn) * half_i;
    }
    (
        SpectralField { grid, coeffs: fa },
        SpectralField { grid, coeffs: fb },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn cosine_mode_round_trip() {
        let g = Grid::unit(16).unwrap();
        let f = SpectralField::from_fn(g, |x, y| (2.0 * x).cos() + 0.5 * (x + 3.0 * y).sin());
        assert!((f.coeff(2, 0).re - 0.5).abs() < 1e-14);
        assert!((f.coeff(1, 3) - Complex64::new(0.0, -0.25)).norm() < 1e-14);
        assert!(f.conjugate_symmetry_defect() == 0.0);
        let back = f.to_physical();
        for (idx, v) in back.iter().enumerate() {
            let (x, y) = g.point(idx);
            let want = (2.0 * x).cos() + 0.5 * (x + 3.0 * y).sin();
            assert!((v - want).abs() < 1e-13);
        }
    }

    #[test]
    fn pair_transforms_match_single() {
        let g = Grid::new(12, 3.0).unwrap();
        let a = SpectralField::from_fn(g, |x, y| (2.0 * PI * x / 3.0).sin() * (2.0 * PI * y / 3.0).cos());
        let b = SpectralField::from_fn(g, |x, _| (4.0 * PI * x / 3.0).cos());
        let (pa, pb) = inverse_pair(&a, &b);
        let sa = a.to_physical();
        let sb = b.to_physical();
        for i in 0..g.len() {
            assert!((pa[i] - sa[i]).abs() < 1e-13);
            assert!((pb[i] - sb[i]).abs() < 1e-13);
        }
        let (fa, fb) = forward_pair(g, &pa, &pb);
        assert!((&fa - &a).max_abs_coeff() < 1e-14);
        assert!((&fb - &b).max_abs_coeff() < 1e-14);
    }

    #[test]
    fn set_mode_keeps_symmetry() {
        let g = Grid::unit(8).unwrap();
        let mut f = SpectralField::zeros(g);
        f.set_mode(1, -2, Complex64::new(0.3, 0.7)).unwrap();
        assert_eq!(f.coeff(-1, 2), Complex64::new(0.3, -0.7));
        assert_eq!(f.conjugate_symmetry_defect(), 0.0);
        assert!(f.set_mode(4, 0, Complex64::new(1.0, 0.0)).is_err());
    }

    #[test]
    fn zero_padding_preserves_samples() {
        let g = Grid::unit(8).unwrap();
        let f = SpectralField::from_fn(g, |x, y| (x + y).cos() + (3.0 * y).sin());
        let p = f.zero_padded(2).unwrap();
        let vals = p.to_physical();
        for (idx, v) in vals.iter().enumerate() {
            let (x, y) = p.grid().point(idx);
            assert!((v - ((x + y).cos() + (3.0 * y).sin())).abs() < 1e-12);
        }
        let back = p.truncated(g).unwrap();
        assert!((&back - &f).max_abs_coeff() < 1e-15);
    }
}
