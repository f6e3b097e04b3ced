use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SqgError};

/// Square periodic box sampled by `n x n` points, together with its
/// wavenumber lattice.
///
/// Storage order is row-major with the first axis as the row. Along each
/// axis slot `i` holds lattice index `j = i` for `i < n/2` and `j = i - n`
/// otherwise, i.e. the usual DFT ordering, so representable wavenumbers are
/// `j * dk` with `j` in `[-n/2, n/2 - 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    box_len: f64,
}

impl Grid {
    pub fn new(n: usize, box_len: f64) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(SqgError::InvalidGrid(format!(
                "n must be an even integer >= 8, got {n}"
            )));
        }
        if !(box_len.is_finite() && box_len > 0.0) {
            return Err(SqgError::InvalidGrid(format!(
                "box length must be positive and finite, got {box_len}"
            )));
        }
        Ok(Grid { n, box_len })
    }

    /// Grid on the `[0, 2 pi)^2` box, where `dk = 1`.
    pub fn unit(n: usize) -> Result<Self> {
        Grid::new(n, 2.0 * PI)
    }

    /// Grid whose lattice spacing is exactly `dk`.
    pub fn with_spacing(n: usize, dk: f64) -> Result<Self> {
        Grid::new(n, 2.0 * PI / dk)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn box_len(&self) -> f64 {
        self.box_len
    }

    #[inline]
    pub fn dk(&self) -> f64 {
        2.0 * PI / self.box_len
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.box_len / self.n as f64
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.box_len * self.box_len
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lattice index of storage slot `i` along one axis.
    #[inline]
    pub fn lattice_of_slot(&self, i: usize) -> i32 {
        if i < self.n / 2 {
            i as i32
        } else {
            i as i32 - self.n as i32
        }
    }

    /// Storage slot of lattice index `j`, if representable.
    #[inline]
    pub fn slot_of_lattice(&self, j: i32) -> Option<usize> {
        let half = (self.n / 2) as i32;
        if j < -half || j >= half {
            None
        } else if j >= 0 {
            Some(j as usize)
        } else {
            Some((j + self.n as i32) as usize)
        }
    }

    /// Flat storage index of the lattice point `(j1, j2)`.
    pub fn index(&self, j1: i32, j2: i32) -> Option<usize> {
        Some(self.slot_of_lattice(j1)? * self.n + self.slot_of_lattice(j2)?)
    }

    #[inline]
    pub fn lattice(&self, idx: usize) -> (i32, i32) {
        (
            self.lattice_of_slot(idx / self.n),
            self.lattice_of_slot(idx % self.n),
        )
    }

    #[inline]
    pub fn wavevector(&self, idx: usize) -> (f64, f64) {
        let (j1, j2) = self.lattice(idx);
        let dk = self.dk();
        (j1 as f64 * dk, j2 as f64 * dk)
    }

    /// Flat index of `-k` under periodic wrapping.
    #[inline]
    pub fn neg_index(&self, idx: usize) -> usize {
        let n = self.n;
        let (i1, i2) = (idx / n, idx % n);
        ((n - i1) % n) * n + (n - i2) % n
    }

    /// Physical coordinates of sample `idx`.
    #[inline]
    pub fn point(&self, idx: usize) -> (f64, f64) {
        let dx = self.dx();
        ((idx / self.n) as f64 * dx, (idx % self.n) as f64 * dx)
    }

    /// Wavenumbers along one axis in storage order.
    pub fn axis_wavenumbers(&self) -> Vec<f64> {
        let dk = self.dk();
        (0..self.n).map(|i| self.lattice_of_slot(i) as f64 * dk).collect()
    }

    /// Largest retained lattice index under the 2/3 rule.
    #[inline]
    pub fn dealias_cutoff(&self) -> i32 {
        (self.n / 3) as i32
    }

    #[inline]
    pub fn is_retained(&self, j1: i32, j2: i32) -> bool {
        let c = self.dealias_cutoff();
        j1.abs() <= c && j2.abs() <= c
    }

    /// Sufficient condition for the annulus `4/3 <= |k| <= 3/2` to hold a
    /// lattice point.
    pub fn annulus_resolvable(&self) -> bool {
        self.dk() <= 1.0 / 12.0
    }

    /// Exact count of lattice points with `inner <= |k| <= outer`.
    pub fn lattice_points_in_annulus(&self, inner: f64, outer: f64) -> usize {
        (0..self.len())
            .filter(|&idx| {
                let (k1, k2) = self.wavevector(idx);
                let r = k1.hypot(k2);
                r >= inner && r <= outer
            })
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::new(6, 1.0).is_err());
        assert!(Grid::new(9, 1.0).is_err());
        assert!(Grid::new(8, 0.0).is_err());
        assert!(Grid::new(8, f64::NAN).is_err());
        assert!(Grid::new(8, 1.0).is_ok());
    }

    #[test]
    fn slot_lattice_round_trip() {
        let g = Grid::unit(16).unwrap();
        for i in 0..16 {
            let j = g.lattice_of_slot(i);
            assert!((-8..8).contains(&j));
            assert_eq!(g.slot_of_lattice(j), Some(i));
        }
        assert_eq!(g.slot_of_lattice(8), None);
        assert_eq!(g.slot_of_lattice(-9), None);
    }

    #[test]
    fn negation_is_involutive() {
        let g = Grid::unit(12).unwrap();
        for idx in 0..g.len() {
            assert_eq!(g.neg_index(g.neg_index(idx)), idx);
            let (j1, j2) = g.lattice(idx);
            let (m1, m2) = g.lattice(g.neg_index(idx));
            if j1 != -6 {
                assert_eq!(m1, -j1);
            }
            if j2 != -6 {
                assert_eq!(m2, -j2);
            }
        }
    }

    #[test]
    fn annulus_predicate_matches_count() {
        let fine = Grid::with_spacing(64, 1.0 / 12.0).unwrap();
        assert!(fine.annulus_resolvable());
        assert!(fine.lattice_points_in_annulus(4.0 / 3.0, 1.5) > 0);
        let coarse = Grid::with_spacing(16, 1.0).unwrap();
        assert!(!coarse.annulus_resolvable());
    }
}
