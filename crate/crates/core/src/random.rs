//! Seed-reproducible random band-limited fields.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::field::SpectralField;
use crate::grid::Grid;

/// Spectral support of a random trial field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Band {
    /// The whole 2/3-rule retained block.
    Retained,
    /// Retained modes with `|k| <= k_max`.
    Disc(f64),
    /// Retained modes with `inner <= |k| <= outer`.
    Annulus(f64, f64),
}

impl Band {
    fn contains(&self, k: f64) -> bool {
        match *self {
            Band::Retained => true,
            Band::Disc(r) => k <= r,
            Band::Annulus(a, b) => k >= a && k <= b,
        }
    }
}

/// I.i.d. complex Gaussian coefficients on `band`, conjugate-symmetrized and
/// mean-free.
pub fn random_field(grid: Grid, band: Band, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut f = SpectralField::zeros(grid);
    for idx in 0..grid.len() {
        let (j1, j2) = grid.lattice(idx);
        let (k1, k2) = grid.wavevector(idx);
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        if grid.is_retained(j1, j2) && band.contains(k1.hypot(k2)) {
            f.coeffs_mut()[idx] = Complex64::new(re, im);
        }
    }
    f.symmetrize();
    f.remove_mean();
    f
}
