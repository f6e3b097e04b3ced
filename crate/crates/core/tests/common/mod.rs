//! Direct-summation oracles shared by the integration tests.
#![allow(dead_code)]

use num_complex::Complex64;
use sqg::{Grid, SpectralField};

/// Lattice index, wavevector and coefficient of one mode.
pub type Mode = ((i32, i32), (f64, f64), Complex64);

/// Nonzero coefficients.
pub fn modes(f: &SpectralField) -> Vec<Mode> {
    let g = *f.grid();
    let dk = g.dk();
    let half = g.n() as i32 / 2;
    let mut out = Vec::new();
    for j1 in -half..half {
        for j2 in -half..half {
            let c = f.coeff(j1, j2);
            if c != Complex64::new(0.0, 0.0) {
                out.push(((j1, j2), (j1 as f64 * dk, j2 as f64 * dk), c));
            }
        }
    }
    out
}

fn radial(k: (f64, f64), s: f64) -> f64 {
    let r2 = k.0 * k.0 + k.1 * k.1;
    if r2 == 0.0 {
        0.0
    } else {
        r2.powf(s)
    }
}

/// Coefficients of `u . grad b` with `u = grad_perp (-Laplacian)^s a`, by a
/// sum over all mode pairs, kept on `|j| <= n/3` (everything else is zero).
pub fn transport_sum(a: &SpectralField, b: &SpectralField, s: f64) -> Vec<Complex64> {
    let g = *a.grid();
    let i = Complex64::new(0.0, 1.0);
    let mut out = vec![Complex64::new(0.0, 0.0); g.len()];
    let ma = modes(a);
    let mb = modes(b);
    for &(ja, ka, ca) in &ma {
        let w = radial(ka, s);
        let u1 = i * ka.1 * w * ca;
        let u2 = -i * ka.0 * w * ca;
        for &(jb, kb, cb) in &mb {
            let q = (ja.0 + jb.0, ja.1 + jb.1);
            if !g.is_retained(q.0, q.1) {
                continue;
            }
            let idx = g.index(q.0, q.1).unwrap();
            out[idx] += u1 * i * kb.0 * cb + u2 * i * kb.1 * cb;
        }
    }
    out
}

pub fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// `max |a - b| / max |b|`.
pub fn rel_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    let d = a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
    d / max_abs(b).max(f64::MIN_POSITIVE)
}

/// `sum_k w(k) |c_k|^2 * area` with `w` the `H^m` weight written out term by
/// term.
pub fn hm_norm_sq(g: &Grid, c: &[Complex64], m: u32) -> f64 {
    let mut total = 0.0;
    for (idx, v) in c.iter().enumerate() {
        let (k1, k2) = g.wavevector(idx);
        let mut w = 0.0;
        for order in 0..=m {
            for b1 in 0..=order {
                w += k1.powi(2 * b1 as i32) * k2.powi(2 * (order - b1) as i32);
            }
        }
        total += w * v.norm_sqr();
    }
    total * g.area()
}
