mod common;

use std::collections::HashMap;

use num_complex::Complex64;
use sqg::condition::{ForcingPairs, SparseBackground};
use sqg::data::{build_a0, forcing_at, CosineMode, DataRecipe};
use sqg::evolution::{nonlinear_full, nonlinear_perturbation};
use sqg::inequalities::{kato_ponce_lhs, leibniz_commutator_lhs};
use sqg::norms::sobolev_norm;
use sqg::ops::DEFAULT_VELOCITY_EXPONENT;
use sqg::random::{random_field, Band};
use sqg::{Grid, SpectralField};

use common::{hm_norm_sq, modes, rel_diff, transport_sum};

const S: f64 = DEFAULT_VELOCITY_EXPONENT;

fn neg_without_mean(mut v: Vec<Complex64>) -> Vec<Complex64> {
    for c in v.iter_mut() {
        *c = -*c;
    }
    v[0] = Complex64::new(0.0, 0.0);
    v
}

#[test]
fn full_nonlinearity_matches_pair_sum() {
    let grid = Grid::new(32, 4.0 * std::f64::consts::PI).unwrap();
    for seed in 0..20 {
        let th = random_field(grid, Band::Retained, seed);
        let fast = nonlinear_full(&th).unwrap();
        let slow = neg_without_mean(transport_sum(&th, &th, S));
        let err = rel_diff(fast.coeffs(), &slow);
        assert!(err <= 1e-10, "seed {seed}: {err:e}");
    }
}

#[test]
fn perturbation_nonlinearity_matches_pair_sum() {
    let grid = Grid::new(32, 4.0 * std::f64::consts::PI).unwrap();
    let (mu, alpha, t) = (0.7, 0.3, 0.3);
    let bg_modes = vec![
        CosineMode {
            j1: 2,
            j2: 1,
            amplitude: 0.8,
        },
        CosineMode {
            j1: -1,
            j2: 3,
            amplitude: -0.5,
        },
        CosineMode {
            j1: 5,
            j2: 0,
            amplitude: 0.25,
        },
    ];
    let recipe = DataRecipe::with_modes(mu, alpha, bg_modes.clone());

    let mut theta = SpectralField::zeros(grid);
    for m in &bg_modes {
        let k = grid.dk() * ((m.j1 * m.j1 + m.j2 * m.j2) as f64).sqrt();
        let a = 0.5 * m.amplitude * (-mu * k.powf(2.0 * alpha) * t).exp();
        theta.set_mode(m.j1, m.j2, Complex64::new(a, 0.0)).unwrap();
        theta.set_mode(-m.j1, -m.j2, Complex64::new(a, 0.0)).unwrap();
    }

    for seed in 100..120 {
        let g = random_field(grid, Band::Retained, seed);
        let fast = nonlinear_perturbation(&g, &recipe, t).unwrap();
        let vg = transport_sum(&g, &g, S);
        let ug = transport_sum(&theta, &g, S);
        let vt = transport_sum(&g, &theta, S);
        let sum: Vec<Complex64> = (0..grid.len()).map(|i| vg[i] + ug[i] + vt[i]).collect();
        let err = rel_diff(fast.coeffs(), &neg_without_mean(sum));
        assert!(err <= 1e-10, "seed {seed}: {err:e}");
    }
}

/// `||U . grad Theta||_{H^3}` by summing every ordered mode pair, with no
/// grid involved in the product.
fn forcing_h3_direct(theta0: &SpectralField) -> f64 {
    let g = *theta0.grid();
    let i = Complex64::new(0.0, 1.0);
    let ms = modes(theta0);
    let mut out: HashMap<(i32, i32), Complex64> = HashMap::new();
    for &(ja, ka, ca) in &ms {
        let w = (ka.0 * ka.0 + ka.1 * ka.1).powf(S);
        let (u1, u2) = (i * ka.1 * w * ca, -i * ka.0 * w * ca);
        for &(jb, kb, cb) in &ms {
            *out.entry((ja.0 + jb.0, ja.1 + jb.1)).or_default() += u1 * i * kb.0 * cb + u2 * i * kb.1 * cb;
        }
    }
    let dk = g.dk();
    let mut total = 0.0;
    for ((j1, j2), c) in out {
        let (k1, k2) = (j1 as f64 * dk, j2 as f64 * dk);
        total += sqg::norms::multi_index_weight(k1, k2, 0, 3) * c.norm_sqr();
    }
    (total * g.area()).sqrt()
}

#[test]
fn forcing_pairs_match_direct_sum() {
    for (delta, n) in [(0.1, 256), (0.07, 256), (0.05, 512)] {
        let grid = Grid::with_spacing(n, delta / 6.0).unwrap();
        let recipe = DataRecipe::corollary(delta, 1.0, 0.25);
        let theta0 = build_a0(&recipe, &grid).unwrap();
        let pairs = ForcingPairs::new(&SparseBackground::new(&theta0, 1.0, 0.25, S));
        let fast = pairs.h3_norm(0.0);
        let slow = forcing_h3_direct(&theta0);
        assert!(slow > 0.0);
        assert!(
            (fast - slow).abs() <= 1e-10 * slow,
            "delta {delta}: {fast} vs {slow}"
        );
        assert!(pairs.h3_majorant(0.0) >= fast * (1.0 - 1e-12));
    }
}

#[test]
fn forcing_pairs_match_resolved_fft() {
    let delta = 0.1;
    let grid = Grid::with_spacing(576, delta / 6.0).unwrap();
    let recipe = DataRecipe::corollary(delta, 1.0, 0.25);
    let theta0 = build_a0(&recipe, &grid).unwrap();
    let pairs = ForcingPairs::new(&SparseBackground::new(&theta0, 1.0, 0.25, S));
    let t = 0.5;
    let fft = sobolev_norm(&forcing_at(&recipe, &grid, t).unwrap(), 3, 0.0);
    let fast = pairs.h3_norm(t);
    assert!((fast - fft).abs() <= 1e-10 * fft, "{fast} vs {fft}");
}

/// Coefficients of `h f` over all pairs, unrestricted.
fn convolve(h: &SpectralField, f: &SpectralField) -> HashMap<(i32, i32), Complex64> {
    let mut out = HashMap::new();
    for &(ja, _, ca) in &modes(h) {
        for &(jb, _, cb) in &modes(f) {
            *out.entry((ja.0 + jb.0, ja.1 + jb.1))
                .or_insert(Complex64::new(0.0, 0.0)) += ca * cb;
        }
    }
    out
}

fn symbol(j: (i32, i32), dk: f64, beta: (u32, u32)) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    (i * (j.0 as f64 * dk)).powu(beta.0) * (i * (j.1 as f64 * dk)).powu(beta.1)
}

fn d(f: &SpectralField, beta: (u32, u32)) -> SpectralField {
    let dk = f.grid().dk();
    let mut out = f.clone();
    let g = *f.grid();
    for (idx, c) in out.coeffs_mut().iter_mut().enumerate() {
        *c *= symbol(g.lattice(idx), dk, beta);
    }
    out
}

fn map_norm(m: &HashMap<(i32, i32), Complex64>, area: f64) -> f64 {
    (area * m.values().map(|c| c.norm_sqr()).sum::<f64>()).sqrt()
}

/// `||D^beta(h f) - a(h, f)||` with `a` the product of the two given fields.
fn commutator_norm(
    h: &SpectralField,
    f: &SpectralField,
    dh: &SpectralField,
    df: &SpectralField,
    beta: (u32, u32),
) -> f64 {
    let dk = h.grid().dk();
    let mut hf = convolve(h, f);
    for (j, c) in hf.iter_mut() {
        *c *= symbol(*j, dk, beta);
    }
    for (j, c) in convolve(dh, df) {
        *hf.entry(j).or_insert(Complex64::new(0.0, 0.0)) -= c;
    }
    map_norm(&hf, h.grid().area())
}

#[test]
fn commutators_match_direct_convolution() {
    let grid = Grid::new(16, 2.0 * std::f64::consts::PI * 1.5).unwrap();
    for seed in 0..4 {
        let h = random_field(grid, Band::Retained, 2 * seed);
        let f = random_field(grid, Band::Retained, 2 * seed + 1);
        let m = 3;
        let mut kp = 0.0;
        for order in 1..=m {
            for b1 in 0..=order {
                let beta = (b1, order - b1);
                kp += commutator_norm(&h, &f, &d(&h, beta), &f, beta);
            }
        }
        let mut lb = 0.0;
        for b1 in 0..=m {
            let beta = (b1, m - b1);
            lb += commutator_norm(&h, &f, &h, &d(&f, beta), beta);
        }
        let fast_kp = kato_ponce_lhs(&h, &f, m).unwrap();
        let fast_lb = leibniz_commutator_lhs(&h, &f, m).unwrap();
        assert!((fast_kp - kp).abs() <= 1e-10 * kp, "{fast_kp} vs {kp}");
        assert!((fast_lb - lb).abs() <= 1e-10 * lb, "{fast_lb} vs {lb}");
    }
}

#[test]
fn h3_weight_matches_written_out_sum() {
    let grid = Grid::new(32, 5.0).unwrap();
    let f = random_field(grid, Band::Retained, 9);
    let direct = hm_norm_sq(&grid, f.coeffs(), 3);
    let fast = sobolev_norm(&f, 3, 0.0).powi(2);
    assert!((direct - fast).abs() <= 1e-12 * direct);
}
