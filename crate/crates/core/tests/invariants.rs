use num_complex::Complex64;
use sqg::condition::{corollary_bounds, evaluate_condition};
use sqg::data::Background;
use sqg::data::{
    background_at, build_a0, build_chi, forcing_at, DataRecipe, PerturbationSeed, VerificationParams,
};
use sqg::evolution::{nonlinear_full, nonlinear_perturbation, Mode, Scheme, SimParams, Simulation};
use sqg::norms::{l2_norm, sobolev_norm};
use sqg::ops::DEFAULT_VELOCITY_EXPONENT;
use sqg::random::{random_field, Band};
use sqg::{Grid, SpectralField};

fn corollary_grid(delta: f64) -> Grid {
    Grid::with_spacing(256, delta / 6.0).unwrap()
}

#[test]
fn background_semigroup() {
    let grid = corollary_grid(0.1);
    let theta0 = build_a0(&DataRecipe::corollary(0.1, 1.0, 0.25), &grid).unwrap();
    for (t1, t2) in [(0.0, 0.7), (0.3, 0.45), (1.5, 2.25)] {
        let two = background_at(&background_at(&theta0, 1.0, 0.25, t1).unwrap(), 1.0, 0.25, t2).unwrap();
        let one = background_at(&theta0, 1.0, 0.25, t1 + t2).unwrap();
        for (a, b) in two.coeffs().iter().zip(one.coeffs()) {
            // exp(-r t1) exp(-r t2) and exp(-r (t1 + t2)) differ by rounding only
            assert!((a - b).norm() <= 4.0 * f64::EPSILON * b.norm(), "{a} vs {b}");
        }
    }
    assert_eq!(background_at(&theta0, 1.0, 0.25, 0.0).unwrap(), theta0);
    assert!(background_at(&theta0, 1.0, 0.25, -1.0).is_err());
}

#[test]
fn forcing_norm_never_increases() {
    let grid = corollary_grid(0.1);
    let recipe = DataRecipe::corollary(0.1, 1.0, 0.25);
    let mut last = f64::INFINITY;
    for i in 0..12 {
        let t = 0.25 * i as f64;
        let v = sobolev_norm(&forcing_at(&recipe, &grid, t).unwrap(), 3, 0.0);
        assert!(v <= last * (1.0 + 1e-12), "t = {t}: {v} > {last}");
        last = v;
    }
}

#[test]
fn condition_grows_with_perturbation_energy() {
    let grid = corollary_grid(0.1);
    let vp = VerificationParams::default();
    let mut last = 0.0;
    for target in [0.0, 1e-4, 1e-3, 1e-2, 5e-2] {
        let seed = PerturbationSeed::RandomBand {
            target_h3_sq: target,
            k_max: 0.8,
            seed: 1,
        };
        let recipe = DataRecipe::corollary(0.1, 1.0, 0.25).with_g0(seed);
        let lhs = evaluate_condition(&recipe, &grid, &vp).unwrap().lhs;
        assert!(lhs >= last, "{target}: {lhs} < {last}");
        last = lhs;
    }
}

#[test]
fn bounds_are_homogeneous_in_amplitude() {
    let grid = corollary_grid(0.05);
    let base = DataRecipe::corollary(0.05, 1.0, 0.25);
    let doubled = DataRecipe {
        amplitude: Some(2.0 * base.amplitude_value()),
        ..base.clone()
    };
    let a = corollary_bounds(&base, &grid).unwrap();
    let b = corollary_bounds(&doubled, &grid).unwrap();
    for (x, y) in a.bounds.iter().zip(&b.bounds) {
        assert_eq!(x.name, y.name);
        assert_eq!(y.computed, 2.0 * x.computed, "{}", x.name);
    }
    let l1 = a.bounds.iter().find(|c| c.name == "l1_hat_a0").unwrap().computed;
    let ratio = l1 / a.strip_area_heuristic;
    assert!(ratio > 0.1 && ratio < 10.0, "{ratio}");
}

#[test]
fn chi_is_a_real_cutoff() {
    let grid = corollary_grid(0.1);
    let chi = build_chi(&DataRecipe::corollary(0.1, 1.0, 0.25), &grid).unwrap();
    for c in chi.coeffs() {
        // coefficient times area is the continuum symbol
        let s = c * grid.area();
        assert!(s.re >= -1e-12 && s.re <= 1.0 + 1e-12, "{s}");
    }
    assert!(chi.conjugate_symmetry_defect() <= 1e-12 * chi.max_abs_coeff());
}

#[test]
fn transport_preserves_energy() {
    let grid = Grid::new(32, 7.0).unwrap();
    for seed in 0..5 {
        let th = random_field(grid, Band::Retained, seed);
        let n = nonlinear_full(&th).unwrap();
        let inner: f64 = n
            .coeffs()
            .iter()
            .zip(th.coeffs())
            .map(|(a, b)| (a * b.conj()).re)
            .sum();
        let scale: f64 = l2_norm(&n) * l2_norm(&th) / grid.area();
        assert!(inner.abs() <= 1e-10 * scale, "{inner} vs {scale}");
    }
}

#[test]
fn zero_background_reduces_to_full_nonlinearity() {
    let grid = Grid::new(32, 7.0).unwrap();
    let recipe = DataRecipe::with_modes(1.0, 0.25, vec![]);
    let g = random_field(grid, Band::Retained, 4);
    assert_eq!(
        nonlinear_perturbation(&g, &recipe, 0.5).unwrap(),
        nonlinear_full(&g).unwrap()
    );
    let z = SpectralField::zeros(grid);
    assert!(nonlinear_perturbation(&z, &recipe, 0.5).unwrap().is_zero());
}

#[test]
fn etdrk4_is_fourth_order() {
    let grid = Grid::unit(16).unwrap();
    let mut th = SpectralField::zeros(grid);
    th.add_cosine(1, 2, 0.4).unwrap();
    th.add_cosine(3, -1, 0.3).unwrap();
    let bg = Background::new(SpectralField::zeros(grid), 0.5, 0.3, DEFAULT_VELOCITY_EXPONENT);
    let go = |dt: f64| {
        let mut p = SimParams::new(0.5, 0.3);
        p.mode = Mode::FullTheta;
        p.scheme = Scheme::Etdrk4;
        p.t_end = 1.0;
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
    let reference = go(1.0 / 640.0);
    let e1 = l2_norm(&(&go(0.1) - &reference));
    let e2 = l2_norm(&(&go(0.05) - &reference));
    let ratio = e1 / e2;
    assert!(ratio > 12.0 && ratio < 20.0, "{ratio}");
    assert!(reference.coeff(0, 0) == Complex64::new(0.0, 0.0));
}
