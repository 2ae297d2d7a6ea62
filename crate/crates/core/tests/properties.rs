use std::sync::Arc;

use curvgas::geometry::{kernel_log, rotate, rotation_matrix, sample_uniform, Coefficients};
use curvgas::hamiltonian::{meanfield_energy, meanfield_entropy, move_delta, potential, total_energy};
use curvgas::{build_grid, DensityField, Domain, ExternalField, ParticleConfiguration};
use proptest::prelude::*;
use rustfft::num_complex::Complex64;

fn config(domain: Domain, n: usize, seed: u64, signs: bool) -> ParticleConfiguration {
    let c = (0..n).map(|i| if signs && i % 2 == 1 { -1.0 } else { 1.0 }).collect();
    ParticleConfiguration::new(domain, sample_uniform(domain, n, seed).unwrap(), c).unwrap()
}

fn domains() -> impl Strategy<Value = Domain> {
    prop_oneof![Just(Domain::Disk2d), Just(Domain::sphere(2)), Just(Domain::sphere(3))]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_symmetric(domain in domains(), seed in 0u64..10_000) {
        let p = sample_uniform(domain, 2, seed).unwrap();
        let d = domain.ambient_dim();
        let (x, y) = p.split_at(d);
        prop_assert_eq!(kernel_log(&domain, x, y).unwrap(), kernel_log(&domain, y, x).unwrap());
    }

    #[test]
    fn energy_is_permutation_invariant(domain in domains(), seed in 0u64..10_000, n in 2usize..9, signs: bool, shift in 1usize..8) {
        let c = config(domain, n, seed, signs);
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let f = ExternalField::zero();
        prop_assert_eq!(total_energy(&c, &f, 0.0).unwrap(), total_energy(&c.permuted(&perm).unwrap(), &f, 0.0).unwrap());
    }

    #[test]
    fn sphere_energy_is_rotation_invariant(seed in 0u64..10_000, n in 2usize..9, angle in 0.0f64..std::f64::consts::TAU, ax in -1.0f64..1.0, ay in -1.0f64..1.0) {
        let c = config(Domain::sphere(2), n, seed, false);
        let norm = (ax * ax + ay * ay + 1.0).sqrt();
        let m = rotation_matrix([ax / norm, ay / norm, 1.0 / norm], angle);
        let rotated: Vec<f64> = c.positions().chunks_exact(3).flat_map(|x| rotate(&m, x)).collect();
        let r = ParticleConfiguration::new(Domain::sphere(2), rotated, c.circulations().to_vec()).unwrap();
        let f = ExternalField::zero();
        let (a, b) = (total_energy(&c, &f, 0.0).unwrap(), total_energy(&r, &f, 0.0).unwrap());
        prop_assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
    }

    #[test]
    fn move_delta_matches_full_energy(domain in domains(), seed in 0u64..10_000, n in 2usize..9, i in 0usize..8, scale in 0.0f64..3.0) {
        let c = config(domain, n, seed, true);
        let i = i % n;
        let f = ExternalField::two_antipodal_bumps(1.0, 4.0, &build_grid(Domain::sphere(2), &[6, 12]).unwrap());
        let f = if domain == Domain::sphere(2) { f } else { ExternalField::zero() };
        let y = sample_uniform(domain, 1, seed + 1).unwrap();
        let after = c.moved(i, &y).unwrap();
        let (Ok(h0), Ok(h1)) = (total_energy(&c, &f, scale), total_energy(&after, &f, scale)) else {
            return Ok(());
        };
        let dh = move_delta(&c, i, &y, &f, scale).unwrap();
        prop_assert!((dh - (h1 - h0)).abs() < 1e-9 * (1.0 + h0.abs() + h1.abs()));
    }

    #[test]
    fn densities_normalize_and_entropy_is_nonpositive(a in -0.02f64..0.02, b in -0.02f64..0.02, l in 1usize..6) {
        let g = Arc::new(build_grid(Domain::sphere(2), &[16, 32]).unwrap());
        let tr = g.transform().unwrap();
        let mut c = Coefficients::zeros(tr.lmax());
        c.set(0, 0, Complex64::new(1.0 / (4.0 * std::f64::consts::PI).sqrt(), 0.0));
        c.set(l, 0, Complex64::new(a, 0.0));
        c.set(l, 1, Complex64::new(b, a));
        let rho = DensityField::normalized(g.clone(), tr.synthesis(&c)).unwrap();
        prop_assert!((rho.mass() - 1.0).abs() < 1e-12);
        prop_assert!(meanfield_entropy(&rho) <= 1e-14);
        // The uniform density minimizes the flat-field energy.
        let uniform = DensityField::uniform(g.clone());
        let f = ExternalField::zero();
        prop_assert!(meanfield_energy(&rho, &f) >= meanfield_energy(&uniform, &f) - 1e-14);
        let psi = potential(&rho);
        prop_assert!(psi.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn spectral_round_trip(re in prop::collection::vec(-1.0f64..1.0, 10), l in 0usize..10) {
        let g = build_grid(Domain::sphere(2), &[12, 24]).unwrap();
        let tr = g.transform().unwrap();
        let mut c = Coefficients::zeros(tr.lmax());
        for (m, v) in re.iter().enumerate().take(l + 1) {
            let im = if m == 0 { 0.0 } else { 0.5 * v };
            c.set(l, m, Complex64::new(*v, im));
        }
        let values = tr.synthesis(&c);
        let back = tr.analysis(&values);
        for m in 0..=l {
            prop_assert!((back.get(l, m) - c.get(l, m)).norm() < 1e-10);
        }
    }
}
