use super::{DensityField, ExternalField, ParticleConfiguration};
use crate::error::{invalid, Error, Result};
use crate::geometry::kernel::kernel_unchecked;
use crate::geometry::{dist, dot, Domain};

/// Pairs closer than this are treated as coincident.
pub const COINCIDENCE_RADIUS: f64 = 1e-12;

/// N-body energy
/// `H = Σ_{i<j} cᵢcⱼ G(xᵢ,xⱼ) + ½ Σᵢ cᵢ² G*(xᵢ,xᵢ) + Σᵢ cᵢ F(xᵢ)`, with
/// `F = field_scale · f`. The self-energy term is present only on the disk.
///
/// Terms are summed in sorted order, so relabeling particles gives a
/// bit-identical result.
pub fn total_energy(config: &ParticleConfiguration, field: &ExternalField, field_scale: f64) -> Result<f64> {
    let domain = config.domain();
    let c = config.circulations();
    let n = config.len();
    let mut terms = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        let xi = config.position(i);
        for j in i + 1..n {
            let xj = config.position(j);
            let r = dist(xi, xj);
            if r < COINCIDENCE_RADIUS {
                return Err(Error::SingularPair(i, j));
            }
            terms.push(c[i] * c[j] * kernel_unchecked(&domain, xi, xj, r));
        }
        terms.push(one_body(&domain, xi, c[i], field, field_scale));
    }
    terms.sort_unstable_by(f64::total_cmp);
    Ok(terms.iter().sum())
}

#[inline]
fn one_body(domain: &Domain, x: &[f64], c: f64, field: &ExternalField, field_scale: f64) -> f64 {
    let own = match domain {
        Domain::Disk2d => 0.5 * c * c * (1.0 - dot(x, x)).ln(),
        _ => 0.0,
    };
    let ext = if field_scale != 0.0 { c * field_scale * field.value(x) } else { 0.0 };
    own + ext
}

/// `H(after) - H(before)` for moving particle `i` to `x_new`, in `O(N)`.
pub fn move_delta(
    config: &ParticleConfiguration,
    i: usize,
    x_new: &[f64],
    field: &ExternalField,
    field_scale: f64,
) -> Result<f64> {
    if i >= config.len() {
        return Err(invalid("i", format!("index {i} out of range for N = {}", config.len())));
    }
    let domain = config.domain();
    domain.check_point(x_new)?;
    let c = config.circulations();
    let x_old = config.position(i);
    let mut pair = 0.0;
    for j in 0..config.len() {
        if j == i {
            continue;
        }
        let xj = config.position(j);
        let r_new = dist(x_new, xj);
        if r_new < COINCIDENCE_RADIUS {
            return Err(Error::SingularPair(i, j));
        }
        let r_old = dist(x_old, xj);
        pair += c[j] * (kernel_unchecked(&domain, x_new, xj, r_new) - kernel_unchecked(&domain, x_old, xj, r_old));
    }
    Ok(c[i] * pair + one_body(&domain, x_new, c[i], field, field_scale)
        - one_body(&domain, x_old, c[i], field, field_scale))
}

/// `Ψ(xᵢ) = Σⱼ wⱼ G(xᵢ, xⱼ) ρⱼ` with the corrected diagonal.
pub fn potential(rho: &DensityField) -> Vec<f64> {
    rho.grid().operator().apply(rho.values())
}

/// `½ ∫∫ G ρ ρ + ∫ f ρ`.
pub fn meanfield_energy(rho: &DensityField, field: &ExternalField) -> f64 {
    let psi = potential(rho);
    energy_from_potential(rho, &psi, &field.values_on(rho.grid()))
}

pub(crate) fn energy_from_potential(rho: &DensityField, psi: &[f64], f: &[f64]) -> f64 {
    rho.grid()
        .weights()
        .iter()
        .zip(rho.values())
        .zip(psi.iter().zip(f))
        .map(|((w, r), (p, fi))| w * r * (0.5 * p + fi))
        .sum()
}

/// Two-species energy `½ ∫∫ G ω ω + ∫ f ω`, `ω = ρ⁺ - ρ⁻`.
pub fn meanfield_energy_pair(rho_plus: &DensityField, rho_minus: &DensityField, field: &ExternalField) -> Result<f64> {
    if !std::sync::Arc::ptr_eq(rho_plus.grid(), rho_minus.grid()) && rho_plus.grid().len() != rho_minus.grid().len() {
        return Err(invalid("rho_minus", "densities live on different grids"));
    }
    let grid = rho_plus.grid();
    let omega: Vec<f64> = rho_plus.values().iter().zip(rho_minus.values()).map(|(a, b)| a - b).collect();
    let psi = grid.operator().apply(&omega);
    let f = field.values_on(grid);
    Ok(grid
        .weights()
        .iter()
        .zip(&omega)
        .zip(psi.iter().zip(&f))
        .map(|((w, o), (p, fi))| w * o * (0.5 * p + fi))
        .sum())
}

/// Relative entropy `-Σ wᵢ ρᵢ ln(|Λ| ρᵢ)` with `0 ln 0 = 0`.
pub fn meanfield_entropy(rho: &DensityField) -> f64 {
    let vol = rho.grid().measure();
    rho.grid()
        .weights()
        .iter()
        .zip(rho.values())
        .map(|(w, &r)| if r > 0.0 { -w * r * (vol * r).ln() } else { 0.0 })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, rotate, rotation_matrix, sample_uniform};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{E, LN_2, PI};
    use std::sync::Arc;

    fn cfg(domain: Domain, pos: Vec<f64>, c: Vec<f64>) -> ParticleConfiguration {
        ParticleConfiguration::new(domain, pos, c).unwrap()
    }

    #[test]
    fn energy_examples() {
        let z = ExternalField::zero();
        let s = cfg(Domain::sphere(2), vec![0.0, 0.0, 1.0, 0.0, 0.0, -1.0], vec![1.0, 1.0]);
        assert_relative_eq!(total_energy(&s, &z, 1.0).unwrap(), -LN_2, epsilon = 1e-15);

        let p = cfg(Domain::Plane2d, vec![0.0, 0.0, E, 0.0], vec![1.0, -1.0]);
        assert_relative_eq!(total_energy(&p, &z, 1.0).unwrap(), 1.0, epsilon = 1e-15);

        let d = cfg(Domain::Disk2d, vec![0.0, 0.0], vec![1.0]);
        assert_eq!(total_energy(&d, &z, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn coincident_particles_are_singular() {
        let c = cfg(Domain::Disk2d, vec![0.1, 0.1, 0.1, 0.1], vec![1.0, 1.0]);
        assert_eq!(total_energy(&c, &ExternalField::zero(), 0.0), Err(Error::SingularPair(0, 1)));
        let c = cfg(Domain::Disk2d, vec![0.1, 0.1, 0.2, 0.1], vec![1.0, 1.0]);
        assert!(move_delta(&c, 0, &[0.2, 0.1], &ExternalField::zero(), 0.0).is_err());
        assert!(move_delta(&c, 2, &[0.0, 0.0], &ExternalField::zero(), 0.0).is_err());
    }

    #[test]
    fn move_examples() {
        let z = ExternalField::zero();
        let s = cfg(Domain::sphere(2), vec![0.0, 0.0, 1.0, 0.0, 0.0, -1.0], vec![1.0, 1.0]);
        assert_eq!(move_delta(&s, 1, &[0.0, 0.0, -1.0], &z, 1.0).unwrap(), 0.0);
        let d = move_delta(&s, 1, &[1.0, 0.0, 0.0], &z, 1.0).unwrap();
        assert_relative_eq!(d, 0.5 * LN_2, epsilon = 1e-15);
    }

    fn random_config(domain: Domain, n: usize, seed: u64, two_species: bool) -> ParticleConfiguration {
        let pos = sample_uniform(domain, n, seed).unwrap();
        let c = (0..n).map(|i| if two_species && i % 2 == 1 { -1.0 } else { 1.0 }).collect();
        cfg(domain, pos, c)
    }

    #[test]
    fn incremental_updates_match_full_recomputation() {
        let grid = build_grid(Domain::sphere(2), &[8, 16]).unwrap();
        let cases = [
            (Domain::sphere(2), ExternalField::two_antipodal_bumps(1.0, 5.0, &grid), 8.0, false),
            (Domain::Disk2d, ExternalField::zero(), 0.0, true),
            (Domain::sphere(3), ExternalField::zero(), 0.0, false),
        ];
        for (k, (domain, field, scale, two)) in cases.into_iter().enumerate() {
            let mut c = random_config(domain, 8, 100 + k as u64, two);
            let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
            let mut h = total_energy(&c, &field, scale).unwrap();
            for _ in 0..1000 {
                let i = rng.random_range(0..c.len());
                let x = crate::geometry::sampling::uniform_point(&domain, &mut rng).unwrap();
                let d = move_delta(&c, i, &x, &field, scale).unwrap();
                c = c.moved(i, &x).unwrap();
                let h_new = total_energy(&c, &field, scale).unwrap();
                assert!((d - (h_new - h)).abs() < 1e-9 * (1.0 + h_new.abs()));
                h = h_new;
            }
        }
    }

    #[test]
    fn rotation_invariance_on_sphere() {
        let c = random_config(Domain::sphere(2), 12, 5, false);
        let h = total_energy(&c, &ExternalField::zero(), 0.0).unwrap();
        let m = rotation_matrix([0.3, -0.5, 0.8], 1.1);
        let rot: Vec<f64> = c.positions().chunks_exact(3).flat_map(|x| rotate(&m, x)).collect();
        let r = cfg(Domain::sphere(2), rot, c.circulations().to_vec());
        let hr = total_energy(&r, &ExternalField::zero(), 0.0).unwrap();
        assert!((h - hr).abs() < 1e-10);
    }

    #[test]
    fn uniform_sphere_energy() {
        let eps_inf = (1.0 - 2.0 * LN_2) / 4.0;
        let g = Arc::new(build_grid(Domain::sphere(2), &[64, 128]).unwrap());
        let u = DensityField::uniform(g.clone());
        assert!((meanfield_energy(&u, &ExternalField::zero()) - eps_inf).abs() < 2e-4);
        let f = ExternalField::two_antipodal_bumps(1.0, 5.0, &g);
        assert!((meanfield_energy(&u, &f) - eps_inf).abs() < 2e-4);
        let psi = potential(&u);
        assert!(psi.iter().all(|p| (p - 2.0 * eps_inf).abs() < 1e-6));
    }

    #[test]
    fn double_sum_energy_converges_on_sphere() {
        // dense double sum with cell-averaged diagonal, independent of the spectral path
        let eps_inf = (1.0 - 2.0 * LN_2) / 4.0;
        let mut last = f64::INFINITY;
        for (nt, np) in [(8, 16), (16, 32), (32, 64)] {
            let g = build_grid(Domain::sphere(2), &[nt, np]).unwrap();
            let op = crate::geometry::KernelOperator::dense(&g);
            let rho = vec![1.0 / (4.0 * PI); g.len()];
            let psi = op.apply(&rho);
            let e: f64 = 0.5 * g.integrate(&psi.iter().zip(&rho).map(|(p, r)| p * r).collect::<Vec<_>>());
            let err = (e - eps_inf).abs();
            assert!(err < last, "error {err} did not decrease from {last}");
            last = err;
        }
        assert!(last < 5e-3);
    }

    #[test]
    fn entropy_examples() {
        let g = Arc::new(build_grid(Domain::sphere(2), &[32, 64]).unwrap());
        let u = DensityField::uniform(g.clone());
        assert!(meanfield_entropy(&u).abs() < 1e-12);
        // grid rings are symmetric about the equator, so the upper half carries exactly 2π
        let half = g.map_nodes(|x| if x[2] > 0.0 { 1.0 / (2.0 * PI) } else { 0.0 });
        let h = DensityField::new(g.clone(), half).unwrap();
        assert_relative_eq!(meanfield_entropy(&h), -LN_2, epsilon = 1e-12);
        let tilt = DensityField::normalized(g.clone(), g.map_nodes(|x| 1.0 + 0.1 * x[0])).unwrap();
        assert!(meanfield_entropy(&tilt) < 0.0);
    }

    #[test]
    fn potential_is_linear_and_peaks_at_concentration() {
        let g = Arc::new(build_grid(Domain::Disk2d, &[8, 16]).unwrap());
        let a = DensityField::normalized(g.clone(), g.map_nodes(|x| 1.0 + x[0])).unwrap();
        let b = DensityField::normalized(g.clone(), g.map_nodes(|x| (2.0 * x[1]).exp())).unwrap();
        let alpha = 0.3;
        let mix: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| alpha * x + (1.0 - alpha) * y).collect();
        let m = potential(&DensityField::new(g.clone(), mix).unwrap());
        let (pa, pb) = (potential(&a), potential(&b));
        for i in 0..g.len() {
            assert!((m[i] - (alpha * pa[i] + (1.0 - alpha) * pb[i])).abs() < 1e-12);
        }
        let k = 40;
        let mut spike = vec![0.0; g.len()];
        spike[k] = 1.0 / g.weights()[k];
        let ps = potential(&DensityField::new(g.clone(), spike).unwrap());
        let argmax = (0..g.len()).max_by(|&i, &j| ps[i].total_cmp(&ps[j])).unwrap();
        assert_eq!(argmax, k);
    }

    #[test]
    fn pair_energy_vanishes_for_equal_species() {
        let g = Arc::new(build_grid(Domain::Disk2d, &[8, 16]).unwrap());
        let r = DensityField::normalized(g.clone(), g.map_nodes(|x| 1.0 + x[0])).unwrap();
        assert_eq!(meanfield_energy_pair(&r, &r, &ExternalField::zero()).unwrap(), 0.0);
    }

    #[test]
    fn permutation_leaves_energy_unchanged() {
        let c = random_config(Domain::Disk2d, 9, 3, true);
        let h = total_energy(&c, &ExternalField::zero(), 0.0).unwrap();
        let p = c.permuted(&[4, 2, 8, 0, 1, 7, 6, 5, 3]).unwrap();
        let hp = total_energy(&p, &ExternalField::zero(), 0.0).unwrap();
        assert_eq!(h, hp);
    }
}
