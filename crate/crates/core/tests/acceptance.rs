//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the binary exits nonzero if any criterion fails.

use std::f64::consts::{LN_2, PI};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use curvgas::conformal::{
    critical_total_curvature, kappa_beta_consistency, kazdan_warner_check, paneitz_apply, paneitz_multipliers,
    radial_liouville_solve, scan_beta_target, CurvatureSpec, KazdanWarnerVerdict, RadialCurvature, RadialMode,
    RadialOptions,
};
use curvgas::geometry::Coefficients;
use curvgas::hamiltonian::potential;
use curvgas::meanfield::{
    caloric_curve, epsilon_infinity, solve_microcanonical, solve_microcanonical_penalized, solve_two_species,
    SolverOptions, TwoSpeciesTarget,
};
use curvgas::sampler::{
    empirical_density, lln_observable, mcmc_run_with, wang_landau, EnsembleKind, EnsembleSpec, McmcOptions,
    SpeciesFilter, SystemSpec, WangLandauOptions,
};
use curvgas::{build_grid, DensityField, Domain, Error, ExternalField, QuadratureGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

type Check = Result<String, String>;

fn sphere(n_theta: usize) -> Arc<QuadratureGrid> {
    Arc::new(build_grid(Domain::sphere(2), &[n_theta, 2 * n_theta]).unwrap())
}

fn disk(n_r: usize) -> Arc<QuadratureGrid> {
    Arc::new(build_grid(Domain::Disk2d, &[n_r, 2 * n_r]).unwrap())
}

fn two_bumps(g: &QuadratureGrid) -> ExternalField {
    ExternalField::two_antipodal_bumps(1.0, 5.0, g)
}

fn require(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

fn exact_liouville() -> Check {
    let k = RadialCurvature::Constant { value: 1.0 };
    let mut worst = 0.0f64;
    let mut worst_kappa = 0.0f64;
    for lambda in [0.5f64, 1.0, 2.0] {
        let u0 = (2.0 / lambda).ln();
        let sol = radial_liouville_solve(&k, RadialMode::Shoot { u0 }, &RadialOptions::default()).map_err(err)?;
        require(!sol.blow_up, format!("blow-up flagged for lambda = {lambda}"))?;
        let dev = sol
            .r
            .iter()
            .zip(&sol.u)
            .map(|(r, u)| (u - (2.0 * lambda / (lambda * lambda + r * r)).ln()).abs())
            .fold(0.0, f64::max);
        worst = worst.max(dev);
        worst_kappa = worst_kappa.max((sol.kappa - 4.0 * PI).abs());
    }
    require(worst < 1e-6, format!("sup error {worst:.2e}"))?;
    require(worst_kappa < 1e-3, format!("|kappa - 4pi| = {worst_kappa:.2e}"))?;
    Ok(format!("sup error {worst:.1e}, |kappa - 4pi| <= {worst_kappa:.1e}"))
}

fn kappa_beta() -> Check {
    let k = RadialCurvature::CompactBump {
        amplitude: 1.0,
        radius: 1.0,
    };
    let mut worst = 0.0f64;
    for beta in [-0.05, -1.0, -2.0, -3.0] {
        let rep = kappa_beta_consistency(&k, beta, 4000).map_err(err)?;
        let rel = (rep.kappa_ode + beta * PI).abs() / (beta * PI).abs();
        require(rel < 0.01, format!("beta = {beta}: relative error {rel:.2e}"))?;
        worst = worst.max(rel);
    }
    Ok(format!("max |kappa + beta pi|/|beta pi| = {worst:.1e}"))
}

fn negative_curvature() -> Check {
    let k = RadialCurvature::Constant { value: -1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut radii = Vec::new();
    for _ in 0..20 {
        let u0 = rng.random_range(-5.0..5.0);
        let sol = radial_liouville_solve(&k, RadialMode::Shoot { u0 }, &RadialOptions::default()).map_err(err)?;
        require(sol.blow_up, format!("u0 = {u0}: no blow-up"))?;
        radii.push(sol.blow_up_radius.unwrap_or(f64::NAN));
    }
    let max_r = radii.iter().cloned().fold(0.0, f64::max);
    Ok(format!("20/20 blow up, largest blow-up radius {max_r:.3}"))
}

fn microcanonical() -> Check {
    let g = sphere(32);
    let opts = SolverOptions::default();
    let flat = ExternalField::zero();
    let e_inf = epsilon_infinity(&flat, &g);
    let exact = (1.0 - 2.0 * LN_2) / 4.0;
    require((e_inf - exact).abs() < 2e-4, format!("eps_inf = {e_inf}, expected {exact}"))?;
    let sol = solve_microcanonical(e_inf, &flat, &g, &opts).map_err(err)?;
    let dev = sol.rho.values().iter().map(|v| (v - 1.0 / (4.0 * PI)).abs()).fold(0.0, f64::max);
    require(dev < 1e-8 && sol.entropy.abs() < 1e-10 && sol.beta.abs() < 1e-8, "flat field not uniform at eps_inf")?;

    let f = two_bumps(&g);
    let e_inf = epsilon_infinity(&f, &g);
    match solve_microcanonical(e_inf - 1.0, &f, &g, &opts) {
        Err(Error::Infeasible { .. }) => {}
        other => return Err(format!("below ground state: expected infeasibility, got {other:?}")),
    }
    let h = 0.01;
    let eps: Vec<f64> = (-3..=6).map(|k| e_inf + h * k as f64).collect();
    let curve = caloric_curve(&f, &eps, &g, &opts).map_err(err)?;
    require(curve.failures.is_empty(), format!("caloric failures: {:?}", curve.failures))?;
    let p = &curve.points;
    let i0 = p.iter().position(|q| (q.eps - e_inf).abs() < 1e-9).ok_or("eps_inf not on the curve")?;
    // Centered differences carry an O(h |s''|) error; s'' is bounded by the
    // solver's beta increments.
    let s2 = p.windows(2).map(|w| ((w[1].beta_solver - w[0].beta_solver) / (w[1].eps - w[0].eps)).abs());
    let fd_tol = h * s2.fold(0.0, f64::max);
    require(p[i0].beta_solver.abs() < 1e-8, format!("beta_solver(eps_inf) = {}", p[i0].beta_solver))?;
    require(
        p[i0].beta_fd.abs() <= fd_tol,
        format!("beta_fd(eps_inf) = {} exceeds {fd_tol}", p[i0].beta_fd),
    )?;
    for q in &p[i0 + 1..] {
        require(
            q.beta_solver < 0.0 && q.beta_fd < 0.0,
            format!("beta >= 0 at eps - eps_inf = {}", q.eps - e_inf),
        )?;
    }
    Ok(format!(
        "eps_inf = {e_inf:.6}, beta_fd(eps_inf) = {:.2e} (tol {fd_tol:.2e}), beta < 0 on {} points above",
        p[i0].beta_fd,
        p.len() - i0 - 1
    ))
}

fn nirenberg() -> Check {
    let mut l2 = Vec::new();
    let mut summary = Vec::new();
    for n_theta in [64, 96] {
        let g = sphere(n_theta);
        let f = two_bumps(&g);
        let e_inf = epsilon_infinity(&f, &g);
        let eps: Vec<f64> = [1.5, 1.9, 2.1, 2.3, 2.5].iter().map(|d| e_inf + d).collect();
        let rep = scan_beta_target(&f, &eps, &g, &SolverOptions::default()).map_err(err)?;
        let res = rep
            .result
            .ok_or(format!("{n_theta}: no crossing, beta in [{:?}, {:?}]", rep.beta_min, rep.beta_max))?;
        let r = res.residual.ok_or("no residual")?;
        require((res.beta + 4.0).abs() < 1e-3, format!("beta(eps*) = {}", res.beta))?;
        require(
            (res.gauss_bonnet - 4.0 * PI).abs() < 1e-6,
            format!("Gauss-Bonnet {}", res.gauss_bonnet),
        )?;
        summary.push(format!("{}x{}: eps*-eps_inf {:.4}, L2 {:.2e}", n_theta, 2 * n_theta, res.eps_star - e_inf, r.l2));
        l2.push(r.l2);
    }
    require(l2[0] < 1e-3, format!("L2 residual {:.2e} at 64x128", l2[0]))?;
    require(l2[1] < l2[0], format!("residual not decreasing: {:.3e} -> {:.3e}", l2[0], l2[1]))?;
    Ok(summary.join("; "))
}

fn paneitz() -> Check {
    let table = paneitz_multipliers(2, 40).map_err(err)?;
    for (l, m) in table.iter().enumerate() {
        require(*m == (l * (l + 1)) as f64, format!("multiplier at l = {l} is {m}"))?;
    }
    let c4 = critical_total_curvature(4);
    require((c4 - 16.0 * PI * PI).abs() < 1e-10, format!("(n-1)!|S^4| = {c4}"))?;
    let g = sphere(32);
    let tr = g.transform().unwrap();
    let mut c = Coefficients::zeros(tr.lmax());
    c.set(0, 0, Complex64::new(1.0 / (4.0 * PI).sqrt(), 0.0));
    c.set(2, 1, Complex64::new(0.03, -0.02));
    c.set(5, 3, Complex64::new(0.01, 0.02));
    c.set(9, 0, Complex64::new(0.04, 0.0));
    let rho = DensityField::new(g.clone(), tr.synthesis(&c)).map_err(err)?;
    let lhs = paneitz_apply(&potential(&rho), &g, 2).map_err(err)?;
    let sq: Vec<f64> = lhs
        .iter()
        .zip(rho.values())
        .map(|(l, r)| (l - (2.0 * PI * r - 0.5)).powi(2))
        .collect();
    let e = g.integrate(&sq).sqrt();
    require(e < 1e-6, format!("kernel identity L2 error {e:.2e}"))?;
    Ok(format!("table exact to l = 40, 16pi^2 ok, kernel identity L2 {e:.1e}"))
}

fn lln() -> Check {
    let g = sphere(16);
    let f = two_bumps(&g);
    let sigma = 0.1;
    let eps = epsilon_infinity(&f, &g) - 0.03;
    let mf = solve_microcanonical_penalized(eps, sigma, &f, &g, &SolverOptions::default()).map_err(err)?;
    require(mf.converged, "mean-field maximizer did not converge")?;
    let fine = sphere(48);
    let f_fine = two_bumps(&fine);
    let mf_fine = solve_microcanonical_penalized(eps, sigma, &f_fine, &fine, &SolverOptions::default()).map_err(err)?;
    let obs: [(&str, fn(&[f64]) -> f64); 3] = [
        ("x3^2", |x| x[2] * x[2]),
        ("x3^4", |x| x[2].powi(4)),
        ("x1^2", |x| x[0] * x[0]),
    ];
    let mut l1 = Vec::new();
    let mut z = Vec::new();
    for n in [16usize, 32, 64] {
        let spec = EnsembleSpec::new(
            EnsembleKind::MicrocanonicalRegularized { eps, sigma },
            SystemSpec::single_species(Domain::sphere(2), n, f.clone()).map_err(err)?,
        )
        .map_err(err)?;
        let opts = McmcOptions::new(40_000, 10, 17 + n as u64, 0.3);
        let chain = mcmc_run_with(&spec, &opts).map_err(err)?;
        l1.push(empirical_density(&chain, &g, SpeciesFilter::All).map_err(err)?.l1_distance(&mf.rho));
        if n == 64 {
            for (name, o) in obs {
                let (mean, se) = lln_observable(&chain, o, SpeciesFilter::All).map_err(err)?;
                let target = mf_fine.rho.expectation(o);
                z.push((name, (mean - target) / se));
            }
        }
    }
    require(l1.windows(2).all(|w| w[1] < w[0]), format!("L1 not decreasing: {l1:?}"))?;
    for (name, zi) in &z {
        require(zi.abs() < 3.0, format!("{name}: {zi:.2} standard errors at N = 64"))?;
    }
    Ok(format!(
        "L1 {:.3} > {:.3} > {:.3}; z at N=64: {}",
        l1[0],
        l1[1],
        l1[2],
        z.iter().map(|(n, v)| format!("{n} {v:+.2}")).collect::<Vec<_>>().join(", ")
    ))
}

/// `S(E)` per bin for two unit vortices in the disk, by a product rule in
/// `(r₁, r₂, θ)` with radii clustered at the boundary via `r = 1 - e^{-t}`.
fn two_vortex_entropy(lo: f64, width: f64, bins: usize) -> Vec<f64> {
    let (nr, nt, t_max) = (700, 400, 14.0);
    let dt = t_max / nr as f64;
    let radii: Vec<(f64, f64)> = (0..nr)
        .map(|i| {
            let t = (i as f64 + 0.5) * dt;
            (-(-t).exp_m1(), (-t).exp() * dt)
        })
        .collect();
    let dth = 2.0 * PI / nt as f64;
    let cos: Vec<f64> = (0..nt).map(|k| ((k as f64 + 0.5) * dth).cos()).collect();
    let mut mass = vec![0.0; bins];
    for (i, &(r1, w1)) in radii.iter().enumerate() {
        for &(r2, w2) in &radii[..=i] {
            // r₁ ↔ r₂ symmetry; the θ integral of x₁ contributes 2π, |Λ|² = π².
            let sym = if r2 < r1 { 2.0 } else { 1.0 };
            let w = sym * r1 * w1 * r2 * w2 * dth * 2.0 / PI;
            let own = 0.5 * ((1.0 - r1 * r1) * (1.0 - r2 * r2)).ln();
            for &c in &cos {
                let p = r1 * r2 * c;
                let g = 0.5 * (1.0 - 2.0 * p + r1 * r1 * r2 * r2).ln() - 0.5 * (r1 * r1 + r2 * r2 - 2.0 * p).ln();
                let b = ((g + own - lo) / width).floor();
                if b >= 0.0 && (b as usize) < bins {
                    mass[b as usize] += w;
                }
            }
        }
    }
    mass.iter().map(|m| (m / width).ln()).collect()
}

fn onsager() -> Check {
    let opts = |seed| WangLandauOptions {
        bins: 30,
        seed,
        ..WangLandauOptions::default()
    };
    let single = SystemSpec::single_species(Domain::Disk2d, 8, ExternalField::zero()).map_err(err)?;
    let r8 = wang_landau(&single, &opts(1)).map_err(err)?;
    let m = r8.e_max_index;
    require(m > 0 && m + 1 < r8.bins(), format!("E_m at window edge (bin {m})"))?;
    let positive: Vec<usize> = (m + 1..r8.bins()).filter(|&i| r8.beta[i] >= 0.0).collect();
    require(positive.is_empty(), format!("beta >= 0 above E_m at bins {positive:?}"))?;

    let pair = SystemSpec::single_species(Domain::Disk2d, 2, ExternalField::zero()).map_err(err)?;
    let r2 = wang_landau(&pair, &opts(2)).map_err(err)?;
    let exact = two_vortex_entropy(r2.window.0, r2.bin_width, r2.bins());
    let shift = exact.iter().zip(&r2.entropy).map(|(a, b)| a - b).sum::<f64>() / r2.bins() as f64;
    let dos_err = exact
        .iter()
        .zip(&r2.entropy)
        .map(|(a, b)| (a - b - shift).abs())
        .fold(0.0, f64::max);
    require(dos_err < 0.05, format!("N = 2 DOS deviates by {dos_err:.3}"))?;

    let mut c = Vec::new();
    for n in [8usize, 16] {
        let sys = SystemSpec::neutral_pair(Domain::Disk2d, n).map_err(err)?;
        let r = wang_landau(&sys, &opts(3 + n as u64)).map_err(err)?;
        c.push(r.e_max / (n as f64 * (n as f64).ln()));
    }
    let ratio = c[0] / c[1];
    require(
        ratio > 0.5 && ratio < 2.0,
        format!("E_m/(N ln N) = {:.4} vs {:.4}", c[0], c[1]),
    )?;
    Ok(format!(
        "N=8 E_m = {:.3} (bin {m}/{}), N=2 max dev {dos_err:.3}, E_m/(N ln N) {:.4} / {:.4}",
        r8.e_max,
        r8.bins(),
        c[0],
        c[1]
    ))
}

fn two_species() -> Check {
    let g = disk(16);
    let opts = SolverOptions::default();
    let zero = solve_two_species(TwoSpeciesTarget::Energy(0.0), &g, &opts).map_err(err)?;
    let minus = zero.rho_minus.as_ref().ok_or("no negative species")?;
    let dev = zero
        .rho
        .values()
        .iter()
        .chain(minus.values())
        .map(|v| (v - 1.0 / PI).abs())
        .fold(0.0, f64::max);
    require(dev < 1e-8 && zero.entropy.abs() < 1e-10, format!("eps = 0: deviation {dev:.2e}, s = {}", zero.entropy))?;
    let mut betas = Vec::new();
    for eps in [0.005, 0.01, 0.02, 0.03, 0.04, 0.05] {
        let sol = solve_two_species(TwoSpeciesTarget::Energy(eps), &g, &opts).map_err(err)?;
        require(sol.converged && sol.beta < 0.0, format!("eps = {eps}: beta = {}", sol.beta))?;
        betas.push(sol.beta);
    }
    Ok(format!("uniform at 0; beta in [{:.3}, {:.3}] on (0, 0.05]", betas[0], betas[betas.len() - 1]))
}

fn kazdan_warner() -> Check {
    let g = sphere(16);
    let verdict = |k: fn(&[f64]) -> f64| {
        let spec = CurvatureSpec::new(2, g.map_nodes(k), g.clone()).map_err(err)?;
        kazdan_warner_check(&spec).map(|r| r.verdict).map_err(err)
    };
    let cases: [(&str, fn(&[f64]) -> f64, KazdanWarnerVerdict); 3] = [
        ("1 + x3", |x| 1.0 + x[2], KazdanWarnerVerdict::Obstructed),
        ("1", |_| 1.0, KazdanWarnerVerdict::Constant),
        ("1 + x3^2", |x| 1.0 + x[2] * x[2], KazdanWarnerVerdict::Pass),
    ];
    for (name, k, want) in cases {
        let got = verdict(k)?;
        require(got == want, format!("K = {name}: {got:?}, expected {want:?}"))?;
    }
    Ok("obstructed / constant / pass".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check, u64); 10] = [
        ("exact Liouville family", exact_liouville, 1),
        ("kappa = -beta pi", kappa_beta, 30),
        ("K = -1 nonexistence", negative_curvature, 5),
        ("microcanonical mean field", microcanonical, 120),
        ("Nirenberg end-to-end", nirenberg, 300),
        ("Paneitz constants", paneitz, 10),
        ("law of large numbers", lln, 600),
        ("Onsager regime", onsager, 900),
        ("two-species mean field", two_species, 120),
        ("Kazdan-Warner guard", kazdan_warner, 1),
    ];
    let only: Vec<usize> = std::env::var("CURVGAS_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut failed = 0;
    for (k, (name, check, budget)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(*budget);
        let (tag, detail) = match (&outcome, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("over runtime budget {budget} s; {d}")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("criterion {id:>2} {tag} [{:.1} s] {name}: {detail}", elapsed.as_secs_f64());
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
