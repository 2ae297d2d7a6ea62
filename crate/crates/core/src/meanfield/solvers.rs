use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ground::{epsilon_infinity, ground_state_energy};
use super::newton::{newton_solve, Constraint, NewtonOptions, NewtonResult};
use super::system::{generic_direction, System};
use super::{MeanFieldSolution, SolverOptions};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Domain, QuadratureGrid};
use crate::hamiltonian::{DensityField, ExternalField};

/// Mass fraction in one cell above which a density counts as collapsed.
const CONCENTRATION: f64 = 0.5;

/// Slack on energy comparisons against `ε_∞` and `ε₀`.
const ENERGY_SLACK: f64 = 1e-10;

fn package(
    sys: &System,
    rhos: Vec<Vec<f64>>,
    beta: f64,
    iterations: usize,
    converged: bool,
    start: &str,
) -> Result<MeanFieldSolution> {
    let ev = sys.eval(&rhos);
    let residual = sys.el_residual(&rhos, beta, &ev.psi);
    let phi = sys.phi(&ev.psi);
    let (_, log_z) = sys.gibbs_all(beta, &phi);
    let entropy = sys.entropy(&rhos);
    let mu = |ln_z: f64| if beta != 0.0 { -ln_z / beta } else { 0.0 };
    let mut it = rhos.into_iter();
    let rho = DensityField::new(sys.grid.clone(), it.next().expect("one species"))?;
    let rho_minus = it.next().map(|r| DensityField::new(sys.grid.clone(), r)).transpose()?;
    Ok(MeanFieldSolution {
        rho,
        mu_ch_minus: rho_minus.as_ref().map(|_| mu(log_z[1])),
        rho_minus,
        beta,
        mu_ch: mu(log_z[0]),
        log_partition: log_z,
        energy: ev.energy,
        entropy,
        objective: None,
        residual,
        iterations,
        converged,
        beta_capped: false,
        start: start.to_string(),
        history: Vec::new(),
    })
}

fn newton_opts(opts: &SolverOptions) -> NewtonOptions {
    NewtonOptions {
        tol: opts.tol,
        energy_tol: opts.energy_tol,
        max_iter: opts.newton_iterations,
        beta_cap: opts.beta_cap,
    }
}

fn blend(a: &[Vec<f64>], b: &[Vec<f64>], g: f64) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (1.0 - g) * p + g * q).collect())
        .collect()
}

fn sup_defect(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs() / (1.0 + p)))
        .fold(0.0, f64::max)
}

fn canonical_with(sys: &System, beta: f64, opts: &SolverOptions, start: Vec<Vec<f64>>, label: &str) -> Result<MeanFieldSolution> {
    if !beta.is_finite() {
        return Err(invalid("beta", "must be finite"));
    }
    let mut rho = start;
    let mut gamma = opts.damping;
    let mut prev = f64::INFINITY;
    let (mut best, mut best_res) = (rho.clone(), f64::INFINITY);
    let mut it = 0;
    let picard_cap = opts.max_iter.min(2000);
    while it < picard_cap {
        let ev = sys.eval(&rho);
        let (target, _) = sys.gibbs_all(beta, &sys.phi(&ev.psi));
        let res = sup_defect(&rho, &target);
        if res < best_res {
            best_res = res;
            best = rho.clone();
        }
        if res < opts.tol {
            break;
        }
        if sys.max_cell_mass(&target) > CONCENTRATION {
            return Err(Error::Concentration {
                mass_fraction: sys.max_cell_mass(&target),
            });
        }
        gamma = if res > prev { (gamma * 0.5).max(1e-3) } else { (gamma * 1.2).min(1.0) };
        prev = res;
        rho = blend(&rho, &target, gamma);
        it += 1;
        if it > 200 && res > 0.5 * best_res && it % 200 == 0 {
            // stagnating; hand over to Newton
            break;
        }
    }
    if best_res < opts.tol {
        return package(sys, best, beta, it, true, label);
    }
    let nr = newton_solve(sys, &best, beta, Constraint::FixedBeta(beta), &newton_opts(opts));
    if sys.max_cell_mass(&nr.rhos) > CONCENTRATION {
        return Err(Error::Concentration {
            mass_fraction: sys.max_cell_mass(&nr.rhos),
        });
    }
    if nr.converged || nr.residual < best_res {
        package(sys, nr.rhos, beta, it + nr.iterations, nr.converged, label)
    } else {
        package(sys, best, beta, it + nr.iterations, false, label)
    }
}

/// Damped fixed point `ρ ← (1-γ)ρ + γ T_β(ρ)` at fixed `β`, with a Newton
/// fallback when the iteration stagnates.
pub fn solve_canonical(
    beta: f64,
    field: &ExternalField,
    grid: &Arc<QuadratureGrid>,
    opts: &SolverOptions,
) -> Result<MeanFieldSolution> {
    let sys = System::new(grid, field, vec![1.0]);
    let (start, label) = match &opts.warm_start {
        Some(w) => (w.densities[..1].to_vec(), "warm"),
        None => (sys.uniform(), "uniform"),
    };
    canonical_with(&sys, beta, opts, start, label)
}

fn penalized_objective(sys: &System, rhos: &[Vec<f64>], eps: f64, sigma: f64) -> (f64, super::system::Eval) {
    let ev = sys.eval(rhos);
    let d = eps - ev.energy;
    (sys.entropy(rhos) - d * d / (2.0 * sigma * sigma), ev)
}

struct Penalized {
    rhos: Vec<Vec<f64>>,
    beta: f64,
    objective: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

/// Ascent on `R = S - (ε - E)²/(2σ²)` along `T(ρ) - ρ`, where
/// `T(ρ) = exp(-β_eff c φ)/Z` and `β_eff = (E - ε)/σ²`. The step is halved
/// until `R` does not decrease.
fn penalized_ascent(sys: &System, eps: f64, sigma: f64, start: Vec<Vec<f64>>, max_iter: usize, tol: f64, damping: f64) -> Result<Penalized> {
    let mut rhos = start;
    let (mut r, mut ev) = penalized_objective(sys, &rhos, eps, sigma);
    let mut history = vec![r];
    let mut gamma = damping;
    let mut it = 0;
    loop {
        let beta = (ev.energy - eps) / (sigma * sigma);
        let (target, _) = sys.gibbs_all(beta, &sys.phi(&ev.psi));
        let res = sup_defect(&rhos, &target);
        if res < tol || it >= max_iter {
            return Ok(Penalized {
                rhos,
                beta,
                objective: r,
                iterations: it,
                converged: res < tol,
                history,
            });
        }
        gamma = (gamma * 2.0).min(1.0);
        loop {
            let trial = blend(&rhos, &target, gamma);
            let (rt, evt) = penalized_objective(sys, &trial, eps, sigma);
            if rt >= r {
                rhos = trial;
                r = rt;
                ev = evt;
                history.push(r);
                break;
            }
            gamma *= 0.5;
            if gamma < 1e-14 {
                if res < 1e3 * tol {
                    return Ok(Penalized {
                        rhos,
                        beta,
                        objective: r,
                        iterations: it,
                        converged: true,
                        history,
                    });
                }
                return Err(Error::LineSearch);
            }
        }
        it += 1;
    }
}

/// Ascent iterations before handing the penalized problem to Newton.
const ASCENT_HANDOFF: usize = 300;

/// Ascent followed, if needed, by Newton on the penalized stationarity
/// system. The Newton point is accepted only if it does not lower `R`.
fn penalized_solve(sys: &System, eps: f64, sigma: f64, start: Vec<Vec<f64>>, max_iter: usize, opts: &SolverOptions) -> Result<Penalized> {
    let first = max_iter.min(ASCENT_HANDOFF);
    let mut p = penalized_ascent(sys, eps, sigma, start, first, opts.tol, opts.damping)?;
    if p.converged {
        return Ok(p);
    }
    let nr = newton_solve(sys, &p.rhos, p.beta, Constraint::Penalized { eps, sigma }, &newton_opts(opts));
    p.iterations += nr.iterations;
    if nr.converged {
        let (r, _) = penalized_objective(sys, &nr.rhos, eps, sigma);
        if r >= p.objective - 1e-12 * (1.0 + p.objective.abs()) {
            if r >= p.objective {
                p.history.push(r);
            }
            p.rhos = nr.rhos;
            p.beta = nr.beta;
            p.objective = r;
            p.converged = true;
            return Ok(p);
        }
    }
    if max_iter <= first {
        return Ok(p);
    }
    let q = penalized_ascent(sys, eps, sigma, p.rhos, max_iter - first, opts.tol, opts.damping)?;
    p.history.extend_from_slice(&q.history[1..]);
    Ok(Penalized {
        iterations: p.iterations + q.iterations,
        history: p.history,
        ..q
    })
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(invalid("sigma", "must be positive"))
    }
}

fn default_start(sys: &System, eps: f64, eps_inf: f64, field_is_zero: bool) -> (Vec<Vec<f64>>, &'static str) {
    if eps > eps_inf && (field_is_zero || sys.species() > 1) {
        let dir = generic_direction(sys.grid.dim());
        (sys.tilted(0.5, &dir), "tilted")
    } else {
        (sys.uniform(), "uniform")
    }
}

/// Maximizer of the penalized entropy `R_{ε,σ}`; reports `β = β_eff`.
pub fn solve_microcanonical_penalized(
    eps: f64,
    sigma: f64,
    field: &ExternalField,
    grid: &Arc<QuadratureGrid>,
    opts: &SolverOptions,
) -> Result<MeanFieldSolution> {
    check_sigma(sigma)?;
    let sys = System::new(grid, field, vec![1.0]);
    let eps_inf = epsilon_infinity(field, grid);
    let (start, label) = match &opts.warm_start {
        Some(w) => (w.densities[..1].to_vec(), "warm"),
        None => default_start(&sys, eps, eps_inf, field.is_zero()),
    };
    let p = penalized_solve(&sys, eps, sigma, start, opts.max_iter, opts)?;
    let mut sol = package(&sys, p.rhos, p.beta, p.iterations, p.converged, label)?;
    sol.objective = Some(p.objective);
    sol.history = p.history;
    Ok(sol)
}

fn constrained(sys: &System, eps: f64, start: Vec<Vec<f64>>, beta0: f64, opts: &SolverOptions) -> NewtonResult {
    newton_solve(sys, &start, beta0, Constraint::Energy(eps), &newton_opts(opts))
}

/// An exact Euler–Lagrange solution at its own energy.
struct Anchor {
    rhos: Vec<Vec<f64>>,
    beta: f64,
    energy: f64,
}

enum Continuation {
    Reached(NewtonResult),
    Capped,
    Stalled(Anchor),
}

/// Walks the energy from an anchor to `eps`, growing the step after each
/// converged Newton solve and shrinking it after each failure.
fn energy_continuation(sys: &System, eps: f64, mut cur: Anchor, opts: &SolverOptions, iterations: &mut usize) -> Continuation {
    let mut step = eps - cur.energy;
    for _ in 0..200 {
        let target = if (eps - cur.energy).abs() <= step.abs() { eps } else { cur.energy + step };
        let nr = constrained(sys, target, cur.rhos.clone(), cur.beta, opts);
        *iterations += nr.iterations;
        if nr.converged {
            if target == eps {
                return Continuation::Reached(nr);
            }
            cur = Anchor {
                rhos: nr.rhos,
                beta: nr.beta,
                energy: target,
            };
            step *= 2.0;
        } else if nr.beta.abs() > opts.beta_cap {
            return Continuation::Capped;
        } else {
            step *= 0.25;
            if step.abs() < 1e-12 * (1.0 + eps.abs()) {
                break;
            }
        }
    }
    Continuation::Stalled(cur)
}

/// σ-continuation of the penalized problem, then Newton on `(ρ, β)` for
/// the exact energy constraint. If that fails, the energy is continued from
/// the last exact solution of a penalized stage.
fn microcanonical_system(
    sys: &System,
    eps: f64,
    eps_inf: f64,
    eps0: Option<f64>,
    field_is_zero: bool,
    opts: &SolverOptions,
    ground: impl Fn() -> Result<(f64, DensityField)>,
) -> Result<MeanFieldSolution> {
    if let Some(e0) = eps0 {
        if eps < e0 - ENERGY_SLACK {
            return Err(Error::Infeasible { eps, eps0: e0 });
        }
    }
    if let Some(w) = &opts.warm_start {
        let nr = constrained(sys, eps, w.densities.clone(), w.beta, opts);
        if nr.converged {
            return package(sys, nr.rhos, nr.beta, nr.iterations, true, "warm");
        }
    }
    let (mut rhos, label) = default_start(sys, eps, eps_inf, field_is_zero);
    let mut anchor = (label == "uniform").then(|| Anchor {
        rhos: sys.uniform(),
        beta: 0.0,
        energy: eps_inf,
    });
    let mut iterations = 0;
    let mut capped = false;
    let uniform = sys.uniform();
    for (k, &sigma) in opts.sigma_schedule.iter().enumerate() {
        let p = penalized_solve(sys, eps, sigma, rhos, opts.stage_iterations, opts)?;
        iterations += p.iterations;
        rhos = p.rhos;
        // the uniform density is a saddle for a flat field; restart off it
        if label == "tilted" && sup_defect(&rhos, &uniform) < 1e-6 {
            rhos = default_start(sys, eps, eps_inf, field_is_zero).0;
            continue;
        }
        if p.converged {
            anchor = Some(Anchor {
                rhos: rhos.clone(),
                beta: p.beta,
                energy: sys.eval(&rhos).energy,
            });
        }
        if sigma > 0.1 + 1e-12 && k + 1 < opts.sigma_schedule.len() {
            continue;
        }
        let nr = constrained(sys, eps, rhos.clone(), p.beta, opts);
        iterations += nr.iterations;
        if nr.converged {
            return package(sys, nr.rhos, nr.beta, iterations, true, label);
        }
        if nr.beta.abs() > opts.beta_cap {
            capped = true;
            break;
        }
    }
    let mut best = None;
    if let (false, Some(a)) = (capped, anchor) {
        match energy_continuation(sys, eps, a, opts, &mut iterations) {
            Continuation::Reached(nr) => return package(sys, nr.rhos, nr.beta, iterations, true, label),
            Continuation::Capped => capped = true,
            Continuation::Stalled(a) => best = Some(a),
        }
    }
    // β runs away as ε approaches the ground state
    let near_ground = best.as_ref().is_some_and(|a| a.beta > 1e-2 * opts.beta_cap);
    if eps < eps_inf && (capped || near_ground) {
        let (_, rho) = ground()?;
        let mut sol = package(sys, vec![rho.into_values()], opts.beta_cap, iterations, false, "ground_state")?;
        sol.beta_capped = true;
        return Ok(sol);
    }
    match best {
        Some(a) => package(sys, a.rhos, a.beta, iterations, false, label),
        None => Err(Error::NonConvergence {
            iterations,
            residual: f64::NAN,
        }),
    }
}

/// Entropy maximizer at fixed energy, with `β` as the Lagrange multiplier.
///
/// Energies below the uniform value trigger a ground-state computation;
/// `ε < ε₀` is infeasible.
pub fn solve_microcanonical(
    eps: f64,
    field: &ExternalField,
    grid: &Arc<QuadratureGrid>,
    opts: &SolverOptions,
) -> Result<MeanFieldSolution> {
    if !eps.is_finite() {
        return Err(invalid("eps", "must be finite"));
    }
    let sys = System::new(grid, field, vec![1.0]);
    let eps_inf = epsilon_infinity(field, grid);
    let eps0 = if eps < eps_inf - ENERGY_SLACK {
        Some(match opts.eps0 {
            Some(e) => e,
            None => ground_state_energy(field, grid)?.eps0,
        })
    } else {
        None
    };
    microcanonical_system(&sys, eps, eps_inf, eps0, field.is_zero(), opts, || {
        let gs = ground_state_energy(field, grid)?;
        Ok((gs.eps0, gs.rho))
    })
}

/// Target of a two-species solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TwoSpeciesTarget {
    Energy(f64),
    Beta(f64),
}

/// Neutral two-species system on the disk: `ρ± ∝ exp(∓β Ψ_ω)`, `ω = ρ⁺ - ρ⁻`.
pub fn solve_two_species(target: TwoSpeciesTarget, grid: &Arc<QuadratureGrid>, opts: &SolverOptions) -> Result<MeanFieldSolution> {
    if grid.domain() != Domain::Disk2d {
        return Err(invalid("domain", "two-species solves need the disk"));
    }
    let field = ExternalField::zero();
    let sys = System::new(grid, &field, vec![1.0, -1.0]);
    match target {
        TwoSpeciesTarget::Beta(beta) => {
            let start = match &opts.warm_start {
                Some(w) if w.densities.len() == 2 => w.densities.clone(),
                _ => sys.tilted(0.5, &generic_direction(2)),
            };
            canonical_with(&sys, beta, opts, start, "tilted")
        }
        TwoSpeciesTarget::Energy(eps) => {
            if !eps.is_finite() {
                return Err(invalid("eps", "must be finite"));
            }
            if eps < 0.0 {
                return Err(Error::Infeasible { eps, eps0: 0.0 });
            }
            if eps == 0.0 {
                return package(&sys, sys.uniform(), 0.0, 0, true, "uniform");
            }
            microcanonical_system(&sys, eps, 0.0, Some(0.0), true, opts, || {
                Err(Error::Unsupported("two-species ground state".into()))
            })
        }
    }
}

/// Solves from `starts` random tilted densities and returns the distinct
/// maximizers (L¹ separation above 1e-3), best entropy first.
pub fn multi_start(
    eps: f64,
    field: &ExternalField,
    grid: &Arc<QuadratureGrid>,
    opts: &SolverOptions,
    starts: usize,
    seed: u64,
) -> Result<Vec<MeanFieldSolution>> {
    let sys = System::new(grid, field, vec![1.0]);
    let eps_inf = epsilon_infinity(field, grid);
    let eps0 = if eps < eps_inf - ENERGY_SLACK {
        Some(opts.eps0.map_or_else(|| ground_state_energy(field, grid).map(|g| g.eps0), Ok)?)
    } else {
        None
    };
    if let Some(e0) = eps0 {
        if eps < e0 - ENERGY_SLACK {
            return Err(Error::Infeasible { eps, eps0: e0 });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found: Vec<MeanFieldSolution> = Vec::new();
    for k in 0..starts {
        let dir: Vec<f64> = (0..grid.dim()).map(|_| rng.random::<f64>() - 0.5).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dir: Vec<f64> = dir.iter().map(|v| v / norm).collect();
        let amp = 0.2 + 1.5 * rng.random::<f64>();
        let mut rhos = sys.tilted(amp, &dir);
        let mut last = None;
        for &sigma in &opts.sigma_schedule {
            let p = penalized_solve(&sys, eps, sigma, rhos, opts.stage_iterations, opts)?;
            rhos = p.rhos;
            if sigma <= 0.1 + 1e-12 {
                let nr = constrained(&sys, eps, rhos.clone(), p.beta, opts);
                if nr.converged {
                    last = Some(nr);
                    break;
                }
            }
        }
        let Some(nr) = last else { continue };
        let sol = package(&sys, nr.rhos, nr.beta, nr.iterations, true, &format!("random_{k}"))?;
        if found.iter().all(|s| s.rho.l1_distance(&sol.rho) > 1e-3) {
            found.push(sol);
        }
    }
    found.sort_by(|a, b| b.entropy.total_cmp(&a.entropy));
    Ok(found)
}
