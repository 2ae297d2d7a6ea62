use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ensemble::{log_acceptance, EnsembleSpec};
use super::proposal::Proposal;
use crate::error::{invalid, Error, Result};
use crate::geometry::sampling::uniform_point;
use crate::geometry::{Domain, QuadratureGrid};
use crate::hamiltonian::{move_delta, DensityField, ParticleConfiguration};

/// Run controls for [`mcmc_run_with`].
#[derive(Debug, Clone)]
pub struct McmcOptions {
    /// Post-burn-in sweeps; one sweep is `N` single-particle proposals.
    pub steps: usize,
    pub thin: usize,
    pub seed: u64,
    pub proposal_scale: f64,
    /// Sweeps discarded before recording; the proposal scale is tuned here.
    pub burn_in: usize,
    pub tune: bool,
    pub initial: Option<ParticleConfiguration>,
}

impl McmcOptions {
    pub fn new(steps: usize, thin: usize, seed: u64, proposal_scale: f64) -> Self {
        McmcOptions {
            steps,
            thin,
            seed,
            proposal_scale,
            burn_in: (steps / 5).max(200),
            tune: true,
            initial: None,
        }
    }
}

/// Which particles an observable runs over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpeciesFilter {
    #[default]
    All,
    Positive,
    Negative,
}

impl SpeciesFilter {
    fn accepts(self, c: f64) -> bool {
        match self {
            SpeciesFilter::All => true,
            SpeciesFilter::Positive => c > 0.0,
            SpeciesFilter::Negative => c < 0.0,
        }
    }
}

/// Output of one Metropolis chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainResult {
    pub domain: Domain,
    pub circulations: Vec<f64>,
    /// Stored configurations, flattened `N × ambient_dim` each.
    pub samples: Vec<Vec<f64>>,
    /// `H` at each stored configuration.
    pub sample_energies: Vec<f64>,
    /// `H` after every recorded sweep.
    pub energy_trace: Vec<f64>,
    pub acceptance_rate: f64,
    /// Integrated autocorrelation time of `H`, in sweeps (1 for i.i.d.).
    pub tau_int: f64,
    /// Frozen proposal scale after burn-in.
    pub proposal_scale: f64,
    pub seed: u64,
    pub steps: usize,
    pub thin: usize,
}

impl ChainResult {
    pub fn n(&self) -> usize {
        self.circulations.len()
    }

    pub fn sample(&self, k: usize) -> Result<ParticleConfiguration> {
        ParticleConfiguration::new(self.domain, self.samples[k].clone(), self.circulations.clone())
    }
}

/// Metropolis chain with default burn-in and tuning.
pub fn mcmc_run(spec: &EnsembleSpec, steps: usize, thin: usize, seed: u64, proposal_scale: f64) -> Result<ChainResult> {
    mcmc_run_with(spec, &McmcOptions::new(steps, thin, seed, proposal_scale))
}

/// Independent chains with seeds `seed, seed + 1, …`, run in parallel and
/// returned in seed order.
pub fn mcmc_run_chains(spec: &EnsembleSpec, opts: &McmcOptions, chains: usize) -> Result<Vec<ChainResult>> {
    (0..chains as u64)
        .into_par_iter()
        .map(|k| {
            let o = McmcOptions {
                seed: opts.seed.wrapping_add(k),
                ..opts.clone()
            };
            mcmc_run_with(spec, &o)
        })
        .collect()
}

pub(crate) fn random_configuration<R: Rng>(spec_domain: &Domain, circulations: &[f64], rng: &mut R) -> Result<ParticleConfiguration> {
    let mut pos = Vec::with_capacity(circulations.len() * spec_domain.ambient_dim());
    for _ in circulations {
        pos.extend(uniform_point(spec_domain, rng)?);
    }
    ParticleConfiguration::new(*spec_domain, pos, circulations.to_vec())
}

pub fn mcmc_run_with(spec: &EnsembleSpec, opts: &McmcOptions) -> Result<ChainResult> {
    if opts.steps == 0 {
        return Err(invalid("steps", "must be at least 1"));
    }
    if opts.thin == 0 {
        return Err(invalid("thin", "must be at least 1"));
    }
    if !(opts.proposal_scale > 0.0) {
        return Err(invalid("proposal_scale", "must be positive"));
    }
    let sys = &spec.system;
    let domain = sys.domain;
    let n = sys.n();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut config = match &opts.initial {
        Some(c) => {
            sys.check(c)?;
            c.clone()
        }
        None => loop {
            let c = random_configuration(&domain, &sys.circulations, &mut rng)?;
            if sys.energy(&c).is_ok() {
                break c;
            }
        },
    };
    let mut h = sys.energy(&config)?;
    let mut w = spec.log_weight_of_energy(h);
    let mut proposal = Proposal::new(opts.proposal_scale);
    let max_scale = match domain {
        Domain::Disk2d => 1.0,
        _ => 2.0,
    };

    let sweep = |config: &mut ParticleConfiguration,
                     h: &mut f64,
                     w: &mut f64,
                     proposal: &Proposal,
                     rng: &mut ChaCha8Rng|
     -> usize {
        let mut accepted = 0;
        for _ in 0..n {
            let i = rng.random_range(0..n);
            let Some((y, log_q_ratio)) = proposal.propose(&domain, config.position(i), rng) else {
                continue;
            };
            let Ok(dh) = move_delta(config, i, &y, &sys.field, sys.field_scale) else {
                continue;
            };
            let h_new = *h + dh;
            let w_new = spec.log_weight_of_energy(h_new);
            let la = log_acceptance(*w, w_new + log_q_ratio);
            if la >= 0.0 || rng.random::<f64>().ln() < la {
                config.set_position(i, &y);
                *h = h_new;
                *w = w_new;
                accepted += 1;
            }
        }
        accepted
    };

    const TUNE_BATCH: usize = 25;
    let mut batch_acc = 0;
    for b in 0..opts.burn_in {
        batch_acc += sweep(&mut config, &mut h, &mut w, &proposal, &mut rng);
        if opts.tune && (b + 1) % TUNE_BATCH == 0 {
            let rate = batch_acc as f64 / (TUNE_BATCH * n) as f64;
            let s = proposal.scale();
            if rate < 0.30 {
                proposal.set_scale((s * 0.8).max(1e-5));
            } else if rate > 0.40 {
                proposal.set_scale((s * 1.25).min(max_scale));
            }
            batch_acc = 0;
        }
        if (b + 1) % 100 == 0 {
            h = sys.energy(&config)?;
            w = spec.log_weight_of_energy(h);
        }
    }
    h = sys.energy(&config)?;
    w = spec.log_weight_of_energy(h);

    let stored = opts.steps / opts.thin;
    let mut samples = Vec::with_capacity(stored);
    let mut sample_energies = Vec::with_capacity(stored);
    let mut energy_trace = Vec::with_capacity(opts.steps);
    let mut accepted = 0usize;
    for t in 1..=opts.steps {
        accepted += sweep(&mut config, &mut h, &mut w, &proposal, &mut rng);
        if t % opts.thin == 0 {
            h = sys.energy(&config)?;
            w = spec.log_weight_of_energy(h);
            samples.push(config.positions().to_vec());
            sample_energies.push(h);
        }
        energy_trace.push(h);
    }
    Ok(ChainResult {
        domain,
        circulations: sys.circulations.clone(),
        samples,
        sample_energies,
        tau_int: integrated_autocorrelation(&energy_trace),
        energy_trace,
        acceptance_rate: accepted as f64 / (opts.steps * n) as f64,
        proposal_scale: proposal.scale(),
        seed: opts.seed,
        steps: opts.steps,
        thin: opts.thin,
    })
}

/// Integrated autocorrelation time `1 + 2 Σ ρ(t)` with Sokal's self-consistent
/// window `M ≥ 5 τ(M)`. Returns 1 for constant series.
pub fn integrated_autocorrelation(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 1.0;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let c0 = d.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if c0 == 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for t in 1..n {
        let ct = d[..n - t].iter().zip(&d[t..]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
        tau += 2.0 * ct / c0;
        if t as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

/// Histogram of stored positions over grid cells, as a density.
pub fn empirical_density(chain: &ChainResult, grid: &Arc<QuadratureGrid>, species: SpeciesFilter) -> Result<DensityField> {
    if grid.domain() != chain.domain {
        return Err(invalid("grid", "lives on a different domain"));
    }
    let dim = chain.domain.ambient_dim();
    let mut counts = vec![0u64; grid.len()];
    let mut total = 0u64;
    for s in &chain.samples {
        for (x, &c) in s.chunks_exact(dim).zip(&chain.circulations) {
            if species.accepts(c) {
                counts[grid.locate(x)] += 1;
                total += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::EmptySelection);
    }
    let values = counts
        .iter()
        .zip(grid.weights())
        .map(|(&k, w)| k as f64 / (w * total as f64))
        .collect();
    DensityField::new(grid.clone(), values)
}

/// Chain average of `(1/|sel|) Σ g(xⱼ)` with an autocorrelation-adjusted
/// standard error.
pub fn lln_observable(chain: &ChainResult, g: impl Fn(&[f64]) -> f64, species: SpeciesFilter) -> Result<(f64, f64)> {
    let dim = chain.domain.ambient_dim();
    let sel: Vec<usize> = (0..chain.n()).filter(|&i| species.accepts(chain.circulations[i])).collect();
    if sel.is_empty() || chain.samples.is_empty() {
        return Err(Error::EmptySelection);
    }
    let series: Vec<f64> = chain
        .samples
        .iter()
        .map(|s| sel.iter().map(|&i| g(&s[i * dim..(i + 1) * dim])).sum::<f64>() / sel.len() as f64)
        .collect();
    Ok(mean_and_error(&series))
}

/// Mean and `sqrt(τ var / n)`.
pub fn mean_and_error(series: &[f64]) -> (f64, f64) {
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    if series.len() < 2 {
        return (mean, 0.0);
    }
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        return (mean, 0.0);
    }
    let tau = integrated_autocorrelation(series);
    (mean, (tau * var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_grid;
    use crate::hamiltonian::ExternalField;
    use crate::sampler::{EnsembleKind, SystemSpec};

    fn canonical(domain: Domain, n: usize, beta: f64) -> EnsembleSpec {
        let sys = SystemSpec::single_species(domain, n, ExternalField::zero()).unwrap();
        EnsembleSpec::new(EnsembleKind::Canonical { beta }, sys).unwrap()
    }

    #[test]
    fn chain_is_deterministic_and_counts_samples() {
        let spec = canonical(Domain::sphere(2), 5, 1.0);
        let a = mcmc_run(&spec, 103, 10, 9, 0.5).unwrap();
        let b = mcmc_run(&spec, 103, 10, 9, 0.5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples.len(), 10);
        assert!((0.0..=1.0).contains(&a.acceptance_rate));
        let c = mcmc_run(&spec, 103, 10, 10, 0.5).unwrap();
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn infinite_temperature_chain_is_uniform() {
        let spec = canonical(Domain::sphere(2), 4, 0.0);
        let chain = mcmc_run(&spec, 4000, 4, 1, 0.5).unwrap();
        let samples = chain.samples.len();
        let mut m = [0.0; 3];
        for s in &chain.samples {
            for x in s.chunks_exact(3) {
                for d in 0..3 {
                    m[d] += x[d] / (4 * samples) as f64;
                }
            }
        }
        let norm = (m.iter().map(|v| v * v).sum::<f64>()).sqrt();
        assert!(norm < 3.0 / ((4 * samples) as f64).sqrt(), "{norm}");
    }

    #[test]
    fn empirical_density_of_single_point() {
        let g = Arc::new(build_grid(Domain::Disk2d, &[4, 8]).unwrap());
        let k = 13;
        let chain = ChainResult {
            domain: Domain::Disk2d,
            circulations: vec![1.0],
            samples: vec![g.node(k).to_vec()],
            sample_energies: vec![0.0],
            energy_trace: vec![0.0],
            acceptance_rate: 0.0,
            tau_int: 1.0,
            proposal_scale: 0.1,
            seed: 0,
            steps: 1,
            thin: 1,
        };
        let d = empirical_density(&chain, &g, SpeciesFilter::All).unwrap();
        for i in 0..g.len() {
            let expect = if i == k { 1.0 / g.weights()[k] } else { 0.0 };
            assert_eq!(d.values()[i], expect);
        }
        assert_eq!(empirical_density(&chain, &g, SpeciesFilter::Negative).unwrap_err(), Error::EmptySelection);
        assert_eq!(lln_observable(&chain, |_| 1.0, SpeciesFilter::All).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn autocorrelation_of_ar1() {
        // AR(1) with coefficient a has τ = (1 + a)/(1 - a)
        let a: f64 = 0.8;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut x = 0.0;
        let series: Vec<f64> = (0..200_000)
            .map(|_| {
                x = a * x + rng.sample::<f64, _>(rand_distr::StandardNormal);
                x
            })
            .collect();
        let tau = integrated_autocorrelation(&series);
        assert!((tau - 9.0).abs() < 0.5, "{tau}");
        assert_eq!(integrated_autocorrelation(&[2.0; 50]), 1.0);
    }
}
