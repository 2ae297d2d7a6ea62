use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ensemble::{log_acceptance, SystemSpec};
use super::mcmc::random_configuration;
use super::proposal::{log_sum_exp, Proposal};
use crate::error::{invalid, Error, Result};
use crate::hamiltonian::{move_delta, ParticleConfiguration};

/// Run controls for [`wang_landau`].
#[derive(Debug, Clone)]
pub struct WangLandauOptions {
    /// Energy window `[lo, hi)`; defaults to the 1% and 99% quantiles of `H`
    /// under i.i.d. uniform positions.
    pub window: Option<(f64, f64)>,
    /// Bin width; when absent the window is split into `bins` bins.
    pub bin_width: Option<f64>,
    pub bins: usize,
    /// Histogram is flat when `min ≥ flatness · mean`.
    pub flatness: f64,
    pub ln_f_initial: f64,
    /// Stop once the modification factor drops below this.
    pub ln_f_final: f64,
    pub max_sweeps: usize,
    /// Independent walkers, merged in index order.
    pub walkers: usize,
    pub proposal_scale: f64,
    pub prerun_samples: usize,
    pub seed: u64,
}

impl Default for WangLandauOptions {
    fn default() -> Self {
        WangLandauOptions {
            window: None,
            bin_width: None,
            bins: 40,
            flatness: 0.8,
            ln_f_initial: 1.0,
            ln_f_final: 1e-5,
            max_sweeps: 2_000_000,
            walkers: 1,
            proposal_scale: 0.3,
            prerun_samples: 20_000,
            seed: 0,
        }
    }
}

/// Density-of-states estimate on uniform energy bins.
#[derive(Debug, Clone, PartialEq)]
pub struct DosResult {
    /// Bin centers.
    pub energies: Vec<f64>,
    pub bin_width: f64,
    pub window: (f64, f64),
    /// `ln Φ′(E)` normalized so that `Σ Φ′ ΔE = |Λ|^N`.
    pub ln_dos: Vec<f64>,
    /// `S(E) = ln(|Λ|^{-N} Φ′(E))`.
    pub entropy: Vec<f64>,
    /// `∂S/∂E` from a local linear fit over five bins.
    pub beta: Vec<f64>,
    /// Bin center maximizing `S`.
    pub e_max: f64,
    pub e_max_index: usize,
    /// Visits in the final stage, summed over walkers.
    pub histogram: Vec<u64>,
    /// `min/mean` of the final-stage histogram of the worst walker.
    pub flatness: f64,
    pub ln_f_reached: f64,
    pub sweeps: usize,
}

impl DosResult {
    pub fn bins(&self) -> usize {
        self.energies.len()
    }
}

struct WalkerResult {
    ln_g: Vec<f64>,
    histogram: Vec<u64>,
    flatness: f64,
    ln_f: f64,
    sweeps: usize,
}

/// 1% and 99% quantiles of `H` under i.i.d. uniform positions.
pub fn default_window(sys: &SystemSpec, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut e = Vec::with_capacity(samples);
    while e.len() < samples.max(100) {
        let c = random_configuration(&sys.domain, &sys.circulations, &mut rng)?;
        if let Ok(h) = sys.energy(&c) {
            e.push(h);
        }
    }
    e.sort_unstable_by(f64::total_cmp);
    let q = |p: f64| e[((p * (e.len() - 1) as f64).round()) as usize];
    Ok((q(0.01), q(0.99)))
}

/// Flat-histogram estimate of `ln Φ′` with the `1/t` refinement schedule.
pub fn wang_landau(sys: &SystemSpec, opts: &WangLandauOptions) -> Result<DosResult> {
    if sys.circulations.iter().all(|&c| c == 0.0) {
        return Err(Error::DegenerateCirculations);
    }
    if !(opts.flatness > 0.0 && opts.flatness < 1.0) {
        return Err(invalid("flatness", "must lie in (0, 1)"));
    }
    if !(opts.ln_f_final > 0.0 && opts.ln_f_final < opts.ln_f_initial) {
        return Err(invalid("ln_f_final", "must be positive and below ln_f_initial"));
    }
    if opts.walkers == 0 {
        return Err(invalid("walkers", "must be at least 1"));
    }
    let (lo, hi) = match opts.window {
        Some(w) => w,
        None => default_window(sys, opts.prerun_samples, opts.seed)?,
    };
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(invalid("window", "must be finite with lo < hi"));
    }
    let (bins, width) = match opts.bin_width {
        Some(w) if w > 0.0 => (((hi - lo) / w).round().max(1.0) as usize, w),
        Some(_) => return Err(invalid("bin_width", "must be positive")),
        None if opts.bins >= 2 => (opts.bins, (hi - lo) / opts.bins as f64),
        None => return Err(invalid("bins", "need at least 2 bins")),
    };
    let hi = lo + width * bins as f64;

    let walkers: Vec<WalkerResult> = (0..opts.walkers as u64)
        .into_par_iter()
        .map(|k| run_walker(sys, opts, lo, width, bins, opts.seed.wrapping_add(k)))
        .collect::<Result<_>>()?;

    let log_volume = sys.circulations.len() as f64 * sys.domain.measure().unwrap_or(1.0).ln();
    let normalize = |ln_g: &[f64]| -> Vec<f64> {
        let c = log_volume - width.ln() - log_sum_exp(ln_g);
        ln_g.iter().map(|v| v + c).collect()
    };
    let mut ln_dos = vec![0.0; bins];
    for w in &walkers {
        for (acc, v) in ln_dos.iter_mut().zip(normalize(&w.ln_g)) {
            *acc += v / walkers.len() as f64;
        }
    }
    let ln_dos = normalize(&ln_dos);
    let entropy: Vec<f64> = ln_dos.iter().map(|v| v - log_volume).collect();
    let energies: Vec<f64> = (0..bins).map(|k| lo + width * (k as f64 + 0.5)).collect();
    let beta = local_slope(&energies, &entropy, 2);
    let e_max_index = (0..bins).max_by(|&a, &b| entropy[a].total_cmp(&entropy[b])).unwrap_or(0);
    let mut histogram = vec![0u64; bins];
    for w in &walkers {
        for (a, b) in histogram.iter_mut().zip(&w.histogram) {
            *a += b;
        }
    }
    Ok(DosResult {
        e_max: energies[e_max_index],
        e_max_index,
        energies,
        bin_width: width,
        window: (lo, hi),
        ln_dos,
        entropy,
        beta,
        histogram,
        flatness: walkers.iter().map(|w| w.flatness).fold(f64::INFINITY, f64::min),
        ln_f_reached: walkers.iter().map(|w| w.ln_f).fold(0.0, f64::max),
        sweeps: walkers.iter().map(|w| w.sweeps).max().unwrap_or(0),
    })
}

/// Least-squares slope of `y` against `x` over `±half` neighbours.
fn local_slope(x: &[f64], y: &[f64], half: usize) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            let a = k.saturating_sub(half);
            let b = (k + half + 1).min(n);
            let m = (b - a) as f64;
            let mx = x[a..b].iter().sum::<f64>() / m;
            let my = y[a..b].iter().sum::<f64>() / m;
            let sxy: f64 = (a..b).map(|i| (x[i] - mx) * (y[i] - my)).sum();
            let sxx: f64 = (a..b).map(|i| (x[i] - mx).powi(2)).sum();
            if sxx > 0.0 {
                sxy / sxx
            } else {
                0.0
            }
        })
        .collect()
}

fn bin_of(e: f64, lo: f64, width: f64, bins: usize) -> Option<usize> {
    let k = ((e - lo) / width).floor();
    (k >= 0.0 && (k as usize) < bins).then_some(k as usize)
}

fn initial_state(sys: &SystemSpec, lo: f64, width: f64, bins: usize, rng: &mut ChaCha8Rng) -> Result<ParticleConfiguration> {
    let mut best: Option<(f64, ParticleConfiguration)> = None;
    let hi = lo + width * bins as f64;
    let distance = |h: f64| if h < lo { lo - h } else if h >= hi { h - hi + width * 1e-9 } else { 0.0 };
    for _ in 0..10_000 {
        let c = random_configuration(&sys.domain, &sys.circulations, rng)?;
        if let Ok(h) = sys.energy(&c) {
            let d = distance(h);
            if d == 0.0 {
                return Ok(c);
            }
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, c));
            }
        }
    }
    // greedy walk toward the window
    let (mut d, mut c) = best.ok_or(Error::WindowNotVisited { visited: 0, bins })?;
    let mut h = sys.energy(&c)?;
    let proposal = Proposal::new(0.1);
    let n = c.len();
    for _ in 0..200_000 {
        let i = rng.random_range(0..n);
        let Some((y, _)) = proposal.propose(&sys.domain, c.position(i), rng) else {
            continue;
        };
        let Ok(dh) = move_delta(&c, i, &y, &sys.field, sys.field_scale) else {
            continue;
        };
        let nd = distance(h + dh);
        if nd <= d {
            c.set_position(i, &y);
            h += dh;
            d = nd;
            if d == 0.0 {
                return Ok(c);
            }
        }
    }
    Err(Error::WindowNotVisited { visited: 0, bins })
}

fn run_walker(sys: &SystemSpec, opts: &WangLandauOptions, lo: f64, width: f64, bins: usize, seed: u64) -> Result<WalkerResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut config = initial_state(sys, lo, width, bins, &mut rng)?;
    let mut h = sys.energy(&config)?;
    let mut b = bin_of(h, lo, width, bins).ok_or(Error::WindowNotVisited { visited: 0, bins })?;
    let s = opts.proposal_scale;
    let proposal = Proposal::mixture(vec![s, s / 4.0, s / 16.0]);
    let n = config.len();

    let mut ln_g = vec![0.0; bins];
    let mut hist = vec![0u64; bins];
    let mut ever = vec![false; bins];
    let mut ln_f = opts.ln_f_initial;
    let mut one_over_t = false;
    let mut moves: u64 = 0;
    let check_every = 20usize;
    let mut sweeps = 0;
    let flat_ratio = |hist: &[u64]| {
        let mean = hist.iter().sum::<u64>() as f64 / hist.len() as f64;
        let min = *hist.iter().min().unwrap_or(&0) as f64;
        if mean > 0.0 {
            min / mean
        } else {
            0.0
        }
    };

    while sweeps < opts.max_sweeps {
        for _ in 0..n {
            let i = rng.random_range(0..n);
            if let Some((y, log_q_ratio)) = proposal.propose(&sys.domain, config.position(i), &mut rng) {
                if let Ok(dh) = move_delta(&config, i, &y, &sys.field, sys.field_scale) {
                    if let Some(nb) = bin_of(h + dh, lo, width, bins) {
                        let la = log_acceptance(-ln_g[b], -ln_g[nb] + log_q_ratio);
                        if la >= 0.0 || rng.random::<f64>().ln() < la {
                            config.set_position(i, &y);
                            h += dh;
                            b = nb;
                        }
                    }
                }
            }
            moves += 1;
            if one_over_t {
                ln_f = bins as f64 / moves as f64;
            }
            ln_g[b] += ln_f;
            hist[b] += 1;
            ever[b] = true;
        }
        sweeps += 1;
        if sweeps % check_every == 0 {
            h = sys.energy(&config)?;
            if let Some(nb) = bin_of(h, lo, width, bins) {
                b = nb;
            }
            if one_over_t {
                if ln_f < opts.ln_f_final {
                    break;
                }
            } else if flat_ratio(&hist) >= opts.flatness {
                ln_f /= 2.0;
                if ln_f <= bins as f64 / moves as f64 {
                    one_over_t = true;
                    ln_f = bins as f64 / moves as f64;
                }
                if ln_f < opts.ln_f_final {
                    break;
                }
                hist.iter_mut().for_each(|v| *v = 0);
            }
        }
    }
    let visited = ever.iter().filter(|&&v| v).count();
    if visited < bins || ln_f >= opts.ln_f_final {
        if visited < bins {
            return Err(Error::WindowNotVisited { visited, bins });
        }
        return Err(Error::NonConvergence {
            iterations: sweeps,
            residual: ln_f,
        });
    }
    Ok(WalkerResult {
        ln_g,
        flatness: flat_ratio(&hist),
        histogram: hist,
        ln_f,
        sweeps,
    })
}
