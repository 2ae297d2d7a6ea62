use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::curvature::CurvatureSign;
use crate::error::{invalid, Error, Result};

/// Radial curvature profile `K(r)` on the plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialCurvature {
    Constant { value: f64 },
    /// `A exp(-r²/(2w²))`.
    Gaussian { amplitude: f64, width: f64 },
    /// `A (1 - (r/a)²)²` for `r < a`, zero outside.
    CompactBump { amplitude: f64, radius: f64 },
}

impl RadialCurvature {
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            RadialCurvature::Constant { value } => value,
            RadialCurvature::Gaussian { amplitude, width } => amplitude * (-r * r / (2.0 * width * width)).exp(),
            RadialCurvature::CompactBump { amplitude, radius } => {
                if r < radius {
                    let t = 1.0 - (r / radius).powi(2);
                    amplitude * t * t
                } else {
                    0.0
                }
            }
        }
    }

    fn amplitude(&self) -> f64 {
        match *self {
            RadialCurvature::Constant { value } => value,
            RadialCurvature::Gaussian { amplitude, .. } | RadialCurvature::CompactBump { amplitude, .. } => amplitude,
        }
    }

    pub fn sign(&self) -> CurvatureSign {
        CurvatureSign::classify(&[self.amplitude()])
    }

    /// Radius of the support, if compact.
    pub fn support_radius(&self) -> Option<f64> {
        match *self {
            RadialCurvature::CompactBump { radius, .. } => Some(radius),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            RadialCurvature::Constant { value } => value.is_finite(),
            RadialCurvature::Gaussian { amplitude, width } => amplitude.is_finite() && width > 0.0 && width.is_finite(),
            RadialCurvature::CompactBump { amplitude, radius } => {
                amplitude.is_finite() && radius > 0.0 && radius.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("curvature", format!("invalid profile {self:?}")))
        }
    }

    /// Admissible open range of total curvature `κ` for entire solutions.
    pub fn kappa_range(&self) -> Result<(f64, f64)> {
        match self.sign() {
            CurvatureSign::Positive => Ok((0.0, 4.0 * PI)),
            CurvatureSign::Negative => match self {
                RadialCurvature::Constant { .. } => Err(Error::Unsupported(
                    "no entire solution exists for constant negative K".into(),
                )),
                _ => Ok((f64::NEG_INFINITY, 0.0)),
            },
            CurvatureSign::Zero => Ok((0.0, 0.0)),
            CurvatureSign::Undefined => Err(Error::Unsupported("K has no sign".into())),
        }
    }
}

/// Shooting from a given `u(0)` or matching a total curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadialMode {
    Shoot { u0: f64 },
    Match { kappa: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadialOptions {
    pub r_max: f64,
    /// Radius where the series start hands over to the integrator.
    pub r0: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Output radii, log-spaced on `[r0, r_max]`.
    pub samples: usize,
    pub blow_up: f64,
    /// Relative tolerance on `κ` in match mode.
    pub kappa_tol: f64,
}

impl Default for RadialOptions {
    fn default() -> Self {
        RadialOptions {
            r_max: 1e3,
            r0: 1e-6,
            rtol: 1e-12,
            atol: 1e-13,
            samples: 2001,
            blow_up: 50.0,
            kappa_tol: 1e-9,
        }
    }
}

impl RadialOptions {
    fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0 && self.r_max > self.r0 && self.r_max.is_finite()) {
            return Err(invalid("r_max", "need 0 < r0 < r_max < ∞"));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(invalid("rtol", "tolerances must be positive"));
        }
        if self.samples < 2 {
            return Err(invalid("samples", "need at least 2 output radii"));
        }
        if !(self.blow_up > 0.0) {
            return Err(invalid("blow_up", "must be positive"));
        }
        if !(self.kappa_tol > 0.0) {
            return Err(invalid("kappa_tol", "must be positive"));
        }
        Ok(())
    }
}

/// Radial solution of `u'' + u'/r = -K(r) e^{2u}`, `u'(0) = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct RadialSolution {
    pub u0: f64,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    /// `κ(R) = ∫_{|x|<R} K e^{2u} dx` at each output radius.
    pub kappa_profile: Vec<f64>,
    /// `κ(r_max)`, or at the last radius reached.
    pub kappa: f64,
    /// Least-squares `du/d ln r` over the last decade of radii.
    pub slope: f64,
    pub blow_up: bool,
    pub blow_up_radius: Option<f64>,
    /// Match mode hit its target (always true when shooting without blow-up).
    pub converged: bool,
}

impl RadialSolution {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "r,u,du,kappa")?;
        for i in 0..self.r.len() {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e}",
                self.r[i], self.u[i], self.du[i], self.kappa_profile[i]
            )?;
        }
        Ok(())
    }
}

// State in s = ln r: (u, w = r u', κ). Then u_s = w, w_s = -r² K e^{2u},
// κ_s = 2π r² K e^{2u}.
fn rhs(k: &RadialCurvature, s: f64, y: &[f64; 3]) -> [f64; 3] {
    let r = s.exp();
    let src = r * r * k.value(r) * (2.0 * y[0]).exp();
    [y[1], -src, 2.0 * PI * src]
}

const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// One Dormand–Prince 5(4) step: (new state, scaled error norm).
fn dopri_step(k: &RadialCurvature, s: f64, y: &[f64; 3], h: f64, opts: &RadialOptions) -> ([f64; 3], f64) {
    let mut stages = [[0.0; 3]; 7];
    stages[0] = rhs(k, s, y);
    for i in 0..6 {
        let mut yi = *y;
        for (j, st) in stages.iter().enumerate().take(i + 1) {
            for d in 0..3 {
                yi[d] += h * A[i][j] * st[d];
            }
        }
        stages[i + 1] = rhs(k, s + C[i] * h, &yi);
        if i == 5 {
            let mut err = 0.0;
            for d in 0..3 {
                let e: f64 = (0..7).map(|j| E[j] * stages[j][d]).sum::<f64>() * h;
                let scale = opts.atol + opts.rtol * y[d].abs().max(yi[d].abs());
                err += (e / scale).powi(2);
            }
            return (yi, (err / 3.0).sqrt());
        }
    }
    unreachable!()
}

enum Outcome {
    Finished,
    BlowUp(f64),
}

/// Integrate from `s` to `s_end`, adapting `h`; stop on blow-up.
fn advance(
    k: &RadialCurvature,
    s: &mut f64,
    y: &mut [f64; 3],
    h: &mut f64,
    s_end: f64,
    opts: &RadialOptions,
) -> Outcome {
    while *s < s_end {
        let step = h.min(s_end - *s);
        let (yn, err) = dopri_step(k, *s, y, step, opts);
        let finite = yn.iter().all(|v| v.is_finite()) && err.is_finite();
        if finite && err <= 1.0 {
            *s += step;
            *y = yn;
            if y[0].abs() > opts.blow_up {
                return Outcome::BlowUp(s.exp());
            }
            let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            *h = (step * grow).max(*h * 0.2);
        } else {
            let shrink = if finite { (0.9 * err.powf(-0.2)).clamp(0.1, 0.5) } else { 0.1 };
            *h = step * shrink;
        }
        if *h < 1e-14 * s.abs().max(1.0) {
            return Outcome::BlowUp(s.exp());
        }
    }
    Outcome::Finished
}

fn shoot(k: &RadialCurvature, u0: f64, opts: &RadialOptions) -> RadialSolution {
    let r0 = opts.r0;
    let k0 = k.value(0.0);
    let a = k0 * (2.0 * u0).exp();
    let mut y = [u0 - a * r0 * r0 / 4.0, -a * r0 * r0 / 2.0, PI * r0 * r0 * a];
    let s0 = r0.ln();
    let s1 = opts.r_max.ln();
    let ds = (s1 - s0) / (opts.samples - 1) as f64;
    let mut s = s0;
    let mut h = ds.min(0.1);
    let mut sol = RadialSolution {
        u0,
        r: vec![r0],
        u: vec![y[0]],
        du: vec![y[1] / r0],
        kappa_profile: vec![y[2]],
        kappa: f64::NAN,
        slope: f64::NAN,
        blow_up: false,
        blow_up_radius: None,
        converged: false,
    };
    for i in 1..opts.samples {
        let target = if i == opts.samples - 1 { s1 } else { s0 + i as f64 * ds };
        if let Outcome::BlowUp(rb) = advance(k, &mut s, &mut y, &mut h, target, opts) {
            sol.blow_up = true;
            sol.blow_up_radius = Some(rb);
            sol.kappa = y[2];
            return sol;
        }
        let r = target.exp();
        sol.r.push(r);
        sol.u.push(y[0]);
        sol.du.push(y[1] / r);
        sol.kappa_profile.push(y[2]);
    }
    sol.kappa = y[2];
    sol.slope = last_decade_slope(&sol.r, &sol.u);
    sol.converged = true;
    sol
}

fn last_decade_slope(r: &[f64], u: &[f64]) -> f64 {
    let r_end = *r.last().unwrap();
    let pts: Vec<(f64, f64)> = r
        .iter()
        .zip(u)
        .filter(|(ri, _)| **ri >= r_end / 10.0)
        .map(|(ri, ui)| (ri.ln(), *ui))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Solve the radial Liouville equation by shooting or by matching `κ`.
pub fn radial_liouville_solve(k: &RadialCurvature, mode: RadialMode, opts: &RadialOptions) -> Result<RadialSolution> {
    k.validate()?;
    opts.validate()?;
    match mode {
        RadialMode::Shoot { u0 } => {
            if !u0.is_finite() {
                return Err(invalid("u0", "must be finite"));
            }
            Ok(shoot(k, u0, opts))
        }
        RadialMode::Match { kappa } => match_kappa(k, kappa, opts),
    }
}

fn match_kappa(k: &RadialCurvature, target: f64, opts: &RadialOptions) -> Result<RadialSolution> {
    let (lo, hi) = k.kappa_range()?;
    if k.sign() == CurvatureSign::Zero {
        if target == 0.0 {
            return Ok(shoot(k, 0.0, opts));
        }
        return Err(Error::KappaOutOfRange { kappa: target, lo, hi });
    }
    if !(target > lo && target < hi) {
        return Err(Error::KappaOutOfRange { kappa: target, lo, hi });
    }
    let orient = if k.sign() == CurvatureSign::Positive { 1.0 } else { -1.0 };
    // Increasing in u0; blow-up counts as overshoot.
    let defect = |sol: &RadialSolution| {
        if sol.blow_up {
            f64::INFINITY
        } else {
            orient * (sol.kappa - target)
        }
    };
    let tol = opts.kappa_tol * target.abs().max(1.0);
    let (mut a, mut b) = (-5.0, 5.0);
    let mut sa = shoot(k, a, opts);
    let mut sb = shoot(k, b, opts);
    let mut expand = 0;
    while defect(&sa) > 0.0 || defect(&sb) < 0.0 {
        expand += 1;
        if expand > 20 {
            return Err(Error::NotBracketed {
                lo: sa.kappa,
                hi: sb.kappa,
            });
        }
        if defect(&sa) > 0.0 {
            a -= 10.0 * expand as f64;
            sa = shoot(k, a, opts);
        }
        if defect(&sb) < 0.0 {
            b += 10.0 * expand as f64;
            sb = shoot(k, b, opts);
        }
    }
    let mut best = if defect(&sa).abs() < defect(&sb).abs() { sa } else { sb };
    for _ in 0..200 {
        if defect(&best).abs() <= tol || b - a < 1e-14 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        let m = 0.5 * (a + b);
        let sm = shoot(k, m, opts);
        let d = defect(&sm);
        if d < 0.0 {
            a = m;
        } else {
            b = m;
        }
        if d.abs() < defect(&best).abs() {
            best = sm;
        }
    }
    best.converged = !best.blow_up && defect(&best).abs() <= tol;
    Ok(best)
}

/// Comparison of `κ = ∫ K e^{2u}` with `-βπ` for a plane mean-field solution.
#[derive(Debug, Clone, Serialize)]
pub struct KappaBetaReport {
    pub beta: f64,
    /// `-βπ`.
    pub kappa_expected: f64,
    /// `-βπ ∫ρ` on the radial grid.
    pub kappa_meanfield: f64,
    /// `κ` of the radial ODE shot from the mean-field `u(0)`.
    pub kappa_ode: f64,
    /// `|κ_ode + βπ| / |βπ|`.
    pub relative_error: f64,
    pub u0: f64,
    pub iterations: usize,
    pub grid_points: usize,
}

/// Solve `ρ ∝ |K| e^{-βΨ_ρ}` radially on the support of `K`, build
/// `u = (-βΨ_ρ + c)/2` with `K e^{2u} = -βπ ρ`, and integrate `κ`.
pub fn kappa_beta_consistency(k: &RadialCurvature, beta: f64, grid_points: usize) -> Result<KappaBetaReport> {
    k.validate()?;
    if k.sign() != CurvatureSign::Positive {
        return Err(invalid("curvature", "needs sign(K) = +1"));
    }
    let a = k
        .support_radius()
        .ok_or_else(|| invalid("curvature", "needs a compactly supported K"))?;
    if !(beta > -4.0 && beta < 0.0) {
        return Err(invalid("beta", format!("must lie in (-4, 0), got {beta}")));
    }
    if grid_points < 16 {
        return Err(invalid("grid_points", "need at least 16 radial cells"));
    }
    let m = grid_points;
    let dr = a / m as f64;
    let r: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) * dr).collect();
    let area: Vec<f64> = r.iter().map(|ri| 2.0 * PI * ri * dr).collect();
    let kv: Vec<f64> = r.iter().map(|&ri| k.value(ri).abs()).collect();
    let ln_r: Vec<f64> = r.iter().map(|ri| ri.ln()).collect();

    // Ψ(r_i) = -[ln r_i M(r_i) + Σ_{j>i} ln r_j m_j]
    let potential = |rho: &[f64]| -> (Vec<f64>, f64) {
        let mass: Vec<f64> = rho.iter().zip(&area).map(|(p, w)| p * w).collect();
        let mut outer: f64 = mass.iter().zip(&ln_r).map(|(mj, l)| mj * l).sum();
        let psi0 = -outer;
        let mut inner = 0.0;
        let mut psi = vec![0.0; m];
        for i in 0..m {
            inner += mass[i];
            outer -= mass[i] * ln_r[i];
            psi[i] = -(ln_r[i] * inner + outer);
        }
        (psi, psi0)
    };
    let gibbs = |psi: &[f64]| -> (Vec<f64>, f64) {
        let raw: Vec<f64> = kv.iter().zip(psi).map(|(kk, p)| kk * (-beta * p).exp()).collect();
        let z: f64 = raw.iter().zip(&area).map(|(v, w)| v * w).sum();
        (raw.iter().map(|v| v / z).collect(), z)
    };

    let z0: f64 = kv.iter().zip(&area).map(|(v, w)| v * w).sum();
    let mut rho: Vec<f64> = kv.iter().map(|v| v / z0).collect();
    let mut iterations = 0;
    let max_iter = 20_000;
    loop {
        iterations += 1;
        let (psi, _) = potential(&rho);
        let (next, _) = gibbs(&psi);
        let scale = next.iter().cloned().fold(0.0, f64::max);
        let change = next.iter().zip(&rho).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs())) / scale;
        for (p, q) in rho.iter_mut().zip(&next) {
            *p = 0.5 * *p + 0.5 * q;
        }
        if change < 1e-13 {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::NonConvergence {
                iterations,
                residual: change,
            });
        }
    }
    let (psi, psi0) = potential(&rho);
    let (rho, z) = gibbs(&psi);
    let kappa_meanfield = -beta * PI * rho.iter().zip(&area).map(|(p, w)| p * w).sum::<f64>();
    let u0 = 0.5 * ((-beta * PI) * (-beta * psi0).exp() / z).ln();
    let opts = RadialOptions {
        r_max: 10.0 * a,
        r0: 1e-6 * a,
        ..RadialOptions::default()
    };
    let sol = shoot(k, u0, &opts);
    let expected = -beta * PI;
    Ok(KappaBetaReport {
        beta,
        kappa_expected: expected,
        kappa_meanfield,
        kappa_ode: sol.kappa,
        relative_error: (sol.kappa - expected).abs() / expected.abs(),
        u0,
        iterations,
        grid_points: m,
    })
}
