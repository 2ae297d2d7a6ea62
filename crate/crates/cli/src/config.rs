use std::path::{Path, PathBuf};

use anyhow::Context;
use curvgas::conformal::RadialCurvature;
use curvgas::hamiltonian::Bump;
use curvgas::meanfield::SolverOptions;
use curvgas::Domain;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Sample,
    Dos,
    Meanfield,
    Caloric,
    TwoSpecies,
    Nirenberg,
    Radial,
    LlnVerify,
    KappaBeta,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Dos => "dos",
            Command::Meanfield => "meanfield",
            Command::Caloric => "caloric",
            Command::TwoSpecies => "two-species",
            Command::Nirenberg => "nirenberg",
            Command::Radial => "radial",
            Command::LlnVerify => "lln-verify",
            Command::KappaBeta => "kappa-beta",
        }
    }
}

/// A validation failure tied to a config key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub reason: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid config key `{}`: {}", self.key, self.reason)
    }
}

impl std::error::Error for ConfigError {}

fn bad(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.to_string(),
        reason: reason.into(),
    }
}

fn positive(key: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("must be positive and finite, got {v}")))
    }
}

fn finite(key: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(bad(key, format!("must be finite, got {v}")))
    }
}

fn at_least(key: &str, v: usize, min: usize) -> Result<(), ConfigError> {
    if v >= min {
        Ok(())
    } else {
        Err(bad(key, format!("must be at least {min}, got {v}")))
    }
}

fn increasing(key: &str, v: &[f64]) -> Result<(), ConfigError> {
    if v.is_empty() {
        return Err(bad(key, "must not be empty"));
    }
    if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad(key, "must be finite and strictly increasing"));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Sphere,
    Disk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: DomainKind,
    /// Sphere dimension.
    pub n: usize,
    /// Grid resolution: `[n_theta, n_phi]` on S², `[points]` on other
    /// spheres, `[n_r, n_angle]` on the disk.
    pub resolution: Vec<usize>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig {
            kind: DomainKind::Sphere,
            n: 2,
            resolution: vec![32, 64],
        }
    }
}

impl DomainConfig {
    fn disk() -> Self {
        DomainConfig {
            kind: DomainKind::Disk,
            n: 2,
            resolution: vec![16, 32],
        }
    }

    pub fn domain(&self) -> Domain {
        match self.kind {
            DomainKind::Sphere => Domain::sphere(self.n),
            DomainKind::Disk => Domain::Disk2d,
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.kind == DomainKind::Sphere {
            at_least("domain.n", self.n, 1)?;
        }
        let expected = match (self.kind, self.n) {
            (DomainKind::Sphere, 2) | (DomainKind::Disk, _) => 2,
            _ => 1,
        };
        if self.resolution.len() != expected || self.resolution.contains(&0) {
            return Err(bad(
                "domain.resolution",
                format!("expected {expected} positive integers, got {:?}", self.resolution),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Zero,
    /// Bumps at `±e_last`.
    TwoBumps,
    /// One bump at `+e_last`.
    OneBump,
    Bumps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub kind: FieldKind,
    pub amplitude: f64,
    pub concentration: f64,
    pub bumps: Vec<Bump>,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            kind: FieldKind::TwoBumps,
            amplitude: 1.0,
            concentration: 5.0,
            bumps: Vec::new(),
        }
    }
}

impl FieldConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        finite("field.amplitude", self.amplitude)?;
        positive("field.concentration", self.concentration)?;
        if self.kind == FieldKind::Bumps && self.bumps.is_empty() {
            return Err(bad("field.bumps", "kind = \"bumps\" needs at least one bump"));
        }
        for b in &self.bumps {
            finite("field.bumps.amplitude", b.amplitude)?;
            positive("field.bumps.concentration", b.concentration)?;
            if b.center.iter().any(|c| !c.is_finite()) {
                return Err(bad("field.bumps.center", "must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Canonical,
    Microcanonical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleConfig {
    pub kind: EnsembleKind,
    pub beta: f64,
    pub eps: f64,
    /// `eps` is measured from `ε_∞` of the field.
    pub eps_relative: bool,
    pub sigma: f64,
    pub n: usize,
    pub steps: usize,
    pub thin: usize,
    pub burn_in: Option<usize>,
    pub proposal_scale: f64,
    pub chains: usize,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            kind: EnsembleKind::Canonical,
            beta: 0.0,
            eps: 0.0,
            eps_relative: false,
            sigma: 0.1,
            n: 16,
            steps: 10_000,
            thin: 10,
            burn_in: None,
            proposal_scale: 0.3,
            chains: 1,
        }
    }
}

impl EnsembleConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        finite("ensemble.beta", self.beta)?;
        finite("ensemble.eps", self.eps)?;
        positive("ensemble.sigma", self.sigma)?;
        at_least("ensemble.n", self.n, 1)?;
        at_least("ensemble.steps", self.steps, 1)?;
        at_least("ensemble.thin", self.thin, 1)?;
        positive("ensemble.proposal_scale", self.proposal_scale)?;
        at_least("ensemble.chains", self.chains, 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub energy_tol: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub sigma_schedule: Vec<f64>,
    pub stage_iterations: usize,
    pub newton_iterations: usize,
    pub beta_cap: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        SolverConfig {
            tol: d.tol,
            energy_tol: d.energy_tol,
            max_iter: d.max_iter,
            damping: d.damping,
            sigma_schedule: d.sigma_schedule,
            stage_iterations: d.stage_iterations,
            newton_iterations: d.newton_iterations,
            beta_cap: d.beta_cap,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        positive("solver.tol", self.tol)?;
        positive("solver.energy_tol", self.energy_tol)?;
        at_least("solver.max_iter", self.max_iter, 1)?;
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(bad("solver.damping", format!("must lie in (0, 1], got {}", self.damping)));
        }
        if self.sigma_schedule.is_empty() {
            return Err(bad("solver.sigma_schedule", "must not be empty"));
        }
        for &s in &self.sigma_schedule {
            positive("solver.sigma_schedule", s)?;
        }
        at_least("solver.stage_iterations", self.stage_iterations, 1)?;
        positive("solver.beta_cap", self.beta_cap)
    }

    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            energy_tol: self.energy_tol,
            max_iter: self.max_iter,
            damping: self.damping,
            sigma_schedule: self.sigma_schedule.clone(),
            stage_iterations: self.stage_iterations,
            newton_iterations: self.newton_iterations,
            beta_cap: self.beta_cap,
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MeanfieldMode {
    Canonical,
    Microcanonical,
    Penalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanfieldConfig {
    pub mode: MeanfieldMode,
    pub beta: f64,
    pub eps: f64,
    pub eps_relative: bool,
    pub sigma: f64,
}

impl Default for MeanfieldConfig {
    fn default() -> Self {
        MeanfieldConfig {
            mode: MeanfieldMode::Microcanonical,
            beta: 0.0,
            eps: 0.1,
            eps_relative: true,
            sigma: 0.1,
        }
    }
}

impl MeanfieldConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        finite("meanfield.beta", self.beta)?;
        finite("meanfield.eps", self.eps)?;
        positive("meanfield.sigma", self.sigma)
    }
}

/// Energy grid given either explicitly or as a uniform range. Unset range
/// fields take command-specific defaults in [`RunConfig::resolve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyGrid {
    pub eps: Option<Vec<f64>>,
    pub eps_min: Option<f64>,
    pub eps_max: Option<f64>,
    pub points: Option<usize>,
    /// Energies are offsets from `ε_∞`.
    pub eps_relative: bool,
}

impl Default for EnergyGrid {
    fn default() -> Self {
        EnergyGrid {
            eps: None,
            eps_min: None,
            eps_max: None,
            points: None,
            eps_relative: true,
        }
    }
}

impl EnergyGrid {
    fn fill(&mut self, eps_min: f64, eps_max: f64, points: usize) {
        if self.eps.is_none() {
            self.eps_min.get_or_insert(eps_min);
            self.eps_max.get_or_insert(eps_max);
            self.points.get_or_insert(points);
        }
    }

    fn validate(&self, section: &str) -> Result<(), ConfigError> {
        match &self.eps {
            Some(list) => increasing(&format!("{section}.eps"), list),
            None => {
                let (lo, hi, points) = self.range(section)?;
                finite(&format!("{section}.eps_min"), lo)?;
                finite(&format!("{section}.eps_max"), hi)?;
                at_least(&format!("{section}.points"), points, 1)?;
                if points > 1 && hi <= lo {
                    return Err(bad(&format!("{section}.eps_max"), "must exceed eps_min"));
                }
                Ok(())
            }
        }
    }

    fn range(&self, section: &str) -> Result<(f64, f64, usize), ConfigError> {
        match (self.eps_min, self.eps_max, self.points) {
            (Some(a), Some(b), Some(p)) => Ok((a, b, p)),
            _ => Err(bad(&format!("{section}.eps"), "give eps or all of eps_min, eps_max, points")),
        }
    }

    /// Absolute energies given `ε_∞`.
    pub fn values(&self, eps_inf: f64) -> Vec<f64> {
        let base = if self.eps_relative { eps_inf } else { 0.0 };
        let raw = match &self.eps {
            Some(list) => list.clone(),
            None => {
                let (lo, hi, points) = self.range("").expect("validated energy grid");
                if points == 1 {
                    vec![lo]
                } else {
                    (0..points)
                        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
                        .collect()
                }
            }
        };
        raw.into_iter().map(|e| base + e).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoSpeciesConfig {
    /// Target energies; ignored when `beta` is set.
    pub eps: Vec<f64>,
    pub beta: Option<f64>,
}

impl Default for TwoSpeciesConfig {
    fn default() -> Self {
        TwoSpeciesConfig {
            eps: vec![0.0, 0.01, 0.02, 0.05],
            beta: None,
        }
    }
}

impl TwoSpeciesConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        match self.beta {
            Some(b) => finite("two_species.beta", b),
            None => increasing("two_species.eps", &self.eps),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Species {
    /// All circulations `+1`.
    Single,
    /// `N/2` of each sign.
    Neutral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DosConfig {
    pub n: usize,
    pub species: Species,
    pub bins: usize,
    pub window: Option<[f64; 2]>,
    pub flatness: f64,
    pub ln_f_initial: f64,
    pub ln_f_final: f64,
    pub max_sweeps: usize,
    pub walkers: usize,
    pub proposal_scale: f64,
    pub prerun_samples: usize,
}

impl Default for DosConfig {
    fn default() -> Self {
        DosConfig {
            n: 8,
            species: Species::Single,
            bins: 40,
            window: None,
            flatness: 0.8,
            ln_f_initial: 1.0,
            ln_f_final: 1e-5,
            max_sweeps: 2_000_000,
            walkers: 1,
            proposal_scale: 0.3,
            prerun_samples: 20_000,
        }
    }
}

impl DosConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        at_least("dos.n", self.n, 2)?;
        if self.species == Species::Neutral && self.n % 2 == 1 {
            return Err(bad("dos.n", "a neutral system needs an even particle count"));
        }
        at_least("dos.bins", self.bins, 2)?;
        if let Some([lo, hi]) = self.window {
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(bad("dos.window", "must be finite with hi > lo"));
            }
        }
        if !(self.flatness > 0.0 && self.flatness < 1.0) {
            return Err(bad("dos.flatness", "must lie in (0, 1)"));
        }
        positive("dos.ln_f_initial", self.ln_f_initial)?;
        positive("dos.ln_f_final", self.ln_f_final)?;
        if self.ln_f_final >= self.ln_f_initial {
            return Err(bad("dos.ln_f_final", "must be below ln_f_initial"));
        }
        at_least("dos.max_sweeps", self.max_sweeps, 1)?;
        at_least("dos.walkers", self.walkers, 1)?;
        positive("dos.proposal_scale", self.proposal_scale)?;
        at_least("dos.prerun_samples", self.prerun_samples, 10)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadialConfig {
    pub curvature: RadialCurvature,
    /// Shooting value `u(0)`; exclusive with `kappa`.
    pub u0: Option<f64>,
    /// Target total curvature for match mode.
    pub kappa: Option<f64>,
    pub r_max: f64,
    pub r0: f64,
    pub rtol: f64,
    pub atol: f64,
    pub samples: usize,
    pub blow_up: f64,
    pub kappa_tol: f64,
}

impl Default for RadialConfig {
    fn default() -> Self {
        let o = curvgas::conformal::RadialOptions::default();
        RadialConfig {
            curvature: RadialCurvature::Constant { value: 1.0 },
            u0: None,
            kappa: None,
            r_max: o.r_max,
            r0: o.r0,
            rtol: o.rtol,
            atol: o.atol,
            samples: o.samples,
            blow_up: o.blow_up,
            kappa_tol: o.kappa_tol,
        }
    }
}

impl RadialConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.u0.is_some() && self.kappa.is_some() {
            return Err(bad("radial.kappa", "set either u0 or kappa, not both"));
        }
        if let Some(u) = self.u0 {
            finite("radial.u0", u)?;
        }
        if let Some(k) = self.kappa {
            finite("radial.kappa", k)?;
        }
        positive("radial.r0", self.r0)?;
        positive("radial.r_max", self.r_max)?;
        if self.r_max <= self.r0 {
            return Err(bad("radial.r_max", "must exceed r0"));
        }
        positive("radial.rtol", self.rtol)?;
        positive("radial.atol", self.atol)?;
        at_least("radial.samples", self.samples, 2)?;
        positive("radial.blow_up", self.blow_up)?;
        positive("radial.kappa_tol", self.kappa_tol)?;
        validate_curvature("radial.curvature", &self.curvature)
    }

    pub fn options(&self) -> curvgas::conformal::RadialOptions {
        curvgas::conformal::RadialOptions {
            r_max: self.r_max,
            r0: self.r0,
            rtol: self.rtol,
            atol: self.atol,
            samples: self.samples,
            blow_up: self.blow_up,
            kappa_tol: self.kappa_tol,
        }
    }
}

fn validate_curvature(key: &str, k: &RadialCurvature) -> Result<(), ConfigError> {
    match *k {
        RadialCurvature::Constant { value } => finite(&format!("{key}.value"), value),
        RadialCurvature::Gaussian { amplitude, width } => {
            finite(&format!("{key}.amplitude"), amplitude)?;
            positive(&format!("{key}.width"), width)
        }
        RadialCurvature::CompactBump { amplitude, radius } => {
            finite(&format!("{key}.amplitude"), amplitude)?;
            positive(&format!("{key}.radius"), radius)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlnConfig {
    pub n_values: Vec<usize>,
    pub eps: f64,
    pub eps_relative: bool,
    pub sigma: f64,
    pub steps: usize,
    pub thin: usize,
    pub proposal_scale: f64,
}

impl Default for LlnConfig {
    fn default() -> Self {
        LlnConfig {
            n_values: vec![16, 32, 64],
            eps: -0.03,
            eps_relative: true,
            sigma: 0.1,
            steps: 20_000,
            thin: 10,
            proposal_scale: 0.3,
        }
    }
}

impl LlnConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.n_values.is_empty() || self.n_values.contains(&0) || self.n_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("lln.n_values", "must be positive and strictly increasing"));
        }
        finite("lln.eps", self.eps)?;
        positive("lln.sigma", self.sigma)?;
        at_least("lln.steps", self.steps, 1)?;
        at_least("lln.thin", self.thin, 1)?;
        positive("lln.proposal_scale", self.proposal_scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KappaBetaConfig {
    pub curvature: RadialCurvature,
    pub betas: Vec<f64>,
    pub grid_points: usize,
}

impl Default for KappaBetaConfig {
    fn default() -> Self {
        KappaBetaConfig {
            curvature: RadialCurvature::CompactBump {
                amplitude: 1.0,
                radius: 1.0,
            },
            betas: vec![-3.0, -2.0, -1.0, -0.05],
            grid_points: 4000,
        }
    }
}

impl KappaBetaConfig {
    fn validate(&self) -> Result<(), ConfigError> {
        if self.betas.is_empty() {
            return Err(bad("kappa_beta.betas", "must not be empty"));
        }
        for &b in &self.betas {
            if !(b > -4.0 && b < 0.0) {
                return Err(bad("kappa_beta.betas", format!("each beta must lie in (-4, 0), got {b}")));
            }
        }
        at_least("kappa_beta.grid_points", self.grid_points, 16)?;
        validate_curvature("kappa_beta.curvature", &self.curvature)
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub domain: Option<DomainConfig>,
    pub field: FieldConfig,
    pub ensemble: EnsembleConfig,
    pub solver: SolverConfig,
    pub meanfield: MeanfieldConfig,
    pub caloric: EnergyGrid,
    pub two_species: TwoSpeciesConfig,
    pub dos: DosConfig,
    pub nirenberg: EnergyGrid,
    pub radial: RadialConfig,
    pub lln: LlnConfig,
    pub kappa_beta: KappaBetaConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: None,
            seed: 0,
            out: PathBuf::from("curvgas-out"),
            threads: None,
            domain: None,
            field: FieldConfig::default(),
            ensemble: EnsembleConfig::default(),
            solver: SolverConfig::default(),
            meanfield: MeanfieldConfig::default(),
            caloric: EnergyGrid::default(),
            two_species: TwoSpeciesConfig::default(),
            dos: DosConfig::default(),
            nirenberg: EnergyGrid::default(),
            radial: RadialConfig::default(),
            lln: LlnConfig::default(),
            kappa_beta: KappaBetaConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| anyhow::anyhow!("config parse error: {e}"))
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml_str(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Fill command-dependent defaults: the disk for `dos` and
    /// `two-species`, S² (32×64) otherwise.
    pub fn resolve(&mut self) {
        if self.domain.is_none() {
            self.domain = Some(match self.command {
                Some(Command::Dos) | Some(Command::TwoSpecies) => DomainConfig::disk(),
                _ => DomainConfig::default(),
            });
        }
        self.caloric.fill(-0.1, 0.3, 9);
        self.nirenberg.fill(1.5, 2.1, 4);
    }

    pub fn domain_config(&self) -> &DomainConfig {
        self.domain.as_ref().expect("resolved config")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.command.is_none() {
            return Err(bad("command", "no command given on the command line or in the config"));
        }
        if self.threads == Some(0) {
            return Err(bad("threads", "must be at least 1"));
        }
        if let Some(d) = &self.domain {
            d.validate()?;
        }
        self.field.validate()?;
        self.ensemble.validate()?;
        self.solver.validate()?;
        self.meanfield.validate()?;
        self.caloric.validate("caloric")?;
        self.two_species.validate()?;
        self.dos.validate()?;
        self.nirenberg.validate("nirenberg")?;
        self.radial.validate()?;
        self.lln.validate()?;
        self.kappa_beta.validate()?;
        match (self.command, self.domain.as_ref().map(|d| d.kind)) {
            (Some(Command::TwoSpecies), Some(DomainKind::Sphere)) => {
                Err(bad("domain.kind", "two-species runs need the disk"))
            }
            (Some(Command::Nirenberg), _) | (Some(Command::Caloric), _) | (Some(Command::Meanfield), _)
                if self.domain.as_ref().is_some_and(|d| d.kind == DomainKind::Disk) && self.field.kind != FieldKind::Zero =>
            {
                Err(bad("field.kind", "bump fields are defined on spheres; use kind = \"zero\" on the disk"))
            }
            (Some(Command::Nirenberg), Some(DomainKind::Disk)) => {
                Err(bad("domain.kind", "nirenberg runs need a sphere"))
            }
            _ => Ok(()),
        }
    }

    /// SHA-256 of the canonical JSON form. Keys are sorted, so the hash does
    /// not depend on key order in the file. `out` and `threads` are excluded.
    pub fn content_hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let serde_json::Value::Object(map) = &mut value {
            map.remove("out");
            map.remove("threads");
        }
        let canonical = serde_json::to_string(&value).expect("json");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
