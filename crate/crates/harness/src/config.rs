use std::path::{Path, PathBuf};

use oscbath::fpde::Variant;
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    BathCorr,
    Stability,
    EvolveLindblad,
    EvolveFp,
    Wigner,
    ClassicalLimit,
    OrderingSweep,
    GmeCompare,
    ChainOracle,
    SecularCheck,
}

impl Kind {
    pub const ALL: [Kind; 10] = [
        Kind::BathCorr,
        Kind::Stability,
        Kind::EvolveLindblad,
        Kind::EvolveFp,
        Kind::Wigner,
        Kind::ClassicalLimit,
        Kind::OrderingSweep,
        Kind::GmeCompare,
        Kind::ChainOracle,
        Kind::SecularCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::BathCorr => "bath-corr",
            Kind::Stability => "stability",
            Kind::EvolveLindblad => "evolve-lindblad",
            Kind::EvolveFp => "evolve-fp",
            Kind::Wigner => "wigner",
            Kind::ClassicalLimit => "classical-limit",
            Kind::OrderingSweep => "ordering-sweep",
            Kind::GmeCompare => "gme-compare",
            Kind::ChainOracle => "chain-oracle",
            Kind::SecularCheck => "secular-check",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Kind::BathCorr => "bath correlation functions, spectra and the classical/quantum coefficient identity",
            Kind::Stability => "stability margin of the coupled oscillator over a coupling sweep",
            Kind::EvolveLindblad => "Fock-space master equation: stationarity, embedding and evolution invariants",
            Kind::EvolveFp => "phase-space Fokker-Planck evolution with mass, positivity and moment checks",
            Kind::Wigner => "generalized Wigner transforms: round trips, reality, normalization",
            Kind::ClassicalLimit => "hbar sweep of the phase-space equation against its hbar = 0 limit",
            Kind::OrderingSweep => "pairwise distances between orderings over an hbar sweep",
            Kind::GmeCompare => "defects of the generalized-master-equation operator against CLASSICAL",
            Kind::ChainOracle => "harmonic-chain Monte-Carlo correlations and energy relaxation",
            Kind::SecularCheck => "secular average of the non-secular generator",
        }
    }
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    GaussianQuadratic,
    Ohmic,
    Flat,
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableSide {
    Classical,
    Quantum,
}

/// Everything an experiment reads. Missing keys take the defaults below;
/// the manifest records the resolved values.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Option<Kind>,
    pub seed: u64,
    pub physics: Physics,
    pub bath: BathConfig,
    pub numerics: Numerics,
    pub initial: Initial,
    pub lindblad: LindbladConfig,
    pub wigner: WignerConfig,
    pub gme: GmeConfig,
    pub chain: ChainSection,
    pub limit: LimitConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: None,
            seed: 1,
            physics: Physics::default(),
            bath: BathConfig::default(),
            numerics: Numerics::default(),
            initial: Initial::default(),
            lindblad: LindbladConfig::default(),
            wigner: WignerConfig::default(),
            gme: GmeConfig::default(),
            chain: ChainSection::default(),
            limit: LimitConfig::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Physics {
    pub beta: f64,
    pub omega0: f64,
    pub lambda: f64,
    pub lambda_list: Vec<f64>,
    pub hbar: f64,
    pub hbar_list: Vec<f64>,
    pub a: f64,
    pub a_list: Vec<f64>,
}

impl Default for Physics {
    fn default() -> Self {
        Physics {
            beta: 1.0,
            omega0: 1.0,
            lambda: 0.2,
            lambda_list: vec![0.0, 0.1, 0.2, 0.5, 1.0],
            hbar: 1.0,
            hbar_list: vec![0.4, 0.2, 0.1, 0.05],
            a: 0.0,
            a_list: vec![-1.0, 0.0, 1.0],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BathConfig {
    pub family: Family,
    /// `gaussian-quadratic`: u(ω) = amplitude·ω²·exp(−(ω/cutoff)²).
    pub amplitude: f64,
    pub cutoff: f64,
    /// `ohmic`: |ε|²σ = eta·ω·exp(−ω/cutoff).
    pub eta: f64,
    /// `flat`: |ε|²σ = gamma_sq/π on (0, omega_max).
    pub gamma_sq: f64,
    pub omega_max: f64,
    /// `table`: two-column file (ω, coupling) read as a cubic spline.
    pub table: Option<PathBuf>,
    pub table_side: TableSide,
}

impl Default for BathConfig {
    fn default() -> Self {
        BathConfig {
            family: Family::GaussianQuadratic,
            amplitude: 1.0,
            cutoff: 1.0,
            eta: 1.0,
            gamma_sq: 1.0,
            omega_max: 10.0,
            table: None,
            table_side: TableSide::Quantum,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Fock dimension; `None` picks ceil(28/(βħΩ₀)).
    pub dim: Option<usize>,
    pub grid_n: usize,
    pub q_max: f64,
    pub p_max: f64,
    /// Fixed step; `None` uses `dt_fraction` of the stability bound.
    pub dt: Option<f64>,
    pub dt_fraction: f64,
    /// `None` uses `periods` oscillator periods.
    pub t_max: Option<f64>,
    pub periods: f64,
    pub sample_every: usize,
    pub variant: Variant,
    /// Sample points of correlation and spectral tables.
    pub points: usize,
    pub s_max: f64,
    pub omega_hi: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            dim: None,
            grid_n: 256,
            q_max: 8.0,
            p_max: 8.0,
            dt: None,
            dt_fraction: 0.9,
            t_max: None,
            periods: 3.0,
            sample_every: 10,
            variant: Variant::Classical,
            points: 41,
            s_max: 10.0,
            omega_hi: 4.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Initial {
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
}

impl Default for Initial {
    fn default() -> Self {
        Initial { mean: [1.0, 0.0], cov: [[0.5, 0.0], [0.0, 0.5]] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    /// Bath-induced equation of the configured (quantum) bath.
    Model,
    /// General quadratic equation with the coefficients below.
    General,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LindbladConfig {
    pub generator: Generator,
    pub d1: f64,
    pub d2: f64,
    pub d: f64,
    pub lam: f64,
    pub kappa: f64,
    /// Initial state: thermal at `initial_beta` displaced by `alpha`.
    pub initial_beta: f64,
    pub alpha: [f64; 2],
    pub random_matrices: usize,
}

impl Default for LindbladConfig {
    fn default() -> Self {
        LindbladConfig {
            generator: Generator::Model,
            d1: 0.3,
            d2: 0.25,
            d: 0.05,
            lam: 0.2,
            kappa: 0.05,
            initial_beta: 2.0,
            alpha: [0.8, 0.0],
            random_matrices: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    Thermal,
    DisplacedThermal,
    Number,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub state: StateKind,
    pub dim: usize,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub alpha: [f64; 2],
    #[serde(default)]
    pub n: usize,
    /// Orderings to transform; defaults to `physics.a_list`.
    #[serde(default)]
    pub orderings: Option<Vec<f64>>,
    /// Half width of the square phase grid.
    pub extent: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WignerConfig {
    pub grid_n: usize,
    pub states: Vec<StateSpec>,
}

impl Default for WignerConfig {
    fn default() -> Self {
        let th = |state, dim, n, alpha, orderings| StateSpec { state, dim, beta: 0.5, alpha, n, orderings, extent: 24.0 };
        WignerConfig {
            grid_n: 128,
            states: vec![
                th(StateKind::Thermal, 80, 0, [0.0, 0.0], None),
                th(StateKind::DisplacedThermal, 80, 0, [0.5, -0.3], None),
                StateSpec { extent: 14.0, ..th(StateKind::Number, 4, 1, [0.0, 0.0], Some(vec![-1.0, 0.0])) },
                StateSpec { extent: 14.0, ..th(StateKind::Number, 4, 2, [0.0, 0.0], Some(vec![-1.0, 0.0])) },
            ],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmeConfig {
    /// Frequencies of the diffusion-determinant sweep.
    pub omega0_list: Vec<f64>,
    pub residual_grid_n: usize,
    pub positivity_grid_n: usize,
    pub positivity_extent: f64,
    /// Variances of the initial Gaussian along and across the
    /// negative-diffusion eigenvector.
    pub narrow: f64,
    pub wide: f64,
    pub t_max: f64,
    pub dt: f64,
}

impl Default for GmeConfig {
    fn default() -> Self {
        GmeConfig {
            omega0_list: vec![0.5, 0.8, 1.0, 1.3, 1.7, 2.2],
            residual_grid_n: 128,
            positivity_grid_n: 256,
            positivity_extent: 3.0,
            narrow: 0.005,
            wide: 0.05,
            t_max: 0.5,
            dt: 0.005,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub modes: usize,
    pub h0: f64,
    pub h1: f64,
    pub epsilon: f64,
    /// Site carrying the coupling; `None` is the middle of the ring.
    pub site: Option<usize>,
    pub samples: usize,
    /// Correlation grid reaches `corr_fraction` of the recurrence time.
    pub corr_points: usize,
    pub corr_fraction: f64,
    pub relax_lambda: f64,
    pub relax_t_max: f64,
    pub relax_samples: usize,
    pub p0: f64,
    /// Gaussian smoothing width of the discrete coupling density.
    pub density_width: f64,
}

impl Default for ChainSection {
    fn default() -> Self {
        ChainSection {
            modes: 512,
            h0: 1.25,
            h1: -0.5,
            epsilon: 5f64.sqrt(),
            site: None,
            samples: 10_000,
            corr_points: 25,
            corr_fraction: 0.9,
            relax_lambda: 0.1,
            relax_t_max: 60.0,
            relax_samples: 10_000,
            p0: 3.0,
            density_width: 0.03,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitConfig {
    /// ħ values at which the Fock-space route is run as a second oracle.
    pub fock_hbar: Vec<f64>,
    pub fock_dt: f64,
}

impl Default for LimitConfig {
    fn default() -> Self {
        LimitConfig { fock_hbar: vec![0.4], fock_dt: 0.005 }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads a config; relative table paths are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(t), Some(dir)) = (&cfg.bath.table, path.parent()) {
            if t.is_relative() {
                cfg.bath.table = Some(dir.join(t));
            }
        }
        Ok(cfg)
    }

    pub fn t_max(&self) -> f64 {
        self.numerics.t_max.unwrap_or(self.numerics.periods * std::f64::consts::TAU / self.physics.omega0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        let ph = &self.physics;
        if !(ph.beta > 0.0) || !(ph.omega0 > 0.0) {
            return bad("physics.beta and physics.omega0 must be positive");
        }
        if !(ph.lambda >= 0.0) || ph.lambda_list.iter().any(|l| !(*l >= 0.0)) {
            return bad("coupling strengths must be nonnegative");
        }
        if !(ph.hbar > 0.0) || ph.hbar_list.iter().any(|h| !(*h > 0.0)) {
            return bad("hbar values must be positive");
        }
        if ph.hbar_list.windows(2).any(|w| w[1] >= w[0]) {
            return bad("physics.hbar_list must be strictly decreasing");
        }
        if ph.a_list.is_empty() {
            return bad("physics.a_list must not be empty");
        }
        let b = &self.bath;
        if !(b.cutoff > 0.0) || !(b.omega_max > 0.0) || !(b.amplitude >= 0.0) || !(b.eta >= 0.0) || !(b.gamma_sq >= 0.0) {
            return bad("bath parameters out of range");
        }
        if b.family == Family::Table {
            match &b.table {
                Some(p) if p.is_file() => {}
                Some(p) => return Err(HarnessError::Config(format!("coupling table {} does not exist", p.display()))),
                None => return bad("bath.family = \"table\" needs bath.table"),
            }
        }
        let n = &self.numerics;
        if n.grid_n < 4 || !n.grid_n.is_multiple_of(2) || !(n.q_max > 0.0) || !(n.p_max > 0.0) {
            return bad("numerics: grid_n must be even and ≥ 4, extents positive");
        }
        if n.dt.is_some_and(|d| !(d > 0.0)) || !(n.dt_fraction > 0.0 && n.dt_fraction <= 1.0) {
            return bad("numerics: dt must be positive and dt_fraction in (0, 1]");
        }
        if n.t_max.is_some_and(|t| !(t >= 0.0)) || !(n.periods >= 0.0) || n.sample_every == 0 || n.points < 2 {
            return bad("numerics: t_max/periods nonnegative, sample_every ≥ 1, points ≥ 2");
        }
        if n.dim.is_some_and(|d| d < 2) {
            return bad("numerics.dim must be ≥ 2");
        }
        let c = &self.initial.cov;
        if !(c[0][0] > 0.0 && c[0][0] * c[1][1] - c[0][1] * c[1][0] > 0.0) || c[0][1] != c[1][0] {
            return bad("initial.cov must be symmetric positive definite");
        }
        if self.wigner.states.iter().any(|s| s.dim < 2 || !(s.extent > 0.0)) {
            return bad("wigner states need dim ≥ 2 and a positive extent");
        }
        let ch = &self.chain;
        if ch.modes < 2 || ch.samples < 2 || ch.relax_samples < 2 || ch.corr_points < 1 || !(ch.density_width > 0.0) {
            return bad("chain: modes ≥ 2, samples ≥ 2, positive density width");
        }
        if ch.site.is_some_and(|s| s >= ch.modes) {
            return bad("chain.site outside the chain");
        }
        if self.limit.fock_hbar.iter().any(|h| !(*h > 0.0)) || !(self.limit.fock_dt > 0.0) {
            return bad("limit: fock_hbar and fock_dt must be positive");
        }
        Ok(())
    }
}

/// `ceil(28/(βħΩ₀))`, at least 8: keeps the thermal tail below 1e-12.
pub fn auto_dim(beta: f64, hbar: f64, omega0: f64) -> usize {
    ((28.0 / (beta * hbar * omega0)).ceil() as usize).max(8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = ExperimentConfig::default();
        let text = toml::to_string(&c).unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(toml::to_string(&back).unwrap(), text);
        back.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys_and_bad_ranges() {
        assert!(ExperimentConfig::from_toml("[physics]\nbeat = 1.0").is_err());
        let c = ExperimentConfig::from_toml("[physics]\nhbar_list = [0.1, 0.2]").unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::from_toml("[bath]\nfamily = \"table\"\ntable = \"/nonexistent.csv\"").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn kind_names_parse() {
        for k in Kind::ALL {
            let c = ExperimentConfig::from_toml(&format!("kind = \"{}\"", k.name())).unwrap();
            assert_eq!(c.kind, Some(k));
        }
    }
}
