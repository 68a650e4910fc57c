use oscbath::bath::{self, families, BathSpec, Profile};
use oscbath::wigner::PhaseGrid;
use oscbath::{BathSpec64, PhaseGrid64};

use crate::config::{ExperimentConfig, Family, Kind, TableSide};
use crate::report::Report;
use crate::{HarnessError, Result};

mod chain;
mod phase;
mod quantum;
mod spectra;

pub fn run(kind: Kind, cfg: &ExperimentConfig) -> Result<Report> {
    match kind {
        Kind::BathCorr => spectra::bath_corr(cfg),
        Kind::Stability => spectra::stability(cfg),
        Kind::EvolveLindblad => quantum::evolve_lindblad(cfg),
        Kind::Wigner => quantum::wigner(cfg),
        Kind::SecularCheck => quantum::secular_check(cfg),
        Kind::EvolveFp => phase::evolve_fp(cfg),
        Kind::ClassicalLimit => phase::classical_limit(cfg),
        Kind::OrderingSweep => phase::ordering_sweep(cfg),
        Kind::GmeCompare => phase::gme_compare(cfg),
        Kind::ChainOracle => chain::chain_oracle(cfg),
    }
}

/// Bath of the `[bath]` section at `physics.beta`.
pub(crate) fn bath_spec(cfg: &ExperimentConfig) -> Result<BathSpec64> {
    let b = &cfg.bath;
    let beta = cfg.physics.beta;
    let spec = match b.family {
        Family::GaussianQuadratic => families::gaussian_quadratic(b.amplitude, b.cutoff, beta)?,
        Family::Ohmic => families::ohmic(b.eta, b.cutoff, beta)?,
        Family::Flat => families::flat(b.gamma_sq, b.omega_max, beta)?,
        Family::Table => {
            let path = b.table.as_ref().ok_or_else(|| HarnessError::Config("bath.table missing".into()))?;
            let profile = oscbath::io::read_coupling_profile(path)?;
            match b.table_side {
                TableSide::Classical => BathSpec::classical(profile, None, beta)?,
                TableSide::Quantum => BathSpec::quantum(profile, Profile::Constant(1.0), None, beta)?,
            }
        }
    };
    Ok(spec)
}

/// Classical view of a spec: quantum specs go through the `u² = 4|ε|²σωΩ₀`
/// correspondence.
pub(crate) fn classical_view(spec: &BathSpec64, omega0: f64) -> Result<BathSpec64> {
    Ok(if spec.is_quantum() { bath::classical_correspondence(spec, omega0)? } else { spec.clone() })
}

pub(crate) fn quantum_bath(cfg: &ExperimentConfig) -> Result<BathSpec64> {
    let spec = bath_spec(cfg)?;
    if !spec.is_quantum() {
        return Err(HarnessError::Config(format!("{:?} is a classical bath; this experiment needs a quantum one", cfg.bath.family)));
    }
    Ok(spec)
}

pub(crate) fn phase_grid(cfg: &ExperimentConfig) -> Result<PhaseGrid64> {
    let n = &cfg.numerics;
    Ok(PhaseGrid::symmetric(n.q_max, n.p_max, n.grid_n, n.grid_n)?)
}

pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}
