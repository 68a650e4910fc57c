use nalgebra::DVector;
use oscbath::chain::{self, ChainConfig, RelaxationSettings};
use oscbath::fpde::FPOperator;

use crate::config::{ExperimentConfig, Kind};
use crate::report::{Assertion, Report, Table};
use crate::Result;

pub fn chain_oracle(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rep = Report::new(Kind::ChainOracle);
    let ph = &cfg.physics;
    let c = &cfg.chain;
    let mut eps = DVector::zeros(c.modes);
    eps[c.site.unwrap_or(c.modes / 2)] = c.epsilon;
    let free = ChainConfig::nearest_neighbor(c.modes, c.h0, c.h1, eps, ph.beta, 0.0, ph.omega0)?;
    let rec = free.recurrence_time();
    rep.derive("recurrence_time", rec);
    rep.derive("omega_max", free.omega_max());
    rep.derive("stability_bound", free.stability_bound());

    let last = c.corr_points.max(2) - 1;
    let s_grid: Vec<f64> = (0..=last).map(|i| i as f64 * c.corr_fraction * rec / last as f64).collect();
    let samples = chain::gibbs_sample(&free, c.samples, cfg.seed);
    let est = chain::empirical_correlation(&free, &samples, &s_grid);
    let mut t = Table::new("correlation", &["s", "empirical", "stderr", "exact", "z"]);
    let mut worst_z = 0.0f64;
    for (i, &s) in s_grid.iter().enumerate() {
        let exact = free.exact_correlation(s);
        let z = (est.mean[i] - exact).abs() / est.stderr[i];
        worst_z = worst_z.max(z);
        t.push(vec![s, est.mean[i], est.stderr[i], exact, z]);
    }
    rep.check(Assertion::lt("correlation_within_three_standard_errors", worst_z, 3.0));
    rep.tables.push(t);

    let u_sq = 0.5 * free.coupling_density(ph.omega0, c.density_width);
    let predicted = FPOperator::classical_from(u_sq, 0.0, c.relax_lambda, ph.omega0, ph.beta)?.relaxation_rate();
    let settings = RelaxationSettings { n_samples: c.relax_samples, seed: cfg.seed, p0: c.p0, ..Default::default() };
    let curve = chain::relaxation_experiment(&free, c.relax_lambda, c.relax_t_max, &settings)?;
    rep.derive("predicted_rate", predicted);
    rep.derive("fitted_rate", curve.rate);
    rep.derive("fitted_rate_ci95", curve.rate_ci);
    rep.derive("energy_asymptote", curve.asymptote);
    rep.check(Assertion::le("relaxation_rate_relative_error", (curve.rate / predicted - 1.0).abs(), 0.1));
    let mut e = Table::new("energy", &["t", "mean", "stderr", "fit"]);
    for (i, &time) in curve.energy.times.iter().enumerate() {
        let fit = curve.asymptote + curve.amplitude * (-curve.rate * time).exp();
        e.push(vec![time, curve.energy.mean[i], curve.energy.stderr[i], fit]);
    }
    rep.tables.push(e);
    Ok(rep)
}
