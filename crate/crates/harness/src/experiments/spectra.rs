use oscbath::bath::{self, families, BathCorrelations};
use oscbath::fpde::{self, FPOperator, FPParams, Variant};

use super::{bath_spec, classical_view, linspace};
use crate::config::{ExperimentConfig, Kind};
use crate::report::{Assertion, Report, Table};
use crate::Result;

pub fn bath_corr(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rep = Report::new(Kind::BathCorr);
    let ph = &cfg.physics;
    let spec = bath_spec(cfg)?;
    let cl = classical_view(&spec, ph.omega0)?;

    let mut corr = Table::new("time_correlations", &["s", "h", "g"]);
    for s in linspace(0.0, cfg.numerics.s_max, cfg.numerics.points) {
        let (h, g) = bath::time_correlations(&cl, s)?;
        corr.push(vec![s, h, g]);
    }
    let h0 = corr.rows[0][1];

    let mut spectral = Table::new("spectral", &["omega", "h_tilde", "im_g_tilde", "re_g_bar", "im_g_bar", "re_h_bar"]);
    let hi = cfg.numerics.omega_hi;
    let mut min_h = f64::INFINITY;
    let mut relation = 0.0f64;
    for w in linspace(hi / cfg.numerics.points as f64, hi, cfg.numerics.points) {
        let sc = bath::spectral_correlations(&cl, w)?;
        min_h = min_h.min(sc.h_tilde);
        let expect = cl.beta * w * sc.h_tilde;
        relation = relation.max((sc.g_tilde.im - expect).abs().max(sc.g_tilde.re.abs()) / expect.abs().max(1e-300));
        spectral.push(vec![w, sc.h_tilde, sc.g_tilde.im, sc.g_bar.re, sc.g_bar.im, sc.h_bar.re]);
    }
    rep.check(Assertion::ge("h_tilde_nonnegative", min_h, 0.0));
    rep.check(Assertion::le("g_tilde_equals_i_beta_omega_h_tilde", relation, 1e-12));

    // h(0) against a trapezoid sum of h̃/(2π) over the support
    let edge = cl.edge.unwrap_or(45.0 * cfg.bath.cutoff.max(ph.omega0));
    let n = 400_000;
    let dw = 2.0 * edge / n as f64;
    let integrand = |w: f64| if w == 0.0 { 0.0 } else { cl.u_sq(w) / (cl.beta * w * w) };
    let trap: f64 = (0..=n)
        .map(|i| {
            let w = -edge + i as f64 * dw;
            let f = if w == 0.0 { 0.5 * (integrand(dw * 1e-3) + integrand(-dw * 1e-3)) } else { integrand(w) };
            if i == 0 || i == n { 0.5 * f } else { f }
        })
        .sum::<f64>()
        * dw;
    rep.check(Assertion::le("h0_matches_spectral_sum", (trap - h0).abs() / h0.abs().max(1e-300), 1e-6));

    let bc = BathCorrelations::at(&spec, ph.omega0, ph.hbar)?;
    rep.derive("delta_shift", bc.delta_shift);
    rep.derive("chi_coeff", bc.chi_coeff);
    rep.derive("u_sq_at_omega0", bc.u_sq);
    rep.derive("gamma_sq", bc.gamma_sq);
    rep.derive("occupancy", bc.occupancy);
    rep.derive("h_tilde_at_omega0", bc.h_tilde);
    rep.derive("h_zero", h0);

    // The classical momentum diffusion built from a quantum spectrum, two ways,
    // against the ħ → 0 limit of the quantum coefficient, over a sweep.
    let mut ident = Table::new(
        "correspondence",
        &["eta", "cutoff", "beta", "lambda", "omega0", "quarter_rule_dpp", "quantum_limit_half", "classical_dpp", "quantum_ps_dpp"],
    );
    let (mut worst_printed, mut worst_library) = (0.0f64, 0.0f64);
    for i in 0..10 {
        let x = i as f64;
        let (eta, cutoff, beta, lambda, w0) = (0.5 + 0.15 * x, 2.0 + 0.3 * x, 0.5 + 0.2 * x, 0.05 + 0.03 * x, 0.6 + 0.1 * x);
        let q = families::ohmic(eta, cutoff, beta)?;
        let u = bath::classical_correspondence(&q, w0)?.coupling.eval(w0);
        let qs = bath::quantum_spectra(&q, 0.0, w0)?;
        let delta = bath::frequency_shifts(&q, w0)?.delta;
        let quarter = FPOperator::classical_from(0.25 * u * u, delta, lambda, w0, beta)?.diffusion[1][1];
        let half_limit = lambda * lambda * qs.gamma_sq * w0 * qs.n / 2.0;
        let params = FPParams { spec: Some(q), lambda: Some(lambda), omega0: Some(w0), hbar: Some(0.0), a: Some(0.0), ..Default::default() };
        let classical = fpde::build(Variant::Classical, &params)?.diffusion[1][1];
        let quantum = fpde::build(Variant::QuantumPs, &params)?.diffusion[1][1];
        worst_printed = worst_printed.max((quarter - half_limit).abs() / half_limit.abs());
        worst_library = worst_library.max((classical - quantum).abs() / quantum.abs());
        ident.push(vec![eta, cutoff, beta, lambda, w0, quarter, half_limit, classical, quantum]);
    }
    rep.check(Assertion::le("quarter_rule_matches_quantum_limit", worst_printed, 1e-12));
    rep.check(Assertion::le("classical_matches_quantum_ps_at_hbar_zero", worst_library, 1e-12));

    rep.tables = vec![corr, spectral, ident];
    Ok(rep)
}

pub fn stability(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rep = Report::new(Kind::Stability);
    let ph = &cfg.physics;
    let cl = classical_view(&bath_spec(cfg)?, ph.omega0)?;
    let (ok0, m0) = bath::stability_check(&cl, 0.0, ph.omega0)?;
    rep.check(Assertion::holds("uncoupled_is_stable", ok0 && m0 == ph.omega0 * ph.omega0, m0, "ok and margin = omega0^2"));

    let (_, m1) = bath::stability_check(&cl, 1.0, ph.omega0)?;
    let integral = ph.omega0 * ph.omega0 - m1;
    let crit = if integral > 0.0 { ph.omega0 / integral.sqrt() } else { f64::INFINITY };
    rep.derive("coupling_integral", integral);
    rep.derive("critical_lambda", crit);

    let mut lams = ph.lambda_list.clone();
    lams.sort_by(|a, b| a.total_cmp(b));
    let mut t = Table::new("margins", &["lambda", "margin", "stable"]);
    let mut quad_err = 0.0f64;
    for &l in &lams {
        let (ok, m) = bath::stability_check(&cl, l, ph.omega0)?;
        let expect = ph.omega0 * ph.omega0 - l * l * integral;
        quad_err = quad_err.max((m - expect).abs() / (ph.omega0 * ph.omega0));
        rep.check(Assertion::holds(&format!("stable_flag_at_lambda_{l}"), ok == (l <= crit), m, "ok iff lambda <= critical"));
        t.push(vec![l, m, if ok { 1.0 } else { 0.0 }]);
    }
    let monotone = t.rows.windows(2).all(|w| w[1][1] <= w[0][1]);
    rep.check(Assertion::holds("margin_nonincreasing_in_lambda", monotone, t.rows.len() as f64, "monotone"));
    rep.check(Assertion::le("margin_quadratic_in_lambda", quad_err, 1e-10));
    rep.tables.push(t);
    Ok(rep)
}
