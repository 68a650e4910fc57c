use oscbath::fock::{self, FockBasis};
use oscbath::fpde::{self, FPOperator, FPParams, FPSolver, Variant};
use oscbath::lindblad::{self, LindbladCoefficients};
use oscbath::wigner::{self, OrderingKernel, PhaseGrid};
use oscbath::{BathSpec64, Complex, PhaseGrid64, PhaseSpaceField64};

use super::{bath_spec, phase_grid, quantum_bath};
use crate::config::{auto_dim, ExperimentConfig, Kind};
use crate::report::{Assertion, Report, Table};
use crate::{HarnessError, Result};

fn params(cfg: &ExperimentConfig, spec: &BathSpec64, hbar: f64, a: f64) -> FPParams<f64> {
    let ph = &cfg.physics;
    FPParams {
        spec: Some(spec.clone()),
        lambda: Some(ph.lambda),
        omega0: Some(ph.omega0),
        beta: Some(ph.beta),
        hbar: Some(hbar),
        a: Some(a),
        ..Default::default()
    }
}

/// Outcome of one solver run from the configured initial Gaussian.
struct Run {
    field: PhaseSpaceField64,
    /// Sup distance from the exact Gaussian propagated by the moment equations.
    grid_error: f64,
    dt: f64,
}

fn step_for(cfg: &ExperimentConfig, solver: &FPSolver<f64>) -> f64 {
    cfg.numerics.dt.unwrap_or(cfg.numerics.dt_fraction * solver.max_dt())
}

fn run_gaussian(cfg: &ExperimentConfig, op: &FPOperator<f64>, grid: &PhaseGrid64) -> Result<Run> {
    let init = &cfg.initial;
    let f0 = fpde::gaussian_field(grid, init.mean, init.cov)?;
    let solver = FPSolver::new(op, grid);
    let dt = step_for(cfg, &solver);
    let t_max = cfg.t_max();
    let field = solver.evolve(&f0, t_max, dt, usize::MAX)?.last().clone();
    let (m, c) = op.evolve_moments(init.mean, init.cov, t_max);
    let exact = fpde::gaussian_field(grid, m, c)?;
    Ok(Run { grid_error: field.sup_distance(&exact), field, dt })
}

fn same_operator(a: &FPOperator<f64>, b: &FPOperator<f64>) -> bool {
    a.drift == b.drift && a.diffusion == b.diffusion && a.renorm_factor == b.renorm_factor
}

pub fn evolve_fp(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rep = Report::new(Kind::EvolveFp);
    let ph = &cfg.physics;
    let variant = cfg.numerics.variant;
    let op = match variant {
        Variant::General => {
            let lc = &cfg.lindblad;
            let k = LindbladCoefficients {
                d1: lc.d1,
                d2: lc.d2,
                d: lc.d,
                lam: lc.lam,
                kappa: lc.kappa,
                omega0: ph.omega0,
                hbar: ph.hbar,
                renorm: 1.0,
            };
            FPOperator::general_from(&k, ph.a)?
        }
        _ => fpde::build(variant, &params(cfg, &bath_spec(cfg)?, ph.hbar, ph.a))?,
    };
    rep.derive("operator", serde_json::from_str::<serde_json::Value>(&op.to_json()).unwrap_or_default());
    rep.derive("relaxation_rate", op.relaxation_rate());
    let grid = phase_grid(cfg)?;
    let init = &cfg.initial;
    let f0 = fpde::gaussian_field(&grid, init.mean, init.cov)?;
    let solver = FPSolver::new(&op, &grid);
    let dt = step_for(cfg, &solver);
    rep.derive("dt", dt);
    rep.derive("max_dt", solver.max_dt());
    rep.derive("well_balanced", solver.is_well_balanced());

    let stationary = fpde::moments(&op).ok().map(|m| fpde::gaussian_field(&grid, [0.0, 0.0], m.stationary_covariance)).transpose()?;
    if let Ok(m) = fpde::moments(&op) {
        rep.derive("stationary_covariance", m.stationary_covariance);
    }
    let mass0 = f0.integral();
    let mut t = Table::new(
        "moments",
        &["t", "mass", "mean_q", "mean_p", "cov_qq", "cov_qp", "cov_pp", "min_over_max", "relative_entropy", "moment_error"],
    );
    let (mut mass_err, mut worst_neg, mut entropy_rise, mut moment_err) = (0.0f64, 0.0f64, f64::NEG_INFINITY, 0.0f64);
    let entropy = |f: &PhaseSpaceField64| stationary.as_ref().map_or(f64::NAN, |s| fpde::relative_entropy(f, s));
    let mut prev = entropy(&f0);
    let row = |t: &mut Table, time: f64, f: &PhaseSpaceField64, s: f64, me: f64| {
        let (m, c) = f.moments();
        t.push(vec![time, f.integral(), m[0], m[1], c[0][0], c[0][1], c[1][1], f.min() / f.max(), s, me]);
    };
    row(&mut t, 0.0, &f0, prev, 0.0);
    let every = cfg.numerics.sample_every;
    let mut last_field = f0.clone();
    solver.evolve_with(&f0, cfg.t_max(), dt, |step, time, f, last| {
        mass_err = mass_err.max((f.integral() - mass0).abs() / mass0);
        worst_neg = worst_neg.min(f.min() / f.max());
        let s = entropy(f);
        entropy_rise = entropy_rise.max(s - prev);
        prev = s;
        if step % every == 0 || last {
            let (m, c) = f.moments();
            let (me, ce) = op.evolve_moments(init.mean, init.cov, time);
            let err = (0..2).map(|i| (m[i] - me[i]).abs()).chain((0..4).map(|k| (c[k / 2][k % 2] - ce[k / 2][k % 2]).abs())).fold(0.0, f64::max);
            moment_err = moment_err.max(err);
            row(&mut t, time, f, s, err);
        }
        if last {
            last_field = f.clone();
        }
        Ok(())
    })?;
    rep.check(Assertion::le("mass_conserved", mass_err, 1e-8));
    rep.derive("moment_error_max", moment_err);
    rep.derive("min_over_max", worst_neg);
    if variant == Variant::Classical {
        rep.check(Assertion::ge("positivity", worst_neg, -1e-8));
        rep.check(Assertion::le("relative_entropy_step_increase", entropy_rise, 1e-8));
        let mb = fpde::mb_distribution(ph.beta, ph.omega0, &grid)?;
        rep.check(Assertion::le("mb_stationarity_residual", fpde::stationarity_residual(&op, &mb), 1e-8));
    }
    rep.fields.push(("final_field".into(), last_field));
    rep.tables.push(t);
    Ok(rep)
}

/// Displaced thermal state whose ordering-`a` field is the Gaussian with
/// covariance `c·I` (Ω₀ = 1 units) and mean `mean`.
fn gaussian_state(cfg: &ExperimentConfig, hbar: f64, a: f64) -> Result<oscbath::DensityMatrix64> {
    let (w0, init) = (cfg.physics.omega0, &cfg.initial);
    let (cq, cp) = (init.cov[0][0], init.cov[1][1]);
    if init.cov[0][1] != 0.0 || (cq * w0 - cp / w0).abs() > 1e-12 * cp {
        return Err(HarnessError::Config("Fock route needs an initial covariance diag(c/Ω₀, cΩ₀)".into()));
    }
    // Weyl variance ħ(n̄ + ½)/Ω₀ of q; ordering a narrows it by aħ/(2Ω₀)
    let occupation = (cq * w0 + a * hbar / 2.0) / hbar - 0.5;
    if !(occupation > 0.0) {
        return Err(HarnessError::Config("initial covariance below the ordering's minimum-uncertainty width".into()));
    }
    let beta_eff = (1.0 + 1.0 / occupation).ln() / (hbar * w0);
    let alpha = Complex::new(init.mean[0] * (w0 / (2.0 * hbar)).sqrt(), init.mean[1] / (2.0 * hbar * w0).sqrt());
    let widest = auto_dim(beta_eff, hbar, w0).max(auto_dim(cfg.physics.beta, hbar, w0));
    let dim = widest + (alpha.norm_sqr() + 8.0 * alpha.norm()).ceil() as usize;
    let basis = FockBasis::new(dim, hbar, w0)?;
    Ok(fock::displaced(&fock::thermal_state(&basis, beta_eff)?, alpha)?)
}

/// Field at `t_max` obtained by evolving the master equation in Fock space
/// and transforming with the ordering-`a` kernel, plus the distance of its
/// initial field from the configured Gaussian.
fn fock_route(cfg: &ExperimentConfig, spec: &BathSpec64, hbar: f64, a: f64, grid: &PhaseGrid64) -> Result<(PhaseSpaceField64, f64)> {
    let ph = &cfg.physics;
    let rho0 = gaussian_state(cfg, hbar, a)?;
    let kernel = OrderingKernel::new(a, ph.omega0, hbar)?;
    let f_init = wigner::generalized_wigner(&rho0, &kernel, grid)?;
    let init_err = f_init.sup_distance(&fpde::gaussian_field(grid, cfg.initial.mean, cfg.initial.cov)?);
    let k = lindblad::coefficients_from_model(spec, ph.lambda, ph.omega0, ph.beta, hbar)?;
    let l = lindblad::general_generator(rho0.basis(), &k);
    let bound = l.to_sparse().norm_bound();
    let dt = cfg.limit.fock_dt.min(2.0 / bound);
    let t_max = cfg.t_max();
    let steps = (t_max / dt).ceil();
    let traj = lindblad::evolve_sampled(&l, &rho0, t_max, t_max / steps, usize::MAX)?;
    let rho = traj.states.last().expect("trajectory has the initial state");
    Ok((wigner::generalized_wigner(rho, &kernel, grid)?, init_err))
}

pub fn classical_limit(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rep = Report::new(Kind::ClassicalLimit);
    let ph = &cfg.physics;
    let spec = quantum_bath(cfg)?;
    let grid = phase_grid(cfg)?;
    let a = ph.a;

    let zero_ops: Vec<FPOperator<f64>> =
        [-1.0, 0.0, 1.0, a].iter().map(|&b| fpde::build(Variant::QuantumPs, &params(cfg, &spec, 0.0, b))).collect::<Result<_, _>>()?;
    let identical = zero_ops.windows(2).all(|w| same_operator(&w[0], &w[1]));
    rep.check(Assertion::holds("hbar_zero_operator_independent_of_a", identical, 0.0, "identical coefficients"));

    let reference = run_gaussian(cfg, &zero_ops[3], &grid)?;
    rep.derive("reference_grid_error", reference.grid_error);
    rep.derive("reference_dt", reference.dt);
    let mut t = Table::new("convergence", &["hbar", "sup_distance", "l1_distance", "grid_error", "ratio"]);
    let mut prev: Option<f64> = None;
    let mut sups = Vec::new();
    let mut max_grid = reference.grid_error;
    for &h in &ph.hbar_list {
        let op = fpde::build(Variant::QuantumPs, &params(cfg, &spec, h, a))?;
        let run = run_gaussian(cfg, &op, &grid)?;
        let d = run.field.sup_distance(&reference.field);
        let l1 = run.field.l1_distance(&reference.field);
        let ratio = prev.map_or(f64::NAN, |p| p / d);
        if let Some(p) = prev {
            rep.check(Assertion::within(&format!("halving_ratio_hbar_{h}"), p / d, 1.6, 2.4));
        }
        max_grid = max_grid.max(run.grid_error);
        t.push(vec![h, d, l1, run.grid_error, ratio]);
        sups.push(d);
        prev = Some(d);

        if cfg.limit.fock_hbar.iter().any(|x| (x - h).abs() < 1e-12) {
            let (fock_field, init_err) = fock_route(cfg, &spec, h, a, &grid)?;
            rep.check(Assertion::le(&format!("fock_initial_field_hbar_{h}"), init_err, 1e-8));
            rep.check(Assertion::le(&format!("fock_route_agrees_hbar_{h}"), fock_field.sup_distance(&run.field), 2.0 * run.grid_error));
        }
    }
    let monotone = sups.windows(2).all(|w| w[1] < w[0]);
    rep.check(Assertion::holds("distances_decrease_with_hbar", monotone, sups.last().copied().unwrap_or(0.0), "strictly decreasing"));
    rep.derive("max_grid_error", max_grid);
    rep.tables.push(t);
    Ok(rep)
}

pub fn ordering_sweep(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rep = Report::new(Kind::OrderingSweep);
    let ph = &cfg.physics;
    let spec = quantum_bath(cfg)?;
    let grid = phase_grid(cfg)?;
    let a_list = &ph.a_list;

    let zero: Vec<FPOperator<f64>> =
        a_list.iter().map(|&a| fpde::build(Variant::QuantumPs, &params(cfg, &spec, 0.0, a))).collect::<Result<_, _>>()?;
    let identical = zero.windows(2).all(|w| same_operator(&w[0], &w[1]));
    rep.check(Assertion::holds("hbar_zero_operator_independent_of_a", identical, 0.0, "identical coefficients"));

    let pairs: Vec<(usize, usize)> = (0..a_list.len()).flat_map(|i| (i + 1..a_list.len()).map(move |j| (i, j))).collect();
    let mut t = Table::new("pairwise", &["hbar", "a_i", "a_j", "sup_distance", "l1_distance", "grid_error", "ratio"]);
    let mut prev: Vec<Option<f64>> = vec![None; pairs.len()];
    for (hi, &h) in ph.hbar_list.iter().enumerate() {
        let runs: Vec<Run> = a_list
            .iter()
            .map(|&a| run_gaussian(cfg, &fpde::build(Variant::QuantumPs, &params(cfg, &spec, h, a))?, &grid))
            .collect::<Result<_>>()?;
        let grid_err = runs.iter().map(|r| r.grid_error).fold(0.0, f64::max);
        if hi == 0 {
            let again = run_gaussian(cfg, &fpde::build(Variant::QuantumPs, &params(cfg, &spec, h, a_list[0]))?, &grid)?;
            rep.check(Assertion::le("same_ordering_distance_zero", again.field.sup_distance(&runs[0].field), 0.0));
        }
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let d = runs[i].field.sup_distance(&runs[j].field);
            let l1 = runs[i].field.l1_distance(&runs[j].field);
            let ratio = prev[k].map_or(f64::NAN, |p| p / d);
            if let Some(p) = prev[k] {
                rep.check(Assertion::within(&format!("halving_ratio_a{}_a{}_hbar_{h}", a_list[i], a_list[j]), p / d, 1.6, 2.4));
            }
            if hi == 0 && (a_list[i] == 0.0 || a_list[j] == 0.0) {
                rep.check(Assertion::ge(
                    &format!("orderings_differ_a{}_a{}_hbar_{h}", a_list[i], a_list[j]),
                    d / grid_err,
                    10.0,
                ));
            }
            prev[k] = Some(d);
            t.push(vec![h, a_list[i], a_list[j], d, l1, grid_err, ratio]);
        }
    }
    rep.tables.push(t);
    Ok(rep)
}

pub fn gme_compare(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rep = Report::new(Kind::GmeCompare);
    let ph = &cfg.physics;
    let g = &cfg.gme;
    let spec = bath_spec(cfg)?;

    let mut sweep = Table::new("determinants", &["omega0", "chi", "gme_det", "classical_det"]);
    for &w0 in &g.omega0_list {
        let p = FPParams { omega0: Some(w0), ..params(cfg, &spec, 0.0, 0.0) };
        let gme = fpde::build(Variant::Gme, &p)?;
        let cl = fpde::build(Variant::Classical, &p)?;
        let chi = oscbath::bath::frequency_shifts(&super::classical_view(&spec, w0)?, w0)?.chi.unwrap_or(0.0);
        let det = gme.diffusion_determinant();
        if chi != 0.0 {
            rep.check(Assertion::lt(&format!("gme_determinant_negative_omega0_{w0}"), det, 0.0));
        }
        sweep.push(vec![w0, chi, det, cl.diffusion_determinant()]);
    }

    let p = params(cfg, &spec, 0.0, 0.0);
    let gme = fpde::build(Variant::Gme, &p)?;
    let cl = fpde::build(Variant::Classical, &p)?;
    let n = g.residual_grid_n;
    let mb_grid = PhaseGrid::symmetric(cfg.numerics.q_max, cfg.numerics.p_max, n, n)?;
    let mb = fpde::mb_distribution(ph.beta, ph.omega0, &mb_grid)?;
    let rg = fpde::stationarity_residual(&gme, &mb);
    let rc = fpde::stationarity_residual(&cl, &mb);
    rep.derive("gme_mb_residual", rg);
    rep.derive("classical_mb_residual", rc);
    rep.check(Assertion::ge("mb_residual_ratio", rg / rc.max(f64::MIN_POSITIVE), 1e4));

    // Gaussian narrow along the eigenvector of the negative diffusion eigenvalue
    let d = gme.diffusion;
    let (lo, _) = gme.diffusion_eigenvalues();
    rep.derive("gme_diffusion_eigenvalue_min", lo);
    let nv = d[0][1].hypot(lo - d[0][0]);
    let v = if nv > 0.0 { [d[0][1] / nv, (lo - d[0][0]) / nv] } else { [1.0, 0.0] };
    let w = [-v[1], v[0]];
    let c = |i: usize, j: usize| g.narrow * v[i] * v[j] + g.wide * w[i] * w[j];
    let n = g.positivity_grid_n;
    let pg = PhaseGrid::symmetric(g.positivity_extent, g.positivity_extent, n, n)?;
    let f0 = fpde::gaussian_field(&pg, [0.0, 0.0], [[c(0, 0), c(0, 1)], [c(0, 1), c(1, 1)]])?;
    let mut t = Table::new("positivity", &["t", "gme_min_over_max", "classical_min_over_max"]);
    let sample = |op: &FPOperator<f64>| -> Result<Vec<(f64, f64)>> {
        let tr = FPSolver::new(op, &pg).evolve(&f0, g.t_max, g.dt, cfg.numerics.sample_every)?;
        Ok(tr.times.iter().zip(&tr.fields).map(|(t, f)| (*t, f.min() / f.max())).collect())
    };
    let sg = sample(&gme)?;
    let sc = sample(&cl)?;
    for ((tg, a), (_, b)) in sg.iter().zip(&sc) {
        t.push(vec![*tg, *a, *b]);
    }
    let worst = |s: &[(f64, f64)]| s.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    rep.check(Assertion::lt("gme_goes_negative", worst(&sg), -1e-4));
    rep.check(Assertion::ge("classical_stays_nonnegative", worst(&sc), -1e-8));
    rep.tables = vec![sweep, t];
    Ok(rep)
}
