use oscbath::fock::{self, FockBasis};
use oscbath::lindblad::{self, LindbladCoefficients};
use oscbath::wigner::{self, OrderingKernel, PhaseGrid, PhaseSpaceField};
use oscbath::{bath, CMatrix, Complex, DensityMatrix64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::quantum_bath;
use crate::config::{auto_dim, ExperimentConfig, Generator, Kind, StateKind, StateSpec};
use crate::report::{Assertion, Report, Table};
use crate::Result;

fn random_hermitian(d: usize, rng: &mut ChaCha8Rng) -> CMatrix<f64> {
    let m = CMatrix::<f64>::from_fn(d, d, |_, _| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    (&m + m.adjoint()) * Complex::new(0.5, 0.0)
}

pub fn evolve_lindblad(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rep = Report::new(Kind::EvolveLindblad);
    let ph = &cfg.physics;
    let lc = &cfg.lindblad;
    let dim = cfg.numerics.dim.unwrap_or_else(|| auto_dim(ph.beta, ph.hbar, ph.omega0));
    let basis = FockBasis::new(dim, ph.hbar, ph.omega0)?;
    rep.derive("dim", dim);

    let (l, sigma) = match lc.generator {
        Generator::Model => {
            let spec = quantum_bath(cfg)?;
            let l = lindblad::oscillator_generator(&basis, &spec, ph.lambda)?;
            let th = fock::thermal_state(&basis, ph.beta)?;
            let resid = fock::trace_norm(&l.apply(th.matrix()));
            rep.check(Assertion::le("thermal_state_annihilated", resid, 1e-8));
            let st = lindblad::stationary_state(&l)?;
            rep.check(Assertion::le("stationary_state_is_thermal", fock::trace_norm(&(st.matrix() - th.matrix())), 1e-8));

            let k = lindblad::coefficients_from_model(&spec, ph.lambda, ph.omega0, ph.beta, ph.hbar)?;
            rep.derive("coefficients", k);
            let general = lindblad::general_generator(&basis, &k);
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut worst = 0.0f64;
            for _ in 0..lc.random_matrices {
                let x = random_hermitian(dim, &mut rng);
                worst = worst.max((l.apply(&x) - general.apply(&x)).camax());
            }
            rep.check(Assertion::le("model_equals_general_on_random_hermitian", worst, 1e-12));
            rep.derive("superoperator_max_difference", l.max_abs_diff(&general));

            let (ok, eig) = lindblad::lindblad_form_check(&k);
            rep.check(Assertion::holds("model_coefficients_in_lindblad_form", ok, eig.0, "kossakowski eigenvalues >= 0"));
            let qs = bath::quantum_spectra(&spec, ph.hbar, ph.omega0)?;
            let m = qs.n + ph.hbar / 2.0;
            let expect = k.lam * k.lam * (m * m - ph.hbar * ph.hbar / 4.0);
            let margin = k.lindblad_margin();
            rep.derive("lindblad_margin", margin);
            rep.check(Assertion::ge("lindblad_margin_nonnegative", margin, 0.0));
            rep.check(Assertion::le("lindblad_margin_formula", (margin - expect).abs() / expect.abs().max(1e-300), 1e-12));
            (l, th)
        }
        Generator::General => {
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
            rep.derive("coefficients", k);
            let (ok, eig) = lindblad::lindblad_form_check(&k);
            rep.check(Assertion::holds("coefficients_in_lindblad_form", ok, eig.0, "kossakowski eigenvalues >= 0"));
            let l = lindblad::general_generator(&basis, &k);
            let st = lindblad::stationary_state(&l)?;
            (l, st)
        }
    };

    let start = fock::thermal_state(&basis, lc.initial_beta)?;
    let rho0 = fock::displaced(&start, Complex::new(lc.alpha[0], lc.alpha[1]))?;
    let bound = l.to_sparse().norm_bound();
    let dt = cfg.numerics.dt.unwrap_or(cfg.numerics.dt_fraction * 2.5 / bound);
    rep.derive("dt", dt);
    let number = fock::number_operator(&basis);

    let mut t = Table::new("trajectory", &["t", "trace", "mean_number", "min_eigenvalue", "relative_entropy"]);
    let (mut trace_err, mut herm_err, mut min_eig, mut entropy_rise) = (0.0f64, 0.0f64, f64::INFINITY, f64::NEG_INFINITY);
    let mut prev = lindblad::relative_entropy(&rho0, &sigma)?;
    let record = |t: &mut Table, time: f64, rho: &DensityMatrix64, s: f64| {
        t.push(vec![time, rho.trace().re, rho.expectation(&number).re, rho.min_eigenvalue(), s]);
    };
    record(&mut t, 0.0, &rho0, prev);
    let every = cfg.numerics.sample_every;
    lindblad::evolve_observed(&l, &rho0, cfg.t_max(), dt, |step, time, rho, last| {
        let lr = l.apply(rho.matrix());
        herm_err = herm_err.max((&lr - lr.adjoint()).camax());
        trace_err = trace_err.max((rho.trace() - Complex::new(1.0, 0.0)).norm());
        let ev = rho.min_eigenvalue();
        min_eig = min_eig.min(ev);
        let s = lindblad::relative_entropy(rho, &sigma)?;
        entropy_rise = entropy_rise.max(s - prev);
        prev = s;
        if step % every == 0 || last {
            record(&mut t, time, rho, s);
        }
        Ok(())
    })?;
    rep.check(Assertion::le("trace_preserved", trace_err, 1e-9));
    rep.check(Assertion::le("generator_output_hermitian", herm_err, 1e-12));
    rep.check(Assertion::ge("min_eigenvalue", min_eig, -1e-9));
    rep.check(Assertion::le("relative_entropy_step_increase", entropy_rise, 1e-10));
    rep.derive("final_relative_entropy", prev);
    rep.tables.push(t);
    Ok(rep)
}

fn prepare(s: &StateSpec, hbar: f64, omega0: f64) -> Result<DensityMatrix64> {
    let b = FockBasis::new(s.dim, hbar, omega0)?;
    Ok(match s.state {
        StateKind::Thermal => fock::thermal_state(&b, s.beta)?,
        StateKind::DisplacedThermal => fock::displaced(&fock::thermal_state(&b, s.beta)?, Complex::new(s.alpha[0], s.alpha[1]))?,
        StateKind::Number => fock::number_state(&b, s.n)?,
    })
}

pub fn wigner(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rep = Report::new(Kind::Wigner);
    let ph = &cfg.physics;
    let n = cfg.wigner.grid_n;
    let mut t = Table::new("round_trips", &["state", "a", "round_trip_error", "imag_ratio", "norm_error"]);
    let (mut rt0, mut rt1, mut imag, mut norm) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (idx, s) in cfg.wigner.states.iter().enumerate() {
        let rho = prepare(s, ph.hbar, ph.omega0)?;
        let grid = PhaseGrid::symmetric(s.extent, s.extent, n, n)?;
        for &a in s.orderings.as_ref().unwrap_or(&ph.a_list) {
            let k = OrderingKernel::new(a, ph.omega0, ph.hbar)?;
            let (f, im) = wigner::generalized_wigner_with_imag(&rho, &k, &grid)?;
            let back = wigner::inverse_transform(&f, &k, rho.basis())?;
            let err = back.trace_distance(&rho);
            let ne = (f.integral() - 1.0).abs();
            if a == 0.0 {
                rt0 = rt0.max(err);
            } else {
                rt1 = rt1.max(err);
            }
            imag = imag.max(im);
            norm = norm.max(ne);
            t.push(vec![idx as f64, a, err, im, ne]);
            if idx == 0 && a == ph.a_list[0] {
                rep.fields.push((format!("field_state0_a{a}"), f));
            }
        }
    }
    rep.check(Assertion::le("round_trip_weyl", rt0, 1e-10));
    rep.check(Assertion::le("round_trip_other_orderings", rt1, 1e-9));
    rep.check(Assertion::le("imaginary_part", imag, 1e-10));
    rep.check(Assertion::le("normalization", norm, 1e-8));

    // vacuum against the closed-form Gaussian exp(−(Ω₀q² + p²/Ω₀)/ħ)/(πħ)
    let (hb, w0) = (ph.hbar, ph.omega0);
    let b = FockBasis::new(16, hb, w0)?;
    let width = 8.0 * (hb * w0.max(1.0 / w0)).sqrt().max(1.0);
    let g = PhaseGrid::symmetric(width, width, 64, 64)?;
    let vac = wigner::generalized_wigner(&fock::number_state(&b, 0)?, &OrderingKernel::new(0.0, w0, hb)?, &g)?;
    let exact = PhaseSpaceField::from_fn(g, |q: f64, p: f64| (-(w0 * q * q + p * p / w0) / hb).exp() / (std::f64::consts::PI * hb));
    rep.check(Assertion::le("vacuum_matches_gaussian", vac.sup_distance(&exact), 1e-8));
    rep.tables.push(t);
    Ok(rep)
}

pub fn secular_check(cfg: &ExperimentConfig) -> Result<Report> {
    let mut rep = Report::new(Kind::SecularCheck);
    let ph = &cfg.physics;
    let spec = quantum_bath(cfg)?;
    let dim = cfg.numerics.dim.unwrap_or(20);
    let basis = FockBasis::new(dim, ph.hbar, ph.omega0)?;
    let h = fock::system_hamiltonian(&basis);
    let red = lindblad::redfield_generator(&basis, &spec, ph.lambda)?;
    let osc = lindblad::oscillator_generator(&basis, &spec, ph.lambda)?;
    let sec = lindblad::secular_average(&red, &h)?;
    let twice = lindblad::secular_average(&sec, &h)?;
    let diff = sec.max_abs_diff(&osc);
    let idem = sec.max_abs_diff(&twice);
    let nonsecular = red.max_abs_diff(&sec);
    rep.check(Assertion::le("secular_average_equals_oscillator_generator", diff, 1e-12));
    rep.check(Assertion::le("secular_average_idempotent", idem, 0.0));
    let full = red.entries();
    let sec_entries = sec.entries();
    let kept = sec_entries
        .iter()
        .all(|&(r, c, v)| full.binary_search_by_key(&(r, c), |e| (e.0, e.1)).is_ok_and(|i| full[i].2 == v));
    rep.check(Assertion::holds("secular_average_keeps_entries_unchanged", kept, sec_entries.len() as f64, "subset of generator entries"));
    rep.derive("dim", dim);
    rep.derive("nonsecular_part_max", nonsecular);

    // the non-secular generator is not positive on coherent states; the secular one is
    let mut t = Table::new("positivity_defects", &["alpha", "nonsecular", "secular"]);
    for alpha in [0.0, 0.5, 1.0, 1.5] {
        let psi = coherent_vector(dim, alpha);
        t.push(vec![alpha, lindblad::positivity_defect(&red, &psi), lindblad::positivity_defect(&osc, &psi)]);
    }
    rep.tables.push(t);
    Ok(rep)
}

fn coherent_vector(dim: usize, alpha: f64) -> nalgebra::DVector<Complex<f64>> {
    let mut v = nalgebra::DVector::from_element(dim, Complex::new(0.0, 0.0));
    let mut c = (-alpha * alpha / 2.0).exp();
    for n in 0..dim {
        v[n] = Complex::new(c, 0.0);
        c *= alpha / ((n + 1) as f64).sqrt();
    }
    v
}
