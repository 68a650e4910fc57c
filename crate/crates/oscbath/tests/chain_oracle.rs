use nalgebra::{DMatrix, DVector};
use oscbath::chain::{self, ChainConfig, RelaxationSettings};
use oscbath::fpde::FPOperator;
use oscbath::quad::Quadrature;

fn ring(k: usize, eps: f64, lambda: f64) -> ChainConfig {
    let mut e = DVector::zeros(k);
    e[k / 2] = eps;
    ChainConfig::nearest_neighbor(k, 1.25, -0.5, e, 1.0, lambda, 1.0).unwrap()
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

#[test]
fn gibbs_covariance_of_two_free_modes() {
    let cfg = ChainConfig::new(DMatrix::identity(2, 2), DVector::zeros(2), 1.0, 0.0, 1.0).unwrap();
    let s = chain::gibbs_sample(&cfg, 10_000, 3);
    let n = s.len() as f64;
    for a in 0..2 {
        for b in 0..2 {
            let prod: Vec<f64> = s.iter().map(|p| p.bath_q[a] * p.bath_q[b]).collect();
            let (m, sd) = mean_sd(&prod);
            let expect = if a == b { 1.0 } else { 0.0 };
            assert!((m - expect).abs() < 3.0 * sd / n.sqrt(), "cov q{a}q{b} = {m}");
            let cross: Vec<f64> = s.iter().map(|p| p.bath_q[a] * p.bath_p[b]).collect();
            let (m, sd) = mean_sd(&cross);
            assert!(m.abs() < 3.0 * sd / n.sqrt(), "cov q{a}p{b} = {m}");
        }
    }
}

#[test]
fn momentum_variance_scales_with_temperature() {
    let mk = |beta: f64| {
        let mut e = DVector::zeros(16);
        e[3] = 1.0;
        ChainConfig::nearest_neighbor(16, 1.25, -0.5, e, beta, 0.0, 1.0).unwrap()
    };
    let var = |beta: f64| {
        let s = chain::gibbs_sample(&mk(beta), 10_000, 11);
        let p: Vec<f64> = s.iter().map(|pt| pt.bath_p[5]).collect();
        mean_sd(&p).1.powi(2)
    };
    let ratio = var(1.0) / var(4.0);
    // relative standard error of a variance ratio is about 2/√N
    assert!((ratio / 4.0 - 1.0).abs() < 3.0 * 2.0 / 100.0, "ratio {ratio}");
}

#[test]
fn decoupled_oscillator_follows_free_motion() {
    let cfg = ring(32, 1.0, 0.0);
    let start = chain::gibbs_sample(&cfg, 1, 2).remove(0).with_oscillator(0.7, -0.4);
    let err = |dt: f64| {
        let ens = chain::integrate(&cfg, std::slice::from_ref(&start), 20.0, dt, usize::MAX).unwrap();
        let last = ens.samples[0].last().unwrap();
        let t = *ens.times.last().unwrap();
        let q = 0.7 * t.cos() - 0.4 * t.sin();
        (last.q - q).abs()
    };
    let (e1, e2) = (err(0.02), err(0.01));
    assert!(e1 < 1e-3);
    assert!((e1 / e2 - 4.0).abs() < 0.2, "ratio {}", e1 / e2);
}

#[test]
fn verlet_matches_normal_mode_solution_at_second_order() {
    let cfg = ring(64, 1.5, 0.3);
    let start = chain::gibbs_sample(&cfg, 1, 5).remove(0).with_oscillator(1.0, 0.0);
    let exact = chain::exact_flow(&cfg, &start, 10.0);
    let err = |dt: f64| {
        let ens = chain::integrate(&cfg, std::slice::from_ref(&start), 10.0, dt, usize::MAX).unwrap();
        let last = ens.samples[0].last().unwrap();
        (&last.bath_q - &exact.bath_q).amax().max((last.q - exact.q).abs())
    };
    let (e1, e2) = (err(0.02), err(0.01));
    assert!((e1 / e2 - 4.0).abs() < 0.3, "ratio {}", e1 / e2);
}

#[test]
fn energy_stays_bounded_over_a_thousand_periods() {
    let cfg = ring(64, 1.5, 0.3);
    let dt = 2.0 * std::f64::consts::PI / cfg.omega_max() / 100.0;
    let t_max = 1000.0 * 2.0 * std::f64::consts::PI / cfg.omega0;
    let start = chain::gibbs_sample(&cfg, 1, 6).remove(0).with_oscillator(1.0, 0.5);
    let e0 = cfg.energy(&start);
    let m0 = cfg.modified_energy(&start, dt);
    let ens = chain::integrate(&cfg, std::slice::from_ref(&start), t_max, dt, 500).unwrap();
    let mut max_mod: f64 = 0.0;
    let dev: Vec<f64> = ens.samples[0]
        .iter()
        .map(|p| {
            max_mod = max_mod.max((cfg.modified_energy(p, dt) - m0).abs() / m0);
            (cfg.energy(p) - e0).abs() / e0
        })
        .collect();
    assert!(max_mod < 1e-6, "modified energy drift {max_mod}");
    let tenth = dev.len() / 10;
    let early = dev[..tenth].iter().copied().fold(0.0, f64::max);
    let late = dev[dev.len() - tenth..].iter().copied().fold(0.0, f64::max);
    assert!(early < 1e-3 && late < 1e-3, "energy error {early} {late}");
    assert!(late < 2.0 * early, "secular energy growth {early} -> {late}");
}

#[test]
fn free_correlation_at_zero_lag_and_without_coupling() {
    let cfg = ring(16, 1.0, 0.0);
    let s = chain::gibbs_sample(&cfg, 10_000, 8);
    let h = chain::empirical_correlation(&cfg, &s, &[0.0]);
    let cov = cfg.h_matrix.clone().try_inverse().unwrap() / cfg.beta;
    let exact = cfg.epsilons.dot(&(&cov * &cfg.epsilons));
    assert!((h.mean[0] - exact).abs() < 3.0 * h.stderr[0]);
    assert!((cfg.exact_correlation(0.0) - exact).abs() < 1e-12);

    let zero = ChainConfig::nearest_neighbor(16, 1.25, -0.5, DVector::zeros(16), 1.0, 0.0, 1.0).unwrap();
    let h0 = chain::empirical_correlation(&zero, &s, &[0.0, 1.0, 5.0]);
    assert!(h0.mean.iter().all(|v| *v == 0.0));
}

#[test]
fn long_chain_correlation_matches_mode_sum() {
    let cfg = ring(512, 1.0, 0.0);
    let rec = cfg.recurrence_time();
    let s_grid: Vec<f64> = (0..25).map(|i| i as f64 * 0.9 * rec / 24.0).collect();
    let samples = chain::gibbs_sample(&cfg, 10_000, 21);
    let est = chain::empirical_correlation(&cfg, &samples, &s_grid);
    for (i, s) in s_grid.iter().enumerate() {
        let exact = cfg.exact_correlation(*s);
        assert!((est.mean[i] - exact).abs() < 3.0 * est.stderr[i], "s={s}: {} vs {exact} ± {}", est.mean[i], est.stderr[i]);
    }
    // time-translation invariance of the free bath
    let shifted = chain::empirical_correlation_from(&cfg, &samples, 37.0, &s_grid);
    for i in 0..s_grid.len() {
        let se = est.stderr[i].hypot(shifted.stderr[i]);
        assert!((est.mean[i] - shifted.mean[i]).abs() < 3.0 * se);
    }
}

/// Below the recurrence time the mode sum is the continuum integral
/// `(ε²/2πβ)∫ cos(ω(k)s)/ω(k)² dk` of the infinite chain.
#[test]
fn mode_sum_is_continuum_below_recurrence() {
    let cfg = ring(512, 1.0, 0.0);
    let quad = Quadrature::new(1e-12);
    let rec = cfg.recurrence_time();
    for s in [0.0, 3.0, 40.0, 0.4 * rec] {
        let f = |k: f64| {
            let w2 = 1.25 - k.cos();
            (w2.sqrt() * s).cos() / w2
        };
        let pi = std::f64::consts::PI;
        let cont = quad.integrate(f, Some(-pi), Some(pi), &[]).unwrap().value / (2.0 * pi);
        assert!((cfg.exact_correlation(s) - cont).abs() < 1e-9, "s={s}");
    }
}

#[test]
fn decoupled_energy_curve_is_flat() {
    let cfg = ring(64, 1.0, 0.0);
    let st = RelaxationSettings { n_samples: 200, ..Default::default() };
    let dt = 0.05;
    let curve = chain::relaxation_experiment(&cfg, 0.0, 20.0, &RelaxationSettings { dt: Some(dt), ..st }).unwrap();
    let e0 = curve.energy.mean[0];
    assert!(curve.energy.mean.iter().all(|e| (e - e0).abs() < 1e-3 * e0));
}

/// Energy relaxation rate follows the CLASSICAL moment rate and scales as λ².
#[test]
fn relaxation_rate_matches_moment_equations() {
    let cfg = ring(256, 5f64.sqrt(), 0.0);
    let u_sq = 0.5 * cfg.coupling_density(1.0, 0.03);
    let predicted = |lam: f64| FPOperator::classical_from(u_sq, 0.0, lam, 1.0, 1.0).unwrap().relaxation_rate();
    let st = RelaxationSettings { n_samples: 2000, p0: 5.0, ..Default::default() };
    let fast = chain::relaxation_experiment(&cfg, 0.1, 60.0, &st).unwrap();
    let slow = chain::relaxation_experiment(&cfg, 0.05, 200.0, &st).unwrap();
    assert!((fast.rate / predicted(0.1) - 1.0).abs() < 0.1, "{} vs {}", fast.rate, predicted(0.1));
    let ratio = fast.rate / slow.rate;
    assert!((ratio - 4.0).abs() < 0.8, "ratio {ratio}");
}
