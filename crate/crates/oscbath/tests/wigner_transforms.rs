use oscbath::fock::{self, DensityMatrix, FockBasis};
use oscbath::wigner::{self, OrderingKernel, PhaseGrid, PhaseSpaceField};
use oscbath::{Complex, Error};

fn basis(d: usize) -> FockBasis<f64> {
    FockBasis::new(d, 1.0, 1.0).unwrap()
}

fn grid() -> PhaseGrid<f64> {
    PhaseGrid::symmetric(24.0, 24.0, 128, 128).unwrap()
}

fn fock_grid() -> PhaseGrid<f64> {
    PhaseGrid::symmetric(14.0, 14.0, 128, 128).unwrap()
}

fn round_trip(rho: &DensityMatrix<f64>, a: f64, g: &PhaseGrid<f64>) -> f64 {
    let k = OrderingKernel::new(a, 1.0, 1.0).unwrap();
    let f = wigner::generalized_wigner(rho, &k, g).unwrap();
    let back = wigner::inverse_transform(&f, &k, rho.basis()).unwrap();
    back.trace_distance(rho)
}

// Hermite functions by recurrence.
fn position_density(rho: &DensityMatrix<f64>, q: f64) -> f64 {
    let d = rho.basis().dim();
    let mut psi = vec![0.0; d];
    psi[0] = std::f64::consts::PI.powf(-0.25) * (-q * q / 2.0).exp();
    if d > 1 {
        psi[1] = 2f64.sqrt() * q * psi[0];
    }
    for n in 1..d - 1 {
        psi[n + 1] = (2.0 / (n as f64 + 1.0)).sqrt() * q * psi[n] - (n as f64 / (n as f64 + 1.0)).sqrt() * psi[n - 1];
    }
    let m = rho.matrix();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += (m[(i, j)] * psi[i] * psi[j]).re;
        }
    }
    s
}

#[test]
fn vacuum_wigner_is_gaussian() {
    let b = FockBasis::<f64>::new(16, 0.7, 1.3).unwrap();
    let k = OrderingKernel::new(0.0, 1.3, 0.7).unwrap();
    let g = PhaseGrid::<f64>::symmetric(6.0, 6.0, 64, 64).unwrap();
    let f = wigner::generalized_wigner(&fock::number_state(&b, 0).unwrap(), &k, &g).unwrap();
    let exact = PhaseSpaceField::from_fn(g, |q: f64, p: f64| (-(1.3 * q * q + p * p / 1.3) / 0.7).exp() / (std::f64::consts::PI * 0.7));
    assert!(f.sup_distance(&exact) < 1e-12, "{}", f.sup_distance(&exact));
    assert!((f.integral() - 1.0).abs() < 1e-12);
}

#[test]
fn fields_are_point_symmetric_for_parity_states() {
    let b = basis(80);
    let rho = fock::thermal_state(&b, 0.5).unwrap();
    for a in [-1.0, 0.0, 1.0] {
        let k = OrderingKernel::new(a, 1.0, 1.0).unwrap();
        let (f, imag) = wigner::generalized_wigner_with_imag(&rho, &k, &grid()).unwrap();
        assert!(imag < 1e-10);
        let n = 128;
        for i in 0..n {
            for j in 0..n {
                assert!((f.values[(i, j)] - f.values[(n - 1 - i, n - 1 - j)]).abs() < 1e-13);
            }
        }
        assert!((f.integral() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn weyl_marginal_is_position_density() {
    let b = basis(30);
    let rho = fock::thermal_state(&b, 1.0).unwrap();
    let k = OrderingKernel::new(0.0, 1.0, 1.0).unwrap();
    let g = grid();
    let f = wigner::generalized_wigner(&rho, &k, &g).unwrap();
    for i in 0..g.n_q {
        let marginal: f64 = f.values.row(i).sum() * g.dp();
        assert!((marginal - position_density(&rho, g.q(i))).abs() < 1e-8);
    }
}

#[test]
fn round_trips() {
    let b = basis(80);
    let thermal = fock::thermal_state(&b, 0.5).unwrap();
    let shifted = fock::displaced(&thermal, Complex::new(0.5, -0.3)).unwrap();
    for a in [-1.0, 0.0, 1.0] {
        let tol = if a == 0.0 { 1e-10 } else { 1e-9 };
        assert!(round_trip(&thermal, a, &grid()) < tol, "a={a}");
        assert!(round_trip(&shifted, a, &grid()) < tol, "a={a}");
    }
    let small = basis(4);
    for n in [0, 1, 2] {
        let s = fock::number_state(&small, n).unwrap();
        for a in [-1.0, 0.0] {
            let tol = if a == 0.0 { 1e-10 } else { 1e-9 };
            assert!(round_trip(&s, a, &fock_grid()) < tol, "n={n} a={a}");
        }
    }
}

#[test]
fn singular_kernel_on_number_state() {
    let b = basis(8);
    let k = OrderingKernel::new(1.0, 1.0, 1.0).unwrap();
    let r = wigner::generalized_wigner(&fock::number_state(&b, 1).unwrap(), &k, &fock_grid());
    assert!(matches!(r, Err(Error::KernelDivergence(_))));
}

#[test]
fn correction_links_orderings() {
    // Field at small a ≈ Weyl field + Ψ-correction applied to it.
    let b = basis(30);
    let rho = fock::thermal_state(&b, 1.0).unwrap();
    let g = PhaseGrid::symmetric(10.0, 10.0, 128, 128).unwrap();
    let w0 = wigner::generalized_wigner(&rho, &OrderingKernel::new(0.0, 1.0, 1.0).unwrap(), &g).unwrap();
    let a = 1e-3;
    let ka = OrderingKernel::new(a, 1.0, 1.0).unwrap();
    let wa = wigner::generalized_wigner(&rho, &ka, &g).unwrap();
    let corr = wigner::psi_correction(&ka).unwrap().apply(&w0);
    let mut pred = w0.clone();
    pred.values += &corr.values;
    assert!(wa.sup_distance(&pred) < 1e-5 * w0.max_abs(), "{}", wa.sup_distance(&pred));
}
