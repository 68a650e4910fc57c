//! Truncated Fock-space operator algebra for the oscillator.
//!
//! Products of truncated ladder matrices are exact except in the trailing
//! rows/columns: `[a, a⁺]` has `1 - dim` in its last diagonal entry and
//! `[q, p]` is corrupted in the last two indices.

use crate::{CMatrix, Complex, Error, Real, Result};
use nalgebra as na;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FockBasis<T> {
    dim: usize,
    hbar: T,
    omega0: T,
}

impl<T: Real> FockBasis<T> {
    pub fn new(dim: usize, hbar: T, omega0: T) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidInput("Fock dimension must be at least 2".into()));
        }
        if !(hbar > T::zero()) || !(omega0 > T::zero()) {
            return Err(Error::InvalidInput("hbar and omega0 must be positive".into()));
        }
        Ok(FockBasis { dim, hbar, omega0 })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hbar(&self) -> T {
        self.hbar
    }

    pub fn omega0(&self) -> T {
        self.omega0
    }
}

fn real<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// Annihilation and creation matrices.
pub fn ladder_operators<T: Real>(basis: &FockBasis<T>) -> (CMatrix<T>, CMatrix<T>) {
    let n = basis.dim;
    let mut a = CMatrix::<T>::zeros(n, n);
    for k in 1..n {
        a[(k - 1, k)] = real(T::from_usize_lossy(k).sqrt());
    }
    let ad = a.adjoint();
    (a, ad)
}

pub fn number_operator<T: Real>(basis: &FockBasis<T>) -> CMatrix<T> {
    CMatrix::from_diagonal(&na::DVector::from_fn(basis.dim, |k, _| real(T::from_usize_lossy(k))))
}

/// `q = √(ħ/2Ω₀)(a + a⁺)`, `p = -i√(ħΩ₀/2)(a - a⁺)`.
pub fn position_momentum<T: Real>(basis: &FockBasis<T>) -> (CMatrix<T>, CMatrix<T>) {
    let (a, ad) = ladder_operators(basis);
    let two = T::lit(2.0);
    let cq = (basis.hbar / (two * basis.omega0)).sqrt();
    let cp = (basis.hbar * basis.omega0 / two).sqrt();
    let q = (&a + &ad) * real(cq);
    let p = (&a - &ad) * Complex::new(T::zero(), -cp);
    (q, p)
}

/// `ħΩ₀ a⁺a`.
pub fn system_hamiltonian<T: Real>(basis: &FockBasis<T>) -> CMatrix<T> {
    number_operator(basis) * real(basis.hbar * basis.omega0)
}

/// Matrix elements `⟨m|exp(α a⁺ - α* a)|n⟩` of the untruncated displacement
/// operator for `m, n < dim`. For `m = n + k`,
/// `D_mn = √(n!/m!) α^k e^{-|α|²/2} L_n^{(k)}(|α|²)`; the Laguerre factor runs
/// the forward recurrence on `g_n = √(n!/(n+k)!) |α|^k e^{-|α|²/2} L_n^{(k)}`,
/// which stays O(1) and never forms the factorials.
pub fn displacement_matrix<T: Real>(dim: usize, alpha: Complex<T>) -> CMatrix<T> {
    let mut d = CMatrix::<T>::zeros(dim, dim);
    let x = alpha.norm_sqr();
    if x == T::zero() {
        for i in 0..dim {
            d[(i, i)] = real(T::one());
        }
        return d;
    }
    let r = x.sqrt();
    let u = alpha / real(r);
    let v = -alpha.conj() / real(r);
    let fl = |k: usize| T::from_usize_lossy(k);
    let mut ln_fact = T::zero();
    let mut up = real(T::one());
    let mut down = real(T::one());
    for k in 0..dim {
        if k > 0 {
            ln_fact += fl(k).ln();
            up *= u;
            down *= v;
        }
        let kf = fl(k);
        // g_{n-1}, g_n
        let mut prev = T::zero();
        let mut cur = (-x * T::lit(0.5) + kf * T::lit(0.5) * x.ln() - T::lit(0.5) * ln_fact).exp();
        for n in 0..dim - k {
            d[(n + k, n)] = up * cur;
            if k > 0 {
                d[(n, n + k)] = down * cur;
            }
            let nf = fl(n);
            let next = (T::lit(2.0) * nf + T::one() + kf - x) / ((nf + T::one()) * (nf + kf + T::one())).sqrt() * cur
                - (nf * (nf + kf) / ((nf + T::one()) * (nf + kf + T::one()))).sqrt() * prev;
            prev = cur;
            cur = next;
        }
    }
    d
}

/// Hermitian, unit-trace, positive semidefinite matrix on a truncated basis.
#[derive(Clone, Debug)]
pub struct DensityMatrix<T: Real> {
    basis: FockBasis<T>,
    entries: CMatrix<T>,
}

impl<T: Real> DensityMatrix<T> {
    /// Validates the state invariants (Hermitian and unit trace to 1e-12,
    /// eigenvalues ≥ -1e-10; looser for low-precision scalars).
    pub fn new(basis: FockBasis<T>, entries: CMatrix<T>) -> Result<Self> {
        let rho = Self::from_matrix_unchecked(basis, entries)?;
        let eps = T::default_epsilon() * T::from_usize_lossy(100 * basis.dim);
        let tol = T::lit(1e-12).max(eps);
        let herm = (&rho.entries - rho.entries.adjoint()).camax();
        if herm > tol {
            return Err(Error::InvalidInput(format!("density matrix not Hermitian ({:e})", herm.as_f64())));
        }
        let tr = rho.trace();
        if (tr.re - T::one()).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidInput(format!("density matrix trace {}", tr.re.as_f64())));
        }
        let lmin = rho.min_eigenvalue();
        if lmin < -T::lit(1e-10).max(eps) {
            return Err(Error::InvalidInput(format!("density matrix eigenvalue {:e}", lmin.as_f64())));
        }
        Ok(rho)
    }

    /// Wraps a matrix without checking state invariants (used for
    /// trajectories where drift is itself a diagnostic).
    pub fn from_matrix_unchecked(basis: FockBasis<T>, entries: CMatrix<T>) -> Result<Self> {
        if entries.nrows() != basis.dim || entries.ncols() != basis.dim {
            return Err(Error::InvalidInput("matrix shape does not match basis".into()));
        }
        Ok(DensityMatrix { basis, entries })
    }

    /// Pure state from a state vector (normalized here).
    pub fn from_vector(basis: FockBasis<T>, psi: &na::DVector<Complex<T>>) -> Result<Self> {
        let norm = psi.norm();
        if norm == T::zero() {
            return Err(Error::InvalidInput("zero state vector".into()));
        }
        let v = psi / real(norm);
        Self::from_matrix_unchecked(basis, &v * v.adjoint())
    }

    pub fn basis(&self) -> &FockBasis<T> {
        &self.basis
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix<T> {
        self.entries
    }

    pub fn trace(&self) -> Complex<T> {
        self.entries.trace()
    }

    /// `Tr(ρ A)`.
    pub fn expectation(&self, op: &CMatrix<T>) -> Complex<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        let n = self.basis.dim;
        for i in 0..n {
            for j in 0..n {
                acc += self.entries[(i, j)] * op[(j, i)];
            }
        }
        acc
    }

    pub fn purity(&self) -> T {
        self.entries.iter().fold(T::zero(), |s, z| s + z.norm_sqr())
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        let herm = (&self.entries + self.entries.adjoint()) * real(T::lit(0.5));
        let mut ev: Vec<T> = na::SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    pub fn min_eigenvalue(&self) -> T {
        self.eigenvalues()[0]
    }

    /// Trace-norm distance `‖ρ - σ‖₁`.
    pub fn trace_distance(&self, other: &Self) -> T {
        trace_norm(&(&self.entries - &other.entries))
    }
}

/// Sum of singular values of a matrix (eigenvalue moduli if Hermitian).
pub fn trace_norm<T: Real>(m: &CMatrix<T>) -> T {
    m.clone().singular_values().iter().fold(T::zero(), |s, v| s + *v)
}

/// Gibbs state ∝ e^{-βħΩ₀ n} with the default truncation tolerance 1e-12.
pub fn thermal_state<T: Real>(basis: &FockBasis<T>, beta: T) -> Result<DensityMatrix<T>> {
    thermal_state_with_tail(basis, beta, T::lit(1e-12))
}

/// Gibbs state; fails when the neglected tail e^{-βħΩ₀·dim} is not below `tail_tol`.
pub fn thermal_state_with_tail<T: Real>(basis: &FockBasis<T>, beta: T, tail_tol: T) -> Result<DensityMatrix<T>> {
    if !(beta > T::zero()) {
        return Err(Error::InvalidInput("beta must be positive".into()));
    }
    let x = beta * basis.hbar * basis.omega0;
    let tail = (-x * T::from_usize_lossy(basis.dim)).exp();
    if !(tail < tail_tol) {
        return Err(Error::TruncationTooSmall { tail: tail.as_f64(), tol: tail_tol.as_f64() });
    }
    let w: Vec<T> = (0..basis.dim).map(|k| (-x * T::from_usize_lossy(k)).exp()).collect();
    let z = w.iter().fold(T::zero(), |s, v| s + *v);
    let diag = na::DVector::from_fn(basis.dim, |k, _| real(w[k] / z));
    DensityMatrix::from_matrix_unchecked(*basis, CMatrix::from_diagonal(&diag))
}

/// Number state `|n⟩⟨n|`.
pub fn number_state<T: Real>(basis: &FockBasis<T>, n: usize) -> Result<DensityMatrix<T>> {
    if n >= basis.dim {
        return Err(Error::InvalidInput("number state outside truncation".into()));
    }
    let mut m = CMatrix::<T>::zeros(basis.dim, basis.dim);
    m[(n, n)] = real(T::one());
    DensityMatrix::from_matrix_unchecked(*basis, m)
}

/// `D(α) ρ D(α)⁺` using untruncated displacement elements; accurate while
/// the displaced state stays well inside the truncation.
pub fn displaced<T: Real>(rho: &DensityMatrix<T>, alpha: Complex<T>) -> Result<DensityMatrix<T>> {
    let d = displacement_matrix(rho.basis.dim, alpha);
    let m = &d * rho.matrix() * d.adjoint();
    let m = (&m + m.adjoint()) * real(T::lit(0.5));
    let tr = m.trace().re;
    DensityMatrix::from_matrix_unchecked(rho.basis, m / real(tr))
}

/// Coherent state |α⟩⟨α| (truncated and renormalized).
pub fn coherent_state<T: Real>(basis: &FockBasis<T>, alpha: Complex<T>) -> Result<DensityMatrix<T>> {
    let d = displacement_matrix(basis.dim, alpha);
    let psi = d.column(0).into_owned();
    DensityMatrix::from_vector(*basis, &psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn basis(dim: usize, hbar: f64, omega0: f64) -> FockBasis<f64> {
        FockBasis::new(dim, hbar, omega0).unwrap()
    }

    #[test]
    fn ladder_small() {
        let (a, ad) = ladder_operators(&basis(3, 1.0, 1.0));
        assert_eq!(a[(0, 1)].re, 1.0);
        assert!(close(a[(1, 2)].re, 2f64.sqrt(), 1e-15));
        assert_eq!(a.iter().filter(|z| z.norm() > 0.0).count(), 2);
        assert_eq!(ad, a.adjoint());
        let vac = na::DVector::from_fn(3, |i, _| if i == 0 { real(1.0) } else { real(0.0) });
        assert_eq!((&a * vac).norm(), 0.0);
    }

    #[test]
    fn ladder_commutator_truncation() {
        let (a, ad) = ladder_operators(&basis(20, 1.0, 1.0));
        let c = &a * &ad - &ad * &a;
        for i in 0..19 {
            assert!(close(c[(i, i)].re, 1.0, 1e-14));
        }
        assert!(close(c[(19, 19)].re, 1.0 - 20.0, 1e-13));
    }

    #[test]
    fn position_momentum_algebra() {
        let b = basis(10, 1.0, 1.0);
        let (q, p) = position_momentum(&b);
        assert!((&q - q.adjoint()).camax() < 1e-15);
        assert!((&p - p.adjoint()).camax() < 1e-15);
        let q2 = &q * &q;
        assert!(close(q2[(0, 0)].re, 0.5, 1e-14));

        let b = basis(30, 0.7, 1.3);
        let (q, p) = position_momentum(&b);
        let c = &q * &p - &p * &q;
        for i in 0..28 {
            for j in 0..28 {
                let expect = if i == j { Complex::new(0.0, 0.7) } else { Complex::new(0.0, 0.0) };
                assert!((c[(i, j)] - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn hamiltonian_diagonal() {
        let h = system_hamiltonian(&basis(3, 1.0, 2.0));
        let d: Vec<f64> = (0..3).map(|i| h[(i, i)].re).collect();
        assert_eq!(d, vec![0.0, 2.0, 4.0]);
        let b = basis(10, 0.3, 1.7);
        let (a, ad) = ladder_operators(&b);
        let h = system_hamiltonian(&b);
        let n = number_operator(&b);
        assert!((&h - &ad * &a * real(0.3 * 1.7)).camax() < 1e-14);
        assert_eq!(&h * &n - &n * &h, CMatrix::zeros(10, 10));
    }

    #[test]
    fn thermal_states() {
        let b = basis(5, 1.0, 1.0);
        let r = thermal_state(&b, 50.0).unwrap();
        assert!(close(r.matrix()[(0, 0)].re, 1.0, 1e-12));

        let b = basis(60, 1.0, 1.0);
        let r = thermal_state(&b, 1.0).unwrap();
        let n = r.expectation(&number_operator(&b)).re;
        assert!(close(n, 1.0 / (std::f64::consts::E - 1.0), 1e-10));
        let (q, p) = position_momentum(&b);
        assert!(r.expectation(&q).norm() < 1e-15 && r.expectation(&p).norm() < 1e-15);
        DensityMatrix::new(b, r.matrix().clone()).unwrap();

        // ħ = 0.1 needs dim > 276 for the default tail bound.
        let b = basis(200, 0.1, 1.0);
        assert!(matches!(thermal_state(&b, 1.0), Err(Error::TruncationTooSmall { .. })));
        let r = thermal_state_with_tail(&b, 1.0, 1e-8).unwrap();
        let n = 0.1 * r.expectation(&number_operator(&b)).re;
        // The truncated tail shifts the mean by about e^{-20}·dim·ħ ≈ 4e-8.
        assert!(close(n, 0.1 / (0.1f64.exp() - 1.0), 1e-7));
        assert!(close(n, 0.9508, 5e-5));
        assert!(close(n, 0.9508, 1e-4));
    }

    #[test]
    fn displacement_is_unitary_in_the_low_block() {
        let alpha = Complex::new(0.7, -0.4);
        let d = displacement_matrix::<f64>(60, alpha);
        let u = d.adjoint() * &d;
        for i in 0..20 {
            for j in 0..20 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((u[(i, j)] - real(e)).norm() < 1e-12);
            }
        }
        // ⟨1|D|0⟩ = α e^{-|α|²/2}
        assert!((d[(1, 0)] - alpha * (-alpha.norm_sqr() / 2.0).exp()).norm() < 1e-15);
        // ⟨1|D|1⟩ = (1 - |α|²) e^{-|α|²/2}
        let e11 = (1.0 - alpha.norm_sqr()) * (-alpha.norm_sqr() / 2.0).exp();
        assert!((d[(1, 1)] - real(e11)).norm() < 1e-15);
    }

    #[test]
    fn coherent_state_mean_amplitude() {
        let b = basis(40, 1.0, 1.0);
        let alpha = Complex::new(1.2, 0.5);
        let r = coherent_state(&b, alpha).unwrap();
        let (a, _) = ladder_operators(&b);
        assert!((r.expectation(&a) - alpha).norm() < 1e-12);
        let th = thermal_state(&b, 2.0).unwrap();
        let dt = displaced(&th, alpha).unwrap();
        assert!((dt.expectation(&a) - alpha).norm() < 1e-10);
    }
}
