//! Generalized Wigner transforms for the Gaussian ordering family.
//!
//! Conventions: `χ_ρ(η, ξ) = Tr ρ e^{i(ηq̂ + ξp̂)} = Tr ρ D(α)` with
//! `α = iη√(ħ/2Ω₀) − ξ√(ħΩ₀/2)`. The kernel is `Ω(σ) = e^{χ(σ)}`,
//! `χ(σ) = −a(ħ/4)(η²/Ω₀ + Ω₀ξ²)`, and the field is
//! `W(q,p) = (2π)^{-2} ∫ e^{−i(ηq+ξp)} χ_ρ(σ)/Ω(σ) dσ`. So `a = 0` is the
//! Wigner function, `a = −1` the smoothed (normal-symbol) field and `a = +1`
//! the singular (P-like) field, where division by `Ω` amplifies large `σ`.
//!
//! Phase grids are cell centred; the σ-grid is the DFT dual with spacing
//! `2π/L` and `N` points centred on zero.

use nalgebra as na;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::fock::{self, DensityMatrix, FockBasis};
use crate::{CMatrix, Complex, Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingKernel<T> {
    pub a: T,
    pub omega0: T,
    pub hbar: T,
}

impl<T: Real> OrderingKernel<T> {
    pub fn new(a: T, omega0: T, hbar: T) -> Result<Self> {
        if !(omega0 > T::zero()) || hbar < T::zero() || !a.is_finite() {
            return Err(Error::InvalidInput("kernel needs Ω₀ > 0, ħ ≥ 0 and finite a".into()));
        }
        Ok(OrderingKernel { a, omega0, hbar })
    }

    /// `χ(η, ξ)`; real and even, so `χ(−σ) = χ(σ)*` and `χ(0) = 0`.
    pub fn exponent(&self, eta: T, xi: T) -> T {
        -self.a * self.hbar * T::lit(0.25) * (eta * eta / self.omega0 + self.omega0 * xi * xi)
    }

    pub fn omega(&self, eta: T, xi: T) -> T {
        self.exponent(eta, xi).exp()
    }
}

/// Uniform cell-centred grid: `q_i = q_min + (i + ½)Δq`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid<T> {
    pub q_min: T,
    pub q_max: T,
    pub p_min: T,
    pub p_max: T,
    pub n_q: usize,
    pub n_p: usize,
}

impl<T: Real> PhaseGrid<T> {
    pub fn new(q_min: T, q_max: T, p_min: T, p_max: T, n_q: usize, n_p: usize) -> Result<Self> {
        if !(q_max > q_min) || !(p_max > p_min) {
            return Err(Error::InvalidInput("empty phase grid extent".into()));
        }
        if n_q < 2 || n_p < 2 || !n_q.is_multiple_of(2) || !n_p.is_multiple_of(2) {
            return Err(Error::InvalidInput("grid sizes must be even and ≥ 2".into()));
        }
        Ok(PhaseGrid { q_min, q_max, p_min, p_max, n_q, n_p })
    }

    /// `[-q_max, q_max] × [-p_max, p_max]`.
    pub fn symmetric(q_max: T, p_max: T, n_q: usize, n_p: usize) -> Result<Self> {
        Self::new(-q_max, q_max, -p_max, p_max, n_q, n_p)
    }

    pub fn dq(&self) -> T {
        (self.q_max - self.q_min) / T::from_usize_lossy(self.n_q)
    }

    pub fn dp(&self) -> T {
        (self.p_max - self.p_min) / T::from_usize_lossy(self.n_p)
    }

    pub fn q(&self, i: usize) -> T {
        self.q_min + (T::from_usize_lossy(i) + T::lit(0.5)) * self.dq()
    }

    pub fn p(&self, j: usize) -> T {
        self.p_min + (T::from_usize_lossy(j) + T::lit(0.5)) * self.dp()
    }

    /// Dual frequencies `η_k = (k − N/2)·2π/L_q` (and likewise `ξ`).
    pub fn dual(&self) -> (Vec<T>, Vec<T>) {
        let f = |n: usize, len: T| -> Vec<T> {
            let d = T::two_pi() / len;
            (0..n).map(|k| (T::from_usize_lossy(k) - T::from_usize_lossy(n / 2)) * d).collect()
        };
        (f(self.n_q, self.q_max - self.q_min), f(self.n_p, self.p_max - self.p_min))
    }
}

/// Real field sampled on a phase grid; `values[(i, j)]` sits at `(q_i, p_j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseSpaceField<T: Real> {
    pub grid: PhaseGrid<T>,
    pub values: na::DMatrix<T>,
}

impl<T: Real> PhaseSpaceField<T> {
    pub fn new(grid: PhaseGrid<T>, values: na::DMatrix<T>) -> Result<Self> {
        if values.nrows() != grid.n_q || values.ncols() != grid.n_p {
            return Err(Error::InvalidInput("field shape does not match grid".into()));
        }
        Ok(PhaseSpaceField { grid, values })
    }

    pub fn from_fn(grid: PhaseGrid<T>, f: impl Fn(T, T) -> T) -> Self {
        let values = na::DMatrix::from_fn(grid.n_q, grid.n_p, |i, j| f(grid.q(i), grid.p(j)));
        PhaseSpaceField { grid, values }
    }

    pub fn zeros(grid: PhaseGrid<T>) -> Self {
        PhaseSpaceField { grid, values: na::DMatrix::zeros(grid.n_q, grid.n_p) }
    }

    pub fn cell_area(&self) -> T {
        self.grid.dq() * self.grid.dp()
    }

    pub fn integral(&self) -> T {
        self.values.sum() * self.cell_area()
    }

    pub fn max_abs(&self) -> T {
        self.values.amax()
    }

    pub fn min(&self) -> T {
        self.values.min()
    }

    pub fn max(&self) -> T {
        self.values.max()
    }

    pub fn sup_distance(&self, other: &Self) -> T {
        (&self.values - &other.values).amax()
    }

    pub fn l1_distance(&self, other: &Self) -> T {
        (&self.values - &other.values).abs().sum() * self.cell_area()
    }

    /// Largest boundary value relative to the largest value.
    pub fn boundary_ratio(&self) -> T {
        let (nq, np) = (self.grid.n_q, self.grid.n_p);
        let mut edge = T::zero();
        for i in 0..nq {
            edge = edge.max(self.values[(i, 0)].abs()).max(self.values[(i, np - 1)].abs());
        }
        for j in 0..np {
            edge = edge.max(self.values[(0, j)].abs()).max(self.values[(nq - 1, j)].abs());
        }
        let m = self.max_abs();
        if m > T::zero() {
            edge / m
        } else {
            T::zero()
        }
    }

    /// Mean `(⟨q⟩, ⟨p⟩)` and covariance `[[qq, qp], [qp, pp]]` of the field
    /// taken as a (quasi-)density.
    pub fn moments(&self) -> ([T; 2], [[T; 2]; 2]) {
        let g = &self.grid;
        let mut s = [T::zero(); 6];
        for i in 0..g.n_q {
            let q = g.q(i);
            for j in 0..g.n_p {
                let p = g.p(j);
                let f = self.values[(i, j)];
                s[0] += f;
                s[1] += f * q;
                s[2] += f * p;
                s[3] += f * q * q;
                s[4] += f * q * p;
                s[5] += f * p * p;
            }
        }
        let (mq, mp) = (s[1] / s[0], s[2] / s[0]);
        let cov = [[s[3] / s[0] - mq * mq, s[4] / s[0] - mq * mp], [s[4] / s[0] - mq * mp, s[5] / s[0] - mp * mp]];
        ([mq, mp], cov)
    }
}

/// Characteristic function sampled on the σ-grid dual to a phase grid.
#[derive(Clone, Debug)]
pub struct CharacteristicFunction<T: Real> {
    pub eta: Vec<T>,
    pub xi: Vec<T>,
    pub values: CMatrix<T>,
}

fn alpha<T: Real>(basis: &FockBasis<T>, eta: T, xi: T) -> Complex<T> {
    let two = T::lit(2.0);
    let (hb, w) = (basis.hbar(), basis.omega0());
    Complex::new(-xi * (hb * w / two).sqrt(), eta * (hb / (two * w)).sqrt())
}

fn edge_ratio<T: Real>(m: &CMatrix<T>) -> T {
    masked_edge_ratio(m, None)
}

/// Largest magnitude on the border of the retained region (grid edge or next
/// to a dropped point) relative to the peak.
fn masked_edge_ratio<T: Real>(m: &CMatrix<T>, keep: Option<&na::DMatrix<bool>>) -> T {
    let (r, c) = (m.nrows(), m.ncols());
    let kept = |i: usize, j: usize| keep.is_none_or(|k| k[(i, j)]);
    let mut edge = T::zero();
    let mut peak = T::zero();
    for i in 0..r {
        for j in 0..c {
            if !kept(i, j) {
                continue;
            }
            let v = m[(i, j)].norm_sqr();
            peak = peak.max(v);
            let border = i == 0
                || j == 0
                || i == r - 1
                || j == c - 1
                || !kept(i - 1, j)
                || !kept(i + 1, j)
                || !kept(i, j - 1)
                || !kept(i, j + 1);
            if border {
                edge = edge.max(v);
            }
        }
    }
    if peak > T::zero() {
        (edge / peak).sqrt()
    } else {
        T::zero()
    }
}

/// Points whose magnitude is above `floor·peak`. Only these are multiplied
/// by an amplifying kernel factor; below the floor the samples carry no
/// information and amplifying them only adds noise.
fn above_floor<T: Real>(m: &CMatrix<T>, floor: f64) -> na::DMatrix<bool> {
    let peak = m.iter().fold(T::zero(), |a, z| a.max(z.norm_sqr())).sqrt();
    let floor = T::lit(floor) * peak;
    na::DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].norm_sqr().sqrt() > floor)
}

/// Characteristic functions of truncated states level off at a noise floor
/// (around 1e-13 for displaced states); it is read off the σ-grid border,
/// which `characteristic_function` has already checked to be decayed.
fn state_floor<T: Real>(m: &CMatrix<T>) -> f64 {
    TRANSFORM_FLOOR.max(10.0 * edge_ratio(m).as_f64())
}
/// FFT round-off on the way back from a field.
const TRANSFORM_FLOOR: f64 = 1e-14;

/// `χ_ρ(σ) = Tr ρ D(α(σ))` on the dual grid of `grid`. Fails with
/// `GridUnderResolved` when χ_ρ has not decayed to 1e-10 of its peak at the
/// σ-grid border (the phase grid spacing is too coarse for the state).
pub fn characteristic_function<T: Real>(rho: &DensityMatrix<T>, grid: &PhaseGrid<T>) -> Result<CharacteristicFunction<T>> {
    let basis = *rho.basis();
    let d = basis.dim();
    let (eta, xi) = grid.dual();
    let m = rho.matrix();
    let rows: Vec<Vec<Complex<T>>> = eta
        .par_iter()
        .map(|&e| {
            xi.iter()
                .map(|&x| {
                    let dm = fock::displacement_matrix(d, alpha(&basis, e, x));
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for i in 0..d {
                        for j in 0..d {
                            acc += m[(i, j)] * dm[(j, i)];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let values = CMatrix::from_fn(eta.len(), xi.len(), |k, l| rows[k][l]);
    let ratio = edge_ratio(&values);
    if ratio > T::lit(1e-10) {
        return Err(Error::GridUnderResolved(format!(
            "characteristic function edge/peak {:e}; refine the phase grid spacing",
            ratio.as_f64()
        )));
    }
    Ok(CharacteristicFunction { eta, xi, values })
}

fn fft2<T: Real>(m: &mut CMatrix<T>, inverse: bool) {
    let (r, c) = (m.nrows(), m.ncols());
    let mut planner = FftPlanner::<T>::new();
    let (fr, fc) = if inverse {
        (planner.plan_fft_inverse(r), planner.plan_fft_inverse(c))
    } else {
        (planner.plan_fft_forward(r), planner.plan_fft_forward(c))
    };
    // Columns are contiguous in nalgebra's column-major storage.
    for j in 0..c {
        let mut col: Vec<Complex<T>> = m.column(j).iter().copied().collect();
        fr.process(&mut col);
        for i in 0..r {
            m[(i, j)] = col[i];
        }
    }
    for i in 0..r {
        let mut row: Vec<Complex<T>> = m.row(i).iter().copied().collect();
        fc.process(&mut row);
        for j in 0..c {
            m[(i, j)] = row[j];
        }
    }
}

fn check_pow2<T: Real>(grid: &PhaseGrid<T>) -> Result<()> {
    if !grid.n_q.is_power_of_two() || !grid.n_p.is_power_of_two() {
        return Err(Error::InvalidInput("transform grids must have power-of-two sizes".into()));
    }
    Ok(())
}

/// Field from a characteristic function already divided by the kernel;
/// returns the field and the largest `|Im|/max|Re|`.
fn field_from_sigma<T: Real>(grid: &PhaseGrid<T>, eta: &[T], xi: &[T], chi: &CMatrix<T>) -> (PhaseSpaceField<T>, T) {
    let (nq, np) = (grid.n_q, grid.n_p);
    let q0 = grid.q(0);
    let p0 = grid.p(0);
    let mut m = CMatrix::from_fn(nq, np, |k, l| {
        let ph = -(eta[k] * q0 + xi[l] * p0);
        chi[(k, l)] * Complex::new(ph.cos(), ph.sin())
    });
    fft2(&mut m, false);
    let deta = eta[1] - eta[0];
    let dxi = xi[1] - xi[0];
    let scale = deta * dxi / (T::two_pi() * T::two_pi());
    let mut imag = T::zero();
    let values = na::DMatrix::from_fn(nq, np, |j, l| {
        let s = if (j + l) % 2 == 0 { scale } else { -scale };
        let v = m[(j, l)] * s;
        imag = imag.max(v.im.abs());
        v.re
    });
    let field = PhaseSpaceField { grid: *grid, values };
    let mx = field.max_abs();
    let ratio = if mx > T::zero() { imag / mx } else { T::zero() };
    (field, ratio)
}

/// Generalized Wigner field and the relative size of the discarded
/// imaginary part.
pub fn generalized_wigner_with_imag<T: Real>(
    rho: &DensityMatrix<T>,
    kernel: &OrderingKernel<T>,
    grid: &PhaseGrid<T>,
) -> Result<(PhaseSpaceField<T>, T)> {
    check_pow2(grid)?;
    let cf = characteristic_function(rho, grid)?;
    let amplifying = kernel.a > T::zero() && kernel.hbar > T::zero();
    let keep = if amplifying { Some(above_floor(&cf.values, state_floor(&cf.values))) } else { None };
    let zero = Complex::new(T::zero(), T::zero());
    let div = CMatrix::from_fn(cf.eta.len(), cf.xi.len(), |k, l| {
        if keep.as_ref().is_none_or(|m| m[(k, l)]) {
            cf.values[(k, l)] * (-kernel.exponent(cf.eta[k], cf.xi[l])).exp()
        } else {
            zero
        }
    });
    let ratio = masked_edge_ratio(&div, keep.as_ref());
    if !ratio.is_finite() || ratio > T::lit(1e-6) {
        return Err(Error::KernelDivergence(ratio.as_f64()));
    }
    let (field, imag) = field_from_sigma(grid, &cf.eta, &cf.xi, &div);
    let b = field.boundary_ratio();
    if b > T::lit(1e-10) {
        return Err(Error::GridUnderResolved(format!("field boundary/max {:e}; enlarge the phase grid", b.as_f64())));
    }
    Ok((field, imag))
}

/// Generalized Wigner field of `rho`; the imaginary part must be below
/// 1e-8 of the field maximum and is discarded.
pub fn generalized_wigner<T: Real>(
    rho: &DensityMatrix<T>,
    kernel: &OrderingKernel<T>,
    grid: &PhaseGrid<T>,
) -> Result<PhaseSpaceField<T>> {
    let (field, imag) = generalized_wigner_with_imag(rho, kernel, grid)?;
    if imag > T::lit(1e-8) {
        return Err(Error::InvalidInput(format!("field has imaginary part {:e}; state not Hermitian", imag.as_f64())));
    }
    Ok(field)
}

/// Density matrix of a field: back to σ, multiply by Ω, then
/// `ρ = (ħ/2π) Σ χ_ρ(σ) D(−α(σ)) ΔηΔξ`. Hermiticity is enforced.
pub fn inverse_transform<T: Real>(
    field: &PhaseSpaceField<T>,
    kernel: &OrderingKernel<T>,
    basis: &FockBasis<T>,
) -> Result<DensityMatrix<T>> {
    let grid = field.grid;
    check_pow2(&grid)?;
    if field.boundary_ratio() > T::lit(1e-10) {
        return Err(Error::GridUnderResolved("field does not vanish at the grid boundary".into()));
    }
    let (eta, xi) = grid.dual();
    let (nq, np) = (grid.n_q, grid.n_p);
    let mut m = CMatrix::from_fn(nq, np, |j, l| {
        let s = if (j + l) % 2 == 0 { T::one() } else { -T::one() };
        Complex::new(field.values[(j, l)] * s, T::zero())
    });
    fft2(&mut m, true);
    let (q0, p0) = (grid.q(0), grid.p(0));
    let area = field.cell_area();
    let back = CMatrix::from_fn(nq, np, |k, l| {
        let ph = eta[k] * q0 + xi[l] * p0;
        m[(k, l)] * Complex::new(ph.cos(), ph.sin()) * area
    });
    let amplifying = kernel.a < T::zero() && kernel.hbar > T::zero();
    let keep = if amplifying { Some(above_floor(&back, TRANSFORM_FLOOR)) } else { None };
    let chi = CMatrix::from_fn(nq, np, |k, l| {
        if keep.as_ref().is_none_or(|m| m[(k, l)]) {
            back[(k, l)] * kernel.omega(eta[k], xi[l])
        } else {
            Complex::new(T::zero(), T::zero())
        }
    });
    let d = basis.dim();
    let w = basis.hbar() * (eta[1] - eta[0]) * (xi[1] - xi[0]) / T::two_pi();
    let total = (0..nq)
        .into_par_iter()
        .map(|k| {
            let mut acc = CMatrix::<T>::zeros(d, d);
            for l in 0..np {
                let c = chi[(k, l)];
                if c.norm_sqr() == T::zero() {
                    continue;
                }
                let dm = fock::displacement_matrix(d, -alpha(basis, eta[k], xi[l]));
                acc += dm * c;
            }
            acc
        })
        .reduce(|| CMatrix::<T>::zeros(d, d), |a, b| a + b);
    let rho = total * Complex::new(w, T::zero());
    let rho = (&rho + rho.adjoint()) * Complex::new(T::lit(0.5), T::zero());
    DensityMatrix::from_matrix_unchecked(*basis, rho)
}

/// Closed-form Ψ-correction `−(aħ/4)(c_qq ∂²_q + c_pp ∂²_p)` of a quadratic
/// kernel, relating the field of ordering `a` to the Weyl field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiCorrection<T> {
    pub a: T,
    pub hbar: T,
    pub omega0: T,
    pub c_qq: T,
    pub c_pp: T,
}

impl<T: Real> PsiCorrection<T> {
    /// Shifts of the momentum and position diffusion coefficients,
    /// `(−aħ(Λ+κ)Ω₀/2, −aħ(Λ−κ)/(2Ω₀))`.
    pub fn diffusion_shifts(&self, lam: T, kappa: T) -> (T, T) {
        let h = self.a * self.hbar * T::lit(0.5);
        (-h * (lam + kappa) * self.omega0, -h * (lam - kappa) / self.omega0)
    }

    /// Applies the correction to a field with second-order central
    /// differences (zero beyond the grid).
    pub fn apply(&self, f: &PhaseSpaceField<T>) -> PhaseSpaceField<T> {
        let g = f.grid;
        let (dq2, dp2) = (g.dq() * g.dq(), g.dp() * g.dp());
        let at = |i: isize, j: isize| -> T {
            if i < 0 || j < 0 || i >= g.n_q as isize || j >= g.n_p as isize {
                T::zero()
            } else {
                f.values[(i as usize, j as usize)]
            }
        };
        let k = -self.a * self.hbar * T::lit(0.25);
        let two = T::lit(2.0);
        let values = na::DMatrix::from_fn(g.n_q, g.n_p, |i, j| {
            let (i, j) = (i as isize, j as isize);
            let c = at(i, j);
            let fqq = (at(i + 1, j) - two * c + at(i - 1, j)) / dq2;
            let fpp = (at(i, j + 1) - two * c + at(i, j - 1)) / dp2;
            k * (self.c_qq * fqq + self.c_pp * fpp)
        });
        PhaseSpaceField { grid: g, values }
    }
}

/// Ψ-correction of the Gaussian family: `c_qq = 1/Ω₀`, `c_pp = Ω₀`.
pub fn psi_correction<T: Real>(kernel: &OrderingKernel<T>) -> Result<PsiCorrection<T>> {
    Ok(PsiCorrection {
        a: kernel.a,
        hbar: kernel.hbar,
        omega0: kernel.omega0,
        c_qq: T::one() / kernel.omega0,
        c_pp: kernel.omega0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(d: usize) -> FockBasis<f64> {
        FockBasis::new(d, 1.0, 1.0).unwrap()
    }

    #[test]
    fn characteristic_function_of_vacuum() {
        let b = basis(12);
        let grid = PhaseGrid::symmetric(8.0, 8.0, 64, 64).unwrap();
        let cf = characteristic_function(&fock::number_state(&b, 0).unwrap(), &grid).unwrap();
        for (k, e) in cf.eta.iter().enumerate() {
            for (l, x) in cf.xi.iter().enumerate() {
                let exact = (-(e * e + x * x) / 4.0).exp();
                assert!((cf.values[(k, l)] - Complex::new(exact, 0.0)).norm() < 1e-14);
            }
        }
        assert!((cf.values[(32, 32)] - Complex::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn conjugation_symmetry() {
        let b = basis(12);
        let rho = fock::coherent_state(&b, Complex::new(0.3, -0.4)).unwrap();
        let grid = PhaseGrid::symmetric(8.0, 8.0, 64, 64).unwrap();
        let cf = characteristic_function(&rho, &grid).unwrap();
        for k in 1..64 {
            for l in 1..64 {
                let a = cf.values[(k, l)];
                let b = cf.values[(64 - k, 64 - l)];
                assert!((a - b.conj()).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let b = basis(20);
        let grid = PhaseGrid::symmetric(8.0, 8.0, 8, 8).unwrap();
        let r = characteristic_function(&fock::number_state(&b, 10).unwrap(), &grid);
        assert!(matches!(r, Err(Error::GridUnderResolved(_))));
    }

    #[test]
    fn psi_shift_example() {
        let k = OrderingKernel::<f64>::new(1.0, 2.0, 0.5).unwrap();
        let psi = psi_correction(&k).unwrap();
        let (s1, _) = psi.diffusion_shifts(1.0, 0.0);
        assert!((s1 + 0.5).abs() < 1e-15);
        let z = psi_correction(&OrderingKernel::new(0.0, 2.0, 0.5).unwrap()).unwrap();
        assert_eq!(z.diffusion_shifts(1.0, 0.3), (0.0, 0.0));
    }

    #[test]
    fn kernel_involutive() {
        let k = OrderingKernel::new(-1.0, 1.3, 0.7).unwrap();
        assert_eq!(k.omega(0.0, 0.0), 1.0);
        assert_eq!(k.exponent(0.4, -0.2), k.exponent(-0.4, 0.2));
    }
}
