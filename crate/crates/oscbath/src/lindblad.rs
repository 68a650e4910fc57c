//! Quantum generators on the truncated Fock space.
//!
//! A [`Superoperator`] is either a list of sandwich terms `X ↦ Σ L X R`
//! (matrix-free) or a sparse matrix acting on row-major vectorized
//! matrices, `vec(X)[i·dim + j] = X[i, j]`. All operator products are the
//! literal products of truncated matrices, which keeps every generator
//! exactly trace preserving.

use nalgebra as na;
use na::ComplexField;
use serde::{Deserialize, Serialize};

use crate::banded::BandLu;
use crate::bath::{self, BathSpec};
use crate::fock::{self, DensityMatrix, FockBasis};
use crate::{CMatrix, Complex, Error, Real, Result};

fn c<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

fn re<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

fn im<T: Real>(x: T) -> Complex<T> {
    Complex::new(T::zero(), x)
}

#[derive(Clone, Debug)]
enum Repr<T: Real> {
    Sandwich(Vec<(CMatrix<T>, CMatrix<T>)>),
    Sparse(Vec<Vec<(usize, Complex<T>)>>),
}

/// Linear map on `dim × dim` matrices.
#[derive(Clone, Debug)]
pub struct Superoperator<T: Real> {
    basis: FockBasis<T>,
    repr: Repr<T>,
}

impl<T: Real> Superoperator<T> {
    pub fn from_sandwich(basis: FockBasis<T>, terms: Vec<(CMatrix<T>, CMatrix<T>)>) -> Self {
        Superoperator { basis, repr: Repr::Sandwich(terms) }
    }

    /// Sparse superoperator from `(row, col, value)` triplets over vectorized
    /// indices; duplicates are summed.
    pub fn from_entries(basis: FockBasis<T>, entries: Vec<(usize, usize, Complex<T>)>) -> Self {
        let n = basis.dim() * basis.dim();
        let mut rows: Vec<Vec<(usize, Complex<T>)>> = vec![Vec::new(); n];
        for (r, col, v) in merge(entries) {
            rows[r].push((col, v));
        }
        Superoperator { basis, repr: Repr::Sparse(rows) }
    }

    pub fn basis(&self) -> &FockBasis<T> {
        &self.basis
    }

    pub fn apply(&self, x: &CMatrix<T>) -> CMatrix<T> {
        let d = self.basis.dim();
        match &self.repr {
            Repr::Sandwich(terms) => {
                let mut y = CMatrix::<T>::zeros(d, d);
                for (l, r) in terms {
                    y += l * x * r;
                }
                y
            }
            Repr::Sparse(rows) => {
                let xv: Vec<Complex<T>> = (0..d * d).map(|k| x[(k / d, k % d)]).collect();
                let mut y = CMatrix::<T>::zeros(d, d);
                for (k, row) in rows.iter().enumerate() {
                    let mut acc = re(T::zero());
                    for &(col, v) in row {
                        acc += v * xv[col];
                    }
                    y[(k / d, k % d)] = acc;
                }
                y
            }
        }
    }

    /// Nonzero matrix elements `((i·dim + j), (m·dim + n), value)`, sorted.
    pub fn entries(&self) -> Vec<(usize, usize, Complex<T>)> {
        let d = self.basis.dim();
        match &self.repr {
            Repr::Sandwich(terms) => {
                let mut out = Vec::new();
                for (l, r) in terms {
                    let lnz = nonzeros(l);
                    let rnz = nonzeros(r);
                    for &(i, m, v) in &lnz {
                        for &(n, j, w) in &rnz {
                            out.push((i * d + j, m * d + n, v * w));
                        }
                    }
                }
                merge(out)
            }
            Repr::Sparse(rows) => rows
                .iter()
                .enumerate()
                .flat_map(|(r, row)| row.iter().map(move |&(col, v)| (r, col, v)))
                .collect(),
        }
    }

    pub fn to_sparse(&self) -> Self {
        match self.repr {
            Repr::Sparse(_) => self.clone(),
            Repr::Sandwich(_) => Self::from_entries(self.basis, self.entries()),
        }
    }

    /// Dense `dim² × dim²` matrix; refused above dim 80.
    pub fn to_dense(&self) -> Result<CMatrix<T>> {
        let d = self.basis.dim();
        if d > 80 {
            return Err(Error::InvalidInput("dense superoperators are limited to dim ≤ 80".into()));
        }
        let mut m = CMatrix::<T>::zeros(d * d, d * d);
        for (r, col, v) in self.entries() {
            m[(r, col)] += v;
        }
        Ok(m)
    }

    /// Largest elementwise difference of the matrix representations.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut all = self.entries();
        all.extend(other.entries().into_iter().map(|(r, col, v)| (r, col, -v)));
        merge(all).iter().fold(T::zero(), |m, e| m.max(e.2.modulus()))
    }

    /// Upper bound on the spectral norm, `√(‖M‖₁‖M‖∞)`.
    pub fn norm_bound(&self) -> T {
        let n = self.basis.dim() * self.basis.dim();
        let mut row_sum = vec![T::zero(); n];
        let mut col_sum = vec![T::zero(); n];
        for (r, col, v) in self.entries() {
            row_sum[r] += v.modulus();
            col_sum[col] += v.modulus();
        }
        let mx = |v: &[T]| v.iter().fold(T::zero(), |m, x| m.max(*x));
        (mx(&row_sum) * mx(&col_sum)).sqrt()
    }
}

fn nonzeros<T: Real>(m: &CMatrix<T>) -> Vec<(usize, usize, Complex<T>)> {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let v = m[(i, j)];
            if v.re != T::zero() || v.im != T::zero() {
                out.push((i, j, v));
            }
        }
    }
    out
}

fn merge<T: Real>(mut v: Vec<(usize, usize, Complex<T>)>) -> Vec<(usize, usize, Complex<T>)> {
    v.sort_by_key(|e| (e.0, e.1));
    let mut out: Vec<(usize, usize, Complex<T>)> = Vec::with_capacity(v.len());
    for e in v {
        match out.last_mut() {
            Some(last) if last.0 == e.0 && last.1 == e.1 => last.2 += e.2,
            _ => out.push(e),
        }
    }
    out.retain(|e| e.2.re != T::zero() || e.2.im != T::zero());
    out
}

/// Coefficients of the general quadratic Lindblad equation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LindbladCoefficients<T> {
    pub d1: T,
    pub d2: T,
    pub d: T,
    pub lam: T,
    pub kappa: T,
    pub omega0: T,
    pub hbar: T,
    /// Hamiltonian renormalization `1 - λ²Δ/Ω₀` (1 for a bare oscillator).
    pub renorm: T,
}

impl<T: Real> LindbladCoefficients<T> {
    /// Coefficients of the bath-induced equation for given bath quantities:
    /// `Λ = λ²γ²`, `D₁ = ΛΩ₀(n+ħ/2)`, `D₂ = Λ(n+ħ/2)/Ω₀`, `D = κ = 0`.
    pub fn from_rates(gamma_sq: T, n: T, delta: T, lambda: T, omega0: T, hbar: T) -> Self {
        let l2 = lambda * lambda;
        let lam = l2 * gamma_sq;
        let m = n + hbar * T::lit(0.5);
        LindbladCoefficients {
            d1: lam * omega0 * m,
            d2: lam * m / omega0,
            d: T::zero(),
            lam,
            kappa: T::zero(),
            omega0,
            hbar,
            renorm: T::one() - l2 * delta / omega0,
        }
    }

    /// `D₁D₂ - D² - ħ²Λ²/4`.
    pub fn lindblad_margin(&self) -> T {
        self.d1 * self.d2 - self.d * self.d - self.hbar * self.hbar * self.lam * self.lam * T::lit(0.25)
    }
}

/// `−(i/ħ)[H, ·]`.
pub fn hamiltonian_generator<T: Real>(basis: &FockBasis<T>, h: &CMatrix<T>) -> Superoperator<T> {
    let d = basis.dim();
    let id = CMatrix::<T>::identity(d, d);
    let k = T::one() / basis.hbar();
    Superoperator::from_sandwich(*basis, vec![(h * im(-k), id.clone()), (id, h * im(k))])
}

/// Master equation of the oscillator with renormalized frequency and the
/// thermal dissipator with rate `λ²γ²`, `γ² = π|ε(Ω₀)|²σ(Ω₀)`.
pub fn oscillator_generator<T: Real>(basis: &FockBasis<T>, spec: &BathSpec<T>, lambda: T) -> Result<Superoperator<T>> {
    let w0 = basis.omega0();
    let qs = bath::quantum_spectra(spec, basis.hbar(), w0)?;
    let delta = bath::frequency_shifts(spec, w0)?.delta;
    Ok(oscillator_generator_from(basis, qs.gamma_sq, qs.n, delta, lambda))
}

/// [`oscillator_generator`] with the bath quantities supplied directly.
pub fn oscillator_generator_from<T: Real>(basis: &FockBasis<T>, gamma_sq: T, n: T, delta: T, lambda: T) -> Superoperator<T> {
    let d = basis.dim();
    let hb = basis.hbar();
    let w0 = basis.omega0();
    let (a, ad) = fock::ladder_operators(basis);
    let id = CMatrix::<T>::identity(d, d);
    let l2 = lambda * lambda;
    let r = T::one() - l2 * delta / w0;
    let h = fock::system_hamiltonian(basis) * re(r / hb);
    let cr = l2 * gamma_sq;
    let up = cr * n / hb;
    let down = cr * (n / hb + T::one());
    let two = T::lit(2.0);
    let aad = &a * &ad;
    let ada = &ad * &a;
    let left = &h * im(-T::one()) - &aad * re(up) - &ada * re(down);
    let right = &h * im(T::one()) - &aad * re(up) - &ada * re(down);
    Superoperator::from_sandwich(
        *basis,
        vec![(left, id.clone()), (id, right), (&ad * re(two * up), a.clone()), (a * re(two * down), ad)],
    )
}

/// General quadratic equation
/// `−(i/ħ)[H_r + (κ/2){q,p}, ρ] − (D₁[q,[q,ρ]] + D₂[p,[p,ρ]] − D([q,[p,ρ]] + [p,[q,ρ]]))/ħ²
///  − (iΛ/2ħ)([q,{p,ρ}] − [p,{q,ρ}])` with `H_r = renorm·ħΩ₀a⁺a`.
pub fn general_generator<T: Real>(basis: &FockBasis<T>, k: &LindbladCoefficients<T>) -> Superoperator<T> {
    let d = basis.dim();
    let hb = basis.hbar();
    let (q, p) = fock::position_momentum(basis);
    let id = CMatrix::<T>::identity(d, d);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let qp = &q * &p;
    let pq = &p * &q;
    let sym = &qp + &pq;
    let comm = &qp - &pq;
    let h = fock::system_hamiltonian(basis) * re(k.renorm) + &sym * re(k.kappa * half);
    let i_h = im(T::one() / hb);
    let h2 = re(T::one() / (hb * hb));
    let qq = &q * &q;
    let pp = &p * &p;
    // Λ term: −(iΛ/2ħ)([q,p]ρ + ρ[q,p] + 2qρp − 2pρq)
    let lam = im(-k.lam * half / hb);
    // −(1/ħ²)(D₁(qqρ − 2qρq + ρqq) + D₂(ppρ − 2pρp + ρpp) − D(sym ρ + ρ sym − 2qρp − 2pρq))
    let left = -&h * i_h - (&qq * re(k.d1) + &pp * re(k.d2) - &sym * re(k.d)) * h2 + &comm * lam;
    let right = &h * i_h - (&qq * re(k.d1) + &pp * re(k.d2) - &sym * re(k.d)) * h2 + &comm * lam;
    let qpo = h2 * re(-two * k.d) + lam * re(two);
    let pqo = h2 * re(-two * k.d) - lam * re(two);
    Superoperator::from_sandwich(
        *basis,
        vec![
            (left, id.clone()),
            (id, right),
            (&q * (h2 * re(two * k.d1)), q.clone()),
            (&p * (h2 * re(two * k.d2)), p.clone()),
            (&q * qpo, p.clone()),
            (p * pqo, q),
        ],
    )
}

/// `(D₁, D₂, D, Λ, κ)` making [`general_generator`] equal to
/// [`oscillator_generator`]; `beta` overrides the spec's temperature and
/// `hbar = 0` gives the classical values.
pub fn coefficients_from_model<T: Real>(
    spec: &BathSpec<T>,
    lambda: T,
    omega0: T,
    beta: T,
    hbar: T,
) -> Result<LindbladCoefficients<T>> {
    if !(beta > T::zero()) {
        return Err(Error::InvalidInput("beta must be positive".into()));
    }
    let mut s = spec.clone();
    s.beta = beta;
    let qs = bath::quantum_spectra(&s, hbar, omega0)?;
    let delta = bath::frequency_shifts(&s, omega0)?.delta;
    Ok(LindbladCoefficients::from_rates(qs.gamma_sq, qs.n, delta, lambda, omega0, hbar))
}

/// Eigenvalues of `[[D₁, iħΛ/2 − D], [−iħΛ/2 − D, D₂]]/ħ²` and whether
/// both are nonnegative (zero accepted up to round-off). At ħ = 0 the
/// unscaled matrix is used.
pub fn lindblad_form_check<T: Real>(k: &LindbladCoefficients<T>) -> (bool, (T, T)) {
    let s = if k.hbar > T::zero() { T::one() / (k.hbar * k.hbar) } else { T::one() };
    let off2 = k.d * k.d + k.hbar * k.hbar * k.lam * k.lam * T::lit(0.25);
    let half = T::lit(0.5);
    let mean = (k.d1 + k.d2) * half;
    let diff = (k.d1 - k.d2) * half;
    let rad = (diff * diff + off2).sqrt();
    let (lo, hi) = ((mean - rad) * s, (mean + rad) * s);
    let tol = T::default_epsilon() * T::lit(16.0) * (hi.abs() + T::one());
    (lo >= -tol, (lo, hi))
}

/// Non-secular second-order generator: the same bath spectra as
/// [`oscillator_generator`] but keeping the couplings between different
/// Bohr frequencies (`a²`, `a⁺²`).
///
/// With `X = a + a⁺` and `S = γ²((N+1)a + Na⁺) + i(S₊a + S₋a⁺)`, `N = n/ħ`,
/// the generator is `−(i/ħ)[H,ρ] − λ²([X, Sρ] − [X, ρS⁺])`. The secular
/// part of the Lamb-shift operator is written as `−Δa⁺a` (infinite-space
/// identity `S₊a⁺a + S₋aa⁺ = −Δa⁺a + S₋`) so that truncation does not leak
/// into the last level.
pub fn redfield_generator<T: Real>(basis: &FockBasis<T>, spec: &BathSpec<T>, lambda: T) -> Result<Superoperator<T>> {
    let w0 = basis.omega0();
    let hb = basis.hbar();
    let qs = bath::quantum_spectra(spec, hb, w0)?;
    let delta = bath::frequency_shifts(spec, w0)?.delta;
    let s_plus = bath::emission_shift(spec, hb, w0)?;
    Ok(redfield_generator_from(basis, qs.gamma_sq, qs.n, delta, s_plus, lambda))
}

/// [`redfield_generator`] with bath quantities supplied directly; `s_plus`
/// is the emission-channel Lamb integral and `S₋ = −Δ − S₊`.
pub fn redfield_generator_from<T: Real>(
    basis: &FockBasis<T>,
    gamma_sq: T,
    n: T,
    delta: T,
    s_plus: T,
    lambda: T,
) -> Superoperator<T> {
    let d = basis.dim();
    let hb = basis.hbar();
    let (a, ad) = fock::ladder_operators(basis);
    let id = CMatrix::<T>::identity(d, d);
    let l2 = lambda * lambda;
    let big_n = n / hb;
    let s_minus = -delta - s_plus;
    let half = T::lit(0.5);
    let x = &a + &ad;
    let s_re = (&a * re(big_n + T::one()) + &ad * re(big_n)) * re(gamma_sq);
    let s_im = &a * re(s_plus) + &ad * re(s_minus);
    let aa = &a * &a;
    let adad = &ad * &ad;
    let h = fock::system_hamiltonian(basis) * re(T::one() / hb);
    let h_l = (&aa + &adad) * re((s_plus + s_minus) * half) - &ad * &a * re(delta);
    let anti = (&aa - &adad) * re((s_plus - s_minus) * half);
    let xs = &x * &s_re;
    let sx = s_re.adjoint() * &x;
    let left = &h * im(-T::one()) + &h_l * im(-l2) + &anti * im(-l2) - xs * re(l2);
    let right = &h * im(T::one()) + &h_l * im(l2) + &anti * im(-l2) - sx * re(l2);
    Superoperator::from_sandwich(
        *basis,
        vec![
            (left, id.clone()),
            (id, right),
            (&x * im(-l2), s_im.adjoint()),
            (&s_im * im(l2), x.clone()),
            (&s_re * re(l2), x.clone()),
            (&x * re(l2), s_re.adjoint()),
        ],
    )
}

/// Infinite-time average over the free evolution generated by diagonal `h`:
/// keeps only elements `(i,j) ← (m,n)` with `E_i − E_j = E_m − E_n`.
pub fn secular_average<T: Real>(l: &Superoperator<T>, h: &CMatrix<T>) -> Result<Superoperator<T>> {
    let d = l.basis().dim();
    if h.nrows() != d || h.ncols() != d {
        return Err(Error::InvalidInput("hamiltonian shape does not match basis".into()));
    }
    let scale = h.camax().max(T::one());
    let tol = T::default_epsilon() * T::lit(1e3) * scale;
    for i in 0..d {
        for j in 0..d {
            if i != j && h[(i, j)].modulus() > tol {
                return Err(Error::NonDiagonalHamiltonian);
            }
        }
    }
    let e: Vec<T> = (0..d).map(|i| h[(i, i)].re).collect();
    let kept = l
        .entries()
        .into_iter()
        .filter(|&(r, col, _)| {
            let (i, j) = (r / d, r % d);
            let (m, n) = (col / d, col % d);
            ((e[i] - e[j]) - (e[m] - e[n])).abs() <= tol
        })
        .collect();
    Ok(Superoperator::from_entries(*l.basis(), kept))
}

/// Sampled solution of `dρ/dt = L(ρ)`.
#[derive(Clone, Debug)]
pub struct Trajectory<T: Real> {
    pub times: Vec<T>,
    pub states: Vec<DensityMatrix<T>>,
}

/// RK4 integration, recording every step.
pub fn evolve<T: Real>(l: &Superoperator<T>, rho0: &DensityMatrix<T>, t_max: T, dt: T) -> Result<Trajectory<T>> {
    evolve_sampled(l, rho0, t_max, dt, 1)
}

/// RK4 integration recording every `every`-th step (and the final one).
/// Each step is re-Hermitized; the trace is left free.
pub fn evolve_sampled<T: Real>(
    l: &Superoperator<T>,
    rho0: &DensityMatrix<T>,
    t_max: T,
    dt: T,
    every: usize,
) -> Result<Trajectory<T>> {
    if every == 0 {
        return Err(Error::InvalidInput("need every ≥ 1".into()));
    }
    let mut out = Trajectory { times: vec![T::zero()], states: vec![rho0.clone()] };
    evolve_observed(l, rho0, t_max, dt, |step, t, rho, last| {
        if step % every == 0 || last {
            out.times.push(t);
            out.states.push(rho.clone());
        }
        Ok(())
    })?;
    Ok(out)
}

/// RK4 integration handing `(step, t, ρ, is_last)` to `observe` after every
/// step instead of storing the states.
pub fn evolve_observed<T: Real, F>(l: &Superoperator<T>, rho0: &DensityMatrix<T>, t_max: T, dt: T, mut observe: F) -> Result<()>
where
    F: FnMut(usize, T, &DensityMatrix<T>, bool) -> Result<()>,
{
    if !(dt > T::zero()) || t_max < T::zero() {
        return Err(Error::InvalidInput("need dt > 0 and t_max ≥ 0".into()));
    }
    let sp = l.to_sparse();
    let bound = sp.norm_bound();
    if dt * bound > T::lit(2.5) {
        return Err(Error::StepTooLarge { dt: dt.as_f64(), bound: 2.5 / bound.as_f64() });
    }
    let steps = (t_max / dt).round().to_usize().unwrap_or(0);
    let basis = *rho0.basis();
    let mut rho = rho0.matrix().clone();
    let half = re(T::lit(0.5));
    let h = re(dt);
    let sixth = re(dt / T::lit(6.0));
    for step in 1..=steps {
        let k1 = sp.apply(&rho);
        let k2 = sp.apply(&(&rho + &k1 * (h * half)));
        let k3 = sp.apply(&(&rho + &k2 * (h * half)));
        let k4 = sp.apply(&(&rho + &k3 * h));
        rho += (k1 + (k2 + k3) * re(T::lit(2.0)) + k4) * sixth;
        rho = (&rho + rho.adjoint()) * half;
        let state = DensityMatrix::from_matrix_unchecked(basis, rho.clone())?;
        observe(step, dt * T::from_usize_lossy(step), &state, step == steps)?;
    }
    Ok(())
}

/// Unique stationary state, by shifted inverse subspace iteration on the
/// sparse generator (banded LU over the vectorized index).
pub fn stationary_state<T: Real>(l: &Superoperator<T>) -> Result<DensityMatrix<T>> {
    let basis = *l.basis();
    let d = basis.dim();
    let n = d * d;
    let entries = l.entries();
    let scale = {
        let sp = Superoperator::from_entries(basis, entries.clone());
        sp.norm_bound().max(T::default_epsilon())
    };
    let shift = scale * T::lit(1e-10);
    let (mut kl, mut ku) = (0usize, 0usize);
    for &(r, col, _) in &entries {
        if r > col {
            kl = kl.max(r - col);
        } else {
            ku = ku.max(col - r);
        }
    }
    let mut shifted = entries.clone();
    shifted.extend((0..n).map(|k| (k, k, re(-shift))));
    let lu = BandLu::factor(n, kl, ku, &shifted, shift * T::default_epsilon());
    let apply = |v: &[Complex<T>]| -> Vec<Complex<T>> {
        let mut y = vec![re(T::zero()); n];
        for &(r, col, x) in &entries {
            y[r] += x * v[col];
        }
        y
    };

    // Deterministic pseudo-random start block.
    const BLOCK: usize = 3;
    let mut block: Vec<Vec<Complex<T>>> = (0..BLOCK)
        .map(|b| {
            (0..n)
                .map(|k| {
                    let t = (k as f64 + 1.0) * (0.7548776662466927 + b as f64 * 0.5698402909980532);
                    c(T::lit((t.fract() - 0.5) * 2.0), T::lit(((t * 1.618).fract() - 0.5) * 2.0))
                })
                .collect()
        })
        .collect();
    for _ in 0..5 {
        for v in block.iter_mut() {
            lu.solve_in_place(v);
        }
        orthonormalize(&mut block);
    }
    let tol = T::lit(1e-8).max(T::default_epsilon() * T::lit(1e4));
    let resid: Vec<T> = block.iter().map(|v| norm(&apply(v)) / scale).collect();
    let count = resid.iter().filter(|r| **r <= tol).count();
    if count != 1 {
        return Err(Error::DegenerateNullSpace(count));
    }
    let best = resid.iter().enumerate().min_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
    let mut v = block.swap_remove(best);
    lu.solve_in_place(&mut v);
    let mut m = CMatrix::<T>::from_fn(d, d, |i, j| v[i * d + j]);
    let tr = m.trace();
    if tr.modulus() <= T::lit(1e-8) * m.camax() * T::from_usize_lossy(d) {
        return Err(Error::NoPSDNullVector(f64::NEG_INFINITY));
    }
    m /= tr;
    m = (&m + m.adjoint()) * re(T::lit(0.5));
    let rho = DensityMatrix::from_matrix_unchecked(basis, m)?;
    let lmin = rho.min_eigenvalue();
    if lmin < -T::lit(1e-10).max(T::default_epsilon() * T::lit(100.0)) {
        return Err(Error::NoPSDNullVector(lmin.as_f64()));
    }
    Ok(rho)
}

fn norm<T: Real>(v: &[Complex<T>]) -> T {
    v.iter().fold(T::zero(), |s, z| s + z.norm_sqr()).sqrt()
}

fn orthonormalize<T: Real>(block: &mut [Vec<Complex<T>>]) {
    for k in 0..block.len() {
        for j in 0..k {
            let (done, rest) = block.split_at_mut(k);
            let proj = done[j].iter().zip(rest[0].iter()).fold(re(T::zero()), |s, (u, v)| s + u.conj() * v);
            for (x, u) in rest[0].iter_mut().zip(done[j].iter()) {
                *x -= *u * proj;
            }
        }
        let nn = norm(&block[k]);
        if nn > T::zero() {
            for x in block[k].iter_mut() {
                *x /= re(nn);
            }
        }
    }
}

/// `Tr ρ(ln ρ − ln σ)`; eigenvalues of ρ at or below zero contribute 0.
pub fn relative_entropy<T: Real>(rho: &DensityMatrix<T>, sigma: &DensityMatrix<T>) -> Result<T> {
    let es = na::SymmetricEigen::new(hermitian_part(sigma.matrix()));
    let smin = es.eigenvalues.iter().fold(T::max_value().unwrap(), |m, v| m.min(*v));
    if !(smin > T::zero()) {
        return Err(Error::SingularReference(smin.as_f64()));
    }
    let er = na::SymmetricEigen::new(hermitian_part(rho.matrix()));
    let overlap = er.eigenvectors.adjoint() * &es.eigenvectors;
    let mut s = T::zero();
    for (i, p) in er.eigenvalues.iter().enumerate() {
        if *p <= T::zero() {
            continue;
        }
        s += *p * p.ln();
        for (j, q) in es.eigenvalues.iter().enumerate() {
            s -= *p * overlap[(i, j)].norm_sqr() * q.ln();
        }
    }
    Ok(s)
}

fn hermitian_part<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    (m + m.adjoint()) * re(T::lit(0.5))
}

/// Smallest eigenvalue of `P⊥ L(|ψ⟩⟨ψ|) P⊥`, `P⊥ = 1 − |ψ⟩⟨ψ|`. A negative
/// value means the evolution started from `ψ` leaves the positive cone.
pub fn positivity_defect<T: Real>(l: &Superoperator<T>, psi: &na::DVector<Complex<T>>) -> T {
    let d = l.basis().dim();
    let v = psi / re(psi.norm());
    let rho = &v * v.adjoint();
    let proj = CMatrix::<T>::identity(d, d) - &rho;
    let m = &proj * l.apply(&rho) * &proj;
    let ev = na::SymmetricEigen::new(hermitian_part(&m)).eigenvalues;
    // The ψ direction contributes an exact zero, so the result is ≤ 0 up
    // to round-off.
    let mut vals: Vec<T> = ev.iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::families;

    fn basis(d: usize) -> FockBasis<f64> {
        FockBasis::new(d, 1.0, 1.0).unwrap()
    }

    fn random_hermitian(d: usize, seed: u64) -> CMatrix<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let m = CMatrix::<f64>::from_fn(d, d, |_, _| Complex::new(next(), next()));
        &m + m.adjoint()
    }

    #[test]
    fn form_check_examples() {
        let mk = |d1, d2, d, lam| LindbladCoefficients {
            d1,
            d2,
            d,
            lam,
            kappa: 0.0,
            omega0: 1.0,
            hbar: 1.0,
            renorm: 1.0,
        };
        let (ok, ev) = lindblad_form_check(&mk(1.0, 1.0, 0.0, 0.0));
        assert!(ok && ev == (1.0, 1.0));
        assert!(!lindblad_form_check(&mk(1.0, 1.0, 0.0, 3.0)).0);
        let (ok, ev) = lindblad_form_check(&mk(1.0, 1.0, 1.0, 0.0));
        assert!(ok && ev.0.abs() < 1e-15 && (ev.1 - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_coefficients_give_commutator() {
        let b = basis(8);
        let k = LindbladCoefficients { d1: 0.0, d2: 0.0, d: 0.0, lam: 0.0, kappa: 0.0, omega0: 1.0, hbar: 1.0, renorm: 1.0 };
        let g = general_generator(&b, &k);
        let h = hamiltonian_generator(&b, &fock::system_hamiltonian(&b));
        assert!(g.max_abs_diff(&h) < 1e-15);
        let spec = families::flat(1.0, 20.0, 1.0).unwrap();
        let o = oscillator_generator(&b, &spec, 0.0).unwrap();
        assert!(o.max_abs_diff(&h) < 1e-15);
    }

    #[test]
    fn trace_and_hermiticity_preserved() {
        let b = FockBasis::new(12, 0.7, 1.3).unwrap();
        let k = LindbladCoefficients { d1: 0.8, d2: 0.5, d: 0.2, lam: 0.4, kappa: 0.1, omega0: 1.3, hbar: 0.7, renorm: 0.9 };
        let spec = families::ohmic(0.2, 3.0, 1.0).unwrap();
        let gens = [
            general_generator(&b, &k),
            oscillator_generator(&b, &spec, 0.8).unwrap(),
            redfield_generator(&b, &spec, 0.8).unwrap(),
        ];
        for (s, g) in gens.iter().enumerate() {
            for seed in 0..10 {
                let x = random_hermitian(12, seed + 10 * s as u64);
                let y = g.apply(&x);
                assert!(y.trace().norm() < 1e-12);
                assert!((&y - y.adjoint()).camax() < 1e-12);
            }
        }
    }

    #[test]
    fn sparse_and_sandwich_agree() {
        let b = basis(9);
        let spec = families::ohmic(0.5, 10.0, 2.0).unwrap();
        let l = redfield_generator(&b, &spec, 0.6).unwrap();
        let s = l.to_sparse();
        let x = random_hermitian(9, 3);
        assert!((l.apply(&x) - s.apply(&x)).camax() < 1e-13);
        let dense = l.to_dense().unwrap();
        let xv = na::DVector::from_fn(81, |k, _| x[(k / 9, k % 9)]);
        let yv = dense * xv;
        let y = l.apply(&x);
        assert!((0..81).all(|k| (yv[k] - y[(k / 9, k % 9)]).norm() < 1e-13));
    }

    #[test]
    fn ground_state_dissipator_vanishes_at_zero_temperature() {
        let b = basis(10);
        let l = oscillator_generator_from(&b, 1.0, 0.0, 0.0, 1.0);
        let g = fock::number_state(&b, 0).unwrap();
        assert!(l.apply(g.matrix()).camax() < 1e-15);
    }

    #[test]
    fn secular_projection_properties() {
        let b = basis(10);
        let h = fock::system_hamiltonian(&b);
        let osc = oscillator_generator_from(&b, 1.0, 0.5, 0.1, 1.0);
        let s = secular_average(&osc, &h).unwrap();
        assert!(s.max_abs_diff(&osc) < 1e-15);
        let red = redfield_generator_from(&b, 1.0, 0.5, 0.1, 0.3, 1.0);
        let s1 = secular_average(&red, &h).unwrap();
        let s2 = secular_average(&s1, &h).unwrap();
        assert!(s1.max_abs_diff(&s2) == 0.0);
        assert!(s1.max_abs_diff(&osc) < 1e-12);
        // a single element coupling (0,0) ← (0,2) has Bohr mismatch 2.
        let single = Superoperator::from_entries(b, vec![(0, 2, Complex::new(1.0, 0.0))]);
        assert!(secular_average(&single, &h).unwrap().entries().is_empty());
        let mut nd = h.clone();
        nd[(0, 1)] = Complex::new(0.1, 0.0);
        assert!(matches!(secular_average(&osc, &nd), Err(Error::NonDiagonalHamiltonian)));
    }

    #[test]
    fn stationary_state_small() {
        let b = basis(30);
        let l = oscillator_generator_from(&b, 0.5, 1.0 / (1f64.exp() - 1.0), 0.0, 1.0);
        let rho = stationary_state(&l).unwrap();
        let th = fock::thermal_state(&b, 1.0).unwrap();
        assert!(rho.trace_distance(&th) < 1e-10);
        let h = hamiltonian_generator(&b, &fock::system_hamiltonian(&b));
        assert!(matches!(stationary_state(&h), Err(Error::DegenerateNullSpace(3))));
    }

    #[test]
    fn relative_entropy_values() {
        let b = basis(40);
        let th = fock::thermal_state(&b, 1.0).unwrap();
        assert!(relative_entropy(&th, &th).unwrap().abs() < 1e-12);
        let g = fock::number_state(&b, 0).unwrap();
        let s = relative_entropy(&g, &th).unwrap();
        assert!((s + (1.0 - (-1f64).exp()).ln()).abs() < 1e-10);
        assert!((s - 0.45868).abs() < 1e-5);
        assert!(matches!(relative_entropy(&th, &g), Err(Error::SingularReference(_))));
    }

    #[test]
    fn evolve_rejects_large_steps_and_keeps_purity_unitary() {
        let b = basis(10);
        let h = hamiltonian_generator(&b, &fock::system_hamiltonian(&b));
        let rho0 = fock::coherent_state(&b, Complex::new(0.5, 0.2)).unwrap();
        assert!(matches!(evolve(&h, &rho0, 1.0, 1.0), Err(Error::StepTooLarge { .. })));
        let tr = evolve(&h, &rho0, 2.0, 0.01).unwrap();
        let p0 = rho0.purity();
        assert!(tr.states.iter().all(|r| (r.purity() - p0).abs() < 1e-8));
        assert_eq!(tr.times.len(), 201);
    }
}
