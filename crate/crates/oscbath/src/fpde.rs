//! Fokker-Planck operators for the oscillator phase space and a finite
//! volume solver.
//!
//! Every operator has the form
//! `∂_t f = ∂_q(A_q f) + ∂_p(A_p f) + Σ D_ij ∂_i ∂_j f` with affine drift
//! `A = M (q, p)` and a constant symmetric diffusion matrix `D`. The
//! potential is `Ω₀²q²/2`.
//!
//! The solver writes the flux `J = A f + D∇f` relative to the operator's own
//! stationary Gaussian `G` when it has one: with `f = G g`,
//! `J = g J_G + G D∇g`, and `J_G` is divergence free with stream function
//! `sG`. Face fluxes of `J_G` are differences of the stream function at cell
//! corners, so `G` is a discrete steady state to round-off. Operators without
//! a stationary Gaussian fall back to plain central fluxes. Both schemes are
//! second order, conservative and have zero flux through the outer walls.

use nalgebra as na;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bath::{self, BathSpec};
use crate::lindblad::{self, LindbladCoefficients};
use crate::wigner::{self, OrderingKernel, PhaseGrid, PhaseSpaceField};
use crate::{Error, Real, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    Classical,
    Gme,
    General,
    QuantumPs,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FPOperator<T> {
    pub variant: Variant,
    /// `M` with `(A_q, A_p) = M (q, p)`.
    pub drift: [[T; 2]; 2],
    /// Symmetric; `[0][1]` multiplies `2∂_q∂_p`.
    pub diffusion: [[T; 2]; 2],
    pub renorm_factor: T,
    pub omega0: T,
    /// `(x₁/q, x₂/p)`; `[1, 1]` for phase-space coordinates.
    pub scale: [T; 2],
}

/// Inputs for [`build`]; which fields are needed depends on the variant.
#[derive(Clone)]
pub struct FPParams<T: Real> {
    pub spec: Option<BathSpec<T>>,
    pub lambda: Option<T>,
    pub omega0: Option<T>,
    /// Overrides the spec's β when set.
    pub beta: Option<T>,
    pub hbar: Option<T>,
    /// Ordering parameter; 0 when unset.
    pub a: Option<T>,
    pub coefficients: Option<LindbladCoefficients<T>>,
}

impl<T: Real> Default for FPParams<T> {
    fn default() -> Self {
        FPParams { spec: None, lambda: None, omega0: None, beta: None, hbar: None, a: None, coefficients: None }
    }
}

fn need<T: Copy>(v: Option<T>, what: &'static str) -> Result<T> {
    v.ok_or(Error::MissingBathQuantity(what))
}

fn sym2<T: Real>(m: &[[T; 2]; 2]) -> bool {
    m[0][1] == m[1][0]
}

impl<T: Real> FPOperator<T> {
    pub fn new(variant: Variant, drift: [[T; 2]; 2], diffusion: [[T; 2]; 2], renorm_factor: T, omega0: T) -> Result<Self> {
        if !sym2(&diffusion) {
            return Err(Error::InvalidInput("diffusion matrix must be symmetric".into()));
        }
        if !(omega0 > T::zero()) {
            return Err(Error::InvalidInput("omega0 must be positive".into()));
        }
        Ok(FPOperator { variant, drift, diffusion, renorm_factor, omega0, scale: [T::one(), T::one()] })
    }

    pub fn zero(omega0: T) -> Self {
        let z = T::zero();
        FPOperator {
            variant: Variant::General,
            drift: [[z, z], [z, z]],
            diffusion: [[z, z], [z, z]],
            renorm_factor: T::one(),
            omega0,
            scale: [T::one(), T::one()],
        }
    }

    /// CLASSICAL operator from bath quantities: friction `Λ = λ²πu_s²/(2Ω₀²)`
    /// on both axes, `D_pp = Λ/β`, `D_qq = D_pp/Ω₀²`, Hamiltonian flow scaled
    /// by `r = 1 − λ²Δ/Ω₀`.
    pub fn classical_from(u_sq: T, delta: T, lambda: T, omega0: T, beta: T) -> Result<Self> {
        let l2 = lambda * lambda;
        let fric = l2 * T::pi() * u_sq / (T::lit(2.0) * omega0 * omega0);
        let dpp = fric / beta;
        let r = T::one() - l2 * delta / omega0;
        Self::new(
            Variant::Classical,
            [[fric, -r], [r * omega0 * omega0, fric]],
            [[dpp / (omega0 * omega0), T::zero()], [T::zero(), dpp]],
            r,
            omega0,
        )
    }

    /// The printed GME operator: no position diffusion, friction
    /// `2πλ²u²/Ω₀²`, `D_pp = πλ²u²/(βΩ₀²)` and mixed term `λ²χ/Ω₀ ∂_p∂_q`.
    pub fn gme_from(u_sq: T, delta: T, chi: T, lambda: T, omega0: T, beta: T) -> Result<Self> {
        let l2 = lambda * lambda;
        let w2 = omega0 * omega0;
        let r = T::one() - l2 * delta / omega0;
        let dqp = l2 * chi / (T::lit(2.0) * omega0);
        Self::new(
            Variant::Gme,
            [[T::zero(), -T::one()], [r * w2, T::lit(2.0) * T::pi() * l2 * u_sq / w2]],
            [[T::zero(), dqp], [dqp, T::pi() * l2 * u_sq / (beta * w2)]],
            r,
            omega0,
        )
    }

    /// GENERAL operator for ordering `a`: diffusion
    /// `D₁ − aħ(Λ+κ)Ω₀/2` on `∂²_p`, `D₂ − aħ(Λ−κ)/(2Ω₀)` on `∂²_q`, `2D` on
    /// `∂_q∂_p`; drift `(−rp + (Λ−κ)q, rΩ₀²q + (Λ+κ)p)`.
    pub fn general_from(k: &LindbladCoefficients<T>, a: T) -> Result<Self> {
        let kernel = OrderingKernel::new(a, k.omega0, k.hbar)?;
        let (spp, sqq) = wigner::psi_correction(&kernel)?.diffusion_shifts(k.lam, k.kappa);
        let (w, r) = (k.omega0, k.renorm);
        Self::new(
            Variant::General,
            [[k.lam - k.kappa, -r], [r * w * w, k.lam + k.kappa]],
            [[k.d2 + sqq, k.d], [k.d, k.d1 + spp]],
            r,
            w,
        )
    }

    pub fn drift_at(&self, q: T, p: T) -> (T, T) {
        let m = &self.drift;
        (m[0][0] * q + m[0][1] * p, m[1][0] * q + m[1][1] * p)
    }

    pub fn diffusion_determinant(&self) -> T {
        let d = &self.diffusion;
        d[0][0] * d[1][1] - d[0][1] * d[1][0]
    }

    /// Eigenvalues of the diffusion matrix, ascending.
    pub fn diffusion_eigenvalues(&self) -> (T, T) {
        let d = &self.diffusion;
        let half = T::lit(0.5);
        let mean = (d[0][0] + d[1][1]) * half;
        let diff = (d[0][0] - d[1][1]) * half;
        let rad = (diff * diff + d[0][1] * d[0][1]).sqrt();
        (mean - rad, mean + rad)
    }

    /// First-moment matrix `B = −M`: `d⟨x⟩/dt = B⟨x⟩`.
    pub fn moment_matrix(&self) -> [[T; 2]; 2] {
        let m = &self.drift;
        [[-m[0][0], -m[0][1]], [-m[1][0], -m[1][1]]]
    }

    /// Decay rate of the slowest second-moment mode, `−2 max Re λ(B)`.
    pub fn relaxation_rate(&self) -> T {
        let b = self.moment_matrix();
        let tr = b[0][0] + b[1][1];
        let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
        let disc = tr * tr * T::lit(0.25) - det;
        let re_max = if disc >= T::zero() { tr * T::lit(0.5) + disc.sqrt() } else { tr * T::lit(0.5) };
        -T::lit(2.0) * re_max
    }

    /// Mean and covariance at time `t` from the exact moment equations
    /// `dμ/dt = Bμ`, `dΣ/dt = BΣ + ΣBᵀ + 2D`.
    pub fn evolve_moments(&self, mean: [T; 2], cov: [[T; 2]; 2], t: T) -> ([T; 2], [[T; 2]; 2]) {
        let b = self.moment_matrix();
        let bm = na::Matrix2::new(b[0][0], b[0][1], b[1][0], b[1][1]);
        let mu = (bm * t).exp() * na::Vector2::new(mean[0], mean[1]);
        let (l, c) = lyapunov_system(&b, &self.diffusion);
        let mut aug = na::Matrix4::<T>::zeros();
        aug.fixed_view_mut::<3, 3>(0, 0).copy_from(&l);
        aug.fixed_view_mut::<3, 1>(0, 3).copy_from(&c);
        let e = (aug * t).exp();
        let v0 = na::Vector4::new(cov[0][0], cov[0][1], cov[1][1], T::one());
        let v = e * v0;
        ([mu[0], mu[1]], [[v[0], v[1]], [v[1], v[2]]])
    }

    pub fn to_json(&self) -> String
    where
        T: Serialize,
    {
        serde_json::to_string_pretty(self).expect("operator serializes")
    }

    pub fn from_json(s: &str) -> Result<Self>
    where
        T: for<'de> Deserialize<'de>,
    {
        let op: Self = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        if !sym2(&op.diffusion) {
            return Err(Error::Parse("diffusion matrix must be symmetric".into()));
        }
        Ok(op)
    }
}

/// `(Σ11, Σ12, Σ22)' = L (Σ11, Σ12, Σ22) + c` for `Σ' = BΣ + ΣBᵀ + 2D`.
fn lyapunov_system<T: Real>(b: &[[T; 2]; 2], d: &[[T; 2]; 2]) -> (na::Matrix3<T>, na::Vector3<T>) {
    let two = T::lit(2.0);
    let z = T::zero();
    let l = na::Matrix3::new(
        two * b[0][0],
        two * b[0][1],
        z,
        b[1][0],
        b[0][0] + b[1][1],
        b[0][1],
        z,
        two * b[1][0],
        two * b[1][1],
    );
    (l, na::Vector3::new(two * d[0][0], two * d[0][1], two * d[1][1]))
}

fn build_classical<T: Real>(p: &FPParams<T>, gme: bool) -> Result<FPOperator<T>> {
    let spec = p.spec.as_ref().ok_or(Error::MissingBathQuantity("spec"))?;
    let lambda = need(p.lambda, "lambda")?;
    let omega0 = need(p.omega0, "omega0")?;
    let cl = if spec.is_quantum() { bath::classical_correspondence(spec, omega0)? } else { spec.clone() };
    let beta = p.beta.unwrap_or(cl.beta);
    let shifts = bath::frequency_shifts(&cl, omega0)?;
    let u_sq = cl.u_sq(omega0);
    if gme {
        let chi = shifts.chi.ok_or(Error::MissingBathQuantity("chi"))?;
        FPOperator::gme_from(u_sq, shifts.delta, chi, lambda, omega0, beta)
    } else {
        FPOperator::classical_from(u_sq, shifts.delta, lambda, omega0, beta)
    }
}

/// Builds the operator of a variant. CLASSICAL and GME take their bath
/// quantities from `spec` (quantum specs are mapped to the corresponding
/// classical spectrum); GENERAL takes explicit `coefficients`; QUANTUM_PS
/// derives them from a quantum `spec` at `(λ, Ω₀, β, ħ)`.
pub fn build<T: Real>(variant: Variant, params: &FPParams<T>) -> Result<FPOperator<T>> {
    let a = params.a.unwrap_or(T::zero());
    match variant {
        Variant::Classical => build_classical(params, false),
        Variant::Gme => build_classical(params, true),
        Variant::General => {
            let k = params.coefficients.as_ref().ok_or(Error::MissingBathQuantity("coefficients"))?;
            FPOperator::general_from(k, a)
        }
        Variant::QuantumPs => {
            let spec = params.spec.as_ref().ok_or(Error::MissingBathQuantity("spec"))?;
            let lambda = need(params.lambda, "lambda")?;
            let omega0 = need(params.omega0, "omega0")?;
            let hbar = need(params.hbar, "hbar")?;
            let beta = params.beta.unwrap_or(spec.beta);
            let k = lindblad::coefficients_from_model(spec, lambda, omega0, beta, hbar)?;
            let mut op = FPOperator::general_from(&k, a)?;
            op.variant = Variant::QuantumPs;
            Ok(op)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Moments<T> {
    /// `B` of `d⟨x⟩/dt = B⟨x⟩`.
    pub matrix: [[T; 2]; 2],
    pub diffusion: [[T; 2]; 2],
    /// Solution of `BΣ + ΣBᵀ + 2D = 0`.
    pub stationary_covariance: [[T; 2]; 2],
}

/// Moment dynamics and stationary covariance; `NonHurwitzDrift` when `B` has
/// an eigenvalue with nonnegative real part.
pub fn moments<T: Real>(op: &FPOperator<T>) -> Result<Moments<T>> {
    let b = op.moment_matrix();
    let tr = b[0][0] + b[1][1];
    let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
    if !(tr < T::zero() && det > T::zero()) {
        return Err(Error::NonHurwitzDrift);
    }
    let (l, c) = lyapunov_system(&b, &op.diffusion);
    let s = l.lu().solve(&(-c)).ok_or(Error::NonHurwitzDrift)?;
    Ok(Moments {
        matrix: b,
        diffusion: op.diffusion,
        stationary_covariance: [[s[0], s[1]], [s[1], s[2]]],
    })
}

/// Normalized `e^{−β(p²/2 + Ω₀²q²/2)}`; the grid must reach 6 thermal
/// standard deviations on every side and resolve them by at least 2 cells.
pub fn mb_distribution<T: Real>(beta: T, omega0: T, grid: &PhaseGrid<T>) -> Result<PhaseSpaceField<T>> {
    if !(beta > T::zero()) || !(omega0 > T::zero()) {
        return Err(Error::InvalidInput("beta and omega0 must be positive".into()));
    }
    let sp = T::one() / beta.sqrt();
    let sq = sp / omega0;
    let six = T::lit(6.0);
    let reach = grid.q_min.abs().min(grid.q_max.abs()) / sq;
    let reach_p = grid.p_min.abs().min(grid.p_max.abs()) / sp;
    if grid.q_min > -six * sq || grid.q_max < six * sq || grid.p_min > -six * sp || grid.p_max < six * sp {
        return Err(Error::GridUnderResolved(format!(
            "grid reaches {:.2}/{:.2} thermal widths, need 6",
            reach.as_f64(),
            reach_p.as_f64()
        )));
    }
    if grid.dq() > sq * T::lit(0.5) || grid.dp() > sp * T::lit(0.5) {
        return Err(Error::GridUnderResolved("grid spacing exceeds half a thermal width".into()));
    }
    let half = T::lit(0.5);
    let mut f = PhaseSpaceField::from_fn(*grid, |q, p| (-beta * (p * p * half + omega0 * omega0 * q * q * half)).exp());
    let z = f.integral();
    f.values /= z;
    Ok(f)
}

/// Stationary Gaussian `e^{−xᵀΣ⁻¹x/2}` of an operator and the coefficient
/// `s` of its stream function `sG`.
struct Reference<T> {
    inv: [[T; 2]; 2],
    s: T,
}

impl<T: Real> Reference<T> {
    fn of(op: &FPOperator<T>) -> Option<Self> {
        let sigma = moments(op).ok()?.stationary_covariance;
        let det = sigma[0][0] * sigma[1][1] - sigma[0][1] * sigma[0][1];
        if !(sigma[0][0] > T::zero() && det > T::zero()) {
            return None;
        }
        let inv = [[sigma[1][1] / det, -sigma[0][1] / det], [-sigma[0][1] / det, sigma[0][0] / det]];
        // K = M − DΣ⁻¹, S = −KΣ = DΣ⁻¹Σ − MΣ = D − MΣ (antisymmetric); s = S_qp.
        let m = &op.drift;
        let d = &op.diffusion;
        let ms01 = m[0][0] * sigma[0][1] + m[0][1] * sigma[1][1];
        let s = d[0][1] - ms01;
        Some(Reference { inv, s })
    }

    fn phi(&self, q: T, p: T) -> T {
        let i = &self.inv;
        T::lit(0.5) * (i[0][0] * q * q + T::lit(2.0) * i[0][1] * q * p + i[1][1] * p * p)
    }
}

/// Nine-point conservative stencil of an operator on a grid.
pub struct FPSolver<T: Real> {
    grid: PhaseGrid<T>,
    /// `coeffs[k][c]` for neighbour `k = (di+1) + 3(dj+1)` and cell `c = i + j·n_q`.
    coeffs: [Vec<T>; 9],
    well_balanced: bool,
    diffusion_bound: T,
}

impl<T: Real> FPSolver<T> {
    pub fn new(op: &FPOperator<T>, grid: &PhaseGrid<T>) -> Self {
        let reference = Reference::of(op);
        let (nq, np) = (grid.n_q, grid.n_p);
        let (dq, dp) = (grid.dq(), grid.dp());
        let half = T::lit(0.5);
        let d = op.diffusion;
        let mut coeffs: [Vec<T>; 9] = std::array::from_fn(|_| vec![T::zero(); nq * np]);
        // φ at cell centres, face centres and corners
        let phi = |q: T, p: T| reference.as_ref().map_or(T::zero(), |r| r.phi(q, p));
        let qf = |i: usize| grid.q_min + T::from_usize_lossy(i) * dq; // face i-½
        let pf = |j: usize| grid.p_min + T::from_usize_lossy(j) * dp;

        // Adds `coef·f[cell]` to the flux through a face whose left/bottom
        // cell is `lo` and right/top cell is `hi` (either may be absent).
        let mut add = |lo: Option<usize>, hi: Option<usize>, cell: (usize, usize), coef: T, h: T| {
            let (ci, cj) = cell;
            for (target, sign) in [(lo, T::one()), (hi, -T::one())] {
                if let Some(t) = target {
                    let (ti, tj) = (t % nq, t / nq);
                    let k = (ci + 1 - ti) + 3 * (cj + 1 - tj);
                    coeffs[k][t] += sign * coef / h;
                }
            }
        };

        // Cell-centred one-sided-at-the-wall derivative weights along p (or q).
        let deriv = |j: usize, n: usize, h: T| -> Vec<(usize, T)> {
            if j == 0 {
                vec![(1, T::one() / h), (0, -T::one() / h)]
            } else if j == n - 1 {
                vec![(n - 1, T::one() / h), (n - 2, -T::one() / h)]
            } else {
                vec![(j + 1, half / h), (j - 1, -half / h)]
            }
        };

        // q-faces between (i, j) and (i+1, j)
        for j in 0..np {
            let p = grid.p(j);
            for i in 0..nq - 1 {
                let (l, r) = (i + j * nq, i + 1 + j * nq);
                let q_face = qf(i + 1);
                let phif = phi(q_face, p);
                // advective part
                match &reference {
                    Some(rf) => {
                        let (pt, pb) = (pf(j + 1), pf(j));
                        let ptop = phi(q_face, pt);
                        let pbot = phi(q_face, pb);
                        for (c, ci) in [(l, i), (r, i + 1)] {
                            let pc = phi(grid.q(ci), p);
                            let w = half * rf.s * ((pc - ptop).exp() - (pc - pbot).exp()) / dp;
                            add(Some(l), Some(r), (ci, j), w, dq);
                            let _ = c;
                        }
                    }
                    None => {
                        let (aq, _) = op.drift_at(q_face, p);
                        add(Some(l), Some(r), (i, j), half * aq, dq);
                        add(Some(l), Some(r), (i + 1, j), half * aq, dq);
                    }
                }
                // D_qq ∂_q g
                let gl = (phi(grid.q(i), p) - phif).exp();
                let gr = (phi(grid.q(i + 1), p) - phif).exp();
                if d[0][0] != T::zero() {
                    add(Some(l), Some(r), (i + 1, j), d[0][0] * gr / dq, dq);
                    add(Some(l), Some(r), (i, j), -d[0][0] * gl / dq, dq);
                }
                // D_qp ∂_p g, averaged over the two cells
                if d[0][1] != T::zero() {
                    for ci in [i, i + 1] {
                        for (jj, w) in deriv(j, np, dp) {
                            let g = (phi(grid.q(ci), grid.p(jj)) - phif).exp();
                            add(Some(l), Some(r), (ci, jj), half * d[0][1] * w * g, dq);
                        }
                    }
                }
            }
        }
        // p-faces between (i, j) and (i, j+1)
        for i in 0..nq {
            let q = grid.q(i);
            for j in 0..np - 1 {
                let (b, t) = (i + j * nq, i + (j + 1) * nq);
                let p_face = pf(j + 1);
                let phif = phi(q, p_face);
                match &reference {
                    Some(rf) => {
                        let (qr, ql) = (qf(i + 1), qf(i));
                        let pright = phi(qr, p_face);
                        let pleft = phi(ql, p_face);
                        for cj in [j, j + 1] {
                            let pc = phi(q, grid.p(cj));
                            let w = -half * rf.s * ((pc - pright).exp() - (pc - pleft).exp()) / dq;
                            add(Some(b), Some(t), (i, cj), w, dp);
                        }
                    }
                    None => {
                        let (_, ap) = op.drift_at(q, p_face);
                        add(Some(b), Some(t), (i, j), half * ap, dp);
                        add(Some(b), Some(t), (i, j + 1), half * ap, dp);
                    }
                }
                let gb = (phi(q, grid.p(j)) - phif).exp();
                let gt = (phi(q, grid.p(j + 1)) - phif).exp();
                if d[1][1] != T::zero() {
                    add(Some(b), Some(t), (i, j + 1), d[1][1] * gt / dp, dp);
                    add(Some(b), Some(t), (i, j), -d[1][1] * gb / dp, dp);
                }
                if d[0][1] != T::zero() {
                    for cj in [j, j + 1] {
                        for (ii, w) in deriv(i, nq, dq) {
                            let g = (phi(grid.q(ii), grid.p(cj)) - phif).exp();
                            add(Some(b), Some(t), (ii, cj), half * d[0][1] * w * g, dp);
                        }
                    }
                }
            }
        }
        let (_, dmax) = op.diffusion_eigenvalues();
        let h2 = (dq * dq).min(dp * dp);
        let diffusion_bound = if dmax > T::zero() { h2 / (T::lit(2.0) * dmax) } else { T::max_value().unwrap() };
        FPSolver { grid: *grid, coeffs, well_balanced: reference.is_some(), diffusion_bound }
    }

    pub fn grid(&self) -> &PhaseGrid<T> {
        &self.grid
    }

    /// Whether fluxes are taken relative to a stationary Gaussian.
    pub fn is_well_balanced(&self) -> bool {
        self.well_balanced
    }

    /// Largest stable RK4 step: the diffusion bound `min(Δq², Δp²)/(2 d_max)`
    /// and `2.5/ρ` with `ρ` the Gershgorin bound of the stencil.
    pub fn max_dt(&self) -> T {
        let n = self.grid.n_q * self.grid.n_p;
        let rho = (0..n).fold(T::zero(), |m, c| m.max(self.coeffs.iter().fold(T::zero(), |s, k| s + k[c].abs())));
        let adv = if rho > T::zero() { T::lit(2.5) / rho } else { T::max_value().unwrap() };
        adv.min(self.diffusion_bound)
    }

    /// `out = L f` on raw column-major values.
    pub fn apply_into(&self, f: &[T], out: &mut [T]) {
        let mut fp = self.padded();
        self.pad_from(f, &mut fp);
        let mut op = self.padded();
        self.apply_padded(&fp, &mut op);
        self.unpad_into(&op, out);
    }

    pub fn apply(&self, f: &PhaseSpaceField<T>) -> PhaseSpaceField<T> {
        let mut out = PhaseSpaceField::zeros(f.grid);
        self.apply_into(f.values.as_slice(), out.values.as_mut_slice());
        out
    }

    // Work buffers carry a ring of zero ghost cells so the stencil needs no
    // bounds checks; stride is n_q + 2.
    fn padded(&self) -> Vec<T> {
        vec![T::zero(); (self.grid.n_q + 2) * (self.grid.n_p + 2)]
    }

    fn pad_from(&self, f: &[T], fp: &mut [T]) {
        let (nq, s) = (self.grid.n_q, self.grid.n_q + 2);
        for (j, col) in f.chunks(nq).enumerate() {
            fp[(j + 1) * s + 1..(j + 1) * s + 1 + nq].copy_from_slice(col);
        }
    }

    fn unpad_into(&self, fp: &[T], f: &mut [T]) {
        let (nq, s) = (self.grid.n_q, self.grid.n_q + 2);
        for (j, col) in f.chunks_mut(nq).enumerate() {
            col.copy_from_slice(&fp[(j + 1) * s + 1..(j + 1) * s + 1 + nq]);
        }
    }

    fn apply_padded(&self, fp: &[T], out: &mut [T]) {
        let (nq, np, s) = (self.grid.n_q, self.grid.n_p, self.grid.n_q + 2);
        out.par_chunks_mut(s).enumerate().for_each(|(jp, col)| {
            if jp == 0 || jp == np + 1 {
                return;
            }
            let j = jp - 1;
            let dst = &mut col[1..=nq];
            dst.fill(T::zero());
            for dj in 0..3 {
                let src = &fp[(j + dj) * s..(j + dj + 1) * s];
                for di in 0..3 {
                    let c = &self.coeffs[di + 3 * dj][j * nq..(j + 1) * nq];
                    for ((o, w), x) in dst.iter_mut().zip(c).zip(&src[di..di + nq]) {
                        *o += *w * *x;
                    }
                }
            }
        });
    }

    fn rk4(&self, f: &mut [T], dt: T, k: &mut [Vec<T>; 4], tmp: &mut [T]) {
        let half = T::lit(0.5) * dt;
        self.apply_padded(f, &mut k[0]);
        for (t, (x, a)) in tmp.iter_mut().zip(f.iter().zip(k[0].iter())) {
            *t = *x + half * *a;
        }
        self.apply_padded(tmp, &mut k[1]);
        for (t, (x, a)) in tmp.iter_mut().zip(f.iter().zip(k[1].iter())) {
            *t = *x + half * *a;
        }
        self.apply_padded(tmp, &mut k[2]);
        for (t, (x, a)) in tmp.iter_mut().zip(f.iter().zip(k[2].iter())) {
            *t = *x + dt * *a;
        }
        self.apply_padded(tmp, &mut k[3]);
        let w1 = dt / T::lit(6.0);
        let w2 = dt / T::lit(3.0);
        for (idx, x) in f.iter_mut().enumerate() {
            *x += w1 * (k[0][idx] + k[3][idx]) + w2 * (k[1][idx] + k[2][idx]);
        }
    }

    /// RK4 from `f0` to `t_max` with steps of at most `dt`, keeping the
    /// initial field and every `every`-th step (and always the last).
    pub fn evolve(&self, f0: &PhaseSpaceField<T>, t_max: T, dt: T, every: usize) -> Result<FieldTrajectory<T>> {
        let mut traj = FieldTrajectory { times: vec![T::zero()], fields: vec![f0.clone()] };
        let every = every.max(1);
        self.evolve_with(f0, t_max, dt, |step, t, f, done| {
            if step % every == 0 || done {
                traj.times.push(t);
                traj.fields.push(f.clone());
            }
            Ok(())
        })?;
        Ok(traj)
    }

    /// Like [`evolve`](Self::evolve) but hands every step
    /// `(step, t, field, is_last)` to `observe` instead of storing it.
    pub fn evolve_with<F>(&self, f0: &PhaseSpaceField<T>, t_max: T, dt: T, mut observe: F) -> Result<()>
    where
        F: FnMut(usize, T, &PhaseSpaceField<T>, bool) -> Result<()>,
    {
        if f0.grid != self.grid {
            return Err(Error::InvalidInput("field grid differs from solver grid".into()));
        }
        if !(dt > T::zero()) || t_max < T::zero() {
            return Err(Error::InvalidInput("need dt > 0 and t_max ≥ 0".into()));
        }
        let bound = self.max_dt();
        if dt > bound {
            return Err(Error::CFLViolation { dt: dt.as_f64(), bound: bound.as_f64() });
        }
        let steps = (t_max / dt).ceil().to_usize().unwrap_or(0).max(if t_max > T::zero() { 1 } else { 0 });
        let h = if steps > 0 { t_max / T::from_usize_lossy(steps) } else { T::zero() };
        let mut f = self.padded();
        self.pad_from(f0.values.as_slice(), &mut f);
        let mut k = [self.padded(), self.padded(), self.padded(), self.padded()];
        let mut tmp = self.padded();
        let mass0 = f0.integral();
        let mut field = f0.clone();
        for s in 1..=steps {
            self.rk4(&mut f, h, &mut k, &mut tmp);
            self.unpad_into(&f, field.values.as_mut_slice());
            check_leak(&field, mass0)?;
            observe(s, h * T::from_usize_lossy(s), &field, s == steps)?;
        }
        Ok(())
    }
}

/// Mass in the outermost ring of cells (or any change of total mass)
/// above 1e-6 of the initial mass.
fn check_leak<T: Real>(f: &PhaseSpaceField<T>, mass0: T) -> Result<()> {
    let g = &f.grid;
    let mut ring = T::zero();
    for i in 0..g.n_q {
        for j in 0..g.n_p {
            if i == 0 || j == 0 || i == g.n_q - 1 || j == g.n_p - 1 {
                ring += f.values[(i, j)].abs();
            }
        }
    }
    let ring = ring * f.cell_area();
    let scale = mass0.abs().max(T::default_epsilon());
    let drift = (f.integral() - mass0).abs();
    let worst = (ring / scale).max(drift / scale);
    if !worst.is_finite() || worst > T::lit(1e-6) {
        return Err(Error::BoundaryLeak(worst.as_f64()));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct FieldTrajectory<T: Real> {
    pub times: Vec<T>,
    pub fields: Vec<PhaseSpaceField<T>>,
}

impl<T: Real> FieldTrajectory<T> {
    pub fn last(&self) -> &PhaseSpaceField<T> {
        self.fields.last().expect("trajectory holds the initial field")
    }
}

/// Evolves `f0` under `op` up to `t_max`; the trajectory holds the initial
/// and final fields. Use [`FPSolver::evolve`] for intermediate samples.
pub fn evolve_field<T: Real>(op: &FPOperator<T>, f0: &PhaseSpaceField<T>, t_max: T, dt: T) -> Result<FieldTrajectory<T>> {
    FPSolver::new(op, &f0.grid).evolve(f0, t_max, dt, usize::MAX)
}

/// `‖L f‖₁ / ‖f‖₁` with the solver's stencil.
pub fn stationarity_residual<T: Real>(op: &FPOperator<T>, field: &PhaseSpaceField<T>) -> T {
    let lf = FPSolver::new(op, &field.grid).apply(field);
    let den = field.values.abs().sum();
    if den == T::zero() {
        return T::zero();
    }
    lf.values.abs().sum() / den
}

/// `∫ f ln(f/f_ref)`; cells with `f ≤ 0` contribute nothing.
pub fn relative_entropy<T: Real>(f: &PhaseSpaceField<T>, reference: &PhaseSpaceField<T>) -> T {
    let mut s = T::zero();
    for (a, b) in f.values.iter().zip(reference.values.iter()) {
        if *a > T::zero() && *b > T::zero() {
            s += *a * (*a / *b).ln();
        }
    }
    s * f.cell_area()
}

/// Gaussian density with mean `mean` and covariance `cov` on a grid.
pub fn gaussian_field<T: Real>(grid: &PhaseGrid<T>, mean: [T; 2], cov: [[T; 2]; 2]) -> Result<PhaseSpaceField<T>> {
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    if !(cov[0][0] > T::zero() && det > T::zero()) || cov[0][1] != cov[1][0] {
        return Err(Error::InvalidInput("covariance must be symmetric positive definite".into()));
    }
    let norm = T::one() / (T::two_pi() * det.sqrt());
    let half = T::lit(0.5);
    Ok(PhaseSpaceField::from_fn(*grid, |q, p| {
        let (x, y) = (q - mean[0], p - mean[1]);
        let e = (cov[1][1] * x * x - T::lit(2.0) * cov[0][1] * x * y + cov[0][0] * y * y) / det;
        norm * (-half * e).exp()
    }))
}

fn coherent_scales<T: Real>(hbar: T, omega0: T) -> Result<[T; 2]> {
    if !(hbar > T::zero()) || !(omega0 > T::zero()) {
        return Err(Error::InvalidInput("coherent rescaling needs ħ > 0 and Ω₀ > 0".into()));
    }
    let two = T::lit(2.0);
    Ok([(omega0 / (two * hbar)).sqrt(), T::one() / (two * hbar * omega0).sqrt()])
}

fn rescale_op<T: Real>(op: &FPOperator<T>, t: [T; 2]) -> FPOperator<T> {
    let m = &op.drift;
    let d = &op.diffusion;
    let mut out = op.clone();
    out.drift = [[m[0][0], m[0][1] * t[0] / t[1]], [m[1][0] * t[1] / t[0], m[1][1]]];
    out.diffusion = [[d[0][0] * t[0] * t[0], d[0][1] * t[0] * t[1]], [d[1][0] * t[0] * t[1], d[1][1] * t[1] * t[1]]];
    out.scale = [op.scale[0] * t[0], op.scale[1] * t[1]];
    out
}

/// Operator in `x₁ = √(Ω₀/2ħ) q`, `x₂ = p/√(2ħΩ₀)`: `M → TMT⁻¹`,
/// `D → TDT`.
pub fn coherent_rescale<T: Real>(op: &FPOperator<T>, hbar: T) -> Result<FPOperator<T>> {
    Ok(rescale_op(op, coherent_scales(hbar, op.omega0)?))
}

/// Undoes [`coherent_rescale`] (or any accumulated scaling).
pub fn coherent_unrescale<T: Real>(op: &FPOperator<T>) -> FPOperator<T> {
    rescale_op(op, [T::one() / op.scale[0], T::one() / op.scale[1]])
}

fn rescale_field<T: Real>(f: &PhaseSpaceField<T>, t: [T; 2]) -> Result<PhaseSpaceField<T>> {
    let g = &f.grid;
    let grid = PhaseGrid::new(g.q_min * t[0], g.q_max * t[0], g.p_min * t[1], g.p_max * t[1], g.n_q, g.n_p)?;
    PhaseSpaceField::new(grid, &f.values / (t[0] * t[1]))
}

/// Field density in coherent coordinates (the Jacobian keeps it normalized).
pub fn coherent_rescale_field<T: Real>(f: &PhaseSpaceField<T>, hbar: T, omega0: T) -> Result<PhaseSpaceField<T>> {
    rescale_field(f, coherent_scales(hbar, omega0)?)
}

pub fn coherent_unrescale_field<T: Real>(f: &PhaseSpaceField<T>, hbar: T, omega0: T) -> Result<PhaseSpaceField<T>> {
    let t = coherent_scales(hbar, omega0)?;
    rescale_field(f, [T::one() / t[0], T::one() / t[1]])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn classical(lambda: f64) -> FPOperator<f64> {
        FPOperator::classical_from(0.8, 0.3, lambda, 1.0, 1.0).unwrap()
    }

    #[test]
    fn classical_stationary_covariance_is_mb() {
        let m = moments(&classical(0.5)).unwrap();
        let s = m.stationary_covariance;
        assert!((s[0][0] - 1.0).abs() < 1e-12 && (s[1][1] - 1.0).abs() < 1e-12 && s[0][1].abs() < 1e-12);
        let op = FPOperator::classical_from(0.8, 0.3, 0.5, 2.0, 0.5).unwrap();
        let s = moments(&op).unwrap().stationary_covariance;
        assert!((s[0][0] - 1.0f64 / (0.5 * 4.0)).abs() < 1e-12 && (s[1][1] - 2.0f64).abs() < 1e-12);
    }

    #[test]
    fn rotation_has_no_stationary_covariance() {
        let op = FPOperator::new(Variant::General, [[0.0, -1.0], [1.0, 0.0]], [[0.0; 2]; 2], 1.0, 1.0).unwrap();
        assert_eq!(moments(&op), Err(Error::NonHurwitzDrift));
        assert!(!FPSolver::new(&op, &PhaseGrid::symmetric(4.0, 4.0, 16, 16).unwrap()).is_well_balanced());
    }

    #[test]
    fn gme_diffusion_indefinite() {
        let op = FPOperator::gme_from(0.5, 0.1, 0.7, 0.3, 1.0, 1.0).unwrap();
        let x: f64 = 0.09 * 0.7 / 2.0;
        assert!((op.diffusion_determinant() + x * x).abs() < 1e-15);
        assert_eq!(op.diffusion[0][0], 0.0);
    }

    #[test]
    fn moment_evolution_reaches_stationary() {
        let op = classical(0.6);
        let (mu, cov) = op.evolve_moments([1.0, -0.5], [[0.2, 0.05], [0.05, 0.3]], 400.0);
        assert!(mu[0].abs() < 1e-12 && mu[1].abs() < 1e-12);
        assert!((cov[0][0] - 1.0).abs() < 1e-10 && (cov[1][1] - 1.0).abs() < 1e-10);
        let (_, c0) = op.evolve_moments([0.0, 0.0], [[0.2, 0.05], [0.05, 0.3]], 0.0);
        assert_eq!(c0, [[0.2, 0.05], [0.05, 0.3]]);
    }

    #[test]
    fn relaxation_rate_of_isotropic_friction() {
        let op = classical(0.5);
        assert!((op.relaxation_rate() - 2.0 * op.drift[0][0]).abs() < 1e-14);
    }

    #[test]
    fn json_round_trip() {
        let op = classical(0.5);
        let back = FPOperator::<f64>::from_json(&op.to_json()).unwrap();
        assert_eq!(op, back);
        assert!(op.to_json().contains("CLASSICAL"));
    }

    #[test]
    fn stencil_conserves_mass() {
        let op = FPOperator::gme_from(0.5, 0.1, 0.7, 0.3, 1.0, 1.0).unwrap();
        let g = PhaseGrid::symmetric(6.0, 6.0, 32, 32).unwrap();
        let f = gaussian_field(&g, [0.5, -0.3], [[0.5, 0.1], [0.1, 0.8]]).unwrap();
        let lf = FPSolver::new(&op, &g).apply(&f);
        assert!(f64::abs(lf.values.sum()) < 1e-12 * lf.values.abs().sum());
    }
}
