//! Bath spectral model: correlation functions, spectral transforms,
//! principal-value frequency shifts and the quantum occupation numbers.
//!
//! Classical specs live on a domain symmetric about the origin and the
//! coupling `u` is even by construction (it is evaluated at `|ω|`). A
//! one-sided classical spec (the image of a quantum spec under
//! [`classical_correspondence`]) stands for the even extension with weight
//! `u²(|ω|)/2`: that is the symmetric spectrum with the same `h(s)`.

use std::fmt;
use std::sync::Arc;

use crate::quad::Quadrature;
use crate::spline::CubicSpline;
use crate::{Complex, Error, Real, Result};

/// A real function of frequency: closed form or tabulated.
#[derive(Clone)]
pub enum Profile<T> {
    Closed(Arc<dyn Fn(T) -> T + Send + Sync>),
    Table(CubicSpline<T>),
    Constant(T),
}

impl<T: Real> Profile<T> {
    pub fn closed(f: impl Fn(T) -> T + Send + Sync + 'static) -> Self {
        Profile::Closed(Arc::new(f))
    }

    /// Value at `w`; tables vanish outside their range.
    pub fn eval(&self, w: T) -> T {
        match self {
            Profile::Closed(f) => f(w),
            Profile::Table(s) => s.eval(w).unwrap_or(T::zero()),
            Profile::Constant(c) => *c,
        }
    }

    fn upper_edge(&self) -> Option<T> {
        match self {
            Profile::Table(s) => Some(s.domain().1),
            _ => None,
        }
    }
}

impl<T> fmt::Debug for Profile<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Profile::Closed(_) => f.write_str("Closed(..)"),
            Profile::Table(_) => f.write_str("Table(..)"),
            Profile::Constant(_) => f.write_str("Constant(..)"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Classical coupling `u` on a symmetric domain; `one_sided` marks the
    /// image of a quantum spec (support ω > 0).
    Classical { one_sided: bool },
    /// Quantum coupling `ε` and density `σ` on `(0, ω_max)`.
    Quantum,
}

#[derive(Clone, Debug)]
pub struct BathSpec<T> {
    pub coupling: Profile<T>,
    pub spectral_density: Profile<T>,
    /// Upper edge of the support (`None` for unbounded); the lower edge is
    /// `-edge` for classical specs and 0 for quantum specs.
    pub edge: Option<T>,
    pub beta: T,
    pub side: Side,
}

impl<T: Real> BathSpec<T> {
    /// Classical spec with even coupling `u` supported on `(-edge, edge)`.
    pub fn classical(coupling: Profile<T>, edge: Option<T>, beta: T) -> Result<Self> {
        let edge = edge.or(coupling.upper_edge());
        let spec = BathSpec {
            coupling,
            spectral_density: Profile::Constant(T::one()),
            edge,
            beta,
            side: Side::Classical { one_sided: false },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Quantum spec with coupling `ε` and spectral density `σ` on `(0, edge)`.
    pub fn quantum(coupling: Profile<T>, spectral_density: Profile<T>, edge: Option<T>, beta: T) -> Result<Self> {
        let edge = edge.or(coupling.upper_edge());
        let spec = BathSpec { coupling, spectral_density, edge, beta, side: Side::Quantum };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta > T::zero()) {
            return Err(Error::InvalidInput("beta must be positive".into()));
        }
        if let Some(e) = self.edge {
            if !(e > T::zero()) {
                return Err(Error::InvalidInput("frequency support edge must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn is_quantum(&self) -> bool {
        self.side == Side::Quantum
    }

    /// Weight of the even extension relative to `u²(|ω|)`: 1 for symmetric
    /// specs, 1/2 for one-sided ones.
    pub fn one_sided_factor(&self) -> T {
        match self.side {
            Side::Classical { one_sided: true } => T::lit(0.5),
            _ => T::one(),
        }
    }

    fn inside(&self, w: T) -> bool {
        self.edge.is_none_or(|e| w.abs() < e)
    }

    /// Even classical weight `u_s²(ω)` on the symmetric domain.
    pub fn u_sq(&self, w: T) -> T {
        if !self.inside(w) {
            return T::zero();
        }
        match self.side {
            Side::Classical { .. } => {
                let u = self.coupling.eval(w.abs());
                self.one_sided_factor() * u * u
            }
            Side::Quantum => T::zero(),
        }
    }

    /// `|ε(ω)|² σ(ω)` on `(0, edge)`.
    pub fn eps_sq_sigma(&self, w: T) -> T {
        if !(w > T::zero()) || !self.inside(w) {
            return T::zero();
        }
        let e = self.coupling.eval(w);
        e * e * self.spectral_density.eval(w)
    }

    fn require_classical(&self) -> Result<()> {
        match self.side {
            Side::Classical { .. } => Ok(()),
            Side::Quantum => Err(Error::InvalidInput("operation needs a classical spec".into())),
        }
    }

    fn require_quantum(&self) -> Result<()> {
        match self.side {
            Side::Quantum => Ok(()),
            _ => Err(Error::InvalidInput("operation needs a quantum spec".into())),
        }
    }
}

/// Closed-form coupling families used by configs and tests.
pub mod families {
    use super::*;

    /// `u(ω) = A ω² e^{-(ω/ω_c)²}` on the whole line.
    pub fn gaussian_quadratic<T: Real>(amplitude: T, cutoff: T, beta: T) -> Result<BathSpec<T>> {
        BathSpec::classical(
            Profile::closed(move |w: T| {
                let x = w / cutoff;
                amplitude * w * w * (-x * x).exp()
            }),
            None,
            beta,
        )
    }

    /// `|ε|²σ = η ω e^{-ω/ω_c}` (σ ≡ 1) on ω > 0.
    pub fn ohmic<T: Real>(eta: T, cutoff: T, beta: T) -> Result<BathSpec<T>> {
        BathSpec::quantum(
            Profile::closed(move |w: T| (eta * w * (-w / cutoff).exp()).sqrt()),
            Profile::Constant(T::one()),
            None,
            beta,
        )
    }

    /// Constant `|ε|²σ = γ²/π` on `(0, ω_max)`.
    pub fn flat<T: Real>(gamma_sq: T, omega_max: T, beta: T) -> Result<BathSpec<T>> {
        BathSpec::quantum(
            Profile::Constant((gamma_sq / T::pi()).sqrt()),
            Profile::Constant(T::one()),
            Some(omega_max),
            beta,
        )
    }
}

fn quad<T: Real>() -> Quadrature<T> {
    Quadrature::new(T::lit(1e-11).max(T::default_epsilon() * T::lit(100.0)))
        .with_abs_tol(T::lit(1e-15).max(T::default_epsilon() * T::default_epsilon()))
}

/// Integration range `(0, edge)` as quadrature bounds.
fn half_line<T: Real>(spec: &BathSpec<T>) -> (Option<T>, Option<T>) {
    (Some(T::zero()), spec.edge)
}

/// Classical correlations `h(s) = ∫ u²cos(ωs)/(βω²)`, `g(s) = ∫ u²sin(ωs)/ω`.
pub fn time_correlations<T: Real>(spec: &BathSpec<T>, s: T) -> Result<(T, T)> {
    spec.require_classical()?;
    let (lo, hi) = half_line(spec);
    let two = T::lit(2.0);
    let h = quad().integrate(|w: T| spec.u_sq(w) * (w * s).cos() / (spec.beta * w * w), lo, hi, &[])?;
    let g = if s == T::zero() {
        T::zero()
    } else {
        quad().integrate(|w: T| spec.u_sq(w) * (w * s).sin() / w, lo, hi, &[])?.value * two
    };
    Ok((h.value * two, g))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralCorrelations<T> {
    pub h_tilde: T,
    pub g_tilde: Complex<T>,
    pub h_bar: Complex<T>,
    pub g_bar: Complex<T>,
}

/// `h̃, g̃, h̄, ḡ` at a nonzero frequency.
pub fn spectral_correlations<T: Real>(spec: &BathSpec<T>, omega: T) -> Result<SpectralCorrelations<T>> {
    spec.require_classical()?;
    if omega == T::zero() || spec.edge.is_some_and(|e| omega.abs() == e) {
        return Err(Error::DomainError(omega.as_f64()));
    }
    let beta = spec.beta;
    let h_tilde = T::two_pi() * spec.u_sq(omega) / (beta * omega * omega);
    let g_tilde = Complex::new(T::zero(), beta * omega * h_tilde);
    // The PV part of h̄ has an odd integrand u²(ω')/ω' and vanishes for
    // every even spectrum; ḡ's PV part is even and folded onto ω' > 0.
    let w = omega.abs();
    let (lo, hi) = half_line(spec);
    let poles: Vec<T> = if spec.inside(w) { vec![w] } else { vec![] };
    let re_g = quad()
        .principal_value(|x: T| spec.u_sq(x) / ((w - x) * (w + x)), lo, hi, &[], &poles)?
        .value
        * T::lit(2.0);
    let half = T::lit(0.5);
    Ok(SpectralCorrelations {
        h_tilde,
        g_tilde,
        h_bar: Complex::new(h_tilde * half, T::zero()),
        g_bar: g_tilde * half - Complex::new(re_g, T::zero()),
    })
}

/// `Ω₀² - λ²∫u²/ω²` and whether it is nonnegative.
pub fn stability_check<T: Real>(spec: &BathSpec<T>, lambda: T, omega0: T) -> Result<(bool, T)> {
    spec.require_classical()?;
    let (lo, hi) = half_line(spec);
    let i = if lambda == T::zero() {
        T::zero()
    } else {
        quad().integrate(|w: T| spec.u_sq(w) / (w * w), lo, hi, &[])?.value * T::lit(2.0)
    };
    let margin = omega0 * omega0 - lambda * lambda * i;
    Ok((margin >= T::zero(), margin))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrequencyShifts<T> {
    pub delta: T,
    /// χ(Ω₀); only defined for classical specs.
    pub chi: Option<T>,
}

/// Frequency shift Δ(Ω₀) (classical or quantum form) and, classically, χ(Ω₀).
pub fn frequency_shifts<T: Real>(spec: &BathSpec<T>, omega0: T) -> Result<FrequencyShifts<T>> {
    if !(omega0 > T::zero()) || !spec.inside(omega0) {
        return Err(Error::DomainError(omega0.as_f64()));
    }
    let q = quad();
    match spec.side {
        Side::Classical { .. } => {
            let (lo, hi) = (spec.edge.map(|e| -e), spec.edge);
            let poles = [omega0];
            let d = q
                .principal_value(|w: T| spec.u_sq(w) / (w * (w - omega0)), lo, hi, &[T::zero()], &poles)?
                .value;
            let chi = q
                .principal_value(|w: T| spec.u_sq(w) / (w * w * (w - omega0)), lo, hi, &[T::zero()], &poles)?
                .value;
            Ok(FrequencyShifts { delta: d / (T::lit(2.0) * omega0), chi: Some(chi) })
        }
        Side::Quantum => {
            let (lo, hi) = half_line(spec);
            let d = q
                .principal_value(
                    |w: T| spec.eps_sq_sigma(w) * (T::one() / (w - omega0) + T::one() / (w + omega0)),
                    lo,
                    hi,
                    &[],
                    &[omega0],
                )?
                .value;
            Ok(FrequencyShifts { delta: d, chi: None })
        }
    }
}

/// Occupation `n(ω) = ħ/(e^{βħω} - 1)` in action units; `1/(βω)` at ħ = 0.
pub fn occupancy<T: Real>(beta: T, hbar: T, omega: T) -> T {
    if hbar == T::zero() {
        T::one() / (beta * omega)
    } else {
        hbar / (beta * hbar * omega).exp_m1()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantumSpectra<T> {
    /// `h̃_q(-ω)`, the emission side carrying `n/ħ + 1`.
    pub h_tilde_minus: T,
    /// `h̃_q(+ω)`, carrying `n/ħ`.
    pub h_tilde_plus: T,
    pub n: T,
    pub gamma_sq: T,
}

/// Occupation, `γ² = π|ε|²σ` and the quantum spectral functions at `±ω`.
pub fn quantum_spectra<T: Real>(spec: &BathSpec<T>, hbar: T, omega: T) -> Result<QuantumSpectra<T>> {
    spec.require_quantum()?;
    if !(omega > T::zero()) || !spec.inside(omega) || hbar < T::zero() {
        return Err(Error::DomainError(omega.as_f64()));
    }
    let es = spec.eps_sq_sigma(omega);
    let n = occupancy(spec.beta, hbar, omega);
    let c = T::two_pi() * hbar * es;
    Ok(QuantumSpectra { h_tilde_minus: c * (n + hbar), h_tilde_plus: c * n, n, gamma_sq: T::pi() * es })
}

/// Classical spec with `u²(ω) = 4|ε|²σ ωΩ₀` for ω > 0 and `u = 0` for ω ≤ 0.
pub fn classical_correspondence<T: Real>(spec_q: &BathSpec<T>, omega0: T) -> Result<BathSpec<T>> {
    spec_q.require_quantum()?;
    let q = spec_q.clone();
    let four = T::lit(4.0);
    Ok(BathSpec {
        coupling: Profile::closed(move |w: T| (four * q.eps_sq_sigma(w) * w * omega0).sqrt()),
        spectral_density: Profile::Constant(T::one()),
        edge: spec_q.edge,
        beta: spec_q.beta,
        side: Side::Classical { one_sided: true },
    })
}

/// Lamb-shift integral of the emission channel,
/// `S₊ = PV∫ |ε|²σ [(N+1)/(Ω₀-ω) + N/(Ω₀+ω)]` with `N = n(ω)/ħ`.
/// Together with Δ it fixes the absorption partner `S₋ = -Δ - S₊`.
pub fn emission_shift<T: Real>(spec: &BathSpec<T>, hbar: T, omega0: T) -> Result<T> {
    spec.require_quantum()?;
    if !(hbar > T::zero()) || !(omega0 > T::zero()) || !spec.inside(omega0) {
        return Err(Error::DomainError(omega0.as_f64()));
    }
    let beta = spec.beta;
    let (lo, hi) = half_line(spec);
    let v = quad()
        .principal_value(
            |w: T| {
                let occ = T::one() / (beta * hbar * w).exp_m1();
                spec.eps_sq_sigma(w) * ((occ + T::one()) / (omega0 - w) + occ / (omega0 + w))
            },
            lo,
            hi,
            &[],
            &[omega0],
        )?
        .value;
    Ok(v)
}

/// Bath quantities at the oscillator frequency.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BathCorrelations<T> {
    pub h_tilde: T,
    pub g_tilde: Complex<T>,
    pub h_bar: Complex<T>,
    pub g_bar: Complex<T>,
    pub delta_shift: T,
    pub chi_coeff: T,
    pub occupancy: T,
    pub gamma_sq: T,
    /// `u_s²(Ω₀)` of the (equivalent) symmetric classical spectrum.
    pub u_sq: T,
}

impl<T: Real> BathCorrelations<T> {
    /// Evaluates everything at `Ω₀`. Quantum specs are routed through
    /// [`classical_correspondence`] for the classical transforms; `hbar` only
    /// enters the occupation and is ignored for classical specs.
    pub fn at(spec: &BathSpec<T>, omega0: T, hbar: T) -> Result<Self> {
        let (cl, delta, occ, gamma_sq) = match spec.side {
            Side::Quantum => {
                let cl = classical_correspondence(spec, omega0)?;
                let qs = quantum_spectra(spec, hbar, omega0)?;
                let d = frequency_shifts(spec, omega0)?.delta;
                (cl, d, qs.n, qs.gamma_sq)
            }
            Side::Classical { .. } => {
                let d = frequency_shifts(spec, omega0)?.delta;
                let g2 = T::pi() * spec.u_sq(omega0) / (T::lit(2.0) * omega0 * omega0);
                (spec.clone(), d, occupancy(spec.beta, T::zero(), omega0), g2)
            }
        };
        let sc = spectral_correlations(&cl, omega0)?;
        let chi = frequency_shifts(&cl, omega0)?.chi.expect("classical χ");
        Ok(BathCorrelations {
            h_tilde: sc.h_tilde,
            g_tilde: sc.g_tilde,
            h_bar: sc.h_bar,
            g_bar: sc.g_bar,
            delta_shift: delta,
            chi_coeff: chi,
            occupancy: occ,
            gamma_sq,
            u_sq: cl.u_sq(omega0),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::Quadrature;

    fn gaussian() -> BathSpec<f64> {
        families::gaussian_quadratic(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn gaussian_h0_and_parity() {
        let spec = gaussian();
        let (h, g) = time_correlations(&spec, 0.0).unwrap();
        assert!((h - 0.25 * (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-10);
        assert_eq!(g, 0.0);
        let (h1, g1) = time_correlations(&spec, 1.3).unwrap();
        let (h2, g2) = time_correlations(&spec, -1.3).unwrap();
        assert!((h1 - h2).abs() < 1e-14 && (g1 + g2).abs() < 1e-14);
        // h(s) = (1/4)√(π/2) (1 - s²/4)... closed form: ∫ω²e^{-2ω²}cos(ωs) = √(π/2)/4 (1 - s²/4) e^{-s²/8}
        let s = 1.3f64;
        let exact = (std::f64::consts::PI / 2.0).sqrt() / 4.0 * (1.0 - s * s / 4.0) * (-s * s / 8.0).exp();
        assert!((h1 - exact).abs() < 1e-10, "{h1} {exact}");
    }

    #[test]
    fn spectral_values() {
        let spec = gaussian();
        let sc = spectral_correlations(&spec, 1.0).unwrap();
        assert!((sc.h_tilde - 2.0 * std::f64::consts::PI * (-2.0f64).exp()).abs() < 1e-12);
        assert!((sc.g_tilde.im / sc.h_tilde - 1.0).abs() < 1e-14);
        assert!(matches!(spectral_correlations(&spec, 0.0), Err(Error::DomainError(_))));
    }

    #[test]
    fn compact_support_off_support_frequency() {
        let spec = BathSpec::classical(Profile::closed(|w: f64| w * w), Some(1.5), 1.0).unwrap();
        let sc = spectral_correlations(&spec, 2.0).unwrap();
        assert_eq!(sc.h_tilde, 0.0);
        // ḡ(2) = -∫_{-1.5}^{1.5} ω⁴/(4-ω²) dω, nonzero.
        assert!(sc.g_bar.re.abs() > 0.1);
        assert!(matches!(spectral_correlations(&spec, 1.5), Err(Error::DomainError(_))));
    }

    #[test]
    fn stability_margins() {
        let spec = gaussian();
        let (ok, m) = stability_check(&spec, 0.0, 1.0).unwrap();
        assert!(ok && m == 1.0);
        let (ok, m) = stability_check(&spec, 1.0, 1.0).unwrap();
        assert!(ok && (m - (1.0 - 0.25 * (std::f64::consts::PI / 2.0).sqrt())).abs() < 1e-10);
        let (ok, _) = stability_check(&spec, 1.0, 0.1).unwrap();
        assert!(!ok);
    }

    #[test]
    fn shifts_regular_support_match_plain_quadrature() {
        let spec = BathSpec::classical(
            Profile::closed(|w: f64| if w > 2.0 && w < 3.0 { ((w - 2.0) * (3.0 - w)).sqrt() } else { 0.0 }),
            Some(3.0),
            1.0,
        )
        .unwrap();
        let s = frequency_shifts(&spec, 1.0).unwrap();
        let q = Quadrature::new(1e-13);
        let u2 = |w: f64| spec.u_sq(w);
        let br = [-2.0, 0.0, 1.0, 2.0];
        let d = q.integrate(|w| u2(w) / (w * (w - 1.0)), Some(-3.0), Some(3.0), &br).unwrap().value / 2.0;
        let chi = q.integrate(|w| u2(w) / (w * w * (w - 1.0)), Some(-3.0), Some(3.0), &br).unwrap().value;
        assert!((s.delta - d).abs() < 1e-10);
        assert!((s.chi.unwrap() - chi).abs() < 1e-10);
    }

    #[test]
    fn quantum_pv_window_cancels() {
        // |ε|²σ even about Ω₀ on (Ω₀-δ, Ω₀+δ): the 1/(ω-Ω₀) part vanishes,
        // leaving ∫ ε²σ/(ω+Ω₀).
        let (w0, d) = (1.0f64, 0.4);
        let spec = BathSpec::quantum(
            Profile::closed(move |w: f64| if (w - w0).abs() < d { 1.0 - ((w - w0) / d).powi(2) } else { 0.0 }),
            Profile::Constant(1.0),
            Some(3.0),
            1.0,
        )
        .unwrap();
        let s = frequency_shifts(&spec, w0).unwrap();
        let q = Quadrature::new(1e-13);
        let rest = q
            .integrate(|w| spec.eps_sq_sigma(w) / (w + w0), Some(w0 - d), Some(w0 + d), &[])
            .unwrap()
            .value;
        assert!((s.delta - rest).abs() < 1e-10);
        assert!(s.chi.is_none());
    }

    #[test]
    fn gaussian_shift_against_excision_limit() {
        // Brute-force symmetric excision with shrinking radius. The
        // excision error is linear in r, so one Richardson step removes it.
        let spec = gaussian();
        let delta = frequency_shifts(&spec, 1.0).unwrap().delta;
        let f = |w: f64| spec.u_sq(w) / (w * (w - 1.0)) / 2.0;
        let q = Quadrature::new(1e-13);
        let excised = |r: f64| {
            let left = q.integrate(f, None, Some(1.0 - r), &[0.0]).unwrap().value;
            let right = q.integrate(f, Some(1.0 + r), None, &[]).unwrap().value;
            left + right
        };
        let (e1, e2) = (excised(1e-3), excised(5e-4));
        assert!((e2 - delta).abs() < 1e-3);
        assert!((2.0 * e2 - e1 - delta).abs() < 1e-8, "{} {delta}", 2.0 * e2 - e1);
    }

    #[test]
    fn occupancies() {
        let spec = families::flat(1.0, 10.0, 1.0).unwrap();
        let qs = quantum_spectra(&spec, 1.0, 1.0).unwrap();
        assert!((qs.n - 1.0 / (std::f64::consts::E - 1.0)).abs() < 1e-14);
        assert!((qs.gamma_sq - 1.0).abs() < 1e-14);
        assert!((qs.h_tilde_minus - qs.h_tilde_plus - 2.0 * std::f64::consts::PI * spec.eps_sq_sigma(1.0)).abs() < 1e-13);
        assert!((qs.h_tilde_minus / qs.h_tilde_plus - 1f64.exp()).abs() < 1e-12);
        assert!((occupancy::<f64>(1.0, 1e-9, 2.0) - 0.5).abs() < 1e-8);
        assert_eq!(occupancy(1.0, 0.0, 2.0), 0.5);
    }

    #[test]
    fn correspondence_inverse_map() {
        let spec = BathSpec::quantum(
            Profile::closed(|w: f64| (1.0 / (4.0 * w * 1.5)).sqrt()),
            Profile::Constant(1.0),
            Some(4.0),
            1.0,
        )
        .unwrap();
        let cl = classical_correspondence(&spec, 1.5).unwrap();
        let u = cl.coupling.eval(2.0);
        assert!((u * u - 1.0).abs() < 1e-14);
        assert_eq!(cl.coupling.eval(-1.0), 0.0);
        let zero = families::flat(0.0, 3.0, 1.0).unwrap();
        assert_eq!(classical_correspondence(&zero, 1.0).unwrap().coupling.eval(1.0), 0.0);
    }

    #[test]
    fn one_sided_and_symmetric_views_agree() {
        // The one-sided image of a quantum spec and its explicit even
        // extension (u_s² = 2|ε|²σ|ω|Ω₀) share h(s), Δ and the classical rate.
        let q = families::ohmic(0.3, 2.0, 1.0).unwrap();
        let w0 = 1.1;
        let one = classical_correspondence(&q, w0).unwrap();
        let qq = q.clone();
        let sym = BathSpec::classical(
            Profile::closed(move |w: f64| (2.0 * qq.eps_sq_sigma(w.abs()) * w.abs() * w0).sqrt()),
            None,
            1.0,
        )
        .unwrap();
        for s in [0.0, 0.7, 2.5] {
            let a = time_correlations(&one, s).unwrap();
            let b = time_correlations(&sym, s).unwrap();
            assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
        let d1 = frequency_shifts(&one, w0).unwrap().delta;
        let d2 = frequency_shifts(&sym, w0).unwrap().delta;
        let dq = frequency_shifts(&q, w0).unwrap().delta;
        assert!((d1 - d2).abs() < 1e-10 && (d1 - dq).abs() < 1e-9, "{d1} {d2} {dq}");
    }

    #[test]
    fn emission_and_absorption_shifts_sum_to_minus_delta() {
        // S₋ computed directly must equal -Δ - S₊.
        let spec = families::ohmic(0.5, 3.0, 0.8).unwrap();
        let (hb, w0) = (0.6, 1.2);
        let sp = emission_shift(&spec, hb, w0).unwrap();
        let d = frequency_shifts(&spec, w0).unwrap().delta;
        let beta = spec.beta;
        let sm = Quadrature::new(1e-12)
            .principal_value(
                |w: f64| {
                    let occ = 1.0 / (beta * hb * w).exp_m1();
                    spec.eps_sq_sigma(w) * (-(occ + 1.0) / (w0 + w) - occ / (w0 - w))
                },
                Some(0.0),
                None,
                &[],
                &[w0],
            )
            .unwrap()
            .value;
        assert!((sp + sm + d).abs() < 1e-9, "{} {} {}", sp, sm, d);
    }
}
