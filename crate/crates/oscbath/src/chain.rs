//! Classical oscillator coupled to a finite harmonic chain.
//!
//! `H = p²/2 + Ω₀²q²/2 + ½Σp_k² + ½Σ q_k h_kl q_l + λ q Σ ε_k q_k`, so
//! `ṗ = −Ω₀²q − λW` with `W = Σ ε_k q_k`. The chain is sampled from its own
//! canonical ensemble and integrated with velocity Verlet; free-bath
//! correlations are propagated exactly in normal modes. Everything here is
//! `f64`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct ChainConfig {
    pub h_matrix: DMatrix<f64>,
    pub epsilons: DVector<f64>,
    pub beta: f64,
    pub lambda: f64,
    pub omega0: f64,
    /// `h` in CSR form: row `i` spans `row_start[i]..row_start[i+1]`.
    row_start: Vec<usize>,
    cols: Vec<(usize, f64)>,
    /// Nonzero couplings `(k, ε_k)`.
    coupled: Vec<(usize, f64)>,
    mode_freqs: Vec<f64>,
    mode_vectors: DMatrix<f64>,
    omega_max: f64,
}

impl ChainConfig {
    pub fn new(h_matrix: DMatrix<f64>, epsilons: DVector<f64>, beta: f64, lambda: f64, omega0: f64) -> Result<Self> {
        let k = h_matrix.nrows();
        if k == 0 || h_matrix.ncols() != k || epsilons.len() != k {
            return Err(Error::InvalidInput("h_matrix must be square and match epsilons".into()));
        }
        if !(beta > 0.0 && omega0 > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidInput("need beta > 0, omega0 > 0, finite lambda".into()));
        }
        for i in 0..k {
            for j in 0..i {
                if h_matrix[(i, j)] != h_matrix[(j, i)] {
                    return Err(Error::InvalidInput("h_matrix is not symmetric".into()));
                }
            }
        }
        let eig = SymmetricEigen::new(h_matrix.clone());
        let min = eig.eigenvalues.min();
        if !(min > 0.0) {
            return Err(Error::InvalidInput(format!("h_matrix is not positive definite (min eigenvalue {min:e})")));
        }
        let mut row_start = vec![0];
        let mut cols = Vec::new();
        for i in 0..k {
            cols.extend((0..k).filter(|&j| h_matrix[(i, j)] != 0.0).map(|j| (j, h_matrix[(i, j)])));
            row_start.push(cols.len());
        }
        let coupled = epsilons.iter().enumerate().filter(|(_, e)| **e != 0.0).map(|(i, e)| (i, *e)).collect();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mode_vectors = DMatrix::from_fn(k, k, |i, j| eig.eigenvectors[(i, order[j])]);
        let mut cfg = ChainConfig {
            mode_freqs: order.iter().map(|&i| eig.eigenvalues[i].sqrt()).collect(),
            mode_vectors,
            h_matrix,
            epsilons,
            beta,
            lambda,
            omega0,
            row_start,
            cols,
            coupled,
            omega_max: 0.0,
        };
        let full = SymmetricEigen::new(cfg.full_stiffness()).eigenvalues;
        if !(full.min() > 0.0) {
            return Err(Error::InvalidInput("coupled system has a non-positive potential".into()));
        }
        cfg.omega_max = full.max().sqrt();
        Ok(cfg)
    }

    /// Periodic chain with `h_ii = h0`, `h_{i,i±1} = h1`; positive definite
    /// iff `h0 > 2|h1|`.
    pub fn nearest_neighbor(
        n_modes: usize,
        h0: f64,
        h1: f64,
        epsilons: DVector<f64>,
        beta: f64,
        lambda: f64,
        omega0: f64,
    ) -> Result<Self> {
        if n_modes < 3 {
            return Err(Error::InvalidInput("a periodic chain needs at least 3 sites".into()));
        }
        let mut h = DMatrix::zeros(n_modes, n_modes);
        for i in 0..n_modes {
            h[(i, i)] = h0;
            h[(i, (i + 1) % n_modes)] = h1;
            h[((i + 1) % n_modes, i)] = h1;
        }
        Self::new(h, epsilons, beta, lambda, omega0)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.h_matrix.clone(), self.epsilons.clone(), self.beta, lambda, self.omega0)
    }

    pub fn n_modes(&self) -> usize {
        self.h_matrix.nrows()
    }

    /// Normal-mode frequencies of the free chain (ascending) and the
    /// orthonormal eigenvectors as columns.
    pub fn normal_modes(&self) -> (&[f64], &DMatrix<f64>) {
        (&self.mode_freqs, &self.mode_vectors)
    }

    /// `c_ν = ε · e_ν`, so `W = Σ c_ν Q_ν`.
    pub fn mode_couplings(&self) -> Vec<f64> {
        self.mode_vectors.tr_mul(&self.epsilons).iter().copied().collect()
    }

    /// Stiffness matrix of oscillator (index 0) plus chain.
    pub fn full_stiffness(&self) -> DMatrix<f64> {
        let k = self.n_modes();
        let mut a = DMatrix::zeros(k + 1, k + 1);
        a[(0, 0)] = self.omega0 * self.omega0;
        a.view_mut((1, 1), (k, k)).copy_from(&self.h_matrix);
        for i in 0..k {
            a[(0, i + 1)] = self.lambda * self.epsilons[i];
            a[(i + 1, 0)] = self.lambda * self.epsilons[i];
        }
        a
    }

    /// Highest normal-mode frequency of the coupled system.
    pub fn omega_max(&self) -> f64 {
        self.omega_max
    }

    /// Velocity Verlet is stable for `dt < 2/ω_max`.
    pub fn stability_bound(&self) -> f64 {
        2.0 / self.omega_max
    }

    /// `h(s) = Σ c_ν² cos(ω_ν s)/(βω_ν²)`: the correlation formula evaluated
    /// on the chain's discrete spectrum.
    pub fn exact_correlation(&self, s: f64) -> f64 {
        self.mode_couplings()
            .iter()
            .zip(&self.mode_freqs)
            .map(|(c, w)| c * c * (w * s).cos() / (self.beta * w * w))
            .sum()
    }

    /// `Σ c_ν² δ(ω − ω_ν)` broadened with a normalized Gaussian of width
    /// `width`; equals `2u²(ω)` of the continuum description.
    pub fn coupling_density(&self, omega: f64, width: f64) -> f64 {
        let norm = 1.0 / (width * (2.0 * std::f64::consts::PI).sqrt());
        self.mode_couplings()
            .iter()
            .zip(&self.mode_freqs)
            .map(|(c, w)| {
                let x = (omega - w) / width;
                c * c * norm * (-0.5 * x * x).exp()
            })
            .sum()
    }

    /// Time for a disturbance to travel once around the chain,
    /// `K / v_max`, with the group velocity read off the spacing of distinct
    /// mode frequencies (`Δk = 2π/K` between them on a periodic chain).
    pub fn recurrence_time(&self) -> f64 {
        let k = self.n_modes() as f64;
        let mut distinct: Vec<f64> = Vec::new();
        for &w in &self.mode_freqs {
            if distinct.last().is_none_or(|&l| w - l > 1e-12 * w.max(1.0)) {
                distinct.push(w);
            }
        }
        let dk = 2.0 * std::f64::consts::PI / k;
        let vmax = distinct.windows(2).map(|p| (p[1] - p[0]) / dk).fold(0.0, f64::max);
        if vmax > 0.0 { k / vmax } else { f64::INFINITY }
    }

    fn force(&self, x: &[f64], out: &mut [f64]) {
        let w2 = self.omega0 * self.omega0;
        let bath = &x[1..];
        let mut coupling = 0.0;
        for &(i, e) in &self.coupled {
            coupling += e * bath[i];
        }
        out[0] = -w2 * x[0] - self.lambda * coupling;
        let rest = &mut out[1..];
        for (i, o) in rest.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &(j, v) in &self.cols[self.row_start[i]..self.row_start[i + 1]] {
                acc += v * bath[j];
            }
            *o = -acc;
        }
        let lx = self.lambda * x[0];
        for &(i, e) in &self.coupled {
            rest[i] -= e * lx;
        }
    }

    /// Total energy of a phase point.
    pub fn energy(&self, pt: &PhasePoint) -> f64 {
        let (x, v) = pt.as_full();
        let mut f = vec![0.0; x.len()];
        self.force(&x, &mut f);
        0.5 * v.iter().map(|p| p * p).sum::<f64>() - 0.5 * x.iter().zip(&f).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Quadratic form conserved exactly by velocity Verlet with step `dt`:
    /// `½|p|² + ½xᵀAx − (dt²/8)|Ax|²`.
    pub fn modified_energy(&self, pt: &PhasePoint, dt: f64) -> f64 {
        let (x, _) = pt.as_full();
        let mut f = vec![0.0; x.len()];
        self.force(&x, &mut f);
        self.energy(pt) - dt * dt / 8.0 * f.iter().map(|a| a * a).sum::<f64>()
    }

    /// Oscillator energy `p²/2 + Ω₀²q²/2`.
    pub fn oscillator_energy(&self, pt: &PhasePoint) -> f64 {
        0.5 * pt.p * pt.p + 0.5 * self.omega0 * self.omega0 * pt.q * pt.q
    }
}

/// Exact flow of the coupled linear system, from the normal modes of the
/// full stiffness matrix.
pub fn exact_flow(config: &ChainConfig, start: &PhasePoint, t: f64) -> PhasePoint {
    let eig = SymmetricEigen::new(config.full_stiffness());
    let (x, v) = start.as_full();
    let v_mat = &eig.eigenvectors;
    let x0 = v_mat.tr_mul(&DVector::from_vec(x));
    let p0 = v_mat.tr_mul(&DVector::from_vec(v));
    let n = x0.len();
    let mut xt = DVector::zeros(n);
    let mut pt = DVector::zeros(n);
    for i in 0..n {
        let w = eig.eigenvalues[i].sqrt();
        let (s, c) = (w * t).sin_cos();
        xt[i] = x0[i] * c + p0[i] / w * s;
        pt[i] = -x0[i] * w * s + p0[i] * c;
    }
    PhasePoint::from_full((v_mat * xt).as_slice(), (v_mat * pt).as_slice())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
    pub bath_q: DVector<f64>,
    pub bath_p: DVector<f64>,
}

impl PhasePoint {
    pub fn with_oscillator(mut self, q: f64, p: f64) -> Self {
        self.q = q;
        self.p = p;
        self
    }

    fn as_full(&self) -> (Vec<f64>, Vec<f64>) {
        let mut x = Vec::with_capacity(self.bath_q.len() + 1);
        x.push(self.q);
        x.extend(self.bath_q.iter());
        let mut v = Vec::with_capacity(self.bath_p.len() + 1);
        v.push(self.p);
        v.extend(self.bath_p.iter());
        (x, v)
    }

    fn from_full(x: &[f64], v: &[f64]) -> Self {
        PhasePoint {
            q: x[0],
            p: v[0],
            bath_q: DVector::from_column_slice(&x[1..]),
            bath_p: DVector::from_column_slice(&v[1..]),
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Chain drawn from `e^{−βH_R}` with the oscillator at the origin; sample
/// `i` uses stream `i` of the seeded generator, so results do not depend on
/// scheduling.
pub fn gibbs_sample(config: &ChainConfig, n_samples: usize, seed: u64) -> Vec<PhasePoint> {
    let k = config.n_modes();
    let sd_p = 1.0 / config.beta.sqrt();
    (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let modes = DVector::from_iterator(
                k,
                config.mode_freqs.iter().map(|w| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * sd_p / w
                }),
            );
            let bath_p = DVector::from_iterator(
                k,
                (0..k).map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * sd_p
                }),
            );
            PhasePoint { q: 0.0, p: 0.0, bath_q: &config.mode_vectors * modes, bath_p }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct TrajectoryEnsemble {
    pub times: Vec<f64>,
    pub time_step: f64,
    pub seed: u64,
    /// `samples[trajectory][time]`.
    pub samples: Vec<Vec<PhasePoint>>,
}

fn sample_times(steps: usize, every: usize, dt: f64) -> Vec<f64> {
    (0..=steps).filter(|s| s % every == 0 || *s == steps).map(|s| s as f64 * dt).collect()
}

fn steps_for(config: &ChainConfig, t_max: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !(t_max >= 0.0) {
        return Err(Error::InvalidInput("need dt > 0 and t_max ≥ 0".into()));
    }
    let bound = config.stability_bound();
    if dt >= bound {
        return Err(Error::UnstableStep { dt, bound });
    }
    Ok((t_max / dt).round() as usize)
}

/// Runs velocity Verlet from `start`, calling `observe(step, state)` at step
/// 0, every `every` steps and the last step.
fn verlet<F: FnMut(usize, &[f64], &[f64])>(config: &ChainConfig, start: &PhasePoint, steps: usize, dt: f64, every: usize, mut observe: F) {
    let (mut x, mut v) = start.as_full();
    let mut f = vec![0.0; x.len()];
    config.force(&x, &mut f);
    observe(0, &x, &v);
    let h = 0.5 * dt;
    for s in 1..=steps {
        for (vi, fi) in v.iter_mut().zip(&f) {
            *vi += h * fi;
        }
        for (xi, vi) in x.iter_mut().zip(&v) {
            *xi += dt * vi;
        }
        config.force(&x, &mut f);
        for (vi, fi) in v.iter_mut().zip(&f) {
            *vi += h * fi;
        }
        if s % every == 0 || s == steps {
            observe(s, &x, &v);
        }
    }
}

/// Integrates every initial point to `t_max`, storing the full state every
/// `every` steps. Memory grows as trajectories × samples × K; use
/// [`integrate_observed`] for large ensembles.
pub fn integrate(config: &ChainConfig, initial: &[PhasePoint], t_max: f64, dt: f64, every: usize) -> Result<TrajectoryEnsemble> {
    let steps = steps_for(config, t_max, dt)?;
    let every = every.max(1);
    let samples = initial
        .par_iter()
        .map(|start| {
            let mut out = Vec::new();
            verlet(config, start, steps, dt, every, |_, x, v| out.push(PhasePoint::from_full(x, v)));
            out
        })
        .collect();
    let times = sample_times(steps, every, dt);
    Ok(TrajectoryEnsemble { times, time_step: dt, seed: 0, samples })
}

/// Ensemble mean and standard error of a scalar observable over time.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleSeries {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl EnsembleSeries {
    fn from_columns(times: Vec<f64>, values: &[Vec<f64>]) -> Self {
        let n = values.len() as f64;
        let len = times.len();
        let mut mean = vec![0.0; len];
        let mut m2 = vec![0.0; len];
        for row in values {
            for (i, v) in row.iter().enumerate() {
                mean[i] += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        for row in values {
            for (i, v) in row.iter().enumerate() {
                m2[i] += (v - mean[i]) * (v - mean[i]);
            }
        }
        let stderr = m2.iter().map(|s| if n > 1.0 { (s / (n - 1.0) / n).sqrt() } else { 0.0 }).collect();
        EnsembleSeries { times, mean, stderr }
    }
}

/// Integrates every initial point and records `observable` every `every`
/// steps; returns the ensemble mean and standard error.
pub fn integrate_observed<F>(
    config: &ChainConfig,
    initial: &[PhasePoint],
    t_max: f64,
    dt: f64,
    every: usize,
    observable: F,
) -> Result<EnsembleSeries>
where
    F: Fn(&ChainConfig, &[f64], &[f64]) -> f64 + Sync,
{
    let steps = steps_for(config, t_max, dt)?;
    let every = every.max(1);
    let values: Vec<Vec<f64>> = initial
        .par_iter()
        .map(|start| {
            let mut out = Vec::with_capacity(steps / every + 1);
            verlet(config, start, steps, dt, every, |_, x, v| out.push(observable(config, x, v)));
            out
        })
        .collect();
    let times = sample_times(steps, every, dt);
    Ok(EnsembleSeries::from_columns(times, &values))
}

/// Monte-Carlo estimate of `h(s) = ⟨W W(s)⟩` under free bath evolution,
/// starting the window at `t0` (the estimate is independent of `t0` in
/// equilibrium). The chain is propagated exactly in its normal modes.
pub fn empirical_correlation_from(config: &ChainConfig, ensemble: &[PhasePoint], t0: f64, s_grid: &[f64]) -> EnsembleSeries {
    let c = config.mode_couplings();
    let w = &config.mode_freqs;
    let e = &config.mode_vectors;
    let values: Vec<Vec<f64>> = ensemble
        .par_iter()
        .map(|pt| {
            let q0 = e.tr_mul(&pt.bath_q);
            let p0 = e.tr_mul(&pt.bath_p);
            let w_at = |t: f64| -> f64 {
                (0..w.len()).map(|n| c[n] * (q0[n] * (w[n] * t).cos() + p0[n] / w[n] * (w[n] * t).sin())).sum()
            };
            let base = w_at(t0);
            s_grid.iter().map(|&s| base * w_at(t0 + s)).collect()
        })
        .collect();
    EnsembleSeries::from_columns(s_grid.to_vec(), &values)
}

/// [`empirical_correlation_from`] with the window starting at the sample.
pub fn empirical_correlation(config: &ChainConfig, ensemble: &[PhasePoint], s_grid: &[f64]) -> EnsembleSeries {
    empirical_correlation_from(config, ensemble, 0.0, s_grid)
}

#[derive(Clone, Debug)]
pub struct RelaxationSettings {
    pub n_samples: usize,
    pub seed: u64,
    /// Step; `None` uses a hundredth of the shortest period.
    pub dt: Option<f64>,
    pub sample_every: usize,
    /// Oscillator initial condition.
    pub q0: f64,
    pub p0: f64,
    /// Start of the fit window (skips the initial slip).
    pub fit_from: f64,
}

impl Default for RelaxationSettings {
    fn default() -> Self {
        RelaxationSettings { n_samples: 10_000, seed: 1, dt: None, sample_every: 10, q0: 0.0, p0: 3.0, fit_from: 0.0 }
    }
}

#[derive(Clone, Debug)]
pub struct RelaxationCurve {
    pub energy: EnsembleSeries,
    pub dt: f64,
    /// `E(t) ≈ E∞ + A e^{−γt}` over the fit window.
    pub rate: f64,
    /// Half width of the 95% confidence interval of `rate`.
    pub rate_ci: f64,
    pub asymptote: f64,
    pub amplitude: f64,
}

/// Ensemble-averaged oscillator energy starting from `(q0, p0)` in a
/// canonical chain, with a weighted single-exponential fit.
pub fn relaxation_experiment(config: &ChainConfig, lambda: f64, t_max: f64, settings: &RelaxationSettings) -> Result<RelaxationCurve> {
    let cfg = config.with_lambda(lambda)?;
    let dt = settings.dt.unwrap_or(2.0 * std::f64::consts::PI / cfg.omega_max() / 100.0);
    let initial: Vec<PhasePoint> = gibbs_sample(&cfg, settings.n_samples, settings.seed)
        .into_iter()
        .map(|pt| pt.with_oscillator(settings.q0, settings.p0))
        .collect();
    let energy = integrate_observed(&cfg, &initial, t_max, dt, settings.sample_every, |c, x, v| {
        0.5 * v[0] * v[0] + 0.5 * c.omega0 * c.omega0 * x[0] * x[0]
    })?;
    let fit = fit_exponential(&energy, settings.fit_from)?;
    Ok(RelaxationCurve { energy, dt, rate: fit.0, rate_ci: fit.1, asymptote: fit.2, amplitude: fit.3 })
}

/// Weighted least squares `y ≈ c + a e^{−γt}` for `t ≥ t_from`; returns
/// `(γ, 1.96σ_γ, c, a)`.
pub fn fit_exponential(series: &EnsembleSeries, t_from: f64) -> Result<(f64, f64, f64, f64)> {
    let floor = series.stderr.iter().copied().filter(|s| *s > 0.0).fold(f64::INFINITY, f64::min);
    let pts: Vec<(f64, f64, f64)> = series
        .times
        .iter()
        .zip(&series.mean)
        .zip(&series.stderr)
        .filter(|((t, _), _)| **t >= t_from)
        .map(|((t, y), s)| {
            let s = if *s > 0.0 { *s } else if floor.is_finite() { floor } else { 1.0 };
            (*t, *y, 1.0 / (s * s))
        })
        .collect();
    if pts.len() < 4 {
        return Err(Error::InvalidInput("fit window holds fewer than 4 points".into()));
    }
    let t0 = pts[0].0;
    let span = pts.last().unwrap().0 - t0;
    let linear = |g: f64| -> (f64, f64, f64) {
        let (mut s00, mut s01, mut s11, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(t, y, w) in &pts {
            let e = (-g * (t - t0)).exp();
            s00 += w;
            s01 += w * e;
            s11 += w * e * e;
            b0 += w * y;
            b1 += w * y * e;
        }
        let det = s00 * s11 - s01 * s01;
        let c = (s11 * b0 - s01 * b1) / det;
        let a = (s00 * b1 - s01 * b0) / det;
        let chi: f64 = pts.iter().map(|&(t, y, w)| w * (y - c - a * (-g * (t - t0)).exp()).powi(2)).sum();
        (chi, c, a)
    };
    // golden section on ln γ
    let (mut lo, mut hi) = ((1e-3 / span).ln(), (1e3 / span).ln());
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (linear(x1.exp()).0, linear(x2.exp()).0);
    for _ in 0..200 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = linear(x1.exp()).0;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = linear(x2.exp()).0;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let g = (0.5 * (lo + hi)).exp();
    let (_, c, a) = linear(g);
    // Gauss-Newton covariance
    let mut jtj = nalgebra::Matrix3::<f64>::zeros();
    for &(t, _, w) in &pts {
        let e = (-g * (t - t0)).exp();
        let j = nalgebra::Vector3::new(1.0, e, -a * (t - t0) * e);
        jtj += w * j * j.transpose();
    }
    let cov = jtj.try_inverse().ok_or_else(|| Error::InvalidInput("degenerate exponential fit".into()))?;
    // amplitude referred back to t = 0
    Ok((g, 1.96 * cov[(2, 2)].sqrt(), c, a * (g * t0).exp()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(lambda: f64) -> ChainConfig {
        let mut eps = DVector::zeros(8);
        eps[3] = 0.5;
        ChainConfig::nearest_neighbor(8, 1.25, -0.5, eps, 1.0, lambda, 1.0).unwrap()
    }

    #[test]
    fn rejects_indefinite_chain() {
        let eps = DVector::zeros(4);
        assert!(ChainConfig::nearest_neighbor(4, 1.0, -0.5, eps.clone(), 1.0, 0.0, 1.0).is_err());
        assert!(ChainConfig::nearest_neighbor(4, 1.5, -0.5, eps, 1.0, 0.0, 1.0).is_ok());
    }

    #[test]
    fn nearest_neighbor_dispersion() {
        let cfg = small(0.0);
        let (w, _) = cfg.normal_modes();
        let mut expect: Vec<f64> =
            (0..8).map(|k| (1.25 - 1.0 * (2.0 * std::f64::consts::PI * k as f64 / 8.0).cos()).sqrt()).collect();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in w.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn unstable_step_rejected() {
        let cfg = small(0.1);
        let pt = gibbs_sample(&cfg, 1, 0).remove(0);
        let bound = cfg.stability_bound();
        assert!(matches!(integrate(&cfg, &[pt], 1.0, bound * 1.01, 1), Err(Error::UnstableStep { .. })));
    }

    #[test]
    fn verlet_conserves_modified_energy() {
        let cfg = small(0.3);
        let dt = 0.05;
        let pt = gibbs_sample(&cfg, 1, 4).remove(0).with_oscillator(1.0, 0.5);
        let e0 = cfg.modified_energy(&pt, dt);
        let ens = integrate(&cfg, &[pt], 200.0, dt, 100).unwrap();
        for p in &ens.samples[0] {
            assert!((cfg.modified_energy(p, dt) - e0).abs() < 1e-12 * e0.abs());
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let cfg = small(0.0);
        assert_eq!(gibbs_sample(&cfg, 5, 9), gibbs_sample(&cfg, 5, 9));
        assert_ne!(gibbs_sample(&cfg, 5, 9), gibbs_sample(&cfg, 5, 10));
    }

    #[test]
    fn fit_recovers_exponential() {
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.5).collect();
        let mean = times.iter().map(|t| 1.0 + 4.0 * (-0.05 * t).exp()).collect();
        let s = EnsembleSeries { stderr: vec![0.01; times.len()], times, mean };
        let (g, ci, c, a) = fit_exponential(&s, 0.0).unwrap();
        assert!((g - 0.05).abs() < 1e-9 && (c - 1.0).abs() < 1e-8 && (a - 4.0).abs() < 1e-8);
        assert!(ci > 0.0 && ci < 1e-3);
    }
}
