//! Kinetic equations of a harmonic oscillator weakly coupled to an
//! equilibrium oscillator bath.
//!
//! The crate covers the quantum side (truncated Fock space, Lindblad and
//! Redfield generators), the phase-space side (generalized Wigner transforms
//! for the Gaussian ordering family, Fokker-Planck operators and a finite
//! difference solver) and a classical harmonic-chain Monte-Carlo oracle.
//!
//! Numerical kernels are generic over [`Real`]; the `*64` aliases below fix
//! the scalar to `f64`.

use nalgebra as na;
use num_traits as nt;

pub mod bath;
pub mod chain;
pub mod fock;
pub mod fpde;
pub mod io;
pub mod lindblad;
pub mod quad;
pub mod spline;
pub mod wigner;

mod banded;
mod error;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Floating point scalar used by the numerical kernels.
pub trait Real:
    na::RealField + Copy + nt::FromPrimitive + nt::ToPrimitive + rustfft::FftNum
{
    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("index representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type Complex<T> = num_complex::Complex<T>;
pub type CMatrix<T> = na::DMatrix<Complex<T>>;

pub type FockBasis64 = fock::FockBasis<f64>;
pub type DensityMatrix64 = fock::DensityMatrix<f64>;
pub type BathSpec64 = bath::BathSpec<f64>;
pub type Superoperator64 = lindblad::Superoperator<f64>;
pub type LindbladCoefficients64 = lindblad::LindbladCoefficients<f64>;
pub type OrderingKernel64 = wigner::OrderingKernel<f64>;
pub type PhaseGrid64 = wigner::PhaseGrid<f64>;
pub type PhaseSpaceField64 = wigner::PhaseSpaceField<f64>;
pub type FPOperator64 = fpde::FPOperator<f64>;
