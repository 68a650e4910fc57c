//! Banded LU factorization with partial pivoting for complex matrices.
//!
//! Row `i` stores columns `i - kl ..= i + kl + ku`; pivoting keeps the fill
//! inside that window. Multipliers are applied in elimination order during
//! the solve (no retroactive row swaps).

use crate::{Complex, Real};
use nalgebra::ComplexField;

pub(crate) struct BandLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    rows: Vec<Complex<T>>,
    piv: Vec<usize>,
}

impl<T: Real> BandLu<T> {
    /// Factorizes the matrix given as `(row, col, value)` triplets with
    /// `col - row ∈ [-kl, ku]`. Exactly zero pivots are replaced by `floor`.
    pub(crate) fn factor(n: usize, kl: usize, ku: usize, entries: &[(usize, usize, Complex<T>)], floor: T) -> Self {
        let width = 2 * kl + ku + 1;
        let mut lu = BandLu { n, kl, ku, width, rows: vec![Complex::new(T::zero(), T::zero()); n * width], piv: vec![0; n] };
        for &(i, j, v) in entries {
            debug_assert!(j + kl >= i && j <= i + ku);
            *lu.at_mut(i, j) += v;
        }
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = lu.at(k, k).modulus();
            for i in k + 1..=last_row {
                let v = lu.at(i, k).modulus();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            lu.piv[k] = p;
            if p != k {
                for j in k..=last_col {
                    let a = lu.at(k, j);
                    let b = lu.at(p, j);
                    *lu.at_mut(k, j) = b;
                    *lu.at_mut(p, j) = a;
                }
            }
            if best == T::zero() {
                *lu.at_mut(k, k) = Complex::new(floor, T::zero());
            }
            let pivot = lu.at(k, k);
            for i in k + 1..=last_row {
                let l = lu.at(i, k) / pivot;
                if l == Complex::new(T::zero(), T::zero()) {
                    continue;
                }
                *lu.at_mut(i, k) = l;
                for j in k + 1..=last_col {
                    let u = lu.at(k, j);
                    *lu.at_mut(i, j) -= l * u;
                }
            }
        }
        lu
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> Complex<T> {
        self.rows[self.idx(i, j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut Complex<T> {
        let k = self.idx(i, j);
        &mut self.rows[k]
    }

    #[allow(clippy::needless_range_loop)]
    pub(crate) fn solve_in_place(&self, b: &mut [Complex<T>]) {
        let n = self.n;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                let l = self.at(i, k);
                b[i] -= l * bk;
            }
        }
        for k in (0..n).rev() {
            let mut acc = b[k];
            for j in k + 1..=(k + self.kl + self.ku).min(n - 1) {
                acc -= self.at(k, j) * b[j];
            }
            b[k] = acc / self.at(k, k);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra as na;

    #[test]
    fn matches_dense_solve() {
        let n = 12;
        let (kl, ku) = (2, 3);
        let mut entries = Vec::new();
        let mut dense = na::DMatrix::<Complex<f64>>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // small diagonal forces pivoting
                let v = if i == j {
                    Complex::new(0.01 * (i as f64 + 1.0), 0.1)
                } else {
                    Complex::new(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + j) % 3) as f64 * 0.5)
                };
                entries.push((i, j, v));
                dense[(i, j)] = v;
            }
        }
        let lu = BandLu::factor(n, kl, ku, &entries, 1e-300);
        let rhs: Vec<Complex<f64>> = (0..n).map(|i| Complex::new(i as f64, 1.0)).collect();
        let mut x = rhs.clone();
        lu.solve_in_place(&mut x);
        let xv = na::DVector::from_vec(x);
        let r = &dense * &xv - na::DVector::from_vec(rhs);
        assert!(r.norm() < 1e-10, "{}", r.norm());
    }
}
