//! Banded LU with partial pivoting for the finite-element systems.
//!
//! Storage follows the LAPACK `gbtrf` layout idea: each row keeps `kl` extra
//! slots to the right so that row interchanges never overflow the band.

use nalgebra::DVector;

use crate::error::{check_len, PbdwError, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct BandMatrix<T: Scalar> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![T::zero(); n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.kl < i || j > i + self.ku + self.kl {
            None
        } else {
            Some(i * self.width + (j + self.kl - i))
        }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.slot(i, j).map_or(T::zero(), |s| self.data[s])
    }

    /// Adds `v` at `(i, j)`; panics outside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band"
        );
        let s = self.slot(i, j).expect("in band");
        self.data[s] += v;
    }

    /// Replaces row `i` by the identity row.
    pub fn set_identity_row(&mut self, i: usize) {
        let lo = i.saturating_sub(self.kl);
        let hi = (i + self.ku + self.kl).min(self.n - 1);
        for j in lo..=hi {
            let s = self.slot(i, j).expect("in band");
            self.data[s] = if i == j { T::one() } else { T::zero() };
        }
    }

    pub fn mul_vec(&self, x: &DVector<T>) -> DVector<T> {
        DVector::from_fn(self.n, |i, _| {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            (lo..=hi).fold(T::zero(), |acc, j| acc + self.get(i, j) * x[j])
        })
    }

    /// Factorizes a copy of the matrix.
    pub fn lu(&self) -> Result<BandLu<T>> {
        let mut a = self.clone();
        let n = a.n;
        let reach = a.ku + a.kl;
        let mut pivots = vec![0usize; n];
        let mut min_pivot = f64::INFINITY;
        let mut max_pivot = 0.0_f64;
        for k in 0..n {
            let last = (k + a.kl).min(n - 1);
            let mut p = k;
            let mut best = a.get(k, k).modulus();
            for i in k + 1..=last {
                let v = a.get(i, k).modulus();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(PbdwError::Singular(format!("zero pivot in column {k}")));
            }
            min_pivot = min_pivot.min(best);
            max_pivot = max_pivot.max(best);
            pivots[k] = p;
            let right = (k + reach).min(n - 1);
            if p != k {
                for j in k..=right {
                    let sk = a.slot(k, j).expect("in band");
                    let sp = a.slot(p, j).expect("in band");
                    a.data.swap(sk, sp);
                }
            }
            let pivot = a.get(k, k);
            for i in k + 1..=last {
                let si = a.slot(i, k).expect("in band");
                let factor = a.data[si] / pivot;
                a.data[si] = factor;
                if factor == T::zero() {
                    continue;
                }
                for j in k + 1..=right {
                    let akj = a.get(k, j);
                    if akj != T::zero() {
                        let s = a.slot(i, j).expect("in band");
                        a.data[s] -= factor * akj;
                    }
                }
            }
        }
        Ok(BandLu {
            factors: a,
            pivots,
            pivot_ratio: max_pivot / min_pivot,
        })
    }
}

#[derive(Clone, Debug)]
pub struct BandLu<T: Scalar> {
    factors: BandMatrix<T>,
    pivots: Vec<usize>,
    pivot_ratio: f64,
}

impl<T: Scalar> BandLu<T> {
    /// Ratio of the largest to the smallest pivot modulus, a cheap
    /// conditioning indicator.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn solve(&self, b: &DVector<T>) -> Result<DVector<T>> {
        let a = &self.factors;
        let n = a.n;
        check_len("banded solve", n, b.len())?;
        let mut x = b.clone();
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                x.swap_rows(k, p);
            }
            let xk = x[k];
            for i in k + 1..=(k + a.kl).min(n - 1) {
                let f = a.get(i, k);
                x[i] -= f * xk;
            }
        }
        let reach = a.ku + a.kl;
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..=(k + reach).min(n - 1) {
                s -= a.get(k, j) * x[j];
            }
            x[k] = s / a.get(k, k);
        }
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_dense_solve_with_pivoting() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 40;
        let (kl, ku) = (3, 2);
        let mut band = BandMatrix::<f64>::zeros(n, kl, ku);
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // small diagonal forces row interchanges
                let v = if i == j { 1e-3 } else { rng.random_range(-1.0..1.0) };
                band.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let b = DVector::from_fn(n, |i, _| (i as f64).sin());
        let lu = band.lu().unwrap();
        let x = lu.solve(&b).unwrap();
        let reference = dense.clone().lu().solve(&b).unwrap();
        assert!((&x - &reference).norm() < 1e-9 * reference.norm());
        assert!((band.mul_vec(&x) - b).norm() < 1e-10);
    }

    #[test]
    fn identity_rows_pin_values() {
        let mut band = BandMatrix::<f64>::zeros(3, 1, 1);
        for i in 0..3 {
            band.add(i, i, 2.0);
        }
        band.add(0, 1, -1.0);
        band.add(1, 0, -1.0);
        band.set_identity_row(1);
        let x = band
            .lu()
            .unwrap()
            .solve(&DVector::from_vec(vec![1.0, 5.0, 4.0]))
            .unwrap();
        assert!((x[1] - 5.0).abs() < 1e-15);
        assert!((x[0] - 3.0).abs() < 1e-14);
    }
}
