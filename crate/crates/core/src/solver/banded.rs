//! Banded storage and LU factorization with partial pivoting inside the band.

use crate::error::{Error, Result};
use crate::scalar::{max_abs, Scalar};

/// Square matrix with `kl` sub- and `ku` super-diagonals, stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<T>,
}

impl<T: Scalar> BandedMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandedMatrix {
            n,
            kl,
            ku,
            data: vec![T::zero(); n * (kl + ku + 1)],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        for i in 0..n {
            m.set(i, i, T::one());
        }
        m
    }

    /// Builds a banded matrix from an entry function evaluated inside the band.
    pub fn from_fn(n: usize, kl: usize, ku: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(n, kl, ku);
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    /// Entry `(i, j)`; zero outside the band.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        if self.in_band(i, j) {
            self.data[self.index(i, j)]
        } else {
            T::zero()
        }
    }

    /// Panics when `(i, j)` lies outside the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.index(i, j);
        self.data[k] = value;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: T) {
        assert!(self.in_band(i, j), "({i}, {j}) outside band");
        let k = self.index(i, j);
        self.data[k] = self.data[k] + value;
    }

    /// Adds `shift` to every diagonal entry.
    pub fn shift_diagonal(&mut self, shift: T) {
        for i in 0..self.n {
            self.add(i, i, shift);
        }
    }

    pub fn scale(&mut self, factor: T) {
        for x in &mut self.data {
            *x = *x * factor;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku + 1).min(self.n);
                (lo..hi).fold(T::zero(), |acc, j| acc + self.get(i, j) * x[j])
            })
            .collect()
    }

    /// `Aᵀ x`.
    pub fn mul_vec_transpose(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        let mut out = vec![T::zero(); self.n];
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku + 1).min(self.n);
            for j in lo..hi {
                out[j] = out[j] + self.get(i, j) * x[i];
            }
        }
        out
    }

    /// Max-abs entry.
    pub fn max_abs(&self) -> T {
        max_abs(&self.data)
    }

    /// Max row sum of absolute values.
    pub fn norm_inf(&self) -> T {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku + 1).min(self.n);
                (lo..hi).fold(T::zero(), |acc, j| acc + self.get(i, j).abs())
            })
            .fold(T::zero(), T::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn factor(&self) -> Result<BandedLu<T>> {
        BandedLu::new(self)
    }
}

/// `P A = L U` with row interchanges restricted to the band, in the layout used
/// by LAPACK's `gbtrf`: multipliers are left in place and not permuted by later
/// interchanges.
#[derive(Debug, Clone)]
pub struct BandedLu<T> {
    n: usize,
    kl: usize,
    /// Upper bandwidth after fill-in, `kl + ku`.
    ku: usize,
    data: Vec<T>,
    pivots: Vec<usize>,
}

impl<T: Scalar> BandedLu<T> {
    pub fn new(a: &BandedMatrix<T>) -> Result<Self> {
        let n = a.n;
        let kl = a.kl;
        let ku = a.kl + a.ku;
        let width = kl + ku + 1;
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            data: vec![T::zero(); n * width],
            pivots: vec![0; n],
        };
        for i in 0..n {
            for j in i.saturating_sub(a.kl)..(i + a.ku + 1).min(n) {
                let k = lu.index(i, j);
                lu.data[k] = a.get(i, j);
            }
        }
        let tiny = T::epsilon() * a.max_abs().max(T::min_positive_value());

        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.at(k, k).abs();
            for i in k + 1..=last_row {
                let v = lu.at(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) {
                return Err(Error::SingularMatrix { pivot: k });
            }
            lu.pivots[k] = p;
            let last_col = (k + ku).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a_idx = lu.index(k, j);
                    let b_idx = lu.index(p, j);
                    lu.data.swap(a_idx, b_idx);
                }
            }
            let pivot = lu.at(k, k);
            for i in k + 1..=last_row {
                let l = lu.at(i, k) / pivot;
                let ik = lu.index(i, k);
                lu.data[ik] = l;
                if l != T::zero() {
                    for j in k + 1..=last_col {
                        let ij = lu.index(i, j);
                        lu.data[ij] = lu.data[ij] - l * lu.at(k, j);
                    }
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku);
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.data[self.index(i, j)]
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Solves in place.
    pub fn solve_in_place(&self, b: &mut [T]) {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != T::zero() {
                for i in k + 1..=(k + self.kl).min(n - 1) {
                    b[i] = b[i] - self.at(i, k) * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..=(k + self.ku).min(n - 1) {
                s = s - self.at(k, j) * b[j];
            }
            b[k] = s / self.at(k, k);
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Sign of the determinant of the factored matrix.
    pub fn det_sign(&self) -> T {
        let mut sign = T::one();
        for k in 0..self.n {
            if self.pivots[k] != k {
                sign = -sign;
            }
            if self.at(k, k) < T::zero() {
                sign = -sign;
            }
        }
        sign
    }

    /// Smallest `|U_kk|`, a cheap singularity indicator.
    pub fn min_abs_pivot(&self) -> T {
        (0..self.n).map(|k| self.at(k, k).abs()).fold(T::infinity(), T::min)
    }
}

/// Direct solve of `A x = b`.
pub fn banded_solve<T: Scalar>(a: &BandedMatrix<T>, rhs: &[T]) -> Result<Vec<T>> {
    if rhs.len() != a.n() {
        return Err(Error::SizeMismatch {
            expected: a.n(),
            got: rhs.len(),
        });
    }
    Ok(a.factor()?.solve(rhs))
}
