//! Dense complex matrices sized for constraint systems (a handful of rows by
//! the number of microphones). Nothing here is meant for large problems.

use std::ops::{Index, IndexMut};

use num_traits::{One, Zero};

use crate::num::{Real, C};

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<C<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<C<T>>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[C<T>] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out[(c, r)] = self[(r, c)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(v)
                    .fold(C::zero(), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    /// `A^H v`
    pub fn adjoint_mul_vec(&self, v: &[C<T>]) -> Vec<C<T>> {
        assert_eq!(self.rows, v.len());
        let mut out = vec![C::zero(); self.cols];
        for (r, vr) in v.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a.conj() * *vr;
            }
        }
        out
    }

    pub fn trace(&self) -> C<T> {
        (0..self.rows.min(self.cols)).fold(C::zero(), |acc, i| acc + self[(i, i)])
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> T {
        (0..self.cols)
            .map(|c| (0..self.rows).fold(T::zero(), |acc, r| acc + self[(r, c)].norm()))
            .fold(T::zero(), T::max)
    }

    /// Inverse of a square matrix by Gauss-Jordan elimination with partial
    /// pivoting. `None` when a pivot vanishes.
    pub fn inverse(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols, "inverse of a non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[(i, col)].norm().partial_cmp(&a[(j, col)].norm()).unwrap_or(std::cmp::Ordering::Equal))
                .expect("non-empty range");
            if a[(pivot, col)].norm() == T::zero() {
                return None;
            }
            if pivot != col {
                a.swap_rows(pivot, col);
                inv.swap_rows(pivot, col);
            }
            let p = a[(col, col)].inv();
            for j in 0..n {
                a[(col, j)] = a[(col, j)] * p;
                inv[(col, j)] = inv[(col, j)] * p;
            }
            for i in 0..n {
                if i == col {
                    continue;
                }
                let f = a[(i, col)];
                if f.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let (ac, ic) = (a[(col, j)], inv[(col, j)]);
                    a[(i, j)] -= f * ac;
                    inv[(i, j)] -= f * ic;
                }
            }
        }
        Some(inv)
    }

    /// 1-norm condition number; infinite for singular matrices.
    pub fn condition_number(&self) -> T {
        match self.inverse() {
            Some(inv) => self.norm1() * inv.norm1(),
            None => T::infinity(),
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = C<T>;

    fn index(&self, (r, c): (usize, usize)) -> &C<T> {
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut C<T> {
        &mut self.data[r * self.cols + c]
    }
}

pub fn dot_conj<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    a.iter()
        .zip(b)
        .fold(C::zero(), |acc, (x, y)| acc + x.conj() * *y)
}

pub fn norm_sqr<T: Real>(v: &[C<T>]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc + x.norm_sqr())
}
