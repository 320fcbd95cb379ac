//! Banded matrices with a partially pivoted banded LU.

use nalgebra::{DMatrix, DVector};

use super::LinalgError;

/// Square matrix with `lower` sub- and `upper` super-diagonals, stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    lower: usize,
    upper: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, lower: usize, upper: usize) -> Self {
        Self { n, lower, upper, data: vec![0.0; n * (lower + upper + 1)] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, 0, 0);
        m.data.fill(1.0);
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower(&self) -> usize {
        self.lower
    }

    pub fn upper(&self) -> usize {
        self.upper
    }

    fn width(&self) -> usize {
        self.lower + self.upper + 1
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        if j + self.lower < i || j > i + self.upper || i >= self.n || j >= self.n {
            None
        } else {
            Some(i * self.width() + j + self.lower - i)
        }
    }

    /// Columns `[start, end)` that can hold nonzeros in row `i`.
    #[inline]
    pub fn row_span(&self, i: usize) -> (usize, usize) {
        (i.saturating_sub(self.lower), (i + self.upper + 1).min(self.n))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |s| self.data[s])
    }

    /// Panics if `(i, j)` lies outside the band.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let s = self.slot(i, j).unwrap_or_else(|| panic!("({i}, {j}) outside band"));
        self.data[s] = value;
    }

    /// Panics if `(i, j)` lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let s = self.slot(i, j).unwrap_or_else(|| panic!("({i}, {j}) outside band"));
        self.data[s] += value;
    }

    /// Nonzero-capable entries of row `i` as `(column, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (start, end) = self.row_span(i);
        let base = i * self.width() + self.lower - i;
        (start..end).map(move |j| (j, self.data[base + j]))
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.n);
        DVector::from_fn(self.n, |i, _| self.row(i).map(|(j, a)| a * x[j]).sum())
    }

    /// Product with a dense `n x k` matrix, one diagonal at a time.
    pub fn mul_mat(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.nrows(), self.n);
        let n = self.n;
        let w = self.width();
        let mut out = DMatrix::zeros(n, x.ncols());
        for d in 0..w {
            // Entry (i, i + offset) sits at data[i * w + d].
            let offset = d as isize - self.lower as isize;
            let lo = (-offset).max(0) as usize;
            let hi = (n as isize - offset.max(0)) as usize;
            if lo >= hi {
                continue;
            }
            let diag: Vec<f64> = (lo..hi).map(|i| self.data[i * w + d]).collect();
            for c in 0..x.ncols() {
                let xc = &x.as_slice()[c * n..(c + 1) * n][(lo as isize + offset) as usize..(hi as isize + offset) as usize];
                let oc = &mut out.as_mut_slice()[c * n + lo..c * n + hi];
                for ((o, a), b) in oc.iter_mut().zip(&diag).zip(xc) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `a * lhs + b * rhs` with the union of both bands.
    pub fn combine(a: f64, lhs: &BandMatrix, b: f64, rhs: &BandMatrix) -> BandMatrix {
        assert_eq!(lhs.n, rhs.n);
        let mut out = BandMatrix::zeros(lhs.n, lhs.lower.max(rhs.lower), lhs.upper.max(rhs.upper));
        for i in 0..lhs.n {
            for (j, v) in lhs.row(i) {
                out.add(i, j, a * v);
            }
            for (j, v) in rhs.row(i) {
                out.add(i, j, b * v);
            }
        }
        out
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Copies the entries of `m` inside the band; anything outside is dropped.
    pub fn from_dense(m: &DMatrix<f64>, lower: usize, upper: usize) -> Self {
        assert!(m.is_square());
        let mut out = Self::zeros(m.nrows(), lower, upper);
        for i in 0..m.nrows() {
            let (start, end) = out.row_span(i);
            for j in start..end {
                out.set(i, j, m[(i, j)]);
            }
        }
        out
    }

    /// Maximum absolute row sum; bounds the spectral norm of symmetric matrices.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn lu(&self) -> Result<BandLu, LinalgError> {
        BandLu::factor(self)
    }
}

/// LU factors with row interchanges, laid out like LAPACK `gbtrf`: the upper
/// factor gets `lower` extra super-diagonals of fill.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    lower: usize,
    upper: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    fn width(&self) -> usize {
        2 * self.lower + self.upper + 1
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width() + j + self.lower - i
    }

    pub fn factor(a: &BandMatrix) -> Result<Self, LinalgError> {
        let n = a.n;
        let (kl, ku) = (a.lower, a.upper);
        let mut lu = BandLu { n, lower: kl, upper: ku, data: vec![0.0; n * (2 * kl + ku + 1)], pivots: vec![0; n] };
        for i in 0..n {
            for (j, v) in a.row(i) {
                let s = lu.idx(i, j);
                lu.data[s] = v;
            }
        }
        let reach = kl + ku;
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + reach).min(n - 1);
            let mut p = k;
            let mut best = lu.data[lu.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = lu.data[lu.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(LinalgError::Singular { pivot: k });
            }
            lu.pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let (a, b) = (lu.idx(k, j), lu.idx(p, j));
                    lu.data.swap(a, b);
                }
            }
            let pivot = lu.data[lu.idx(k, k)];
            for i in k + 1..=last_row {
                let s = lu.idx(i, k);
                let l = lu.data[s] / pivot;
                lu.data[s] = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let (dst, src) = (lu.idx(i, j), lu.idx(k, j));
                        lu.data[dst] -= l * lu.data[src];
                    }
                }
            }
        }
        Ok(lu)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for i in k + 1..=(k + self.lower).min(n - 1) {
                    b[i] -= self.data[self.idx(i, k)] * bk;
                }
            }
        }
        let reach = self.lower + self.upper;
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + reach).min(n - 1) {
                s -= self.data[self.idx(i, j)] * b[j];
            }
            b[i] = s / self.data[self.idx(i, i)];
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = b.clone();
        let n = self.n;
        for c in 0..x.ncols() {
            self.solve_in_place(&mut x.as_mut_slice()[c * n..(c + 1) * n]);
        }
        x
    }
}
