use std::fmt;
use std::io::{self, BufRead, Write};
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use crate::matops::MatError;
use crate::Real;

/// Dense real matrix in column-major storage.
#[derive(Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Wraps column-major data.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, MatError> {
        if data.len() != rows * cols {
            return Err(MatError::Length {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row vectors. All rows must have equal length.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, MatError> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(MatError::Length {
                expected: c,
                got: bad.len(),
            });
        }
        Ok(Self::from_fn(r, c, |i, j| rows[i][j]))
    }

    /// Convenience constructor from `f64` literals, row by row.
    pub fn from_f64_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| T::lit(rows[i][j]))
    }

    pub fn column_vector(v: &[T]) -> Self {
        Self {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn row_vector(v: &[T]) -> Self {
        Self {
            rows: 1,
            cols: v.len(),
            data: v.to_vec(),
        }
    }

    pub fn diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Column-major entries.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        let r = self.rows;
        &mut self.data[j * r..(j + 1) * r]
    }

    pub fn row(&self, i: usize) -> Vec<T> {
        (0..self.cols).map(|j| self[(i, j)]).collect()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        self.map(|x| x * s)
    }

    pub fn trace(&self) -> T {
        self.diagonal().into_iter().sum()
    }

    pub fn norm_fro(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Matrix product; panics on inner-dimension mismatch.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Self::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            let oc = j * self.rows;
            for k in 0..self.cols {
                let b = rhs.data[j * rhs.rows + k];
                if b == T::zero() {
                    continue;
                }
                let ac = &self.data[k * self.rows..(k + 1) * self.rows];
                for (o, &a) in out.data[oc..oc + self.rows].iter_mut().zip(ac) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self^T * rhs` without forming the transpose.
    pub fn tr_matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.rows, rhs.rows, "tr_matmul row mismatch");
        Self::from_fn(self.cols, rhs.cols, |i, j| dot(self.col(i), rhs.col(j)))
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        let mut out = vec![T::zero(); self.rows];
        for (k, &x) in v.iter().enumerate() {
            if x == T::zero() {
                continue;
            }
            for (o, &a) in out.iter_mut().zip(self.col(k)) {
                *o += a * x;
            }
        }
        out
    }

    /// `self^T * v`.
    pub fn tr_matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "tr_matvec dimension mismatch");
        (0..self.cols).map(|j| dot(self.col(j), v)).collect()
    }

    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Self {
        assert!(
            r0 + nr <= self.rows && c0 + nc <= self.cols,
            "block out of range"
        );
        Self::from_fn(nr, nc, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Self) {
        assert!(
            r0 + b.rows <= self.rows && c0 + b.cols <= self.cols,
            "set_block out of range"
        );
        for j in 0..b.cols {
            for i in 0..b.rows {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    pub fn hstack(parts: &[&Self]) -> Self {
        let rows = parts.first().map_or(0, |p| p.rows);
        assert!(parts.iter().all(|p| p.rows == rows), "hstack row mismatch");
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Self { rows, cols, data }
    }

    pub fn vstack(parts: &[&Self]) -> Self {
        let cols = parts.first().map_or(0, |p| p.cols);
        assert!(
            parts.iter().all(|p| p.cols == cols),
            "vstack column mismatch"
        );
        let rows = parts.iter().map(|p| p.rows).sum();
        let mut out = Self::zeros(rows, cols);
        let mut r0 = 0;
        for p in parts {
            out.set_block(r0, 0, p);
            r0 += p.rows;
        }
        out
    }

    /// `(self + self^T) / 2`.
    pub fn symmetric_part(&self) -> Self {
        assert!(self.is_square());
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |i, j| {
            (self[(i, j)] + self[(j, i)]) * half
        })
    }

    /// One line per row, 17 significant digits, no header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for i in 0..self.rows {
            for j in 0..self.cols {
                let sep = if j == 0 { "" } else { "," };
                write!(w, "{sep}{:.16e}", self[(i, j)])?;
            }
            writeln!(w)?;
        }
        w.flush()
    }

    /// Inverse of [`Mat::write_csv`]; blank lines are skipped.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self, MatError> {
        let mut rows = Vec::new();
        for (k, line) in r.lines().enumerate() {
            let line = line.map_err(|e| MatError::Parse(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|v| v.trim().parse::<f64>().map(T::lit))
                .collect::<Result<Vec<T>, _>>()
                .map_err(|e| MatError::Parse(format!("line {}: {e}", k + 1)))?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(MatError::Parse("no rows".into()));
        }
        Self::from_rows(&rows)
    }

    pub fn cast<U: Real>(&self) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::lit(x.as_f64())).collect(),
        }
    }
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm2<T: Real>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

impl<T: Real> Add for &Mat<T> {
    type Output = Mat<T>;
    fn add(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.shape(), rhs.shape(), "add shape mismatch");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a + b)
                .collect(),
        }
    }
}

impl<T: Real> Sub for &Mat<T> {
    type Output = Mat<T>;
    fn sub(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!(self.shape(), rhs.shape(), "sub shape mismatch");
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }
}

impl<T: Real> Mul for &Mat<T> {
    type Output = Mat<T>;
    fn mul(self, rhs: &Mat<T>) -> Mat<T> {
        self.matmul(rhs)
    }
}

impl<T: Real> Neg for &Mat<T> {
    type Output = Mat<T>;
    fn neg(self) -> Mat<T> {
        self.map(|x| -x)
    }
}

impl<T: fmt::Debug> fmt::Debug for Mat<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Mat {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols)
                .map(|j| format!("{:>12.5?}", self.data[i + j * self.rows]))
                .collect();
            writeln!(f, "  {}", row.join(" "))?;
        }
        write!(f, "]")
    }
}
