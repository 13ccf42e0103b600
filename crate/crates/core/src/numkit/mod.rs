//! Dense numeric kernel shared by every other module.
//!
//! Everything is `f64`; the oracle comparisons elsewhere in the crate run at
//! `1e-9` and would not survive single precision.

mod io;
mod mlp;
mod rng;

pub use io::{read_matrix, read_matrix_csv, read_matrix_fmat, write_matrix_csv, write_matrix_fmat};
pub use mlp::Mlp;
pub use rng::Rng;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{dim_err, Error, Result};

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self { rows, cols, data: vec![value; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m.data[i * n + i] = *v;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return dim_err(format!("{} values for a {rows}x{cols} matrix", data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. An empty outer list gives a 0x0 matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return dim_err(format!("row {i} has {} entries, expected {cols}", r.len()));
            }
            data.extend_from_slice(r);
        }
        Ok(Self { rows: rows.len(), cols, data })
    }

    pub fn column(values: &[f64]) -> Self {
        Self { rows: values.len(), cols: 1, data: values.to_vec() }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return dim_err(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            let out_row = &mut out.data[r * other.cols..(r + 1) * other.cols];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * other^T`, without materializing the transpose.
    pub fn matmul_t(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return dim_err(format!(
                "matmul_t {}x{} by ({}x{})^T",
                self.rows, self.cols, other.rows, other.cols
            ));
        }
        let mut out = Self::zeros(self.rows, other.rows);
        for r in 0..self.rows {
            let a = self.row(r);
            for c in 0..other.rows {
                out.data[r * other.rows + c] = dot(a, other.row(c));
            }
        }
        Ok(out)
    }

    /// `self * v`.
    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.cols != v.len() {
            return dim_err(format!("matvec {}x{} by vector of {}", self.rows, self.cols, v.len()));
        }
        Ok((0..self.rows).map(|r| dot(self.row(r), v)).collect())
    }

    /// `self^T * v`.
    pub fn t_matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if self.rows != v.len() {
            return dim_err(format!(
                "transposed matvec ({}x{})^T by vector of {}",
                self.rows,
                self.cols,
                v.len()
            ));
        }
        let mut out = vec![0.0; self.cols];
        for (r, &s) in v.iter().enumerate() {
            axpy(&mut out, s, self.row(r));
        }
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return dim_err(format!("add {:?} and {:?}", self.shape(), other.shape()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Self { rows: self.rows, cols: self.cols, data })
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest absolute elementwise difference; infinite when the shapes differ.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.shape() != other.shape() {
            return f64::INFINITY;
        }
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn hcat(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return dim_err(format!("hcat {:?} and {:?}", self.shape(), other.shape()));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(self.row(r));
            data.extend_from_slice(other.row(r));
        }
        Ok(Self { rows: self.rows, cols, data })
    }

    /// Vertical concatenation.
    pub fn vcat(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return dim_err(format!("vcat {:?} and {:?}", self.shape(), other.shape()));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self { rows: self.rows + other.rows, cols: self.cols, data })
    }

    /// Copies columns `start..end`.
    pub fn col_slice(&self, start: usize, end: usize) -> Self {
        let cols = end - start;
        let mut data = Vec::with_capacity(self.rows * cols);
        for r in 0..self.rows {
            data.extend_from_slice(&self.row(r)[start..end]);
        }
        Self { rows: self.rows, cols, data }
    }
}

impl Serialize for DenseMatrix {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(ser)
    }
}

impl<'de> Deserialize<'de> for DenseMatrix {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(de)?;
        DenseMatrix::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += a * x`
#[inline]
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Softmax with max subtraction.
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    masked_softmax(v, &vec![true; v.len()])
}

/// Softmax over the entries with `keep[i] == true`; masked entries come out as
/// exactly zero and their input values are ignored.
pub fn masked_softmax(v: &[f64], keep: &[bool]) -> Result<Vec<f64>> {
    if v.len() != keep.len() {
        return dim_err(format!("{} scores with {} mask flags", v.len(), keep.len()));
    }
    let max = v
        .iter()
        .zip(keep)
        .filter(|(_, k)| **k)
        .map(|(x, _)| *x)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::AllMasked);
    }
    if !max.is_finite() {
        return Err(Error::NonFinite("softmax input"));
    }
    let mut out: Vec<f64> =
        v.iter().zip(keep).map(|(x, k)| if *k { (x - max).exp() } else { 0.0 }).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= total);
    Ok(out)
}

/// Glorot/Xavier uniform initialization in `[-a, a]`, `a = sqrt(6 / (rows + cols))`.
pub fn glorot_init(rows: usize, cols: usize, rng: &mut Rng) -> DenseMatrix {
    let a = (6.0 / (rows + cols).max(1) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.uniform(-a, a)).collect();
    DenseMatrix { rows, cols, data }
}
