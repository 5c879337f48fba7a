//! Dense row-major `f64` matrices and the handful of reductions the rest of
//! the crate needs.

use crate::error::{McaError, Result};

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data. Both dimensions must be positive
    /// and `data.len()` must equal `rows * cols`.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(McaError::Shape(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(McaError::Shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Like [`Matrix::new`] but additionally rejects NaN and infinities.
    pub fn new_finite(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(McaError::Domain(format!(
                "non-finite value at row {}, col {}",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Self::new(rows, cols, data)
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m.data[i * cols + j] = f(i, j);
            }
        }
        m
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if let Some(bad) = rows.iter().position(|r| r.as_ref().len() != cols) {
            return Err(McaError::Shape(format!(
                "row {bad} has length {}, expected {cols}",
                rows[bad].as_ref().len()
            )));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(rows.len(), cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Copies the column block `[start, start + width)`.
    pub fn column_block(&self, start: usize, width: usize) -> Result<Matrix> {
        if width == 0 || start + width > self.cols {
            return Err(McaError::Shape(format!(
                "column block [{start}, {}) outside {} columns",
                start + width,
                self.cols
            )));
        }
        Ok(Matrix::from_fn(self.rows, width, |i, j| self.get(i, start + j)))
    }

    /// Concatenates matrices with equal row counts along the column axis.
    pub fn hconcat(blocks: &[Matrix]) -> Result<Matrix> {
        let first = blocks
            .first()
            .ok_or_else(|| McaError::Shape("nothing to concatenate".into()))?;
        let rows = first.rows;
        if let Some(b) = blocks.iter().find(|b| b.rows != rows) {
            return Err(McaError::Shape(format!(
                "cannot concatenate {} rows with {rows} rows",
                b.rows
            )));
        }
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for b in blocks {
                data.extend_from_slice(b.row(i));
            }
        }
        Matrix::new(rows, cols, data)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        if self.shape() != other.shape() {
            return Err(McaError::Shape(format!(
                "cannot subtract {:?} from {:?}",
                other.shape(),
                self.shape()
            )));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Matrix::new(self.rows, self.cols, data)
    }

    pub fn scale(&self, factor: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn is_all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Exact dense product `a * b`.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(McaError::Shape(format!(
            "matmul {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for (k, &aik) in a.row(i).iter().enumerate() {
            axpy(aik, b.row(k), out_row);
        }
    }
    Ok(out)
}

/// Row vector times matrix, `x * m`.
pub fn vecmat(x: &[f64], m: &Matrix) -> Result<Vec<f64>> {
    if x.len() != m.rows {
        return Err(McaError::Shape(format!(
            "vector of length {} times {}x{} matrix",
            x.len(),
            m.rows,
            m.cols
        )));
    }
    let mut out = vec![0.0; m.cols];
    for (k, &xk) in x.iter().enumerate() {
        axpy(xk, m.row(k), &mut out);
    }
    Ok(out)
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn frobenius_norm(m: &Matrix) -> f64 {
    l2_norm(&m.data)
}

pub fn row_l2_norms(m: &Matrix) -> Vec<f64> {
    (0..m.rows).map(|i| l2_norm(m.row(i))).collect()
}

pub fn col_l2_norms(m: &Matrix) -> Vec<f64> {
    let mut sq = vec![0.0; m.cols];
    for i in 0..m.rows {
        for (s, v) in sq.iter_mut().zip(m.row(i)) {
            *s += v * v;
        }
    }
    sq.into_iter().map(f64::sqrt).collect()
}

/// Row-wise `softmax(scale * m)`, stabilized by subtracting each row's maximum.
pub fn softmax_rows(m: &Matrix, scale: f64) -> Matrix {
    let mut out = m.clone();
    for i in 0..m.rows {
        let row = out.row_mut(i);
        let max = row
            .iter()
            .map(|v| scale * v)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (scale * *v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

pub fn col_max(m: &Matrix, j: usize) -> Result<f64> {
    if j >= m.cols {
        return Err(McaError::IndexOutOfRange {
            index: j,
            len: m.cols,
        });
    }
    Ok((0..m.rows)
        .map(|i| m.get(i, j))
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Maximum of every column in one pass.
pub fn col_maxima(m: &Matrix) -> Vec<f64> {
    let mut max = vec![f64::NEG_INFINITY; m.cols];
    for i in 0..m.rows {
        for (mx, &v) in max.iter_mut().zip(m.row(i)) {
            *mx = mx.max(v);
        }
    }
    max
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn matmul_identity_and_zero() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(matmul(&Matrix::identity(2), &a).unwrap(), a);
        assert_eq!(matmul(&a, &Matrix::zeros(2, 2)).unwrap(), Matrix::zeros(2, 2));
    }

    #[test]
    fn matmul_hand_computed() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let b = m(&[&[5.0, 6.0], &[7.0, 8.0]]);
        assert_eq!(matmul(&a, &b).unwrap(), m(&[&[19.0, 22.0], &[43.0, 50.0]]));
    }

    #[test]
    fn matmul_shape_error() {
        let a = Matrix::zeros(2, 3);
        assert!(matches!(matmul(&a, &a), Err(McaError::Shape(_))));
    }

    #[test]
    fn constructor_rejects_bad_shapes() {
        assert!(Matrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::new(0, 2, vec![]).is_err());
        assert!(Matrix::new_finite(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn norms() {
        assert_eq!(frobenius_norm(&Matrix::zeros(2, 3)), 0.0);
        assert_eq!(frobenius_norm(&Matrix::identity(3)), 3f64.sqrt());
        assert_eq!(frobenius_norm(&m(&[&[3.0, 4.0]])), 5.0);

        assert_eq!(row_l2_norms(&Matrix::identity(2)), vec![1.0, 1.0]);
        assert_eq!(row_l2_norms(&m(&[&[3.0, 0.0], &[0.0, 4.0]])), vec![3.0, 4.0]);
        assert_eq!(row_l2_norms(&m(&[&[0.0, 0.0], &[1.0, 0.0]]))[0], 0.0);

        assert_eq!(col_l2_norms(&Matrix::identity(2)), vec![1.0, 1.0]);
        assert_eq!(col_l2_norms(&m(&[&[3.0, 0.0], &[4.0, 0.0]])), vec![5.0, 0.0]);
        assert_eq!(col_l2_norms(&Matrix::zeros(3, 2)), vec![0.0, 0.0]);
    }

    #[test]
    fn softmax_cases() {
        let s = softmax_rows(&m(&[&[2.5, 2.5, 2.5]]), 7.0);
        for &v in s.row(0) {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }

        let s = softmax_rows(&m(&[&[0.0, 3f64.ln()]]), 1.0);
        assert!((s.get(0, 0) - 0.25).abs() < 1e-15);
        assert!((s.get(0, 1) - 0.75).abs() < 1e-15);

        let s = softmax_rows(&m(&[&[0.0, 800.0]]), 1.0);
        assert!(s.get(0, 0) < 1e-300);
        assert_eq!(s.get(0, 1), 1.0);
    }

    #[test]
    fn col_max_cases() {
        assert_eq!(col_max(&Matrix::identity(2), 0).unwrap(), 1.0);
        assert_eq!(col_max(&m(&[&[0.1], &[0.9]]), 0).unwrap(), 0.9);
        let n = 5;
        let uniform = Matrix::from_fn(n, n, |_, _| 1.0 / n as f64);
        assert_eq!(col_max(&uniform, 3).unwrap(), 0.2);
        assert_eq!(
            col_max(&uniform, 5),
            Err(McaError::IndexOutOfRange { index: 5, len: 5 })
        );
        assert_eq!(col_maxima(&m(&[&[0.1, 0.7], &[0.9, 0.3]])), vec![0.9, 0.7]);
    }

    #[test]
    fn column_block_and_concat() {
        let a = Matrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64);
        let left = a.column_block(0, 2).unwrap();
        let right = a.column_block(2, 2).unwrap();
        assert_eq!(Matrix::hconcat(&[left, right]).unwrap(), a);
        assert!(a.column_block(3, 2).is_err());
    }

    fn finite_matrix(max_dim: usize, mag: f64) -> impl Strategy<Value = Matrix> {
        (1..=max_dim, 1..=max_dim).prop_flat_map(move |(r, c)| {
            prop::collection::vec(-mag..mag, r * c)
                .prop_map(move |data| Matrix::new(r, c, data).unwrap())
        })
    }

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one(m in finite_matrix(6, 1e3), scale in 0.01f64..2.0) {
            let s = softmax_rows(&m, scale);
            for i in 0..s.rows() {
                let sum: f64 = s.row(i).iter().sum();
                prop_assert!((sum - 1.0).abs() <= 1e-12);
                prop_assert!(s.row(i).iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }

        #[test]
        fn frobenius_matches_row_norms(m in finite_matrix(8, 100.0)) {
            let f2 = frobenius_norm(&m).powi(2);
            let r2: f64 = row_l2_norms(&m).iter().map(|v| v * v).sum();
            prop_assert!((f2 - r2).abs() <= 1e-10 * f2.max(f64::MIN_POSITIVE));
        }

        #[test]
        fn matmul_associative_on_small_integers(
            (p, q, r, s) in (1usize..5, 1usize..5, 1usize..5, 1usize..5),
            seed in any::<u64>(),
        ) {
            let mut state = seed;
            let mut next = move || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 33) % 21) as f64 - 10.0
            };
            let a = Matrix::from_fn(p, q, |_, _| next());
            let b = Matrix::from_fn(q, r, |_, _| next());
            let c = Matrix::from_fn(r, s, |_, _| next());
            let left = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
            let right = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
            prop_assert_eq!(left, right);
        }
    }
}
