//! Dense 3-order tensor and matrix containers.
//!
//! [`Tensor3`] stores samples band-sequentially (band outermost, row-major
//! within a band) in 64-bit floats. All unfolding and folding conventions
//! are defined relative to that layout, so serialized tensors are
//! bit-reproducible. Values are immutable once a tensor leaves a public
//! operation; every operation here is a pure function.

use crate::error::{Result, WlrtrError};

/// Tensor mode selector for unfolding, folding, and n-mode products.
///
/// Mode 1 runs along rows, mode 2 along columns, mode 3 along bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    One,
    Two,
    Three,
}

impl Mode {
    /// All three modes, in order.
    pub const ALL: [Mode; 3] = [Mode::One, Mode::Two, Mode::Three];

    fn size_of(self, dims: (usize, usize, usize)) -> usize {
        match self {
            Mode::One => dims.0,
            Mode::Two => dims.1,
            Mode::Three => dims.2,
        }
    }
}

/// Dense 3-order tensor of `rows x cols x bands` real samples.
///
/// Entry `(i, j, k)` lives at `data[k*rows*cols + i*cols + j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    rows: usize,
    cols: usize,
    bands: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    /// Zero tensor of the given dimensions.
    pub fn zeros(rows: usize, cols: usize, bands: usize) -> Self {
        Self {
            rows,
            cols,
            bands,
            data: vec![0.0; rows * cols * bands],
        }
    }

    /// Build a tensor from a band-sequential, row-major buffer.
    ///
    /// Rejects empty dimensions, wrong buffer lengths, and non-finite samples.
    pub fn from_vec(rows: usize, cols: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || bands == 0 {
            return Err(WlrtrError::EmptyDimension { rows, cols, bands });
        }
        let expected = rows * cols * bands;
        if data.len() != expected {
            return Err(WlrtrError::DataLength {
                rows,
                cols,
                bands,
                expected,
                got: data.len(),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(WlrtrError::NonFinite {
                context: "Tensor3::from_vec",
            });
        }
        Ok(Self {
            rows,
            cols,
            bands,
            data,
        })
    }

    /// Build a tensor by evaluating `f(i, j, k)` at every entry.
    pub fn from_fn(
        rows: usize,
        cols: usize,
        bands: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut t = Self::zeros(rows, cols, bands);
        for k in 0..bands {
            for i in 0..rows {
                for j in 0..cols {
                    let v = f(i, j, k);
                    t.data[k * rows * cols + i * cols + j] = v;
                }
            }
        }
        t
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// `(rows, cols, bands)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.bands)
    }

    /// Raw band-sequential buffer.
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub(crate) fn index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.rows && j < self.cols && k < self.bands);
        k * self.rows * self.cols + i * self.cols + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = v;
    }

    /// One band as a `rows x cols` matrix.
    pub fn band(&self, k: usize) -> Matrix {
        let plane = self.rows * self.cols;
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data[k * plane..(k + 1) * plane].to_vec(),
        }
    }

    /// Overwrite one band from a `rows x cols` matrix.
    pub(crate) fn set_band(&mut self, k: usize, m: &Matrix) {
        assert_eq!((m.rows, m.cols), (self.rows, self.cols), "band shape");
        let plane = self.rows * self.cols;
        self.data[k * plane..(k + 1) * plane].copy_from_slice(&m.data);
    }

    /// Mode-n matricization: columns are the mode-n fibers, enumerated with
    /// the lower remaining index varying fastest.
    pub fn unfold(&self, mode: Mode) -> Matrix {
        let (r, c, b) = self.dims();
        match mode {
            Mode::One => {
                // rows x (cols*bands), column j + k*cols
                let mut m = Matrix::zeros(r, c * b);
                for k in 0..b {
                    for i in 0..r {
                        for j in 0..c {
                            m.data[i * (c * b) + (j + k * c)] = self.get(i, j, k);
                        }
                    }
                }
                m
            }
            Mode::Two => {
                // cols x (rows*bands), column i + k*rows
                let mut m = Matrix::zeros(c, r * b);
                for k in 0..b {
                    for i in 0..r {
                        for j in 0..c {
                            m.data[j * (r * b) + (i + k * r)] = self.get(i, j, k);
                        }
                    }
                }
                m
            }
            Mode::Three => {
                // bands x (rows*cols), column i + j*rows
                let mut m = Matrix::zeros(b, r * c);
                for k in 0..b {
                    for i in 0..r {
                        for j in 0..c {
                            m.data[k * (r * c) + (i + j * r)] = self.get(i, j, k);
                        }
                    }
                }
                m
            }
        }
    }

    /// Inverse of [`Tensor3::unfold`] under the same column convention.
    pub fn fold(m: &Matrix, mode: Mode, dims: (usize, usize, usize)) -> Result<Tensor3> {
        let (r, c, b) = dims;
        let lead = mode.size_of(dims);
        let rest = r * c * b / lead.max(1);
        if lead == 0 || m.rows != lead || m.cols != rest {
            return Err(WlrtrError::ShapeMismatch {
                context: "fold",
                expected: format!("{}x{} for dims {}x{}x{}", lead, rest, r, c, b),
                got: format!("{}x{}", m.rows, m.cols),
            });
        }
        let mut t = Tensor3::zeros(r, c, b);
        for k in 0..b {
            for i in 0..r {
                for j in 0..c {
                    let v = match mode {
                        Mode::One => m.data[i * (c * b) + (j + k * c)],
                        Mode::Two => m.data[j * (r * b) + (i + k * r)],
                        Mode::Three => m.data[k * (r * c) + (i + j * r)],
                    };
                    t.data[k * r * c + i * c + j] = v;
                }
            }
        }
        Ok(t)
    }

    /// n-mode product: multiply by `m` along `mode`.
    ///
    /// `unfold(result, mode) = m * unfold(self, mode)`; the mode size is
    /// replaced by `m.rows()`.
    pub fn nmode_product(&self, m: &Matrix, mode: Mode) -> Result<Tensor3> {
        let lead = mode.size_of(self.dims());
        if m.cols != lead {
            return Err(WlrtrError::ShapeMismatch {
                context: "nmode_product",
                expected: format!("matrix with {} columns", lead),
                got: format!("{}x{}", m.rows, m.cols),
            });
        }
        let unfolded = self.unfold(mode);
        let product = m.matmul(&unfolded);
        let new_dims = match mode {
            Mode::One => (m.rows, self.cols, self.bands),
            Mode::Two => (self.rows, m.rows, self.bands),
            Mode::Three => (self.rows, self.cols, m.rows),
        };
        Tensor3::fold(&product, mode, new_dims)
    }

    /// Frobenius norm: square root of the sum of squared entries.
    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Entrywise L1 norm.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    /// L_{2,1,1} norm: sum over bands and columns of the L2 norms of the
    /// mode-1 fibers. Promotes column-structured (stripe) sparsity.
    pub fn l211_norm(&self) -> f64 {
        let mut total = 0.0;
        for k in 0..self.bands {
            for j in 0..self.cols {
                let mut sq = 0.0;
                for i in 0..self.rows {
                    let v = self.get(i, j, k);
                    sq += v * v;
                }
                total += sq.sqrt();
            }
        }
        total
    }

    // --- elementwise arithmetic -------------------------------------------

    /// Apply `f` to every entry.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Tensor3 {
        Tensor3 {
            rows: self.rows,
            cols: self.cols,
            bands: self.bands,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Combine two same-shaped tensors entrywise.
    pub fn zip_map(&self, other: &Tensor3, f: impl Fn(f64, f64) -> f64) -> Tensor3 {
        assert_eq!(self.dims(), other.dims(), "zip_map shape");
        Tensor3 {
            rows: self.rows,
            cols: self.cols,
            bands: self.bands,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn add(&self, other: &Tensor3) -> Tensor3 {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor3) -> Tensor3 {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Tensor3 {
        self.map(|v| v * s)
    }

    /// `self + s * other`, the axpy building block of the multiplier updates.
    pub fn add_scaled(&self, other: &Tensor3, s: f64) -> Tensor3 {
        self.zip_map(other, |a, b| a + s * b)
    }

    /// Inner product of two same-shaped tensors.
    pub fn dot(&self, other: &Tensor3) -> f64 {
        assert_eq!(self.dims(), other.dims(), "dot shape");
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| a * b)
            .sum()
    }
}

/// Dense row-major matrix of real samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
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

    /// Build from a row-major buffer; validates length and finiteness.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(WlrtrError::ShapeMismatch {
                context: "Matrix::from_vec",
                expected: format!("{} entries", rows * cols),
                got: format!("{}", data.len()),
            });
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(WlrtrError::NonFinite {
                context: "Matrix::from_vec",
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.data[r * self.cols + c] = v;
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// `self * other`, naive ikj loop; the matrices here are small.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul shape");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(row.iter()) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Euclidean norm of column `c`.
    pub fn col_norm(&self, c: usize) -> f64 {
        (0..self.rows)
            .map(|r| {
                let v = self.get(r, c);
                v * v
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Columns as owned vectors; used by the Jacobi SVD working set.
    pub(crate) fn to_columns(&self) -> Vec<Vec<f64>> {
        (0..self.cols)
            .map(|c| (0..self.rows).map(|r| self.get(r, c)).collect())
            .collect()
    }

    pub(crate) fn from_columns(cols: &[Vec<f64>]) -> Matrix {
        let ncols = cols.len();
        let nrows = if ncols == 0 { 0 } else { cols[0].len() };
        let mut m = Matrix::zeros(nrows, ncols);
        for (c, col) in cols.iter().enumerate() {
            assert_eq!(col.len(), nrows, "ragged columns");
            for (r, &v) in col.iter().enumerate() {
                m.data[r * ncols + c] = v;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tensor_strategy(max: usize) -> impl Strategy<Value = Tensor3> {
        (1..=max, 1..=max, 1..=max).prop_flat_map(|(r, c, b)| {
            proptest::collection::vec(-100.0..100.0f64, r * c * b)
                .prop_map(move |data| Tensor3::from_vec(r, c, b, data).unwrap())
        })
    }

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(matches!(
            Tensor3::from_vec(2, 2, 2, vec![0.0; 7]),
            Err(WlrtrError::DataLength { .. })
        ));
    }

    #[test]
    fn from_vec_rejects_nan() {
        assert!(matches!(
            Tensor3::from_vec(1, 1, 1, vec![f64::NAN]),
            Err(WlrtrError::NonFinite { .. })
        ));
    }

    #[test]
    fn unfold_degenerate_1x1x1() {
        let t = Tensor3::from_vec(1, 1, 1, vec![5.0]).unwrap();
        let m = t.unfold(Mode::One);
        assert_eq!((m.rows(), m.cols()), (1, 1));
        assert_eq!(m.get(0, 0), 5.0);
    }

    #[test]
    fn unfold_mode1_fiber_set() {
        // x_{ijk} = i + 2j + 4k with 1-based indices.
        let t = Tensor3::from_fn(2, 2, 2, |i, j, k| {
            (i + 1) as f64 + 2.0 * (j + 1) as f64 + 4.0 * (k + 1) as f64
        });
        let m = t.unfold(Mode::One);
        assert_eq!((m.rows(), m.cols()), (2, 4));
        // Enumerate all four mode-1 fibers by hand and compare as a set.
        let mut expected: Vec<Vec<f64>> = Vec::new();
        for k in 0..2 {
            for j in 0..2 {
                expected.push((0..2).map(|i| t.get(i, j, k)).collect());
            }
        }
        let mut actual: Vec<Vec<f64>> = (0..4)
            .map(|c| (0..2).map(|r| m.get(r, c)).collect())
            .collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        actual.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(expected, actual);
    }

    #[test]
    fn fold_zero_matrix_gives_zero_tensor() {
        let m = Matrix::zeros(3, 20);
        let t = Tensor3::fold(&m, Mode::One, (3, 4, 5)).unwrap();
        assert!(t.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fold_shape_mismatch_errors() {
        let m = Matrix::zeros(3, 19);
        assert!(matches!(
            Tensor3::fold(&m, Mode::One, (3, 4, 5)),
            Err(WlrtrError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn fold_degenerate_mode1_row() {
        let m = Matrix::from_vec(1, 6, (0..6).map(|v| v as f64).collect()).unwrap();
        let t = Tensor3::fold(&m, Mode::One, (1, 3, 2)).unwrap();
        for k in 0..2 {
            for j in 0..3 {
                assert_eq!(t.get(0, j, k), m.get(0, j + k * 3));
            }
        }
    }

    #[test]
    fn nmode_identity_is_noop() {
        let t = Tensor3::from_fn(3, 4, 2, |i, j, k| (i * 8 + j * 2 + k) as f64);
        for mode in Mode::ALL {
            let n = mode.size_of(t.dims());
            let r = t.nmode_product(&Matrix::identity(n), mode).unwrap();
            assert_eq!(r, t);
        }
    }

    #[test]
    fn nmode_scalar_scaling_mode3() {
        let t = Tensor3::from_fn(2, 2, 2, |i, j, k| (i + j + k) as f64 + 1.0);
        let mut m = Matrix::identity(2);
        m.set(0, 0, 2.0);
        m.set(1, 1, 2.0);
        let r = t.nmode_product(&m, Mode::Three).unwrap();
        for (a, b) in r.data().iter().zip(t.data().iter()) {
            assert_eq!(*a, 2.0 * *b);
        }
    }

    #[test]
    fn nmode_matches_unfolded_product() {
        // Direct oracle: unfold(result, mode) = M * unfold(t, mode).
        let t = Tensor3::from_fn(3, 3, 3, |i, j, k| ((i * 7 + j * 3 + k * 11) % 13) as f64 - 6.0);
        let m = Matrix::from_vec(2, 3, vec![0.5, -1.0, 2.0, 1.5, 0.25, -0.75]).unwrap();
        let r = t.nmode_product(&m, Mode::One).unwrap();
        let lhs = r.unfold(Mode::One);
        let rhs = m.matmul(&t.unfold(Mode::One));
        for (a, b) in lhs.data().iter().zip(rhs.data().iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn nmode_dim_mismatch_errors() {
        let t = Tensor3::zeros(3, 4, 5);
        let m = Matrix::zeros(2, 7);
        assert!(t.nmode_product(&m, Mode::One).is_err());
    }

    #[test]
    fn norms_hand_cases() {
        let zero = Tensor3::zeros(2, 3, 4);
        assert_eq!(zero.fro_norm(), 0.0);
        assert_eq!(zero.l1_norm(), 0.0);
        assert_eq!(zero.l211_norm(), 0.0);

        let single = Tensor3::from_vec(1, 1, 1, vec![3.0]).unwrap();
        assert_eq!(single.fro_norm(), 3.0);
        assert_eq!(single.l1_norm(), 3.0);

        let t = Tensor3::from_vec(2, 1, 1, vec![3.0, 4.0]).unwrap();
        assert_eq!(t.fro_norm(), 5.0);
        assert_eq!(t.l1_norm(), 7.0);
        // One nonzero column fiber [3, 4] -> L211 = 5.
        assert_eq!(t.l211_norm(), 5.0);
    }

    #[test]
    fn l211_absolute_homogeneity() {
        let t = Tensor3::from_fn(3, 2, 2, |i, j, k| (i + 2 * j + k) as f64 - 2.0);
        let lam = 2.5;
        let scaled = t.scale(lam);
        assert!((scaled.l211_norm() - lam * t.l211_norm()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn roundtrip_fold_unfold(t in tensor_strategy(5)) {
            for mode in Mode::ALL {
                let back = Tensor3::fold(&t.unfold(mode), mode, t.dims()).unwrap();
                // Bit-exact: pure data movement.
                prop_assert!(back.data().iter().zip(t.data().iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
            }
        }

        #[test]
        fn unfold_preserves_fro_norm(t in tensor_strategy(5)) {
            for mode in Mode::ALL {
                prop_assert!((t.unfold(mode).fro_norm() - t.fro_norm()).abs() <= 1e-9 * (1.0 + t.fro_norm()));
            }
        }

        #[test]
        fn l211_dominates_fro(t in tensor_strategy(5)) {
            prop_assert!(t.l211_norm() >= t.fro_norm() - 1e-9);
        }
    }
}
