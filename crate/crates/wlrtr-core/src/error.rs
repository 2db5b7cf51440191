//! Error types shared across the crate.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, WlrtrError>;

/// Errors emitted by tensor containers, decompositions, solvers, and I/O.
#[derive(Debug, Error)]
pub enum WlrtrError {
    /// Data buffer length does not match the stated dimensions.
    #[error("data length {got} does not match {rows}x{cols}x{bands} = {expected}")]
    DataLength {
        rows: usize,
        cols: usize,
        bands: usize,
        expected: usize,
        got: usize,
    },

    /// A dimension is zero where a positive size is required.
    #[error("dimensions must be positive, got {rows}x{cols}x{bands}")]
    EmptyDimension {
        rows: usize,
        cols: usize,
        bands: usize,
    },

    /// Shapes of two operands are incompatible.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },

    /// A non-finite sample (NaN or infinity) was found where finite data is required.
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    /// A configuration value violates its documented range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Jacobi SVD did not reach the off-diagonal tolerance.
    #[error("SVD did not converge after {sweeps} sweeps (off-diagonal {off_diag:.3e})")]
    SvdConvergence { sweeps: usize, off_diag: f64 },

    /// Conjugate gradient stopped above the requested residual.
    #[error("conjugate gradient did not converge: relative residual {residual:.3e} after {iters} iterations")]
    CgDidNotConverge { residual: f64, iters: usize },

    /// A patch position would read outside the image.
    #[error("patch at ({row}, {col}) with size {patch} exceeds {rows}x{cols} image bounds")]
    PatchOutOfBounds {
        row: usize,
        col: usize,
        patch: usize,
        rows: usize,
        cols: usize,
    },

    /// Blur kernel is larger than the image it should act on.
    #[error("kernel {krows}x{kcols} does not fit in {rows}x{cols} image")]
    KernelTooLarge {
        krows: usize,
        kcols: usize,
        rows: usize,
        cols: usize,
    },

    /// Tensor file does not start with the expected magic bytes.
    #[error("bad magic: not a HST1 tensor file")]
    BadMagic,

    /// Tensor file payload is shorter than the header promises.
    #[error("truncated tensor file: expected {expected} payload bytes, found {got}")]
    Truncated { expected: u64, got: u64 },

    /// Header dimensions overflow the addressable payload size.
    #[error("tensor dimensions overflow addressable size")]
    DimOverflow,

    /// Unknown dtype code in a tensor file header.
    #[error("unsupported dtype code {0}")]
    UnsupportedDtype(u8),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
