//! Weighted low-rank tensor recovery for hyperspectral and multichannel
//! image restoration.
//!
//! The library treats a hyperspectral image as a 3-order tensor and restores
//! it by stacking groups of non-local similar spatial-spectral cubics,
//! decomposing each group with a higher-order SVD, and soft-thresholding the
//! core coefficients with magnitude-adaptive weights. Four solvers share
//! that prior:
//!
//! - [`solver::denoise`] — random noise removal;
//! - [`solver::destripe`] — mixed random + stripe noise via a robust-PCA
//!   split with a column-structured sparsity norm;
//! - [`solver::deblur`] — non-blind deconvolution by ADMM with exact
//!   frequency-domain solves;
//! - [`solver::superres`] — fusion of a low spatial-resolution tensor with a
//!   high-resolution spectrally-reduced guide.
//!
//! Degradation simulators, quality indices (PSNR / SSIM / ERGAS / SAM), and
//! a small self-describing tensor file format round out the toolkit.

pub mod degradation;
pub mod error;
pub mod fft;
pub mod grouping;
pub mod hosvd;
pub mod io;
pub mod psf;
pub mod quality;
pub mod shrinkage;
pub mod solver;
pub mod tensor;

pub use error::{Result, WlrtrError};
pub use tensor::{Matrix, Mode, Tensor3};

pub use grouping::{
    aggregate, band_mean_image, build_group, key_positions, match_similar, CubicGroup,
    GroupingConfig,
};
pub use hosvd::{hosvd, matrix_svd, reconstruct, HosvdFactors, SvdResult};
pub use psf::{convolve, Psf};
pub use shrinkage::{
    compute_weights, matrix_wnn_shrink, shrink_core, wlrtr_approx, ShrinkParams, WeightTensor,
    WlrtrApprox,
};

pub use degradation::{
    add_gaussian_noise, add_stripes, make_kernel, DegradationSpec, KernelSpec, StripeMode,
};
pub use io::{
    export_band_images, load_matrix_text, load_raw_tensor, load_tensor, save_tensor,
};
pub use quality::{
    column_mean_bias, ergas, psnr, quality_report, sam, ssim, QualityReport,
};
pub use solver::deblur::{deblur, deblur_with_log, deconv_step, DeblurConfig};
pub use solver::denoise::{denoise, denoise_with_log, DenoiseConfig};
pub use solver::destripe::{
    destripe, destripe_with_log, shrink_l21_columns, update_stripes, DestripeConfig,
};
pub use solver::superres::{
    bilinear_upsample, downsample_spatial, downsample_spectral, spatial_step, spectral_step,
    superres, superres_with_log, SpectralResponse, SuperresConfig,
};
pub use solver::{IterationStat, SolverLog, WeightMode};
