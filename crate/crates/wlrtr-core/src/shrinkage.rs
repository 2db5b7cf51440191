//! Weighted low-rank tensor approximation.
//!
//! The closed-form subproblem solution: decompose a group tensor with HOSVD,
//! assign each core coefficient a weight inversely proportional to its
//! magnitude, and soft-threshold the coefficients at `w * sigma^2 / 2` before
//! reconstructing. Larger coefficients carry the major data components and
//! are penalized less; small ones are driven to zero.
//!
//! The threshold uses the noise variance exactly as written (no hidden
//! rescaling); any calibration happens through the constant `c`. With samples
//! on the 8-bit scale, useful denoising thresholds correspond to `c` well
//! above the literature default of 0.04 — see the solver docs.

use crate::error::Result;
use crate::hosvd::{hosvd, HosvdFactors};
use crate::tensor::{Matrix, Tensor3};

/// Nonnegative per-coefficient weights for a group core tensor.
pub type WeightTensor = Tensor3;

/// Parameters of the weighted shrinkage step.
#[derive(Debug, Clone)]
pub struct ShrinkParams {
    /// Weight scale constant. Default: 0.04.
    pub c: f64,
    /// Guard against division by zero in the weight rule. Default: 1e-6.
    pub eps: f64,
    /// Noise standard deviation of the group (8-bit scale).
    pub sigma: f64,
}

impl Default for ShrinkParams {
    fn default() -> Self {
        Self {
            c: 0.04,
            eps: 1e-6,
            sigma: 0.0,
        }
    }
}

impl ShrinkParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(crate::error::WlrtrError::InvalidConfig(format!(
                "shrinkage constant c must be positive, got {}",
                self.c
            )));
        }
        if !(self.eps > 0.0) {
            return Err(crate::error::WlrtrError::InvalidConfig(format!(
                "shrinkage eps must be positive, got {}",
                self.eps
            )));
        }
        if !(self.sigma >= 0.0) {
            return Err(crate::error::WlrtrError::InvalidConfig(format!(
                "noise sigma must be nonnegative, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Weight rule: `w = c / (|core| + eps)` elementwise.
pub fn compute_weights(core: &Tensor3, p: &ShrinkParams) -> WeightTensor {
    core.map(|s| p.c / (s.abs() + p.eps))
}

/// Soft-threshold the core at `w * sigma^2 / 2` per coefficient, applied to
/// magnitudes with the sign restored.
pub fn shrink_core(core: &Tensor3, weights: &WeightTensor, sigma: f64) -> Tensor3 {
    let half_var = sigma * sigma / 2.0;
    core.zip_map(weights, |s, w| {
        let shrunk = s.abs() - w * half_var;
        if shrunk > 0.0 {
            shrunk * s.signum()
        } else {
            0.0
        }
    })
}

/// Result of one weighted low-rank approximation of a group tensor.
#[derive(Debug, Clone)]
pub struct WlrtrApprox {
    /// Reconstructed low-rank approximation of the group.
    pub approx: Tensor3,
    /// Shrunk core tensor.
    pub core_hat: Tensor3,
    /// HOSVD of the input group (raw core and orthogonal factors).
    pub factors: HosvdFactors,
}

/// Weighted low-rank approximation of a stacked group tensor.
///
/// Weights come from the raw HOSVD core of the input in a single reweighting
/// pass; the outer solver loop supplies the recursion by feeding back
/// progressively cleaner groups.
pub fn wlrtr_approx(group: &Tensor3, p: &ShrinkParams) -> Result<WlrtrApprox> {
    p.validate()?;
    let factors = hosvd(group)?;
    if p.sigma == 0.0 {
        // Zero threshold: the subproblem solution is the input itself.
        return Ok(WlrtrApprox {
            approx: group.clone(),
            core_hat: factors.core.clone(),
            factors,
        });
    }
    let weights = compute_weights(&factors.core, p);
    let core_hat = shrink_core(&factors.core, &weights, p.sigma);
    let approx = factors.reconstruct_with(&core_hat)?;
    Ok(WlrtrApprox {
        approx,
        core_hat,
        factors,
    })
}

/// Matrix baseline: soft singular value thresholding `U max(S - lambda, 0) V^T`.
pub fn matrix_wnn_shrink(m: &Matrix, lambda: f64) -> Result<Matrix> {
    assert!(lambda >= 0.0, "lambda must be nonnegative");
    let (u_cols, sigmas, v_cols) = crate::hosvd::svd_econ(m)?;
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for (j, &s) in sigmas.iter().enumerate() {
        let shrunk = s - lambda;
        if shrunk <= 0.0 {
            // Descending order: everything after is shrunk away too.
            break;
        }
        for (r, &ur) in u_cols[j].iter().enumerate() {
            let w = ur * shrunk;
            if w == 0.0 {
                continue;
            }
            for (c, &vc) in v_cols[j].iter().enumerate() {
                let v = out.get(r, c) + w * vc;
                out.set(r, c, v);
            }
        }
    }
    Ok(out)
}
