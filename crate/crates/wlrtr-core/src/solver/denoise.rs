//! Random noise removal.
//!
//! Each outer iteration regroups similar cubics on the current estimate,
//! shrinks every group in its HOSVD basis with the weighted soft threshold,
//! and rebuilds the image with the closed-form aggregation against the
//! original observation. The noise level fed to the shrinkage decays across
//! iterations following the usual iterative-regularization rule
//! `sigma_next = decay * sqrt(max(sigma0^2 - mean((y - x)^2), 0))`.

use std::time::Instant;

use crate::error::Result;
use crate::grouping::{aggregate, GroupingConfig};
use crate::shrinkage::ShrinkParams;
use crate::solver::{mean_sq_diff, patch_data_term, prior_pass, IterationStat, PriorPass, SolverLog, WeightMode};
use crate::tensor::Tensor3;

/// Denoising parameters.
#[derive(Debug, Clone)]
pub struct DenoiseConfig {
    pub grouping: GroupingConfig,
    /// Shrinkage parameters; `shrink.sigma` is the noise level of the input.
    pub shrink: ShrinkParams,
    /// Aggregation weight of the cubic prior. Default 0.1.
    pub eta: f64,
    /// Outer iterations. Default 4; the loop converges in a few steps.
    pub outer_iters: usize,
    /// Noise-level decay between iterations, in (0, 1]. Default 0.9.
    pub sigma_decay: f64,
    /// Adaptive weights (default) or the uniform-threshold ablation.
    pub weight_mode: WeightMode,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self {
            grouping: GroupingConfig::default(),
            shrink: ShrinkParams::default(),
            eta: 0.1,
            outer_iters: 4,
            sigma_decay: 0.9,
            weight_mode: WeightMode::Adaptive,
        }
    }
}

impl DenoiseConfig {
    pub fn validate(&self) -> Result<()> {
        self.grouping.validate()?;
        self.shrink.validate()?;
        if !(self.eta > 0.0) {
            return Err(crate::error::WlrtrError::InvalidConfig(format!(
                "eta must be positive, got {}",
                self.eta
            )));
        }
        if self.outer_iters == 0 {
            return Err(crate::error::WlrtrError::InvalidConfig(
                "outer_iters must be >= 1".into(),
            ));
        }
        if !(self.sigma_decay > 0.0 && self.sigma_decay <= 1.0) {
            return Err(crate::error::WlrtrError::InvalidConfig(format!(
                "sigma_decay must be in (0, 1], got {}",
                self.sigma_decay
            )));
        }
        Ok(())
    }
}

/// One grouping + shrinkage + aggregation pass of the denoiser against the
/// effective observation `y_eff`, shared with the destriping solver.
pub(crate) fn denoise_pass(
    y_eff: &Tensor3,
    x: &Tensor3,
    cfg: &DenoiseConfig,
    sigma: f64,
) -> Result<(Tensor3, PriorPass)> {
    let pass = prior_pass(x, &cfg.grouping, &cfg.shrink, sigma, cfg.weight_mode)?;
    let x_new = aggregate(&pass.pairs, y_eff, cfg.eta);
    Ok((x_new, pass))
}

/// Remove white noise from `y`; returns the restored tensor.
pub fn denoise(y: &Tensor3, cfg: &DenoiseConfig) -> Result<Tensor3> {
    denoise_with_log(y, cfg).map(|(x, _)| x)
}

/// Like [`denoise`], additionally returning per-iteration objectives.
pub fn denoise_with_log(y: &Tensor3, cfg: &DenoiseConfig) -> Result<(Tensor3, SolverLog)> {
    cfg.validate()?;
    let start = Instant::now();
    let sigma0 = cfg.shrink.sigma;
    let mut sigma_n = sigma0;
    let mut x = y.clone();
    let mut log = SolverLog::default();

    for n in 1..=cfg.outer_iters {
        let (x_new, pass) = denoise_pass(y, &x, cfg, sigma_n)?;
        x = x_new;

        let fidelity = 0.5 * y.sub(&x).fro_norm().powi(2);
        let data = patch_data_term(&x, &pass.pairs);
        let objective = fidelity + cfg.eta * (data + sigma_n * sigma_n * pass.weighted_core_l1);
        log.iterations.push(IterationStat {
            iteration: n,
            objective,
            sigma: sigma_n,
        });

        let removed = mean_sq_diff(y, &x);
        sigma_n = cfg.sigma_decay * (sigma0 * sigma0 - removed).max(0.0).sqrt();
    }
    log.wall = start.elapsed();
    Ok((x, log))
}
