//! Mixed random + stripe noise removal.
//!
//! The observation splits as `Y = X + E + N`: a low-rank-groupable image, a
//! column-structured sparse error (the stripes), and white noise. Stripes run
//! along mode-1 fibers, so the sparse term is penalized with the L_{2,1,1}
//! norm of the mode-1 unfolding, whose proximal step is a column-wise block
//! soft threshold. The solver alternates that stripe update with one
//! denoising pass on the stripe-corrected observation.

use std::time::Instant;

use crate::error::Result;
use crate::solver::denoise::{denoise_pass, DenoiseConfig};
use crate::solver::{mean_sq_diff, patch_data_term, IterationStat, SolverLog};
use crate::tensor::{Matrix, Mode, Tensor3};

/// Destriping parameters.
#[derive(Debug, Clone)]
pub struct DestripeConfig {
    /// Inner denoiser settings (grouping, shrinkage, eta, sigma decay).
    /// Its own `outer_iters` is unused here; the alternation count below
    /// drives the loop.
    pub denoise: DenoiseConfig,
    /// Stripe sparsity weight: the column-norm threshold of the L_{2,1,1}
    /// proximal step.
    pub rho: f64,
    /// Alternations between the stripe update and the image update. Default 4.
    pub outer_iters: usize,
}

impl DestripeConfig {
    /// Default threshold `10 * sigma * sqrt(rows)`, scaling with the mode-1
    /// fiber length.
    pub fn default_rho(sigma: f64, rows: usize) -> f64 {
        10.0 * sigma * (rows as f64).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        self.denoise.validate()?;
        if !(self.rho > 0.0) {
            return Err(crate::error::WlrtrError::InvalidConfig(format!(
                "rho must be positive, got {}",
                self.rho
            )));
        }
        if self.outer_iters == 0 {
            return Err(crate::error::WlrtrError::InvalidConfig(
                "outer_iters must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Column-wise block soft threshold: each column is scaled by
/// `(||q|| - mu) / ||q||` when `mu <= ||q||`, otherwise zeroed.
pub fn shrink_l21_columns(m: &Matrix, mu: f64) -> Matrix {
    assert!(mu >= 0.0, "mu must be nonnegative");
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for c in 0..m.cols() {
        let norm = m.col_norm(c);
        if norm == 0.0 || norm < mu {
            continue;
        }
        let scale = (norm - mu) / norm;
        for r in 0..m.rows() {
            out.set(r, c, scale * m.get(r, c));
        }
    }
    out
}

/// Stripe estimate: block soft threshold of the residual's mode-1 unfolding.
///
/// Mode-1 is the only unfolding whose columns stay aligned with the vertical
/// stripe direction, so thresholding there keeps the directional structure.
pub fn update_stripes(y: &Tensor3, x: &Tensor3, rho: f64) -> Tensor3 {
    assert_eq!(y.dims(), x.dims(), "update_stripes shape");
    let residual = y.sub(x);
    let shrunk = shrink_l21_columns(&residual.unfold(Mode::One), rho);
    Tensor3::fold(&shrunk, Mode::One, y.dims()).expect("fold of own unfolding")
}

/// Remove mixed random and stripe noise; returns `(image, stripes)`.
pub fn destripe(y: &Tensor3, cfg: &DestripeConfig) -> Result<(Tensor3, Tensor3)> {
    destripe_with_log(y, cfg).map(|(x, e, _)| (x, e))
}

/// Like [`destripe`], additionally returning per-iteration objectives.
pub fn destripe_with_log(
    y: &Tensor3,
    cfg: &DestripeConfig,
) -> Result<(Tensor3, Tensor3, SolverLog)> {
    cfg.validate()?;
    let start = Instant::now();
    // Each alternation runs one fresh denoising pass at the configured noise
    // level; the stripes migrate into E across alternations, so the level is
    // held constant rather than re-estimated (the decay recursion belongs to
    // the pure denoiser's own outer loop).
    let sigma = cfg.denoise.shrink.sigma;
    let mut x = y.clone();
    let mut e = Tensor3::zeros(y.rows(), y.cols(), y.bands());
    let mut log = SolverLog::default();

    for n in 1..=cfg.outer_iters {
        e = update_stripes(y, &x, cfg.rho);
        let y_eff = y.sub(&e);
        let (x_new, pass) = denoise_pass(&y_eff, &x, &cfg.denoise, sigma)?;
        x = x_new;

        let fidelity = 0.5 * y.sub(&x).sub(&e).fro_norm().powi(2);
        let data = patch_data_term(&x, &pass.pairs);
        let objective = fidelity
            + cfg.rho * e.l211_norm()
            + cfg.denoise.eta * (data + sigma * sigma * pass.weighted_core_l1);
        log.iterations.push(IterationStat {
            iteration: n,
            objective,
            sigma,
        });
    }
    log.wall = start.elapsed();
    Ok((x, e, log))
}
