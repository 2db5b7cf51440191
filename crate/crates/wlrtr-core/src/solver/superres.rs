//! Fusion super-resolution.
//!
//! Two observations constrain the target: a spatially degraded tensor
//! `Y = downsample(blur(X))` and a spectrally reduced high-resolution guide
//! `Z = X x3 P`. ADMM splits both fidelities from the cubic prior with
//! auxiliary variables `Q` and `G`. The spatial subproblem is solved
//! matrix-free by conjugate gradient on the normal equations (the operator's
//! adjoint is zero-insertion upsampling followed by correlation with the
//! kernel); the spectral subproblem factors one small symmetric
//! positive-definite system shared by every pixel.

use std::time::Instant;

use crate::error::{Result, WlrtrError};
use crate::grouping::{aggregate_weighted, GroupingConfig};
use crate::psf::{convolve, correlate, Psf};
use crate::shrinkage::ShrinkParams;
use crate::solver::{patch_data_term, prior_pass, IterationStat, PriorPass, SolverLog, WeightMode};
use crate::tensor::{Matrix, Mode, Tensor3};

/// Spectral response matrix mapping B bands to b output channels.
#[derive(Debug, Clone)]
pub struct SpectralResponse {
    p: Matrix,
}

impl SpectralResponse {
    /// Validate a response: nonnegative entries, each row summing to one,
    /// and no more output channels than input bands.
    pub fn new(p: Matrix) -> Result<Self> {
        if p.rows() > p.cols() {
            return Err(WlrtrError::InvalidConfig(format!(
                "spectral response must not increase band count ({}x{})",
                p.rows(),
                p.cols()
            )));
        }
        if p.data().iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(WlrtrError::InvalidConfig(
                "spectral response entries must be finite and nonnegative".into(),
            ));
        }
        for r in 0..p.rows() {
            let sum: f64 = (0..p.cols()).map(|c| p.get(r, c)).sum();
            if (sum - 1.0).abs() > 1e-8 {
                return Err(WlrtrError::InvalidConfig(format!(
                    "spectral response row {} sums to {}, expected 1",
                    r, sum
                )));
            }
        }
        Ok(Self { p })
    }

    /// Generic response: `channels` contiguous band groups with uniform
    /// weights (an RGB-like reduction when `channels = 3`).
    pub fn band_average(bands: usize, channels: usize) -> Result<Self> {
        if channels == 0 || channels > bands {
            return Err(WlrtrError::InvalidConfig(format!(
                "cannot map {} bands to {} channels",
                bands, channels
            )));
        }
        let mut p = Matrix::zeros(channels, bands);
        for r in 0..channels {
            let lo = r * bands / channels;
            let hi = (r + 1) * bands / channels;
            let w = 1.0 / (hi - lo) as f64;
            for c in lo..hi {
                p.set(r, c, w);
            }
        }
        Ok(Self { p })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.p
    }

    pub fn channels(&self) -> usize {
        self.p.rows()
    }

    pub fn bands(&self) -> usize {
        self.p.cols()
    }
}

/// Super-resolution parameters.
#[derive(Debug, Clone)]
pub struct SuperresConfig {
    /// Aggregation weight of the cubic prior. Default 1e-5.
    pub eta: f64,
    /// Initial spatial penalty. Default 1e-3.
    pub beta0: f64,
    /// Initial spectral penalty. Default 1e-3.
    pub gamma0: f64,
    /// Penalty growth per iteration, > 1. Default 1.5.
    pub delta: f64,
    /// Spatial downsampling factor.
    pub scale: usize,
    /// Outer ADMM iterations. Default 15.
    pub outer_iters: usize,
    /// Relative residual target of the conjugate-gradient solve. Default 1e-6.
    pub cg_tol: f64,
    /// Iteration cap of the conjugate-gradient solve. Default 200.
    pub cg_max_iters: usize,
    pub shrink: ShrinkParams,
    pub grouping: GroupingConfig,
}

impl Default for SuperresConfig {
    fn default() -> Self {
        Self {
            eta: 1e-5,
            beta0: 1e-3,
            gamma0: 1e-3,
            delta: 1.5,
            scale: 1,
            outer_iters: 15,
            cg_tol: 1e-6,
            cg_max_iters: 200,
            shrink: ShrinkParams::default(),
            grouping: GroupingConfig::default(),
        }
    }
}

impl SuperresConfig {
    pub fn validate(&self) -> Result<()> {
        self.grouping.validate()?;
        self.shrink.validate()?;
        if !(self.eta > 0.0) || !(self.beta0 > 0.0) || !(self.gamma0 > 0.0) {
            return Err(WlrtrError::InvalidConfig(
                "eta, beta0, gamma0 must be positive".into(),
            ));
        }
        if !(self.delta > 1.0) {
            return Err(WlrtrError::InvalidConfig(format!(
                "delta must exceed 1, got {}",
                self.delta
            )));
        }
        if self.scale == 0 || self.outer_iters == 0 {
            return Err(WlrtrError::InvalidConfig(
                "scale and outer_iters must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Blur per band, then keep samples at `(s*i, s*j)` anchored at the top-left.
pub fn downsample_spatial(t: &Tensor3, psf: &Psf, s: usize) -> Result<Tensor3> {
    let (rows, cols, bands) = t.dims();
    if s == 0 || rows % s != 0 || cols % s != 0 {
        return Err(WlrtrError::InvalidConfig(format!(
            "dims {}x{} not divisible by scale {}",
            rows, cols, s
        )));
    }
    let blurred = convolve(t, psf)?;
    let mut out = Tensor3::zeros(rows / s, cols / s, bands);
    for b in 0..bands {
        for i in 0..rows / s {
            for j in 0..cols / s {
                out.set(i, j, b, blurred.get(i * s, j * s, b));
            }
        }
    }
    Ok(out)
}

/// Spectral reduction `t x3 P`.
pub fn downsample_spectral(t: &Tensor3, sr: &SpectralResponse) -> Result<Tensor3> {
    t.nmode_product(sr.matrix(), Mode::Three)
}

/// Adjoint of [`downsample_spatial`]: zero-insertion upsampling followed by
/// correlation with the kernel.
fn downsample_spatial_adjoint(
    y: &Tensor3,
    psf: &Psf,
    s: usize,
    dims: (usize, usize, usize),
) -> Result<Tensor3> {
    let (rows, cols, bands) = dims;
    debug_assert_eq!(y.bands(), bands);
    let mut up = Tensor3::zeros(rows, cols, bands);
    for b in 0..bands {
        for i in 0..y.rows() {
            for j in 0..y.cols() {
                up.set(i * s, j * s, b, y.get(i, j, b));
            }
        }
    }
    correlate(&up, psf)
}

/// Separable bilinear interpolation per band, anchored at index 0.
pub fn bilinear_upsample(t: &Tensor3, s: usize) -> Tensor3 {
    assert!(s >= 1);
    let (rows, cols, bands) = t.dims();
    let (out_rows, out_cols) = (rows * s, cols * s);
    Tensor3::from_fn(out_rows, out_cols, bands, |i, j, b| {
        let fi = i as f64 / s as f64;
        let fj = j as f64 / s as f64;
        let i0 = fi.floor() as usize;
        let j0 = fj.floor() as usize;
        let i1 = (i0 + 1).min(rows - 1);
        let j1 = (j0 + 1).min(cols - 1);
        let wi = fi - i0 as f64;
        let wj = fj - j0 as f64;
        (1.0 - wi) * (1.0 - wj) * t.get(i0, j0, b)
            + (1.0 - wi) * wj * t.get(i0, j1, b)
            + wi * (1.0 - wj) * t.get(i1, j0, b)
            + wi * wj * t.get(i1, j1, b)
    })
}

fn cg_solve(
    apply: impl Fn(&Tensor3) -> Result<Tensor3>,
    rhs: &Tensor3,
    x0: &Tensor3,
    tol: f64,
    max_iters: usize,
) -> Result<Tensor3> {
    let b_norm = rhs.fro_norm();
    if b_norm == 0.0 {
        return Ok(Tensor3::zeros(rhs.rows(), rhs.cols(), rhs.bands()));
    }
    let mut x = x0.clone();
    let mut r = rhs.sub(&apply(&x)?);
    let mut p = r.clone();
    let mut rs_old = r.dot(&r);
    for _ in 0..max_iters {
        if rs_old.sqrt() <= tol * b_norm {
            return Ok(x);
        }
        let ap = apply(&p)?;
        let pap = p.dot(&ap);
        if pap.abs() < 1e-300 {
            break;
        }
        let step = rs_old / pap;
        x = x.add_scaled(&p, step);
        r = r.add_scaled(&ap, -step);
        let rs_new = r.dot(&r);
        p = r.add_scaled(&p, rs_new / rs_old);
        rs_old = rs_new;
    }
    if rs_old.sqrt() <= tol * b_norm {
        Ok(x)
    } else {
        Err(WlrtrError::CgDidNotConverge {
            residual: rs_old.sqrt() / b_norm,
            iters: max_iters,
        })
    }
}

/// Spatial ADMM subproblem: solve `(T^T T + beta I) Q = T^T(Y) + beta X + J1`
/// per band by matrix-free conjugate gradient.
pub fn spatial_step(
    y: &Tensor3,
    x: &Tensor3,
    j1: &Tensor3,
    psf: &Psf,
    s: usize,
    beta: f64,
    cg_tol: f64,
    cg_max_iters: usize,
) -> Result<Tensor3> {
    assert!(beta > 0.0, "beta must be positive");
    let dims = x.dims();
    let rhs_full = downsample_spatial_adjoint(y, psf, s, dims)?
        .add(&x.scale(beta))
        .add(j1);
    let (rows, cols, bands) = dims;
    let mut out = Tensor3::zeros(rows, cols, bands);
    for b in 0..bands {
        let plane = |t: &Tensor3| {
            Tensor3::from_vec(
                rows,
                cols,
                1,
                t.band(b).data().to_vec(),
            )
            .expect("band plane")
        };
        let rhs_b = plane(&rhs_full);
        let x0_b = plane(x);
        let apply = |v: &Tensor3| -> Result<Tensor3> {
            let down = downsample_spatial(v, psf, s)?;
            let back = downsample_spatial_adjoint(&down, psf, s, (rows, cols, 1))?;
            Ok(back.add(&v.scale(beta)))
        };
        let q_b = cg_solve(apply, &rhs_b, &x0_b, cg_tol, cg_max_iters)?;
        out.set_band(b, &q_b.band(0));
    }
    Ok(out)
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
fn cholesky(m: &Matrix) -> Result<Matrix> {
    let n = m.rows();
    assert_eq!(n, m.cols());
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = m.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(WlrtrError::InvalidConfig(
                        "spectral system is not positive definite".into(),
                    ));
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Ok(l)
}

fn cholesky_solve(l: &Matrix, b: &mut [f64]) {
    let n = l.rows();
    for i in 0..n {
        let mut v = b[i];
        for k in 0..i {
            v -= l.get(i, k) * b[k];
        }
        b[i] = v / l.get(i, i);
    }
    for i in (0..n).rev() {
        let mut v = b[i];
        for k in (i + 1)..n {
            v -= l.get(k, i) * b[k];
        }
        b[i] = v / l.get(i, i);
    }
}

/// Spectral ADMM subproblem: solve `G x3 (P^T P + gamma I) = Z x3 P^T +
/// gamma X + J2` with one shared Cholesky factorization along mode 3.
pub fn spectral_step(
    z: &Tensor3,
    x: &Tensor3,
    j2: &Tensor3,
    sr: &SpectralResponse,
    gamma: f64,
) -> Result<Tensor3> {
    assert!(gamma > 0.0, "gamma must be positive");
    let p = sr.matrix();
    let bands = p.cols();
    let rhs = z
        .nmode_product(&p.transpose(), Mode::Three)?
        .add(&x.scale(gamma))
        .add(j2);
    let mut system = p.transpose().matmul(p);
    for i in 0..bands {
        let v = system.get(i, i) + gamma;
        system.set(i, i, v);
    }
    let l = cholesky(&system)?;
    let unfolded = rhs.unfold(Mode::Three);
    let mut solved = Matrix::zeros(bands, unfolded.cols());
    let mut col = vec![0.0; bands];
    for c in 0..unfolded.cols() {
        for r in 0..bands {
            col[r] = unfolded.get(r, c);
        }
        cholesky_solve(&l, &mut col);
        for r in 0..bands {
            solved.set(r, c, col[r]);
        }
    }
    Tensor3::fold(&solved, Mode::Three, rhs.dims())
}

/// Fuse the low spatial-resolution tensor `y` with the high-resolution
/// spectrally reduced guide `z`.
pub fn superres(
    y: &Tensor3,
    z: &Tensor3,
    psf: &Psf,
    sr: &SpectralResponse,
    cfg: &SuperresConfig,
) -> Result<Tensor3> {
    superres_with_log(y, z, psf, sr, cfg).map(|(x, _)| x)
}

/// Like [`superres`], additionally returning per-iteration objectives.
pub fn superres_with_log(
    y: &Tensor3,
    z: &Tensor3,
    psf: &Psf,
    sr: &SpectralResponse,
    cfg: &SuperresConfig,
) -> Result<(Tensor3, SolverLog)> {
    cfg.validate()?;
    let s = cfg.scale;
    let (rows, cols, bands) = (y.rows() * s, y.cols() * s, y.bands());
    if z.dims() != (rows, cols, sr.channels()) || sr.bands() != bands {
        return Err(WlrtrError::ShapeMismatch {
            context: "superres",
            expected: format!("guide {}x{}x{}", rows, cols, sr.channels()),
            got: format!("{:?}", z.dims()),
        });
    }
    let start = Instant::now();
    let sigma_eff = if cfg.shrink.sigma > 0.0 {
        cfg.shrink.sigma
    } else {
        1.0
    };
    let mut x = bilinear_upsample(y, s);
    let mut j1 = Tensor3::zeros(rows, cols, bands);
    let mut j2 = Tensor3::zeros(rows, cols, bands);
    let mut beta = cfg.beta0;
    let mut gamma = cfg.gamma0;
    let mut prior: Option<PriorPass> = None;
    let mut log = SolverLog::default();

    for n in 1..=cfg.outer_iters {
        let q = spatial_step(y, &x, &j1, psf, s, beta, cfg.cg_tol, cfg.cg_max_iters)?;
        let g = spectral_step(z, &x, &j2, sr, gamma)?;
        let t1 = q.add_scaled(&j1, -1.0 / beta);
        let t2 = g.add_scaled(&j2, -1.0 / gamma);
        x = match &prior {
            Some(p) => {
                aggregate_weighted(&p.pairs, &[(beta, &t1), (gamma, &t2)], 2.0 * cfg.eta)
            }
            None => aggregate_weighted(&[], &[(beta, &t1), (gamma, &t2)], 2.0 * cfg.eta),
        };
        let pass = prior_pass(&x, &cfg.grouping, &cfg.shrink, sigma_eff, WeightMode::Adaptive)?;

        let spatial_fid = 0.5
            * y.sub(&downsample_spatial(&x, psf, s)?)
                .fro_norm()
                .powi(2);
        let spectral_fid = 0.5 * z.sub(&downsample_spectral(&x, sr)?).fro_norm().powi(2);
        let data = patch_data_term(&x, &pass.pairs);
        let objective = spatial_fid
            + spectral_fid
            + cfg.eta * (data + sigma_eff * sigma_eff * pass.weighted_core_l1);
        log.iterations.push(IterationStat {
            iteration: n,
            objective,
            sigma: sigma_eff,
        });

        j1 = j1.add(&x.sub(&q).scale(beta));
        j2 = j2.add(&x.sub(&g).scale(gamma));
        beta *= cfg.delta;
        gamma *= cfg.delta;
        prior = Some(pass);
    }
    log.wall = start.elapsed();
    Ok((x, log))
}
