//! Seeded degradation simulators: Gaussian noise, stripe noise, blur
//! kernels, and the composite spec describing a simulated acquisition.
//!
//! All simulators are deterministic per seed (ChaCha12 keyed by the 64-bit
//! seed). Samples are on the 8-bit scale but never clipped, so degraded
//! values may leave [0, 255].

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::psf::Psf;
use crate::tensor::{Matrix, Tensor3};

/// Blur kernel generator.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelSpec {
    /// Single-tap identity kernel.
    Delta,
    /// Isotropic Gaussian sampled at pixel centers on a `size x size` grid,
    /// centered at `(size - 1) / 2` (also for even sizes), normalized to sum 1.
    Gaussian { size: usize, std: f64 },
    /// Constant `1 / size^2` kernel.
    Uniform { size: usize },
}

/// Whether stripes add a per-column offset or scale the column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StripeMode {
    Additive,
    Multiplicative,
}

/// Full description of a simulated degradation.
#[derive(Debug, Clone)]
pub struct DegradationSpec {
    /// Gaussian noise standard deviation (8-bit scale).
    pub sigma: f64,
    /// Fraction of columns striped per band, in [0, 1].
    pub stripe_fraction: f64,
    /// Stripe amplitude: additive offsets are uniform in [-amp, amp];
    /// multiplicative factors are uniform in [1 - amp/255, 1 + amp/255].
    pub stripe_amp: f64,
    pub stripe_mode: StripeMode,
    pub kernel: KernelSpec,
    /// Spatial downsampling factor.
    pub scale: usize,
    pub seed: u64,
}

impl Default for DegradationSpec {
    fn default() -> Self {
        Self {
            sigma: 0.0,
            stripe_fraction: 0.3,
            stripe_amp: 50.0,
            stripe_mode: StripeMode::Additive,
            kernel: KernelSpec::Delta,
            scale: 1,
            seed: 0,
        }
    }
}

/// Add white Gaussian noise of standard deviation `sigma`, seeded.
pub fn add_gaussian_noise(t: &Tensor3, sigma: f64, seed: u64) -> Tensor3 {
    assert!(sigma >= 0.0, "sigma must be nonnegative");
    if sigma == 0.0 {
        return t.clone();
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).unwrap();
    t.map(|v| v + sigma * normal.sample(&mut rng))
}

/// Add stripe noise: per band, an independent seeded subset of columns gets
/// a constant offset (additive) or gain (multiplicative).
pub fn add_stripes(t: &Tensor3, spec: &DegradationSpec) -> Tensor3 {
    assert!(
        (0.0..=1.0).contains(&spec.stripe_fraction),
        "stripe fraction must be in [0, 1]"
    );
    let (rows, cols, bands) = t.dims();
    let n_sel = (spec.stripe_fraction * cols as f64).floor() as usize;
    if n_sel == 0 {
        return t.clone();
    }
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let mut out = t.clone();
    for k in 0..bands {
        let chosen = sample(&mut rng, cols, n_sel);
        for j in chosen {
            match spec.stripe_mode {
                StripeMode::Additive => {
                    let offset = rng.gen_range(-spec.stripe_amp..=spec.stripe_amp);
                    for i in 0..rows {
                        let v = out.get(i, j, k) + offset;
                        out.set(i, j, k, v);
                    }
                }
                StripeMode::Multiplicative => {
                    let half = spec.stripe_amp / 255.0;
                    let gain = rng.gen_range(1.0 - half..=1.0 + half);
                    for i in 0..rows {
                        let v = out.get(i, j, k) * gain;
                        out.set(i, j, k, v);
                    }
                }
            }
        }
    }
    out
}

/// Build a normalized PSF from a kernel spec.
pub fn make_kernel(spec: &KernelSpec) -> Result<Psf> {
    match spec {
        KernelSpec::Delta => Ok(Psf::delta()),
        KernelSpec::Uniform { size } => {
            assert!(*size >= 1, "kernel size must be >= 1");
            Psf::normalized(Matrix::from_vec(*size, *size, vec![1.0; size * size]).unwrap())
        }
        KernelSpec::Gaussian { size, std } => {
            assert!(*size >= 1, "kernel size must be >= 1");
            assert!(*std > 0.0, "gaussian std must be positive");
            let center = (*size as f64 - 1.0) / 2.0;
            let inv = 1.0 / (2.0 * std * std);
            let mut k = Matrix::zeros(*size, *size);
            for r in 0..*size {
                for c in 0..*size {
                    let dr = r as f64 - center;
                    let dc = c as f64 - center;
                    k.set(r, c, (-(dr * dr + dc * dc) * inv).exp());
                }
            }
            Psf::normalized(k)
        }
    }
}
