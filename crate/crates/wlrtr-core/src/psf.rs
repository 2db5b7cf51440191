//! Point spread functions and circular convolution.
//!
//! Boundary handling is circular everywhere so the frequency-domain solvers
//! diagonalize exactly. The kernel origin sits at `(floor(kh/2), floor(kw/2))`,
//! matching the usual psf-to-otf shift: a delta kernel gives an all-ones
//! transfer function and `convolve` becomes the identity.

use crate::error::{Result, WlrtrError};
use crate::tensor::{Matrix, Tensor3};

/// Normalized nonnegative blur kernel, shared by all bands.
#[derive(Debug, Clone)]
pub struct Psf {
    kernel: Matrix,
}

impl Psf {
    /// Validate and normalize a kernel: entries must be nonnegative with a
    /// positive sum; the stored kernel sums to one.
    pub fn normalized(kernel: Matrix) -> Result<Psf> {
        if kernel.data().iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(WlrtrError::InvalidConfig(
                "PSF entries must be finite and nonnegative".into(),
            ));
        }
        let sum: f64 = kernel.data().iter().sum();
        if sum <= 0.0 {
            return Err(WlrtrError::InvalidConfig("PSF must have a positive sum".into()));
        }
        let mut k = kernel;
        for r in 0..k.rows() {
            for c in 0..k.cols() {
                let v = k.get(r, c) / sum;
                k.set(r, c, v);
            }
        }
        Ok(Psf { kernel: k })
    }

    /// Identity kernel.
    pub fn delta() -> Psf {
        Psf {
            kernel: Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
        }
    }

    pub fn kernel(&self) -> &Matrix {
        &self.kernel
    }

    /// Kernel origin used by the circular wrap.
    pub(crate) fn center(&self) -> (usize, usize) {
        (self.kernel.rows() / 2, self.kernel.cols() / 2)
    }

    pub(crate) fn check_fits(&self, rows: usize, cols: usize) -> Result<()> {
        if self.kernel.rows() > rows || self.kernel.cols() > cols {
            return Err(WlrtrError::KernelTooLarge {
                krows: self.kernel.rows(),
                kcols: self.kernel.cols(),
                rows,
                cols,
            });
        }
        Ok(())
    }
}

#[inline]
fn wrap(i: isize, n: usize) -> usize {
    i.rem_euclid(n as isize) as usize
}

/// Per-band 2-D circular convolution with the kernel.
pub fn convolve(t: &Tensor3, psf: &Psf) -> Result<Tensor3> {
    let (rows, cols, bands) = t.dims();
    psf.check_fits(rows, cols)?;
    let (cr, cc) = psf.center();
    let k = psf.kernel();
    let mut out = Tensor3::zeros(rows, cols, bands);
    for b in 0..bands {
        for i in 0..rows {
            for j in 0..cols {
                let mut acc = 0.0;
                for a in 0..k.rows() {
                    for bb in 0..k.cols() {
                        let kv = k.get(a, bb);
                        if kv == 0.0 {
                            continue;
                        }
                        let si = wrap(i as isize - a as isize + cr as isize, rows);
                        let sj = wrap(j as isize - bb as isize + cc as isize, cols);
                        acc += kv * t.get(si, sj, b);
                    }
                }
                out.set(i, j, b, acc);
            }
        }
    }
    Ok(out)
}

/// Adjoint of [`convolve`]: per-band circular correlation with the kernel.
pub(crate) fn correlate(t: &Tensor3, psf: &Psf) -> Result<Tensor3> {
    let (rows, cols, bands) = t.dims();
    psf.check_fits(rows, cols)?;
    let (cr, cc) = psf.center();
    let k = psf.kernel();
    let mut out = Tensor3::zeros(rows, cols, bands);
    for b in 0..bands {
        for i in 0..rows {
            for j in 0..cols {
                let mut acc = 0.0;
                for a in 0..k.rows() {
                    for bb in 0..k.cols() {
                        let kv = k.get(a, bb);
                        if kv == 0.0 {
                            continue;
                        }
                        let si = wrap(i as isize + a as isize - cr as isize, rows);
                        let sj = wrap(j as isize + bb as isize - cc as isize, cols);
                        acc += kv * t.get(si, sj, b);
                    }
                }
                out.set(i, j, b, acc);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn delta_kernel_is_identity() {
        let t = Tensor3::from_fn(5, 4, 2, |i, j, k| (i * 13 + j * 7 + k) as f64);
        let out = convolve(&t, &Psf::delta()).unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn constant_image_is_preserved() {
        let t = Tensor3::from_fn(6, 6, 1, |_, _, _| 42.0);
        let k = Psf::normalized(Matrix::from_vec(3, 3, vec![1.0; 9]).unwrap()).unwrap();
        let out = convolve(&t, &k).unwrap();
        for &v in out.data() {
            assert!((v - 42.0).abs() < 1e-12);
        }
    }

    #[test]
    fn box_kernel_on_impulse_wraps() {
        let mut t = Tensor3::zeros(5, 5, 1);
        t.set(0, 0, 0, 1.0);
        let k = Psf::normalized(Matrix::from_vec(3, 3, vec![1.0; 9]).unwrap()).unwrap();
        let out = convolve(&t, &k).unwrap();
        // Direct spatial-domain oracle: the impulse spreads to a 3x3 plateau
        // centered at (0,0) with wrap-around.
        for i in 0..5usize {
            for j in 0..5usize {
                let di = (i as isize - 0).rem_euclid(5).min((0 - i as isize).rem_euclid(5));
                let dj = (j as isize - 0).rem_euclid(5).min((0 - j as isize).rem_euclid(5));
                let expected = if di <= 1 && dj <= 1 { 1.0 / 9.0 } else { 0.0 };
                assert!(
                    (out.get(i, j, 0) - expected).abs() < 1e-12,
                    "({}, {}) = {}",
                    i,
                    j,
                    out.get(i, j, 0)
                );
            }
        }
    }

    #[test]
    fn kernel_larger_than_image_errors() {
        let t = Tensor3::zeros(2, 2, 1);
        let k = Psf::normalized(Matrix::from_vec(3, 3, vec![1.0; 9]).unwrap()).unwrap();
        assert!(matches!(convolve(&t, &k), Err(WlrtrError::KernelTooLarge { .. })));
    }

    #[test]
    fn correlate_is_the_adjoint_of_convolve() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let k = Psf::normalized(
            Matrix::from_vec(3, 4, (0..12).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap(),
        )
        .unwrap();
        for _ in 0..20 {
            let a = Tensor3::from_vec(6, 5, 2, (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .unwrap();
            let b = Tensor3::from_vec(6, 5, 2, (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .unwrap();
            let lhs = convolve(&a, &k).unwrap().dot(&b);
            let rhs = a.dot(&correlate(&b, &k).unwrap());
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
        }
    }
}
