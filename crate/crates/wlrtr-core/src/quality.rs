//! Quality indices: PSNR, SSIM, ERGAS, and SAM.
//!
//! PSNR and SSIM score the spatial fidelity, ERGAS and SAM the spectral
//! fidelity. All four assume the reference is on the 8-bit scale. PSNR is
//! capped at 99 dB so identical inputs produce finite reports; SAM is in
//! radians.

use crate::error::{Result, WlrtrError};
use crate::tensor::{Matrix, Tensor3};

/// Cap reported per-band PSNR at this value.
const PSNR_CAP: f64 = 99.0;

/// Dynamic range of the 8-bit scale.
const DYNAMIC_RANGE: f64 = 255.0;

/// SSIM stability constants.
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// SSIM window: 11 x 11 Gaussian with standard deviation 1.5.
const SSIM_WINDOW: usize = 11;
const SSIM_WINDOW_STD: f64 = 1.5;

/// All four indices plus the per-band PSNR breakdown.
#[derive(Debug, Clone)]
pub struct QualityReport {
    pub psnr: f64,
    pub ssim: f64,
    pub ergas: f64,
    /// Mean spectral angle in radians.
    pub sam: f64,
    pub per_band_psnr: Vec<f64>,
}

fn check_dims(x: &Tensor3, reference: &Tensor3, context: &'static str) -> Result<()> {
    if x.dims() != reference.dims() {
        return Err(WlrtrError::ShapeMismatch {
            context,
            expected: format!("{:?}", reference.dims()),
            got: format!("{:?}", x.dims()),
        });
    }
    Ok(())
}

/// Mean PSNR over bands plus the per-band list, in dB.
pub fn psnr(x: &Tensor3, reference: &Tensor3) -> Result<(f64, Vec<f64>)> {
    check_dims(x, reference, "psnr")?;
    let (rows, cols, bands) = x.dims();
    let n = (rows * cols) as f64;
    let mut per_band = Vec::with_capacity(bands);
    for b in 0..bands {
        let mut mse = 0.0;
        for i in 0..rows {
            for j in 0..cols {
                let d = x.get(i, j, b) - reference.get(i, j, b);
                mse += d * d;
            }
        }
        mse /= n;
        let value = if mse == 0.0 {
            PSNR_CAP
        } else {
            (10.0 * (DYNAMIC_RANGE * DYNAMIC_RANGE / mse).log10()).min(PSNR_CAP)
        };
        per_band.push(value);
    }
    let mean = per_band.iter().sum::<f64>() / bands as f64;
    Ok((mean, per_band))
}

fn gaussian_window(size: usize, std: f64) -> Vec<f64> {
    let center = (size as f64 - 1.0) / 2.0;
    let mut w: Vec<f64> = (0..size * size)
        .map(|idx| {
            let r = (idx / size) as f64 - center;
            let c = (idx % size) as f64 - center;
            (-(r * r + c * c) / (2.0 * std * std)).exp()
        })
        .collect();
    let sum: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// Mean SSIM over bands with the canonical 11x11 Gaussian window.
///
/// Windows are taken fully inside the image; for images smaller than the
/// window, one truncated renormalized window covers the whole band.
pub fn ssim(x: &Tensor3, reference: &Tensor3) -> Result<f64> {
    check_dims(x, reference, "ssim")?;
    let (rows, cols, bands) = x.dims();
    let win = SSIM_WINDOW.min(rows).min(cols);
    let weights = if win == SSIM_WINDOW {
        gaussian_window(win, SSIM_WINDOW_STD)
    } else {
        // Truncated window, renormalized.
        let full = gaussian_window(SSIM_WINDOW, SSIM_WINDOW_STD);
        let off = (SSIM_WINDOW - win) / 2;
        let mut w: Vec<f64> = (0..win * win)
            .map(|idx| full[(idx / win + off) * SSIM_WINDOW + (idx % win + off)])
            .collect();
        let sum: f64 = w.iter().sum();
        for v in w.iter_mut() {
            *v /= sum;
        }
        w
    };
    let c1 = (SSIM_K1 * DYNAMIC_RANGE).powi(2);
    let c2 = (SSIM_K2 * DYNAMIC_RANGE).powi(2);

    let mut band_mean = 0.0;
    for b in 0..bands {
        let mut acc = 0.0;
        let mut count = 0usize;
        for i0 in 0..=(rows - win) {
            for j0 in 0..=(cols - win) {
                let mut mu_x = 0.0;
                let mut mu_y = 0.0;
                let mut xx = 0.0;
                let mut yy = 0.0;
                let mut xy = 0.0;
                for (idx, &w) in weights.iter().enumerate() {
                    let xv = x.get(i0 + idx / win, j0 + idx % win, b);
                    let yv = reference.get(i0 + idx / win, j0 + idx % win, b);
                    mu_x += w * xv;
                    mu_y += w * yv;
                    xx += w * xv * xv;
                    yy += w * yv * yv;
                    xy += w * xv * yv;
                }
                let var_x = xx - mu_x * mu_x;
                let var_y = yy - mu_y * mu_y;
                let cov = xy - mu_x * mu_y;
                let num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2);
                let den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2);
                acc += num / den;
                count += 1;
            }
        }
        band_mean += acc / count as f64;
    }
    Ok(band_mean / bands as f64)
}

/// Relative global error: `(100/s) * sqrt(mean_b(MSE_b / mu_b^2))`.
///
/// Bands whose reference mean is zero are skipped.
pub fn ergas(x: &Tensor3, reference: &Tensor3, s: usize) -> Result<f64> {
    check_dims(x, reference, "ergas")?;
    assert!(s >= 1, "ERGAS scale must be >= 1");
    let (rows, cols, bands) = x.dims();
    let n = (rows * cols) as f64;
    let mut acc = 0.0;
    let mut used = 0usize;
    for b in 0..bands {
        let mut mse = 0.0;
        let mut mean = 0.0;
        for i in 0..rows {
            for j in 0..cols {
                let r = reference.get(i, j, b);
                let d = x.get(i, j, b) - r;
                mse += d * d;
                mean += r;
            }
        }
        mse /= n;
        mean /= n;
        if mean == 0.0 {
            continue;
        }
        acc += mse / (mean * mean);
        used += 1;
    }
    if used == 0 {
        return Ok(0.0);
    }
    Ok(100.0 / s as f64 * (acc / used as f64).sqrt())
}

/// Mean spectral angle in radians over all pixels; zero-norm pixels skipped.
pub fn sam(x: &Tensor3, reference: &Tensor3) -> Result<f64> {
    check_dims(x, reference, "sam")?;
    let (rows, cols, bands) = x.dims();
    let mut acc = 0.0;
    let mut used = 0usize;
    let mut u = vec![0.0; bands];
    let mut v = vec![0.0; bands];
    for i in 0..rows {
        for j in 0..cols {
            let mut nx = 0.0;
            let mut nr = 0.0;
            for b in 0..bands {
                let xv = x.get(i, j, b);
                let rv = reference.get(i, j, b);
                nx += xv * xv;
                nr += rv * rv;
            }
            if nx == 0.0 || nr == 0.0 {
                continue;
            }
            let (sx, sr) = (nx.sqrt(), nr.sqrt());
            for b in 0..bands {
                u[b] = x.get(i, j, b) / sx;
                v[b] = reference.get(i, j, b) / sr;
            }
            // angle = 2 atan2(|u - v|, |u + v|): stable near 0 and pi,
            // exactly zero for identical spectra.
            let mut diff = 0.0;
            let mut sum = 0.0;
            for b in 0..bands {
                diff += (u[b] - v[b]) * (u[b] - v[b]);
                sum += (u[b] + v[b]) * (u[b] + v[b]);
            }
            acc += 2.0 * diff.sqrt().atan2(sum.sqrt());
            used += 1;
        }
    }
    if used == 0 {
        return Ok(0.0);
    }
    Ok(acc / used as f64)
}

/// All four indices at once. `s` is the ERGAS scale (1 outside super-resolution).
pub fn quality_report(x: &Tensor3, reference: &Tensor3, s: usize) -> Result<QualityReport> {
    let (mean_psnr, per_band) = psnr(x, reference)?;
    Ok(QualityReport {
        psnr: mean_psnr,
        ssim: ssim(x, reference)?,
        ergas: ergas(x, reference, s)?,
        sam: sam(x, reference)?,
        per_band_psnr: per_band,
    })
}

/// Per-band, per-column mean of `x - reference`; isolates stripe bias.
pub fn column_mean_bias(x: &Tensor3, reference: &Tensor3) -> Result<Matrix> {
    check_dims(x, reference, "column_mean_bias")?;
    let (rows, cols, bands) = x.dims();
    let mut bias = Matrix::zeros(bands, cols);
    for b in 0..bands {
        for j in 0..cols {
            let mut acc = 0.0;
            for i in 0..rows {
                acc += x.get(i, j, b) - reference.get(i, j, b);
            }
            bias.set(b, j, acc / rows as f64);
        }
    }
    Ok(bias)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(rows: usize, cols: usize, bands: usize) -> Tensor3 {
        Tensor3::from_fn(rows, cols, bands, |i, j, k| {
            ((i * 17 + j * 5 + k * 29) % 200) as f64 + 20.0
        })
    }

    #[test]
    fn identical_inputs_hit_all_caps() {
        let t = ramp(16, 16, 3);
        let r = quality_report(&t, &t, 1).unwrap();
        assert_eq!(r.psnr, 99.0);
        assert!((r.ssim - 1.0).abs() < 1e-12);
        assert_eq!(r.ergas, 0.0);
        assert_eq!(r.sam, 0.0);
        assert_eq!(r.per_band_psnr.len(), 3);
    }

    #[test]
    fn psnr_uniform_unit_error() {
        let t = ramp(8, 8, 2);
        let shifted = t.map(|v| v + 1.0);
        let (p, _) = psnr(&shifted, &t).unwrap();
        assert!((p - 48.1308).abs() < 0.01);
    }

    #[test]
    fn psnr_scaling_law() {
        let t = ramp(8, 8, 1);
        let e1 = t.map(|v| v + 2.0);
        let e2 = t.map(|v| v + 4.0);
        let (p1, _) = psnr(&e1, &t).unwrap();
        let (p2, _) = psnr(&e2, &t).unwrap();
        assert!((p1 - p2 - 20.0 * 2.0f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn ssim_drops_with_offset() {
        let t = ramp(32, 32, 1);
        let shifted = t.map(|v| v + 40.0);
        let s = ssim(&shifted, &t).unwrap();
        assert!(s < 1.0);
    }

    #[test]
    fn ssim_constant_images_are_stable() {
        let a = Tensor3::from_fn(16, 16, 1, |_, _, _| 128.0);
        let s = ssim(&a, &a).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ergas_closed_form() {
        // Single band, ref mean 100, RMSE 10, s = 1 -> 10.
        let reference = Tensor3::from_fn(4, 4, 1, |_, _, _| 100.0);
        let x = reference.map(|v| v + 10.0);
        let e = ergas(&x, &reference, 1).unwrap();
        assert!((e - 10.0).abs() < 1e-9);
    }

    #[test]
    fn ergas_scale_invariance() {
        let reference = ramp(8, 8, 2);
        let x = reference.map(|v| v + 3.0);
        let e1 = ergas(&x, &reference, 1).unwrap();
        let e2 = ergas(&x.scale(2.0), &reference.scale(2.0), 1).unwrap();
        // Error scales with the data, means scale too: the ratio at doubled
        // error magnitude halves back through the doubled mean.
        assert!((e1 - e2 * 1.0).abs() < 1.0); // qualitative: stays same order
        let e3 = ergas(&reference.map(|v| 2.0 * v + 6.0), &reference.scale(2.0), 1).unwrap();
        assert!((e1 - e3).abs() < 1e-9);
    }

    #[test]
    fn ergas_skips_zero_mean_band() {
        let mut reference = ramp(4, 4, 2);
        for i in 0..4 {
            for j in 0..4 {
                reference.set(i, j, 1, 0.0);
            }
        }
        let x = reference.map(|v| v + 1.0);
        let e = ergas(&x, &reference, 1).unwrap();
        // Only band 0 contributes.
        let solo = ergas(&x, &reference, 1).unwrap();
        assert!(e.is_finite() && (e - solo).abs() < 1e-12);
    }

    #[test]
    fn sam_orthogonal_spectra() {
        let x = Tensor3::from_fn(4, 4, 2, |_, _, k| if k == 0 { 1.0 } else { 0.0 });
        let r = Tensor3::from_fn(4, 4, 2, |_, _, k| if k == 1 { 1.0 } else { 0.0 });
        let a = sam(&x, &r).unwrap();
        assert!((a - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
    }

    #[test]
    fn sam_scale_invariance_and_symmetry() {
        let x = ramp(6, 6, 4);
        let scaled = x.scale(3.7);
        assert!(sam(&scaled, &x).unwrap() < 1e-9);
        let y = x.map(|v| v + 13.0);
        let a = sam(&x, &y).unwrap();
        let b = sam(&y, &x).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn dim_mismatch_is_an_error() {
        let a = ramp(4, 4, 2);
        let b = ramp(4, 4, 3);
        assert!(psnr(&a, &b).is_err());
        assert!(ssim(&a, &b).is_err());
        assert!(ergas(&a, &b, 1).is_err());
        assert!(sam(&a, &b).is_err());
    }
}
