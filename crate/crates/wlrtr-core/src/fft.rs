//! Small 2-D FFT layer over rustfft for the frequency-domain deconvolution.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::psf::Psf;

/// Planned forward/inverse transforms for one image size.
pub(crate) struct Fft2d {
    rows: usize,
    cols: usize,
    fwd_row: Arc<dyn Fft<f64>>,
    inv_row: Arc<dyn Fft<f64>>,
    fwd_col: Arc<dyn Fft<f64>>,
    inv_col: Arc<dyn Fft<f64>>,
}

impl Fft2d {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            fwd_row: planner.plan_fft_forward(cols),
            inv_row: planner.plan_fft_inverse(cols),
            fwd_col: planner.plan_fft_forward(rows),
            inv_col: planner.plan_fft_inverse(rows),
        }
    }

    fn transform(&self, buf: &mut [Complex<f64>], inverse: bool) {
        debug_assert_eq!(buf.len(), self.rows * self.cols);
        let row_fft = if inverse { &self.inv_row } else { &self.fwd_row };
        let col_fft = if inverse { &self.inv_col } else { &self.fwd_col };
        for r in 0..self.rows {
            row_fft.process(&mut buf[r * self.cols..(r + 1) * self.cols]);
        }
        let mut col = vec![Complex::new(0.0, 0.0); self.rows];
        for c in 0..self.cols {
            for r in 0..self.rows {
                col[r] = buf[r * self.cols + c];
            }
            col_fft.process(&mut col);
            for r in 0..self.rows {
                buf[r * self.cols + c] = col[r];
            }
        }
    }

    /// Forward transform of a real row-major plane.
    pub fn forward(&self, plane: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = plane.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.transform(&mut buf, false);
        buf
    }

    /// Inverse transform returning the real part (imaginary residue discarded).
    pub fn inverse_real(&self, mut freq: Vec<Complex<f64>>) -> Vec<f64> {
        self.transform(&mut freq, true);
        let scale = 1.0 / (self.rows * self.cols) as f64;
        freq.iter().map(|c| c.re * scale).collect()
    }

    /// Optical transfer function: FFT of the kernel zero-padded to the image
    /// size and circularly shifted so its origin lands at (0, 0).
    pub fn psf_otf(&self, psf: &Psf) -> Vec<Complex<f64>> {
        let k = psf.kernel();
        let (cr, cc) = psf.center();
        let mut plane = vec![0.0; self.rows * self.cols];
        for a in 0..k.rows() {
            for b in 0..k.cols() {
                let r = (a as isize - cr as isize).rem_euclid(self.rows as isize) as usize;
                let c = (b as isize - cc as isize).rem_euclid(self.cols as isize) as usize;
                plane[r * self.cols + c] += k.get(a, b);
            }
        }
        self.forward(&plane)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psf::convolve;
    use crate::tensor::{Matrix, Tensor3};

    #[test]
    fn roundtrip_recovers_plane() {
        let plane: Vec<f64> = (0..20).map(|v| v as f64 * 0.37 - 2.0).collect();
        let fft = Fft2d::new(4, 5);
        let back = fft.inverse_real(fft.forward(&plane));
        for (a, b) in back.iter().zip(plane.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_otf_is_all_ones() {
        let fft = Fft2d::new(6, 6);
        let otf = fft.psf_otf(&Psf::delta());
        for v in otf {
            assert!((v.re - 1.0).abs() < 1e-12 && v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn frequency_convolution_matches_spatial() {
        let k = Psf::normalized(
            Matrix::from_vec(3, 3, vec![1.0, 2.0, 1.0, 2.0, 4.0, 2.0, 1.0, 2.0, 1.0]).unwrap(),
        )
        .unwrap();
        let t = Tensor3::from_fn(8, 7, 1, |i, j, _| ((i * 11 + j * 3) % 17) as f64 - 8.0);
        let spatial = convolve(&t, &k).unwrap();
        let fft = Fft2d::new(8, 7);
        let otf = fft.psf_otf(&k);
        let mut freq = fft.forward(t.band(0).data());
        for (f, o) in freq.iter_mut().zip(otf.iter()) {
            *f *= o;
        }
        let back = fft.inverse_real(freq);
        for (a, b) in back.iter().zip(spatial.band(0).data().iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
