//! Non-local similar cubic search, group tensor construction, and
//! overlapping-cubic aggregation.
//!
//! A cubic is an `m x m x B` spatial-spectral patch. Matching runs on the
//! band-mean image of the current estimate (cheap and resistant to noise);
//! restoration always works on the full cubics. Each key cubic is stacked
//! with its k nearest neighbors into an `m^2 x (k+1) x B` tensor whose three
//! modes carry local spatial structure, non-local redundancy, and spectral
//! correlation.

use crate::error::{Result, WlrtrError};
use crate::tensor::{Matrix, Tensor3};

/// Parameters of the non-local cubic search.
#[derive(Debug, Clone)]
pub struct GroupingConfig {
    /// Patch side length m. Default 7; useful range 6..=8.
    pub patch: usize,
    /// Number of matched neighbors k (key excluded). Default 140; useful range 100..=200.
    pub k: usize,
    /// Search window radius around the key position. Default 20.
    pub window: usize,
    /// Step between key cubics. Default 4.
    pub stride: usize,
}

impl Default for GroupingConfig {
    fn default() -> Self {
        Self {
            patch: 7,
            k: 140,
            window: 20,
            stride: 4,
        }
    }
}

impl GroupingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch == 0 || self.patch > self.window {
            return Err(WlrtrError::InvalidConfig(format!(
                "patch size {} must be in 1..=window ({})",
                self.patch, self.window
            )));
        }
        if self.stride == 0 {
            return Err(WlrtrError::InvalidConfig("stride must be >= 1".into()));
        }
        if self.k == 0 {
            return Err(WlrtrError::InvalidConfig("neighbor count k must be >= 1".into()));
        }
        Ok(())
    }
}

/// A key cubic, its matched member positions, and the stacked group tensor.
#[derive(Debug, Clone)]
pub struct CubicGroup {
    /// Top-left position of the key cubic.
    pub key_pos: (usize, usize),
    /// Member positions; member 0 is the key. May repeat when the window
    /// holds fewer candidates than requested.
    pub member_pos: Vec<(usize, usize)>,
    /// Group tensor of dims `m^2 x member count x bands`; mode-1 runs over
    /// the patch offsets row-major, mode-2 over members, mode-3 over bands.
    pub group: Tensor3,
}

/// Mean over bands, the 2-D matching image.
pub fn band_mean_image(t: &Tensor3) -> Matrix {
    let (rows, cols, bands) = t.dims();
    let mut m = Matrix::zeros(rows, cols);
    for k in 0..bands {
        for i in 0..rows {
            for j in 0..cols {
                let v = m.get(i, j) + t.get(i, j, k);
                m.set(i, j, v);
            }
        }
    }
    let inv = 1.0 / bands as f64;
    for i in 0..rows {
        for j in 0..cols {
            let v = m.get(i, j) * inv;
            m.set(i, j, v);
        }
    }
    m
}

/// Key positions on a regular stride grid, with the last valid row and
/// column forced so the image is fully covered.
pub fn key_positions(rows: usize, cols: usize, patch: usize, stride: usize) -> Vec<(usize, usize)> {
    assert!(patch <= rows && patch <= cols, "patch exceeds image");
    let axis = |len: usize| -> Vec<usize> {
        let last = len - patch;
        let mut v: Vec<usize> = (0..=last).step_by(stride).collect();
        if *v.last().unwrap() != last {
            v.push(last);
        }
        v
    };
    let rs = axis(rows);
    let cs = axis(cols);
    let mut keys = Vec::with_capacity(rs.len() * cs.len());
    for &r in &rs {
        for &c in &cs {
            keys.push((r, c));
        }
    }
    keys
}

fn patch_ssd(img: &Matrix, a: (usize, usize), b: (usize, usize), m: usize) -> f64 {
    let mut acc = 0.0;
    for dr in 0..m {
        for dc in 0..m {
            let d = img.get(a.0 + dr, a.1 + dc) - img.get(b.0 + dr, b.1 + dc);
            acc += d * d;
        }
    }
    acc
}

/// Rank the k nearest cubics to `key` inside the search window.
///
/// Returns `k + 1` positions with the key first, the rest ordered by
/// ascending sum of squared differences on the mean image, ties broken by
/// ascending row-major linear index. When the window holds fewer candidates
/// than requested, positions repeat cyclically from the ranked list.
pub fn match_similar(
    mean_img: &Matrix,
    key: (usize, usize),
    cfg: &GroupingConfig,
) -> Vec<(usize, usize)> {
    let m = cfg.patch;
    let (rows, cols) = (mean_img.rows(), mean_img.cols());
    debug_assert!(key.0 + m <= rows && key.1 + m <= cols, "key out of bounds");

    let r_lo = key.0.saturating_sub(cfg.window);
    let r_hi = (key.0 + cfg.window).min(rows - m);
    let c_lo = key.1.saturating_sub(cfg.window);
    let c_hi = (key.1 + cfg.window).min(cols - m);

    let mut candidates: Vec<(f64, usize, (usize, usize))> = Vec::new();
    for r in r_lo..=r_hi {
        for c in c_lo..=c_hi {
            if (r, c) == key {
                continue;
            }
            let d = patch_ssd(mean_img, key, (r, c), m);
            candidates.push((d, r * cols + c, (r, c)));
        }
    }
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    let mut ranked = Vec::with_capacity(cfg.k + 1);
    ranked.push(key);
    ranked.extend(candidates.iter().take(cfg.k).map(|&(_, _, pos)| pos));
    // Cyclic fill for sparse windows.
    let base = ranked.len();
    let mut i = 0;
    while ranked.len() < cfg.k + 1 {
        ranked.push(ranked[i % base]);
        i += 1;
    }
    ranked
}

/// Stack the cubics at `positions` into a group tensor.
pub fn build_group(t: &Tensor3, positions: &[(usize, usize)], patch: usize) -> Result<CubicGroup> {
    let (rows, cols, bands) = t.dims();
    for &(r, c) in positions {
        if r + patch > rows || c + patch > cols {
            return Err(WlrtrError::PatchOutOfBounds {
                row: r,
                col: c,
                patch,
                rows,
                cols,
            });
        }
    }
    let members = positions.len();
    let mut group = Tensor3::zeros(patch * patch, members, bands);
    for (j, &(r, c)) in positions.iter().enumerate() {
        for b in 0..bands {
            for dr in 0..patch {
                for dc in 0..patch {
                    group.set(dr * patch + dc, j, b, t.get(r + dr, c + dc, b));
                }
            }
        }
    }
    Ok(CubicGroup {
        key_pos: positions[0],
        member_pos: positions.to_vec(),
        group,
    })
}

/// Per-pixel accumulation of approximated cubic values and cover counts.
pub(crate) fn accumulate(
    pairs: &[(CubicGroup, Tensor3)],
    dims: (usize, usize, usize),
) -> (Tensor3, Matrix) {
    let (rows, cols, bands) = dims;
    let mut sum = Tensor3::zeros(rows, cols, bands);
    let mut count = Matrix::zeros(rows, cols);
    for (grp, approx) in pairs {
        let m = (approx.rows() as f64).sqrt() as usize;
        debug_assert_eq!(m * m, approx.rows(), "mode-1 size must be a square");
        for (j, &(r, c)) in grp.member_pos.iter().enumerate() {
            for dr in 0..m {
                for dc in 0..m {
                    let cnt = count.get(r + dr, c + dc) + 1.0;
                    count.set(r + dr, c + dc, cnt);
                    for b in 0..bands {
                        let v = sum.get(r + dr, c + dc, b) + approx.get(dr * m + dc, j, b);
                        sum.set(r + dr, c + dc, b, v);
                    }
                }
            }
        }
    }
    (sum, count)
}

/// Closed-form image update from approximated groups:
/// `X(p) = (Y(p) + eta * sum_recon(p)) / (1 + eta * count(p))`.
///
/// Pixels covered by no cubic return `Y(p)`.
pub fn aggregate(pairs: &[(CubicGroup, Tensor3)], y: &Tensor3, eta: f64) -> Tensor3 {
    let (sum, count) = accumulate(pairs, y.dims());
    let (rows, cols, bands) = y.dims();
    let mut x = Tensor3::zeros(rows, cols, bands);
    for i in 0..rows {
        for j in 0..cols {
            let denom = 1.0 + eta * count.get(i, j);
            for b in 0..bands {
                let v = (y.get(i, j, b) + eta * sum.get(i, j, b)) / denom;
                x.set(i, j, b, v);
            }
        }
    }
    x
}

/// Generalized update for the ADMM solvers: several quadratic fidelity terms
/// `w_i/2 ||T_i - X||^2` plus the cubic prior weighted by `eta2`:
/// `X(p) = (sum_i w_i T_i(p) + eta2 * sum_recon(p)) / (sum_i w_i + eta2 * count(p))`.
pub(crate) fn aggregate_weighted(
    pairs: &[(CubicGroup, Tensor3)],
    fidelity: &[(f64, &Tensor3)],
    eta2: f64,
) -> Tensor3 {
    assert!(!fidelity.is_empty());
    let dims = fidelity[0].1.dims();
    let (sum, count) = accumulate(pairs, dims);
    let (rows, cols, bands) = dims;
    let w_total: f64 = fidelity.iter().map(|(w, _)| w).sum();
    let mut x = Tensor3::zeros(rows, cols, bands);
    for i in 0..rows {
        for j in 0..cols {
            let denom = w_total + eta2 * count.get(i, j);
            for b in 0..bands {
                let mut num = eta2 * sum.get(i, j, b);
                for (w, t) in fidelity {
                    num += w * t.get(i, j, b);
                }
                x.set(i, j, b, num / denom);
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_mean_single_band_is_identity() {
        let t = Tensor3::from_fn(3, 3, 1, |i, j, _| (i * 3 + j) as f64);
        let m = band_mean_image(&t);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.get(i, j), t.get(i, j, 0));
            }
        }
    }

    #[test]
    fn band_mean_opposite_bands_cancel() {
        let t = Tensor3::from_fn(2, 2, 2, |i, j, k| {
            let v = (i + 2 * j) as f64 + 1.0;
            if k == 0 {
                v
            } else {
                -v
            }
        });
        let m = band_mean_image(&t);
        assert!(m.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn band_mean_constant_bands() {
        let t = Tensor3::from_fn(2, 3, 4, |_, _, _| 7.0);
        let m = band_mean_image(&t);
        assert!(m.data().iter().all(|&v| (v - 7.0).abs() < 1e-12));
    }

    #[test]
    fn key_grid_covers_borders() {
        let keys = key_positions(10, 10, 3, 4);
        assert!(keys.contains(&(0, 0)));
        assert!(keys.contains(&(7, 7)));
        // With stride <= patch the keys tile the image gaplessly.
        let keys = key_positions(10, 10, 3, 2);
        let mut covered = vec![false; 10];
        for &(r, _) in &keys {
            for d in 0..3 {
                covered[r + d] = true;
            }
        }
        assert!(covered.iter().all(|&c| c));
    }

    #[test]
    fn key_always_ranks_first() {
        let img = Matrix::from_vec(8, 8, (0..64).map(|v| v as f64).collect()).unwrap();
        let cfg = GroupingConfig {
            patch: 3,
            k: 4,
            window: 3,
            stride: 1,
        };
        let got = match_similar(&img, (2, 2), &cfg);
        assert_eq!(got.len(), 5);
        assert_eq!(got[0], (2, 2));
    }

    #[test]
    fn constant_image_ties_break_by_linear_index() {
        let img = Matrix::from_vec(6, 6, vec![1.0; 36]).unwrap();
        let cfg = GroupingConfig {
            patch: 2,
            k: 3,
            window: 5,
            stride: 1,
        };
        // Key at the lowest linear index: output must be the k+1 lowest
        // linear indices in order.
        let got = match_similar(&img, (0, 0), &cfg);
        assert_eq!(got, vec![(0, 0), (0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn exact_duplicate_ranks_first_among_candidates() {
        let mut img = Matrix::zeros(12, 12);
        // A distinctive key patch at (1,1) duplicated at (6,6); noise elsewhere.
        let pattern = [3.0, -7.0, 11.0, 5.0];
        for (n, &(dr, dc)) in [(0, 0), (0, 1), (1, 0), (1, 1)].iter().enumerate() {
            img.set(1 + dr, 1 + dc, pattern[n]);
            img.set(6 + dr, 6 + dc, pattern[n]);
        }
        for i in 0..12 {
            for j in 0..12 {
                if img.get(i, j) == 0.0 {
                    img.set(i, j, ((i * 31 + j * 17) % 13) as f64 + 20.0);
                }
            }
        }
        let cfg = GroupingConfig {
            patch: 2,
            k: 3,
            window: 8,
            stride: 1,
        };
        let got = match_similar(&img, (1, 1), &cfg);
        assert_eq!(got[1], (6, 6));
    }

    #[test]
    fn cyclic_fill_when_window_is_sparse() {
        let img = Matrix::from_vec(4, 4, (0..16).map(|v| v as f64).collect()).unwrap();
        let cfg = GroupingConfig {
            patch: 3,
            k: 6,
            window: 3,
            stride: 1,
        };
        let got = match_similar(&img, (0, 0), &cfg);
        assert_eq!(got.len(), 7);
        // Only 4 distinct positions exist; the tail repeats from the front.
        assert_eq!(got[4], got[0]);
        assert_eq!(got[5], got[1]);
    }

    #[test]
    fn single_pixel_group_is_the_spectrum() {
        let t = Tensor3::from_fn(4, 4, 3, |i, j, k| (i + 10 * j + 100 * k) as f64);
        let g = build_group(&t, &[(2, 1)], 1).unwrap();
        assert_eq!(g.group.dims(), (1, 1, 3));
        for k in 0..3 {
            assert_eq!(g.group.get(0, 0, k), t.get(2, 1, k));
        }
    }

    #[test]
    fn duplicate_positions_duplicate_slices() {
        let t = Tensor3::from_fn(5, 5, 2, |i, j, k| (i * 5 + j + 25 * k) as f64);
        let g = build_group(&t, &[(1, 1), (1, 1)], 2).unwrap();
        for o in 0..4 {
            for k in 0..2 {
                assert_eq!(g.group.get(o, 0, k), g.group.get(o, 1, k));
            }
        }
    }

    #[test]
    fn out_of_bounds_position_errors() {
        let t = Tensor3::zeros(4, 4, 2);
        assert!(matches!(
            build_group(&t, &[(3, 3)], 2),
            Err(WlrtrError::PatchOutOfBounds { .. })
        ));
    }

    #[test]
    fn extract_aggregate_roundtrip_with_count_normalization() {
        let t = Tensor3::from_fn(6, 6, 2, |i, j, k| (i + j * 6) as f64 + 0.5 * k as f64);
        let g = build_group(&t, &[(1, 2)], 3).unwrap();
        let approx = g.group.clone();
        let zero = Tensor3::zeros(6, 6, 2);
        // Large eta: aggregation returns the reconstruction where covered.
        let x = aggregate(&[(g, approx)], &zero, 1e9);
        for b in 0..2 {
            for dr in 0..3 {
                for dc in 0..3 {
                    let got = x.get(1 + dr, 2 + dc, b);
                    let want = t.get(1 + dr, 2 + dc, b);
                    assert!((got - want).abs() < 1e-6);
                }
            }
        }
        // Uncovered pixels return Y = 0.
        assert_eq!(x.get(5, 5, 0), 0.0);
    }

    #[test]
    fn zero_groups_returns_y() {
        let y = Tensor3::from_fn(3, 3, 2, |i, j, k| (i + j + k) as f64);
        let x = aggregate(&[], &y, 0.7);
        assert_eq!(x, y);
    }

    #[test]
    fn consistent_reconstructions_are_a_fixed_point() {
        let y = Tensor3::from_fn(6, 6, 2, |i, j, k| (i * 2 + j * 3 + k * 5) as f64);
        let g1 = build_group(&y, &[(0, 0), (1, 1)], 3).unwrap();
        let g2 = build_group(&y, &[(2, 2), (0, 1)], 3).unwrap();
        let a1 = g1.group.clone();
        let a2 = g2.group.clone();
        for eta in [0.1, 1.0, 100.0] {
            let x = aggregate(&[(g1.clone(), a1.clone()), (g2.clone(), a2.clone())], &y, eta);
            for (a, b) in x.data().iter().zip(y.data().iter()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn count_matches_brute_force_cover() {
        let t = Tensor3::from_fn(7, 7, 1, |i, j, _| (i + j) as f64);
        let positions = [(0, 0), (2, 3), (4, 4), (2, 3)];
        let g = build_group(&t, &positions, 3).unwrap();
        let approx = g.group.clone();
        let (_, count) = accumulate(&[(g, approx)], t.dims());
        for i in 0..7 {
            for j in 0..7 {
                let mut expected = 0.0;
                for &(r, c) in &positions {
                    if i >= r && i < r + 3 && j >= c && j < c + 3 {
                        expected += 1.0;
                    }
                }
                assert_eq!(count.get(i, j), expected, "pixel ({}, {})", i, j);
            }
        }
    }

    #[test]
    fn aggregation_stays_in_convex_hull() {
        let y = Tensor3::from_fn(5, 5, 1, |i, j, _| (i * 5 + j) as f64);
        let g = build_group(&y, &[(1, 1)], 2).unwrap();
        let approx = g.group.map(|v| v + 10.0);
        let x = aggregate(&[(g, approx.clone())], &y, 0.3);
        for dr in 0..2 {
            for dc in 0..2 {
                let yv = y.get(1 + dr, 1 + dc, 0);
                let rv = yv + 10.0;
                let xv = x.get(1 + dr, 1 + dc, 0);
                assert!(xv >= yv.min(rv) - 1e-12 && xv <= yv.max(rv) + 1e-12);
            }
        }
    }
}
