//! Matrix SVD and higher-order SVD (Tucker with orthogonal factors).
//!
//! The SVD is a one-sided (Hestenes) Jacobi iteration: columns of the working
//! matrix are rotated pairwise until mutually orthogonal to 1e-12 relative
//! off-diagonal mass. The group matrices this crate decomposes stay small
//! (a few hundred in the leading dimension), where Jacobi is both robust and
//! accurate down to tiny singular values.
//!
//! Determinism: the sweep order is fixed and every factor column is put under
//! a sign convention (largest-magnitude entry positive, ties broken by lowest
//! row index), so identical inputs produce bit-identical factors.

use crate::error::{Result, WlrtrError};
use crate::tensor::{Matrix, Mode, Tensor3};

/// Relative off-diagonal tolerance for the Jacobi sweeps.
const JACOBI_TOL: f64 = 1e-12;

/// Hard cap on Jacobi sweeps before reporting a convergence failure.
const MAX_SWEEPS: usize = 64;

/// Singular value decomposition `m = u * diag(s) * v^T`.
///
/// Both factors are full square orthogonal matrices (`u`: rows x rows,
/// `v`: cols x cols); `singular_values` has `min(rows, cols)` entries sorted
/// descending. Null-space columns are a deterministic orthonormal completion.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub singular_values: Vec<f64>,
    pub v: Matrix,
}

/// Orthogonal Tucker factorization: `core x1 u1 x2 u2 x3 u3`.
#[derive(Debug, Clone)]
pub struct HosvdFactors {
    /// Core tensor; its entries play the role matrix singular values play in 2-D.
    pub core: Tensor3,
    pub u1: Matrix,
    pub u2: Matrix,
    pub u3: Matrix,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// One-sided Jacobi: rotate `cols` pairwise until orthogonal, accumulating
/// the same rotations into `acc`. Returns the sweep count.
fn hestenes_sweeps(cols: &mut [Vec<f64>], acc: &mut [Vec<f64>]) -> Result<usize> {
    let n = cols.len();
    let scale = cols.iter().map(|c| norm(c)).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0);
    }
    // Columns this far below the dominant one are numerically zero; rotating
    // them risks denormal spirals and cannot move any retained singular value.
    let tiny_sq = (scale * 1e-18) * (scale * 1e-18);
    let mut worst = 0.0;
    for sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        worst = 0.0;
        // Squared column norms, refreshed per sweep and updated after each
        // rotation, so the pair scan costs one inner product.
        let mut sq: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                if sq[p] <= tiny_sq || sq[q] <= tiny_sq {
                    continue;
                }
                let apq = dot(&cols[p], &cols[q]);
                let denom = sq[p].sqrt() * sq[q].sqrt();
                if denom == 0.0 {
                    continue;
                }
                let rel = apq.abs() / denom;
                if rel > worst {
                    worst = rel;
                }
                if rel <= JACOBI_TOL {
                    continue;
                }
                rotated = true;
                let theta = (sq[q] - sq[p]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(cols, p, q, c, s);
                rotate_pair(acc, p, q, c, s);
                sq[p] -= t * apq;
                sq[q] += t * apq;
            }
        }
        if !rotated {
            return Ok(sweep);
        }
    }
    Err(WlrtrError::SvdConvergence {
        sweeps: MAX_SWEEPS,
        off_diag: worst,
    })
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    debug_assert!(p < q);
    let (head, tail) = cols.split_at_mut(q);
    let cp = &mut head[p];
    let cq = &mut tail[0];
    for (xp, xq) in cp.iter_mut().zip(cq.iter_mut()) {
        let a = *xp;
        let b = *xq;
        *xp = c * a - s * b;
        *xq = s * a + c * b;
    }
}

/// Extend an orthonormal column set to a full basis of `R^dim` by scanning
/// canonical basis vectors with twice-reorthogonalized Gram-Schmidt.
fn complete_orthonormal(mut basis: Vec<Vec<f64>>, dim: usize) -> Vec<Vec<f64>> {
    for i in 0..dim {
        if basis.len() == dim {
            break;
        }
        let mut w = vec![0.0; dim];
        w[i] = 1.0;
        for _ in 0..2 {
            for b in &basis {
                let d = dot(&w, b);
                for (wv, bv) in w.iter_mut().zip(b.iter()) {
                    *wv -= d * bv;
                }
            }
        }
        let n = norm(&w);
        if n > 1e-8 {
            for wv in w.iter_mut() {
                *wv /= n;
            }
            basis.push(w);
        }
    }
    assert_eq!(basis.len(), dim, "basis completion fell short");
    basis
}

/// Economy factors of a matrix with `rows >= cols`: normalized left columns
/// of the numerically nonzero singular values, all singular values sorted
/// descending (clamped to zero below the rank tolerance), and the full
/// square right factor accumulated from the rotations.
struct TallSvdParts {
    /// One normalized column per retained singular value, in sigma order.
    u_cols: Vec<Vec<f64>>,
    /// All `cols` singular values, descending.
    sigmas: Vec<f64>,
    /// Full `cols x cols` orthogonal right factor.
    v: Matrix,
}

fn svd_tall_parts(a: &Matrix) -> Result<TallSvdParts> {
    let (rows, cols) = (a.rows(), a.cols());
    debug_assert!(rows >= cols);
    let mut work = a.to_columns();
    let mut acc: Vec<Vec<f64>> = (0..cols)
        .map(|j| {
            let mut e = vec![0.0; cols];
            e[j] = 1.0;
            e
        })
        .collect();
    hestenes_sweeps(&mut work, &mut acc)?;

    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = work.iter().map(|c| norm(c)).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap().then(i.cmp(&j)));

    let s_max = order.first().map_or(0.0, |&i| norms[i]);
    let rank_tol = s_max * f64::EPSILON * rows.max(cols) as f64;

    let mut sigmas = Vec::with_capacity(cols);
    let mut u_cols = Vec::new();
    let mut v_cols = Vec::with_capacity(cols);
    for &idx in &order {
        let s = norms[idx];
        v_cols.push(acc[idx].clone());
        if s > rank_tol {
            sigmas.push(s);
            u_cols.push(work[idx].iter().map(|&x| x / s).collect::<Vec<f64>>());
        } else {
            sigmas.push(0.0);
        }
    }
    Ok(TallSvdParts {
        u_cols,
        sigmas,
        v: Matrix::from_columns(&v_cols),
    })
}

/// Flip column `j` of `u` (and the paired column of `v`, if any) so its
/// largest-magnitude entry is positive; ties break to the lowest row index.
fn apply_sign_convention(u: &mut Matrix, v: Option<&mut Matrix>, paired: usize) {
    let flip_col = |m: &Matrix, j: usize| -> bool {
        let mut arg = 0;
        let mut best = m.get(0, j).abs();
        for r in 1..m.rows() {
            let a = m.get(r, j).abs();
            if a > best {
                best = a;
                arg = r;
            }
        }
        m.get(arg, j) < 0.0
    };
    let negate_col = |m: &mut Matrix, j: usize| {
        for r in 0..m.rows() {
            let val = m.get(r, j);
            m.set(r, j, -val);
        }
    };
    let mut flipped = vec![false; u.cols()];
    for j in 0..u.cols() {
        if flip_col(u, j) {
            negate_col(u, j);
            flipped[j] = true;
        }
    }
    if let Some(v) = v {
        for j in 0..paired.min(v.cols()) {
            if flipped[j] {
                negate_col(v, j);
            }
        }
        // Unpaired null-space columns of v get the same deterministic rule.
        for j in paired..v.cols() {
            if flip_col(v, j) {
                negate_col(v, j);
            }
        }
    }
}

/// Singular value decomposition with a deterministic sign convention.
///
/// Both factors come back full square; rank-deficient and rectangular
/// null spaces are completed with canonical basis vectors. Intended for the
/// modest matrix sizes of this crate; the per-mode HOSVD path below avoids
/// the completion entirely.
pub fn matrix_svd(m: &Matrix) -> Result<SvdResult> {
    let (rows, cols) = (m.rows(), m.cols());
    let (mut u, s, mut v) = if rows >= cols {
        let parts = svd_tall_parts(m)?;
        let u = Matrix::from_columns(&complete_orthonormal(parts.u_cols, rows));
        (u, parts.sigmas, parts.v)
    } else {
        let parts = svd_tall_parts(&m.transpose())?;
        let v = Matrix::from_columns(&complete_orthonormal(parts.u_cols, cols));
        (parts.v, parts.sigmas, v)
    };
    let paired = s.len();
    apply_sign_convention(&mut u, Some(&mut v), paired);
    Ok(SvdResult {
        u,
        singular_values: s,
        v,
    })
}

/// Full square left singular basis of `m`, plus its singular values.
///
/// Matches `matrix_svd(m).u` exactly (same rotations, ordering, and sign
/// convention) but never materializes the wide-side factor, which is what
/// the per-mode HOSVD calls need.
pub(crate) fn left_singular_basis(m: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let (rows, cols) = (m.rows(), m.cols());
    let (mut u, s) = if rows < cols {
        // The rotation accumulator of the transpose is already the full
        // square left basis; no completion needed.
        let parts = svd_tall_parts(&m.transpose())?;
        (parts.v, parts.sigmas)
    } else {
        let parts = svd_tall_parts(m)?;
        (
            Matrix::from_columns(&complete_orthonormal(parts.u_cols, rows)),
            parts.sigmas,
        )
    };
    apply_sign_convention(&mut u, None, s.len());
    Ok((u, s))
}

/// Economy decomposition for shrinkage: `(u_j, sigma_j, v_j)` triples of the
/// numerically nonzero singular values only.
pub(crate) fn svd_econ(m: &Matrix) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>)> {
    let (rows, cols) = (m.rows(), m.cols());
    if rows >= cols {
        let parts = svd_tall_parts(m)?;
        let rank = parts.u_cols.len();
        let v_cols: Vec<Vec<f64>> = (0..rank)
            .map(|j| (0..cols).map(|r| parts.v.get(r, j)).collect())
            .collect();
        Ok((parts.u_cols, parts.sigmas[..rank].to_vec(), v_cols))
    } else {
        let parts = svd_tall_parts(&m.transpose())?;
        let rank = parts.u_cols.len();
        let u_cols: Vec<Vec<f64>> = (0..rank)
            .map(|j| (0..rows).map(|r| parts.v.get(r, j)).collect())
            .collect();
        Ok((u_cols, parts.sigmas[..rank].to_vec(), parts.u_cols))
    }
}

/// Higher-order SVD: factor `u_n` is the full left singular basis of the
/// mode-n unfolding; the core is the projection onto those bases.
pub fn hosvd(t: &Tensor3) -> Result<HosvdFactors> {
    let (u1, _) = left_singular_basis(&t.unfold(Mode::One))?;
    let (u2, _) = left_singular_basis(&t.unfold(Mode::Two))?;
    let (u3, _) = left_singular_basis(&t.unfold(Mode::Three))?;
    let core = t
        .nmode_product(&u1.transpose(), Mode::One)?
        .nmode_product(&u2.transpose(), Mode::Two)?
        .nmode_product(&u3.transpose(), Mode::Three)?;
    Ok(HosvdFactors { core, u1, u2, u3 })
}

/// Multiply the core back along every mode: `core x1 u1 x2 u2 x3 u3`.
pub fn reconstruct(f: &HosvdFactors) -> Result<Tensor3> {
    f.core
        .nmode_product(&f.u1, Mode::One)?
        .nmode_product(&f.u2, Mode::Two)?
        .nmode_product(&f.u3, Mode::Three)
}

impl HosvdFactors {
    /// Reconstruct with a replacement core, keeping the factor bases.
    pub fn reconstruct_with(&self, core: &Tensor3) -> Result<Tensor3> {
        core.nmode_product(&self.u1, Mode::One)?
            .nmode_product(&self.u2, Mode::Two)?
            .nmode_product(&self.u3, Mode::Three)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_matrix(rng: &mut ChaCha12Rng, r: usize, c: usize) -> Matrix {
        Matrix::from_vec(r, c, (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_tensor(rng: &mut ChaCha12Rng, r: usize, c: usize, b: usize) -> Tensor3 {
        Tensor3::from_vec(r, c, b, (0..r * c * b).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .unwrap()
    }

    fn svd_reconstruction(res: &SvdResult, rows: usize, cols: usize) -> Matrix {
        let mut m = Matrix::zeros(rows, cols);
        for (j, &s) in res.singular_values.iter().enumerate() {
            for r in 0..rows {
                for c in 0..cols {
                    let v = m.get(r, c) + s * res.u.get(r, j) * res.v.get(c, j);
                    m.set(r, c, v);
                }
            }
        }
        m
    }

    fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
        a.data()
            .iter()
            .zip(b.data().iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    fn orthogonality_defect(u: &Matrix) -> f64 {
        let g = u.transpose().matmul(u);
        let mut worst: f64 = 0.0;
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.get(i, j) - target).abs());
            }
        }
        worst
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let res = matrix_svd(&Matrix::identity(3)).unwrap();
        for s in res.singular_values {
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn diagonal_singular_values_sorted() {
        let mut m = Matrix::zeros(3, 3);
        m.set(0, 0, 1.0);
        m.set(1, 1, 3.0);
        m.set(2, 2, 2.0);
        let res = matrix_svd(&m).unwrap();
        assert_eq!(res.singular_values, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn random_rect_reconstructs() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for &(r, c) in &[(5usize, 4usize), (4, 5), (6, 2), (1, 3), (3, 1)] {
            let m = random_matrix(&mut rng, r, c);
            let res = matrix_svd(&m).unwrap();
            let rec = svd_reconstruction(&res, r, c);
            let scale = m.fro_norm().max(1.0);
            assert!(max_abs_diff(&m, &rec) / scale < 1e-10, "{}x{}", r, c);
            assert!(orthogonality_defect(&res.u) < 1e-10);
            assert!(orthogonality_defect(&res.v) < 1e-10);
            let mut sorted = res.singular_values.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            assert_eq!(sorted, res.singular_values);
        }
    }

    #[test]
    fn zero_matrix_gives_identity_factors() {
        let res = matrix_svd(&Matrix::zeros(3, 2)).unwrap();
        assert!(res.singular_values.iter().all(|&s| s == 0.0));
        assert_eq!(res.u, Matrix::identity(3));
        assert_eq!(res.v, Matrix::identity(2));
    }

    #[test]
    fn hosvd_left_basis_matches_matrix_svd() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let t = random_tensor(&mut rng, 4, 3, 2);
        let f = hosvd(&t).unwrap();
        for (mode, u) in [(Mode::One, &f.u1), (Mode::Two, &f.u2), (Mode::Three, &f.u3)] {
            let res = matrix_svd(&t.unfold(mode)).unwrap();
            assert!(max_abs_diff(u, &res.u) < 1e-12);
        }
    }

    #[test]
    fn rank_one_tensor_concentrates_core() {
        let a = [1.0, -2.0, 0.5];
        let b = [3.0, 1.0];
        let c = [0.25, -1.5, 2.0, 1.0];
        let t = Tensor3::from_fn(3, 2, 4, |i, j, k| a[i] * b[j] * c[k]);
        let f = hosvd(&t).unwrap();
        let expected = norm(&a) * norm(&b) * norm(&c);
        let mut entries: Vec<f64> = f.core.data().iter().map(|v| v.abs()).collect();
        entries.sort_by(|x, y| y.partial_cmp(x).unwrap());
        assert!((entries[0] - expected).abs() < 1e-8 * expected);
        assert!(entries[1] < 1e-8 * expected);
    }

    #[test]
    fn zero_tensor_gives_zero_core_identity_factors() {
        let f = hosvd(&Tensor3::zeros(2, 3, 4)).unwrap();
        assert_eq!(f.core.fro_norm(), 0.0);
        assert_eq!(f.u1, Matrix::identity(2));
        assert_eq!(f.u2, Matrix::identity(3));
        assert_eq!(f.u3, Matrix::identity(4));
    }

    #[test]
    fn hosvd_invariants_on_random_tensor() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let t = random_tensor(&mut rng, 4, 5, 3);
        let f = hosvd(&t).unwrap();
        for u in [&f.u1, &f.u2, &f.u3] {
            assert!(orthogonality_defect(u) < 1e-10);
        }
        let rec = reconstruct(&f).unwrap();
        let err = rec.sub(&t).fro_norm() / t.fro_norm();
        assert!(err < 1e-10);
        // Unitary invariance of the Frobenius norm.
        let rel = (f.core.fro_norm() - t.fro_norm()).abs() / t.fro_norm();
        assert!(rel < 1e-10);
        // Sum of squared singular values of each unfolding equals the squared norm.
        for mode in Mode::ALL {
            let (_, s) = left_singular_basis(&t.unfold(mode)).unwrap();
            let sum: f64 = s.iter().map(|x| x * x).sum();
            assert!((sum.sqrt() - t.fro_norm()).abs() / t.fro_norm() < 1e-10);
        }
    }

    #[test]
    fn core_unfolding_spectrum_matches_tensor_unfolding() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let t = random_tensor(&mut rng, 4, 4, 3);
        let f = hosvd(&t).unwrap();
        for mode in Mode::ALL {
            let (_, st) = left_singular_basis(&t.unfold(mode)).unwrap();
            let (_, sc) = left_singular_basis(&f.core.unfold(mode)).unwrap();
            for (a, b) in st.iter().zip(sc.iter()) {
                assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()));
            }
        }
    }

    #[test]
    fn truncation_error_matches_removed_energy() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let t = random_tensor(&mut rng, 3, 3, 3);
        let f = hosvd(&t).unwrap();
        // Keep only the largest-magnitude core entry.
        let mut best = (0, 0.0f64);
        for (i, &v) in f.core.data().iter().enumerate() {
            if v.abs() > best.1.abs() {
                best = (i, v);
            }
        }
        let mut removed_sq = 0.0;
        let kept = Tensor3::from_vec(
            3,
            3,
            3,
            f.core
                .data()
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    if i == best.0 {
                        v
                    } else {
                        removed_sq += v * v;
                        0.0
                    }
                })
                .collect(),
        )
        .unwrap();
        let approx = f.reconstruct_with(&kept).unwrap();
        let err = approx.sub(&t).fro_norm();
        assert!((err - removed_sq.sqrt()).abs() < 1e-10 * t.fro_norm());
    }

    #[test]
    fn bit_identical_across_runs() {
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let t = random_tensor(&mut rng, 5, 4, 3);
        let f1 = hosvd(&t).unwrap();
        let f2 = hosvd(&t).unwrap();
        assert!(f1
            .core
            .data()
            .iter()
            .zip(f2.core.data().iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        for (a, b) in [(&f1.u1, &f2.u1), (&f1.u2, &f2.u2), (&f1.u3, &f2.u3)] {
            assert!(a
                .data()
                .iter()
                .zip(b.data().iter())
                .all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn orthogonal_roundtrip_in_one_mode() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let t = random_tensor(&mut rng, 4, 4, 4);
        let (u, _) = left_singular_basis(&t.unfold(Mode::Two)).unwrap();
        let fwd = t.nmode_product(&u.transpose(), Mode::Two).unwrap();
        let back = fwd.nmode_product(&u, Mode::Two).unwrap();
        let rel = back.sub(&t).fro_norm() / t.fro_norm();
        assert!(rel < 1e-10);
    }
}
