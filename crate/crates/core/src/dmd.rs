//! Exact dynamic mode decomposition of uniformly spaced snapshots.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest are treated as zero.
pub const RANK_RTOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct DmdResult {
    /// Exact DMD modes as columns (`space x rank`).
    pub modes: DMatrix<Complex64>,
    /// Eigenvalues of the reduced propagator, sorted by decreasing modulus.
    pub eigenvalues: Vec<Complex64>,
    /// Least-squares amplitudes against the first snapshot.
    pub amplitudes: Vec<Complex64>,
    pub rank: usize,
    pub requested_rank: usize,
}

impl DmdResult {
    /// True when the data supported fewer than the requested number of modes.
    pub fn rank_deficient(&self) -> bool {
        self.rank < self.requested_rank
    }

    /// Amplitude-weighted mode `b_j * Phi_j`.
    pub fn term(&self, j: usize) -> DVector<Complex64> {
        self.modes.column(j) * self.amplitudes[j]
    }

    /// Real part of the model `x_n = sum_j b_j mu_j^n Phi_j` for `n = 0..count`.
    pub fn reconstruct(&self, count: usize) -> DMatrix<f64> {
        let rows = self.modes.nrows();
        let mut out = DMatrix::zeros(rows, count);
        for j in 0..self.rank {
            let term = self.term(j);
            let mut power = Complex64::new(1.0, 0.0);
            for n in 0..count {
                for i in 0..rows {
                    out[(i, n)] += (term[i] * power).re;
                }
                power *= self.eigenvalues[j];
            }
        }
        out
    }
}

/// Rank-`rank` exact DMD of the snapshot columns of `snapshots`.
///
/// The rank is lowered to the numerical rank of the first snapshot block when
/// the data cannot support `rank` modes; see [`DmdResult::rank_deficient`].
pub fn exact_dmd(snapshots: &DMatrix<f64>, rank: usize) -> Result<DmdResult> {
    let cols = snapshots.ncols();
    if rank == 0 {
        return Err(Error::invalid("DMD rank must be positive"));
    }
    if cols < rank + 1 {
        return Err(Error::invalid(format!(
            "rank {rank} DMD needs at least {} snapshots, got {cols}",
            rank + 1
        )));
    }
    let x = snapshots.columns(0, cols - 1).into_owned();
    let y = snapshots.columns(1, cols - 1).into_owned();

    let (u, sigma, v) = thin_svd(&x);
    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let numerical_rank = sigma.iter().take_while(|&&s| s > RANK_RTOL * sigma_max).count();
    let r = rank.min(numerical_rank);
    if r == 0 {
        return Ok(DmdResult {
            modes: DMatrix::zeros(snapshots.nrows(), 0),
            eigenvalues: Vec::new(),
            amplitudes: Vec::new(),
            rank: 0,
            requested_rank: rank,
        });
    }

    let ur = u.columns(0, r).into_owned();
    let vr = v.columns(0, r).into_owned();
    let sigma_inv = DMatrix::from_diagonal(&DVector::from_fn(r, |j, _| 1.0 / sigma[j]));

    let y_v_sinv = &y * &vr * &sigma_inv;
    let reduced = ur.transpose() * &y_v_sinv;

    let mut eigenvalues: Vec<Complex64> = if r == 1 {
        vec![Complex64::new(reduced[(0, 0)], 0.0)]
    } else {
        reduced.complex_eigenvalues().iter().copied().collect()
    };
    eigenvalues.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(b.re.total_cmp(&a.re)).then(b.im.total_cmp(&a.im)));

    let reduced_c = reduced.map(|v| Complex64::new(v, 0.0));
    let mut w = DMatrix::<Complex64>::zeros(r, r);
    for (j, &mu) in eigenvalues.iter().enumerate() {
        w.set_column(j, &eigenvector(&reduced_c, mu));
    }

    let modes = y_v_sinv.map(|v| Complex64::new(v, 0.0)) * w;
    let x0 = snapshots.column(0).map(|v| Complex64::new(v, 0.0));
    let amplitudes = least_squares_complex(&modes, &x0)
        .ok_or_else(|| Error::Internal("DMD modes are linearly dependent".into()))?;

    Ok(DmdResult {
        modes,
        eigenvalues,
        amplitudes: amplitudes.iter().copied().collect(),
        rank: r,
        requested_rank: rank,
    })
}

/// Thin SVD `x = U diag(sigma) V^T` with singular values in decreasing order.
///
/// The dense SVD can return a wrong factorization for exactly rank-deficient
/// wide inputs (repeated columns), so the result is verified by recomposition
/// and recomputed on the transpose, then from the Gram matrix, if it fails.
pub fn thin_svd(x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let scale = x.norm().max(f64::MIN_POSITIVE);
    let tol = 1e-11 * scale;
    let attempt = |m: &DMatrix<f64>| -> Option<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
        let svd = m.clone().svd(true, true);
        let u = svd.u?;
        let v_t = svd.v_t?;
        let s = svd.singular_values;
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
        let us = DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]);
        let vs = DMatrix::from_fn(v_t.ncols(), order.len(), |i, j| v_t[(order[j], i)]);
        let ss: Vec<f64> = order.iter().map(|&i| s[i]).collect();
        let rebuilt = &us * DMatrix::from_diagonal(&DVector::from_vec(ss.clone())) * vs.transpose();
        ((rebuilt - m).norm() <= tol).then_some((us, ss, vs))
    };
    if let Some(out) = attempt(x) {
        return out;
    }
    if let Some((u, s, v)) = attempt(&x.transpose()) {
        return (v, s, u);
    }
    gram_svd(x)
}

/// SVD through the eigendecomposition of the smaller Gram matrix.
fn gram_svd(x: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let tall = x.nrows() >= x.ncols();
    let gram = if tall { x.transpose() * x } else { x * x.transpose() };
    let dim = gram.nrows();
    let eig = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let s: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
    let w = DMatrix::from_fn(dim, order.len(), |i, j| eig.eigenvectors[(i, order[j])]);
    let mut other_n = if tall { x * &w } else { x.transpose() * &w };
    for (j, &sj) in s.iter().enumerate() {
        let mut col = other_n.column_mut(j);
        if sj > 0.0 {
            col /= sj;
        } else {
            col.fill(0.0);
        }
    }
    if tall {
        (other_n, s, w)
    } else {
        (w, s, other_n)
    }
}

/// Eigenvector of `a` for the (approximate) eigenvalue `mu` by inverse iteration.
fn eigenvector(a: &DMatrix<Complex64>, mu: Complex64) -> DVector<Complex64> {
    let n = a.nrows();
    if n == 1 {
        return DVector::from_element(1, Complex64::new(1.0, 0.0));
    }
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let shift = mu + Complex64::new(1e-10 * scale, 1e-12 * scale);
    let shifted = a - DMatrix::<Complex64>::identity(n, n) * shift;
    let lu = shifted.lu();
    let mut v = DVector::from_fn(n, |i, _| Complex64::new(1.0 + 0.1 * i as f64, 0.05 * i as f64));
    for _ in 0..4 {
        match lu.solve(&v) {
            Some(next) => {
                let nn = next.norm();
                if !(nn > 0.0 && nn.is_finite()) {
                    break;
                }
                v = next / Complex64::new(nn, 0.0);
            }
            None => break,
        }
    }
    let nn = v.norm();
    v /= Complex64::new(nn, 0.0);
    // Phase convention: largest entry real and positive.
    let pivot = v.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(Complex64::new(1.0, 0.0));
    if pivot.norm() > 0.0 {
        v *= pivot.conj() / pivot.norm();
    }
    v
}

/// Least-squares solution of `a b = y` via the normal equations.
fn least_squares_complex(a: &DMatrix<Complex64>, y: &DVector<Complex64>) -> Option<DVector<Complex64>> {
    let ah = a.adjoint();
    (&ah * a).lu().solve(&(ah * y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snapshots(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, f)
    }

    #[test]
    fn single_exponential() {
        let v = [1.0, -2.0, 0.5];
        let dt = 0.1;
        let x = snapshots(3, 20, |i, n| v[i] * (-(n as f64) * dt).exp());
        let res = exact_dmd(&x, 1).unwrap();
        assert_eq!(res.rank, 1);
        assert!((res.eigenvalues[0].re - (-dt).exp()).abs() < 1e-12);
        let term = res.term(0);
        for i in 0..3 {
            assert!((term[i].re - v[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_snapshots() {
        let x = snapshots(4, 6, |i, _| i as f64 + 1.0);
        let res = exact_dmd(&x, 1).unwrap();
        assert!((res.eigenvalues[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        let rec = res.reconstruct(6);
        assert!((rec - x).norm() < 1e-12);
    }

    #[test]
    fn two_term_exponential() {
        let xi1 = [1.0, 1.0, -2.0, 0.0];
        let xi2 = [1.0, -1.0, 0.0, 3.0];
        let dt = 0.05;
        let x = snapshots(4, 30, |i, n| xi1[i] + (-(n as f64) * dt).exp() * xi2[i]);
        let res = exact_dmd(&x, 2).unwrap();
        assert_eq!(res.rank, 2);
        assert!((res.eigenvalues[0] - Complex64::new(1.0, 0.0)).norm() < 1e-8);
        assert!((res.eigenvalues[1] - Complex64::new((-dt).exp(), 0.0)).norm() < 1e-8);
        let rec = res.reconstruct(30);
        assert!((rec - &x).norm() / x.norm() < 1e-10);
    }

    #[test]
    fn rank_deficiency_is_flagged() {
        let x = snapshots(3, 10, |i, n| (i as f64 + 1.0) * 0.9f64.powi(n as i32));
        let res = exact_dmd(&x, 3).unwrap();
        assert_eq!(res.rank, 1);
        assert!(res.rank_deficient());
    }

    #[test]
    fn rotation_gives_complex_pair() {
        let th: f64 = 0.3;
        let x = snapshots(2, 12, |i, n| {
            let a = n as f64 * th;
            if i == 0 { a.cos() } else { a.sin() }
        });
        let res = exact_dmd(&x, 2).unwrap();
        for mu in &res.eigenvalues {
            assert!((mu.norm() - 1.0).abs() < 1e-10);
            assert!((mu.im.abs() - th.sin()).abs() < 1e-10);
        }
        assert!((res.reconstruct(12) - &x).norm() < 1e-10);
    }

    #[test]
    fn svd_of_repeated_columns() {
        let x = snapshots(4, 5, |i, _| i as f64 + 1.0);
        let (u, s, v) = thin_svd(&x);
        let rebuilt = &u * DMatrix::from_diagonal(&DVector::from_vec(s.clone())) * v.transpose();
        assert!((rebuilt - &x).norm() < 1e-12);
        assert!(s[1] < 1e-12 * s[0]);
    }

    #[test]
    fn too_few_snapshots() {
        let x = snapshots(3, 2, |_, _| 1.0);
        assert!(exact_dmd(&x, 2).is_err());
        assert!(exact_dmd(&x, 0).is_err());
    }
}
