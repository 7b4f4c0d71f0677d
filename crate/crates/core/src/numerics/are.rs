//! `AᵀP + PA + N·P² + q·I = 0` via the Hamiltonian's stable invariant
//! subspace.
//!
//! nalgebra has no Schur reordering, so the stable subspace is taken from
//! the matrix sign function: range(I − sign(H)) is exactly the span of the
//! stable eigenvectors. The result is polished with Newton–Kleinman steps.

use serde::{Deserialize, Serialize};

use super::lyapunov::solve_lyapunov_unchecked;
use super::{
    default_eig_tol, eigenvalues, ensure_finite, ensure_hurwitz, hamiltonian, is_hyperbolic, symmetric_extremes,
    symmetrize, Matrix, Spectrum,
};
use crate::{Error, Result};

const SIGN_MAX_ITER: usize = 100;
const NEWTON_STEPS: usize = 6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AreSolution {
    #[serde(with = "crate::serde_rows")]
    pub p: Matrix,
    pub residual_norm: f64,
    /// Eigenvalues of `A + N·P`.
    pub closed_loop_spectrum: Spectrum,
    /// Every eigenvalue of `P` is strictly positive.
    pub positive_definite: bool,
}

/// ‖AᵀP + PA + N·P² + q·I‖_F.
pub fn are_residual(am: &Matrix, n_neighbors: usize, q: f64, p: &Matrix) -> f64 {
    are_residual_matrix(am, n_neighbors, q, p).norm()
}

fn are_residual_matrix(am: &Matrix, n_neighbors: usize, q: f64, p: &Matrix) -> Matrix {
    let n = am.nrows();
    am.transpose() * p + p * am + (p * p) * n_neighbors as f64 + Matrix::identity(n, n) * q
}

/// Newton iteration for sign(H) with determinant scaling.
fn matrix_sign(h: &Matrix) -> Result<Matrix> {
    let dim = h.nrows() as f64;
    let mut z = h.clone();
    let mut scaled = true;
    for _ in 0..SIGN_MAX_ITER {
        let lu = z.clone().lu();
        let det = lu.determinant();
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::IllConditioned("sign iteration hit a singular iterate".into()))?;
        let c = if scaled && det.is_finite() && det != 0.0 {
            det.abs().powf(-1.0 / dim)
        } else {
            1.0
        };
        let next = (&z * c + inv / c) * 0.5;
        ensure_finite(&next, "sign iteration")?;
        let change = (&next - &z).norm();
        let size = next.norm();
        z = next;
        if change <= 1e-3 * size {
            // scaling only helps far from convergence; finish quadratically
            scaled = false;
        }
        if change <= 1e-13 * size {
            return Ok(z);
        }
    }
    Err(Error::NoConvergence)
}

/// Stabilizing solution of `AᵀP + PA + N·P² + q·I = 0`.
///
/// Requires `A` Hurwitz, `q ≥ 0` and `hamiltonian(A, N, q)` hyperbolic.
pub fn solve_are(am: &Matrix, n_neighbors: usize, q: f64) -> Result<AreSolution> {
    if !(q >= 0.0) || !q.is_finite() {
        return Err(Error::InvalidParameter(format!("q must be finite and ≥ 0, got {q}")));
    }
    ensure_hurwitz(am, "reference model")?;
    let n = am.nrows();
    let h = hamiltonian(am, n_neighbors, q)?;
    if !is_hyperbolic(&h, default_eig_tol(&h)?)? {
        return Err(Error::NotHyperbolic);
    }

    let sign = matrix_sign(&h)?;
    let proj = Matrix::identity(2 * n, 2 * n) - sign;
    let svd = proj.svd(true, false);
    let u_full = svd.u.ok_or(Error::NoConvergence)?;
    let mut order: Vec<usize> = (0..2 * n).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let basis = Matrix::from_fn(2 * n, n, |r, c| u_full[(r, order[c])]);
    let top = basis.rows(0, n).into_owned();
    let bottom = basis.rows(n, n).into_owned();

    let sv = top.singular_values();
    let (smin, smax) = (sv.min(), sv.max());
    if !(smin > 1e-12 * smax) {
        return Err(Error::IllConditioned(format!(
            "U block of the stable subspace is singular (σ_min/σ_max = {:e})",
            smin / smax
        )));
    }
    // P = V·U⁻¹  ⇔  Uᵀ Pᵀ = Vᵀ
    let pt = top
        .transpose()
        .lu()
        .solve(&bottom.transpose())
        .ok_or_else(|| Error::IllConditioned("U block is singular".into()))?;
    let mut p = symmetrize(&pt.transpose());
    let mut best = are_residual(am, n_neighbors, q, &p);

    let nf = n_neighbors as f64;
    for _ in 0..NEWTON_STEPS {
        if best == 0.0 {
            break;
        }
        let closed = am + &p * nf;
        let r = are_residual_matrix(am, n_neighbors, q, &p);
        let Ok(delta) = solve_lyapunov_unchecked(&closed, &r) else {
            break;
        };
        let cand = symmetrize(&(&p + delta));
        let res = are_residual(am, n_neighbors, q, &cand);
        if !(res < best) {
            break;
        }
        p = cand;
        best = res;
    }
    ensure_finite(&p, "ARE solution")?;

    let closed_loop_spectrum = eigenvalues(&(am + &p * nf))?;
    let positive_definite = n == 0 || symmetric_extremes(&p)?.0 > 0.0;
    Ok(AreSolution {
        p,
        residual_norm: best,
        closed_loop_spectrum,
        positive_definite,
    })
}
