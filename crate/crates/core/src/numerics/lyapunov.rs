//! Continuous Lyapunov equation `AᵀP + PA + Q = 0` by complex-Schur
//! Bartels–Stewart.

use nalgebra::Schur;

use super::{ensure_finite, ensure_hurwitz, ensure_square, symmetrize, to_complex, CMatrix, Complex64, Matrix};
use crate::{Error, Result};

const REFINE_STEPS: usize = 2;

/// Schur factors of `A` (`A = U T Uᴴ`, `T` upper triangular), reusable
/// across right-hand sides.
pub(crate) struct LyapunovFactor {
    u: CMatrix,
    t: CMatrix,
}

impl LyapunovFactor {
    pub(crate) fn new(a: &Matrix) -> Result<Self> {
        let schur = Schur::try_new(to_complex(a), f64::EPSILON, super::SCHUR_MAX_ITER).ok_or(Error::NoConvergence)?;
        let (u, t) = schur.unpack();
        Ok(LyapunovFactor { u, t })
    }

    /// One solve of `AᵀP + PA = -Q` (no refinement).
    fn solve_once(&self, q: &Matrix) -> Result<Matrix> {
        let n = self.t.nrows();
        let c = -(self.u.adjoint() * to_complex(q) * &self.u);
        // Tᴴ X + X T = C, column by column:
        // (Tᴴ + t_kk I) x_k = c_k − Σ_{l<k} t_lk x_l, lower-triangular.
        let mut x = CMatrix::zeros(n, n);
        for k in 0..n {
            let mut rhs: Vec<Complex64> = (0..n).map(|i| c[(i, k)]).collect();
            for l in 0..k {
                let tlk = self.t[(l, k)];
                if tlk != Complex64::new(0.0, 0.0) {
                    for (i, r) in rhs.iter_mut().enumerate() {
                        *r -= tlk * x[(i, l)];
                    }
                }
            }
            let tkk = self.t[(k, k)];
            for i in 0..n {
                let mut s = rhs[i];
                for j in 0..i {
                    s -= self.t[(j, i)].conj() * x[(j, k)];
                }
                let d = self.t[(i, i)].conj() + tkk;
                if d.norm() == 0.0 {
                    return Err(Error::IllConditioned(
                        "Lyapunov operator is singular (eigenvalues λᵢ + λ̄ₖ = 0)".into(),
                    ));
                }
                x[(i, k)] = s / d;
            }
        }
        let p = (&self.u * x * self.u.adjoint()).map(|z| z.re);
        Ok(symmetrize(&p))
    }

    /// Solve with a couple of residual-correction steps.
    pub(crate) fn solve(&self, a: &Matrix, q: &Matrix) -> Result<Matrix> {
        let mut p = self.solve_once(q)?;
        let mut best = lyapunov_residual(a, &p, q);
        for _ in 0..REFINE_STEPS {
            let r = a.transpose() * &p + &p * a + q;
            let dp = self.solve_once(&r)?;
            let cand = &p + dp;
            let res = lyapunov_residual(a, &cand, q);
            if !(res < best) {
                break;
            }
            p = cand;
            best = res;
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("Lyapunov solution".into()));
        }
        Ok(p)
    }
}

pub(crate) fn lyapunov_residual(a: &Matrix, p: &Matrix, q: &Matrix) -> f64 {
    (a.transpose() * p + p * a + q).norm()
}

fn check_dims(a: &Matrix, q: &Matrix) -> Result<usize> {
    let n = ensure_square(a, "Lyapunov A")?;
    ensure_square(q, "Lyapunov Q")?;
    if q.nrows() != n {
        return Err(Error::Dimension(format!("A is {n}x{n} but Q is {}x{}", q.nrows(), q.ncols())));
    }
    ensure_finite(a, "Lyapunov A")?;
    ensure_finite(q, "Lyapunov Q")?;
    Ok(n)
}

/// Solves `AᵀP + PA + Q = 0` for symmetric positive definite `P`.
///
/// `A` must be Hurwitz and `Q` symmetric positive definite.
pub fn solve_lyapunov(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    check_dims(a, q)?;
    let scale = q.norm().max(f64::MIN_POSITIVE);
    if (q - q.transpose()).norm() > 1e-10 * scale {
        return Err(Error::InvalidParameter("Q must be symmetric".into()));
    }
    if symmetrize(q).cholesky().is_none() {
        return Err(Error::InvalidParameter("Q must be positive definite".into()));
    }
    ensure_hurwitz(a, "Lyapunov A")?;
    solve_lyapunov_unchecked(a, q)
}

/// Same equation with no definiteness/stability checks; `Q` only needs to be
/// symmetric and `λᵢ(A) + λ̄ₖ(A) ≠ 0`.
pub(crate) fn solve_lyapunov_unchecked(a: &Matrix, q: &Matrix) -> Result<Matrix> {
    let n = check_dims(a, q)?;
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    LyapunovFactor::new(a)?.solve(a, q)
}
