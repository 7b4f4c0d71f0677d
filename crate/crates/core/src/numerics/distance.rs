//! Distance to instability `γ = min_ω σ_min(A − jωI)` by Byers bisection.

use super::{ensure_hurwitz, hamiltonian, spectral_norm, Matrix};
use crate::{Error, Result};

const MAX_BISECTIONS: usize = 200;

/// `H(σ)` has an eigenvalue within `1e-8·‖H‖₂` of the imaginary axis iff
/// `σ ≥ γ`.
fn has_imaginary_eigenvalue(am: &Matrix, n_neighbors: usize, sigma: f64) -> Result<bool> {
    let nf = n_neighbors as f64;
    let h = hamiltonian(am, n_neighbors, sigma * sigma / nf)?;
    let tol = 1e-8 * spectral_norm(&h)?;
    Ok(super::eigenvalues(&h)?.min_abs_real() <= tol)
}

/// Returns a lower bound `lo` with `γ ∈ [lo, lo + tol]`.
///
/// The value does not depend on `n_neighbors` (it only rescales the
/// Hamiltonian's off-diagonal blocks); it is accepted so the test matrix is
/// the one from the hyperbolicity lemma. `N = 0` is treated as `N = 1`.
pub fn distance_to_instability(am: &Matrix, n_neighbors: usize, tol: f64) -> Result<f64> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::InvalidParameter(format!("tolerance must be > 0, got {tol}")));
    }
    ensure_hurwitz(am, "reference model")?;
    if am.is_empty() {
        return Ok(f64::INFINITY);
    }
    let n_neighbors = n_neighbors.max(1);
    let (mut lo, mut hi) = (0.0, spectral_norm(am)?);
    let iterations = ((hi - lo) / tol).log2().ceil().clamp(0.0, MAX_BISECTIONS as f64) as usize;
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if has_imaginary_eigenvalue(am, n_neighbors, mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(lo)
}
