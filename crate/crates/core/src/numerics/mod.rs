//! Dense real-matrix kernels.
//!
//! Everything here is a pure function of its inputs. Eigenvalues and
//! singular values come from nalgebra's Schur and SVD; the Lyapunov,
//! Riccati, distance-to-instability and H∞ routines are built on top.

mod are;
mod distance;
mod hinf;
mod lyapunov;

use nalgebra::{Complex, DMatrix, DVector, Schur};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use are::{are_residual, solve_are, AreSolution};
pub use distance::distance_to_instability;
pub use hinf::hinf_gain;
pub use lyapunov::solve_lyapunov;

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;
pub type Complex64 = Complex<f64>;
pub type CMatrix = DMatrix<Complex64>;

const SCHUR_MAX_ITER: usize = 10_000;

/// Eigenvalues with multiplicity, sorted by (real, imaginary).
///
/// Serialized as a list of `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct Spectrum(Vec<Complex64>);

impl From<Vec<[f64; 2]>> for Spectrum {
    fn from(pairs: Vec<[f64; 2]>) -> Self {
        Spectrum::new(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

impl From<Spectrum> for Vec<[f64; 2]> {
    fn from(s: Spectrum) -> Self {
        s.0.into_iter().map(|z| [z.re, z.im]).collect()
    }
}

impl Spectrum {
    pub fn new(mut eigenvalues: Vec<Complex64>) -> Self {
        eigenvalues.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        Spectrum(eigenvalues)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Largest real part; `-inf` for an empty spectrum.
    pub fn max_real(&self) -> f64 {
        self.0.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest |Re λ|; `+inf` for an empty spectrum.
    pub fn min_abs_real(&self) -> f64 {
        self.0.iter().map(|z| z.re.abs()).fold(f64::INFINITY, f64::min)
    }

    pub fn is_hurwitz(&self) -> bool {
        self.max_real() < 0.0
    }
}

pub(crate) fn ensure_square(a: &Matrix, what: &'static str) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            what,
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(a.nrows())
}

pub(crate) fn ensure_finite(a: &Matrix, what: &str) -> Result<()> {
    if a.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub fn eigenvalues(a: &Matrix) -> Result<Spectrum> {
    ensure_square(a, "eigenvalues")?;
    ensure_finite(a, "eigenvalues")?;
    if a.is_empty() {
        return Ok(Spectrum::new(Vec::new()));
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, SCHUR_MAX_ITER).ok_or(Error::NoConvergence)?;
    Ok(Spectrum::new(schur.complex_eigenvalues().iter().copied().collect()))
}

pub fn spectral_norm(a: &Matrix) -> Result<f64> {
    ensure_finite(a, "spectral_norm")?;
    if a.is_empty() {
        return Ok(0.0);
    }
    Ok(a.singular_values().max())
}

/// Errors with [`Error::NotHurwitz`] unless every eigenvalue of `a` has a
/// strictly negative real part.
pub fn ensure_hurwitz(a: &Matrix, what: &str) -> Result<Spectrum> {
    let spectrum = eigenvalues(a)?;
    if !spectrum.is_hurwitz() {
        return Err(Error::NotHurwitz {
            what: what.to_string(),
            max_real: spectrum.max_real(),
        });
    }
    Ok(spectrum)
}

/// `[[Am, N·I], [-q·I, -Amᵀ]]`.
pub fn hamiltonian(am: &Matrix, n_neighbors: usize, q: f64) -> Result<Matrix> {
    let n = ensure_square(am, "hamiltonian")?;
    let mut h = Matrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(am);
    h.view_mut((n, n), (n, n)).copy_from(&(-am.transpose()));
    for i in 0..n {
        h[(i, n + i)] = n_neighbors as f64;
        h[(n + i, i)] = -q;
    }
    Ok(h)
}

/// Scale-relative tolerance for "on the imaginary axis": `1e-8 · ‖H‖₂`.
pub fn default_eig_tol(h: &Matrix) -> Result<f64> {
    Ok(1e-8 * spectral_norm(h)?)
}

/// True iff no eigenvalue of `h` lies within `tol` of the imaginary axis.
pub fn is_hyperbolic(h: &Matrix, tol: f64) -> Result<bool> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("eigen tolerance must be > 0, got {tol}")));
    }
    ensure_square(h, "is_hyperbolic")?;
    Ok(eigenvalues(h)?.min_abs_real() > tol)
}

/// Extreme eigenvalues of a symmetric matrix, `(λ_min, λ_max)`.
pub fn symmetric_extremes(p: &Matrix) -> Result<(f64, f64)> {
    ensure_square(p, "symmetric_extremes")?;
    ensure_finite(p, "symmetric_extremes")?;
    if p.is_empty() {
        return Err(Error::Dimension("empty matrix has no eigenvalues".into()));
    }
    let sym = (p + p.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    Ok((eig.min(), eig.max()))
}

pub(crate) fn symmetrize(p: &Matrix) -> Matrix {
    (p + p.transpose()) * 0.5
}

pub(crate) fn to_complex(a: &Matrix) -> CMatrix {
    a.map(|x| Complex64::new(x, 0.0))
}
