//! `‖M(sI − A)⁻¹‖_∞` by frequency sweep and golden-section refinement.

use nalgebra::DMatrix;

use super::{ensure_finite, ensure_hurwitz, spectral_norm, to_complex, Complex64, Matrix};
use crate::{Error, Result};

const GRID_POINTS: usize = 400;
const GOLDEN_ITERS: usize = 80;

fn gain_at(m: &Matrix, at: &Matrix, omega: f64) -> Result<f64> {
    // M(jωI − A)⁻¹ = ((jωI − A)⁻ᵀ Mᵀ)ᵀ
    let n = at.nrows();
    let mut shifted = to_complex(&(-at));
    for i in 0..n {
        shifted[(i, i)] += Complex64::new(0.0, omega);
    }
    let rhs: DMatrix<Complex64> = to_complex(&m.transpose());
    let x = shifted
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::IllConditioned(format!("jωI − A singular at ω = {omega:e}")))?;
    Ok(x.singular_values().max())
}

/// sup over ω ≥ 0 of σ_max(M(jωI − A)⁻¹).
pub fn hinf_gain(m: &Matrix, am: &Matrix) -> Result<f64> {
    ensure_hurwitz(am, "reference model")?;
    ensure_finite(m, "gain matrix")?;
    if m.ncols() != am.nrows() {
        return Err(Error::Dimension(format!(
            "gain matrix has {} columns but the state dimension is {}",
            m.ncols(),
            am.nrows()
        )));
    }
    if m.is_empty() || am.is_empty() {
        return Ok(0.0);
    }
    let at = am.transpose();
    let scale = spectral_norm(am)?;
    let (w_lo, w_hi) = (1e-3 * scale, 1e3 * scale);
    let ratio = (w_hi / w_lo).ln();
    let mut grid = Vec::with_capacity(GRID_POINTS + 1);
    grid.push(0.0);
    for k in 0..GRID_POINTS {
        grid.push(w_lo * (ratio * k as f64 / (GRID_POINTS - 1) as f64).exp());
    }
    let values = grid.iter().map(|&w| gain_at(m, &at, w)).collect::<Result<Vec<_>>>()?;
    let (imax, &vmax) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("grid is non-empty");

    let mut a = grid[imax.saturating_sub(1)];
    let mut b = grid[(imax + 1).min(grid.len() - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = gain_at(m, &at, c)?;
    let mut fd = gain_at(m, &at, d)?;
    let mut best = vmax.max(fc).max(fd);
    for _ in 0..GOLDEN_ITERS {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = gain_at(m, &at, c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = gain_at(m, &at, d)?;
        }
        best = best.max(fc).max(fd);
        if (b - a) <= 1e-12 * b.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(best)
}
