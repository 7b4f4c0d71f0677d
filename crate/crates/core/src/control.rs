//! Controller pieces: baseline feedback, reference model, state predictor,
//! adaptive laws and the projection operator.
//!
//! Sign convention: the laws are written as displayed, in terms of an error
//! `e`; they drive `V` down when `e` is predictor minus plant (`x̂ − x̄`),
//! which is what [`crate::sim`] passes.

use serde::{Deserialize, Serialize};

use crate::model::AugmentedSubsystem;
use crate::numerics::{Matrix, Vector};
use crate::{Error, Result};

fn dim_err(what: &str, got: (usize, usize), want: (usize, usize)) -> Error {
    Error::Dimension(format!(
        "{what} is {}x{}, expected {}x{}",
        got.0, got.1, want.0, want.1
    ))
}

fn check_vec(v: &Vector, len: usize, what: &str) -> Result<()> {
    if v.len() != len {
        return Err(dim_err(what, (v.len(), 1), (len, 1)));
    }
    Ok(())
}

/// `Âₘ = Ā − B̄·K_bl = [[A − B·K_x, −B·K_ξ], [−C, 0]]`.
pub fn reference_model(sub: &AugmentedSubsystem, k_bl: &Matrix) -> Result<Matrix> {
    if k_bl.shape() != (sub.m, sub.dim()) {
        return Err(dim_err("K_bl", k_bl.shape(), (sub.m, sub.dim())));
    }
    Ok(&sub.abar - &sub.bbar * k_bl)
}

/// `u = −K_bl·x̄`
pub fn baseline_control(k_bl: &Matrix, x_bar: &Vector) -> Result<Vector> {
    check_vec(x_bar, k_bl.ncols(), "x̄")?;
    Ok(-(k_bl * x_bar))
}

/// `u = −θ̂ᵀx̄`
pub fn mrac_control(theta_hat: &Matrix, x_bar: &Vector) -> Result<Vector> {
    check_vec(x_bar, theta_hat.nrows(), "x̄")?;
    Ok(-(theta_hat.tr_mul(x_bar)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorMode {
    Decentralized,
    /// Adds `Σ Ā_ij x̂_j` from the neighbours' predictors.
    Distributed,
}

/// Inputs of one predictor evaluation.
#[derive(Clone, Copy, Debug)]
pub struct PredictorInput<'a> {
    pub am: &'a Matrix,
    pub bbar: &'a Matrix,
    pub x_hat: &'a Vector,
    pub x_bar: &'a Vector,
    pub u_mrac: &'a Vector,
    pub theta_hat: &'a Matrix,
    /// Exogenous forcing, normally `F·Ē·d̄`.
    pub forcing: &'a Vector,
    /// `(Ā_ij, x̂_j)` for every neighbour; required in distributed mode.
    pub neighbors: Option<&'a [(&'a Matrix, &'a Vector)]>,
}

/// `ẋ̂ = Âₘx̂ + B̄(u + θ̂ᵀx̄) + forcing [+ Σ Ā_ij x̂_j]`.
pub fn predictor_rate(mode: PredictorMode, inp: &PredictorInput<'_>) -> Result<Vector> {
    let n = inp.am.nrows();
    if inp.am.shape() != (n, n) {
        return Err(Error::NotSquare {
            what: "reference model",
            rows: inp.am.nrows(),
            cols: inp.am.ncols(),
        });
    }
    let m = inp.bbar.ncols();
    if inp.bbar.nrows() != n {
        return Err(dim_err("B̄", inp.bbar.shape(), (n, m)));
    }
    if inp.theta_hat.shape() != (n, m) {
        return Err(dim_err("θ̂", inp.theta_hat.shape(), (n, m)));
    }
    check_vec(inp.x_hat, n, "x̂")?;
    check_vec(inp.x_bar, n, "x̄")?;
    check_vec(inp.u_mrac, m, "u")?;
    check_vec(inp.forcing, n, "forcing")?;
    let mut rate = inp.am * inp.x_hat + inp.bbar * (inp.u_mrac + inp.theta_hat.tr_mul(inp.x_bar)) + inp.forcing;
    if mode == PredictorMode::Distributed {
        let neighbors = inp
            .neighbors
            .ok_or_else(|| Error::MissingNeighbor("no neighbour predictor states supplied".into()))?;
        rate += coupling(n, neighbors)?;
    }
    Ok(rate)
}

/// `Σ A_ij x_j`.
pub fn coupling(n: usize, terms: &[(&Matrix, &Vector)]) -> Result<Vector> {
    let mut out = Vector::zeros(n);
    for (a, x) in terms {
        if a.nrows() != n || a.ncols() != x.len() {
            return Err(Error::MissingNeighbor(format!(
                "coupling block {}x{} does not match state {n} / neighbour {}",
                a.nrows(),
                a.ncols(),
                x.len()
            )));
        }
        out.gemv(1.0, a, x, 1.0);
    }
    Ok(out)
}

fn check_law_dims(e: &Vector, p: &Matrix, bbar: &Matrix, regressor: &Vector) -> Result<()> {
    let n = e.len();
    if p.shape() != (n, n) {
        return Err(dim_err("P", p.shape(), (n, n)));
    }
    if bbar.nrows() != n {
        return Err(dim_err("B̄", bbar.shape(), (n, bbar.ncols())));
    }
    check_vec(regressor, n, "regressor")
}

/// Normalized law `θ̂̇ = −Γ·x(eᵀPB̄)/(2√(eᵀPe))`, zero when
/// `eᵀPe ≤ e_floor²`. Returned with the shape of `θ̂` (`n × m`).
pub fn update_normalized(
    e: &Vector,
    p: &Matrix,
    bbar: &Matrix,
    regressor: &Vector,
    gamma: f64,
    e_floor: f64,
) -> Result<Matrix> {
    check_law_dims(e, p, bbar, regressor)?;
    let pe = p * e;
    let energy = e.dot(&pe);
    if energy <= e_floor * e_floor {
        return Ok(Matrix::zeros(e.len(), bbar.ncols()));
    }
    let epb = bbar.tr_mul(&pe).transpose(); // 1 × m
    Ok(regressor * epb * (-gamma / (2.0 * energy.sqrt())))
}

/// Bounds of the convex set `{θ : g(θ) ≤ 1}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionBounds {
    pub theta_max: f64,
    pub eps0: f64,
}

impl ProjectionBounds {
    fn check(&self) -> Result<()> {
        if !(self.theta_max > 0.0) || !(self.eps0 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "projection needs θ_max > 0 and ε₀ > 0, got {} and {}",
                self.theta_max, self.eps0
            )));
        }
        Ok(())
    }
}

/// `g(θ) = ((ε₀+1)θᵀθ − θ_max²)/(ε₀θ_max²)`
pub fn g_convex(theta: &Vector, theta_max: f64, eps0: f64) -> Result<f64> {
    ProjectionBounds { theta_max, eps0 }.check()?;
    let tm2 = theta_max * theta_max;
    Ok(((eps0 + 1.0) * theta.norm_squared() - tm2) / (eps0 * tm2))
}

/// `∇g = 2(ε₀+1)θ/(ε₀θ_max²)`
pub fn g_gradient(theta: &Vector, theta_max: f64, eps0: f64) -> Vector {
    theta * (2.0 * (eps0 + 1.0) / (eps0 * theta_max * theta_max))
}

/// `Proj(θ, y)`: `y` unless `g(θ) ≥ 0` and `∇gᵀy > 0`, in which case the
/// outward normal component is scaled down by `g(θ)`.
pub fn projection(theta: &Vector, y: &Vector, theta_max: f64, eps0: f64) -> Result<Vector> {
    check_vec(y, theta.len(), "projection drive")?;
    let g = g_convex(theta, theta_max, eps0)?;
    if g < 0.0 {
        return Ok(y.clone());
    }
    let grad = g_gradient(theta, theta_max, eps0);
    let outward = grad.dot(y);
    if outward <= 0.0 {
        return Ok(y.clone());
    }
    let norm = grad.norm();
    if !(norm > 0.0) {
        return Err(Error::DegenerateGradient);
    }
    let unit = grad / norm;
    let along = unit.dot(y);
    Ok(y - unit * (along * g))
}

/// Column-wise projection of a matrix estimate (one column per input).
pub fn projection_columns(theta_hat: &Matrix, y: &Matrix, bounds: ProjectionBounds) -> Result<Matrix> {
    if y.shape() != theta_hat.shape() {
        return Err(dim_err("projection drive", y.shape(), theta_hat.shape()));
    }
    let mut out = Matrix::zeros(y.nrows(), y.ncols());
    for j in 0..y.ncols() {
        let col = projection(
            &theta_hat.column(j).into_owned(),
            &y.column(j).into_owned(),
            bounds.theta_max,
            bounds.eps0,
        )?;
        out.set_column(j, &col);
    }
    Ok(out)
}

/// `θ̂̇ = Γ·Proj(θ̂, −x̄(x̃ᵀPB̄))`.
pub fn update_projection(
    x_tilde: &Vector,
    p: &Matrix,
    bbar: &Matrix,
    x_bar: &Vector,
    gamma: f64,
    theta_hat: &Matrix,
    bounds: ProjectionBounds,
) -> Result<Matrix> {
    check_law_dims(x_tilde, p, bbar, x_bar)?;
    let drive = -(x_bar * bbar.tr_mul(&(p * x_tilde)).transpose());
    Ok(projection_columns(theta_hat, &drive, bounds)? * gamma)
}
