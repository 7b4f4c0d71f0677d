//! Connective-stability test: per-subsystem Lyapunov data aggregated into a
//! comparison matrix `M` and offset `Φ`, plus the small-gain diagnostic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::NetworkModel;
use crate::numerics::{eigenvalues, hinf_gain, solve_lyapunov, spectral_norm, symmetric_extremes, Matrix};
use crate::{Error, Result, Verdict};

/// Lyapunov data of one subsystem: `ÂₘᵀP + PÂₘ + Q = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovData {
    pub id: String,
    #[serde(with = "crate::serde_rows")]
    pub p: Matrix,
    pub lambda_min_p: f64,
    pub lambda_max_p: f64,
    pub lambda_min_q: f64,
    /// Decay rate `α = λ_min(Q)/λ_max(P)`.
    pub alpha: f64,
}

impl LyapunovData {
    pub fn new(id: impl Into<String>, p: Matrix, q: &Matrix) -> Result<Self> {
        let id = id.into();
        let (lambda_min_p, lambda_max_p) = symmetric_extremes(&p)?;
        if !(lambda_min_p > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{id}: P is not positive definite (λ_min = {lambda_min_p:e})"
            )));
        }
        let (lambda_min_q, _) = symmetric_extremes(q)?;
        Ok(LyapunovData {
            id,
            p,
            lambda_min_p,
            lambda_max_p,
            lambda_min_q,
            alpha: lambda_min_q / lambda_max_p,
        })
    }
}

/// Solves every subsystem's Lyapunov equation (concurrently, results in
/// node order).
pub fn lyapunov_data(net: &NetworkModel) -> Result<Vec<LyapunovData>> {
    net.nodes()
        .par_iter()
        .map(|node| {
            let p = solve_lyapunov(&node.am, &node.tuning.q)?;
            LyapunovData::new(node.id(), p, &node.tuning.q)
        })
        .collect()
}

fn check_len(net: &NetworkModel, data: &[LyapunovData]) -> Result<()> {
    if data.len() != net.len() {
        return Err(Error::Dimension(format!(
            "{} Lyapunov solutions for {} subsystems",
            data.len(),
            net.len()
        )));
    }
    Ok(())
}

/// `M_ii = −λ_min(Q_i)/(2λ_max(P_i))`,
/// `M_ij = λ_max(P_i)/√(λ_min(P_i)λ_min(P_j))·‖Ā_ij‖₂` for `j ∈ 𝒩_i`.
pub fn aggregate_m(net: &NetworkModel, data: &[LyapunovData]) -> Result<Matrix> {
    check_len(net, data)?;
    let k = net.len();
    let mut m = Matrix::zeros(k, k);
    for (i, di) in data.iter().enumerate() {
        m[(i, i)] = -di.lambda_min_q / (2.0 * di.lambda_max_p);
        for e in net.incoming(i) {
            let j = net.index_of(&e.from)?;
            let dj = &data[j];
            m[(i, j)] += di.lambda_max_p / (di.lambda_min_p * dj.lambda_min_p).sqrt() * e.gain()?;
        }
    }
    Ok(m)
}

/// `Φ_i = θ_max,i·( λ_min(Q_i)/(2Γ_iλ_max(P_i))
///        − Σ_{j∈𝒩_i} λ_max(P_i)‖Ā_ji‖₂/(Γ_j√(λ_min(P_i)λ_min(P_j))) )`.
///
/// `Ā_ji` is the outgoing block `i → j`; it contributes zero when the
/// coupling is one-directional.
pub fn aggregate_phi(net: &NetworkModel, data: &[LyapunovData]) -> Result<Vec<f64>> {
    check_len(net, data)?;
    let nodes = net.nodes();
    let mut phi = Vec::with_capacity(net.len());
    for (i, di) in data.iter().enumerate() {
        let tuning = &nodes[i].tuning;
        if !(tuning.gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("{}: Gamma must be > 0", di.id)));
        }
        let mut value = di.lambda_min_q / (2.0 * tuning.gamma * di.lambda_max_p);
        for e in net.incoming(i) {
            let j = net.index_of(&e.from)?;
            let back = match net.outgoing(i).find(|o| o.to == e.from) {
                Some(o) => o.gain()?,
                None => 0.0,
            };
            let gamma_j = nodes[j].tuning.gamma;
            value -= di.lambda_max_p * back / (gamma_j * (di.lambda_min_p * data[j].lambda_min_p).sqrt());
        }
        phi.push(tuning.theta_max * value);
    }
    Ok(phi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    /// Row-wise `|M_ii| > Σ_{j≠i} M_ij`.
    pub cond_diag: Vec<bool>,
    /// `‖M‖₁ > max_i |Φ_i|`.
    pub cond_norm: bool,
    /// Every eigenvalue of `M` has negative real part.
    pub m_stable: bool,
    pub m_norm1: f64,
    pub phi_max: f64,
}

impl Conditions {
    pub fn all_hold(&self) -> bool {
        self.cond_diag.iter().all(|&c| c) && self.cond_norm && self.m_stable
    }
}

pub fn check_conditions(m: &Matrix, phi: &[f64]) -> Result<Conditions> {
    if m.nrows() != m.ncols() || m.nrows() != phi.len() {
        return Err(Error::Dimension(format!(
            "M is {}x{} but Φ has {} entries",
            m.nrows(),
            m.ncols(),
            phi.len()
        )));
    }
    let k = m.nrows();
    let cond_diag = (0..k)
        .map(|i| {
            let off: f64 = (0..k).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
            m[(i, i)].abs() > off
        })
        .collect();
    let m_norm1 = (0..k).map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
    let phi_max = phi.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let m_stable = eigenvalues(m)?.is_hurwitz();
    Ok(Conditions {
        cond_diag,
        cond_norm: m_norm1 > phi_max,
        m_stable,
        m_norm1,
        phi_max,
    })
}

/// Both sides of the homogeneous-network test
/// `λ_min(Q)/(2λ_max(P)) > (λ_max(P)/λ_min(P))·N_i·gain`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn homogeneous_condition(lmin_q: f64, lmax_p: f64, lmin_p: f64, n_i: usize, gain: f64) -> HomogeneousCheck {
    let lhs = lmin_q / (2.0 * lmax_p);
    let rhs = lmax_p / lmin_p * n_i as f64 * gain;
    HomogeneousCheck {
        lhs,
        rhs,
        holds: lhs > rhs,
    }
}

/// `α = λ_min(Q)/λ_max(P)` and
/// `ρ(t) = √((V0 − θ_max/Γ)e^{−αt}/λ_min(P) + θ_max/(Γλ_min(P)))`.
pub fn decay_and_rho(p: &Matrix, q: &Matrix, theta_max: f64, gamma: f64, v0: f64, t: f64) -> Result<(f64, f64)> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("Gamma must be > 0, got {gamma}")));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("t must be ≥ 0, got {t}")));
    }
    let (lmin_p, lmax_p) = symmetric_extremes(p)?;
    let (lmin_q, _) = symmetric_extremes(q)?;
    if !(lmin_p > 0.0) || !(lmin_q > 0.0) {
        return Err(Error::InvalidParameter("P and Q must be positive definite".into()));
    }
    let alpha = lmin_q / lmax_p;
    let floor = theta_max / gamma;
    let radicand = (v0 - floor) * (-alpha * t).exp() / lmin_p + floor / lmin_p;
    if radicand < 0.0 {
        return Err(Error::InvalidBound(radicand));
    }
    Ok((alpha, radicand.sqrt()))
}

/// `θ_max = 4·bound²` where `bound = max ‖θ‖₁` over the admissible set.
pub fn theta_max(theta_l1_bound: f64) -> Result<f64> {
    if !(theta_l1_bound >= 0.0) || !theta_l1_bound.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "ℓ1 bound must be finite and ≥ 0, got {theta_l1_bound}"
        )));
    }
    Ok(4.0 * theta_l1_bound * theta_l1_bound)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectiveReport {
    pub subsystems: Vec<LyapunovData>,
    /// `√(θ_max/(Γλ_min(P)))`, the limit of `ρ_i(t)`.
    pub rho_limit: Vec<f64>,
    #[serde(with = "crate::serde_rows")]
    pub m: Matrix,
    pub phi: Vec<f64>,
    pub conditions: Conditions,
    /// Present when every subsystem shares the same `Âₘ`.
    pub homogeneous: Option<Vec<HomogeneousCheck>>,
    pub verdict: Verdict,
}

pub fn analyze(net: &NetworkModel) -> Result<ConnectiveReport> {
    let data = lyapunov_data(net)?;
    let m = aggregate_m(net, &data)?;
    let phi = aggregate_phi(net, &data)?;
    let conditions = check_conditions(&m, &phi)?;
    let nodes = net.nodes();
    let rho_limit = data
        .iter()
        .zip(nodes)
        .map(|(d, n)| (n.tuning.theta_max / (n.tuning.gamma * d.lambda_min_p)).sqrt())
        .collect();
    let homogeneous = if nodes.windows(2).all(|w| w[0].am == w[1].am) {
        let mut checks = Vec::with_capacity(net.len());
        for (i, d) in data.iter().enumerate() {
            let mut gain: f64 = 0.0;
            for e in net.incoming(i) {
                gain = gain.max(e.gain()?);
            }
            checks.push(homogeneous_condition(
                d.lambda_min_q,
                d.lambda_max_p,
                d.lambda_min_p,
                net.neighbor_count(i),
                gain,
            ));
        }
        Some(checks)
    } else {
        None
    };
    let verdict = Verdict::from_bool(conditions.all_hold());
    Ok(ConnectiveReport {
        subsystems: data,
        rho_limit,
        m,
        phi,
        conditions,
        homogeneous,
        verdict,
    })
}

/// Loop gain of one pair of mutually coupled subsystems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallGainCheck {
    /// `‖A12 (sI − Âₘ)⁻¹‖_∞`
    pub hinf_12: f64,
    /// `‖A21 (sI − Âₘ)⁻¹‖_∞`
    pub hinf_21: f64,
    pub hinf_product: f64,
    /// `‖A12‖₂·‖A21‖₂`
    pub raw_gain_product: f64,
    pub pass: bool,
}

pub fn small_gain_check(a12: &Matrix, a21: &Matrix, am: &Matrix) -> Result<SmallGainCheck> {
    small_gain_pair(a12, am, a21, am)
}

/// `a12` feeds subsystem 2's state into 1, so it is filtered by `am2`.
fn small_gain_pair(a12: &Matrix, am2: &Matrix, a21: &Matrix, am1: &Matrix) -> Result<SmallGainCheck> {
    let hinf_12 = hinf_gain(a12, am2)?;
    let hinf_21 = hinf_gain(a21, am1)?;
    let hinf_product = hinf_12 * hinf_21;
    Ok(SmallGainCheck {
        hinf_12,
        hinf_21,
        hinf_product,
        raw_gain_product: spectral_norm(a12)? * spectral_norm(a21)?,
        pass: hinf_product < 1.0,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopGain {
    pub a: String,
    pub b: String,
    #[serde(flatten)]
    pub check: SmallGainCheck,
}

/// Small-gain diagnostic over every mutually coupled pair. Only two-node
/// loops are examined; one-directional couplings close no loop.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallGainReport {
    pub loops: Vec<LoopGain>,
    pub verdict: Verdict,
}

pub fn small_gain_network(net: &NetworkModel) -> Result<SmallGainReport> {
    let nodes = net.nodes();
    let mut loops = Vec::new();
    for e in net.edges() {
        let (i, j) = (net.index_of(&e.to)?, net.index_of(&e.from)?);
        if i > j {
            continue;
        }
        if let Some(back) = net.edges().iter().find(|b| b.from == e.to && b.to == e.from) {
            // e: j → i (A_ij), back: i → j (A_ji)
            let check = small_gain_pair(&e.a, &nodes[j].am, &back.a, &nodes[i].am)?;
            loops.push(LoopGain {
                a: nodes[i].id().to_string(),
                b: nodes[j].id().to_string(),
                check,
            });
        }
    }
    loops.sort_by(|x, y| (&x.a, &x.b).cmp(&(&y.a, &y.b)));
    let verdict = Verdict::from_bool(loops.iter().all(|l| l.check.pass));
    Ok(SmallGainReport { loops, verdict })
}
