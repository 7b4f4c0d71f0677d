//! Distributed GAS certificate: interconnection bound `Ξ²`, distance
//! margin `γ − √(N·Ξ²)`, slack `ε`, and the per-subsystem ARE
//! `ÂₘᵀP + PÂₘ + N·P² + (Ξ² + ε)I = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::NetworkModel;
use crate::numerics::{distance_to_instability, solve_are, spectral_norm, symmetric_extremes, Matrix};
use crate::{Error, Result, Verdict};

/// How `Ξ_i²` aggregates edge norms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XiMode {
    /// `Σ_{j∈𝒩_i} ‖Ā_ij‖²` over incoming edges.
    #[default]
    PerEdge,
    /// `max(incoming sum, outgoing sum)`: the symmetric-bound reading,
    /// which also covers the cross terms a node's state feeds into its
    /// neighbours.
    Symmetric,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    /// Absolute tolerance of the distance bisection.
    pub tol: f64,
    pub xi_mode: XiMode,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            tol: 1e-10,
            xi_mode: XiMode::PerEdge,
        }
    }
}

/// `Ξ_i²` for node index `i`. Model-unknown edges contribute their
/// supplied bound squared.
pub fn xi_squared(net: &NetworkModel, i: usize, mode: XiMode) -> Result<f64> {
    if i >= net.len() {
        return Err(Error::UnknownSubsystem(format!("#{i}")));
    }
    let mut incoming = 0.0;
    for e in net.incoming(i) {
        incoming += e.gain()?.powi(2);
    }
    match mode {
        XiMode::PerEdge => Ok(incoming),
        XiMode::Symmetric => {
            let mut outgoing = 0.0;
            for e in net.outgoing(i) {
                outgoing += e.gain()?.powi(2);
            }
            Ok(f64::max(incoming, outgoing))
        }
    }
}

/// `γ − √(N·Ξ²)`, with `γ` the (lower-bounded) distance to instability.
pub fn gas_margin(am: &Matrix, n_i: usize, xi2: f64, tol: f64) -> Result<f64> {
    check_xi2(xi2)?;
    let gamma = distance_to_instability(am, n_i, tol)?;
    Ok(gamma - (n_i as f64 * xi2).sqrt())
}

/// `ε = ½(γ²/N − Ξ²)`: half of the gap left before the Hamiltonian at
/// `q = Ξ² + ε` loses hyperbolicity. `N = 0` is treated as `N = 1`.
pub fn epsilon_margin(am: &Matrix, n_i: usize, xi2: f64, tol: f64) -> Result<f64> {
    check_xi2(xi2)?;
    let gamma = distance_to_instability(am, n_i, tol)?;
    epsilon_from(gamma, n_i, xi2)
}

fn epsilon_from(gamma: f64, n_i: usize, xi2: f64) -> Result<f64> {
    let margin = gamma - (n_i as f64 * xi2).sqrt();
    if !(margin > 0.0) {
        return Err(Error::NoMargin(margin));
    }
    let eps = 0.5 * (gamma * gamma / n_i.max(1) as f64 - xi2);
    if !(eps > 0.0) {
        return Err(Error::NoMargin(margin));
    }
    Ok(eps)
}

fn check_xi2(xi2: f64) -> Result<()> {
    if !(xi2 >= 0.0) || !xi2.is_finite() {
        return Err(Error::InvalidParameter(format!("Ξ² must be finite and ≥ 0, got {xi2}")));
    }
    Ok(())
}

/// Residual acceptance bound `1e-8·max(1, ‖P‖²)`.
pub fn residual_tolerance(p: &Matrix) -> f64 {
    let pn = spectral_norm(p).unwrap_or(f64::INFINITY);
    1e-8 * (pn * pn).max(1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsystemCertificate {
    pub id: String,
    pub n_neighbors: usize,
    pub xi2: Option<f64>,
    /// Distance to instability of `Âₘ` (bisection lower bound).
    pub gamma: Option<f64>,
    /// `γ − √(N·Ξ²)`
    pub margin: Option<f64>,
    pub epsilon: Option<f64>,
    #[serde(with = "crate::serde_rows::option")]
    pub p: Option<Matrix>,
    pub p_min_eig: Option<f64>,
    pub are_residual: Option<f64>,
    pub residual_tolerance: Option<f64>,
    pub certified: bool,
    /// Why this subsystem failed, if it did.
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GasCertificate {
    pub xi_mode: XiMode,
    /// Sorted by subsystem id.
    pub subsystems: Vec<SubsystemCertificate>,
    pub failing: Vec<String>,
    pub verdict: Verdict,
}

impl GasCertificate {
    pub fn is_certified(&self) -> bool {
        self.verdict.passed()
    }

    pub fn get(&self, id: &str) -> Option<&SubsystemCertificate> {
        self.subsystems.iter().find(|s| s.id == id)
    }
}

fn certify_one(net: &NetworkModel, i: usize, opts: &CertifyOptions) -> SubsystemCertificate {
    let node = &net.nodes()[i];
    let n_i = net.neighbor_count(i);
    let mut cert = SubsystemCertificate {
        id: node.id().to_string(),
        n_neighbors: n_i,
        xi2: None,
        gamma: None,
        margin: None,
        epsilon: None,
        p: None,
        p_min_eig: None,
        are_residual: None,
        residual_tolerance: None,
        certified: false,
        failure: None,
    };
    let outcome = (|| -> Result<()> {
        let xi2 = xi_squared(net, i, opts.xi_mode)?;
        cert.xi2 = Some(xi2);
        let gamma = distance_to_instability(&node.am, n_i, opts.tol)?;
        cert.gamma = Some(gamma);
        cert.margin = Some(gamma - (n_i as f64 * xi2).sqrt());
        let eps = epsilon_from(gamma, n_i, xi2)?;
        cert.epsilon = Some(eps);
        let sol = solve_are(&node.am, n_i, xi2 + eps)?;
        let tol = residual_tolerance(&sol.p);
        let (pmin, _) = symmetric_extremes(&sol.p)?;
        cert.p_min_eig = Some(pmin);
        cert.are_residual = Some(sol.residual_norm);
        cert.residual_tolerance = Some(tol);
        cert.p = Some(sol.p);
        if !(pmin > 0.0) {
            return Err(Error::InvalidParameter(format!("P is not positive definite (λ_min = {pmin:e})")));
        }
        if !(sol.residual_norm <= tol) {
            return Err(Error::IllConditioned(format!(
                "ARE residual {:e} exceeds {tol:e}",
                sol.residual_norm
            )));
        }
        if !sol.closed_loop_spectrum.is_hurwitz() {
            return Err(Error::IllConditioned("A + N·P is not Hurwitz".into()));
        }
        Ok(())
    })();
    match outcome {
        Ok(()) => cert.certified = true,
        Err(e) => cert.failure = Some(e.to_string()),
    }
    cert
}

/// Certifies every subsystem independently (concurrently); failures are
/// collected, never short-circuited.
pub fn certify_gas(net: &NetworkModel, opts: &CertifyOptions) -> Result<GasCertificate> {
    if !(opts.tol > 0.0) || !opts.tol.is_finite() {
        return Err(Error::InvalidParameter(format!("tolerance must be > 0, got {}", opts.tol)));
    }
    let mut subsystems: Vec<SubsystemCertificate> =
        (0..net.len()).into_par_iter().map(|i| certify_one(net, i, opts)).collect();
    subsystems.sort_by(|a, b| a.id.cmp(&b.id));
    let failing: Vec<String> = subsystems.iter().filter(|s| !s.certified).map(|s| s.id.clone()).collect();
    Ok(GasCertificate {
        xi_mode: opts.xi_mode,
        verdict: Verdict::from_bool(failing.is_empty()),
        subsystems,
        failing,
    })
}
