//! Stability certification for networks of interconnected linear MIMO
//! subsystems under decentralized and distributed adaptive control.
//!
//! The crate is organised bottom-up:
//!
//! - [`numerics`]: dense kernels (spectra, norms, Lyapunov and Riccati
//!   solves, Hamiltonian hyperbolicity, distance to instability, H∞ gain).
//! - [`model`]: subsystems, interconnections, integral augmentation and
//!   global assembly.
//! - [`connective`]: aggregate vector-Lyapunov test (matrix `M`, offset
//!   `Φ`) and the small-gain diagnostic.
//! - [`riccati`]: per-subsystem distance margins and ARE certificates.
//! - [`control`]: reference model, predictors, adaptive laws and the
//!   projection operator.
//! - [`sim`]: fixed-step RK4 simulation of the closed-loop network.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod connective;
pub mod control;
mod error;
pub mod model;
pub mod numerics;
pub mod riccati;
pub mod serde_rows;
pub mod sim;

pub use connective::{ConnectiveReport, SmallGainReport};
pub use error::{Error, Result};
pub use model::{AugmentedSubsystem, Interconnection, NetworkModel, NodeSpec, Subsystem, Tuning};
pub use numerics::{AreSolution, Matrix, Spectrum, Vector};
pub use riccati::{CertifyOptions, GasCertificate, XiMode};
pub use sim::{Mode, Scenario, SimTrace};

/// Outcome of a stability test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}
