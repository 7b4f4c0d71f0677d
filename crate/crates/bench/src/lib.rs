//! Deterministic inputs for the benchmarks.

use gascert_core::control::reference_model;
use gascert_core::model::augment;
use gascert_core::sim::{NodeScenario, Schedule};
use gascert_core::{Interconnection, Matrix, NetworkModel, NodeSpec, Scenario, Subsystem, Tuning};

/// Dense, well-conditioned Hurwitz matrix: `−(n+1)·I` plus bounded
/// pseudo-random off-diagonal entries (Gershgorin keeps it stable).
pub fn stable_matrix(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |i, j| {
        if i == j {
            -(n as f64) - 1.0 - 0.1 * i as f64
        } else {
            ((7 * i + 13 * j) as f64).sin()
        }
    })
}

fn s(x: f64) -> Matrix {
    Matrix::from_element(1, 1, x)
}

/// `k` first-order loops with integral action on a ring, coupling `0.1`.
pub fn toy_ring(k: usize) -> NetworkModel {
    let nodes = (0..k)
        .map(|i| {
            let sub = Subsystem::new(format!("s{i}"), s(-1.0), s(1.0), s(1.0), s(0.0), s(1.0)).unwrap();
            let k_bl = Matrix::from_row_slice(1, 2, &[2.0, -2.0]);
            let am = reference_model(&augment(&sub).unwrap(), &k_bl).unwrap();
            NodeSpec::new(&sub, am, Some(k_bl), Tuning::new(Matrix::identity(2, 2), 10.0, 2.0, 0.1)).unwrap()
        })
        .collect();
    let edges = if k < 2 {
        Vec::new()
    } else {
        // a 2-ring is a single pair
        (0..if k == 2 { 1 } else { k })
            .flat_map(|i| {
                let j = (i + 1) % k;
                [
                    Interconnection::new(format!("s{i}"), format!("s{j}"), s(0.1)),
                    Interconnection::new(format!("s{j}"), format!("s{i}"), s(0.1)),
                ]
            })
            .collect()
    };
    NetworkModel::new(nodes, edges).unwrap()
}

/// Unit references and a mismatched `θ` on every node of [`toy_ring`].
pub fn ring_scenario(k: usize, horizon: f64, dt: f64) -> Scenario {
    let mut sc = Scenario::new(horizon, dt);
    sc.nodes = (0..k)
        .map(|i| NodeScenario {
            id: format!("s{i}"),
            reference: Schedule::constant(vec![1.0]),
            theta: Some(Matrix::from_row_slice(2, 1, &[0.5, -0.3])),
            ..NodeScenario::default()
        })
        .collect();
    sc
}
