//! Fixed-step RK4 simulation of the closed-loop network.
//!
//! Per node the joint state is plant `x̄`, predictor `x̂` and estimate `θ̂`:
//!
//! ```text
//! ẋ̄ = Âₘx̄ + B̄(u + θᵀx̄) + w + Σ Ā_ij x̄_j
//! ẋ̂ = Âₘx̂ + B̄(u + θ̂ᵀx̄) + w [+ Σ Ā_ij x̂_j]      (distributed only)
//! u = −θ̂ᵀx̄
//! ```
//!
//! `w = F·Ē·d̄` (or `Ē·d̄` with measured routing). The baseline action is
//! already inside `Âₘ`; `u_bl = −K_bl·x̄` is recorded for inspection only.
//! References and disturbances are held constant across each step.

use serde::{Deserialize, Serialize};

use crate::control::{
    mrac_control, predictor_rate, update_normalized, update_projection, PredictorInput, PredictorMode,
    ProjectionBounds,
};
use crate::model::NetworkModel;
use crate::numerics::{solve_lyapunov, Matrix, Vector};
use crate::riccati::{certify_gas, CertifyOptions};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Decentralized predictor, normalized law, Lyapunov `P_i(Q_i)`.
    #[serde(rename = "dec")]
    Decentralized,
    /// Distributed predictor, projection law, ARE `P_i` from the certificate.
    #[serde(rename = "dist")]
    Distributed,
}

/// Where the exogenous input `Ē·d̄` enters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DisturbanceRouting {
    /// `F·Ē·d̄`: only the reference rows (load assumed compensated).
    #[default]
    Excluded,
    /// Full `Ē·d̄` in plant and predictor (load is measured).
    Measured,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub t: f64,
    pub value: Vec<f64>,
}

/// Piecewise-constant signal; zero before the first breakpoint.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule(pub Vec<Breakpoint>);

impl Schedule {
    pub fn constant(value: Vec<f64>) -> Self {
        Schedule(vec![Breakpoint { t: 0.0, value }])
    }

    pub fn step(before: Vec<f64>, at: f64, after: Vec<f64>) -> Self {
        Schedule(vec![Breakpoint { t: 0.0, value: before }, Breakpoint { t: at, value: after }])
    }

    fn validate(&self, len: usize, what: &str) -> Result<()> {
        for (k, bp) in self.0.iter().enumerate() {
            if bp.value.len() != len {
                return Err(Error::Dimension(format!(
                    "{what} breakpoint {k} has {} entries, expected {len}",
                    bp.value.len()
                )));
            }
            if !bp.t.is_finite() || bp.value.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{what} breakpoint {k}")));
            }
        }
        if self.0.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(Error::InvalidParameter(format!("{what} breakpoints must be sorted by time")));
        }
        Ok(())
    }

    pub fn value_at(&self, t: f64, len: usize) -> Vector {
        self.0
            .iter()
            .take_while(|bp| bp.t <= t)
            .last()
            .map(|bp| Vector::from_row_slice(&bp.value))
            .unwrap_or_else(|| Vector::zeros(len))
    }
}

/// Per-node scenario data; everything defaults to zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeScenario {
    pub id: String,
    #[serde(default)]
    pub reference: Schedule,
    #[serde(default)]
    pub disturbance: Schedule,
    /// True uncertainty `θ` (`(n+q) × m`).
    #[serde(default, with = "crate::serde_rows::option")]
    pub theta: Option<Matrix>,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Defaults to `x0`.
    #[serde(default)]
    pub x_hat0: Option<Vec<f64>>,
    #[serde(default, with = "crate::serde_rows::option")]
    pub theta_hat0: Option<Matrix>,
}

fn default_record_every() -> usize {
    1
}
fn default_divergence_limit() -> f64 {
    1e12
}
fn default_e_floor() -> f64 {
    1e-12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub horizon: f64,
    pub dt: f64,
    /// Record every k-th step (the final sample is always kept).
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default)]
    pub disturbance_routing: DisturbanceRouting,
    /// `‖state‖∞` above this counts as divergence.
    #[serde(default = "default_divergence_limit")]
    pub divergence_limit: f64,
    /// Floor of the normalized law.
    #[serde(default = "default_e_floor")]
    pub e_floor: f64,
    #[serde(default)]
    pub nodes: Vec<NodeScenario>,
}

impl Scenario {
    pub fn new(horizon: f64, dt: f64) -> Self {
        Scenario {
            horizon,
            dt,
            record_every: 1,
            disturbance_routing: DisturbanceRouting::Excluded,
            divergence_limit: default_divergence_limit(),
            e_floor: default_e_floor(),
            nodes: Vec::new(),
        }
    }
}

/// Joint state of every node.
#[derive(Clone, Debug, PartialEq)]
pub struct SimState {
    pub x_bar: Vec<Vector>,
    pub x_hat: Vec<Vector>,
    pub theta_hat: Vec<Matrix>,
}

impl SimState {
    fn axpy(&self, h: f64, d: &SimState) -> SimState {
        SimState {
            x_bar: self.x_bar.iter().zip(&d.x_bar).map(|(x, dx)| x + dx * h).collect(),
            x_hat: self.x_hat.iter().zip(&d.x_hat).map(|(x, dx)| x + dx * h).collect(),
            theta_hat: self.theta_hat.iter().zip(&d.theta_hat).map(|(x, dx)| x + dx * h).collect(),
        }
    }

    fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.x_bar
            .iter()
            .chain(&self.x_hat)
            .flat_map(|v| v.iter().copied())
            .chain(self.theta_hat.iter().flat_map(|m| m.iter().copied()))
    }

    fn diverged(&self, limit: f64) -> bool {
        self.values().any(|v| !v.is_finite() || v.abs() > limit)
    }
}

/// Recorded series of one node; vectors per sample, `θ̂` flattened
/// row-major.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeTrace {
    pub id: String,
    /// Number of tracked outputs (the first `q` entries of `y`).
    pub q: usize,
    pub x_bar: Vec<Vec<f64>>,
    pub x_hat: Vec<Vec<f64>>,
    pub theta_hat: Vec<Vec<f64>>,
    pub u_bl: Vec<Vec<f64>>,
    pub u_mrac: Vec<Vec<f64>>,
    pub x_tilde_norm: Vec<f64>,
    /// `ȳ = C̄x̄` (outputs, then integral states).
    pub y: Vec<Vec<f64>>,
    pub reference: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimTrace {
    pub mode: Mode,
    /// Distributed mode ran with ARE `P_i` from a passing certificate.
    pub certified: bool,
    pub time: Vec<f64>,
    pub nodes: Vec<NodeTrace>,
    /// `Σ x̃ᵀPx̃ + Σ tr(θ̃ᵀΓ⁻¹θ̃)` per sample.
    pub v: Vec<f64>,
    pub diverged: bool,
    pub diverged_at: Option<f64>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }
}

/// A network and scenario resolved into everything one step needs.
pub struct Simulator<'a> {
    net: &'a NetworkModel,
    scenario: &'a Scenario,
    mode: Mode,
    p: Vec<Matrix>,
    certified: bool,
    theta: Vec<Matrix>,
    node_scenarios: Vec<NodeScenario>,
    /// Incoming `(j, Ā_ij)` per node.
    incoming: Vec<Vec<(usize, &'a Matrix)>>,
}

impl<'a> Simulator<'a> {
    pub fn new(net: &'a NetworkModel, scenario: &'a Scenario, mode: Mode, opts: &CertifyOptions) -> Result<Self> {
        if !(scenario.dt > 0.0) || !scenario.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", scenario.dt)));
        }
        if !(scenario.horizon >= 0.0) || !scenario.horizon.is_finite() {
            return Err(Error::InvalidParameter(format!("horizon must be ≥ 0, got {}", scenario.horizon)));
        }
        if scenario.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be ≥ 1".into()));
        }
        if !(scenario.divergence_limit > 0.0) {
            return Err(Error::InvalidParameter("divergence_limit must be > 0".into()));
        }
        if !(scenario.e_floor > 0.0) {
            return Err(Error::InvalidParameter("e_floor must be > 0".into()));
        }
        for ns in &scenario.nodes {
            net.index_of(&ns.id)?;
        }
        let mut node_scenarios = Vec::with_capacity(net.len());
        let mut theta = Vec::with_capacity(net.len());
        for node in net.nodes() {
            let s = &node.subsystem;
            let ns = scenario
                .nodes
                .iter()
                .find(|ns| ns.id == node.id())
                .cloned()
                .unwrap_or_else(|| NodeScenario {
                    id: node.id().to_string(),
                    ..NodeScenario::default()
                });
            ns.reference.validate(s.q, &format!("{}: reference", ns.id))?;
            ns.disturbance.validate(s.r, &format!("{}: disturbance", ns.id))?;
            let th = ns.theta.clone().unwrap_or_else(|| Matrix::zeros(s.dim(), s.m));
            check_shape(&th, s.dim(), s.m, &format!("{}: theta", ns.id))?;
            if let Some(th0) = &ns.theta_hat0 {
                check_shape(th0, s.dim(), s.m, &format!("{}: theta_hat0", ns.id))?;
            }
            for (v, what) in [(&ns.x0, "x0"), (&ns.x_hat0, "x_hat0")] {
                if let Some(v) = v {
                    if v.len() != s.dim() {
                        return Err(Error::Dimension(format!(
                            "{}: {what} has {} entries, expected {}",
                            ns.id,
                            v.len(),
                            s.dim()
                        )));
                    }
                }
            }
            theta.push(th);
            node_scenarios.push(ns);
        }

        let (p, certified) = match mode {
            Mode::Decentralized => (lyapunov_ps(net)?, false),
            Mode::Distributed => {
                let cert = certify_gas(net, opts)?;
                if cert.is_certified() {
                    let mut ps = Vec::with_capacity(net.len());
                    for node in net.nodes() {
                        let sc = cert.get(node.id()).expect("certificate covers every node");
                        ps.push(sc.p.clone().expect("certified subsystems carry P"));
                    }
                    (ps, true)
                } else {
                    (lyapunov_ps(net)?, false)
                }
            }
        };

        let mut incoming = vec![Vec::new(); net.len()];
        for e in net.edges() {
            let (i, j) = (net.index_of(&e.to)?, net.index_of(&e.from)?);
            incoming[i].push((j, &e.a));
        }
        Ok(Simulator {
            net,
            scenario,
            mode,
            p,
            certified,
            theta,
            node_scenarios,
            incoming,
        })
    }

    pub fn certified(&self) -> bool {
        self.certified
    }

    /// `P_i` used by the adaptive laws and `V`.
    pub fn lyapunov_matrices(&self) -> &[Matrix] {
        &self.p
    }

    pub fn initial_state(&self) -> SimState {
        let mut st = SimState {
            x_bar: Vec::new(),
            x_hat: Vec::new(),
            theta_hat: Vec::new(),
        };
        for (node, ns) in self.net.nodes().iter().zip(&self.node_scenarios) {
            let s = &node.subsystem;
            let x0 = ns
                .x0
                .as_deref()
                .map(Vector::from_row_slice)
                .unwrap_or_else(|| Vector::zeros(s.dim()));
            let xh0 = ns.x_hat0.as_deref().map(Vector::from_row_slice).unwrap_or_else(|| x0.clone());
            st.x_bar.push(x0);
            st.x_hat.push(xh0);
            st.theta_hat
                .push(ns.theta_hat0.clone().unwrap_or_else(|| Matrix::zeros(s.dim(), s.m)));
        }
        st
    }

    /// Exogenous forcing per node at time `t`.
    pub fn forcing(&self, t: f64) -> Vec<Vector> {
        self.net
            .nodes()
            .iter()
            .zip(&self.node_scenarios)
            .map(|(node, ns)| {
                let s = &node.subsystem;
                let mut dbar = Vector::zeros(s.exo_dim());
                dbar.rows_mut(0, s.r).copy_from(&ns.disturbance.value_at(t, s.r));
                dbar.rows_mut(s.r, s.q).copy_from(&ns.reference.value_at(t, s.q));
                let w = &s.ebar * dbar;
                match self.scenario.disturbance_routing {
                    DisturbanceRouting::Excluded => &s.f * w,
                    DisturbanceRouting::Measured => w,
                }
            })
            .collect()
    }

    /// Time derivative of the joint state.
    pub fn rate(&self, st: &SimState, forcing: &[Vector]) -> Result<SimState> {
        let nodes = self.net.nodes();
        let mut d = SimState {
            x_bar: Vec::with_capacity(nodes.len()),
            x_hat: Vec::with_capacity(nodes.len()),
            theta_hat: Vec::with_capacity(nodes.len()),
        };
        let predictor_mode = match self.mode {
            Mode::Decentralized => PredictorMode::Decentralized,
            Mode::Distributed => PredictorMode::Distributed,
        };
        for (i, node) in nodes.iter().enumerate() {
            let s = &node.subsystem;
            let (xb, xh, th) = (&st.x_bar[i], &st.x_hat[i], &st.theta_hat[i]);
            let u = mrac_control(th, xb)?;

            let mut plant = &node.am * xb + &s.bbar * (&u + self.theta[i].tr_mul(xb)) + &forcing[i];
            for &(j, a) in &self.incoming[i] {
                plant.gemv(1.0, a, &st.x_bar[j], 1.0);
            }

            let neighbors: Vec<(&Matrix, &Vector)> =
                self.incoming[i].iter().map(|&(j, a)| (a, &st.x_hat[j])).collect();
            let predictor = predictor_rate(
                predictor_mode,
                &PredictorInput {
                    am: &node.am,
                    bbar: &s.bbar,
                    x_hat: xh,
                    x_bar: xb,
                    u_mrac: &u,
                    theta_hat: th,
                    forcing: &forcing[i],
                    neighbors: Some(&neighbors),
                },
            )?;

            let e = xh - xb;
            let tuning = &node.tuning;
            let theta_rate = match self.mode {
                Mode::Decentralized => {
                    update_normalized(&e, &self.p[i], &s.bbar, xb, tuning.gamma, self.scenario.e_floor)?
                }
                Mode::Distributed if tuning.theta_max > 0.0 => update_projection(
                    &e,
                    &self.p[i],
                    &s.bbar,
                    xb,
                    tuning.gamma,
                    th,
                    ProjectionBounds {
                        theta_max: tuning.theta_max,
                        eps0: tuning.eps0,
                    },
                )?,
                // θ_max = 0 pins the estimate at the origin
                Mode::Distributed => Matrix::zeros(th.nrows(), th.ncols()),
            };
            d.x_bar.push(plant);
            d.x_hat.push(predictor);
            d.theta_hat.push(theta_rate);
        }
        Ok(d)
    }

    /// One classical RK4 step with inputs frozen at `t`.
    pub fn step(&self, st: &SimState, t: f64, dt: f64) -> Result<SimState> {
        let w = self.forcing(t);
        let k1 = self.rate(st, &w)?;
        let k2 = self.rate(&st.axpy(dt / 2.0, &k1), &w)?;
        let k3 = self.rate(&st.axpy(dt / 2.0, &k2), &w)?;
        let k4 = self.rate(&st.axpy(dt, &k3), &w)?;
        Ok(st
            .axpy(dt / 6.0, &k1)
            .axpy(dt / 3.0, &k2)
            .axpy(dt / 3.0, &k3)
            .axpy(dt / 6.0, &k4))
    }

    /// `Σ x̃ᵀPx̃ + Σ tr(θ̃ᵀΓ⁻¹θ̃)` with `θ̃ = θ − θ̂`.
    pub fn lyapunov_value(&self, st: &SimState) -> f64 {
        let mut v = 0.0;
        for (i, node) in self.net.nodes().iter().enumerate() {
            let xt = &st.x_bar[i] - &st.x_hat[i];
            v += xt.dot(&(&self.p[i] * &xt));
            v += (&self.theta[i] - &st.theta_hat[i]).norm_squared() / node.tuning.gamma;
        }
        v
    }

    fn record(&self, trace: &mut SimTrace, st: &SimState, t: f64) {
        trace.time.push(t);
        trace.v.push(self.lyapunov_value(st));
        for (i, node) in self.net.nodes().iter().enumerate() {
            let s = &node.subsystem;
            let nt = &mut trace.nodes[i];
            let xb = &st.x_bar[i];
            let th = &st.theta_hat[i];
            nt.x_bar.push(xb.iter().copied().collect());
            nt.x_hat.push(st.x_hat[i].iter().copied().collect());
            nt.theta_hat
                .push((0..th.nrows()).flat_map(|r| th.row(r).iter().copied().collect::<Vec<_>>()).collect());
            nt.u_bl.push((-(&node.k_bl * xb)).iter().copied().collect());
            nt.u_mrac.push((-(th.tr_mul(xb))).iter().copied().collect());
            nt.x_tilde_norm.push((xb - &st.x_hat[i]).norm());
            nt.y.push((&s.cbar * xb).iter().copied().collect());
            nt.reference
                .push(self.node_scenarios[i].reference.value_at(t, s.q).iter().copied().collect());
        }
    }

    pub fn run(&self) -> Result<SimTrace> {
        let sc = self.scenario;
        let mut trace = SimTrace {
            mode: self.mode,
            certified: self.certified,
            time: Vec::new(),
            nodes: self
                .net
                .nodes()
                .iter()
                .map(|n| NodeTrace {
                    id: n.id().to_string(),
                    q: n.subsystem.q,
                    ..NodeTrace::default()
                })
                .collect(),
            v: Vec::new(),
            diverged: false,
            diverged_at: None,
        };
        let steps = if sc.horizon == 0.0 {
            0
        } else {
            (sc.horizon / sc.dt - 1e-9).ceil().max(1.0) as usize
        };
        let time_at = |k: usize| if k == steps { sc.horizon } else { k as f64 * sc.dt };
        let mut st = self.initial_state();
        if st.diverged(sc.divergence_limit) {
            return Err(Error::NonFinite("initial state".into()));
        }
        self.record(&mut trace, &st, 0.0);
        for k in 0..steps {
            let (t0, t1) = (time_at(k), time_at(k + 1));
            let next = self.step(&st, t0, t1 - t0)?;
            if next.diverged(sc.divergence_limit) {
                trace.diverged = true;
                trace.diverged_at = Some(t1);
                if next.values().all(f64::is_finite) {
                    self.record(&mut trace, &next, t1);
                }
                break;
            }
            st = next;
            if (k + 1) % sc.record_every == 0 || k + 1 == steps {
                self.record(&mut trace, &st, t1);
            }
        }
        Ok(trace)
    }
}

fn check_shape(m: &Matrix, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::Dimension(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn lyapunov_ps(net: &NetworkModel) -> Result<Vec<Matrix>> {
    net.nodes().iter().map(|n| solve_lyapunov(&n.am, &n.tuning.q)).collect()
}

/// Simulates `net` under `scenario` with default certification options.
pub fn run(net: &NetworkModel, scenario: &Scenario, mode: Mode) -> Result<SimTrace> {
    run_with(net, scenario, mode, &CertifyOptions::default())
}

pub fn run_with(net: &NetworkModel, scenario: &Scenario, mode: Mode, opts: &CertifyOptions) -> Result<SimTrace> {
    Simulator::new(net, scenario, mode, opts)?.run()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub id: String,
    pub max_x_tilde: f64,
    /// Last time an output left its 2% band around the final value.
    pub settling_time: f64,
    /// `max |y_final − r_final|` over tracked outputs.
    pub steady_state_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub nodes: Vec<NodeMetrics>,
    pub final_v: f64,
    /// Largest `V(t_{k+1}) − V(t_k)` (floored at 0); certified runs only.
    pub max_v_increase: Option<f64>,
    pub diverged: bool,
}

fn settling_time(time: &[f64], series: &[f64]) -> f64 {
    let Some(&last) = series.last() else {
        return 0.0;
    };
    let peak = series.iter().map(|y| (y - last).abs()).fold(0.0, f64::max);
    let band = 0.02 * peak;
    match series.iter().rposition(|y| (y - last).abs() > band) {
        Some(k) => time[(k + 1).min(time.len() - 1)],
        None => 0.0,
    }
}

pub fn metrics(trace: &SimTrace) -> Metrics {
    let nodes = trace
        .nodes
        .iter()
        .map(|nt| {
            let max_x_tilde = nt.x_tilde_norm.iter().copied().fold(0.0, f64::max);
            let mut settling: f64 = 0.0;
            let mut sse: f64 = 0.0;
            for k in 0..nt.q {
                let ys: Vec<f64> = nt.y.iter().map(|y| y[k]).collect();
                settling = settling.max(settling_time(&trace.time, &ys));
                if let (Some(y), Some(r)) = (nt.y.last(), nt.reference.last()) {
                    sse = sse.max((y[k] - r[k]).abs());
                }
            }
            NodeMetrics {
                id: nt.id.clone(),
                max_x_tilde,
                settling_time: settling,
                steady_state_error: sse,
            }
        })
        .collect();
    let max_v_increase = trace
        .certified
        .then(|| trace.v.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max));
    Metrics {
        nodes,
        final_v: trace.v.last().copied().unwrap_or(0.0),
        max_v_increase,
        diverged: trace.diverged,
    }
}
