//! Subsystems, interconnections, integral augmentation and global assembly.
//!
//! Edge convention: an [`Interconnection`] `from = j, to = i` carries the
//! block `A_ij` exactly as it appears in `ζ_i = Σ_j A_ij x_j`, so the
//! neighbour set of `i` is the set of its incoming edges.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::numerics::{ensure_finite, ensure_hurwitz, ensure_square, spectral_norm, Matrix};
use crate::{Error, Result};

/// Raw state-space block `(A_ii, B_i, C_i, D_i, E_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SubsystemRepr")]
pub struct Subsystem {
    pub id: String,
    #[serde(with = "crate::serde_rows")]
    pub a: Matrix,
    #[serde(with = "crate::serde_rows")]
    pub b: Matrix,
    #[serde(with = "crate::serde_rows")]
    pub c: Matrix,
    #[serde(with = "crate::serde_rows")]
    pub d: Matrix,
    #[serde(with = "crate::serde_rows")]
    pub e: Matrix,
}

#[derive(Deserialize)]
struct SubsystemRepr {
    id: String,
    #[serde(with = "crate::serde_rows")]
    a: Matrix,
    #[serde(with = "crate::serde_rows")]
    b: Matrix,
    #[serde(with = "crate::serde_rows")]
    c: Matrix,
    #[serde(with = "crate::serde_rows")]
    d: Matrix,
    #[serde(with = "crate::serde_rows")]
    e: Matrix,
}

impl TryFrom<SubsystemRepr> for Subsystem {
    type Error = Error;

    fn try_from(r: SubsystemRepr) -> Result<Self> {
        Subsystem::new(r.id, r.a, r.b, r.c, r.d, r.e)
    }
}

/// Row lists cannot carry the column count of an empty matrix.
fn empty_as(m: Matrix, rows: usize, cols: usize) -> Matrix {
    if m.is_empty() {
        Matrix::zeros(rows, cols)
    } else {
        m
    }
}

fn expect_shape(m: &Matrix, rows: usize, cols: usize, what: &str) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::Dimension(format!(
            "{what} is {}x{}, expected {rows}x{cols}",
            m.nrows(),
            m.ncols()
        )));
    }
    ensure_finite(m, what)
}

impl Subsystem {
    /// Checks that the blocks are dimension-consistent and finite.
    pub fn new(id: impl Into<String>, a: Matrix, b: Matrix, c: Matrix, d: Matrix, e: Matrix) -> Result<Self> {
        let id = id.into();
        let n = ensure_square(&a, "A_ii")?;
        ensure_finite(&a, &format!("{id}: A"))?;
        let b = empty_as(b, n, 0);
        let c = empty_as(c, 0, n);
        let (m, q) = (b.ncols(), c.nrows());
        let d = empty_as(d, q, m);
        let e = empty_as(e, n, 0);
        let r = e.ncols();
        expect_shape(&b, n, m, &format!("{id}: B"))?;
        expect_shape(&c, q, n, &format!("{id}: C"))?;
        expect_shape(&d, q, m, &format!("{id}: D"))?;
        expect_shape(&e, n, r, &format!("{id}: E"))?;
        Ok(Subsystem { id, a, b, c, d, e })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn m(&self) -> usize {
        self.b.ncols()
    }
    pub fn q(&self) -> usize {
        self.c.nrows()
    }
    pub fn r(&self) -> usize {
        self.e.ncols()
    }

    /// Assumption-2 check on the raw pair `(A_ii, B_i)`.
    pub fn is_controllable(&self) -> bool {
        check_controllability(&self.a, &self.b).unwrap_or(false)
    }
}

/// Subsystem with the integral state `ξ̇ = r − y` appended.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "AugmentedRepr")]
pub struct AugmentedSubsystem {
    pub id: String,
    pub n: usize,
    pub q: usize,
    pub m: usize,
    pub r: usize,
    /// `[[A, 0], [−C, 0]]`
    #[serde(with = "crate::serde_rows")]
    pub abar: Matrix,
    /// `[B; 0]`
    #[serde(with = "crate::serde_rows")]
    pub bbar: Matrix,
    /// `[[C, 0], [0, I]]`
    #[serde(with = "crate::serde_rows")]
    pub cbar: Matrix,
    /// `[D; 0]`
    #[serde(with = "crate::serde_rows")]
    pub dbar: Matrix,
    /// `[[E, 0], [0, I]]`, acting on `d̄ = [d; r]`
    #[serde(with = "crate::serde_rows")]
    pub ebar: Matrix,
    /// `diag(0_n, I_q)`: keeps only the reference rows of `Ē·d̄`.
    #[serde(with = "crate::serde_rows")]
    pub f: Matrix,
}

#[derive(Deserialize)]
struct AugmentedRepr {
    id: String,
    n: usize,
    q: usize,
    m: usize,
    r: usize,
    #[serde(with = "crate::serde_rows")]
    abar: Matrix,
    #[serde(with = "crate::serde_rows")]
    bbar: Matrix,
    #[serde(with = "crate::serde_rows")]
    cbar: Matrix,
    #[serde(with = "crate::serde_rows")]
    dbar: Matrix,
    #[serde(with = "crate::serde_rows")]
    ebar: Matrix,
    #[serde(with = "crate::serde_rows")]
    f: Matrix,
}

impl From<AugmentedRepr> for AugmentedSubsystem {
    fn from(x: AugmentedRepr) -> Self {
        let dim = x.n + x.q;
        AugmentedSubsystem {
            abar: empty_as(x.abar, dim, dim),
            bbar: empty_as(x.bbar, dim, x.m),
            cbar: empty_as(x.cbar, 2 * x.q, dim),
            dbar: empty_as(x.dbar, 2 * x.q, x.m),
            ebar: empty_as(x.ebar, dim, x.r + x.q),
            f: empty_as(x.f, dim, dim),
            id: x.id,
            n: x.n,
            q: x.q,
            m: x.m,
            r: x.r,
        }
    }
}

impl AugmentedSubsystem {
    /// Augmented state dimension `n + q`.
    pub fn dim(&self) -> usize {
        self.n + self.q
    }

    /// Length of `d̄ = [d; r]`.
    pub fn exo_dim(&self) -> usize {
        self.r + self.q
    }
}

pub fn augment(s: &Subsystem) -> Result<AugmentedSubsystem> {
    let s = Subsystem::new(s.id.clone(), s.a.clone(), s.b.clone(), s.c.clone(), s.d.clone(), s.e.clone())?;
    let (n, m, q, r) = (s.n(), s.m(), s.q(), s.r());
    let dim = n + q;

    let mut abar = Matrix::zeros(dim, dim);
    abar.view_mut((0, 0), (n, n)).copy_from(&s.a);
    abar.view_mut((n, 0), (q, n)).copy_from(&(-&s.c));

    let mut bbar = Matrix::zeros(dim, m);
    bbar.view_mut((0, 0), (n, m)).copy_from(&s.b);

    let mut cbar = Matrix::zeros(2 * q, dim);
    cbar.view_mut((0, 0), (q, n)).copy_from(&s.c);
    cbar.view_mut((q, n), (q, q)).fill_with_identity();

    let mut dbar = Matrix::zeros(2 * q, m);
    dbar.view_mut((0, 0), (q, m)).copy_from(&s.d);

    let mut ebar = Matrix::zeros(dim, r + q);
    ebar.view_mut((0, 0), (n, r)).copy_from(&s.e);
    ebar.view_mut((n, r), (q, q)).fill_with_identity();

    let mut f = Matrix::zeros(dim, dim);
    f.view_mut((n, n), (q, q)).fill_with_identity();

    Ok(AugmentedSubsystem {
        id: s.id,
        n,
        q,
        m,
        r,
        abar,
        bbar,
        cbar,
        dbar,
        ebar,
        f,
    })
}

/// Directed coupling `from = j → to = i` with block `A_ij`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interconnection {
    pub from: String,
    pub to: String,
    #[serde(with = "crate::serde_rows")]
    pub a: Matrix,
    /// The block is not trusted; analyses use `norm_bound` instead of `‖a‖₂`.
    #[serde(default)]
    pub model_unknown: bool,
    #[serde(default)]
    pub norm_bound: Option<f64>,
}

impl Interconnection {
    pub fn new(from: impl Into<String>, to: impl Into<String>, a: Matrix) -> Self {
        Interconnection {
            from: from.into(),
            to: to.into(),
            a,
            model_unknown: false,
            norm_bound: None,
        }
    }

    /// Edge whose block is only known through `‖A_ij‖₂ ≤ bound`.
    pub fn bound_only(from: impl Into<String>, to: impl Into<String>, a: Matrix, bound: f64) -> Self {
        Interconnection {
            model_unknown: true,
            norm_bound: Some(bound),
            ..Interconnection::new(from, to, a)
        }
    }

    fn edge_error(&self, reason: impl Into<String>) -> Error {
        Error::Edge {
            from: self.from.clone(),
            to: self.to.clone(),
            reason: reason.into(),
        }
    }

    /// Gain used by the certificates: the supplied bound for model-unknown
    /// edges, `‖A_ij‖₂` otherwise.
    pub fn gain(&self) -> Result<f64> {
        if self.model_unknown {
            match self.norm_bound {
                Some(b) if b >= 0.0 && b.is_finite() => Ok(b),
                Some(b) => Err(self.edge_error(format!("norm bound must be finite and ≥ 0, got {b}"))),
                None => Err(self.edge_error("model-unknown edge needs a norm bound")),
            }
        } else {
            spectral_norm(&self.a)
        }
    }
}

/// `[[A_ij, 0], [0, 0]]` of shape `(n_i+q_i) × (n_j+q_j)`.
///
/// A block that already has the augmented shape is returned unchanged.
pub fn augment_edge(e: &Interconnection, to: &AugmentedSubsystem, from: &AugmentedSubsystem) -> Result<Matrix> {
    let (ni, nj) = (to.n, from.n);
    let shape = e.a.shape();
    if shape == (to.dim(), from.dim()) {
        return Ok(e.a.clone());
    }
    if shape != (ni, nj) {
        return Err(e.edge_error(format!(
            "block is {}x{}, expected {ni}x{nj} (raw) or {}x{} (augmented)",
            shape.0,
            shape.1,
            to.dim(),
            from.dim()
        )));
    }
    let mut out = Matrix::zeros(to.dim(), from.dim());
    out.view_mut((0, 0), (ni, nj)).copy_from(&e.a);
    Ok(out)
}

/// Per-subsystem design parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    /// Lyapunov weight `Q_i` (symmetric positive definite).
    #[serde(with = "crate::serde_rows")]
    pub q: Matrix,
    /// Adaptive gain `Γ_i > 0`.
    pub gamma: f64,
    /// Parameter bound `θ_max ≥ 0`.
    pub theta_max: f64,
    /// Projection tolerance `ε₀ > 0`.
    pub eps0: f64,
}

pub const DEFAULT_EPS0: f64 = 0.1;

impl Tuning {
    pub fn new(q: Matrix, gamma: f64, theta_max: f64, eps0: f64) -> Self {
        Tuning {
            q,
            gamma,
            theta_max,
            eps0,
        }
    }

    fn validate(&self, id: &str, dim: usize) -> Result<()> {
        expect_shape(&self.q, dim, dim, &format!("{id}: Q"))?;
        let scale = self.q.norm().max(f64::MIN_POSITIVE);
        if (&self.q - self.q.transpose()).norm() > 1e-10 * scale || self.q.clone().cholesky().is_none() {
            return Err(Error::InvalidParameter(format!("{id}: Q must be symmetric positive definite")));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!("{id}: Gamma must be > 0, got {}", self.gamma)));
        }
        if !(self.theta_max >= 0.0) || !self.theta_max.is_finite() {
            return Err(Error::InvalidParameter(format!("{id}: theta_max must be ≥ 0, got {}", self.theta_max)));
        }
        if !(self.eps0 > 0.0) || !self.eps0.is_finite() {
            return Err(Error::InvalidParameter(format!("{id}: eps0 must be > 0, got {}", self.eps0)));
        }
        Ok(())
    }
}

/// One node of the network: augmented plant, desired dynamics, gains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub subsystem: AugmentedSubsystem,
    /// Desired closed-loop matrix `Âₘ` (Hurwitz).
    #[serde(with = "crate::serde_rows")]
    pub am: Matrix,
    /// Baseline gain `K_bl` (`m × (n+q)`).
    #[serde(with = "crate::serde_rows")]
    pub k_bl: Matrix,
    pub tuning: Tuning,
}

impl NodeSpec {
    /// Augments `s`; a missing `K_bl` is taken as zero. Consistency is
    /// checked when the node joins a [`NetworkModel`].
    pub fn new(s: &Subsystem, am: Matrix, k_bl: Option<Matrix>, tuning: Tuning) -> Result<Self> {
        let subsystem = augment(s)?;
        let k_bl = k_bl.unwrap_or_else(|| Matrix::zeros(subsystem.m, subsystem.dim()));
        Ok(NodeSpec {
            subsystem,
            am,
            k_bl,
            tuning,
        })
    }

    pub fn id(&self) -> &str {
        &self.subsystem.id
    }

    pub fn dim(&self) -> usize {
        self.subsystem.dim()
    }
}

/// Validated network: node ids unique, edges resolved and augmented,
/// every `Âₘ` Hurwitz, every `Q_i` SPD.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetworkModel {
    nodes: Vec<NodeSpec>,
    /// Augmented edges (`Ā_ij`), zero blocks dropped.
    edges: Vec<Interconnection>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl NetworkModel {
    /// Raw edges are augmented; exactly-zero edges that carry no bound are
    /// dropped (they are not neighbours).
    pub fn new(nodes: Vec<NodeSpec>, edges: Vec<Interconnection>) -> Result<Self> {
        let mut index = HashMap::new();
        for (k, node) in nodes.iter().enumerate() {
            if index.insert(node.id().to_string(), k).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate subsystem id `{}`", node.id())));
            }
            let dim = node.dim();
            let id = node.id();
            expect_shape(&node.am, dim, dim, &format!("{id}: reference model"))?;
            ensure_hurwitz(&node.am, &format!("{id}: reference model"))?;
            expect_shape(&node.k_bl, node.subsystem.m, dim, &format!("{id}: K_bl"))?;
            node.tuning.validate(id, dim)?;
        }
        let mut seen = HashMap::new();
        let mut augmented = Vec::with_capacity(edges.len());
        for e in edges {
            let to = *index.get(&e.to).ok_or_else(|| Error::UnknownSubsystem(e.to.clone()))?;
            let from = *index.get(&e.from).ok_or_else(|| Error::UnknownSubsystem(e.from.clone()))?;
            if to == from {
                return Err(e.edge_error("self-loops belong in A_ii"));
            }
            if seen.insert((from, to), ()).is_some() {
                return Err(e.edge_error("duplicate edge"));
            }
            ensure_finite(&e.a, &format!("edge {} -> {}", e.from, e.to))?;
            let a = augment_edge(&e, &nodes[to].subsystem, &nodes[from].subsystem)?;
            let edge = Interconnection { a, ..e };
            edge.gain()?;
            if edge.model_unknown || edge.a.iter().any(|&x| x != 0.0) {
                augmented.push(edge);
            }
        }
        Ok(NetworkModel {
            nodes,
            edges: augmented,
            index,
        })
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Interconnection] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownSubsystem(id.to_string()))
    }

    /// Edges `j → i` (the neighbour set 𝒩_i).
    pub fn incoming(&self, i: usize) -> impl Iterator<Item = &Interconnection> {
        let id = self.nodes[i].id().to_string();
        self.edges.iter().filter(move |e| e.to == id)
    }

    /// Edges `i → j`.
    pub fn outgoing(&self, i: usize) -> impl Iterator<Item = &Interconnection> {
        let id = self.nodes[i].id().to_string();
        self.edges.iter().filter(move |e| e.from == id)
    }

    /// `N_i = |𝒩_i|`.
    pub fn neighbor_count(&self, i: usize) -> usize {
        self.incoming(i).count()
    }

    /// Start offsets of each node in the stacked state vector.
    pub fn offsets(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .scan(0, |acc, n| {
                let start = *acc;
                *acc += n.dim();
                Some(start)
            })
            .collect()
    }

    pub fn total_dim(&self) -> usize {
        self.nodes.iter().map(NodeSpec::dim).sum()
    }

    /// Same network without the edge `from → to`.
    pub fn without_edge(&self, from: &str, to: &str) -> Result<Self> {
        let edges = self
            .edges
            .iter()
            .filter(|e| !(e.from == from && e.to == to))
            .cloned()
            .collect();
        NetworkModel::new(self.nodes.clone(), edges)
    }
}

/// Block-structured global system (augmented blocks).
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalMatrices {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub d: Matrix,
    pub e: Matrix,
    /// `(state, input, output, exogenous)` offsets per node.
    pub offsets: Vec<[usize; 4]>,
}

impl GlobalMatrices {
    /// Block `(i, j)` of the global `A`.
    pub fn a_block(&self, net: &NetworkModel, i: usize, j: usize) -> Matrix {
        let (ri, cj) = (self.offsets[i][0], self.offsets[j][0]);
        self.a
            .view((ri, cj), (net.nodes[i].dim(), net.nodes[j].dim()))
            .into_owned()
    }
}

fn place_edges(net: &NetworkModel, target: &mut Matrix, offsets: &[usize]) {
    for e in &net.edges {
        let (i, j) = (net.index[&e.to], net.index[&e.from]);
        target.view_mut((offsets[i], offsets[j]), e.a.shape()).copy_from(&e.a);
    }
}

pub fn assemble_global(net: &NetworkModel) -> GlobalMatrices {
    let (mut ns, mut ms, mut ps, mut rs) = (0, 0, 0, 0);
    let mut offsets = Vec::with_capacity(net.len());
    for node in &net.nodes {
        let s = &node.subsystem;
        offsets.push([ns, ms, ps, rs]);
        ns += s.dim();
        ms += s.m;
        ps += 2 * s.q;
        rs += s.exo_dim();
    }
    let (mut a, mut b, mut c, mut d, mut e) = (
        Matrix::zeros(ns, ns),
        Matrix::zeros(ns, ms),
        Matrix::zeros(ps, ns),
        Matrix::zeros(ps, ms),
        Matrix::zeros(ns, rs),
    );
    for (node, &[x, u, y, w]) in net.nodes.iter().zip(&offsets) {
        let s = &node.subsystem;
        a.view_mut((x, x), s.abar.shape()).copy_from(&s.abar);
        b.view_mut((x, u), s.bbar.shape()).copy_from(&s.bbar);
        c.view_mut((y, x), s.cbar.shape()).copy_from(&s.cbar);
        d.view_mut((y, u), s.dbar.shape()).copy_from(&s.dbar);
        e.view_mut((x, w), s.ebar.shape()).copy_from(&s.ebar);
    }
    let state: Vec<usize> = offsets.iter().map(|o| o[0]).collect();
    place_edges(net, &mut a, &state);
    GlobalMatrices { a, b, c, d, e, offsets }
}

/// `Â = Â_D + Â_C`: block-diagonal `Âₘ` plus the coupling blocks.
pub fn closed_loop_global(net: &NetworkModel) -> Matrix {
    let offsets = net.offsets();
    let n = net.total_dim();
    let mut a = Matrix::zeros(n, n);
    for (node, &o) in net.nodes.iter().zip(&offsets) {
        a.view_mut((o, o), node.am.shape()).copy_from(&node.am);
    }
    place_edges(net, &mut a, &offsets);
    a
}

/// `rank [B, AB, …, Aⁿ⁻¹B] == n`, rank by singular values relative to
/// `1e-10·σ_max`.
///
/// Krylov columns are scaled to unit length first; this leaves the rank
/// unchanged but keeps badly scaled plants (entries ~10⁶) from swamping the
/// relative threshold.
pub fn check_controllability(a: &Matrix, b: &Matrix) -> Result<bool> {
    let n = ensure_square(a, "controllability A")?;
    if b.nrows() != n {
        return Err(Error::Dimension(format!("A is {n}x{n} but B has {} rows", b.nrows())));
    }
    ensure_finite(a, "controllability A")?;
    ensure_finite(b, "controllability B")?;
    if n == 0 {
        return Ok(true);
    }
    let m = b.ncols();
    let mut k = Matrix::zeros(n, n * m);
    let mut block = b.clone();
    for p in 0..n {
        for j in 0..m {
            let col = block.column(j);
            let norm = col.norm();
            let scaled = if norm > 0.0 { col / norm } else { col.into_owned() };
            k.set_column(p * m + j, &scaled);
        }
        block = a * &block;
        let norm = block.norm();
        if norm > 0.0 && norm.is_finite() {
            block /= norm;
        }
    }
    let sv = k.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return Ok(false);
    }
    Ok(sv.iter().filter(|&&s| s > 1e-10 * smax).count() == n)
}
