//! Multi-sensor network model: per-node change times, shared edge streams,
//! and the per-step likelihood-ratio vector `θ_n`.
//!
//! Every data stream is indexed by an *extended edge*: nodes come first (a
//! node's private stream is treated as a self-loop), followed by the real
//! edges in declaration order.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classic::{
    kl_gaussian, llr_std_under_post, log_likelihood_ratio, sample_changepoint, GaussianSpec,
};
use crate::error::{Error, Result};
use crate::simplex::{node_bit, WeightVec, MAX_FULL_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub rho: f64,
    pub pre: GaussianSpec,
    pub post: GaussianSpec,
}

/// An undirected edge between 0-based nodes `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub a: usize,
    pub b: usize,
    pub pre: GaussianSpec,
    pub post: GaussianSpec,
}

/// When a shared edge stream switches to its post-change law.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeConvention {
    /// Pre-change for `t ≤ λ_e`; the first post-change sample is at `λ_e + 1`.
    #[default]
    Literal,
    /// Same switch time as node streams: post-change for `t ≥ λ_e`.
    Aligned,
}

/// A data stream: a node's private stream or an edge's shared stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtendedEdge {
    Node(usize),
    Pair(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    nodes: Vec<NodeSpec>,
    edges: Vec<EdgeSpec>,
    #[serde(default)]
    edge_convention: EdgeConvention,
}

impl Network {
    pub fn new(nodes: Vec<NodeSpec>, edges: Vec<EdgeSpec>) -> Result<Self> {
        let net = Self {
            nodes,
            edges,
            edge_convention: EdgeConvention::default(),
        };
        net.validate()?;
        Ok(net)
    }

    #[must_use]
    pub fn with_edge_convention(mut self, convention: EdgeConvention) -> Self {
        self.edge_convention = convention;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Config("network has no nodes".into()));
        }
        for (j, n) in self.nodes.iter().enumerate() {
            if !(n.rho > 0.0 && n.rho < 1.0) {
                return Err(Error::Config(format!(
                    "node {}: ρ = {} outside (0, 1)",
                    j + 1,
                    n.rho
                )));
            }
            n.pre.validate()?;
            n.post.validate()?;
        }
        let d = self.nodes.len();
        let mut seen = std::collections::HashSet::new();
        for e in &self.edges {
            if e.a >= d || e.b >= d {
                return Err(Error::Config(format!(
                    "edge {{{}, {}}} refers to a missing node",
                    e.a + 1,
                    e.b + 1
                )));
            }
            if e.a == e.b {
                return Err(Error::Config(format!(
                    "explicit self-loop on node {}; private streams are implicit",
                    e.a + 1
                )));
            }
            if !seen.insert((e.a.min(e.b), e.a.max(e.b))) {
                return Err(Error::Config(format!(
                    "duplicate edge {{{}, {}}}",
                    e.a + 1,
                    e.b + 1
                )));
            }
            e.pre.validate()?;
            e.post.validate()?;
        }
        Ok(())
    }

    /// Number of nodes `d`.
    #[must_use]
    pub fn d(&self) -> usize {
        self.nodes.len()
    }

    #[must_use]
    pub fn nodes(&self) -> &[NodeSpec] {
        &self.nodes
    }

    #[must_use]
    pub fn edges(&self) -> &[EdgeSpec] {
        &self.edges
    }

    #[must_use]
    pub fn edge_convention(&self) -> EdgeConvention {
        self.edge_convention
    }

    #[must_use]
    pub fn rhos(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.rho).collect()
    }

    /// Nodes first, then edges.
    #[must_use]
    pub fn extended_edges(&self) -> Vec<ExtendedEdge> {
        (0..self.d())
            .map(ExtendedEdge::Node)
            .chain(self.edges.iter().map(|e| ExtendedEdge::Pair(e.a, e.b)))
            .collect()
    }

    /// `|V| + |E|`.
    #[must_use]
    pub fn num_streams(&self) -> usize {
        self.nodes.len() + self.edges.len()
    }

    /// `(pre, post)` laws of stream `k` in extended-edge order.
    #[must_use]
    pub fn stream_laws(&self, k: usize) -> (&GaussianSpec, &GaussianSpec) {
        if k < self.d() {
            (&self.nodes[k].pre, &self.nodes[k].post)
        } else {
            let e = &self.edges[k - self.d()];
            (&e.pre, &e.post)
        }
    }

    /// `true` if the graph has no cycle. Forests count: message passing runs
    /// on each component separately.
    #[must_use]
    pub fn is_tree(&self) -> bool {
        let mut parent: Vec<usize> = (0..self.d()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
            if ra == rb {
                return false;
            }
            parent[ra] = rb;
        }
        true
    }

    // -----------------------------------------------------------------------
    // Presets
    // -----------------------------------------------------------------------

    /// One node, Gaussian means 1 → 0 with unit variance, `ρ = 0.1`.
    #[must_use]
    pub fn classic() -> Self {
        Self::new(vec![default_node(0.1)], Vec::new()).expect("valid preset")
    }

    /// Star on four nodes centred at node 1; every stream is Gaussian with
    /// unit variance and means 1 → 0, and every `ρ_j = 0.1`.
    #[must_use]
    pub fn star4() -> Self {
        let (pre, post) = default_laws();
        let edges = (1..4).map(|b| EdgeSpec { a: 0, b, pre, post }).collect();
        Self::new(vec![default_node(0.1); 4], edges).expect("valid preset")
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "classic" => Ok(Self::classic()),
            "star4" => Ok(Self::star4()),
            other => Err(Error::Config(format!(
                "unknown preset {other:?} (expected \"classic\" or \"star4\")"
            ))),
        }
    }

    /// A random labelled tree on `d` nodes with random Gaussian streams
    /// (`|μ_post − μ_pre| ∈ [0.5, 2]`) and `ρ_j ∈ [0.05, 0.5]`.
    pub fn random_tree<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Self> {
        if d == 0 {
            return Err(Error::arg("a tree needs at least one node"));
        }
        let mut labels: Vec<usize> = (0..d).collect();
        labels.shuffle(rng);
        let mut edges = Vec::with_capacity(d.saturating_sub(1));
        for k in 1..d {
            let parent = rng.random_range(0..k);
            let (pre, post) = random_laws(rng);
            edges.push(EdgeSpec {
                a: labels[parent],
                b: labels[k],
                pre,
                post,
            });
        }
        let nodes = (0..d)
            .map(|_| {
                let (pre, post) = random_laws(rng);
                NodeSpec {
                    rho: rng.random_range(0.05..0.5),
                    pre,
                    post,
                }
            })
            .collect();
        Self::new(nodes, edges)
    }
}

fn default_laws() -> (GaussianSpec, GaussianSpec) {
    (
        GaussianSpec {
            mean: 1.0,
            variance: 1.0,
        },
        GaussianSpec {
            mean: 0.0,
            variance: 1.0,
        },
    )
}

fn default_node(rho: f64) -> NodeSpec {
    let (pre, post) = default_laws();
    NodeSpec { rho, pre, post }
}

fn random_laws<R: Rng + ?Sized>(rng: &mut R) -> (GaussianSpec, GaussianSpec) {
    let variance = rng.random_range(0.5..1.5);
    let mean = rng.random_range(-1.0..1.0);
    let gap = rng.random_range(0.5..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    (
        GaussianSpec { mean, variance },
        GaussianSpec {
            mean: mean + gap,
            variance,
        },
    )
}

// ---------------------------------------------------------------------------
// Change times and observations
// ---------------------------------------------------------------------------

/// Node change times `λ_j` and the derived edge times `λ_e = min(λ_a, λ_b)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChangeVector {
    lambdas: Vec<u64>,
    edge_lambdas: Vec<u64>,
}

impl ChangeVector {
    pub fn new(net: &Network, lambdas: Vec<u64>) -> Result<Self> {
        if lambdas.len() != net.d() || lambdas.contains(&0) {
            return Err(Error::arg("need one positive change time per node"));
        }
        let edge_lambdas = net
            .edges()
            .iter()
            .map(|e| lambdas[e.a].min(lambdas[e.b]))
            .collect();
        Ok(Self {
            lambdas,
            edge_lambdas,
        })
    }

    #[must_use]
    pub fn lambdas(&self) -> &[u64] {
        &self.lambdas
    }

    #[must_use]
    pub fn edge_lambdas(&self) -> &[u64] {
        &self.edge_lambdas
    }

    #[must_use]
    pub fn max_lambda(&self) -> u64 {
        self.lambdas.iter().copied().max().unwrap_or(0)
    }
}

/// Independent geometric change time per node.
pub fn sample_changes<R: Rng + ?Sized>(net: &Network, rng: &mut R) -> Result<ChangeVector> {
    let lambdas = net
        .nodes()
        .iter()
        .map(|n| sample_changepoint(n.rho, rng))
        .collect::<Result<Vec<_>>>()?;
    ChangeVector::new(net, lambdas)
}

/// One value per extended edge at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationFrame {
    pub t: u64,
    pub values: Vec<f64>,
}

/// Whether stream `k` emits from its post-change law at time `t`.
#[must_use]
pub fn stream_is_post_change(net: &Network, changes: &ChangeVector, k: usize, t: u64) -> bool {
    if k < net.d() {
        t >= changes.lambdas[k]
    } else {
        let le = changes.edge_lambdas[k - net.d()];
        match net.edge_convention() {
            EdgeConvention::Literal => t > le,
            EdgeConvention::Aligned => t >= le,
        }
    }
}

pub fn sample_frame<R: Rng + ?Sized>(
    net: &Network,
    changes: &ChangeVector,
    t: u64,
    rng: &mut R,
) -> Result<ObservationFrame> {
    if t == 0 {
        return Err(Error::arg("time index starts at 1"));
    }
    let values = (0..net.num_streams())
        .map(|k| {
            let (pre, post) = net.stream_laws(k);
            if stream_is_post_change(net, changes, k, t) {
                post.sample(rng)
            } else {
                pre.sample(rng)
            }
        })
        .collect();
    Ok(ObservationFrame { t, values })
}

/// `Y_e = log(g_e(x_e)/f_e(x_e))` for every extended edge.
pub fn log_ratios(net: &Network, frame: &ObservationFrame) -> Result<Vec<f64>> {
    if frame.values.len() != net.num_streams() {
        return Err(Error::arg(format!(
            "frame has {} values, network has {} streams",
            frame.values.len(),
            net.num_streams()
        )));
    }
    frame
        .values
        .iter()
        .enumerate()
        .map(|(k, x)| {
            let (pre, post) = net.stream_laws(k);
            log_likelihood_ratio(pre, post, *x)
        })
        .collect()
}

/// `θ_n`: entry `ℓ` is `Π_j r_j^{1−b_j(ℓ)} · Π_{ij} r_ij^{1−(b_i(ℓ) ∨ b_j(ℓ))}`
/// with `r_e = g_e/f_e`, built in log domain. The anchor entry is 1.
pub fn theta_from_frame(net: &Network, frame: &ObservationFrame) -> Result<WeightVec> {
    let d = net.d();
    if d > MAX_FULL_DIM {
        return Err(Error::arg(format!("d = {d} exceeds the full-vector cap")));
    }
    theta_from_log_ratios(net, &log_ratios(net, frame)?)
}

pub(crate) fn theta_from_log_ratios(net: &Network, ys: &[f64]) -> Result<WeightVec> {
    let d = net.d();
    let m = 1usize << d;
    let logs = (0..m)
        .map(|mask| {
            let mut acc = 0.0;
            for j in 0..d {
                if node_bit(mask, j, d) == 0 {
                    acc += ys[j];
                }
            }
            for (k, e) in net.edges().iter().enumerate() {
                if node_bit(mask, e.a, d) == 0 && node_bit(mask, e.b, d) == 0 {
                    acc += ys[d + k];
                }
            }
            acc
        })
        .collect();
    WeightVec::from_log(d, logs)
}

/// Information statistics entering the convergence rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InfoStats {
    /// `min_e KL(f_e ‖ g_e)` over extended edges.
    pub i_min: f64,
    /// Largest standard deviation of `log(g_e/f_e)(X)`, `X ~ f_e`; stands in
    /// for the sub-Gaussian norm.
    pub sigma_max: f64,
    /// `I_min − κ̄ σ_max √(log M)`.
    pub i_star: f64,
    /// `M = |V| + |E|`.
    pub m: usize,
    pub kappa_bar: f64,
}

impl InfoStats {
    #[must_use]
    pub fn hypothesis_met(&self) -> bool {
        self.i_star > 0.0
    }
}

#[must_use]
pub fn info_stats(net: &Network, kappa_bar: f64) -> InfoStats {
    let (mut i_min, mut sigma_max) = (f64::INFINITY, 0.0f64);
    for k in 0..net.num_streams() {
        let (pre, post) = net.stream_laws(k);
        i_min = i_min.min(kl_gaussian(post, pre));
        sigma_max = sigma_max.max(llr_std_under_post(pre, post));
    }
    let m = net.num_streams();
    let i_star = i_min - kappa_bar * sigma_max * (m as f64).ln().sqrt();
    InfoStats {
        i_min,
        sigma_max,
        i_star,
        m,
        kappa_bar,
    }
}
