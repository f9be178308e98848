//! Mean-field approximation: the product-form predict operator `T_ap`, its
//! full-vector filter, and the `O(d)` marginal recursion that replaces the
//! full update with sum-product on the network tree.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{log_ratios, Network, ObservationFrame};
use crate::irf::IrfOperator;
use crate::linalg::DenseMatrix;
use crate::simplex::{bayes_update, node_bit, tensor_product, BernoulliPair, ProbVec, WeightVec};

/// `R_ρ(p) = ρ (1, 0) + (1 − ρ) p`, with `p = (P(1), P(0))`.
pub fn r_rho(pair: BernoulliPair, rho: f64) -> Result<BernoulliPair> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::arg(format!("ρ = {rho} outside [0, 1]")));
    }
    let p0 = (1.0 - rho) * pair.p0();
    Ok(BernoulliPair::from_masses(1.0 - p0, p0).expect("masses sum to one"))
}

/// `⊗_j R_{ρ_j}(M_j(y))`.
pub fn t_ap(y: &ProbVec, rhos: &[f64]) -> Result<ProbVec> {
    if rhos.len() != y.d() {
        return Err(Error::arg(format!(
            "{} rates for d = {}",
            rhos.len(),
            y.d()
        )));
    }
    let pairs = y
        .marginals()
        .into_iter()
        .zip(rhos)
        .map(|(p, rho)| r_rho(p, *rho))
        .collect::<Result<Vec<_>>>()?;
    tensor_product(&pairs)
}

/// `T_ap` as an iteration operator.
#[derive(Debug, Clone)]
pub struct MeanFieldPredict {
    rhos: Vec<f64>,
}

impl MeanFieldPredict {
    pub fn new(rhos: &[f64]) -> Result<Self> {
        if rhos.is_empty() || rhos.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::arg("need at least one ρ, each in [0, 1]"));
        }
        Ok(Self {
            rhos: rhos.to_vec(),
        })
    }
}

impl IrfOperator for MeanFieldPredict {
    fn dim(&self) -> usize {
        self.rhos.len()
    }

    fn apply(&self, x: &ProbVec) -> Result<ProbVec> {
        t_ap(x, &self.rhos)
    }

    fn declared_lipschitz(&self) -> f64 {
        lipschitz_bound_tap(&self.rhos)
    }
}

/// `q_θ(T_ap y)`.
pub fn approx_step_full(y: &ProbVec, theta: &WeightVec, rhos: &[f64]) -> Result<ProbVec> {
    bayes_update(&t_ap(y, rhos)?, theta)
}

/// `K_ρ = Σ (1 − ρ_j)`.
#[must_use]
pub fn lipschitz_bound_tap(rhos: &[f64]) -> f64 {
    rhos.iter().map(|r| 1.0 - r).sum()
}

// ---------------------------------------------------------------------------
// Marginal recursion
// ---------------------------------------------------------------------------

/// Per-node approximate posteriors `γ̃_j`, each kept as a pair of masses.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalState {
    pairs: Vec<BernoulliPair>,
}

impl MarginalState {
    /// `γ̃_j = 0` for every node.
    #[must_use]
    pub fn initial(d: usize) -> Self {
        Self {
            pairs: vec![BernoulliPair::from_p1(0.0).expect("valid pair"); d],
        }
    }

    #[must_use]
    pub fn from_pairs(pairs: Vec<BernoulliPair>) -> Self {
        Self { pairs }
    }

    #[must_use]
    pub fn d(&self) -> usize {
        self.pairs.len()
    }

    #[must_use]
    pub fn pairs(&self) -> &[BernoulliPair] {
        &self.pairs
    }

    #[must_use]
    pub fn gammas(&self) -> Vec<f64> {
        self.pairs.iter().map(BernoulliPair::p1).collect()
    }
}

/// Joint law of the two endpoints of an edge; `joint[z_a][z_b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairMarginal {
    pub a: usize,
    pub b: usize,
    pub joint: [[f64; 2]; 2],
}

impl PairMarginal {
    /// `P(Z_a = 1 or Z_b = 1)`, summed from the three cells that contain a 1.
    #[must_use]
    pub fn either(&self) -> f64 {
        self.joint[0][1] + self.joint[1][0] + self.joint[1][1]
    }
}

/// `P̃(z) ∝ Π_j ν(z_j; π_j) u_j(z_j) Π_{ij} u_ij(z_i, z_j)` on a forest, with
/// `log u_e = log(g_e/f_e)(x_e)` when every endpoint of `e` is 0 and 0 otherwise.
#[derive(Debug, Clone)]
pub struct PairwiseModel {
    /// `node_log[j][z]`.
    node_log: Vec<[f64; 2]>,
    /// `(a, b, log u_ab(0, 0))`.
    edges: Vec<(usize, usize, f64)>,
}

fn lse2(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn normalized(v: [f64; 2]) -> [f64; 2] {
    let m = v[0].max(v[1]);
    if m.is_finite() {
        [v[0] - m, v[1] - m]
    } else {
        v
    }
}

impl PairwiseModel {
    /// Model for predicted priors `priors` and per-stream log ratios `ys`
    /// (extended-edge order).
    pub fn new(net: &Network, priors: &[BernoulliPair], ys: &[f64]) -> Result<Self> {
        if !net.is_tree() {
            return Err(Error::UnsupportedTopology(
                "message passing needs an acyclic graph".into(),
            ));
        }
        let d = net.d();
        if priors.len() != d || ys.len() != net.num_streams() {
            return Err(Error::arg(
                "prior or observation length does not match the network",
            ));
        }
        if let Some(y) = ys.iter().find(|y| !y.is_finite()) {
            return Err(Error::DegenerateObservation(format!("log ratio {y}")));
        }
        let node_log = priors
            .iter()
            .zip(ys)
            .map(|(p, y)| [p.p0().ln() + y, p.p1().ln()])
            .collect();
        let edges = net
            .edges()
            .iter()
            .zip(&ys[d..])
            .map(|(e, y)| (e.a, e.b, *y))
            .collect();
        Ok(Self { node_log, edges })
    }

    #[must_use]
    pub fn d(&self) -> usize {
        self.node_log.len()
    }

    /// Unnormalized log weight of configuration `mask`.
    #[must_use]
    pub fn log_weight(&self, mask: usize) -> f64 {
        let d = self.d();
        let mut w: f64 = (0..d)
            .map(|j| self.node_log[j][node_bit(mask, j, d) as usize])
            .sum();
        for &(a, b, y) in &self.edges {
            if node_bit(mask, a, d) == 0 && node_bit(mask, b, d) == 0 {
                w += y;
            }
        }
        w
    }

    fn psi(&self, k: usize, za: usize, zb: usize) -> f64 {
        if za == 0 && zb == 0 {
            self.edges[k].2
        } else {
            0.0
        }
    }

    /// Node marginals and edge marginals by two-pass sum-product, one pass
    /// per connected component rooted at its lowest-index node.
    pub fn sum_product(&self) -> Result<(Vec<BernoulliPair>, Vec<PairMarginal>)> {
        let d = self.d();
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); d];
        for (k, &(a, b, _)) in self.edges.iter().enumerate() {
            adj[a].push((b, k));
            adj[b].push((a, k));
        }
        // BFS order and parent links.
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; d];
        let mut seen = vec![false; d];
        let mut order = Vec::with_capacity(d);
        for root in 0..d {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let start = order.len();
            order.push(root);
            let mut head = start;
            while head < order.len() {
                let v = order[head];
                head += 1;
                for &(w, k) in &adj[v] {
                    if parent[v].is_some_and(|(_, pk)| pk == k) {
                        continue;
                    }
                    if seen[w] {
                        return Err(Error::UnsupportedTopology("graph has a cycle".into()));
                    }
                    seen[w] = true;
                    parent[w] = Some((v, k));
                    order.push(w);
                }
            }
        }
        let mut kids: Vec<Vec<usize>> = vec![Vec::new(); d];
        for &v in &order {
            if let Some((p, _)) = parent[v] {
                kids[p].push(v);
            }
        }

        // up[v][z_parent], inner[v][z_v] = φ_v + Σ_children up.
        let mut up = vec![[0.0; 2]; d];
        let mut inner = vec![[0.0; 2]; d];
        for &v in order.iter().rev() {
            let mut h = self.node_log[v];
            for &c in &kids[v] {
                h[0] += up[c][0];
                h[1] += up[c][1];
            }
            inner[v] = h;
            if let Some((_, k)) = parent[v] {
                up[v] = normalized([
                    lse2(h[0] + self.psi(k, 0, 0), h[1] + self.psi(k, 1, 0)),
                    lse2(h[0] + self.psi(k, 0, 1), h[1] + self.psi(k, 1, 1)),
                ]);
            }
        }

        // down[v][z_v]; outer[v][z_p] is the parent's side of edge (p, v).
        let mut down = vec![[0.0; 2]; d];
        let mut outer = vec![[0.0; 2]; d];
        for &v in &order {
            let Some((p, k)) = parent[v] else { continue };
            let mut h = self.node_log[p];
            if parent[p].is_some() {
                h[0] += down[p][0];
                h[1] += down[p][1];
            }
            for &c in kids[p].iter().filter(|c| **c != v) {
                h[0] += up[c][0];
                h[1] += up[c][1];
            }
            outer[v] = h;
            down[v] = normalized([
                lse2(h[0] + self.psi(k, 0, 0), h[1] + self.psi(k, 1, 0)),
                lse2(h[0] + self.psi(k, 0, 1), h[1] + self.psi(k, 1, 1)),
            ]);
        }

        let nodes = (0..d)
            .map(|v| {
                let mut b = inner[v];
                if parent[v].is_some() {
                    b[0] += down[v][0];
                    b[1] += down[v][1];
                }
                let b = normalized(b);
                BernoulliPair::from_masses(b[1].exp(), b[0].exp()).ok_or_else(|| {
                    Error::DegenerateObservation(format!("node {} has zero mass", v + 1))
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let mut pairs = vec![None; self.edges.len()];
        for v in 0..d {
            let Some((p, k)) = parent[v] else { continue };
            let mut cells = [[0.0; 2]; 2];
            for zp in 0..2 {
                for zv in 0..2 {
                    cells[zp][zv] = outer[v][zp] + self.psi(k, zp, zv) + inner[v][zv];
                }
            }
            let top = cells
                .iter()
                .flatten()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            if !top.is_finite() {
                return Err(Error::DegenerateObservation(format!(
                    "edge {} has zero mass",
                    k + 1
                )));
            }
            let mut joint = cells.map(|r| r.map(|c| (c - top).exp()));
            let s: f64 = joint.iter().flatten().sum();
            joint.iter_mut().flatten().for_each(|c| *c /= s);
            let (a, b, _) = self.edges[k];
            if a != p {
                joint = [[joint[0][0], joint[1][0]], [joint[0][1], joint[1][1]]];
            }
            pairs[k] = Some(PairMarginal { a, b, joint });
        }
        Ok((
            nodes,
            pairs
                .into_iter()
                .map(|p| p.expect("every edge visited"))
                .collect(),
        ))
    }
}

/// One step of the marginal recursion: predict each node, form the pairwise
/// model from the frame, and read off node and edge marginals.
pub fn algorithm1_step(
    state: &MarginalState,
    frame: &ObservationFrame,
    net: &Network,
) -> Result<(MarginalState, Vec<PairMarginal>)> {
    if !net.is_tree() {
        return Err(Error::UnsupportedTopology(
            "the marginal recursion needs an acyclic graph".into(),
        ));
    }
    if state.d() != net.d() {
        return Err(Error::arg(format!(
            "state has d = {}, network has d = {}",
            state.d(),
            net.d()
        )));
    }
    let priors = state
        .pairs
        .iter()
        .zip(net.nodes())
        .map(|(p, n)| r_rho(*p, n.rho))
        .collect::<Result<Vec<_>>>()?;
    let ys = log_ratios(net, frame)?;
    let (nodes, pairs) = PairwiseModel::new(net, &priors, &ys)?.sum_product()?;
    Ok((MarginalState { pairs: nodes }, pairs))
}

// ---------------------------------------------------------------------------
// Jacobians
// ---------------------------------------------------------------------------

/// Jacobian (`m × d`) of `H(u) = ⊗_j (u_j, 1 − u_j)` in mask order.
#[must_use]
pub fn jacobian_h(u: &[f64]) -> DenseMatrix {
    let d = u.len();
    let m = 1usize << d;
    let mut jh = DenseMatrix::zeros(m, d);
    for l in 0..m {
        for j in 0..d {
            let mut v = if node_bit(l, j, d) == 1 { 1.0 } else { -1.0 };
            for (k, uk) in u.iter().enumerate() {
                if k != j {
                    v *= if node_bit(l, k, d) == 1 {
                        *uk
                    } else {
                        1.0 - uk
                    };
                }
            }
            jh[(l, j)] = v;
        }
    }
    jh
}

/// Jacobian (`d × m`) of `K(y)_j = 1 − ρ̄_j Σ_ℓ (1 − b_j(ℓ)) y_ℓ`; entry
/// `(j, ℓ)` is `−ρ̄_j (1 − b_j(ℓ))`. Constant in `y`.
#[must_use]
pub fn jacobian_k(rhos: &[f64]) -> DenseMatrix {
    let d = rhos.len();
    let m = 1usize << d;
    let mut jk = DenseMatrix::zeros(d, m);
    for (j, rho) in rhos.iter().enumerate() {
        for l in 0..m {
            jk[(j, l)] = -(1.0 - rho) * f64::from(1 - node_bit(l, j, d));
        }
    }
    jk
}

/// Per-node predicted `P(Z_j = 1)` from a full vector.
fn predicted_u(y: &ProbVec, rhos: &[f64]) -> Vec<f64> {
    y.marginals()
        .iter()
        .zip(rhos)
        .map(|(p, r)| 1.0 - (1.0 - r) * p.p0())
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct JacobianReport {
    pub samples: usize,
    /// Largest `|‖col(J_H)‖₁ − 2|` seen.
    pub jh_colsum_dev: f64,
    /// Largest `|‖col(J_K + ½ρ̄1ᵀ)‖₁ − ½Σρ̄|` seen.
    pub jk_colsum_dev: f64,
    /// Largest `‖J_H (J_K + ½ρ̄1ᵀ)‖₁` seen.
    pub product_norm: f64,
    /// `Σ ρ̄_j`.
    pub bound: f64,
}

impl JacobianReport {
    #[must_use]
    pub fn holds(&self, tol: f64) -> bool {
        self.jh_colsum_dev <= tol
            && self.jk_colsum_dev <= tol
            && self.product_norm <= self.bound + tol
    }
}

/// Build `J_H(K(y))` and the corrected `J_K` at `samples` uniform draws of
/// `y` and measure the column-sum identities and the product norm.
pub fn tap_jacobian_bound_check(rhos: &[f64], samples: usize, seed: u64) -> Result<JacobianReport> {
    let d = rhos.len();
    if d == 0 || d > 10 {
        return Err(Error::arg(format!("d = {d} outside 1..=10")));
    }
    let bound = lipschitz_bound_tap(rhos);
    let mut corrected = jacobian_k(rhos);
    for (j, rho) in rhos.iter().enumerate() {
        for l in 0..corrected.cols() {
            corrected[(j, l)] += 0.5 * (1.0 - rho);
        }
    }
    let jk_colsum_dev = corrected
        .abs_col_sums()
        .iter()
        .map(|s| (s - 0.5 * bound).abs())
        .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut jh_colsum_dev, mut product_norm) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        let y = ProbVec::sample_uniform(d, &mut rng)?;
        let jh = jacobian_h(&predicted_u(&y, rhos));
        for s in jh.abs_col_sums() {
            jh_colsum_dev = jh_colsum_dev.max((s - 2.0).abs());
        }
        product_norm = product_norm.max(jh.matmul(&corrected)?.norm_l1());
    }
    Ok(JacobianReport {
        samples,
        jh_colsum_dev,
        jk_colsum_dev,
        product_norm,
        bound,
    })
}
