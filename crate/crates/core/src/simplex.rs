//! Probability vectors on `{0,1}^d`, weight vectors, and the Bayes update.
//!
//! Storage is by *mask*: entry `ℓ` is the probability of the configuration
//! whose node `j` (1-based, counted from the left) takes the value
//! [`bit(j, ℓ)`](bit). The all-ones configuration sits at mask `m - 1`; it is
//! the common fixed point of every operator in this crate and is called the
//! *anchor* (`e⁰` in display order, which lists masks from `m - 1` down to 0).

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};

/// Largest dimension for which full `2^d` vectors are materialized.
pub const MAX_FULL_DIM: usize = 16;

/// Slack allowed on `Σ entries = 1` when a vector is constructed.
pub const SIMPLEX_TOL: f64 = 1e-9;

const PAIR_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Index conventions
// ---------------------------------------------------------------------------

/// Value of node `j` (1-based, leftmost first) in configuration `mask`.
pub fn bit(j: usize, mask: usize, d: usize) -> Result<u8> {
    if d == 0 || d > usize::BITS as usize - 1 {
        return Err(Error::arg(format!("dimension {d} out of range")));
    }
    if j == 0 || j > d {
        return Err(Error::arg(format!("node index {j} outside 1..={d}")));
    }
    if mask >> d != 0 {
        return Err(Error::arg(format!(
            "mask {mask} outside 0..{}",
            1usize << d
        )));
    }
    Ok(node_bit(mask, j - 1, d))
}

/// Unchecked variant of [`bit`] with a 0-based node index.
#[inline]
pub(crate) fn node_bit(mask: usize, j0: usize, d: usize) -> u8 {
    ((mask >> (d - 1 - j0)) & 1) as u8
}

/// Convert a display-order (superscript) index to a storage mask. Involutive.
pub fn sup_to_sub(i: usize, d: usize) -> Result<usize> {
    if d == 0 || d > usize::BITS as usize - 1 {
        return Err(Error::arg(format!("dimension {d} out of range")));
    }
    let m = 1usize << d;
    if i >= m {
        return Err(Error::arg(format!("index {i} outside 0..{m}")));
    }
    Ok(m - 1 - i)
}

fn check_full_dim(d: usize) -> Result<usize> {
    if d == 0 || d > MAX_FULL_DIM {
        return Err(Error::arg(format!(
            "dimension {d} outside 1..={MAX_FULL_DIM} for full-vector operations"
        )));
    }
    Ok(1usize << d)
}

// ---------------------------------------------------------------------------
// BernoulliPair
// ---------------------------------------------------------------------------

/// A distribution on `{0,1}`. Both masses are stored so that either one can
/// be tiny without cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliPair {
    p1: f64,
    p0: f64,
}

impl BernoulliPair {
    pub fn new(p1: f64, p0: f64) -> Result<Self> {
        if !(p1 >= 0.0 && p0 >= 0.0) || ((p1 + p0) - 1.0).abs() > PAIR_TOL {
            return Err(Error::arg(format!("({p1}, {p0}) is not a Bernoulli pair")));
        }
        Ok(Self { p1, p0 })
    }

    /// Pair with `P(1) = p`.
    pub fn from_p1(p: f64) -> Result<Self> {
        Self::new(p, 1.0 - p)
    }

    /// Normalize two nonnegative masses; `None` if both are zero.
    pub(crate) fn from_masses(a1: f64, a0: f64) -> Option<Self> {
        let s = a1 + a0;
        (s > 0.0 && s.is_finite()).then(|| Self {
            p1: a1 / s,
            p0: a0 / s,
        })
    }

    #[must_use]
    pub fn p1(&self) -> f64 {
        self.p1
    }

    #[must_use]
    pub fn p0(&self) -> f64 {
        self.p0
    }

    #[must_use]
    pub fn mass(&self, z: u8) -> f64 {
        if z == 1 {
            self.p1
        } else {
            self.p0
        }
    }
}

// ---------------------------------------------------------------------------
// ProbVec
// ---------------------------------------------------------------------------

/// A point of the simplex over `{0,1}^d`, stored in mask order.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVec {
    d: usize,
    entries: Vec<f64>,
}

impl ProbVec {
    /// Validate and wrap `entries` (mask order).
    pub fn new(d: usize, entries: Vec<f64>) -> Result<Self> {
        let m = check_full_dim(d)?;
        if entries.len() != m {
            return Err(Error::arg(format!(
                "expected {m} entries for d = {d}, got {}",
                entries.len()
            )));
        }
        if let Some(bad) = entries.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::arg(format!(
                "entry {bad} is not a finite nonnegative number"
            )));
        }
        let s: f64 = entries.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::arg(format!("entries sum to {s}, not 1")));
        }
        Ok(Self { d, entries })
    }

    /// Build from entries listed in display order (mask `m - 1` first).
    pub fn from_display(d: usize, display: &[f64]) -> Result<Self> {
        let mut v = display.to_vec();
        v.reverse();
        Self::new(d, v)
    }

    /// Normalize nonnegative weights into a probability vector.
    pub fn from_weights(d: usize, mut weights: Vec<f64>) -> Result<Self> {
        let m = check_full_dim(d)?;
        if weights.len() != m {
            return Err(Error::arg(format!(
                "expected {m} weights, got {}",
                weights.len()
            )));
        }
        let s: f64 = weights.iter().sum();
        if !(s > 0.0 && s.is_finite()) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::arg(
                "weights must be nonnegative with a finite positive sum",
            ));
        }
        weights.iter_mut().for_each(|w| *w /= s);
        Ok(Self {
            d,
            entries: weights,
        })
    }

    pub(crate) fn from_raw(d: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), 1 << d);
        Self { d, entries }
    }

    /// Point mass on configuration `mask`.
    pub fn point_mass(d: usize, mask: usize) -> Result<Self> {
        let m = check_full_dim(d)?;
        if mask >= m {
            return Err(Error::arg(format!("mask {mask} outside 0..{m}")));
        }
        let mut entries = vec![0.0; m];
        entries[mask] = 1.0;
        Ok(Self { d, entries })
    }

    /// `e⁰`: all mass on the all-ones configuration.
    pub fn target(d: usize) -> Result<Self> {
        let m = check_full_dim(d)?;
        Self::point_mass(d, m - 1)
    }

    pub fn uniform(d: usize) -> Result<Self> {
        let m = check_full_dim(d)?;
        Ok(Self {
            d,
            entries: vec![1.0 / m as f64; m],
        })
    }

    /// Uniform draw from the simplex (normalized i.i.d. exponentials).
    pub fn sample_uniform<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Self> {
        let m = check_full_dim(d)?;
        let w: Vec<f64> = (0..m).map(|_| Exp1.sample(rng)).collect();
        Self::from_weights(d, w)
    }

    #[must_use]
    pub fn d(&self) -> usize {
        self.d
    }

    #[must_use]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in mask order.
    #[must_use]
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Entries in display order (anchor first).
    #[must_use]
    pub fn display(&self) -> Vec<f64> {
        self.entries.iter().rev().copied().collect()
    }

    #[must_use]
    pub fn anchor_mask(&self) -> usize {
        self.entries.len() - 1
    }

    /// Probability of the all-ones configuration (`x⁽⁰⁾`).
    #[must_use]
    pub fn anchor(&self) -> f64 {
        self.entries[self.anchor_mask()]
    }

    /// Total mass off the anchor, summed directly so that it stays accurate
    /// when the anchor is within rounding of one.
    #[must_use]
    pub fn tail_mass(&self) -> f64 {
        self.entries[..self.anchor_mask()].iter().sum()
    }

    /// `‖x − e⁰‖₁ = 2(1 − x⁽⁰⁾)`.
    #[must_use]
    pub fn dist_to_target(&self) -> f64 {
        2.0 * self.tail_mass()
    }

    /// `‖x − y‖₁`. The anchor term is recovered from the tail sums, which
    /// avoids cancellation between two anchors that are both near one.
    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        self.check_same_dim(other)?;
        let a = self.anchor_mask();
        let tails: f64 = self.entries[..a]
            .iter()
            .zip(&other.entries[..a])
            .map(|(x, y)| (x - y).abs())
            .sum();
        Ok(tails + (self.tail_mass() - other.tail_mass()).abs())
    }

    /// The `j`-th marginal (1-based node index).
    pub fn marginal(&self, j: usize) -> Result<BernoulliPair> {
        if j == 0 || j > self.d {
            return Err(Error::arg(format!("node index {j} outside 1..={}", self.d)));
        }
        let (mut p1, mut p0) = (0.0, 0.0);
        for (mask, v) in self.entries.iter().enumerate() {
            if node_bit(mask, j - 1, self.d) == 1 {
                p1 += v;
            } else {
                p0 += v;
            }
        }
        let s = p1 + p0;
        Ok(BernoulliPair {
            p1: p1 / s,
            p0: p0 / s,
        })
    }

    /// All `d` marginals.
    #[must_use]
    pub fn marginals(&self) -> Vec<BernoulliPair> {
        (1..=self.d)
            .map(|j| self.marginal(j).expect("index in range"))
            .collect()
    }

    pub(crate) fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.d != other.d {
            return Err(Error::arg(format!(
                "dimension mismatch: {} vs {}",
                self.d, other.d
            )));
        }
        Ok(())
    }
}

/// Product measure of the given per-node pairs (node 1 is the leftmost bit).
pub fn tensor_product(pairs: &[BernoulliPair]) -> Result<ProbVec> {
    let d = pairs.len();
    if d == 0 {
        return Err(Error::arg("tensor product of an empty list"));
    }
    check_full_dim(d)?;
    let mut entries = vec![1.0];
    for pair in pairs {
        let mut next = Vec::with_capacity(entries.len() * 2);
        for v in &entries {
            next.push(v * pair.p0);
            next.push(v * pair.p1);
        }
        entries = next;
    }
    Ok(ProbVec { d, entries })
}

// ---------------------------------------------------------------------------
// WeightVec
// ---------------------------------------------------------------------------

/// A likelihood-ratio vector, held in log domain with the anchor entry
/// pinned to `1` (log 0). Zero entries are `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVec {
    d: usize,
    log_entries: Vec<f64>,
}

impl WeightVec {
    /// From log weights in mask order; rescaled so the anchor is exactly 1.
    pub fn from_log(d: usize, mut log_entries: Vec<f64>) -> Result<Self> {
        let m = check_full_dim(d)?;
        if log_entries.len() != m {
            return Err(Error::arg(format!(
                "expected {m} log weights, got {}",
                log_entries.len()
            )));
        }
        if log_entries
            .iter()
            .any(|v| v.is_nan() || *v == f64::INFINITY)
        {
            return Err(Error::arg("log weights must be finite or -inf"));
        }
        let anchor = log_entries[m - 1];
        if !anchor.is_finite() {
            return Err(Error::arg("anchor weight must be strictly positive"));
        }
        log_entries.iter_mut().for_each(|v| *v -= anchor);
        log_entries[m - 1] = 0.0;
        Ok(Self { d, log_entries })
    }

    /// From linear weights in mask order.
    pub fn from_linear(d: usize, entries: &[f64]) -> Result<Self> {
        if entries.iter().any(|v| !(*v >= 0.0) || v.is_infinite()) {
            return Err(Error::arg("weights must be finite and nonnegative"));
        }
        Self::from_log(d, entries.iter().map(|v| v.ln()).collect())
    }

    /// From linear weights in display order (anchor first).
    pub fn from_display(d: usize, display: &[f64]) -> Result<Self> {
        let mut v = display.to_vec();
        v.reverse();
        Self::from_linear(d, &v)
    }

    pub fn ones(d: usize) -> Result<Self> {
        let m = check_full_dim(d)?;
        Ok(Self {
            d,
            log_entries: vec![0.0; m],
        })
    }

    /// `(1, c·1_{m−1})` in display order.
    pub fn constant_tail(d: usize, c: f64) -> Result<Self> {
        let m = check_full_dim(d)?;
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::arg(format!(
                "tail value {c} must be finite and nonnegative"
            )));
        }
        let mut log_entries = vec![c.ln(); m];
        log_entries[m - 1] = 0.0;
        Ok(Self { d, log_entries })
    }

    #[must_use]
    pub fn d(&self) -> usize {
        self.d
    }

    #[must_use]
    pub fn log_entries(&self) -> &[f64] {
        &self.log_entries
    }

    /// Linear entries in mask order; the anchor is exactly 1.
    #[must_use]
    pub fn entries(&self) -> Vec<f64> {
        self.log_entries.iter().map(|v| v.exp()).collect()
    }

    /// Pointwise product `θ ∘ θ'`.
    pub fn pointwise_mul(&self, other: &Self) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::arg("dimension mismatch in pointwise product"));
        }
        Ok(Self {
            d: self.d,
            log_entries: self
                .log_entries
                .iter()
                .zip(&other.log_entries)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    /// `log θ*`, the largest non-anchor log weight.
    #[must_use]
    pub fn log_theta_star(&self) -> f64 {
        let a = self.log_entries.len() - 1;
        self.log_entries[..a]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `θ* = max` over the non-anchor entries.
#[must_use]
pub fn theta_star(theta: &WeightVec) -> f64 {
    theta.log_theta_star().exp()
}

/// `θ† = (1, κ θ* 1_{m−1})`.
pub fn theta_dagger(theta: &WeightVec, kappa: f64) -> Result<WeightVec> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::arg(format!("κ = {kappa} outside [0, 1]")));
    }
    let m = theta.log_entries.len();
    let tail = kappa.ln() + theta.log_theta_star();
    let mut log_entries = vec![
        if tail.is_nan() {
            f64::NEG_INFINITY
        } else {
            tail
        };
        m
    ];
    log_entries[m - 1] = 0.0;
    Ok(WeightVec {
        d: theta.d,
        log_entries,
    })
}

// ---------------------------------------------------------------------------
// Bayes update
// ---------------------------------------------------------------------------

/// `q_θ(x) = (x ∘ θ) / (xᵀθ)`.
///
/// Weights are exponentiated after subtracting the largest log weight on the
/// support of `x`, so the result does not depend on the scale of `θ`.
pub fn bayes_update(x: &ProbVec, theta: &WeightVec) -> Result<ProbVec> {
    if x.d != theta.d {
        return Err(Error::arg(format!(
            "dimension mismatch: prior d = {}, weights d = {}",
            x.d, theta.d
        )));
    }
    let shift = x
        .entries
        .iter()
        .zip(&theta.log_entries)
        .filter(|(p, _)| **p > 0.0)
        .map(|(_, l)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return Err(Error::DegenerateUpdate { step: None });
    }
    let mut out: Vec<f64> = x
        .entries
        .iter()
        .zip(&theta.log_entries)
        .map(|(p, l)| if *p > 0.0 { p * (l - shift).exp() } else { 0.0 })
        .collect();
    let s: f64 = out.iter().sum();
    if !(s > 0.0) {
        return Err(Error::DegenerateUpdate { step: None });
    }
    out.iter_mut().for_each(|v| *v /= s);
    Ok(ProbVec {
        d: x.d,
        entries: out,
    })
}
