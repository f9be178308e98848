//! The exact multi-node filter: the Markov prediction kernel `T_ex`, the
//! posterior recursion `y_n = q_{θ_n}(T_ex y_{n−1})`, and a brute-force
//! posterior used as an oracle.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{log_ratios, Network, ObservationFrame};
use crate::irf::IrfOperator;
use crate::linalg::DenseMatrix;
use crate::simplex::{bayes_update, node_bit, ProbVec, WeightVec, MAX_FULL_DIM};

/// Largest number of change-time configurations the oracle will enumerate.
pub const BRUTE_FORCE_BUDGET: u64 = 10_000_000;

/// Rows of `T_ex` in mask order, each a sparse list of `(column, coefficient)`.
///
/// Row `i` has `2^{#ones(i)}` nonzeros, so the kernel holds `3^d` numbers in
/// total. A dense view is available through [`TexKernel::to_dense`].
#[derive(Debug, Clone)]
pub struct TexKernel {
    d: usize,
    rhos: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
}

/// Expand `u_1 ⋯ u_d` for output mask `i`, where `u_j = ρ̄_j ω₀` if node `j`
/// is 0 in `i` and `ω₁ + ρ_j ω₀` otherwise. Monomials read as masks.
fn expand_row(i: usize, rhos: &[f64]) -> Vec<(usize, f64)> {
    let d = rhos.len();
    let mut terms = vec![(0usize, 1.0f64)];
    for (j, rho) in rhos.iter().enumerate() {
        let mut next = Vec::with_capacity(terms.len() * 2);
        for &(prefix, c) in &terms {
            if node_bit(i, j, d) == 0 {
                next.push((prefix << 1, c * (1.0 - rho)));
            } else {
                next.push(((prefix << 1) | 1, c));
                next.push((prefix << 1, c * rho));
            }
        }
        terms = next;
    }
    terms
}

pub fn build_tex(rhos: &[f64]) -> Result<TexKernel> {
    let d = rhos.len();
    if d == 0 || d > MAX_FULL_DIM {
        return Err(Error::arg(format!("d = {d} outside 1..={MAX_FULL_DIM}")));
    }
    if let Some(r) = rhos.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(Error::arg(format!("ρ = {r} outside (0, 1)")));
    }
    let rows = (0..1usize << d)
        .into_par_iter()
        .map(|i| expand_row(i, rhos))
        .collect();
    Ok(TexKernel {
        d,
        rhos: rhos.to_vec(),
        rows,
    })
}

impl TexKernel {
    #[must_use]
    pub fn d(&self) -> usize {
        self.d
    }

    #[must_use]
    pub fn rhos(&self) -> &[f64] {
        &self.rhos
    }

    /// Nonzeros of row `i` (mask order).
    #[must_use]
    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    /// Dense matrix indexed by mask.
    #[must_use]
    pub fn to_dense(&self) -> DenseMatrix {
        let m = self.rows.len();
        let mut a = DenseMatrix::zeros(m, m);
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, c) in row {
                a[(i, k)] = c;
            }
        }
        a
    }

    /// Dense matrix with rows and columns in display order (anchor first).
    #[must_use]
    pub fn display_matrix(&self) -> DenseMatrix {
        let m = self.rows.len();
        let mut a = DenseMatrix::zeros(m, m);
        for (i, row) in self.rows.iter().enumerate() {
            for &(k, c) in row {
                a[(m - 1 - i, m - 1 - k)] = c;
            }
        }
        a
    }

    /// Write the display-order matrix as CSV, one row per line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_path(path)
            .map_err(csv_err)?;
        let a = self.display_matrix();
        for i in 0..a.rows() {
            w.write_record(a.row(i).iter().map(|v| format!("{v:.16e}")))
                .map_err(csv_err)?;
        }
        w.flush().map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

impl IrfOperator for TexKernel {
    fn dim(&self) -> usize {
        self.d
    }

    fn apply(&self, y: &ProbVec) -> Result<ProbVec> {
        if y.d() != self.d {
            return Err(Error::arg(format!(
                "kernel has d = {}, state has d = {}",
                self.d,
                y.d()
            )));
        }
        let x = y.entries();
        let m = x.len();
        let mut out: Vec<f64> = self.rows[..m - 1]
            .iter()
            .map(|row| row.iter().map(|&(k, c)| c * x[k]).sum())
            .collect();
        // Non-anchor rows never read the anchor column, so the tail is exact;
        // the anchor is its complement.
        let tail: f64 = out.iter().sum();
        out.push(1.0 - tail);
        Ok(ProbVec::from_raw(self.d, out))
    }

    fn declared_lipschitz(&self) -> f64 {
        lipschitz_bound_tex(&self.rhos)
    }
}

/// `q_θ(T_ex y)`.
pub fn exact_step(y: &ProbVec, theta: &WeightVec, kernel: &TexKernel) -> Result<ProbVec> {
    bayes_update(&kernel.apply(y)?, theta)
}

/// Initial exact posterior: no node has changed before any data arrive.
pub fn exact_initial(d: usize) -> Result<ProbVec> {
    ProbVec::point_mass(d, 0)
}

// ---------------------------------------------------------------------------
// Oracle
// ---------------------------------------------------------------------------

fn log_sum_exp_into(acc: &mut (f64, f64), v: f64) {
    let (mx, s) = acc;
    if v == f64::NEG_INFINITY {
        return;
    }
    if v <= *mx {
        *s += (v - *mx).exp();
    } else {
        *s = *s * (*mx - v).exp() + 1.0;
        *mx = v;
    }
}

/// `P(Z^n | X^{1..n})` by enumerating every change-time configuration with
/// `λ_j ∈ {1, …, n, n+1}`, where `n+1` stands for `λ_j > n`. A stream counts
/// as post-change at time `t` when the smaller endpoint change time is `≤ t`.
pub fn brute_force_posterior(net: &Network, frames: &[ObservationFrame]) -> Result<ProbVec> {
    let d = net.d();
    if d > MAX_FULL_DIM {
        return Err(Error::arg(format!("d = {d} exceeds the full-vector cap")));
    }
    let n = frames.len();
    let levels = n as u64 + 1;
    let configs = levels
        .checked_pow(d as u32)
        .filter(|c| *c <= BRUTE_FORCE_BUDGET)
        .ok_or_else(|| {
            Error::Resource(format!(
                "{levels}^{d} change-time configurations exceed {BRUTE_FORCE_BUDGET}"
            ))
        })?;

    // prefix[e][k] = Σ_{t ≤ k} log(g_e/f_e)(x_e(t)).
    let streams = net.num_streams();
    let mut prefix = vec![vec![0.0; n + 1]; streams];
    for (t, frame) in frames.iter().enumerate() {
        let ys = log_ratios(net, frame)?;
        for (e, y) in ys.iter().enumerate() {
            prefix[e][t + 1] = prefix[e][t] + y;
        }
    }
    // log prior of λ_j = k (k = n+1 means "later than n").
    let log_prior: Vec<Vec<f64>> = net
        .rhos()
        .iter()
        .map(|rho| {
            let (lr, lq) = (rho.ln(), (1.0 - rho).ln());
            (1..=n + 1)
                .map(|k| {
                    if k <= n {
                        lr + (k - 1) as f64 * lq
                    } else {
                        n as f64 * lq
                    }
                })
                .collect()
        })
        .collect();

    let m = 1usize << d;
    let edges: Vec<(usize, usize)> = net.edges().iter().map(|e| (e.a, e.b)).collect();
    let eval = |idx: u64| -> (usize, f64) {
        // Decode λ_j − 1 digits, node 1 most significant.
        let mut lam = vec![0usize; d];
        let mut r = idx;
        for j in (0..d).rev() {
            lam[j] = (r % levels) as usize + 1;
            r /= levels;
        }
        let mut lw = 0.0;
        let mut mask = 0usize;
        for j in 0..d {
            lw += log_prior[j][lam[j] - 1] + prefix[j][lam[j] - 1];
            mask = (mask << 1) | usize::from(lam[j] <= n);
        }
        for (k, &(a, b)) in edges.iter().enumerate() {
            lw += prefix[d + k][lam[a].min(lam[b]) - 1];
        }
        (mask, lw)
    };
    let per_mask = (0..configs)
        .into_par_iter()
        .fold(
            || vec![(f64::NEG_INFINITY, 0.0); m],
            |mut acc, idx| {
                let (mask, lw) = eval(idx);
                log_sum_exp_into(&mut acc[mask], lw);
                acc
            },
        )
        .reduce(
            || vec![(f64::NEG_INFINITY, 0.0); m],
            |mut a, b| {
                for (x, (mx, s)) in a.iter_mut().zip(b) {
                    if s > 0.0 {
                        log_sum_exp_into(x, mx + s.ln());
                    }
                }
                a
            },
        );
    let logs: Vec<f64> = per_mask
        .iter()
        .map(|(mx, s)| {
            if *s > 0.0 {
                mx + s.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ProbVec::from_weights(d, logs.iter().map(|l| (l - top).exp()).collect())
}

// ---------------------------------------------------------------------------
// Lipschitz bounds
// ---------------------------------------------------------------------------

/// Largest absolute column sum of `A − u 1ᵀ`, an upper bound on the ℓ1
/// Lipschitz constant of `x ↦ A x` restricted to the simplex.
pub fn jacobian_lipschitz_bound(a: &DenseMatrix, u: &[f64]) -> Result<f64> {
    if u.len() != a.rows() {
        return Err(Error::arg(format!(
            "correction has length {}, matrix has {} rows",
            u.len(),
            a.rows()
        )));
    }
    let mut best = 0.0f64;
    for k in 0..a.cols() {
        let s: f64 = (0..a.rows()).map(|i| (a[(i, k)] - u[i]).abs()).sum();
        best = best.max(s);
    }
    Ok(best)
}

/// `1 − Π ρ_j`.
#[must_use]
pub fn lipschitz_bound_tex(rhos: &[f64]) -> f64 {
    1.0 - rhos.iter().product::<f64>()
}
