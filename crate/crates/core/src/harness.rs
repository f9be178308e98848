//! Monte Carlo drivers: replicated runs of the classical detector and of the
//! exact and approximate network filters on shared data, with summary
//! statistics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::approx::{
    algorithm1_step, approx_step_full, lipschitz_bound_tap, tap_jacobian_bound_check,
    JacobianReport, MarginalState, MeanFieldPredict,
};
use crate::classic::{
    corollary_check, sample_changepoint, shiryayev_run, ClassicModel, ClassicTrace,
    CorollaryOutcome,
};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::exact::{build_tex, exact_initial, exact_step, lipschitz_bound_tex};
use crate::graph::{
    info_stats, sample_changes, sample_frame, theta_from_frame, ChangeVector, InfoStats, Network,
};
use crate::irf::{empirical_lipschitz, rate_fit, envelope_bound, RateFit, DEFAULT_BURN_IN};
use crate::simplex::{ProbVec, MAX_FULL_DIM};

/// Label attached to every envelope curve that is emitted.
pub const ENVELOPE_LABEL: &str = "parameterized envelope";

const WILSON_Z: f64 = 1.96;
const MAX_REJECTIONS: usize = 1_000_000;

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

/// Wilson score interval for `k` successes in `n` trials.
#[must_use]
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let den = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / den;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / den;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// First `n ≥ 1` with `γ_n ≥ 1 − α`; `gammas[0]` is the initial value.
#[must_use]
pub fn stopping_time(gammas: &[f64], alpha: f64) -> Option<u64> {
    gammas
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, g)| **g >= 1.0 - alpha)
        .map(|(n, _)| n as u64)
}

/// Detection statistics for one stopping rule over all replications.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DetectionStats {
    pub replications: usize,
    pub false_alarms: usize,
    pub false_alarm_rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// Runs that never crossed the threshold within the horizon.
    pub censored: usize,
    /// Mean of `τ − λ` over runs with `τ ≥ λ`; `None` if there are none.
    pub mean_delay: Option<f64>,
}

impl DetectionStats {
    /// From `(τ, λ)` pairs.
    #[must_use]
    pub fn from_runs(runs: &[(Option<u64>, u64)]) -> Self {
        let n = runs.len();
        let false_alarms = runs
            .iter()
            .filter(|(t, l)| t.is_some_and(|t| t < *l))
            .count();
        let censored = runs.iter().filter(|(t, _)| t.is_none()).count();
        let delays: Vec<f64> = runs
            .iter()
            .filter_map(|(t, l)| t.filter(|t| t >= l).map(|t| (t - l) as f64))
            .collect();
        let (wilson_low, wilson_high) = wilson_interval(false_alarms, n, WILSON_Z);
        Self {
            replications: n,
            false_alarms,
            false_alarm_rate: if n == 0 {
                0.0
            } else {
                false_alarms as f64 / n as f64
            },
            wilson_low,
            wilson_high,
            censored,
            mean_delay: (!delays.is_empty())
                .then(|| delays.iter().sum::<f64>() / delays.len() as f64),
        }
    }

    #[must_use]
    pub fn half_width(&self) -> f64 {
        0.5 * (self.wilson_high - self.wilson_low)
    }

    /// `rate ≤ α + 2 · half-width`.
    #[must_use]
    pub fn within_budget(&self, alpha: f64) -> bool {
        self.false_alarm_rate <= alpha + 2.0 * self.half_width()
    }
}

/// Slope of `log` distance over `distances[start..]`, or `None` if too short.
#[must_use]
pub fn fit_after(distances: &[f64], start: usize) -> Option<RateFit> {
    distances
        .get(start..)
        .and_then(|tail| rate_fit(tail, 0).ok())
}

fn is_decaying(fit: Option<RateFit>) -> bool {
    match fit {
        Some(RateFit::Slope(s)) => s < 0.0,
        Some(RateFit::ExactConvergence { .. }) => true,
        None => false,
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlopeSummary {
    pub fitted: usize,
    pub negative: usize,
    pub mean_slope: Option<f64>,
}

impl SlopeSummary {
    fn from_fits(fits: &[Option<RateFit>]) -> Self {
        let slopes: Vec<f64> = fits
            .iter()
            .filter_map(|f| f.and_then(|f| f.slope()))
            .collect();
        Self {
            fitted: fits.iter().filter(|f| f.is_some()).count(),
            negative: fits.iter().filter(|f| is_decaying(**f)).count(),
            mean_slope: (!slopes.is_empty())
                .then(|| slopes.iter().sum::<f64>() / slopes.len() as f64),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RepFailure {
    pub rep: usize,
    pub seed: u64,
    pub message: String,
}

// ---------------------------------------------------------------------------
// Single change point
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct ClassicRep {
    pub rep: usize,
    pub seed: u64,
    pub tau: Option<u64>,
    pub trace: ClassicTrace,
    /// Convergence envelope from step `λ − 1` on, `None` before it.
    pub envelope: Vec<Option<f64>>,
    pub corollary: Option<CorollaryOutcome>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassicSummary {
    pub alpha: f64,
    pub detectable: bool,
    pub information: f64,
    pub corollary_log_rate: f64,
    pub detection: DetectionStats,
    pub corollary_checked: usize,
    pub corollary_passed: usize,
    pub failures: Vec<RepFailure>,
}

/// Model of a single-node network: post-change `f`, pre-change `g`.
pub fn classic_model(net: &Network) -> Result<ClassicModel> {
    if net.d() != 1 || !net.edges().is_empty() {
        return Err(Error::Config(format!(
            "the single change-point experiment needs one node, got {}",
            net.d()
        )));
    }
    let n = net.nodes()[0];
    ClassicModel::new(n.post, n.pre, n.rho)
}

fn classic_rep(cfg: &ExperimentConfig, model: &ClassicModel, rep: usize) -> Result<ClassicRep> {
    let p = &cfg.experiment;
    let seed = cfg.rep_seed(rep);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lambda = sample_lambda(model.rho, p.max_lambda, &mut rng)?;
    let run = shiryayev_run(model, p.alpha, lambda, p.horizon, &mut rng)?;
    let start = usize::try_from(lambda - 1).unwrap_or(usize::MAX);
    let post_steps = p.horizon.saturating_sub(start);
    let corollary = (post_steps > DEFAULT_BURN_IN + 2)
        .then(|| corollary_check(&run.trace, model, post_steps, DEFAULT_BURN_IN, 3.0))
        .transpose()?;
    let kappa = 1.0 - model.rho;
    let envelope = envelope_from(
        &run.trace.gamma,
        start.max(1),
        kappa,
        model.information(),
        p.eps,
    );
    Ok(ClassicRep {
        rep,
        seed,
        tau: run.tau,
        trace: run.trace,
        envelope,
        corollary,
    })
}

fn sample_lambda(rho: f64, max_lambda: Option<u64>, rng: &mut ChaCha8Rng) -> Result<u64> {
    for _ in 0..MAX_REJECTIONS {
        let l = sample_changepoint(rho, rng)?;
        if max_lambda.is_none_or(|m| l <= m) {
            return Ok(l);
        }
    }
    Err(Error::Resource(
        "change-time rejection sampling did not terminate".into(),
    ))
}

/// `envelope_bound` started from the anchor mass at step `start`.
fn envelope_from(
    anchor: &[f64],
    start: usize,
    kappa: f64,
    i_star: f64,
    eps: f64,
) -> Vec<Option<f64>> {
    anchor
        .iter()
        .enumerate()
        .map(|(n, _)| {
            (n >= start)
                .then(|| anchor.get(start).copied())
                .flatten()
                .and_then(|x0| envelope_bound(x0, kappa, i_star, eps, n - start).ok())
        })
        .collect()
}

/// Replicated Shiryayev runs. Failed replications are recorded, not fatal.
pub fn run_classic(cfg: &ExperimentConfig) -> Result<(Vec<ClassicRep>, ClassicSummary)> {
    cfg.validate()?;
    let model = classic_model(&cfg.network()?)?;
    let results: Vec<Result<ClassicRep>> = (0..cfg.experiment.reps)
        .into_par_iter()
        .map(|r| classic_rep(cfg, &model, r))
        .collect();
    let (mut reps, mut failures) = (Vec::new(), Vec::new());
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(rep) => reps.push(rep),
            Err(e) => failures.push(RepFailure {
                rep: r,
                seed: cfg.rep_seed(r),
                message: e.to_string(),
            }),
        }
    }
    let runs: Vec<_> = reps.iter().map(|r| (r.tau, r.trace.lambda)).collect();
    let checked: Vec<_> = reps.iter().filter_map(|r| r.corollary).collect();
    let summary = ClassicSummary {
        alpha: cfg.experiment.alpha,
        detectable: model.is_detectable(),
        information: model.information(),
        corollary_log_rate: model.corollary_log_rate(),
        detection: DetectionStats::from_runs(&runs),
        corollary_checked: checked.len(),
        corollary_passed: checked.iter().filter(|c| c.passed).count(),
        failures,
    };
    Ok((reps, summary))
}

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

/// Full-vector quantities, available when `d` is small enough.
#[derive(Debug, Clone)]
pub struct FullTrack {
    /// Per-node exact marginals `γ_j^n[n]`, indexed `[n][j]`.
    pub exact_gamma: Vec<Vec<f64>>,
    /// `‖y_n − e⁰‖₁`.
    pub exact_dist: Vec<f64>,
    /// `‖ỹ_n − e⁰‖₁` for the full-vector approximate filter.
    pub approx_dist: Vec<f64>,
    /// `‖y_n − ỹ_n‖₁`.
    pub gap: Vec<f64>,
    pub envelope: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub struct MultiRep {
    pub rep: usize,
    pub seed: u64,
    pub changes: ChangeVector,
    /// Per-node approximate marginals `γ̃_j^n[n]`, indexed `[n][j]`.
    pub approx_gamma: Vec<Vec<f64>>,
    pub full: Option<FullTrack>,
    pub tau_exact: Vec<Option<u64>>,
    pub tau_approx: Vec<Option<u64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct NodeSummary {
    pub node: usize,
    pub exact: Option<DetectionStats>,
    pub approx: DetectionStats,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Hypotheses {
    /// `I*(κ̄) > 0`.
    pub i_star_positive: bool,
    /// `K_ρ ≤ 1`.
    pub k_rho_at_most_one: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiSummary {
    pub alpha: f64,
    pub info: InfoStats,
    pub l_rho: f64,
    pub k_rho: f64,
    pub hypotheses: Hypotheses,
    pub nodes: Vec<NodeSummary>,
    /// Fits of `log ‖y_n − e⁰‖₁` after the last change time.
    pub exact_slopes: Option<SlopeSummary>,
    pub approx_slopes: Option<SlopeSummary>,
    /// Replications whose final `‖y_n − ỹ_n‖₁` is under 10% of its running max.
    pub gap_closed: Option<usize>,
    pub failures: Vec<RepFailure>,
}

fn sample_changes_bounded(
    net: &Network,
    max_lambda: Option<u64>,
    rng: &mut ChaCha8Rng,
) -> Result<ChangeVector> {
    for _ in 0..MAX_REJECTIONS {
        let c = sample_changes(net, rng)?;
        if max_lambda.is_none_or(|m| c.max_lambda() <= m) {
            return Ok(c);
        }
    }
    Err(Error::Resource(
        "change-time rejection sampling did not terminate".into(),
    ))
}

fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

fn multi_rep(cfg: &ExperimentConfig, net: &Network, i_star: f64, rep: usize) -> Result<MultiRep> {
    let p = &cfg.experiment;
    let seed = cfg.rep_seed(rep);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let changes = sample_changes_bounded(net, p.max_lambda, &mut rng)?;
    let frames = (1..=p.horizon as u64)
        .map(|t| sample_frame(net, &changes, t, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let d = net.d();
    let rhos = net.rhos();

    let mut state = MarginalState::initial(d);
    let mut approx_gamma = vec![state.gammas()];
    for (k, f) in frames.iter().enumerate() {
        state = algorithm1_step(&state, f, net)
            .map_err(|e| e.at_step(k + 1))?
            .0;
        approx_gamma.push(state.gammas());
    }

    let full = if d <= MAX_FULL_DIM {
        let kernel = build_tex(&rhos)?;
        let mut y = exact_initial(d)?;
        let mut yt = y.clone();
        let mut states: Vec<(ProbVec, ProbVec)> = vec![(y.clone(), yt.clone())];
        for (k, f) in frames.iter().enumerate() {
            let theta = theta_from_frame(net, f)?;
            y = exact_step(&y, &theta, &kernel).map_err(|e| e.at_step(k + 1))?;
            yt = approx_step_full(&yt, &theta, &rhos).map_err(|e| e.at_step(k + 1))?;
            states.push((y.clone(), yt.clone()));
        }
        let exact_gamma: Vec<Vec<f64>> = states
            .iter()
            .map(|(y, _)| y.marginals().iter().map(|m| m.p1()).collect())
            .collect();
        let anchors: Vec<f64> = states.iter().map(|(y, _)| y.anchor()).collect();
        let start = usize::try_from(changes.max_lambda() - 1)
            .unwrap_or(usize::MAX)
            .max(1);
        Some(FullTrack {
            exact_gamma,
            exact_dist: states.iter().map(|(y, _)| y.dist_to_target()).collect(),
            approx_dist: states.iter().map(|(_, yt)| yt.dist_to_target()).collect(),
            gap: states
                .iter()
                .map(|(y, yt)| y.l1_distance(yt))
                .collect::<Result<Vec<_>>>()?,
            envelope: envelope_from(&anchors, start, lipschitz_bound_tex(&rhos), i_star, p.eps),
        })
    } else {
        None
    };

    let tau_approx = (0..d)
        .map(|j| stopping_time(&column(&approx_gamma, j), p.alpha))
        .collect();
    let tau_exact = match &full {
        Some(f) => (0..d)
            .map(|j| stopping_time(&column(&f.exact_gamma, j), p.alpha))
            .collect(),
        None => vec![None; d],
    };
    Ok(MultiRep {
        rep,
        seed,
        changes,
        approx_gamma,
        full,
        tau_exact,
        tau_approx,
    })
}

/// `true` if the final gap is below 10% of its running maximum.
#[must_use]
pub fn gap_closed(gap: &[f64]) -> bool {
    let max = gap.iter().copied().fold(0.0, f64::max);
    gap.last().is_some_and(|g| *g < 0.1 * max || max == 0.0)
}

/// Exact and approximate network filters on shared data, replicated.
pub fn run_multi(cfg: &ExperimentConfig) -> Result<(Vec<MultiRep>, MultiSummary)> {
    cfg.validate()?;
    let net = cfg.network()?;
    if !net.is_tree() {
        return Err(Error::UnsupportedTopology(
            "the network must be acyclic".into(),
        ));
    }
    let info = info_stats(&net, cfg.experiment.kappa_bar);
    let results: Vec<Result<MultiRep>> = (0..cfg.experiment.reps)
        .into_par_iter()
        .map(|r| multi_rep(cfg, &net, info.i_star, r))
        .collect();
    let (mut reps, mut failures) = (Vec::new(), Vec::new());
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(rep) => reps.push(rep),
            Err(e) => failures.push(RepFailure {
                rep: r,
                seed: cfg.rep_seed(r),
                message: e.to_string(),
            }),
        }
    }
    let rhos = net.rhos();
    let has_full = reps
        .first()
        .map_or(net.d() <= MAX_FULL_DIM, |r| r.full.is_some());
    let nodes = (0..net.d())
        .map(|j| {
            let runs = |taus: fn(&MultiRep) -> &Vec<Option<u64>>| -> Vec<(Option<u64>, u64)> {
                reps.iter()
                    .map(|r| (taus(r)[j], r.changes.lambdas()[j]))
                    .collect()
            };
            NodeSummary {
                node: j + 1,
                exact: has_full.then(|| DetectionStats::from_runs(&runs(|r| &r.tau_exact))),
                approx: DetectionStats::from_runs(&runs(|r| &r.tau_approx)),
            }
        })
        .collect();
    let fits = |pick: fn(&FullTrack) -> &Vec<f64>| -> Vec<Option<RateFit>> {
        reps.iter()
            .filter_map(|r| {
                let start = usize::try_from(r.changes.max_lambda()).ok()?;
                r.full.as_ref().map(|f| fit_after(pick(f), start))
            })
            .collect()
    };
    let summary = MultiSummary {
        alpha: cfg.experiment.alpha,
        info,
        l_rho: lipschitz_bound_tex(&rhos),
        k_rho: lipschitz_bound_tap(&rhos),
        hypotheses: Hypotheses {
            i_star_positive: info.hypothesis_met(),
            k_rho_at_most_one: lipschitz_bound_tap(&rhos) <= 1.0,
        },
        nodes,
        exact_slopes: has_full.then(|| SlopeSummary::from_fits(&fits(|f| &f.exact_dist))),
        approx_slopes: has_full.then(|| SlopeSummary::from_fits(&fits(|f| &f.approx_dist))),
        gap_closed: has_full.then(|| {
            reps.iter()
                .filter(|r| r.full.as_ref().is_some_and(|f| gap_closed(&f.gap)))
                .count()
        }),
        failures,
    };
    Ok((reps, summary))
}

// ---------------------------------------------------------------------------
// Lipschitz report
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    pub rhos: Vec<f64>,
    pub pairs: usize,
    pub l_rho: f64,
    pub tex_empirical: f64,
    pub tex_within_bound: bool,
    pub k_rho: f64,
    pub tap_empirical: f64,
    pub tap_within_bound: bool,
    /// `K_ρ ≤ 1`, required for the approximate filter's convergence bound.
    pub k_rho_at_most_one: bool,
    /// `None` when `d` is too large for dense Jacobians.
    pub jacobian: Option<JacobianReport>,
    pub jacobian_identities_hold: Option<bool>,
}

impl LipschitzReport {
    #[must_use]
    pub fn all_pass(&self) -> bool {
        self.tex_within_bound
            && self.tap_within_bound
            && self.jacobian_identities_hold != Some(false)
    }
}

/// Closed-form bounds against sampled estimates for both predict operators.
pub fn cmd_lipschitz(rhos: &[f64], pairs: usize, seed: u64) -> Result<LipschitzReport> {
    let kernel = build_tex(rhos)?;
    let tap = MeanFieldPredict::new(rhos)?;
    let (l_rho, k_rho) = (lipschitz_bound_tex(rhos), lipschitz_bound_tap(rhos));
    let tex_empirical = empirical_lipschitz(&kernel, pairs, seed)?;
    let tap_empirical = empirical_lipschitz(&tap, pairs, seed)?;
    let jacobian = (rhos.len() <= 10)
        .then(|| tap_jacobian_bound_check(rhos, pairs.min(1000), seed))
        .transpose()?;
    Ok(LipschitzReport {
        rhos: rhos.to_vec(),
        pairs,
        l_rho,
        tex_empirical,
        tex_within_bound: tex_empirical <= l_rho + 1e-9,
        k_rho,
        tap_empirical,
        tap_within_bound: tap_empirical <= k_rho + 1e-9,
        k_rho_at_most_one: k_rho <= 1.0,
        jacobian_identities_hold: jacobian.map(|j| j.holds(1e-9)),
        jacobian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeSpec;

    #[test]
    fn wilson_examples() {
        let (lo, hi) = wilson_interval(0, 100, 1.96);
        assert_eq!(lo, 0.0);
        assert!((hi - 0.0370).abs() < 1e-3);
        let (lo, hi) = wilson_interval(50, 100, 1.96);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
        assert_eq!(wilson_interval(0, 0, 1.96), (0.0, 1.0));
    }

    #[test]
    fn stopping_time_skips_initial_value() {
        assert_eq!(stopping_time(&[1.0, 0.2, 0.995, 1.0], 0.01), Some(2));
        assert_eq!(stopping_time(&[0.0, 0.2], 0.01), None);
        let s = DetectionStats::from_runs(&[(Some(2), 5), (Some(7), 5), (None, 3)]);
        assert_eq!((s.false_alarms, s.censored), (1, 1));
        assert_eq!(s.mean_delay, Some(2.0));
    }

    fn small_cfg(preset: &str, reps: usize) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::with_preset(preset);
        cfg.experiment.reps = reps;
        cfg.experiment.horizon = 40;
        cfg.experiment.seed = 17;
        cfg
    }

    #[test]
    fn classic_run_summary() {
        let (reps, s) = run_classic(&small_cfg("classic", 50)).unwrap();
        assert_eq!(reps.len(), 50);
        assert!(s.detectable);
        assert!((s.information - 0.5).abs() < 1e-15);
        assert_eq!(s.detection.replications, 50);
        assert!(reps.iter().all(|r| r.trace.gamma.len() == 41));
        assert!(run_classic(&small_cfg("star4", 1)).is_err());
    }

    #[test]
    fn undetectable_classic_is_flagged() {
        let same = crate::classic::GaussianSpec {
            mean: 0.0,
            variance: 1.0,
        };
        let mut cfg = small_cfg("classic", 20);
        cfg.nodes = vec![NodeSpec {
            rho: 0.01,
            pre: same,
            post: same,
        }];
        let (_, s) = run_classic(&cfg).unwrap();
        assert!(!s.detectable);
        assert_eq!(s.information, 0.0);
    }

    #[test]
    fn certain_change_stops_immediately() {
        let base = Network::star4();
        let mut cfg = small_cfg("star4", 5);
        cfg.nodes = base
            .nodes()
            .iter()
            .map(|n| NodeSpec { rho: 0.999, ..*n })
            .collect();
        cfg.experiment.alpha = 0.01;
        let (reps, _) = run_multi(&cfg).unwrap();
        // With no edges the prior alone crosses 1 − α at the first step.
        assert!(reps
            .iter()
            .all(|r| r.tau_approx.iter().all(|t| t.is_some())));
    }

    #[test]
    fn multi_run_is_deterministic_and_consistent() {
        let cfg = small_cfg("star4", 6);
        let (a, s) = run_multi(&cfg).unwrap();
        let (b, _) = run_multi(&cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.approx_gamma, y.approx_gamma);
            assert_eq!(
                x.full.as_ref().unwrap().exact_dist,
                y.full.as_ref().unwrap().exact_dist
            );
        }
        assert_eq!(s.nodes.len(), 4);
        assert!(!s.hypotheses.k_rho_at_most_one);
        for r in &a {
            let f = r.full.as_ref().unwrap();
            assert_eq!(f.exact_gamma.len(), 41);
            for n in 0..=40 {
                for j in 0..4 {
                    assert!((0.0..=1.0 + 1e-12).contains(&f.exact_gamma[n][j]));
                    assert!((0.0..=1.0 + 1e-12).contains(&r.approx_gamma[n][j]));
                }
                assert!(f.gap[n] >= 0.0 && f.exact_dist[n] >= 0.0);
            }
        }
    }

    #[test]
    fn lipschitz_report_examples() {
        let r = cmd_lipschitz(&[0.1, 0.1], 2000, 0).unwrap();
        assert!((r.l_rho - 0.99).abs() < 1e-15);
        assert!(r.all_pass());
        let r = cmd_lipschitz(&[0.1; 4], 500, 0).unwrap();
        assert!((r.k_rho - 3.6).abs() < 1e-15);
        assert!(!r.k_rho_at_most_one);
        let r = cmd_lipschitz(&[0.3], 500, 0).unwrap();
        assert!((r.l_rho - r.k_rho).abs() < 1e-15);
    }
}
