//! The classical single change-point problem: Gaussian streams, the
//! posterior recursion for `γ^n[n] = P(λ ≤ n | X^1..X^n)`, and the
//! Shiryayev stopping rule.

use rand::Rng;
use rand_distr::{Distribution, Geometric, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irf::{rate_fit, RateFit};
use crate::simplex::BernoulliPair;

// ---------------------------------------------------------------------------
// Gaussian densities
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianSpec {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        let spec = Self { mean, variance };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.variance > 0.0 && self.variance.is_finite() && self.mean.is_finite()) {
            return Err(Error::arg(format!(
                "Gaussian needs finite mean and positive variance, got N({}, {})",
                self.mean, self.variance
            )));
        }
        Ok(())
    }

    #[must_use]
    pub fn log_pdf(&self, x: f64) -> f64 {
        let z = x - self.mean;
        -0.5 * (z * z / self.variance + (2.0 * std::f64::consts::PI * self.variance).ln())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        Normal::new(self.mean, self.variance.sqrt())
            .expect("validated spec")
            .sample(rng)
    }
}

/// `log(g(x) / f(x))` for pre-change `g` and post-change `f`.
pub fn log_likelihood_ratio(pre: &GaussianSpec, post: &GaussianSpec, x: f64) -> Result<f64> {
    let y = pre.log_pdf(x) - post.log_pdf(x);
    if !y.is_finite() {
        return Err(Error::DegenerateObservation(format!(
            "log-likelihood ratio at x = {x} is {y}"
        )));
    }
    Ok(y)
}

/// `KL(f ‖ g) = ∫ f log(f/g)`.
#[must_use]
pub fn kl_gaussian(f: &GaussianSpec, g: &GaussianSpec) -> f64 {
    let dm = f.mean - g.mean;
    0.5 * ((g.variance / f.variance).ln() + (f.variance + dm * dm) / g.variance - 1.0)
}

/// Standard deviation of `log(g(X)/f(X))` for `X ~ f`.
///
/// The ratio is the quadratic `a x² + b x + c`; for `X ~ N(μ, s²)` its
/// variance is `2a²s⁴ + s²(2aμ + b)²`.
#[must_use]
pub fn llr_std_under_post(pre: &GaussianSpec, post: &GaussianSpec) -> f64 {
    let a = 0.5 / post.variance - 0.5 / pre.variance;
    let b = pre.mean / pre.variance - post.mean / post.variance;
    let (mu, s2) = (post.mean, post.variance);
    (2.0 * a * a * s2 * s2 + s2 * (2.0 * a * mu + b).powi(2)).sqrt()
}

// ---------------------------------------------------------------------------
// Priors on the change time
// ---------------------------------------------------------------------------

/// A prior on `λ ∈ {1, 2, …}`.
pub trait ChangePrior {
    /// `π(n)`.
    fn pmf(&self, n: u64) -> f64;
    /// `π[k]^c = Σ_{i > k} π(i)`.
    fn tail(&self, k: u64) -> f64;
}

/// `π(n) = (1 − ρ)^{n−1} ρ`.
#[derive(Debug, Clone, Copy)]
pub struct GeometricPrior {
    pub rho: f64,
}

impl ChangePrior for GeometricPrior {
    fn pmf(&self, n: u64) -> f64 {
        if n == 0 {
            return 0.0;
        }
        (1.0 - self.rho).powf((n - 1) as f64) * self.rho
    }

    fn tail(&self, k: u64) -> f64 {
        (1.0 - self.rho).powf(k as f64)
    }
}

/// Uniform on `{1, …, n_max}`.
#[derive(Debug, Clone, Copy)]
pub struct UniformPrior {
    pub n_max: u64,
}

impl ChangePrior for UniformPrior {
    fn pmf(&self, n: u64) -> f64 {
        if (1..=self.n_max).contains(&n) {
            1.0 / self.n_max as f64
        } else {
            0.0
        }
    }

    fn tail(&self, k: u64) -> f64 {
        self.n_max.saturating_sub(k) as f64 / self.n_max as f64
    }
}

/// General predict step `γ^{n−1}[n] = π(n)/π[n−1]^c + π[n]^c/π[n−1]^c · γ^{n−1}[n−1]`.
pub fn prior_predict_general<P: ChangePrior + ?Sized>(
    gamma: f64,
    prior: &P,
    n: u64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::arg("prediction is defined for n ≥ 1"));
    }
    let prev_tail = prior.tail(n - 1);
    if prev_tail <= 0.0 {
        // The change has happened with prior certainty.
        return Ok(1.0);
    }
    Ok(prior.pmf(n) / prev_tail + prior.tail(n) / prev_tail * gamma)
}

// ---------------------------------------------------------------------------
// Model and recursion
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicModel {
    /// Post-change density.
    pub f: GaussianSpec,
    /// Pre-change density.
    pub g: GaussianSpec,
    pub rho: f64,
}

impl ClassicModel {
    pub fn new(f: GaussianSpec, g: GaussianSpec, rho: f64) -> Result<Self> {
        f.validate()?;
        g.validate()?;
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::arg(format!("ρ = {rho} outside (0, 1]")));
        }
        Ok(Self { f, g, rho })
    }

    /// `I = KL(f ‖ g)`.
    #[must_use]
    pub fn information(&self) -> f64 {
        kl_gaussian(&self.f, &self.g)
    }

    /// `false` when pre- and post-change laws coincide.
    #[must_use]
    pub fn is_detectable(&self) -> bool {
        self.f != self.g
    }

    /// `log((1 − ρ) e^{−I})`, the per-step decay rate of `1 − γ` after the change.
    #[must_use]
    pub fn corollary_log_rate(&self) -> f64 {
        (1.0 - self.rho).ln() - self.information()
    }
}

/// Draw `λ` with `P(λ = k) = (1 − ρ)^{k−1} ρ`, `k ≥ 1`.
pub fn sample_changepoint<R: Rng + ?Sized>(rho: f64, rng: &mut R) -> Result<u64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::arg(format!("ρ = {rho} outside (0, 1]")));
    }
    let geo = Geometric::new(rho).map_err(|e| Error::arg(e.to_string()))?;
    Ok(geo.sample(rng).saturating_add(1))
}

/// `γ ↦ ρ + (1 − ρ) γ`.
#[must_use]
pub fn prior_predict(gamma: f64, rho: f64) -> f64 {
    rho + (1.0 - rho) * gamma
}

/// First coordinate of `q_{(1, g(x)/f(x))}((γ, 1 − γ))`.
pub fn posterior_step(gamma_pred: f64, x: f64, model: &ClassicModel) -> Result<f64> {
    let pair = BernoulliPair::from_p1(gamma_pred)?;
    let y = log_likelihood_ratio(&model.g, &model.f, x)?;
    Ok(update_pair(pair, y)?.p1())
}

fn predict_pair(pair: BernoulliPair, rho: f64) -> BernoulliPair {
    let p0 = (1.0 - rho) * pair.p0();
    BernoulliPair::from_masses(1.0 - p0, p0).expect("masses sum to one")
}

/// Bayes update of `(P(Z=1), P(Z=0))` with weights `(1, e^{log_ratio})`.
pub(crate) fn update_pair(pair: BernoulliPair, log_ratio: f64) -> Result<BernoulliPair> {
    let (w1, w0) = if log_ratio > 0.0 {
        ((-log_ratio).exp(), 1.0)
    } else {
        (1.0, log_ratio.exp())
    };
    BernoulliPair::from_masses(pair.p1() * w1, pair.p0() * w0)
        .ok_or(Error::DegenerateUpdate { step: None })
}

/// Observation at time `t` given the change time: post-change iff `t ≥ λ`.
pub fn sample_observation<R: Rng + ?Sized>(
    model: &ClassicModel,
    lambda: u64,
    t: u64,
    rng: &mut R,
) -> f64 {
    if t >= lambda {
        model.f.sample(rng)
    } else {
        model.g.sample(rng)
    }
}

/// Posterior path of one run. Index `n` holds the value after `n` observations.
#[derive(Debug, Clone)]
pub struct ClassicTrace {
    pub lambda: u64,
    pub observations: Vec<f64>,
    /// `log(g/f)` of each observation.
    pub log_ratios: Vec<f64>,
    /// `γ^n[n]`.
    pub gamma: Vec<f64>,
    /// `1 − γ^n[n]`, tracked separately from `γ`.
    pub complement: Vec<f64>,
}

impl ClassicTrace {
    /// `‖Q_n − e⁰‖₁ = 2(1 − γ^n[n])`.
    #[must_use]
    pub fn distances(&self) -> Vec<f64> {
        self.complement.iter().map(|c| 2.0 * c).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ShiryayevRun {
    /// First `n` with `γ^n[n] ≥ 1 − α`; `None` if the threshold was never crossed.
    pub tau: Option<u64>,
    pub trace: ClassicTrace,
}

impl ShiryayevRun {
    #[must_use]
    pub fn false_alarm(&self) -> bool {
        self.tau.is_some_and(|t| t < self.trace.lambda)
    }
}

/// Simulate `horizon` observations with change time `lambda` and apply the
/// Shiryayev rule. The posterior is tracked for the whole horizon.
pub fn shiryayev_run<R: Rng + ?Sized>(
    model: &ClassicModel,
    alpha: f64,
    lambda: u64,
    horizon: usize,
    rng: &mut R,
) -> Result<ShiryayevRun> {
    if horizon == 0 {
        return Err(Error::arg("horizon must be at least 1"));
    }
    if !(alpha > 0.0) {
        return Err(Error::arg(format!("α = {alpha} must be positive")));
    }
    let observations: Vec<f64> = (1..=horizon as u64)
        .map(|t| sample_observation(model, lambda, t, rng))
        .collect();
    run_on_observations(model, alpha, lambda, observations)
}

/// The Shiryayev recursion on a given observation sequence.
pub fn run_on_observations(
    model: &ClassicModel,
    alpha: f64,
    lambda: u64,
    observations: Vec<f64>,
) -> Result<ShiryayevRun> {
    let threshold = 1.0 - alpha;
    let n = observations.len();
    let mut gamma = Vec::with_capacity(n + 1);
    let mut complement = Vec::with_capacity(n + 1);
    let mut log_ratios = Vec::with_capacity(n);
    let mut state = BernoulliPair::new(0.0, 1.0)?;
    gamma.push(0.0);
    complement.push(1.0);
    let mut tau = None;
    for (k, x) in observations.iter().enumerate() {
        let y = log_likelihood_ratio(&model.g, &model.f, *x)?;
        state = update_pair(predict_pair(state, model.rho), y).map_err(|e| e.at_step(k + 1))?;
        log_ratios.push(y);
        gamma.push(state.p1());
        complement.push(state.p0());
        if tau.is_none() && state.p1() >= threshold {
            tau = Some(k as u64 + 1);
        }
    }
    Ok(ShiryayevRun {
        tau,
        trace: ClassicTrace {
            lambda,
            observations,
            log_ratios,
            gamma,
            complement,
        },
    })
}

// ---------------------------------------------------------------------------
// Rate check after the change
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize)]
pub struct CorollaryOutcome {
    pub lambda: u64,
    /// Fitted slope of `log(1 − γ)` from the change time on; `None` when the
    /// posterior reached exactly one.
    pub slope: Option<f64>,
    /// `log((1 − ρ) e^{−I}) + ε`.
    pub bound: f64,
    pub eps: f64,
    pub passed: bool,
}

/// Slope of `log(1 − γ^{n+k}[n+k])` over `n = 0..=post_steps`, where
/// `k = λ − 1`, compared with `log((1−ρ)e^{−I}) + ε`. `ε` is `eps_multiplier`
/// times the standard error of the post-change log-likelihood ratios.
pub fn corollary_check(
    trace: &ClassicTrace,
    model: &ClassicModel,
    post_steps: usize,
    burn_in: usize,
    eps_multiplier: f64,
) -> Result<CorollaryOutcome> {
    let start = usize::try_from(trace.lambda - 1).map_err(|_| Error::arg("λ too large"))?;
    let end = start + post_steps;
    if end >= trace.complement.len() {
        return Err(Error::arg(format!(
            "trace of length {} ends before step {end}",
            trace.complement.len()
        )));
    }
    let post = &trace.log_ratios[start..end];
    let eps = eps_multiplier * standard_error(post);
    let bound = model.corollary_log_rate() + eps;
    let slope = match rate_fit(&trace.complement[start..=end], burn_in)? {
        RateFit::Slope(s) => Some(s),
        RateFit::ExactConvergence { .. } => None,
    };
    Ok(CorollaryOutcome {
        lambda: trace.lambda,
        slope,
        bound,
        eps,
        passed: slope.is_none_or(|s| s <= bound),
    })
}

/// Sample standard deviation divided by `√n`.
pub(crate) fn standard_error(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::irf::{iterate, GeometricPredict};
    use crate::simplex::{ProbVec, WeightVec};

    fn reference_model() -> ClassicModel {
        ClassicModel::new(
            GaussianSpec::new(0.0, 1.0).unwrap(),
            GaussianSpec::new(1.0, 1.0).unwrap(),
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn changepoint_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!((0..100).all(|_| sample_changepoint(1.0, &mut rng).unwrap() == 1));

        let n = 100_000;
        let mean = (0..n)
            .map(|_| sample_changepoint(0.1, &mut rng).unwrap() as f64)
            .sum::<f64>()
            / n as f64;
        assert!((mean - 10.0).abs() < 0.3, "mean {mean}");

        let ones = (0..n)
            .filter(|_| sample_changepoint(0.5, &mut rng).unwrap() == 1)
            .count() as f64
            / n as f64;
        assert!((ones - 0.5).abs() < 0.01, "P(λ=1) {ones}");
        assert!(sample_changepoint(0.0, &mut rng).is_err());
    }

    #[test]
    fn prior_predict_examples() {
        assert_eq!(prior_predict(1.0, 0.3), 1.0);
        assert!((prior_predict(0.0, 0.1) - 0.1).abs() < 1e-15);
        assert!((prior_predict(0.5, 0.2) - 0.6).abs() < 1e-15);
    }

    #[test]
    fn general_predict_reduces_to_geometric() {
        let prior = GeometricPrior { rho: 0.15 };
        for n in 1..30 {
            for g in [0.0, 0.3, 0.99] {
                let a = prior_predict_general(g, &prior, n).unwrap();
                assert!((a - prior_predict(g, 0.15)).abs() < 1e-12);
            }
        }
    }

    /// `P(λ ≤ n | X^n)` by summing over every change time.
    fn brute_posterior<P: ChangePrior>(prior: &P, model: &ClassicModel, xs: &[f64]) -> f64 {
        let n = xs.len() as u64;
        let loglik = |lambda: u64| -> f64 {
            xs.iter()
                .enumerate()
                .map(|(i, x)| {
                    if i as u64 + 1 >= lambda {
                        model.f.log_pdf(*x)
                    } else {
                        model.g.log_pdf(*x)
                    }
                })
                .sum()
        };
        let mut before = 0.0;
        for k in 1..=n {
            before += prior.pmf(k) * loglik(k).exp();
        }
        let after = prior.tail(n) * loglik(n + 1).exp();
        before / (before + after)
    }

    #[test]
    fn general_recursion_matches_enumeration_for_uniform_prior() {
        let model = reference_model();
        let prior = UniformPrior { n_max: 12 };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xs: Vec<f64> = (1..=10)
            .map(|t| sample_observation(&model, 6, t, &mut rng))
            .collect();
        let mut gamma = 0.0;
        for (i, x) in xs.iter().enumerate() {
            let pred = prior_predict_general(gamma, &prior, i as u64 + 1).unwrap();
            gamma = posterior_step(pred, *x, &model).unwrap();
            let brute = brute_posterior(&prior, &model, &xs[..=i]);
            assert!(
                (gamma - brute).abs() < 1e-12,
                "step {i}: {gamma} vs {brute}"
            );
        }
    }

    #[test]
    fn geometric_recursion_matches_enumeration() {
        let model = reference_model();
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        let run = shiryayev_run(&model, 0.01, 7, 15, &mut rng).unwrap();
        let prior = GeometricPrior { rho: model.rho };
        for n in 1..=15 {
            let brute = brute_posterior(&prior, &model, &run.trace.observations[..n]);
            assert!((run.trace.gamma[n] - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn posterior_step_examples() {
        let model = reference_model();
        // x = 0.5 makes g(x) = f(x) for means 0 and 1 with equal variance.
        assert!((posterior_step(0.37, 0.5, &model).unwrap() - 0.37).abs() < 1e-15);
        assert_eq!(posterior_step(1.0, -3.0, &model).unwrap(), 1.0);
        // log(g/f)(x) = x − 1/2, so ratio 1/3 at x = 1/2 − ln 3.
        let x = 0.5 - 3f64.ln();
        assert!((posterior_step(0.5, x, &model).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn kl_examples() {
        let a = GaussianSpec::new(0.0, 1.0).unwrap();
        let b = GaussianSpec::new(1.0, 1.0).unwrap();
        assert_eq!(kl_gaussian(&a, &a), 0.0);
        assert!((kl_gaussian(&a, &b) - 0.5).abs() < 1e-15);
        assert!((kl_gaussian(&a, &b) - kl_gaussian(&b, &a)).abs() < 1e-15);
        let c = GaussianSpec::new(-2.0, 1.0).unwrap();
        let d = GaussianSpec::new(0.5, 1.0).unwrap();
        assert!((kl_gaussian(&c, &d) - kl_gaussian(&d, &c)).abs() < 1e-15);
    }

    #[test]
    fn llr_std_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (pre, post) in [
            (
                GaussianSpec::new(1.0, 1.0).unwrap(),
                GaussianSpec::new(0.0, 1.0).unwrap(),
            ),
            (
                GaussianSpec::new(0.5, 2.0).unwrap(),
                GaussianSpec::new(-0.3, 0.7).unwrap(),
            ),
        ] {
            let ys: Vec<f64> = (0..200_000)
                .map(|_| log_likelihood_ratio(&pre, &post, post.sample(&mut rng)).unwrap())
                .collect();
            let n = ys.len() as f64;
            let mean = ys.iter().sum::<f64>() / n;
            let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(
                (mean + kl_gaussian(&post, &pre)).abs() < 0.02,
                "mean {mean}"
            );
            let closed = llr_std_under_post(&pre, &post);
            assert!(
                (sd - closed).abs() / closed < 0.02,
                "sd {sd} closed {closed}"
            );
        }
    }

    #[test]
    fn threshold_at_or_below_zero_stops_immediately() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for alpha in [1.0, 1.5] {
            let run = shiryayev_run(&reference_model(), alpha, 5, 10, &mut rng).unwrap();
            assert_eq!(run.tau, Some(1));
        }
    }

    #[test]
    fn uninformative_data_follows_prior() {
        let same = GaussianSpec::new(0.0, 1.0).unwrap();
        let model = ClassicModel::new(same, same, 0.9).unwrap();
        assert!(!model.is_detectable());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let run = shiryayev_run(&model, 0.001, 3, 20, &mut rng).unwrap();
        for n in 0..=20 {
            let expected = 1.0 - 0.1f64.powi(n as i32);
            assert!((run.trace.gamma[n] - expected).abs() < 1e-12);
            assert!((run.trace.complement[n] - 0.1f64.powi(n as i32)).abs() < 1e-15);
        }
        // 1 − 0.1^n ≥ 0.999 first at n = 3.
        assert_eq!(run.tau, Some(3));
    }

    #[test]
    fn never_crossing_is_censored() {
        let same = GaussianSpec::new(0.0, 1.0).unwrap();
        let model = ClassicModel::new(same, same, 0.001).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let run = shiryayev_run(&model, 0.01, 3, 50, &mut rng).unwrap();
        assert_eq!(run.tau, None);
        assert!(!run.false_alarm());
    }

    #[test]
    fn recursion_equals_general_iteration() {
        let model = reference_model();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let run = shiryayev_run(&model, 0.01, 12, 60, &mut rng).unwrap();
        let thetas: Vec<WeightVec> = run
            .trace
            .log_ratios
            .iter()
            .map(|y| WeightVec::from_log(1, vec![*y, 0.0]).unwrap())
            .collect();
        let op = GeometricPredict::new(1, model.rho).unwrap();
        let x0 = ProbVec::point_mass(1, 0).unwrap();
        let tr = iterate(&op, &thetas, &x0, 60).unwrap();
        for n in 0..=60 {
            assert!((tr.states[n].anchor() - run.trace.gamma[n]).abs() < 1e-12);
        }

        // Scaling θ_n by f(X^n) leaves the path unchanged.
        let scaled: Vec<WeightVec> = run
            .trace
            .observations
            .iter()
            .map(|x| {
                let lf = model.f.log_pdf(*x);
                let lg = model.g.log_pdf(*x);
                WeightVec::from_log(1, vec![lg, lf]).unwrap()
            })
            .collect();
        let tr2 = iterate(&op, &scaled, &x0, 60).unwrap();
        for n in 0..=60 {
            assert!((tr2.states[n].anchor() - tr.states[n].anchor()).abs() < 1e-12);
        }
    }

    #[test]
    fn corollary_on_a_single_run() {
        let model = reference_model();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let run = shiryayev_run(&model, 0.01, 4, 250, &mut rng).unwrap();
        let out = corollary_check(&run.trace, &model, 200, 5, 3.0).unwrap();
        assert!(out.eps > 0.0);
        assert!((out.bound - out.eps - (0.9f64.ln() - 0.5)).abs() < 1e-12);
        assert!(corollary_check(&run.trace, &model, 300, 5, 3.0).is_err());
    }
}
