//! The iteration `Q_n = q_{θ_n}(T(Q_{n−1}))`, its convergence bound, and the
//! scalar quantities used to analyze it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::simplex::{bayes_update, theta_dagger, ProbVec, WeightVec};

/// A deterministic map `P_d → P_d` with a declared ℓ1 Lipschitz constant.
pub trait IrfOperator: Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &ProbVec) -> Result<ProbVec>;

    /// Upper bound on `sup ‖T(x) − T(y)‖₁ / ‖x − y‖₁`.
    fn declared_lipschitz(&self) -> f64;

    fn declared_fixed_point(&self) -> ProbVec {
        ProbVec::target(self.dim()).expect("operator dimension is valid")
    }
}

fn check_dim(op_d: usize, x: &ProbVec) -> Result<()> {
    if x.d() != op_d {
        return Err(Error::arg(format!(
            "operator has d = {op_d}, input has d = {}",
            x.d()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct Identity {
    pub d: usize,
}

impl IrfOperator for Identity {
    fn dim(&self) -> usize {
        self.d
    }

    fn apply(&self, x: &ProbVec) -> Result<ProbVec> {
        check_dim(self.d, x)?;
        Ok(x.clone())
    }

    fn declared_lipschitz(&self) -> f64 {
        1.0
    }
}

/// The constant map onto `e⁰`.
#[derive(Debug, Clone, Copy)]
pub struct CollapseToTarget {
    pub d: usize,
}

impl IrfOperator for CollapseToTarget {
    fn dim(&self) -> usize {
        self.d
    }

    fn apply(&self, x: &ProbVec) -> Result<ProbVec> {
        check_dim(self.d, x)?;
        ProbVec::target(self.d)
    }

    fn declared_lipschitz(&self) -> f64 {
        0.0
    }
}

/// `T(x) = ρ e⁰ + (1 − ρ) x`, the single change-point prior predict step.
#[derive(Debug, Clone, Copy)]
pub struct GeometricPredict {
    d: usize,
    rho: f64,
}

impl GeometricPredict {
    pub fn new(d: usize, rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::arg(format!("ρ = {rho} outside [0, 1]")));
        }
        ProbVec::target(d)?;
        Ok(Self { d, rho })
    }

    #[must_use]
    pub fn rho(&self) -> f64 {
        self.rho
    }
}

impl IrfOperator for GeometricPredict {
    fn dim(&self) -> usize {
        self.d
    }

    fn apply(&self, x: &ProbVec) -> Result<ProbVec> {
        check_dim(self.d, x)?;
        let keep = 1.0 - self.rho;
        let mut out: Vec<f64> = x.entries().iter().map(|v| keep * v).collect();
        let a = out.len() - 1;
        // Anchor from the tail so that tiny tails are not lost to rounding.
        out[a] = 1.0 - keep * x.tail_mass();
        Ok(ProbVec::from_raw(self.d, out))
    }

    fn declared_lipschitz(&self) -> f64 {
        1.0 - self.rho
    }
}

// ---------------------------------------------------------------------------
// Iteration
// ---------------------------------------------------------------------------

/// States `Q_0..Q_n`, their distances to `e⁰`, and the weights consumed.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub states: Vec<ProbVec>,
    pub distances: Vec<f64>,
    pub thetas: Vec<WeightVec>,
}

/// Run `n` steps of `Q_k = q_{θ_k}(T(Q_{k−1}))` from `Q_0 = x0`.
pub fn iterate<T: IrfOperator + ?Sized>(
    op: &T,
    thetas: &[WeightVec],
    x0: &ProbVec,
    n: usize,
) -> Result<IterationTrace> {
    if n > thetas.len() {
        return Err(Error::arg(format!(
            "{n} steps requested but only {} weight vectors supplied",
            thetas.len()
        )));
    }
    if x0.d() != op.dim() || thetas[..n].iter().any(|t| t.d() != op.dim()) {
        return Err(Error::arg(
            "dimension mismatch between operator, state and weights",
        ));
    }
    let mut states = Vec::with_capacity(n + 1);
    states.push(x0.clone());
    for (k, theta) in thetas[..n].iter().enumerate() {
        let predicted = op.apply(&states[k])?;
        let next = bayes_update(&predicted, theta).map_err(|e| e.at_step(k + 1))?;
        states.push(next);
    }
    let distances = states.iter().map(ProbVec::dist_to_target).collect();
    Ok(IterationTrace {
        states,
        distances,
        thetas: thetas[..n].to_vec(),
    })
}

// ---------------------------------------------------------------------------
// Bounds
// ---------------------------------------------------------------------------

/// `2 (1 − x⁽⁰⁾)/x⁽⁰⁾ · (κ e^{−I* + ε})^n`.
pub fn envelope_bound(x0_anchor: f64, kappa: f64, i_star: f64, eps: f64, n: usize) -> Result<f64> {
    if x0_anchor == 0.0 {
        return Err(Error::BoundUndefined(
            "initial anchor mass is zero; the bound divides by it".into(),
        ));
    }
    if !(0.0..=1.0).contains(&x0_anchor) {
        return Err(Error::arg(format!("x⁽⁰⁾ = {x0_anchor} outside (0, 1]")));
    }
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::arg(format!("κ = {kappa} outside [0, 1]")));
    }
    let prefactor = 2.0 * (1.0 - x0_anchor) / x0_anchor;
    if prefactor == 0.0 {
        return Ok(0.0);
    }
    let rate = kappa * (-i_star + eps).exp();
    Ok(prefactor * rate.powi(i32::try_from(n).unwrap_or(i32::MAX)))
}

/// The pathwise bound obtained by peeling `T` off every step:
/// `‖Q_n − e⁰‖₁ ≤ 2 (1 − g_Π(x⁽⁰⁾))` with `Π = κⁿ ∏ θ*_k`.
pub fn pathwise_bound(x0_anchor: f64, log_theta_stars: &[f64], kappa: f64) -> Result<f64> {
    let log_pi = log_theta_stars.iter().sum::<f64>() + log_theta_stars.len() as f64 * kappa.ln();
    let pi = log_pi.exp();
    if pi == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * g_bar(pi, x0_anchor)?)
}

/// `g_θ(r) = r / (r + θ(1 − r))`.
pub fn g_theta(theta: f64, r: f64) -> Result<f64> {
    let den = r + theta * (1.0 - r);
    if den == 0.0 {
        return Err(Error::DegenerateUpdate { step: None });
    }
    Ok(r / den)
}

/// `ḡ_θ(r) = 1 − g_θ(r) = θ(1 − r) / (r + θ(1 − r))`, evaluated without
/// cancellation.
pub fn g_bar(theta: f64, r: f64) -> Result<f64> {
    let rb = 1.0 - r;
    let den = r + theta * rb;
    if den == 0.0 {
        return Err(Error::DegenerateUpdate { step: None });
    }
    Ok(theta * rb / den)
}

/// Closed form of `M_κ(θ, γ) = sup ḡ_θ(r)/ḡ_γ(s)` over `1−r ≤ κ(1−s)`.
pub fn m_const_closed_form(kappa: f64, theta: f64, gamma: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::arg(format!("κ = {kappa} outside (0, 1]")));
    }
    if !(theta > 0.0) {
        return Err(Error::arg(format!("θ = {theta} must be positive")));
    }
    if gamma == 0.0 {
        return Err(Error::arg("γ must be nonzero"));
    }
    let eps = 1.0 - theta;
    let delta = 1.0 - gamma;
    let ratio = ((1.0 - delta) / (1.0 - kappa * eps)).abs();
    Ok(theta * kappa / gamma.abs() * ratio.max(1.0))
}

/// Brute-force `M_κ(θ, γ)` over `r̄, s̄ ∈ {1/N, …, 1}` with `r̄ ≤ κ s̄`. For
/// each `s̄` the boundary point `r̄ = κ s̄` is evaluated as well. The result
/// is a lower bound on the supremum.
pub fn m_const_grid(kappa: f64, theta: f64, gamma: f64, grid_size: usize) -> Result<f64> {
    if grid_size < 100 {
        return Err(Error::arg(format!("grid size {grid_size} below 100")));
    }
    let n = grid_size as f64;
    // Ratio written in terms of r̄ and s̄ directly.
    let gb = |t: f64, xb: f64| t * xb / (1.0 - xb + t * xb);
    let mut best = 0.0f64;
    for k in 1..=grid_size {
        let sb = k as f64 / n;
        let den = gb(gamma, sb).abs();
        if den == 0.0 {
            continue;
        }
        let limit = kappa * sb;
        let mut consider = |rb: f64| {
            if rb > 0.0 && rb <= 1.0 {
                best = best.max(gb(theta, rb).abs() / den);
            }
        };
        consider(limit);
        for j in 1..=grid_size {
            let rb = j as f64 / n;
            if rb > limit {
                break;
            }
            consider(rb);
        }
    }
    Ok(best)
}

/// `(‖q_θ(T(x)) − e⁰‖₁, ‖q_{θ†}(x) − e⁰‖₁)` with `θ†` built from the
/// operator's declared constant. The first never exceeds the second when the
/// declared constant is a true Lipschitz bound no larger than one.
pub fn peel_check<T: IrfOperator + ?Sized>(
    op: &T,
    x: &ProbVec,
    theta: &WeightVec,
) -> Result<(f64, f64)> {
    let lhs = bayes_update(&op.apply(x)?, theta)?.dist_to_target();
    let dagger = theta_dagger(theta, op.declared_lipschitz())?;
    let rhs = bayes_update(x, &dagger)?.dist_to_target();
    Ok((lhs, rhs))
}

// ---------------------------------------------------------------------------
// Empirical checks
// ---------------------------------------------------------------------------

/// Largest observed `‖T(x) − T(y)‖₁ / ‖x − y‖₁` over uniformly sampled pairs.
/// Deterministic given `seed`; always a lower bound on the true constant.
pub fn empirical_lipschitz<T: IrfOperator + ?Sized>(
    op: &T,
    num_pairs: usize,
    seed: u64,
) -> Result<f64> {
    if num_pairs == 0 {
        return Err(Error::arg("need at least one pair"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    for _ in 0..num_pairs {
        let x = ProbVec::sample_uniform(op.dim(), &mut rng)?;
        let y = ProbVec::sample_uniform(op.dim(), &mut rng)?;
        best = best.max(lipschitz_ratio(op, &x, &y)?);
    }
    Ok(best)
}

/// `‖T(x) − T(y)‖₁ / ‖x − y‖₁` for one pair (zero when `x = y`).
pub fn lipschitz_ratio<T: IrfOperator + ?Sized>(op: &T, x: &ProbVec, y: &ProbVec) -> Result<f64> {
    let den = x.l1_distance(y)?;
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(op.apply(x)?.l1_distance(&op.apply(y)?)? / den)
}

/// Outcome of a log-linear fit to a distance sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateFit {
    /// Least-squares slope of `log distance` against the step index.
    Slope(f64),
    /// The sequence hit exactly zero at this index; no slope is defined.
    ExactConvergence { step: usize },
}

impl RateFit {
    #[must_use]
    pub fn slope(&self) -> Option<f64> {
        match self {
            Self::Slope(s) => Some(*s),
            Self::ExactConvergence { .. } => None,
        }
    }
}

/// Default number of leading steps dropped before fitting.
pub const DEFAULT_BURN_IN: usize = 5;

/// Fit `log distances[k] ≈ a + b k` over `k ≥ burn_in` and return `b`.
pub fn rate_fit(distances: &[f64], burn_in: usize) -> Result<RateFit> {
    if distances.len() <= burn_in + 2 {
        return Err(Error::arg(format!(
            "{} points is too short for burn-in {burn_in}",
            distances.len()
        )));
    }
    let tail = &distances[burn_in..];
    if let Some(k) = tail.iter().position(|v| *v == 0.0) {
        return Ok(RateFit::ExactConvergence { step: burn_in + k });
    }
    if let Some(v) = tail.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::arg(format!(
            "distance {v} is not positive and finite"
        )));
    }
    let n = tail.len() as f64;
    let xs = (0..tail.len()).map(|k| k as f64);
    let mean_x = (n - 1.0) / 2.0;
    let mean_y = tail.iter().map(|v| v.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, v) in xs.zip(tail) {
        sxy += (x - mean_x) * (v.ln() - mean_y);
        sxx += (x - mean_x) * (x - mean_x);
    }
    Ok(RateFit::Slope(sxy / sxx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn random_weights(d: usize, rng: &mut impl Rng) -> WeightVec {
        WeightVec::from_log(
            d,
            (0..1 << d).map(|_| rng.random_range(-3.0..3.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identity_with_unit_weights_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x0 = ProbVec::sample_uniform(3, &mut rng).unwrap();
        let thetas = vec![WeightVec::ones(3).unwrap(); 5];
        let tr = iterate(&Identity { d: 3 }, &thetas, &x0, 5).unwrap();
        assert_eq!(tr.states.len(), 6);
        for s in &tr.states {
            assert!(close(s.entries(), x0.entries(), 1e-15));
        }
    }

    #[test]
    fn identity_collapses_two_updates() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x0 = ProbVec::sample_uniform(2, &mut rng).unwrap();
        let t1 = random_weights(2, &mut rng);
        let t2 = random_weights(2, &mut rng);
        let tr = iterate(&Identity { d: 2 }, &[t1.clone(), t2.clone()], &x0, 2).unwrap();
        let direct = bayes_update(&x0, &t1.pointwise_mul(&t2).unwrap()).unwrap();
        assert!(close(tr.states[2].entries(), direct.entries(), 1e-12));
    }

    #[test]
    fn target_absorbs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let op = GeometricPredict::new(2, 0.3).unwrap();
        let thetas: Vec<_> = (0..10).map(|_| random_weights(2, &mut rng)).collect();
        let e0 = ProbVec::target(2).unwrap();
        let tr = iterate(&op, &thetas, &e0, 10).unwrap();
        assert!(tr.states.iter().all(|s| *s == e0));
        assert!(tr.distances.iter().all(|d| *d == 0.0));
    }

    #[test]
    fn iterate_reports_failing_step() {
        let x0 = ProbVec::point_mass(1, 0).unwrap();
        let ok = WeightVec::ones(1).unwrap();
        let kill = WeightVec::from_linear(1, &[0.0, 1.0]).unwrap();
        let err = iterate(&Identity { d: 1 }, &[ok, kill], &x0, 2).unwrap_err();
        assert!(matches!(err, Error::DegenerateUpdate { step: Some(2) }));
        assert!(iterate(&Identity { d: 1 }, &[], &x0, 1).is_err());
    }

    #[test]
    fn envelope_bound_examples() {
        for n in [0, 1, 10] {
            assert_eq!(envelope_bound(1.0, 0.5, 0.1, 0.0, n).unwrap(), 0.0);
        }
        assert!((envelope_bound(0.5, 0.7, 0.3, 0.1, 0).unwrap() - 2.0).abs() < 1e-15);
        let expected = 2.0 * (0.9 * (-0.5f64).exp()).powi(10);
        assert!((envelope_bound(0.5, 0.9, 0.5, 0.0, 10).unwrap() - expected).abs() < 1e-15);
        assert!(matches!(
            envelope_bound(0.0, 0.9, 0.5, 0.0, 1),
            Err(Error::BoundUndefined(_))
        ));
    }

    #[test]
    fn g_theta_examples() {
        assert!((g_theta(1.0, 0.3).unwrap() - 0.3).abs() < 1e-15);
        for t in [0.1, 1.0, 7.0] {
            assert_eq!(g_theta(t, 1.0).unwrap(), 1.0);
        }
        assert!((g_theta(2.0, 0.5).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(g_theta(0.0, 0.0).is_err());
        assert_eq!(g_theta(0.0, 0.2).unwrap(), 1.0);
    }

    #[test]
    fn g_theta_describes_two_point_update() {
        // With θ = (1, t), q_θ(x) = (g_t(x⁽⁰⁾), 1 − g_t(x⁽⁰⁾)).
        let x = ProbVec::from_display(1, &[0.35, 0.65]).unwrap();
        let th = WeightVec::from_display(1, &[1.0, 2.5]).unwrap();
        let y = bayes_update(&x, &th).unwrap();
        assert!((y.anchor() - g_theta(2.5, 0.35).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn m_const_examples() {
        for (k, t) in [(0.3, 2.0), (1.0, 0.5), (0.9, 10.0)] {
            assert!((m_const_closed_form(k, t, k * t).unwrap() - 1.0).abs() < 1e-15);
        }
        assert_eq!(m_const_closed_form(1.0, 1.0, 1.0).unwrap(), 1.0);
        assert!((m_const_grid(1.0, 1.0, 1.0, 200).unwrap() - 1.0).abs() < 1e-15);
        assert!(m_const_closed_form(0.5, 2.0, 0.0).is_err());
        assert!(m_const_grid(0.5, 2.0, 1.0, 99).is_err());

        let closed = m_const_closed_form(0.5, 2.0, 1.0).unwrap();
        let grid = m_const_grid(0.5, 2.0, 1.0, 1000).unwrap();
        assert!(grid <= closed + 1e-9);
        assert!(closed - grid < 1e-2, "closed {closed} grid {grid}");
    }

    #[test]
    fn m_grid_converges_from_below() {
        let (k, t) = (0.4, 3.0);
        let coarse = m_const_grid(k, t, k * t, 100).unwrap();
        let fine = m_const_grid(k, t, k * t, 1000).unwrap();
        assert!(coarse <= fine + 1e-15 && fine <= 1.0 + 1e-9);
        assert!(1.0 - fine < 1.0 - coarse || 1.0 - fine < 1e-9);
    }

    #[test]
    fn empirical_lipschitz_examples() {
        assert!((empirical_lipschitz(&Identity { d: 2 }, 50, 0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            empirical_lipschitz(&CollapseToTarget { d: 2 }, 50, 0).unwrap(),
            0.0
        );
        let op = GeometricPredict::new(2, 0.25).unwrap();
        let est = empirical_lipschitz(&op, 200, 9).unwrap();
        assert!(
            (est - 0.75).abs() < 1e-12,
            "affine map has constant ratio, got {est}"
        );
        assert_eq!(
            empirical_lipschitz(&op, 100, 4).unwrap(),
            empirical_lipschitz(&op, 100, 4).unwrap()
        );
        assert!(empirical_lipschitz(&op, 0, 4).is_err());
    }

    #[test]
    fn rate_fit_examples() {
        let s = rate_fit(&[1.0, 0.5, 0.25, 0.125], 0)
            .unwrap()
            .slope()
            .unwrap();
        assert!((s - 0.5f64.ln()).abs() < 1e-9);
        let s = rate_fit(&[0.3; 10], 2).unwrap().slope().unwrap();
        assert!(s.abs() < 1e-12);
        assert_eq!(
            rate_fit(&[1.0, 0.1, 0.0, 0.0, 0.0], 1).unwrap(),
            RateFit::ExactConvergence { step: 2 }
        );
        assert!(rate_fit(&[1.0, 0.5], 0).is_err());
        assert!(rate_fit(&[1.0, 0.5, 0.2, 0.1], 2).is_err());
    }

    #[test]
    fn pathwise_bound_dominates_classic_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let op = GeometricPredict::new(1, 0.2).unwrap();
        let x0 = ProbVec::from_display(1, &[0.3, 0.7]).unwrap();
        let thetas: Vec<_> = (0..40).map(|_| random_weights(1, &mut rng)).collect();
        let tr = iterate(&op, &thetas, &x0, 40).unwrap();
        let logs: Vec<f64> = thetas.iter().map(WeightVec::log_theta_star).collect();
        for n in 0..=40 {
            let b = pathwise_bound(x0.anchor(), &logs[..n], op.declared_lipschitz()).unwrap();
            assert!(tr.distances[n] <= b * (1.0 + 1e-12) + 1e-15, "n = {n}");
        }
    }

    proptest! {
        #[test]
        fn semigroup_collapse_under_identity(d in 1usize..=4, n in 1usize..=50, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x0 = ProbVec::sample_uniform(d, &mut rng).unwrap();
            let thetas: Vec<_> = (0..n).map(|_| random_weights(d, &mut rng)).collect();
            let tr = iterate(&Identity { d }, &thetas, &x0, n).unwrap();
            let mut prod = WeightVec::ones(d).unwrap();
            for t in &thetas {
                prod = prod.pointwise_mul(t).unwrap();
            }
            let direct = bayes_update(&x0, &prod).unwrap();
            prop_assert!(close(tr.states[n].entries(), direct.entries(), 1e-9));
        }

        #[test]
        fn grid_never_exceeds_closed_form(k in 0.05f64..=1.0, t in 0.05f64..5.0, g in 0.05f64..5.0) {
            let closed = m_const_closed_form(k, t, g).unwrap();
            let grid = m_const_grid(k, t, g, 300).unwrap();
            prop_assert!(grid <= closed + 1e-9, "grid {} closed {}", grid, closed);
        }

        #[test]
        fn peeling_for_geometric_predict(rho in 0.0f64..1.0, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let op = GeometricPredict::new(2, rho).unwrap();
            let x = ProbVec::sample_uniform(2, &mut rng).unwrap();
            let th = random_weights(2, &mut rng);
            let (lhs, rhs) = peel_check(&op, &x, &th).unwrap();
            prop_assert!(lhs <= rhs + 1e-9);
        }
    }
}
