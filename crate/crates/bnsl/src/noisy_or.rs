//! Noisy-OR scoring: CPT expansion, the likelihood objective and its
//! analytic gradient, gradient descent with geometric line search and hot
//! starts, and the resulting BIC local score.
//!
//! A noisy-OR relation specifies the whole CPT with one parameter per
//! parent: `q_l` is the probability that the effect stays absent when only
//! cause `l` is active. The probability that the child is 0 under a
//! configuration is the product of the active causes' `q` values, and 1 when
//! no cause is active. Fitting minimizes the negative log-likelihood of the
//! counts, which is the same as minimizing the conditional KL divergence
//! from the empirical CPT.

use crate::data;
use crate::error::{Error, Result};
use crate::model::{CountVector, Cpt, Dataset, LocalScore, NoisyOrParams, ParentSet, Representation};
use std::collections::HashMap;

/// Knobs for the gradient-descent fit.
#[derive(Debug, Clone)]
pub struct FitConfig {
    /// Convergence threshold `t`: stop when the gradient change (Euclidean
    /// norm) or the objective improvement drops below it.
    pub threshold: f64,
    /// Iteration cap.
    pub max_iter: usize,
    /// Box bound: parameters are clamped to `[clamp, 1 - clamp]` after
    /// every update, keeping logs and divisions finite.
    pub clamp: f64,
    /// First step size tried by the line search.
    pub initial_step: f64,
    /// Geometric shrink factor applied between line-search trials.
    pub shrink: f64,
    /// Line-search trial cap.
    pub max_shrinks: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            threshold: 1e-9,
            max_iter: 500,
            clamp: 1e-6,
            initial_step: 1.0,
            shrink: 0.5,
            max_shrinks: 40,
        }
    }
}

/// Starting value for a parent with no inherited fit. A weak new cause
/// barely perturbs an inherited solution.
pub const DEFAULT_START_Q: f64 = 0.9;

/// True when the counts violate the noisy-OR support: some record sets the
/// child while every candidate parent is absent, forcing a zero-probability
/// observation.
pub fn infeasible_counts(cv: &CountVector) -> bool {
    cv.count(0, 1) > 0
}

/// Expands noisy-OR parameters into the full CPT: `phi_j0` is the product
/// of `q_l` over the parents active in configuration `j` (1 for the all
/// -absent configuration) and `phi_j1 = 1 - phi_j0`.
pub fn expand_cpt(q: &NoisyOrParams) -> Cpt {
    let rows = failure_products(q.values())
        .into_iter()
        .map(|p0| [p0, 1.0 - p0])
        .collect();
    Cpt::new(rows).expect("noisy-OR expansion rows are distributions")
}

/// `phi_j0` for every configuration. Each entry reuses the product with the
/// lowest active bit removed, so the whole table costs one multiply per
/// configuration.
fn failure_products(q: &[f64]) -> Vec<f64> {
    let mut phi = vec![1.0; 1 << q.len()];
    for j in 1..phi.len() {
        let low = j.trailing_zeros() as usize;
        phi[j] = phi[j & (j - 1)] * q[low];
    }
    phi
}

/// Negative log-likelihood `-sum_jk n_jk ln(phi_jk)` of the counts under the
/// expanded noisy-OR CPT. This is the quantity the gradient descent
/// minimizes; finite whenever the candidate is feasible.
pub fn objective(cv: &CountVector, q: &NoisyOrParams) -> Result<f64> {
    if infeasible_counts(cv) {
        return Err(Error::InfeasibleCandidate);
    }
    Ok(objective_unchecked(cv, q.values()))
}

fn objective_unchecked(cv: &CountVector, q: &[f64]) -> f64 {
    let phi = failure_products(q);
    let mut total = 0.0;
    for (j, &p0) in phi.iter().enumerate() {
        let n0 = cv.count(j, 0);
        let n1 = cv.count(j, 1);
        if n0 > 0 {
            total -= n0 as f64 * p0.ln();
        }
        if n1 > 0 {
            total -= n1 as f64 * (1.0 - p0).ln();
        }
    }
    total
}

/// Analytic gradient of [`objective`] with respect to each `q_m`:
/// `d/dq_m = -sum_{j : m active} [ n_j0 / q_m - n_j1 (phi_j0 / q_m) / (1 - phi_j0) ]`.
pub fn gradient(cv: &CountVector, q: &NoisyOrParams) -> Result<Vec<f64>> {
    if infeasible_counts(cv) {
        return Err(Error::InfeasibleCandidate);
    }
    let qs = q.values();
    let phi = failure_products(qs);
    let mut grad = vec![0.0; qs.len()];
    for (j, &p0) in phi.iter().enumerate().skip(1) {
        let n0 = cv.count(j, 0);
        let n1 = cv.count(j, 1);
        if n0 == 0 && n1 == 0 {
            continue;
        }
        let mut active = j;
        while active != 0 {
            let m = active.trailing_zeros() as usize;
            let mut term = 0.0;
            if n0 > 0 {
                term += n0 as f64 / qs[m];
            }
            if n1 > 0 {
                term -= n1 as f64 * (p0 / qs[m]) / (1.0 - p0);
            }
            grad[m] -= term;
            active &= active - 1;
        }
    }
    Ok(grad)
}

fn clamp_into(q: &mut [f64], bound: f64) {
    for v in q.iter_mut() {
        *v = v.clamp(bound, 1.0 - bound);
    }
}

/// Backtracking line search over the geometric schedule
/// `initial_step * shrink^m`: returns the largest step whose clamped update
/// `q - step * grad` strictly decreases the objective, or 0 when no trial
/// does.
pub fn geometric_line_search(
    q: &[f64],
    grad: &[f64],
    objective: impl Fn(&[f64]) -> f64,
    cfg: &FitConfig,
) -> f64 {
    let base = objective(q);
    let mut step = cfg.initial_step;
    let mut candidate = vec![0.0; q.len()];
    for _ in 0..cfg.max_shrinks {
        for (c, (&v, &g)) in candidate.iter_mut().zip(q.iter().zip(grad)) {
            *c = v - step * g;
        }
        clamp_into(&mut candidate, cfg.clamp);
        if objective(&candidate) < base {
            return step;
        }
        step *= cfg.shrink;
    }
    0.0
}

/// Result of one gradient-descent fit.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    /// Best parameters seen along the trajectory (objective minimizer).
    pub params: NoisyOrParams,
    /// Objective at `params`.
    pub objective: f64,
    /// Iterations performed before convergence or the cap.
    pub iterations: usize,
}

/// Gradient descent over the noisy-OR parameters. Each update takes the
/// step chosen by [`geometric_line_search`] and clamps back into the box;
/// iteration stops when the gradient change or the objective improvement
/// falls below the threshold. Returns the best iterate seen, so the result
/// never scores worse than the starting point.
pub fn fit(cv: &CountVector, init: &NoisyOrParams, cfg: &FitConfig) -> Result<FitOutcome> {
    if infeasible_counts(cv) {
        return Err(Error::InfeasibleCandidate);
    }
    let eval = |q: &[f64]| objective_unchecked(cv, q);

    let mut q: Vec<f64> = init.values().to_vec();
    clamp_into(&mut q, cfg.clamp);
    let mut obj = eval(&q);
    let mut grad = gradient_raw(cv, &q);

    let mut best_q = q.clone();
    let mut best_obj = obj;
    let mut iterations = 0;

    for iter in 1..=cfg.max_iter {
        iterations = iter;
        let step = geometric_line_search(&q, &grad, eval, cfg);
        let mut next = q.clone();
        for (v, &g) in next.iter_mut().zip(&grad) {
            *v -= step * g;
        }
        clamp_into(&mut next, cfg.clamp);
        let next_obj = eval(&next);
        let next_grad = gradient_raw(cv, &next);

        if next_obj < best_obj {
            best_obj = next_obj;
            best_q = next.clone();
        }

        let grad_change = next_grad
            .iter()
            .zip(&grad)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let improvement = obj - next_obj;

        q = next;
        obj = next_obj;
        grad = next_grad;

        if grad_change < cfg.threshold || improvement < cfg.threshold {
            break;
        }
    }

    Ok(FitOutcome {
        params: NoisyOrParams::new(best_q).expect("clamped parameters stay in (0,1)"),
        objective: best_obj,
        iterations,
    })
}

fn gradient_raw(cv: &CountVector, q: &[f64]) -> Vec<f64> {
    let params = NoisyOrParams::new(q.to_vec()).expect("clamped parameters stay in (0,1)");
    gradient(cv, &params).expect("feasibility checked before iteration")
}

/// Fitted parameters remembered per candidate parent set of one node, used
/// to warm-start supersets.
#[derive(Debug, Default)]
pub struct HotStartCache {
    fits: HashMap<ParentSet, (NoisyOrParams, f64)>,
}

impl HotStartCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, parents: ParentSet, params: NoisyOrParams, objective: f64) {
        self.fits.insert(parents, (params, objective));
    }

    pub fn get(&self, parents: &ParentSet) -> Option<&(NoisyOrParams, f64)> {
        self.fits.get(parents)
    }

    /// Starting point for `parents`: inherit the fitted values of the best
    /// cached immediate subset (one member fewer), giving the new parent the
    /// default value; all-default when nothing is cached.
    pub fn hot_start(&self, parents: ParentSet) -> NoisyOrParams {
        let members = parents.members();
        let mut chosen: Option<(ParentSet, &NoisyOrParams, f64)> = None;
        for &drop in &members {
            let sub = parents.without(drop);
            if let Some((params, obj)) = self.fits.get(&sub) {
                let better = match &chosen {
                    None => true,
                    Some((_, _, best)) => *obj < *best,
                };
                if better {
                    chosen = Some((sub, params, *obj));
                }
            }
        }
        let q = match chosen {
            None => vec![DEFAULT_START_Q; members.len()],
            Some((sub, params, _)) => {
                let sub_members = sub.members();
                members
                    .iter()
                    .map(|v| {
                        sub_members
                            .iter()
                            .position(|s| s == v)
                            .map(|p| params.values()[p])
                            .unwrap_or(DEFAULT_START_Q)
                    })
                    .collect()
            }
        };
        NoisyOrParams::new(q).expect("cached and default values lie in (0,1)")
    }
}

/// Noisy-OR complexity penalty `|Pi| * ln(N)/2`: one parameter per parent.
pub fn penalty(parents: ParentSet, num_rows: usize) -> f64 {
    parents.len() as f64 * (num_rows as f64).ln() / 2.0
}

/// BIC local score of `(child, parents)` under a noisy-OR relation. Fits
/// the parameters starting from the cache's hot start, stores the fit back
/// into the cache, and attaches the fitted parameters to the score.
pub fn bic(
    dataset: &Dataset,
    child: usize,
    parents: ParentSet,
    cache: &mut HotStartCache,
    cfg: &FitConfig,
) -> Result<LocalScore> {
    if parents.is_empty() {
        return Err(Error::invalid("noisy-OR needs at least one parent"));
    }
    let cv = data::counts(dataset, child, parents)?;
    bic_from_counts(&cv, dataset.num_rows(), cache, cfg)
}

/// Same as [`bic`] when the counts are already available.
pub fn bic_from_counts(
    cv: &CountVector,
    num_rows: usize,
    cache: &mut HotStartCache,
    cfg: &FitConfig,
) -> Result<LocalScore> {
    let init = cache.hot_start(cv.parents);
    let outcome = fit(cv, &init, cfg)?;
    cache.insert(cv.parents, outcome.params.clone(), outcome.objective);
    let score = outcome.objective + penalty(cv.parents, num_rows);
    Ok(LocalScore {
        child: cv.child,
        parents: cv.parents,
        representation: Representation::NoisyOr(outcome.params),
        score,
    })
}
