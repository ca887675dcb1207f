//! Maximum-likelihood CPT fitting and the BIC local score for full tables.
//!
//! The local score of a candidate parent set is
//! `sigma(Pi) = -L(theta) + t(Pi) * w` with `t(Pi) = 2^|Pi|` parameters and
//! weight `w = ln(N)/2`. No smoothing anywhere: unseen parent configurations
//! get a (0.5, 0.5) row, which contributes nothing to the likelihood.

use crate::data;
use crate::error::Result;
use crate::model::{CountVector, Cpt, Dataset, LocalScore, ParentSet, Representation};

/// Maximum-likelihood table: `theta_jk = n_jk / n_j`, with unseen
/// configurations set to the uniform row.
pub fn mle(cv: &CountVector) -> Cpt {
    let rows = (0..cv.num_configs())
        .map(|j| {
            let t = cv.config_total(j);
            if t == 0 {
                [0.5, 0.5]
            } else {
                [
                    cv.count(j, 0) as f64 / t as f64,
                    cv.count(j, 1) as f64 / t as f64,
                ]
            }
        })
        .collect();
    Cpt::new(rows).expect("MLE rows are distributions by construction")
}

/// Log-likelihood `L = sum_jk n_jk ln(theta_jk)` with the `0 ln 0 = 0`
/// convention. Returns `-inf` when some observed cell has probability zero;
/// callers must treat such a candidate as infeasible.
pub fn log_likelihood(cv: &CountVector, cpt: &Cpt) -> f64 {
    let mut total = 0.0;
    for j in 0..cv.num_configs() {
        for k in 0..2 {
            let n = cv.count(j, k);
            if n == 0 {
                continue;
            }
            let p = cpt.prob(j, k);
            if p == 0.0 {
                return f64::NEG_INFINITY;
            }
            total += n as f64 * p.ln();
        }
    }
    total
}

/// Full-CPT complexity penalty `2^|Pi| * ln(N)/2`.
pub fn penalty(parents: ParentSet, num_rows: usize) -> f64 {
    parents.num_configs() as f64 * (num_rows as f64).ln() / 2.0
}

/// BIC local score of `(child, parents)` under a full CPT, with the fitted
/// table attached. The score is always finite: the MLE never assigns zero
/// probability to an observed cell.
pub fn bic(dataset: &Dataset, child: usize, parents: ParentSet) -> Result<LocalScore> {
    let cv = data::counts(dataset, child, parents)?;
    Ok(bic_from_counts(&cv, dataset.num_rows()))
}

/// Same as [`bic`] when the counts are already available.
pub fn bic_from_counts(cv: &CountVector, num_rows: usize) -> LocalScore {
    let cpt = mle(cv);
    let score = -log_likelihood(cv, &cpt) + penalty(cv.parents, num_rows);
    debug_assert!(score.is_finite());
    LocalScore {
        child: cv.child,
        parents: cv.parents,
        representation: Representation::Table(Some(cpt)),
        score,
    }
}
