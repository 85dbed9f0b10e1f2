//! Maximum-likelihood multinomial logistic regression with Wald inference
//! and relative-risk ratios.
//!
//! The model is `P(Y_i = j | w_i) = exp(w_i'q_j) / Σ_k exp(w_i'q_k)` with
//! the baseline category's coefficient vector pinned to zero. Categories
//! are taken from the classes actually observed in the outcome, so datasets
//! with two classes reduce to binary logistic regression.
//!
//! Fitting is Newton–Raphson from zero coefficients with step-halving, and
//! ridge-damped steps when the Hessian is numerically singular. The
//! log-likelihood never decreases across accepted steps.

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::features::{AttractivenessClass, DesignMatrix, Term};

/// Observations per parallel accumulation chunk; fixed so the reduction
/// order does not depend on the thread count.
const OBS_CHUNK: usize = 512;

#[derive(Debug, Error)]
pub enum MnLogitError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("missing outcome class: {0}")]
    MissingClass(String),
    #[error(
        "separation detected: |coefficient| exceeded {0}; \
         consider fewer terms or z-scored regressors"
    )]
    SeparationDetected(f64),
    #[error("Hessian is singular even at the maximum ridge level")]
    SingularHessian,
    #[error("fit did not converge")]
    NotConverged,
}

/// Newton solver knobs. Defaults match the documented contract.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Converged when the gradient max-norm falls below this.
    pub grad_tolerance: f64,
    /// Converged when the log-likelihood gain falls below this.
    pub ll_tolerance: f64,
    /// First ridge level tried on a singular Hessian; escalates tenfold.
    pub ridge_start: f64,
    pub ridge_max: f64,
    /// Any |coefficient| beyond this aborts with separation.
    pub separation_bound: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            grad_tolerance: 1e-8,
            ll_tolerance: 1e-10,
            ridge_start: 1e-6,
            ridge_max: 1e-2,
            separation_bound: 30.0,
        }
    }
}

/// Significance stars at the 0.05 / 0.01 / 0.001 thresholds (strict
/// inequalities; p exactly 0.05 earns no star).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stars {
    #[serde(rename = "")]
    None,
    #[serde(rename = "*")]
    One,
    #[serde(rename = "**")]
    Two,
    #[serde(rename = "***")]
    Three,
}

impl Stars {
    pub fn from_p(p: f64) -> Stars {
        if p < 0.001 {
            Stars::Three
        } else if p < 0.01 {
            Stars::Two
        } else if p < 0.05 {
            Stars::One
        } else {
            Stars::None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stars::None => "",
            Stars::One => "*",
            Stars::Two => "**",
            Stars::Three => "***",
        }
    }
}

/// Relative-risk ratio for a coefficient: the multiplicative change in the
/// odds of the category against the baseline per unit of the regressor.
pub fn rrr_from_beta(beta: f64) -> f64 {
    beta.exp()
}

/// Converged (or capped) multinomial fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFit {
    pub baseline: AttractivenessClass,
    /// Observed categories in class order; includes the baseline.
    pub categories: Vec<AttractivenessClass>,
    pub terms: Vec<Term>,
    /// One coefficient vector per non-baseline category, aligned with
    /// `categories` minus the baseline; each has `terms.len()` entries.
    pub coefficients: Vec<Vec<f64>>,
    /// Covariance of all free coefficients, row-major, dimension
    /// `(categories-1)·terms` squared. Inverse of the negated Hessian at
    /// the optimum (the ridged Hessian when the plain one is singular).
    pub covariance: Vec<f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Ridge level the step solver ended up needing; 0 when none.
    pub ridge_used: f64,
    pub n_observations: usize,
}

impl ModelFit {
    /// Non-baseline categories in class order.
    pub fn free_categories(&self) -> Vec<AttractivenessClass> {
        self.categories
            .iter()
            .copied()
            .filter(|c| *c != self.baseline)
            .collect()
    }

    pub fn n_free_parameters(&self) -> usize {
        (self.categories.len() - 1) * self.terms.len()
    }

    fn covariance_diag(&self, k: usize) -> f64 {
        let dim = self.n_free_parameters();
        self.covariance[k * dim + k]
    }
}

/// One Wald-test line: a (term, category) pair with its estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferenceRow {
    pub term: Term,
    pub category: AttractivenessClass,
    pub beta: f64,
    pub rrr: f64,
    pub se: f64,
    pub p_value: f64,
    pub stars: Stars,
}

/// Events-per-variable diagnostic for the fitted design.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpvReport {
    pub smallest_class: AttractivenessClass,
    pub smallest_class_count: usize,
    pub params_per_equation: usize,
    pub epv: f64,
    /// True when the events-per-variable ratio falls below ten.
    pub warn: bool,
}

/// Internal flattened view of the problem.
struct Problem<'a> {
    dm: &'a DesignMatrix,
    /// Observed categories in class order (baseline included).
    categories: Vec<AttractivenessClass>,
    /// Position of the baseline inside `categories`.
    baseline_pos: usize,
    /// Per-observation category position inside `categories`.
    y_pos: Vec<usize>,
}

impl<'a> Problem<'a> {
    fn new(
        dm: &'a DesignMatrix,
        baseline: AttractivenessClass,
    ) -> Result<Problem<'a>, MnLogitError> {
        let mut present = [false; 5];
        for c in dm.outcome() {
            present[c.index()] = true;
        }
        let categories: Vec<AttractivenessClass> = AttractivenessClass::ALL
            .into_iter()
            .filter(|c| present[c.index()])
            .collect();
        if !present[baseline.index()] {
            return Err(MnLogitError::MissingClass(format!(
                "baseline {baseline} has no observations"
            )));
        }
        if categories.len() < 2 {
            return Err(MnLogitError::MissingClass(
                "outcome must contain at least two classes".into(),
            ));
        }
        let baseline_pos = categories.iter().position(|&c| c == baseline).unwrap();
        let pos_of =
            |class: AttractivenessClass| categories.iter().position(|&c| c == class).unwrap();
        let y_pos = dm.outcome().iter().map(|&c| pos_of(c)).collect();
        Ok(Problem { dm, categories, baseline_pos, y_pos })
    }

    fn n_categories(&self) -> usize {
        self.categories.len()
    }

    /// Maps non-baseline block index to position inside `categories`.
    fn block_to_pos(&self, block: usize) -> usize {
        if block < self.baseline_pos {
            block
        } else {
            block + 1
        }
    }

    /// Class scores for one observation; the baseline scores 0.
    fn scores(&self, theta: &[f64], row: &[f64]) -> Vec<f64> {
        let p = self.dm.n_terms();
        let mut scores = vec![0.0; self.n_categories()];
        for block in 0..self.n_categories() - 1 {
            let q = &theta[block * p..(block + 1) * p];
            let mut dot = 0.0;
            for (w, qk) in row.iter().zip(q) {
                dot += w * qk;
            }
            scores[self.block_to_pos(block)] = dot;
        }
        scores
    }

    /// Softmax with max-subtraction.
    fn probabilities(&self, theta: &[f64], row: &[f64]) -> Vec<f64> {
        let mut scores = self.scores(theta, row);
        softmax_in_place(&mut scores);
        scores
    }
}

fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        total += *s;
    }
    for s in scores.iter_mut() {
        *s /= total;
    }
}

fn check_dimensions(dm: &DesignMatrix, theta: &[f64], blocks: usize) -> Result<(), MnLogitError> {
    let expect = blocks * dm.n_terms();
    if theta.len() != expect {
        return Err(MnLogitError::DimensionMismatch(format!(
            "coefficient vector has {} entries, expected {}",
            theta.len(),
            expect
        )));
    }
    Ok(())
}

/// Log-likelihood `Σ_i ln softmax_{y_i}(w_i'q)` at flattened coefficients
/// `theta` (one block per non-baseline observed category, in class order).
pub fn log_likelihood(
    dm: &DesignMatrix,
    baseline: AttractivenessClass,
    theta: &[f64],
) -> Result<f64, MnLogitError> {
    let prob = Problem::new(dm, baseline)?;
    check_dimensions(dm, theta, prob.n_categories() - 1)?;
    Ok(ll_value(&prob, theta))
}

fn ll_value(problem: &Problem<'_>, theta: &[f64]) -> f64 {
    let n = problem.dm.n_rows();
    let rows: Vec<usize> = (0..n).collect();
    rows.par_chunks(OBS_CHUNK)
        .map(|chunk| {
            let mut total = 0.0;
            for &i in chunk {
                let scores = problem.scores(theta, problem.dm.row(i));
                let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let log_norm =
                    max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
                total += scores[problem.y_pos[i]] - log_norm;
            }
            total
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .sum()
}

/// Score vector: block `j` is `Σ_i (1[y_i = j] − p_ij) · w_i`.
pub fn gradient(
    dm: &DesignMatrix,
    baseline: AttractivenessClass,
    theta: &[f64],
) -> Result<Vec<f64>, MnLogitError> {
    let prob = Problem::new(dm, baseline)?;
    check_dimensions(dm, theta, prob.n_categories() - 1)?;
    Ok(gradient_value(&prob, theta))
}

fn gradient_value(problem: &Problem<'_>, theta: &[f64]) -> Vec<f64> {
    let p = problem.dm.n_terms();
    let blocks = problem.n_categories() - 1;
    let n = problem.dm.n_rows();
    let rows: Vec<usize> = (0..n).collect();
    let partials: Vec<Vec<f64>> = rows
        .par_chunks(OBS_CHUNK)
        .map(|chunk| {
            let mut grad = vec![0.0; blocks * p];
            for &i in chunk {
                let row = problem.dm.row(i);
                let probs = problem.probabilities(theta, row);
                for block in 0..blocks {
                    let pos = problem.block_to_pos(block);
                    let indicator = if problem.y_pos[i] == pos { 1.0 } else { 0.0 };
                    let resid = indicator - probs[pos];
                    let out = &mut grad[block * p..(block + 1) * p];
                    for (g, w) in out.iter_mut().zip(row) {
                        *g += resid * w;
                    }
                }
            }
            grad
        })
        .collect();

    let mut grad = vec![0.0; blocks * p];
    for partial in partials {
        for (g, x) in grad.iter_mut().zip(partial) {
            *g += x;
        }
    }
    grad
}

/// Hessian of the log-likelihood: block `(j, k)` is
/// `−Σ_i p_ij (1[j = k] − p_ik) · w_i w_i'`. Always symmetric negative
/// semi-definite.
pub fn hessian(
    dm: &DesignMatrix,
    baseline: AttractivenessClass,
    theta: &[f64],
) -> Result<DMatrix<f64>, MnLogitError> {
    let prob = Problem::new(dm, baseline)?;
    check_dimensions(dm, theta, prob.n_categories() - 1)?;
    Ok(hessian_value(&prob, theta))
}

fn hessian_value(problem: &Problem<'_>, theta: &[f64]) -> DMatrix<f64> {
    let p = problem.dm.n_terms();
    let blocks = problem.n_categories() - 1;
    let dim = blocks * p;
    let n = problem.dm.n_rows();
    let rows: Vec<usize> = (0..n).collect();

    let partials: Vec<DMatrix<f64>> = rows
        .par_chunks(OBS_CHUNK)
        .map(|chunk| {
            let mut h = DMatrix::<f64>::zeros(dim, dim);
            let mut outer = DMatrix::<f64>::zeros(p, p);
            for &i in chunk {
                let row = problem.dm.row(i);
                let probs = problem.probabilities(theta, row);
                for a in 0..p {
                    for b in 0..p {
                        outer[(a, b)] = row[a] * row[b];
                    }
                }
                for j in 0..blocks {
                    let pj = probs[problem.block_to_pos(j)];
                    for k in 0..blocks {
                        let pk = probs[problem.block_to_pos(k)];
                        let kron = if j == k { 1.0 } else { 0.0 };
                        let coeff = -pj * (kron - pk);
                        if coeff == 0.0 {
                            continue;
                        }
                        for a in 0..p {
                            for b in 0..p {
                                h[(j * p + a, k * p + b)] += coeff * outer[(a, b)];
                            }
                        }
                    }
                }
            }
            h
        })
        .collect();

    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for partial in partials {
        h += partial;
    }
    h
}

/// Class probabilities for one design row under a fitted model, in
/// `fit.categories` order.
pub fn predict_proba(fit: &ModelFit, row: &[f64]) -> Result<Vec<f64>, MnLogitError> {
    let p = fit.terms.len();
    if row.len() != p {
        return Err(MnLogitError::DimensionMismatch(format!(
            "design row has {} entries, expected {}",
            row.len(),
            p
        )));
    }
    let baseline_pos = fit
        .categories
        .iter()
        .position(|&c| c == fit.baseline)
        .expect("baseline is among the categories");
    let mut scores = Vec::with_capacity(fit.categories.len());
    let mut block = 0;
    for pos in 0..fit.categories.len() {
        if pos == baseline_pos {
            scores.push(0.0);
        } else {
            let q = &fit.coefficients[block];
            scores.push(row.iter().zip(q).map(|(w, qk)| w * qk).sum());
            block += 1;
        }
    }
    softmax_in_place(&mut scores);
    Ok(scores)
}

/// Events-per-variable check: smallest outcome class count divided by the
/// free parameters per equation. A ratio under ten is flagged; it never
/// blocks fitting.
pub fn epv_check(dm: &DesignMatrix) -> EpvReport {
    let mut counts = [0usize; 5];
    for c in dm.outcome() {
        counts[c.index()] += 1;
    }
    let (class_ix, &count) = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .min_by_key(|(_, &c)| c)
        .expect("outcome is non-empty");
    let params = dm.n_terms();
    let epv = count as f64 / params as f64;
    let warn = epv < 10.0;
    if warn {
        log::warn!(
            "events per parameter {epv:.1} < 10 (smallest class {count}, {params} parameters per equation)"
        );
    }
    EpvReport {
        smallest_class: AttractivenessClass::from_index(class_ix).unwrap(),
        smallest_class_count: count,
        params_per_equation: params,
        epv,
        warn,
    }
}

/// Fits the model by Newton–Raphson with step-halving.
///
/// Starts from zero coefficients. A step is accepted only if the
/// log-likelihood does not decrease; singular Hessians are retried with an
/// escalating ridge on the step solve (the likelihood itself is never
/// penalised). Convergence is gradient max-norm below `grad_tolerance` or
/// log-likelihood gain below `ll_tolerance`, with a hard iteration cap; a
/// capped fit is returned with `converged = false`.
pub fn fit(
    dm: &DesignMatrix,
    baseline: AttractivenessClass,
    options: &FitOptions,
) -> Result<ModelFit, MnLogitError> {
    let problem = Problem::new(dm, baseline)?;
    let p = dm.n_terms();
    let blocks = problem.n_categories() - 1;
    let dim = blocks * p;

    let mut theta = vec![0.0f64; dim];
    let mut ll = ll_value(&problem, &theta);
    let mut iterations = 0usize;
    let mut converged = false;
    let mut ridge_used = 0.0f64;

    while iterations < options.max_iterations {
        let grad = gradient_value(&problem, &theta);
        let grad_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_norm < options.grad_tolerance {
            converged = true;
            break;
        }

        let hess = hessian_value(&problem, &theta);
        let neg_hess = -hess;
        let g = DVector::from_column_slice(&grad);
        let (delta, ridge) = solve_newton_step(&neg_hess, &g, options)?;
        ridge_used = ridge_used.max(ridge);

        // Step-halving line search; accept only non-decreasing likelihood.
        let mut scale = 1.0f64;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate: Vec<f64> = theta
                .iter()
                .zip(delta.iter())
                .map(|(t, d)| t + scale * d)
                .collect();
            if candidate.iter().any(|c| c.abs() > options.separation_bound) {
                return Err(MnLogitError::SeparationDetected(options.separation_bound));
            }
            let candidate_ll = ll_value(&problem, &candidate);
            if candidate_ll >= ll {
                let gain = candidate_ll - ll;
                theta = candidate;
                ll = candidate_ll;
                iterations += 1;
                accepted = true;
                if gain < options.ll_tolerance {
                    converged = true;
                }
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            // A full sweep of halvings could not improve: numerically at
            // the optimum already.
            converged = true;
            iterations += 1;
            break;
        }
        if converged {
            break;
        }
    }

    if !converged {
        log::warn!("multinomial fit hit the {} iteration cap", options.max_iterations);
    }

    let hess = hessian_value(&problem, &theta);
    let neg_hess = -hess;
    let covariance = invert_covariance(&neg_hess, ridge_used, options)?;

    let coefficients: Vec<Vec<f64>> =
        (0..blocks).map(|b| theta[b * p..(b + 1) * p].to_vec()).collect();

    Ok(ModelFit {
        baseline,
        categories: problem.categories.clone(),
        terms: dm.terms().to_vec(),
        coefficients,
        covariance: covariance.as_slice().to_vec(),
        log_likelihood: ll,
        iterations,
        converged,
        ridge_used,
        n_observations: dm.n_rows(),
    })
}

/// Solves `(−H + λI) δ = g`, escalating λ tenfold from `ridge_start` to
/// `ridge_max` while the Cholesky factorisation fails.
fn solve_newton_step(
    neg_hess: &DMatrix<f64>,
    g: &DVector<f64>,
    options: &FitOptions,
) -> Result<(DVector<f64>, f64), MnLogitError> {
    if let Some(chol) = Cholesky::new(neg_hess.clone()) {
        return Ok((chol.solve(g), 0.0));
    }
    let mut ridge = options.ridge_start;
    while ridge <= options.ridge_max * (1.0 + 1e-12) {
        let damped = neg_hess + DMatrix::identity(neg_hess.nrows(), neg_hess.ncols()) * ridge;
        if let Some(chol) = Cholesky::new(damped) {
            log::warn!("Hessian numerically singular; using ridge {ridge:e} on the Newton step");
            return Ok((chol.solve(g), ridge));
        }
        ridge *= 10.0;
    }
    Err(MnLogitError::SingularHessian)
}

/// Covariance of the estimates: inverse of the negated Hessian at the
/// optimum. If that matrix is singular, falls back to the ridge level the
/// step solver ended up at.
fn invert_covariance(
    neg_hess: &DMatrix<f64>,
    ridge_used: f64,
    options: &FitOptions,
) -> Result<DMatrix<f64>, MnLogitError> {
    if let Some(chol) = Cholesky::new(neg_hess.clone()) {
        return Ok(chol.inverse());
    }
    let mut ridge = if ridge_used > 0.0 { ridge_used } else { options.ridge_start };
    while ridge <= options.ridge_max * (1.0 + 1e-12) {
        let damped = neg_hess + DMatrix::identity(neg_hess.nrows(), neg_hess.ncols()) * ridge;
        if let Some(chol) = Cholesky::new(damped) {
            log::warn!("covariance computed from ridge-damped Hessian (ridge {ridge:e})");
            return Ok(chol.inverse());
        }
        ridge *= 10.0;
    }
    Err(MnLogitError::SingularHessian)
}

/// Wald inference for every (term, non-baseline category) pair, term-major.
///
/// `se` comes from the covariance diagonal, `z = β/se`, two-sided p from
/// the standard normal, `rrr = exp(β)` and stars per the 0.05/0.01/0.001
/// thresholds.
pub fn inference(fit: &ModelFit) -> Result<Vec<InferenceRow>, MnLogitError> {
    if !fit.converged {
        return Err(MnLogitError::NotConverged);
    }
    Ok(inference_unchecked(fit))
}

/// Wald rows without the convergence gate, for explicitly requested
/// exports of capped fits.
pub fn inference_unchecked(fit: &ModelFit) -> Vec<InferenceRow> {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let p = fit.terms.len();
    let free = fit.free_categories();
    let mut rows = Vec::with_capacity(free.len() * p);
    for (t_ix, term) in fit.terms.iter().enumerate() {
        for (block, category) in free.iter().enumerate() {
            let beta = fit.coefficients[block][t_ix];
            let var = fit.covariance_diag(block * p + t_ix);
            let se = if var > 0.0 { var.sqrt() } else { 0.0 };
            let p_value = if se > 0.0 {
                2.0 * normal.cdf(-(beta / se).abs())
            } else {
                // A zero standard error is a degenerate direction; report
                // the coefficient without evidence against the null.
                1.0
            };
            rows.push(InferenceRow {
                term: *term,
                category: *category,
                beta,
                rrr: rrr_from_beta(beta),
                se,
                p_value,
                stars: Stars::from_p(p_value),
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{CentralityKind, Moderator};
    use crate::graph::BlogId;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn id(i: usize) -> BlogId {
        BlogId::new(format!("b{i}")).unwrap()
    }

    /// Random design with `j` observed classes.
    fn random_design(seed: u64, n: usize, p_extra: usize, j: usize) -> DesignMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let terms: Vec<Term> = std::iter::once(Term::Intercept)
            .chain(
                [
                    Term::Centrality(CentralityKind::PageRank),
                    Term::Moderator(Moderator::Experience),
                    Term::Moderator(Moderator::ContentPublication),
                    Term::Moderator(Moderator::AudienceCommunication),
                    Term::Interaction(Moderator::Experience, CentralityKind::PageRank),
                ]
                .into_iter()
                .take(p_extra),
            )
            .collect();
        let p = terms.len();
        let mut x = Vec::with_capacity(n * p);
        let mut y = Vec::with_capacity(n);
        let mut ids = Vec::with_capacity(n);
        for i in 0..n {
            ids.push(id(i));
            x.push(1.0);
            for _ in 1..p {
                x.push(rng.gen_range(-1.5..1.5));
            }
            y.push(AttractivenessClass::from_index(rng.gen_range(0..j)).unwrap());
        }
        // Make sure every class up to j is present.
        for (i, item) in y.iter_mut().enumerate().take(j) {
            *item = AttractivenessClass::from_index(i).unwrap();
        }
        DesignMatrix::from_parts(ids, terms, x, y)
    }

    #[test]
    fn zero_coefficients_give_uniform_likelihood() {
        let dm = random_design(1, 40, 2, 5);
        let theta = vec![0.0; 4 * dm.n_terms()];
        let ll = log_likelihood(&dm, AttractivenessClass::VeryLow, &theta).unwrap();
        let expect = 40.0 * (1.0f64 / 5.0).ln();
        assert!((ll - expect).abs() < 1e-9, "{ll} vs {expect}");
    }

    #[test]
    fn likelihood_is_never_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for seed in 0..5 {
            let dm = random_design(seed, 30, 3, 5);
            let dim = 4 * dm.n_terms();
            let theta: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.8..0.8)).collect();
            let ll = log_likelihood(&dm, AttractivenessClass::VeryLow, &theta).unwrap();
            assert!(ll <= 0.0);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dm = random_design(3, 25, 3, 5);
        let dim = 4 * dm.n_terms();
        let theta: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let grad = gradient(&dm, AttractivenessClass::VeryLow, &theta).unwrap();
        let h = 1e-5;
        let mut max_rel = 0.0f64;
        let scale = grad.iter().fold(1.0f64, |m, g| m.max(g.abs()));
        for k in 0..dim {
            let mut plus = theta.clone();
            plus[k] += h;
            let mut minus = theta.clone();
            minus[k] -= h;
            let fd = (log_likelihood(&dm, AttractivenessClass::VeryLow, &plus).unwrap()
                - log_likelihood(&dm, AttractivenessClass::VeryLow, &minus).unwrap())
                / (2.0 * h);
            max_rel = max_rel.max((grad[k] - fd).abs() / scale);
        }
        assert!(max_rel < 1e-6, "max relative error {max_rel}");
    }

    #[test]
    fn hessian_is_symmetric_negative_semidefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let dm = random_design(5, 30, 2, 4);
        let dim = 3 * dm.n_terms();
        let theta: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let h = hessian(&dm, AttractivenessClass::VeryLow, &theta).unwrap();
        for a in 0..dim {
            for b in 0..dim {
                assert!((h[(a, b)] - h[(b, a)]).abs() < 1e-10);
            }
        }
        let eigen = h.symmetric_eigen();
        for ev in eigen.eigenvalues.iter() {
            assert!(*ev <= 1e-10, "eigenvalue {ev}");
        }
    }

    #[test]
    fn gradient_vanishes_at_fit_optimum() {
        let dm = random_design(17, 120, 3, 5);
        let fitted = fit(&dm, AttractivenessClass::VeryLow, &FitOptions::default()).unwrap();
        assert!(fitted.converged);
        let theta: Vec<f64> = fitted.coefficients.concat();
        let grad = gradient(&dm, AttractivenessClass::VeryLow, &theta).unwrap();
        let norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        assert!(norm < 1e-8, "gradient norm {norm}");
    }

    #[test]
    fn intercept_only_balanced_fit_has_zero_intercepts() {
        let n = 100;
        let ids: Vec<BlogId> = (0..n).map(id).collect();
        let x = vec![1.0; n];
        let y: Vec<AttractivenessClass> =
            (0..n).map(|i| AttractivenessClass::from_index(i % 5).unwrap()).collect();
        let dm = DesignMatrix::from_parts(ids, vec![Term::Intercept], x, y);
        let fitted = fit(&dm, AttractivenessClass::VeryLow, &FitOptions::default()).unwrap();
        for block in &fitted.coefficients {
            assert!(block[0].abs() < 1e-8, "intercept {}", block[0]);
        }
    }

    #[test]
    fn intercept_only_fit_matches_log_count_ratios() {
        // 10 very-low, 20 low, 40 average: intercepts are ln(n_j / n_base).
        let mut y = vec![AttractivenessClass::VeryLow; 10];
        y.extend(vec![AttractivenessClass::Low; 20]);
        y.extend(vec![AttractivenessClass::Average; 40]);
        let n = y.len();
        let ids: Vec<BlogId> = (0..n).map(id).collect();
        let dm = DesignMatrix::from_parts(ids, vec![Term::Intercept], vec![1.0; n], y);
        let fitted = fit(&dm, AttractivenessClass::VeryLow, &FitOptions::default()).unwrap();
        assert!((fitted.coefficients[0][0] - (2.0f64).ln()).abs() < 1e-6);
        assert!((fitted.coefficients[1][0] - (4.0f64).ln()).abs() < 1e-6);
    }

    #[test]
    fn fit_requires_baseline_and_two_classes() {
        let dm = random_design(23, 30, 2, 2); // classes 0 and 1 only
        assert!(matches!(
            fit(&dm, AttractivenessClass::High, &FitOptions::default()),
            Err(MnLogitError::MissingClass(_))
        ));

        let n = 20;
        let ids: Vec<BlogId> = (0..n).map(id).collect();
        let y = vec![AttractivenessClass::VeryLow; n];
        let dm = DesignMatrix::from_parts(ids, vec![Term::Intercept], vec![1.0; n], y);
        assert!(matches!(
            fit(&dm, AttractivenessClass::VeryLow, &FitOptions::default()),
            Err(MnLogitError::MissingClass(_))
        ));
    }

    #[test]
    fn separation_is_detected() {
        // Perfectly separated binary outcome on a small-scale regressor, so
        // the slope must blow far past the bound before the likelihood
        // flattens numerically.
        let n = 40;
        let ids: Vec<BlogId> = (0..n).map(id).collect();
        let terms = vec![Term::Intercept, Term::Moderator(Moderator::Experience)];
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let v = if i < n / 2 { -0.1 } else { 0.1 };
            x.extend([1.0, v]);
            y.push(if i < n / 2 {
                AttractivenessClass::VeryLow
            } else {
                AttractivenessClass::Low
            });
        }
        let dm = DesignMatrix::from_parts(ids, terms, x, y);
        assert!(matches!(
            fit(&dm, AttractivenessClass::VeryLow, &FitOptions::default()),
            Err(MnLogitError::SeparationDetected(_))
        ));
    }

    #[test]
    fn predict_proba_sums_to_one_and_uniform_at_zero() {
        let dm = random_design(29, 50, 3, 5);
        let mut fitted = fit(&dm, AttractivenessClass::VeryLow, &FitOptions::default()).unwrap();
        for i in 0..dm.n_rows() {
            let probs = predict_proba(&fitted, dm.row(i)).unwrap();
            let total: f64 = probs.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
            assert!(probs.iter().all(|&p| p > 0.0 && p < 1.0));
        }

        for block in &mut fitted.coefficients {
            for c in block.iter_mut() {
                *c = 0.0;
            }
        }
        let probs = predict_proba(&fitted, dm.row(0)).unwrap();
        for p in probs {
            assert!((p - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn probabilities_depend_only_on_coefficient_differences() {
        // Shifting every category score by the same constant leaves the
        // softmax unchanged; with the baseline pinned at zero this means
        // probabilities depend only on q_j − q_baseline.
        let dm = random_design(31, 40, 3, 5);
        let fitted = fit(&dm, AttractivenessClass::VeryLow, &FitOptions::default()).unwrap();
        for i in 0..5 {
            let row = dm.row(i);
            let probs = predict_proba(&fitted, row).unwrap();
            let shift = 3.75;
            let mut scores: Vec<f64> = Vec::new();
            let mut block = 0;
            for pos in 0..fitted.categories.len() {
                if fitted.categories[pos] == fitted.baseline {
                    scores.push(shift);
                } else {
                    let dot: f64 = row
                        .iter()
                        .zip(&fitted.coefficients[block])
                        .map(|(w, q)| w * q)
                        .sum();
                    scores.push(dot + shift);
                    block += 1;
                }
            }
            softmax_in_place(&mut scores);
            for (a, b) in probs.iter().zip(&scores) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn duplicating_observations_keeps_estimates_and_scales_se() {
        let dm = random_design(37, 80, 3, 5);
        let doubled = {
            let ids: Vec<BlogId> = (0..2 * dm.n_rows()).map(id).collect();
            let mut x = Vec::new();
            let mut y = Vec::new();
            for _rep in 0..2 {
                for i in 0..dm.n_rows() {
                    x.extend_from_slice(dm.row(i));
                    y.push(dm.outcome()[i]);
                }
            }
            DesignMatrix::from_parts(ids, dm.terms().to_vec(), x, y)
        };
        let opts = FitOptions::default();
        let fit1 = fit(&dm, AttractivenessClass::VeryLow, &opts).unwrap();
        let fit2 = fit(&doubled, AttractivenessClass::VeryLow, &opts).unwrap();
        for (b1, b2) in fit1.coefficients.iter().zip(&fit2.coefficients) {
            for (c1, c2) in b1.iter().zip(b2) {
                assert!((c1 - c2).abs() < 1e-7, "{c1} vs {c2}");
            }
        }
        let rows1 = inference(&fit1).unwrap();
        let rows2 = inference(&fit2).unwrap();
        for (r1, r2) in rows1.iter().zip(&rows2) {
            assert!((r2.se - r1.se / 2.0f64.sqrt()).abs() < 1e-9, "{} vs {}", r1.se, r2.se);
        }
    }

    #[test]
    fn relabelling_categories_permutes_coefficient_blocks() {
        let dm = random_design(61, 150, 3, 5);
        // Swap the Low and High labels everywhere; the baseline stays.
        let swapped: Vec<AttractivenessClass> = dm
            .outcome()
            .iter()
            .map(|&c| match c {
                AttractivenessClass::Low => AttractivenessClass::High,
                AttractivenessClass::High => AttractivenessClass::Low,
                other => other,
            })
            .collect();
        let ids: Vec<BlogId> = (0..dm.n_rows()).map(id).collect();
        let x: Vec<f64> = (0..dm.n_rows()).flat_map(|i| dm.row(i).to_vec()).collect();
        let dm2 = DesignMatrix::from_parts(ids, dm.terms().to_vec(), x, swapped);

        let opts = FitOptions::default();
        let f1 = fit(&dm, AttractivenessClass::VeryLow, &opts).unwrap();
        let f2 = fit(&dm2, AttractivenessClass::VeryLow, &opts).unwrap();
        // Blocks are in class order (Low, Average, ModeratelyHigh, High):
        // the swap exchanges blocks 0 and 3 and keeps 1 and 2.
        for (a, b) in [(0usize, 3usize), (1, 1), (2, 2), (3, 0)] {
            for (c1, c2) in f1.coefficients[a].iter().zip(&f2.coefficients[b]) {
                assert!((c1 - c2).abs() < 1e-9, "{c1} vs {c2}");
            }
        }
    }

    #[test]
    fn fitting_is_deterministic() {
        let dm = random_design(41, 90, 4, 5);
        let f1 = fit(&dm, AttractivenessClass::VeryLow, &FitOptions::default()).unwrap();
        let f2 = fit(&dm, AttractivenessClass::VeryLow, &FitOptions::default()).unwrap();
        assert_eq!(f1.coefficients, f2.coefficients);
        assert_eq!(f1.covariance, f2.covariance);
        assert_eq!(f1.log_likelihood.to_bits(), f2.log_likelihood.to_bits());
    }

    #[test]
    fn inference_rows_have_exact_rrr_and_star_rules() {
        let dm = random_design(43, 100, 3, 5);
        let fitted = fit(&dm, AttractivenessClass::VeryLow, &FitOptions::default()).unwrap();
        let rows = inference(&fitted).unwrap();
        assert_eq!(rows.len(), fitted.terms.len() * 4);
        for row in &rows {
            assert_eq!(row.rrr.to_bits(), row.beta.exp().to_bits());
            assert!((0.0..=1.0).contains(&row.p_value));
        }
        assert_eq!(Stars::from_p(0.05), Stars::None);
        assert_eq!(Stars::from_p(0.049), Stars::One);
        assert_eq!(Stars::from_p(0.01), Stars::One);
        assert_eq!(Stars::from_p(0.009), Stars::Two);
        assert_eq!(Stars::from_p(0.0009), Stars::Three);
    }

    #[test]
    fn inference_requires_convergence() {
        let dm = random_design(47, 80, 3, 5);
        let mut fitted = fit(&dm, AttractivenessClass::VeryLow, &FitOptions::default()).unwrap();
        fitted.converged = false;
        assert!(matches!(inference(&fitted), Err(MnLogitError::NotConverged)));
    }

    #[test]
    fn epv_report_thresholds() {
        let dm = random_design(53, 300, 4, 5);
        let report = epv_check(&dm);
        assert_eq!(report.params_per_equation, 5);
        assert!(report.epv > 0.0);

        // Intercept-only: EPV equals the smallest class size.
        let n = 50;
        let ids: Vec<BlogId> = (0..n).map(id).collect();
        let y: Vec<AttractivenessClass> =
            (0..n).map(|i| AttractivenessClass::from_index(i % 5).unwrap()).collect();
        let dm = DesignMatrix::from_parts(ids, vec![Term::Intercept], vec![1.0; n], y);
        let report = epv_check(&dm);
        assert_eq!(report.smallest_class_count, 10);
        assert!((report.epv - 10.0).abs() < 1e-12);
        assert!(!report.warn);
    }

    #[test]
    fn rrr_examples() {
        assert!((rrr_from_beta(0.43) - 1.5373).abs() < 5e-5);
        assert!((rrr_from_beta(-1.21) - 0.298).abs() < 5e-4);
        assert_eq!(rrr_from_beta(0.0), 1.0);
    }

    #[test]
    fn log_likelihood_rejects_bad_dimensions() {
        let dm = random_design(59, 20, 2, 5);
        let theta = vec![0.0; 3];
        assert!(matches!(
            log_likelihood(&dm, AttractivenessClass::VeryLow, &theta),
            Err(MnLogitError::DimensionMismatch(_))
        ));
    }
}
