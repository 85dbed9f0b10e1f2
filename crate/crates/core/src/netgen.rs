//! Synthetic data: preferential-attachment networks and attribute/outcome
//! generators with known coefficients, for end-to-end testing.
//!
//! All randomness flows from the 64-bit seed through ChaCha8: stream 0
//! drives network growth, stream 1 drives attributes and outcomes. Outputs
//! are a pure function of the parameters.

use std::io::Write;
use std::path::Path;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::centrality::{CentralityBundle, CentralityError, PageRankParams};
use crate::features::{
    self, AttractivenessClass, BlogAttributes, FeatureError, Profession, Term,
};
use crate::graph::{BlogId, BlogNetwork, NetworkBuilder};

#[derive(Debug, Error)]
pub enum NetGenError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Centrality(#[from] CentralityError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

/// True outcome model and attribute distributions for the generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthParams {
    /// Regressors of the true model; the intercept is implied first.
    pub terms: Vec<Term>,
    /// True coefficients per non-baseline class (Low, Average,
    /// ModeratelyHigh, High), each aligned with `terms`.
    pub q: Vec<Vec<f64>>,
    /// Experience is uniform on [0, experience_max], two decimals.
    pub experience_max: f64,
    /// Posts are Poisson with this mean, capped at `posts_cap`.
    pub posts_lambda: f64,
    pub posts_cap: u32,
    /// Categorical weights over the six professions.
    pub profession_weights: [f64; 6],
    /// Probability of the replied-to-readers flag.
    pub reply_prob: f64,
    /// Disjoint ascending half-open visit ranges per class; each class
    /// draws strictly increasing visit counts inside its own range, which
    /// makes quintile binning an exact inverse of the class labels.
    pub visit_ranges: [(u64, u64); 5],
}

impl Default for TruthParams {
    fn default() -> Self {
        TruthParams {
            terms: vec![
                Term::Intercept,
                Term::Centrality(crate::features::CentralityKind::InDegree),
                Term::Centrality(crate::features::CentralityKind::Betweenness),
                Term::Interaction(
                    crate::features::Moderator::Experience,
                    crate::features::CentralityKind::InDegree,
                ),
                Term::Interaction(
                    crate::features::Moderator::ContentPublication,
                    crate::features::CentralityKind::Betweenness,
                ),
            ],
            // Intercepts are calibrated so the class marginals come out
            // near-uniform under the default attribute distributions,
            // keeping quota balancing down to a handful of moves. Slopes
            // sit on wide-spread regressors so a 5000-row fit pins every
            // coefficient tightly.
            q: vec![
                vec![-0.07, 0.008, 0.0004, 0.0005, -0.00004],
                vec![-0.05, 0.006, -0.0003, -0.0004, 0.00006],
                vec![-0.13, 0.010, 0.0005, 0.0003, 0.00005],
                vec![-0.05, 0.012, -0.0002, -0.0002, -0.00002],
            ],
            experience_max: 14.0,
            posts_lambda: 2.0,
            posts_cap: 84,
            profession_weights: [1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
            reply_prob: 0.3,
            visit_ranges: [
                (500, 6_800),
                (6_800, 18_000),
                (18_000, 35_000),
                (35_000, 102_000),
                (102_000, 1_600_000),
            ],
        }
    }
}

/// Generator parameters: `n` nodes, `m` out-links per new node, the seed
/// and the true outcome model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenParams {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    #[serde(default)]
    pub truth: TruthParams,
}

impl GenParams {
    pub fn new(n: usize, m: usize, seed: u64) -> GenParams {
        GenParams { n, m, seed, truth: TruthParams::default() }
    }

    fn validate(&self) -> Result<(), NetGenError> {
        if self.m < 1 || self.n <= self.m {
            return Err(NetGenError::InvalidParams(format!(
                "need n > m >= 1, got n={} m={}",
                self.n, self.m
            )));
        }
        Ok(())
    }
}

fn node_id(i: usize) -> BlogId {
    BlogId::new(format!("b{i}")).expect("generated id is valid")
}

/// Grows a preferential-attachment network: a seed clique of `m + 1`
/// mutually linked nodes, then each new node adds `m` directed edges to
/// existing nodes drawn with probability proportional to `in_degree + 1`
/// (the +1 keeps fresh nodes reachable), without duplicates.
///
/// Total edges come to `m(m+1) + m(n − m − 1)`.
pub fn generate_pa_network(params: &GenParams) -> Result<BlogNetwork, NetGenError> {
    generate_network(params, AttachmentKernel::Preferential)
}

/// Control generator with the same growth schedule but uniform target
/// choice, for contrasting against preferential attachment.
pub fn generate_uniform_network(params: &GenParams) -> Result<BlogNetwork, NetGenError> {
    generate_network(params, AttachmentKernel::Uniform)
}

enum AttachmentKernel {
    Preferential,
    Uniform,
}

fn generate_network(
    params: &GenParams,
    kernel: AttachmentKernel,
) -> Result<BlogNetwork, NetGenError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(0);

    let mut builder = NetworkBuilder::new();
    // Tickets hold one entry per node plus one per received edge, giving
    // draws proportional to in_degree + 1.
    let mut tickets: Vec<usize> = Vec::new();

    let clique = params.m + 1;
    for v in 0..clique {
        builder.add_node(node_id(v));
        tickets.push(v);
    }
    for s in 0..clique {
        for t in 0..clique {
            if s != t {
                builder.add_edge(node_id(s), node_id(t));
                tickets.push(t);
            }
        }
    }

    for v in clique..params.n {
        let existing = v;
        let snapshot = tickets.len();
        let mut chosen: Vec<usize> = Vec::with_capacity(params.m);
        while chosen.len() < params.m {
            let t = match kernel {
                AttachmentKernel::Preferential => tickets[rng.gen_range(0..snapshot)],
                AttachmentKernel::Uniform => rng.gen_range(0..existing),
            };
            if !chosen.contains(&t) {
                chosen.push(t);
            }
        }
        builder.add_node(node_id(v));
        tickets.push(v);
        for t in chosen {
            builder.add_edge(node_id(v), node_id(t));
            tickets.push(t);
        }
    }

    Ok(builder.build())
}

/// Everything the attribute generator produced for one network.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    /// One record per network node, in node order; `visits_6mo` is filled
    /// so that quintile binning reproduces `classes` exactly.
    pub attributes: Vec<BlogAttributes>,
    /// Outcome class per node, in node order.
    pub classes: Vec<AttractivenessClass>,
    pub truth: TruthSidecar,
}

/// Machine-readable record of the true model behind a generated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthSidecar {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    /// Name of the deterministic generator and its stream layout.
    pub generator: String,
    pub baseline: AttractivenessClass,
    pub categories: Vec<AttractivenessClass>,
    /// Term labels of the true model, parseable back into terms.
    pub terms: Vec<String>,
    /// True coefficients per non-baseline class, aligned with `terms`.
    pub q: Vec<Vec<f64>>,
    /// Final class index per node, in node order.
    pub class_labels: Vec<u8>,
    /// Class counts as sampled from the softmax, before quota balancing.
    pub sampled_counts: [usize; 5],
    /// Nodes moved to neighbouring classes to hit the quintile quotas.
    pub rebalance_moves: usize,
}

/// Draws attributes, samples outcome classes from the true softmax model
/// and assigns visit counts consistent with the classes.
///
/// The configured intercepts are first calibrated against the realised
/// design so the expected class counts equal the quintile quotas; the
/// calibrated coefficients are the dataset's true model and go into the
/// sidecar. Classes are then sampled independently per blog and the counts
/// balanced to the exact quotas by moving randomly chosen blogs into
/// adjacent classes. Visits are strictly increasing within each class's
/// disjoint range, so `classify_attractiveness` recovers the final classes
/// exactly.
pub fn generate_attributes_and_outcome(
    net: &BlogNetwork,
    params: &GenParams,
) -> Result<GeneratedData, NetGenError> {
    params.validate()?;
    let truth = &params.truth;
    let n = net.node_count();
    if truth.q.len() != 4 {
        return Err(NetGenError::InvalidParams(
            "true model needs one coefficient vector per non-baseline class".into(),
        ));
    }
    for q in &truth.q {
        if q.len() != truth.terms.len() {
            return Err(NetGenError::InvalidParams(
                "coefficient vectors must match the term list length".into(),
            ));
        }
    }
    let quotas = features::quintile_quotas(n);
    for (k, quota) in quotas.iter().enumerate() {
        let (lo, hi) = truth.visit_ranges[k];
        if hi <= lo || (hi - lo) < *quota as u64 {
            return Err(NetGenError::InvalidParams(format!(
                "visit range {lo}..{hi} cannot hold {quota} distinct counts"
            )));
        }
        if k > 0 && truth.visit_ranges[k - 1].1 > lo {
            return Err(NetGenError::InvalidParams("visit ranges must ascend".into()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(1);

    let profession_dist = WeightedIndex::new(truth.profession_weights)
        .map_err(|e| NetGenError::InvalidParams(format!("profession weights: {e}")))?;
    let posts_dist = Poisson::new(truth.posts_lambda)
        .map_err(|e| NetGenError::InvalidParams(format!("posts lambda: {e}")))?;

    let mut attributes: Vec<BlogAttributes> = Vec::with_capacity(n);
    for ix in 0..n {
        let experience_years =
            (rng.gen_range(0.0..=truth.experience_max) * 100.0).round() / 100.0;
        let posts: f64 = rng.sample(posts_dist);
        let posts_7d = (posts as u32).min(truth.posts_cap);
        let profession = Profession::ALL[rng.sample(&profession_dist)];
        let replied_to_readers = rng.gen_bool(truth.reply_prob);
        attributes.push(BlogAttributes {
            blog_id: net.id(ix).clone(),
            visits_6mo: 0,
            experience_years,
            profession,
            posts_7d,
            replied_to_readers,
        });
    }

    let bundle = CentralityBundle::compute(net, &PageRankParams::default())?;

    // Non-intercept score per node and class under the configured slopes.
    let intercept_pos = truth.terms.iter().position(|&t| t == Term::Intercept);
    let mut base_scores: Vec<[f64; 5]> = Vec::with_capacity(n);
    for (ix, attrs) in attributes.iter().enumerate() {
        let x: Vec<f64> = truth
            .terms
            .iter()
            .map(|&t| features::term_value(t, &bundle, ix, attrs))
            .collect();
        let mut scores = [0.0f64; 5];
        for (j, q) in truth.q.iter().enumerate() {
            scores[j + 1] = x
                .iter()
                .zip(q)
                .enumerate()
                .filter(|(k, _)| Some(*k) != intercept_pos)
                .map(|(_, (a, b))| a * b)
                .sum();
        }
        base_scores.push(scores);
    }

    // Calibrate the intercepts so expected class counts hit the quotas;
    // the calibrated vector is the dataset's true model. Without an
    // intercept term the scores are used as configured.
    let intercepts = match intercept_pos {
        Some(pos) => {
            let start = [truth.q[0][pos], truth.q[1][pos], truth.q[2][pos], truth.q[3][pos]];
            calibrate_intercepts(&base_scores, &quotas, start)
        }
        None => [0.0; 4],
    };
    let mut true_q = truth.q.clone();
    if let Some(pos) = intercept_pos {
        for (j, q) in true_q.iter_mut().enumerate() {
            q[pos] = intercepts[j];
        }
    }

    let mut probs: Vec<[f64; 5]> = Vec::with_capacity(n);
    for scores in &base_scores {
        let mut s = *scores;
        for j in 0..4 {
            s[j + 1] += intercepts[j];
        }
        softmax5(&mut s);
        probs.push(s);
    }

    // Sample labels from the softmax.
    let mut classes: Vec<usize> = Vec::with_capacity(n);
    for p in &probs {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut label = 4;
        for (k, pk) in p.iter().enumerate() {
            acc += pk;
            if u < acc {
                label = k;
                break;
            }
        }
        classes.push(label);
    }
    let mut sampled_counts = [0usize; 5];
    for &c in &classes {
        sampled_counts[c] += 1;
    }

    let rebalance_moves = rebalance_to_quotas(&mut classes, &quotas, &mut rng);

    // Strictly increasing visits inside each class's range, in node order.
    let mut offsets = [0u64; 5];
    for (attrs, &k) in attributes.iter_mut().zip(&classes) {
        attrs.visits_6mo = truth.visit_ranges[k].0 + offsets[k];
        offsets[k] += 1;
    }

    let classes: Vec<AttractivenessClass> = classes
        .iter()
        .map(|&k| AttractivenessClass::from_index(k).unwrap())
        .collect();
    let truth_sidecar = TruthSidecar {
        seed: params.seed,
        n: params.n,
        m: params.m,
        generator: "chacha8(seed); stream 0 network, stream 1 attributes".to_owned(),
        baseline: AttractivenessClass::VeryLow,
        categories: AttractivenessClass::ALL.to_vec(),
        terms: truth.terms.iter().map(|t| t.label()).collect(),
        q: true_q,
        class_labels: classes.iter().map(|c| c.index() as u8).collect(),
        sampled_counts,
        rebalance_moves,
    };

    Ok(GeneratedData { attributes, classes, truth: truth_sidecar })
}

fn softmax5(scores: &mut [f64; 5]) {
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

/// Newton solve for the four non-baseline intercepts that make the expected
/// class counts equal the quotas for the realised design.
fn calibrate_intercepts(
    base_scores: &[[f64; 5]],
    quotas: &[usize; 5],
    start: [f64; 4],
) -> [f64; 4] {
    let mut alpha = start;
    for _ in 0..60 {
        let mut expected = [0.0f64; 4];
        let mut jacobian = [[0.0f64; 4]; 4];
        for scores in base_scores {
            let mut s = *scores;
            for j in 0..4 {
                s[j + 1] += alpha[j];
            }
            softmax5(&mut s);
            for j in 0..4 {
                expected[j] += s[j + 1];
                for k in 0..4 {
                    let kron = if j == k { 1.0 } else { 0.0 };
                    jacobian[j][k] += s[j + 1] * (kron - s[k + 1]);
                }
            }
        }
        let residual: Vec<f64> =
            (0..4).map(|j| expected[j] - quotas[j + 1] as f64).collect();
        let worst = residual.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        if worst < 1e-9 {
            break;
        }
        let jac = nalgebra::Matrix4::from_fn(|r, c| jacobian[r][c]);
        let rhs = nalgebra::Vector4::from_fn(|r, _| residual[r]);
        let Some(step) = jac.lu().solve(&rhs) else { break };
        for j in 0..4 {
            alpha[j] -= step[j];
        }
    }
    alpha
}

/// Moves randomly chosen blogs between adjacent classes until the counts
/// equal the quintile quotas. One left-to-right pass: class k's surplus
/// spills into k+1, deficits pull from k+1. Random selection keeps the
/// moved set uncorrelated with the covariates. Returns the move count.
#[allow(clippy::needless_range_loop)]
fn rebalance_to_quotas(
    classes: &mut [usize],
    quotas: &[usize; 5],
    rng: &mut ChaCha8Rng,
) -> usize {
    let mut moves = 0usize;
    for k in 0..4 {
        let count = classes.iter().filter(|&&c| c == k).count();
        if count > quotas[k] {
            let mut members: Vec<usize> =
                (0..classes.len()).filter(|&i| classes[i] == k).collect();
            for _ in 0..count - quotas[k] {
                let pick = rng.gen_range(0..members.len());
                let i = members.swap_remove(pick);
                classes[i] = k + 1;
                moves += 1;
            }
        } else if count < quotas[k] {
            let mut members: Vec<usize> =
                (0..classes.len()).filter(|&i| classes[i] == k + 1).collect();
            for _ in 0..quotas[k] - count {
                let pick = rng.gen_range(0..members.len());
                let i = members.swap_remove(pick);
                classes[i] = k;
                moves += 1;
            }
        }
    }
    moves
}

/// Writes `truth` as pretty JSON.
pub fn write_truth_json(truth: &TruthSidecar, mut out: impl Write) -> Result<(), NetGenError> {
    let text = serde_json::to_string_pretty(truth).expect("sidecar serialises");
    out.write_all(text.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Reads a truth sidecar back.
pub fn load_truth_json(path: impl AsRef<Path>) -> Result<TruthSidecar, NetGenError> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text)
        .map_err(|e| NetGenError::InvalidParams(format!("truth sidecar: {e}")))
}
