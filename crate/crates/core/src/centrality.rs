//! The four structural-capital measures: degree, closeness, betweenness and
//! PageRank, plus the 0–10 PageRank scaling.
//!
//! All measures are directed; recommendations are directed by nature. Use
//! [`crate::graph::BlogNetwork::symmetrize`] first for symmetrised runs.
//!
//! Closeness and betweenness parallelise over source nodes and PageRank over
//! per-node updates. Sources are processed in fixed-size chunks merged in
//! chunk order, so results are bit-identical for any rayon thread count.

use std::collections::HashMap;
use std::collections::VecDeque;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{BlogId, BlogNetwork};

/// Fixed work-unit size for the parallel source sweeps. Chunk boundaries do
/// not depend on the thread count, so the merge order is stable.
const SOURCE_CHUNK: usize = 128;

#[derive(Debug, Error)]
pub enum CentralityError {
    #[error("network has no nodes")]
    EmptyNetwork,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Which measure a [`CentralityVector`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measure {
    InDegree,
    OutDegree,
    Closeness,
    Betweenness,
    PageRankRaw,
    PageRankScaled,
}

/// PageRank iteration parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PageRankParams {
    /// Damping factor `c` in (0, 1).
    pub damping: f64,
    pub max_iterations: usize,
    /// Stop when the max absolute per-node change falls below this.
    pub tolerance: f64,
}

impl Default for PageRankParams {
    fn default() -> Self {
        PageRankParams { damping: 0.85, max_iterations: 200, tolerance: 1e-12 }
    }
}

/// Convergence record of a PageRank run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PageRankMeta {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// One value per network node, aligned with the network's node order.
#[derive(Debug, Clone)]
pub struct CentralityVector {
    measure: Measure,
    ids: Vec<BlogId>,
    index: HashMap<BlogId, usize>,
    values: Vec<f64>,
    meta: Option<PageRankMeta>,
}

impl CentralityVector {
    fn new(measure: Measure, net: &BlogNetwork, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), net.node_count());
        let ids = net.ids().to_vec();
        let index = ids.iter().cloned().zip(0..).collect();
        CentralityVector { measure, ids, index, values, meta: None }
    }

    pub fn measure(&self) -> Measure {
        self.measure
    }

    /// Node ids in network order.
    pub fn ids(&self) -> &[BlogId] {
        &self.ids
    }

    /// Values aligned with [`CentralityVector::ids`].
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, id: &BlogId) -> Option<f64> {
        self.index.get(id).map(|&ix| self.values[ix])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Iteration/residual record; present only on PageRank vectors.
    pub fn meta(&self) -> Option<PageRankMeta> {
        self.meta
    }
}

/// Count of recommendations received: column sums of the adjacency matrix.
pub fn in_degree_centrality(net: &BlogNetwork) -> CentralityVector {
    let values = (0..net.node_count())
        .map(|v| net.in_neighbors(v).len() as f64)
        .collect();
    CentralityVector::new(Measure::InDegree, net, values)
}

/// Count of recommendations made: row sums of the adjacency matrix.
pub fn out_degree_centrality(net: &BlogNetwork) -> CentralityVector {
    let values = (0..net.node_count())
        .map(|v| net.out_neighbors(v).len() as f64)
        .collect();
    CentralityVector::new(Measure::OutDegree, net, values)
}

/// Breadth-first distances from `source` over out-edges. Unreachable nodes
/// stay at `usize::MAX`.
fn bfs_distances(net: &BlogNetwork, source: usize) -> Vec<usize> {
    let mut dist = vec![usize::MAX; net.node_count()];
    dist[source] = 0;
    let mut queue = VecDeque::new();
    queue.push_back(source);
    while let Some(v) = queue.pop_front() {
        for &w in net.out_neighbors(v) {
            if dist[w] == usize::MAX {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Reachable-set closeness with Wasserman–Faust scaling.
///
/// With `R(x)` the nodes reachable from `x` (excluding `x`), `r = |R(x)|`
/// and `n` the node count, the value is `(r / Σ d(x,i)) · (r / (n−1))`,
/// summing distances over `R(x)` only. Sinks score 0. On strongly connected
/// graphs this equals Freeman-normalised closeness `(n−1) / Σ d`.
pub fn closeness_centrality(net: &BlogNetwork) -> CentralityVector {
    let n = net.node_count();
    let sources: Vec<usize> = (0..n).collect();
    let values: Vec<f64> = sources
        .par_chunks(SOURCE_CHUNK)
        .map(|chunk| {
            chunk
                .iter()
                .map(|&x| {
                    let dist = bfs_distances(net, x);
                    let mut reachable = 0usize;
                    let mut total = 0usize;
                    for (i, &d) in dist.iter().enumerate() {
                        if i != x && d != usize::MAX {
                            reachable += 1;
                            total += d;
                        }
                    }
                    if reachable == 0 {
                        0.0
                    } else {
                        let r = reachable as f64;
                        (r / total as f64) * (r / (n as f64 - 1.0))
                    }
                })
                .collect::<Vec<f64>>()
        })
        .flatten()
        .collect();
    CentralityVector::new(Measure::Closeness, net, values)
}

/// Directed betweenness by Brandes' accumulation, unnormalised: for every
/// ordered pair `(i, j)` with `i ≠ j ≠ x`, the share of shortest `i → j`
/// paths passing through `x`. Pairs with no path contribute 0.
pub fn betweenness_centrality(net: &BlogNetwork) -> CentralityVector {
    let n = net.node_count();
    let sources: Vec<usize> = (0..n).collect();
    let partials: Vec<Vec<f64>> = sources
        .par_chunks(SOURCE_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0f64; n];
            for &s in chunk {
                brandes_accumulate(net, s, &mut acc);
            }
            acc
        })
        .collect();

    let mut values = vec![0.0f64; n];
    for partial in partials {
        for (v, p) in values.iter_mut().zip(partial) {
            *v += p;
        }
    }
    CentralityVector::new(Measure::Betweenness, net, values)
}

/// One Brandes source sweep: BFS outwards counting geodesics, then
/// dependency accumulation in reverse finish order.
fn brandes_accumulate(net: &BlogNetwork, s: usize, acc: &mut [f64]) {
    let n = net.node_count();
    let mut stack: Vec<usize> = Vec::with_capacity(n);
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![-1i64; n];
    sigma[s] = 1.0;
    dist[s] = 0;

    let mut queue = VecDeque::new();
    queue.push_back(s);
    while let Some(v) = queue.pop_front() {
        stack.push(v);
        for &w in net.out_neighbors(v) {
            if dist[w] < 0 {
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            }
            if dist[w] == dist[v] + 1 {
                sigma[w] += sigma[v];
                preds[w].push(v);
            }
        }
    }

    let mut delta = vec![0.0f64; n];
    while let Some(w) = stack.pop() {
        for &v in &preds[w] {
            delta[v] += (sigma[v] / sigma[w]) * (1.0 + delta[w]);
        }
        if w != s {
            acc[w] += delta[w];
        }
    }
}

/// PageRank as the fixed point of
/// `PR(i) = Σ_{j→i} c · PR(j)/d_j + (1 − c)`,
/// the non-normalised recurrence whose values average 1.
///
/// Iteration is synchronous (two buffers) from `PR = 1` for every node.
/// Dangling nodes (`d_j = 0`) distribute their mass uniformly over all
/// nodes, which preserves the total mass `n`. Stops when the max absolute
/// change drops below `tolerance` or after `max_iterations`; non-convergence
/// is reported through [`PageRankMeta::converged`], values are still
/// returned.
pub fn pagerank(
    net: &BlogNetwork,
    params: &PageRankParams,
) -> Result<CentralityVector, CentralityError> {
    let n = net.node_count();
    if n == 0 {
        return Err(CentralityError::EmptyNetwork);
    }
    if !(params.damping > 0.0 && params.damping < 1.0) {
        return Err(CentralityError::InvalidParams(format!(
            "damping must lie in (0, 1), got {}",
            params.damping
        )));
    }
    if params.tolerance < 0.0 {
        return Err(CentralityError::InvalidParams("tolerance must be non-negative".into()));
    }

    let c = params.damping;
    let teleport = 1.0 - c;
    let out_deg: Vec<usize> = (0..n).map(|v| net.out_neighbors(v).len()).collect();
    let dangling: Vec<usize> = (0..n).filter(|&v| out_deg[v] == 0).collect();

    let mut current = vec![1.0f64; n];
    let mut next = vec![0.0f64; n];
    let mut iterations = 0usize;
    let mut residual = f64::INFINITY;

    let nodes: Vec<usize> = (0..n).collect();
    while iterations < params.max_iterations {
        let dangling_share: f64 =
            dangling.iter().map(|&v| current[v]).sum::<f64>() / n as f64;
        let chunked: Vec<Vec<f64>> = nodes
            .par_chunks(SOURCE_CHUNK)
            .map(|chunk| {
                chunk
                    .iter()
                    .map(|&i| {
                        let mut inflow = dangling_share;
                        for &j in net.in_neighbors(i) {
                            inflow += current[j] / out_deg[j] as f64;
                        }
                        teleport + c * inflow
                    })
                    .collect::<Vec<f64>>()
            })
            .collect();
        next.clear();
        next.extend(chunked.into_iter().flatten());

        iterations += 1;
        residual = current
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        std::mem::swap(&mut current, &mut next);
        if residual < params.tolerance {
            break;
        }
    }

    let converged = residual < params.tolerance;
    if !converged {
        log::warn!(
            "pagerank did not converge after {iterations} iterations (residual {residual:e})"
        );
    }
    let mut vector = CentralityVector::new(Measure::PageRankRaw, net, current);
    vector.meta = Some(PageRankMeta { iterations, residual, converged });
    Ok(vector)
}

/// Maps raw PageRank onto the 0–10 integer scale through a logarithmic
/// min–max map: `round(10 · ln(v/min) / ln(max/min))`. A degenerate range
/// (all values equal) maps every node to 10.
///
/// # Panics
///
/// Panics if `raw` is not a `PageRankRaw` vector; raw values are strictly
/// positive whenever the damping is below 1.
pub fn pagerank_scale10(raw: &CentralityVector) -> CentralityVector {
    assert_eq!(raw.measure(), Measure::PageRankRaw, "scale10 expects a raw PageRank vector");
    let min = raw.values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let values = if max <= min {
        vec![10.0; raw.values.len()]
    } else {
        let span = (max / min).ln();
        raw.values
            .iter()
            .map(|&v| (10.0 * (v / min).ln() / span).round())
            .collect()
    };
    CentralityVector {
        measure: Measure::PageRankScaled,
        ids: raw.ids.clone(),
        index: raw.index.clone(),
        values,
        meta: None,
    }
}

/// Mean geodesic distance over all reachable ordered pairs, for summary
/// output. Returns 0 for networks with no reachable pairs.
pub fn mean_reachable_distance(net: &BlogNetwork) -> f64 {
    let n = net.node_count();
    let sources: Vec<usize> = (0..n).collect();
    let partials: Vec<(u64, u64)> = sources
        .par_chunks(SOURCE_CHUNK)
        .map(|chunk| {
            let mut pairs = 0u64;
            let mut total = 0u64;
            for &x in chunk {
                for (i, &d) in bfs_distances(net, x).iter().enumerate() {
                    if i != x && d != usize::MAX {
                        pairs += 1;
                        total += d as u64;
                    }
                }
            }
            (pairs, total)
        })
        .collect();
    let (pairs, total) = partials
        .into_iter()
        .fold((0u64, 0u64), |(p, t), (cp, ct)| (p + cp, t + ct));
    if pairs == 0 {
        0.0
    } else {
        total as f64 / pairs as f64
    }
}

/// All measures for one network, computed in one pass.
#[derive(Debug, Clone)]
pub struct CentralityBundle {
    pub in_degree: CentralityVector,
    pub out_degree: CentralityVector,
    pub closeness: CentralityVector,
    pub betweenness: CentralityVector,
    pub pagerank_raw: CentralityVector,
    pub pagerank_scaled: CentralityVector,
}

impl CentralityBundle {
    pub fn compute(
        net: &BlogNetwork,
        params: &PageRankParams,
    ) -> Result<CentralityBundle, CentralityError> {
        let pagerank_raw = pagerank(net, params)?;
        let pagerank_scaled = pagerank_scale10(&pagerank_raw);
        Ok(CentralityBundle {
            in_degree: in_degree_centrality(net),
            out_degree: out_degree_centrality(net),
            closeness: closeness_centrality(net),
            betweenness: betweenness_centrality(net),
            pagerank_raw,
            pagerank_scaled,
        })
    }

    pub fn ids(&self) -> &[BlogId] {
        self.in_degree.ids()
    }
}

/// Writes the centrality export CSV
/// (`blog_id,in_degree,out_degree,closeness,betweenness,pagerank_raw,pagerank_0_10`).
/// Real-valued columns are printed with nine digits after the decimal point.
pub fn write_centrality_csv(
    bundle: &CentralityBundle,
    mut out: impl Write,
) -> std::io::Result<()> {
    writeln!(
        out,
        "blog_id,in_degree,out_degree,closeness,betweenness,pagerank_raw,pagerank_0_10"
    )?;
    for (ix, id) in bundle.ids().iter().enumerate() {
        writeln!(
            out,
            "{},{},{},{:.9},{:.9},{:.9},{}",
            id,
            bundle.in_degree.values()[ix] as u64,
            bundle.out_degree.values()[ix] as u64,
            bundle.closeness.values()[ix],
            bundle.betweenness.values()[ix],
            bundle.pagerank_raw.values()[ix],
            bundle.pagerank_scaled.values()[ix] as u64,
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NetworkBuilder;

    fn id(s: &str) -> BlogId {
        BlogId::new(s).unwrap()
    }

    fn net_from(edges: &[(&str, &str)]) -> BlogNetwork {
        let mut b = NetworkBuilder::new();
        for (s, t) in edges {
            b.add_edge(id(s), id(t));
        }
        b.build()
    }

    fn ring(n: usize) -> BlogNetwork {
        let mut b = NetworkBuilder::new();
        for i in 0..n {
            let s = id(&format!("n{i}"));
            let t = id(&format!("n{}", (i + 1) % n));
            b.add_edge(s, t);
        }
        b.build()
    }

    #[test]
    fn in_degree_counts_received_recommendations() {
        let net = net_from(&[("A", "B"), ("C", "B"), ("B", "A")]);
        let v = in_degree_centrality(&net);
        assert_eq!(v.get(&id("B")), Some(2.0));
        assert_eq!(v.get(&id("A")), Some(1.0));
        assert_eq!(v.get(&id("C")), Some(0.0));
    }

    #[test]
    fn closeness_on_path_graph() {
        let net = net_from(&[("A", "B"), ("B", "C")]);
        let v = closeness_centrality(&net);
        let a = v.get(&id("A")).unwrap();
        assert!((a - 2.0 / 3.0).abs() < 1e-12, "a = {a}");
        let b = v.get(&id("B")).unwrap();
        assert!((b - 0.5).abs() < 1e-12, "b = {b}");
        assert_eq!(v.get(&id("C")), Some(0.0)); // sink
    }

    #[test]
    fn betweenness_on_path_and_star() {
        let net = net_from(&[("A", "B"), ("B", "C")]);
        let v = betweenness_centrality(&net);
        assert_eq!(v.get(&id("A")), Some(0.0));
        assert_eq!(v.get(&id("B")), Some(1.0));
        assert_eq!(v.get(&id("C")), Some(0.0));

        // Pairs A→D, A→E, B→D, B→E all route through C.
        let net = net_from(&[("A", "C"), ("B", "C"), ("C", "D"), ("C", "E")]);
        let v = betweenness_centrality(&net);
        assert_eq!(v.get(&id("C")), Some(4.0));
    }

    #[test]
    fn betweenness_splits_over_parallel_geodesics() {
        // Two geodesics A→C: via B1 and via B2, each carrying 1/2.
        let net = net_from(&[("A", "B1"), ("A", "B2"), ("B1", "C"), ("B2", "C")]);
        let v = betweenness_centrality(&net);
        assert!((v.get(&id("B1")).unwrap() - 0.5).abs() < 1e-12);
        assert!((v.get(&id("B2")).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pagerank_ring_is_all_ones() {
        for n in [2usize, 3, 7, 40] {
            let net = ring(n);
            let v = pagerank(&net, &PageRankParams::default()).unwrap();
            for &x in v.values() {
                assert!((x - 1.0).abs() < 1e-12, "ring {n}: {x}");
            }
            assert!(v.meta().unwrap().converged);
        }
    }

    #[test]
    fn pagerank_mutual_pair_is_symmetric() {
        let net = net_from(&[("A", "B"), ("B", "A")]);
        let v = pagerank(&net, &PageRankParams::default()).unwrap();
        assert!((v.get(&id("A")).unwrap() - 1.0).abs() < 1e-12);
        assert!((v.get(&id("B")).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pagerank_mass_is_conserved_with_dangling_nodes() {
        // D is dangling; mass must still sum to n.
        let net = net_from(&[("A", "B"), ("B", "C"), ("C", "A"), ("A", "D")]);
        let v = pagerank(&net, &PageRankParams::default()).unwrap();
        let total: f64 = v.values().iter().sum();
        assert!((total - net.node_count() as f64).abs() < 1e-10, "total {total}");
    }

    #[test]
    fn pagerank_rejects_empty_network_and_bad_damping() {
        let empty = NetworkBuilder::new().build();
        assert!(matches!(
            pagerank(&empty, &PageRankParams::default()),
            Err(CentralityError::EmptyNetwork)
        ));
        let net = ring(3);
        let bad = PageRankParams { damping: 1.0, ..Default::default() };
        assert!(matches!(pagerank(&net, &bad), Err(CentralityError::InvalidParams(_))));
    }

    #[test]
    fn pagerank_residual_contracts_on_strongly_connected_graph() {
        let net = net_from(&[
            ("A", "B"),
            ("B", "C"),
            ("C", "A"),
            ("A", "C"),
            ("C", "D"),
            ("D", "A"),
        ]);
        // Replay the iteration on a loose tolerance and watch the residuals.
        let mut residuals = Vec::new();
        let mut prev = None;
        for max_iter in 1..=12 {
            let params = PageRankParams { max_iterations: max_iter, tolerance: 0.0, ..Default::default() };
            let v = pagerank(&net, &params).unwrap();
            let meta = v.meta().unwrap();
            residuals.push(meta.residual);
            if let Some(p) = prev {
                assert!(meta.residual <= p + 1e-15, "residuals {residuals:?}");
            }
            prev = Some(meta.residual);
        }
    }

    #[test]
    fn scale10_uniform_and_endpoints() {
        let net = ring(4);
        let raw = pagerank(&net, &PageRankParams::default()).unwrap();
        let scaled = pagerank_scale10(&raw);
        assert!(scaled.values().iter().all(|&v| v == 10.0));

        let net = net_from(&[("A", "B"), ("C", "B"), ("D", "B"), ("B", "A")]);
        let raw = pagerank(&net, &PageRankParams::default()).unwrap();
        let scaled = pagerank_scale10(&raw);
        let min_ix = raw
            .values()
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let max_ix = raw
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(scaled.values()[min_ix], 0.0);
        assert_eq!(scaled.values()[max_ix], 10.0);
        assert!(scaled.values().iter().all(|&v| (0.0..=10.0).contains(&v) && v.fract() == 0.0));
    }

    #[test]
    fn measures_are_permutation_equivariant() {
        let edges = [("A", "B"), ("B", "C"), ("C", "A"), ("A", "C"), ("D", "A"), ("C", "D")];
        let permuted = [("C", "D"), ("D", "A"), ("A", "C"), ("C", "A"), ("B", "C"), ("A", "B")];
        let net1 = net_from(&edges);
        let net2 = net_from(&permuted);
        let params = PageRankParams::default();
        let b1 = CentralityBundle::compute(&net1, &params).unwrap();
        let b2 = CentralityBundle::compute(&net2, &params).unwrap();
        for name in ["A", "B", "C", "D"] {
            let key = id(name);
            for (v1, v2) in [
                (&b1.in_degree, &b2.in_degree),
                (&b1.closeness, &b2.closeness),
                (&b1.betweenness, &b2.betweenness),
                (&b1.pagerank_raw, &b2.pagerank_raw),
            ] {
                let a = v1.get(&key).unwrap();
                let b = v2.get(&key).unwrap();
                assert!((a - b).abs() < 1e-12, "{name}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn ring_betweenness_is_equal_for_all_nodes() {
        let net = ring(6);
        let v = betweenness_centrality(&net);
        let first = v.values()[0];
        assert!(v.values().iter().all(|&x| (x - first).abs() < 1e-12));
    }

    #[test]
    fn csv_export_shape() {
        let net = ring(3);
        let bundle = CentralityBundle::compute(&net, &PageRankParams::default()).unwrap();
        let mut buf = Vec::new();
        write_centrality_csv(&bundle, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "blog_id,in_degree,out_degree,closeness,betweenness,pagerank_raw,pagerank_0_10"
        );
        let first = lines.next().unwrap();
        assert!(first.contains("1.000000000"), "{first}");
    }
}
