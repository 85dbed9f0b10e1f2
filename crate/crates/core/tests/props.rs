//! Property tests over randomly generated inputs.

use blognet::centrality::{betweenness_centrality, pagerank, PageRankParams};
use blognet::features::{classify_attractiveness, AttractivenessClass};
use blognet::graph::{delineate_snowball, parse_edge_list, BlogId, NetworkBuilder};
use proptest::prelude::*;

fn id(i: usize) -> BlogId {
    BlogId::new(format!("n{i}")).unwrap()
}

/// Arbitrary edge list over up to 10 nodes, self-loops and duplicates
/// allowed so the collapse rules get exercised.
fn edge_rows() -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0usize..10, 0usize..10), 1..60)
}

proptest! {
    #[test]
    fn degree_totals_equal_edge_count(rows in edge_rows()) {
        let mut b = NetworkBuilder::new();
        for (s, t) in &rows {
            b.add_edge(id(*s), id(*t));
        }
        let net = b.build();
        let degs = net.degree_sequences();
        let in_sum: usize = degs.iter().map(|d| d.in_degree).sum();
        let out_sum: usize = degs.iter().map(|d| d.out_degree).sum();
        prop_assert_eq!(in_sum, net.edge_count());
        prop_assert_eq!(out_sum, net.edge_count());
    }

    #[test]
    fn load_is_idempotent(rows in edge_rows()) {
        let mut text = String::from("source_id,target_id\n");
        for (s, t) in &rows {
            text.push_str(&format!("n{s},n{t}\n"));
        }
        let first = parse_edge_list(&text).unwrap();
        let second = parse_edge_list(&text).unwrap();
        prop_assert_eq!(first.network.ids(), second.network.ids());
        prop_assert_eq!(
            first.network.edges().collect::<Vec<_>>(),
            second.network.edges().collect::<Vec<_>>()
        );
        prop_assert_eq!(first.warnings.len(), second.warnings.len());
    }

    #[test]
    fn snowball_size_is_one_plus_out_degree(rows in edge_rows(), pick in 0usize..10) {
        let mut b = NetworkBuilder::new();
        for (s, t) in &rows {
            b.add_edge(id(*s), id(*t));
        }
        let net = b.build();
        if net.node_count() == 0 {
            return Ok(());
        }
        let seed_ix = pick % net.node_count();
        let seed = net.id(seed_ix).clone();
        let sub = delineate_snowball(&net, &seed).unwrap();
        prop_assert_eq!(sub.node_count(), 1 + net.out_neighbors(seed_ix).len());
    }

    #[test]
    fn classify_is_monotone_with_balanced_sizes(
        visits in prop::collection::vec(0u64..10_000, 5..200)
    ) {
        let labelled: Vec<(BlogId, u64)> = visits
            .iter()
            .enumerate()
            .map(|(i, &v)| (id(i), v))
            .collect();
        let classes = classify_attractiveness(&labelled).unwrap();
        let n = labelled.len();

        let mut counts = [0usize; 5];
        for (_, c) in &classes {
            counts[c.index()] += 1;
        }
        let lo = counts.iter().min().unwrap();
        let hi = counts.iter().max().unwrap();
        prop_assert!(hi - lo <= 1, "counts {:?} for n={}", counts, n);

        for (a, ca) in labelled.iter().zip(&classes) {
            for (b, cb) in labelled.iter().zip(&classes) {
                if a.1 < b.1 {
                    prop_assert!(ca.1 <= cb.1);
                }
            }
        }
    }

    #[test]
    fn pagerank_mass_is_node_count(rows in edge_rows()) {
        let mut b = NetworkBuilder::new();
        for (s, t) in &rows {
            b.add_edge(id(*s), id(*t));
        }
        let net = b.build();
        if net.node_count() == 0 {
            return Ok(());
        }
        let v = pagerank(&net, &PageRankParams::default()).unwrap();
        let mass: f64 = v.values().iter().sum();
        prop_assert!((mass - net.node_count() as f64).abs() < 1e-10);
        prop_assert!(v.values().iter().all(|&x| x > 0.0));
    }

    #[test]
    fn ring_betweenness_is_symmetric(n in 3usize..12) {
        let mut b = NetworkBuilder::new();
        for i in 0..n {
            b.add_edge(id(i), id((i + 1) % n));
        }
        let net = b.build();
        let v = betweenness_centrality(&net);
        let first = v.values()[0];
        for &x in v.values() {
            prop_assert!((x - first).abs() < 1e-12);
        }
    }

    #[test]
    fn stars_are_a_threshold_function(p in 0.0f64..1.0) {
        use blognet::mnlogit::Stars;
        let s = Stars::from_p(p);
        let expect = if p < 0.001 {
            Stars::Three
        } else if p < 0.01 {
            Stars::Two
        } else if p < 0.05 {
            Stars::One
        } else {
            Stars::None
        };
        prop_assert_eq!(s, expect);
    }
}

#[test]
fn classify_handles_mass_ties_deterministically() {
    // All equal visits: the id tie-break still fills balanced quintiles.
    let labelled: Vec<(BlogId, u64)> = (0..165).map(|i| (id(i), 7_000)).collect();
    let classes = classify_attractiveness(&labelled).unwrap();
    let mut counts = [0usize; 5];
    for (_, c) in &classes {
        counts[c.index()] += 1;
    }
    assert_eq!(counts, [33, 33, 33, 33, 33]);

    let again = classify_attractiveness(&labelled).unwrap();
    assert_eq!(classes, again);

    // Ids sort lexicographically, so n0 < n1 < n10 < n100 ... the first
    // third of that order lands in the bottom class.
    let mut sorted_ids: Vec<String> = (0..165).map(|i| format!("n{i}")).collect();
    sorted_ids.sort();
    let by_id: std::collections::HashMap<&str, AttractivenessClass> = classes
        .iter()
        .map(|(b, c)| (b.as_str(), *c))
        .collect();
    assert_eq!(by_id[sorted_ids[0].as_str()], AttractivenessClass::VeryLow);
    assert_eq!(by_id[sorted_ids[164].as_str()], AttractivenessClass::High);
}
