//! Node-level and graph-level metrics: degree, local/global clustering,
//! betweenness, assortativity, and the hub-prevalence ratio used for
//! scatter analyses.
//!
//! All functions are pure over an immutable [`Graph`] and safe to call
//! concurrently.

use std::collections::VecDeque;

use crate::graph::Graph;

/// Which per-node metric a [`NodeMetricVector`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeMetricKind {
    Degree,
    Clustering,
    Betweenness,
}

/// Per-node metric values aligned with node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeMetricVector {
    pub kind: NodeMetricKind,
    pub values: Vec<f64>,
}

/// A graph-level scalar that may be undefined (e.g. assortativity of a
/// regular graph). Undefined values propagate explicitly; downstream
/// distribution builders drop them with a counted warning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarMetric {
    Defined(f64),
    Undefined,
}

impl ScalarMetric {
    pub fn value(self) -> Option<f64> {
        match self {
            ScalarMetric::Defined(v) => Some(v),
            ScalarMetric::Undefined => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, ScalarMetric::Defined(_))
    }
}

/// Number of edges incident to each node.
pub fn degree_vector(g: &Graph) -> NodeMetricVector {
    NodeMetricVector {
        kind: NodeMetricKind::Degree,
        values: (0..g.node_count()).map(|i| g.degree(i) as f64).collect(),
    }
}

/// Edges among the neighbors of `i`.
fn edges_among_neighbors(g: &Graph, i: usize) -> usize {
    let nbrs = g.neighbors(i);
    let mut count = 0;
    for (a_pos, &a) in nbrs.iter().enumerate() {
        for &b in &nbrs[a_pos + 1..] {
            if g.has_edge(a, b) {
                count += 1;
            }
        }
    }
    count
}

/// Local clustering coefficient `2*l_i / (k_i * (k_i - 1))`, defined as 0
/// for nodes with degree <= 1.
pub fn local_clustering(g: &Graph) -> NodeMetricVector {
    let values = (0..g.node_count())
        .map(|i| {
            let k = g.degree(i);
            if k <= 1 {
                0.0
            } else {
                2.0 * edges_among_neighbors(g, i) as f64 / (k * (k - 1)) as f64
            }
        })
        .collect();
    NodeMetricVector {
        kind: NodeMetricKind::Clustering,
        values,
    }
}

/// Global clustering: closed connected triples over all connected triples.
/// Every triangle closes three triples, so a lone triangle scores 1.
/// Undefined when the graph has no connected triple.
pub fn global_clustering(g: &Graph) -> ScalarMetric {
    let mut closed: u64 = 0;
    let mut triples: u64 = 0;
    for i in 0..g.node_count() {
        let k = g.degree(i) as u64;
        triples += k * k.saturating_sub(1) / 2;
        closed += edges_among_neighbors(g, i) as u64;
    }
    if triples == 0 {
        ScalarMetric::Undefined
    } else {
        ScalarMetric::Defined(closed as f64 / triples as f64)
    }
}

/// Exact betweenness centrality via single-source shortest-path dependency
/// accumulation, normalized by `(N-1)(N-2)/2` so values lie in `[0, 1]`.
/// Graphs with fewer than 3 nodes get an all-zero vector.
pub fn betweenness(g: &Graph) -> NodeMetricVector {
    let n = g.node_count();
    let mut centrality = vec![0.0_f64; n];
    if n >= 3 {
        let mut sigma = vec![0.0_f64; n];
        let mut dist = vec![-1_i64; n];
        let mut delta = vec![0.0_f64; n];
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut stack: Vec<usize> = Vec::with_capacity(n);
        let mut queue: VecDeque<usize> = VecDeque::with_capacity(n);
        for s in 0..n {
            sigma.fill(0.0);
            dist.fill(-1);
            delta.fill(0.0);
            for p in preds.iter_mut() {
                p.clear();
            }
            stack.clear();
            queue.clear();

            sigma[s] = 1.0;
            dist[s] = 0;
            queue.push_back(s);
            while let Some(v) = queue.pop_front() {
                stack.push(v);
                for &w in g.neighbors(v) {
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
            while let Some(w) = stack.pop() {
                for &v in &preds[w] {
                    delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
                }
                if w != s {
                    centrality[w] += delta[w];
                }
            }
        }
        // The accumulation visits each unordered pair from both endpoints,
        // so dividing by (N-1)(N-2) equals the (N-1)(N-2)/2 normalization.
        let norm = ((n - 1) * (n - 2)) as f64;
        for c in centrality.iter_mut() {
            *c /= norm;
        }
    }
    NodeMetricVector {
        kind: NodeMetricKind::Betweenness,
        values: centrality,
    }
}

/// Ratio between the maximum and the average betweenness; a proxy for hub
/// prevalence. Undefined when every node has zero betweenness.
pub fn betweenness_ratio(g: &Graph) -> ScalarMetric {
    let b = betweenness(g).values;
    if b.is_empty() {
        return ScalarMetric::Undefined;
    }
    let mean = b.iter().sum::<f64>() / b.len() as f64;
    if mean <= 0.0 {
        return ScalarMetric::Undefined;
    }
    let max = b.iter().cloned().fold(f64::MIN, f64::max);
    ScalarMetric::Defined(max / mean)
}

/// Degree assortativity: the Pearson correlation of endpoint degrees over
/// both orientations of every edge. Undefined on an empty edge set or when
/// the endpoint-degree variance is zero (regular graphs).
///
/// Sums are integers, so they are accumulated exactly in `i128`; a perfect
/// star comes out as exactly -1.
pub fn assortativity(g: &Graph) -> ScalarMetric {
    if g.edge_count() == 0 {
        return ScalarMetric::Undefined;
    }
    let deg: Vec<i128> = (0..g.node_count()).map(|i| g.degree(i) as i128).collect();
    let mut s_x: i128 = 0; // sum of source degrees over directed pairs
    let mut s_xx: i128 = 0; // sum of squared source degrees
    let mut s_xy: i128 = 0; // sum of source*target degree products
    for (u, v) in g.edges() {
        let (du, dv) = (deg[u], deg[v]);
        s_x += du + dv;
        s_xx += du * du + dv * dv;
        s_xy += 2 * du * dv;
    }
    let count = 2 * g.edge_count() as i128;
    let num = count * s_xy - s_x * s_x;
    let den = count * s_xx - s_x * s_x;
    if den == 0 {
        ScalarMetric::Undefined
    } else {
        ScalarMetric::Defined(num as f64 / den as f64)
    }
}

/// `2|E| / N`; 0 for edgeless graphs, undefined for the empty graph.
pub fn average_degree(g: &Graph) -> ScalarMetric {
    if g.node_count() == 0 {
        ScalarMetric::Undefined
    } else {
        ScalarMetric::Defined(2.0 * g.edge_count() as f64 / g.node_count() as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn triangle() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn star(n: usize) -> Graph {
        Graph::from_edges(n, (1..n).map(|i| (0, i))).unwrap()
    }

    fn path(n: usize) -> Graph {
        Graph::from_edges(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    fn cycle(n: usize) -> Graph {
        Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    #[test]
    fn degree_examples() {
        assert_eq!(degree_vector(&triangle()).values, vec![2.0, 2.0, 2.0]);
        assert_eq!(degree_vector(&star(5)).values, vec![4.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(degree_vector(&path(4)).values, vec![1.0, 2.0, 2.0, 1.0]);
    }

    #[test]
    fn degree_sum_is_twice_edge_count() {
        let g = Graph::from_edges(6, [(0, 1), (0, 2), (3, 4), (2, 5), (1, 2)]).unwrap();
        let sum: f64 = degree_vector(&g).values.iter().sum();
        assert_eq!(sum, 2.0 * g.edge_count() as f64);
    }

    #[test]
    fn local_clustering_examples() {
        assert_eq!(local_clustering(&triangle()).values, vec![1.0, 1.0, 1.0]);
        assert_eq!(local_clustering(&path(3)).values, vec![0.0, 0.0, 0.0]);
        // K4 minus edge (2,3), by neighbor-pair enumeration: node 0 sees
        // pairs (1,2),(1,3),(2,3) of which (1,2),(1,3) are edges -> 2/3;
        // node 2 sees the single pair (0,1), an edge -> 1.
        let g = Graph::from_edges(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        let c = local_clustering(&g).values;
        assert!((c[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((c[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(c[2], 1.0);
        assert_eq!(c[3], 1.0);
    }

    #[test]
    fn global_clustering_examples() {
        assert_eq!(global_clustering(&triangle()), ScalarMetric::Defined(1.0));
        assert_eq!(global_clustering(&star(5)), ScalarMetric::Defined(0.0));
        let two_edges = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(global_clustering(&two_edges), ScalarMetric::Undefined);
    }

    #[test]
    fn betweenness_examples() {
        let b = betweenness(&star(5)).values;
        assert!((b[0] - 1.0).abs() < 1e-12);
        for leaf in 1..5 {
            assert_eq!(b[leaf], 0.0);
        }

        let b = betweenness(&path(3)).values;
        assert!((b[1] - 1.0).abs() < 1e-12);
        assert_eq!(b[0], 0.0);
        assert_eq!(b[2], 0.0);

        // 4-cycle: each node sits on one of the two geodesics of the single
        // opposite pair, so 0.5 / ((4-1)(4-2)/2) = 1/6.
        for v in betweenness(&cycle(4)).values {
            assert!((v - 1.0 / 6.0).abs() < 1e-12);
        }
    }

    #[test]
    fn betweenness_small_graphs_are_zero() {
        assert_eq!(betweenness(&path(2)).values, vec![0.0, 0.0]);
        assert!(betweenness(&Graph::new(0)).values.is_empty());
    }

    #[test]
    fn betweenness_ratio_examples() {
        assert_eq!(betweenness_ratio(&star(5)), ScalarMetric::Defined(5.0));
        let r = betweenness_ratio(&cycle(5)).value().unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        assert_eq!(betweenness_ratio(&triangle()), ScalarMetric::Undefined);
    }

    #[test]
    fn assortativity_examples() {
        for n in [4, 6, 9] {
            assert_eq!(assortativity(&star(n)), ScalarMetric::Defined(-1.0));
        }
        assert_eq!(assortativity(&cycle(6)), ScalarMetric::Undefined);
        assert_eq!(assortativity(&triangle()), ScalarMetric::Undefined);
        assert_eq!(assortativity(&Graph::new(3)), ScalarMetric::Undefined);
        // path of 4: direct Pearson over the 6 directed endpoint pairs
        assert_eq!(assortativity(&path(4)), ScalarMetric::Defined(-0.5));
    }

    #[test]
    fn average_degree_examples() {
        assert_eq!(average_degree(&triangle()), ScalarMetric::Defined(2.0));
        assert_eq!(average_degree(&star(5)), ScalarMetric::Defined(1.6));
        assert_eq!(average_degree(&Graph::new(3)), ScalarMetric::Defined(0.0));
        assert_eq!(average_degree(&Graph::new(0)), ScalarMetric::Undefined);
    }

    mod permutation_invariance {
        use super::*;
        use proptest::prelude::*;

        /// Random simple graph on up to 9 nodes from an edge bitmask.
        fn arb_graph() -> impl Strategy<Value = Graph> {
            (2usize..9, any::<u64>()).prop_map(|(n, mask)| {
                let mut edges = Vec::new();
                let mut bit = 0;
                for u in 0..n {
                    for v in (u + 1)..n {
                        if mask >> (bit % 64) & 1 == 1 {
                            edges.push((u, v));
                        }
                        bit += 1;
                    }
                }
                Graph::from_edges(n, edges).unwrap()
            })
        }

        fn arb_graph_and_perm() -> impl Strategy<Value = (Graph, Vec<usize>)> {
            (arb_graph(), any::<u64>()).prop_map(|(g, seed)| {
                let n = g.node_count();
                let mut rng = crate::util::seeded_rng(seed);
                let mut p: Vec<usize> = (0..n).collect();
                use rand::Rng;
                for i in (1..n).rev() {
                    p.swap(i, rng.gen_range(0..=i));
                }
                (g, p)
            })
        }

        proptest! {
            #[test]
            fn vectors_permute_with_the_graph((g, perm) in arb_graph_and_perm()) {
                let h = g.relabeled(&perm);
                for f in [degree_vector, local_clustering, betweenness] {
                    let orig = f(&g).values;
                    let rel = f(&h).values;
                    for i in 0..g.node_count() {
                        prop_assert!((orig[i] - rel[perm[i]]).abs() < 1e-12);
                    }
                }
                prop_assert_eq!(assortativity(&g), assortativity(&h));
                prop_assert_eq!(global_clustering(&g), global_clustering(&h));
            }

            #[test]
            fn degree_sum_property(g in arb_graph()) {
                let sum: f64 = degree_vector(&g).values.iter().sum();
                prop_assert_eq!(sum, 2.0 * g.edge_count() as f64);
            }

            #[test]
            fn metric_ranges(g in arb_graph()) {
                for v in local_clustering(&g).values {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                for v in betweenness(&g).values {
                    prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
                }
                if let ScalarMetric::Defined(r) = assortativity(&g) {
                    prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
                }
                if let ScalarMetric::Defined(c) = global_clustering(&g) {
                    prop_assert!((0.0..=1.0).contains(&c));
                }
                if let ScalarMetric::Defined(r) = betweenness_ratio(&g) {
                    prop_assert!(r >= 1.0 - 1e-12);
                }
            }
        }
    }
}
