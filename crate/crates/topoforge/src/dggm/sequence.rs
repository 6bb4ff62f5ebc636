//! BFS node ordering and the bandwidth-bounded binary edge vectors the
//! model trains on.
//!
//! Under a BFS order, node `i`'s connections all fall inside a window of
//! the last `M` predecessors, so each node is encoded as a binary vector
//! over that window (oldest predecessor first). Encoding is lossless
//! exactly when the order's bandwidth is at most `M`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error("graph is disconnected; sequences require a connected graph")]
    Disconnected,
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("transient dimension must be >= 1")]
    ZeroWindow,
    #[error("row {row} has width {got}, expected {expected}")]
    BadRowWidth {
        row: usize,
        got: usize,
        expected: usize,
    },
}

/// BFS-ordered, window-bounded edge vectors for one graph.
///
/// `rows[r]` holds the bits for the node at order position `r + 1`: slot
/// `j` is its adjacency to the node at position `p - w + j`, where
/// `p = r + 1` and `w = min(p, m_dim)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeSequence {
    rows: Vec<Vec<u8>>,
    n_nodes: usize,
    m_dim: usize,
}

impl EdgeSequence {
    /// Expected row width at row index `r`.
    pub fn width_at(m_dim: usize, r: usize) -> usize {
        (r + 1).min(m_dim)
    }

    /// Wrap generated rows, validating widths and bit values.
    pub fn from_rows(rows: Vec<Vec<u8>>, m_dim: usize) -> Result<Self, SequenceError> {
        if m_dim == 0 {
            return Err(SequenceError::ZeroWindow);
        }
        for (r, row) in rows.iter().enumerate() {
            let expected = Self::width_at(m_dim, r);
            if row.len() != expected {
                return Err(SequenceError::BadRowWidth {
                    row: r,
                    got: row.len(),
                    expected,
                });
            }
            debug_assert!(row.iter().all(|&b| b <= 1));
        }
        let n_nodes = rows.len() + 1;
        Ok(EdgeSequence {
            rows,
            n_nodes,
            m_dim,
        })
    }

    pub fn rows(&self) -> &[Vec<u8>] {
        &self.rows
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn m_dim(&self) -> usize {
        self.m_dim
    }

    /// Total number of window slots across rows.
    pub fn slot_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Append an all-zero stop row (a phantom node with no connections);
    /// training on it teaches the model to emit a stop signal.
    pub fn with_stop_row(&self) -> EdgeSequence {
        let mut rows = self.rows.clone();
        rows.push(vec![0; Self::width_at(self.m_dim, rows.len())]);
        EdgeSequence {
            rows,
            n_nodes: self.n_nodes + 1,
            m_dim: self.m_dim,
        }
    }
}

/// BFS order from a uniformly random start node, visiting neighbors in
/// ascending original index. Fails on disconnected input.
pub fn bfs_order(g: &Graph, rng: &mut ChaCha8Rng) -> Result<Vec<usize>, SequenceError> {
    let n = g.node_count();
    if n == 0 {
        return Ok(Vec::new());
    }
    let start = rng.gen_range(0..n);
    bfs_order_from(g, start)
}

/// BFS order from a fixed start node.
pub fn bfs_order_from(g: &Graph, start: usize) -> Result<Vec<usize>, SequenceError> {
    let n = g.node_count();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::from([start]);
    seen[start] = true;
    while let Some(u) = queue.pop_front() {
        order.push(u);
        for &v in g.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    if order.len() != n {
        return Err(SequenceError::Disconnected);
    }
    Ok(order)
}

/// Bandwidth of `order`: the largest position gap across any edge, i.e.
/// the smallest window that loses nothing.
pub fn bfs_bandwidth(g: &Graph, order: &[usize]) -> usize {
    let mut pos = vec![0usize; g.node_count()];
    for (p, &node) in order.iter().enumerate() {
        pos[node] = p;
    }
    g.edges()
        .map(|(u, v)| pos[u].abs_diff(pos[v]))
        .max()
        .unwrap_or(0)
}

/// Encode `g` under `order` with window `m`. Edges whose position gap
/// exceeds `m` are dropped, so the encoding is lossy iff the order's
/// bandwidth exceeds `m`.
pub fn to_sequence(g: &Graph, order: &[usize], m: usize) -> Result<EdgeSequence, SequenceError> {
    if m == 0 {
        return Err(SequenceError::ZeroWindow);
    }
    assert_eq!(order.len(), g.node_count(), "order must cover all nodes");
    let n = g.node_count();
    let mut pos = vec![0usize; n];
    for (p, &node) in order.iter().enumerate() {
        pos[node] = p;
    }
    let mut rows: Vec<Vec<u8>> = (0..n.saturating_sub(1))
        .map(|r| vec![0u8; EdgeSequence::width_at(m, r)])
        .collect();
    for (u, v) in g.edges() {
        let (a, b) = (pos[u].min(pos[v]), pos[u].max(pos[v]));
        let gap = b - a;
        if gap <= m {
            let w = EdgeSequence::width_at(m, b - 1);
            rows[b - 1][w - gap] = 1;
        }
    }
    EdgeSequence::from_rows(rows, m)
}

/// Decode a sequence back into a graph over `n_nodes` nodes in order
/// positions. Inverse of [`to_sequence`] whenever the bandwidth fit.
pub fn sequence_to_graph(seq: &EdgeSequence) -> Graph {
    let mut g = Graph::new(seq.n_nodes());
    for (r, row) in seq.rows().iter().enumerate() {
        let p = r + 1;
        let w = row.len();
        for (j, &bit) in row.iter().enumerate() {
            if bit == 1 {
                g.add_edge(p, p - w + j);
            }
        }
    }
    g
}

/// Estimate the transient dimension: the given quantile (1.0 = max) of
/// observed BFS bandwidths over `trials_per_graph` random orders per
/// graph. Never below 1.
pub fn estimate_transient_dim(
    graphs: &[Graph],
    quantile: f64,
    trials_per_graph: usize,
    rng: &mut ChaCha8Rng,
) -> Result<usize, SequenceError> {
    if graphs.is_empty() {
        return Err(SequenceError::EmptyCorpus);
    }
    let mut bandwidths = Vec::with_capacity(graphs.len() * trials_per_graph);
    for g in graphs {
        for _ in 0..trials_per_graph.max(1) {
            let order = bfs_order(g, rng)?;
            bandwidths.push(bfs_bandwidth(g, &order));
        }
    }
    bandwidths.sort_unstable();
    let q = quantile.clamp(0.0, 1.0);
    let idx = ((q * bandwidths.len() as f64).ceil() as usize)
        .saturating_sub(1)
        .min(bandwidths.len() - 1);
    Ok(bandwidths[idx].max(1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::seeded_rng;

    fn path(n: usize) -> Graph {
        Graph::from_edges(n, (0..n - 1).map(|i| (i, i + 1))).unwrap()
    }

    fn triangle() -> Graph {
        Graph::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn bfs_from_path_end_is_sequential() {
        let order = bfs_order_from(&path(3), 0).unwrap();
        assert_eq!(order, vec![0, 1, 2]);
    }

    #[test]
    fn bfs_star_center_start_lists_leaves_ascending() {
        let star = Graph::from_edges(5, (1..5).map(|i| (0, i))).unwrap();
        let order = bfs_order_from(&star, 0).unwrap();
        assert_eq!(order, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn bfs_parents_precede_children() {
        let g = Graph::from_edges(7, [(0, 1), (0, 2), (1, 3), (2, 4), (3, 5), (4, 6), (5, 6)])
            .unwrap();
        for seed in 0..10 {
            let mut rng = seeded_rng(seed);
            let order = bfs_order(&g, &mut rng).unwrap();
            let mut pos = vec![0; 7];
            for (p, &v) in order.iter().enumerate() {
                pos[v] = p;
            }
            // each non-start node has a neighbor earlier in the order
            for (p, &v) in order.iter().enumerate().skip(1) {
                assert!(g.neighbors(v).iter().any(|&nb| pos[nb] < p));
            }
        }
    }

    #[test]
    fn bfs_rejects_disconnected() {
        let g = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert!(matches!(
            bfs_order_from(&g, 0),
            Err(SequenceError::Disconnected)
        ));
    }

    #[test]
    fn triangle_sequence_with_window_two() {
        let seq = to_sequence(&triangle(), &[0, 1, 2], 2).unwrap();
        assert_eq!(seq.rows(), &[vec![1], vec![1, 1]]);
    }

    #[test]
    fn path_sequence_has_one_bit_per_row() {
        let g = path(4);
        let seq = to_sequence(&g, &[0, 1, 2, 3], 2).unwrap();
        assert_eq!(seq.rows(), &[vec![1], vec![0, 1], vec![0, 1]]);
    }

    #[test]
    fn window_drops_exactly_out_of_band_edges() {
        // 5-node graph where edge (0, 3) has gap 3 in identity order
        let g = Graph::from_edges(5, [(0, 1), (1, 2), (2, 3), (0, 3), (3, 4)]).unwrap();
        let order = [0, 1, 2, 3, 4];
        let lossless = to_sequence(&g, &order, 3).unwrap();
        assert_eq!(sequence_to_graph(&lossless), g);

        let lossy = to_sequence(&g, &order, 2).unwrap();
        let back = sequence_to_graph(&lossy);
        assert_eq!(back.edge_count(), g.edge_count() - 1);
        assert!(!back.has_edge(0, 3));
        assert!(back.has_edge(2, 3));
    }

    #[test]
    fn round_trip_is_identity_when_bandwidth_fits() {
        for seed in 0..20u64 {
            let g = crate::baselines::ba_generate(
                12,
                &crate::baselines::BaselineConfig {
                    rng_seed: seed,
                    ..Default::default()
                },
            )
            .unwrap();
            let mut rng = seeded_rng(seed);
            let order = bfs_order(&g, &mut rng).unwrap();
            let bw = bfs_bandwidth(&g, &order);
            let seq = to_sequence(&g, &order, bw).unwrap();
            let mut relabel = vec![0usize; g.node_count()];
            for (p, &node) in order.iter().enumerate() {
                relabel[node] = p;
            }
            assert_eq!(sequence_to_graph(&seq), g.relabeled(&relabel));
            // and the sequence itself round-trips through the graph
            let again =
                to_sequence(&sequence_to_graph(&seq), &(0..12).collect::<Vec<_>>(), bw).unwrap();
            assert_eq!(again, seq);
        }
    }

    #[test]
    fn stop_row_appends_zeroes() {
        let seq = to_sequence(&triangle(), &[0, 1, 2], 2).unwrap();
        let stopped = seq.with_stop_row();
        assert_eq!(stopped.n_nodes(), 4);
        assert_eq!(stopped.rows().last().unwrap(), &vec![0, 0]);
    }

    #[test]
    fn transient_dim_examples() {
        let mut rng = seeded_rng(1);
        // two-node paths: every BFS order has bandwidth 1
        let tiny: Vec<Graph> = (0..4).map(|_| path(2)).collect();
        assert_eq!(estimate_transient_dim(&tiny, 1.0, 5, &mut rng).unwrap(), 1);

        // triangles always have bandwidth 2
        let tris: Vec<Graph> = (0..4).map(|_| triangle()).collect();
        assert_eq!(estimate_transient_dim(&tris, 1.0, 5, &mut rng).unwrap(), 2);

        // longer paths reach bandwidth 2 from interior start nodes
        let paths: Vec<Graph> = (0..4).map(|_| path(6)).collect();
        let m = estimate_transient_dim(&paths, 1.0, 20, &mut rng).unwrap();
        assert!(m == 1 || m == 2);

        // a mid-quantile lands between the extremes
        let mixed: Vec<Graph> = vec![path(2), triangle()];
        let q = estimate_transient_dim(&mixed, 0.5, 3, &mut rng).unwrap();
        assert!((1..=2).contains(&q));

        assert!(matches!(
            estimate_transient_dim(&[], 1.0, 3, &mut rng),
            Err(SequenceError::EmptyCorpus)
        ));
    }
}
