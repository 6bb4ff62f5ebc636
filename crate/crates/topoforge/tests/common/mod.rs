//! Shared test fixtures and independent oracles.
//!
//! Every oracle here recomputes its quantity from the definition by a
//! route different from the library implementation (path enumeration,
//! triple enumeration, naive statistics), so agreement is meaningful.

#![allow(dead_code)]

use std::collections::VecDeque;

use rand::Rng;
use topoforge::graph::Graph;
use topoforge::util::seeded_rng;

/// Per-source BFS distances and shortest-path counts.
fn bfs_counts(g: &Graph, source: usize) -> (Vec<i64>, Vec<f64>) {
    let n = g.node_count();
    let mut dist = vec![-1_i64; n];
    let mut sigma = vec![0.0_f64; n];
    dist[source] = 0;
    sigma[source] = 1.0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        for &v in g.neighbors(u) {
            if dist[v] < 0 {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
            if dist[v] == dist[u] + 1 {
                sigma[v] += sigma[u];
            }
        }
    }
    (dist, sigma)
}

/// Betweenness by explicit enumeration over all pairs: node `i` lies on a
/// shortest `p`-`q` path iff d(p,i) + d(i,q) = d(p,q), contributing
/// `sigma(p,i) * sigma(i,q) / sigma(p,q)`. Normalized by (N-1)(N-2)/2.
pub fn brute_betweenness(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    let mut values = vec![0.0_f64; n];
    if n < 3 {
        return values;
    }
    let per_source: Vec<(Vec<i64>, Vec<f64>)> = (0..n).map(|s| bfs_counts(g, s)).collect();
    for p in 0..n {
        for q in (p + 1)..n {
            let (dist_p, sigma_p) = &per_source[p];
            let (dist_q, sigma_q) = &per_source[q];
            if dist_p[q] < 0 {
                continue; // unreachable pair
            }
            let total = sigma_p[q];
            for i in 0..n {
                if i == p || i == q || dist_p[i] < 0 || dist_q[i] < 0 {
                    continue;
                }
                if dist_p[i] + dist_q[i] == dist_p[q] {
                    values[i] += sigma_p[i] * sigma_q[i] / total;
                }
            }
        }
    }
    let norm = ((n - 1) * (n - 2)) as f64 / 2.0;
    for v in values.iter_mut() {
        *v /= norm;
    }
    values
}

/// Local clustering by scanning all node pairs around each center.
pub fn brute_local_clustering(g: &Graph) -> Vec<f64> {
    let n = g.node_count();
    (0..n)
        .map(|i| {
            let k = g.degree(i);
            if k <= 1 {
                return 0.0;
            }
            let mut links = 0usize;
            for a in 0..n {
                for b in (a + 1)..n {
                    if a != i && b != i && g.has_edge(i, a) && g.has_edge(i, b) && g.has_edge(a, b)
                    {
                        links += 1;
                    }
                }
            }
            2.0 * links as f64 / (k * (k - 1)) as f64
        })
        .collect()
}

/// Global clustering by enumerating all node triples: triples joined by
/// two edges are open, by three edges closed (each closed triple counts
/// three times on both sides of the ratio).
pub fn brute_global_clustering(g: &Graph) -> Option<f64> {
    let n = g.node_count();
    let mut open = 0u64;
    let mut closed = 0u64;
    for a in 0..n {
        for b in (a + 1)..n {
            for c in (b + 1)..n {
                let edges = usize::from(g.has_edge(a, b))
                    + usize::from(g.has_edge(a, c))
                    + usize::from(g.has_edge(b, c));
                match edges {
                    2 => open += 1,
                    3 => closed += 1,
                    _ => {}
                }
            }
        }
    }
    let denom = open + 3 * closed;
    if denom == 0 {
        None
    } else {
        Some(3.0 * closed as f64 / denom as f64)
    }
}

/// Assortativity as a textbook Pearson correlation over the directed
/// endpoint-degree pairs, in plain floating point.
pub fn brute_assortativity(g: &Graph) -> Option<f64> {
    if g.edge_count() == 0 {
        return None;
    }
    let mut xs: Vec<f64> = Vec::with_capacity(2 * g.edge_count());
    let mut ys: Vec<f64> = Vec::with_capacity(2 * g.edge_count());
    for (u, v) in g.edges() {
        let (du, dv) = (g.degree(u) as f64, g.degree(v) as f64);
        xs.push(du);
        ys.push(dv);
        xs.push(dv);
        ys.push(du);
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        cov += (x - mean_x) * (y - mean_y);
        var_x += (x - mean_x).powi(2);
        var_y += (y - mean_y).powi(2);
    }
    if var_x <= 0.0 || var_y <= 0.0 {
        return None;
    }
    Some(cov / (var_x.sqrt() * var_y.sqrt()))
}

/// Erdos-Renyi-style G(n, m): m distinct uniform edges.
pub fn random_gnm(n: usize, m: usize, seed: u64) -> Graph {
    let mut rng = seeded_rng(seed);
    let mut g = Graph::new(n);
    let mut placed = 0;
    let max_edges = n * (n - 1) / 2;
    let target = m.min(max_edges);
    while placed < target {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v && g.add_edge(u, v) {
            placed += 1;
        }
    }
    g
}

/// Uniform random graph over all edge subsets with inclusion probability p.
pub fn random_gnp(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = seeded_rng(seed);
    let mut g = Graph::new(n);
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen::<f64>() < p {
                g.add_edge(u, v);
            }
        }
    }
    g
}

/// Random connected graph: a uniform-attachment tree plus `extra` edges.
pub fn random_connected(n: usize, extra: usize, seed: u64) -> Graph {
    let mut rng = seeded_rng(seed);
    let mut g = Graph::new(n);
    for v in 1..n {
        let u = rng.gen_range(0..v);
        g.add_edge(u, v);
    }
    let mut added = 0;
    let mut tries = 0;
    while added < extra && tries < extra * 20 {
        tries += 1;
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v && g.add_edge(u, v) {
            added += 1;
        }
    }
    g
}

/// Least-squares slope of y over x.
pub fn regression_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in points {
        num += (x - mean_x) * (y - mean_y);
        den += (x - mean_x).powi(2);
    }
    num / den
}
