//! Multi-level modularity optimization and the recursive, filtered
//! subgraph extraction that carves size-bounded, non-star training graphs
//! out of large graphs.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::graph::{Graph, Subgraph};
use crate::metrics::betweenness;
use crate::util::{derive_seed, seeded_rng};

#[derive(Debug, Error)]
pub enum CommunityError {
    #[error("partition assigns {assigned} nodes but the graph has {nodes}")]
    PartitionSize { assigned: usize, nodes: usize },
    #[error("invalid bounds: require 2 <= n_min < n_max, got ({n_min}, {n_max})")]
    InvalidBounds { n_min: usize, n_max: usize },
}

/// Node-to-community assignment with its modularity score.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityPartition {
    /// Community id per node, dense ids starting at 0.
    pub assignment: Vec<usize>,
    pub modularity: f64,
}

/// Modularity Q of a partition: per community, the intra-community edge
/// fraction minus the squared fraction of incident edge ends, summed.
/// An edgeless graph scores 0.
pub fn modularity(g: &Graph, assignment: &[usize]) -> Result<f64, CommunityError> {
    if assignment.len() != g.node_count() {
        return Err(CommunityError::PartitionSize {
            assigned: assignment.len(),
            nodes: g.node_count(),
        });
    }
    let m = g.edge_count() as f64;
    if m == 0.0 {
        return Ok(0.0);
    }
    let n_comms = assignment.iter().copied().max().map_or(0, |c| c + 1);
    let mut internal = vec![0.0_f64; n_comms];
    let mut incident = vec![0.0_f64; n_comms];
    for (u, v) in g.edges() {
        if assignment[u] == assignment[v] {
            internal[assignment[u]] += 1.0;
        }
    }
    for (node, &c) in assignment.iter().enumerate() {
        incident[c] += g.degree(node) as f64;
    }
    let q = (0..n_comms)
        .map(|c| internal[c] / m - (incident[c] / (2.0 * m)).powi(2))
        .sum();
    Ok(q)
}

/// Working graph for the multi-level passes: aggregation introduces
/// integer edge weights and self-loops, represented here as floats.
struct LevelGraph {
    n: usize,
    adj: Vec<Vec<(usize, f64)>>,
    self_weight: Vec<f64>,
    /// Total edge weight (equals |E| of the original graph at every level).
    m: f64,
    /// Per node: sum of incident weights, self-loops counted twice.
    weighted_degree: Vec<f64>,
}

impl LevelGraph {
    fn from_graph(g: &Graph) -> Self {
        let n = g.node_count();
        let mut adj = vec![Vec::new(); n];
        for (u, v) in g.edges() {
            adj[u].push((v, 1.0));
            adj[v].push((u, 1.0));
        }
        let weighted_degree = (0..n).map(|i| g.degree(i) as f64).collect();
        LevelGraph {
            n,
            adj,
            self_weight: vec![0.0; n],
            m: g.edge_count() as f64,
            weighted_degree,
        }
    }

    /// Modularity of `assignment` over this level graph.
    fn modularity(&self, assignment: &[usize]) -> f64 {
        if self.m == 0.0 {
            return 0.0;
        }
        let n_comms = assignment.iter().copied().max().map_or(0, |c| c + 1);
        let mut internal = vec![0.0_f64; n_comms];
        let mut incident = vec![0.0_f64; n_comms];
        for u in 0..self.n {
            for &(v, w) in &self.adj[u] {
                if u < v && assignment[u] == assignment[v] {
                    internal[assignment[u]] += w;
                }
            }
            internal[assignment[u]] += self.self_weight[u];
            incident[assignment[u]] += self.weighted_degree[u];
        }
        (0..n_comms)
            .map(|c| internal[c] / self.m - (incident[c] / (2.0 * self.m)).powi(2))
            .sum()
    }

    /// Collapse communities into single nodes. `assignment` must use dense
    /// community ids.
    fn aggregate(&self, assignment: &[usize], n_comms: usize) -> LevelGraph {
        let mut self_weight = vec![0.0_f64; n_comms];
        let mut weights: Vec<HashMap<usize, f64>> = vec![HashMap::new(); n_comms];
        for u in 0..self.n {
            let cu = assignment[u];
            self_weight[cu] += self.self_weight[u];
            for &(v, w) in &self.adj[u] {
                if u < v {
                    let cv = assignment[v];
                    if cu == cv {
                        self_weight[cu] += w;
                    } else {
                        *weights[cu].entry(cv).or_insert(0.0) += w;
                        *weights[cv].entry(cu).or_insert(0.0) += w;
                    }
                }
            }
        }
        let adj: Vec<Vec<(usize, f64)>> = weights
            .into_iter()
            .map(|w| {
                let mut entries: Vec<(usize, f64)> = w.into_iter().collect();
                entries.sort_unstable_by_key(|&(v, _)| v);
                entries
            })
            .collect();
        let weighted_degree = (0..n_comms)
            .map(|i| adj[i].iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * self_weight[i])
            .collect();
        LevelGraph {
            n: n_comms,
            adj,
            self_weight,
            m: self.m,
            weighted_degree,
        }
    }
}

/// One local-move phase: nodes start in singleton communities and are
/// relocated to the neighboring community with the maximum positive
/// modularity gain until a full pass makes no move. Visit order is a fresh
/// seeded permutation per pass; ties keep the lowest community id.
fn local_move_phase(lg: &LevelGraph, seed: u64) -> (Vec<usize>, bool) {
    let mut comm: Vec<usize> = (0..lg.n).collect();
    let mut comm_degree: Vec<f64> = lg.weighted_degree.clone();
    let mut rng = seeded_rng(seed);
    let mut moved_any = false;
    let mut order: Vec<usize> = (0..lg.n).collect();
    let mut neighbor_weight: HashMap<usize, f64> = HashMap::new();
    loop {
        let mut moved_this_pass = false;
        order.shuffle(&mut rng);
        for &node in &order {
            if lg.adj[node].is_empty() {
                continue;
            }
            neighbor_weight.clear();
            for &(v, w) in &lg.adj[node] {
                *neighbor_weight.entry(comm[v]).or_insert(0.0) += w;
            }
            let current = comm[node];
            let d_i = lg.weighted_degree[node];
            comm_degree[current] -= d_i;
            let w_current = neighbor_weight.get(&current).copied().unwrap_or(0.0);
            let removal = -w_current / lg.m + d_i * comm_degree[current] / (2.0 * lg.m * lg.m);

            let mut best_comm = current;
            let mut best_gain = 0.0_f64;
            for (&cand, &w_cand) in &neighbor_weight {
                if cand == current {
                    continue;
                }
                let addition = w_cand / lg.m - d_i * comm_degree[cand] / (2.0 * lg.m * lg.m);
                let gain = removal + addition;
                if gain > best_gain || (gain == best_gain && best_comm != current && cand < best_comm)
                {
                    best_gain = gain;
                    best_comm = cand;
                }
            }
            comm_degree[best_comm] += d_i;
            if best_comm != current {
                comm[node] = best_comm;
                moved_this_pass = true;
                moved_any = true;
            }
        }
        if !moved_this_pass {
            break;
        }
    }
    (comm, moved_any)
}

/// Renumber arbitrary community labels to dense ids ordered by smallest
/// member index; returns the dense assignment and the community count.
fn densify(assignment: &[usize]) -> (Vec<usize>, usize) {
    let mut first_member: Vec<(usize, usize)> = Vec::new(); // (label, first index)
    let mut seen: HashMap<usize, usize> = HashMap::new();
    for (i, &label) in assignment.iter().enumerate() {
        seen.entry(label).or_insert_with(|| {
            first_member.push((label, i));
            first_member.len() - 1
        });
    }
    first_member.sort_unstable_by_key(|&(_, first)| first);
    let rank: HashMap<usize, usize> = first_member
        .iter()
        .enumerate()
        .map(|(rank, &(label, _))| (label, rank))
        .collect();
    let dense = assignment.iter().map(|l| rank[l]).collect();
    let count = first_member.len();
    (dense, count)
}

/// Result of the full multi-level pass on one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct MultilevelOutcome {
    pub partition: CommunityPartition,
    /// Modularity of the composed partition after each completed level;
    /// non-decreasing by construction.
    pub q_history: Vec<f64>,
}

/// Iterated local moves plus community aggregation until no further
/// modularity improvement, reported as a partition of the input graph.
pub fn multilevel_outcome(g: &Graph, seed: u64) -> MultilevelOutcome {
    let n = g.node_count();
    let mut membership: Vec<usize> = (0..n).collect();
    let mut lg = LevelGraph::from_graph(g);
    let mut q_history = Vec::new();
    let mut level = 0u64;
    loop {
        let (assignment, moved) = local_move_phase(&lg, derive_seed(seed, level));
        if !moved {
            break;
        }
        let (dense, n_comms) = densify(&assignment);
        for slot in membership.iter_mut() {
            *slot = dense[*slot];
        }
        lg = lg.aggregate(&dense, n_comms);
        q_history.push(lg.modularity(&(0..n_comms).collect::<Vec<_>>()));
        level += 1;
    }
    let (assignment, _) = densify(&membership);
    let q = modularity(g, &assignment).expect("assignment covers all nodes");
    MultilevelOutcome {
        partition: CommunityPartition {
            assignment,
            modularity: q,
        },
        q_history,
    }
}

/// Node-induced subgraphs of the communities found by
/// [`multilevel_outcome`], ordered by smallest original node. A singleton
/// list means the pass could not split the graph.
pub fn multilevel(g: &Graph, seed: u64) -> Vec<Subgraph> {
    let outcome = multilevel_outcome(g, seed);
    let n_comms = outcome
        .partition
        .assignment
        .iter()
        .copied()
        .max()
        .map_or(0, |c| c + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_comms];
    for (node, &c) in outcome.partition.assignment.iter().enumerate() {
        members[c].push(node);
    }
    members.iter().map(|nodes| g.induced(nodes)).collect()
}

/// True iff at most one node has positive betweenness: a single hub (or a
/// graph, like a complete one, with no intermediary at all).
pub fn is_single_star(g: &Graph) -> bool {
    betweenness(g).values.iter().filter(|&&b| b > 0.0).count() <= 1
}

/// Bounds and seed for the recursive extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrmConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub rng_seed: u64,
}

impl FrmConfig {
    pub fn validate(&self) -> Result<(), CommunityError> {
        if self.n_min < 2 || self.n_min >= self.n_max {
            return Err(CommunityError::InvalidBounds {
                n_min: self.n_min,
                n_max: self.n_max,
            });
        }
        Ok(())
    }
}

/// An accepted training subgraph with the recursion path that produced it
/// (root is `r`; `r.2.0` is child 0 of child 2 of the root).
#[derive(Debug, Clone, PartialEq)]
pub struct FrmSubgraph {
    pub graph: Graph,
    pub recursion_path: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrmStats {
    pub processed: usize,
    pub accepted: usize,
    pub discarded_small: usize,
    pub discarded_star: usize,
    pub unsplittable: usize,
    pub max_depth: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrmOutcome {
    pub subgraphs: Vec<FrmSubgraph>,
    pub stats: FrmStats,
}

/// Recursive extraction: graphs larger than `n_max` are split with the
/// multi-level pass and their communities re-queued; graphs the pass
/// cannot split are dropped; remaining graphs are kept when their node
/// count lies in `(n_min, n_max]` and they are not a single star.
///
/// Output is canonicalized by node count, then lexicographic edge list, so
/// the result does not depend on processing order.
pub fn frm_extract_outcome(g: &Graph, cfg: &FrmConfig) -> Result<FrmOutcome, CommunityError> {
    cfg.validate()?;
    struct Entry {
        graph: Graph,
        seed: u64,
        depth: usize,
        path: String,
    }
    let mut stack = vec![Entry {
        graph: g.clone(),
        seed: cfg.rng_seed,
        depth: 0,
        path: "r".to_string(),
    }];
    let mut accepted: Vec<FrmSubgraph> = Vec::new();
    let mut stats = FrmStats::default();
    while let Some(entry) = stack.pop() {
        stats.processed += 1;
        stats.max_depth = stats.max_depth.max(entry.depth);
        let n = entry.graph.node_count();
        if n > cfg.n_max {
            let clusters = multilevel(&entry.graph, derive_seed(entry.seed, 0));
            if clusters.len() > 1 {
                for (i, cluster) in clusters.into_iter().enumerate() {
                    stack.push(Entry {
                        graph: cluster.graph,
                        seed: derive_seed(entry.seed, 1 + i as u64),
                        depth: entry.depth + 1,
                        path: format!("{}.{}", entry.path, i),
                    });
                }
            } else {
                stats.unsplittable += 1;
            }
        } else if n <= cfg.n_min {
            stats.discarded_small += 1;
        } else if is_single_star(&entry.graph) {
            stats.discarded_star += 1;
        } else {
            stats.accepted += 1;
            accepted.push(FrmSubgraph {
                graph: entry.graph,
                recursion_path: entry.path,
            });
        }
    }
    accepted.sort_by(|a, b| {
        let key = |s: &FrmSubgraph| {
            (
                s.graph.node_count(),
                s.graph.edges().collect::<Vec<_>>(),
            )
        };
        key(a).cmp(&key(b))
    });
    Ok(FrmOutcome {
        subgraphs: accepted,
        stats,
    })
}

/// [`frm_extract_outcome`] reduced to the accepted graphs.
pub fn frm_extract(g: &Graph, cfg: &FrmConfig) -> Result<Vec<Graph>, CommunityError> {
    Ok(frm_extract_outcome(g, cfg)?
        .subgraphs
        .into_iter()
        .map(|s| s.graph)
        .collect())
}
