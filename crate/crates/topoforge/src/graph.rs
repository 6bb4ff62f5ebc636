//! Simple undirected graph with contiguous node indices, the data type
//! every pipeline stage exchanges.
//!
//! Invariants kept by construction: no self-edges, no duplicate edges,
//! every endpoint in range. Adjacency lists are sorted by neighbor id.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use thiserror::Error;

/// Opaque pass-through attributes (router provenance, geolocation, link IPs).
pub type AttrMap = BTreeMap<String, String>;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("self-edge ({0}, {0}) is not allowed")]
    SelfEdge(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("node index {index} out of range for {node_count} nodes")]
    IndexOutOfRange { index: usize, node_count: usize },
    #[error("edge list line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Simple undirected graph. Edges are unordered pairs `(u, v)` with
/// `u != v`; `(u, v)` and `(v, u)` are the same edge.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
    edge_count: usize,
    node_attrs: BTreeMap<usize, AttrMap>,
    edge_attrs: BTreeMap<(usize, usize), AttrMap>,
}

impl Graph {
    /// Edgeless graph with `node_count` nodes.
    pub fn new(node_count: usize) -> Self {
        Graph {
            adj: vec![Vec::new(); node_count],
            edge_count: 0,
            node_attrs: BTreeMap::new(),
            edge_attrs: BTreeMap::new(),
        }
    }

    /// Build from an edge list, rejecting self-edges, duplicates, and
    /// out-of-range endpoints.
    pub fn from_edges(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        let mut g = Graph::new(node_count);
        for (u, v) in edges {
            g.check_index(u)?;
            g.check_index(v)?;
            if u == v {
                return Err(GraphError::SelfEdge(u));
            }
            if !g.add_edge(u, v) {
                return Err(GraphError::DuplicateEdge(u.min(v), u.max(v)));
            }
        }
        Ok(g)
    }

    /// Build from raw edges, silently collapsing multi-edges and dropping
    /// self-edges; returns the graph plus the counts of each.
    pub fn from_edges_simplified(
        node_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<(Self, SimplifyCounts), GraphError> {
        let mut g = Graph::new(node_count);
        let mut counts = SimplifyCounts::default();
        for (u, v) in edges {
            g.check_index(u)?;
            g.check_index(v)?;
            if u == v {
                counts.self_edges += 1;
                continue;
            }
            if !g.add_edge(u, v) {
                counts.multi_edges += 1;
            }
        }
        Ok((g, counts))
    }

    fn check_index(&self, i: usize) -> Result<(), GraphError> {
        if i >= self.adj.len() {
            return Err(GraphError::IndexOutOfRange {
                index: i,
                node_count: self.adj.len(),
            });
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Insert edge `(u, v)`; returns false if it was already present.
    /// Panics on out-of-range or self edges (validated constructors and
    /// generators keep those out).
    pub fn add_edge(&mut self, u: usize, v: usize) -> bool {
        assert!(u != v, "self-edge ({u}, {u})");
        assert!(u < self.adj.len() && v < self.adj.len(), "endpoint out of range");
        match self.adj[u].binary_search(&v) {
            Ok(_) => false,
            Err(pos_u) => {
                self.adj[u].insert(pos_u, v);
                let pos_v = self.adj[v].binary_search(&u).unwrap_err();
                self.adj[v].insert(pos_v, u);
                self.edge_count += 1;
                true
            }
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.adj.len() && self.adj[u].binary_search(&v).is_ok()
    }

    /// Remove edge `(u, v)` and any attributes on it; returns false if the
    /// edge was not present.
    pub fn remove_edge(&mut self, u: usize, v: usize) -> bool {
        match self.adj[u].binary_search(&v) {
            Ok(pos_u) => {
                self.adj[u].remove(pos_u);
                let pos_v = self.adj[v].binary_search(&u).expect("symmetric adjacency");
                self.adj[v].remove(pos_v);
                self.edge_attrs.remove(&(u.min(v), u.max(v)));
                self.edge_count -= 1;
                true
            }
            Err(_) => false,
        }
    }

    /// Neighbors of `i`, ascending.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    /// All edges as `(u, v)` with `u < v`, ascending.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, nbrs)| nbrs.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    pub fn set_node_attr(&mut self, node: usize, key: &str, value: &str) {
        self.node_attrs
            .entry(node)
            .or_default()
            .insert(key.to_string(), value.to_string());
    }

    pub fn node_attrs(&self, node: usize) -> Option<&AttrMap> {
        self.node_attrs.get(&node)
    }

    pub fn set_edge_attr(&mut self, u: usize, v: usize, key: &str, value: &str) {
        let k = (u.min(v), u.max(v));
        self.edge_attrs
            .entry(k)
            .or_default()
            .insert(key.to_string(), value.to_string());
    }

    pub fn edge_attrs(&self, u: usize, v: usize) -> Option<&AttrMap> {
        self.edge_attrs.get(&(u.min(v), u.max(v)))
    }

    /// Relabel nodes: node `i` becomes `perm[i]`. `perm` must be a
    /// permutation of `0..node_count`.
    pub fn relabeled(&self, perm: &[usize]) -> Graph {
        assert_eq!(perm.len(), self.node_count());
        let mut g = Graph::new(self.node_count());
        for (u, v) in self.edges() {
            g.add_edge(perm[u], perm[v]);
        }
        for (&n, attrs) in &self.node_attrs {
            g.node_attrs.insert(perm[n], attrs.clone());
        }
        for (&(u, v), attrs) in &self.edge_attrs {
            let (a, b) = (perm[u].min(perm[v]), perm[u].max(perm[v]));
            g.edge_attrs.insert((a, b), attrs.clone());
        }
        g
    }

    /// Node-induced subgraph over `nodes` (deduplicated, sorted), with the
    /// mapping back to the original indices.
    pub fn induced(&self, nodes: &[usize]) -> Subgraph {
        let mut original: Vec<usize> = nodes.to_vec();
        original.sort_unstable();
        original.dedup();
        let mut to_new: BTreeMap<usize, usize> = BTreeMap::new();
        for (new, &old) in original.iter().enumerate() {
            to_new.insert(old, new);
        }
        let mut graph = Graph::new(original.len());
        for (new_u, &old_u) in original.iter().enumerate() {
            for &old_v in self.neighbors(old_u) {
                if old_v > old_u {
                    if let Some(&new_v) = to_new.get(&old_v) {
                        graph.add_edge(new_u, new_v);
                    }
                }
            }
            if let Some(attrs) = self.node_attrs.get(&old_u) {
                graph.node_attrs.insert(new_u, attrs.clone());
            }
        }
        Subgraph {
            graph,
            original_nodes: original,
        }
    }

    /// Maximal connected components, each reindexed to contiguous ids with
    /// the index-mapping record. Components are ordered by their smallest
    /// original node id; the empty graph yields an empty list.
    pub fn connected_components(&self) -> Vec<Subgraph> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut queue = std::collections::VecDeque::from([start]);
            seen[start] = true;
            let mut members = vec![start];
            while let Some(u) = queue.pop_front() {
                for &v in self.neighbors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        members.push(v);
                        queue.push_back(v);
                    }
                }
            }
            out.push(self.induced(&members));
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components().len() <= 1
    }

    /// Write the edge-list text format: a `%nodes N` header so isolated
    /// nodes survive round-trips, then one `u v` pair per line, sorted.
    pub fn write_edge_list<W: Write>(&self, w: &mut W) -> Result<(), GraphError> {
        writeln!(w, "%nodes {}", self.node_count())?;
        for (u, v) in self.edges() {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }

    pub fn to_edge_list_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_edge_list(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("edge list is ASCII")
    }

    /// Parse the edge-list text format. `#`-prefixed lines are comments;
    /// an optional leading `%nodes N` fixes the node count (otherwise it
    /// is the largest index seen plus one).
    pub fn read_edge_list<R: BufRead>(r: R) -> Result<Self, GraphError> {
        let mut declared: Option<usize> = None;
        let mut edges: Vec<(usize, usize)> = Vec::new();
        let mut max_index: Option<usize> = None;
        let mut seen_edges = false;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let lineno = lineno + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('%') {
                let mut parts = rest.split_whitespace();
                match (parts.next(), parts.next(), parts.next()) {
                    (Some("nodes"), Some(n), None) if !seen_edges && declared.is_none() => {
                        declared = Some(n.parse().map_err(|_| GraphError::Parse {
                            line: lineno,
                            reason: format!("invalid node count `{n}`"),
                        })?);
                    }
                    _ => {
                        return Err(GraphError::Parse {
                            line: lineno,
                            reason: format!("unexpected directive `{trimmed}`"),
                        })
                    }
                }
                continue;
            }
            let mut parts = trimmed.split_whitespace();
            let (u, v) = match (parts.next(), parts.next(), parts.next()) {
                (Some(u), Some(v), None) => (u, v),
                _ => {
                    return Err(GraphError::Parse {
                        line: lineno,
                        reason: format!("expected `u v`, got `{trimmed}`"),
                    })
                }
            };
            let parse = |tok: &str| {
                tok.parse::<usize>().map_err(|_| GraphError::Parse {
                    line: lineno,
                    reason: format!("invalid node index `{tok}`"),
                })
            };
            let (u, v) = (parse(u)?, parse(v)?);
            seen_edges = true;
            max_index = Some(max_index.map_or(u.max(v), |m: usize| m.max(u).max(v)));
            edges.push((u, v));
        }
        let node_count = match (declared, max_index) {
            (Some(n), _) => n,
            (None, Some(m)) => m + 1,
            (None, None) => 0,
        };
        Graph::from_edges(node_count, edges)
    }

    pub fn read_edge_list_path(path: &Path) -> Result<Self, GraphError> {
        let file = std::fs::File::open(path)?;
        Graph::read_edge_list(std::io::BufReader::new(file))
    }

    pub fn write_edge_list_path(&self, path: &Path) -> Result<(), GraphError> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_edge_list(&mut file)
    }
}

/// Multi-edge / self-edge counts recorded while simplifying raw edges.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimplifyCounts {
    pub multi_edges: usize,
    pub self_edges: usize,
}

/// A reindexed subgraph plus the record mapping its contiguous ids back to
/// the parent graph (`graph` node `i` was parent node `original_nodes[i]`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subgraph {
    pub graph: Graph,
    pub original_nodes: Vec<usize>,
}

/// Load every `*.edges` file in a directory, sorted by file name.
pub fn load_edge_list_dir(dir: &Path) -> Result<Vec<(String, Graph)>, GraphError> {
    let mut paths: Vec<std::path::PathBuf> = std::fs::read_dir(dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("edges"))
        .collect();
    paths.sort();
    let mut out = Vec::with_capacity(paths.len());
    for path in paths {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        out.push((stem, Graph::read_edge_list_path(&path)?));
    }
    Ok(out)
}
