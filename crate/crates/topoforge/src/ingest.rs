//! Parse router-level topology text files (links, router-to-AS
//! assignments, geolocation) and assemble simplified per-AS graphs.
//!
//! The line grammar is deliberately plain so real data kits can be mapped
//! onto it with a thin preprocessor:
//!
//! ```text
//! links:      <link_id>: <member> <member> ...   (>= 2 members;
//!             a member is `<router_id>` or `<router_id>:<ip>`)
//! router-AS:  <router_id> <as_number> [ignored...]
//! geo:        <router_id> <latitude> <longitude> [ignored...]
//! ```
//!
//! `#`-prefixed lines are comments everywhere.

use std::collections::BTreeMap;
use std::io::BufRead;

use thiserror::Error;

use crate::graph::{Graph, GraphError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{file} line {line}: {reason}")]
    Malformed {
        file: &'static str,
        line: usize,
        reason: String,
    },
    #[error("router {router} assigned to both AS {first} and AS {second}")]
    ConflictingAs {
        router: String,
        first: u32,
        second: u32,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How parsers treat malformed lines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    /// Fail on the first malformed line.
    Strict,
    /// Skip malformed lines, recording a warning per line.
    #[default]
    Skip,
}

/// A router with its AS assignment and optional geographic location.
#[derive(Debug, Clone, PartialEq)]
pub struct RouterRecord {
    pub router_id: String,
    pub as_number: u32,
    pub location: Option<(f64, f64)>,
}

/// One physical link; more than two routers can share it.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkRecord {
    pub link_id: String,
    pub members: Vec<String>,
    /// Per-member IP address, aligned with `members`.
    pub addresses: Vec<Option<String>>,
}

/// Warnings accumulated by a skip-mode parse or by graph assembly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestWarnings {
    pub malformed_lines: Vec<(usize, String)>,
    pub unknown_as_routers: usize,
    pub multi_edges_collapsed: usize,
    pub self_edges_dropped: usize,
}

/// Parse the links file: one link per line, `<id>: <member>+`.
pub fn parse_links<R: BufRead>(
    reader: R,
    mode: ParseMode,
) -> Result<(Vec<LinkRecord>, IngestWarnings), IngestError> {
    let mut links = Vec::new();
    let mut warnings = IngestWarnings::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        match parse_link_line(trimmed) {
            Ok(link) => links.push(link),
            Err(reason) => match mode {
                ParseMode::Strict => {
                    return Err(IngestError::Malformed {
                        file: "links",
                        line: lineno,
                        reason,
                    })
                }
                ParseMode::Skip => warnings.malformed_lines.push((lineno, reason)),
            },
        }
    }
    Ok((links, warnings))
}

fn parse_link_line(line: &str) -> Result<LinkRecord, String> {
    let (id, rest) = line
        .split_once(':')
        .ok_or_else(|| format!("missing `:` after link id in `{line}`"))?;
    let id = id.trim();
    if id.is_empty() {
        return Err("empty link id".to_string());
    }
    let mut members = Vec::new();
    let mut addresses = Vec::new();
    for tok in rest.split_whitespace() {
        match tok.split_once(':') {
            Some((router, ip)) if !router.is_empty() && !ip.is_empty() => {
                members.push(router.to_string());
                addresses.push(Some(ip.to_string()));
            }
            Some(_) => return Err(format!("malformed member token `{tok}`")),
            None => {
                members.push(tok.to_string());
                addresses.push(None);
            }
        }
    }
    if members.len() < 2 {
        return Err(format!("link `{id}` has fewer than 2 members"));
    }
    Ok(LinkRecord {
        link_id: id.to_string(),
        members,
        addresses,
    })
}

/// Parse the router-to-AS table. Repeating a pair is idempotent; the same
/// router mapped to two different AS numbers is an error in either mode.
pub fn parse_router_as<R: BufRead>(
    reader: R,
    mode: ParseMode,
) -> Result<(BTreeMap<String, u32>, IngestWarnings), IngestError> {
    let mut map = BTreeMap::new();
    let mut warnings = IngestWarnings::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let parsed: Result<(String, u32), String> = match (parts.next(), parts.next()) {
            (Some(router), Some(asn)) => match asn.parse::<u32>() {
                Ok(asn) if asn > 0 => Ok((router.to_string(), asn)),
                Ok(_) => Err("AS number must be positive".to_string()),
                Err(_) => Err(format!("invalid AS number `{asn}`")),
            },
            _ => Err(format!("expected `router as_number`, got `{trimmed}`")),
        };
        match parsed {
            Ok((router, asn)) => {
                if let Some(&existing) = map.get(&router) {
                    if existing != asn {
                        return Err(IngestError::ConflictingAs {
                            router,
                            first: existing,
                            second: asn,
                        });
                    }
                } else {
                    map.insert(router, asn);
                }
            }
            Err(reason) => match mode {
                ParseMode::Strict => {
                    return Err(IngestError::Malformed {
                        file: "router-as",
                        line: lineno,
                        reason,
                    })
                }
                ParseMode::Skip => warnings.malformed_lines.push((lineno, reason)),
            },
        }
    }
    Ok((map, warnings))
}

/// Parse the geolocation table: `<router_id> <lat> <lon>`.
pub fn parse_geo<R: BufRead>(
    reader: R,
    mode: ParseMode,
) -> Result<(BTreeMap<String, (f64, f64)>, IngestWarnings), IngestError> {
    let mut map = BTreeMap::new();
    let mut warnings = IngestWarnings::default();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let parsed: Result<(String, f64, f64), String> =
            match (parts.next(), parts.next(), parts.next()) {
                (Some(router), Some(lat), Some(lon)) => {
                    match (lat.parse::<f64>(), lon.parse::<f64>()) {
                        (Ok(lat), Ok(lon)) => Ok((router.to_string(), lat, lon)),
                        _ => Err(format!("invalid coordinates `{lat} {lon}`")),
                    }
                }
                _ => Err(format!("expected `router lat lon`, got `{trimmed}`")),
            };
        match parsed {
            Ok((router, lat, lon)) => {
                map.insert(router, (lat, lon));
            }
            Err(reason) => match mode {
                ParseMode::Strict => {
                    return Err(IngestError::Malformed {
                        file: "geo",
                        line: lineno,
                        reason,
                    })
                }
                ParseMode::Skip => warnings.malformed_lines.push((lineno, reason)),
            },
        }
    }
    Ok((map, warnings))
}

/// Raw edge between two routers, with the addresses the link carried.
pub type RouterEdge = (String, String, Option<String>, Option<String>);

/// Expand each k-member link into all C(k,2) unordered router pairs.
pub fn expand_links_to_edges(links: &[LinkRecord]) -> Vec<RouterEdge> {
    let mut edges = Vec::new();
    for link in links {
        for i in 0..link.members.len() {
            for j in (i + 1)..link.members.len() {
                edges.push((
                    link.members[i].clone(),
                    link.members[j].clone(),
                    link.addresses[i].clone(),
                    link.addresses[j].clone(),
                ));
            }
        }
    }
    edges
}

/// One assembled per-AS graph: dense node indices plus the router-token
/// map that makes them traceable back to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct AsGraph {
    pub asn: u32,
    pub graph: Graph,
    /// Node index -> router token.
    pub routers: Vec<String>,
}

/// Assemble one simplified graph per AS.
///
/// A graph's nodes are all routers the table assigns to that AS (isolated
/// routers are retained); its edges are exactly the input edges with both
/// endpoints in the AS. Multi-edges collapse, self-edges drop, and routers
/// with no AS assignment are skipped with a counted warning.
pub fn build_intra_as_graphs(
    edges: &[RouterEdge],
    router_as: &BTreeMap<String, u32>,
    geo: Option<&BTreeMap<String, (f64, f64)>>,
) -> Result<(BTreeMap<u32, AsGraph>, IngestWarnings), IngestError> {
    let mut warnings = IngestWarnings::default();

    // Dense per-AS indices, routers sorted by token for determinism.
    let mut members: BTreeMap<u32, Vec<&str>> = BTreeMap::new();
    for (router, &asn) in router_as {
        members.entry(asn).or_default().push(router);
    }
    let mut index: BTreeMap<u32, BTreeMap<&str, usize>> = BTreeMap::new();
    for (&asn, routers) in &members {
        index.insert(
            asn,
            routers.iter().enumerate().map(|(i, &r)| (r, i)).collect(),
        );
    }

    let mut graphs: BTreeMap<u32, AsGraph> = members
        .iter()
        .map(|(&asn, routers)| {
            let mut graph = Graph::new(routers.len());
            if let Some(geo) = geo {
                for (i, router) in routers.iter().enumerate() {
                    if let Some(&(lat, lon)) = geo.get(*router) {
                        graph.set_node_attr(i, "lat", &format!("{lat}"));
                        graph.set_node_attr(i, "lon", &format!("{lon}"));
                    }
                }
            }
            (
                asn,
                AsGraph {
                    asn,
                    graph,
                    routers: routers.iter().map(|r| r.to_string()).collect(),
                },
            )
        })
        .collect();

    for (a, b, ip_a, ip_b) in edges {
        let (asn_a, asn_b) = (router_as.get(a), router_as.get(b));
        let (asn_a, asn_b) = match (asn_a, asn_b) {
            (Some(&x), Some(&y)) => (x, y),
            _ => {
                warnings.unknown_as_routers += 1;
                continue;
            }
        };
        if asn_a != asn_b {
            continue; // inter-AS edge
        }
        let idx = &index[&asn_a];
        let (u, v) = (idx[a.as_str()], idx[b.as_str()]);
        if u == v {
            warnings.self_edges_dropped += 1;
            continue;
        }
        let entry = graphs.get_mut(&asn_a).expect("indexed AS exists");
        if entry.graph.add_edge(u, v) {
            if let (Some(ip_a), Some(ip_b)) = (ip_a, ip_b) {
                entry
                    .graph
                    .set_edge_attr(u, v, "ips", &format!("{ip_a},{ip_b}"));
            }
        } else {
            warnings.multi_edges_collapsed += 1;
        }
    }
    Ok((graphs, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_multi_member_links() {
        let input = "L1: N1 N2\nL2: N1 N2 N3\n";
        let (links, warnings) = parse_links(input.as_bytes(), ParseMode::Strict).unwrap();
        assert!(warnings.malformed_lines.is_empty());
        assert_eq!(links[0].link_id, "L1");
        assert_eq!(links[0].members, vec!["N1", "N2"]);
        assert_eq!(links[1].members.len(), 3);
    }

    #[test]
    fn link_member_addresses() {
        let input = "L1: N1:10.0.0.1 N2\n";
        let (links, _) = parse_links(input.as_bytes(), ParseMode::Strict).unwrap();
        assert_eq!(links[0].addresses[0].as_deref(), Some("10.0.0.1"));
        assert_eq!(links[0].addresses[1], None);
    }

    #[test]
    fn strict_mode_reports_line_numbers() {
        let input = "L1: N1 N2\ngarbage\n";
        match parse_links(input.as_bytes(), ParseMode::Strict) {
            Err(IngestError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected malformed error, got {other:?}"),
        }
        // single-member link is also malformed
        assert!(parse_links("L1: N1\n".as_bytes(), ParseMode::Strict).is_err());
    }

    #[test]
    fn skip_mode_counts_malformed_lines() {
        let input = "garbage\nL1: N1 N2\n";
        let (links, warnings) = parse_links(input.as_bytes(), ParseMode::Skip).unwrap();
        assert_eq!(links.len(), 1);
        assert_eq!(warnings.malformed_lines.len(), 1);
        assert_eq!(warnings.malformed_lines[0].0, 1);
    }

    #[test]
    fn router_as_duplicates_and_conflicts() {
        let (map, _) =
            parse_router_as("N1 64500\nN1 64500\n".as_bytes(), ParseMode::Strict).unwrap();
        assert_eq!(map.len(), 1);
        assert_eq!(map["N1"], 64500);

        match parse_router_as("N1 64500\nN1 64501\n".as_bytes(), ParseMode::Strict) {
            Err(IngestError::ConflictingAs { first, second, .. }) => {
                assert_eq!((first, second), (64500, 64501));
            }
            other => panic!("expected conflict error, got {other:?}"),
        }
    }

    #[test]
    fn expansion_counts_are_binomial() {
        let links = vec![
            LinkRecord {
                link_id: "L1".into(),
                members: vec!["a".into(), "b".into()],
                addresses: vec![None, None],
            },
            LinkRecord {
                link_id: "L2".into(),
                members: vec!["a".into(), "b".into(), "c".into()],
                addresses: vec![None, None, None],
            },
            LinkRecord {
                link_id: "L3".into(),
                members: (0..4).map(|i| format!("n{i}")).collect(),
                addresses: vec![None; 4],
            },
        ];
        assert_eq!(expand_links_to_edges(&links[..1]).len(), 1);
        assert_eq!(expand_links_to_edges(&links[1..2]).len(), 3);
        assert_eq!(expand_links_to_edges(&links[2..]).len(), 6);
        assert_eq!(expand_links_to_edges(&links).len(), 10);
    }

    fn simple_table() -> BTreeMap<String, u32> {
        [("a", 1), ("b", 1), ("c", 2)]
            .into_iter()
            .map(|(r, asn)| (r.to_string(), asn))
            .collect()
    }

    fn edge(a: &str, b: &str) -> RouterEdge {
        (a.to_string(), b.to_string(), None, None)
    }

    #[test]
    fn boundary_edges_are_excluded() {
        let edges = vec![edge("a", "b"), edge("b", "c")];
        let (graphs, _) = build_intra_as_graphs(&edges, &simple_table(), None).unwrap();
        assert_eq!(graphs[&1].graph.edge_count(), 1);
        assert_eq!(graphs[&1].graph.node_count(), 2);
        assert_eq!(graphs[&2].graph.node_count(), 1);
        assert_eq!(graphs[&2].graph.edge_count(), 0);
    }

    #[test]
    fn multi_and_self_edges_are_simplified() {
        let edges = vec![edge("a", "b"), edge("a", "b"), edge("a", "a")];
        let (graphs, warnings) = build_intra_as_graphs(&edges, &simple_table(), None).unwrap();
        assert_eq!(graphs[&1].graph.edge_count(), 1);
        assert_eq!(warnings.multi_edges_collapsed, 1);
        assert_eq!(warnings.self_edges_dropped, 1);
    }

    #[test]
    fn unknown_as_routers_are_counted() {
        let edges = vec![edge("a", "zz"), edge("a", "b")];
        let (graphs, warnings) = build_intra_as_graphs(&edges, &simple_table(), None).unwrap();
        assert_eq!(warnings.unknown_as_routers, 1);
        assert_eq!(graphs[&1].graph.edge_count(), 1);
    }

    #[test]
    fn geo_attaches_node_attributes() {
        let geo: BTreeMap<String, (f64, f64)> =
            [("a".to_string(), (51.0, 4.5))].into_iter().collect();
        let edges = vec![edge("a", "b")];
        let (graphs, _) = build_intra_as_graphs(&edges, &simple_table(), Some(&geo)).unwrap();
        let as1 = &graphs[&1];
        let a_idx = as1.routers.iter().position(|r| r == "a").unwrap();
        assert_eq!(as1.graph.node_attrs(a_idx).unwrap()["lat"], "51");
        assert!(as1.graph.node_attrs(1 - a_idx).is_none());
    }

    #[test]
    fn assembly_is_deterministic() {
        let edges = vec![edge("b", "a"), edge("a", "b"), edge("b", "c")];
        let (g1, _) = build_intra_as_graphs(&edges, &simple_table(), None).unwrap();
        let (g2, _) = build_intra_as_graphs(&edges, &simple_table(), None).unwrap();
        assert_eq!(g1, g2);
        // every node maps back to its AS
        for (asn, as_graph) in &g1 {
            for router in &as_graph.routers {
                assert_eq!(simple_table()[router], *asn);
            }
        }
    }
}
