//! Reading and writing graphs and orderings.
//!
//! Two input grammars are accepted:
//!
//! * **Edge list** (`.graph`, PACE style): one edge per line as two
//!   whitespace-separated labels. Blank lines and lines starting with `#`,
//!   `c` or `%` are skipped. A line with a single label declares an isolated
//!   vertex. Labels are arbitrary tokens and are assigned contiguous ids in
//!   order of first appearance.
//! * **Matrix pattern**: Matrix Market coordinate files
//!   (`%%MatrixMarket matrix coordinate ...`). Comment lines start with `%`,
//!   the first data line is `rows cols entries`, and each entry line starts
//!   with 1-based `row col`; values are ignored. Vertex `i` is row `i + 1`,
//!   the diagonal is dropped and the pattern is symmetrized.
//!
//! Self-loops and repeated edges are dropped and counted in [`LoadReport`].
//!
//! An ordering file lists one vertex label per line in elimination order,
//! preceded by a `# fill=<k>` line and optionally further `#` comment lines.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::elim::EliminationOrder;
use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Auto,
    EdgeList,
    MatrixPattern,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Format::Auto),
            "edgelist" | "edge-list" => Ok(Format::EdgeList),
            "matrix-pattern" | "mtx" | "matrix-market" => Ok(Format::MatrixPattern),
            other => Err(Error::Config(format!("unknown graph format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub self_loops: usize,
    pub duplicates: usize,
}

/// A graph plus the original label of every vertex id.
#[derive(Clone, Debug)]
pub struct LoadedGraph {
    pub graph: Graph,
    pub labels: Vec<String>,
    pub report: LoadReport,
}

pub fn load_graph(path: impl AsRef<Path>, format: Format) -> Result<LoadedGraph> {
    let text = fs::read_to_string(path)?;
    parse_graph(&text, format)
}

pub fn parse_graph(text: &str, format: Format) -> Result<LoadedGraph> {
    let format = match format {
        Format::Auto => sniff(text),
        f => f,
    };
    let loaded = match format {
        Format::MatrixPattern => parse_matrix_pattern(text)?,
        _ => parse_edge_list(text)?,
    };
    if loaded.graph.n() == 0 {
        return Err(Error::NoVertices);
    }
    Ok(loaded)
}

fn sniff(text: &str) -> Format {
    let first = text.lines().map(str::trim).find(|l| !l.is_empty());
    match first {
        Some(l) if l.starts_with("%%MatrixMarket") => Format::MatrixPattern,
        _ => Format::EdgeList,
    }
}

fn is_comment(line: &str) -> bool {
    line.starts_with('#') || line.starts_with('%') || line == "c" || line.starts_with("c ")
}

struct EdgeCollector {
    edges: Vec<(usize, usize)>,
    seen: std::collections::HashSet<(usize, usize)>,
    report: LoadReport,
}

impl EdgeCollector {
    fn new() -> Self {
        EdgeCollector {
            edges: Vec::new(),
            seen: Default::default(),
            report: LoadReport::default(),
        }
    }

    fn push(&mut self, u: usize, v: usize) {
        if u == v {
            self.report.self_loops += 1;
        } else if self.seen.insert((u.min(v), u.max(v))) {
            self.edges.push((u, v));
        } else {
            self.report.duplicates += 1;
        }
    }
}

pub fn parse_edge_list(text: &str) -> Result<LoadedGraph> {
    let mut ids: HashMap<String, usize> = HashMap::new();
    let mut labels = Vec::new();
    let mut edges = EdgeCollector::new();
    let mut id_of = |tok: &str| -> usize {
        *ids.entry(tok.to_string()).or_insert_with(|| {
            labels.push(tok.to_string());
            labels.len() - 1
        })
    };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || is_comment(line) {
            continue;
        }
        let mut toks = line.split_whitespace();
        let (a, b) = match (toks.next(), toks.next(), toks.next()) {
            (Some(a), Some(b), None) => (a, b),
            (Some(a), None, None) => {
                id_of(a);
                continue;
            }
            _ => return Err(Error::parse(i + 1, format!("expected one or two vertex labels, got {line:?}"))),
        };
        let (u, v) = (id_of(a), id_of(b));
        edges.push(u, v);
    }
    let graph = Graph::from_edges(labels.len(), edges.edges)?;
    Ok(LoadedGraph {
        graph,
        labels,
        report: edges.report,
    })
}

pub fn parse_matrix_pattern(text: &str) -> Result<LoadedGraph> {
    let mut dims: Option<(usize, usize)> = None;
    let mut edges = EdgeCollector::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let lineno = i + 1;
        let mut toks = line.split_whitespace();
        let mut num = |what: &str| -> Result<usize> {
            toks.next()
                .ok_or_else(|| Error::parse(lineno, format!("missing {what}")))?
                .parse::<usize>()
                .map_err(|e| Error::parse(lineno, format!("bad {what}: {e}")))
        };
        match dims {
            None => {
                let rows = num("row count")?;
                let cols = num("column count")?;
                num("entry count")?;
                if rows != cols {
                    return Err(Error::parse(lineno, format!("matrix is {rows}x{cols}, not square")));
                }
                dims = Some((rows, cols));
            }
            Some((n, _)) => {
                let r = num("row index")?;
                let c = num("column index")?;
                if r == 0 || c == 0 || r > n || c > n {
                    return Err(Error::parse(lineno, format!("entry ({r},{c}) outside 1..={n}")));
                }
                edges.push(r - 1, c - 1);
            }
        }
    }
    let (n, _) = dims.ok_or_else(|| Error::parse(0, "missing dimensions line"))?;
    // diagonal entries are structural, not loops
    let report = LoadReport {
        self_loops: 0,
        duplicates: edges.report.duplicates,
    };
    let graph = Graph::from_edges(n, edges.edges)?;
    Ok(LoadedGraph {
        graph,
        labels: (1..=n).map(|i| i.to_string()).collect(),
        report,
    })
}

/// Edge list text using `labels` (or numeric ids when `None`). Isolated
/// vertices are written on lines of their own.
pub fn format_edge_list(g: &Graph, labels: Option<&[String]>) -> String {
    let mut out = String::new();
    for v in (0..g.n()).filter(|&v| g.degree(v) == 0) {
        match labels {
            Some(l) => writeln!(out, "{}", l[v]),
            None => writeln!(out, "{v}"),
        }
        .unwrap();
    }
    for (u, v) in g.edges() {
        match labels {
            Some(l) => writeln!(out, "{} {}", l[u], l[v]),
            None => writeln!(out, "{u} {v}"),
        }
        .unwrap();
    }
    out
}

pub fn save_edge_list(path: impl AsRef<Path>, g: &Graph, labels: Option<&[String]>) -> Result<()> {
    let mut text = format!("# vertices={} edges={}\n", g.n(), g.num_edges());
    text.push_str(&format_edge_list(g, labels));
    fs::write(path, text)?;
    Ok(())
}

/// Ordering file contents. `comments` are extra header lines written after
/// the fill line, each prefixed with `# `.
pub fn format_ordering(order: &EliminationOrder, labels: &[String], comments: &[String]) -> String {
    let mut out = format!("# fill={}\n", order.fill_cost);
    for c in comments {
        writeln!(out, "# {c}").unwrap();
    }
    for &v in &order.pi {
        writeln!(out, "{}", labels[v]).unwrap();
    }
    out
}

pub fn write_ordering(
    path: impl AsRef<Path>,
    order: &EliminationOrder,
    labels: &[String],
    comments: &[String],
) -> Result<()> {
    fs::write(path, format_ordering(order, labels, comments))?;
    Ok(())
}

/// Reads an ordering file back into vertex ids; returns `(pi, claimed fill)`.
pub fn parse_ordering(text: &str, labels: &[String]) -> Result<(Vec<usize>, Option<usize>)> {
    let index: HashMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut fill = None;
    let mut pi = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix("# fill=") {
            fill = Some(rest.parse().map_err(|e| Error::parse(i + 1, format!("bad fill: {e}")))?);
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v = index
            .get(line)
            .ok_or_else(|| Error::parse(i + 1, format!("unknown vertex label {line:?}")))?;
        pi.push(*v);
    }
    Ok((pi, fill))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_list_cycle() {
        let g = parse_graph("0 1\n1 2\n2 3\n3 0\n", Format::Auto).unwrap();
        assert_eq!((g.graph.n(), g.graph.num_edges()), (4, 4));
        assert_eq!(g.labels, vec!["0", "1", "2", "3"]);
    }

    #[test]
    fn edge_list_labels_comments_and_drops() {
        let text = "# a comment\nc another\nx y\n\ny z\nz z\ny x\n";
        let g = parse_graph(text, Format::EdgeList).unwrap();
        assert_eq!(g.labels, vec!["x", "y", "z"]);
        assert_eq!(g.graph.num_edges(), 2);
        assert_eq!(g.report, LoadReport { self_loops: 1, duplicates: 1 });
        g.graph.check_invariants().unwrap();
    }

    #[test]
    fn edge_list_parse_error_has_line_number() {
        match parse_graph("0 1\n1 2 3 4\n", Format::EdgeList) {
            Err(Error::Parse { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_graph("# only comments\n", Format::Auto), Err(Error::NoVertices)));
    }

    #[test]
    fn matrix_pattern_symmetrizes_and_drops_diagonal() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 3\n1 2 1.0\n2 1 1.0\n1 1 4.0\n";
        let g = parse_graph(text, Format::Auto).unwrap();
        assert_eq!(g.graph.n(), 2);
        assert_eq!(g.graph.num_edges(), 1);
        assert_eq!(g.labels, vec!["1", "2"]);
        let bad = "%%MatrixMarket matrix coordinate pattern general\n2 2 1\n3 1\n";
        assert!(matches!(parse_graph(bad, Format::Auto), Err(Error::Parse { line: 3, .. })));
        let rect = "%%MatrixMarket matrix coordinate pattern general\n2 3 0\n";
        assert!(parse_graph(rect, Format::Auto).is_err());
    }

    #[test]
    fn isolated_vertices_survive_a_round_trip() {
        let g = Graph::from_edges(4, [(1, 3)]).unwrap();
        let text = format_edge_list(&g, None);
        assert_eq!(text, "0\n2\n1 3\n");
        let back = parse_graph(&text, Format::EdgeList).unwrap();
        assert_eq!((back.graph.n(), back.graph.num_edges()), (4, 1));
        assert_eq!(back.labels, vec!["0", "2", "1", "3"]);
        assert!(matches!(parse_graph("1 2 3\n", Format::EdgeList), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn ordering_round_trip() {
        let labels: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let o = EliminationOrder { pi: vec![2, 0, 1], fill_cost: 0 };
        let text = format_ordering(&o, &labels, &["method=mdh".into()]);
        assert!(text.starts_with("# fill=0\n# method=mdh\nc\na\nb\n"));
        let (pi, fill) = parse_ordering(&text, &labels).unwrap();
        assert_eq!(pi, o.pi);
        assert_eq!(fill, Some(0));
    }
}
