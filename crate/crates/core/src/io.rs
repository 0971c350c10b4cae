//! Text formats: tree files, graph files and opinion files.
//!
//! Tree file:
//!
//! ```text
//! tree n=<N> root=<R>
//! <u> <v>        # N-1 edge lines, any order
//! ```
//!
//! Lines starting with `#` are comments. A graph file uses the header
//! `graph n=<N>` and may list any number of edges.
//!
//! JSON floats are written with 17 significant digits through [`f17`].

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::opinion::OpinionVector;
use crate::tree::{Graph, RootedTree};

enum Header {
    Tree { n: usize, root: usize },
    Graph { n: usize },
}

fn parse_header(line: &str, lineno: usize) -> Result<Header> {
    let mut parts = line.split_whitespace();
    let kind = parts.next().unwrap_or_default();
    let mut n = None;
    let mut root = None;
    for p in parts {
        let (key, value) = p.split_once('=').ok_or_else(|| Error::Parse {
            line: lineno,
            msg: format!("expected key=value, found {p:?}"),
        })?;
        let value: usize = value.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("{key} is not a non-negative integer"),
        })?;
        match key {
            "n" => n = Some(value),
            "root" => root = Some(value),
            _ => {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("unknown header field {key:?}"),
                })
            }
        }
    }
    let n = n.ok_or_else(|| Error::Parse {
        line: lineno,
        msg: "header is missing n=".into(),
    })?;
    match kind {
        "tree" => Ok(Header::Tree {
            n,
            root: root.ok_or_else(|| Error::Parse {
                line: lineno,
                msg: "tree header is missing root=".into(),
            })?,
        }),
        "graph" => Ok(Header::Graph { n }),
        _ => Err(Error::Parse {
            line: lineno,
            msg: format!("expected `tree n=<N> root=<R>`, found {line:?}"),
        }),
    }
}

fn read_file<R: BufRead>(reader: R) -> Result<(Header, Vec<(usize, usize)>)> {
    let mut header = None;
    let mut edges = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if header.is_none() {
            header = Some(parse_header(trimmed, lineno)?);
            continue;
        }
        let mut it = trimmed.split_whitespace();
        let mut id = || -> Result<usize> {
            it.next()
                .ok_or_else(|| Error::Parse {
                    line: lineno,
                    msg: "expected two vertex ids".into(),
                })?
                .parse()
                .map_err(|_| Error::Parse {
                    line: lineno,
                    msg: "vertex id is not a non-negative integer".into(),
                })
        };
        let (u, v) = (id()?, id()?);
        if it.next().is_some() {
            return Err(Error::Parse {
                line: lineno,
                msg: "trailing tokens after edge".into(),
            });
        }
        edges.push((u, v));
    }
    let header = header.ok_or(Error::Parse {
        line: 1,
        msg: "empty input".into(),
    })?;
    Ok((header, edges))
}

pub fn load_tree<R: BufRead>(reader: R) -> Result<RootedTree> {
    match read_file(reader)? {
        (Header::Tree { n, root }, edges) => RootedTree::from_edges(n, root, &edges),
        (Header::Graph { .. }, _) => Err(Error::Parse {
            line: 1,
            msg: "expected a tree file, found a graph header".into(),
        }),
    }
}

/// Accepts both tree and graph files.
pub fn load_graph<R: BufRead>(reader: R) -> Result<Graph> {
    match read_file(reader)? {
        (Header::Tree { n, root }, edges) => {
            Ok(RootedTree::from_edges(n, root, &edges)?.graph().clone())
        }
        (Header::Graph { n }, edges) => Graph::from_edges(n, &edges),
    }
}

/// Canonical form: header, then parent-child edges in breadth-first order.
pub fn save_tree<W: Write>(tree: &RootedTree, mut w: W) -> Result<()> {
    writeln!(w, "tree n={} root={}", tree.n(), tree.root())?;
    for (u, v) in tree.edges() {
        writeln!(w, "{u} {v}")?;
    }
    Ok(())
}

pub fn tree_to_string(tree: &RootedTree) -> String {
    let mut buf = Vec::new();
    save_tree(tree, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("tree files are ASCII")
}

pub fn save_graph<W: Write>(graph: &Graph, mut w: W) -> Result<()> {
    writeln!(w, "graph n={}", graph.n())?;
    for (u, v) in graph.edges() {
        writeln!(w, "{u} {v}")?;
    }
    Ok(())
}

/// Reads an opinion file and checks its length against `n`.
pub fn load_opinions<R: BufRead>(mut reader: R, n: usize) -> Result<OpinionVector> {
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let v: OpinionVector = line.trim().parse()?;
    if v.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: v.len(),
        });
    }
    Ok(v)
}

pub fn save_opinions<W: Write>(v: &OpinionVector, mut w: W) -> Result<()> {
    writeln!(w, "{v}")?;
    Ok(())
}

/// Serialises a float with 17 significant digits (`null` if not finite).
pub fn f17<S: serde::Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    if !x.is_finite() {
        return s.serialize_none();
    }
    let raw = serde_json::value::RawValue::from_string(format!("{x:.16e}"))
        .map_err(serde::ser::Error::custom)?;
    raw.serialize(s)
}

/// [`f17`] for optional floats.
pub fn f17_opt<S: serde::Serializer>(
    x: &Option<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(x) => f17(x, s),
        None => s.serialize_none(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_the_star() {
        let t = load_tree("tree n=4 root=0\n0 1\n0 2\n0 3\n".as_bytes()).unwrap();
        assert_eq!(t.n(), 4);
        assert_eq!(t.children(0), &[1, 2, 3]);
    }

    #[test]
    fn comments_and_edge_order_are_ignored() {
        let t = load_tree("# a star\ntree n=4 root=2\n3 0\n# middle\n1 0\n0 2\n".as_bytes()).unwrap();
        assert_eq!(t.root(), 2);
        assert_eq!(t.degree(0), 3);
    }

    #[test]
    fn perfect_tree_round_trips() {
        let t = RootedTree::perfect(2, 2).unwrap();
        let text = tree_to_string(&t);
        let back = load_tree(text.as_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(tree_to_string(&back), text);
    }

    #[test]
    fn four_cycle_is_cyclic() {
        let err = load_tree("tree n=4 root=0\n0 1\n1 2\n2 3\n3 0\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Cyclic));
        assert_eq!(err.to_string(), "cyclic input");
    }

    #[test]
    fn even_degree_names_the_vertex() {
        let err = load_tree("tree n=4 root=0\n0 1\n1 2\n2 3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::DegreeParity { vertex: 1, .. }));
        assert!(err.to_string().contains("vertex 1"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = load_tree("tree n=4 root=0\n0 1\n0 x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        let err = load_tree("tree n=4\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn graph_files() {
        let g = load_graph("graph n=4\n0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n".as_bytes()).unwrap();
        assert_eq!(g.edge_count(), 6);
        let mut buf = Vec::new();
        save_graph(&g, &mut buf).unwrap();
        assert_eq!(load_graph(buf.as_slice()).unwrap(), g);
    }

    #[test]
    fn opinion_length_is_checked() {
        assert!(load_opinions("+-+\n".as_bytes(), 3).is_ok());
        let err = load_opinions("+-+\n".as_bytes(), 4).unwrap_err();
        assert_eq!(err.code(), "INIT_LENGTH_MISMATCH");
    }
}
