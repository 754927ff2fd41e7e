//! Labeled directed graphs used for ground truth, reconstruction, and
//! evaluation.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{NicoError, Result};
use crate::model::StateSpace;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectedGraph {
    space: StateSpace,
    edges: BTreeSet<(usize, usize)>,
}

impl DirectedGraph {
    pub fn new(space: StateSpace) -> Self {
        Self {
            space,
            edges: BTreeSet::new(),
        }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn num_vertices(&self) -> usize {
        self.space.len()
    }

    pub fn add_edge(&mut self, from: usize, to: usize) {
        debug_assert!(from < self.space.len() && to < self.space.len());
        self.edges.insert((from, to));
    }

    pub fn contains_edge(&self, from: usize, to: usize) -> bool {
        self.edges.contains(&(from, to))
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    /// Edge set as label pairs, comparable across index spaces.
    pub fn edge_labels(&self) -> BTreeSet<(String, String)> {
        self.edges
            .iter()
            .map(|&(u, v)| {
                (
                    self.space.label(u).to_string(),
                    self.space.label(v).to_string(),
                )
            })
            .collect()
    }

    pub fn out_neighbors(&self, from: usize) -> Vec<usize> {
        self.edges
            .range((from, 0)..=(from, usize::MAX))
            .map(|&(_, v)| v)
            .collect()
    }

    pub fn in_neighbors(&self, to: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(_, v)| v == to)
            .map(|&(u, _)| u)
            .collect()
    }

    /// Connectivity of the undirected skeleton.
    pub fn is_connected_undirected(&self) -> bool {
        let n = self.space.len();
        if n == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); n];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == n
    }

    /// Writes one `src<TAB>dst` line per edge.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        for &(u, v) in &self.edges {
            writeln!(w, "{}\t{}", self.space.label(u), self.space.label(v))?;
        }
        Ok(())
    }

    pub fn write_tsv_file<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_tsv(std::io::BufWriter::new(f))
    }

    /// Reads an edge list; the label set is taken from the file in
    /// first-seen order.
    pub fn read_tsv<R: BufRead>(r: R) -> Result<Self> {
        let mut labels: Vec<String> = Vec::new();
        let mut index = std::collections::HashMap::new();
        let mut pairs: Vec<(usize, usize)> = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut it = trimmed.split_whitespace();
            let (src, dst) = match (it.next(), it.next(), it.next()) {
                (Some(a), Some(b), None) => (a, b),
                _ => {
                    return Err(NicoError::Parse {
                        line: lineno + 1,
                        message: format!("expected `src dst`, got {trimmed:?}"),
                    })
                }
            };
            let mut intern = |label: &str| -> usize {
                *index.entry(label.to_string()).or_insert_with(|| {
                    labels.push(label.to_string());
                    labels.len() - 1
                })
            };
            let u = intern(src);
            let v = intern(dst);
            pairs.push((u, v));
        }
        let space = StateSpace::new(labels)?;
        let mut g = DirectedGraph::new(space);
        for (u, v) in pairs {
            g.add_edge(u, v);
        }
        Ok(g)
    }

    pub fn read_tsv_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_tsv(BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(n: usize) -> StateSpace {
        StateSpace::new((0..n).map(|i| format!("v{i}")).collect()).unwrap()
    }

    #[test]
    fn edges_are_deduplicated() {
        let mut g = DirectedGraph::new(space(3));
        g.add_edge(0, 1);
        g.add_edge(0, 1);
        g.add_edge(1, 2);
        assert_eq!(g.edge_count(), 2);
        assert!(g.contains_edge(0, 1));
        assert!(!g.contains_edge(1, 0));
    }

    #[test]
    fn tsv_roundtrip() {
        let mut g = DirectedGraph::new(space(3));
        g.add_edge(0, 2);
        g.add_edge(2, 1);
        let mut buf = Vec::new();
        g.write_tsv(&mut buf).unwrap();
        let back = DirectedGraph::read_tsv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back.edge_labels(), g.edge_labels());
    }

    #[test]
    fn connectivity_check() {
        let mut g = DirectedGraph::new(space(3));
        g.add_edge(0, 1);
        assert!(!g.is_connected_undirected());
        g.add_edge(2, 1);
        assert!(g.is_connected_undirected());
    }

    #[test]
    fn malformed_edge_line_reports_line_number() {
        let res = DirectedGraph::read_tsv(std::io::Cursor::new(b"a b\nc\n".to_vec()));
        match res {
            Err(NicoError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
