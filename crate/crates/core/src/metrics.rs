//! Evaluation: edge symmetric difference, reference graphs, and run-set
//! summaries behind the experiment reports.

use crate::error::{NicoError, Result};
use crate::graph::DirectedGraph;
use crate::model::StateSpace;
use crate::reconstruct::build_graph;

/// Edge-set disagreement between an estimate and a reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymDiff {
    /// `false_positives + false_negatives`.
    pub total: usize,
    /// Estimated edges absent from the reference.
    pub false_positives: usize,
    /// Reference edges absent from the estimate.
    pub false_negatives: usize,
}

/// Compares edge sets by vertex label, so the two graphs may use different
/// index orders over the same label universe.
pub fn edge_symmetric_difference(est: &DirectedGraph, reference: &DirectedGraph) -> SymDiff {
    let est_edges = est.edge_labels();
    let ref_edges = reference.edge_labels();
    let false_positives = est_edges.difference(&ref_edges).count();
    let false_negatives = ref_edges.difference(&est_edges).count();
    SymDiff {
        total: false_positives + false_negatives,
        false_positives,
        false_negatives,
    }
}

/// The evaluation reference: the graph obtained from correctly ordered
/// observations (not the full generator graph).
pub fn reference_graph_from_ordered(space: &StateSpace, paths: &[Vec<usize>]) -> DirectedGraph {
    build_graph(space, paths)
}

/// One run's evaluation record.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub edges: usize,
    pub symdiff: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub loglik: f64,
}

/// Min/median/max plus the sparsest and clairvoyant picks over a run set.
/// Medians take the lower middle for even counts.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub min_error: usize,
    pub median_error: usize,
    pub max_error: usize,
    pub min_edges: usize,
    pub median_edges: usize,
    pub max_edges: usize,
    pub min_loglik: f64,
    pub median_loglik: f64,
    pub max_loglik: f64,
    /// Fewest edges; ties by lower error, then lower index.
    pub sparsest_index: usize,
    /// Lowest error; ties by lower index.
    pub clairvoyant_index: usize,
}

fn lower_median<T: Copy + Ord>(sorted: &[T]) -> T {
    sorted[(sorted.len() - 1) / 2]
}

pub fn summarize_runs(records: &[RunRecord]) -> Result<RunSummary> {
    if records.is_empty() {
        return Err(NicoError::NoObservations);
    }
    let mut errors: Vec<usize> = records.iter().map(|r| r.symdiff).collect();
    let mut edges: Vec<usize> = records.iter().map(|r| r.edges).collect();
    let mut logliks: Vec<f64> = records.iter().map(|r| r.loglik).collect();
    errors.sort_unstable();
    edges.sort_unstable();
    logliks.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut sparsest = 0usize;
    let mut clairvoyant = 0usize;
    for (i, r) in records.iter().enumerate() {
        let s = &records[sparsest];
        if (r.edges, r.symdiff, i) < (s.edges, s.symdiff, sparsest) {
            sparsest = i;
        }
        if r.symdiff < records[clairvoyant].symdiff {
            clairvoyant = i;
        }
    }

    Ok(RunSummary {
        min_error: errors[0],
        median_error: lower_median(&errors),
        max_error: *errors.last().unwrap(),
        min_edges: edges[0],
        median_edges: lower_median(&edges),
        max_edges: *edges.last().unwrap(),
        min_loglik: logliks[0],
        median_loglik: logliks[(logliks.len() - 1) / 2],
        max_loglik: *logliks.last().unwrap(),
        sparsest_index: sparsest,
        clairvoyant_index: clairvoyant,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(n: usize) -> StateSpace {
        StateSpace::new((0..n).map(|i| format!("v{i}")).collect()).unwrap()
    }

    fn graph(n: usize, edges: &[(usize, usize)]) -> DirectedGraph {
        let mut g = DirectedGraph::new(space(n));
        for &(u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    #[test]
    fn identical_graphs_have_zero_error() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let d = edge_symmetric_difference(&g, &g);
        assert_eq!((d.total, d.false_positives, d.false_negatives), (0, 0, 0));
    }

    #[test]
    fn one_extra_edge() {
        let reference = graph(3, &[(0, 1), (1, 2)]);
        let est = graph(3, &[(0, 1), (1, 2), (2, 0)]);
        let d = edge_symmetric_difference(&est, &reference);
        assert_eq!((d.total, d.false_positives, d.false_negatives), (1, 1, 0));
    }

    #[test]
    fn disjoint_graphs_add_up() {
        let a = graph(6, &[(0, 1), (1, 2), (2, 3)]);
        let b = graph(6, &[(3, 4), (4, 5), (5, 0)]);
        let d = edge_symmetric_difference(&a, &b);
        assert_eq!((d.total, d.false_positives, d.false_negatives), (6, 3, 3));
        let r = edge_symmetric_difference(&b, &a);
        assert_eq!(r.total, d.total);
    }

    #[test]
    fn symmetric_difference_is_a_metric() {
        let a = graph(4, &[(0, 1), (1, 2)]);
        let b = graph(4, &[(0, 1), (2, 3)]);
        let c = graph(4, &[(1, 2), (2, 3), (3, 0)]);
        let ab = edge_symmetric_difference(&a, &b).total;
        let bc = edge_symmetric_difference(&b, &c).total;
        let ac = edge_symmetric_difference(&a, &c).total;
        assert!(ac <= ab + bc);
        assert_eq!(edge_symmetric_difference(&a, &a).total, 0);
    }

    #[test]
    fn reference_graph_is_built_from_orders() {
        let sp = space(4);
        let g = reference_graph_from_ordered(&sp, &[vec![0, 1, 2], vec![1, 3]]);
        assert_eq!(g.edge_count(), 3);
        assert!(g.contains_edge(1, 3));
    }

    #[test]
    fn summary_single_run() {
        let records = vec![RunRecord {
            edges: 5,
            symdiff: 2,
            false_positives: 1,
            false_negatives: 1,
            loglik: -10.0,
        }];
        let s = summarize_runs(&records).unwrap();
        assert_eq!(s.min_error, 2);
        assert_eq!(s.median_error, 2);
        assert_eq!(s.max_error, 2);
        assert_eq!(s.sparsest_index, 0);
        assert_eq!(s.clairvoyant_index, 0);
    }

    #[test]
    fn summary_orders_errors() {
        let mk = |edges, symdiff, loglik| RunRecord {
            edges,
            symdiff,
            false_positives: symdiff,
            false_negatives: 0,
            loglik,
        };
        let records = vec![mk(9, 3, -3.0), mk(7, 1, -1.0), mk(8, 2, -2.0)];
        let s = summarize_runs(&records).unwrap();
        assert_eq!((s.min_error, s.median_error, s.max_error), (1, 2, 3));
        assert_eq!(s.clairvoyant_index, 1);
        assert_eq!(s.sparsest_index, 1);
    }

    #[test]
    fn sparsest_tie_breaks_by_error_then_index() {
        let mk = |edges, symdiff| RunRecord {
            edges,
            symdiff,
            false_positives: 0,
            false_negatives: symdiff,
            loglik: 0.0,
        };
        let records = vec![mk(5, 4), mk(5, 2), mk(6, 0)];
        let s = summarize_runs(&records).unwrap();
        assert_eq!(s.sparsest_index, 1); // 5 edges, lower error
        assert_eq!(s.clairvoyant_index, 2);
        // Clairvoyant error never exceeds the sparsest pick's error.
        assert!(records[s.clairvoyant_index].symdiff <= records[s.sparsest_index].symdiff);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(summarize_runs(&[]).is_err());
    }

    #[test]
    fn lower_median_for_even_counts() {
        let mk = |symdiff| RunRecord {
            edges: 1,
            symdiff,
            false_positives: 0,
            false_negatives: symdiff,
            loglik: 0.0,
        };
        let records = vec![mk(1), mk(2), mk(3), mk(4)];
        let s = summarize_runs(&records).unwrap();
        assert_eq!(s.median_error, 2);
    }
}
