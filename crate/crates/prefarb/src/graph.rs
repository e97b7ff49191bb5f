//! Preference graphs and the candidate-selection transformations.
//!
//! A consistent preference vector induces a weighted directed graph: an edge
//! runs from the preferred security of each pair, weighted by the (positive)
//! preference strength. Candidate selection applies three transformations in
//! a fixed order:
//!
//! 1. **threshold** keeps only edges at least `kappa` strong,
//! 2. **prune** keeps only edges running directly from a source (no inbound
//!    edges) to a sink (no outbound edges), which removes intermediate
//!    vertices and leaves a bipartite graph,
//! 3. **select** picks the top sources and bottom sinks by utility.
//!
//! Because the input is consistent (edge direction follows utility order),
//! thresholding preserves asymmetry and sign-transitivity, and pruning
//! leaves the extremes of the ranking only.

use crate::potential::{ConsistentPreferences, UtilityVector};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

/// Maximum discrepancy tolerated between a preference value and the
/// difference of its endpoint utilities.
pub const CONSISTENCY_EPS: f64 = 1e-9;

#[derive(Error, Debug)]
pub enum GraphError {
    #[error("preferences ({n_prefs} securities) do not match utilities ({n_utils})")]
    SizeMismatch { n_prefs: usize, n_utils: usize },
    #[error(
        "preference ({i}, {j}) = {value} disagrees with utility difference {expected} \
         beyond tolerance"
    )]
    Inconsistent {
        i: usize,
        j: usize,
        value: f64,
        expected: f64,
    },
    #[error("edge ({from} -> {to}) invalid for {n} vertices or non-positive weight {weight}")]
    BadEdge {
        from: usize,
        to: usize,
        weight: f64,
        n: usize,
    },
    #[error("long and short candidates overlap at security {0}")]
    OverlappingLegs(usize),
}

/// A directed preference edge: `from` is preferred over `to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

/// Weighted directed preference graph over `n` securities, carrying the
/// utilities that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceGraph {
    n: usize,
    edges: Vec<Edge>,
    utilities: UtilityVector,
}

/// Degree-based vertex role in a preference graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexClass {
    /// Outbound edges only: preferred over everything it touches.
    Source,
    /// Inbound edges only: dominated by everything that touches it.
    Sink,
    /// Both inbound and outbound edges.
    Intermediate,
    /// No edges at all; never selected.
    Isolated,
}

impl PreferenceGraph {
    /// Builds a graph from explicit parts, validating edge sanity (weights
    /// positive, endpoints in range, no self loops).
    pub fn from_parts(
        n: usize,
        edges: Vec<Edge>,
        utilities: UtilityVector,
    ) -> Result<Self, GraphError> {
        if utilities.len() != n {
            return Err(GraphError::SizeMismatch {
                n_prefs: n,
                n_utils: utilities.len(),
            });
        }
        for e in &edges {
            let weight_ok = e.weight.is_finite() && e.weight > 0.0;
            if e.from >= n || e.to >= n || e.from == e.to || !weight_ok {
                return Err(GraphError::BadEdge {
                    from: e.from,
                    to: e.to,
                    weight: e.weight,
                    n,
                });
            }
        }
        Ok(Self {
            n,
            edges,
            utilities,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn utilities(&self) -> &UtilityVector {
        &self.utilities
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.n];
        for e in &self.edges {
            d[e.from] += 1;
        }
        d
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.n];
        for e in &self.edges {
            d[e.to] += 1;
        }
        d
    }

    /// Classifies every vertex by its degrees in this graph.
    pub fn classify(&self) -> Vec<VertexClass> {
        let din = self.in_degrees();
        let dout = self.out_degrees();
        (0..self.n)
            .map(|v| match (din[v] > 0, dout[v] > 0) {
                (false, true) => VertexClass::Source,
                (true, false) => VertexClass::Sink,
                (true, true) => VertexClass::Intermediate,
                (false, false) => VertexClass::Isolated,
            })
            .collect()
    }

    /// True when no vertex has both inbound and outbound edges.
    pub fn is_bipartite(&self) -> bool {
        !self.classify().contains(&VertexClass::Intermediate)
    }
}

/// Builds the preference graph of a consistent preference vector.
///
/// Every strictly positive pair value becomes one edge from the preferred
/// security; zero-valued pairs produce no edge. The preferences must agree
/// with the utilities (`value(i,j) = u[i] - u[j]` within [`CONSISTENCY_EPS`]).
pub fn build_graph(
    prefs: &ConsistentPreferences,
    utilities: &UtilityVector,
) -> Result<PreferenceGraph, GraphError> {
    let n = prefs.n();
    if utilities.len() != n {
        return Err(GraphError::SizeMismatch {
            n_prefs: n,
            n_utils: utilities.len(),
        });
    }
    let u = utilities.as_slice();
    let mut edges = Vec::new();
    for (i, j, v, _) in prefs.as_matrix().iter_pairs() {
        let expected = u[i] - u[j];
        if (v - expected).abs() > CONSISTENCY_EPS {
            return Err(GraphError::Inconsistent {
                i,
                j,
                value: v,
                expected,
            });
        }
        if v > 0.0 {
            edges.push(Edge {
                from: i,
                to: j,
                weight: v,
            });
        } else if v < 0.0 {
            edges.push(Edge {
                from: j,
                to: i,
                weight: -v,
            });
        }
    }
    Ok(PreferenceGraph {
        n,
        edges,
        utilities: utilities.clone(),
    })
}

/// Keeps edges whose weight is at least `kappa` (ties kept).
pub fn threshold_edges(graph: &PreferenceGraph, kappa: f64) -> PreferenceGraph {
    PreferenceGraph {
        n: graph.n,
        edges: graph
            .edges
            .iter()
            .copied()
            .filter(|e| e.weight >= kappa)
            .collect(),
        utilities: graph.utilities.clone(),
    }
}

/// Removes intermediate vertices: only edges that run directly from a
/// source to a sink survive, so every surviving vertex is an extreme of the
/// ranking and the result is bipartite.
pub fn prune_intermediate(graph: &PreferenceGraph) -> PreferenceGraph {
    let class = graph.classify();
    PreferenceGraph {
        n: graph.n,
        edges: graph
            .edges
            .iter()
            .copied()
            .filter(|e| class[e.from] == VertexClass::Source && class[e.to] == VertexClass::Sink)
            .collect(),
        utilities: graph.utilities.clone(),
    }
}

/// Literal one-sided degree rule kept only for comparison in tests: an edge
/// survives when its *tail* has either no inbound or no outbound edges. This
/// keeps edges from sources into intermediate vertices, so intermediates can
/// survive as spurious "sinks"; see the unit tests for the difference.
#[cfg(test)]
pub(crate) fn prune_tail_rule(graph: &PreferenceGraph) -> PreferenceGraph {
    let din = graph.in_degrees();
    let dout = graph.out_degrees();
    PreferenceGraph {
        n: graph.n,
        edges: graph
            .edges
            .iter()
            .copied()
            .filter(|e| din[e.from] == 0 || dout[e.from] == 0)
            .collect(),
        utilities: graph.utilities.clone(),
    }
}

/// Long/short candidates plus the surviving pairwise relation signs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TradeSignalSet {
    longs: BTreeSet<usize>,
    shorts: BTreeSet<usize>,
    relation: BTreeMap<(usize, usize), i8>,
}

impl TradeSignalSet {
    /// Builds a signal set, rejecting overlapping legs.
    pub fn new(
        longs: BTreeSet<usize>,
        shorts: BTreeSet<usize>,
        relation: BTreeMap<(usize, usize), i8>,
    ) -> Result<Self, GraphError> {
        if let Some(&i) = longs.intersection(&shorts).next() {
            return Err(GraphError::OverlappingLegs(i));
        }
        Ok(Self {
            longs,
            shorts,
            relation,
        })
    }

    pub fn longs(&self) -> &BTreeSet<usize> {
        &self.longs
    }

    pub fn shorts(&self) -> &BTreeSet<usize> {
        &self.shorts
    }

    pub fn is_empty(&self) -> bool {
        self.longs.is_empty() && self.shorts.is_empty()
    }

    /// Sign of the surviving relation between `i` and `j`: `1` when `i` is
    /// preferred over `j`, `-1` for the reverse, `0` when no edge survived.
    pub fn relation(&self, i: usize, j: usize) -> i8 {
        if i == j {
            return 0;
        }
        let (a, b, flip) = if i < j { (i, j, 1) } else { (j, i, -1) };
        self.relation.get(&(a, b)).map_or(0, |&s| s * flip)
    }

    pub(crate) fn relation_entries(&self) -> &BTreeMap<(usize, usize), i8> {
        &self.relation
    }
}

/// Selects up to `n_top` long candidates among the sources (highest utility
/// first) and up to `m_bottom` short candidates among the sinks (lowest
/// utility first). Utility ties break toward the lower security index.
/// Isolated vertices are never candidates.
pub fn select_vertices(
    graph: &PreferenceGraph,
    n_top: usize,
    m_bottom: usize,
) -> TradeSignalSet {
    let class = graph.classify();
    let u = graph.utilities.as_slice();

    let mut sources: Vec<usize> = (0..graph.n)
        .filter(|&v| class[v] == VertexClass::Source)
        .collect();
    sources.sort_by(|&a, &b| {
        u[b].partial_cmp(&u[a])
            .expect("utilities are finite")
            .then(a.cmp(&b))
    });
    let longs: BTreeSet<usize> = sources.into_iter().take(n_top).collect();

    let mut sinks: Vec<usize> = (0..graph.n)
        .filter(|&v| class[v] == VertexClass::Sink)
        .collect();
    sinks.sort_by(|&a, &b| {
        u[a].partial_cmp(&u[b])
            .expect("utilities are finite")
            .then(a.cmp(&b))
    });
    let shorts: BTreeSet<usize> = sinks.into_iter().take(m_bottom).collect();

    let mut relation = BTreeMap::new();
    for e in &graph.edges {
        let kept = (longs.contains(&e.from) || shorts.contains(&e.from))
            && (longs.contains(&e.to) || shorts.contains(&e.to));
        if kept {
            let (a, b, sign) = if e.from < e.to {
                (e.from, e.to, 1)
            } else {
                (e.to, e.from, -1)
            };
            relation.insert((a, b), sign);
        }
    }
    TradeSignalSet::new(longs, shorts, relation)
        .expect("sources and sinks are disjoint degree classes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{consistent_preferences, UtilityVector};
    use proptest::prelude::*;

    fn graph_from_utilities(vals: &[f64]) -> PreferenceGraph {
        let u = UtilityVector::centered(vals.to_vec());
        let rho = consistent_preferences(&u);
        build_graph(&rho, &u).unwrap()
    }

    #[test]
    fn build_graph_orients_edges_toward_lower_utility() {
        let g = graph_from_utilities(&[1.0, 0.0, -1.0]);
        let mut edges = g.edges().to_vec();
        edges.sort_by_key(|e| (e.from, e.to));
        assert_eq!(edges.len(), 3);
        assert_eq!((edges[0].from, edges[0].to), (0, 1));
        assert_eq!((edges[1].from, edges[1].to), (0, 2));
        assert!((edges[1].weight - 2.0).abs() < 1e-12);
        assert_eq!((edges[2].from, edges[2].to), (1, 2));
    }

    #[test]
    fn build_graph_rejects_inconsistent_input() {
        // A consistent matrix paired with a *different* utility vector must
        // be refused: the graph would not reflect the utilities it carries.
        let rho = consistent_preferences(&UtilityVector::centered(vec![1.0, 0.0, -1.0]));
        let err = build_graph(&rho, &UtilityVector::centered(vec![2.0, 0.0, -2.0]));
        assert!(matches!(err, Err(GraphError::Inconsistent { .. })));

        let err = build_graph(&rho, &UtilityVector::centered(vec![0.0, 0.0]));
        assert!(matches!(err, Err(GraphError::SizeMismatch { .. })));
    }

    #[test]
    fn zero_differences_produce_no_edges() {
        let g = graph_from_utilities(&[0.5, 0.5, -1.0]);
        // Pair (0,1) has identical utilities: no edge either way.
        assert!(g
            .edges()
            .iter()
            .all(|e| !(e.from == 0 && e.to == 1) && !(e.from == 1 && e.to == 0)));
        assert_eq!(g.edges().len(), 2);
    }

    #[test]
    fn threshold_keeps_ties_and_filters_weak_edges() {
        let u = UtilityVector::centered(vec![0.0, 0.0, 0.0, 0.0]);
        let edges = vec![
            Edge { from: 0, to: 1, weight: 2.5 },
            Edge { from: 0, to: 2, weight: 3.0 },
            Edge { from: 1, to: 3, weight: 3.5 },
        ];
        let g = PreferenceGraph::from_parts(4, edges, u).unwrap();
        let t = threshold_edges(&g, 3.0);
        let weights: Vec<f64> = t.edges().iter().map(|e| e.weight).collect();
        assert_eq!(weights, vec![3.0, 3.5], "kappa keeps >= kappa, drops the rest");
        // kappa = 0 keeps everything.
        assert_eq!(threshold_edges(&g, 0.0).edges().len(), 3);
        // Monotone: higher kappa keeps a subset.
        assert_eq!(threshold_edges(&g, 10.0).edges().len(), 0);
    }

    #[test]
    fn prune_removes_intermediate_vertices() {
        // Chain utilities (1, 0, -1): edges 0->1, 0->2, 1->2. Vertex 1 is
        // intermediate; only the direct source->sink edge survives.
        let g = graph_from_utilities(&[1.0, 0.0, -1.0]);
        let p = prune_intermediate(&g);
        assert_eq!(p.edges().len(), 1);
        assert_eq!((p.edges()[0].from, p.edges()[0].to), (0, 2));
        assert!(p.is_bipartite());

        // The literal tail-only rule keeps the source->intermediate edge as
        // well, leaving vertex 1 looking like a sink; the documented rule
        // removes it.
        let lit = prune_tail_rule(&g);
        let mut lit_edges: Vec<(usize, usize)> =
            lit.edges().iter().map(|e| (e.from, e.to)).collect();
        lit_edges.sort_unstable();
        assert_eq!(lit_edges, vec![(0, 1), (0, 2)]);
        let classes = lit.classify();
        assert_eq!(classes[1], VertexClass::Sink, "vertex 1 survives spuriously");
        let pruned_classes = p.classify();
        assert_eq!(pruned_classes[1], VertexClass::Isolated);
    }

    #[test]
    fn prune_is_identity_on_bipartite_graphs() {
        let g = graph_from_utilities(&[2.0, -1.0, -1.0]);
        // Edges 0->1 (3), 0->2 (3): already source->sink only.
        let p = prune_intermediate(&g);
        assert_eq!(p.edges(), g.edges());
        let pp = prune_intermediate(&p);
        assert_eq!(pp.edges(), p.edges(), "pruning is idempotent");
    }

    #[test]
    fn select_takes_extremes_by_utility() {
        // Utilities (3, 2, 1, -1, -2) with kappa high enough that only
        // 0 -> {3,4} and 1 -> 4 survive: sources {0, 1}, sinks {3, 4}.
        let u = UtilityVector::centered(vec![3.0, 2.0, 1.0, -1.0, -2.0]);
        let rho = consistent_preferences(&u);
        let g = build_graph(&rho, &u).unwrap();
        let t = threshold_edges(&g, 3.5);
        let classes = t.classify();
        assert_eq!(classes[0], VertexClass::Source);
        assert_eq!(classes[1], VertexClass::Source);
        assert_eq!(classes[3], VertexClass::Sink);
        assert_eq!(classes[4], VertexClass::Sink);
        let p = prune_intermediate(&t);
        let sel = select_vertices(&p, 1, 1);
        assert_eq!(sel.longs().iter().copied().collect::<Vec<_>>(), vec![0]);
        assert_eq!(sel.shorts().iter().copied().collect::<Vec<_>>(), vec![4]);
        // Surviving relation signs: 0 preferred over 4.
        assert_eq!(sel.relation(0, 4), 1);
        assert_eq!(sel.relation(4, 0), -1);
        assert_eq!(sel.relation(0, 3), 0, "edge to unselected vertex dropped");
    }

    #[test]
    fn select_breaks_ties_by_index() {
        // Sources 0 and 1 have equal utility; the lower index wins the slot.
        let u = UtilityVector::centered(vec![1.0, 1.0, -2.0]);
        let rho = consistent_preferences(&u);
        let g = build_graph(&rho, &u).unwrap();
        let t = threshold_edges(&g, 3.0);
        let sel = select_vertices(&prune_intermediate(&t), 1, 1);
        assert_eq!(sel.longs().iter().copied().collect::<Vec<_>>(), vec![0]);
        assert_eq!(sel.shorts().iter().copied().collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn isolated_vertices_are_never_selected() {
        let u = UtilityVector::centered(vec![5.0, -5.0, 0.0]);
        let edges = vec![Edge { from: 0, to: 1, weight: 10.0 }];
        let g = PreferenceGraph::from_parts(3, edges, u).unwrap();
        let sel = select_vertices(&g, 3, 3);
        assert!(!sel.longs().contains(&2));
        assert!(!sel.shorts().contains(&2));
        assert_eq!(sel.longs().len(), 1);
        assert_eq!(sel.shorts().len(), 1);
    }

    #[test]
    fn empty_graph_yields_empty_signals() {
        let g = graph_from_utilities(&[0.0, 0.0, 0.0]);
        assert!(g.edges().is_empty());
        let sel = select_vertices(&prune_intermediate(&threshold_edges(&g, 1.0)), 5, 5);
        assert!(sel.is_empty());
        // Zero quotas also yield empty legs.
        let g2 = graph_from_utilities(&[1.0, -1.0]);
        let sel2 = select_vertices(&g2, 0, 0);
        assert!(sel2.is_empty());
    }

    #[test]
    fn overlapping_legs_are_rejected() {
        let mut longs = BTreeSet::new();
        longs.insert(1);
        let mut shorts = BTreeSet::new();
        shorts.insert(1);
        assert!(matches!(
            TradeSignalSet::new(longs, shorts, BTreeMap::new()),
            Err(GraphError::OverlappingLegs(1))
        ));
    }

    /// Exhaustive checks used by the property tests below.
    fn check_relation_axioms(g: &PreferenceGraph) {
        let n = g.n();
        let mut sign = vec![0i8; n * n];
        for e in g.edges() {
            assert!(e.from != e.to, "irreflexivity");
            sign[e.from * n + e.to] = 1;
            sign[e.to * n + e.from] = -1;
        }
        for i in 0..n {
            for j in 0..n {
                if sign[i * n + j] == 1 {
                    assert_eq!(sign[j * n + i], -1, "asymmetry at ({i},{j})");
                }
                for k in 0..n {
                    if sign[i * n + j] == 1 && sign[j * n + k] == 1 {
                        assert_eq!(sign[i * n + k], 1, "transitivity at ({i},{j},{k})");
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn pipeline_preserves_relation_axioms(
            raw in proptest::collection::vec(-4.0f64..4.0, 2..=12),
            kappa in 0.0f64..5.0,
        ) {
            let u = UtilityVector::centered(raw);
            let rho = consistent_preferences(&u);
            let g = build_graph(&rho, &u).unwrap();
            let t = threshold_edges(&g, kappa);
            check_relation_axioms(&t);
            let p = prune_intermediate(&t);
            check_relation_axioms(&p);
            prop_assert!(p.is_bipartite());
        }

        #[test]
        fn threshold_is_monotone(
            raw in proptest::collection::vec(-4.0f64..4.0, 2..=10),
            k1 in 0.0f64..3.0,
            dk in 0.0f64..3.0,
        ) {
            let u = UtilityVector::centered(raw);
            let g = build_graph(&consistent_preferences(&u), &u).unwrap();
            let lo = threshold_edges(&g, k1);
            let hi = threshold_edges(&g, k1 + dk);
            for e in hi.edges() {
                prop_assert!(lo.edges().iter().any(|f| f == e));
            }
        }

        #[test]
        fn selection_is_scale_invariant(
            raw in proptest::collection::vec(-4.0f64..4.0, 2..=10),
            kappa in 0.01f64..3.0,
            pow in -3i32..=3,
        ) {
            // Powers of two scale utilities and kappa exactly, so the kept
            // edge set (a >= comparison) cannot flip through rounding.
            let alpha = (2.0f64).powi(pow);
            let u1 = UtilityVector::centered(raw.clone());
            let u2 = UtilityVector::centered(raw.iter().map(|v| v * alpha).collect());
            let pick = |u: &UtilityVector, k: f64| {
                let g = build_graph(&consistent_preferences(u), u).unwrap();
                select_vertices(&prune_intermediate(&threshold_edges(&g, k)), 3, 3)
            };
            let s1 = pick(&u1, kappa);
            let s2 = pick(&u2, kappa * alpha);
            prop_assert_eq!(s1.longs(), s2.longs());
            prop_assert_eq!(s1.shorts(), s2.shorts());
        }
    }
}
