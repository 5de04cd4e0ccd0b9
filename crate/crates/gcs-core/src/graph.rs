//! Constraint graphs, deficits and generic classification.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ElementKind, GcsProblem};

/// One edge per constrained pair; parallel constraints are merged and their counts summed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub u: usize,
    pub v: usize,
    pub label: i64,
    /// Indices of the constraints merged into this edge.
    pub constraints: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintGraph {
    pub ids: Vec<String>,
    pub kinds: Vec<ElementKind>,
    pub labels: Vec<i64>,
    pub edges: Vec<GraphEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("vertex subset must be nonempty and inside the graph")]
    InvalidSubset,
}

pub fn build_graph(problem: &GcsProblem) -> ConstraintGraph {
    let ids = problem.elements.iter().map(|e| e.id.clone()).collect();
    let kinds: Vec<ElementKind> = problem.elements.iter().map(|e| e.kind).collect();
    let labels = kinds.iter().map(|k| k.dof()).collect();
    let mut merged: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut edges: Vec<GraphEdge> = Vec::new();
    for (ci, [a, b]) in problem.endpoint_indices().into_iter().enumerate() {
        let key = (a.min(b), a.max(b));
        let label = problem.constraints[ci].kind.equations();
        match merged.get(&key) {
            Some(&ei) => {
                edges[ei].label += label;
                edges[ei].constraints.push(ci);
            }
            None => {
                merged.insert(key, edges.len());
                edges.push(GraphEdge { u: key.0, v: key.1, label, constraints: vec![ci] });
            }
        }
    }
    ConstraintGraph { ids, kinds, labels, edges }
}

impl ConstraintGraph {
    pub fn vertex_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<&GraphEdge> {
        self.edges.iter().find(|e| (e.u == a && e.v == b) || (e.u == b && e.v == a))
    }

    /// Σ l(v) − Σ l(e) over the subgraph induced by `subset`, or the whole graph.
    pub fn deficit(&self, subset: Option<&[usize]>) -> Result<i64, GraphError> {
        match subset {
            None => Ok(self.labels.iter().sum::<i64>() - self.edges.iter().map(|e| e.label).sum::<i64>()),
            Some(s) => {
                if s.is_empty() || s.iter().any(|&v| v >= self.vertex_count()) {
                    return Err(GraphError::InvalidSubset);
                }
                let mut inside = vec![false; self.vertex_count()];
                for &v in s {
                    inside[v] = true;
                }
                let vsum: i64 = (0..self.vertex_count()).filter(|&v| inside[v]).map(|v| self.labels[v]).sum();
                let esum: i64 = self.edges.iter().filter(|e| inside[e.u] && inside[e.v]).map(|e| e.label).sum();
                Ok(vsum - esum)
            }
        }
    }

    /// Connected components as sorted vertex lists, ordered by smallest vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.vertex_count();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut y = x;
            while p[y] != r {
                let next = p[y];
                p[y] = r;
                y = next;
            }
            r
        }
        for e in &self.edges {
            let (a, b) = (find(&mut parent, e.u), find(&mut parent, e.v));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in 0..n {
            let r = find(&mut parent, v);
            groups.entry(r).or_default().push(v);
        }
        groups.into_values().collect()
    }

    /// Subgraph induced by `vertices`, renumbered in the given order.
    pub fn induced(&self, vertices: &[usize]) -> ConstraintGraph {
        let mut map = vec![usize::MAX; self.vertex_count()];
        for (i, &v) in vertices.iter().enumerate() {
            map[v] = i;
        }
        ConstraintGraph {
            ids: vertices.iter().map(|&v| self.ids[v].clone()).collect(),
            kinds: vertices.iter().map(|&v| self.kinds[v]).collect(),
            labels: vertices.iter().map(|&v| self.labels[v]).collect(),
            edges: self
                .edges
                .iter()
                .filter(|e| map[e.u] != usize::MAX && map[e.v] != usize::MAX)
                .map(|e| GraphEdge { u: map[e.u], v: map[e.v], ..e.clone() })
                .collect(),
        }
    }

    fn is_unit(&self) -> bool {
        self.labels.iter().all(|&l| l == 2) && self.edges.iter().all(|e| e.label == 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    GenericallyOverConstrained,
    GenericallyUnderConstrained,
    GenericallyWellConstrained,
    /// Single circle-circle edge of deficit 2: the missing equation is a rotational symmetry.
    Symmetric,
}

impl Verdict {
    pub fn describe(self) -> &'static str {
        match self {
            Verdict::GenericallyOverConstrained => "over-constrained",
            Verdict::GenericallyUnderConstrained => "under-constrained",
            Verdict::GenericallyWellConstrained => "well-constrained",
            Verdict::Symmetric => "symmetric",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    /// Vertices of an induced subgraph with deficit below 3; present only when over-constrained.
    pub witness: Option<Vec<usize>>,
    pub deficit: i64,
    /// False when a mixed-label component was too large for the exhaustive subgraph scan.
    pub complete: bool,
}

/// Largest component size for the exhaustive subgraph scan on mixed labels.
pub const SCAN_BUDGET: usize = 20;

pub fn classify(graph: &ConstraintGraph) -> Classification {
    let deficit = graph.deficit(None).unwrap_or(0);
    if graph.vertex_count() == 0 {
        return Classification { verdict: Verdict::GenericallyWellConstrained, witness: None, deficit, complete: true };
    }
    if graph.vertex_count() == 2 && graph.edges.len() == 1 && deficit == 2 && graph.kinds.iter().all(|k| k.is_centered()) {
        return Classification { verdict: Verdict::Symmetric, witness: None, deficit, complete: true };
    }
    let mut complete = true;
    let mut under = false;
    for comp in graph.components() {
        let sub = graph.induced(&comp);
        let (witness, exhaustive) = over_witness(&sub);
        complete &= exhaustive;
        if let Some(w) = witness {
            let mut w: Vec<usize> = w.into_iter().map(|i| comp[i]).collect();
            w.sort_unstable();
            return Classification { verdict: Verdict::GenericallyOverConstrained, witness: Some(w), deficit, complete };
        }
        if sub.deficit(None).unwrap_or(0) > 3 {
            under = true;
        }
    }
    let verdict = if under { Verdict::GenericallyUnderConstrained } else { Verdict::GenericallyWellConstrained };
    Classification { verdict, witness: None, deficit, complete }
}

/// Some induced subgraph with at least two vertices and deficit below 3, if one exists.
fn over_witness(g: &ConstraintGraph) -> (Option<Vec<usize>>, bool) {
    if g.vertex_count() < 2 {
        return (None, true);
    }
    if g.is_unit() {
        let w = pebble_game(g.vertex_count(), &g.edges.iter().map(|e| (e.u, e.v)).collect::<Vec<_>>());
        return (w.map(|w| shrink_witness(g, w)), true);
    }
    if g.vertex_count() > SCAN_BUDGET {
        return (None, false);
    }
    (exhaustive_scan(g), true)
}

/// (2,3)-sparsity check. Returns the vertices of an overloaded rigid block on failure.
pub fn pebble_game(n: usize, edges: &[(usize, usize)]) -> Option<Vec<usize>> {
    let mut pebbles = vec![2u8; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];

    fn reach(out: &[Vec<usize>], start: usize, seen: &mut [bool], order: &mut Vec<usize>) {
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(x) = stack.pop() {
            order.push(x);
            for &y in &out[x] {
                if !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }

    // Move one free pebble onto `u` along directed arcs, never through `avoid`.
    fn gather(out: &mut [Vec<usize>], pebbles: &mut [u8], u: usize, avoid: usize) -> bool {
        let n = pebbles.len();
        let mut prev = vec![usize::MAX; n];
        let mut seen = vec![false; n];
        seen[u] = true;
        seen[avoid] = true;
        let mut stack = vec![u];
        while let Some(x) = stack.pop() {
            for &y in &out[x] {
                if seen[y] {
                    continue;
                }
                seen[y] = true;
                prev[y] = x;
                if pebbles[y] > 0 {
                    pebbles[y] -= 1;
                    pebbles[u] += 1;
                    let mut cur = y;
                    while cur != u {
                        let p = prev[cur];
                        let pos = out[p].iter().position(|&z| z == cur).unwrap();
                        out[p].swap_remove(pos);
                        out[cur].push(p);
                        cur = p;
                    }
                    return true;
                }
                stack.push(y);
            }
        }
        false
    }

    for &(u, v) in edges {
        loop {
            if pebbles[u] + pebbles[v] >= 4 {
                pebbles[u] -= 1;
                out[u].push(v);
                break;
            }
            let moved = (pebbles[u] < 2 && gather(&mut out, &mut pebbles, u, v))
                || (pebbles[v] < 2 && gather(&mut out, &mut pebbles, v, u));
            if !moved {
                let mut seen = vec![false; n];
                let mut order = Vec::new();
                reach(&out, u, &mut seen, &mut order);
                if !seen[v] {
                    reach(&out, v, &mut seen, &mut order);
                }
                order.sort_unstable();
                return Some(order);
            }
        }
    }
    None
}

/// Drop vertices while the induced deficit stays below 3.
fn shrink_witness(g: &ConstraintGraph, mut w: Vec<usize>) -> Vec<usize> {
    loop {
        let mut changed = false;
        for i in (0..w.len()).rev() {
            if w.len() <= 2 {
                break;
            }
            let mut trial = w.clone();
            trial.remove(i);
            if g.deficit(Some(&trial)).map(|d| d < 3).unwrap_or(false) {
                w = trial;
                changed = true;
            }
        }
        if !changed {
            return w;
        }
    }
}

/// Smallest (then lexicographically first) vertex set of size ≥ 2 with deficit below 3.
fn exhaustive_scan(g: &ConstraintGraph) -> Option<Vec<usize>> {
    let n = g.vertex_count();
    let mut adj: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
    for e in &g.edges {
        adj[e.u].push((e.v, e.label));
        adj[e.v].push((e.u, e.label));
    }
    let total = 1usize << n;
    let mut dp = vec![0i64; total];
    let mut best: Option<(u32, usize)> = None;
    for mask in 1..total {
        let v = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        let inner: i64 = adj[v].iter().filter(|(w, _)| rest >> w & 1 == 1).map(|(_, l)| l).sum();
        dp[mask] = dp[rest] + g.labels[v] - inner;
        let size = mask.count_ones();
        if size >= 2 && dp[mask] < 3 {
            let better = match best {
                None => true,
                Some((s, _)) => size < s,
            };
            if better {
                best = Some((size, mask));
            }
        }
    }
    best.map(|(_, m)| (0..n).filter(|v| m >> v & 1 == 1).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharingViolation {
    pub element: String,
    /// Indices into the cluster list passed in.
    pub clusters: Vec<usize>,
}

/// Variable-radius circles that occur in two or more rigid clusters.
pub fn check_vradius_sharing(problem: &GcsProblem, clusters: &[Vec<usize>]) -> Vec<SharingViolation> {
    problem
        .elements
        .iter()
        .enumerate()
        .filter(|(_, e)| e.kind == ElementKind::VariableCircle)
        .filter_map(|(i, e)| {
            let hits: Vec<usize> = clusters.iter().enumerate().filter(|(_, c)| c.contains(&i)).map(|(k, _)| k).collect();
            (hits.len() >= 2).then(|| SharingViolation { element: e.id.clone(), clusters: hits })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Constraint, ConstraintKind, Element};

    fn points(n: usize) -> Vec<Element> {
        (1..=n).map(|i| Element::point(format!("v{i}"))).collect()
    }

    fn dist_problem(n: usize, pairs: &[(usize, usize)]) -> GcsProblem {
        let cs = pairs
            .iter()
            .enumerate()
            .map(|(i, (a, b))| Constraint::distance(format!("e{i}"), format!("v{a}"), format!("v{b}"), 1.0))
            .collect();
        GcsProblem::new(points(n), cs)
    }

    const TRUSS: [(usize, usize); 5] = [(1, 2), (2, 3), (3, 1), (2, 4), (3, 4)];
    const OVERLAPPING_K4: [(usize, usize); 9] = [(1, 2), (1, 3), (1, 4), (2, 3), (2, 4), (3, 4), (3, 5), (4, 6), (5, 6)];
    const K33: [(usize, usize); 9] = [(1, 4), (1, 5), (1, 6), (2, 4), (2, 5), (2, 6), (3, 4), (3, 5), (3, 6)];

    #[test]
    fn truss_graph_labels() {
        let g = build_graph(&dist_problem(4, &TRUSS));
        assert_eq!(g.labels, vec![2; 4]);
        assert_eq!(g.edges.len(), 5);
        assert!(g.edges.iter().all(|e| e.label == 1));
        assert_eq!(g.deficit(None), Ok(3));
    }

    #[test]
    fn concentric_circles_edge_label_two() {
        let p = GcsProblem::new(
            vec![Element::fixed_circle("C1", 1.0), Element::fixed_circle("C2", 2.0)],
            vec![Constraint::new("cc", ConstraintKind::PointOnPoint, "C1", "C2", None)],
        );
        let g = build_graph(&p);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].label, 2);
        assert_eq!(classify(&g).verdict, Verdict::Symmetric);
    }

    #[test]
    fn parallel_constraints_merge() {
        let p = GcsProblem::new(
            vec![Element::point("P"), Element::line("L")],
            vec![
                Constraint::new("a", ConstraintKind::PointOnLine, "P", "L", None),
                Constraint::new("b", ConstraintKind::PointLineDistance, "L", "P", Some(1.0)),
            ],
        );
        let g = build_graph(&p);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].label, 2);
        assert_eq!(g.edges[0].constraints, vec![0, 1]);
    }

    #[test]
    fn single_point() {
        let g = build_graph(&GcsProblem::new(points(1), vec![]));
        assert_eq!((g.vertex_count(), g.edges.len()), (1, 0));
    }

    #[test]
    fn empty_subset_rejected() {
        let g = build_graph(&dist_problem(4, &TRUSS));
        assert_eq!(g.deficit(Some(&[])), Err(GraphError::InvalidSubset));
        assert_eq!(g.deficit(Some(&[9])), Err(GraphError::InvalidSubset));
    }

    #[test]
    fn overlapping_k4_is_over_constrained() {
        let g = build_graph(&dist_problem(6, &OVERLAPPING_K4));
        assert_eq!(g.deficit(None), Ok(3));
        assert_eq!(g.deficit(Some(&[0, 1, 2, 3])), Ok(2));
        assert_eq!(g.deficit(Some(&[2, 3, 4, 5])), Ok(4));
        let c = classify(&g);
        assert_eq!(c.verdict, Verdict::GenericallyOverConstrained);
        assert_eq!(c.witness, Some(vec![0, 1, 2, 3]));
    }

    #[test]
    fn k33_well_constrained() {
        let g = build_graph(&dist_problem(6, &K33));
        let c = classify(&g);
        assert_eq!(c.verdict, Verdict::GenericallyWellConstrained);
        assert_eq!(c.deficit, 3);
    }

    #[test]
    fn truss_minus_edge_under() {
        let g = build_graph(&dist_problem(4, &TRUSS[..4]));
        let c = classify(&g);
        assert_eq!(c.verdict, Verdict::GenericallyUnderConstrained);
        assert_eq!(c.deficit, 4);
    }

    #[test]
    fn mixed_labels_use_scan() {
        // Point and line joined by an incidence and a distance: deficit 2 on that pair.
        let p = GcsProblem::new(
            vec![Element::point("P"), Element::line("L"), Element::point("Q")],
            vec![
                Constraint::new("a", ConstraintKind::PointOnLine, "P", "L", None),
                Constraint::new("b", ConstraintKind::PointLineDistance, "P", "L", Some(1.0)),
                Constraint::distance("c", "P", "Q", 1.0),
            ],
        );
        let c = classify(&build_graph(&p));
        assert_eq!(c.verdict, Verdict::GenericallyOverConstrained);
        assert_eq!(c.witness, Some(vec![0, 1]));
    }

    #[test]
    fn not_laman_sharing() {
        let p = GcsProblem::new(
            vec![Element::variable_circle("V1"), Element::point("V2"), Element::point("V3")],
            vec![],
        );
        let v = check_vradius_sharing(&p, &[vec![0, 1], vec![0, 2]]);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].element, "V1");
        assert!(check_vradius_sharing(&p, &[vec![0, 1, 2]]).is_empty());
        let q = GcsProblem::new(points(3), vec![]);
        assert!(check_vradius_sharing(&q, &[vec![0, 1], vec![1, 2]]).is_empty());
    }
}
