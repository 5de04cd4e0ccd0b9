//! Minimal subsystems, serial orders, triangle decomposition and construction plans.
//!
//! Decomposition works bottom-up: clusters are seeded at minimal subsystems, grown one
//! element at a time, and merged three at a time when they pairwise share one element.
//! The resulting tree is flattened into steps that run inside local cluster frames.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::wrap_pi;
use crate::graph::{build_graph, ConstraintGraph};
use crate::model::{validate, ConstraintKind, ElementKind, GcsProblem, ValidationReport};

/// How an element takes part in constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Class {
    /// Points and fixed circles: placed by their center.
    Centered,
    Line,
    /// Variable-radius circles.
    Radius,
}

pub fn class_of(kind: ElementKind) -> Class {
    match kind {
        ElementKind::Line => Class::Line,
        ElementKind::VariableCircle | ElementKind::Arc => Class::Radius,
        _ => Class::Centered,
    }
}

/// The scalar a binary constraint imposes, seen from the element being constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelKind {
    /// Distance between centers.
    Dist,
    /// Unsigned distance between a center and a line.
    LineDist,
    /// Directed angle between two lines, modulo π.
    Angle,
    /// Tangency or incidence on the perimeter of a variable circle.
    Perimeter,
}

/// Endpoint whose circle carries an on-circle incidence expressed as a valueless center distance.
pub fn incidence_circle(kinds: [ElementKind; 2], ends: [usize; 2]) -> usize {
    if kinds[1].is_circle() {
        ends[1]
    } else {
        ends[0]
    }
}

/// Precomputed lookups shared by the decomposition passes.
pub struct Ctx<'a> {
    pub problem: &'a GcsProblem,
    pub graph: ConstraintGraph,
    pub ends: Vec<[usize; 2]>,
}

impl<'a> Ctx<'a> {
    pub fn new(problem: &'a GcsProblem) -> Ctx<'a> {
        Ctx { problem, graph: build_graph(problem), ends: problem.endpoint_indices() }
    }

    pub fn kind(&self, v: usize) -> ElementKind {
        self.problem.elements[v].kind
    }

    pub fn class(&self, v: usize) -> Class {
        class_of(self.kind(v))
    }

    /// The sole constraint of a graph edge, if the edge carries exactly one equation.
    pub fn single(&self, e: usize) -> Option<usize> {
        let edge = &self.graph.edges[e];
        (edge.constraints.len() == 1 && edge.label == 1).then(|| edge.constraints[0])
    }

    /// Relation constraint `c` imposes on element `to`; `None` if it cannot drive a construction.
    pub fn rel_to(&self, c: usize, to: usize) -> Option<RelKind> {
        let con = &self.problem.constraints[c];
        let [a, b] = self.ends[c];
        let to_radius = self.class(to) == Class::Radius;
        match con.kind {
            ConstraintKind::PointPointDistance => Some(RelKind::Dist),
            ConstraintKind::PointLineDistance | ConstraintKind::PointOnLine => Some(RelKind::LineDist),
            ConstraintKind::LineLineAngle => Some(RelKind::Angle),
            ConstraintKind::TangentLineCircle if to_radius => Some(RelKind::Perimeter),
            ConstraintKind::TangentLineCircle => Some(RelKind::LineDist),
            ConstraintKind::TangentCircleCircle if to_radius => Some(RelKind::Perimeter),
            ConstraintKind::TangentCircleCircle => Some(RelKind::Dist),
            ConstraintKind::CenterDistance => {
                let holder = incidence_circle([self.kind(a), self.kind(b)], [a, b]);
                match (con.value, to_radius) {
                    (None, true) if holder == to => Some(RelKind::Perimeter),
                    (_, true) => None,
                    (Some(_), false) => Some(RelKind::Dist),
                    (None, false) if self.kind(holder).is_circle() => Some(RelKind::Dist),
                    (None, false) => None,
                }
            }
            ConstraintKind::PointOnPoint | ConstraintKind::LineLineParallelDistance => None,
        }
    }

    /// Whether a constraint fixes its relation at exactly zero (an incidence).
    pub fn is_incidence(&self, c: usize) -> bool {
        let con = &self.problem.constraints[c];
        match con.kind {
            ConstraintKind::PointOnLine => true,
            ConstraintKind::PointLineDistance => con.value == Some(0.0),
            _ => false,
        }
    }

    /// Whether a single-constraint edge forms a minimal subsystem that fixes a frame.
    pub fn edge_minimal(&self, e: usize) -> Option<usize> {
        let c = self.single(e)?;
        let [a, b] = self.ends[c];
        if self.class(a) == Class::Radius || self.class(b) == Class::Radius {
            return None;
        }
        match self.rel_to(c, b)? {
            RelKind::Dist => {
                let v = self.problem.constraints[c].value;
                (self.problem.constraints[c].kind != ConstraintKind::PointPointDistance || v.unwrap_or(0.0) > 0.0).then_some(c)
            }
            RelKind::LineDist => Some(c),
            RelKind::Angle => {
                let a = wrap_pi(self.problem.constraints[c].value.unwrap_or(0.0));
                (a > 1e-12 && std::f64::consts::PI - a > 1e-12).then_some(c)
            }
            RelKind::Perimeter => None,
        }
    }
}

/// A two-element subsystem that can be placed in canonical coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalPair {
    pub edge: usize,
    pub constraint: usize,
    pub elements: [usize; 2],
}

pub fn find_minimal(problem: &GcsProblem) -> Vec<MinimalPair> {
    let ctx = Ctx::new(problem);
    (0..ctx.graph.edges.len())
        .filter_map(|e| ctx.edge_minimal(e).map(|c| MinimalPair { edge: e, constraint: c, elements: ctx.ends[c] }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum SerialOutcome {
    Serialized { order: Vec<usize> },
    NotSerializable { cluster: Vec<usize> },
}

/// Greedy serial closure from a starting pair: absorb any element constrained by at least
/// as many equations to placed elements as it has degrees of freedom.
pub fn serialize(graph: &ConstraintGraph, start: [usize; 2]) -> SerialOutcome {
    let n = graph.vertex_count();
    let mut placed = vec![false; n];
    let mut order = vec![start[0], start[1]];
    placed[start[0]] = true;
    placed[start[1]] = true;
    loop {
        let next = (0..n).find(|&x| {
            !placed[x]
                && graph
                    .edges
                    .iter()
                    .filter(|e| (e.u == x && placed[e.v]) || (e.v == x && placed[e.u]))
                    .map(|e| e.label)
                    .sum::<i64>()
                    >= graph.labels[x]
        });
        match next {
            Some(x) => {
                placed[x] = true;
                order.push(x);
            }
            None => break,
        }
    }
    if order.len() == n {
        SerialOutcome::Serialized { order }
    } else {
        order.sort_unstable();
        SerialOutcome::NotSerializable { cluster: order }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    /// One constraint edge.
    Leaf,
    /// A vertex pair with no constraint, used by completion.
    VirtualLeaf,
    /// Three children pairwise sharing one element.
    Triangle,
    /// A variable circle placed from three elements of one child cluster.
    VarCircleSequential { circle: usize },
    /// Two clusters sharing one element, joined through a variable circle.
    VarCircleMerge { circle: usize, shared: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub kind: NodeKind,
    /// Sorted element indices.
    pub vertices: Vec<usize>,
    /// Sorted graph edge indices covered by the node.
    pub edges: Vec<usize>,
    pub children: Vec<usize>,
    /// For triangle nodes: `[c0∩c1, c1∩c2, c2∩c0]`.
    pub shared: Option<[usize; 3]>,
    /// For virtual leaves: the unconstrained pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<[usize; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionTree {
    pub nodes: Vec<TreeNode>,
    pub root: usize,
    /// Unconstrained pairs introduced by a permissive decomposition.
    pub virtual_pairs: Vec<[usize; 2]>,
}

impl DecompositionTree {
    /// Leaves as sorted (edge or pair) descriptors: `(u, v, is_virtual)`.
    pub fn leaf_multiset(&self, graph: &ConstraintGraph) -> Vec<(usize, usize, bool)> {
        let mut out: Vec<(usize, usize, bool)> = self
            .nodes
            .iter()
            .filter_map(|n| match n.kind {
                NodeKind::Leaf => {
                    let e = &graph.edges[n.edges[0]];
                    Some((e.u.min(e.v), e.u.max(e.v), false))
                }
                NodeKind::VirtualLeaf => n.pair.map(|[a, b]| (a.min(b), a.max(b), true)),
                _ => None,
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Post-order listing of node indices.
    pub fn post_order(&self) -> Vec<usize> {
        fn walk(t: &DecompositionTree, i: usize, out: &mut Vec<usize>) {
            for &c in &t.nodes[i].children {
                walk(t, c, out);
            }
            out.push(i);
        }
        let mut out = Vec::new();
        walk(self, self.root, &mut out);
        out
    }

    /// Vertex sets of the root's children, the top-level clusters.
    pub fn top_clusters(&self) -> Vec<Vec<usize>> {
        self.nodes[self.root].children.iter().map(|&c| self.nodes[c].vertices.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("problem is invalid: {}", .0.violations.first().map(|v| v.message.as_str()).unwrap_or(""))]
    Invalid(ValidationReport),
    #[error("problem has fewer than two elements")]
    TooSmall,
    #[error("not triangle-decomposable: {diagnostic}")]
    NotTriangleDecomposable { diagnostic: String, clusters: Vec<Vec<usize>> },
    #[error("tree does not match problem: {0}")]
    Mismatch(String),
}

/// Source of completion edges in a permissive decomposition.
#[derive(Debug, Clone, PartialEq)]
pub enum CompletionSource {
    /// Any unconstrained pair, lowest element indices first.
    Free,
    /// Only pairs from this list, earliest first.
    Pool(Vec<[usize; 2]>),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanOptions {
    /// Rotates edge and element tie-breaking to force a different decomposition.
    pub seed: usize,
    /// When set, stuck decompositions are completed with unconstrained pairs.
    pub completion: Option<CompletionSource>,
}

#[derive(Debug, Clone)]
struct Cl {
    verts: BTreeSet<usize>,
    node: usize,
}

/// An edge of the working graph: a graph edge or a virtual pair.
#[derive(Debug, Clone, Copy)]
struct WEdge {
    u: usize,
    v: usize,
    graph_edge: Option<usize>,
}

struct Decomposer<'c, 'a> {
    ctx: &'c Ctx<'a>,
    edges: Vec<WEdge>,
    rank: Vec<usize>,
    vrank: Vec<usize>,
    used: Vec<bool>,
    nodes: Vec<TreeNode>,
    active: Vec<Cl>,
    completion: Option<CompletionSource>,
    virtual_pairs: Vec<[usize; 2]>,
}

impl<'c, 'a> Decomposer<'c, 'a> {
    fn new(ctx: &'c Ctx<'a>, opts: &PlanOptions) -> Self {
        let m = ctx.graph.edges.len();
        let n = ctx.graph.vertex_count();
        let edges = ctx.graph.edges.iter().enumerate().map(|(i, e)| WEdge { u: e.u, v: e.v, graph_edge: Some(i) }).collect();
        let rank = (0..m).map(|e| (e + m - opts.seed % m.max(1)) % m.max(1)).collect();
        let vrank = (0..n).map(|v| (v + n - opts.seed % n.max(1)) % n.max(1)).collect();
        Decomposer {
            ctx,
            edges,
            rank,
            vrank,
            used: vec![false; m],
            nodes: Vec::new(),
            active: Vec::new(),
            completion: opts.completion.clone(),
            virtual_pairs: Vec::new(),
        }
    }

    fn class(&self, v: usize) -> Class {
        self.ctx.class(v)
    }

    fn other(&self, e: usize, x: usize) -> usize {
        if self.edges[e].u == x {
            self.edges[e].v
        } else {
            self.edges[e].u
        }
    }

    fn rel(&self, e: usize, to: usize) -> Option<RelKind> {
        match self.edges[e].graph_edge {
            Some(ge) => self.ctx.rel_to(self.ctx.single(ge)?, to),
            None => Some(match (self.class(to), self.class(self.other(e, to))) {
                (Class::Line, Class::Line) => RelKind::Angle,
                (Class::Line, _) | (_, Class::Line) => RelKind::LineDist,
                _ => RelKind::Dist,
            }),
        }
    }

    /// Unused edges joining `x` to a vertex in `set`, in tie-break order.
    fn edges_into(&self, x: usize, set: &BTreeSet<usize>) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.edges.len())
            .filter(|&e| !self.used[e])
            .filter(|&e| {
                let w = self.edges[e];
                (w.u == x && set.contains(&w.v)) || (w.v == x && set.contains(&w.u))
            })
            .collect();
        out.sort_by_key(|&e| self.rank[e]);
        out
    }

    fn leaf(&mut self, e: usize) -> usize {
        self.used[e] = true;
        let w = self.edges[e];
        let (kind, edges, pair) = match w.graph_edge {
            Some(ge) => (NodeKind::Leaf, vec![ge], None),
            None => (NodeKind::VirtualLeaf, Vec::new(), Some([w.u, w.v])),
        };
        let mut vertices = vec![w.u, w.v];
        vertices.sort_unstable();
        self.nodes.push(TreeNode { kind, vertices, edges, children: Vec::new(), shared: None, pair });
        self.nodes.len() - 1
    }

    fn push_node(&mut self, kind: NodeKind, children: Vec<usize>, shared: Option<[usize; 3]>) -> usize {
        let mut verts = BTreeSet::new();
        let mut edges = BTreeSet::new();
        for &c in &children {
            verts.extend(self.nodes[c].vertices.iter().copied());
            edges.extend(self.nodes[c].edges.iter().copied());
        }
        self.nodes.push(TreeNode {
            kind,
            vertices: verts.into_iter().collect(),
            edges: edges.into_iter().collect(),
            children,
            shared,
            pair: None,
        });
        self.nodes.len() - 1
    }

    fn sorted_clusters(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.active.len()).collect();
        idx.sort_by_key(|&i| {
            let c = &self.active[i];
            (c.verts.len(), c.verts.iter().map(|&v| self.vrank[v]).min().unwrap_or(0))
        });
        idx
    }

    fn vertices_by_rank(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.ctx.graph.vertex_count()).collect();
        v.sort_by_key(|&x| self.vrank[x]);
        v
    }

    fn all_lines(&self, vs: &[usize]) -> bool {
        vs.iter().all(|&v| self.class(v) == Class::Line)
    }

    fn replace(&mut self, remove: &[usize], verts: BTreeSet<usize>, node: usize) {
        let mut rm = remove.to_vec();
        rm.sort_unstable_by(|a, b| b.cmp(a));
        for i in rm {
            self.active.remove(i);
        }
        self.active.push(Cl { verts, node });
    }

    /// Two usable edges from `x` into the cluster, forming a valid construction case.
    fn growth_pair(&self, x: usize, cands: &[usize]) -> Option<(usize, usize)> {
        let usable: Vec<usize> = cands.iter().copied().filter(|&e| self.rel(e, x).is_some()).collect();
        for i in 0..usable.len() {
            for j in i + 1..usable.len() {
                let (a, b) = (self.other(usable[i], x), self.other(usable[j], x));
                if a != b && !self.all_lines(&[a, b, x]) {
                    return Some((usable[i], usable[j]));
                }
            }
        }
        None
    }

    fn try_grow(&mut self) -> bool {
        for ci in self.sorted_clusters() {
            for x in self.vertices_by_rank() {
                if self.active[ci].verts.contains(&x) {
                    continue;
                }
                let cands = self.edges_into(x, &self.active[ci].verts);
                if self.class(x) == Class::Radius {
                    let per: Vec<usize> = cands.into_iter().filter(|&e| self.rel(e, x) == Some(RelKind::Perimeter)).collect();
                    if per.len() >= 3 {
                        let leaves: Vec<usize> = per[..3].iter().map(|&e| self.leaf(e)).collect();
                        let mut children = vec![self.active[ci].node];
                        children.extend(leaves);
                        let node = self.push_node(NodeKind::VarCircleSequential { circle: x }, children, None);
                        let mut verts = self.active[ci].verts.clone();
                        verts.insert(x);
                        self.replace(&[ci], verts, node);
                        return true;
                    }
                    continue;
                }
                if let Some((e1, e2)) = self.growth_pair(x, &cands) {
                    let (a, b) = (self.other(e1, x), self.other(e2, x));
                    let (l1, l2) = (self.leaf(e1), self.leaf(e2));
                    let node = self.push_node(NodeKind::Triangle, vec![self.active[ci].node, l1, l2], Some([a, x, b]));
                    let mut verts = self.active[ci].verts.clone();
                    verts.insert(x);
                    self.replace(&[ci], verts, node);
                    return true;
                }
            }
        }
        false
    }

    fn single_shared(&self, i: usize, j: usize) -> Option<usize> {
        let mut it = self.active[i].verts.intersection(&self.active[j].verts);
        let s = *it.next()?;
        if it.next().is_some() || self.class(s) == Class::Radius {
            return None;
        }
        Some(s)
    }

    fn try_triple(&mut self) -> bool {
        let order = self.sorted_clusters();
        for (p, &i) in order.iter().enumerate() {
            for (q, &j) in order.iter().enumerate().skip(p + 1) {
                let Some(u) = self.single_shared(i, j) else { continue };
                for &k in order.iter().skip(q + 1) {
                    let (Some(v), Some(w)) = (self.single_shared(j, k), self.single_shared(k, i)) else { continue };
                    if u == v || v == w || w == u || self.all_lines(&[u, v, w]) {
                        continue;
                    }
                    let children = vec![self.active[i].node, self.active[j].node, self.active[k].node];
                    let node = self.push_node(NodeKind::Triangle, children, Some([u, v, w]));
                    let mut verts = self.active[i].verts.clone();
                    verts.extend(self.active[j].verts.iter().copied());
                    verts.extend(self.active[k].verts.iter().copied());
                    self.replace(&[i, j, k], verts, node);
                    return true;
                }
                // Two clusters and one connecting edge.
                let mut best: Option<usize> = None;
                for e in 0..self.edges.len() {
                    if self.used[e] {
                        continue;
                    }
                    let w = self.edges[e];
                    let (ci, cj) = (&self.active[i].verts, &self.active[j].verts);
                    let fits = |a: usize, b: usize| ci.contains(&a) && !cj.contains(&a) && cj.contains(&b) && !ci.contains(&b);
                    if !(fits(w.u, w.v) || fits(w.v, w.u)) {
                        continue;
                    }
                    if [w.u, w.v].iter().any(|&x| self.class(x) == Class::Radius) {
                        continue;
                    }
                    if self.rel(e, w.u).is_none() || self.rel(e, w.v).is_none() || self.all_lines(&[u, w.u, w.v]) {
                        continue;
                    }
                    if best.is_none_or(|b| self.rank[e] < self.rank[b]) {
                        best = Some(e);
                    }
                }
                if let Some(e) = best {
                    let w = self.edges[e];
                    let (a, b) = if self.active[i].verts.contains(&w.u) { (w.u, w.v) } else { (w.v, w.u) };
                    let l = self.leaf(e);
                    let children = vec![self.active[i].node, self.active[j].node, l];
                    let node = self.push_node(NodeKind::Triangle, children, Some([u, b, a]));
                    let mut verts = self.active[i].verts.clone();
                    verts.extend(self.active[j].verts.iter().copied());
                    self.replace(&[i, j], verts, node);
                    return true;
                }
            }
        }
        false
    }

    fn try_vmerge(&mut self) -> bool {
        let order = self.sorted_clusters();
        for (p, &i) in order.iter().enumerate() {
            for &j in order.iter().skip(p + 1) {
                let Some(e0) = self.single_shared(i, j) else { continue };
                for x in self.vertices_by_rank() {
                    if self.class(x) != Class::Radius || self.active[i].verts.contains(&x) || self.active[j].verts.contains(&x) {
                        continue;
                    }
                    let per = |d: &Self, c: usize| -> Vec<usize> {
                        let mut set = d.active[c].verts.clone();
                        set.remove(&e0);
                        d.edges_into(x, &set).into_iter().filter(|&e| d.rel(e, x) == Some(RelKind::Perimeter)).collect()
                    };
                    let (pi, pj) = (per(self, i), per(self, j));
                    if pi.len() < 2 || pj.len() < 2 {
                        continue;
                    }
                    let mut children = vec![self.active[i].node, self.active[j].node];
                    for e in [pi[0], pi[1], pj[0], pj[1]] {
                        children.push(self.leaf(e));
                    }
                    let node = self.push_node(NodeKind::VarCircleMerge { circle: x, shared: e0 }, children, None);
                    let mut verts = self.active[i].verts.clone();
                    verts.extend(self.active[j].verts.iter().copied());
                    verts.insert(x);
                    self.replace(&[i, j], verts, node);
                    return true;
                }
            }
        }
        false
    }

    fn try_seed(&mut self) -> bool {
        let mut cands: Vec<usize> = (0..self.edges.len()).filter(|&e| !self.used[e]).collect();
        cands.sort_by_key(|&e| self.rank[e]);
        for e in cands {
            let w = self.edges[e];
            let minimal = match w.graph_edge {
                Some(ge) => self.ctx.edge_minimal(ge).is_some(),
                None => self.class(w.u) != Class::Radius && self.class(w.v) != Class::Radius,
            };
            if !minimal || self.active.iter().any(|c| c.verts.contains(&w.u) && c.verts.contains(&w.v)) {
                continue;
            }
            let node = self.leaf(e);
            self.active.push(Cl { verts: [w.u, w.v].into_iter().collect(), node });
            return true;
        }
        false
    }

    fn pair_free(&self, a: usize, b: usize) -> bool {
        a != b
            && self.class(a) != Class::Radius
            && self.class(b) != Class::Radius
            && !self.edges.iter().any(|w| (w.u == a && w.v == b) || (w.u == b && w.v == a))
    }

    /// Ranking key of a candidate pair under the completion source; `None` if not allowed.
    fn pair_key(&self, a: usize, b: usize) -> Option<usize> {
        if !self.pair_free(a, b) {
            return None;
        }
        let n = self.ctx.graph.vertex_count();
        match self.completion.as_ref()? {
            CompletionSource::Free => {
                let (x, y) = (self.vrank[a].min(self.vrank[b]), self.vrank[a].max(self.vrank[b]));
                Some(x * n + y)
            }
            CompletionSource::Pool(pool) => pool.iter().position(|p| (p[0] == a && p[1] == b) || (p[0] == b && p[1] == a)),
        }
    }

    fn add_virtual(&mut self, a: usize, b: usize) {
        self.edges.push(WEdge { u: a, v: b, graph_edge: None });
        self.rank.push(self.rank.len());
        self.used.push(false);
        self.virtual_pairs.push([a, b]);
    }

    /// Add the cheapest unconstrained pair that lets decomposition continue.
    fn try_virtual(&mut self) -> bool {
        if self.completion.is_none() {
            return false;
        }
        let order = self.sorted_clusters();
        // One pair closing a triangle of two clusters sharing one element.
        let mut best: Option<(usize, [usize; 2])> = None;
        for (p, &i) in order.iter().enumerate() {
            for &j in order.iter().skip(p + 1) {
                let Some(s) = self.single_shared(i, j) else { continue };
                for &a in &self.active[i].verts {
                    for &b in &self.active[j].verts {
                        if a == s || b == s || self.active[j].verts.contains(&a) || self.active[i].verts.contains(&b) {
                            continue;
                        }
                        if self.all_lines(&[s, a, b]) {
                            continue;
                        }
                        if let Some(k) = self.pair_key(a, b) {
                            if best.is_none_or(|(bk, _)| k < bk) {
                                best = Some((k, [a, b]));
                            }
                        }
                    }
                }
            }
        }
        if let Some((_, [a, b])) = best {
            self.add_virtual(a, b);
            return true;
        }
        // Serial growth needing one, then two, new pairs.
        for missing in 1..=2usize {
            let mut best: Option<((usize, usize), Vec<[usize; 2]>)> = None;
            for &ci in &order {
                let verts = self.active[ci].verts.clone();
                for x in self.vertices_by_rank() {
                    if verts.contains(&x) || self.class(x) == Class::Radius {
                        continue;
                    }
                    let real: Vec<usize> = self.edges_into(x, &verts).into_iter().filter(|&e| self.rel(e, x).is_some()).collect();
                    if real.len() + missing != 2 {
                        continue;
                    }
                    let fixed: Vec<usize> = real.iter().map(|&e| self.other(e, x)).collect();
                    let mut opts: Vec<(usize, usize)> =
                        verts.iter().filter(|y| !fixed.contains(y)).filter_map(|&y| self.pair_key(x, y).map(|k| (k, y))).collect();
                    opts.sort_unstable();
                    let pick: Option<Vec<(usize, usize)>> = if missing == 1 {
                        opts.iter().find(|(_, y)| !self.all_lines(&[fixed[0], *y, x])).map(|o| vec![*o])
                    } else {
                        let mut found = None;
                        'outer: for i in 0..opts.len() {
                            for j in i + 1..opts.len() {
                                if !self.all_lines(&[opts[i].1, opts[j].1, x]) {
                                    found = Some(vec![opts[i], opts[j]]);
                                    break 'outer;
                                }
                            }
                        }
                        found
                    };
                    if let Some(pick) = pick {
                        let key = (pick[0].0, pick.get(1).map_or(0, |p| p.0));
                        if best.as_ref().is_none_or(|(bk, _)| key < *bk) {
                            best = Some((key, pick.iter().map(|&(_, y)| [y, x]).collect()));
                        }
                    }
                }
            }
            if let Some((_, pairs)) = best {
                for [a, b] in pairs {
                    self.add_virtual(a, b);
                }
                return true;
            }
        }
        // Join: a fresh pair between two clusters or uncovered elements.
        let covered: BTreeSet<usize> = self.active.iter().flat_map(|c| c.verts.iter().copied()).collect();
        let n = self.ctx.graph.vertex_count();
        let mut best: Option<(usize, [usize; 2])> = None;
        for a in 0..n {
            for b in a + 1..n {
                if self.active.iter().any(|c| c.verts.contains(&a) && c.verts.contains(&b)) {
                    continue;
                }
                let joins = !covered.contains(&a) || !covered.contains(&b) || self.active.len() > 1;
                if !joins {
                    continue;
                }
                if let Some(k) = self.pair_key(a, b) {
                    if best.is_none_or(|(bk, _)| k < bk) {
                        best = Some((k, [a, b]));
                    }
                }
            }
        }
        if let Some((_, [a, b])) = best {
            self.add_virtual(a, b);
            return true;
        }
        false
    }

    fn run(&mut self) -> Result<usize, PlanError> {
        loop {
            if self.try_grow() || self.try_triple() || self.try_vmerge() || self.try_seed() || self.try_virtual() {
                continue;
            }
            break;
        }
        let n = self.ctx.graph.vertex_count();
        let unused: Vec<usize> = (0..self.edges.len()).filter(|&e| !self.used[e]).collect();
        if self.active.len() == 1 && self.active[0].verts.len() == n && unused.is_empty() {
            return Ok(self.active[0].node);
        }
        let clusters: Vec<Vec<usize>> = self.active.iter().map(|c| c.verts.iter().copied().collect()).collect();
        let ids = |vs: &[usize]| vs.iter().map(|&v| self.ctx.graph.ids[v].as_str()).collect::<Vec<_>>().join(",");
        let mut diag = format!(
            "stuck with {} cluster(s) [{}]",
            clusters.len(),
            clusters.iter().map(|c| format!("{{{}}}", ids(c))).collect::<Vec<_>>().join(" ")
        );
        let unsupported: Vec<&str> = unused
            .iter()
            .filter_map(|&e| self.edges[e].graph_edge)
            .filter(|&ge| {
                let edge = &self.ctx.graph.edges[ge];
                self.ctx.single(ge).is_none_or(|c| self.ctx.rel_to(c, edge.u).is_none() && self.ctx.rel_to(c, edge.v).is_none())
            })
            .flat_map(|ge| self.ctx.graph.edges[ge].constraints.iter().map(|&c| self.ctx.problem.constraints[c].id.as_str()))
            .collect();
        if !unsupported.is_empty() {
            diag.push_str(&format!("; constraints outside the construction repertoire: {}", unsupported.join(",")));
        }
        if unused.len() < self.edges.len() || !unused.is_empty() {
            diag.push_str(&format!("; {} edge(s) unabsorbed", unused.len()));
        }
        Err(PlanError::NotTriangleDecomposable { diagnostic: diag, clusters })
    }
}

pub fn triangle_decompose(problem: &GcsProblem, opts: &PlanOptions) -> Result<DecompositionTree, PlanError> {
    let ctx = Ctx::new(problem);
    decompose_with(&ctx, opts)
}

pub fn decompose_with(ctx: &Ctx<'_>, opts: &PlanOptions) -> Result<DecompositionTree, PlanError> {
    if ctx.graph.vertex_count() < 2 {
        return Err(PlanError::TooSmall);
    }
    let mut d = Decomposer::new(ctx, opts);
    let root = d.run()?;
    Ok(DecompositionTree { nodes: d.nodes, root, virtual_pairs: d.virtual_pairs })
}

/// Permissive decomposition that also reports the completion pairs added before a failure.
pub fn decompose_partial(problem: &GcsProblem, opts: &PlanOptions) -> (Result<DecompositionTree, PlanError>, Vec<[usize; 2]>) {
    let ctx = Ctx::new(problem);
    if ctx.graph.vertex_count() < 2 {
        return (Err(PlanError::TooSmall), Vec::new());
    }
    let mut d = Decomposer::new(&ctx, opts);
    match d.run() {
        Ok(root) => {
            let pairs = d.virtual_pairs.clone();
            (Ok(DecompositionTree { nodes: d.nodes, root, virtual_pairs: d.virtual_pairs }), pairs)
        }
        Err(e) => (Err(e), d.virtual_pairs),
    }
}

/// A relation value source for a construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Rel {
    /// A problem constraint, by index.
    Constraint { index: usize },
    /// Measured between two elements already placed in another frame.
    Measured { frame: usize, a: usize, b: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThirdCase {
    PpToP,
    PlToP,
    LlToP,
    PpToL,
    PlToL,
}

impl ThirdCase {
    pub fn tag(self) -> &'static str {
        match self {
            ThirdCase::PpToP => "pp→p",
            ThirdCase::PlToP => "pL→p",
            ThirdCase::LlToP => "LL→p",
            ThirdCase::PpToL => "pp→L",
            ThirdCase::PlToL => "pL→L",
        }
    }
}

/// Input combination of a sequential variable-circle construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeqCase {
    LLL,
    LLC,
    LCC,
    CCC,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StepKind {
    PlaceMinimal { constraint: usize },
    ConstructThird { case: ThirdCase, rels: [Rel; 2], dims: Vec<bool> },
    MergeClusters { moving: usize, shared: [usize; 2] },
    VarCircleSequential { case: SeqCase, constraints: [usize; 3] },
    VarCircleMerge { moving: usize, shared: usize, constraints: [usize; 4] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub kind: StepKind,
    /// Frame the step writes into.
    pub frame: usize,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
    /// Upper bound on the number of algebraic roots.
    pub multiplicity: usize,
}

impl Step {
    pub fn name(&self) -> &'static str {
        match self.kind {
            StepKind::PlaceMinimal { .. } => "PlaceMinimal",
            StepKind::ConstructThird { .. } => "ConstructThird",
            StepKind::MergeClusters { .. } => "MergeClusters",
            StepKind::VarCircleSequential { .. } => "VarCircleSequential",
            StepKind::VarCircleMerge { .. } => "VarCircleMerge",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructionPlan {
    pub steps: Vec<Step>,
    pub frames: usize,
    pub root_frame: usize,
    pub element_ids: Vec<String>,
}

impl ConstructionPlan {
    /// Step indices whose multiplicity exceeds one, in plan order.
    pub fn multi_root_steps(&self) -> Vec<usize> {
        (0..self.steps.len()).filter(|&i| self.steps[i].multiplicity > 1).collect()
    }

    pub fn solution_bound(&self) -> f64 {
        self.steps.iter().map(|s| s.multiplicity as f64).product()
    }

    /// Check that every step only reads elements placed earlier in the frames it uses.
    pub fn check_topology(&self) -> Result<(), String> {
        let n = self.element_ids.len();
        let mut placed = vec![vec![false; n]; self.frames];
        let mut owner = vec![None; n];
        for (i, s) in self.steps.iter().enumerate() {
            let need = |f: usize, v: usize, placed: &Vec<Vec<bool>>| {
                if placed[f][v] {
                    Ok(())
                } else {
                    Err(format!("step {i} reads {} before it is placed in frame {f}", self.element_ids[v]))
                }
            };
            for &v in &s.inputs {
                need(s.frame, v, &placed)?;
            }
            match &s.kind {
                StepKind::ConstructThird { rels, .. } => {
                    for r in rels {
                        if let Rel::Measured { frame, a, b } = *r {
                            need(frame, a, &placed)?;
                            need(frame, b, &placed)?;
                        }
                    }
                }
                StepKind::MergeClusters { moving, shared } => {
                    for &v in shared {
                        need(*moving, v, &placed)?;
                        need(s.frame, v, &placed)?;
                    }
                    for v in 0..n {
                        if placed[*moving][v] && !placed[s.frame][v] && !s.outputs.contains(&v) {
                            return Err(format!("merge step {i} drops {}", self.element_ids[v]));
                        }
                    }
                }
                StepKind::VarCircleMerge { moving, shared, .. } => {
                    need(*moving, *shared, &placed)?;
                }
                _ => {}
            }
            for &v in &s.outputs {
                if placed[s.frame][v] {
                    return Err(format!("step {i} places {} twice in frame {}", self.element_ids[v], s.frame));
                }
                placed[s.frame][v] = true;
                if s.frame == self.root_frame {
                    owner[v] = Some(i);
                }
            }
        }
        if let Some(v) = (0..n).find(|&v| !placed[self.root_frame][v]) {
            return Err(format!("{} never reaches the root frame", self.element_ids[v]));
        }
        Ok(())
    }

    /// Construction program listing: one line per primitive operation.
    pub fn construction_listing(&self, problem: &GcsProblem) -> Vec<String> {
        let id = |v: usize| problem.elements[v].id.as_str();
        let rel_name = |r: &Rel| match *r {
            Rel::Constraint { index } => problem.constraints[index].id.clone(),
            Rel::Measured { a, b, .. } => format!("|{}{}|", id(a), id(b)),
        };
        let mut out = Vec::new();
        let mut circles = 0usize;
        let mut signs = 0usize;
        let mut next_sign = |mult: usize| {
            if mult > 1 {
                signs += 1;
                format!(", s{signs}")
            } else {
                String::new()
            }
        };
        for s in &self.steps {
            match &s.kind {
                StepKind::PlaceMinimal { constraint } => {
                    let c = &problem.constraints[*constraint];
                    let [a, b] = [s.outputs[0], s.outputs[1]];
                    let lines = [a, b].map(|v| problem.elements[v].kind == ElementKind::Line);
                    match lines {
                        [false, false] => {
                            out.push(format!("{} = origin()", id(a)));
                            out.push(format!("{} = distPP({}, {})", id(b), id(a), c.id));
                        }
                        [true, true] => {
                            out.push(format!("{} = xaxis()", id(a)));
                            out.push(format!("{} = linePA(origin, {})", id(b), c.id));
                        }
                        _ => {
                            let (l, p) = if lines[0] { (a, b) } else { (b, a) };
                            out.push(format!("{} = xaxis()", id(l)));
                            out.push(format!("{} = distPL({}, {})", id(p), id(l), c.id));
                        }
                    }
                }
                StepKind::ConstructThird { case, rels, dims } => {
                    let x = s.outputs[0];
                    let [a, b] = [s.inputs[0], s.inputs[1]];
                    let sign = next_sign(s.multiplicity);
                    let mut circle = |center: usize, r: &Rel, out: &mut Vec<String>| {
                        let name = format!("C{circles}");
                        circles += 1;
                        out.push(format!("{} = circleCR({}, {})", name, id(center), rel_name(r)));
                        name
                    };
                    match case {
                        ThirdCase::PpToP => {
                            let c1 = circle(a, &rels[0], &mut out);
                            let c2 = circle(b, &rels[1], &mut out);
                            out.push(format!("{} = intCC({}, {}{})", id(x), c1, c2, sign));
                        }
                        ThirdCase::PlToP => {
                            let c = circle(a, &rels[0], &mut out);
                            let line = if dims[0] { format!("offset({}, {})", id(b), rel_name(&rels[1])) } else { id(b).to_string() };
                            out.push(format!("{} = intLC({}, {}{})", id(x), line, c, sign));
                        }
                        ThirdCase::LlToP => {
                            let la = if dims[0] { format!("offset({}, {})", id(a), rel_name(&rels[0])) } else { id(a).to_string() };
                            let lb = if dims[1] { format!("offset({}, {})", id(b), rel_name(&rels[1])) } else { id(b).to_string() };
                            out.push(format!("{} = intLL({}, {}{})", id(x), la, lb, sign));
                        }
                        ThirdCase::PpToL => {
                            if !dims[0] && !dims[1] {
                                out.push(format!("{} = line2P({}, {})", id(x), id(a), id(b)));
                            } else {
                                let c1 = circle(a, &rels[0], &mut out);
                                let c2 = circle(b, &rels[1], &mut out);
                                out.push(format!("{} = tangentCC({}, {}{})", id(x), c1, c2, sign));
                            }
                        }
                        ThirdCase::PlToL => {
                            if dims[0] {
                                let c = circle(a, &rels[0], &mut out);
                                out.push(format!("{} = tangentCA({}, {}, {}{})", id(x), c, id(b), rel_name(&rels[1]), sign));
                            } else {
                                out.push(format!("{} = linePA({}, {})", id(x), id(a), rel_name(&rels[1])));
                            }
                        }
                    }
                }
                StepKind::MergeClusters { moving, shared } => {
                    let sign = next_sign(s.multiplicity);
                    out.push(format!("F{} = merge(F{}, F{}, {}, {}{})", s.frame, s.frame, moving, id(shared[0]), id(shared[1]), sign));
                }
                StepKind::VarCircleSequential { case, constraints } => {
                    let sign = next_sign(s.multiplicity);
                    let names: Vec<&str> = constraints.iter().map(|&c| problem.constraints[c].id.as_str()).collect();
                    out.push(format!("{} = circle{:?}({}{})", id(s.outputs[0]), case, names.join(", "), sign));
                }
                StepKind::VarCircleMerge { moving, shared, constraints } => {
                    let sign = next_sign(s.multiplicity);
                    let names: Vec<&str> = constraints.iter().map(|&c| problem.constraints[c].id.as_str()).collect();
                    out.push(format!(
                        "{} = circleMerge(F{}, F{}, {}, {}{})",
                        id(s.outputs[0]),
                        s.frame,
                        moving,
                        id(*shared),
                        names.join(", "),
                        sign
                    ));
                }
            }
        }
        out
    }
}

struct Emitter<'c, 'a> {
    ctx: &'c Ctx<'a>,
    tree: &'c DecompositionTree,
    steps: Vec<Step>,
    frames: usize,
    /// Elements placed in each frame.
    content: Vec<BTreeSet<usize>>,
}

impl<'c, 'a> Emitter<'c, 'a> {
    fn leaf_constraint(&self, node: usize) -> Result<usize, PlanError> {
        let n = &self.tree.nodes[node];
        match n.kind {
            NodeKind::Leaf => self
                .ctx
                .single(n.edges[0])
                .ok_or_else(|| PlanError::Mismatch(format!("edge {} carries more than one equation", n.edges[0]))),
            _ => Err(PlanError::Mismatch("virtual pairs cannot be executed".into())),
        }
    }

    fn is_leaf(&self, node: usize) -> bool {
        matches!(self.tree.nodes[node].kind, NodeKind::Leaf | NodeKind::VirtualLeaf)
    }

    fn new_frame(&mut self) -> usize {
        self.frames += 1;
        self.content.push(BTreeSet::new());
        self.frames - 1
    }

    fn push(&mut self, step: Step) {
        for &v in &step.outputs {
            self.content[step.frame].insert(v);
        }
        self.steps.push(step);
    }

    fn place_minimal(&mut self, node: usize) -> Result<usize, PlanError> {
        let c = self.leaf_constraint(node)?;
        if self.ctx.edge_minimal(self.tree.nodes[node].edges[0]).is_none() {
            return Err(PlanError::Mismatch(format!("constraint {} cannot seed a frame", self.ctx.problem.constraints[c].id)));
        }
        let f = self.new_frame();
        self.push(Step { kind: StepKind::PlaceMinimal { constraint: c }, frame: f, inputs: vec![], outputs: self.ctx.ends[c].to_vec(), multiplicity: 1 });
        Ok(f)
    }

    fn emit(&mut self, node: usize) -> Result<usize, PlanError> {
        let n = self.tree.nodes[node].clone();
        match n.kind {
            NodeKind::Leaf | NodeKind::VirtualLeaf => self.place_minimal(node),
            NodeKind::Triangle => self.emit_triangle(&n),
            NodeKind::VarCircleSequential { circle } => self.emit_vseq(&n, circle),
            NodeKind::VarCircleMerge { circle, shared } => self.emit_vmerge(&n, circle, shared),
        }
    }

    fn dims_for(&self, rel: &Rel, kind: RelKind) -> bool {
        match (rel, kind) {
            (Rel::Constraint { index }, RelKind::LineDist) => !self.ctx.is_incidence(*index),
            (_, RelKind::LineDist) => true,
            _ => false,
        }
    }

    fn emit_triangle(&mut self, n: &TreeNode) -> Result<usize, PlanError> {
        let [u, v, w] = n.shared.ok_or_else(|| PlanError::Mismatch("triangle node without shared elements".into()))?;
        let ch = [n.children[0], n.children[1], n.children[2]];
        let size = |i: usize| self.tree.nodes[ch[i]].vertices.len();
        let fixed = if (0..3).all(|i| self.is_leaf(ch[i])) {
            (0..3)
                .find(|&i| self.tree.nodes[ch[i]].kind == NodeKind::Leaf && self.ctx.edge_minimal(self.tree.nodes[ch[i]].edges[0]).is_some())
                .ok_or_else(|| PlanError::Mismatch("no child can seed a frame".into()))?
        } else {
            let mut best = None;
            for i in 0..3 {
                if !self.is_leaf(ch[i]) && best.is_none_or(|b: usize| size(i) > size(b)) {
                    best = Some(i);
                }
            }
            best.unwrap_or(0)
        };
        // Child i holds shared[i-1] and shared[i]; the fixed child misses exactly one.
        let sh = [u, v, w];
        let holds = |i: usize| [sh[(i + 2) % 3], sh[i]];
        let x = sh[(fixed + 1) % 3];
        let f = self.emit(ch[fixed])?;
        let others = [(fixed + 1) % 3, (fixed + 2) % 3];
        let mut rels = Vec::new();
        let mut merges = Vec::new();
        for &o in &others {
            let s = holds(o).into_iter().find(|&e| e != x).unwrap_or(x);
            if self.is_leaf(ch[o]) {
                rels.push((s, Rel::Constraint { index: self.leaf_constraint(ch[o])? }));
            } else {
                let g = self.emit(ch[o])?;
                rels.push((s, Rel::Measured { frame: g, a: s, b: x }));
                merges.push((g, [s, x]));
            }
        }
        // Inputs ordered centered before lines, then by index.
        rels.sort_by_key(|(s, _)| (self.ctx.class(*s) == Class::Line, *s));
        let (a, b) = (rels[0].0, rels[1].0);
        let la = self.ctx.class(a) == Class::Line;
        let lb = self.ctx.class(b) == Class::Line;
        let lx = self.ctx.class(x) == Class::Line;
        let case = match (la, lb, lx) {
            (false, false, false) => ThirdCase::PpToP,
            (false, true, false) => ThirdCase::PlToP,
            (true, true, false) => ThirdCase::LlToP,
            (false, false, true) => ThirdCase::PpToL,
            (false, true, true) => ThirdCase::PlToL,
            _ => return Err(PlanError::Mismatch("a line cannot be constructed from two lines".into())),
        };
        let rel_kinds = [self.rel_kind_of(&rels[0].1, x)?, self.rel_kind_of(&rels[1].1, x)?];
        let dims: Vec<bool> = match case {
            ThirdCase::PpToP => vec![true],
            ThirdCase::PlToP => vec![self.dims_for(&rels[1].1, rel_kinds[1]), true],
            ThirdCase::LlToP | ThirdCase::PpToL => vec![self.dims_for(&rels[0].1, rel_kinds[0]), self.dims_for(&rels[1].1, rel_kinds[1])],
            ThirdCase::PlToL => vec![self.dims_for(&rels[0].1, rel_kinds[0])],
        };
        let multiplicity = 1usize << dims.iter().filter(|&&d| d).count();
        self.push(Step {
            kind: StepKind::ConstructThird { case, rels: [rels[0].1, rels[1].1], dims },
            frame: f,
            inputs: vec![a, b],
            outputs: vec![x],
            multiplicity,
        });
        for (g, shared) in merges {
            let outputs: Vec<usize> = self.content[g].iter().copied().filter(|e| !self.content[f].contains(e)).collect();
            let with_line = shared.iter().any(|&s| self.ctx.class(s) == Class::Line);
            self.push(Step {
                kind: StepKind::MergeClusters { moving: g, shared },
                frame: f,
                inputs: shared.to_vec(),
                outputs,
                multiplicity: if with_line { 2 } else { 1 },
            });
        }
        Ok(f)
    }

    fn rel_kind_of(&self, rel: &Rel, x: usize) -> Result<RelKind, PlanError> {
        match *rel {
            Rel::Constraint { index } => self
                .ctx
                .rel_to(index, x)
                .ok_or_else(|| PlanError::Mismatch(format!("constraint {} cannot construct", self.ctx.problem.constraints[index].id))),
            Rel::Measured { a, b, .. } => Ok(match (self.ctx.class(a) == Class::Line, self.ctx.class(b) == Class::Line) {
                (true, true) => RelKind::Angle,
                (false, false) => RelKind::Dist,
                _ => RelKind::LineDist,
            }),
        }
    }

    fn vc_inputs(&self, leaves: &[usize], circle: usize) -> Result<(Vec<usize>, Vec<usize>), PlanError> {
        let mut cs = Vec::new();
        let mut ins = Vec::new();
        for &l in leaves {
            let c = self.leaf_constraint(l)?;
            let [a, b] = self.ctx.ends[c];
            cs.push(c);
            ins.push(if a == circle { b } else { a });
        }
        Ok((cs, ins))
    }

    fn emit_vseq(&mut self, n: &TreeNode, circle: usize) -> Result<usize, PlanError> {
        let f = self.emit(n.children[0])?;
        let (mut cs, mut ins) = self.vc_inputs(&n.children[1..4], circle)?;
        let mut order: Vec<usize> = (0..3).collect();
        order.sort_by_key(|&i| (self.ctx.class(ins[i]) != Class::Line, ins[i]));
        cs = order.iter().map(|&i| cs[i]).collect();
        ins = order.iter().map(|&i| ins[i]).collect();
        let lines = ins.iter().filter(|&&e| self.ctx.class(e) == Class::Line).count();
        let case = [SeqCase::CCC, SeqCase::LCC, SeqCase::LLC, SeqCase::LLL][lines];
        let multiplicity = crate::varcircle::sequential_bound(self.ctx.problem, &ins, &cs);
        self.push(Step {
            kind: StepKind::VarCircleSequential { case, constraints: [cs[0], cs[1], cs[2]] },
            frame: f,
            inputs: ins,
            outputs: vec![circle],
            multiplicity,
        });
        Ok(f)
    }

    fn emit_vmerge(&mut self, n: &TreeNode, circle: usize, shared: usize) -> Result<usize, PlanError> {
        let (cs, ins) = self.vc_inputs(&n.children[2..6], circle)?;
        let circles = |r: std::ops::Range<usize>| ins[r].iter().filter(|&&e| self.ctx.class(e) != Class::Line).count();
        let swap = circles(2..4) > circles(0..2);
        let (s1, s2) = if swap { (n.children[1], n.children[0]) } else { (n.children[0], n.children[1]) };
        let (cs, ins) = if swap {
            ([cs[2], cs[3], cs[0], cs[1]], vec![ins[2], ins[3], ins[0], ins[1]])
        } else {
            ([cs[0], cs[1], cs[2], cs[3]], ins)
        };
        let f = self.emit(s1)?;
        let g = self.emit(s2)?;
        let mut outputs = vec![circle];
        outputs.extend(self.content[g].iter().copied().filter(|e| !self.content[f].contains(e)));
        let multiplicity = crate::varcircle::merge_bound(self.ctx.problem, shared, &ins, &cs);
        let mut inputs = vec![shared];
        inputs.extend(ins[..2].iter().copied());
        self.push(Step { kind: StepKind::VarCircleMerge { moving: g, shared, constraints: cs }, frame: f, inputs, outputs, multiplicity });
        Ok(f)
    }
}

pub fn emit_plan(tree: &DecompositionTree, problem: &GcsProblem) -> Result<ConstructionPlan, PlanError> {
    let ctx = Ctx::new(problem);
    emit_with(&ctx, tree)
}

fn emit_with(ctx: &Ctx<'_>, tree: &DecompositionTree) -> Result<ConstructionPlan, PlanError> {
    if !tree.virtual_pairs.is_empty() {
        return Err(PlanError::Mismatch("tree contains unconstrained pairs".into()));
    }
    let covered: BTreeSet<usize> = tree.nodes[tree.root].vertices.iter().copied().collect();
    if covered.len() != ctx.graph.vertex_count() || tree.nodes[tree.root].edges.len() != ctx.graph.edges.len() {
        return Err(PlanError::Mismatch("tree does not cover the constraint graph".into()));
    }
    let mut em = Emitter { ctx, tree, steps: Vec::new(), frames: 0, content: Vec::new() };
    let root_frame = em.emit(tree.root)?;
    let plan = ConstructionPlan {
        steps: em.steps,
        frames: em.frames,
        root_frame,
        element_ids: ctx.problem.elements.iter().map(|e| e.id.clone()).collect(),
    };
    plan.check_topology().map_err(PlanError::Mismatch)?;
    Ok(plan)
}

/// Validate, decompose and emit in one call.
pub fn plan_problem(problem: &GcsProblem, opts: &PlanOptions) -> Result<ConstructionPlan, PlanError> {
    let report = validate(problem);
    if !report.is_valid() {
        return Err(PlanError::Invalid(report));
    }
    let ctx = Ctx::new(problem);
    let tree = decompose_with(&ctx, opts)?;
    emit_with(&ctx, &tree)
}

/// Plan together with its decomposition tree.
pub fn plan_with_tree(problem: &GcsProblem, opts: &PlanOptions) -> Result<(DecompositionTree, ConstructionPlan), PlanError> {
    let report = validate(problem);
    if !report.is_valid() {
        return Err(PlanError::Invalid(report));
    }
    let ctx = Ctx::new(problem);
    let tree = decompose_with(&ctx, opts)?;
    let plan = emit_with(&ctx, &tree)?;
    Ok((tree, plan))
}
