//! Completion of under-constrained problems: add unconstrained element pairs, found as
//! missing leaves of a permissive triangle decomposition, until the problem is well-constrained.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{dist, line_angle, Pose};
use crate::graph::{build_graph, classify, Verdict};
use crate::model::{Constraint, ConstraintKind, ElementKind, GcsProblem};
use crate::planner::{decompose_partial, plan_problem, CompletionSource, DecompositionTree, PlanOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletionMode {
    Free,
    Conditional,
}

/// Element pairs to constrain, by element id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub mode: CompletionMode,
    pub pairs: Vec<[String; 2]>,
    /// Candidate pairs for conditional completion, with pairs already constrained removed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<Vec<[String; 2]>>,
    /// False when the pool ran out before the problem was well-constrained.
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UnderconError {
    #[error("the problem cannot be completed by decomposition: {0}")]
    NotCompletableByDecomposition(String),
    #[error("unknown element `{0}`")]
    UnknownElement(String),
    #[error("no constraint kind joins `{a}` and `{b}`")]
    KindMismatch { a: String, b: String },
}

fn pair_ids(problem: &GcsProblem, pairs: &[[usize; 2]]) -> Vec<[String; 2]> {
    pairs.iter().map(|&[a, b]| [problem.elements[a].id.clone(), problem.elements[b].id.clone()]).collect()
}

fn resolve(problem: &GcsProblem, pairs: &[[String; 2]]) -> Result<Vec<[usize; 2]>, UnderconError> {
    pairs
        .iter()
        .map(|[a, b]| {
            let ia = problem.element_index(a).ok_or_else(|| UnderconError::UnknownElement(a.clone()))?;
            let ib = problem.element_index(b).ok_or_else(|| UnderconError::UnknownElement(b.clone()))?;
            Ok([ia, ib])
        })
        .collect()
}

/// Complete with any unconstrained pairs, taken from a permissive decomposition.
pub fn free_completion(problem: &GcsProblem) -> Result<(Completion, DecompositionTree), UnderconError> {
    let opts = PlanOptions { seed: 0, completion: Some(CompletionSource::Free) };
    let (res, pairs) = decompose_partial(problem, &opts);
    let tree = res.map_err(|e| UnderconError::NotCompletableByDecomposition(e.to_string()))?;
    Ok((Completion { mode: CompletionMode::Free, pairs: pair_ids(problem, &pairs), pool: None, complete: true }, tree))
}

/// Complete with pairs drawn only from `pool`, earliest candidates first. When the pool runs
/// out the result is partial and the problem stays under-constrained.
pub fn conditional_completion(problem: &GcsProblem, pool: &[[String; 2]]) -> Result<Completion, UnderconError> {
    let graph = build_graph(problem);
    let resolved = resolve(problem, pool)?;
    let mut kept = Vec::new();
    for p in resolved {
        let dup = kept.iter().any(|q: &[usize; 2]| (q[0] == p[0] && q[1] == p[1]) || (q[0] == p[1] && q[1] == p[0]));
        if p[0] != p[1] && graph.edge_between(p[0], p[1]).is_none() && !dup {
            kept.push(p);
        }
    }
    let opts = PlanOptions { seed: 0, completion: Some(CompletionSource::Pool(kept.clone())) };
    let (res, pairs) = decompose_partial(problem, &opts);
    Ok(Completion { mode: CompletionMode::Conditional, pairs: pair_ids(problem, &pairs), pool: Some(pair_ids(problem, &kept)), complete: res.is_ok() })
}

/// Finish a partial completion with free pairs; returns the pairs added by the free pass.
pub fn finish_completion(problem: &GcsProblem, partial: &Completion) -> Result<Completion, UnderconError> {
    let added = apply_template(problem, &partial.pairs)?;
    let (rest, _) = free_completion(&added)?;
    Ok(rest)
}

/// A constraint added by a completion; `value` is `None` when no sketch was available.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AddedConstraint {
    pub constraint: Constraint,
    /// Name of the free parameter standing in for a missing value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol: Option<String>,
}

fn kind_for(a: ElementKind, b: ElementKind) -> Option<ConstraintKind> {
    use ElementKind::*;
    match (a, b) {
        (Point, Point) => Some(ConstraintKind::PointPointDistance),
        (Point, Line) | (Line, Point) => Some(ConstraintKind::PointLineDistance),
        (Line, Line) => Some(ConstraintKind::LineLineAngle),
        (Line, FixedCircle) | (FixedCircle, Line) => Some(ConstraintKind::TangentLineCircle),
        (x, y) if x.is_centered() && y.is_centered() && x != VariableCircle && y != VariableCircle => Some(ConstraintKind::CenterDistance),
        _ => None,
    }
}

fn measure(kind: ConstraintKind, pa: &Pose, pb: &Pose, ra: f64, rb: f64) -> Option<f64> {
    match kind {
        ConstraintKind::PointPointDistance | ConstraintKind::CenterDistance => Some(dist(pa.center()?, pb.center()?)),
        ConstraintKind::PointLineDistance => {
            let (l, p) = if let Some(l) = pa.as_line() { (l, pb) } else { (pb.as_line()?, pa) };
            Some(l.signed_dist(p.center()?).abs())
        }
        ConstraintKind::LineLineAngle => Some(line_angle(&pa.as_line()?, &pb.as_line()?)),
        ConstraintKind::TangentLineCircle => {
            let (l, c, r) = if let Some(l) = pa.as_line() { (l, pb, rb) } else { (pb.as_line()?, pa, ra) };
            let gap = l.signed_dist(c.center()?).abs() - r;
            (gap >= 0.0).then_some(gap)
        }
        _ => None,
    }
}

fn fresh_id(problem: &GcsProblem, taken: &[String], k: usize) -> String {
    let mut n = k;
    loop {
        let id = format!("k{n}");
        if problem.constraint_index(&id).is_none() && problem.element_index(&id).is_none() && !taken.contains(&id) {
            return id;
        }
        n += 1;
    }
}

/// Turn completion pairs into constraints, measuring values from the sketch when every
/// paired element has a sketch pose.
pub fn constraint_values_for(problem: &GcsProblem, pairs: &[[String; 2]]) -> Result<Vec<AddedConstraint>, UnderconError> {
    let idx = resolve(problem, pairs)?;
    let mut out = Vec::new();
    let mut taken = Vec::new();
    for (k, &[a, b]) in idx.iter().enumerate() {
        let (ea, eb) = (&problem.elements[a], &problem.elements[b]);
        let kind = kind_for(ea.kind, eb.kind).ok_or_else(|| UnderconError::KindMismatch { a: ea.id.clone(), b: eb.id.clone() })?;
        let id = fresh_id(problem, &taken, k + 1);
        taken.push(id.clone());
        let measured = match (ea.sketch, eb.sketch) {
            (Some(pa), Some(pb)) => {
                let v = measure(kind, &pa, &pb, ea.radius.unwrap_or(0.0), eb.radius.unwrap_or(0.0));
                if v.is_none() {
                    return Err(UnderconError::KindMismatch { a: ea.id.clone(), b: eb.id.clone() });
                }
                v
            }
            _ => None,
        };
        let symbol = measured.is_none().then(|| format!("p{}", k + 1));
        out.push(AddedConstraint { constraint: Constraint::new(id, kind, ea.id.clone(), eb.id.clone(), measured), symbol });
    }
    Ok(out)
}

/// The problem with completion constraints added; symbolic values become 1 (angles π/2).
pub fn apply_template(problem: &GcsProblem, pairs: &[[String; 2]]) -> Result<GcsProblem, UnderconError> {
    let mut out = problem.clone();
    for mut a in constraint_values_for(problem, pairs)? {
        if a.constraint.value.is_none() {
            a.constraint.value = Some(if a.constraint.kind.is_angle() { std::f64::consts::FRAC_PI_2 } else { 1.0 });
        }
        out.constraints.push(a.constraint);
    }
    Ok(out)
}

/// Diagnosis of an externally supplied completion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionCheck {
    pub verdict: Verdict,
    pub deficit: i64,
    pub decomposable: bool,
    /// Pairs that are already constrained in the original problem.
    pub overlapping: Vec<[String; 2]>,
}

/// Check a completion against both hazards: staying under- or over-constrained, and
/// becoming well-constrained without being triangle-decomposable.
pub fn check_completion(problem: &GcsProblem, pairs: &[[String; 2]]) -> Result<CompletionCheck, UnderconError> {
    let graph = build_graph(problem);
    let idx = resolve(problem, pairs)?;
    let overlapping = idx.iter().zip(pairs).filter(|(p, _)| graph.edge_between(p[0], p[1]).is_some()).map(|(_, q)| q.clone()).collect();
    let completed = apply_template(problem, pairs)?;
    let class = classify(&build_graph(&completed));
    let decomposable = plan_problem(&completed, &PlanOptions::default()).is_ok();
    Ok(CompletionCheck { verdict: class.verdict, deficit: class.deficit, decomposable, overlapping })
}
