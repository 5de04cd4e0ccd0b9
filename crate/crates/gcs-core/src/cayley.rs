//! Configuration spaces of one-parameter linkages: for each root-choice vector, the
//! intervals of the free constraint value on which the construction plan succeeds, and
//! shortest continuous paths between two realizations.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::construct::{residuals, ExecError, ExecOptions, Executor, Placement};
use crate::geom::{dist, line_angle, Pose};
use crate::model::{ConstraintKind, GcsProblem};
use crate::planner::{plan_problem, ConstructionPlan, PlanOptions};
use crate::roots::SignVector;

/// Largest number of root-choice vectors swept.
pub const MAX_ORIENTATIONS: usize = 4096;
/// Largest effective number of samples per orientation after local refinement.
pub const MAX_SAMPLES: usize = 1 << 20;

const PERIOD: f64 = std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamKind {
    Distance,
    Angle,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CayleyError {
    #[error("not a linkage: {0}")]
    BadLinkage(String),
    #[error("the linkage is not triangle-decomposable: {0}")]
    NotDecomposable(String),
    #[error("{0} root-choice vectors exceed the sweep limit")]
    TooManyOrientations(usize),
    #[error("bad endpoint: {0}")]
    BadEndpoint(String),
    #[error("no continuous path joins the two realizations")]
    Unreachable,
}

/// A well-constrained problem whose constraint `free` is treated as a parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Linkage {
    pub problem: GcsProblem,
    pub free: String,
    pub kind: ParamKind,
    free_index: usize,
}

impl Linkage {
    pub fn new(problem: GcsProblem, free: &str) -> Result<Linkage, CayleyError> {
        let free_index = problem.constraint_index(free).ok_or_else(|| CayleyError::BadLinkage(format!("no constraint `{free}`")))?;
        let kind = match problem.constraints[free_index].kind {
            ConstraintKind::LineLineAngle => ParamKind::Angle,
            ConstraintKind::PointPointDistance | ConstraintKind::PointLineDistance | ConstraintKind::CenterDistance | ConstraintKind::TangentLineCircle => ParamKind::Distance,
            k => return Err(CayleyError::BadLinkage(format!("constraint `{free}` of kind {k:?} has no free value"))),
        };
        Ok(Linkage { free: free.to_string(), problem, kind, free_index })
    }

    /// Use the linkage declaration carried by the problem.
    pub fn from_problem(problem: GcsProblem) -> Result<Linkage, CayleyError> {
        let free = problem.linkage.clone().ok_or_else(|| CayleyError::BadLinkage("no free constraint declared".into()))?;
        Linkage::new(problem, &free)
    }

    pub fn free_index(&self) -> usize {
        self.free_index
    }

    /// The problem with the free value set to `t`.
    pub fn at(&self, t: f64) -> GcsProblem {
        let mut p = self.problem.clone();
        p.constraints[self.free_index].value = Some(t);
        p
    }

    /// Parameter domain: `(0, M]` for distances, the circle `[0, π)` for angles.
    pub fn domain(&self) -> [f64; 2] {
        match self.kind {
            ParamKind::Angle => [0.0, PERIOD],
            ParamKind::Distance => {
                let sum: f64 = self
                    .problem
                    .constraints
                    .iter()
                    .enumerate()
                    .filter(|(i, c)| *i != self.free_index && !c.kind.is_angle())
                    .filter_map(|(_, c)| c.value)
                    .map(f64::abs)
                    .sum();
                let radii: f64 = self.problem.elements.iter().filter_map(|e| e.radius).map(f64::abs).sum();
                let m = 2.0 * (sum + radii);
                [0.0, if m > 0.0 { m } else { 1.0 }]
            }
        }
    }

    /// Value of the free constraint measured on a placement.
    pub fn measure(&self, poses: &[Option<Pose>]) -> Option<f64> {
        let [a, b] = self.problem.endpoint_indices()[self.free_index];
        let (pa, pb) = (poses.get(a).copied().flatten()?, poses.get(b).copied().flatten()?);
        match self.problem.constraints[self.free_index].kind {
            ConstraintKind::PointPointDistance | ConstraintKind::CenterDistance => Some(dist(pa.center()?, pb.center()?)),
            ConstraintKind::PointLineDistance => {
                let (l, p) = if let Some(l) = pa.as_line() { (l, pb) } else { (pb.as_line()?, pa) };
                Some(l.signed_dist(p.center()?).abs())
            }
            ConstraintKind::TangentLineCircle => {
                let (l, c) = if let Some(l) = pa.as_line() { (l, pb) } else { (pb.as_line()?, pa) };
                Some(l.signed_dist(c.center()?).abs() - c.radius())
            }
            ConstraintKind::LineLineAngle => Some(line_angle(&pa.as_line()?, &pb.as_line()?)),
            _ => None,
        }
    }
}

/// How an interval end was determined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Endpoint {
    /// The end of the parameter domain.
    Domain,
    /// A feasibility boundary; `outside` is the nearest refined value where the plan fails,
    /// `step` the step that fails there and `margin` that step's normalized discriminant at the end.
    Transition { outside: f64, step: Option<usize>, margin: f64 },
}

/// A closed interval; for angles `hi` may exceed π when the interval wraps through zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_end: Endpoint,
    pub hi_end: Endpoint,
}

impl Interval {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    /// Position of `v` along the interval, or `None` if outside (with slack `tol`).
    pub fn position(&self, v: f64, circular: bool, tol: f64) -> Option<f64> {
        let cands: &[f64] = if circular { &[v - PERIOD, v, v + PERIOD] } else { &[v] };
        cands.iter().copied().find(|&x| x >= self.lo - tol && x <= self.hi + tol).map(|x| x.clamp(self.lo, self.hi))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientationSpace {
    pub signs: SignVector,
    pub intervals: Vec<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CayleySpace {
    pub free: String,
    pub kind: ParamKind,
    pub domain: [f64; 2],
    pub circular: bool,
    pub resolution: usize,
    pub orientations: Vec<OrientationSpace>,
    pub warnings: Vec<String>,
}

impl CayleySpace {
    /// Index of the interval of orientation `o` containing `v`.
    pub fn locate(&self, o: usize, v: f64) -> Option<usize> {
        let tol = 1e-9 * (self.domain[1] - self.domain[0]);
        self.orientations[o].intervals.iter().position(|iv| iv.position(v, self.circular, tol).is_some())
    }

    pub fn orientation_of(&self, signs: &SignVector) -> Option<usize> {
        self.orientations.iter().position(|o| &o.signs == signs)
    }

    pub fn interval_count(&self) -> usize {
        self.orientations.iter().map(|o| o.intervals.len()).sum()
    }
}

/// One plan evaluation at a parameter value.
#[derive(Debug, Clone)]
struct Probe {
    ok: bool,
    /// Normalized discriminant per executed step.
    margins: Vec<f64>,
    /// Step that failed, if any.
    step: Option<usize>,
}

impl Probe {
    fn closeness(&self) -> f64 {
        let m = self.margins.iter().copied().filter(|m| m.is_finite()).fold(f64::INFINITY, |a, m| a.min(m.abs()));
        if self.ok {
            m
        } else {
            0.0
        }
    }
}

/// Plan plus linkage, able to evaluate at any parameter value.
pub struct Evaluator<'a> {
    pub linkage: &'a Linkage,
    pub plan: ConstructionPlan,
}

impl<'a> Evaluator<'a> {
    pub fn new(linkage: &'a Linkage) -> Result<Evaluator<'a>, CayleyError> {
        let plan = plan_problem(&linkage.problem, &PlanOptions::default()).map_err(|e| CayleyError::NotDecomposable(e.to_string()))?;
        Ok(Evaluator { linkage, plan })
    }

    /// Execute the plan at parameter `t`; `clamp` lets near-zero negative discriminants through.
    pub fn eval(&self, t: f64, signs: &SignVector, clamp: f64) -> Result<Placement, ExecError> {
        let p = self.linkage.at(self.wrap(t));
        let ex = Executor::new(&self.plan, &p, ExecOptions { clamp });
        ex.run(signs).map_err(|f| f.error)
    }

    fn wrap(&self, t: f64) -> f64 {
        match self.linkage.kind {
            ParamKind::Angle => t.rem_euclid(PERIOD),
            ParamKind::Distance => t,
        }
    }

    fn probe(&self, t: f64, signs: &SignVector) -> Probe {
        let p = self.linkage.at(self.wrap(t));
        let ex = Executor::new(&self.plan, &p, ExecOptions::default());
        let mut st = ex.initial();
        match ex.run_from(&mut st, 0, signs) {
            Ok(_) => Probe { ok: true, margins: st.margins, step: None },
            Err(f) => {
                let mut margins = st.margins;
                if let ExecError::Infeasible { margin, .. } = f.error {
                    margins.push(margin);
                }
                Probe { ok: false, margins, step: f.error.step() }
            }
        }
    }

    /// Every root-choice vector of the plan, in lexicographic order.
    pub fn orientations(&self) -> Result<Vec<SignVector>, CayleyError> {
        let mults: Vec<usize> = self.plan.multi_root_steps().iter().map(|&s| self.plan.steps[s].multiplicity).collect();
        let total = mults.iter().try_fold(1usize, |acc, &m| acc.checked_mul(m).filter(|&n| n <= MAX_ORIENTATIONS));
        let total = total.ok_or(CayleyError::TooManyOrientations(mults.iter().map(|&m| m as f64).product::<f64>() as usize))?;
        let mut out = Vec::with_capacity(total);
        for mut k in 0..total {
            let mut v = vec![0; mults.len()];
            for i in (0..mults.len()).rev() {
                v[i] = k % mults[i];
                k /= mults[i];
            }
            out.push(SignVector(v));
        }
        Ok(out)
    }
}

/// A feasibility change found between two samples.
struct Crossing {
    inside: f64,
    outside: f64,
    /// True when feasibility starts at this crossing (going up in parameter).
    entering: bool,
    step: Option<usize>,
    margin: f64,
}

struct Sweep<'e, 'a> {
    ev: &'e Evaluator<'a>,
    signs: SignVector,
    tol: f64,
    max_depth: u32,
    inconsistent: bool,
}

/// Margins below this trigger a midpoint probe between two samples of equal feasibility.
const NEAR: f64 = 1e-4;
/// Depth of midpoint probing allowed without any observed change.
const NEAR_DEPTH: u32 = 4;

impl Sweep<'_, '_> {
    fn bisect(&self, mut good: f64, mut bad: f64) -> (f64, f64, Probe) {
        let mut last_bad = self.ev.probe(bad, &self.signs);
        while (good - bad).abs() > self.tol {
            let m = 0.5 * (good + bad);
            let pm = self.ev.probe(m, &self.signs);
            if pm.ok {
                good = m;
            } else {
                bad = m;
                last_bad = pm;
            }
        }
        (good, bad, last_bad)
    }

    fn scan(&mut self, a: f64, pa: &Probe, b: f64, pb: &Probe, depth: u32, out: &mut Vec<Crossing>) {
        if pa.ok == pb.ok {
            let near = pa.closeness().min(pb.closeness()) < NEAR;
            if depth < self.max_depth.min(NEAR_DEPTH) && near {
                let m = 0.5 * (a + b);
                let pm = self.ev.probe(m, &self.signs);
                self.scan(a, pa, m, &pm, depth + 1, out);
                self.scan(m, &pm, b, pb, depth + 1, out);
            }
            return;
        }
        let (good, bad) = if pa.ok { (a, b) } else { (b, a) };
        let (inside, outside, bad_probe) = self.bisect(good, bad);
        // A second crossing inside the bracket shows up as a probe that disagrees with its side.
        let q1 = self.ev.probe(0.5 * (good + inside), &self.signs);
        let q2 = self.ev.probe(0.5 * (outside + bad), &self.signs);
        if !(q1.ok && !q2.ok) {
            if depth < self.max_depth {
                let m = 0.5 * (a + b);
                let pm = self.ev.probe(m, &self.signs);
                self.scan(a, pa, m, &pm, depth + 1, out);
                self.scan(m, &pm, b, pb, depth + 1, out);
                return;
            }
            self.inconsistent = true;
        }
        let step = bad_probe.step;
        let inside_probe = self.ev.probe(inside, &self.signs);
        let margin = step.and_then(|s| inside_probe.margins.get(s).copied()).unwrap_or(0.0);
        out.push(Crossing { inside, outside, entering: !pa.ok, step, margin });
    }
}

/// Sweep every orientation of the linkage at `resolution` initial samples.
pub fn cayley_space(linkage: &Linkage, resolution: usize) -> Result<CayleySpace, CayleyError> {
    let ev = Evaluator::new(linkage)?;
    cayley_space_with(&ev, resolution)
}

pub fn cayley_space_with(ev: &Evaluator<'_>, resolution: usize) -> Result<CayleySpace, CayleyError> {
    let linkage = ev.linkage;
    let n = resolution.max(64);
    let domain = linkage.domain();
    let width = domain[1] - domain[0];
    let circular = linkage.kind == ParamKind::Angle;
    let max_depth = (MAX_SAMPLES / n).max(1).ilog2();
    let mut warnings = Vec::new();
    let mut orientations = Vec::new();
    for signs in ev.orientations()? {
        // Distances start just above zero; angles sample the closed circle, last sample equal to the first.
        let first = if circular { domain[0] } else { domain[0] + width * 1e-9 };
        let ts: Vec<f64> = (0..=n).map(|i| if i == 0 { first } else { domain[0] + width * i as f64 / n as f64 }).collect();
        let probes: Vec<Probe> = ts.iter().map(|&t| ev.probe(t, &signs)).collect();
        let mut sweep = Sweep { ev, signs: signs.clone(), tol: 1e-12 * width, max_depth, inconsistent: false };
        let mut crossings = Vec::new();
        for i in 0..n {
            sweep.scan(ts[i], &probes[i], ts[i + 1], &probes[i + 1], 0, &mut crossings);
        }
        if sweep.inconsistent {
            warnings.push(format!("orientation {signs}: feasibility changes faster than {MAX_SAMPLES} samples resolve"));
        }
        let intervals = assemble(&crossings, probes[0].ok, probes[n].ok, domain, circular);
        orientations.push(OrientationSpace { signs, intervals });
    }
    Ok(CayleySpace { free: linkage.free.clone(), kind: linkage.kind, domain, circular, resolution: n, orientations, warnings })
}

fn assemble(crossings: &[Crossing], start_ok: bool, end_ok: bool, domain: [f64; 2], circular: bool) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut open: Option<(f64, Endpoint)> = start_ok.then_some((domain[0], Endpoint::Domain));
    for c in crossings {
        let end = Endpoint::Transition { outside: c.outside, step: c.step, margin: c.margin };
        if c.entering {
            open = Some((c.inside, end));
        } else if let Some((lo, lo_end)) = open.take() {
            out.push(Interval { lo, hi: c.inside, lo_end, hi_end: end });
        }
    }
    if let Some((lo, lo_end)) = open {
        if end_ok {
            out.push(Interval { lo, hi: domain[1], lo_end, hi_end: Endpoint::Domain });
        }
    }
    if circular && out.len() > 1 {
        let first = out[0];
        let last = out[out.len() - 1];
        if first.lo_end == Endpoint::Domain && last.hi_end == Endpoint::Domain {
            out.pop();
            out[0] = Interval { lo: last.lo, hi: first.hi + (domain[1] - domain[0]), lo_end: last.lo_end, hi_end: first.hi_end };
            out.rotate_left(1);
        }
    }
    out
}

/// A stretch of a path travelled inside one interval of one orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSegment {
    pub signs: SignVector,
    pub interval: Interval,
    pub from: f64,
    pub to: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachPath {
    pub segments: Vec<PathSegment>,
    /// Parameter values where consecutive segments meet.
    pub transitions: Vec<f64>,
    pub length: f64,
}

/// Parameter value and orientation of a realization of the linkage.
pub fn locate_placement(ev: &Evaluator<'_>, space: &CayleySpace, placement: &Placement) -> Result<(usize, usize, f64), CayleyError> {
    let linkage = ev.linkage;
    let v = linkage.measure(&placement.poses).ok_or_else(|| CayleyError::BadEndpoint("free constraint endpoints are not placed".into()))?;
    let probe = linkage.at(v);
    for r in residuals(&probe, &placement.poses) {
        if r.normalized > 1e-6 {
            return Err(CayleyError::BadEndpoint(format!("constraint {} is violated by {:.3e}", r.constraint, r.absolute)));
        }
    }
    let o = space.orientation_of(&placement.signs).ok_or_else(|| CayleyError::BadEndpoint(format!("unknown root choices {}", placement.signs)))?;
    ev.eval(v, &placement.signs, 0.0).map_err(|e| CayleyError::BadEndpoint(e.to_string()))?;
    let i = space.locate(o, v).ok_or_else(|| CayleyError::BadEndpoint(format!("value {v} lies in no interval of {}", placement.signs)))?;
    Ok((o, i, v))
}

/// Whether orientations `oa` and `ob` produce the same placement at boundary value `t`.
fn coincide(ev: &Evaluator<'_>, space: &CayleySpace, oa: usize, ob: usize, t: f64) -> bool {
    let clamp = 1e-7;
    let pa = ev.eval(t, &space.orientations[oa].signs, clamp);
    let pb = ev.eval(t, &space.orientations[ob].signs, clamp);
    match (pa, pb) {
        (Ok(a), Ok(b)) => a.max_diff(&b) <= 1e-8 * ev.linkage.at(t).scale(),
        _ => false,
    }
}

/// Shortest continuous path from `start` to `end` through the configuration space.
pub fn reachable(linkage: &Linkage, space: &CayleySpace, start: &Placement, end: &Placement) -> Result<ReachPath, CayleyError> {
    let ev = Evaluator::new(linkage)?;
    reachable_with(&ev, space, start, end)
}

pub fn reachable_with(ev: &Evaluator<'_>, space: &CayleySpace, start: &Placement, end: &Placement) -> Result<ReachPath, CayleyError> {
    let (so, si, sv) = locate_placement(ev, space, start)?;
    let (eo, ei, evv) = locate_placement(ev, space, end)?;
    let width = space.domain[1] - space.domain[0];
    let tol = 1e-9 * width;
    let pos = |o: usize, i: usize, v: f64| space.orientations[o].intervals[i].position(v, space.circular, tol).unwrap_or(v);

    // Nodes: start, end, then every transition endpoint as (orientation, interval, position, outside value).
    let mut nodes: Vec<(usize, usize, f64, f64)> = vec![(so, si, pos(so, si, sv), sv), (eo, ei, pos(eo, ei, evv), evv)];
    for (o, os) in space.orientations.iter().enumerate() {
        for (i, iv) in os.intervals.iter().enumerate() {
            if let Endpoint::Transition { outside, .. } = iv.lo_end {
                nodes.push((o, i, iv.lo, outside));
            }
            if let Endpoint::Transition { outside, .. } = iv.hi_end {
                nodes.push((o, i, iv.hi, outside));
            }
        }
    }
    let count = nodes.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); count];
    for a in 0..count {
        for b in a + 1..count {
            let (oa, ia, xa, ta) = nodes[a];
            let (ob, ib, xb, tb) = nodes[b];
            if oa == ob && ia == ib {
                let w = (xa - xb).abs();
                adj[a].push((b, w));
                adj[b].push((a, w));
            } else if a >= 2 && b >= 2 && oa != ob {
                let gap = (ta - tb).abs();
                let gap = if space.circular { gap.min((gap - PERIOD).abs()) } else { gap };
                if gap <= 1e-6 * width && coincide(ev, space, oa, ob, ta) {
                    adj[a].push((b, 0.0));
                    adj[b].push((a, 0.0));
                }
            }
        }
    }
    let mut distv = vec![f64::INFINITY; count];
    let mut prev = vec![usize::MAX; count];
    let mut done = vec![false; count];
    distv[0] = 0.0;
    loop {
        let u = (0..count).filter(|&i| !done[i] && distv[i].is_finite()).min_by(|&x, &y| distv[x].total_cmp(&distv[y]));
        let Some(u) = u else { break };
        done[u] = true;
        if u == 1 {
            break;
        }
        for &(v, w) in &adj[u] {
            if distv[u] + w < distv[v] {
                distv[v] = distv[u] + w;
                prev[v] = u;
            }
        }
    }
    if !distv[1].is_finite() {
        return Err(CayleyError::Unreachable);
    }
    let mut chain = vec![1];
    while *chain.last().unwrap() != 0 {
        chain.push(prev[*chain.last().unwrap()]);
    }
    chain.reverse();
    let mut segments = Vec::new();
    let mut transitions = Vec::new();
    for w in chain.windows(2) {
        let (oa, ia, xa, _) = nodes[w[0]];
        let (ob, ib, xb, _) = nodes[w[1]];
        if oa == ob && ia == ib {
            if (xa - xb).abs() > 0.0 || segments.is_empty() {
                segments.push(PathSegment { signs: space.orientations[oa].signs.clone(), interval: space.orientations[oa].intervals[ia], from: xa, to: xb });
            }
        } else {
            transitions.push(xb.rem_euclid(if space.circular { PERIOD } else { f64::INFINITY }));
        }
    }
    if segments.is_empty() {
        segments.push(PathSegment { signs: space.orientations[so].signs.clone(), interval: space.orientations[so].intervals[si], from: sv, to: sv });
    }
    Ok(ReachPath { segments, transitions, length: distv[1] })
}
