//! Execution of construction plans: canonical placement, third-element construction and
//! rigid cluster merges, each running inside a local frame.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{self, add, dist, dot, line_angle, perp, scale, sub, wrap_pi, Line, Motion, Pose, Vec2};
use crate::model::{ConstraintKind, ElementKind, GcsProblem};
use crate::planner::{incidence_circle, ConstructionPlan, Rel, StepKind, ThirdCase};
use crate::roots::SignVector;
use crate::varcircle;

/// Relative band around zero inside which a discriminant counts as a double root.
pub const SNAP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum ExecError {
    #[error("step {step}: no real solution ({reason})")]
    Infeasible { step: usize, reason: String, margin: f64 },
    #[error("step {step}: root {index} is not among the real roots")]
    TagUnavailable { step: usize, index: usize },
    #[error("step {step}: shared elements are not congruent (mismatch {mismatch:.3e})")]
    MergeIncongruent { step: usize, mismatch: f64 },
    #[error("step {step}: degenerate input ({reason})")]
    Degenerate { step: usize, reason: String },
    #[error("degenerate minimal placement at step {step}: {reason}")]
    DegenerateMinimal { step: usize, reason: String },
    #[error("expected {expected} root choices, got {got}")]
    SignLength { expected: usize, got: usize },
    #[error("step {step}: choice {choice} exceeds multiplicity {multiplicity}")]
    BadChoice { step: usize, choice: usize, multiplicity: usize },
}

impl ExecError {
    pub fn step(&self) -> Option<usize> {
        match *self {
            ExecError::Infeasible { step, .. }
            | ExecError::TagUnavailable { step, .. }
            | ExecError::MergeIncongruent { step, .. }
            | ExecError::Degenerate { step, .. }
            | ExecError::DegenerateMinimal { step, .. }
            | ExecError::BadChoice { step, .. } => Some(step),
            ExecError::SignLength { .. } => None,
        }
    }
}

/// Coordinates for every element, with the root choices that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub poses: Vec<Option<Pose>>,
    pub signs: SignVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub constraint: String,
    /// Absolute residual: length units or radians.
    pub absolute: f64,
    /// Lengths divided by the problem scale; angles unchanged.
    pub normalized: f64,
}

impl Placement {
    pub fn is_total(&self) -> bool {
        self.poses.iter().all(|p| p.is_some())
    }

    pub fn residuals(&self, problem: &GcsProblem) -> Vec<Residual> {
        residuals(problem, &self.poses)
    }

    pub fn max_residual(&self, problem: &GcsProblem) -> f64 {
        self.residuals(problem).iter().fold(0.0, |m, r| m.max(r.normalized))
    }

    /// Largest coordinate difference to another placement of the same problem.
    pub fn max_diff(&self, other: &Placement) -> f64 {
        self.poses
            .iter()
            .zip(&other.poses)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => a.max_diff(b),
                (None, None) => 0.0,
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }

    /// Like `max_diff`, but a line and its reversal count as the same line.
    pub fn geometric_diff(&self, other: &Placement) -> f64 {
        self.poses
            .iter()
            .zip(&other.poses)
            .map(|(a, b)| match (a, b) {
                (Some(a), Some(b)) => a.geometric_diff(b),
                (None, None) => 0.0,
                _ => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub error: ExecError,
    /// Root-frame poses placed before the failing step.
    pub partial: Placement,
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.error.fmt(f)
    }
}

/// Residual of every constraint whose endpoints are placed.
pub fn residuals(problem: &GcsProblem, poses: &[Option<Pose>]) -> Vec<Residual> {
    let s = problem.scale();
    let ends = problem.endpoint_indices();
    let mut out = Vec::new();
    for (c, con) in problem.constraints.iter().enumerate() {
        let [a, b] = ends[c];
        let (Some(pa), Some(pb)) = (poses[a], poses[b]) else { continue };
        let v = con.value.unwrap_or(0.0);
        let (abs, is_angle) = match con.kind {
            ConstraintKind::PointPointDistance => ((center(&pa).map_or(f64::NAN, |x| dist(x, center(&pb).unwrap_or(x))) - v).abs(), false),
            ConstraintKind::CenterDistance => {
                let d = dist(center(&pa).unwrap_or([f64::NAN; 2]), center(&pb).unwrap_or([f64::NAN; 2]));
                let target = match con.value {
                    Some(v) => v,
                    None => {
                        let h = incidence_circle([problem.elements[a].kind, problem.elements[b].kind], [a, b]);
                        poses[h].map_or(f64::NAN, |p| p.radius())
                    }
                };
                ((d - target).abs(), false)
            }
            ConstraintKind::PointOnPoint => (dist(center(&pa).unwrap_or([f64::NAN; 2]), center(&pb).unwrap_or([f64::NAN; 2])), false),
            ConstraintKind::PointLineDistance | ConstraintKind::PointOnLine | ConstraintKind::TangentLineCircle => {
                let (l, p) = if pa.as_line().is_some() { (pa, pb) } else { (pb, pa) };
                let line = l.as_line();
                let sd = match (line, center(&p)) {
                    (Some(line), Some(c)) => line.signed_dist(c).abs(),
                    _ => f64::NAN,
                };
                let target = if con.kind == ConstraintKind::TangentLineCircle { p.radius() + v } else { v };
                ((sd - target).abs(), false)
            }
            ConstraintKind::LineLineAngle => match (pa.as_line(), pb.as_line()) {
                (Some(la), Some(lb)) => (geom::angle_diff_mod_pi(line_angle(&la, &lb), v), true),
                _ => (f64::NAN, true),
            },
            ConstraintKind::LineLineParallelDistance => match (pa.as_line(), pb.as_line()) {
                (Some(la), Some(lb)) => {
                    let ang = geom::angle_diff_mod_pi(la.angle(), lb.angle());
                    let off = (la.signed_dist(lb.anchor()).abs() - v).abs() / s;
                    (ang.max(off), true)
                }
                _ => (f64::NAN, true),
            },
            ConstraintKind::TangentCircleCircle => {
                let d = dist(center(&pa).unwrap_or([f64::NAN; 2]), center(&pb).unwrap_or([f64::NAN; 2]));
                let (r1, r2) = (pa.radius(), pb.radius());
                let ext = (d - (r1 + r2 + v)).abs();
                let int1 = (d - (r1 - r2 - v).abs()).abs();
                let int2 = (d - (r2 - r1 - v).abs()).abs();
                (ext.min(int1).min(int2), false)
            }
        };
        let abs = if abs.is_nan() { f64::INFINITY } else { abs };
        out.push(Residual { constraint: con.id.clone(), absolute: abs, normalized: if is_angle { abs } else { abs / s } });
    }
    out
}

fn center(p: &Pose) -> Option<Vec2> {
    p.center()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecOptions {
    /// Negative normalized discriminants down to `-clamp` are treated as zero.
    pub clamp: f64,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions { clamp: 0.0 }
    }
}

/// Poses of every frame after some prefix of the plan.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecState {
    pub frames: Vec<Vec<Option<Pose>>>,
    /// Normalized discriminant of each executed step (`+∞` when the step has none).
    pub margins: Vec<f64>,
}

/// Runs plan steps against one problem.
pub struct Executor<'a> {
    pub plan: &'a ConstructionPlan,
    pub problem: &'a GcsProblem,
    pub scale: f64,
    pub opts: ExecOptions,
    slots: Vec<Option<usize>>,
    ends: Vec<[usize; 2]>,
}

/// Boolean root choices per active dimension; the first active dimension is the most significant.
pub fn choice_bits(dims: &[bool], index: usize) -> Vec<bool> {
    let active = dims.iter().filter(|&&d| d).count();
    let mut bit = active;
    dims.iter()
        .map(|&d| {
            if d {
                bit -= 1;
                (index >> bit) & 1 == 1
            } else {
                false
            }
        })
        .collect()
}

fn sgn(neg: bool) -> f64 {
    if neg {
        -1.0
    } else {
        1.0
    }
}

impl<'a> Executor<'a> {
    pub fn new(plan: &'a ConstructionPlan, problem: &'a GcsProblem, opts: ExecOptions) -> Executor<'a> {
        let mut slots = Vec::with_capacity(plan.steps.len());
        let mut k = 0;
        for s in &plan.steps {
            if s.multiplicity > 1 {
                slots.push(Some(k));
                k += 1;
            } else {
                slots.push(None);
            }
        }
        Executor { plan, problem, scale: problem.scale(), opts, slots, ends: problem.endpoint_indices() }
    }

    /// Sign-vector slot of a step, if it has more than one root.
    pub fn slot(&self, step: usize) -> Option<usize> {
        self.slots[step]
    }

    pub fn sign_len(&self) -> usize {
        self.slots.iter().flatten().count()
    }

    pub fn initial(&self) -> ExecState {
        ExecState { frames: vec![vec![None; self.problem.elements.len()]; self.plan.frames], margins: Vec::new() }
    }

    pub fn root_poses(&self, st: &ExecState) -> Vec<Option<Pose>> {
        st.frames[self.plan.root_frame].clone()
    }

    /// Execute the whole plan for one sign vector.
    pub fn run(&self, signs: &SignVector) -> Result<Placement, Failure> {
        let mut st = self.initial();
        self.run_from(&mut st, 0, signs)
    }

    /// Execute steps `from..` on a state holding the prefix.
    pub fn run_from(&self, st: &mut ExecState, from: usize, signs: &SignVector) -> Result<Placement, Failure> {
        if signs.0.len() != self.sign_len() {
            return Err(Failure {
                error: ExecError::SignLength { expected: self.sign_len(), got: signs.0.len() },
                partial: Placement { poses: self.root_poses(st), signs: signs.clone() },
            });
        }
        for k in from..self.plan.steps.len() {
            let choice = self.slots[k].map_or(0, |s| signs.0[s]);
            if let Err(error) = self.step(st, k, choice) {
                return Err(Failure { error, partial: Placement { poses: self.root_poses(st), signs: signs.clone() } });
            }
        }
        Ok(Placement { poses: self.root_poses(st), signs: signs.clone() })
    }

    fn pose(&self, st: &ExecState, frame: usize, v: usize, step: usize) -> Result<Pose, ExecError> {
        st.frames[frame][v].ok_or_else(|| ExecError::Degenerate { step, reason: format!("{} is not placed", self.problem.elements[v].id) })
    }

    fn radius_of(&self, st: &ExecState, frame: usize, v: usize, step: usize) -> Result<f64, ExecError> {
        let e = &self.problem.elements[v];
        match e.kind {
            ElementKind::FixedCircle => Ok(e.radius.unwrap_or(0.0)),
            ElementKind::VariableCircle | ElementKind::Arc => Ok(self.pose(st, frame, v, step)?.radius()),
            _ => Ok(0.0),
        }
    }

    /// Scalar value of a relation from `from` to `to`, with `frame` holding `from`.
    fn rel_value(&self, st: &ExecState, frame: usize, rel: &Rel, from: usize, to: usize, step: usize) -> Result<f64, ExecError> {
        match *rel {
            Rel::Measured { frame: g, a, b } => {
                let (pa, pb) = (self.pose(st, g, a, step)?, self.pose(st, g, b, step)?);
                Ok(match (pa.as_line(), pb.as_line()) {
                    (Some(la), Some(lb)) => line_angle(&la, &lb),
                    (Some(l), None) => l.signed_dist(pb.center().unwrap_or([0.0; 2])).abs(),
                    (None, Some(l)) => l.signed_dist(pa.center().unwrap_or([0.0; 2])).abs(),
                    (None, None) => dist(pa.center().unwrap_or([0.0; 2]), pb.center().unwrap_or([0.0; 2])),
                })
            }
            Rel::Constraint { index } => {
                let con = &self.problem.constraints[index];
                let [e0, e1] = self.ends[index];
                let v = con.value.unwrap_or(0.0);
                let r = |x: usize| -> Result<f64, ExecError> {
                    if x == to {
                        let e = &self.problem.elements[x];
                        Ok(if e.kind == ElementKind::FixedCircle { e.radius.unwrap_or(0.0) } else { 0.0 })
                    } else {
                        self.radius_of(st, frame, x, step)
                    }
                };
                Ok(match con.kind {
                    ConstraintKind::PointPointDistance | ConstraintKind::PointLineDistance => v,
                    ConstraintKind::PointOnLine => 0.0,
                    ConstraintKind::LineLineAngle => {
                        if from == e0 {
                            wrap_pi(v)
                        } else {
                            wrap_pi(-v)
                        }
                    }
                    ConstraintKind::TangentLineCircle => {
                        let c = if self.problem.elements[e0].kind.is_circle() { e0 } else { e1 };
                        r(c)? + v
                    }
                    ConstraintKind::TangentCircleCircle => r(e0)? + r(e1)? + v,
                    ConstraintKind::CenterDistance => match con.value {
                        Some(v) => v,
                        None => r(incidence_circle([self.problem.elements[e0].kind, self.problem.elements[e1].kind], [e0, e1]))?,
                    },
                    ConstraintKind::PointOnPoint | ConstraintKind::LineLineParallelDistance => {
                        return Err(ExecError::Degenerate { step, reason: format!("constraint {} cannot drive a construction", con.id) })
                    }
                })
            }
        }
    }

    fn centered_pose(&self, v: usize, c: Vec2) -> Pose {
        let e = &self.problem.elements[v];
        match e.kind {
            ElementKind::FixedCircle => Pose::circle(c, e.radius.unwrap_or(0.0)),
            _ => Pose::point(c),
        }
    }

    /// Resolve `h² ≥ 0` with snapping and clamping; `None` means infeasible.
    fn root_height(&self, h2: f64) -> Result<f64, f64> {
        let s2 = self.scale * self.scale;
        let margin = h2 / s2;
        if margin.abs() <= SNAP || (margin < 0.0 && margin >= -self.opts.clamp) {
            Ok(0.0)
        } else if margin < 0.0 {
            Err(margin)
        } else {
            Ok(h2.sqrt())
        }
    }

    /// Execute step `k` with root index `choice`.
    pub fn step(&self, st: &mut ExecState, k: usize, choice: usize) -> Result<(), ExecError> {
        let s = &self.plan.steps[k];
        if choice >= s.multiplicity {
            return Err(ExecError::BadChoice { step: k, choice, multiplicity: s.multiplicity });
        }
        let f = s.frame;
        let mut margin = f64::INFINITY;
        match &s.kind {
            StepKind::PlaceMinimal { constraint } => {
                let [a, b] = [s.outputs[0], s.outputs[1]];
                let rel = Rel::Constraint { index: *constraint };
                let val = self.rel_value(st, f, &rel, a, b, k)?;
                let la = self.problem.elements[a].kind == ElementKind::Line;
                let lb = self.problem.elements[b].kind == ElementKind::Line;
                match (la, lb) {
                    (false, false) => {
                        if !(val > 0.0) {
                            return Err(ExecError::DegenerateMinimal { step: k, reason: "distance must be positive".into() });
                        }
                        st.frames[f][a] = Some(self.centered_pose(a, [0.0, 0.0]));
                        st.frames[f][b] = Some(self.centered_pose(b, [val, 0.0]));
                    }
                    (true, true) => {
                        let ang = val;
                        if ang.abs() < 1e-12 || (std::f64::consts::PI - ang).abs() < 1e-12 {
                            return Err(ExecError::DegenerateMinimal { step: k, reason: "lines are parallel".into() });
                        }
                        st.frames[f][a] = Some(Pose::line(Line::x_axis()));
                        let l2 = Line::through([0.0, 0.0], [ang.cos(), ang.sin()]).expect("unit direction");
                        st.frames[f][b] = Some(Pose::line(l2));
                    }
                    _ => {
                        let (l, p) = if la { (a, b) } else { (b, a) };
                        st.frames[f][l] = Some(Pose::line(Line::x_axis()));
                        st.frames[f][p] = Some(self.centered_pose(p, [0.0, val]));
                    }
                }
            }
            StepKind::ConstructThird { case, rels, dims } => {
                let x = s.outputs[0];
                let [a, b] = [s.inputs[0], s.inputs[1]];
                let r0 = self.rel_value(st, f, &rels[0], a, x, k)?;
                let r1 = self.rel_value(st, f, &rels[1], b, x, k)?;
                let (pa, pb) = (self.pose(st, f, a, k)?, self.pose(st, f, b, k)?);
                let bits = choice_bits(dims, choice);
                let pose = match case {
                    ThirdCase::PpToP => {
                        let (ca, cb) = (pa.center().unwrap_or_default(), pb.center().unwrap_or_default());
                        let d = dist(ca, cb);
                        if d <= 1e-14 * self.scale {
                            return Err(ExecError::Degenerate { step: k, reason: "circle centers coincide".into() });
                        }
                        let h2 = ((r0 + r1) * (r0 + r1) - d * d) * (d * d - (r0 - r1) * (r0 - r1)) / (4.0 * d * d);
                        margin = h2 / (self.scale * self.scale);
                        let h = self.root_height(h2).map_err(|m| ExecError::Infeasible {
                            step: k,
                            reason: "circles do not intersect".into(),
                            margin: m,
                        })?;
                        let u = scale(sub(cb, ca), 1.0 / d);
                        let along = (d * d + r0 * r0 - r1 * r1) / (2.0 * d);
                        let p = add(add(ca, scale(u, along)), scale(perp(u), sgn(bits[0]) * h));
                        self.centered_pose(x, p)
                    }
                    ThirdCase::PlToP => {
                        let c = pa.center().unwrap_or_default();
                        let line = pb.as_line().expect("line input").offset(sgn(bits[0]) * r1);
                        let foot = line.foot(c);
                        let off = dist(c, foot);
                        let h2 = (r0 - off) * (r0 + off);
                        margin = h2 / (self.scale * self.scale);
                        let h = self.root_height(h2).map_err(|m| ExecError::Infeasible {
                            step: k,
                            reason: "circle misses the line".into(),
                            margin: m,
                        })?;
                        self.centered_pose(x, add(foot, scale(line.direction(), sgn(bits[1]) * h)))
                    }
                    ThirdCase::LlToP => {
                        let l0 = pa.as_line().expect("line input").offset(sgn(bits[0]) * r0);
                        let l1 = pb.as_line().expect("line input").offset(sgn(bits[1]) * r1);
                        let p = l0.intersect(&l1).ok_or(ExecError::Infeasible {
                            step: k,
                            reason: "lines are parallel".into(),
                            margin: -1.0,
                        })?;
                        self.centered_pose(x, p)
                    }
                    ThirdCase::PpToL => {
                        let (ca, cb) = (pa.center().unwrap_or_default(), pb.center().unwrap_or_default());
                        let dv = sub(cb, ca);
                        let dl = geom::norm(dv);
                        if dl <= 1e-14 * self.scale {
                            return Err(ExecError::Degenerate { step: k, reason: "circle centers coincide".into() });
                        }
                        let sa = sgn(bits[0]) * r0;
                        let sb = sgn(bits[1]) * r1;
                        let delta = sb - sa;
                        let h2 = (dl - delta) * (dl + delta);
                        margin = h2 / (self.scale * self.scale);
                        let h = self.root_height(h2).map_err(|_| ExecError::TagUnavailable { step: k, index: choice })?;
                        let phi = dv[1].atan2(dv[0]);
                        let psi = phi + h.atan2(delta);
                        let n = [psi.cos(), psi.sin()];
                        Pose::line(Line { n, d: dot(n, ca) - sa })
                    }
                    ThirdCase::PlToL => {
                        let c = pa.center().unwrap_or_default();
                        let base = pb.as_line().expect("line input");
                        let beta = base.angle() + r1;
                        let l = Line::through(c, [beta.cos(), beta.sin()]).expect("unit direction");
                        Pose::line(l.offset(-sgn(bits[0]) * r0))
                    }
                };
                st.frames[f][x] = Some(pose);
            }
            StepKind::MergeClusters { moving, shared } => {
                let g = *moving;
                let m = self.merge_motion(st, f, g, *shared, choice, k)?;
                for v in 0..self.problem.elements.len() {
                    if st.frames[f][v].is_none() {
                        if let Some(p) = st.frames[g][v] {
                            st.frames[f][v] = Some(p.transformed(&m));
                        }
                    }
                }
            }
            StepKind::VarCircleSequential { constraints, .. } => {
                let circle = s.outputs[0];
                let inputs = self.cyclo_inputs(st, f, circle, &s.inputs, constraints, k)?;
                let sols = varcircle::sequential([inputs[0], inputs[1], inputs[2]]);
                let sol = match sols.get(choice) {
                    Some(Some(sol)) => sol,
                    _ if sols.iter().all(|s| s.is_none()) => {
                        return Err(ExecError::Infeasible { step: k, reason: "no circle meets the three inputs".into(), margin: -1.0 })
                    }
                    _ => return Err(ExecError::TagUnavailable { step: k, index: choice }),
                };
                st.frames[f][circle] = Some(Pose::circle(sol.center, sol.radius));
            }
            StepKind::VarCircleMerge { moving, shared, constraints } => {
                let circle = s.outputs[0];
                let g = *moving;
                let fixed_in = self.cyclo_inputs(st, f, circle, &s.inputs[1..3], &constraints[..2], k)?;
                let moving_ins: Vec<usize> = constraints[2..]
                    .iter()
                    .map(|&c| {
                        let [a, b] = self.ends[c];
                        if a == circle {
                            b
                        } else {
                            a
                        }
                    })
                    .collect();
                let moving_in = self.cyclo_inputs(st, g, circle, &moving_ins, &constraints[2..], k)?;
                let e0f = self.pose(st, f, *shared, k)?;
                let e0g = self.pose(st, g, *shared, k)?;
                let sols = varcircle::merge(&e0f, &e0g, [fixed_in[0], fixed_in[1]], [moving_in[0], moving_in[1]]);
                if sols.degenerate && sols.solutions.is_empty() {
                    return Err(ExecError::Degenerate { step: k, reason: "the merge has a continuum of solutions".into() });
                }
                let sol = sols.solutions.get(choice).ok_or(if sols.solutions.is_empty() {
                    ExecError::Infeasible { step: k, reason: "no cluster pose admits the circle".into(), margin: -1.0 }
                } else {
                    ExecError::TagUnavailable { step: k, index: choice }
                })?;
                for v in 0..self.problem.elements.len() {
                    if st.frames[f][v].is_none() {
                        if let Some(p) = st.frames[g][v] {
                            st.frames[f][v] = Some(p.transformed(&sol.motion));
                        }
                    }
                }
                st.frames[f][circle] = Some(Pose::circle(sol.center, sol.radius));
            }
        }
        st.margins.truncate(k);
        st.margins.push(margin);
        Ok(())
    }

    fn cyclo_inputs(
        &self,
        st: &ExecState,
        frame: usize,
        circle: usize,
        inputs: &[usize],
        constraints: &[usize],
        k: usize,
    ) -> Result<Vec<varcircle::CycloInput>, ExecError> {
        let mut out = Vec::new();
        for (&y, &c) in inputs.iter().zip(constraints) {
            let con = &self.problem.constraints[c];
            let p = self.pose(st, frame, y, k)?;
            let v = con.value.unwrap_or(0.0);
            let input = match con.kind {
                ConstraintKind::TangentLineCircle => varcircle::CycloInput::Line { line: p.as_line().expect("line input"), gap: v },
                ConstraintKind::TangentCircleCircle => {
                    varcircle::CycloInput::Circle { center: p.center().unwrap_or_default(), radius: self.radius_of(st, frame, y, k)? + v }
                }
                ConstraintKind::CenterDistance if con.value.is_none() => {
                    varcircle::CycloInput::Circle { center: p.center().unwrap_or_default(), radius: 0.0 }
                }
                _ => {
                    return Err(ExecError::Degenerate {
                        step: k,
                        reason: format!("constraint {} does not act on the perimeter of {}", con.id, self.problem.elements[circle].id),
                    })
                }
            };
            out.push(input);
        }
        Ok(out)
    }

    /// Rigid motion taking frame `g` onto frame `f` through the two shared elements.
    fn merge_motion(&self, st: &ExecState, f: usize, g: usize, shared: [usize; 2], choice: usize, k: usize) -> Result<Motion, ExecError> {
        let [s0, s1] = shared;
        let (a_f, b_f) = (self.pose(st, f, s0, k)?, self.pose(st, f, s1, k)?);
        let (a_g, b_g) = (self.pose(st, g, s0, k)?, self.pose(st, g, s1, k)?);
        let tol = 1e-8 * self.scale;
        let flip = if choice == 1 { -1.0 } else { 1.0 };
        let frame_of = |a: &Pose, b: &Pose| -> Option<(Vec2, Vec2)> {
            match (a.as_line(), b.as_line()) {
                (None, None) => {
                    let (p, q) = (a.center()?, b.center()?);
                    Some((p, sub(q, p)))
                }
                (Some(l), None) => Some((l.foot(b.center()?), l.direction())),
                (None, Some(l)) => Some((l.foot(a.center()?), l.direction())),
                (Some(l1), Some(l2)) => Some((l1.intersect(&l2)?, l1.direction())),
            }
        };
        let (Some((po, pd)), Some((qo, qd))) = (frame_of(&a_g, &b_g), frame_of(&a_f, &b_f)) else {
            return Err(ExecError::Degenerate { step: k, reason: "shared elements do not fix a frame".into() });
        };
        let m = Motion::frame_to_frame(po, pd, qo, scale(qd, flip))
            .ok_or_else(|| ExecError::Degenerate { step: k, reason: "shared points coincide".into() })?;
        let mismatch = a_g.transformed(&m).max_diff(&a_f).max(b_g.transformed(&m).geometric_diff(&b_f)).max(
            a_g.transformed(&m).geometric_diff(&a_f),
        );
        if !(mismatch <= tol) {
            return Err(ExecError::MergeIncongruent { step: k, mismatch });
        }
        Ok(m)
    }
}

/// Execute a plan from scratch with the given root choices.
pub fn execute_plan(plan: &ConstructionPlan, problem: &GcsProblem, signs: &SignVector) -> Result<Placement, Failure> {
    Executor::new(plan, problem, ExecOptions::default()).run(signs)
}

/// Place the moving cluster onto the fixed one through two shared elements.
pub fn merge_clusters(fixed: &[Option<Pose>], moving: &[Option<Pose>], shared: [usize; 2], scale_hint: f64) -> Result<Vec<Option<Pose>>, ExecError> {
    let plan = ConstructionPlan { steps: Vec::new(), frames: 2, root_frame: 0, element_ids: Vec::new() };
    let problem = GcsProblem::default();
    let ex = Executor { plan: &plan, problem: &problem, scale: scale_hint, opts: ExecOptions::default(), slots: Vec::new(), ends: Vec::new() };
    let st = ExecState { frames: vec![fixed.to_vec(), moving.to_vec()], margins: Vec::new() };
    let m = ex.merge_motion(&st, 0, 1, shared, 0, 0)?;
    Ok(fixed.iter().zip(moving).map(|(a, b)| a.or_else(|| b.map(|p| p.transformed(&m)))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Constraint, Element};
    use crate::planner::{plan_problem, PlanOptions};

    fn truss(bd: f64, cd: f64) -> GcsProblem {
        let els = ["A", "B", "C", "D"].iter().map(|i| Element::point(*i)).collect();
        let cons = vec![
            Constraint::distance("AB", "A", "B", 1.0),
            Constraint::distance("BC", "B", "C", 1.0),
            Constraint::distance("CA", "C", "A", 1.0),
            Constraint::distance("BD", "B", "D", bd),
            Constraint::distance("CD", "C", "D", cd),
        ];
        GcsProblem::new(els, cons)
    }

    #[test]
    fn choice_bits_order() {
        assert_eq!(choice_bits(&[true, true], 1), [false, true]);
        assert_eq!(choice_bits(&[true, true], 2), [true, false]);
        assert_eq!(choice_bits(&[false, true], 1), [false, true]);
    }

    #[test]
    fn truss_rhombus() {
        let p = truss(1.0, 1.0);
        let plan = plan_problem(&p, &PlanOptions::default()).unwrap();
        let pl = execute_plan(&plan, &p, &SignVector(vec![0, 1])).unwrap();
        assert!(pl.max_residual(&p) < 1e-12);
        let c = pl.poses[2].unwrap().center().unwrap();
        let d = pl.poses[3].unwrap().center().unwrap();
        let a = pl.poses[0].unwrap().center().unwrap();
        assert!((dist(a, d) - 3f64.sqrt()).abs() < 1e-12, "rhombus diagonal {}", dist(a, d));
        assert!((c[1].abs() - 3f64.sqrt() / 2.0).abs() < 1e-12);
    }

    #[test]
    fn truss_short_struts_infeasible_at_d() {
        let p = truss(0.4, 0.4);
        let plan = plan_problem(&p, &PlanOptions::default()).unwrap();
        let err = execute_plan(&plan, &p, &SignVector(vec![0, 0])).unwrap_err();
        assert_eq!(err.error.step(), Some(2));
        assert!(matches!(err.error, ExecError::Infeasible { .. }));
        assert!(err.partial.poses[2].is_some() && err.partial.poses[3].is_none());
    }

    #[test]
    fn merge_identity_and_mismatch() {
        let fixed = vec![Some(Pose::point([0.0, 0.0])), Some(Pose::point([1.0, 0.0])), None];
        let moving = vec![Some(Pose::point([0.0, 0.0])), Some(Pose::point([1.0, 0.0])), Some(Pose::point([0.5, 2.0]))];
        let out = merge_clusters(&fixed, &moving, [0, 1], 1.0).unwrap();
        assert_eq!(out[2], Some(Pose::point([0.5, 2.0])));
        let bad = vec![Some(Pose::point([0.0, 0.0])), Some(Pose::point([1.1, 0.0])), Some(Pose::point([0.5, 2.0]))];
        assert!(matches!(merge_clusters(&fixed, &bad, [0, 1], 1.0), Err(ExecError::MergeIncongruent { .. })));
    }
}
