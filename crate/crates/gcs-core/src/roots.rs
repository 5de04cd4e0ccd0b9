//! Solution-space navigation: sign vectors, enumeration of the solution tree, sketch-driven
//! root selection, orientation predicates and incremental flips.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::construct::{ExecOptions, ExecState, Executor, Failure, Placement};
use crate::geom::{dist, dot, orient, sub, Pose};
use crate::model::GcsProblem;
use crate::planner::ConstructionPlan;

/// One root index per multi-root plan step, in plan order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct SignVector(pub Vec<usize>);

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum RootsError {
    #[error("step {step} is not a multi-root step of the plan")]
    BadStep { step: usize },
    #[error("every element needs a sketch pose (missing: {missing})")]
    SketchRequired { missing: String },
    #[error("sign vector has {got} entries, the plan has {expected} multi-root steps")]
    SignLength { expected: usize, got: usize },
    #[error("bad sign character `{ch}` at position {pos}")]
    BadSign { ch: String, pos: usize },
    #[error("choice {choice} at slot {slot} exceeds multiplicity {multiplicity}")]
    ChoiceRange { slot: usize, choice: usize, multiplicity: usize },
}

impl SignVector {
    pub fn zeros(n: usize) -> SignVector {
        SignVector(vec![0; n])
    }

    /// All-`+` vector for a plan.
    pub fn first(plan: &ConstructionPlan) -> SignVector {
        SignVector::zeros(plan.multi_root_steps().len())
    }

    /// Render with `+`/`-` for two-root steps and letters for steps with more roots.
    pub fn format_for(&self, plan: &ConstructionPlan) -> String {
        let mults: Vec<usize> = plan.multi_root_steps().iter().map(|&k| plan.steps[k].multiplicity).collect();
        let mut out = String::new();
        for (i, &c) in self.0.iter().enumerate() {
            let m = mults.get(i).copied().unwrap_or(2);
            match (m, c) {
                (0..=2, 0) => out.push('+'),
                (0..=2, 1) => out.push('-'),
                (_, c) if m > 2 && c < 26 => out.push((b'a' + c as u8) as char),
                (_, c) => out.push_str(&format!("[{c}]")),
            }
        }
        out
    }

    /// Parse `+`, `-`, letters `a..z` and bracketed indices `[n]`.
    pub fn parse(s: &str) -> Result<SignVector, RootsError> {
        let mut out = Vec::new();
        let mut chars = s.char_indices().peekable();
        while let Some((pos, ch)) = chars.next() {
            match ch {
                '+' => out.push(0),
                '-' => out.push(1),
                'a'..='z' => out.push((ch as u8 - b'a') as usize),
                '[' => {
                    let mut num = String::new();
                    loop {
                        match chars.next() {
                            Some((_, ']')) => break,
                            Some((_, d)) if d.is_ascii_digit() => num.push(d),
                            _ => return Err(RootsError::BadSign { ch: "[".into(), pos }),
                        }
                    }
                    out.push(num.parse().map_err(|_| RootsError::BadSign { ch: "[".into(), pos })?);
                }
                c if c.is_whitespace() || c == ',' => {}
                c => return Err(RootsError::BadSign { ch: c.to_string(), pos }),
            }
        }
        Ok(SignVector(out))
    }

    /// Check length and ranges against a plan.
    pub fn check(&self, plan: &ConstructionPlan) -> Result<(), RootsError> {
        let steps = plan.multi_root_steps();
        if steps.len() != self.0.len() {
            return Err(RootsError::SignLength { expected: steps.len(), got: self.0.len() });
        }
        for (slot, (&k, &c)) in steps.iter().zip(&self.0).enumerate() {
            let m = plan.steps[k].multiplicity;
            if c >= m {
                return Err(RootsError::ChoiceRange { slot, choice: c, multiplicity: m });
            }
        }
        Ok(())
    }
}

impl fmt::Display for SignVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &c in &self.0 {
            match c {
                0 => f.write_str("+")?,
                1 => f.write_str("-")?,
                c => write!(f, "[{c}]")?,
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
    On,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Turn {
    Cw,
    Ccw,
}

/// A filter on the orientation of placed points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrientationPredicate {
    /// `point` lies on `side` of the directed line `from → to`.
    PointOnSide { point: String, from: String, to: String, side: Side },
    /// Turning from the directed pair `first` to the directed pair `second` is clockwise or not.
    Chirality { first: [String; 2], second: [String; 2], turn: Turn },
}

impl OrientationPredicate {
    pub fn element_ids(&self) -> Vec<&str> {
        match self {
            OrientationPredicate::PointOnSide { point, from, to, .. } => vec![point, from, to],
            OrientationPredicate::Chirality { first, second, .. } => vec![&first[0], &first[1], &second[0], &second[1]],
        }
    }

    /// Whether the predicate holds; unplaced or unknown arguments make it fail.
    pub fn holds(&self, problem: &GcsProblem, poses: &[Option<Pose>]) -> bool {
        let scale = problem.scale();
        let tol = 1e-9 * scale * scale;
        let at = |id: &str| problem.element_index(id).and_then(|i| poses.get(i).copied().flatten()).and_then(|p| p.center());
        match self {
            OrientationPredicate::PointOnSide { point, from, to, side } => {
                let (Some(p), Some(a), Some(b)) = (at(point), at(from), at(to)) else { return false };
                let area = orient(a, b, p);
                match side {
                    Side::Left => area > tol,
                    Side::Right => area < -tol,
                    Side::On => area.abs() <= tol,
                }
            }
            OrientationPredicate::Chirality { first, second, turn } => {
                let (Some(a0), Some(a1), Some(b0), Some(b1)) = (at(&first[0]), at(&first[1]), at(&second[0]), at(&second[1])) else {
                    return false;
                };
                let c = crate::geom::cross(sub(a1, a0), sub(b1, b0));
                match turn {
                    Turn::Cw => c < -tol,
                    Turn::Ccw => c > tol,
                }
            }
        }
    }
}

/// Work counters of one enumeration.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    /// Plan steps executed, counted once per tree node.
    pub steps_executed: usize,
    /// Branches cut because a step had no real solution.
    pub pruned: usize,
    /// Feasible leaves rejected by a predicate.
    pub filtered: usize,
    /// Feasible leaves identical to an earlier one.
    pub duplicates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    pub placements: Vec<Placement>,
    /// The whole tree was walked.
    pub exhausted: bool,
    pub counters: Counters,
}

/// Depth-first walk of the solution tree in lexicographic sign order.
///
/// Branches are cut at the first failing step, leaves failing a predicate are dropped and
/// leaves coinciding with an earlier one are reported once.
pub fn enumerate(plan: &ConstructionPlan, problem: &GcsProblem, limit: usize, predicates: &[OrientationPredicate]) -> Enumeration {
    let ex = Executor::new(plan, problem, ExecOptions::default());
    let mut walk = Walk { ex: &ex, problem, limit: limit.max(1), predicates, out: Vec::new(), counters: Counters::default(), stopped: false };
    let mut st = ex.initial();
    let mut signs = Vec::new();
    walk.visit(&mut st, 0, &mut signs);
    Enumeration { placements: walk.out, exhausted: !walk.stopped, counters: walk.counters }
}

struct Walk<'a, 'b> {
    ex: &'b Executor<'a>,
    problem: &'a GcsProblem,
    limit: usize,
    predicates: &'b [OrientationPredicate],
    out: Vec<Placement>,
    counters: Counters,
    stopped: bool,
}

impl Walk<'_, '_> {
    fn visit(&mut self, st: &mut ExecState, k: usize, signs: &mut Vec<usize>) {
        if self.stopped {
            return;
        }
        if k == self.ex.plan.steps.len() {
            let poses = self.ex.root_poses(st);
            if !self.predicates.iter().all(|p| p.holds(self.problem, &poses)) {
                self.counters.filtered += 1;
                return;
            }
            let tol = 1e-9 * self.ex.scale;
            let pl = Placement { poses, signs: SignVector(signs.clone()) };
            if self.out.iter().any(|q| q.geometric_diff(&pl) <= tol) {
                self.counters.duplicates += 1;
                return;
            }
            self.out.push(pl);
            if self.out.len() >= self.limit {
                self.stopped = true;
            }
            return;
        }
        let m = self.ex.plan.steps[k].multiplicity;
        for choice in 0..m {
            if self.stopped {
                return;
            }
            let mut next = if choice + 1 == m { std::mem::replace(st, self.ex.initial()) } else { st.clone() };
            self.counters.steps_executed += 1;
            if self.ex.step(&mut next, k, choice).is_err() {
                self.counters.pruned += 1;
                continue;
            }
            if m > 1 {
                signs.push(choice);
            }
            self.visit(&mut next, k + 1, signs);
            if m > 1 {
                signs.pop();
            }
        }
    }
}

/// Root choices picked by comparing candidate results with the sketch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicChoice {
    pub signs: SignVector,
    /// Plan steps where no candidate was preferred and the first root was taken.
    pub fallbacks: Vec<usize>,
}

/// Sidedness features of new elements against the elements already placed in a frame.
///
/// Points: orientation against every placed pair, with the position along the pair when
/// collinear, and same-side tests against placed lines. Lines: same-side and foot-point
/// orientation for every placed pair. Circles additionally record tangency type against
/// placed circles.
fn features(before: &[(usize, Pose)], new: &[(usize, Pose)], tol_area: f64) -> Vec<(usize, i8)> {
    let sgn = |x: f64, tol: f64| -> i8 {
        if x > tol {
            1
        } else if x < -tol {
            -1
        } else {
            0
        }
    };
    let tol_len = tol_area.sqrt();
    let mut out = Vec::new();
    let centered: Vec<_> = before.iter().filter_map(|(i, p)| p.center().map(|c| (*i, c))).collect();
    let lines: Vec<_> = before.iter().filter_map(|(i, p)| p.as_line().map(|l| (*i, l))).collect();
    for (x, pose) in new {
        if let Some(c) = pose.center() {
            for (i, &(_, a)) in centered.iter().enumerate() {
                for &(_, b) in &centered[i + 1..] {
                    let s = sgn(orient(a, b, c), tol_area);
                    let f = if s != 0 {
                        s
                    } else {
                        let ab = sub(b, a);
                        let t = dot(sub(c, a), ab) / dot(ab, ab).max(f64::MIN_POSITIVE);
                        if t < 0.0 {
                            10
                        } else if t > 1.0 {
                            12
                        } else {
                            11
                        }
                    };
                    out.push((*x, f));
                }
            }
            for &(_, l) in &lines {
                for &(_, p) in &centered {
                    let sp = sgn(l.signed_dist(p), tol_len);
                    if sp != 0 {
                        out.push((*x, sp * sgn(l.signed_dist(c), tol_len)));
                    }
                }
            }
            if let Pose::Circle { r, .. } = pose {
                for (_, q) in before {
                    if let Pose::Circle { c: qc, r: qr } = q {
                        let d = dist(c, *qc);
                        out.push((*x, sgn(d * d - r * r - qr * qr, tol_area)));
                    }
                }
            }
        }
        if let Some(l) = pose.as_line() {
            for (i, &(_, a)) in centered.iter().enumerate() {
                for &(_, b) in &centered[i + 1..] {
                    out.push((*x, sgn(l.signed_dist(a), tol_len) * sgn(l.signed_dist(b), tol_len)));
                    out.push((*x, sgn(orient(a, b, l.foot(a)), tol_area)));
                    out.push((*x, sgn(orient(a, b, l.foot(b)), tol_area)));
                }
            }
            for &(_, m) in &lines {
                if let Some(ip) = l.intersect(&m) {
                    for &(_, p) in &centered {
                        out.push((*x, sgn(orient(ip, l.foot(p), p), tol_area)));
                    }
                }
            }
        }
    }
    out
}

/// Choose, step by step, the root whose result keeps the sidedness seen in the sketch.
pub fn heuristic_signs(plan: &ConstructionPlan, problem: &GcsProblem) -> Result<HeuristicChoice, RootsError> {
    let missing: Vec<&str> = problem.elements.iter().filter(|e| e.sketch.is_none()).map(|e| e.id.as_str()).collect();
    if !missing.is_empty() {
        return Err(RootsError::SketchRequired { missing: missing.join(", ") });
    }
    let sketch: Vec<Pose> = problem.elements.iter().map(|e| e.sketch.expect("checked")).collect();
    let ex = Executor::new(plan, problem, ExecOptions::default());
    let s = problem.scale();
    let tol = 1e-9 * s * s;
    let mut st = ex.initial();
    let mut signs = Vec::new();
    let mut fallbacks = Vec::new();
    for (k, step) in plan.steps.iter().enumerate() {
        let f = step.frame;
        if step.multiplicity == 1 {
            let _ = ex.step(&mut st, k, 0);
            continue;
        }
        let placed: Vec<usize> = (0..problem.elements.len()).filter(|&v| st.frames[f][v].is_some()).collect();
        let before: Vec<(usize, Pose)> = placed.iter().map(|&v| (v, st.frames[f][v].expect("placed"))).collect();
        let sketch_before: Vec<(usize, Pose)> = placed.iter().map(|&v| (v, sketch[v])).collect();
        let mut best: Option<(usize, usize)> = None;
        let mut tie = false;
        let mut results = Vec::new();
        for choice in 0..step.multiplicity {
            let mut cand = st.clone();
            if ex.step(&mut cand, k, choice).is_err() {
                results.push(None);
                continue;
            }
            let new: Vec<(usize, Pose)> =
                (0..problem.elements.len()).filter(|v| !placed.contains(v)).filter_map(|v| cand.frames[f][v].map(|p| (v, p))).collect();
            let sketch_new: Vec<(usize, Pose)> = new.iter().map(|&(v, _)| (v, sketch[v])).collect();
            let got = features(&before, &new, tol);
            let want = features(&sketch_before, &sketch_new, tol);
            let score = got.iter().zip(&want).filter(|(a, b)| a == b).count();
            match best {
                Some((_, b)) if score < b => {}
                Some((_, b)) if score == b => tie = true,
                _ => {
                    best = Some((choice, score));
                    tie = false;
                }
            }
            results.push(Some(cand));
        }
        let choice = match best {
            Some((c, _)) if !tie => c,
            _ => {
                fallbacks.push(k);
                0
            }
        };
        signs.push(choice);
        if let Some(Some(next)) = results.into_iter().nth(choice) {
            st = next;
        } else {
            let _ = ex.step(&mut st, k, choice);
        }
    }
    Ok(HeuristicChoice { signs: SignVector(signs), fallbacks })
}

/// A solution-tree cursor: the current leaf plus the execution state before every step, so
/// a change at step `k` re-executes only steps `k..`.
#[derive(Debug, Clone)]
pub struct SolutionTree {
    plan: ConstructionPlan,
    problem: GcsProblem,
    signs: SignVector,
    /// `states[k]` is the state before step `k`, kept for every executed step.
    states: Vec<ExecState>,
    outcome: Result<Placement, Failure>,
    /// Steps executed since creation.
    pub steps_executed: usize,
}

impl SolutionTree {
    pub fn new(plan: ConstructionPlan, problem: GcsProblem, signs: SignVector) -> Result<SolutionTree, RootsError> {
        signs.check(&plan)?;
        let mut t = SolutionTree {
            plan,
            problem,
            signs,
            states: Vec::new(),
            outcome: Err(Failure {
                error: crate::construct::ExecError::SignLength { expected: 0, got: 0 },
                partial: Placement { poses: Vec::new(), signs: SignVector::default() },
            }),
            steps_executed: 0,
        };
        t.rebuild(0);
        Ok(t)
    }

    pub fn plan(&self) -> &ConstructionPlan {
        &self.plan
    }

    pub fn problem(&self) -> &GcsProblem {
        &self.problem
    }

    pub fn signs(&self) -> &SignVector {
        &self.signs
    }

    pub fn outcome(&self) -> &Result<Placement, Failure> {
        &self.outcome
    }

    /// Re-execute steps `from..`, starting from the cached state before `from` when there is one.
    fn rebuild(&mut self, from: usize) {
        let ex = Executor::new(&self.plan, &self.problem, ExecOptions::default());
        let from = if from < self.states.len() { from } else { 0 };
        let mut st = if from < self.states.len() { self.states[from].clone() } else { ex.initial() };
        self.states.truncate(from);
        for j in from..self.plan.steps.len() {
            self.states.push(st.clone());
            let choice = ex.slot(j).map_or(0, |s| self.signs.0[s]);
            self.steps_executed += 1;
            if let Err(error) = ex.step(&mut st, j, choice) {
                self.outcome = Err(Failure { error, partial: Placement { poses: ex.root_poses(&st), signs: self.signs.clone() } });
                return;
            }
        }
        self.outcome = Ok(Placement { poses: ex.root_poses(&st), signs: self.signs.clone() });
    }

    /// Advance the root choice of plan step `step` cyclically and rebuild the suffix.
    pub fn flip(&mut self, step: usize) -> Result<&Result<Placement, Failure>, RootsError> {
        let ex = Executor::new(&self.plan, &self.problem, ExecOptions::default());
        let slot = match (step < self.plan.steps.len()).then(|| ex.slot(step)).flatten() {
            Some(s) => s,
            None => return Err(RootsError::BadStep { step }),
        };
        let m = self.plan.steps[step].multiplicity;
        self.signs.0[slot] = (self.signs.0[slot] + 1) % m;
        self.rebuild(step);
        Ok(&self.outcome)
    }

    /// Jump to another leaf, reusing the cached prefix shared with the current one.
    pub fn set_signs(&mut self, signs: SignVector) -> Result<&Result<Placement, Failure>, RootsError> {
        signs.check(&self.plan)?;
        let ex = Executor::new(&self.plan, &self.problem, ExecOptions::default());
        let first = (0..self.plan.steps.len()).find(|&k| ex.slot(k).is_some_and(|s| signs.0[s] != self.signs.0[s]));
        self.signs = signs;
        match first {
            Some(k) => self.rebuild(k),
            None => {
                if let Ok(p) = &mut self.outcome {
                    p.signs = self.signs.clone();
                }
            }
        }
        Ok(&self.outcome)
    }
}
