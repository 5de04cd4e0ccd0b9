//! Geometric elements, constraints and whole problems.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{self, Pose};
use crate::roots::OrientationPredicate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementKind {
    Point,
    Line,
    FixedCircle,
    VariableCircle,
    /// Sugar: a variable circle with two named endpoints lying on it.
    Arc,
}

impl ElementKind {
    /// Degrees of freedom in the plane.
    pub fn dof(self) -> i64 {
        match self {
            ElementKind::Point | ElementKind::Line | ElementKind::FixedCircle => 2,
            ElementKind::VariableCircle | ElementKind::Arc => 3,
        }
    }

    pub fn is_circle(self) -> bool {
        matches!(self, ElementKind::FixedCircle | ElementKind::VariableCircle | ElementKind::Arc)
    }

    /// Points and circles, everything that has a center.
    pub fn is_centered(self) -> bool {
        self != ElementKind::Line
    }

    pub fn keyword(self) -> &'static str {
        match self {
            ElementKind::Point => "point",
            ElementKind::Line => "line",
            ElementKind::FixedCircle => "circle",
            ElementKind::VariableCircle => "vcircle",
            ElementKind::Arc => "arc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Element {
    pub id: String,
    pub kind: ElementKind,
    /// Radius of a fixed circle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Pose in the user's drawing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sketch: Option<Pose>,
    /// Endpoint ids of an arc.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arc_ends: Option<[String; 2]>,
}

impl Element {
    pub fn new(id: impl Into<String>, kind: ElementKind) -> Element {
        Element { id: id.into(), kind, radius: None, sketch: None, arc_ends: None }
    }

    pub fn point(id: impl Into<String>) -> Element {
        Element::new(id, ElementKind::Point)
    }

    pub fn line(id: impl Into<String>) -> Element {
        Element::new(id, ElementKind::Line)
    }

    pub fn fixed_circle(id: impl Into<String>, radius: f64) -> Element {
        Element { radius: Some(radius), ..Element::new(id, ElementKind::FixedCircle) }
    }

    pub fn variable_circle(id: impl Into<String>) -> Element {
        Element::new(id, ElementKind::VariableCircle)
    }

    pub fn arc(id: impl Into<String>, start: impl Into<String>, end: impl Into<String>) -> Element {
        Element { arc_ends: Some([start.into(), end.into()]), ..Element::new(id, ElementKind::Arc) }
    }

    pub fn with_sketch(mut self, pose: Pose) -> Element {
        self.sketch = Some(pose);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    PointPointDistance,
    PointLineDistance,
    LineLineAngle,
    PointOnPoint,
    PointOnLine,
    LineLineParallelDistance,
    TangentLineCircle,
    TangentCircleCircle,
    CenterDistance,
}

impl ConstraintKind {
    pub const ALL: [ConstraintKind; 9] = [
        ConstraintKind::PointPointDistance,
        ConstraintKind::PointLineDistance,
        ConstraintKind::LineLineAngle,
        ConstraintKind::PointOnPoint,
        ConstraintKind::PointOnLine,
        ConstraintKind::LineLineParallelDistance,
        ConstraintKind::TangentLineCircle,
        ConstraintKind::TangentCircleCircle,
        ConstraintKind::CenterDistance,
    ];

    /// Number of scalar equations the constraint contributes.
    pub fn equations(self) -> i64 {
        match self {
            ConstraintKind::PointOnPoint | ConstraintKind::LineLineParallelDistance => 2,
            _ => 1,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            ConstraintKind::PointPointDistance => "distance",
            ConstraintKind::PointLineDistance => "line-distance",
            ConstraintKind::LineLineAngle => "angle",
            ConstraintKind::PointOnPoint => "coincident",
            ConstraintKind::PointOnLine => "on-line",
            ConstraintKind::LineLineParallelDistance => "parallel",
            ConstraintKind::TangentLineCircle => "tangent-line",
            ConstraintKind::TangentCircleCircle => "tangent",
            ConstraintKind::CenterDistance => "center-distance",
        }
    }

    pub fn from_keyword(s: &str) -> Option<ConstraintKind> {
        ConstraintKind::ALL.iter().copied().find(|k| k.keyword() == s)
    }

    pub fn value_required(self) -> bool {
        matches!(
            self,
            ConstraintKind::PointPointDistance
                | ConstraintKind::PointLineDistance
                | ConstraintKind::LineLineAngle
                | ConstraintKind::LineLineParallelDistance
        )
    }

    pub fn takes_value(self) -> bool {
        !matches!(self, ConstraintKind::PointOnPoint | ConstraintKind::PointOnLine)
    }

    pub fn is_angle(self) -> bool {
        self == ConstraintKind::LineLineAngle
    }

    /// Whether the endpoint kinds fit, in either order.
    pub fn accepts(self, a: ElementKind, b: ElementKind) -> bool {
        use ElementKind::*;
        let fits = |x: ElementKind, y: ElementKind| match self {
            ConstraintKind::PointPointDistance => x == Point && y == Point,
            ConstraintKind::PointLineDistance | ConstraintKind::PointOnLine => x == Point && y == Line,
            ConstraintKind::LineLineAngle | ConstraintKind::LineLineParallelDistance => x == Line && y == Line,
            ConstraintKind::PointOnPoint | ConstraintKind::CenterDistance => x.is_centered() && y.is_centered(),
            ConstraintKind::TangentLineCircle => x == Line && y.is_circle(),
            ConstraintKind::TangentCircleCircle => x.is_circle() && y.is_circle(),
        };
        fits(a, b) || fits(b, a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub id: String,
    pub kind: ConstraintKind,
    pub endpoints: [String; 2],
    /// Length, or angle in radians. For tangencies: perimeter gap. For a center
    /// distance to a circle without a value: the point lies on the circle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

impl Constraint {
    pub fn new(id: impl Into<String>, kind: ConstraintKind, a: impl Into<String>, b: impl Into<String>, value: Option<f64>) -> Constraint {
        Constraint { id: id.into(), kind, endpoints: [a.into(), b.into()], value }
    }

    pub fn distance(id: impl Into<String>, a: impl Into<String>, b: impl Into<String>, d: f64) -> Constraint {
        Constraint::new(id, ConstraintKind::PointPointDistance, a, b, Some(d))
    }

    pub fn unordered_key(&self) -> (ConstraintKind, String, String) {
        let [a, b] = &self.endpoints;
        if a <= b {
            (self.kind, a.clone(), b.clone())
        } else {
            (self.kind, b.clone(), a.clone())
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GcsProblem {
    pub elements: Vec<Element>,
    pub constraints: Vec<Constraint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predicates: Vec<OrientationPredicate>,
    /// Id of the constraint whose value is free when the problem is read as a linkage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linkage: Option<String>,
}

impl GcsProblem {
    pub fn new(elements: Vec<Element>, constraints: Vec<Constraint>) -> GcsProblem {
        GcsProblem { elements, constraints, predicates: Vec::new(), linkage: None }
    }

    pub fn element_index(&self, id: &str) -> Option<usize> {
        self.elements.iter().position(|e| e.id == id)
    }

    pub fn constraint_index(&self, id: &str) -> Option<usize> {
        self.constraints.iter().position(|c| c.id == id)
    }

    pub fn element(&self, id: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.id == id)
    }

    /// Element index pair of every constraint. Panics on dangling ids; call after `validate`.
    pub fn endpoint_indices(&self) -> Vec<[usize; 2]> {
        let map: HashMap<&str, usize> = self.elements.iter().enumerate().map(|(i, e)| (e.id.as_str(), i)).collect();
        self.constraints
            .iter()
            .map(|c| [map[c.endpoints[0].as_str()], map[c.endpoints[1].as_str()]])
            .collect()
    }

    pub fn has_sugar(&self) -> bool {
        self.elements.iter().any(|e| e.kind == ElementKind::Arc)
    }

    pub fn has_full_sketch(&self) -> bool {
        self.elements.iter().all(|e| e.sketch.is_some())
    }

    /// Total dof and total equation count, counting arc sugar by what it stands for.
    pub fn bookkeeping(&self) -> (i64, i64) {
        let declared: HashSet<&str> = self.elements.iter().map(|e| e.id.as_str()).collect();
        let mut implied_points: HashSet<&str> = HashSet::new();
        let mut dof = 0;
        let mut eqs: i64 = self.constraints.iter().map(|c| c.kind.equations()).sum();
        for e in &self.elements {
            dof += e.kind.dof();
            if let (ElementKind::Arc, Some(ends)) = (e.kind, &e.arc_ends) {
                for end in ends {
                    if !declared.contains(end.as_str()) {
                        implied_points.insert(end.as_str());
                    }
                    eqs += 1;
                }
            }
        }
        dof += 2 * implied_points.len() as i64;
        (dof, eqs)
    }

    /// A length scale for tolerances: sketch diameter, else the largest length value, else 1.
    pub fn scale(&self) -> f64 {
        let mut pts = Vec::new();
        for e in &self.elements {
            if let Some(p) = e.sketch.and_then(|s| s.center()) {
                pts.push(p);
            }
        }
        let mut s: f64 = 0.0;
        for (i, a) in pts.iter().enumerate() {
            for b in &pts[i + 1..] {
                s = s.max(geom::dist(*a, *b));
            }
        }
        for c in &self.constraints {
            if !c.kind.is_angle() {
                if let Some(v) = c.value {
                    s = s.max(v.abs());
                }
            }
        }
        for e in &self.elements {
            if let Some(r) = e.radius {
                s = s.max(r.abs());
            }
        }
        if s > 0.0 && s.is_finite() {
            s
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("arc `{arc}` has coincident endpoints")]
    DegenerateCompound { arc: String },
    #[error("arc `{arc}` has no endpoints")]
    MissingArcEnds { arc: String },
}

/// Replace every arc by a variable circle, its endpoints and two on-circle incidences.
///
/// The circle keeps the arc's id so constraints naming the arc now name the circle.
pub fn expand_compound(problem: &GcsProblem) -> Result<GcsProblem, ModelError> {
    if !problem.has_sugar() {
        return Ok(problem.clone());
    }
    let mut out = GcsProblem { elements: Vec::new(), constraints: problem.constraints.clone(), ..problem.clone() };
    let declared: HashSet<String> = problem.elements.iter().map(|e| e.id.clone()).collect();
    let mut added: HashSet<String> = HashSet::new();
    let mut existing_constraints: HashSet<String> = problem.constraints.iter().map(|c| c.id.clone()).collect();
    let mut extra_points = Vec::new();
    for e in &problem.elements {
        if e.kind != ElementKind::Arc {
            out.elements.push(e.clone());
            continue;
        }
        let ends = e.arc_ends.clone().ok_or_else(|| ModelError::MissingArcEnds { arc: e.id.clone() })?;
        if ends[0] == ends[1] {
            return Err(ModelError::DegenerateCompound { arc: e.id.clone() });
        }
        let sketch_of = |id: &str| problem.element(id).and_then(|x| x.sketch).and_then(|s| s.center());
        if let (Some(a), Some(b)) = (sketch_of(&ends[0]), sketch_of(&ends[1])) {
            if geom::dist(a, b) <= 1e-12 * problem.scale() {
                return Err(ModelError::DegenerateCompound { arc: e.id.clone() });
            }
        }
        out.elements.push(Element { kind: ElementKind::VariableCircle, arc_ends: None, radius: None, ..e.clone() });
        for end in &ends {
            if !declared.contains(end) && added.insert(end.clone()) {
                extra_points.push(Element::point(end.clone()));
            }
            let cid = format!("{}.on.{}", e.id, end);
            if existing_constraints.insert(cid.clone()) {
                out.constraints.push(Constraint::new(cid, ConstraintKind::CenterDistance, end.clone(), e.id.clone(), None));
            }
        }
    }
    out.elements.extend(extra_points);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DuplicateElement,
    DuplicateConstraintId,
    DanglingReference,
    SelfLoop,
    ZeroDistance,
    NegativeValue,
    MissingValue,
    AngleRange,
    KindMismatch,
    DuplicateConstraint,
    BadRadius,
    Sugar,
    BadPredicate,
    BadLinkage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub subject: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: ViolationKind, subject: &str, message: impl Into<String>) {
        self.violations.push(Violation { kind, subject: subject.to_string(), message: message.into() });
    }
}

pub fn validate(problem: &GcsProblem) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut kinds: HashMap<&str, ElementKind> = HashMap::new();
    for e in &problem.elements {
        if kinds.insert(e.id.as_str(), e.kind).is_some() {
            report.push(ViolationKind::DuplicateElement, &e.id, format!("element id `{}` declared twice", e.id));
        }
        match e.kind {
            ElementKind::FixedCircle => match e.radius {
                Some(r) if r > 0.0 && r.is_finite() => {}
                _ => report.push(ViolationKind::BadRadius, &e.id, "fixed circle radius must be positive"),
            },
            ElementKind::Arc => {
                report.push(ViolationKind::Sugar, &e.id, "arc sugar must be expanded before solving");
            }
            _ => {}
        }
    }
    let mut seen_ids = HashSet::new();
    let mut seen_keys = HashSet::new();
    for c in &problem.constraints {
        if !seen_ids.insert(c.id.as_str()) {
            report.push(ViolationKind::DuplicateConstraintId, &c.id, format!("constraint id `{}` declared twice", c.id));
        }
        let ka = kinds.get(c.endpoints[0].as_str()).copied();
        let kb = kinds.get(c.endpoints[1].as_str()).copied();
        for (end, k) in c.endpoints.iter().zip([ka, kb]) {
            if k.is_none() {
                report.push(ViolationKind::DanglingReference, &c.id, format!("constraint `{}` references missing element `{}`", c.id, end));
            }
        }
        if c.endpoints[0] == c.endpoints[1] {
            report.push(ViolationKind::SelfLoop, &c.id, "constraint endpoints must differ");
        }
        if let (Some(a), Some(b)) = (ka, kb) {
            if !c.kind.accepts(a, b) {
                report.push(
                    ViolationKind::KindMismatch,
                    &c.id,
                    format!("{} cannot join a {} and a {}", c.kind.keyword(), a.keyword(), b.keyword()),
                );
            }
        }
        match c.value {
            None if c.kind.value_required() => report.push(ViolationKind::MissingValue, &c.id, "value required"),
            Some(_) if !c.kind.takes_value() => report.push(ViolationKind::KindMismatch, &c.id, "constraint takes no value"),
            Some(v) if !v.is_finite() => report.push(ViolationKind::NegativeValue, &c.id, "value must be finite"),
            Some(v) => match c.kind {
                ConstraintKind::PointPointDistance | ConstraintKind::CenterDistance if v == 0.0 => {
                    report.push(ViolationKind::ZeroDistance, &c.id, "zero distance must be PointOnPoint")
                }
                ConstraintKind::LineLineAngle if !(0.0..PI).contains(&v) => {
                    report.push(ViolationKind::AngleRange, &c.id, "angle must lie in [0, π)")
                }
                ConstraintKind::LineLineAngle => {}
                _ if v < 0.0 => report.push(ViolationKind::NegativeValue, &c.id, "length must be non-negative"),
                _ => {}
            },
            None => {}
        }
        if !seen_keys.insert(c.unordered_key()) {
            report.push(ViolationKind::DuplicateConstraint, &c.id, "duplicate constraint on the same pair");
        }
    }
    for (i, p) in problem.predicates.iter().enumerate() {
        for id in p.element_ids() {
            match kinds.get(id) {
                Some(ElementKind::Point) | Some(ElementKind::FixedCircle) | Some(ElementKind::VariableCircle) => {}
                Some(_) => report.push(ViolationKind::BadPredicate, id, format!("predicate {i} needs point-like arguments")),
                None => report.push(ViolationKind::BadPredicate, id, format!("predicate {i} references missing element `{id}`")),
            }
        }
    }
    if let Some(free) = &problem.linkage {
        match problem.constraints.iter().find(|c| &c.id == free) {
            None => report.push(ViolationKind::BadLinkage, free, "linkage names a missing constraint"),
            Some(c) if c.value.is_none() => report.push(ViolationKind::BadLinkage, free, "free constraint has no value"),
            Some(_) => {}
        }
    }
    report
}
