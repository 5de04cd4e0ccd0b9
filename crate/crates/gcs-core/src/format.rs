//! The `.gcs` problem format: a line-oriented text document with a JSON mirror.
//!
//! ```text
//! gcs 1
//! point A at 0 0
//! line L normal 0 1 offset 2
//! circle C radius 1.5 at 3 4
//! vcircle V at 1 1 radius 2
//! arc K from S to E
//! constraint distance d1 A B 10
//! constraint angle a1 L M 90deg
//! predicate side P A B left
//! predicate chirality A B B C cw
//! linkage d1
//! ```
//!
//! Blank lines and text after `#` are ignored. Lengths are plain numbers; angles accept a
//! `deg` or `rad` suffix and default to radians.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::geom::{Line, Pose};
use crate::model::{expand_compound, validate, Constraint, ConstraintKind, Element, ElementKind, GcsProblem};
use crate::roots::{OrientationPredicate, Side, Turn};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{line}:{col}: unknown {what} `{word}`")]
    UnknownKind { line: usize, col: usize, what: &'static str, word: String },
    #[error("{line}:{col}: duplicate id `{id}`")]
    DuplicateId { line: usize, col: usize, id: String },
    #[error("{line}:{col}: {message}")]
    Invalid { line: usize, col: usize, message: String },
    #[error("the document declares no elements")]
    EmptyProblem,
    #[error("invalid JSON: {0}")]
    Json(String),
}

impl ParseError {
    pub fn location(&self) -> Option<(usize, usize)> {
        match *self {
            ParseError::Syntax { line, col, .. }
            | ParseError::UnknownKind { line, col, .. }
            | ParseError::DuplicateId { line, col, .. }
            | ParseError::Invalid { line, col, .. } => Some((line, col)),
            ParseError::EmptyProblem | ParseError::Json(_) => None,
        }
    }
}

struct Tokens<'a> {
    line: usize,
    items: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(line: usize, text: &'a str) -> Tokens<'a> {
        let mut items = Vec::new();
        let mut start = None;
        for (i, ch) in text.char_indices() {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    items.push((s, &text[s..i]));
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            items.push((s, &text[s..]));
        }
        Tokens { line, items, pos: 0 }
    }

    fn col(&self) -> usize {
        self.items.get(self.pos).or(self.items.last()).map_or(1, |(c, w)| if self.pos < self.items.len() { c + 1 } else { c + w.len() + 1 })
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { line: self.line, col: self.col(), message: message.into() }
    }

    fn peek(&self) -> Option<&'a str> {
        self.items.get(self.pos).map(|(_, w)| *w)
    }

    fn word(&mut self, what: &str) -> Result<(usize, &'a str), ParseError> {
        match self.items.get(self.pos) {
            Some(&(c, w)) => {
                self.pos += 1;
                Ok((c + 1, w))
            }
            None => Err(self.err(format!("expected {what}"))),
        }
    }

    fn number(&mut self, what: &str) -> Result<f64, ParseError> {
        let col = self.col();
        let (_, w) = self.word(what)?;
        parse_number(w).ok_or(ParseError::Syntax { line: self.line, col, message: format!("expected {what}, found `{w}`") })
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let col = self.col();
        let (_, w) = self.word(&format!("`{kw}`"))?;
        if w == kw {
            Ok(())
        } else {
            Err(ParseError::Syntax { line: self.line, col, message: format!("expected `{kw}`, found `{w}`") })
        }
    }

    fn end(&self) -> Result<(), ParseError> {
        match self.items.get(self.pos) {
            None => Ok(()),
            Some(&(c, w)) => Err(ParseError::Syntax { line: self.line, col: c + 1, message: format!("unexpected `{w}`") }),
        }
    }
}

fn parse_number(w: &str) -> Option<f64> {
    let v: f64 = w.parse().ok()?;
    v.is_finite().then_some(v)
}

fn parse_value(w: &str, angle: bool) -> Option<f64> {
    if let Some(d) = w.strip_suffix("deg") {
        angle.then(|| parse_number(d).map(f64::to_radians)).flatten()
    } else if let Some(r) = w.strip_suffix("rad") {
        angle.then(|| parse_number(r)).flatten()
    } else {
        parse_number(w)
    }
}

fn wrap_angle(v: f64) -> f64 {
    let w = v.rem_euclid(std::f64::consts::PI);
    if w >= std::f64::consts::PI {
        0.0
    } else {
        w
    }
}

/// Parse a `.gcs` document, or its JSON mirror when the text starts with `{`; validates and
/// expands arcs.
pub fn parse_problem(text: &str) -> Result<GcsProblem, ParseError> {
    let (problem, places) = if text.trim_start().starts_with('{') {
        let p: GcsProblem = serde_json::from_str(text).map_err(|e| ParseError::Json(e.to_string()))?;
        (p, HashMap::new())
    } else {
        parse_text(text)?
    };
    if problem.elements.is_empty() {
        return Err(ParseError::EmptyProblem);
    }
    let loc = |subject: &str| places.get(subject).copied().unwrap_or((0, 0));
    let expanded = expand_compound(&problem).map_err(|e| {
        let id = match &e {
            crate::model::ModelError::DegenerateCompound { arc } | crate::model::ModelError::MissingArcEnds { arc } => arc.clone(),
        };
        let (line, col) = loc(&id);
        ParseError::Invalid { line, col, message: e.to_string() }
    })?;
    let report = validate(&expanded);
    if let Some(v) = report.violations.first() {
        let (line, col) = loc(&v.subject);
        return Err(ParseError::Invalid { line, col, message: format!("`{}`: {}", v.subject, v.message) });
    }
    Ok(expanded)
}

type Places = HashMap<String, (usize, usize)>;

fn parse_text(text: &str) -> Result<(GcsProblem, Places), ParseError> {
    let mut p = GcsProblem::default();
    let mut places: Places = HashMap::new();
    let mut seen_header = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut t = Tokens::new(line_no, content);
        let Some(head) = t.peek() else { continue };
        let head_col = t.col();
        t.pos += 1;
        let declare = |id: &str, col: usize, places: &mut Places| -> Result<(), ParseError> {
            if places.insert(id.to_string(), (line_no, col)).is_some() {
                return Err(ParseError::DuplicateId { line: line_no, col, id: id.to_string() });
            }
            Ok(())
        };
        match head {
            "gcs" => {
                let col = t.col();
                let v = t.number("format version")?;
                if v != 1.0 {
                    return Err(ParseError::Syntax { line: line_no, col, message: format!("unsupported version {v}") });
                }
                seen_header = true;
            }
            "point" | "line" | "circle" | "vcircle" | "arc" => {
                let (col, id) = t.word("element id")?;
                declare(id, col, &mut places)?;
                let el = match head {
                    "point" => {
                        let mut e = Element::point(id);
                        if t.peek().is_some() {
                            t.keyword("at")?;
                            e.sketch = Some(Pose::point([t.number("x")?, t.number("y")?]));
                        }
                        e
                    }
                    "line" => {
                        let mut e = Element::line(id);
                        match t.peek() {
                            None => {}
                            Some("normal") => {
                                t.pos += 1;
                                let n = [t.number("normal x")?, t.number("normal y")?];
                                t.keyword("offset")?;
                                let d = t.number("offset")?;
                                let l = Line::new(n, d).ok_or_else(|| t.err("line normal must be nonzero"))?;
                                e.sketch = Some(Pose::line(l));
                            }
                            Some("through") => {
                                t.pos += 1;
                                let a = [t.number("x")?, t.number("y")?];
                                let b = [t.number("x")?, t.number("y")?];
                                let l = Line::through(a, crate::geom::sub(b, a)).ok_or_else(|| t.err("line points coincide"))?;
                                e.sketch = Some(Pose::line(l));
                            }
                            Some(_) => return Err(t.err("expected `normal` or `through`")),
                        }
                        e
                    }
                    "circle" => {
                        t.keyword("radius")?;
                        let r = t.number("radius")?;
                        let mut e = Element::fixed_circle(id, r);
                        if t.peek().is_some() {
                            t.keyword("at")?;
                            e.sketch = Some(Pose::circle([t.number("x")?, t.number("y")?], r));
                        }
                        e
                    }
                    "vcircle" => {
                        let mut e = Element::variable_circle(id);
                        if t.peek().is_some() {
                            t.keyword("at")?;
                            let c = [t.number("x")?, t.number("y")?];
                            t.keyword("radius")?;
                            e.sketch = Some(Pose::circle(c, t.number("radius")?));
                        }
                        e
                    }
                    _ => {
                        t.keyword("from")?;
                        let (_, s) = t.word("start point")?;
                        t.keyword("to")?;
                        let (_, e) = t.word("end point")?;
                        Element::arc(id, s, e)
                    }
                };
                t.end()?;
                p.elements.push(el);
            }
            "constraint" => {
                let (kcol, kw) = t.word("constraint kind")?;
                let kind = ConstraintKind::from_keyword(kw).ok_or(ParseError::UnknownKind {
                    line: line_no,
                    col: kcol,
                    what: "constraint kind",
                    word: kw.to_string(),
                })?;
                let (col, id) = t.word("constraint id")?;
                declare(id, col, &mut places)?;
                let (_, a) = t.word("first element")?;
                let (_, b) = t.word("second element")?;
                let value = match t.peek() {
                    None => None,
                    Some(w) => {
                        let vcol = t.col();
                        t.pos += 1;
                        let v = parse_value(w, kind.is_angle())
                            .ok_or(ParseError::Syntax { line: line_no, col: vcol, message: format!("bad value `{w}`") })?;
                        Some(if kind.is_angle() { wrap_angle(v) } else { v })
                    }
                };
                t.end()?;
                p.constraints.push(Constraint::new(id, kind, a, b, value));
            }
            "predicate" => {
                let (kcol, kw) = t.word("predicate kind")?;
                let pred = match kw {
                    "side" => {
                        let (_, point) = t.word("point")?;
                        let (_, from) = t.word("line start")?;
                        let (_, to) = t.word("line end")?;
                        let scol = t.col();
                        let (_, s) = t.word("side")?;
                        let side = match s {
                            "left" => Side::Left,
                            "right" => Side::Right,
                            "on" => Side::On,
                            _ => return Err(ParseError::UnknownKind { line: line_no, col: scol, what: "side", word: s.to_string() }),
                        };
                        OrientationPredicate::PointOnSide { point: point.into(), from: from.into(), to: to.into(), side }
                    }
                    "chirality" => {
                        let mut ids = Vec::new();
                        for _ in 0..4 {
                            ids.push(t.word("point")?.1.to_string());
                        }
                        let scol = t.col();
                        let (_, s) = t.word("turn")?;
                        let turn = match s {
                            "cw" => Turn::Cw,
                            "ccw" => Turn::Ccw,
                            _ => return Err(ParseError::UnknownKind { line: line_no, col: scol, what: "turn", word: s.to_string() }),
                        };
                        OrientationPredicate::Chirality { first: [ids[0].clone(), ids[1].clone()], second: [ids[2].clone(), ids[3].clone()], turn }
                    }
                    _ => return Err(ParseError::UnknownKind { line: line_no, col: kcol, what: "predicate", word: kw.to_string() }),
                };
                t.end()?;
                places.entry(format!("predicate {}", p.predicates.len())).or_insert((line_no, head_col));
                p.predicates.push(pred);
            }
            "linkage" => {
                let (col, id) = t.word("constraint id")?;
                t.end()?;
                if p.linkage.is_some() {
                    return Err(ParseError::Syntax { line: line_no, col, message: "linkage declared twice".into() });
                }
                places.entry(id.to_string()).or_insert((line_no, col));
                p.linkage = Some(id.to_string());
            }
            other => {
                return Err(ParseError::UnknownKind { line: line_no, col: head_col, what: "statement", word: other.to_string() });
            }
        }
    }
    if !seen_header && !p.elements.is_empty() {
        return Err(ParseError::Syntax { line: 1, col: 1, message: "missing `gcs 1` header".into() });
    }
    Ok((p, places))
}

fn num(v: f64) -> String {
    format!("{v:?}").trim_end_matches(".0").to_string()
}

/// Canonical text form; parsing it gives back the same problem.
pub fn write_problem(p: &GcsProblem) -> String {
    let mut out = String::from("gcs 1\n");
    for e in &p.elements {
        let _ = write!(out, "{} {}", e.kind.keyword(), e.id);
        match (e.kind, e.sketch) {
            (ElementKind::Point, Some(Pose::Point { p })) => {
                let _ = write!(out, " at {} {}", num(p[0]), num(p[1]));
            }
            (ElementKind::Line, Some(Pose::Line { n, d })) => {
                let _ = write!(out, " normal {} {} offset {}", num(n[0]), num(n[1]), num(d));
            }
            (ElementKind::FixedCircle, s) => {
                let _ = write!(out, " radius {}", num(e.radius.unwrap_or(0.0)));
                if let Some(c) = s.and_then(|s| s.center()) {
                    let _ = write!(out, " at {} {}", num(c[0]), num(c[1]));
                }
            }
            (ElementKind::VariableCircle, Some(Pose::Circle { c, r })) => {
                let _ = write!(out, " at {} {} radius {}", num(c[0]), num(c[1]), num(r));
            }
            (ElementKind::Arc, _) => {
                if let Some([s, t]) = &e.arc_ends {
                    let _ = write!(out, " from {s} to {t}");
                }
            }
            _ => {}
        }
        out.push('\n');
    }
    for c in &p.constraints {
        let _ = write!(out, "constraint {} {} {} {}", c.kind.keyword(), c.id, c.endpoints[0], c.endpoints[1]);
        if let Some(v) = c.value {
            let _ = write!(out, " {}{}", num(v), if c.kind.is_angle() { "rad" } else { "" });
        }
        out.push('\n');
    }
    for pr in &p.predicates {
        match pr {
            OrientationPredicate::PointOnSide { point, from, to, side } => {
                let s = match side {
                    Side::Left => "left",
                    Side::Right => "right",
                    Side::On => "on",
                };
                let _ = writeln!(out, "predicate side {point} {from} {to} {s}");
            }
            OrientationPredicate::Chirality { first, second, turn } => {
                let s = if *turn == Turn::Cw { "cw" } else { "ccw" };
                let _ = writeln!(out, "predicate chirality {} {} {} {} {s}", first[0], first[1], second[0], second[1]);
            }
        }
    }
    if let Some(l) = &p.linkage {
        let _ = writeln!(out, "linkage {l}");
    }
    out
}

/// JSON mirror of the text form.
pub fn write_problem_json(p: &GcsProblem) -> String {
    serde_json::to_string_pretty(p).expect("problem serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRUSS: &str = "gcs 1\npoint A at 0 0\npoint B at 1 0\npoint C at 0.5 0.8\npoint D at 1.5 0.8\n\
        constraint distance AB A B 1\nconstraint distance BC B C 1\nconstraint distance CA C A 1\n\
        constraint distance BD B D 1\nconstraint distance CD C D 1\n";

    #[test]
    fn truss_parses() {
        let p = parse_problem(TRUSS).unwrap();
        assert_eq!(p.elements.len(), 4);
        assert_eq!(p.constraints.len(), 5);
        assert_eq!(parse_problem(&write_problem(&p)).unwrap(), p);
        assert_eq!(parse_problem(&write_problem_json(&p)).unwrap(), p);
    }

    #[test]
    fn empty_is_error() {
        assert_eq!(parse_problem("# nothing\n\n"), Err(ParseError::EmptyProblem));
    }

    #[test]
    fn degrees_convert() {
        let p = parse_problem("gcs 1\nline L\nline M\nconstraint angle a L M 90deg\n").unwrap();
        assert_eq!(p.constraints[0].value, Some(std::f64::consts::FRAC_PI_2));
    }

    #[test]
    fn errors_carry_location() {
        let e = parse_problem("gcs 1\npoint A\npoint A\n").unwrap_err();
        assert_eq!(e, ParseError::DuplicateId { line: 3, col: 7, id: "A".into() });
        let e = parse_problem("gcs 1\npoint A\npoint B\nconstraint frobnicate x A B 1\n").unwrap_err();
        assert_eq!(e.location(), Some((4, 12)));
        let e = parse_problem("gcs 1\npoint A\npoint B\nconstraint distance d A B 0\n").unwrap_err();
        assert_eq!(e.location(), Some((4, 21)));
        let e = parse_problem("gcs 1\npoint A extra\n").unwrap_err();
        assert_eq!(e.location(), Some((2, 9)));
    }

    #[test]
    fn arcs_expand_on_parse() {
        let p = parse_problem("gcs 1\narc K from S to E\npoint S at 0 0\npoint E at 1 0\nconstraint distance se S E 1\n").unwrap();
        assert_eq!(p.elements.iter().filter(|e| e.kind == ElementKind::VariableCircle).count(), 1);
        assert_eq!(p.constraints.len(), 3);
    }
}
