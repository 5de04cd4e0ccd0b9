//! Deterministic SVG rendering of a placement.

use std::fmt::Write as _;

use crate::construct::residuals;
use crate::geom::{Line, Pose, Vec2};
use crate::model::GcsProblem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvgOptions {
    /// Width and height of the canvas in pixels.
    pub size: f64,
    /// Normalized residual above which a constraint is drawn as violated.
    pub tol: f64,
}

impl Default for SvgOptions {
    fn default() -> Self {
        SvgOptions { size: 600.0, tol: 1e-8 }
    }
}

struct View {
    min: Vec2,
    max: Vec2,
    k: f64,
    size: f64,
}

impl View {
    fn map(&self, p: Vec2) -> (f64, f64) {
        (self.k * (p[0] - self.min[0]), self.size - self.k * (p[1] - self.min[1]))
    }

    /// Segment of `l` inside the view box, if any.
    fn clip(&self, l: &Line) -> Option<(Vec2, Vec2)> {
        let a = l.anchor();
        let t = l.direction();
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for axis in 0..2 {
            if t[axis].abs() < 1e-15 {
                if a[axis] < self.min[axis] || a[axis] > self.max[axis] {
                    return None;
                }
                continue;
            }
            let s0 = (self.min[axis] - a[axis]) / t[axis];
            let s1 = (self.max[axis] - a[axis]) / t[axis];
            lo = lo.max(s0.min(s1));
            hi = hi.min(s0.max(s1));
        }
        (lo <= hi).then(|| ([a[0] + lo * t[0], a[1] + lo * t[1]], [a[0] + hi * t[0], a[1] + hi * t[1]]))
    }
}

fn f(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

fn anchor(pose: &Pose, toward: Option<Vec2>) -> Vec2 {
    match (pose.center(), pose.as_line()) {
        (Some(c), _) => c,
        (None, Some(l)) => toward.map_or(l.anchor(), |p| l.foot(p)),
        _ => [0.0, 0.0],
    }
}

/// Render placed elements and one connector per constraint; violated constraints are dashed red.
pub fn render_svg(poses: &[Option<Pose>], problem: &GcsProblem, opts: &SvgOptions) -> String {
    let size = opts.size;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">",
        f(size)
    );
    let mut pts: Vec<Vec2> = Vec::new();
    for p in poses.iter().flatten() {
        match *p {
            Pose::Point { p } => pts.push(p),
            Pose::Circle { c, r } => {
                pts.push([c[0] - r, c[1] - r]);
                pts.push([c[0] + r, c[1] + r]);
            }
            Pose::Line { n, d } => pts.push(Line { n, d }.anchor()),
        }
    }
    if pts.is_empty() {
        out.push_str("<g id=\"scene\"></g>\n</svg>\n");
        return out;
    }
    let mut min = pts[0];
    let mut max = pts[0];
    for p in &pts {
        for a in 0..2 {
            min[a] = min[a].min(p[a]);
            max[a] = max[a].max(p[a]);
        }
    }
    let span = (max[0] - min[0]).max(max[1] - min[1]).max(1e-9);
    let margin = 0.1 * span;
    let min = [min[0] - margin, min[1] - margin];
    let max = [min[0] + span + 2.0 * margin, min[1] + span + 2.0 * margin];
    let view = View { min, max, k: size / (span + 2.0 * margin), size };
    out.push_str("<g id=\"scene\">\n");
    let violated: std::collections::HashSet<String> =
        residuals(problem, poses).into_iter().filter(|r| r.normalized > opts.tol).map(|r| r.constraint).collect();
    let ends = problem.endpoint_indices();
    for (c, con) in problem.constraints.iter().enumerate() {
        let [a, b] = ends[c];
        let (Some(pa), Some(pb)) = (poses[a], poses[b]) else { continue };
        let ca = anchor(&pa, pb.center());
        let cb = anchor(&pb, Some(ca));
        let ca = anchor(&pa, Some(cb));
        let (x1, y1) = view.map(ca);
        let (x2, y2) = view.map(cb);
        let style = if violated.contains(&con.id) {
            "stroke=\"red\" stroke-width=\"1.5\" stroke-dasharray=\"4 3\""
        } else {
            "stroke=\"#888\" stroke-width=\"1\""
        };
        let _ = writeln!(
            out,
            "<line class=\"constraint\" data-id=\"{}\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" {style}/>",
            con.id,
            f(x1),
            f(y1),
            f(x2),
            f(y2)
        );
    }
    for (i, p) in poses.iter().enumerate() {
        let Some(p) = p else { continue };
        let id = &problem.elements[i].id;
        match *p {
            Pose::Point { p } => {
                let (x, y) = view.map(p);
                let _ = writeln!(out, "<circle class=\"point\" data-id=\"{id}\" cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"black\"/>", f(x), f(y));
                let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" font-size=\"12\">{id}</text>", f(x + 5.0), f(y - 5.0));
            }
            Pose::Circle { c, r } => {
                let (x, y) = view.map(c);
                let _ = writeln!(
                    out,
                    "<circle class=\"circle\" data-id=\"{id}\" cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"none\" stroke=\"blue\"/>",
                    f(x),
                    f(y),
                    f(view.k * r)
                );
                let _ = writeln!(out, "<text x=\"{}\" y=\"{}\" font-size=\"12\">{id}</text>", f(x + 5.0), f(y - 5.0));
            }
            Pose::Line { n, d } => {
                if let Some((a, b)) = view.clip(&Line { n, d }) {
                    let (x1, y1) = view.map(a);
                    let (x2, y2) = view.map(b);
                    let _ = writeln!(
                        out,
                        "<line class=\"line\" data-id=\"{id}\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"green\"/>",
                        f(x1),
                        f(y1),
                        f(x2),
                        f(y2)
                    );
                }
            }
        }
    }
    out.push_str("</g>\n</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Constraint, Element};

    fn truss() -> (GcsProblem, Vec<Option<Pose>>) {
        let els = ["A", "B", "C", "D"].iter().map(|i| Element::point(*i)).collect();
        let h = 3f64.sqrt() / 2.0;
        let cons = vec![
            Constraint::distance("AB", "A", "B", 1.0),
            Constraint::distance("BC", "B", "C", 1.0),
            Constraint::distance("CA", "C", "A", 1.0),
            Constraint::distance("BD", "B", "D", 1.0),
            Constraint::distance("CD", "C", "D", 1.0),
        ];
        let poses = vec![Some(Pose::point([0.0, 0.0])), Some(Pose::point([1.0, 0.0])), Some(Pose::point([0.5, h])), Some(Pose::point([1.5, h]))];
        (GcsProblem::new(els, cons), poses)
    }

    #[test]
    fn truss_counts() {
        let (p, poses) = truss();
        let s = render_svg(&poses, &p, &SvgOptions::default());
        assert_eq!(s.matches("class=\"point\"").count(), 4);
        assert_eq!(s.matches("class=\"constraint\"").count(), 5);
        assert_eq!(s.matches("stroke-dasharray").count(), 0);
        assert_eq!(s, render_svg(&poses, &p, &SvgOptions::default()));
    }

    #[test]
    fn one_violation_dashed() {
        let (p, mut poses) = truss();
        poses[3] = Some(Pose::point([1.6, 0.9]));
        let s = render_svg(&poses, &p, &SvgOptions::default());
        assert_eq!(s.matches("stroke-dasharray").count(), 2);
        let (mut p, poses) = truss();
        p.constraints[0].value = Some(1.1);
        let s = render_svg(&poses, &p, &SvgOptions::default());
        assert_eq!(s.matches("stroke-dasharray").count(), 1);
    }

    #[test]
    fn empty_shell() {
        let (p, _) = truss();
        let s = render_svg(&[None, None, None, None], &p, &SvgOptions::default());
        assert!(s.contains("<g id=\"scene\"></g>"));
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
    }
}
