//! Circles of unknown radius tangent to, or passing through, already placed elements.
//!
//! A circle (c, R) is lifted to the point (c, z) with R = |z|. Each input becomes a cone
//! or a plane in (x, y, z) once its orientation is chosen: a circle input of radius r
//! gives `|c − p|² = (z − ρ)²` with ρ = ±r, and a line input with gap δ gives
//! `σ·(n·c − d) − δ = z`. Differences of cones are linear, so every system reduces to
//! one quadric against linear equations.

use serde::{Deserialize, Serialize};

use crate::geom::{dot, Line, Motion, Pose, Vec2};
use crate::model::{ConstraintKind, ElementKind, GcsProblem};
use crate::poly::{cramer3, Poly, Ring, TrigPoly};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CycloInput {
    /// Center distance equals `|R ± radius|`; radius zero means the center lies on the circle.
    Circle { center: Vec2, radius: f64 },
    /// Distance from the circle center to the line equals `R + gap`.
    Line { line: Line, gap: f64 },
}

impl CycloInput {
    fn oriented(&self) -> bool {
        match *self {
            CycloInput::Circle { radius, .. } => radius != 0.0,
            CycloInput::Line { .. } => true,
        }
    }

    fn breaks_symmetry(&self) -> bool {
        matches!(*self, CycloInput::Line { gap, .. } if gap != 0.0)
    }

    fn is_cone(&self) -> bool {
        matches!(self, CycloInput::Circle { .. })
    }

    fn magnitude(&self) -> f64 {
        match *self {
            CycloInput::Circle { center, radius } => center[0].abs().max(center[1].abs()).max(radius.abs()),
            CycloInput::Line { line, gap } => line.d.abs().max(gap.abs()),
        }
    }

    pub fn transformed(&self, m: &Motion) -> CycloInput {
        match *self {
            CycloInput::Circle { center, radius } => CycloInput::Circle { center: m.apply(center), radius },
            CycloInput::Line { line, gap } => CycloInput::Line { line: m.apply_line(&line), gap },
        }
    }

    /// Distance residual of a candidate circle, taking the better of the two tangency types.
    pub fn residual(&self, center: Vec2, r: f64) -> f64 {
        match *self {
            CycloInput::Circle { center: p, radius } => {
                let d = crate::geom::dist(center, p);
                (d - (r + radius)).abs().min((d - (r - radius).abs()).abs())
            }
            CycloInput::Line { line, gap } => (line.signed_dist(center).abs() - (r + gap)).abs(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleSol {
    pub center: Vec2,
    pub radius: f64,
}

/// `cone·(x² + y² − z²) + a·(x, y, z) + b = 0`.
#[derive(Debug, Clone)]
struct Lifted<R> {
    cone: bool,
    a: [R; 3],
    b: R,
}

/// Affine image `p ↦ m·p + t` whose entries may depend on a parameter.
struct ParamMotion<R> {
    m: [[R; 2]; 2],
    t: [R; 2],
}

impl<R: Ring> ParamMotion<R> {
    fn identity() -> Self {
        ParamMotion { m: [[R::constant(1.0), R::zero()], [R::zero(), R::constant(1.0)]], t: [R::zero(), R::zero()] }
    }

    fn image(&self, p: Vec2) -> [R; 2] {
        let k = |v: f64| R::constant(v);
        [
            self.m[0][0].mul(&k(p[0])).add(&self.m[0][1].mul(&k(p[1]))).add(&self.t[0]),
            self.m[1][0].mul(&k(p[0])).add(&self.m[1][1].mul(&k(p[1]))).add(&self.t[1]),
        ]
    }

    fn rotate(&self, v: Vec2) -> [R; 2] {
        let k = |x: f64| R::constant(x);
        [
            self.m[0][0].mul(&k(v[0])).add(&self.m[0][1].mul(&k(v[1]))),
            self.m[1][0].mul(&k(v[0])).add(&self.m[1][1].mul(&k(v[1]))),
        ]
    }
}

fn lift<R: Ring>(input: &CycloInput, sign: f64, pm: &ParamMotion<R>) -> Lifted<R> {
    match *input {
        CycloInput::Circle { center, radius } => {
            let rho = sign * radius;
            let c = pm.image(center);
            let two = R::constant(-2.0);
            Lifted {
                cone: true,
                a: [two.mul(&c[0]), two.mul(&c[1]), R::constant(2.0 * rho)],
                b: c[0].mul(&c[0]).add(&c[1].mul(&c[1])).sub(&R::constant(rho * rho)),
            }
        }
        CycloInput::Line { line, gap } => {
            let n = pm.rotate(line.n);
            let d = R::constant(line.d).add(&n[0].mul(&pm.t[0])).add(&n[1].mul(&pm.t[1]));
            let s = R::constant(sign);
            Lifted { cone: false, a: [s.mul(&n[0]), s.mul(&n[1]), R::constant(-1.0)], b: R::zero().sub(&s.mul(&d)).sub(&R::constant(gap)) }
        }
    }
}

/// Sign of every input for each enumerated orientation, and whether the system is symmetric
/// under flipping all orientations together with z.
fn orientations(inputs: &[CycloInput]) -> (Vec<Vec<f64>>, bool) {
    let symmetric = !inputs.iter().any(|i| i.breaks_symmetry());
    let oriented: Vec<usize> = (0..inputs.len()).filter(|&i| inputs[i].oriented()).collect();
    let free = if symmetric && !oriented.is_empty() { oriented.len() - 1 } else { oriented.len() };
    let mut out = Vec::new();
    for idx in 0..(1usize << free) {
        let mut signs = vec![1.0; inputs.len()];
        for (j, &i) in oriented.iter().enumerate() {
            let bit_pos = oriented.len() - 1 - j;
            if bit_pos < free && (idx >> bit_pos) & 1 == 1 {
                signs[i] = -1.0;
            }
        }
        out.push(signs);
    }
    (out, symmetric)
}

fn orientation_count(oriented: usize, symmetric: bool) -> usize {
    1 << if symmetric && oriented > 0 { oriented - 1 } else { oriented }
}

fn perimeter_facts(problem: &GcsProblem, cs: &[usize]) -> (usize, bool) {
    let mut oriented = 0;
    let mut symmetric = true;
    for &c in cs {
        let con = &problem.constraints[c];
        match con.kind {
            ConstraintKind::CenterDistance if con.value.is_none() => {}
            ConstraintKind::TangentLineCircle => {
                oriented += 1;
                if con.value.unwrap_or(0.0) != 0.0 {
                    symmetric = false;
                }
            }
            _ => oriented += 1,
        }
    }
    (oriented, symmetric)
}

/// Number of root slots of a sequential construction.
pub fn sequential_bound(problem: &GcsProblem, ins: &[usize], cs: &[usize]) -> usize {
    let (oriented, symmetric) = perimeter_facts(problem, cs);
    let cones = ins.iter().any(|&e| problem.elements[e].kind != ElementKind::Line);
    orientation_count(oriented, symmetric) * if cones { 2 } else { 1 }
}

/// Degree bounds `(translation, rotation)` of the final polynomial, keyed by how many
/// inputs of each cluster are circles; the fixed cluster holds at least as many.
pub fn merge_degree_bound(fixed_circles: usize, moving_circles: usize) -> (usize, usize) {
    match (fixed_circles, moving_circles) {
        (0, 0) => (1, 2),
        (_, 0) => (2, 4),
        _ => (4, 4),
    }
}

/// Upper bound on the number of solutions of a merge through a variable circle.
pub fn merge_bound(problem: &GcsProblem, shared: usize, ins: &[usize], cs: &[usize]) -> usize {
    let (oriented, symmetric) = perimeter_facts(problem, cs);
    let is_circle = |e: &usize| problem.elements[*e].kind != ElementKind::Line;
    let cf = ins[..2].iter().filter(|e| is_circle(e)).count();
    let cm = ins[2..].iter().filter(|e| is_circle(e)).count();
    let (m, n) = merge_degree_bound(cf.max(cm), cf.min(cm));
    let per = if problem.elements[shared].kind == ElementKind::Line { 2 * m } else { 2 * n };
    orientation_count(oriented, symmetric) * per
}

fn input_scale(inputs: &[CycloInput]) -> f64 {
    1.0 + inputs.iter().fold(0.0f64, |m, i| m.max(i.magnitude()))
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn minkowski(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] - a[2] * b[2]
}

/// Points satisfying three lifted equations, in ascending order of the line parameter.
fn solve_three(l: &[Lifted<f64>; 3]) -> Vec<[f64; 3]> {
    let Some(r) = l.iter().position(|q| q.cone) else {
        let a = [l[0].a, l[1].a, l[2].a];
        let (n, d) = cramer3(&a, &[-l[0].b, -l[1].b, -l[2].b]);
        let size = a.iter().map(|row| dot3(*row, *row).sqrt()).product::<f64>();
        if d.abs() <= 1e-12 * size {
            return Vec::new();
        }
        return vec![[n[0] / d, n[1] / d, n[2] / d]];
    };
    let rows: Vec<([f64; 3], f64)> = (0..3)
        .filter(|&i| i != r)
        .map(|i| {
            if l[i].cone {
                ([l[i].a[0] - l[r].a[0], l[i].a[1] - l[r].a[1], l[i].a[2] - l[r].a[2]], -(l[i].b - l[r].b))
            } else {
                (l[i].a, -l[i].b)
            }
        })
        .collect();
    let (n1, e1) = rows[0];
    let (n2, e2) = rows[1];
    let d = cross3(n1, n2);
    let dd = dot3(d, d);
    if dd <= 1e-24 * dot3(n1, n1) * dot3(n2, n2) {
        return Vec::new();
    }
    let u = cross3(n2, d);
    let v = cross3(d, n1);
    let p0 = [(e1 * u[0] + e2 * v[0]) / dd, (e1 * u[1] + e2 * v[1]) / dd, (e1 * u[2] + e2 * v[2]) / dd];
    let qa = minkowski(d, d);
    let qb = 2.0 * minkowski(p0, d) + dot3(l[r].a, d);
    let qc = minkowski(p0, p0) + dot3(l[r].a, p0) + l[r].b;
    let at = |t: f64| [p0[0] + t * d[0], p0[1] + t * d[1], p0[2] + t * d[2]];
    if qa.abs() <= 1e-12 * dd {
        if qb.abs() <= 1e-300 {
            return Vec::new();
        }
        return vec![at(-qc / qb)];
    }
    match crate::geom::solve_quadratic(qa, qb, qc, 1e-12) {
        crate::geom::QuadRoots::None { .. } => Vec::new(),
        crate::geom::QuadRoots::Double(t) => vec![at(t)],
        crate::geom::QuadRoots::Two(t1, t2) => vec![at(t1), at(t2)],
    }
}

fn accept(x: [f64; 3], symmetric: bool, tol: f64) -> Option<CircleSol> {
    if !x.iter().all(|v| v.is_finite()) || (!symmetric && x[2] < -tol) {
        return None;
    }
    let radius = x[2].abs();
    (radius > tol).then_some(CircleSol { center: [x[0], x[1]], radius })
}

fn same_circle(a: &CircleSol, b: &CircleSol, tol: f64) -> bool {
    crate::geom::dist(a.center, b.center) <= tol && (a.radius - b.radius).abs() <= tol
}

/// Every circle meeting three placed inputs, as fixed root slots: the orientation index
/// times the number of roots per orientation plus the root index. Empty or duplicate slots
/// hold `None`.
pub fn sequential(inputs: [CycloInput; 3]) -> Vec<Option<CircleSol>> {
    let (orients, symmetric) = orientations(&inputs);
    let per = if inputs.iter().any(|i| i.is_cone()) { 2 } else { 1 };
    let s = input_scale(&inputs);
    let tol = 1e-10 * s;
    let mut out: Vec<Option<CircleSol>> = Vec::new();
    let id = ParamMotion::<f64>::identity();
    for signs in &orients {
        let l = [lift(&inputs[0], signs[0], &id), lift(&inputs[1], signs[1], &id), lift(&inputs[2], signs[2], &id)];
        let mut pts = solve_three(&l).into_iter();
        for _ in 0..per {
            let sol = pts.next().and_then(|x| accept(x, symmetric, tol));
            let sol = sol.filter(|c| {
                inputs.iter().all(|i| i.residual(c.center, c.radius) <= 1e-7 * s)
                    && !out.iter().flatten().any(|o| same_circle(o, c, 1e-9 * s))
            });
            out.push(sol);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeSol {
    /// Motion taking the moving cluster onto the fixed one.
    pub motion: Motion,
    pub center: Vec2,
    pub radius: f64,
    pub family: usize,
    /// Rotation angle or translation distance.
    pub parameter: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MergeOutcome {
    pub solutions: Vec<MergeSol>,
    /// Measured degree of the final polynomial for each family and orientation: polynomial
    /// degree for translations, trigonometric degree for rotations.
    pub degrees: Vec<usize>,
    /// The final polynomial vanished identically.
    pub degenerate: bool,
}

/// Numerators, denominator and the three parts (quadric, linear, constant) of the final equation.
struct Eliminated<R> {
    num: [R; 3],
    den: R,
    parts: [R; 3],
}

fn eliminate<R: Ring>(eqs: &[Lifted<R>; 4]) -> Eliminated<R> {
    let neg = |x: &R| R::zero().sub(x);
    let Some(r) = eqs.iter().position(|q| q.cone) else {
        let a = [eqs[0].a.clone(), eqs[1].a.clone(), eqs[2].a.clone()];
        let b = [neg(&eqs[0].b), neg(&eqs[1].b), neg(&eqs[2].b)];
        let (num, den) = cramer3(&a, &b);
        let lin = eqs[3].a[0].mul(&num[0]).add(&eqs[3].a[1].mul(&num[1])).add(&eqs[3].a[2].mul(&num[2]));
        let k = eqs[3].b.mul(&den);
        return Eliminated { num, den, parts: [R::zero(), lin, k] };
    };
    let mut rows_a = Vec::new();
    let mut rows_b = Vec::new();
    let mut prev = r;
    for i in (0..4).filter(|&i| i != r) {
        if eqs[i].cone {
            let p = &eqs[prev];
            rows_a.push([eqs[i].a[0].sub(&p.a[0]), eqs[i].a[1].sub(&p.a[1]), eqs[i].a[2].sub(&p.a[2])]);
            rows_b.push(neg(&eqs[i].b.sub(&p.b)));
            prev = i;
        } else {
            rows_a.push(eqs[i].a.clone());
            rows_b.push(neg(&eqs[i].b));
        }
    }
    let a = [rows_a[0].clone(), rows_a[1].clone(), rows_a[2].clone()];
    let b = [rows_b[0].clone(), rows_b[1].clone(), rows_b[2].clone()];
    let (num, den) = cramer3(&a, &b);
    let quad = num[0].mul(&num[0]).add(&num[1].mul(&num[1])).sub(&num[2].mul(&num[2]));
    let ref_a = &eqs[r].a;
    let lin = den.mul(&ref_a[0].mul(&num[0]).add(&ref_a[1].mul(&num[1])).add(&ref_a[2].mul(&num[2])));
    let k = eqs[r].b.mul(&den).mul(&den);
    Eliminated { num, den, parts: [quad, lin, k] }
}

fn lifts<R: Ring>(inputs: &[CycloInput; 4], signs: &[f64], fixed: &ParamMotion<R>, moving: &ParamMotion<R>) -> [Lifted<R>; 4] {
    [
        lift(&inputs[0], signs[0], fixed),
        lift(&inputs[1], signs[1], fixed),
        lift(&inputs[2], signs[2], moving),
        lift(&inputs[3], signs[3], moving),
    ]
}

fn lifted_value(q: &Lifted<f64>, x: [f64; 3]) -> f64 {
    let quad = if q.cone { minkowski(x, x) } else { 0.0 };
    quad + dot3(q.a, x) + q.b
}

/// Newton refinement of a merge candidate on the four lifted equations, with the motion
/// parameter as the fourth unknown. Keeps the input when no step improves the residual.
fn polish(x: [f64; 3], t: f64, at: impl Fn(f64) -> [Lifted<f64>; 4]) -> ([f64; 3], f64) {
    let size = |x: [f64; 3], t: f64| at(t).iter().fold(0.0f64, |m, q| m.max(lifted_value(q, x).abs()));
    let (mut x, mut t) = (x, t);
    let mut best = size(x, t);
    for _ in 0..16 {
        if best == 0.0 {
            break;
        }
        let h = 1e-6 * t.abs().max(1.0);
        let (l, lp, lm) = (at(t), at(t + h), at(t - h));
        let mut m = [[0.0; 5]; 4];
        for i in 0..4 {
            let q = &l[i];
            let c = if q.cone { 2.0 } else { 0.0 };
            m[i] = [
                c * x[0] + q.a[0],
                c * x[1] + q.a[1],
                -c * x[2] + q.a[2],
                (lifted_value(&lp[i], x) - lifted_value(&lm[i], x)) / (2.0 * h),
                -lifted_value(q, x),
            ];
        }
        let Some(dx) = gauss4(m) else { break };
        let mut step = 1.0;
        let improved = loop {
            let (nx, nt) = ([x[0] + step * dx[0], x[1] + step * dx[1], x[2] + step * dx[2]], t + step * dx[3]);
            let r = size(nx, nt);
            if r < best {
                break Some((nx, nt, r));
            }
            step *= 0.5;
            if step < 1e-3 {
                break None;
            }
        };
        let Some(next) = improved else { break };
        (x, t, best) = next;
    }
    (x, t)
}

/// Solves a 4×4 system given as an augmented matrix, with partial pivoting.
fn gauss4(mut m: [[f64; 5]; 4]) -> Option<[f64; 4]> {
    let norm = m.iter().flat_map(|r| r[..4].iter()).fold(0.0f64, |a, v| a.max(v.abs()));
    for col in 0..4 {
        let piv = (col..4).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() <= 1e-13 * norm {
            return None;
        }
        m.swap(col, piv);
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            for k in col..5 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut out = [0.0; 4];
    for col in (0..4).rev() {
        let s: f64 = (col + 1..4).map(|k| m[col][k] * out[k]).sum();
        out[col] = (m[col][4] - s) / m[col][col];
    }
    Some(out)
}

fn residual_ok(l: &[Lifted<f64>; 4], x: [f64; 3], s: f64) -> bool {
    l.iter().all(|q| {
        let v = lifted_value(q, x);
        let unit = if q.cone { s * s } else { s };
        v.abs() <= 1e-6 * unit
    })
}

/// Place the moving cluster against the fixed one so that one circle of unknown radius meets
/// two inputs of each cluster, with the shared element `e0` kept in place.
pub fn merge(e0_fixed: &Pose, e0_moving: &Pose, fixed: [CycloInput; 2], moving: [CycloInput; 2]) -> MergeOutcome {
    let all = [fixed[0], fixed[1], moving[0], moving[1]];
    let (orients, symmetric) = orientations(&all);
    let s = input_scale(&all);
    let tol = 1e-10 * s;
    let mut out = MergeOutcome::default();
    let push = |out: &mut MergeOutcome, sol: MergeSol| {
        if !out.solutions.iter().any(|o| {
            same_circle(
                &CircleSol { center: o.center, radius: o.radius },
                &CircleSol { center: sol.center, radius: sol.radius },
                1e-8 * s,
            ) && (o.motion.cos - sol.motion.cos).abs() <= 1e-8
                && (o.motion.sin - sol.motion.sin).abs() <= 1e-8
                && crate::geom::dist(o.motion.t, sol.motion.t) <= 1e-8 * s
        }) {
            out.solutions.push(sol);
        }
    };
    match (e0_fixed.as_line(), e0_moving.as_line()) {
        (Some(lf), Some(lg)) => {
            let u = lf.direction();
            for family in 0..2 {
                let dir = if family == 0 { lg.direction() } else { crate::geom::scale(lg.direction(), -1.0) };
                let Some(m0) = Motion::frame_to_frame(lg.anchor(), dir, lf.anchor(), u) else { continue };
                let ins = [fixed[0], fixed[1], moving[0].transformed(&m0), moving[1].transformed(&m0)];
                let t = Poly::linear(0.0, 1.0);
                let pm = ParamMotion { t: [t.scale(u[0]), t.scale(u[1])], ..ParamMotion::<Poly>::identity() };
                for signs in &orients {
                    let el = eliminate(&lifts(&ins, signs, &ParamMotion::identity(), &pm));
                    let fin = &(&el.parts[0] + &el.parts[1]) + &el.parts[2];
                    let mag = el.parts.iter().fold(0.0f64, |m, p| m.max(p.max_abs()));
                    if fin.max_abs() <= 1e-9 * mag || mag == 0.0 {
                        out.degenerate = true;
                        out.degrees.push(0);
                        continue;
                    }
                    let fin = fin.trimmed(1e-10);
                    out.degrees.push(fin.degree_rel(0.0).unwrap_or(0));
                    let at = |tv: f64| {
                        let pmv = ParamMotion { t: crate::geom::scale(u, tv), ..ParamMotion::<f64>::identity() };
                        lifts(&ins, signs, &ParamMotion::identity(), &pmv)
                    };
                    for tv in fin.real_roots() {
                        let Some(x) = point_from(&at(tv)) else { continue };
                        let (x, tv) = polish(x, tv, at);
                        let tr = crate::geom::scale(u, tv);
                        let l = at(tv);
                        if !residual_ok(&l, x, s) {
                            continue;
                        }
                        if let Some(c) = accept(x, symmetric, tol) {
                            let motion = Motion::translation(tr).compose(&m0);
                            push(&mut out, MergeSol { motion, center: c.center, radius: c.radius, family, parameter: tv });
                        }
                    }
                }
            }
        }
        (None, None) => {
            let (Some(c0), Some(c0g)) = (e0_fixed.center(), e0_moving.center()) else { return out };
            let shift_f = Motion::translation([-c0[0], -c0[1]]);
            let shift_g = Motion::translation([-c0g[0], -c0g[1]]);
            let ins = [fixed[0].transformed(&shift_f), fixed[1].transformed(&shift_f), moving[0].transformed(&shift_g), moving[1].transformed(&shift_g)];
            let (cth, sth) = (TrigPoly::first_order(0.0, 1.0, 0.0), TrigPoly::first_order(0.0, 0.0, 1.0));
            let pm = ParamMotion { m: [[cth.clone(), sth.scale(-1.0)], [sth, cth]], t: [TrigPoly::zero(), TrigPoly::zero()] };
            for signs in &orients {
                let el = eliminate(&lifts(&ins, signs, &ParamMotion::identity(), &pm));
                let fin = &(&el.parts[0] + &el.parts[1]) + &el.parts[2];
                let mag = el.parts.iter().fold(0.0f64, |m, p| m.max(p.max_abs()));
                if fin.max_abs() <= 1e-9 * mag || mag == 0.0 {
                    out.degenerate = true;
                    out.degrees.push(0);
                    continue;
                }
                let deg = fin.degree_rel(1e-10).unwrap_or(0);
                out.degrees.push(deg);
                let mut thetas: Vec<f64> = fin.to_half_angle(deg).real_roots().into_iter().map(|u| 2.0 * u.atan()).collect();
                let at_pi = fin.eval(std::f64::consts::PI);
                if at_pi.abs() <= 1e-9 * fin.max_abs() * (2 * deg + 1) as f64 {
                    thetas.push(std::f64::consts::PI);
                }
                thetas.sort_by(f64::total_cmp);
                let at = |th: f64| {
                    let (c, sn) = (th.cos(), th.sin());
                    let pmv = ParamMotion { m: [[c, -sn], [sn, c]], t: [0.0, 0.0] };
                    lifts(&ins, signs, &ParamMotion::identity(), &pmv)
                };
                for th in thetas {
                    let Some(x) = point_from(&at(th)) else { continue };
                    let (x, th) = polish(x, th, at);
                    let l = at(th);
                    if !residual_ok(&l, x, s) {
                        continue;
                    }
                    if let Some(circ) = accept(x, symmetric, tol) {
                        let rot = Motion::rotation(th);
                        let motion = Motion::translation(c0).compose(&rot).compose(&shift_g);
                        let center = [circ.center[0] + c0[0], circ.center[1] + c0[1]];
                        push(&mut out, MergeSol { motion, center, radius: circ.radius, family: 0, parameter: th });
                    }
                }
            }
        }
        _ => {}
    }
    out
}

fn point_from(l: &[Lifted<f64>; 4]) -> Option<[f64; 3]> {
    let el = eliminate(l);
    let size = el.num.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if el.den.abs() <= 1e-13 * size || el.den == 0.0 {
        return None;
    }
    Some([el.num[0] / el.den, el.num[1] / el.den, el.num[2] / el.den])
}

/// Signed height of a tangent plane, used by callers that want the lift of a placed circle.
pub fn lifted_height(line: &Line, center: Vec2, sign: f64, gap: f64) -> f64 {
    sign * (dot(line.n, center) - line.d) - gap
}
