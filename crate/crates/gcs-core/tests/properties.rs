use proptest::prelude::*;

use gcs_core::construct::execute_plan;
use gcs_core::geom::{Line, Pose};
use gcs_core::planner::PlanOptions;
use gcs_core::roots::{enumerate, heuristic_signs, Side, SolutionTree};
use gcs_core::undercon::constraint_values_for;
use gcs_core::{parse_problem, plan_problem, write_problem, Element, ElementKind, GcsProblem, OrientationPredicate, SignVector};

/// One element added to a growing rigid body, attached to two earlier elements.
#[derive(Debug, Clone)]
struct Addition {
    line: bool,
    x: f64,
    y: f64,
    attach: (usize, usize),
}

fn additions() -> impl Strategy<Value = Vec<Addition>> {
    prop::collection::vec((any::<bool>(), -10.0..10.0f64, -10.0..10.0f64, any::<(usize, usize)>()), 1..6)
        .prop_map(|v| v.into_iter().map(|(line, x, y, attach)| Addition { line, x, y, attach }).collect())
}

/// Sketch poses for a base pair of points followed by the additions. A line is stored by
/// its closest point to the origin and a direction angle taken from the same coordinates.
fn sketch(base: [f64; 4], adds: &[Addition]) -> Vec<Pose> {
    let mut out = vec![Pose::point([base[0], base[1]]), Pose::point([base[2], base[3]])];
    for a in adds {
        out.push(if a.line {
            let th = a.x.atan2(a.y);
            Pose::line(Line::through([a.x, a.y], [th.cos(), th.sin()]).unwrap())
        } else {
            Pose::point([a.x, a.y])
        });
    }
    out
}

/// Builds a problem that grows one element at a time, so it always decomposes into triangles.
/// A new line never attaches to two lines, since two angles would not fix it.
fn build(poses: &[Pose], adds: &[Addition]) -> Option<GcsProblem> {
    let id = |i: usize| format!("E{i}");
    let elements = poses
        .iter()
        .enumerate()
        .map(|(i, p)| match p {
            Pose::Line { .. } => Element::line(id(i)),
            _ => Element::point(id(i)),
        }
        .with_sketch(*p))
        .collect();
    let mut p = GcsProblem::new(elements, Vec::new());
    let mut pairs = vec![[id(0), id(1)]];
    for (k, a) in adds.iter().enumerate() {
        let n = k + 2;
        let i = a.attach.0 % n;
        let mut j = a.attach.1 % (n - 1);
        if j >= i {
            j += 1;
        }
        let is_line = |e: usize| p.elements[e].kind == ElementKind::Line;
        if a.line && is_line(i) && is_line(j) {
            return None;
        }
        pairs.push([id(i), id(n)]);
        pairs.push([id(j), id(n)]);
    }
    p.constraints = constraint_values_for(&p, &pairs).ok()?.into_iter().map(|c| c.constraint).collect();
    Some(p)
}

fn problem() -> impl Strategy<Value = (GcsProblem, Vec<Addition>, [f64; 4])> {
    (prop::array::uniform4(-10.0..10.0f64), additions()).prop_filter_map("attachment", |(base, adds)| {
        let p = build(&sketch(base, &adds), &adds)?;
        Some((p, adds, base))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn incremental_matches_full_execution((p, _, _) in problem(), stretch in 0.2..3.0f64, flips in prop::collection::vec(any::<usize>(), 1..40)) {
        let mut p = p;
        // Stretch the last constraint so some branches become infeasible.
        if let Some(c) = p.constraints.last_mut() {
            if !c.kind.is_angle() {
                c.value = c.value.map(|v| v * stretch);
            }
        }
        let Ok(plan) = plan_problem(&p, &PlanOptions::default()) else { return Ok(()) };
        let multi = plan.multi_root_steps();
        prop_assume!(!multi.is_empty());
        let mut tree = SolutionTree::new(plan.clone(), p.clone(), SignVector::first(&plan)).unwrap();
        for f in flips {
            tree.flip(multi[f % multi.len()]).unwrap();
            let full = execute_plan(&plan, &p, tree.signs());
            match (tree.outcome(), &full) {
                (Ok(a), Ok(b)) => prop_assert!(a.max_diff(b) <= 1e-12),
                (Err(a), Err(b)) => prop_assert_eq!(&a.error, &b.error),
                _ => prop_assert!(false, "feasibility differs at {}", tree.signs()),
            }
        }
    }

    #[test]
    fn predicates_keep_exactly_the_satisfying_placements((p, _, _) in problem(), picks in prop::collection::vec((any::<(usize, usize, usize)>(), any::<bool>()), 1..3)) {
        let points: Vec<String> = p.elements.iter().filter(|e| e.kind == ElementKind::Point).map(|e| e.id.clone()).collect();
        prop_assume!(points.len() >= 3);
        let mut p = p;
        for ((a, b, c), left) in picks {
            let (a, b, c) = (a % points.len(), b % points.len(), c % points.len());
            if a == b || b == c || a == c {
                continue;
            }
            let side = if left { Side::Left } else { Side::Right };
            p.predicates.push(OrientationPredicate::PointOnSide { point: points[a].clone(), from: points[b].clone(), to: points[c].clone(), side });
        }
        let Ok(plan) = plan_problem(&p, &PlanOptions::default()) else { return Ok(()) };
        let all = enumerate(&plan, &p, 4096, &[]);
        let kept = enumerate(&plan, &p, 4096, &p.predicates);
        let expected: Vec<&SignVector> = all.placements.iter().filter(|pl| p.predicates.iter().all(|q| q.holds(&p, &pl.poses))).map(|pl| &pl.signs).collect();
        let got: Vec<&SignVector> = kept.placements.iter().map(|pl| &pl.signs).collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn heuristic_ignores_similarity_of_the_sketch((p, adds, base) in problem(), k in 0.01..100.0f64, angle in -3.0..3.0f64, t in prop::array::uniform2(-50.0..50.0f64)) {
        let (c, s) = (angle.cos(), angle.sin());
        let map = |q: [f64; 2]| [k * (c * q[0] - s * q[1]) + t[0], k * (s * q[0] + c * q[1]) + t[1]];
        let moved: Vec<Pose> = sketch(base, &adds)
            .into_iter()
            .map(|pose| match pose {
                Pose::Line { n, d } => {
                    let foot = map([n[0] * d, n[1] * d]);
                    Pose::line(Line::through(foot, [-(s * n[0] + c * n[1]), c * n[0] - s * n[1]]).unwrap())
                }
                Pose::Point { p } => Pose::point(map(p)),
                other => other,
            })
            .collect();
        let q = build(&moved, &adds).unwrap();
        let (Ok(plan), Ok(qplan)) = (plan_problem(&p, &PlanOptions::default()), plan_problem(&q, &PlanOptions::default())) else { return Ok(()) };
        prop_assume!(plan == qplan);
        let a = heuristic_signs(&plan, &p).map(|h| h.signs);
        let b = heuristic_signs(&qplan, &q).map(|h| h.signs);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn text_format_round_trips((p, _, _) in problem(), linkage in any::<bool>()) {
        let mut p = p;
        if linkage {
            p.linkage = p.constraints.first().map(|c| c.id.clone());
        }
        let text = write_problem(&p);
        let back = parse_problem(&text).unwrap();
        prop_assert_eq!(&back, &p);
        prop_assert_eq!(write_problem(&back), text);
    }
}
