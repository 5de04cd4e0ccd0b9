use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use gcs_core::model::{Constraint, Element, GcsProblem};
use gcs_core::planner::{plan_problem, PlanOptions};
use gcs_core::roots::enumerate;
use gcs_core::varcircle::{sequential, CycloInput};

fn chain(n: usize) -> GcsProblem {
    let ids: Vec<String> = (0..n).map(|i| format!("P{i}")).collect();
    let els = ids.iter().map(|i| Element::point(i.clone())).collect();
    let mut cons = vec![Constraint::distance("d01", &ids[0], &ids[1], 3.0)];
    for k in 2..n {
        cons.push(Constraint::distance(format!("a{k}"), &ids[k - 2], &ids[k], 2.0 + 0.1 * k as f64));
        cons.push(Constraint::distance(format!("b{k}"), &ids[k - 1], &ids[k], 2.5));
    }
    GcsProblem::new(els, cons)
}

fn bench(c: &mut Criterion) {
    let p = chain(10);
    c.bench_function("plan chain-10", |b| b.iter(|| plan_problem(black_box(&p), &PlanOptions::default()).unwrap()));
    let plan = plan_problem(&p, &PlanOptions::default()).unwrap();
    c.bench_function("enumerate chain-10", |b| b.iter(|| enumerate(black_box(&plan), &p, usize::MAX, &[])));
    let circles = [
        CycloInput::Circle { center: [0.0, 0.0], radius: 1.0 },
        CycloInput::Circle { center: [10.0, 0.0], radius: 2.0 },
        CycloInput::Circle { center: [5.0, 8.0], radius: 1.5 },
    ];
    c.bench_function("apollonius", |b| b.iter(|| sequential(black_box(circles))));
}

criterion_group!(benches, bench);
criterion_main!(benches);
