//! Planar geometric constraint solving by triangle decomposition.
//!
//! The pipeline runs from a [`model::GcsProblem`] through the labeled constraint
//! graph ([`graph`]), a decomposition and construction plan ([`planner`]), and
//! plan execution ([`construct`]) to navigation of the solution space ([`roots`]).
//! Variable-radius circles are handled in [`varcircle`], under-constrained problems
//! in [`undercon`], and one-parameter linkages in [`cayley`].

pub mod cayley;
pub mod construct;
pub mod format;
pub mod geom;
pub mod graph;
pub mod model;
pub mod planner;
pub mod poly;
pub mod roots;
pub mod svg;
pub mod undercon;
pub mod varcircle;

pub use construct::{execute_plan, ExecError, Placement};
pub use format::{parse_problem, write_problem, ParseError};
pub use graph::{build_graph, classify, Classification, ConstraintGraph, Verdict};
pub use model::{Constraint, ConstraintKind, Element, ElementKind, GcsProblem};
pub use planner::{plan_problem, ConstructionPlan, DecompositionTree, PlanError};
pub use roots::{OrientationPredicate, SignVector};
