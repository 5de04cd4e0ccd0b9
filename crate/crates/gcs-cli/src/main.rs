//! `gcs`: analyze, plan, solve and explore planar constraint problems stored as `.gcs` files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use gcs_core::cayley::{cayley_space_with, reachable_with, CayleyError, CayleySpace, Endpoint, Evaluator, Linkage, ParamKind};
use gcs_core::construct::{Executor, ExecOptions, Placement};
use gcs_core::geom::Pose;
use gcs_core::planner::PlanOptions;
use gcs_core::roots::{enumerate, heuristic_signs};
use gcs_core::svg::{render_svg, SvgOptions};
use gcs_core::undercon::{apply_template, conditional_completion, constraint_values_for, finish_completion, free_completion, UnderconError};
use gcs_core::{build_graph, classify, parse_problem, plan_problem, write_problem, GcsProblem, PlanError, SignVector, Verdict};
use gcs_nav::{placement_json, NavConfig};

const EXIT_OK: u8 = 0;
const EXIT_FAILURE: u8 = 1;
const EXIT_UNDER: u8 = 2;
const EXIT_OVER: u8 = 3;
const EXIT_NOT_DECOMPOSABLE: u8 = 4;
const EXIT_INFEASIBLE: u8 = 5;
const EXIT_UNREACHABLE: u8 = 6;

#[derive(Parser)]
#[command(name = "gcs", version, about = "Planar geometric constraint solver")]
struct Cli {
    /// Print results and errors as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the constraint graph and report its deficit.
    Analyze { file: PathBuf },
    /// Print the construction plan with the root count of each step.
    Plan {
        file: PathBuf,
        /// Tie-break seed for the decomposition.
        #[arg(long, default_value_t = 0)]
        seed: usize,
    },
    /// Place every element for one choice of roots.
    Solve {
        file: PathBuf,
        /// Root choices, one character per multi-root step: + - or a..z.
        #[arg(long, conflicts_with = "heuristic", allow_hyphen_values = true)]
        signs: Option<String>,
        /// Choose the roots that best match the sketch coordinates.
        #[arg(long)]
        heuristic: bool,
        /// Also write an SVG drawing of the placement.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// List the placements of every root choice.
    Enumerate {
        file: PathBuf,
        #[arg(long, default_value_t = 256)]
        limit: usize,
        /// Keep only placements satisfying the predicates declared in the file.
        #[arg(long)]
        predicates: bool,
    },
    /// Add constraints to an under-constrained problem until it is well-constrained.
    Complete {
        file: PathBuf,
        /// Candidate pairs, one `A B` pair per line.
        #[arg(long)]
        pool: Option<PathBuf>,
    },
    /// Intervals of the free constraint value where the linkage can be built.
    Cayley {
        file: PathBuf,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
    },
    /// Continuous path between two realizations given as SIGNS@VALUE.
    Reach {
        file: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        #[arg(long, allow_hyphen_values = true)]
        end: String,
        #[arg(long, default_value_t = 256)]
        resolution: usize,
    },
    /// Run the navigation HTTP service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Minutes before an idle session is dropped.
        #[arg(long, default_value_t = 30)]
        idle_minutes: u64,
    },
}

/// A failed command: exit code plus a message for stderr.
struct Fail {
    code: u8,
    kind: &'static str,
    message: String,
    extra: Value,
}

impl Fail {
    fn new(code: u8, kind: &'static str, message: impl Into<String>) -> Fail {
        Fail { code, kind, message: message.into(), extra: Value::Null }
    }
}

type Outcome = Result<(String, u8), Fail>;

fn load(path: &Path) -> Result<GcsProblem, Fail> {
    let text = std::fs::read_to_string(path).map_err(|e| Fail::new(EXIT_FAILURE, "io", format!("{}: {e}", path.display())))?;
    parse_problem(&text).map_err(|e| {
        let mut f = Fail::new(EXIT_FAILURE, "parse", format!("{}:{e}", path.display()));
        if let Some((line, col)) = e.location() {
            f.extra = json!({ "line": line, "col": col });
        }
        f
    })
}

fn plan_fail(e: PlanError) -> Fail {
    match e {
        PlanError::NotTriangleDecomposable { .. } => Fail::new(EXIT_NOT_DECOMPOSABLE, "not_triangle_decomposable", e.to_string()),
        _ => Fail::new(EXIT_FAILURE, "invalid", e.to_string()),
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).unwrap();
    s.push('\n');
    s
}

fn fmt_pose(p: &Pose) -> String {
    match *p {
        Pose::Point { p } => format!("point  ({:.12}, {:.12})", p[0], p[1]),
        Pose::Line { n, d } => format!("line   normal ({:.12}, {:.12}) offset {:.12}", n[0], n[1], d),
        Pose::Circle { c, r } => format!("circle center ({:.12}, {:.12}) radius {:.12}", c[0], c[1], r),
    }
}

fn placement_text(problem: &GcsProblem, placement: &Placement, out: &mut String) {
    let w = problem.elements.iter().map(|e| e.id.len()).max().unwrap_or(1);
    for (e, p) in problem.elements.iter().zip(&placement.poses) {
        match p {
            Some(p) => writeln!(out, "  {:w$}  {}", e.id, fmt_pose(p)).unwrap(),
            None => writeln!(out, "  {:w$}  (not placed)", e.id).unwrap(),
        }
    }
}

fn analyze(file: &Path, as_json: bool) -> Outcome {
    let problem = load(file)?;
    let graph = build_graph(&problem);
    let c = classify(&graph);
    let code = match c.verdict {
        Verdict::GenericallyWellConstrained | Verdict::Symmetric => EXIT_OK,
        Verdict::GenericallyUnderConstrained => EXIT_UNDER,
        Verdict::GenericallyOverConstrained => EXIT_OVER,
    };
    let witness: Option<Vec<&str>> = c.witness.as_ref().map(|w| w.iter().map(|&v| graph.ids[v].as_str()).collect());
    let witness_deficit = c.witness.as_ref().map(|w| graph.deficit(Some(w)).ok());
    if as_json {
        let v = json!({
            "verdict": c.verdict.describe(),
            "deficit": c.deficit,
            "elements": problem.elements.len(),
            "constraints": problem.constraints.len(),
            "witness": witness,
            "witness_deficit": witness_deficit,
            "exhaustive": c.complete,
        });
        return Ok((pretty(&v), code));
    }
    let mut out = format!("{}, deficit {}\n", c.verdict.describe(), c.deficit);
    writeln!(out, "elements: {}, constraints: {}", problem.elements.len(), problem.constraints.len()).unwrap();
    if let (Some(w), Some(Some(d))) = (witness, witness_deficit) {
        writeln!(out, "witness: {} (deficit {d})", w.join(" ")).unwrap();
    }
    if !c.complete {
        out.push_str("note: a component was too large for the exhaustive subgraph scan\n");
    }
    Ok((out, code))
}

fn plan_cmd(file: &Path, seed: usize, as_json: bool) -> Outcome {
    let problem = load(file)?;
    let plan = plan_problem(&problem, &PlanOptions { seed, ..Default::default() }).map_err(plan_fail)?;
    let listing = plan.construction_listing(&problem);
    if as_json {
        let steps: Vec<Value> = plan
            .steps
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let outs: Vec<&str> = s.outputs.iter().map(|&v| plan.element_ids[v].as_str()).collect();
                json!({ "step": k, "name": s.name(), "outputs": outs, "multiplicity": s.multiplicity })
            })
            .collect();
        let v = json!({ "steps": steps, "listing": listing, "solution_bound": plan.solution_bound() });
        return Ok((pretty(&v), EXIT_OK));
    }
    let mut out = format!(
        "{} steps, {} with several roots, at most {} placements\n",
        plan.steps.len(),
        plan.multi_root_steps().len(),
        plan.solution_bound()
    );
    for (k, s) in plan.steps.iter().enumerate() {
        let outs: Vec<&str> = s.outputs.iter().map(|&v| plan.element_ids[v].as_str()).collect();
        writeln!(out, "step {k}: {} -> {} (roots {})", s.name(), outs.join(" "), s.multiplicity).unwrap();
    }
    out.push_str("construction:\n");
    for (i, line) in listing.iter().enumerate() {
        writeln!(out, "  {}. {line}", i + 1).unwrap();
    }
    Ok((out, EXIT_OK))
}

fn solve(file: &Path, signs: Option<&str>, heuristic: bool, svg: Option<&Path>, as_json: bool) -> Outcome {
    let problem = load(file)?;
    let plan = plan_problem(&problem, &PlanOptions::default()).map_err(plan_fail)?;
    let mut notes = String::new();
    let signs = match (signs, heuristic) {
        (Some(s), _) => {
            let sv = SignVector::parse(s).map_err(|e| Fail::new(EXIT_FAILURE, "bad_signs", e.to_string()))?;
            sv.check(&plan).map_err(|e| Fail::new(EXIT_FAILURE, "bad_signs", e.to_string()))?;
            sv
        }
        (None, true) => {
            let h = heuristic_signs(&plan, &problem).map_err(|e| Fail::new(EXIT_FAILURE, "bad_signs", e.to_string()))?;
            if !h.fallbacks.is_empty() {
                writeln!(notes, "note: no preferred root at step(s) {:?}; took the first", h.fallbacks).unwrap();
            }
            h.signs
        }
        (None, false) => SignVector::first(&plan),
    };
    let ex = Executor::new(&plan, &problem, ExecOptions::default());
    let outcome = ex.run(&signs);
    if let Some(path) = svg {
        let poses = match &outcome {
            Ok(p) => &p.poses,
            Err(f) => &f.partial.poses,
        };
        std::fs::write(path, render_svg(poses, &problem, &SvgOptions::default())).map_err(|e| Fail::new(EXIT_FAILURE, "io", format!("{}: {e}", path.display())))?;
    }
    let code = if outcome.is_ok() { EXIT_OK } else { EXIT_INFEASIBLE };
    if as_json {
        return Ok((pretty(&placement_json(&plan, &problem, &outcome)), code));
    }
    let mut out = notes;
    writeln!(out, "signs: {}", signs.format_for(&plan)).unwrap();
    match &outcome {
        Ok(p) => {
            placement_text(&problem, p, &mut out);
            out.push_str("residuals:\n");
            let res = p.residuals(&problem);
            let w = res.iter().map(|r| r.constraint.len()).max().unwrap_or(1);
            for r in &res {
                writeln!(out, "  {:w$}  {:.3e}", r.constraint, r.absolute).unwrap();
            }
            writeln!(out, "max residual: {:.3e}", p.max_residual(&problem)).unwrap();
        }
        Err(f) => {
            writeln!(out, "infeasible: {}", f.error).unwrap();
            out.push_str("partial placement:\n");
            placement_text(&problem, &f.partial, &mut out);
        }
    }
    Ok((out, code))
}

fn enumerate_cmd(file: &Path, limit: usize, use_predicates: bool, as_json: bool) -> Outcome {
    let problem = load(file)?;
    let plan = plan_problem(&problem, &PlanOptions::default()).map_err(plan_fail)?;
    let preds = if use_predicates { problem.predicates.clone() } else { Vec::new() };
    let e = enumerate(&plan, &problem, limit, &preds);
    if as_json {
        let placements: Vec<Value> = e.placements.iter().map(|p| placement_json(&plan, &problem, &Ok(p.clone()))).collect();
        let v = json!({ "placements": placements, "exhausted": e.exhausted, "counters": e.counters });
        return Ok((pretty(&v), EXIT_OK));
    }
    let mut out = format!("{} placement(s), bound {}\n", e.placements.len(), plan.solution_bound());
    for (i, p) in e.placements.iter().enumerate() {
        writeln!(out, "#{} {} (max residual {:.3e})", i + 1, p.signs.format_for(&plan), p.max_residual(&problem)).unwrap();
        placement_text(&problem, p, &mut out);
    }
    let c = e.counters;
    writeln!(out, "exhausted: {}", e.exhausted).unwrap();
    writeln!(out, "steps executed: {}, pruned: {}, filtered: {}, duplicates: {}", c.steps_executed, c.pruned, c.filtered, c.duplicates).unwrap();
    Ok((out, EXIT_OK))
}

fn read_pool(path: &Path) -> Result<Vec<[String; 2]>, Fail> {
    let text = std::fs::read_to_string(path).map_err(|e| Fail::new(EXIT_FAILURE, "io", format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        match words[..] {
            [a, b] => out.push([a.to_string(), b.to_string()]),
            _ => return Err(Fail::new(EXIT_FAILURE, "parse", format!("{}:{}: expected two element ids", path.display(), i + 1))),
        }
    }
    Ok(out)
}

fn undercon_fail(e: UnderconError) -> Fail {
    match e {
        UnderconError::NotCompletableByDecomposition(_) => Fail::new(EXIT_NOT_DECOMPOSABLE, "not_completable", e.to_string()),
        _ => Fail::new(EXIT_FAILURE, "invalid", e.to_string()),
    }
}

fn complete(file: &Path, pool: Option<&Path>, as_json: bool) -> Outcome {
    let problem = load(file)?;
    let (first, rest) = match pool {
        None => (free_completion(&problem).map_err(undercon_fail)?.0, None),
        Some(path) => {
            let pool = read_pool(path)?;
            let c = conditional_completion(&problem, &pool).map_err(undercon_fail)?;
            let rest = if c.complete { None } else { Some(finish_completion(&problem, &c).map_err(undercon_fail)?) };
            (c, rest)
        }
    };
    let mut pairs = first.pairs.clone();
    if let Some(r) = &rest {
        pairs.extend(r.pairs.iter().cloned());
    }
    let added = constraint_values_for(&problem, &pairs).map_err(undercon_fail)?;
    let mut completed = apply_template(&problem, &pairs).map_err(undercon_fail)?;
    completed.linkage = problem.linkage.clone();
    if as_json {
        let v = json!({
            "mode": first.mode,
            "pairs": first.pairs,
            "pool_complete": first.complete,
            "free_pairs": rest.as_ref().map(|r| &r.pairs),
            "constraints": added,
            "document": write_problem(&completed),
        });
        return Ok((pretty(&v), EXIT_OK));
    }
    let mut out = String::new();
    let label = if pool.is_some() { "conditional" } else { "free" };
    writeln!(out, "{label} completion: {} pair(s)", first.pairs.len()).unwrap();
    for [a, b] in &first.pairs {
        writeln!(out, "  {a} {b}").unwrap();
    }
    if let Some(r) = &rest {
        writeln!(out, "pool exhausted; {} free pair(s) finish the completion", r.pairs.len()).unwrap();
        for [a, b] in &r.pairs {
            writeln!(out, "  {a} {b}").unwrap();
        }
    }
    out.push('\n');
    for a in added.iter().filter(|a| a.symbol.is_some()) {
        writeln!(out, "# {} has no sketch value; parameter {} is written as a placeholder", a.constraint.id, a.symbol.as_deref().unwrap_or("")).unwrap();
    }
    out.push_str(&write_problem(&completed));
    Ok((out, EXIT_OK))
}

fn cayley_fail(e: CayleyError) -> Fail {
    match e {
        CayleyError::NotDecomposable(_) => Fail::new(EXIT_NOT_DECOMPOSABLE, "not_triangle_decomposable", e.to_string()),
        CayleyError::Unreachable => Fail::new(EXIT_UNREACHABLE, "unreachable", e.to_string()),
        _ => Fail::new(EXIT_FAILURE, "invalid", e.to_string()),
    }
}

fn fmt_end(v: f64, e: &Endpoint) -> String {
    match e {
        Endpoint::Domain => format!("{v:.10}*"),
        Endpoint::Transition { .. } => format!("{v:.10}"),
    }
}

fn space_text(space: &CayleySpace, ev: &Evaluator<'_>) -> String {
    let kind = match space.kind {
        ParamKind::Distance => "distance",
        ParamKind::Angle => "angle, radians, circular",
    };
    let mut out = format!(
        "free constraint {} ({kind}), domain [{}, {}], resolution {}\n",
        space.free, space.domain[0], space.domain[1], space.resolution
    );
    for o in &space.orientations {
        let ivs: Vec<String> = o.intervals.iter().map(|i| format!("[{}, {}]", fmt_end(i.lo, &i.lo_end), fmt_end(i.hi, &i.hi_end))).collect();
        let text = if ivs.is_empty() { "(none)".to_string() } else { ivs.join(" ") };
        writeln!(out, "  {}  {text}", o.signs.format_for(&ev.plan)).unwrap();
    }
    out.push_str("  * domain bound\n");
    for w in &space.warnings {
        writeln!(out, "warning: {w}").unwrap();
    }
    out
}

fn cayley_cmd(file: &Path, resolution: usize, as_json: bool) -> Outcome {
    let problem = load(file)?;
    let linkage = Linkage::from_problem(problem).map_err(cayley_fail)?;
    let ev = Evaluator::new(&linkage).map_err(cayley_fail)?;
    let space = cayley_space_with(&ev, resolution).map_err(cayley_fail)?;
    if as_json {
        let mut v = serde_json::to_value(&space).unwrap();
        let labels: Vec<String> = space.orientations.iter().map(|o| o.signs.format_for(&ev.plan)).collect();
        v["labels"] = json!(labels);
        return Ok((pretty(&v), EXIT_OK));
    }
    Ok((space_text(&space, &ev), EXIT_OK))
}

/// Parse `SIGNS@VALUE`; angle values accept a `deg` suffix.
fn parse_signed_param(s: &str, kind: ParamKind) -> Result<(SignVector, f64), Fail> {
    let bad = || Fail::new(EXIT_FAILURE, "bad_endpoint", format!("`{s}` is not SIGNS@VALUE"));
    let (signs, value) = s.split_once('@').ok_or_else(bad)?;
    let signs = SignVector::parse(signs).map_err(|e| Fail::new(EXIT_FAILURE, "bad_signs", e.to_string()))?;
    let v = match (kind, value.strip_suffix("deg")) {
        (ParamKind::Angle, Some(d)) => d.trim().parse::<f64>().map_err(|_| bad())?.to_radians(),
        _ => value.trim().parse::<f64>().map_err(|_| bad())?,
    };
    Ok((signs, v))
}

fn reach(file: &Path, start: &str, end: &str, resolution: usize, as_json: bool) -> Outcome {
    let problem = load(file)?;
    let linkage = Linkage::from_problem(problem).map_err(cayley_fail)?;
    let ev = Evaluator::new(&linkage).map_err(cayley_fail)?;
    let space = cayley_space_with(&ev, resolution).map_err(cayley_fail)?;
    let realize = |text: &str| -> Result<Placement, Fail> {
        let (signs, v) = parse_signed_param(text, linkage.kind)?;
        signs.check(&ev.plan).map_err(|e| Fail::new(EXIT_FAILURE, "bad_signs", e.to_string()))?;
        ev.eval(v, &signs, 0.0).map_err(|e| Fail::new(EXIT_FAILURE, "bad_endpoint", format!("{text}: {e}")))
    };
    let (a, b) = (realize(start)?, realize(end)?);
    let path = match reachable_with(&ev, &space, &a, &b) {
        Ok(p) => p,
        Err(CayleyError::Unreachable) if !as_json => return Ok(("unreachable\n".into(), EXIT_UNREACHABLE)),
        Err(CayleyError::Unreachable) => return Ok((pretty(&json!({ "reachable": false })), EXIT_UNREACHABLE)),
        Err(e) => return Err(cayley_fail(e)),
    };
    if as_json {
        let mut v = serde_json::to_value(&path).unwrap();
        v["reachable"] = json!(true);
        return Ok((pretty(&v), EXIT_OK));
    }
    let mut out = format!("reachable, arc length {:.10}\n", path.length);
    for (i, s) in path.segments.iter().enumerate() {
        writeln!(out, "  {}  {:.10} -> {:.10}", s.signs.format_for(&ev.plan), s.from, s.to).unwrap();
        if let Some(t) = path.transitions.get(i) {
            writeln!(out, "  switch at {t:.10}").unwrap();
        }
    }
    Ok((out, EXIT_OK))
}

fn serve(host: &str, port: u16, idle_minutes: u64) -> Outcome {
    let addr: std::net::SocketAddr = format!("{host}:{port}").parse().map_err(|e| Fail::new(EXIT_FAILURE, "bad_address", format!("{host}:{port}: {e}")))?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| Fail::new(EXIT_FAILURE, "io", e.to_string()))?;
    let config = NavConfig { idle_timeout: std::time::Duration::from_secs(idle_minutes * 60) };
    eprintln!("listening on http://{addr}");
    rt.block_on(gcs_nav::serve(addr, config)).map_err(|e| Fail::new(EXIT_FAILURE, "io", e.to_string()))?;
    Ok((String::new(), EXIT_OK))
}

fn main() -> ExitCode {
    // Usage errors exit with 1 so that 2 keeps meaning under-constrained.
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_FAILURE } else { EXIT_OK });
        }
    };
    let j = cli.json;
    let result = match &cli.command {
        Command::Analyze { file } => analyze(file, j),
        Command::Plan { file, seed } => plan_cmd(file, *seed, j),
        Command::Solve { file, signs, heuristic, svg } => solve(file, signs.as_deref(), *heuristic, svg.as_deref(), j),
        Command::Enumerate { file, limit, predicates } => enumerate_cmd(file, *limit, *predicates, j),
        Command::Complete { file, pool } => complete(file, pool.as_deref(), j),
        Command::Cayley { file, resolution } => cayley_cmd(file, *resolution, j),
        Command::Reach { file, start, end, resolution } => reach(file, start, end, *resolution, j),
        Command::Serve { port, host, idle_minutes } => serve(host, *port, *idle_minutes),
    };
    match result {
        Ok((out, code)) => {
            print!("{out}");
            ExitCode::from(code)
        }
        Err(f) => {
            if j {
                let mut v = json!({ "error": f.kind, "message": f.message });
                if let Value::Object(extra) = f.extra {
                    for (k, x) in extra {
                        v[k] = x;
                    }
                }
                eprintln!("{v}");
            } else if f.code == EXIT_NOT_DECOMPOSABLE {
                println!("{}", f.message);
            } else {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
