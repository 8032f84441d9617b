//! The source-level resource analysis: read-once, control points,
//! termination, quasi-interpretation and the derived bounds.

use std::collections::BTreeMap;

use serde_json::json;

use crate::ast::Annotations;
use crate::bytecode::compile_program;
use crate::cfa::{build_call_graph, check_read_once, CallGraph, ReadOnceReport};
use crate::control_points::{self, hat, Analysis};
use crate::frontend::TypedProgram;
use crate::qi::{self, Assignment, ConstraintCheck, QiError, SizeBound, SpaceBound, ThreadStart};
use crate::shape::analyze_module;
use crate::term::{Name, Value};
use crate::termination::{self, Precedence, TerminationVerdict, DEFAULT_SEARCH_BOUND};

/// Outcome of one analysis stage.
#[derive(Clone, Debug)]
pub enum Stage<T> {
    Done(T),
    Failed(String),
    Skipped,
}

impl<T> Stage<T> {
    pub fn done(&self) -> Option<&T> {
        match self {
            Stage::Done(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AnalyzeOptions {
    /// Stop after the read-once check when it fails.
    pub enforce_read_once: bool,
    /// `order` and `qi` items; empty lists mean search and synthesis.
    pub annotations: Annotations,
    pub search_bound: usize,
    pub qi_budget: u64,
    pub seed: u64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            enforce_read_once: true,
            annotations: Annotations::default(),
            search_bound: DEFAULT_SEARCH_BOUND,
            qi_budget: qi::DEFAULT_BUDGET,
            seed: qi::SAMPLE_SEED,
        }
    }
}

/// Inline annotations win over sidecar ones, category by category.
pub fn merge_annotations(inline: &Annotations, sidecar: &Annotations) -> Annotations {
    Annotations {
        order: if inline.order.is_empty() { sidecar.order.clone() } else { inline.order.clone() },
        qi: if inline.qi.is_empty() { sidecar.qi.clone() } else { inline.qi.clone() },
    }
}

#[derive(Clone, Debug)]
pub struct QiOutcome {
    pub assignment: Assignment,
    pub synthesized: bool,
    pub checks: Vec<ConstraintCheck>,
}

impl QiOutcome {
    pub fn pass(&self) -> bool {
        qi::all_hold(&self.checks)
    }
}

#[derive(Clone, Debug)]
pub struct AnalysisReport {
    pub read_once: ReadOnceReport,
    pub control: Stage<Analysis>,
    pub termination: Stage<TerminationVerdict>,
    pub qi: Stage<QiOutcome>,
    pub size: Stage<SizeBound>,
    pub space: Stage<SpaceBound>,
}

impl AnalysisReport {
    pub fn pass(&self) -> bool {
        self.read_once.pass
            && self.control.done().is_some()
            && self.termination.done().is_some_and(|v| v.pass)
            && self.qi.done().is_some_and(QiOutcome::pass)
    }

    pub fn render(&self) -> String {
        let mut out = format!("{}\n", self.read_once.render());
        match &self.control {
            Stage::Done(a) => out.push_str(&a.render()),
            Stage::Failed(m) => out.push_str(&format!("control-points: fail, {m}\n")),
            Stage::Skipped => {}
        }
        match &self.termination {
            Stage::Done(v) => out.push_str(&v.render()),
            Stage::Failed(m) => out.push_str(&format!("lpo: fail, {m}\n")),
            Stage::Skipped => out.push_str("lpo: skipped\n"),
        }
        match &self.qi {
            Stage::Done(o) => {
                let origin = if o.synthesized { "synthesized" } else { "given" };
                out.push_str(&format!("qi-assignment ({origin}):\n{}", o.assignment.render()));
                for c in &o.checks {
                    out.push_str(&format!("qi {} : {} >= {} {}\n", c.constraint, c.lhs, c.rhs, c.verdict));
                }
                out.push_str(&format!("qi: {}\n", if o.pass() { "pass" } else { "fail" }));
            }
            Stage::Failed(m) => out.push_str(&format!("qi: fail, {m}\n")),
            Stage::Skipped => out.push_str("qi: skipped\n"),
        }
        if let Stage::Done(b) = &self.size {
            out.push_str(&b.render());
        }
        if let Stage::Done(b) = &self.space {
            out.push_str(&b.render());
        }
        out.push_str(&format!("verdict: {}\n", if self.pass() { "pass" } else { "fail" }));
        out
    }

    /// One JSON object per line.
    pub fn render_records(&self) -> String {
        let mut recs = vec![json!({"kind": "read-once", "pass": self.read_once.pass, "witness": self.read_once.witness})];
        if let Stage::Done(a) = &self.control {
            recs.extend(a.points.iter().map(|p| json!({"kind": "control-point", "point": p.to_string()})));
            recs.extend(a.constraints.iter().map(|c| {
                json!({"kind": "constraint", "lhs": c.lhs.to_string(), "rhs": c.rhs.to_string(), "index": c.index})
            }));
        }
        recs.push(match &self.termination {
            Stage::Done(v) => json!({"kind": "lpo", "pass": v.pass, "precedence": v.precedence.to_string(),
                "linear": v.linear, "violated": v.violated.as_ref().map(|c| c.to_string())}),
            Stage::Failed(m) => json!({"kind": "lpo", "pass": false, "error": m}),
            Stage::Skipped => json!({"kind": "lpo", "skipped": true}),
        });
        match &self.qi {
            Stage::Done(o) => {
                recs.extend(o.checks.iter().map(|c| {
                    json!({"kind": "qi-check", "constraint": c.constraint.to_string(), "lhs": c.lhs.to_string(),
                        "rhs": c.rhs.to_string(), "verdict": c.verdict.to_string()})
                }));
                recs.push(json!({"kind": "qi", "pass": o.pass(), "synthesized": o.synthesized}));
            }
            Stage::Failed(m) => recs.push(json!({"kind": "qi", "pass": false, "error": m})),
            Stage::Skipped => recs.push(json!({"kind": "qi", "skipped": true})),
        }
        if let Stage::Done(b) = &self.size {
            recs.push(json!({"kind": "size-bound", "h": b.h.to_string(), "c": b.c.to_string(),
                "threads": b.threads, "reads": b.reads, "bound": b.bound.to_string()}));
        }
        if let Stage::Done(b) = &self.space {
            recs.push(json!({"kind": "space-bound", "threads": b.threads, "registers": b.registers,
                "stack_height": b.stack_height, "class_arities": b.class_arities,
                "value_bound": b.value_bound.to_string(), "bound": b.bound.to_string()}));
        }
        recs.push(json!({"kind": "verdict", "pass": self.pass()}));
        recs.iter().map(|r| format!("{r}\n")).collect()
    }
}

/// Arity of a symbol of the source-level constraints: behaviours get
/// their label parameters after the formal ones.
pub fn source_arity(tp: &TypedProgram, cfa: &CallGraph, f: &str) -> Option<usize> {
    if let Some(base) = f.strip_suffix('^') {
        let info = tp.sig.functions.get(base).filter(|i| i.ret.is_none())?;
        return Some(info.params.len() + cfa.y_hat(base).len());
    }
    tp.sig.functions.get(f).map(|i| i.params.len()).or_else(|| tp.sig.ctors.get(f).map(|c| c.args.len()))
}

pub fn thread_starts(tp: &TypedProgram) -> Vec<ThreadStart> {
    tp.program.system.iter().map(|t| ThreadStart { function: t.function.clone(), args: t.args.clone() }).collect()
}

/// Largest arity per priority class of the expression functions; an
/// unranked function forms a class of its own.
pub fn class_arities(tp: &TypedProgram, prec: &Precedence) -> Vec<usize> {
    let mut ranked: BTreeMap<usize, usize> = BTreeMap::new();
    let mut single = Vec::new();
    for (f, info) in &tp.sig.functions {
        if info.ret.is_none() {
            continue;
        }
        match prec.class_of(f) {
            Some(c) => {
                let e = ranked.entry(c).or_insert(0);
                *e = (*e).max(info.params.len());
            }
            None => single.push(info.params.len()),
        }
    }
    let mut out: Vec<usize> = ranked.into_values().chain(single).collect();
    out.sort_unstable_by(|a, b| b.cmp(a));
    out
}

fn termination_stage(cs: &[control_points::Constraint], opts: &AnalyzeOptions) -> Stage<TerminationVerdict> {
    let prec = if opts.annotations.order.is_empty() {
        match termination::search_precedence(cs, opts.search_bound) {
            Ok(Some(p)) => p,
            Ok(None) => {
                return Stage::Failed(
                    "no precedence makes every index-0 constraint decrease; supply one in a .prec file".into(),
                )
            }
            Err(e) => return Stage::Failed(format!("{e}; supply a precedence in a .prec file")),
        }
    } else {
        match Precedence::from_chains(&opts.annotations.order) {
            Ok(p) => p,
            Err(e) => return Stage::Failed(e.to_string()),
        }
    };
    Stage::Done(termination::check_termination(cs, &prec))
}

fn qi_stage(tp: &TypedProgram, cfa: &CallGraph, cs: &[control_points::Constraint], opts: &AnalyzeOptions) -> Stage<QiOutcome> {
    let (assignment, synthesized) = if opts.annotations.qi.is_empty() {
        let extra: Vec<(Name, usize)> = tp
            .program
            .system
            .iter()
            .filter_map(|t| source_arity(tp, cfa, &hat(&t.function)).map(|n| (hat(&t.function), n)))
            .collect();
        match qi::synthesize(&tp.sig, cs, &extra, opts.qi_budget) {
            Ok(a) => (a, true),
            Err(e) => return Stage::Failed(format!("{e}; supply an assignment in a .qi file")),
        }
    } else {
        match Assignment::from_annotations(&tp.sig, &opts.annotations, &|f| source_arity(tp, cfa, f)) {
            Ok(a) => (a, false),
            Err(e) => return Stage::Failed(e.to_string()),
        }
    };
    match qi::check_assignment_seeded(&assignment, cs, opts.seed) {
        Ok(checks) => Stage::Done(QiOutcome { assignment, synthesized, checks }),
        Err(e) => Stage::Failed(e.to_string()),
    }
}

/// Largest operand-stack height over the shapes of the compiled program.
pub fn stack_height(tp: &TypedProgram) -> Result<usize, String> {
    let m = compile_program(tp).map_err(|e| e.to_string())?;
    let ss = analyze_module(&m).map_err(|e| e.to_string())?;
    Ok(ss.iter().map(|s| s.max_height()).max().unwrap_or(0))
}

/// Size bound and space polynomial for an instant whose threads start
/// with `threads` and whose store holds `store`.
pub fn instant_bounds(
    tp: &TypedProgram,
    cfa: &CallGraph,
    prec: &Precedence,
    qa: &Assignment,
    threads: &[ThreadStart],
    store: &[Value],
    height: usize,
) -> Result<(SizeBound, SpaceBound), QiError> {
    let reads = threads.iter().map(|t| cfa.y_hat(&t.function).len()).max().unwrap_or(0);
    let size = qi::size_bound(qa, threads, store, reads)?;
    let space = qi::space_bound(
        threads.len(),
        tp.program.registers().count(),
        height,
        class_arities(tp, prec),
        &size.bound,
    );
    Ok((size, space))
}

fn bounds(tp: &TypedProgram, cfa: &CallGraph, prec: &Precedence, qa: &Assignment) -> (Stage<SizeBound>, Stage<SpaceBound>) {
    let threads = thread_starts(tp);
    let store: Vec<Value> = tp.default_store().into_values().collect();
    let height = match stack_height(tp) {
        Ok(h) => h,
        Err(e) => return (Stage::Skipped, Stage::Failed(e)),
    };
    match instant_bounds(tp, cfa, prec, qa, &threads, &store, height) {
        Ok((size, space)) => (Stage::Done(size), Stage::Done(space)),
        Err(e) => (Stage::Failed(e.to_string()), Stage::Skipped),
    }
}

/// Run every stage; later stages are skipped when read-once is enforced
/// and fails.
pub fn analyze_program(tp: &TypedProgram, opts: &AnalyzeOptions) -> AnalysisReport {
    let cfa = build_call_graph(&tp.program);
    let read_once = check_read_once(&cfa);
    let skipped = |read_once| AnalysisReport {
        read_once,
        control: Stage::Skipped,
        termination: Stage::Skipped,
        qi: Stage::Skipped,
        size: Stage::Skipped,
        space: Stage::Skipped,
    };
    if opts.enforce_read_once && !read_once.pass {
        return skipped(read_once);
    }
    let analysis = match control_points::analyze(&tp.program, &cfa) {
        Ok(a) => a,
        Err(e) => {
            let mut r = skipped(read_once);
            r.control = Stage::Failed(e.to_string());
            return r;
        }
    };
    let termination = termination_stage(&analysis.constraints, opts);
    let qi = qi_stage(tp, &cfa, &analysis.constraints, opts);
    let (size, space) = match (&termination, &qi) {
        (Stage::Done(v), Stage::Done(o)) if v.pass && o.pass() => bounds(tp, &cfa, &v.precedence, &o.assignment),
        _ => (Stage::Skipped, Stage::Skipped),
    };
    AnalysisReport { read_once, control: Stage::Done(analysis), termination, qi, size, space }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend;

    #[test]
    fn trivial_program_passes_vacuously() {
        let tp = frontend::load("type t = c || d\nbeh f() = stop\nsystem = f()").unwrap();
        let r = analyze_program(&tp, &AnalyzeOptions::default());
        assert!(r.pass(), "{}", r.render());
        assert!(r.render().contains("space-bound"));
    }

    #[test]
    fn inline_annotations_override_sidecars() {
        let a = frontend::parse_annotations("order f > g").unwrap();
        let b = frontend::parse_annotations("order g > f\nqi g = x1").unwrap();
        let m = merge_annotations(&a, &b);
        assert_eq!(m.order, a.order);
        assert_eq!(m.qi, b.qi);
    }
}
