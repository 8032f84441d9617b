//! Shape analysis of bytecode: symbolic stack contents and parameter
//! refinements per instruction, ordering constraints and the verifier.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde_json::json;

pub use crate::analysis::Stage;
use crate::bytecode::flow::{build_flow_graph, EdgeKind, FlowGraph, Node};
use crate::bytecode::{check_flow_properties, FlowReport, Instr, Module, Segment, Slot};
use crate::control_points::{hat, Constraint};
use crate::frontend::Signature;
use crate::qi::{self, Assignment, ConstraintCheck, QiError};
use crate::term::{name, Name, Term, TermSubst};
use crate::termination::{self, Precedence, PrecedenceError, TerminationVerdict};

/// Type given to the result of calling a behaviour.
pub const BEH: &str = "beh";

pub fn formal_var(j: usize) -> Name {
    fresh_var(1, j)
}

pub fn fresh_var(i: usize, j: usize) -> Name {
    name(&format!("x#{i}.{j}"))
}

/// The variable x_{f,i} standing for the value read at `(f, i)`.
pub fn read_var(f: &str, i: usize) -> Name {
    name(&format!("{f}#{i}"))
}

/// Shape at one instruction: `sigma` maps the formals and the read
/// variables of the segment, `stack` holds typed expressions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Shape {
    pub sigma: Vec<(Name, Term)>,
    pub stack: Vec<(Term, Name)>,
    /// Reached through a next edge: calls belong to the next instant.
    pub guarded: bool,
}

impl Shape {
    pub fn render_stack(&self) -> String {
        if self.stack.is_empty() {
            return "-".into();
        }
        self.stack.iter().map(|(e, _)| e.to_string()).collect::<Vec<_>>().join(" . ")
    }

    fn refine(&self, s: &TermSubst) -> Shape {
        Shape {
            sigma: self.sigma.iter().map(|(x, t)| (x.clone(), t.substitute(s))).collect(),
            stack: self.stack.iter().map(|(e, t)| (e.substitute(s), t.clone())).collect(),
            guarded: self.guarded,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SegmentShapes {
    pub name: Name,
    pub behaviour: bool,
    pub formals: Vec<Name>,
    /// Read variables of the reads reachable within the instant.
    pub reads: Vec<Name>,
    /// `rows[i - 1]` for instruction `i`; `None` when no shape reaches it.
    pub rows: Vec<Option<Shape>>,
    pub code: Vec<Instr>,
    pub constraints: Vec<Constraint>,
}

impl SegmentShapes {
    pub fn shape(&self, i: usize) -> Option<&Shape> {
        self.rows.get(i.wrapping_sub(1)).and_then(|r| r.as_ref())
    }

    pub fn max_height(&self) -> usize {
        self.rows.iter().flatten().map(|s| s.stack.len()).max().unwrap_or(0)
    }

    pub fn render(&self) -> String {
        let mut out = format!("segment {}/{}\n", self.name, self.formals.len());
        for (k, ins) in self.code.iter().enumerate() {
            let shape = self.rows[k].as_ref().map(Shape::render_stack).unwrap_or_else(|| "unreached".into());
            out.push_str(&format!("  {}: {ins} | {shape}\n", k + 1));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShapeErrorKind {
    Mismatch,
    WaitInconsistency,
}

impl fmt::Display for ShapeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShapeErrorKind::Mismatch => "shape-mismatch",
            ShapeErrorKind::WaitInconsistency => "wait-inconsistency",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{kind} at {segment}:{index}: {message}")]
pub struct ShapeError {
    pub kind: ShapeErrorKind,
    pub segment: Name,
    pub index: usize,
    pub message: String,
}

/// Reads reachable from `(f, 1)` without crossing wait or next edges,
/// ordered by segment position and instruction index.
pub fn reachable_reads(m: &Module, g: &FlowGraph, f: &Name) -> Vec<Name> {
    let root: Node = (f.clone(), 1);
    let mut seen = BTreeSet::from([root.clone()]);
    let mut todo = vec![root];
    let mut found = Vec::new();
    while let Some(n) = todo.pop() {
        if let Some(Instr::Read(_)) = g.instr(&n) {
            found.push(n.clone());
        }
        for e in g.out_edges(&n) {
            if !matches!(e.kind, EdgeKind::Wait | EdgeKind::Next) && seen.insert(e.to.clone()) {
                todo.push(e.to.clone());
            }
        }
    }
    found.sort_by_key(|(g, i)| (m.segment_index(g), *i));
    found.into_iter().map(|(g, i)| read_var(&g, i)).collect()
}

struct Analyzer<'a> {
    sig: &'a Signature,
    seg: &'a Segment,
    reads: &'a BTreeMap<Name, Vec<Name>>,
    behaviour: bool,
    ret: Option<Name>,
}

impl Analyzer<'_> {
    fn err(&self, kind: ShapeErrorKind, i: usize, message: impl Into<String>) -> ShapeError {
        ShapeError { kind, segment: self.seg.name.clone(), index: i, message: message.into() }
    }

    fn mismatch(&self, i: usize, message: impl Into<String>) -> ShapeError {
        self.err(ShapeErrorKind::Mismatch, i, message)
    }

    fn head(&self, s: &Shape) -> Term {
        let args = s.sigma.iter().map(|(_, t)| t.clone()).collect();
        if self.behaviour {
            Term::Fun(hat(&self.seg.name), args)
        } else {
            Term::Fun(self.seg.name.clone(), args)
        }
    }

    fn hat_call(&self, g: &Name, args: Vec<Term>) -> Term {
        let mut args = args;
        args.extend(self.reads.get(g).into_iter().flatten().cloned().map(Term::Var));
        Term::Fun(hat(g), args)
    }

    fn pop_args(&self, i: usize, s: &Shape, n: usize, want: &[Name]) -> Result<Vec<Term>, ShapeError> {
        if s.stack.len() < n {
            return Err(self.mismatch(i, format!("{n} operands needed, stack height {}", s.stack.len())));
        }
        if want.len() != n {
            return Err(self.mismatch(i, format!("arity {} expected, instruction says {n}", want.len())));
        }
        let args = &s.stack[s.stack.len() - n..];
        for (k, ((e, t), w)) in args.iter().zip(want).enumerate() {
            if t != w {
                return Err(self.mismatch(i, format!("operand {} is `{e}` of type {t}, expected {w}", k + 1)));
            }
        }
        Ok(args.iter().map(|(e, _)| e.clone()).collect())
    }

    fn slot_referent(&self, i: usize, s: &Shape, slot: &Slot) -> Result<Name, ShapeError> {
        let ref_ty = match slot {
            Slot::Reg(r) => match self.sig.ctors.get(r) {
                Some(info) if info.register => info.ty.clone(),
                _ => return Err(self.mismatch(i, format!("`{r}` is not a register"))),
            },
            Slot::Index(k) => match s.stack.get(k.wrapping_sub(1)) {
                Some((_, t)) => t.clone(),
                None => return Err(self.mismatch(i, format!("no stack slot {k}"))),
            },
        };
        self.sig
            .referent(&ref_ty)
            .cloned()
            .ok_or_else(|| self.mismatch(i, format!("type {ref_ty} is not a reference type")))
    }

    /// Transfer function of instruction `i`; returns successor shapes and
    /// emits constraints.
    fn step(
        &self,
        i: usize,
        s: &Shape,
        rows: &[Option<Shape>],
        out: &mut Vec<Constraint>,
    ) -> Result<Vec<(usize, Shape)>, ShapeError> {
        let ins = self.seg.at(i).expect("in range");
        let next = i + 1;
        let mut t = s.clone();
        let succ = match ins {
            Instr::Load(k) => {
                let e = s.stack.get(k.wrapping_sub(1)).ok_or_else(|| self.mismatch(i, format!("no stack slot {k}")))?;
                t.stack.push(e.clone());
                vec![(next, t)]
            }
            Instr::Branch(c, j) => {
                let info = self.sig.ctors.get(c).ok_or_else(|| self.mismatch(i, format!("unknown constructor {c}")))?;
                let (e, ty) = s.stack.last().ok_or_else(|| self.mismatch(i, "branch on an empty stack"))?;
                if ty != &info.ty {
                    return Err(self.mismatch(i, format!("`{e}` has type {ty}, constructor {c} builds {}", info.ty)));
                }
                match e {
                    Term::Var(x) => {
                        let h = s.stack.len();
                        let fresh: Vec<Name> = (0..info.args.len()).map(|k| fresh_var(next, h + k)).collect();
                        let pat = Term::Ctor(c.clone(), fresh.iter().cloned().map(Term::Var).collect());
                        let sub: TermSubst = [(x.clone(), pat)].into_iter().collect();
                        let mut refined = s.refine(&sub);
                        refined.stack.pop();
                        refined.stack.extend(fresh.into_iter().map(Term::Var).zip(info.args.iter().cloned()));
                        vec![(next, refined), (*j, s.clone())]
                    }
                    _ => match e.app() {
                        Some((crate::term::Head::Ctor, d, args)) if d == c => {
                            t.stack.pop();
                            t.stack.extend(args.into_iter().zip(info.args.iter().cloned()));
                            vec![(next, t)]
                        }
                        Some((crate::term::Head::Ctor, _, _)) => vec![(*j, t)],
                        _ => return Err(self.mismatch(i, format!("branch on `{e}`, which is not a pattern"))),
                    },
                }
            }
            Instr::Build(c, n) => {
                let info = self.sig.ctors.get(c).ok_or_else(|| self.mismatch(i, format!("unknown constructor {c}")))?;
                let args = self.pop_args(i, s, *n, &info.args)?;
                t.stack.truncate(s.stack.len() - n);
                t.stack.push((Term::Ctor(c.clone(), args), info.ty.clone()));
                vec![(next, t)]
            }
            Instr::Call(g, n) => {
                let info = self.sig.functions.get(g).ok_or_else(|| self.mismatch(i, format!("unknown function {g}")))?;
                let args = self.pop_args(i, s, *n, &info.params)?;
                t.stack.truncate(s.stack.len() - n);
                let ty = info.ret.clone().unwrap_or_else(|| name(BEH));
                t.stack.push((Term::Fun(g.clone(), args), ty));
                vec![(next, t)]
            }
            Instr::TCall(g, n) => {
                let info = self.sig.functions.get(g).ok_or_else(|| self.mismatch(i, format!("unknown function {g}")))?;
                if info.ret.is_some() || !self.behaviour {
                    return Err(self.mismatch(i, format!("tcall {g} outside a behaviour-to-behaviour transfer")));
                }
                let args = self.pop_args(i, s, *n, &info.params)?;
                if !s.guarded {
                    push_unique(out, Constraint { lhs: self.head(s), rhs: self.hat_call(g, args), index: 0 });
                }
                vec![]
            }
            Instr::Return => {
                let (e, ty) = s.stack.last().ok_or_else(|| self.mismatch(i, "return on an empty stack"))?;
                match &self.ret {
                    Some(r) if r == ty => {
                        push_unique(out, Constraint { lhs: self.head(s), rhs: e.clone(), index: 0 })
                    }
                    None if &**ty == BEH => {
                        let Term::Fun(g, args) = e else {
                            return Err(self.mismatch(i, format!("`{e}` is not a behaviour call")));
                        };
                        if !s.guarded {
                            push_unique(
                                out,
                                Constraint { lhs: self.head(s), rhs: self.hat_call(g, args.clone()), index: 0 },
                            );
                        }
                    }
                    _ => {
                        let want = self.ret.as_deref().unwrap_or(BEH);
                        return Err(self.mismatch(i, format!("returns `{e}` of type {ty}, expected {want}")));
                    }
                }
                vec![]
            }
            Instr::Read(slot) => {
                let ty = self.slot_referent(i, s, slot)?;
                t.stack.push((Term::Var(read_var(&self.seg.name, i)), ty));
                vec![(next, t)]
            }
            Instr::Write(slot) => {
                if !self.behaviour {
                    return Err(self.mismatch(i, "write in an expression function"));
                }
                let (e, ty) = s.stack.last().ok_or_else(|| self.mismatch(i, "write on an empty stack"))?;
                t.stack.pop();
                let want = self.slot_referent(i, &t, slot)?;
                if ty != &want {
                    return Err(self.mismatch(i, format!("writes `{e}` of type {ty}, register holds {want}")));
                }
                push_unique(out, Constraint { lhs: self.head(s), rhs: e.clone(), index: 1 });
                vec![(next, t)]
            }
            Instr::Stop => vec![],
            Instr::Yield => vec![(next, t)],
            Instr::Next => {
                t.guarded = true;
                vec![(next, t)]
            }
            Instr::Wait(j) => {
                let at_read = rows
                    .get(j.wrapping_sub(1))
                    .and_then(|r| r.as_ref())
                    .ok_or_else(|| self.err(ShapeErrorKind::WaitInconsistency, i, format!("no shape at read {j}")))?;
                let x = Term::Var(read_var(&self.seg.name, *j));
                let ok = s.sigma == at_read.sigma
                    && s.stack.len() == at_read.stack.len() + 1
                    && s.stack[..at_read.stack.len()] == at_read.stack[..]
                    && s.stack.last().map(|(e, _)| e) == Some(&x);
                if !ok {
                    return Err(self.err(
                        ShapeErrorKind::WaitInconsistency,
                        i,
                        format!("stack `{}` is not the stack of read {j} followed by {x}", s.render_stack()),
                    ));
                }
                let mut after = at_read.clone();
                after.guarded = true;
                vec![(next, after)]
            }
        };
        Ok(succ)
    }
}

fn push_unique(out: &mut Vec<Constraint>, c: Constraint) {
    if !out.contains(&c) {
        out.push(c);
    }
}

/// Run the transfer rules over one segment in tree order.
pub fn analyze_segment(
    m: &Module,
    seg: &Segment,
    reads: &BTreeMap<Name, Vec<Name>>,
) -> Result<SegmentShapes, ShapeError> {
    let info = m.sig.functions.get(&seg.name).ok_or_else(|| ShapeError {
        kind: ShapeErrorKind::Mismatch,
        segment: seg.name.clone(),
        index: 1,
        message: "no declaration for this segment".into(),
    })?;
    let a = Analyzer { sig: &m.sig, seg, reads, behaviour: info.ret.is_none(), ret: info.ret.clone() };
    if info.params.len() != seg.arity {
        return Err(a.mismatch(1, format!("declared with {} parameters, segment has {}", info.params.len(), seg.arity)));
    }
    let formals: Vec<Name> = (1..=seg.arity).map(formal_var).collect();
    let own_reads: Vec<Name> = if a.behaviour { reads.get(&seg.name).cloned().unwrap_or_default() } else { vec![] };
    let sigma = formals.iter().chain(&own_reads).map(|x| (x.clone(), Term::Var(x.clone()))).collect();
    let stack = formals.iter().cloned().map(Term::Var).zip(info.params.iter().cloned()).collect();
    let mut rows: Vec<Option<Shape>> = vec![None; seg.len()];
    let mut constraints = Vec::new();
    let mut todo = vec![(1usize, Shape { sigma, stack, guarded: false })];
    while let Some((i, s)) = todo.pop() {
        if i == 0 || i > seg.len() {
            return Err(a.mismatch(i.min(seg.len()), "control leaves the segment"));
        }
        if rows[i - 1].is_some() {
            return Err(a.mismatch(i, "instruction reached twice"));
        }
        rows[i - 1] = Some(s.clone());
        let succ = a.step(i, &s, &rows, &mut constraints)?;
        for (j, t) in succ.into_iter().rev() {
            todo.push((j, t));
        }
    }
    Ok(SegmentShapes {
        name: seg.name.clone(),
        behaviour: a.behaviour,
        formals,
        reads: own_reads,
        rows,
        code: seg.code.clone(),
        constraints,
    })
}

/// Shapes of every segment.
pub fn analyze_module(m: &Module) -> Result<Vec<SegmentShapes>, ShapeError> {
    let g = build_flow_graph(&m.segments);
    let reads: BTreeMap<Name, Vec<Name>> = m
        .segments
        .iter()
        .filter(|s| m.sig.is_behaviour(&s.name))
        .map(|s| (s.name.clone(), reachable_reads(m, &g, &s.name)))
        .collect();
    m.segments.iter().map(|s| analyze_segment(m, s, &reads)).collect()
}

pub fn emit_constraints(shapes: &[SegmentShapes]) -> Vec<Constraint> {
    let mut out = Vec::new();
    for s in shapes {
        for c in &s.constraints {
            push_unique(&mut out, c.clone());
        }
    }
    out
}

/// Arity of a symbol occurring in bytecode-level constraints.
pub fn symbol_arity(m: &Module, shapes: &[SegmentShapes], f: &str) -> Option<usize> {
    if let Some(base) = f.strip_suffix('^') {
        return shapes.iter().find(|s| &*s.name == base && s.behaviour).map(|s| s.formals.len() + s.reads.len());
    }
    m.sig.functions.get(f).map(|i| i.params.len()).or_else(|| m.sig.ctors.get(f).map(|c| c.args.len()))
}

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Check the Read-Once flow property.
    pub read_once: bool,
    pub precedence: Option<Precedence>,
    pub assignment: Option<Assignment>,
    pub search_bound: usize,
    pub qi_budget: u64,
    /// Seed of the refutation sampling in QI checks.
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            read_once: true,
            precedence: None,
            assignment: None,
            search_bound: termination::DEFAULT_SEARCH_BOUND,
            qi_budget: qi::DEFAULT_BUDGET,
            seed: qi::SAMPLE_SEED,
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerifyReport {
    pub flow: FlowReport,
    pub shapes: Result<Vec<SegmentShapes>, ShapeError>,
    pub constraints: Vec<Constraint>,
    pub termination: Stage<TerminationVerdict>,
    pub qi: Stage<Vec<ConstraintCheck>>,
}

impl VerifyReport {
    pub fn shapes_ok(&self) -> bool {
        self.shapes.is_ok()
    }

    pub fn pass(&self) -> bool {
        self.flow.pass()
            && self.shapes.is_ok()
            && matches!(&self.termination, Stage::Done(v) if v.pass)
            && matches!(&self.qi, Stage::Done(cs) if qi::all_hold(cs))
    }

    /// One JSON object per line.
    pub fn render_records(&self) -> String {
        let mut recs = Vec::new();
        for v in &self.flow.violations {
            recs.push(json!({"kind": "flow", "property": v.property.to_string(),
                "segment": v.node.0.to_string(), "index": v.node.1, "message": v.message}));
        }
        match &self.shapes {
            Ok(ss) => {
                for s in ss {
                    for (k, row) in s.rows.iter().enumerate() {
                        recs.push(json!({"kind": "shape", "segment": s.name.to_string(), "index": k + 1,
                            "instr": s.code[k].to_string(),
                            "stack": row.as_ref().map(|r| r.stack.iter().map(|(e, _)| e.to_string()).collect::<Vec<_>>())}));
                    }
                }
            }
            Err(e) => recs.push(json!({"kind": "shape-error", "error": e.kind.to_string(),
                "segment": e.segment.to_string(), "index": e.index, "message": e.message})),
        }
        for c in &self.constraints {
            recs.push(json!({"kind": "constraint", "lhs": c.lhs.to_string(), "rhs": c.rhs.to_string(), "index": c.index}));
        }
        recs.push(match &self.termination {
            Stage::Done(v) => json!({"kind": "lpo", "pass": v.pass, "precedence": v.precedence.to_string(), "linear": v.linear}),
            Stage::Failed(m) => json!({"kind": "lpo", "pass": false, "error": m}),
            Stage::Skipped => json!({"kind": "lpo", "skipped": true}),
        });
        recs.push(match &self.qi {
            Stage::Done(cs) => json!({"kind": "qi", "pass": qi::all_hold(cs)}),
            Stage::Failed(m) => json!({"kind": "qi", "pass": false, "error": m}),
            Stage::Skipped => json!({"kind": "qi", "skipped": true}),
        });
        recs.push(json!({"kind": "verdict", "pass": self.pass()}));
        recs.iter().map(|r| format!("{r}\n")).collect()
    }

    pub fn render(&self) -> String {
        let mut out = self.flow.render();
        match &self.shapes {
            Ok(ss) => {
                for s in ss {
                    out.push_str(&s.render());
                }
            }
            Err(e) => out.push_str(&format!("shape: fail, {e}\n")),
        }
        for c in &self.constraints {
            out.push_str(&format!("constraint {c}\n"));
        }
        match &self.termination {
            Stage::Done(v) => out.push_str(&v.render()),
            Stage::Failed(m) => out.push_str(&format!("lpo: fail, {m}\n")),
            Stage::Skipped => out.push_str("lpo: skipped\n"),
        }
        match &self.qi {
            Stage::Done(cs) => {
                for c in cs {
                    out.push_str(&format!("qi {} : {} >= {} {}\n", c.constraint, c.lhs, c.rhs, c.verdict));
                }
                out.push_str(&format!("qi: {}\n", if qi::all_hold(cs) { "pass" } else { "fail" }));
            }
            Stage::Failed(m) => out.push_str(&format!("qi: fail, {m}\n")),
            Stage::Skipped => out.push_str("qi: skipped\n"),
        }
        out.push_str(&format!("verdict: {}\n", if self.pass() { "pass" } else { "fail" }));
        out
    }
}

fn termination_stage(m: &Module, cs: &[Constraint], opts: &VerifyOptions) -> Stage<TerminationVerdict> {
    let prec = match &opts.precedence {
        Some(p) => p.clone(),
        None if !m.annotations.order.is_empty() => match Precedence::from_chains(&m.annotations.order) {
            Ok(p) => p,
            Err(e) => return Stage::Failed(e.to_string()),
        },
        None => match termination::search_precedence(cs, opts.search_bound) {
            Ok(Some(p)) => p,
            Ok(None) => return Stage::Failed("no precedence makes the constraints decrease".into()),
            Err(e @ PrecedenceError::BoundExceeded { .. }) | Err(e @ PrecedenceError::Cyclic { .. }) => {
                return Stage::Failed(e.to_string())
            }
        },
    };
    Stage::Done(termination::check_termination(cs, &prec))
}

fn qi_stage(m: &Module, shapes: &[SegmentShapes], cs: &[Constraint], opts: &VerifyOptions) -> Stage<Vec<ConstraintCheck>> {
    let qa = match &opts.assignment {
        Some(a) => a.clone(),
        None if !m.annotations.qi.is_empty() => {
            match Assignment::from_annotations(&m.sig, &m.annotations, &|f| symbol_arity(m, shapes, f)) {
                Ok(a) => a,
                Err(e) => return Stage::Failed(e.to_string()),
            }
        }
        None => {
            let extra: Vec<(Name, usize)> = m
                .system
                .iter()
                .filter_map(|t| symbol_arity(m, shapes, &hat(&t.function)).map(|n| (hat(&t.function), n)))
                .collect();
            match qi::synthesize(&m.sig, cs, &extra, opts.qi_budget) {
                Ok(a) => a,
                Err(e) => return Stage::Failed(e.to_string()),
            }
        }
    };
    match qi::check_assignment_seeded(&qa, cs, opts.seed) {
        Ok(checks) => Stage::Done(checks),
        Err(e @ QiError::Uncovered(_)) | Err(e @ QiError::Invalid { .. }) | Err(e @ QiError::BudgetExceeded { .. }) => {
            Stage::Failed(e.to_string())
        }
    }
}

/// Flow checks, shapes, constraints, then LPO and quasi-interpretation.
/// Missing precedence or assignment is taken from the module annotations,
/// otherwise searched for.
pub fn verify(m: &Module, opts: &VerifyOptions) -> VerifyReport {
    let flow = check_flow_properties(&m.segments, opts.read_once);
    let shapes = if flow.pass() {
        analyze_module(m)
    } else {
        let v = &flow.violations[0];
        Err(ShapeError {
            kind: ShapeErrorKind::Mismatch,
            segment: v.node.0.clone(),
            index: v.node.1,
            message: format!("flow property {} does not hold", v.property),
        })
    };
    let (constraints, termination, qi) = match &shapes {
        Ok(ss) => {
            let cs = emit_constraints(ss);
            let t = termination_stage(m, &cs, opts);
            let q = qi_stage(m, ss, &cs, opts);
            (cs, t, q)
        }
        Err(_) => (Vec::new(), Stage::Skipped, Stage::Skipped),
    };
    VerifyReport { flow, shapes, constraints, termination, qi }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bytecode::compile_program;
    use crate::frontend;

    #[test]
    fn nullary_build_then_return() {
        let tp = frontend::load("type t = c || d\ndef f() : t = c").unwrap();
        let m = compile_program(&tp).unwrap();
        let ss = analyze_module(&m).unwrap();
        assert_eq!(ss[0].shape(2).unwrap().render_stack(), "c");
        assert_eq!(ss[0].constraints[0].to_string(), "f() >0 c");
    }

    #[test]
    fn variable_branch_refines_the_head() {
        let tp = frontend::load(
            "type nat = z || s of nat\ndef p(x: nat) : nat = match x with s(y) then y else x",
        )
        .unwrap();
        let m = compile_program(&tp).unwrap();
        let ss = analyze_module(&m).unwrap();
        let cs: Vec<String> = ss[0].constraints.iter().map(|c| c.to_string()).collect();
        assert_eq!(cs, ["p(s(x#2.1)) >0 x#2.1", "p(x#1.1) >0 x#1.1"]);
    }
}
