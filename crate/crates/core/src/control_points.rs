//! Control points of function definitions and their ordering constraints.

use std::collections::BTreeSet;
use std::fmt;

use crate::ast::*;
use crate::cfa::CallGraph;
use crate::frontend::pretty;
use crate::term::{match_term, name, Name, Term, TermSubst};

/// The extended symbol f^ of a behaviour f.
pub fn hat(f: &str) -> Name {
    name(&format!("{f}^"))
}

pub fn is_hat(f: &str) -> bool {
    f.ends_with('^')
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Continuation {
    Expr(ExprBody),
    Beh(Behaviour),
}

impl Continuation {
    pub fn vars(&self) -> Vec<Name> {
        match self {
            Continuation::Expr(e) => e.free_vars(),
            Continuation::Beh(b) => b.free_vars(),
        }
    }
}

impl fmt::Display for Continuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Continuation::Expr(e) => f.write_str(&pretty::expr_body(e)),
            Continuation::Beh(b) => f.write_str(&pretty::behaviour(b)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ControlPoint {
    /// `f(p)` or `f^(p)`.
    pub head: Term,
    pub cont: Continuation,
    pub flag: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("control point {head}: variable {var} of the continuation is not bound by the head")]
pub struct UnboundVariable {
    pub head: String,
    pub var: Name,
}

impl ControlPoint {
    pub fn new(head: Term, cont: Continuation, flag: u8) -> Result<ControlPoint, UnboundVariable> {
        let bound = head.var_set();
        if let Some(x) = cont.vars().into_iter().find(|x| !bound.contains(x)) {
            return Err(UnboundVariable { head: head.to_string(), var: x });
        }
        Ok(ControlPoint { head, cont, flag })
    }

    pub fn symbol(&self) -> &Name {
        match &self.head {
            Term::Fun(f, _) => f,
            _ => unreachable!("control point heads are applications"),
        }
    }

    pub fn patterns(&self) -> &[Term] {
        match &self.head {
            Term::Fun(_, ps) => ps,
            _ => &[],
        }
    }
}

impl fmt::Display for ControlPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head, self.cont, self.flag)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Constraint {
    pub lhs: Term,
    pub rhs: Term,
    pub index: u8,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} >{} {}", self.lhs, self.index, self.rhs)
    }
}

fn subst_one(ps: &[Term], x: &Name, t: &Term) -> Vec<Term> {
    let s: TermSubst = [(x.clone(), t.clone())].into_iter().collect();
    ps.iter().map(|p| p.substitute(&s)).collect()
}

/// Control points of one function, in generation order without duplicates.
pub fn control_points(f: &FunctionDef, cfa: &CallGraph) -> Result<Vec<ControlPoint>, UnboundVariable> {
    let mut out = Vec::new();
    let formals: Vec<Term> = f.formals().into_iter().map(Term::Var).collect();
    match &f.body {
        FunctionBody::Expr { body, .. } => expr_points(&f.name, formals, body, &mut out)?,
        FunctionBody::Beh(b) => {
            let mut ps = formals;
            ps.extend(cfa.y_hat(&f.name).into_iter().map(Term::Var));
            beh_points(&hat(&f.name), ps, b, &mut out)?;
        }
    }
    let mut seen = BTreeSet::new();
    out.retain(|cp: &ControlPoint| seen.insert(cp.to_string()));
    Ok(out)
}

fn expr_points(f: &Name, ps: Vec<Term>, eb: &ExprBody, out: &mut Vec<ControlPoint>) -> Result<(), UnboundVariable> {
    let head = Term::Fun(f.clone(), ps.clone());
    match eb {
        ExprBody::Expr(_) => out.push(ControlPoint::new(head, Continuation::Expr(eb.clone()), 0)?),
        ExprBody::Match(m) => {
            out.push(ControlPoint::new(head, Continuation::Expr(eb.clone()), 2)?);
            let then_ps = match &m.scrutinee {
                Term::Var(x) => subst_one(&ps, x, &m.pattern.to_term()),
                _ => ps.clone(),
            };
            expr_points(f, then_ps, &m.then, out)?;
            expr_points(f, ps, &m.els, out)?;
        }
    }
    Ok(())
}

fn beh_points(fh: &Name, ps: Vec<Term>, b: &Behaviour, out: &mut Vec<ControlPoint>) -> Result<(), UnboundVariable> {
    let head = || Term::Fun(fh.clone(), ps.clone());
    let here = |flag| ControlPoint::new(head(), Continuation::Beh(b.clone()), flag);
    match b {
        Behaviour::Stop => out.push(here(2)?),
        Behaviour::Call(..) => out.push(here(0)?),
        Behaviour::Yield(next) => {
            out.push(here(2)?);
            beh_points(fh, ps.clone(), next, out)?;
        }
        Behaviour::Next(g, es) => {
            out.push(here(2)?);
            out.push(ControlPoint::new(head(), Continuation::Beh(Behaviour::Call(g.clone(), es.clone())), 2)?);
        }
        Behaviour::Assign(a) => {
            out.push(here(2)?);
            out.push(ControlPoint::new(head(), Continuation::Expr(ExprBody::Expr(a.value.clone())), 1)?);
            beh_points(fh, ps.clone(), &a.then, out)?;
        }
        Behaviour::Match(m) => {
            out.push(here(2)?);
            let then_ps = match &m.scrutinee {
                Term::Var(x) => subst_one(&ps, x, &m.pattern.to_term()),
                _ => ps.clone(),
            };
            beh_points(fh, then_ps, &m.then, out)?;
            beh_points(fh, ps.clone(), &m.els, out)?;
        }
        Behaviour::Read(r) => {
            out.push(here(2)?);
            let (g, es) = &r.default;
            out.push(ControlPoint::new(head(), Continuation::Beh(Behaviour::Call(g.clone(), es.clone())), 2)?);
            for br in &r.branches {
                let bps = subst_one(&ps, &r.label.name, &br.pattern.to_term());
                beh_points(fh, bps, &br.body, out)?;
            }
        }
    }
    Ok(())
}

/// Constraints associated with flags 0 and 1.
pub fn constraints(cps: &[ControlPoint], cfa: &CallGraph) -> Vec<Constraint> {
    let mut out = Vec::new();
    for cp in cps {
        let c = match (&cp.cont, cp.flag) {
            (Continuation::Expr(ExprBody::Expr(e)), 0 | 1) => {
                Constraint { lhs: cp.head.clone(), rhs: e.clone(), index: cp.flag }
            }
            (Continuation::Beh(Behaviour::Call(g, es)), 0) => {
                let mut args = es.clone();
                args.extend(cfa.y_hat(g).into_iter().map(Term::Var));
                Constraint { lhs: cp.head.clone(), rhs: Term::Fun(hat(g), args), index: 0 }
            }
            _ => continue,
        };
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

/// Control points and constraints for a whole program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Analysis {
    pub points: Vec<ControlPoint>,
    pub constraints: Vec<Constraint>,
}

pub fn analyze(p: &Program, cfa: &CallGraph) -> Result<Analysis, UnboundVariable> {
    let mut points = Vec::new();
    for f in &p.functions {
        points.extend(control_points(f, cfa)?);
    }
    let constraints = constraints(&points, cfa);
    Ok(Analysis { points, constraints })
}

impl Analysis {
    pub fn render(&self) -> String {
        let mut s = String::new();
        for cp in &self.points {
            s.push_str(&format!("control-point {cp}\n"));
        }
        for c in &self.constraints {
            s.push_str(&format!("constraint {c}\n"));
        }
        s
    }
}

fn match_terms(ps: &[Term], ts: &[Term], s: &mut TermSubst) -> bool {
    ps.len() == ts.len() && ps.iter().zip(ts).all(|(p, t)| match_term(p, t, s))
}

/// Whether `b` is obtained from `pattern` by substituting closed terms
/// for its free variables.
pub fn behaviour_instance(pattern: &Behaviour, b: &Behaviour, s: &mut TermSubst) -> bool {
    match (pattern, b) {
        (Behaviour::Stop, Behaviour::Stop) => true,
        (Behaviour::Call(f, ps), Behaviour::Call(g, ts)) | (Behaviour::Next(f, ps), Behaviour::Next(g, ts)) => {
            f == g && match_terms(ps, ts, s)
        }
        (Behaviour::Yield(p), Behaviour::Yield(t)) => behaviour_instance(p, t, s),
        (Behaviour::Assign(p), Behaviour::Assign(t)) => {
            match_term(&p.target, &t.target, s)
                && match_term(&p.value, &t.value, s)
                && behaviour_instance(&p.then, &t.then, s)
        }
        (Behaviour::Match(p), Behaviour::Match(t)) => {
            p.pattern == t.pattern
                && match_term(&p.scrutinee, &t.scrutinee, s)
                && behaviour_instance(&p.then, &t.then, s)
                && behaviour_instance(&p.els, &t.els, s)
        }
        (Behaviour::Read(p), Behaviour::Read(t)) => {
            p.label == t.label
                && match_term(&p.target, &t.target, s)
                && p.branches.len() == t.branches.len()
                && p.branches
                    .iter()
                    .zip(&t.branches)
                    .all(|(x, y)| x.pattern == y.pattern && behaviour_instance(&x.body, &y.body, s))
                && p.default.0 == t.default.0
                && match_terms(&p.default.1, &t.default.1, s)
        }
        _ => false,
    }
}

/// Some control point of the analysis has `b` as an instance: its free
/// variables map to closed terms, variables bound inside it to themselves.
pub fn covers(points: &[ControlPoint], b: &Behaviour) -> bool {
    points.iter().any(|cp| match &cp.cont {
        Continuation::Beh(p) => {
            let mut s = TermSubst::new();
            let free: BTreeSet<Name> = cp.patterns().iter().flat_map(Term::vars).collect();
            behaviour_instance(p, b, &mut s)
                && s.iter().all(|(x, t)| if free.contains(x) { t.is_ground() } else { *t == Term::Var(x.clone()) })
        }
        Continuation::Expr(_) => false,
    })
}
