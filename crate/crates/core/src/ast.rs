//! Abstract syntax of programs: declarations, expression bodies and behaviours.

use std::fmt;

use num_rational::BigRational;

use crate::term::{Name, ShallowPattern, Term, Value};

/// Position in a source file (1-based). Ignored by equality so that
/// re-parsed programs compare equal.
#[derive(Clone, Copy, Debug, Default)]
pub struct Span {
    pub line: usize,
    pub col: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Span) -> bool {
        true
    }
}

impl Eq for Span {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CtorSig {
    pub name: Name,
    pub args: Vec<Name>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegisterDecl {
    pub name: Name,
    pub default: Value,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TypeKind {
    Data(Vec<CtorSig>),
    Ref { referent: Name, registers: Vec<RegisterDecl> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeDecl {
    pub name: Name,
    pub kind: TypeKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Match<B> {
    pub scrutinee: Term,
    pub pattern: ShallowPattern,
    pub then: B,
    pub els: B,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExprBody {
    Expr(Term),
    Match(Box<Match<ExprBody>>),
}

/// Read label. `index` is the global position in source order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    pub index: usize,
    pub name: Name,
    /// Whether the label was written explicitly in source.
    pub explicit: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReadPattern {
    Var(Name),
    Ctor(ShallowPattern),
}

impl ReadPattern {
    pub fn to_term(&self) -> Term {
        match self {
            ReadPattern::Var(x) => Term::Var(x.clone()),
            ReadPattern::Ctor(p) => p.to_term(),
        }
    }

    pub fn binders(&self) -> Vec<Name> {
        match self {
            ReadPattern::Var(x) => vec![x.clone()],
            ReadPattern::Ctor(p) => p.vars.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReadBranch {
    pub pattern: ReadPattern,
    pub body: Behaviour,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Read {
    pub label: Label,
    pub target: Term,
    pub branches: Vec<ReadBranch>,
    pub default: (Name, Vec<Term>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assign {
    pub target: Term,
    pub value: Term,
    pub then: Behaviour,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Behaviour {
    Stop,
    Call(Name, Vec<Term>),
    Yield(Box<Behaviour>),
    Next(Name, Vec<Term>),
    Assign(Box<Assign>),
    Read(Box<Read>),
    Match(Box<Match<Behaviour>>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Param {
    pub name: Name,
    pub ty: Name,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FunctionBody {
    Expr { ret: Name, body: ExprBody },
    Beh(Behaviour),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunctionDef {
    pub name: Name,
    pub params: Vec<Param>,
    pub body: FunctionBody,
    pub span: Span,
}

impl FunctionDef {
    pub fn is_behaviour(&self) -> bool {
        matches!(self.body, FunctionBody::Beh(_))
    }

    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn formals(&self) -> Vec<Name> {
        self.params.iter().map(|p| p.name.clone()).collect()
    }

    pub fn behaviour(&self) -> Option<&Behaviour> {
        match &self.body {
            FunctionBody::Beh(b) => Some(b),
            FunctionBody::Expr { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThreadInit {
    pub function: Name,
    pub args: Vec<Value>,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrderRel {
    Greater,
    Equal,
}

/// `order f > g = h > k`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderChain {
    pub symbols: Vec<Name>,
    pub rels: Vec<OrderRel>,
    pub span: Span,
}

/// Right-hand side of a `qi` annotation; variables are positional `x1..xn`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum QiExpr {
    Const(BigRational),
    Var(usize),
    Add(Vec<QiExpr>),
    Scale(BigRational, Box<QiExpr>),
    Max(Vec<QiExpr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QiDecl {
    pub symbol: Name,
    pub expr: QiExpr,
    pub span: Span,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Annotations {
    pub order: Vec<OrderChain>,
    pub qi: Vec<QiDecl>,
}

impl Annotations {
    pub fn is_empty(&self) -> bool {
        self.order.is_empty() && self.qi.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub types: Vec<TypeDecl>,
    pub functions: Vec<FunctionDef>,
    pub system: Vec<ThreadInit>,
    pub annotations: Annotations,
}

impl Program {
    pub fn function(&self, f: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|d| &*d.name == f)
    }

    pub fn behaviours(&self) -> impl Iterator<Item = &FunctionDef> {
        self.functions.iter().filter(|d| d.is_behaviour())
    }

    pub fn registers(&self) -> impl Iterator<Item = &RegisterDecl> {
        self.types.iter().flat_map(|t| match &t.kind {
            TypeKind::Ref { registers, .. } => registers.as_slice(),
            TypeKind::Data(_) => &[],
        })
    }
}

impl Behaviour {
    /// Visit every read node in source order.
    pub fn reads(&self) -> Vec<&Read> {
        let mut out = Vec::new();
        self.collect_reads(&mut out);
        out
    }

    fn collect_reads<'a>(&'a self, out: &mut Vec<&'a Read>) {
        match self {
            Behaviour::Stop | Behaviour::Call(..) | Behaviour::Next(..) => {}
            Behaviour::Yield(b) => b.collect_reads(out),
            Behaviour::Assign(a) => a.then.collect_reads(out),
            Behaviour::Read(r) => {
                out.push(r);
                for br in &r.branches {
                    br.body.collect_reads(out);
                }
            }
            Behaviour::Match(m) => {
                m.then.collect_reads(out);
                m.els.collect_reads(out);
            }
        }
    }

    /// Substitute values for variables throughout the behaviour.
    pub fn apply(&self, s: &crate::term::Subst) -> Behaviour {
        let ts = |es: &[Term]| es.iter().map(|e| e.apply(s)).collect::<Vec<_>>();
        match self {
            Behaviour::Stop => Behaviour::Stop,
            Behaviour::Call(f, es) => Behaviour::Call(f.clone(), ts(es)),
            Behaviour::Yield(b) => Behaviour::Yield(Box::new(b.apply(s))),
            Behaviour::Next(f, es) => Behaviour::Next(f.clone(), ts(es)),
            Behaviour::Assign(a) => Behaviour::Assign(Box::new(Assign {
                target: a.target.apply(s),
                value: a.value.apply(s),
                then: a.then.apply(s),
            })),
            Behaviour::Read(r) => Behaviour::Read(Box::new(Read {
                label: r.label.clone(),
                target: r.target.apply(s),
                branches: r
                    .branches
                    .iter()
                    .map(|b| ReadBranch { pattern: b.pattern.clone(), body: b.body.apply(s) })
                    .collect(),
                default: (r.default.0.clone(), ts(&r.default.1)),
            })),
            Behaviour::Match(m) => Behaviour::Match(Box::new(Match {
                scrutinee: m.scrutinee.apply(s),
                pattern: m.pattern.clone(),
                then: m.then.apply(s),
                els: m.els.apply(s),
            })),
        }
    }

    /// Free variables in order of first occurrence.
    pub fn free_vars(&self) -> Vec<Name> {
        let mut out = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        self.collect_free(&mut out, &mut seen, &[]);
        out
    }

    fn collect_free(
        &self,
        out: &mut Vec<Name>,
        seen: &mut std::collections::BTreeSet<Name>,
        bound: &[Name],
    ) {
        let push_term = |t: &Term, out: &mut Vec<Name>, seen: &mut std::collections::BTreeSet<Name>| {
            for x in t.vars() {
                if !bound.contains(&x) && seen.insert(x.clone()) {
                    out.push(x);
                }
            }
        };
        match self {
            Behaviour::Stop => {}
            Behaviour::Call(_, es) | Behaviour::Next(_, es) => {
                es.iter().for_each(|e| push_term(e, out, seen))
            }
            Behaviour::Yield(b) => b.collect_free(out, seen, bound),
            Behaviour::Assign(a) => {
                push_term(&a.target, out, seen);
                push_term(&a.value, out, seen);
                a.then.collect_free(out, seen, bound);
            }
            Behaviour::Read(r) => {
                push_term(&r.target, out, seen);
                for br in &r.branches {
                    let mut inner = bound.to_vec();
                    inner.extend(br.pattern.binders());
                    br.body.collect_free(out, seen, &inner);
                }
                r.default.1.iter().for_each(|e| push_term(e, out, seen));
            }
            Behaviour::Match(m) => {
                push_term(&m.scrutinee, out, seen);
                let mut inner = bound.to_vec();
                inner.extend(m.pattern.vars.iter().cloned());
                m.then.collect_free(out, seen, &inner);
                m.els.collect_free(out, seen, bound);
            }
        }
    }
}

impl ExprBody {
    pub fn free_vars(&self) -> Vec<Name> {
        let mut out = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        self.collect_free(&mut out, &mut seen, &[]);
        out
    }

    fn collect_free(
        &self,
        out: &mut Vec<Name>,
        seen: &mut std::collections::BTreeSet<Name>,
        bound: &[Name],
    ) {
        match self {
            ExprBody::Expr(e) => {
                for x in e.vars() {
                    if !bound.contains(&x) && seen.insert(x.clone()) {
                        out.push(x);
                    }
                }
            }
            ExprBody::Match(m) => {
                for x in m.scrutinee.vars() {
                    if !bound.contains(&x) && seen.insert(x.clone()) {
                        out.push(x);
                    }
                }
                let mut inner = bound.to_vec();
                inner.extend(m.pattern.vars.iter().cloned());
                m.then.collect_free(out, seen, &inner);
                m.els.collect_free(out, seen, bound);
            }
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}
