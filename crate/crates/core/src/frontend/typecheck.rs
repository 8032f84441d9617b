//! Well-formedness and type checking.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::*;
use crate::term::{name, Name, ShallowPattern, Term, Value};

use super::diag::{Code, Diagnostic};
use super::parser::function_variables;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TypeInfo {
    Data,
    Ref { referent: Name },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CtorInfo {
    pub args: Vec<Name>,
    pub ty: Name,
    pub register: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FunInfo {
    pub params: Vec<Name>,
    /// `None` for behaviours.
    pub ret: Option<Name>,
}

/// Declared symbols with their types.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    pub types: BTreeMap<Name, TypeInfo>,
    pub ctors: BTreeMap<Name, CtorInfo>,
    pub functions: BTreeMap<Name, FunInfo>,
}

impl Signature {
    pub fn is_ctor(&self, c: &str) -> bool {
        self.ctors.contains_key(c)
    }

    pub fn is_register(&self, c: &str) -> bool {
        self.ctors.get(c).is_some_and(|i| i.register)
    }

    pub fn is_behaviour(&self, f: &str) -> bool {
        self.functions.get(f).is_some_and(|i| i.ret.is_none())
    }

    pub fn referent(&self, ty: &str) -> Option<&Name> {
        match self.types.get(ty) {
            Some(TypeInfo::Ref { referent }) => Some(referent),
            _ => None,
        }
    }

    /// Type of a closed value, if well typed.
    pub fn type_of_value(&self, v: &Value) -> Option<Name> {
        let info = self.ctors.get(v.head())?;
        if info.args.len() != v.arity() {
            return None;
        }
        for (a, t) in v.args().iter().zip(&info.args) {
            if self.type_of_value(a).as_ref() != Some(t) {
                return None;
            }
        }
        Some(info.ty.clone())
    }
}

/// A program that passed all checks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedProgram {
    pub program: Program,
    pub sig: Signature,
    pub warnings: Vec<Diagnostic>,
}

impl TypedProgram {
    /// Default store: every register with its declared default.
    pub fn default_store(&self) -> BTreeMap<Name, Value> {
        self.program.registers().map(|r| (r.name.clone(), r.default.clone())).collect()
    }
}

struct Checker<'a> {
    sig: Signature,
    diags: Vec<Diagnostic>,
    prog: &'a Program,
}

/// Per-path variable environment.
#[derive(Clone, Default)]
struct Env {
    bound: BTreeMap<Name, Name>,
    /// Variables bound earlier on this path but out of scope here.
    hidden: BTreeSet<Name>,
}

impl Env {
    fn in_path(&self, x: &str) -> bool {
        self.bound.contains_key(x) || self.hidden.contains(x)
    }
}

impl<'a> Checker<'a> {
    fn err(&mut self, span: Span, code: Code, msg: String) {
        self.diags.push(Diagnostic::error(span, code, msg));
    }

    fn build_signature(&mut self) {
        let mut seen_types: BTreeSet<Name> = BTreeSet::new();
        let mut symbols: BTreeSet<Name> = BTreeSet::new();
        for t in &self.prog.types {
            if &*t.name == "beh" || !seen_types.insert(t.name.clone()) {
                self.err(t.span, Code::Duplicate, format!("type `{}` is declared more than once", t.name));
                continue;
            }
            match &t.kind {
                TypeKind::Data(cs) => {
                    self.sig.types.insert(t.name.clone(), TypeInfo::Data);
                    for c in cs {
                        if !symbols.insert(c.name.clone()) {
                            self.err(t.span, Code::Duplicate, format!("symbol `{}` is declared more than once", c.name));
                            continue;
                        }
                        self.sig.ctors.insert(
                            c.name.clone(),
                            CtorInfo { args: c.args.clone(), ty: t.name.clone(), register: false },
                        );
                    }
                }
                TypeKind::Ref { referent, registers } => {
                    self.sig.types.insert(t.name.clone(), TypeInfo::Ref { referent: referent.clone() });
                    for r in registers {
                        if !symbols.insert(r.name.clone()) {
                            self.err(t.span, Code::Duplicate, format!("symbol `{}` is declared more than once", r.name));
                            continue;
                        }
                        self.sig.ctors.insert(
                            r.name.clone(),
                            CtorInfo { args: Vec::new(), ty: t.name.clone(), register: true },
                        );
                    }
                }
            }
        }
        for f in &self.prog.functions {
            if !symbols.insert(f.name.clone()) {
                self.err(f.span, Code::Duplicate, format!("symbol `{}` is declared more than once", f.name));
                continue;
            }
            let ret = match &f.body {
                FunctionBody::Expr { ret, .. } => Some(ret.clone()),
                FunctionBody::Beh(_) => None,
            };
            self.sig.functions.insert(
                f.name.clone(),
                FunInfo { params: f.params.iter().map(|p| p.ty.clone()).collect(), ret },
            );
        }
    }

    fn check_type_name(&mut self, span: Span, t: &Name) {
        if !self.sig.types.contains_key(t) {
            self.err(span, Code::UnknownSymbol, format!("unknown type `{t}`"));
        }
    }

    fn check_declarations(&mut self) {
        for t in &self.prog.types {
            match &t.kind {
                TypeKind::Data(cs) => {
                    for c in cs {
                        for a in &c.args {
                            self.check_type_name(t.span, a);
                        }
                    }
                }
                TypeKind::Ref { referent, registers } => {
                    self.check_type_name(t.span, referent);
                    for r in registers {
                        if self.sig.type_of_value(&r.default).as_ref() != Some(referent) {
                            self.err(
                                t.span,
                                Code::TypeMismatch,
                                format!("default value `{}` of register `{}` is not of type `{referent}`", r.default, r.name),
                            );
                        }
                    }
                }
            }
        }
        for f in &self.prog.functions {
            let mut seen = BTreeSet::new();
            for p in &f.params {
                self.check_type_name(f.span, &p.ty);
                if !seen.insert(p.name.clone()) {
                    self.err(f.span, Code::Duplicate, format!("parameter `{}` of `{}` is repeated", p.name, f.name));
                }
            }
            if let FunctionBody::Expr { ret, .. } = &f.body {
                self.check_type_name(f.span, ret);
            }
        }
    }

    fn value(&mut self, span: Span, v: &Value, ty: &Name) {
        match self.sig.type_of_value(v) {
            Some(t) if &t == ty => {}
            _ => self.err(span, Code::TypeMismatch, format!("value `{v}` is not of type `{ty}`")),
        }
    }

    fn args(&mut self, span: Span, fvars: &BTreeSet<Name>, env: &Env, what: &str, params: &[Name], args: &[Term]) {
        if params.len() != args.len() {
            self.err(
                span,
                Code::Arity,
                format!("`{what}` expects {} argument(s) but is given {}", params.len(), args.len()),
            );
            for a in args {
                self.infer(span, fvars, env, a);
            }
            return;
        }
        for (a, t) in args.iter().zip(params) {
            self.expect(span, fvars, env, a, t);
        }
    }

    fn expect(&mut self, span: Span, fvars: &BTreeSet<Name>, env: &Env, e: &Term, ty: &Name) {
        if let Some(t) = self.infer(span, fvars, env, e) {
            if &t != ty {
                self.err(span, Code::TypeMismatch, format!("`{e}` has type `{t}` but `{ty}` is expected"));
            }
        }
    }

    fn infer(&mut self, span: Span, fvars: &BTreeSet<Name>, env: &Env, e: &Term) -> Option<Name> {
        match e {
            Term::Var(x) => match env.bound.get(x) {
                Some(t) => Some(t.clone()),
                None if fvars.contains(x) => {
                    self.err(span, Code::Scope, format!("variable `{x}` is not in scope here"));
                    None
                }
                None => {
                    self.err(span, Code::UnknownSymbol, format!("unknown variable `{x}`"));
                    None
                }
            },
            Term::Val(v) => {
                let t = self.sig.type_of_value(v);
                if t.is_none() {
                    self.err(span, Code::TypeMismatch, format!("ill-typed value `{v}`"));
                }
                t
            }
            Term::Ctor(c, a) => {
                let Some(info) = self.sig.ctors.get(c).cloned() else {
                    self.err(span, Code::UnknownSymbol, format!("unknown constructor `{c}`"));
                    return None;
                };
                self.args(span, fvars, env, c, &info.args, a);
                Some(info.ty)
            }
            Term::Fun(f, a) => {
                let Some(info) = self.sig.functions.get(f).cloned() else {
                    self.err(span, Code::UnknownSymbol, format!("unknown function `{f}`"));
                    for t in a {
                        self.infer(span, fvars, env, t);
                    }
                    return None;
                };
                self.args(span, fvars, env, f, &info.params, a);
                match info.ret {
                    Some(t) => Some(t),
                    None => {
                        self.err(
                            span,
                            Code::Position,
                            format!("behaviour `{f}` is used where a value is expected"),
                        );
                        None
                    }
                }
            }
        }
    }

    /// Binds the variables of `p`, matched at type `ty`, for the then-branch.
    fn pattern(&mut self, span: Span, env: &Env, p: &ShallowPattern, ty: Option<&Name>) -> Env {
        let mut inner = env.clone();
        let info = self.sig.ctors.get(&p.ctor).cloned();
        match &info {
            None => self.err(span, Code::UnknownSymbol, format!("unknown constructor `{}` in pattern", p.ctor)),
            Some(info) => {
                if let Some(ty) = ty {
                    if &info.ty != ty {
                        self.err(
                            span,
                            Code::TypeMismatch,
                            format!("pattern `{p}` has type `{}` but `{ty}` is expected", info.ty),
                        );
                    }
                }
                if info.args.len() != p.vars.len() {
                    self.err(
                        span,
                        Code::Arity,
                        format!("constructor `{}` expects {} argument(s) in pattern", p.ctor, info.args.len()),
                    );
                }
            }
        }
        for (i, y) in p.vars.iter().enumerate() {
            self.fresh(span, env, y);
            let t = info.as_ref().and_then(|inf| inf.args.get(i).cloned()).unwrap_or_else(|| name("?"));
            inner.bound.insert(y.clone(), t);
        }
        inner
    }

    fn fresh(&mut self, span: Span, env: &Env, y: &Name) {
        if env.in_path(y) {
            self.err(span, Code::Scope, format!("variable `{y}` shadows an earlier binding"));
        }
        if self.sig.ctors.contains_key(y) || self.sig.functions.contains_key(y) {
            self.err(span, Code::Duplicate, format!("variable `{y}` clashes with a declared symbol"));
        }
    }

    fn scrutinee(&mut self, span: Span, fvars: &BTreeSet<Name>, env: &Env, s: &Term) -> Option<(Name, Name)> {
        match s {
            Term::Var(x) => {
                let t = self.infer(span, fvars, env, s)?;
                Some((x.clone(), t))
            }
            _ => {
                self.err(span, Code::Syntax, format!("only a variable can be matched, found `{s}`"));
                None
            }
        }
    }

    fn split(env: &Env, x: Option<&Name>) -> Env {
        let mut then_env = env.clone();
        if let Some(x) = x {
            then_env.bound.remove(x);
            then_env.hidden.insert(x.clone());
        }
        then_env
    }

    fn expr_body(&mut self, span: Span, fvars: &BTreeSet<Name>, env: &Env, eb: &ExprBody, ret: &Name) {
        match eb {
            ExprBody::Expr(e) => self.expect(span, fvars, env, e, ret),
            ExprBody::Match(m) => {
                let sc = self.scrutinee(span, fvars, env, &m.scrutinee);
                let base = Self::split(env, sc.as_ref().map(|(x, _)| x));
                let then_env = self.pattern(span, &base, &m.pattern, sc.as_ref().map(|(_, t)| t));
                self.expr_body(span, fvars, &then_env, &m.then, ret);
                self.expr_body(span, fvars, env, &m.els, ret);
            }
        }
    }

    fn reference(&mut self, span: Span, fvars: &BTreeSet<Name>, env: &Env, target: &Term) -> Option<Name> {
        if !matches!(target, Term::Var(_) | Term::Ctor(_, _)) {
            self.err(span, Code::TypeMismatch, format!("`{target}` is not a register or variable"));
            return None;
        }
        let t = self.infer(span, fvars, env, target)?;
        match self.sig.referent(&t) {
            Some(r) => Some(r.clone()),
            None => {
                self.err(span, Code::TypeMismatch, format!("`{target}` has type `{t}`, which is not a reference type"));
                None
            }
        }
    }

    fn call(&mut self, span: Span, fvars: &BTreeSet<Name>, env: &Env, f: &Name, args: &[Term]) {
        match self.sig.functions.get(f).cloned() {
            None => {
                self.err(span, Code::UnknownSymbol, format!("unknown behaviour `{f}`"));
            }
            Some(info) => {
                if info.ret.is_some() {
                    self.err(span, Code::Position, format!("`{f}` returns a value and cannot be used as a behaviour"));
                }
                self.args(span, fvars, env, f, &info.params, args);
            }
        }
    }

    fn behaviour(&mut self, span: Span, fvars: &BTreeSet<Name>, env: &Env, b: &Behaviour) {
        match b {
            Behaviour::Stop => {}
            Behaviour::Call(f, a) | Behaviour::Next(f, a) => self.call(span, fvars, env, f, a),
            Behaviour::Yield(b) => self.behaviour(span, fvars, env, b),
            Behaviour::Assign(a) => {
                if let Some(t) = self.reference(span, fvars, env, &a.target) {
                    self.expect(span, fvars, env, &a.value, &t);
                } else {
                    self.infer(span, fvars, env, &a.value);
                }
                self.behaviour(span, fvars, env, &a.then);
            }
            Behaviour::Read(r) => {
                let t = self.reference(span, fvars, env, &r.target);
                for br in &r.branches {
                    let inner = match &br.pattern {
                        ReadPattern::Var(y) => {
                            self.fresh(span, env, y);
                            let mut inner = env.clone();
                            inner.bound.insert(y.clone(), t.clone().unwrap_or_else(|| name("?")));
                            inner
                        }
                        ReadPattern::Ctor(p) => self.pattern(span, env, p, t.as_ref()),
                    };
                    self.behaviour(span, fvars, &inner, &br.body);
                }
                self.call(span, fvars, env, &r.default.0, &r.default.1);
            }
            Behaviour::Match(m) => {
                let sc = self.scrutinee(span, fvars, env, &m.scrutinee);
                let base = Self::split(env, sc.as_ref().map(|(x, _)| x));
                let then_env = self.pattern(span, &base, &m.pattern, sc.as_ref().map(|(_, t)| t));
                self.behaviour(span, fvars, &then_env, &m.then);
                self.behaviour(span, fvars, env, &m.els);
            }
        }
    }

    fn check_functions(&mut self) {
        for f in &self.prog.functions {
            let fvars = function_variables(f);
            let mut env = Env::default();
            for p in &f.params {
                env.bound.insert(p.name.clone(), p.ty.clone());
                if self.sig.ctors.contains_key(&p.name) || self.sig.functions.contains_key(&p.name) {
                    self.err(f.span, Code::Duplicate, format!("parameter `{}` clashes with a declared symbol", p.name));
                }
            }
            match &f.body {
                FunctionBody::Expr { ret, body } => self.expr_body(f.span, &fvars, &env, body, ret),
                FunctionBody::Beh(b) => self.behaviour(f.span, &fvars, &env, b),
            }
        }
    }

    fn check_labels(&mut self) {
        let mut vars: BTreeSet<Name> = BTreeSet::new();
        for f in &self.prog.functions {
            vars.extend(function_variables(f));
        }
        let mut labels: BTreeSet<Name> = BTreeSet::new();
        for f in &self.prog.functions {
            let Some(b) = f.behaviour() else { continue };
            for r in b.reads() {
                if !labels.insert(r.label.name.clone()) {
                    self.err(f.span, Code::Label, format!("read label `{}` is used more than once", r.label.name));
                }
                if r.label.explicit && vars.contains(&r.label.name) {
                    self.err(f.span, Code::Label, format!("read label `{}` clashes with a variable", r.label.name));
                }
            }
        }
    }

    fn check_system(&mut self) {
        for th in &self.prog.system {
            match self.sig.functions.get(&th.function).cloned() {
                None => self.err(th.span, Code::UnknownSymbol, format!("unknown behaviour `{}`", th.function)),
                Some(info) => {
                    if info.ret.is_some() {
                        self.err(th.span, Code::Position, format!("thread body `{}` is not a behaviour", th.function));
                    }
                    if info.params.len() != th.args.len() {
                        self.err(
                            th.span,
                            Code::Arity,
                            format!("`{}` expects {} argument(s) but is given {}", th.function, info.params.len(), th.args.len()),
                        );
                    } else {
                        for (v, t) in th.args.iter().zip(&info.params) {
                            self.value(th.span, v, t);
                        }
                    }
                }
            }
        }
    }

    fn symbol_known(&self, s: &str) -> bool {
        if let Some(base) = s.strip_suffix('^') {
            return self.sig.is_behaviour(base);
        }
        self.sig.functions.contains_key(s) || self.sig.ctors.contains_key(s)
    }

    fn check_annotations(&mut self, a: &Annotations) {
        for o in &a.order {
            for s in &o.symbols {
                if !self.symbol_known(s) || self.sig.ctors.contains_key(s) {
                    self.err(o.span, Code::UnknownSymbol, format!("unknown function symbol `{s}` in order"));
                }
            }
        }
        for q in &a.qi {
            if !self.symbol_known(&q.symbol) {
                self.err(q.span, Code::UnknownSymbol, format!("unknown symbol `{}` in qi", q.symbol));
            }
        }
    }
}

/// Check a parsed program, producing its signature.
pub fn typecheck(program: Program, warnings: Vec<Diagnostic>) -> Result<TypedProgram, Vec<Diagnostic>> {
    let mut c = Checker { sig: Signature::default(), diags: Vec::new(), prog: &program };
    c.build_signature();
    c.check_declarations();
    c.check_functions();
    c.check_labels();
    c.check_system();
    c.check_annotations(&program.annotations);
    let sig = c.sig;
    let mut diags = c.diags;
    if diags.is_empty() {
        Ok(TypedProgram { program, sig, warnings })
    } else {
        diags.sort_by_key(|d| (d.line, d.col));
        diags.dedup();
        let mut all = warnings;
        all.extend(diags);
        Err(all)
    }
}

/// Check annotations supplied separately against a typed program.
pub fn check_annotations(tp: &TypedProgram, a: &Annotations) -> Vec<Diagnostic> {
    let mut c = Checker { sig: tp.sig.clone(), diags: Vec::new(), prog: &tp.program };
    c.check_annotations(a);
    c.diags
}
