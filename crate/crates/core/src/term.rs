//! First-order terms: values, symbolic terms, substitutions and matching.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;

/// Interned-ish identifier. Cheap to clone and shareable across threads.
pub type Name = Arc<str>;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

/// A constructor term. Children are shared, so cloning is O(1).
#[derive(Clone)]
pub struct Value(Arc<ValueNode>);

struct ValueNode {
    head: Name,
    args: Vec<Value>,
    // saturating; recomputed exactly on overflow
    size: u128,
}

impl Value {
    pub fn new(head: Name, args: Vec<Value>) -> Value {
        let size = if args.is_empty() {
            0
        } else {
            args.iter()
                .fold(1u128, |acc, a| acc.saturating_add(a.0.size))
        };
        Value(Arc::new(ValueNode { head, args, size }))
    }

    pub fn leaf(head: &str) -> Value {
        Value::new(name(head), Vec::new())
    }

    pub fn head(&self) -> &Name {
        &self.0.head
    }

    pub fn args(&self) -> &[Value] {
        &self.0.args
    }

    pub fn arity(&self) -> usize {
        self.0.args.len()
    }

    /// |c| = 0 for nullary c, |c(v1..vn)| = 1 + sum |vi|.
    pub fn size(&self) -> BigUint {
        if self.0.size != u128::MAX {
            return BigUint::from(self.0.size);
        }
        if self.0.args.is_empty() {
            return BigUint::from(0u8);
        }
        self.0
            .args
            .iter()
            .fold(BigUint::from(1u8), |acc, a| acc + a.size())
    }

    /// Size as a machine integer, saturating at `u128::MAX`.
    pub fn size_u128(&self) -> u128 {
        self.0.size
    }

    pub fn to_term(&self) -> Term {
        Term::Val(self.clone())
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
            || (self.0.size == other.0.size
                && self.0.head == other.0.head
                && self.0.args == other.0.args)
    }
}

impl Eq for Value {}

impl std::hash::Hash for Value {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.head.hash(state);
        self.0.args.hash(state);
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Value) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Value) -> std::cmp::Ordering {
        self.0
            .head
            .cmp(&other.0.head)
            .then_with(|| self.0.args.cmp(&other.0.args))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.head)?;
        if !self.0.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.0.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Symbolic term over variables, constructors (registers included) and
/// function symbols. `Val` embeds a closed value without copying it.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Name),
    Val(Value),
    Ctor(Name, Vec<Term>),
    Fun(Name, Vec<Term>),
}

/// Whether an application head is a constructor or a function symbol.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    Ctor,
    Fun,
}

pub type Subst = BTreeMap<Name, Value>;
pub type TermSubst = BTreeMap<Name, Term>;

impl Term {
    pub fn var(x: &str) -> Term {
        Term::Var(name(x))
    }

    pub fn ctor(c: &str, args: Vec<Term>) -> Term {
        Term::Ctor(name(c), args)
    }

    pub fn fun(f: &str, args: Vec<Term>) -> Term {
        Term::Fun(name(f), args)
    }

    /// Uniform view of an application: `Val` is unfolded one level.
    pub fn app(&self) -> Option<(Head, &Name, Vec<Term>)> {
        match self {
            Term::Var(_) => None,
            Term::Val(v) => Some((
                Head::Ctor,
                v.head(),
                v.args().iter().map(Value::to_term).collect(),
            )),
            Term::Ctor(c, a) => Some((Head::Ctor, c, a.clone())),
            Term::Fun(f, a) => Some((Head::Fun, f, a.clone())),
        }
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    /// Variables in order of first occurrence, without duplicates.
    pub fn vars(&self) -> Vec<Name> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        self.collect_vars(&mut out, &mut seen);
        out
    }

    pub fn var_set(&self) -> BTreeSet<Name> {
        self.vars().into_iter().collect()
    }

    pub(crate) fn collect_vars(&self, out: &mut Vec<Name>, seen: &mut BTreeSet<Name>) {
        match self {
            Term::Var(x) => {
                if seen.insert(x.clone()) {
                    out.push(x.clone());
                }
            }
            Term::Val(_) => {}
            Term::Ctor(_, a) | Term::Fun(_, a) => {
                for t in a {
                    t.collect_vars(out, seen);
                }
            }
        }
    }

    /// Number of variable occurrences (with repetitions).
    pub fn var_occurrences(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::Val(_) => 0,
            Term::Ctor(_, a) | Term::Fun(_, a) => a.iter().map(Term::var_occurrences).sum(),
        }
    }

    /// Constructors and variables only.
    pub fn is_pattern(&self) -> bool {
        match self {
            Term::Var(_) | Term::Val(_) => true,
            Term::Ctor(_, a) => a.iter().all(Term::is_pattern),
            Term::Fun(..) => false,
        }
    }

    pub fn is_linear(&self) -> bool {
        self.vars().len() == self.var_occurrences()
    }

    pub fn is_ground(&self) -> bool {
        match self {
            Term::Var(_) => false,
            Term::Val(_) => true,
            Term::Ctor(_, a) | Term::Fun(_, a) => a.iter().all(Term::is_ground),
        }
    }

    /// The value denoted by a ground constructor term.
    pub fn to_value(&self) -> Option<Value> {
        match self {
            Term::Val(v) => Some(v.clone()),
            Term::Ctor(c, a) => {
                let args = a.iter().map(Term::to_value).collect::<Option<Vec<_>>>()?;
                Some(Value::new(c.clone(), args))
            }
            _ => None,
        }
    }

    /// Replace mapped variables by values.
    pub fn apply(&self, s: &Subst) -> Term {
        match self {
            Term::Var(x) => match s.get(x) {
                Some(v) => Term::Val(v.clone()),
                None => self.clone(),
            },
            Term::Val(_) => self.clone(),
            Term::Ctor(c, a) => {
                let args: Vec<Term> = a.iter().map(|t| t.apply(s)).collect();
                match args.iter().map(|t| match t {
                    Term::Val(v) => Some(v.clone()),
                    _ => None,
                }).collect::<Option<Vec<_>>>() {
                    Some(vs) => Term::Val(Value::new(c.clone(), vs)),
                    None => Term::Ctor(c.clone(), args),
                }
            }
            Term::Fun(f, a) => Term::Fun(f.clone(), a.iter().map(|t| t.apply(s)).collect()),
        }
    }

    /// Replace mapped variables by terms.
    pub fn substitute(&self, s: &TermSubst) -> Term {
        match self {
            Term::Var(x) => s.get(x).cloned().unwrap_or_else(|| self.clone()),
            Term::Val(_) => self.clone(),
            Term::Ctor(c, a) => Term::Ctor(c.clone(), a.iter().map(|t| t.substitute(s)).collect()),
            Term::Fun(f, a) => Term::Fun(f.clone(), a.iter().map(|t| t.substitute(s)).collect()),
        }
    }

    /// Expand embedded values into explicit constructor applications.
    pub fn unfold_values(&self) -> Term {
        match self {
            Term::Val(v) => value_as_ctor_term(v),
            Term::Var(_) => self.clone(),
            Term::Ctor(c, a) => Term::Ctor(c.clone(), a.iter().map(Term::unfold_values).collect()),
            Term::Fun(f, a) => Term::Fun(f.clone(), a.iter().map(Term::unfold_values).collect()),
        }
    }

    /// Function symbols occurring in the term, with multiplicity.
    pub fn fun_occurrences(&self, out: &mut Vec<Name>) {
        match self {
            Term::Var(_) | Term::Val(_) => {}
            Term::Ctor(_, a) => a.iter().for_each(|t| t.fun_occurrences(out)),
            Term::Fun(f, a) => {
                out.push(f.clone());
                a.iter().for_each(|t| t.fun_occurrences(out));
            }
        }
    }

    /// Syntactic equality modulo the `Val` embedding.
    pub fn same(&self, other: &Term) -> bool {
        match (self, other) {
            (Term::Var(a), Term::Var(b)) => a == b,
            (Term::Val(a), Term::Val(b)) => a == b,
            (Term::Var(_), _) | (_, Term::Var(_)) => false,
            _ => {
                let (ha, fa, aa) = self.app().expect("application");
                let (hb, fb, ab) = other.app().expect("application");
                ha == hb
                    && fa == fb
                    && aa.len() == ab.len()
                    && aa.iter().zip(ab.iter()).all(|(x, y)| x.same(y))
            }
        }
    }
}

fn value_as_ctor_term(v: &Value) -> Term {
    Term::Ctor(v.head().clone(), v.args().iter().map(value_as_ctor_term).collect())
}

fn write_app(f: &mut fmt::Formatter<'_>, head: &str, args: &[Term], force_parens: bool) -> fmt::Result {
    f.write_str(head)?;
    if !args.is_empty() || force_parens {
        f.write_str("(")?;
        for (i, a) in args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(x) => f.write_str(x),
            Term::Val(v) => write!(f, "{v}"),
            Term::Ctor(c, a) => write_app(f, c, a, false),
            Term::Fun(g, a) => write_app(f, g, a, true),
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Match a pattern (constructors and variables) against a value.
/// Repeated variables must bind equal values.
pub fn match_pattern(p: &Term, v: &Value) -> Option<Subst> {
    let mut s = Subst::new();
    if match_into(p, v, &mut s) {
        Some(s)
    } else {
        None
    }
}

fn match_into(p: &Term, v: &Value, s: &mut Subst) -> bool {
    match p {
        Term::Var(x) => match s.get(x) {
            Some(old) => old == v,
            None => {
                s.insert(x.clone(), v.clone());
                true
            }
        },
        Term::Val(w) => w == v,
        Term::Ctor(c, a) => {
            c == v.head()
                && a.len() == v.arity()
                && a.iter().zip(v.args()).all(|(pi, vi)| match_into(pi, vi, s))
        }
        Term::Fun(..) => false,
    }
}

/// Match a symbolic term against another term whose variables are rigid,
/// binding pattern variables to terms. Used for instance checks.
pub fn match_term(p: &Term, t: &Term, s: &mut TermSubst) -> bool {
    match p {
        Term::Var(x) => match s.get(x) {
            Some(old) => old.same(t),
            None => {
                s.insert(x.clone(), t.clone());
                true
            }
        },
        _ => {
            if t.is_var() {
                return false;
            }
            let (hp, fp, ap) = p.app().expect("application");
            let (ht, ft, at) = t.app().expect("application");
            hp == ht
                && fp == ft
                && ap.len() == at.len()
                && ap.iter().zip(at.iter()).all(|(x, y)| match_term(x, y, s))
        }
    }
}

/// A pattern `c(x1, ..., xn)` with pairwise distinct variables.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ShallowPattern {
    pub ctor: Name,
    pub vars: Vec<Name>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("pattern {ctor}(..) binds variable {var} more than once")]
pub struct NonLinearPattern {
    pub ctor: Name,
    pub var: Name,
}

impl ShallowPattern {
    pub fn new(ctor: Name, vars: Vec<Name>) -> Result<ShallowPattern, NonLinearPattern> {
        let mut seen = BTreeSet::new();
        for x in &vars {
            if !seen.insert(x.clone()) {
                return Err(NonLinearPattern { ctor, var: x.clone() });
            }
        }
        Ok(ShallowPattern { ctor, vars })
    }

    pub fn to_term(&self) -> Term {
        Term::Ctor(self.ctor.clone(), self.vars.iter().cloned().map(Term::Var).collect())
    }

    pub fn matches(&self, v: &Value) -> Option<Subst> {
        if v.head() != &self.ctor || v.arity() != self.vars.len() {
            return None;
        }
        Some(self.vars.iter().cloned().zip(v.args().iter().cloned()).collect())
    }
}

impl fmt::Display for ShallowPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.ctor)?;
        if !self.vars.is_empty() {
            write!(f, "({})", self.vars.join(", "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z() -> Value {
        Value::leaf("z")
    }
    fn s(v: Value) -> Value {
        Value::new(name("s"), vec![v])
    }

    #[test]
    fn sizes() {
        assert_eq!(z().size(), BigUint::from(0u8));
        assert_eq!(s(s(z())).size(), BigUint::from(2u8));
        let l = Value::new(name("cons"), vec![s(z()), Value::leaf("nil")]);
        assert_eq!(l.size(), BigUint::from(2u8));
    }

    #[test]
    fn matching() {
        let p = Term::ctor("cons", vec![Term::var("x"), Term::var("l")]);
        let v = Value::new(name("cons"), vec![z(), Value::leaf("nil")]);
        let m = match_pattern(&p, &v).unwrap();
        assert_eq!(m[&name("x")], z());
        assert_eq!(m[&name("l")], Value::leaf("nil"));
        assert!(match_pattern(&Term::ctor("s", vec![Term::var("x")]), &z()).is_none());
        let m = match_pattern(&Term::var("x"), &s(z())).unwrap();
        assert_eq!(m[&name("x")], s(z()));
    }

    #[test]
    fn substitution() {
        let mut sub = Subst::new();
        sub.insert(name("x"), z());
        assert_eq!(Term::ctor("s", vec![Term::var("x")]).apply(&sub).to_value(), Some(s(z())));
        let t = Term::fun("f", vec![Term::var("y")]);
        assert_eq!(t.apply(&Subst::new()), t);
        let mut sub = Subst::new();
        sub.insert(name("x"), s(z()));
        assert!(Term::ctor("r", vec![]).apply(&sub).same(&Term::ctor("r", vec![])));
    }

    #[test]
    fn shallow_linearity() {
        assert!(ShallowPattern::new(name("c"), vec![name("x"), name("x")]).is_err());
        assert!(ShallowPattern::new(name("c"), vec![name("x"), name("y")]).is_ok());
    }

    #[test]
    fn display() {
        let t = Term::fun("maxl", vec![Term::var("l"), Term::Val(s(z()))]);
        assert_eq!(t.to_string(), "maxl(l, s(z))");
        assert_eq!(Term::fun("halt", vec![]).to_string(), "halt()");
    }
}
