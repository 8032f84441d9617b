//! Quasi-interpretations: max-plus assignments, constraint checking,
//! bounded synthesis and size bounds.

pub mod maxplus;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ast::{Annotations, QiExpr};
use crate::control_points::{hat, Constraint};
use crate::frontend::Signature;
use crate::term::{name, Name, Term, Value};
pub use maxplus::{q, Affine, MaxPlus, Q};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QiError {
    #[error("no quasi-interpretation given for `{0}`")]
    Uncovered(Name),
    #[error("`{symbol}`: {reason}")]
    Invalid { symbol: Name, reason: String },
    #[error("synthesis budget exhausted after {tried} candidate checks")]
    BudgetExceeded { tried: u64 },
}

/// Positional parameter name `x{i}` (1-based).
pub fn param(i: usize) -> Name {
    name(&format!("x{i}"))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolQi {
    pub arity: usize,
    /// Over the variables `x1..xn`.
    pub poly: MaxPlus,
}

/// Quasi-interpretation of constructors and function symbols.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment {
    pub symbols: BTreeMap<Name, SymbolQi>,
    /// Arity of every constructor; constructors without an explicit entry
    /// get `1 + x1 + ... + xn` (0 when nullary).
    pub ctor_arity: BTreeMap<Name, usize>,
}

fn qi_expr(e: &QiExpr) -> MaxPlus {
    match e {
        QiExpr::Const(c) => MaxPlus::constant(c.clone()),
        QiExpr::Var(i) => MaxPlus::var(param(*i)),
        QiExpr::Add(ts) => ts.iter().map(qi_expr).reduce(|a, b| a.add(&b)).unwrap_or_else(|| MaxPlus::constant(q(0))),
        QiExpr::Scale(c, e) => qi_expr(e).scale(c),
        QiExpr::Max(ts) => ts.iter().map(qi_expr).reduce(|a, b| a.max(&b)).unwrap_or_else(|| MaxPlus::constant(q(0))),
    }
}

pub fn default_ctor(arity: usize, d: i64) -> MaxPlus {
    if arity == 0 {
        return MaxPlus::constant(q(0));
    }
    (1..=arity).fold(MaxPlus::constant(q(d)), |acc, i| acc.add(&MaxPlus::var(param(i))))
}

impl Assignment {
    pub fn new(sig: &Signature) -> Assignment {
        Assignment {
            symbols: BTreeMap::new(),
            ctor_arity: sig.ctors.iter().map(|(c, info)| (c.clone(), info.args.len())).collect(),
        }
    }

    /// Read `qi` declarations; arities come from the signature
    /// (behaviours get the extra label parameters of `y_hat`).
    pub fn from_annotations(
        sig: &Signature,
        a: &Annotations,
        arity_of: &dyn Fn(&str) -> Option<usize>,
    ) -> Result<Assignment, QiError> {
        let mut q = Assignment::new(sig);
        for d in &a.qi {
            let arity = arity_of(&d.symbol).ok_or_else(|| QiError::Invalid {
                symbol: d.symbol.clone(),
                reason: "unknown symbol".into(),
            })?;
            q.set(d.symbol.clone(), arity, qi_expr(&d.expr))?;
        }
        Ok(q)
    }

    /// Install `poly` for `symbol` after checking the shape conditions.
    pub fn set(&mut self, symbol: Name, arity: usize, poly: MaxPlus) -> Result<(), QiError> {
        let invalid = |reason: String| QiError::Invalid { symbol: symbol.clone(), reason };
        if let Some(x) = poly.vars().into_iter().find(|x| !(1..=arity).any(|i| param(i) == *x)) {
            return Err(invalid(format!("variable {x} out of range for arity {arity}")));
        }
        if poly.terms().iter().any(|t| t.constant.is_negative() || t.coeffs.values().any(|c| c.is_negative())) {
            return Err(invalid("negative coefficient".into()));
        }
        if self.ctor_arity.contains_key(&symbol) {
            let ok = if arity == 0 {
                poly.terms().len() == 1 && poly.terms()[0].constant.is_zero() && poly.terms()[0].coeffs.is_empty()
            } else {
                poly.terms().len() == 1 && {
                    let t = &poly.terms()[0];
                    t.constant >= q(1) && (1..=arity).all(|i| t.coeff(&param(i)).is_one()) && t.coeffs.len() == arity
                }
            };
            if !ok {
                return Err(invalid(if arity == 0 {
                    "a constant constructor must be interpreted as 0".into()
                } else {
                    "a constructor must be interpreted as d + x1 + ... + xn with d >= 1".into()
                }));
            }
        } else {
            for i in 1..=arity {
                if !poly.terms().iter().any(|t| t.coeff(&param(i)) >= q(1)) {
                    return Err(invalid(format!("not above its argument x{i}")));
                }
            }
        }
        self.symbols.insert(symbol, SymbolQi { arity, poly });
        Ok(())
    }

    pub fn get(&self, f: &str) -> Result<MaxPlus, QiError> {
        if let Some(s) = self.symbols.get(f) {
            return Ok(s.poly.clone());
        }
        if let Some(&n) = self.ctor_arity.get(f) {
            return Ok(default_ctor(n, 1));
        }
        Err(QiError::Uncovered(name(f)))
    }

    /// Largest constructor constant, the δ with `q_v <= δ |v|`.
    pub fn delta(&self) -> Q {
        self.ctor_arity
            .keys()
            .filter_map(|c| self.get(c).ok())
            .map(|p| p.terms()[0].constant.clone())
            .fold(q(1), |a, b| a.max(b))
    }

    /// `q_v` for a value, without recursion on the value's depth.
    pub fn value(&self, v: &Value) -> Result<Q, QiError> {
        let mut total = q(0);
        let mut cache: BTreeMap<Name, Q> = BTreeMap::new();
        let mut stack = vec![v.clone()];
        while let Some(w) = stack.pop() {
            if w.arity() > 0 {
                let d = match cache.get(w.head()) {
                    Some(d) => d.clone(),
                    None => {
                        let d = self.get(w.head())?.terms()[0].constant.clone();
                        cache.insert(w.head().clone(), d.clone());
                        d
                    }
                };
                total += d;
                stack.extend(w.args().iter().cloned());
            }
        }
        Ok(total)
    }

    pub fn render(&self) -> String {
        self.symbols.iter().map(|(f, s)| format!("qi {f} = {}\n", s.poly)).collect()
    }
}

/// The extension of an assignment to a term, as a normal form over the
/// term's variables.
pub fn extend(qa: &Assignment, t: &Term) -> Result<MaxPlus, QiError> {
    match t {
        Term::Var(x) => Ok(MaxPlus::var(x.clone())),
        Term::Val(v) => Ok(MaxPlus::constant(qa.value(v)?)),
        Term::Ctor(f, args) | Term::Fun(f, args) => {
            let fq = qa.get(f)?;
            let mut m = BTreeMap::new();
            for (i, a) in args.iter().enumerate() {
                m.insert(param(i + 1), extend(qa, a)?);
            }
            Ok(fq.compose(&m))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Refuted(BTreeMap<Name, Q>),
    Unknown,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Holds => f.write_str("holds"),
            Verdict::Unknown => f.write_str("unknown"),
            Verdict::Refuted(p) => {
                let pts: Vec<String> = p.iter().map(|(x, v)| format!("{x}={v}")).collect();
                write!(f, "refuted at {}", if pts.is_empty() { "the origin".to_string() } else { pts.join(", ") })
            }
        }
    }
}

pub const SAMPLE_SEED: u64 = 0x5eed;
const SAMPLES: usize = 256;

/// `p >= q` on the nonnegative orthant: domination proves it, sampling
/// may refute it.
pub fn check_inequality(p: &MaxPlus, qq: &MaxPlus) -> Verdict {
    check_inequality_seeded(p, qq, SAMPLE_SEED)
}

/// As [`check_inequality`], drawing refutation samples from `seed`.
pub fn check_inequality_seeded(p: &MaxPlus, qq: &MaxPlus, seed: u64) -> Verdict {
    if p.dominates(qq) {
        return Verdict::Holds;
    }
    let vars: Vec<Name> = p.vars().union(&qq.vars()).cloned().collect();
    let refutes = |pt: &BTreeMap<Name, Q>| qq.eval(pt) > p.eval(pt);
    let corners = [q(0), q(1), q(1000)];
    if vars.len() <= 6 {
        let total = corners.len().pow(vars.len() as u32);
        for mut code in 0..total {
            let mut pt = BTreeMap::new();
            for x in &vars {
                pt.insert(x.clone(), corners[code % corners.len()].clone());
                code /= corners.len();
            }
            if refutes(&pt) {
                return Verdict::Refuted(pt);
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..SAMPLES {
        let pt: BTreeMap<Name, Q> = vars
            .iter()
            .map(|x| (x.clone(), Q::new(BigInt::from(rng.gen_range(0..10_000u32)), BigInt::from(100))))
            .collect();
        if refutes(&pt) {
            return Verdict::Refuted(pt);
        }
    }
    Verdict::Unknown
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintCheck {
    pub constraint: Constraint,
    pub lhs: MaxPlus,
    pub rhs: MaxPlus,
    pub verdict: Verdict,
}

pub fn check_assignment(qa: &Assignment, cs: &[Constraint]) -> Result<Vec<ConstraintCheck>, QiError> {
    check_assignment_seeded(qa, cs, SAMPLE_SEED)
}

pub fn check_assignment_seeded(qa: &Assignment, cs: &[Constraint], seed: u64) -> Result<Vec<ConstraintCheck>, QiError> {
    cs.iter()
        .map(|c| {
            let lhs = extend(qa, &c.lhs)?;
            let rhs = extend(qa, &c.rhs)?;
            let verdict = check_inequality_seeded(&lhs, &rhs, seed);
            Ok(ConstraintCheck { constraint: c.clone(), lhs, rhs, verdict })
        })
        .collect()
}

pub fn all_hold(checks: &[ConstraintCheck]) -> bool {
    checks.iter().all(|c| c.verdict == Verdict::Holds)
}

/// Candidate interpretations of a function symbol, smallest first.
pub fn templates(arity: usize) -> Vec<MaxPlus> {
    let mut out = Vec::new();
    if arity == 0 {
        return (0..=2).map(|b| MaxPlus::constant(q(b))).collect();
    }
    for b in 0..=2 {
        let m = (1..=arity).map(|i| MaxPlus::var(param(i))).reduce(|a, b| a.max(&b)).unwrap();
        out.push(m.add(&MaxPlus::constant(q(b))));
    }
    for b in 0..=2 {
        for mask in 0..(1u32 << arity) {
            let mut a = Affine::constant(q(b));
            for i in 1..=arity {
                let k = if mask & (1 << (i - 1)) != 0 { 2 } else { 1 };
                a.coeffs.insert(param(i), q(k));
            }
            let m = MaxPlus::from_terms(vec![a]);
            if !out.contains(&m) {
                out.push(m);
            }
        }
    }
    out
}

pub const DEFAULT_BUDGET: u64 = 200_000;

fn symbols_of(t: &Term, out: &mut BTreeMap<Name, usize>, funs: bool) {
    match t {
        Term::Var(_) => {}
        Term::Val(v) => {
            if !funs {
                let mut stack = vec![v.clone()];
                while let Some(w) = stack.pop() {
                    out.insert(w.head().clone(), w.arity());
                    stack.extend(w.args().iter().cloned());
                }
            }
        }
        Term::Ctor(c, a) => {
            if !funs {
                out.insert(c.clone(), a.len());
            }
            a.iter().for_each(|x| symbols_of(x, out, funs));
        }
        Term::Fun(f, a) => {
            if funs {
                out.insert(f.clone(), a.len());
            }
            a.iter().for_each(|x| symbols_of(x, out, funs));
        }
    }
}

/// Bounded template search. `extra` lists symbols (with arities) that must
/// be interpreted even if no constraint mentions them.
pub fn synthesize(
    sig: &Signature,
    cs: &[Constraint],
    extra: &[(Name, usize)],
    budget: u64,
) -> Result<Assignment, QiError> {
    let mut funs = BTreeMap::new();
    let mut ctors = BTreeMap::new();
    for c in cs {
        symbols_of(&c.lhs, &mut funs, true);
        symbols_of(&c.rhs, &mut funs, true);
        symbols_of(&c.lhs, &mut ctors, false);
        symbols_of(&c.rhs, &mut ctors, false);
    }
    for (f, n) in extra {
        funs.entry(f.clone()).or_insert(*n);
    }
    let order = callee_first(cs, &funs);
    let nonnullary: Vec<Name> = ctors.iter().filter(|(_, &n)| n > 0).map(|(c, _)| c.clone()).collect();
    let mut tried = 0u64;
    // constructor constants: all 1 first, then raise one at a time
    let mut ctor_choices: Vec<BTreeSet<Name>> = vec![BTreeSet::new()];
    ctor_choices.extend(nonnullary.iter().map(|c| BTreeSet::from([c.clone()])));
    if nonnullary.len() > 1 {
        ctor_choices.push(nonnullary.iter().cloned().collect());
    }
    for raised in ctor_choices {
        let mut base = Assignment::new(sig);
        for c in &nonnullary {
            let d = if raised.contains(c) { 2 } else { 1 };
            base.set(c.clone(), ctors[c], default_ctor(ctors[c], d))?;
        }
        if let Some(a) = search(&base, cs, &order, &funs, 0, &mut tried, budget)? {
            return Ok(a);
        }
    }
    Err(QiError::BudgetExceeded { tried })
}

/// Symbols ordered so that callees come before their callers.
fn callee_first(cs: &[Constraint], funs: &BTreeMap<Name, usize>) -> Vec<Name> {
    let mut deps: BTreeMap<Name, BTreeSet<Name>> = funs.keys().map(|f| (f.clone(), BTreeSet::new())).collect();
    for c in cs {
        if let Term::Fun(f, _) = &c.lhs {
            let mut occ = Vec::new();
            c.rhs.fun_occurrences(&mut occ);
            deps.entry(f.clone()).or_default().extend(occ.into_iter().filter(|g| g != f));
        }
    }
    let mut order = Vec::new();
    let mut done = BTreeSet::new();
    fn visit(f: &Name, deps: &BTreeMap<Name, BTreeSet<Name>>, done: &mut BTreeSet<Name>, order: &mut Vec<Name>) {
        if !done.insert(f.clone()) {
            return;
        }
        for g in deps.get(f).into_iter().flatten() {
            visit(g, deps, done, order);
        }
        order.push(f.clone());
    }
    for f in funs.keys() {
        visit(f, &deps, &mut done, &mut order);
    }
    order
}

fn constraint_funs(c: &Constraint) -> BTreeSet<Name> {
    let mut occ = Vec::new();
    c.lhs.fun_occurrences(&mut occ);
    c.rhs.fun_occurrences(&mut occ);
    occ.into_iter().collect()
}

fn search(
    current: &Assignment,
    cs: &[Constraint],
    order: &[Name],
    funs: &BTreeMap<Name, usize>,
    k: usize,
    tried: &mut u64,
    budget: u64,
) -> Result<Option<Assignment>, QiError> {
    if k == order.len() {
        return Ok(Some(current.clone()));
    }
    let f = &order[k];
    let assigned: BTreeSet<Name> = order[..=k].iter().cloned().collect();
    let relevant: Vec<&Constraint> = cs
        .iter()
        .filter(|c| {
            let fs = constraint_funs(c);
            fs.contains(f) && fs.is_subset(&assigned)
        })
        .collect();
    for t in templates(funs[f]) {
        if *tried >= budget {
            return Err(QiError::BudgetExceeded { tried: *tried });
        }
        *tried += 1;
        let mut next = current.clone();
        next.set(f.clone(), funs[f], t)?;
        let ok = relevant.iter().all(|c| {
            matches!((extend(&next, &c.lhs), extend(&next, &c.rhs)), (Ok(l), Ok(r)) if l.dominates(&r))
        });
        if ok {
            if let Some(a) = search(&next, cs, order, funs, k + 1, tried, budget)? {
                return Ok(Some(a));
            }
        }
    }
    Ok(None)
}

/// Unary `h(x) = max_i q_fi(x, ..., x)`.
pub fn diagonal(qa: &Assignment, fs: &[Name]) -> Result<MaxPlus, QiError> {
    let x = name("x");
    let mut h: Option<MaxPlus> = None;
    for f in fs {
        let s = qa.symbols.get(f).ok_or_else(|| QiError::Uncovered(f.clone()))?;
        let args: BTreeMap<Name, MaxPlus> = (1..=s.arity).map(|i| (param(i), MaxPlus::var(x.clone()))).collect();
        let d = s.poly.compose(&args);
        h = Some(match h {
            None => d,
            Some(a) => a.max(&d),
        });
    }
    Ok(h.unwrap_or_else(|| MaxPlus::var(x)))
}

/// A thread at the beginning of an instant: its function and parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThreadStart {
    pub function: Name,
    pub args: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SizeBound {
    pub threads: usize,
    pub reads: usize,
    pub c: Q,
    pub h: MaxPlus,
    pub bound: Q,
}

impl SizeBound {
    pub fn render(&self) -> String {
        format!(
            "size-bound: h(x) = {}, c = {}, n = {}, m = {}, h^{}(c) = {}\n",
            self.h,
            self.c,
            self.threads,
            self.reads,
            self.threads * self.reads + 1,
            self.bound
        )
    }
}

/// `h^(n*m+1)(c)`, where `c` bounds the quasi-interpretations of the
/// initial parameters and the register defaults.
pub fn size_bound(
    qa: &Assignment,
    threads: &[ThreadStart],
    defaults: &[Value],
    reads: usize,
) -> Result<SizeBound, QiError> {
    let mut c = q(0);
    for t in threads {
        for v in &t.args {
            c = c.max(qa.value(v)?);
        }
    }
    for v in defaults {
        c = c.max(qa.value(v)?);
    }
    let mut fs: Vec<Name> = threads.iter().map(|t| hat(&t.function)).collect();
    fs.sort();
    fs.dedup();
    let h = diagonal(qa, &fs)?;
    let n = threads.len();
    let x = name("x");
    let mut b = c.clone();
    for _ in 0..n * reads + 1 {
        b = h.eval(&[(x.clone(), b)].into_iter().collect());
    }
    Ok(SizeBound { threads: n, reads, c, h, bound: b })
}

/// Space bound for one instant from an LPO proof and a quasi-interpretation:
/// `P = n * (1 + D) * H * B + R * B` where `B` is the value size bound,
/// `D = sum over priority classes of expression functions of (B + 1)^k`
/// (k the largest arity in the class) bounds the nesting of calls, `H` is
/// the largest operand-stack height and `R` the number of registers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpaceBound {
    pub threads: usize,
    pub registers: usize,
    pub stack_height: usize,
    /// Largest arity of each priority class of expression functions.
    pub class_arities: Vec<usize>,
    pub value_bound: Q,
    pub depth: BigInt,
    pub bound: BigInt,
}

pub fn space_bound(
    threads: usize,
    registers: usize,
    stack_height: usize,
    class_arities: Vec<usize>,
    value_bound: &Q,
) -> SpaceBound {
    let b = value_bound.ceil().to_integer();
    let depth: BigInt = class_arities.iter().map(|&k| num_traits::pow(&b + 1, k)).sum();
    let bound = BigInt::from(threads) * (BigInt::one() + &depth) * BigInt::from(stack_height) * &b
        + BigInt::from(registers) * &b;
    SpaceBound { threads, registers, stack_height, class_arities, value_bound: value_bound.clone(), depth, bound }
}

impl SpaceBound {
    pub fn render(&self) -> String {
        let d: Vec<String> = self.class_arities.iter().map(|k| format!("(B+1)^{k}")).collect();
        let d = if d.is_empty() { "0".to_string() } else { d.join(" + ") };
        format!(
            "space-bound: P(B) = {} * (1 + {d}) * {} * B + {} * B, B = {}, P = {}\n",
            self.threads, self.stack_height, self.registers, self.value_bound, self.bound
        )
    }

    pub fn bound_u128(&self) -> Option<u128> {
        self.bound.to_u128()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend;

    fn sig() -> Signature {
        frontend::load("type nat = z || s of nat\ntype list = nil || cons of (nat, list)").unwrap().sig
    }

    #[test]
    fn values_are_measured_by_constructor_constants() {
        let qa = Assignment::new(&sig());
        let two = Value::new(name("s"), vec![Value::new(name("s"), vec![Value::leaf("z")])]);
        assert_eq!(extend(&qa, &two.to_term()).unwrap(), MaxPlus::constant(q(2)));
    }

    #[test]
    fn constructor_shapes_are_enforced() {
        let mut qa = Assignment::new(&sig());
        assert!(qa.set(name("s"), 1, MaxPlus::var(param(1))).is_err());
        assert!(qa.set(name("z"), 0, MaxPlus::constant(q(1))).is_err());
        assert!(qa.set(name("s"), 1, default_ctor(1, 2)).is_ok());
        assert!(qa.set(name("f"), 2, MaxPlus::var(param(1))).is_err());
    }

    #[test]
    fn inequality_verdicts() {
        let x = MaxPlus::var(name("x"));
        let y = MaxPlus::var(name("y"));
        assert_eq!(check_inequality(&x.add(&y), &x.max(&y)), Verdict::Holds);
        let v = check_inequality(&x, &x.add(&MaxPlus::constant(q(1))));
        assert!(matches!(v, Verdict::Refuted(_)));
        let half = x.add(&y).scale(&Q::new(1.into(), 2.into()));
        assert_eq!(check_inequality(&x.max(&y), &half), Verdict::Unknown);
    }

    #[test]
    fn template_family_sizes() {
        assert_eq!(templates(0).len(), 3);
        // 3 max forms plus 3 * 2 sums, where max and sum coincide for arity one
        assert_eq!(templates(1).len(), 3 + 6 - 3);
        assert_eq!(templates(2).len(), 3 + 12);
    }

    #[test]
    fn space_bound_formula() {
        let sb = space_bound(2, 1, 3, vec![2, 1], &q(4));
        assert_eq!(sb.depth, BigInt::from(25 + 5));
        assert_eq!(sb.bound, BigInt::from(2 * 31 * 3 * 4 + 4));
    }
}
