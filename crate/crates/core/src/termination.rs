//! Lexicographic path order over constraint terms, precedence search and
//! the linear refinement.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::ast::{OrderChain, OrderRel};
use crate::control_points::Constraint;
use crate::term::{Head, Name, Term};

/// Function symbols grouped into priority classes with a strict order
/// between classes. Symbols absent from the precedence are incomparable
/// with everything but themselves.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Precedence {
    class: BTreeMap<Name, usize>,
    /// Transitively closed strict order on class ids.
    above: BTreeSet<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PrecedenceError {
    #[error("precedence is cyclic: {0} is above itself")]
    Cyclic(Name),
    #[error("precedence search needs {found} symbols, above the bound of {bound}; annotate an order")]
    BoundExceeded { found: usize, bound: usize },
}

impl Precedence {
    /// Classes listed from highest to lowest, totally ordered.
    pub fn from_ranked(classes: &[Vec<Name>]) -> Precedence {
        let mut p = Precedence::default();
        for (i, cl) in classes.iter().enumerate() {
            for f in cl {
                p.class.insert(f.clone(), i);
            }
            for j in i + 1..classes.len() {
                p.above.insert((i, j));
            }
        }
        p
    }

    /// Build from `order f > g = h` chains.
    pub fn from_chains(chains: &[OrderChain]) -> Result<Precedence, PrecedenceError> {
        // union-find over `=` first
        let mut rep: BTreeMap<Name, Name> = BTreeMap::new();
        fn find(rep: &BTreeMap<Name, Name>, f: &Name) -> Name {
            let mut cur = f.clone();
            while let Some(n) = rep.get(&cur) {
                if *n == cur {
                    break;
                }
                cur = n.clone();
            }
            cur
        }
        for c in chains {
            for s in &c.symbols {
                rep.entry(s.clone()).or_insert_with(|| s.clone());
            }
        }
        for c in chains {
            for (i, r) in c.rels.iter().enumerate() {
                if *r == OrderRel::Equal {
                    let a = find(&rep, &c.symbols[i]);
                    let b = find(&rep, &c.symbols[i + 1]);
                    if a != b {
                        rep.insert(a, b);
                    }
                }
            }
        }
        let mut ids: BTreeMap<Name, usize> = BTreeMap::new();
        let mut p = Precedence::default();
        let syms: Vec<Name> = rep.keys().cloned().collect();
        for s in &syms {
            let r = find(&rep, s);
            let n = ids.len();
            let id = *ids.entry(r).or_insert(n);
            p.class.insert(s.clone(), id);
        }
        for c in chains {
            for (i, r) in c.rels.iter().enumerate() {
                if *r == OrderRel::Greater {
                    p.above.insert((p.class[&c.symbols[i]], p.class[&c.symbols[i + 1]]));
                }
            }
        }
        loop {
            let extra: Vec<(usize, usize)> = p
                .above
                .iter()
                .flat_map(|&(a, b)| p.above.iter().filter(move |&&(c, _)| c == b).map(move |&(_, d)| (a, d)))
                .filter(|e| !p.above.contains(e))
                .collect();
            if extra.is_empty() {
                break;
            }
            p.above.extend(extra);
        }
        if let Some(&(a, _)) = p.above.iter().find(|(a, b)| a == b) {
            let f = p.class.iter().find(|(_, &c)| c == a).unwrap().0.clone();
            return Err(PrecedenceError::Cyclic(f));
        }
        Ok(p)
    }

    pub fn greater(&self, f: &str, g: &str) -> bool {
        match (self.class.get(f), self.class.get(g)) {
            (Some(&a), Some(&b)) => self.above.contains(&(a, b)),
            _ => false,
        }
    }

    /// Same priority class (every symbol is equivalent to itself).
    pub fn equivalent(&self, f: &str, g: &str) -> bool {
        f == g
            || match (self.class.get(f), self.class.get(g)) {
                (Some(a), Some(b)) => a == b,
                _ => false,
            }
    }

    /// Identifier of the priority class of `f`, if `f` is ranked.
    pub fn class_of(&self, f: &str) -> Option<usize> {
        self.class.get(f).copied()
    }

    pub fn symbols(&self) -> impl Iterator<Item = &Name> {
        self.class.keys()
    }
}

impl fmt::Display for Precedence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut classes: BTreeMap<usize, Vec<&Name>> = BTreeMap::new();
        for (s, &c) in &self.class {
            classes.entry(c).or_default().push(s);
        }
        // order classes by the number of classes strictly above them
        let mut order: Vec<(usize, usize)> =
            classes.keys().map(|&c| (self.above.iter().filter(|(_, b)| *b == c).count(), c)).collect();
        order.sort();
        let parts: Vec<String> = order
            .iter()
            .map(|(_, c)| classes[c].iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" = "))
            .collect();
        if parts.is_empty() {
            f.write_str("(empty)")
        } else {
            f.write_str(&parts.join(" > "))
        }
    }
}

/// `s >= t`: syntactically equal or strictly greater.
fn geq(s: &Term, t: &Term, p: &Precedence) -> bool {
    s.same(t) || lpo_greater(s, t, p)
}

/// The path order: function symbols above constructors, constructors
/// mutually incomparable, lexicographic arguments for function symbols of
/// equal priority and product order for equal constructors.
pub fn lpo_greater(s: &Term, t: &Term, p: &Precedence) -> bool {
    let Some((hs, f, ss)) = s.app() else {
        return false;
    };
    if ss.iter().any(|si| geq(si, t, p)) {
        return true;
    }
    let Some((ht, g, ts)) = t.app() else {
        return false;
    };
    match (hs, ht) {
        (Head::Fun, Head::Ctor) => ts.iter().all(|tj| lpo_greater(s, tj, p)),
        (Head::Fun, Head::Fun) => {
            if p.greater(f, g) {
                ts.iter().all(|tj| lpo_greater(s, tj, p))
            } else if p.equivalent(f, g) && ss.len() == ts.len() {
                lex_greater(&ss, &ts, p) && ts.iter().all(|tj| lpo_greater(s, tj, p))
            } else {
                false
            }
        }
        (Head::Ctor, Head::Ctor) => {
            f == g
                && ss.len() == ts.len()
                && ss.iter().zip(&ts).all(|(a, b)| geq(a, b, p))
                && ss.iter().zip(&ts).any(|(a, b)| !a.same(b))
        }
        (Head::Ctor, Head::Fun) => false,
    }
}

fn lex_greater(ss: &[Term], ts: &[Term], p: &Precedence) -> bool {
    for (a, b) in ss.iter().zip(ts) {
        if a.same(b) {
            continue;
        }
        return lpo_greater(a, b, p);
    }
    false
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TerminationVerdict {
    pub pass: bool,
    pub precedence: Precedence,
    /// First index-0 constraint that does not decrease.
    pub violated: Option<Constraint>,
    pub linear: bool,
}

impl TerminationVerdict {
    pub fn render(&self) -> String {
        match &self.violated {
            None => format!(
                "lpo: pass (precedence {})\nlinear-lpo: {}\n",
                self.precedence, self.linear
            ),
            Some(c) => format!("lpo: fail, constraint {c} does not decrease under {}\n", self.precedence),
        }
    }
}

fn index0(cs: &[Constraint]) -> impl Iterator<Item = &Constraint> {
    cs.iter().filter(|c| c.index == 0)
}

pub fn check_termination(cs: &[Constraint], prec: &Precedence) -> TerminationVerdict {
    let violated = index0(cs).find(|c| !lpo_greater(&c.lhs, &c.rhs, prec)).cloned();
    let pass = violated.is_none();
    TerminationVerdict {
        pass,
        precedence: prec.clone(),
        violated,
        linear: pass && check_linear_lpo(cs, prec),
    }
}

fn head_symbol(t: &Term) -> Option<&Name> {
    match t {
        Term::Fun(f, _) => Some(f),
        _ => None,
    }
}

/// At most one right-hand function symbol shares the priority of the
/// left-hand head, for every index-0 constraint.
pub fn check_linear_lpo(cs: &[Constraint], prec: &Precedence) -> bool {
    index0(cs).all(|c| {
        let Some(f) = head_symbol(&c.lhs) else { return true };
        let mut occ = Vec::new();
        c.rhs.fun_occurrences(&mut occ);
        occ.iter().filter(|g| prec.equivalent(f, g)).count() <= 1
    })
}

pub const DEFAULT_SEARCH_BOUND: usize = 8;

/// Function symbols occurring in index-0 constraints, sorted.
pub fn constraint_symbols(cs: &[Constraint]) -> Vec<Name> {
    let mut set = BTreeSet::new();
    for c in index0(cs) {
        let mut occ = Vec::new();
        c.lhs.fun_occurrences(&mut occ);
        c.rhs.fun_occurrences(&mut occ);
        set.extend(occ);
    }
    set.into_iter().collect()
}

/// First precedence, fewest classes first, under which every index-0
/// constraint decreases.
pub fn search_precedence(cs: &[Constraint], bound: usize) -> Result<Option<Precedence>, PrecedenceError> {
    let syms = constraint_symbols(cs);
    if syms.len() > bound {
        return Err(PrecedenceError::BoundExceeded { found: syms.len(), bound });
    }
    if syms.is_empty() {
        return Ok(Some(Precedence::default()));
    }
    let pos: BTreeMap<&Name, usize> = syms.iter().enumerate().map(|(i, s)| (s, i)).collect();
    // caller must not sit below any callee
    let mut not_below: Vec<(usize, usize)> = Vec::new();
    for c in index0(cs) {
        if let Some(f) = head_symbol(&c.lhs) {
            let mut occ = Vec::new();
            c.rhs.fun_occurrences(&mut occ);
            for g in occ {
                not_below.push((pos[f], pos[&g]));
            }
        }
    }
    let n = syms.len();
    for k in 1..=n {
        let mut rank = vec![usize::MAX; n];
        let mut found = None;
        enumerate(0, k, &mut rank, &not_below, &mut |rank| {
            let classes: Vec<Vec<Name>> =
                (0..k).map(|c| (0..n).filter(|&i| rank[i] == c).map(|i| syms[i].clone()).collect()).collect();
            let prec = Precedence::from_ranked(&classes);
            if index0(cs).all(|c| lpo_greater(&c.lhs, &c.rhs, &prec)) {
                found = Some(prec);
                true
            } else {
                false
            }
        });
        if found.is_some() {
            return Ok(found);
        }
    }
    Ok(None)
}

/// Surjective rank vectors onto `0..k` (0 = highest), lexicographically.
fn enumerate(
    i: usize,
    k: usize,
    rank: &mut Vec<usize>,
    not_below: &[(usize, usize)],
    visit: &mut dyn FnMut(&[usize]) -> bool,
) -> bool {
    let n = rank.len();
    if i == n {
        let used: BTreeSet<usize> = rank.iter().copied().collect();
        return used.len() == k && visit(rank);
    }
    for r in 0..k {
        rank[i] = r;
        let ok = not_below.iter().all(|&(f, g)| {
            let (rf, rg) = (rank[f], rank[g]);
            f > i || g > i || rf <= rg
        });
        if ok && enumerate(i + 1, k, rank, not_below, visit) {
            return true;
        }
    }
    rank[i] = usize::MAX;
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::name;

    fn v(x: &str) -> Term {
        Term::var(x)
    }
    fn s(t: Term) -> Term {
        Term::ctor("s", vec![t])
    }

    #[test]
    fn subterm_and_variables() {
        let p = Precedence::default();
        assert!(lpo_greater(&s(v("x")), &v("x"), &p));
        assert!(!lpo_greater(&v("x"), &s(v("x")), &p));
        assert!(!lpo_greater(&v("x"), &v("x"), &p));
    }

    #[test]
    fn maxl_decreases_lexicographically() {
        let p = Precedence::from_ranked(&[vec![name("maxl")], vec![name("max")]]);
        let lhs = Term::fun("maxl", vec![Term::ctor("cons", vec![v("y"), v("l'")]), v("x")]);
        let rhs = Term::fun("maxl", vec![v("l'"), Term::fun("max", vec![v("x"), v("y")])]);
        assert!(lpo_greater(&lhs, &rhs, &p));
        assert!(!lpo_greater(&rhs, &lhs, &p));
    }

    #[test]
    fn constructors_use_product_order() {
        let p = Precedence::default();
        let a = Term::ctor("c", vec![s(v("x")), v("y")]);
        let b = Term::ctor("c", vec![v("x"), v("y")]);
        assert!(lpo_greater(&a, &b, &p));
        let d = Term::ctor("d", vec![v("x"), v("y")]);
        assert!(!lpo_greater(&a, &d, &p));
    }

    #[test]
    fn chains_build_transitive_classes() {
        let chain = OrderChain {
            symbols: vec![name("f"), name("g"), name("h"), name("k")],
            rels: vec![OrderRel::Greater, OrderRel::Equal, OrderRel::Greater],
            span: Default::default(),
        };
        let p = Precedence::from_chains(&[chain]).unwrap();
        assert!(p.greater("f", "k"));
        assert!(p.equivalent("g", "h"));
        assert!(!p.greater("g", "h"));
        assert_eq!(p.to_string(), "f > g = h > k");
    }

    #[test]
    fn cyclic_chain_is_rejected() {
        let chain = OrderChain {
            symbols: vec![name("f"), name("g"), name("f")],
            rels: vec![OrderRel::Greater, OrderRel::Greater],
            span: Default::default(),
        };
        assert!(matches!(Precedence::from_chains(&[chain]), Err(PrecedenceError::Cyclic(_))));
    }
}
