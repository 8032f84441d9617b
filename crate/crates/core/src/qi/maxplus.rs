//! Max-plus polynomials: maxima of affine forms with nonnegative rational
//! coefficients.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::term::Name;

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    BigRational::from_integer(n.into())
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Affine {
    pub constant: Q,
    /// Zero coefficients are never stored.
    pub coeffs: BTreeMap<Name, Q>,
}

impl Affine {
    pub fn constant(c: Q) -> Affine {
        Affine { constant: c, coeffs: BTreeMap::new() }
    }

    pub fn var(x: Name) -> Affine {
        Affine { constant: Q::zero(), coeffs: [(x, Q::one())].into_iter().collect() }
    }

    pub fn coeff(&self, x: &str) -> Q {
        self.coeffs.get(x).cloned().unwrap_or_else(Q::zero)
    }

    pub fn add(&self, o: &Affine) -> Affine {
        let mut r = self.clone();
        r.constant += &o.constant;
        for (x, c) in &o.coeffs {
            *r.coeffs.entry(x.clone()).or_insert_with(Q::zero) += c;
        }
        r
    }

    pub fn scale(&self, k: &Q) -> Affine {
        if k.is_zero() {
            return Affine::constant(Q::zero());
        }
        Affine {
            constant: &self.constant * k,
            coeffs: self.coeffs.iter().map(|(x, c)| (x.clone(), c * k)).collect(),
        }
    }

    /// Coefficientwise `self >= o`, which implies `self(p) >= o(p)` on
    /// the nonnegative orthant.
    pub fn dominates(&self, o: &Affine) -> bool {
        self.constant >= o.constant && o.coeffs.iter().all(|(x, c)| &self.coeff(x) >= c)
    }

    pub fn eval(&self, point: &BTreeMap<Name, Q>) -> Q {
        let mut v = self.constant.clone();
        for (x, c) in &self.coeffs {
            if let Some(p) = point.get(x) {
                v += c * p;
            }
        }
        v
    }
}

impl fmt::Display for Affine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        for (x, c) in &self.coeffs {
            if c.is_one() {
                parts.push(x.to_string());
            } else {
                parts.push(format!("{c}*{x}"));
            }
        }
        if !self.constant.is_zero() || parts.is_empty() {
            parts.push(self.constant.to_string());
        }
        f.write_str(&parts.join(" + "))
    }
}

/// `max` of a nonempty set of affine forms, kept free of dominated members.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MaxPlus {
    terms: Vec<Affine>,
}

impl MaxPlus {
    pub fn from_terms(terms: Vec<Affine>) -> MaxPlus {
        assert!(!terms.is_empty(), "max of nothing");
        let mut m = MaxPlus { terms: Vec::new() };
        for t in terms {
            m.insert(t);
        }
        m
    }

    fn insert(&mut self, t: Affine) {
        if self.terms.iter().any(|u| u.dominates(&t)) {
            return;
        }
        self.terms.retain(|u| !t.dominates(u));
        self.terms.push(t);
        self.terms.sort();
    }

    pub fn constant(c: Q) -> MaxPlus {
        MaxPlus { terms: vec![Affine::constant(c)] }
    }

    pub fn var(x: Name) -> MaxPlus {
        MaxPlus { terms: vec![Affine::var(x)] }
    }

    pub fn terms(&self) -> &[Affine] {
        &self.terms
    }

    pub fn vars(&self) -> BTreeSet<Name> {
        self.terms.iter().flat_map(|t| t.coeffs.keys().cloned()).collect()
    }

    pub fn add(&self, o: &MaxPlus) -> MaxPlus {
        let mut out = Vec::with_capacity(self.terms.len() * o.terms.len());
        for a in &self.terms {
            for b in &o.terms {
                out.push(a.add(b));
            }
        }
        MaxPlus::from_terms(out)
    }

    pub fn scale(&self, k: &Q) -> MaxPlus {
        MaxPlus::from_terms(self.terms.iter().map(|t| t.scale(k)).collect())
    }

    pub fn max(&self, o: &MaxPlus) -> MaxPlus {
        let mut m = self.clone();
        for t in &o.terms {
            m.insert(t.clone());
        }
        m
    }

    /// Replace each variable by a max-plus polynomial; unmapped variables stay.
    pub fn compose(&self, args: &BTreeMap<Name, MaxPlus>) -> MaxPlus {
        let mut acc: Option<MaxPlus> = None;
        for t in &self.terms {
            let mut cur = MaxPlus::constant(t.constant.clone());
            for (x, c) in &t.coeffs {
                let arg = args.get(x).cloned().unwrap_or_else(|| MaxPlus::var(x.clone()));
                cur = cur.add(&arg.scale(c));
            }
            acc = Some(match acc {
                None => cur,
                Some(a) => a.max(&cur),
            });
        }
        acc.expect("nonempty")
    }

    pub fn eval(&self, point: &BTreeMap<Name, Q>) -> Q {
        self.terms.iter().map(|t| t.eval(point)).max().expect("nonempty")
    }

    /// Every member of `o` is dominated by some member of `self`.
    pub fn dominates(&self, o: &MaxPlus) -> bool {
        o.terms.iter().all(|b| self.terms.iter().any(|a| a.dominates(b)))
    }
}

impl fmt::Display for MaxPlus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.len() == 1 {
            write!(f, "{}", self.terms[0])
        } else {
            let parts: Vec<String> = self.terms.iter().map(|t| t.to_string()).collect();
            write!(f, "max({})", parts.join(", "))
        }
    }
}
