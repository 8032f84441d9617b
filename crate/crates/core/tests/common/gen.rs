//! Seeded generator of well-typed, read-once, terminating programs.
//!
//! Expression functions only call earlier functions, or themselves on a
//! variable bound by a pattern of their first parameter. Behaviours only
//! make direct calls to later behaviours; calls after `next` and in
//! default branches may go anywhere.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const HEADER: &str = "type nat = z || s of nat\ntype list = nil || cons of (nat, list)\n\
                      reftype nref = ref nat with r = z || r2 = s(z)\nreftype lref = ref list with q = nil\n";

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Ty {
    Nat,
    List,
}

impl Ty {
    fn name(self) -> &'static str {
        match self {
            Ty::Nat => "nat",
            Ty::List => "list",
        }
    }
}

struct Sig {
    name: String,
    params: Vec<Ty>,
    ret: Option<Ty>,
}

struct Gen {
    rng: ChaCha8Rng,
    funs: Vec<Sig>,
    behs: Vec<Sig>,
    fresh: usize,
}

type Scope = Vec<(String, Ty)>;

impl Gen {
    fn var(&mut self) -> String {
        self.fresh += 1;
        format!("v{}", self.fresh)
    }

    fn pick<'a, T>(&mut self, xs: &'a [T]) -> Option<&'a T> {
        xs.choose(&mut self.rng)
    }

    fn value(&mut self, t: Ty, depth: usize) -> String {
        match t {
            Ty::Nat => {
                let k = self.rng.gen_range(0..=depth.min(3));
                (0..k).fold("z".to_string(), |acc, _| format!("s({acc})"))
            }
            Ty::List => {
                if depth == 0 || self.rng.gen_bool(0.3) {
                    "nil".into()
                } else {
                    let h = self.value(Ty::Nat, depth - 1);
                    let tl = self.value(Ty::List, depth - 1);
                    format!("cons({h}, {tl})")
                }
            }
        }
    }

    /// Expression of type `t`; `upto` limits callable functions.
    fn expr(&mut self, t: Ty, scope: &Scope, upto: usize, depth: usize) -> String {
        let vars: Vec<String> = scope.iter().filter(|(_, u)| *u == t).map(|(x, _)| x.clone()).collect();
        let callees: Vec<usize> = (0..upto).filter(|&i| self.funs[i].ret == Some(t)).collect();
        let choice = self.rng.gen_range(0..10);
        if depth == 0 || choice < 4 {
            if let Some(x) = self.pick(&vars) {
                return x.clone();
            }
            return self.value(t, 1);
        }
        if choice < 7 || callees.is_empty() {
            return match t {
                Ty::Nat => format!("s({})", self.expr(Ty::Nat, scope, upto, depth - 1)),
                Ty::List => {
                    let h = self.expr(Ty::Nat, scope, upto, depth - 1);
                    let tl = self.expr(Ty::List, scope, upto, depth - 1);
                    format!("cons({h}, {tl})")
                }
            };
        }
        let f = *self.pick(&callees).unwrap();
        let params = self.funs[f].params.clone();
        let args: Vec<String> = params.iter().map(|&p| self.expr(p, scope, upto, depth - 1)).collect();
        format!("{}({})", self.funs[f].name, args.join(", "))
    }

    /// Pattern for a `match` or `read` on type `t`, extending `scope`.
    fn pattern(&mut self, t: Ty, scope: &mut Scope) -> String {
        match t {
            Ty::Nat => {
                if self.rng.gen_bool(0.7) {
                    let y = self.var();
                    scope.push((y.clone(), Ty::Nat));
                    format!("s({y})")
                } else {
                    "z".into()
                }
            }
            Ty::List => {
                if self.rng.gen_bool(0.7) {
                    let (h, tl) = (self.var(), self.var());
                    scope.push((h.clone(), Ty::Nat));
                    scope.push((tl.clone(), Ty::List));
                    format!("cons({h}, {tl})")
                } else {
                    "nil".into()
                }
            }
        }
    }

    /// Body of expression function `me`; `rec` holds variables strictly
    /// below the first parameter `v1`, usable for a recursive call.
    fn expr_body(&mut self, me: usize, scope: &Scope, rec: &[String], depth: usize) -> String {
        let ret = self.funs[me].ret.unwrap();
        let params = self.funs[me].params.clone();
        if depth > 0 && !scope.is_empty() && self.rng.gen_bool(0.6) {
            let (x, t) = self.pick(scope).unwrap().clone();
            let mut inner: Scope = scope.iter().filter(|(y, _)| *y != x).cloned().collect();
            let kept = inner.len();
            let p = self.pattern(t, &mut inner);
            let mut rec2: Vec<String> = rec.iter().filter(|y| **y != x).cloned().collect();
            if x == "v1" || rec.contains(&x) {
                rec2.extend(inner[kept..].iter().filter(|(_, u)| *u == params[0]).map(|(y, _)| y.clone()));
            }
            let then = self.expr_body(me, &inner, &rec2, depth - 1);
            let els = self.expr_body(me, scope, rec, depth - 1);
            return format!("match {x} with {p} then {then} else {els}");
        }
        if !rec.is_empty() && self.rng.gen_bool(0.4) {
            let first = self.pick(rec).unwrap().clone();
            let rest: Vec<String> = params[1..].iter().map(|&p| self.expr(p, scope, me, 1)).collect();
            let args: Vec<String> = std::iter::once(first).chain(rest).collect();
            let call = format!("{}({})", self.funs[me].name, args.join(", "));
            return match ret {
                Ty::Nat => format!("s({call})"),
                Ty::List => call,
            };
        }
        self.expr(ret, scope, me, 2)
    }

    fn tail_call(&mut self, scope: &Scope, candidates: &[usize]) -> String {
        let g = *self.pick(candidates).unwrap();
        let params = self.behs[g].params.clone();
        let nf = self.funs.len();
        let args: Vec<String> = params.iter().map(|&p| self.expr(p, scope, nf, 2)).collect();
        format!("{}({})", self.behs[g].name, args.join(", "))
    }

    fn behaviour(&mut self, me: usize, scope: &Scope, depth: usize) -> String {
        let all: Vec<usize> = (0..self.behs.len()).collect();
        let later: Vec<usize> = (me + 1..self.behs.len()).collect();
        let nf = self.funs.len();
        let k = if depth == 0 { self.rng.gen_range(0..3) } else { self.rng.gen_range(0..9) };
        match k {
            0 => "stop".into(),
            1 => format!("next . {}", self.tail_call(scope, &all)),
            2 if !later.is_empty() => self.tail_call(scope, &later),
            2 => "stop".into(),
            3 => format!("yield . {}", self.behaviour(me, scope, depth - 1)),
            4 | 5 => {
                let (reg, t) = if self.rng.gen_bool(0.7) {
                    (if self.rng.gen_bool(0.5) { "r" } else { "r2" }, Ty::Nat)
                } else {
                    ("q", Ty::List)
                };
                let e = self.expr(t, scope, nf, 2);
                format!("{reg} := {e} . {}", self.behaviour(me, scope, depth - 1))
            }
            6 if !scope.is_empty() => {
                let (x, t) = self.pick(scope).unwrap().clone();
                let mut inner: Scope = scope.iter().filter(|(y, _)| *y != x).cloned().collect();
                let p = self.pattern(t, &mut inner);
                let then = self.behaviour(me, &inner, depth - 1);
                let els = self.behaviour(me, scope, depth - 1);
                format!("match {x} with {p} then {then} else {els}")
            }
            _ => {
                let (reg, t) = if self.rng.gen_bool(0.7) { ("r", Ty::Nat) } else { ("q", Ty::List) };
                let mut branches = Vec::new();
                for _ in 0..self.rng.gen_range(1..=2) {
                    let mut inner = scope.clone();
                    if self.rng.gen_bool(0.25) {
                        let y = self.var();
                        inner.push((y.clone(), t));
                        let body = self.behaviour(me, &inner, depth - 1);
                        branches.push(format!("{y} => {body}"));
                        break;
                    }
                    let p = self.pattern(t, &mut inner);
                    let body = self.behaviour(me, &inner, depth - 1);
                    branches.push(format!("{p} => {body}"));
                }
                let default = self.tail_call(scope, &all);
                format!("read {reg} with {} | [_] => {default}", branches.join(" | "))
            }
        }
    }
}

fn ty(rng: &mut ChaCha8Rng) -> Ty {
    if rng.gen_bool(0.65) {
        Ty::Nat
    } else {
        Ty::List
    }
}

/// Source text of a random program; equal seeds give equal programs.
pub fn random_program(seed: u64) -> String {
    generate(seed, false)
}

/// Random expression functions under a single `stop` thread.
pub fn random_functions(seed: u64) -> String {
    generate(seed, true)
}

fn generate(seed: u64, functions_only: bool) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nf = if functions_only { rng.gen_range(1..=4) } else { rng.gen_range(0..=3) };
    let nb = if functions_only { 1 } else { rng.gen_range(1..=4) };
    let funs: Vec<Sig> = (0..nf)
        .map(|i| Sig {
            name: format!("e{i}"),
            params: (0..rng.gen_range(1..=3)).map(|_| ty(&mut rng)).collect(),
            ret: Some(ty(&mut rng)),
        })
        .collect();
    let behs: Vec<Sig> = (0..nb)
        .map(|i| Sig { name: format!("b{i}"), params: (0..rng.gen_range(0..=2)).map(|_| ty(&mut rng)).collect(), ret: None })
        .collect();
    let mut g = Gen { rng, funs, behs, fresh: 0 };
    let mut out = String::from(HEADER);
    for i in 0..nf {
        g.fresh = 0;
        let params: Scope = g.funs[i].params.clone().into_iter().map(|t| (g.var(), t)).collect();
        let body = g.expr_body(i, &params, &[], 3);
        let ps: Vec<String> = params.iter().map(|(x, t)| format!("{x}: {}", t.name())).collect();
        out.push_str(&format!("def e{i}({}) : {} = {body}\n", ps.join(", "), g.funs[i].ret.unwrap().name()));
    }
    if functions_only {
        out.push_str("beh b0() = stop\nsystem = b0()\n");
        return out;
    }
    for i in 0..nb {
        g.fresh = 0;
        let params: Scope = g.behs[i].params.clone().into_iter().map(|t| (g.var(), t)).collect();
        let body = g.behaviour(i, &params, 4);
        let ps: Vec<String> = params.iter().map(|(x, t)| format!("{x}: {}", t.name())).collect();
        out.push_str(&format!("beh b{i}({}) = {body}\n", ps.join(", ")));
    }
    let threads: Vec<String> = (0..g.rng.gen_range(1..=3))
        .map(|_| {
            let b = g.rng.gen_range(0..nb);
            let params = g.behs[b].params.clone();
            let args: Vec<String> = params.iter().map(|&t| g.value(t, 3)).collect();
            format!("b{b}({})", args.join(", "))
        })
        .collect();
    out.push_str(&format!("system = {}\n", threads.join(", ")));
    out
}
