#![allow(dead_code)]

pub mod gen;

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use synchrone_rc::analysis::{analyze_program, instant_bounds, merge_annotations, stack_height, AnalyzeOptions};
use synchrone_rc::ast::Annotations;
use synchrone_rc::bytecode::{compile_program, Instr};
use synchrone_rc::cfa::build_call_graph;
use synchrone_rc::control_points::Constraint;
use synchrone_rc::frontend::{self, Signature, TypedProgram};
use synchrone_rc::qi::ThreadStart;
use synchrone_rc::term::{name, Name, Term};
use synchrone_rc::termination::Precedence;
use synchrone_rc::vm::{Frame, Vm, VmObserver, VmStatus};

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

pub fn corpus_source(name: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(format!("{name}.sct"))).unwrap()
}

pub fn corpus(name: &str) -> TypedProgram {
    load(&corpus_source(name))
}

pub fn corpus_names() -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            (p.extension()? == "sct").then(|| p.file_stem().unwrap().to_string_lossy().into_owned())
        })
        .collect();
    names.sort();
    names
}

pub fn load(src: &str) -> TypedProgram {
    match frontend::load(src) {
        Ok(tp) => tp,
        Err(ds) => panic!("{}", ds.iter().map(|d| d.render("<src>")).collect::<Vec<_>>().join("\n")),
    }
}

/// s^k(z) as concrete syntax.
pub fn nat_src(k: usize) -> String {
    let mut s = "z".to_string();
    for _ in 0..k {
        s = format!("s({s})");
    }
    s
}

/// The shared-register doubling system with `m` reads per thread and `n` threads.
pub fn tight_source(n: usize, m: usize, x0: usize) -> String {
    let mut body = String::from("r := dble(max(x1, x0)) . ");
    let mut tail = String::new();
    for j in 2..=m {
        body.push_str(&format!("read r with x{j} => r := dble(x{j}) . "));
        tail.push_str(" | [_] => halt()");
    }
    body.push_str(&format!("next . f(dble(x{m}))"));
    let threads: Vec<String> = (0..n).map(|_| format!("f({})", nat_src(x0))).collect();
    format!(
        "type nat = z || s of nat\nreftype nref = ref nat with r = z\n\
         def dble(n: nat) : nat = match n with s(n') then s(s(dble(n'))) else z\n\
         def max(x: nat, y: nat) : nat = match x with s(x') then match y with s(y') then s(max(x', y')) else s(x') else y\n\
         beh halt() = stop\n\
         beh f(x0: nat) = read r with x1 => {body}{tail} | [_] => halt()\n\
         system = {}\n",
        threads.join(", ")
    )
}

/// Replace the `system = ...` line of a source.
pub fn with_system(src: &str, threads: &str) -> String {
    src.lines()
        .map(|l| if l.starts_with("system") { format!("system = {threads}") } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n")
}

/// `.prec` and `.qi` sidecars of a corpus program, merged.
pub fn sidecars(name: &str) -> Annotations {
    let mut a = Annotations::default();
    for ext in ["prec", "qi"] {
        if let Ok(text) = std::fs::read_to_string(corpus_dir().join(format!("{name}.{ext}"))) {
            let s = frontend::parse_annotations(&text).unwrap();
            a.order.extend(s.order);
            a.qi.extend(s.qi);
        }
    }
    a
}

pub fn options(name: &str) -> AnalyzeOptions {
    let tp = corpus(name);
    AnalyzeOptions { annotations: merge_annotations(&tp.program.annotations, &sidecars(name)), ..Default::default() }
}

/// Assignment for the tight system with `m` reads.
pub fn tight_qi(m: usize) -> Annotations {
    let args: Vec<String> = (1..=m + 1).map(|i| format!("2*x{i}")).collect();
    let src = format!("qi dble = 2*x1\nqi max = max(x1, x2)\nqi f^ = max({})\n", args.join(", "));
    frontend::parse_annotations(&src).unwrap()
}

fn rename(t: &Term, map: &mut BTreeMap<Name, Name>) -> Term {
    match t {
        Term::Var(x) => {
            let n = map.len();
            Term::Var(map.entry(x.clone()).or_insert_with(|| name(&format!("v{n}"))).clone())
        }
        Term::Ctor(c, a) => Term::Ctor(c.clone(), a.iter().map(|s| rename(s, map)).collect()),
        Term::Fun(f, a) => Term::Fun(f.clone(), a.iter().map(|s| rename(s, map)).collect()),
        Term::Val(v) => rename(&v.to_term(), map),
    }
}

/// A constraint with its variables renamed `v0, v1, ..` in order of occurrence.
pub fn canonical(c: &Constraint) -> String {
    let mut map = BTreeMap::new();
    let l = rename(&c.lhs, &mut map);
    let r = rename(&c.rhs, &mut map);
    format!("{l} >{} {r}", c.index)
}

pub fn canonical_set(cs: &[Constraint]) -> BTreeSet<String> {
    cs.iter().map(canonical).collect()
}

/// Records, per thread, the behaviour call `f(v)` the thread performs
/// first in the instant; threads sitting at the start of a behaviour
/// are recorded up front.
pub struct InstantStarts<'a> {
    pub sig: &'a Signature,
    pub starts: BTreeMap<usize, ThreadStart>,
}

impl<'a> InstantStarts<'a> {
    pub fn new(sig: &'a Signature) -> Self {
        InstantStarts { sig, starts: BTreeMap::new() }
    }

    pub fn before_instant(&mut self, vm: &Vm) {
        self.starts.clear();
        for (i, t) in vm.threads.iter().enumerate() {
            if let [f] = &t.memory[..] {
                if f.pc == 1 && t.status != VmStatus::S {
                    self.starts.insert(i, ThreadStart { function: f.function.clone(), args: f.stack.clone() });
                }
            }
        }
    }
}

impl VmObserver for InstantStarts<'_> {
    fn before(&mut self, thread: usize, frame: &Frame, instr: &Instr) {
        if let Instr::TCall(g, n) | Instr::Call(g, n) = instr {
            if self.sig.is_behaviour(g) && !self.starts.contains_key(&thread) {
                let args = frame.stack[frame.stack.len() - n..].to_vec();
                self.starts.insert(thread, ThreadStart { function: g.clone(), args });
            }
        }
    }
}

/// Runs every corpus program passing termination and QI on the metered VM
/// for up to `instants` instants and compares each instant with the bounds.
pub fn check_metered_bounds(instants: usize) -> Result<usize, String> {
    let mut checked = 0;
    for p in corpus_names() {
        let tp = corpus(&p);
        let r = analyze_program(&tp, &options(&p));
        if !r.pass() {
            continue;
        }
        let cfa = build_call_graph(&tp.program);
        let prec = &r.termination.done().unwrap().precedence;
        let qa = &r.qi.done().unwrap().assignment;
        let height = stack_height(&tp)?;
        let m = compile_program(&tp).map_err(|e| e.to_string())?;
        let defaults: Vec<_> = tp.default_store().into_values().collect();
        let mut vm = Vm::new(&m, 1_000_000, true);
        let mut obs = InstantStarts::new(&tp.sig);
        for _ in 0..instants {
            if !vm.alive() {
                break;
            }
            obs.before_instant(&vm);
            let rec = vm.run_instant(&mut obs).map_err(|e| format!("{p}: {e}"))?;
            let threads: Vec<ThreadStart> = obs.starts.values().cloned().collect();
            let (size, space) =
                instant_bounds(&tp, &cfa, prec, qa, &threads, &defaults, height).map_err(|e| format!("{p}: {e}"))?;
            let vsize = BigRational::from_integer(BigInt::from(rec.max_value_size));
            if vsize > size.bound {
                return Err(format!("{p} instant {}: value size {} > {}", rec.instant, rec.max_value_size, size.bound));
            }
            let c = BigInt::from(rec.max_config_size.ok_or("metering is off")?);
            if c > space.bound {
                return Err(format!("{p} instant {}: configuration {c} > {}", rec.instant, space.bound));
            }
            checked += 1;
        }
    }
    Ok(checked)
}

pub fn seeded_config(cases: u32) -> Config {
    Config { cases, rng_seed: RngSeed::Fixed(0x5c7), failure_persistence: None, ..Config::default() }
}

/// Terms over variables `x, y, z`, constructors `nil, s, cons` and
/// function symbols `f, g, h` (binary) and `k` (unary).
pub fn term_strategy() -> impl Strategy<Value = Term> {
    let leaf = prop_oneof![
        prop::sample::select(vec!["x", "y", "z"]).prop_map(Term::var),
        Just(Term::ctor("nil", vec![])),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|t| Term::ctor("s", vec![t])),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::ctor("cons", vec![a, b])),
            (prop::sample::select(vec!["f", "g", "h"]), inner.clone(), inner.clone())
                .prop_map(|(f, a, b)| Term::fun(f, vec![a, b])),
            inner.prop_map(|t| Term::fun("k", vec![t])),
        ]
    })
}

/// `f > g = k > h`.
pub fn lpo_precedence() -> Precedence {
    Precedence::from_ranked(&[vec![name("f")], vec![name("g"), name("k")], vec![name("h")]])
}
