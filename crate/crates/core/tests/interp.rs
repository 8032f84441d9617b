mod common;

use std::collections::BTreeMap;

use common::*;
use synchrone_rc::ast::{ExprBody, Label};
use synchrone_rc::interp::{self, eval_expr, InterpError, Observer, Status};
use synchrone_rc::term::{name, Term, Value};

fn nat(k: usize) -> Value {
    (0..k).fold(Value::leaf("z"), |v, _| Value::new(name("s"), vec![v]))
}

fn list(xs: &[usize]) -> Value {
    xs.iter().rev().fold(Value::leaf("nil"), |l, &x| Value::new(name("cons"), vec![nat(x), l]))
}

fn store_value<'a>(rec: &'a interp::InstantRecord, r: &str) -> &'a str {
    &rec.store.iter().find(|(n, _)| n == r).unwrap().1
}

#[test]
fn dble_of_one_is_two() {
    let tp = corpus("exp");
    for k in 0..8 {
        let eb = ExprBody::Expr(Term::fun("dble", vec![nat(k).to_term()]));
        assert_eq!(eval_expr(&tp, &eb, 10_000).unwrap(), nat(2 * k));
    }
}

#[test]
fn maxl_agrees_with_native_maximum() {
    let tp = corpus("monitor");
    let cases: &[(&[usize], usize)] = &[(&[1], 0), (&[], 3), (&[2, 5, 1], 4), (&[0, 0], 0), (&[3, 1], 7)];
    for (xs, x) in cases {
        let eb = ExprBody::Expr(Term::fun("maxl", vec![list(xs).to_term(), nat(*x).to_term()]));
        let expected = xs.iter().copied().chain([*x]).max().unwrap();
        assert_eq!(eval_expr(&tp, &eb, 10_000).unwrap(), nat(expected));
    }
}

#[test]
fn alarm_rings_when_countdown_reaches_zero() {
    let tp = corpus("alarm");
    let trace = interp::run(&tp, 5, 1_000_000).unwrap();
    // countdown oracle: without a prst signal the counter drops by one per instant
    let y = 2;
    for (k, rec) in trace.instants.iter().enumerate().take(y) {
        assert_eq!(store_value(rec, "ring"), "abst", "instant {k}");
        assert_eq!(rec.steps.last().unwrap().status, Status::W);
    }
    assert_eq!(store_value(&trace.instants[y], "ring"), "prst");
    assert!(trace.instants[y].terminated);
    assert_eq!(trace.instants.len(), y + 1);
}

#[test]
fn exp_doubles_register_size_each_read() {
    for k in 1..=10 {
        let src = corpus_source("exp").replace("system = exp(s(s(s(z))))", &format!("system = exp({})", nat_src(k)));
        let tp = load(&src);
        let trace = interp::run(&tp, 1, 10_000_000).unwrap();
        let w = trace.instants[0].steps.iter().flat_map(|s| &s.writes).last().unwrap();
        assert_eq!(w.size, (1u64 << k).to_string(), "k = {k}");
    }
}

#[test]
fn tight_system_reaches_exponential_size() {
    for n in 1..=2 {
        for m in 1..=3 {
            let tp = load(&tight_source(n, m, 1));
            let trace = interp::run(&tp, 1, 10_000_000).unwrap();
            let v = store_value(&trace.instants[0], "r");
            assert_eq!(v, nat(1 << (n * m)).to_string(), "n={n} m={m}");
        }
    }
}

#[test]
fn single_stop_thread_terminates_in_first_instant() {
    let tp = load("beh a() = stop\nsystem = a()");
    let trace = interp::run(&tp, 10, 100).unwrap();
    assert_eq!(trace.instants.len(), 1);
    assert!(trace.instants[0].terminated);
}

#[test]
fn fuel_exhaustion_is_reported() {
    let tp = corpus("exp");
    assert_eq!(interp::run(&tp, 1, 5), Err(InterpError::FuelExhausted { instant: 0 }));
}

#[test]
fn runs_are_deterministic() {
    for n in corpus_names() {
        let tp = corpus(&n);
        let a = interp::run(&tp, 5, 10_000_000).unwrap();
        let b = interp::run(&tp, 5, 10_000_000).unwrap();
        assert_eq!(a.render_text(), b.render_text(), "{n}");
    }
}

#[derive(Default)]
struct ReadCounter {
    instant: usize,
    counts: BTreeMap<(usize, usize, usize), usize>,
}

impl Observer for ReadCounter {
    fn instant_start(&mut self, i: usize) {
        self.instant = i;
    }
    fn read(&mut self, t: usize, l: &Label, _: &Value) {
        *self.counts.entry((self.instant, t, l.index)).or_default() += 1;
    }
}

#[test]
fn read_once_programs_execute_each_read_at_most_once_per_instant() {
    for n in corpus_names().into_iter().filter(|n| n != "exp") {
        let tp = corpus(&n);
        let mut c = ReadCounter::default();
        interp::run_observed(&tp, 6, 10_000_000, &mut c).unwrap();
        assert!(c.counts.values().all(|&k| k <= 1), "{n}: {:?}", c.counts);
    }
    let mut c = ReadCounter::default();
    interp::run_observed(&corpus("exp"), 1, 10_000_000, &mut c).unwrap();
    assert!(c.counts.values().any(|&k| k > 1));
}

#[test]
fn monitor_outputs_running_maximum() {
    let tp = corpus("monitor");
    let trace = interp::run(&tp, 5, 10_000_000).unwrap();
    // src(n) publishes [n, 1] each instant and increments n; f folds the maximum
    let (mut n, mut best) = (2usize, 0usize);
    for rec in &trace.instants {
        best = [best, n, 1].into_iter().max().unwrap();
        assert_eq!(store_value(rec, "o"), nat(best).to_string(), "instant {}", rec.instant);
        n += 1;
    }
}

#[test]
fn text_and_records_formats() {
    let tp = corpus("alarm");
    let trace = interp::run(&tp, 3, 1_000_000).unwrap();
    let text = trace.render_text();
    assert!(text.starts_with("instant 0 | thread 0 | W | writes -\n"), "{text}");
    assert!(text.contains("instant 2 | thread 0 | S | writes ring=prst(|v|=0)"));
    assert!(text.contains("instant 2 | terminated"));
    for line in trace.render_records().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["instant"].is_u64());
    }
}
