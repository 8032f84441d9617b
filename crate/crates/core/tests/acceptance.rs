mod common;

use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::test_runner::{TestCaseError, TestRunner};
use synchrone_rc::analysis::{analyze_program, AnalyzeOptions};
use synchrone_rc::bytecode::{check_flow_properties, compile_program, Module};
use synchrone_rc::cfa::{build_call_graph, check_read_once};
use synchrone_rc::interp;
use synchrone_rc::qi::Verdict;
use synchrone_rc::shape::analyze_module;
use synchrone_rc::term::{name, TermSubst};
use synchrone_rc::termination::lpo_greater;
use synchrone_rc::vm::run_vm;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const ALARM_POINTS: [&str; 8] = [
    "(alarm^(x, y, u), match y with s(y') then read<u> sig with prst => next . alarm(x, x) | [_] => alarm(x, y') else ring := prst . stop, 2)",
    "(alarm^(x, y, u), ring := prst . stop, 2)",
    "(alarm^(x, y, u), prst, 1)",
    "(alarm^(x, y, u), stop, 2)",
    "(alarm^(x, s(y'), u), read<u> sig with prst => next . alarm(x, x) | [_] => alarm(x, y'), 2)",
    "(alarm^(x, s(y'), u), alarm(x, y'), 2)",
    "(alarm^(x, s(y'), prst), next . alarm(x, x), 2)",
    "(alarm^(x, s(y'), prst), alarm(x, x), 2)",
];

fn alarm_control_points() -> Outcome {
    let r = analyze_program(&common::corpus("alarm"), &AnalyzeOptions::default());
    let a = r.control.done().ok_or("control-point stage did not run")?;
    let mut got: Vec<String> = a.points.iter().map(|p| p.to_string()).collect();
    got.sort();
    let mut want: Vec<String> = ALARM_POINTS.iter().map(|s| s.to_string()).collect();
    want.sort();
    ensure(got == want, || format!("points differ: {got:#?}"))?;
    let idx: Vec<u8> = a.constraints.iter().map(|c| c.index).collect();
    ensure(idx == [1], || format!("constraint indices {idx:?}"))?;
    let c = a.constraints[0].to_string();
    ensure(c == "alarm^(x, y, u) >1 prst", || c.clone())?;
    Ok("8 points, 1 constraint of index 1; stop point keeps the pattern vector alarm^(x, y, u)".into())
}

fn read_once_verdicts() -> Outcome {
    for (p, pass) in [("exp", false), ("alarm", true), ("when", true), ("monitor", true), ("readers_writers", true)] {
        let r = check_read_once(&build_call_graph(&common::corpus(p).program));
        ensure(r.pass == pass, || format!("{p}: got {}", r.pass))?;
        if !pass {
            ensure(r.witness.as_deref().is_some_and(|w| !w.is_empty()), || format!("{p}: no cycle witness"))?;
        }
    }
    Ok("exp rejected with a cycle witness, 4 accepted".into())
}

fn monitor_lpo() -> Outcome {
    let r = analyze_program(&common::corpus("monitor"), &common::options("monitor"));
    let v = r.termination.done().ok_or("termination stage did not run")?;
    let prec = v.precedence.to_string();
    ensure(prec == "f^ > f1^ > maxl > max", || prec.clone())?;
    ensure(v.pass && v.linear, || v.render())?;
    Ok(format!("{prec}, linear"))
}

fn monitor_qi() -> Outcome {
    let r = analyze_program(&common::corpus("monitor"), &common::options("monitor"));
    let o = r.qi.done().ok_or("qi stage did not run")?;
    ensure(!o.checks.is_empty() && o.checks.iter().all(|c| c.verdict == Verdict::Holds), || {
        o.checks.iter().map(|c| format!("{} {}\n", c.constraint, c.verdict)).collect()
    })?;
    Ok(format!("{} constraints hold", o.checks.len()))
}

fn exp_counterexample() -> Outcome {
    for k in 1..=10 {
        let src = common::with_system(&common::corpus_source("exp"), &format!("exp({})", common::nat_src(k)));
        let tp = common::load(&src);
        let trace = interp::run(&tp, 1, 10_000_000).map_err(|e| e.to_string())?;
        let rec = &trace.instants[0];
        let w = rec.steps.iter().flat_map(|s| &s.writes).last().ok_or("no write")?;
        ensure(w.register == "r" && w.size == (1u64 << k).to_string(), || format!("k = {k}: size {}", w.size))?;
    }
    Ok("|r| = 2^k for k = 1..10".into())
}

fn tight_bound() -> Outcome {
    for n in 1..=2 {
        for m in 1..=3 {
            let x0 = 1;
            let tp = common::load(&common::tight_source(n, m, x0));
            let trace = interp::run(&tp, 1, 10_000_000).map_err(|e| e.to_string())?;
            let w = trace.instants[0].steps.iter().flat_map(|s| &s.writes).last().ok_or("no write")?;
            let size: u128 = w.size.parse().map_err(|_| "size")?;
            let want = (1u128 << (n * m)) * x0 as u128;
            ensure(size == want, || format!("n={n} m={m}: size {size}, want {want}"))?;
            let opts = AnalyzeOptions { annotations: common::tight_qi(m), ..Default::default() };
            let r = analyze_program(&tp, &opts);
            let b = r.size.done().ok_or_else(|| r.render())?;
            ensure(b.bound >= BigRational::from_integer(BigInt::from(size)), || b.render())?;
        }
    }
    Ok("2^(nm)|x0| reached and bounded for n <= 2, m <= 3".into())
}

const ALARM_LISTING: &str = "func alarm/2
1: branch s 12
2: read sig
3: branch prst 8
4: next
5: load 1
6: load 1
7: tcall alarm 2
8: wait 2
9: load 1
10: load 2
11: tcall alarm 2
12: build prst 0
13: write ring
14: stop
";

fn alarm_listing() -> Outcome {
    let m = compile_program(&common::corpus("alarm")).map_err(|e| e.to_string())?;
    let got = m.segment("alarm").ok_or("no alarm segment")?.render();
    ensure(got == ALARM_LISTING, || got.clone())?;
    Ok("14 instructions, byte-exact".into())
}

const MONITOR_LISTED: &str = "type nat = z || s of nat
type list = nil || cons of (nat, list)
reftype lref = ref list with i = nil
reftype nref = ref nat with o = z
decl f(nat) : beh
decl f1(nat) : beh
decl maxl(list, nat) : nat
system = f(z)

func f/1
1: yield
2: read i
3: load 1
4: call maxl 2
5: call f1 1
6: return
";

fn monitor_shapes() -> Outcome {
    let m = Module::parse(MONITOR_LISTED).map_err(|e| e.to_string())?;
    let ss = analyze_module(&m).map_err(|e| e.to_string())?;
    let rows: Vec<String> = (1..=6).map(|i| ss[0].shape(i).map(|s| s.render_stack()).unwrap_or_default()).collect();
    let want =
        ["x#1.1", "x#1.1", "x#1.1 . f#2", "x#1.1 . f#2 . x#1.1", "x#1.1 . maxl(f#2, x#1.1)", "x#1.1 . f1(maxl(f#2, x#1.1))"];
    ensure(rows == want, || format!("{rows:?}"))?;
    let expected = "f^(v0, v1) >0 f1^(maxl(v1, v0))";
    let listed: Vec<String> = ss[0].constraints.iter().map(common::canonical).collect();
    ensure(listed == [expected], || format!("{listed:?}"))?;
    let compiled = compile_program(&common::corpus("monitor")).map_err(|e| e.to_string())?;
    let cs = analyze_module(&compiled).map_err(|e| e.to_string())?;
    let f = cs.iter().find(|s| &*s.name == "f").ok_or("no f")?;
    let got: Vec<String> = f.constraints.iter().map(common::canonical).collect();
    ensure(got == [expected], || format!("{got:?}"))?;
    Ok("6 rows and f^(x, l) >0 f1^(maxl(l, x)) for listed and compiled f".into())
}

fn differential() -> Outcome {
    let names = common::corpus_names();
    for p in &names {
        let tp = common::corpus(p);
        let m = compile_program(&tp).map_err(|e| e.to_string())?;
        let a = interp::run(&tp, 5, 1_000_000).map_err(|e| format!("{p}: {e}"))?;
        let b = run_vm(&m, 5, 1_000_000, false).map_err(|e| format!("{p}: {e}"))?;
        ensure(a.observable() == b.observable(), || format!("{p}: traces differ"))?;
    }
    Ok(format!("{} programs agree over 5 instants", names.len()))
}

fn generated_programs_verify() -> Outcome {
    for seed in 0..200 {
        let src = common::gen::random_program(seed);
        let tp = synchrone_rc::frontend::load(&src).map_err(|_| format!("seed {seed} does not type-check"))?;
        let m = compile_program(&tp).map_err(|e| format!("seed {seed}: {e}"))?;
        let flow = check_flow_properties(&m.segments, true);
        ensure(flow.pass(), || format!("seed {seed}: {}", flow.render()))?;
        analyze_module(&m).map_err(|e| format!("seed {seed}: {e}"))?;
    }
    Ok("200 of 200".into())
}

fn bound_soundness() -> Outcome {
    let n = common::check_metered_bounds(5)?;
    ensure(n > 0, || "no instant checked".into())?;
    Ok(format!("{n} instants within bounds"))
}

fn path_order_properties() -> Outcome {
    let mut runner = TestRunner::new(common::seeded_config(10_000));
    let strat = (
        common::term_strategy(),
        common::term_strategy(),
        common::term_strategy(),
        common::term_strategy(),
        common::term_strategy(),
    );
    let p = common::lpo_precedence();
    runner
        .run(&strat, |(a, b, c, sx, sy)| {
            let fail = |m: String| Err(TestCaseError::fail(m));
            if lpo_greater(&a, &a, &p) {
                return fail(format!("{a} > {a}"));
            }
            if lpo_greater(&a, &b, &p) && lpo_greater(&b, &c, &p) && !lpo_greater(&a, &c, &p) {
                return fail(format!("{a} > {b} > {c} but not {a} > {c}"));
            }
            if lpo_greater(&a, &b, &p) {
                let s: TermSubst = [(name("x"), sx), (name("y"), sy)].into_iter().collect();
                let (a2, b2) = (a.substitute(&s), b.substitute(&s));
                if !lpo_greater(&a2, &b2, &p) {
                    return fail(format!("{a} > {b} but not {a2} > {b2}"));
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("10000 seeded cases".into())
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("alarm control points", Duration::from_secs(1), alarm_control_points),
        ("read-once verdicts", Duration::from_secs(1), read_once_verdicts),
        ("monitor LPO", Duration::from_secs(1), monitor_lpo),
        ("monitor quasi-interpretation", Duration::from_secs(1), monitor_qi),
        ("exponential counterexample", Duration::from_secs(5), exp_counterexample),
        ("tight bound", Duration::from_secs(5), tight_bound),
        ("compiled alarm listing", Duration::from_secs(1), alarm_listing),
        ("monitor shape table", Duration::from_secs(1), monitor_shapes),
        ("interpreter/VM differential", Duration::from_secs(10), differential),
        ("random programs compile and verify", Duration::from_secs(60), generated_programs_verify),
        ("bound soundness", Duration::from_secs(30), bound_soundness),
        ("path order properties", Duration::from_secs(10), path_order_properties),
    ];
    let mut failed = 0;
    for (i, (label, limit, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(_) if took > limit => Err(format!("took {took:.2?}, limit {limit:?}")),
            o => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {:>2} {label} ({took:.2?}): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {label} ({took:.2?}): {why}", i + 1);
            }
        }
    }
    println!("{} of 12 criteria pass", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
