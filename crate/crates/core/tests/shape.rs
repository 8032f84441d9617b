mod common;

use std::collections::BTreeMap;

use synchrone_rc::bytecode::{compile_program, Instr, Module};
use synchrone_rc::cfa::{build_call_graph, check_read_once};
use synchrone_rc::frontend::parse_annotations;
use synchrone_rc::control_points;
use synchrone_rc::shape::{analyze_module, emit_constraints, verify, SegmentShapes, ShapeErrorKind, VerifyOptions};
use synchrone_rc::term::match_pattern;
use synchrone_rc::vm::{run_vm_observed, Frame, VmObserver};
use synchrone_rc::term::Term;

/// Monitor `f` as listed with a non-tail behaviour call and a return.
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

use common::{canonical, canonical_set};

fn opts() -> VerifyOptions {
    VerifyOptions::default()
}

#[test]
fn listed_monitor_reproduces_the_shape_table() {
    let m = Module::parse(MONITOR_LISTED).unwrap();
    let ss = analyze_module(&m).unwrap();
    let f = &ss[0];
    let rows: Vec<String> = (1..=6).map(|i| f.shape(i).unwrap().render_stack()).collect();
    assert_eq!(
        rows,
        ["x#1.1", "x#1.1", "x#1.1 . f#2", "x#1.1 . f#2 . x#1.1", "x#1.1 . maxl(f#2, x#1.1)", "x#1.1 . f1(maxl(f#2, x#1.1))"]
    );
    for i in 1..=6 {
        assert!(f.shape(i).unwrap().sigma.iter().all(|(x, t)| t == &Term::Var(x.clone())));
    }
    let cs: Vec<String> = f.constraints.iter().map(canonical).collect();
    assert_eq!(cs, ["f^(v0, v1) >0 f1^(maxl(v1, v0))"]);
}

#[test]
fn compiled_monitor_yields_the_same_constraint() {
    let m = compile_program(&common::corpus("monitor")).unwrap();
    let ss = analyze_module(&m).unwrap();
    let f = ss.iter().find(|s| &*s.name == "f").unwrap();
    let cs: Vec<String> = f.constraints.iter().map(canonical).collect();
    assert_eq!(cs, ["f^(v0, v1) >0 f1^(maxl(v1, v0))"]);
}

#[test]
fn alarm_emits_only_the_write_constraint() {
    let m = compile_program(&common::corpus("alarm")).unwrap();
    let cs = emit_constraints(&analyze_module(&m).unwrap());
    assert_eq!(cs.len(), 1);
    assert_eq!(cs[0].index, 1);
    assert_eq!(cs[0].rhs.to_string(), "prst");
}

#[test]
fn alarm_wait_restores_the_read_shape() {
    let m = compile_program(&common::corpus("alarm")).unwrap();
    let ss = analyze_module(&m).unwrap();
    let a = &ss[0];
    assert_eq!(a.shape(9).unwrap().stack, a.shape(2).unwrap().stack);
    assert!(a.shape(9).unwrap().guarded);
    assert!(a.shape(5).unwrap().guarded);
    assert!(!a.shape(3).unwrap().guarded);
}

#[test]
fn extra_load_is_a_mismatch() {
    let mut m = compile_program(&common::corpus("monitor")).unwrap();
    let k = m.segment_index("maxl").unwrap();
    m.segments[k].code.insert(7, Instr::Load(1));
    for ins in &mut m.segments[k].code {
        if let Instr::Branch(_, j) = ins {
            *j += 1;
        }
    }
    let e = analyze_module(&m).unwrap_err();
    assert_eq!(e.kind, ShapeErrorKind::Mismatch);
    assert_eq!(&*e.segment, "maxl");
    let r = verify(&m, &opts());
    assert!(!r.pass());
    assert!(r.render().contains("shape: fail"));
}

#[test]
fn wait_under_a_refined_read_is_inconsistent() {
    let text = "type nat = z || s of nat
reftype nref = ref nat with r = z
decl g() : beh
system = g()

func g/0
1: read r
2: branch s 6
3: branch s 5
4: stop
5: wait 1
6: stop
";
    let m = Module::parse(text).unwrap();
    let e = analyze_module(&m).unwrap_err();
    assert_eq!((e.kind, e.index), (ShapeErrorKind::WaitInconsistency, 5), "{e}");
}

#[test]
fn source_and_bytecode_constraints_agree() {
    for p in common::corpus_names() {
        let tp = common::corpus(&p);
        let g = build_call_graph(&tp.program);
        if !check_read_once(&g).pass {
            continue;
        }
        let src = control_points::analyze(&tp.program, &g).unwrap().constraints;
        let m = compile_program(&tp).unwrap();
        let bc = emit_constraints(&analyze_module(&m).unwrap());
        assert_eq!(canonical_set(&bc), canonical_set(&src), "{p}");
    }
}

#[test]
fn verified_corpus_programs() {
    for p in ["alarm", "monitor", "buffer", "channel", "fifo", "when", "readers_writers"] {
        let mut m = compile_program(&common::corpus(p)).unwrap();
        for ext in ["prec", "qi"] {
            if let Ok(text) = std::fs::read_to_string(common::corpus_dir().join(format!("{p}.{ext}"))) {
                let a = parse_annotations(&text).unwrap();
                m.annotations.order.extend(a.order);
                m.annotations.qi.extend(a.qi);
            }
        }
        let r = verify(&m, &opts());
        assert!(r.pass(), "{p}\n{}", r.render());
    }
}

struct ShapeWitness<'a> {
    shapes: &'a [SegmentShapes],
    checked: usize,
}

impl VmObserver for ShapeWitness<'_> {
    fn before(&mut self, _thread: usize, frame: &Frame, _instr: &Instr) {
        let seg = self.shapes.iter().find(|s| s.name == frame.function).unwrap();
        let shape = seg.shape(frame.pc).unwrap_or_else(|| panic!("{}:{} has no shape", frame.function, frame.pc));
        assert_eq!(shape.stack.len(), frame.stack.len(), "{}:{}", frame.function, frame.pc);
        let mut env = BTreeMap::new();
        for ((e, _), v) in shape.stack.iter().zip(&frame.stack) {
            if !has_calls(e) {
                let s = match_pattern(e, v).unwrap_or_else(|| panic!("{}:{}: {v} does not match {e}", frame.function, frame.pc));
                for (x, w) in s {
                    let old = env.entry(x.clone()).or_insert_with(|| w.clone());
                    assert_eq!(*old, w, "{}:{}: {x} bound twice", frame.function, frame.pc);
                }
            }
        }
        self.checked += 1;
    }
}

fn has_calls(t: &Term) -> bool {
    let mut fs = Vec::new();
    t.fun_occurrences(&mut fs);
    !fs.is_empty()
}

#[test]
fn runtime_stacks_are_instances_of_their_shapes() {
    for p in common::corpus_names() {
        let tp = common::corpus(&p);
        if !check_read_once(&build_call_graph(&tp.program)).pass {
            continue;
        }
        let m = compile_program(&tp).unwrap();
        let shapes = analyze_module(&m).unwrap();
        let mut w = ShapeWitness { shapes: &shapes, checked: 0 };
        run_vm_observed(&m, 6, 1_000_000, false, &mut w).unwrap();
        assert!(w.checked > 0, "{p}");
    }
}
