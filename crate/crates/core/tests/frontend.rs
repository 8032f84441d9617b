use synchrone_rc::ast::{FunctionBody, TypeKind};
use synchrone_rc::frontend::{self, Code};

fn corpus(name: &str) -> String {
    std::fs::read_to_string(format!("{}/corpus/{name}.sct", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

const CORPUS: &[&str] = &[
    "alarm", "exp", "when", "monitor", "readers_writers", "buffer", "channel", "fifo", "tight",
];

#[test]
fn corpus_typechecks() {
    for name in CORPUS {
        let r = frontend::load(&corpus(name));
        assert!(r.is_ok(), "{name}: {:?}", r.err());
    }
}

#[test]
fn corpus_round_trips() {
    for name in CORPUS {
        let p = frontend::parse(&corpus(name)).unwrap();
        let printed = frontend::pretty_print(&p);
        let q = frontend::parse(&printed).unwrap_or_else(|e| panic!("{name}: {e:?}\n{printed}"));
        assert_eq!(p, q, "{name}");
        assert_eq!(printed, frontend::pretty_print(&q));
    }
}

#[test]
fn alarm_has_one_binary_behaviour() {
    let p = frontend::parse(&corpus("alarm")).unwrap();
    let behs: Vec<_> = p.behaviours().collect();
    assert_eq!(behs.len(), 1);
    assert_eq!(behs[0].arity(), 2);
    assert_eq!(&*behs[0].name, "alarm");
}

#[test]
fn nat_declaration() {
    let p = frontend::parse("type nat = z || s of nat").unwrap();
    let TypeKind::Data(cs) = &p.types[0].kind else { panic!() };
    assert_eq!(cs.len(), 2);
}

fn codes(src: &str) -> Vec<Code> {
    frontend::load(src).unwrap_err().into_iter().filter(|d| d.is_error()).map(|d| d.code).collect()
}

#[test]
fn unknown_function() {
    let src = "type nat = z || s of nat\ndef f(x: nat) : nat = g(x)";
    assert_eq!(codes(src), vec![Code::UnknownSymbol]);
}

#[test]
fn constructor_type_error() {
    let src = "type nat = z || s of nat\ntype list = nil || cons of (nat, list)\ndef f(x: nat) : nat = s(nil)";
    assert_eq!(codes(src), vec![Code::TypeMismatch]);
}

#[test]
fn match_scope_violations() {
    let src = "type nat = z || s of nat\ndef f(x: nat) : nat = match x with s(y) then x else y";
    assert_eq!(codes(src), vec![Code::Scope, Code::Scope]);
}

#[test]
fn duplicate_constructor_rejected() {
    let src = "type nat = z || s of nat\ntype b = z || t";
    assert_eq!(codes(src), vec![Code::Duplicate]);
}

#[test]
fn behaviour_in_expression_position() {
    let src = "type nat = z || s of nat\nbeh g(x: nat) = stop\ndef f(x: nat) : nat = s(g(x))";
    assert!(codes(src).contains(&Code::Position));
}

#[test]
fn value_function_as_behaviour() {
    let src = "type nat = z || s of nat\ndef g(x: nat) : nat = x\nbeh f(x: nat) = g(x)";
    assert_eq!(codes(src), vec![Code::Position]);
}

#[test]
fn arity_errors() {
    let src = "type nat = z || s of nat\nbeh f(x: nat) = f(x, x)\nsystem = f()";
    assert_eq!(codes(src), vec![Code::Arity, Code::Arity]);
}

#[test]
fn read_target_must_be_reference() {
    let src = "type nat = z || s of nat\nbeh h() = stop\nbeh f(x: nat) = read x with y => stop | [_] => h()";
    assert_eq!(codes(src), vec![Code::TypeMismatch]);
}

#[test]
fn variable_pattern_makes_later_branches_dead() {
    let src = "type nat = z || s of nat\nreftype r = ref nat with reg = z\nbeh h() = stop\n\
               beh f() = read reg with m => stop | s(k) => stop | [_] => h()";
    let (_, warnings) = frontend::parse_program(src).unwrap();
    assert_eq!(warnings.len(), 1);
    assert_eq!(warnings[0].code, Code::DeadBranch);
    assert!(frontend::load(src).is_ok());
}

#[test]
fn diagnostic_rendering() {
    let err = frontend::load("type nat = z ||").unwrap_err();
    assert_eq!(err[0].render("a.sct"), "a.sct:1:16: error: expected a constructor name, found end of input");
    let rec: serde_json::Value = serde_json::from_str(&err[0].record("a.sct")).unwrap();
    assert_eq!(rec["code"], "syntax");
}

#[test]
fn declaration_order_does_not_matter() {
    let src = corpus("monitor");
    let mut p = frontend::parse(&src).unwrap();
    p.functions.reverse();
    p.types.reverse();
    let q = frontend::typecheck(p, vec![]).unwrap();
    assert!(q.program.functions.iter().any(|f| matches!(f.body, FunctionBody::Beh(_))));
}

#[test]
fn labels_are_global_and_ordered() {
    let p = frontend::parse(&corpus("when")).unwrap();
    let labels: Vec<String> = p
        .behaviours()
        .flat_map(|f| f.behaviour().unwrap().reads().into_iter().map(|r| r.label.name.to_string()))
        .collect();
    assert_eq!(labels, vec!["u", "v"]);
}
