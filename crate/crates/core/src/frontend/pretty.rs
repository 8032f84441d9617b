//! Pretty printer producing source text that parses back to the same AST.

use std::fmt::Write;

use crate::ast::*;
use crate::term::Term;

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

fn call(f: &str, args: &[Term]) -> String {
    format!("{f}({})", join(args))
}

pub fn expr_body(eb: &ExprBody) -> String {
    match eb {
        ExprBody::Expr(e) => e.to_string(),
        ExprBody::Match(m) => format!(
            "match {} with {} then {} else {}",
            m.scrutinee,
            m.pattern,
            expr_body(&m.then),
            expr_body(&m.els)
        ),
    }
}

pub fn behaviour(b: &Behaviour) -> String {
    match b {
        Behaviour::Stop => "stop".into(),
        Behaviour::Call(f, a) => call(f, a),
        Behaviour::Yield(b) => format!("yield . {}", behaviour(b)),
        Behaviour::Next(f, a) => format!("next . {}", call(f, a)),
        Behaviour::Assign(a) => format!("{} := {} . {}", a.target, a.value, behaviour(&a.then)),
        Behaviour::Read(r) => {
            let mut s = String::from("read");
            if r.label.explicit {
                write!(s, "<{}>", r.label.name).unwrap();
            }
            write!(s, " {} with ", r.target).unwrap();
            for br in &r.branches {
                let p = match &br.pattern {
                    ReadPattern::Var(x) => x.to_string(),
                    ReadPattern::Ctor(p) => p.to_string(),
                };
                write!(s, "{p} => {} | ", behaviour(&br.body)).unwrap();
            }
            write!(s, "[_] => {}", call(&r.default.0, &r.default.1)).unwrap();
            s
        }
        Behaviour::Match(m) => format!(
            "match {} with {} then {} else {}",
            m.scrutinee,
            m.pattern,
            behaviour(&m.then),
            behaviour(&m.els)
        ),
    }
}

pub fn qi_expr(e: &QiExpr) -> String {
    match e {
        QiExpr::Const(c) => c.to_string(),
        QiExpr::Var(i) => format!("x{i}"),
        QiExpr::Add(ts) => ts.iter().map(qi_expr).collect::<Vec<_>>().join(" + "),
        QiExpr::Scale(c, e) => match **e {
            QiExpr::Add(_) => format!("{c}*({})", qi_expr(e)),
            _ => format!("{c}*{}", qi_expr(e)),
        },
        QiExpr::Max(ts) => format!("max({})", ts.iter().map(qi_expr).collect::<Vec<_>>().join(", ")),
    }
}

pub fn annotations(a: &Annotations) -> String {
    let mut out = String::new();
    for o in &a.order {
        out.push_str("order ");
        out.push_str(&o.symbols[0]);
        for (r, s) in o.rels.iter().zip(&o.symbols[1..]) {
            out.push_str(match r {
                OrderRel::Greater => " > ",
                OrderRel::Equal => " = ",
            });
            out.push_str(s);
        }
        out.push('\n');
    }
    for q in &a.qi {
        writeln!(out, "qi {} = {}", q.symbol, qi_expr(&q.expr)).unwrap();
    }
    out
}

fn params(ps: &[Param]) -> String {
    ps.iter().map(|p| format!("{}: {}", p.name, p.ty)).collect::<Vec<_>>().join(", ")
}

pub fn program(p: &Program) -> String {
    let mut out = String::new();
    for t in &p.types {
        match &t.kind {
            TypeKind::Data(cs) => {
                let alts: Vec<String> = cs
                    .iter()
                    .map(|c| match c.args.len() {
                        0 => c.name.to_string(),
                        1 => format!("{} of {}", c.name, c.args[0]),
                        _ => format!("{} of ({})", c.name, join(&c.args)),
                    })
                    .collect();
                writeln!(out, "type {} = {}", t.name, alts.join(" || ")).unwrap();
            }
            TypeKind::Ref { referent, registers } => {
                let regs: Vec<String> = registers.iter().map(|r| format!("{} = {}", r.name, r.default)).collect();
                writeln!(out, "reftype {} = ref {referent} with {}", t.name, regs.join(" || ")).unwrap();
            }
        }
    }
    for f in &p.functions {
        match &f.body {
            FunctionBody::Expr { ret, body } => {
                writeln!(out, "def {}({}) : {ret} = {}", f.name, params(&f.params), expr_body(body)).unwrap()
            }
            FunctionBody::Beh(b) => {
                writeln!(out, "beh {}({}) = {}", f.name, params(&f.params), behaviour(b)).unwrap()
            }
        }
    }
    if !p.system.is_empty() {
        let ths: Vec<String> = p
            .system
            .iter()
            .map(|t| format!("{}({})", t.function, join(&t.args)))
            .collect();
        writeln!(out, "system = {}", ths.join(", ")).unwrap();
    }
    out.push_str(&annotations(&p.annotations));
    out
}
