//! Compilation of function definitions to bytecode.

use crate::ast::*;
use crate::frontend::{Signature, TypedProgram};
use crate::term::{Head, Name, Term};

use super::{Instr, Module, Segment, Slot};

type ArmCompiler<'a, S, B> = dyn FnMut(&mut S, &B, &[Name]) -> Result<(), CompileError> + 'a;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum CompileError {
    #[error("{function}: variable `{var}` is not on the stack")]
    Unbound { function: Name, var: Name },
}

/// i(x, η): 1-based index of the rightmost occurrence of `x` in `eta`, or
/// the register itself when `x` is a register constant.
pub fn var_index(x: &Term, eta: &[Name], sig: &Signature) -> Option<Slot> {
    match x {
        Term::Var(v) => eta.iter().rposition(|y| y == v).map(|k| Slot::Index(k + 1)),
        _ => match x.app() {
            Some((Head::Ctor, r, args)) if args.is_empty() && sig.is_register(r) => Some(Slot::Reg(r.clone())),
            _ => None,
        },
    }
}

struct Asm<'a> {
    sig: &'a Signature,
    function: Name,
    code: Vec<Instr>,
}

impl Asm<'_> {
    /// Position the next emitted instruction will get.
    fn here(&self) -> usize {
        self.code.len() + 1
    }

    fn emit(&mut self, i: Instr) -> usize {
        self.code.push(i);
        self.code.len()
    }

    fn patch(&mut self, at: usize, target: usize) {
        match &mut self.code[at - 1] {
            Instr::Branch(_, j) | Instr::Wait(j) => *j = target,
            other => unreachable!("patching `{other}`"),
        }
    }

    fn slot(&self, x: &Term, eta: &[Name]) -> Result<Slot, CompileError> {
        var_index(x, eta, self.sig).ok_or_else(|| CompileError::Unbound {
            function: self.function.clone(),
            var: x.to_string().into(),
        })
    }

    fn index(&self, x: &Name, eta: &[Name]) -> Result<usize, CompileError> {
        match self.slot(&Term::Var(x.clone()), eta)? {
            Slot::Index(k) => Ok(k),
            Slot::Reg(_) => unreachable!("variables resolve to indexes"),
        }
    }

    /// C'(e, η)
    fn expr(&mut self, e: &Term, eta: &[Name]) -> Result<(), CompileError> {
        if let Term::Var(x) = e {
            let k = self.index(x, eta)?;
            self.emit(Instr::Load(k));
            return Ok(());
        }
        let (head, f, args) = e.app().expect("application");
        for a in &args {
            self.expr(a, eta)?;
        }
        let n = args.len();
        self.emit(match head {
            Head::Ctor => Instr::Build(f.clone(), n),
            Head::Fun => Instr::Call(f.clone(), n),
        });
        Ok(())
    }

    /// The `match` layout shared by expression bodies and behaviours. The
    /// closures compile the two arms under the given stack shapes.
    fn matching<B>(
        &mut self,
        m: &Match<B>,
        eta: &[Name],
        arm: &mut ArmCompiler<Self, B>,
    ) -> Result<(), CompileError> {
        let Term::Var(x) = &m.scrutinee else {
            unreachable!("matches are on variables")
        };
        let c = m.pattern.ctor.clone();
        let ys = &m.pattern.vars;
        if eta.last() == Some(x) {
            let b = self.emit(Instr::Branch(c, 0));
            let mut then_eta = eta[..eta.len() - 1].to_vec();
            then_eta.extend(ys.iter().cloned());
            arm(self, &m.then, &then_eta)?;
            let j = self.here();
            self.patch(b, j);
            arm(self, &m.els, eta)
        } else {
            let k = self.index(x, eta)?;
            self.emit(Instr::Load(k));
            let b = self.emit(Instr::Branch(c, 0));
            let mut then_eta = eta.to_vec();
            then_eta.extend(ys.iter().cloned());
            arm(self, &m.then, &then_eta)?;
            let j = self.here();
            self.patch(b, j);
            let mut else_eta = eta.to_vec();
            else_eta.push(x.clone());
            arm(self, &m.els, &else_eta)
        }
    }

    /// C(eb, η) for expression bodies.
    fn body(&mut self, eb: &ExprBody, eta: &[Name]) -> Result<(), CompileError> {
        match eb {
            ExprBody::Expr(e) => {
                self.expr(e, eta)?;
                self.emit(Instr::Return);
                Ok(())
            }
            ExprBody::Match(m) => self.matching(m, eta, &mut |s, b, eta| s.body(b, eta)),
        }
    }

    fn tail_call(&mut self, f: &Name, args: &[Term], eta: &[Name]) -> Result<(), CompileError> {
        for a in args {
            self.expr(a, eta)?;
        }
        self.emit(Instr::TCall(f.clone(), args.len()));
        Ok(())
    }

    /// C(b, η) for behaviours.
    fn beh(&mut self, b: &Behaviour, eta: &[Name]) -> Result<(), CompileError> {
        match b {
            Behaviour::Stop => {
                self.emit(Instr::Stop);
                Ok(())
            }
            Behaviour::Call(f, args) => self.tail_call(f, args, eta),
            Behaviour::Yield(next) => {
                self.emit(Instr::Yield);
                self.beh(next, eta)
            }
            Behaviour::Next(f, args) => {
                self.emit(Instr::Next);
                self.tail_call(f, args, eta)
            }
            Behaviour::Assign(a) => {
                self.expr(&a.value, eta)?;
                let s = self.slot(&a.target, eta)?;
                self.emit(Instr::Write(s));
                self.beh(&a.then, eta)
            }
            Behaviour::Match(m) => self.matching(m, eta, &mut |s, b, eta| s.beh(b, eta)),
            Behaviour::Read(r) => self.read(r, eta),
        }
    }

    fn read(&mut self, r: &Read, eta: &[Name]) -> Result<(), CompileError> {
        let s = self.slot(&r.target, eta)?;
        let j0 = self.emit(Instr::Read(s));
        for br in &r.branches {
            match &br.pattern {
                ReadPattern::Ctor(p) => {
                    let b = self.emit(Instr::Branch(p.ctor.clone(), 0));
                    let mut inner = eta.to_vec();
                    inner.extend(p.vars.iter().cloned());
                    self.beh(&br.body, &inner)?;
                    let next = self.here();
                    self.patch(b, next);
                }
                ReadPattern::Var(y) => {
                    let mut inner = eta.to_vec();
                    inner.push(y.clone());
                    return self.beh(&br.body, &inner);
                }
            }
        }
        self.emit(Instr::Wait(j0));
        let (g, args) = &r.default;
        self.tail_call(g, args, eta)
    }
}

/// C(be, x1 ... xn) for a definition `f(x1, ..., xn) = be`.
pub fn compile_function(def: &FunctionDef, sig: &Signature) -> Result<Segment, CompileError> {
    let mut asm = Asm { sig, function: def.name.clone(), code: Vec::new() };
    let eta = def.formals();
    match &def.body {
        FunctionBody::Expr { body, .. } => asm.body(body, &eta)?,
        FunctionBody::Beh(b) => asm.beh(b, &eta)?,
    }
    Ok(Segment { name: def.name.clone(), arity: def.arity(), code: asm.code })
}

pub fn compile_program(tp: &TypedProgram) -> Result<Module, CompileError> {
    let segments = tp.program.functions.iter().map(|f| compile_function(f, &tp.sig)).collect::<Result<_, _>>()?;
    Ok(Module {
        types: tp.program.types.clone(),
        sig: tp.sig.clone(),
        system: tp.program.system.clone(),
        annotations: tp.program.annotations.clone(),
        segments,
    })
}
