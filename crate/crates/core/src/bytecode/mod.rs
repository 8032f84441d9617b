//! Bytecode instructions, code segments and the `.sbc` text format.

pub mod compile;
pub mod flow;

use std::collections::BTreeMap;
use std::fmt;

use crate::ast::{Annotations, Program, ThreadInit, TypeDecl};
use crate::frontend::typecheck::FunInfo;
use crate::frontend::{self, pretty, Signature};
use crate::term::{name, Name};

pub use compile::{compile_function, compile_program, var_index, CompileError};
pub use flow::{build_flow_graph, check_flow_properties, EdgeKind, FlowGraph, FlowReport};

/// Operand of `read` and `write`: a stack index or a register constant.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Slot {
    Index(usize),
    Reg(Name),
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Index(k) => write!(f, "{k}"),
            Slot::Reg(r) => write!(f, "{r}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Instr {
    Load(usize),
    Branch(Name, usize),
    Build(Name, usize),
    Call(Name, usize),
    TCall(Name, usize),
    Return,
    Read(Slot),
    Write(Slot),
    Stop,
    Yield,
    Next,
    Wait(usize),
}

impl Instr {
    pub fn mnemonic(&self) -> &'static str {
        match self {
            Instr::Load(_) => "load",
            Instr::Branch(..) => "branch",
            Instr::Build(..) => "build",
            Instr::Call(..) => "call",
            Instr::TCall(..) => "tcall",
            Instr::Return => "return",
            Instr::Read(_) => "read",
            Instr::Write(_) => "write",
            Instr::Stop => "stop",
            Instr::Yield => "yield",
            Instr::Next => "next",
            Instr::Wait(_) => "wait",
        }
    }

    /// Jump target of `branch` and `wait`.
    pub fn target(&self) -> Option<usize> {
        match self {
            Instr::Branch(_, j) | Instr::Wait(j) => Some(*j),
            _ => None,
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, Instr::Return | Instr::Stop | Instr::TCall(..))
    }
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = self.mnemonic();
        match self {
            Instr::Load(k) | Instr::Wait(k) => write!(f, "{m} {k}"),
            Instr::Branch(c, j) => write!(f, "{m} {c} {j}"),
            Instr::Build(c, n) | Instr::Call(c, n) | Instr::TCall(c, n) => write!(f, "{m} {c} {n}"),
            Instr::Read(s) | Instr::Write(s) => write!(f, "{m} {s}"),
            Instr::Return | Instr::Stop | Instr::Yield | Instr::Next => f.write_str(m),
        }
    }
}

/// The code of one function; `code[i - 1]` is instruction `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    pub name: Name,
    pub arity: usize,
    pub code: Vec<Instr>,
}

impl Segment {
    /// Instruction `i`, 1-based.
    pub fn at(&self, i: usize) -> Option<&Instr> {
        i.checked_sub(1).and_then(|k| self.code.get(k))
    }

    pub fn len(&self) -> usize {
        self.code.len()
    }

    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }

    pub fn render(&self) -> String {
        let mut s = format!("func {}/{}\n", self.name, self.arity);
        for (k, ins) in self.code.iter().enumerate() {
            s.push_str(&format!("{}: {ins}\n", k + 1));
        }
        s
    }

    /// Structural checks: nonempty, terminal last instruction, jump targets
    /// inside the segment.
    pub fn validate(&self) -> Result<(), String> {
        match self.code.last() {
            None => return Err(format!("segment {} is empty", self.name)),
            Some(i) if !i.is_terminal() => {
                return Err(format!("segment {} ends with `{i}`, not return, stop or tcall", self.name))
            }
            _ => {}
        }
        for (k, ins) in self.code.iter().enumerate() {
            if let Some(j) = ins.target() {
                if j == 0 || j > self.code.len() {
                    return Err(format!("{}:{}: jump target {j} outside the segment", self.name, k + 1));
                }
            }
            if let Instr::Load(0) | Instr::Read(Slot::Index(0)) | Instr::Write(Slot::Index(0)) = ins {
                return Err(format!("{}:{}: stack index 0", self.name, k + 1));
            }
        }
        Ok(())
    }
}

/// A compiled system: declarations, initial threads and code.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Module {
    pub types: Vec<TypeDecl>,
    pub sig: Signature,
    pub system: Vec<ThreadInit>,
    pub annotations: Annotations,
    pub segments: Vec<Segment>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

fn perr(line: usize, message: impl Into<String>) -> ParseError {
    ParseError { line, message: message.into() }
}

impl Module {
    pub fn segment(&self, f: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| &*s.name == f)
    }

    /// Position of a segment, used as the total order on function symbols.
    pub fn segment_index(&self, f: &str) -> Option<usize> {
        self.segments.iter().position(|s| &*s.name == f)
    }

    /// Declarations in the form the frontend understands, with the
    /// functions left out.
    pub fn declarations(&self) -> Program {
        Program { types: self.types.clone(), ..Program::default() }
    }

    pub fn render(&self) -> String {
        let mut out = pretty::program(&self.declarations());
        for (f, info) in &self.sig.functions {
            let ret = info.ret.as_deref().unwrap_or("beh");
            let params: Vec<&str> = info.params.iter().map(|p| &**p).collect();
            out.push_str(&format!("decl {f}({}) : {ret}\n", params.join(", ")));
        }
        out.push_str(&pretty::program(&Program {
            system: self.system.clone(),
            annotations: self.annotations.clone(),
            ..Program::default()
        }));
        for s in &self.segments {
            out.push('\n');
            out.push_str(&s.render());
        }
        out
    }

    pub fn parse(src: &str) -> Result<Module, ParseError> {
        let mut header = String::new();
        let mut decls = Vec::new();
        let mut segments: Vec<Segment> = Vec::new();
        for (k, raw) in src.lines().enumerate() {
            let line = k + 1;
            let text = raw.split("--").next().unwrap_or("").trim();
            if text.is_empty() {
                header.push('\n');
                continue;
            }
            if let Some(rest) = text.strip_prefix("func ") {
                let (f, n) = rest.trim().split_once('/').ok_or_else(|| perr(line, "expected `func name/arity`"))?;
                let arity = n.trim().parse().map_err(|_| perr(line, format!("bad arity `{n}`")))?;
                segments.push(Segment { name: name(f.trim()), arity, code: Vec::new() });
                header.push('\n');
                continue;
            }
            if let Some(seg) = segments.last_mut() {
                let (idx, ins) = text.split_once(':').ok_or_else(|| perr(line, "expected `index: instruction`"))?;
                let idx: usize = idx.trim().parse().map_err(|_| perr(line, format!("bad index `{idx}`")))?;
                if idx != seg.code.len() + 1 {
                    return Err(perr(line, format!("expected index {}, found {idx}", seg.code.len() + 1)));
                }
                seg.code.push(parse_instr(ins.trim()).map_err(|m| perr(line, m))?);
                continue;
            }
            if let Some(rest) = text.strip_prefix("decl ") {
                decls.push((line, rest.to_string()));
                header.push('\n');
            } else {
                header.push_str(raw);
                header.push('\n');
            }
        }
        let (prog, _) = frontend::parse_program(&header).map_err(|ds| diag_error(&ds))?;
        let decl_prog = Program { types: prog.types.clone(), ..Program::default() };
        let mut sig = frontend::typecheck(decl_prog, Vec::new()).map_err(|ds| diag_error(&ds))?.sig;
        let mut functions = BTreeMap::new();
        for (line, d) in decls {
            let (f, info) = parse_decl(&d, &sig).map_err(|m| perr(line, m))?;
            functions.insert(f, info);
        }
        sig.functions = functions;
        for s in &segments {
            s.validate().map_err(|m| perr(0, m))?;
        }
        Ok(Module { types: prog.types, sig, system: prog.system, annotations: prog.annotations, segments })
    }
}

fn diag_error(ds: &[frontend::Diagnostic]) -> ParseError {
    let d = ds.iter().find(|d| d.is_error()).or(ds.first());
    match d {
        Some(d) => perr(d.line, d.message.clone()),
        None => perr(0, "invalid header"),
    }
}

fn parse_decl(d: &str, sig: &Signature) -> Result<(Name, FunInfo), String> {
    let (lhs, ret) = d.rsplit_once(':').ok_or("expected `decl f(types) : type`")?;
    let lhs = lhs.trim();
    let open = lhs.find('(').ok_or("expected `(` in decl")?;
    let inner = lhs[open + 1..].strip_suffix(')').ok_or("expected `)` in decl")?;
    let f = lhs[..open].trim();
    let known = |t: &str| -> Result<Name, String> {
        if sig.types.contains_key(t) {
            Ok(name(t))
        } else {
            Err(format!("unknown type `{t}`"))
        }
    };
    let params = inner
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(known)
        .collect::<Result<Vec<_>, _>>()?;
    let ret = match ret.trim() {
        "beh" => None,
        t => Some(known(t)?),
    };
    Ok((name(f), FunInfo { params, ret }))
}

fn parse_instr(s: &str) -> Result<Instr, String> {
    let parts: Vec<&str> = s.split_whitespace().collect();
    let num = |t: &str| t.parse::<usize>().map_err(|_| format!("expected a number, found `{t}`"));
    let slot = |t: &str| match t.parse::<usize>() {
        Ok(k) => Slot::Index(k),
        Err(_) => Slot::Reg(name(t)),
    };
    let ins = match parts.as_slice() {
        ["load", k] => Instr::Load(num(k)?),
        ["branch", c, j] => Instr::Branch(name(c), num(j)?),
        ["build", c, n] => Instr::Build(name(c), num(n)?),
        ["call", g, n] => Instr::Call(name(g), num(n)?),
        ["tcall", g, n] => Instr::TCall(name(g), num(n)?),
        ["return"] => Instr::Return,
        ["read", r] => Instr::Read(slot(r)),
        ["write", r] => Instr::Write(slot(r)),
        ["stop"] => Instr::Stop,
        ["yield"] => Instr::Yield,
        ["next"] => Instr::Next,
        ["wait", j] => Instr::Wait(num(j)?),
        _ => return Err(format!("unknown instruction `{s}`")),
    };
    Ok(ins)
}
