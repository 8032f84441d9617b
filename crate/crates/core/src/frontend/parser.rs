//! Recursive-descent parser for `.sct` sources and annotation sidecars.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::ast::*;
use crate::term::{name, Name, ShallowPattern, Term, Value};

use super::diag::{Code, Diagnostic};
use super::lexer::{lex, Tok, Token};

const KEYWORDS: &[&str] = &[
    "type", "reftype", "ref", "of", "with", "def", "beh", "system", "order", "qi", "stop", "yield",
    "next", "read", "match", "then", "else",
];

const ITEM_KEYWORDS: &[&str] = &["type", "reftype", "def", "beh", "system", "order", "qi"];

type PResult<T> = Result<T, Diagnostic>;

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    /// Constructor and register names, collected before parsing.
    ctors: BTreeSet<Name>,
    warnings: Vec<Diagnostic>,
}

/// Constructor and register names are the identifiers directly after `=`
/// or `||` in a `type` item, and after `with` or `||` in a `reftype` item.
fn scan_constructors(toks: &[Token]) -> BTreeSet<Name> {
    #[derive(PartialEq)]
    enum Mode {
        Other,
        Type,
        Ref,
    }
    let mut mode = Mode::Other;
    let mut out = BTreeSet::new();
    for (i, t) in toks.iter().enumerate() {
        if let Tok::Ident(s) = &t.tok {
            if ITEM_KEYWORDS.contains(&s.as_str()) {
                mode = match s.as_str() {
                    "type" => Mode::Type,
                    "reftype" => Mode::Ref,
                    _ => Mode::Other,
                };
                continue;
            }
            let prev = if i > 0 { Some(&toks[i - 1].tok) } else { None };
            let hit = match mode {
                Mode::Type => matches!(prev, Some(Tok::Eq) | Some(Tok::BarBar)),
                Mode::Ref => matches!(prev, Some(Tok::BarBar))
                    || matches!(prev, Some(Tok::Ident(w)) if w == "with"),
                Mode::Other => false,
            };
            if hit && !KEYWORDS.contains(&s.as_str()) {
                out.insert(name(s));
            }
        }
    }
    out
}

impl Parser {
    fn new(toks: Vec<Token>) -> Parser {
        let ctors = scan_constructors(&toks);
        Parser { toks, pos: 0, ctors, warnings: Vec::new() }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn span(&self) -> Span {
        self.toks[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, what: &str) -> PResult<T> {
        Err(Diagnostic::error(
            self.span(),
            Code::Syntax,
            format!("expected {what}, found {}", self.peek().describe()),
        ))
    }

    fn expect(&mut self, t: Tok, what: &str) -> PResult<Span> {
        if *self.peek() == t {
            Ok(self.bump().span)
        } else {
            self.err(what)
        }
    }

    fn eat(&mut self, t: Tok) -> bool {
        if *self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Span> {
        if self.is_kw(kw) {
            Ok(self.bump().span)
        } else {
            self.err(&format!("`{kw}`"))
        }
    }

    /// A non-keyword identifier without the `^` suffix.
    fn ident(&mut self, what: &str) -> PResult<(Name, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) && !s.ends_with('^') => {
                let sp = self.bump().span;
                Ok((name(&s), sp))
            }
            _ => self.err(what),
        }
    }

    /// An identifier, possibly carrying the `^` suffix.
    fn symbol(&mut self) -> PResult<(Name, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let sp = self.bump().span;
                Ok((name(&s), sp))
            }
            _ => self.err("a symbol"),
        }
    }

    fn comma_list<T>(&mut self, mut item: impl FnMut(&mut Parser) -> PResult<T>) -> PResult<Vec<T>> {
        let mut out = vec![item(self)?];
        while self.eat(Tok::Comma) {
            out.push(item(self)?);
        }
        Ok(out)
    }

    // ---- items -------------------------------------------------------

    fn items(&mut self, annotations_only: bool) -> PResult<Program> {
        let mut p = Program::default();
        while *self.peek() != Tok::Eof {
            let kw = match self.peek() {
                Tok::Ident(kw) => kw.clone(),
                _ => return self.err("a declaration"),
            };
            match kw.as_str() {
                "order" => p.annotations.order.push(self.order_decl()?),
                "qi" => p.annotations.qi.push(self.qi_decl()?),
                _ if annotations_only => return self.err("`order` or `qi`"),
                "type" => p.types.push(self.type_decl()?),
                "reftype" => p.types.push(self.reftype_decl()?),
                "def" => p.functions.push(self.def_decl()?),
                "beh" => p.functions.push(self.beh_decl()?),
                "system" => {
                    self.bump();
                    self.expect(Tok::Eq, "`=`")?;
                    let threads = self.comma_list(|p| {
                        let span = p.span();
                        let (f, _) = p.ident("a behaviour name")?;
                        p.expect(Tok::LParen, "`(`")?;
                        let mut args = Vec::new();
                        if *p.peek() != Tok::RParen {
                            args = p.comma_list(Parser::value)?;
                        }
                        p.expect(Tok::RParen, "`)`")?;
                        Ok(ThreadInit { function: f, args, span })
                    })?;
                    p.system.extend(threads);
                }
                _ => return self.err("a declaration"),
            }
        }
        Ok(p)
    }

    fn type_decl(&mut self) -> PResult<TypeDecl> {
        let span = self.expect_kw("type")?;
        let (tname, _) = self.ident("a type name")?;
        self.expect(Tok::Eq, "`=`")?;
        let mut ctors = Vec::new();
        loop {
            let (c, _) = self.ident("a constructor name")?;
            let mut args = Vec::new();
            if self.is_kw("of") {
                self.bump();
                if self.eat(Tok::LParen) {
                    args = self.comma_list(|p| Ok(p.ident("a type name")?.0))?;
                    self.expect(Tok::RParen, "`)`")?;
                } else {
                    args.push(self.ident("a type name")?.0);
                }
            }
            ctors.push(CtorSig { name: c, args });
            if !self.eat(Tok::BarBar) {
                break;
            }
        }
        Ok(TypeDecl { name: tname, kind: TypeKind::Data(ctors), span })
    }

    fn reftype_decl(&mut self) -> PResult<TypeDecl> {
        let span = self.expect_kw("reftype")?;
        let (tname, _) = self.ident("a type name")?;
        self.expect(Tok::Eq, "`=`")?;
        self.expect_kw("ref")?;
        let (referent, _) = self.ident("a type name")?;
        self.expect_kw("with")?;
        let mut registers = Vec::new();
        loop {
            let (r, _) = self.ident("a register name")?;
            self.expect(Tok::Eq, "`=`")?;
            let default = self.value()?;
            registers.push(RegisterDecl { name: r, default });
            if !self.eat(Tok::BarBar) {
                break;
            }
        }
        Ok(TypeDecl { name: tname, kind: TypeKind::Ref { referent, registers }, span })
    }

    fn params(&mut self) -> PResult<Vec<Param>> {
        self.expect(Tok::LParen, "`(`")?;
        let mut ps = Vec::new();
        if *self.peek() != Tok::RParen {
            ps = self.comma_list(|p| {
                let (x, _) = p.ident("a parameter name")?;
                p.expect(Tok::Colon, "`:` and a parameter type")?;
                let (t, _) = p.ident("a type name")?;
                Ok(Param { name: x, ty: t })
            })?;
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(ps)
    }

    fn def_decl(&mut self) -> PResult<FunctionDef> {
        let span = self.expect_kw("def")?;
        let (f, _) = self.ident("a function name")?;
        let params = self.params()?;
        self.expect(Tok::Colon, "`:` and a result type")?;
        let (ret, _) = self.ident("a type name")?;
        self.expect(Tok::Eq, "`=`")?;
        let body = self.expr_body()?;
        Ok(FunctionDef { name: f, params, body: FunctionBody::Expr { ret, body }, span })
    }

    fn beh_decl(&mut self) -> PResult<FunctionDef> {
        let span = self.expect_kw("beh")?;
        let (f, _) = self.ident("a behaviour name")?;
        let params = self.params()?;
        self.expect(Tok::Eq, "`=`")?;
        let body = self.behaviour()?;
        Ok(FunctionDef { name: f, params, body: FunctionBody::Beh(body), span })
    }

    fn order_decl(&mut self) -> PResult<OrderChain> {
        let span = self.expect_kw("order")?;
        let mut symbols = vec![self.symbol()?.0];
        let mut rels = Vec::new();
        loop {
            let rel = match self.peek() {
                Tok::Gt => OrderRel::Greater,
                Tok::Eq => OrderRel::Equal,
                _ => break,
            };
            self.bump();
            rels.push(rel);
            symbols.push(self.symbol()?.0);
        }
        if rels.is_empty() {
            return self.err("`>` or `=`");
        }
        Ok(OrderChain { symbols, rels, span })
    }

    fn qi_decl(&mut self) -> PResult<QiDecl> {
        let span = self.expect_kw("qi")?;
        let (symbol, _) = self.symbol()?;
        self.expect(Tok::Eq, "`=`")?;
        let expr = self.qi_sum()?;
        Ok(QiDecl { symbol, expr, span })
    }

    // ---- quasi-interpretation expressions ----------------------------

    fn qi_sum(&mut self) -> PResult<QiExpr> {
        let mut terms = vec![self.qi_product()?];
        while self.eat(Tok::Plus) {
            terms.push(self.qi_product()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { QiExpr::Add(terms) })
    }

    fn qi_product(&mut self) -> PResult<QiExpr> {
        let span = self.span();
        let mut factors = vec![self.qi_factor()?];
        while self.eat(Tok::Star) {
            factors.push(self.qi_factor()?);
        }
        let mut coeff: Option<BigRational> = None;
        let mut body: Option<QiExpr> = None;
        for f in factors {
            match f {
                QiExpr::Const(c) => coeff = Some(coeff.map_or(c.clone(), |k| k * c)),
                other if body.is_none() => body = Some(other),
                _ => {
                    return Err(Diagnostic::error(
                        span,
                        Code::Syntax,
                        "a product may have at most one non-constant factor",
                    ))
                }
            }
        }
        Ok(match (coeff, body) {
            (Some(c), Some(b)) => QiExpr::Scale(c, Box::new(b)),
            (Some(c), None) => QiExpr::Const(c),
            (None, Some(b)) => b,
            (None, None) => unreachable!("at least one factor"),
        })
    }

    fn qi_factor(&mut self) -> PResult<QiExpr> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                let num: BigInt = n.parse().expect("digits");
                if self.eat(Tok::Slash) {
                    let Tok::Int(d) = self.peek().clone() else {
                        return self.err("a denominator");
                    };
                    let den: BigInt = d.parse().expect("digits");
                    if den == BigInt::from(0) {
                        return self.err("a nonzero denominator");
                    }
                    self.bump();
                    Ok(QiExpr::Const(BigRational::new(num, den)))
                } else {
                    Ok(QiExpr::Const(BigRational::from_integer(num)))
                }
            }
            Tok::LParen => {
                self.bump();
                let e = self.qi_sum()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(s) if s == "max" => {
                self.bump();
                self.expect(Tok::LParen, "`(`")?;
                let items = self.comma_list(Parser::qi_sum)?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(QiExpr::Max(items))
            }
            Tok::Ident(s)
                if s.len() > 1 && s.starts_with('x') && s[1..].chars().all(|c| c.is_ascii_digit()) =>
            {
                let k: usize = s[1..].parse().expect("digits");
                if k == 0 {
                    return self.err("a variable x1, x2, ...");
                }
                self.bump();
                Ok(QiExpr::Var(k))
            }
            _ => self.err("a number, a variable x1, x2, ..., or max(..)"),
        }
    }

    // ---- expressions ---------------------------------------------------

    fn atom(&mut self, x: Name) -> Term {
        if self.ctors.contains(&x) {
            Term::Ctor(x, Vec::new())
        } else {
            Term::Var(x)
        }
    }

    fn expr(&mut self) -> PResult<Term> {
        let (x, _) = self.ident("an expression")?;
        if self.eat(Tok::LParen) {
            let mut a = Vec::new();
            if *self.peek() != Tok::RParen {
                a = self.comma_list(Parser::expr)?;
            }
            self.expect(Tok::RParen, "`)`")?;
            Ok(if self.ctors.contains(&x) { Term::Ctor(x, a) } else { Term::Fun(x, a) })
        } else {
            Ok(self.atom(x))
        }
    }

    fn call_args(&mut self) -> PResult<Vec<Term>> {
        self.expect(Tok::LParen, "`(`")?;
        let mut a = Vec::new();
        if *self.peek() != Tok::RParen {
            a = self.comma_list(Parser::expr)?;
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(a)
    }

    fn value(&mut self) -> PResult<Value> {
        let span = self.span();
        let t = self.expr()?;
        t.to_value().ok_or_else(|| {
            Diagnostic::error(span, Code::Syntax, format!("`{t}` is not a constructor value"))
        })
    }

    fn shallow_pattern(&mut self) -> PResult<ShallowPattern> {
        let (c, sp) = self.ident("a constructor pattern")?;
        let mut vars = Vec::new();
        if self.eat(Tok::LParen) {
            if *self.peek() != Tok::RParen {
                vars = self.comma_list(|p| Ok(p.ident("a pattern variable")?.0))?;
            }
            self.expect(Tok::RParen, "`)`")?;
        }
        ShallowPattern::new(c, vars).map_err(|e| Diagnostic::error(sp, Code::Syntax, e.to_string()))
    }

    fn expr_body(&mut self) -> PResult<ExprBody> {
        if self.is_kw("match") {
            self.bump();
            let (x, _) = self.ident("a variable")?;
            self.expect_kw("with")?;
            let pattern = self.shallow_pattern()?;
            self.expect_kw("then")?;
            let then = self.expr_body()?;
            self.expect_kw("else")?;
            let els = self.expr_body()?;
            let scrutinee = self.atom(x);
            Ok(ExprBody::Match(Box::new(Match { scrutinee, pattern, then, els })))
        } else if self.eat(Tok::LParen) {
            let b = self.expr_body()?;
            self.expect(Tok::RParen, "`)`")?;
            Ok(b)
        } else {
            Ok(ExprBody::Expr(self.expr()?))
        }
    }

    // ---- behaviours ----------------------------------------------------

    fn behaviour(&mut self) -> PResult<Behaviour> {
        if self.eat(Tok::LParen) {
            let b = self.behaviour()?;
            self.expect(Tok::RParen, "`)`")?;
            return Ok(b);
        }
        let kw = match self.peek() {
            Tok::Ident(kw) => kw.clone(),
            _ => return self.err("a behaviour"),
        };
        match kw.as_str() {
            "stop" => {
                self.bump();
                Ok(Behaviour::Stop)
            }
            "yield" => {
                self.bump();
                self.expect(Tok::Dot, "`.` after yield")?;
                Ok(Behaviour::Yield(Box::new(self.behaviour()?)))
            }
            "next" => {
                self.bump();
                self.expect(Tok::Dot, "`.` after next")?;
                let (f, _) = self.ident("a behaviour call after next")?;
                let a = self.call_args()?;
                Ok(Behaviour::Next(f, a))
            }
            "match" => {
                self.bump();
                let (x, _) = self.ident("a variable")?;
                self.expect_kw("with")?;
                let pattern = self.shallow_pattern()?;
                self.expect_kw("then")?;
                let then = self.behaviour()?;
                self.expect_kw("else")?;
                let els = self.behaviour()?;
                let scrutinee = self.atom(x);
                Ok(Behaviour::Match(Box::new(Match { scrutinee, pattern, then, els })))
            }
            "read" => self.read(),
            _ if KEYWORDS.contains(&kw.as_str()) => self.err("a behaviour"),
            _ if *self.peek_at(1) == Tok::Assign => {
                let (r, _) = self.ident("a register")?;
                self.bump();
                let target = self.atom(r);
                let value = self.expr()?;
                self.expect(Tok::Dot, "`.` after the assigned expression")?;
                let then = self.behaviour()?;
                Ok(Behaviour::Assign(Box::new(Assign { target, value, then })))
            }
            _ => {
                let (f, _) = self.ident("a behaviour call")?;
                let a = self.call_args()?;
                Ok(Behaviour::Call(f, a))
            }
        }
    }

    fn read(&mut self) -> PResult<Behaviour> {
        self.expect_kw("read")?;
        let mut explicit = None;
        if self.eat(Tok::Lt) {
            explicit = Some(self.ident("a label")?.0);
            self.expect(Tok::Gt, "`>`")?;
        }
        let (r, _) = self.ident("a register")?;
        let target = self.atom(r);
        self.expect_kw("with")?;
        let mut branches = Vec::new();
        let mut catch_all: Option<Name> = None;
        let default = loop {
            if self.eat(Tok::Default) {
                self.expect(Tok::Arrow, "`=>`")?;
                let (f, _) = self.ident("a behaviour call")?;
                let a = self.call_args()?;
                break (f, a);
            }
            let sp = self.span();
            let pat = self.shallow_pattern()?;
            self.expect(Tok::Arrow, "`=>`")?;
            let body = self.behaviour()?;
            let pattern = if pat.vars.is_empty() && !self.ctors.contains(&pat.ctor) {
                ReadPattern::Var(pat.ctor)
            } else {
                ReadPattern::Ctor(pat)
            };
            if let Some(x) = &catch_all {
                self.warnings.push(Diagnostic::warning(
                    sp,
                    Code::DeadBranch,
                    format!("unreachable branch dropped: the variable pattern `{x}` above always matches"),
                ));
            } else {
                if let ReadPattern::Var(x) = &pattern {
                    catch_all = Some(x.clone());
                }
                branches.push(ReadBranch { pattern, body });
            }
            self.expect(Tok::Bar, "`|` (a read ends with `[_] => f(..)`)")?;
        };
        let label = Label {
            index: 0,
            name: explicit.clone().unwrap_or_else(|| name("")),
            explicit: explicit.is_some(),
        };
        Ok(Behaviour::Read(Box::new(Read { label, target, branches, default })))
    }
}

/// Gives every read its global index in source order and a name. Labels
/// without an explicit name get `yN`, primed until distinct from every
/// variable and label in the program.
fn assign_labels(p: &mut Program) {
    let mut taken: BTreeSet<Name> = BTreeSet::new();
    for f in &p.functions {
        taken.extend(function_variables(f));
        if let Some(b) = f.behaviour() {
            for r in b.reads() {
                if r.label.explicit {
                    taken.insert(r.label.name.clone());
                }
            }
        }
    }
    let mut counter = 0usize;
    for f in &mut p.functions {
        if let FunctionBody::Beh(b) = &mut f.body {
            label_reads(b, &mut counter, &mut taken);
        }
    }
}

fn label_reads(b: &mut Behaviour, counter: &mut usize, taken: &mut BTreeSet<Name>) {
    match b {
        Behaviour::Stop | Behaviour::Call(..) | Behaviour::Next(..) => {}
        Behaviour::Yield(b) => label_reads(b, counter, taken),
        Behaviour::Assign(a) => label_reads(&mut a.then, counter, taken),
        Behaviour::Match(m) => {
            label_reads(&mut m.then, counter, taken);
            label_reads(&mut m.els, counter, taken);
        }
        Behaviour::Read(r) => {
            *counter += 1;
            r.label.index = *counter - 1;
            if !r.label.explicit {
                let mut n = format!("y{counter}");
                while taken.contains(n.as_str()) {
                    n.push('\'');
                }
                r.label.name = name(&n);
                taken.insert(r.label.name.clone());
            }
            for br in &mut r.branches {
                label_reads(&mut br.body, counter, taken);
            }
        }
    }
}

/// Formals and every pattern-bound variable of a function.
pub fn function_variables(f: &FunctionDef) -> BTreeSet<Name> {
    let mut out: BTreeSet<Name> = f.params.iter().map(|p| p.name.clone()).collect();
    fn beh(b: &Behaviour, out: &mut BTreeSet<Name>) {
        match b {
            Behaviour::Stop | Behaviour::Call(..) | Behaviour::Next(..) => {}
            Behaviour::Yield(b) => beh(b, out),
            Behaviour::Assign(a) => beh(&a.then, out),
            Behaviour::Match(m) => {
                out.extend(m.pattern.vars.iter().cloned());
                beh(&m.then, out);
                beh(&m.els, out);
            }
            Behaviour::Read(r) => {
                for br in &r.branches {
                    out.extend(br.pattern.binders());
                    beh(&br.body, out);
                }
            }
        }
    }
    fn expr(e: &ExprBody, out: &mut BTreeSet<Name>) {
        if let ExprBody::Match(m) = e {
            out.extend(m.pattern.vars.iter().cloned());
            expr(&m.then, out);
            expr(&m.els, out);
        }
    }
    match &f.body {
        FunctionBody::Beh(b) => beh(b, &mut out),
        FunctionBody::Expr { body, .. } => expr(body, &mut out),
    }
    out
}

/// Parse a complete source file. Warnings are returned alongside the
/// program; a syntax error stops parsing.
pub fn parse_program(src: &str) -> Result<(Program, Vec<Diagnostic>), Vec<Diagnostic>> {
    let toks = lex(src).map_err(|d| vec![d])?;
    let mut p = Parser::new(toks);
    let mut prog = p.items(false).map_err(|d| {
        let mut ds = p.warnings.clone();
        ds.push(d);
        ds
    })?;
    assign_labels(&mut prog);
    Ok((prog, p.warnings))
}

/// Parse a sidecar file holding only `order` and `qi` items.
pub fn parse_annotations(src: &str) -> Result<Annotations, Diagnostic> {
    let toks = lex(src)?;
    let mut p = Parser::new(toks);
    Ok(p.items(true)?.annotations)
}
