//! Reference interpreter: expression evaluation, behaviour reduction and
//! the instant-based scheduler.

use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use serde::Serialize;

use crate::ast::*;
use crate::frontend::TypedProgram;
use crate::term::{Name, Subst, Term, Value};

/// Thread status within an instant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Status {
    N,
    R,
    S,
    W,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::N => "N",
            Status::R => "R",
            Status::S => "S",
            Status::W => "W",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum InterpError {
    #[error("fuel exhausted in instant {instant}")]
    FuelExhausted { instant: usize },
    #[error("evaluation stuck: {0}")]
    Stuck(String),
}

/// Register contents, in declaration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Store {
    names: Vec<Name>,
    index: BTreeMap<Name, usize>,
    values: Vec<Value>,
}

impl Store {
    pub fn defaults(p: &Program) -> Store {
        let mut s = Store { names: Vec::new(), index: BTreeMap::new(), values: Vec::new() };
        for r in p.registers() {
            s.index.insert(r.name.clone(), s.names.len());
            s.names.push(r.name.clone());
            s.values.push(r.default.clone());
        }
        s
    }

    pub fn get(&self, r: &str) -> Option<&Value> {
        self.index.get(r).map(|&i| &self.values[i])
    }

    pub fn set(&mut self, r: &str, v: Value) -> bool {
        match self.index.get(r) {
            Some(&i) => {
                self.values[i] = v;
                true
            }
            None => false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &Value)> {
        self.names.iter().zip(self.values.iter())
    }

    /// Sum of the sizes of all register contents.
    pub fn total_size(&self) -> u128 {
        self.values.iter().fold(0u128, |a, v| a.saturating_add(v.size_u128()))
    }

    pub fn snapshot(&self) -> Vec<(Name, Value)> {
        self.iter().map(|(n, v)| (n.clone(), v.clone())).collect()
    }
}

/// Hooks into behaviour reduction, used by instrumentation and tests.
pub trait Observer {
    fn instant_start(&mut self, _instant: usize) {}
    /// Called on every behaviour reached during reduction.
    fn behaviour(&mut self, _thread: usize, _b: &Behaviour) {}
    fn read(&mut self, _thread: usize, _label: &Label, _value: &Value) {}
    fn write(&mut self, _thread: usize, _register: &Name, _value: &Value) {}
    fn call(&mut self, _thread: usize, _function: &Name, _args: &[Value]) {}
    fn value(&mut self, _thread: usize, _v: &Value) {}
}

pub struct NoObserver;
impl Observer for NoObserver {}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Write {
    pub register: String,
    pub value: String,
    pub size: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StepRecord {
    pub thread: usize,
    pub status: Status,
    pub writes: Vec<Write>,
}

/// Everything observable about one instant.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InstantRecord {
    pub instant: usize,
    pub steps: Vec<StepRecord>,
    /// Store at the end of the instant, before the reset.
    pub store: Vec<(String, String)>,
    pub stopped: Vec<usize>,
    pub max_value_size: u128,
    /// Largest machine configuration, filled in by the metering VM.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_config_size: Option<u128>,
    /// All threads stopped: no further instants.
    pub terminated: bool,
}

/// End-of-instant store contents and stopped threads.
pub type Observable = (Vec<(String, String)>, Vec<usize>);

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Trace {
    pub instants: Vec<InstantRecord>,
}


impl Trace {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for ins in &self.instants {
            let k = ins.instant;
            for st in &ins.steps {
                let w = if st.writes.is_empty() {
                    "-".to_string()
                } else {
                    st.writes
                        .iter()
                        .map(|w| format!("{}={}(|v|={})", w.register, w.value, w.size))
                        .collect::<Vec<_>>()
                        .join(", ")
                };
                out.push_str(&format!("instant {k} | thread {} | {} | writes {w}\n", st.thread, st.status));
            }
            let store = ins.store.iter().map(|(r, v)| format!("{r}={v}")).collect::<Vec<_>>().join(", ");
            let stopped = ins.stopped.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",");
            out.push_str(&format!(
                "instant {k} | end | store {store} | stopped [{stopped}] | max-value-size {}\n",
                ins.max_value_size
            ));
            if let Some(c) = ins.max_config_size {
                out.push_str(&format!("instant {k} | max-config-size {c}\n"));
            }
            if ins.terminated {
                out.push_str(&format!("instant {k} | terminated\n"));
            }
        }
        out
    }

    /// One JSON object per line.
    pub fn render_records(&self) -> String {
        let mut out = String::new();
        for ins in &self.instants {
            for st in &ins.steps {
                let rec = serde_json::json!({"kind": "step", "instant": ins.instant, "thread": st.thread,
                    "status": st.status, "writes": st.writes});
                out.push_str(&rec.to_string());
                out.push('\n');
            }
            let mut rec = serde_json::json!({"kind": "end", "instant": ins.instant,
                "store": ins.store.iter().map(|(r, v)| serde_json::json!({"register": r, "value": v})).collect::<Vec<_>>(),
                "stopped": ins.stopped, "max_value_size": ins.max_value_size.to_string(),
                "terminated": ins.terminated});
            if let Some(c) = ins.max_config_size {
                rec["max_config_size"] = serde_json::json!(c.to_string());
            }
            out.push_str(&rec.to_string());
            out.push('\n');
        }
        out
    }

    /// Per instant: store snapshot and stopped threads.
    pub fn observable(&self) -> Vec<Observable> {
        self.instants.iter().map(|i| (i.store.clone(), i.stopped.clone())).collect()
    }
}

/// Expression evaluator with a step budget.
pub struct Evaluator<'p> {
    prog: &'p TypedProgram,
    functions: BTreeMap<Name, &'p FunctionDef>,
    pub fuel: u64,
}

impl<'p> Evaluator<'p> {
    pub fn new(prog: &'p TypedProgram, fuel: u64) -> Evaluator<'p> {
        let functions = prog.program.functions.iter().map(|f| (f.name.clone(), f)).collect();
        Evaluator { prog, functions, fuel }
    }

    pub fn program(&self) -> &'p TypedProgram {
        self.prog
    }

    pub fn function(&self, f: &str) -> Option<&'p FunctionDef> {
        self.functions.get(f).copied()
    }

    fn tick(&mut self) -> Result<(), ()> {
        if self.fuel == 0 {
            return Err(());
        }
        self.fuel -= 1;
        Ok(())
    }

    /// Evaluate a term under an environment. `Err(None)` means fuel ran out.
    pub fn eval(&mut self, t: &Term, env: &Subst, obs: &mut dyn FnMut(&Value)) -> Result<Value, Option<String>> {
        self.run(vec![Task::Eval(t, Rc::new(env.clone()))], obs)
    }

    /// Evaluate `f(vs)` for an expression function `f`.
    pub fn apply(&mut self, f: &str, vs: Vec<Value>, obs: &mut dyn FnMut(&Value)) -> Result<Value, Option<String>> {
        let n = vs.len();
        let mut tasks = vec![Task::Call(crate::term::name(f), n)];
        tasks.extend(vs.into_iter().rev().map(Task::Push));
        self.run(tasks, obs)
    }

    pub fn eval_body(&mut self, eb: &ExprBody, env: Subst, obs: &mut dyn FnMut(&Value)) -> Result<Value, Option<String>> {
        self.run(vec![Task::Body(eb, Rc::new(env))], obs)
    }

    /// Explicit-stack evaluation, so deep recursion in the object program
    /// does not exhaust the host stack.
    fn run<'a>(&mut self, mut tasks: Vec<Task<'a>>, obs: &mut dyn FnMut(&Value)) -> Result<Value, Option<String>>
    where
        'p: 'a,
    {
        let mut vals: Vec<Value> = Vec::new();
        while let Some(task) = tasks.pop() {
            match task {
                Task::Push(v) => vals.push(v),
                Task::Eval(t, env) => {
                    self.tick().map_err(|_| None)?;
                    match t {
                        Term::Var(x) => {
                            vals.push(env.get(x).cloned().ok_or_else(|| Some(format!("unbound variable `{x}`")))?)
                        }
                        Term::Val(v) => vals.push(v.clone()),
                        Term::Ctor(c, args) => {
                            tasks.push(Task::Build(c.clone(), args.len()));
                            tasks.extend(args.iter().rev().map(|a| Task::Eval(a, env.clone())));
                        }
                        Term::Fun(f, args) => {
                            tasks.push(Task::Call(f.clone(), args.len()));
                            tasks.extend(args.iter().rev().map(|a| Task::Eval(a, env.clone())));
                        }
                    }
                }
                Task::Build(c, n) => {
                    let args = vals.split_off(vals.len() - n);
                    vals.push(Value::new(c, args));
                }
                Task::Call(f, n) => {
                    let args = vals.split_off(vals.len() - n);
                    let def = self.function(&f).ok_or_else(|| Some(format!("unknown function `{f}`")))?;
                    let FunctionBody::Expr { body, .. } = &def.body else {
                        return Err(Some(format!("`{f}` is a behaviour")));
                    };
                    let env: Subst = def.formals().into_iter().zip(args).collect();
                    tasks.push(Task::Observe);
                    tasks.push(Task::Body(body, Rc::new(env)));
                }
                Task::Observe => obs(vals.last().expect("value stack underflow")),
                Task::Body(ExprBody::Expr(e), env) => tasks.push(Task::Eval(e, env)),
                Task::Body(ExprBody::Match(m), env) => {
                    self.tick().map_err(|_| None)?;
                    tasks.push(Task::Select(m, env.clone()));
                    tasks.push(Task::Eval(&m.scrutinee, env));
                }
                Task::Select(m, env) => {
                    let v = vals.pop().expect("value stack underflow");
                    match m.pattern.matches(&v) {
                        Some(s) => {
                            let mut env = (*env).clone();
                            env.extend(s);
                            tasks.push(Task::Body(&m.then, Rc::new(env)));
                        }
                        None => tasks.push(Task::Body(&m.els, env)),
                    }
                }
            }
        }
        vals.pop().ok_or_else(|| Some("empty evaluation".to_string()))
    }
}

enum Task<'a> {
    Push(Value),
    Eval(&'a Term, Rc<Subst>),
    Build(Name, usize),
    Call(Name, usize),
    Observe,
    Body(&'a ExprBody, Rc<Subst>),
    Select(&'a Match<ExprBody>, Rc<Subst>),
}

/// Evaluate a closed expression body.
pub fn eval_expr(prog: &TypedProgram, eb: &ExprBody, fuel: u64) -> Result<Value, InterpError> {
    let mut ev = Evaluator::new(prog, fuel);
    ev.eval_body(eb, Subst::new(), &mut |_| {}).map_err(|e| match e {
        None => InterpError::FuelExhausted { instant: 0 },
        Some(m) => InterpError::Stuck(m),
    })
}

/// Result of one atomic sequence of behaviour reduction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reduced {
    pub behaviour: Behaviour,
    pub status: Status,
    pub writes: Vec<(Name, Value)>,
}

fn register_of(v: &Value) -> Name {
    v.head().clone()
}

/// Run `b` until a labelled rule fires (stop, yield, next, or a blocking read).
pub fn step_behaviour(
    ev: &mut Evaluator<'_>,
    thread: usize,
    b: &Behaviour,
    store: &mut Store,
    obs: &mut dyn Observer,
) -> Result<Reduced, Option<String>> {
    let mut b = b.clone();
    let mut writes = Vec::new();
    loop {
        obs.behaviour(thread, &b);
        ev.tick().map_err(|_| None)?;
        let mut on_value = |v: &Value| obs.value(thread, v);
        match b {
            Behaviour::Stop => return Ok(Reduced { behaviour: Behaviour::Stop, status: Status::S, writes }),
            Behaviour::Yield(next) => return Ok(Reduced { behaviour: *next, status: Status::R, writes }),
            Behaviour::Next(f, es) => {
                return Ok(Reduced { behaviour: Behaviour::Call(f, es), status: Status::N, writes })
            }
            Behaviour::Call(f, es) => {
                let mut vs = Vec::with_capacity(es.len());
                for e in &es {
                    vs.push(ev.eval(e, &Subst::new(), &mut on_value)?);
                }
                obs.call(thread, &f, &vs);
                let def = ev.function(&f).ok_or_else(|| Some(format!("unknown behaviour `{f}`")))?;
                let Some(body) = def.behaviour() else {
                    return Err(Some(format!("`{f}` is not a behaviour")));
                };
                let s: Subst = def.formals().into_iter().zip(vs).collect();
                b = body.apply(&s);
            }
            Behaviour::Assign(a) => {
                let r = register_of(&ev.eval(&a.target, &Subst::new(), &mut on_value)?);
                let v = ev.eval(&a.value, &Subst::new(), &mut on_value)?;
                obs.write(thread, &r, &v);
                if !store.set(&r, v.clone()) {
                    return Err(Some(format!("`{r}` is not a register")));
                }
                writes.push((r, v));
                b = a.then;
            }
            Behaviour::Read(r) => {
                let reg = register_of(&ev.eval(&r.target, &Subst::new(), &mut on_value)?);
                let v = store.get(&reg).cloned().ok_or_else(|| Some(format!("`{reg}` is not a register")))?;
                match select_branch(&r, &v) {
                    Some((s, body)) => {
                        obs.read(thread, &r.label, &v);
                        b = body.apply(&s);
                    }
                    None => return Ok(Reduced { behaviour: Behaviour::Read(r), status: Status::W, writes }),
                }
            }
            Behaviour::Match(m) => {
                let v = ev.eval(&m.scrutinee, &Subst::new(), &mut on_value)?;
                b = match m.pattern.matches(&v) {
                    Some(s) => m.then.apply(&s),
                    None => m.els,
                };
            }
        }
    }
}

/// First branch whose pattern matches `v`, top-down.
pub fn select_branch<'a>(r: &'a Read, v: &Value) -> Option<(Subst, &'a Behaviour)> {
    for br in &r.branches {
        match &br.pattern {
            ReadPattern::Var(x) => {
                let mut s = Subst::new();
                s.insert(x.clone(), v.clone());
                return Some((s, &br.body));
            }
            ReadPattern::Ctor(p) => {
                if let Some(s) = p.matches(v) {
                    return Some((s, &br.body));
                }
            }
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThreadState {
    pub behaviour: Behaviour,
    pub status: Status,
}

/// The whole system: threads, store and scheduler position.
pub struct System<'p> {
    prog: &'p TypedProgram,
    pub threads: Vec<ThreadState>,
    pub store: Store,
    s0: Store,
    pub current: usize,
    pub instant: usize,
    pub fuel_per_instant: u64,
}

impl<'p> System<'p> {
    pub fn new(prog: &'p TypedProgram, fuel_per_instant: u64) -> System<'p> {
        let threads = prog
            .program
            .system
            .iter()
            .map(|t| ThreadState {
                behaviour: Behaviour::Call(t.function.clone(), t.args.iter().map(Value::to_term).collect()),
                status: Status::R,
            })
            .collect();
        let s0 = Store::defaults(&prog.program);
        System { prog, threads, store: s0.clone(), s0, current: 0, instant: 0, fuel_per_instant }
    }

    fn eligible(&self, k: usize) -> bool {
        let t = &self.threads[k];
        match t.status {
            Status::R => true,
            Status::W => match &t.behaviour {
                Behaviour::Read(r) => {
                    let reg = match &r.target {
                        Term::Val(v) => Some(v.head().clone()),
                        Term::Ctor(c, a) if a.is_empty() => Some(c.clone()),
                        _ => None,
                    };
                    reg.and_then(|reg| self.store.get(&reg).cloned())
                        .is_some_and(|v| select_branch(r, &v).is_some())
                }
                _ => false,
            },
            Status::N | Status::S => false,
        }
    }

    /// Next runnable thread scanning cyclically from `from`, inclusive.
    fn scan(&self, from: usize) -> Option<usize> {
        let n = self.threads.len();
        (0..n).map(|d| (from + d) % n).find(|&k| self.eligible(k))
    }

    /// The scheduler function N: first eligible index after `i`.
    pub fn scheduler_next(&self, i: usize) -> Option<usize> {
        if self.threads.is_empty() {
            return None;
        }
        self.scan((i + 1) % self.threads.len())
    }

    /// The status update U plus store reset. Returns false when every
    /// thread is stopped.
    pub fn end_of_instant(&mut self) -> bool {
        for t in &mut self.threads {
            match t.status {
                Status::S => {}
                Status::N => t.status = Status::R,
                Status::W => {
                    if let Behaviour::Read(r) = &t.behaviour {
                        t.behaviour = Behaviour::Call(r.default.0.clone(), r.default.1.clone());
                    }
                    t.status = Status::R;
                }
                Status::R => {}
            }
        }
        self.store = self.s0.clone();
        self.instant += 1;
        self.threads.iter().any(|t| t.status != Status::S)
    }

    pub fn all_stopped(&self) -> bool {
        self.threads.iter().all(|t| t.status == Status::S)
    }

    /// Run one full instant and then apply U.
    pub fn run_instant(&mut self, obs: &mut dyn Observer) -> Result<InstantRecord, InterpError> {
        let instant = self.instant;
        obs.instant_start(instant);
        let mut ev = Evaluator::new(self.prog, self.fuel_per_instant);
        let mut steps = Vec::new();
        let mut max_size = self.store.iter().map(|(_, v)| v.size_u128()).max().unwrap_or(0);
        let mut next = if self.threads.is_empty() { None } else { self.scan(0) };
        while let Some(i) = next {
            self.current = i;
            self.threads[i].status = Status::R;
            let b = self.threads[i].behaviour.clone();
            let mut meter = SizeMeter { inner: obs, max: max_size };
            let red = step_behaviour(&mut ev, i, &b, &mut self.store, &mut meter).map_err(|e| match e {
                None => InterpError::FuelExhausted { instant },
                Some(m) => InterpError::Stuck(m),
            })?;
            max_size = meter.max;
            steps.push(StepRecord {
                thread: i,
                status: red.status,
                writes: red
                    .writes
                    .iter()
                    .map(|(r, v)| Write { register: r.to_string(), value: v.to_string(), size: v.size().to_string() })
                    .collect(),
            });
            self.threads[i] = ThreadState { behaviour: red.behaviour, status: red.status };
            next = self.scheduler_next(i);
        }
        let store = self.store.iter().map(|(r, v)| (r.to_string(), v.to_string())).collect();
        let stopped = (0..self.threads.len()).filter(|&k| self.threads[k].status == Status::S).collect();
        let alive = self.end_of_instant();
        Ok(InstantRecord {
            instant,
            steps,
            store,
            stopped,
            max_value_size: max_size,
            max_config_size: None,
            terminated: !alive,
        })
    }
}

struct SizeMeter<'a> {
    inner: &'a mut dyn Observer,
    max: u128,
}

impl Observer for SizeMeter<'_> {
    fn instant_start(&mut self, i: usize) {
        self.inner.instant_start(i)
    }
    fn behaviour(&mut self, t: usize, b: &Behaviour) {
        self.inner.behaviour(t, b)
    }
    fn read(&mut self, t: usize, l: &Label, v: &Value) {
        self.max = self.max.max(v.size_u128());
        self.inner.read(t, l, v)
    }
    fn write(&mut self, t: usize, r: &Name, v: &Value) {
        self.max = self.max.max(v.size_u128());
        self.inner.write(t, r, v)
    }
    fn call(&mut self, t: usize, f: &Name, args: &[Value]) {
        for a in args {
            self.max = self.max.max(a.size_u128());
        }
        self.inner.call(t, f, args)
    }
    fn value(&mut self, t: usize, v: &Value) {
        self.max = self.max.max(v.size_u128());
        self.inner.value(t, v)
    }
}

/// Run up to `instants` instants, stopping early once every thread is stopped.
pub fn run_observed(
    prog: &TypedProgram,
    instants: usize,
    fuel: u64,
    obs: &mut dyn Observer,
) -> Result<Trace, InterpError> {
    let mut sys = System::new(prog, fuel);
    let mut trace = Trace::default();
    for _ in 0..instants {
        let rec = sys.run_instant(obs)?;
        let done = rec.terminated;
        trace.instants.push(rec);
        if done {
            break;
        }
    }
    Ok(trace)
}

pub fn run(prog: &TypedProgram, instants: usize, fuel: u64) -> Result<Trace, InterpError> {
    run_observed(prog, instants, fuel, &mut NoObserver)
}
