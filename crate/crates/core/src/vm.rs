//! Virtual machine: frames, per-thread memories and the bytecode scheduler.

use std::collections::BTreeMap;
use std::fmt;

use crate::bytecode::{Instr, Module, Segment, Slot};
use crate::interp::{InstantRecord, Status, StepRecord, Store, Trace, Write};
use crate::term::{Name, Value};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub function: Name,
    /// 1-based instruction index.
    pub pc: usize,
    pub stack: Vec<Value>,
}

/// Thread status; `W(j, n)` resumes at `j` next instant and was suspended
/// at logical time `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VmStatus {
    R,
    S,
    N,
    W(usize, u64),
}

impl fmt::Display for VmStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VmStatus::R => f.write_str("R"),
            VmStatus::S => f.write_str("S"),
            VmStatus::N => f.write_str("N"),
            VmStatus::W(j, n) => write!(f, "W({j},{n})"),
        }
    }
}

/// The label returned by one instruction; `Eps` for unlabeled ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    Eps,
    S,
    R,
    N,
    W,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VmThread {
    pub status: VmStatus,
    pub memory: Vec<Frame>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum VmError {
    #[error("vm fault in thread {thread} at {function}:{pc}: {message}")]
    Fault { thread: usize, function: String, pc: usize, message: String },
    #[error("fuel exhausted in instant {instant}")]
    FuelExhausted { instant: usize },
}

/// Hook called before every executed instruction.
pub trait VmObserver {
    fn before(&mut self, _thread: usize, _frame: &Frame, _instr: &Instr) {}
}

pub struct NoVmObserver;
impl VmObserver for NoVmObserver {}

pub struct Vm<'m> {
    module: &'m Module,
    segments: BTreeMap<Name, &'m Segment>,
    pub threads: Vec<VmThread>,
    pub store: Store,
    s0: Store,
    pub tid: Option<usize>,
    pub time: u64,
    pub wtime: u64,
    pub instant: usize,
    pub fuel_per_instant: u64,
    pub meter: bool,
    pending_writes: Vec<Write>,
}

impl<'m> Vm<'m> {
    pub fn new(module: &'m Module, fuel_per_instant: u64, meter: bool) -> Vm<'m> {
        let segments = module.segments.iter().map(|s| (s.name.clone(), s)).collect();
        let threads: Vec<VmThread> = module
            .system
            .iter()
            .map(|t| VmThread {
                status: VmStatus::R,
                memory: vec![Frame { function: t.function.clone(), pc: 1, stack: t.args.clone() }],
            })
            .collect();
        let s0 = Store::defaults(&module.declarations());
        let tid = if threads.is_empty() { None } else { Some(0) };
        Vm {
            module,
            segments,
            threads,
            store: s0.clone(),
            s0,
            tid,
            time: 0,
            wtime: 0,
            instant: 0,
            fuel_per_instant,
            meter,
            pending_writes: Vec::new(),
        }
    }

    pub fn module(&self) -> &'m Module {
        self.module
    }

    fn fault(&self, t: usize, message: impl Into<String>) -> VmError {
        let (function, pc) = match self.threads[t].memory.last() {
            Some(fr) => (fr.function.to_string(), fr.pc),
            None => ("-".to_string(), 0),
        };
        VmError::Fault { thread: t, function, pc, message: message.into() }
    }

    /// The instruction thread `t` is about to execute.
    pub fn current_instr(&self, t: usize) -> Result<&'m Instr, VmError> {
        let fr = self.threads[t].memory.last().ok_or_else(|| self.fault(t, "no frame"))?;
        let seg = self.segments.get(&fr.function).ok_or_else(|| self.fault(t, "unknown function"))?;
        seg.at(fr.pc).ok_or_else(|| self.fault(t, "pc outside the segment"))
    }

    fn register_at(&self, stack: &[Value], k: usize) -> Result<Name, String> {
        let v = stack.get(k.wrapping_sub(1)).ok_or_else(|| format!("no stack slot {k}"))?;
        if v.arity() == 0 && self.store.get(v.head()).is_some() {
            Ok(v.head().clone())
        } else {
            Err(format!("slot {k} holds `{v}`, not a register"))
        }
    }

    /// Execute one instruction of thread `t`.
    pub fn exec_instruction(&mut self, t: usize) -> Result<Label, VmError> {
        let ins = self.current_instr(t)?;
        let mut mem = std::mem::take(&mut self.threads[t].memory);
        let r = self.exec(ins, &mut mem);
        self.threads[t].memory = mem;
        r.map_err(|m| self.fault(t, m))
    }

    fn exec(&mut self, ins: &Instr, mem: &mut Vec<Frame>) -> Result<Label, String> {
        let underflow = || format!("stack underflow at `{ins}`");
        let fr = mem.last_mut().expect("checked by current_instr");
        match ins {
            Instr::Load(k) => {
                let v = fr.stack.get(k.wrapping_sub(1)).cloned().ok_or_else(underflow)?;
                fr.stack.push(v);
                fr.pc += 1;
            }
            Instr::Branch(c, j) => {
                let v = fr.stack.last().cloned().ok_or_else(underflow)?;
                if v.head() == c {
                    fr.stack.pop();
                    fr.stack.extend(v.args().iter().cloned());
                    fr.pc += 1;
                } else {
                    fr.pc = *j;
                }
            }
            Instr::Build(c, n) => {
                if fr.stack.len() < *n {
                    return Err(underflow());
                }
                let args = fr.stack.split_off(fr.stack.len() - n);
                fr.stack.push(Value::new(c.clone(), args));
                fr.pc += 1;
            }
            Instr::Call(g, n) => {
                if fr.stack.len() < *n {
                    return Err(underflow());
                }
                let args = fr.stack[fr.stack.len() - n..].to_vec();
                mem.push(Frame { function: g.clone(), pc: 1, stack: args });
            }
            Instr::TCall(g, n) => {
                if fr.stack.len() < *n {
                    return Err(underflow());
                }
                let args = fr.stack.split_off(fr.stack.len() - n);
                *fr = Frame { function: g.clone(), pc: 1, stack: args };
            }
            Instr::Return => {
                let v = fr.stack.pop().ok_or_else(underflow)?;
                let callee = mem.pop().expect("nonempty");
                let ar = self.segments.get(&callee.function).map(|s| s.arity).unwrap_or(0);
                let Some(caller) = mem.last_mut() else {
                    mem.push(callee);
                    return Err("return without a caller".into());
                };
                if caller.stack.len() < ar {
                    mem.push(callee);
                    return Err("caller stack lacks the call arguments".into());
                }
                caller.stack.truncate(caller.stack.len() - ar);
                caller.stack.push(v);
                caller.pc += 1;
            }
            Instr::Read(s) => {
                let r = match s {
                    Slot::Reg(r) => r.clone(),
                    Slot::Index(k) => self.register_at(&fr.stack, *k)?,
                };
                let v = self.store.get(&r).cloned().ok_or_else(|| format!("unknown register {r}"))?;
                fr.stack.push(v);
                fr.pc += 1;
            }
            Instr::Write(s) => {
                let v = fr.stack.pop().ok_or_else(underflow)?;
                let r = match s {
                    Slot::Reg(r) => r.clone(),
                    Slot::Index(k) => self.register_at(&fr.stack, *k)?,
                };
                if !self.store.set(&r, v.clone()) {
                    return Err(format!("unknown register {r}"));
                }
                self.pending_writes.push(Write { register: r.to_string(), value: v.to_string(), size: v.size().to_string() });
                fr.pc += 1;
            }
            Instr::Stop => {
                mem.clear();
                return Ok(Label::S);
            }
            Instr::Yield => {
                fr.pc += 1;
                return Ok(Label::R);
            }
            Instr::Next => {
                fr.pc += 1;
                return Ok(Label::N);
            }
            Instr::Wait(j) => {
                fr.stack.pop().ok_or_else(underflow)?;
                fr.pc = *j;
                return Ok(Label::W);
            }
        }
        Ok(Label::Eps)
    }

    fn eligible(&self, k: usize) -> bool {
        match self.threads[k].status {
            VmStatus::R => true,
            VmStatus::W(_, n) => n < self.wtime,
            VmStatus::N | VmStatus::S => false,
        }
    }

    fn scan(&self, from: usize) -> Option<usize> {
        let n = self.threads.len();
        (0..n).map(|d| (from + d) % n).find(|&k| self.eligible(k))
    }

    /// The scheduler function N: first eligible index after `i`, cyclically.
    pub fn scheduler_next(&self, i: usize) -> Option<usize> {
        if self.threads.is_empty() {
            return None;
        }
        self.scan((i + 1) % self.threads.len())
    }

    fn config_size(&self) -> u128 {
        let stacks = self
            .threads
            .iter()
            .flat_map(|t| &t.memory)
            .flat_map(|f| &f.stack)
            .fold(0u128, |a, v| a.saturating_add(v.size_u128()));
        stacks.saturating_add(self.store.total_size())
    }

    fn largest_value(&self) -> u128 {
        let stacks = self.threads.iter().flat_map(|t| &t.memory).flat_map(|f| &f.stack).map(Value::size_u128);
        let store = self.store.iter().map(|(_, v)| v.size_u128());
        stacks.chain(store).max().unwrap_or(0)
    }

    /// Whether the machine still has an instant to run.
    pub fn alive(&self) -> bool {
        self.tid.is_some()
    }

    /// Run the scheduler loop until the end of the current instant.
    pub fn run_instant(&mut self, obs: &mut dyn VmObserver) -> Result<InstantRecord, VmError> {
        let instant = self.instant;
        let mut steps = Vec::new();
        let mut fuel = self.fuel_per_instant;
        let mut max_value = self.largest_value();
        let mut max_config = self.config_size();
        self.pending_writes.clear();
        while let Some(t) = self.tid {
            if fuel == 0 {
                return Err(VmError::FuelExhausted { instant });
            }
            fuel -= 1;
            let ins = self.current_instr(t)?;
            obs.before(t, self.threads[t].memory.last().expect("frame"), ins);
            if let Instr::Write(_) = ins {
                self.wtime = self.time;
            }
            if let Instr::Wait(_) = ins {
                let pc = self.threads[t].memory.last().expect("frame").pc;
                self.threads[t].status = VmStatus::W(pc + 1, self.time);
            }
            let x = self.exec_instruction(t)?;
            if let Some(v) = self.threads[t].memory.last().and_then(|f| f.stack.last()) {
                max_value = max_value.max(v.size_u128());
            }
            if self.meter {
                max_config = max_config.max(self.config_size());
            }
            let status = match x {
                Label::Eps => continue,
                Label::S => Status::S,
                Label::R => Status::R,
                Label::N => Status::N,
                Label::W => Status::W,
            };
            match x {
                Label::S => self.threads[t].status = VmStatus::S,
                Label::R => self.threads[t].status = VmStatus::R,
                Label::N => self.threads[t].status = VmStatus::N,
                _ => {}
            }
            steps.push(StepRecord { thread: t, status, writes: std::mem::take(&mut self.pending_writes) });
            self.tid = self.scheduler_next(t);
            if let Some(k) = self.tid {
                self.threads[k].status = VmStatus::R;
                self.time += 1;
            } else {
                let store = self.store.iter().map(|(r, v)| (r.to_string(), v.to_string())).collect();
                let stopped =
                    (0..self.threads.len()).filter(|&k| self.threads[k].status == VmStatus::S).collect();
                self.end_of_instant();
                return Ok(InstantRecord {
                    instant,
                    steps,
                    store,
                    stopped,
                    max_value_size: max_value,
                    max_config_size: self.meter.then_some(max_config),
                    terminated: self.tid.is_none(),
                });
            }
        }
        Ok(InstantRecord {
            instant,
            steps,
            store: self.store.iter().map(|(r, v)| (r.to_string(), v.to_string())).collect(),
            stopped: (0..self.threads.len()).collect(),
            max_value_size: max_value,
            max_config_size: self.meter.then_some(max_config),
            terminated: true,
        })
    }

    /// Store reset, rewind of waiting threads, revival, then selection from 0.
    fn end_of_instant(&mut self) {
        self.store = self.s0.clone();
        self.wtime = self.time;
        for th in &mut self.threads {
            if let VmStatus::W(j, _) = th.status {
                if let Some(fr) = th.memory.last_mut() {
                    fr.pc = j;
                }
            }
            if th.status != VmStatus::S {
                th.status = VmStatus::R;
            }
        }
        self.tid = if self.threads.is_empty() { None } else { self.scan(0) };
        self.instant += 1;
    }
}

pub fn run_vm_observed(
    module: &Module,
    instants: usize,
    fuel: u64,
    meter: bool,
    obs: &mut dyn VmObserver,
) -> Result<Trace, VmError> {
    let mut vm = Vm::new(module, fuel, meter);
    let mut trace = Trace::default();
    for _ in 0..instants {
        if !vm.alive() {
            break;
        }
        trace.instants.push(vm.run_instant(obs)?);
    }
    Ok(trace)
}

pub fn run_vm(module: &Module, instants: usize, fuel: u64, meter: bool) -> Result<Trace, VmError> {
    run_vm_observed(module, instants, fuel, meter, &mut NoVmObserver)
}
