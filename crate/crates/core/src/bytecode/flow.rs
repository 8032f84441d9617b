//! Flow graph of compiled code and its structural properties.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::{Instr, Segment};
use crate::term::Name;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeKind {
    Successor,
    Branch,
    Wait,
    Next,
    Call,
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeKind::Successor => "successor",
            EdgeKind::Branch => "branch",
            EdgeKind::Wait => "wait",
            EdgeKind::Next => "next",
            EdgeKind::Call => "call",
        })
    }
}

/// A node `(f, i)`.
pub type Node = (Name, usize);

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub from: Node,
    pub to: Node,
    pub kind: EdgeKind,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlowGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    instrs: BTreeMap<Node, Instr>,
    adj: BTreeMap<Node, Vec<usize>>,
}

impl FlowGraph {
    pub fn instr(&self, n: &Node) -> Option<&Instr> {
        self.instrs.get(n)
    }

    pub fn out_edges<'a>(&'a self, n: &'a Node) -> impl Iterator<Item = &'a Edge> + 'a {
        self.adj.get(n).into_iter().flatten().map(move |&k| &self.edges[k])
    }

    pub fn has_edge(&self, from: &Node, to: &Node, kind: EdgeKind) -> bool {
        self.edges.iter().any(|e| &e.from == from && &e.to == to && e.kind == kind)
    }
}

/// Edges of every segment; call edges only to segments in `segs`.
pub fn build_flow_graph(segs: &[Segment]) -> FlowGraph {
    let mut g = FlowGraph::default();
    let known: BTreeSet<&Name> = segs.iter().map(|s| &s.name).collect();
    for s in segs {
        for (k, ins) in s.code.iter().enumerate() {
            let i = k + 1;
            let here = (s.name.clone(), i);
            g.nodes.push(here.clone());
            g.instrs.insert(here.clone(), ins.clone());
            let mut add = |to: Node, kind| g.edges.push(Edge { from: here.clone(), to, kind });
            let next = (s.name.clone(), i + 1);
            match ins {
                Instr::Load(_) | Instr::Build(..) | Instr::Read(_) | Instr::Write(_) | Instr::Yield => {
                    add(next, EdgeKind::Successor)
                }
                Instr::Branch(_, j) => {
                    add(next, EdgeKind::Successor);
                    add((s.name.clone(), *j), EdgeKind::Branch);
                }
                Instr::Call(h, _) => {
                    add(next, EdgeKind::Successor);
                    if known.contains(h) {
                        add((h.clone(), 1), EdgeKind::Call);
                    }
                }
                Instr::TCall(h, _) => {
                    if known.contains(h) {
                        add((h.clone(), 1), EdgeKind::Call);
                    }
                }
                Instr::Wait(j) => {
                    add((s.name.clone(), *j), EdgeKind::Wait);
                    add(next, EdgeKind::Next);
                }
                Instr::Next => add(next, EdgeKind::Next),
                Instr::Return | Instr::Stop => {}
            }
        }
    }
    g.edges.retain(|e| g.instrs.contains_key(&e.to));
    for (k, e) in g.edges.iter().enumerate() {
        g.adj.entry(e.from.clone()).or_default().push(k);
    }
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Property {
    Tree,
    ReadWait,
    Next,
    ReadOnce,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::Tree => "tree",
            Property::ReadWait => "read-wait",
            Property::Next => "next",
            Property::ReadOnce => "read-once",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub property: Property,
    pub node: Node,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowReport {
    pub violations: Vec<Violation>,
    pub read_once_checked: bool,
}

impl FlowReport {
    pub fn holds(&self, p: Property) -> bool {
        !self.violations.iter().any(|v| v.property == p)
    }

    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for p in [Property::Tree, Property::ReadWait, Property::Next, Property::ReadOnce] {
            if p == Property::ReadOnce && !self.read_once_checked {
                out.push_str("flow read-once: skipped\n");
                continue;
            }
            match self.violations.iter().find(|v| v.property == p) {
                None => out.push_str(&format!("flow {p}: ok\n")),
                Some(v) => out.push_str(&format!("flow {p}: fail at {}:{}: {}\n", v.node.0, v.node.1, v.message)),
            }
        }
        out
    }
}

fn local(kind: EdgeKind) -> bool {
    matches!(kind, EdgeKind::Successor | EdgeKind::Branch | EdgeKind::Next)
}

/// Parents in the tree made of successor, branch and next edges.
fn tree_parents(g: &FlowGraph, s: &Segment) -> BTreeMap<usize, Vec<usize>> {
    let mut parents: BTreeMap<usize, Vec<usize>> = (1..=s.len()).map(|i| (i, Vec::new())).collect();
    for e in &g.edges {
        if e.from.0 == s.name && e.to.0 == s.name && local(e.kind) {
            parents.entry(e.to.1).or_default().push(e.from.1);
        }
    }
    parents
}

fn check_tree(g: &FlowGraph, s: &Segment, parents: &BTreeMap<usize, Vec<usize>>, out: &mut Vec<Violation>) {
    let at = |i: usize| (s.name.clone(), i);
    if !parents[&1].is_empty() {
        out.push(Violation { property: Property::Tree, node: at(1), message: "the root has an incoming edge".into() });
        return;
    }
    for i in 2..=s.len() {
        if parents[&i].len() > 1 {
            out.push(Violation {
                property: Property::Tree,
                node: at(i),
                message: format!("reached from {:?}", parents[&i]),
            });
            return;
        }
    }
    let mut seen = BTreeSet::from([1usize]);
    let mut todo = vec![1usize];
    while let Some(i) = todo.pop() {
        for e in g.out_edges(&at(i)) {
            if e.to.0 == s.name && local(e.kind) && seen.insert(e.to.1) {
                todo.push(e.to.1);
            }
        }
    }
    if let Some(i) = (1..=s.len()).find(|i| !seen.contains(i)) {
        out.push(Violation { property: Property::Tree, node: at(i), message: "unreachable from the root".into() });
    }
}

fn check_read_wait(s: &Segment, parents: &BTreeMap<usize, Vec<usize>>, out: &mut Vec<Violation>) {
    for (k, ins) in s.code.iter().enumerate() {
        let Instr::Wait(j) = ins else { continue };
        let i = k + 1;
        let node = (s.name.clone(), i);
        if !matches!(s.at(*j), Some(Instr::Read(_))) {
            out.push(Violation { property: Property::ReadWait, node, message: format!("target {j} is not a read") });
            continue;
        }
        let mut cur = i;
        let mut ok = false;
        for _ in 0..s.len() {
            let Some(&p) = parents.get(&cur).and_then(|ps| ps.first()) else { break };
            if p == *j {
                ok = true;
                break;
            }
            if !matches!(s.at(p), Some(Instr::Branch(..))) {
                break;
            }
            cur = p;
        }
        if !ok {
            out.push(Violation {
                property: Property::ReadWait,
                node,
                message: format!("the path from read {j} is not made of branch instructions"),
            });
        }
    }
}

fn check_next(g: &FlowGraph, out: &mut Vec<Violation>) {
    for e in g.edges.iter().filter(|e| e.kind == EdgeKind::Next) {
        let mut seen = BTreeSet::from([e.to.clone()]);
        let mut todo = VecDeque::from([e.to.clone()]);
        while let Some(n) = todo.pop_front() {
            if let Some(Instr::Read(_)) = g.instr(&n) {
                out.push(Violation {
                    property: Property::Next,
                    node: e.from.clone(),
                    message: format!("read at {}:{} reachable after next", n.0, n.1),
                });
                return;
            }
            for f in g.out_edges(&n) {
                if f.kind != EdgeKind::Call && seen.insert(f.to.clone()) {
                    todo.push_back(f.to.clone());
                }
            }
        }
    }
}

fn check_read_once(g: &FlowGraph, out: &mut Vec<Violation>) {
    let mut dg: DiGraph<Node, ()> = DiGraph::new();
    let idx: BTreeMap<Node, NodeIndex> = g.nodes.iter().map(|n| (n.clone(), dg.add_node(n.clone()))).collect();
    for e in &g.edges {
        if !matches!(e.kind, EdgeKind::Wait | EdgeKind::Next) {
            dg.add_edge(idx[&e.from], idx[&e.to], ());
        }
    }
    let mut bad: Vec<Node> = Vec::new();
    for scc in tarjan_scc(&dg) {
        if scc.len() > 1 || dg.contains_edge(scc[0], scc[0]) {
            bad.extend(scc.iter().map(|&n| dg[n].clone()).filter(|n| matches!(g.instr(n), Some(Instr::Read(_)))));
        }
    }
    bad.sort();
    if let Some(n) = bad.into_iter().next() {
        out.push(Violation { property: Property::ReadOnce, node: n, message: "read on a loop".into() });
    }
}

/// Tree, Read-Wait and Next always; Read-Once when `read_once` is set.
pub fn check_flow_properties(segs: &[Segment], read_once: bool) -> FlowReport {
    let g = build_flow_graph(segs);
    let mut violations = Vec::new();
    for s in segs {
        let parents = tree_parents(&g, s);
        check_tree(&g, s, &parents, &mut violations);
        check_read_wait(s, &parents, &mut violations);
    }
    check_next(&g, &mut violations);
    if read_once {
        check_read_once(&g, &mut violations);
    }
    FlowReport { violations, read_once_checked: read_once }
}
