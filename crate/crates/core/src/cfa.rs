//! Read-once control-flow analysis over the behaviour call graph.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;

use crate::ast::{Behaviour, Label, Program};
use crate::term::Name;

/// Behaviours that may be called in the current instant.
pub fn call_set(b: &Behaviour) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    collect_calls(b, &mut out);
    out
}

fn collect_calls(b: &Behaviour, out: &mut BTreeSet<Name>) {
    match b {
        Behaviour::Stop | Behaviour::Next(..) => {}
        Behaviour::Call(f, _) => {
            out.insert(f.clone());
        }
        Behaviour::Yield(b) => collect_calls(b, out),
        Behaviour::Assign(a) => collect_calls(&a.then, out),
        Behaviour::Match(m) => {
            collect_calls(&m.then, out);
            collect_calls(&m.els, out);
        }
        Behaviour::Read(r) => {
            for br in &r.branches {
                collect_calls(&br.body, out);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallGraph {
    /// Behaviour names in declaration order.
    pub nodes: Vec<Name>,
    pub edges: BTreeMap<Name, BTreeSet<Name>>,
    /// L(f): labels of the reads occurring in the body of f.
    pub labels: BTreeMap<Name, Vec<Label>>,
    /// R(f) in global label order.
    pub reachable_labels: BTreeMap<Name, Vec<Label>>,
}

impl CallGraph {
    pub fn successors(&self, f: &str) -> impl Iterator<Item = &Name> {
        self.edges.get(f).into_iter().flatten()
    }

    /// The ordered label sequence appended to the formals of f^.
    pub fn y_hat(&self, f: &str) -> Vec<Name> {
        self.reachable_labels.get(f).map(|ls| ls.iter().map(|l| l.name.clone()).collect()).unwrap_or_default()
    }

    /// Functions reachable from f, f included.
    pub fn reachable(&self, f: &Name) -> BTreeSet<Name> {
        let mut seen = BTreeSet::from([f.clone()]);
        let mut todo = vec![f.clone()];
        while let Some(g) = todo.pop() {
            for h in self.successors(&g) {
                if seen.insert(h.clone()) {
                    todo.push(h.clone());
                }
            }
        }
        seen
    }
}

pub fn build_call_graph(p: &Program) -> CallGraph {
    let mut g = CallGraph {
        nodes: Vec::new(),
        edges: BTreeMap::new(),
        labels: BTreeMap::new(),
        reachable_labels: BTreeMap::new(),
    };
    for f in p.behaviours() {
        let b = f.behaviour().expect("behaviour");
        g.nodes.push(f.name.clone());
        g.labels.insert(f.name.clone(), b.reads().into_iter().map(|r| r.label.clone()).collect());
        let callees = call_set(b).into_iter().filter(|h| p.function(h).is_some_and(|d| d.is_behaviour())).collect();
        g.edges.insert(f.name.clone(), callees);
    }
    for f in &g.nodes {
        let mut r: Vec<Label> = g.reachable(f).iter().flat_map(|h| g.labels[h].iter().cloned()).collect();
        r.sort();
        r.dedup();
        g.reachable_labels.insert(f.clone(), r);
    }
    g
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReadOnceReport {
    pub pass: bool,
    /// A shortest cycle `f -> ... -> f` through a function containing a read.
    pub witness: Option<Vec<String>>,
}

impl ReadOnceReport {
    pub fn render(&self) -> String {
        match &self.witness {
            None => "read-once: pass".to_string(),
            Some(c) => format!("read-once: fail, cycle {}", c.join(" -> ")),
        }
    }
}

pub fn check_read_once(g: &CallGraph) -> ReadOnceReport {
    let mut dg: DiGraph<Name, ()> = DiGraph::new();
    let idx: BTreeMap<Name, NodeIndex> = g.nodes.iter().map(|f| (f.clone(), dg.add_node(f.clone()))).collect();
    for (f, hs) in &g.edges {
        for h in hs {
            dg.add_edge(idx[f], idx[h], ());
        }
    }
    let mut cyclic = BTreeSet::new();
    for scc in tarjan_scc(&dg) {
        let on_cycle = scc.len() > 1 || dg.contains_edge(scc[0], scc[0]);
        if on_cycle {
            cyclic.extend(scc.iter().map(|&n| dg[n].clone()));
        }
    }
    let mut best: Option<Vec<Name>> = None;
    for f in &g.nodes {
        if g.labels[f].is_empty() || !cyclic.contains(f) {
            continue;
        }
        if let Some(c) = shortest_cycle(g, f) {
            if best.as_ref().is_none_or(|b| c.len() < b.len()) {
                best = Some(c);
            }
        }
    }
    ReadOnceReport {
        pass: best.is_none(),
        witness: best.map(|c| c.iter().map(|n| n.to_string()).collect()),
    }
}

fn shortest_cycle(g: &CallGraph, f: &Name) -> Option<Vec<Name>> {
    let mut parent: BTreeMap<Name, Name> = BTreeMap::new();
    let mut queue = VecDeque::new();
    for h in g.successors(f) {
        if h == f {
            return Some(vec![f.clone(), f.clone()]);
        }
        if !parent.contains_key(h) {
            parent.insert(h.clone(), f.clone());
            queue.push_back(h.clone());
        }
    }
    while let Some(u) = queue.pop_front() {
        for h in g.successors(&u) {
            if h == f {
                let mut back = vec![u.clone()];
                while let Some(p) = parent.get(back.last().unwrap()).filter(|p| *p != f) {
                    back.push(p.clone());
                }
                back.reverse();
                let mut path = vec![f.clone()];
                path.extend(back);
                path.push(f.clone());
                return Some(path);
            }
            if !parent.contains_key(h) && h != f {
                parent.insert(h.clone(), u.clone());
                queue.push_back(h.clone());
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend;

    const HDR: &str = "type nat = z || s of nat\nreftype rr = ref nat with r = z\n";

    #[test]
    fn call_set_equations() {
        let tp = frontend::load(&format!(
            "{HDR}beh g() = stop\nbeh h() = stop\n\
             beh a() = next . g()\nbeh b() = yield . g()\n\
             beh c() = read r with s(x) => h() | [_] => g()"
        ))
        .unwrap();
        let cs = |f: &str| call_set(tp.program.function(f).unwrap().behaviour().unwrap());
        assert!(cs("a").is_empty());
        assert_eq!(cs("b"), BTreeSet::from([crate::term::name("g")]));
        assert_eq!(cs("c"), BTreeSet::from([crate::term::name("h")]));
    }

    #[test]
    fn longer_cycle_witness_is_in_call_order() {
        let tp = frontend::load(&format!(
            "{HDR}beh a() = read r with s(x) => b() | [_] => a()\nbeh b() = c()\nbeh c() = yield . a()"
        ))
        .unwrap();
        let g = build_call_graph(&tp.program);
        let rep = check_read_once(&g);
        assert_eq!(rep.witness, Some(vec!["a".into(), "b".into(), "c".into(), "a".into()]));
    }
}
