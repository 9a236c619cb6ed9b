//! Declaration dependency DAG: construction from a corpus, cycle detection,
//! stratification into translation levels and level-ordered batching.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusIndex;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("dependency cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("graph has a cycle through {0} unlevelled node(s)")]
    CyclicInput(usize),
    #[error("edge ({0}, {1}) references a node outside the graph")]
    DanglingEdge(String, String),
    #[error("self edge on `{0}`")]
    SelfEdge(String),
}

/// Edges point from prerequisite to dependent.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DepGraph {
    nodes: BTreeSet<String>,
    edges: BTreeSet<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuiltGraph {
    pub graph: DepGraph,
    /// Dependencies that did not resolve inside the index and were dropped.
    pub unresolved: usize,
}

impl DepGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, name: impl Into<String>) {
        self.nodes.insert(name.into());
    }

    /// Adds an edge `prerequisite -> dependent`; both endpoints must already
    /// be nodes.
    pub fn add_edge(&mut self, prerequisite: &str, dependent: &str) -> Result<(), GraphError> {
        if prerequisite == dependent {
            return Err(GraphError::SelfEdge(prerequisite.into()));
        }
        if !self.nodes.contains(prerequisite) || !self.nodes.contains(dependent) {
            return Err(GraphError::DanglingEdge(prerequisite.into(), dependent.into()));
        }
        self.edges.insert((prerequisite.into(), dependent.into()));
        Ok(())
    }

    pub fn nodes(&self) -> &BTreeSet<String> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<(String, String)> {
        &self.edges
    }

    fn successors(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut succ: BTreeMap<&str, Vec<&str>> =
            self.nodes.iter().map(|n| (n.as_str(), Vec::new())).collect();
        for (u, v) in &self.edges {
            succ.get_mut(u.as_str()).expect("edge endpoint is a node").push(v.as_str());
        }
        succ
    }

    /// Graphviz rendering, optionally clustering nodes by level.
    pub fn to_dot(&self, levels: Option<&LevelAssignment>) -> String {
        let mut out = String::from("digraph dependencies {\n  rankdir=LR;\n");
        match levels {
            Some(assignment) => {
                for (i, level) in assignment.levels.iter().enumerate() {
                    let _ = writeln!(out, "  subgraph cluster_level_{i} {{\n    label=\"level {i}\";");
                    for name in level {
                        let _ = writeln!(out, "    \"{}\";", escape_dot(name));
                    }
                    out.push_str("  }\n");
                }
            }
            None => {
                for name in &self.nodes {
                    let _ = writeln!(out, "  \"{}\";", escape_dot(name));
                }
            }
        }
        for (u, v) in &self.edges {
            let _ = writeln!(out, "  \"{}\" -> \"{}\";", escape_dot(u), escape_dot(v));
        }
        out.push_str("}\n");
        out
    }
}

fn escape_dot(name: &str) -> String {
    name.replace('\\', "\\\\").replace('"', "\\\"")
}

/// One edge per dependency that resolves inside the index; the rest are
/// counted and dropped, so declarations depending only on externals are
/// roots.
pub fn build_graph(index: &CorpusIndex) -> BuiltGraph {
    let mut graph = DepGraph::new();
    for name in index.declarations().keys() {
        graph.add_node(name.as_str());
    }
    let mut unresolved = 0;
    for (name, decl) in index.declarations() {
        for dep in &decl.dependencies {
            if index.get(dep).is_some() {
                graph.edges.insert((dep.clone(), name.clone()));
            } else {
                unresolved += 1;
            }
        }
    }
    BuiltGraph { graph, unresolved }
}

/// `Ok(())` iff the graph has no directed cycle. The error carries one
/// witness cycle `[a, b, …, a]` whose consecutive pairs are edges.
pub fn check_acyclic(graph: &DepGraph) -> Result<(), GraphError> {
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        White,
        Grey,
        Black,
    }
    let succ = graph.successors();
    let mut mark: BTreeMap<&str, Mark> = succ.keys().map(|&n| (n, Mark::White)).collect();

    for &root in succ.keys() {
        if mark[root] != Mark::White {
            continue;
        }
        // iterative DFS; the stack mirrors the current grey path
        let mut stack: Vec<(&str, usize)> = alloc::vec![(root, 0)];
        mark.insert(root, Mark::Grey);
        while let Some(&mut (node, ref mut next)) = stack.last_mut() {
            let children = &succ[node];
            if *next < children.len() {
                let child = children[*next];
                *next += 1;
                match mark[child] {
                    Mark::White => {
                        mark.insert(child, Mark::Grey);
                        stack.push((child, 0));
                    }
                    Mark::Grey => {
                        let from = stack.iter().position(|&(n, _)| n == child).expect("grey node on stack");
                        let mut cycle: Vec<String> = stack[from..].iter().map(|&(n, _)| n.into()).collect();
                        cycle.push(child.into());
                        return Err(GraphError::Cycle(cycle));
                    }
                    Mark::Black => {}
                }
            } else {
                mark.insert(node, Mark::Black);
                stack.pop();
            }
        }
    }
    Ok(())
}

/// Stratification: roots at level 0, every other node one above its highest
/// prerequisite.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LevelAssignment {
    pub level_of: BTreeMap<String, u32>,
    pub levels: Vec<Vec<String>>,
}

impl LevelAssignment {
    pub fn depth(&self) -> usize {
        self.levels.len()
    }
}

/// Longest-prerequisite-chain levelling via Kahn's algorithm.
pub fn stratify(graph: &DepGraph) -> Result<LevelAssignment, GraphError> {
    let succ = graph.successors();
    let mut indegree: BTreeMap<&str, usize> = succ.keys().map(|&n| (n, 0)).collect();
    for (_, v) in &graph.edges {
        *indegree.get_mut(v.as_str()).expect("edge endpoint is a node") += 1;
    }
    let mut level: BTreeMap<&str, u32> = BTreeMap::new();
    let mut frontier: Vec<&str> = indegree.iter().filter(|(_, &d)| d == 0).map(|(&n, _)| n).collect();
    for &n in &frontier {
        level.insert(n, 0);
    }
    while let Some(node) = frontier.pop() {
        let here = level[node];
        for &child in &succ[node] {
            let slot = level.entry(child).or_insert(0);
            *slot = (*slot).max(here + 1);
            let d = indegree.get_mut(child).expect("child is a node");
            *d -= 1;
            if *d == 0 {
                frontier.push(child);
            }
        }
    }
    let settled = indegree.values().filter(|&&d| d == 0).count();
    if settled != succ.len() {
        return Err(GraphError::CyclicInput(succ.len() - settled));
    }

    let depth = level.values().copied().max().map_or(0, |m| m as usize + 1);
    let mut levels: Vec<Vec<String>> = alloc::vec![Vec::new(); depth];
    let mut level_of = BTreeMap::new();
    for (name, l) in level {
        // BTreeMap iteration keeps each level in name order
        levels[l as usize].push(String::from(name));
        level_of.insert(String::from(name), l);
    }
    Ok(LevelAssignment { level_of, levels })
}

/// Level-major, name-ordered batches of at most `batch_size` names. A
/// `batch_size` of zero is treated as one.
pub fn schedule(assignment: &LevelAssignment, batch_size: usize) -> Vec<Vec<String>> {
    let size = batch_size.max(1);
    assignment
        .levels
        .iter()
        .flat_map(|level| {
            let mut names = level.clone();
            names.sort();
            names.chunks(size).map(<[String]>::to_vec).collect::<Vec<_>>()
        })
        .collect()
}
