use std::collections::{BTreeMap, BTreeSet};

use super::{Manifest, NodeSpec};

/// Read-only adjacency view over a manifest's graph. Dangling wires are
/// ignored and the first node wins on duplicate ids; validation reports both.
pub struct Graph<'m> {
    nodes: BTreeMap<&'m str, &'m NodeSpec>,
    inputs: BTreeMap<&'m str, Vec<&'m str>>,
    outputs: BTreeMap<&'m str, Vec<&'m str>>,
}

impl<'m> Graph<'m> {
    pub fn new(m: &'m Manifest) -> Self {
        let mut nodes = BTreeMap::new();
        for n in &m.graph {
            nodes.entry(n.id.as_str()).or_insert(n);
        }
        let mut inputs: BTreeMap<&str, Vec<&str>> = nodes.keys().map(|k| (*k, Vec::new())).collect();
        let mut outputs: BTreeMap<&str, Vec<&str>> = nodes.keys().map(|k| (*k, Vec::new())).collect();
        for n in nodes.values() {
            let mut seen = BTreeSet::new();
            for w in &n.wires {
                if nodes.contains_key(w.as_str()) && seen.insert(w.as_str()) {
                    inputs.get_mut(w.as_str()).unwrap().push(n.id.as_str());
                    outputs.get_mut(n.id.as_str()).unwrap().push(w.as_str());
                }
            }
        }
        // Join ports are numbered by source id.
        for v in inputs.values_mut() {
            v.sort_unstable();
        }
        Graph { nodes, inputs, outputs }
    }

    pub fn node(&self, id: &str) -> Option<&'m NodeSpec> {
        self.nodes.get(id).copied()
    }

    pub fn ids(&self) -> impl Iterator<Item = &'m str> + '_ {
        self.nodes.keys().copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &'m NodeSpec> + '_ {
        self.nodes.values().copied()
    }

    /// Upstream node ids, ordered by id. For a join, the index in this list
    /// is the input port number.
    pub fn inputs(&self, id: &str) -> &[&'m str] {
        self.inputs.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn outputs(&self, id: &str) -> &[&'m str] {
        self.outputs.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn port_of(&self, from: &str, to: &str) -> Option<usize> {
        self.inputs(to).iter().position(|s| *s == from)
    }

    pub fn edges(&self) -> Vec<(&'m str, &'m str)> {
        self.outputs
            .iter()
            .flat_map(|(from, tos)| tos.iter().map(move |to| (*from, *to)))
            .collect()
    }

    /// Kahn's algorithm with ties broken by lexicographic id. On failure
    /// returns the ids of nodes that lie on a cycle.
    pub fn topo_order(&self) -> Result<Vec<&'m str>, Vec<&'m str>> {
        let mut indegree: BTreeMap<&str, usize> =
            self.inputs.iter().map(|(k, v)| (*k, v.len())).collect();
        let mut ready: BTreeSet<&str> = indegree
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(k, _)| *k)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(id) = ready.pop_first() {
            order.push(id);
            for to in self.outputs(id) {
                let d = indegree.get_mut(to).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(to);
                }
            }
        }
        if order.len() == self.nodes.len() {
            Ok(order)
        } else {
            Err(self.ids().filter(|id| self.reaches(id, id)).collect())
        }
    }

    /// True if `to` can be reached from `from` by following one or more wires.
    pub fn reaches(&self, from: &str, to: &str) -> bool {
        let mut stack: Vec<&str> = self.outputs(from).to_vec();
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if n == to {
                return true;
            }
            if seen.insert(n) {
                stack.extend(self.outputs(n));
            }
        }
        false
    }

    pub fn ancestors(&self, id: &str) -> BTreeSet<&'m str> {
        let mut stack: Vec<&str> = self.inputs(id).to_vec();
        let mut seen = BTreeSet::new();
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                stack.extend(self.inputs(n));
            }
        }
        seen
    }
}
