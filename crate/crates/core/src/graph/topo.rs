use std::collections::{BTreeSet, HashMap};

use super::{Graph, Node};
use crate::error::{Error, Result};

/// Kahn's algorithm; among ready nodes the earliest-declared runs first.
/// On failure returns the indices of nodes that never became ready.
pub(super) fn kahn(g: &Graph) -> std::result::Result<Vec<usize>, Vec<usize>> {
    let producers: HashMap<&str, usize> = g.producers();
    let mut pending = vec![0usize; g.nodes.len()];
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); g.nodes.len()];
    for (i, n) in g.nodes.iter().enumerate() {
        for inp in &n.inputs {
            if let Some(&p) = producers.get(inp.as_str()) {
                pending[i] += 1;
                dependents[p].push(i);
            }
        }
    }

    let mut ready: BTreeSet<usize> = (0..g.nodes.len()).filter(|&i| pending[i] == 0).collect();
    let mut order = Vec::with_capacity(g.nodes.len());
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &d in &dependents[i] {
            pending[d] -= 1;
            if pending[d] == 0 {
                ready.insert(d);
            }
        }
    }

    if order.len() == g.nodes.len() {
        Ok(order)
    } else {
        Err((0..g.nodes.len()).filter(|&i| pending[i] > 0).collect())
    }
}

/// Execution order: every producer precedes its consumers; ties broken by
/// declaration order.
pub fn topo_sort(g: &Graph) -> Result<Vec<&Node>> {
    match kahn(g) {
        Ok(order) => Ok(order.into_iter().map(|i| &g.nodes[i]).collect()),
        Err(stuck) => Err(Error::Cycle(g.nodes[stuck[0]].name.clone())),
    }
}

/// Indices instead of references.
pub(crate) fn topo_indices(g: &Graph) -> Result<Vec<usize>> {
    kahn(g).map_err(|stuck| Error::Cycle(g.nodes[stuck[0]].name.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{validate, Op};
    use crate::rng::Lcg64;

    fn names(order: Vec<&Node>) -> Vec<&str> {
        order.into_iter().map(|n| n.name.as_str()).collect()
    }

    #[test]
    fn single_node() {
        let g = crate::graph::testutil::relu_graph();
        assert_eq!(names(topo_sort(&g).unwrap()), vec!["r"]);
    }

    #[test]
    fn chain_declared_backwards() {
        let g = Graph::new("g")
            .with_input("x", &[1])
            .with_output("c")
            .with_node(Node::new("C", Op::Relu, &["b"], &["c"]))
            .with_node(Node::new("B", Op::Relu, &["a"], &["b"]))
            .with_node(Node::new("A", Op::Relu, &["x"], &["a"]));
        assert_eq!(names(topo_sort(&g).unwrap()), vec!["A", "B", "C"]);
    }

    #[test]
    fn diamond_tie_break() {
        let g = Graph::new("g")
            .with_input("x", &[1])
            .with_output("d")
            .with_node(Node::new("A", Op::Relu, &["x"], &["a"]))
            .with_node(Node::new("B", Op::Relu, &["a"], &["b"]))
            .with_node(Node::new("C", Op::Relu, &["a"], &["c"]))
            .with_node(Node::new("D", Op::Add, &["b", "c"], &["d"]));
        assert_eq!(names(topo_sort(&g).unwrap()), vec!["A", "B", "C", "D"]);
    }

    #[test]
    fn cycle_is_an_error() {
        let g = Graph::new("g")
            .with_input("x", &[1])
            .with_output("b")
            .with_node(Node::new("A", Op::Add, &["x", "b"], &["a"]))
            .with_node(Node::new("B", Op::Relu, &["a"], &["b"]));
        assert!(matches!(topo_sort(&g), Err(Error::Cycle(_))));
    }

    /// Random DAG: node i reads from earlier values only, then the node list is shuffled.
    fn random_dag(seed: u64) -> Graph {
        let mut rng = Lcg64::new(seed);
        let count = rng.range(1, 12);
        let mut values = vec!["x".to_string()];
        let mut nodes = Vec::new();
        for i in 0..count {
            let out = format!("v{i}");
            let node = if values.len() > 1 && rng.range(0, 1) == 0 {
                let a = rng.choose(&values).clone();
                let b = rng.choose(&values).clone();
                Node::new(format!("n{i}"), Op::Add, &[&a, &b], &[&out])
            } else {
                let a = rng.choose(&values).clone();
                Node::new(format!("n{i}"), Op::Relu, &[&a], &[&out])
            };
            nodes.push(node);
            values.push(out);
        }
        for i in (1..nodes.len()).rev() {
            let j = rng.range(0, i);
            nodes.swap(i, j);
        }
        let mut g = Graph::new("rand").with_input("x", &[2]);
        g.nodes = nodes;
        g.outputs = vec![values.last().unwrap().clone()];
        g
    }

    #[test]
    fn valid_random_graphs_sort() {
        for seed in 0..300 {
            let g = random_dag(seed);
            assert_eq!(validate(&g), vec![], "seed {seed}");
            let order = topo_sort(&g).unwrap();
            assert_eq!(order.len(), g.nodes.len());
            let pos: HashMap<&str, usize> = order
                .iter()
                .enumerate()
                .map(|(i, n)| (n.outputs[0].as_str(), i))
                .collect();
            for (i, n) in order.iter().enumerate() {
                for inp in &n.inputs {
                    if let Some(&p) = pos.get(inp.as_str()) {
                        assert!(p < i, "seed {seed}: {inp} consumed before produced");
                    }
                }
            }
        }
    }
}
