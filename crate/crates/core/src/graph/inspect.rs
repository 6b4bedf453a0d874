use std::fmt::Write;

use super::{infer_shapes, topo, Graph};
use crate::error::Result;

/// One line per node in execution order: name, kind, attributes, shapes.
///
/// Shapes print as `?` when the graph inputs have no declared shape.
pub fn inspect(g: &Graph) -> Result<String> {
    let shapes = match g.declared_input_shapes() {
        Some(given) => Some(infer_shapes(g, &given)?),
        None => None,
    };
    let fmt_values = |names: &[String]| -> String {
        names
            .iter()
            .map(|v| {
                let shape = shapes
                    .as_ref()
                    .and_then(|s| s.get(v))
                    .map(|i| i.shape.to_string())
                    .unwrap_or_else(|| "?".into());
                format!("{v}:{shape}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut out = String::new();
    writeln!(
        out,
        "graph `{}`: {} nodes, {} initializers",
        g.name,
        g.nodes.len(),
        g.initializers.len()
    )
    .unwrap();
    for i in topo::topo_indices(g)? {
        let n = &g.nodes[i];
        writeln!(
            out,
            "{:<24} {:<18} {:<36} in=[{}] out=[{}]",
            n.name,
            n.kind().onnx_name(),
            n.op.attr_summary(),
            fmt_values(&n.inputs),
            fmt_values(&n.outputs)
        )
        .unwrap();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_line_per_node() {
        let g = crate::graph::testutil::conv_graph(true, true);
        let text = inspect(&g).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + g.nodes.len());
        assert!(lines[1].starts_with("conv"));
        assert!(lines[1].contains("k=3x3"));
        assert!(lines[1].contains("c:1x3x5x5"));
    }
}
