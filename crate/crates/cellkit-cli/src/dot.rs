//! DOT rendering of a model: states as nodes labeled with their true atoms,
//! one undirected edge per pair of states sharing a block, colored per
//! agent. With a refinement trace, nodes are filled by final class.

use cellkit_core::{KripkeModel, RefinementTrace};

const AGENT_COLORS: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

const CLASS_FILLS: [&str; 10] = [
    "#c6dbef", "#fdd0a2", "#c7e9c0", "#dadaeb", "#f2f0f7", "#fee6ce", "#e5f5e0", "#d9d9d9",
    "#fcbba1", "#bcbddc",
];

fn escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

fn node_id(name: &str) -> String {
    format!("\"{}\"", escape(name))
}

pub fn dot_export(model: &KripkeModel, trace: Option<&RefinementTrace>) -> String {
    let mut out = String::from("graph model {\n");
    for (j, agent) in model.agents().iter().enumerate() {
        out.push_str(&format!(
            "  // agent {agent}: {}\n",
            AGENT_COLORS[j % AGENT_COLORS.len()]
        ));
    }
    out.push_str("  node [shape=ellipse, fontsize=10];\n");
    let final_partition = trace.map(|t| t.final_partition());
    for (s, name) in model.states().iter().enumerate() {
        let atoms: Vec<&str> = model
            .valuation(s)
            .iter()
            .map(|&a| model.atoms()[a].as_str())
            .collect();
        // `\n` is the DOT line break inside a quoted label.
        let label = if atoms.is_empty() {
            escape(name)
        } else {
            format!("{}\\n{}", escape(name), escape(&atoms.join(" ")))
        };
        let mut attrs = format!("label=\"{label}\"");
        if let Some(p) = final_partition {
            attrs.push_str(&format!(
                ", style=filled, fillcolor=\"{}\"",
                CLASS_FILLS[p.class_of(s) % CLASS_FILLS.len()]
            ));
        }
        out.push_str(&format!("  {} [{}];\n", node_id(name), attrs));
    }
    for j in 0..model.num_agents() {
        let color = AGENT_COLORS[j % AGENT_COLORS.len()];
        for block in model.blocks(j) {
            for (i, &s) in block.iter().enumerate() {
                for &t in &block[i + 1..] {
                    out.push_str(&format!(
                        "  {} -- {} [color=\"{color}\"];\n",
                        node_id(model.state_name(s)),
                        node_id(model.state_name(t)),
                    ));
                }
            }
        }
    }
    out.push_str("}\n");
    out
}
