//! Coupling graph export (JSON and Graphviz DOT).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sicspin::lattice::Species;
use sicspin::placement::{CouplingMeasurement, PlacementConfig};
use sicspin::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub species: Species,
    /// Display colour: green for silicon, orange for carbon.
    pub color: String,
    /// Å
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub source: String,
    pub target: String,
    pub f_hz: f64,
    pub sigma_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub cutoff_hz: f64,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
}

pub fn species_color(s: Species) -> &'static str {
    match s {
        Species::Si => "green",
        Species::C => "orange",
    }
}

/// Orders `Si2` before `Si10`: alphabetic prefix, then the numeric suffix.
pub fn natural_key(label: &str) -> (String, u64, String) {
    let split = label.trim_end_matches(|c: char| c.is_ascii_digit()).len();
    let num = label[split..].parse().unwrap_or(0);
    (label[..split].to_string(), num, label.to_string())
}

/// One node per spin seen in `measurements` or `spins`; one edge per
/// measurement at or above `cutoff_hz`. Species come from `spins` when a
/// label is listed there, else from the label.
pub fn export_graph(
    measurements: &[CouplingMeasurement],
    spins: &BTreeMap<String, (Species, Option<[f64; 3]>)>,
    cutoff_hz: f64,
    config: &PlacementConfig,
) -> Result<Graph> {
    let mut labels: Vec<&str> = spins.keys().map(String::as_str).collect();
    for m in measurements {
        labels.push(&m.spin_a);
        labels.push(&m.spin_b);
    }
    labels.sort_by_key(|l| natural_key(l));
    labels.dedup();
    let mut nodes = Vec::with_capacity(labels.len());
    for l in labels {
        let (species, position) = match spins.get(l) {
            Some(&(s, p)) => (s, p),
            None => (config.species_of(l)?, None),
        };
        nodes.push(GraphNode { id: l.to_string(), species, color: species_color(species).into(), position });
    }
    let mut edges: Vec<GraphEdge> = measurements
        .iter()
        .filter(|m| m.f_hz >= cutoff_hz)
        .map(|m| GraphEdge { source: m.spin_a.clone(), target: m.spin_b.clone(), f_hz: m.f_hz, sigma_hz: m.sigma_hz })
        .collect();
    edges.sort_by_key(|a| (natural_key(&a.source), natural_key(&a.target)));
    Ok(Graph { cutoff_hz, nodes, edges })
}

pub fn to_dot(graph: &Graph) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "graph couplings {{");
    let _ = writeln!(s, "  // edges below {} Hz omitted", graph.cutoff_hz);
    let _ = writeln!(s, "  node [shape=circle, style=filled];");
    for n in &graph.nodes {
        let _ = writeln!(s, "  \"{}\" [species=\"{}\", fillcolor=\"{}\"];", n.id, n.species.as_str(), n.color);
    }
    for e in &graph.edges {
        let _ = writeln!(s, "  \"{}\" -- \"{}\" [label=\"{:.2} Hz\", f_hz={}];", e.source, e.target, e.f_hz, e.f_hz);
    }
    s.push_str("}\n");
    s
}
