//! Bow-tie decomposition: classify nodes into IN / SCC / OUT by the
//! impacting-to-impacted ratio, truncate links accordingly, and validate the
//! resulting structure.
//!
//! Nodes with `r > upper` form the IN side (they impact more than they are
//! impacted) and lose all incoming links; nodes with `r < lower` form the OUT
//! side and lose all outgoing links; everything in the closed middle interval
//! stays in the SCC region with links intact.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DependencyNetwork, Edge};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Region {
    In,
    Scc,
    Out,
    Disconnected,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::In => "IN",
            Region::Scc => "SCC",
            Region::Out => "OUT",
            Region::Disconnected => "DISCONNECTED",
        }
    }
}

/// How the (upper, lower) ratio cutoffs are derived from δ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// upper = 1 + δ, lower = 1 / (1 + δ); δ = 0.5 reproduces 3/2 and 2/3.
    #[default]
    Reciprocal,
    /// upper = 1 + δ, lower = 1 − δ.
    Additive,
}

/// Ratio cutoffs separating the three regions (upper > 1 > lower > 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BowtieThresholds {
    pub upper: f64,
    pub lower: f64,
}

impl Default for BowtieThresholds {
    fn default() -> Self {
        BowtieThresholds::from_delta(0.5, ThresholdMode::Reciprocal)
            .expect("default delta is valid")
    }
}

impl BowtieThresholds {
    pub fn from_delta(delta: f64, mode: ThresholdMode) -> Result<Self> {
        if delta.is_nan() || delta <= 0.0 || (mode == ThresholdMode::Additive && delta >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "bow-tie delta must be positive (and < 1 in additive mode), got {delta}"
            )));
        }
        let t = match mode {
            ThresholdMode::Reciprocal => BowtieThresholds {
                upper: 1.0 + delta,
                lower: 1.0 / (1.0 + delta),
            },
            ThresholdMode::Additive => BowtieThresholds {
                upper: 1.0 + delta,
                lower: 1.0 - delta,
            },
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.upper > 1.0 && 1.0 > self.lower && self.lower > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "thresholds must satisfy upper > 1 > lower > 0, got upper {} lower {}",
                self.upper, self.lower
            )));
        }
        Ok(())
    }
}

/// Classify each node by its ratio. The middle interval is closed (boundary
/// ratios stay SCC); NaN is the disconnected sentinel, +∞ lands in IN.
pub fn classify_regions(r: &[f64], thresholds: &BowtieThresholds) -> Result<Vec<Region>> {
    thresholds.validate()?;
    Ok(r.iter()
        .map(|&ri| {
            if ri.is_nan() {
                Region::Disconnected
            } else if ri > thresholds.upper {
                Region::In
            } else if ri < thresholds.lower {
                Region::Out
            } else {
                Region::Scc
            }
        })
        .collect())
}

/// The filtered bow-tie: region labels plus the surviving edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct BowtieAssignment {
    pub regions: Vec<Region>,
    pub thresholds: BowtieThresholds,
    pub filtered_edges: Vec<Edge>,
}

/// Remove every incoming edge of IN nodes and every outgoing edge of OUT
/// nodes; all other edges survive.
pub fn filter_links(
    net: &DependencyNetwork,
    regions: &[Region],
    thresholds: BowtieThresholds,
) -> Result<BowtieAssignment> {
    if regions.len() != net.n_nodes() {
        return Err(Error::ShapeMismatch(format!(
            "{} region labels for {} nodes",
            regions.len(),
            net.n_nodes()
        )));
    }
    let filtered_edges = net
        .edges
        .iter()
        .filter(|e| regions[e.target] != Region::In && regions[e.source] != Region::Out)
        .copied()
        .collect();
    Ok(BowtieAssignment {
        regions: regions.to_vec(),
        thresholds,
        filtered_edges,
    })
}

/// Post-filter diagnostics. `middle_strongly_connected` is a warning flag,
/// not an error: truncation of a strongly connected graph does not always
/// leave a non-trivial SCC in the middle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BowtieDiagnostics {
    pub n_in: usize,
    pub n_scc: usize,
    pub n_out: usize,
    pub n_disconnected: usize,
    /// Size of the largest strongly connected component among middle-region
    /// nodes of the filtered graph.
    pub middle_scc_size: usize,
    /// True when every middle-region node sits in one strongly connected
    /// component of the filtered graph.
    pub middle_strongly_connected: bool,
    /// Middle-region nodes outside the recomputed core that are touched only
    /// via IN or OUT (tube/tendril-like leftovers).
    pub tube_tendril_nodes: Vec<String>,
    pub warnings: Vec<String>,
}

/// Recompute SCCs on the filtered graph and report region sizes plus
/// middle-region health.
pub fn validate_bowtie(
    net: &DependencyNetwork,
    assignment: &BowtieAssignment,
) -> Result<BowtieDiagnostics> {
    let n = net.n_nodes();
    if assignment.regions.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} region labels for {n} nodes",
            assignment.regions.len()
        )));
    }
    let count = |r: Region| assignment.regions.iter().filter(|&&x| x == r).count();
    let (n_in, n_scc, n_out, n_disconnected) = (
        count(Region::In),
        count(Region::Scc),
        count(Region::Out),
        count(Region::Disconnected),
    );

    let filtered = DependencyNetwork::from_parts(
        net.nodes.clone(),
        assignment.filtered_edges.clone(),
        net.self_loops.clone(),
    )?;
    // SCC of the subgraph induced by middle-region nodes
    let middle: Vec<usize> = (0..n)
        .filter(|&v| assignment.regions[v] == Region::Scc)
        .collect();
    let local_id: std::collections::BTreeMap<usize, usize> =
        middle.iter().enumerate().map(|(k, &v)| (v, k)).collect();
    let middle_edges: Vec<Edge> = assignment
        .filtered_edges
        .iter()
        .filter(|e| local_id.contains_key(&e.source) && local_id.contains_key(&e.target))
        .map(|e| Edge {
            source: local_id[&e.source],
            target: local_id[&e.target],
            weight: e.weight,
        })
        .collect();
    let middle_net = DependencyNetwork::from_parts(
        middle.iter().map(|&v| net.nodes[v].clone()).collect(),
        middle_edges,
        vec![0.0; middle.len()],
    )?;
    let middle_sccs = crate::graph::strongly_connected_components(&middle_net);
    let middle_core: Vec<usize> = middle_sccs
        .first()
        .map(|c| c.iter().map(|&k| middle[k]).collect())
        .unwrap_or_default();
    let middle_scc_size = middle_core.len();
    let middle_strongly_connected = middle_scc_size == n_scc;

    let in_core = {
        let mut mask = vec![false; n];
        for &v in &middle_core {
            mask[v] = true;
        }
        mask
    };
    let tube_tendril_nodes: Vec<String> = (0..n)
        .filter(|&v| assignment.regions[v] == Region::Scc && !in_core[v])
        .filter(|&v| {
            // touched only through IN/OUT neighbours (or stranded entirely)
            let touches_core = filtered.out_neighbors(v).iter().any(|&w| in_core[w])
                || (0..n).any(|u| in_core[u] && filtered.out_neighbors(u).contains(&v));
            !touches_core
        })
        .map(|v| net.nodes[v].clone())
        .collect();

    let mut warnings = Vec::new();
    if n_scc > 0 && !middle_strongly_connected {
        warnings.push(format!(
            "middle region is not strongly connected after filtering \
             ({middle_scc_size} of {n_scc} nodes in its largest component)"
        ));
    }
    Ok(BowtieDiagnostics {
        n_in,
        n_scc,
        n_out,
        n_disconnected,
        middle_scc_size,
        middle_strongly_connected,
        tube_tendril_nodes,
        warnings,
    })
}
