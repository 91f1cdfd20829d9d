//! The filtered dependency matrix read as a directed weighted network, plus
//! the connectivity statistics reported per period.

use std::collections::VecDeque;

use serde::Serialize;

use crate::comovement::DependencyMatrix;
use crate::error::{Error, Result};

/// A directed weighted edge between entity indices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// Directed network over the panel entities. Self-loops (trend reinforcement)
/// are node attributes, never edges.
#[derive(Debug, Clone, PartialEq)]
pub struct DependencyNetwork {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
    /// W_ii per node.
    pub self_loops: Vec<f64>,
    out_adj: Vec<Vec<usize>>,
    in_degree: Vec<usize>,
}

impl DependencyNetwork {
    pub fn from_parts(nodes: Vec<String>, edges: Vec<Edge>, self_loops: Vec<f64>) -> Result<Self> {
        let n = nodes.len();
        if self_loops.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "{} self-loop attributes for {n} nodes",
                self_loops.len()
            )));
        }
        let mut out_adj = vec![Vec::new(); n];
        let mut in_degree = vec![0usize; n];
        for e in &edges {
            if e.source >= n || e.target >= n {
                return Err(Error::ShapeMismatch(format!(
                    "edge {}->{} out of range for {n} nodes",
                    e.source, e.target
                )));
            }
            if e.source == e.target {
                return Err(Error::InvalidParameter(format!(
                    "self-loop {} passed as an edge",
                    e.source
                )));
            }
            out_adj[e.source].push(e.target);
            in_degree[e.target] += 1;
        }
        Ok(DependencyNetwork {
            nodes,
            edges,
            self_loops,
            out_adj,
            in_degree,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn out_neighbors(&self, i: usize) -> &[usize] {
        &self.out_adj[i]
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.out_adj[i].len()
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.in_degree[i]
    }

    /// Zero in- and out-degree (self-loops do not count).
    pub fn is_isolated(&self, i: usize) -> bool {
        self.out_degree(i) == 0 && self.in_degree(i) == 0
    }
}

/// Edge set = every strictly positive off-diagonal W entry; the diagonal
/// becomes node attributes.
pub fn build_network(w: &DependencyMatrix) -> DependencyNetwork {
    let n = w.n();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && w.w[(i, j)] > 0.0 {
                edges.push(Edge {
                    source: i,
                    target: j,
                    weight: w.w[(i, j)],
                });
            }
        }
    }
    let self_loops = (0..n).map(|i| w.w[(i, i)]).collect();
    DependencyNetwork::from_parts(w.entities.clone(), edges, self_loops)
        .expect("matrix-derived edges are always in range")
}

/// Strongly connected components (iterative Tarjan), largest first; ties
/// broken by smallest member index. Component members are sorted.
pub fn strongly_connected_components(net: &DependencyNetwork) -> Vec<Vec<usize>> {
    let n = net.n_nodes();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut counter = 0usize;

    // explicit DFS frames: (node, next child position)
    let mut frames: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        frames.push((root, 0));
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut next)) = frames.last_mut() {
            if *next < net.out_adj[v].len() {
                let w = net.out_adj[v][*next];
                *next += 1;
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(&mut (parent, _)) = frames.last_mut() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack underflow");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    comps
}

/// Condensation adjacency over the given SCC partition (deduplicated,
/// self-edges dropped).
pub fn condensation(net: &DependencyNetwork, sccs: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = net.n_nodes();
    let mut comp_of = vec![usize::MAX; n];
    for (cid, comp) in sccs.iter().enumerate() {
        for &v in comp {
            comp_of[v] = cid;
        }
    }
    let mut dag = vec![Vec::new(); sccs.len()];
    for e in &net.edges {
        let (cu, cv) = (comp_of[e.source], comp_of[e.target]);
        if cu != cv {
            dag[cu].push(cv);
        }
    }
    for out in &mut dag {
        out.sort_unstable();
        out.dedup();
    }
    dag
}

/// Kahn's algorithm; true when the adjacency has no directed cycle.
pub fn is_acyclic(adj: &[Vec<usize>]) -> bool {
    let n = adj.len();
    let mut indeg = vec![0usize; n];
    for out in adj {
        for &v in out {
            indeg[v] += 1;
        }
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut seen = 0;
    while let Some(v) = queue.pop_front() {
        seen += 1;
        for &w in &adj[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                queue.push_back(w);
            }
        }
    }
    seen == n
}

/// Connectivity statistics computed within the largest SCC.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectivityReport {
    /// Nodes with zero in- and out-degree.
    pub n_disconnected: usize,
    /// Nodes outside the LSCC that still have an edge.
    pub n_peripheral: usize,
    pub lscc_nodes: Vec<String>,
    pub lscc_size: usize,
    /// Edge density of the LSCC-induced subgraph, |E| / (n(n-1)).
    pub density: f64,
    pub mean_out_degree: f64,
    pub stddev_out_degree: f64,
    /// Mean unweighted shortest-path hop count over ordered LSCC pairs;
    /// absent when the LSCC has fewer than two nodes.
    pub mean_path_length: Option<f64>,
}

/// Density, out-degree statistics and mean hop count on the subgraph induced
/// by the largest SCC.
pub fn connectivity_report(net: &DependencyNetwork) -> ConnectivityReport {
    let sccs = strongly_connected_components(net);
    let lscc = sccs.first().cloned().unwrap_or_default();
    let in_lscc = {
        let mut mask = vec![false; net.n_nodes()];
        for &v in &lscc {
            mask[v] = true;
        }
        mask
    };
    let n_disconnected = (0..net.n_nodes()).filter(|&v| net.is_isolated(v)).count();
    let n_peripheral = (0..net.n_nodes())
        .filter(|&v| !in_lscc[v] && !net.is_isolated(v))
        .count();

    let n = lscc.len();
    // induced adjacency, relabelled 0..n
    let mut local_id = vec![usize::MAX; net.n_nodes()];
    for (k, &v) in lscc.iter().enumerate() {
        local_id[v] = k;
    }
    let adj: Vec<Vec<usize>> = lscc
        .iter()
        .map(|&v| {
            net.out_neighbors(v)
                .iter()
                .filter(|&&w| in_lscc[w])
                .map(|&w| local_id[w])
                .collect()
        })
        .collect();
    let m: usize = adj.iter().map(Vec::len).sum();
    let density = if n >= 2 {
        m as f64 / (n * (n - 1)) as f64
    } else {
        0.0
    };
    let degrees: Vec<f64> = adj.iter().map(|a| a.len() as f64).collect();
    let mean_out = if n > 0 {
        degrees.iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    let var_out = if n > 0 {
        degrees.iter().map(|d| (d - mean_out).powi(2)).sum::<f64>() / n as f64
    } else {
        0.0
    };

    let mean_path_length = (n >= 2).then(|| {
        let mut total = 0u64;
        let mut dist = vec![u32::MAX; n];
        let mut queue = VecDeque::new();
        for s in 0..n {
            dist.fill(u32::MAX);
            dist[s] = 0;
            queue.clear();
            queue.push_back(s);
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if dist[w] == u32::MAX {
                        dist[w] = dist[v] + 1;
                        queue.push_back(w);
                    }
                }
            }
            // every node is reachable inside an SCC
            total += dist.iter().map(|&d| u64::from(d)).sum::<u64>();
        }
        total as f64 / (n * (n - 1)) as f64
    });

    ConnectivityReport {
        n_disconnected,
        n_peripheral,
        lscc_nodes: lscc.iter().map(|&v| net.nodes[v].clone()).collect(),
        lscc_size: n,
        density,
        mean_out_degree: mean_out,
        stddev_out_degree: var_out.sqrt(),
        mean_path_length,
    }
}
