//! Graphs, datasets and graph-matrix preprocessing.

mod synthetic;
mod tudataset;

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GramError, Result};
use crate::nn::Matrix;

pub use synthetic::{
    gen_binary_tree, gen_double_ring, make_synthetic_dataset, Wiring, ANOMALY_LABEL, NORMAL_LABEL,
};
pub use tudataset::{parse_tudataset, write_tudataset};

/// An undirected simple graph with a dense node feature matrix.
///
/// Edges are stored once per undirected pair as `(min, max)` in 0-based
/// node indices. Self-loops are not allowed here; the GCN preprocessing adds
/// them on its own.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    num_nodes: usize,
    edges: Vec<(usize, usize)>,
    features: Matrix,
    label: Option<i64>,
}

impl Graph {
    pub fn new(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        features: Matrix,
        label: Option<i64>,
    ) -> Result<Self> {
        if num_nodes == 0 {
            return Err(GramError::Domain("graph must have at least one node".into()));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut normalized = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a >= num_nodes || b >= num_nodes {
                return Err(GramError::Integrity(format!(
                    "edge ({a}, {b}) out of range for {num_nodes} nodes"
                )));
            }
            if a == b {
                return Err(GramError::Integrity(format!("self-loop on node {a}")));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(GramError::Integrity(format!("duplicate edge {e:?}")));
            }
            normalized.push(e);
        }
        if features.rows() != num_nodes {
            return Err(GramError::shape(
                "Graph::new features",
                format!("{num_nodes} rows"),
                features.rows(),
            ));
        }
        Ok(Graph {
            num_nodes,
            edges: normalized,
            features,
            label,
        })
    }

    /// Graph without node features (an N×0 placeholder).
    pub fn from_edges(num_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        Self::new(num_nodes, edges, Matrix::zeros(num_nodes, 0), None)
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn label(&self) -> Option<i64> {
        self.label
    }

    pub fn with_label(mut self, label: Option<i64>) -> Self {
        self.label = label;
        self
    }

    pub fn with_features(mut self, features: Matrix) -> Result<Self> {
        features.expect_shape("Graph::with_features", self.num_nodes, features.cols())?;
        self.features = features;
        Ok(self)
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Dense 0/1 adjacency matrix `A`.
    pub fn adjacency_matrix(&self) -> Matrix {
        let mut a = Matrix::zeros(self.num_nodes, self.num_nodes);
        for &(u, v) in &self.edges {
            a[(u, v)] = 1.0;
            a[(v, u)] = 1.0;
        }
        a
    }

    pub fn normalized_adjacency(&self) -> NormalizedAdjacency {
        normalized_adjacency(self)
    }

    /// True when the feature matrix equals the adjacency matrix.
    pub fn has_adjacency_features(&self) -> bool {
        self.features.shape() == (self.num_nodes, self.num_nodes)
            && self.features == self.adjacency_matrix()
    }

    pub fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; self.num_nodes];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

/// `S = D̂^{-1/2} (A + I) D̂^{-1/2}` with `d̂_n = 1 + deg(n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency(Arc<Matrix>);

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn shared(&self) -> &Arc<Matrix> {
        &self.0
    }
}

pub fn normalized_adjacency(g: &Graph) -> NormalizedAdjacency {
    let n = g.num_nodes();
    let d_hat: Vec<f64> = g.degrees().into_iter().map(|d| (d + 1) as f64).collect();
    let mut s = Matrix::zeros(n, n);
    for i in 0..n {
        s[(i, i)] = 1.0 / d_hat[i];
    }
    for &(u, v) in g.edges() {
        let w = 1.0 / (d_hat[u] * d_hat[v]).sqrt();
        s[(u, v)] = w;
        s[(v, u)] = w;
    }
    NormalizedAdjacency(Arc::new(s))
}

/// How node features are synthesized for graphs that lack them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum FeaturePolicy {
    /// `X = A`. The width equals N, so this only suits per-graph analysis.
    Adjacency,
    /// `[A | 0]` zero-padded to `width` columns; graphs with more than
    /// `width` nodes keep their unpadded adjacency.
    PaddedAdjacency { width: usize },
    /// One-hot of `min(degree, cap)`, width `cap + 1`.
    DegreeOneHot { cap: usize },
    /// A single all-ones column.
    ConstantOne,
}

impl Default for FeaturePolicy {
    fn default() -> Self {
        FeaturePolicy::DegreeOneHot { cap: 10 }
    }
}

impl std::str::FromStr for FeaturePolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "adjacency" => Ok(FeaturePolicy::Adjacency),
            other if other.starts_with("padded_adjacency:") => other["padded_adjacency:".len()..]
                .parse()
                .map(|width| FeaturePolicy::PaddedAdjacency { width })
                .map_err(|e| format!("bad padding width: {e}")),
            "constant_one" | "constant" => Ok(FeaturePolicy::ConstantOne),
            "degree" | "degree_onehot" => Ok(FeaturePolicy::default()),
            other => match other.strip_prefix("degree_onehot:") {
                Some(cap) => cap
                    .parse()
                    .map(|cap| FeaturePolicy::DegreeOneHot { cap })
                    .map_err(|e| format!("bad degree cap `{cap}`: {e}")),
                None => Err(format!("unknown feature policy `{other}`")),
            },
        }
    }
}

pub fn default_node_features(g: &Graph, policy: FeaturePolicy) -> Graph {
    let n = g.num_nodes();
    let features = match policy {
        FeaturePolicy::Adjacency => g.adjacency_matrix(),
        FeaturePolicy::PaddedAdjacency { width } => {
            let a = g.adjacency_matrix();
            let mut x = Matrix::zeros(n, width.max(n));
            for i in 0..n {
                x.row_mut(i)[..n].copy_from_slice(a.row(i));
            }
            x
        }
        FeaturePolicy::DegreeOneHot { cap } => {
            let mut x = Matrix::zeros(n, cap + 1);
            for (i, d) in g.degrees().into_iter().enumerate() {
                x[(i, d.min(cap))] = 1.0;
            }
            x
        }
        FeaturePolicy::ConstantOne => Matrix::ones(n, 1),
    };
    Graph {
        features,
        ..g.clone()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphDataset {
    name: String,
    graphs: Vec<Graph>,
}

impl GraphDataset {
    pub fn new(name: impl Into<String>, graphs: Vec<Graph>) -> Result<Self> {
        if graphs.is_empty() {
            return Err(GramError::Domain("dataset must contain at least one graph".into()));
        }
        Ok(GraphDataset {
            name: name.into(),
            graphs,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn class_ids(&self) -> BTreeSet<i64> {
        self.graphs.iter().filter_map(Graph::label).collect()
    }

    /// The shared feature width, or `None` when graphs disagree.
    pub fn feature_dim(&self) -> Option<usize> {
        let m = self.graphs[0].feature_dim();
        self.graphs.iter().all(|g| g.feature_dim() == m).then_some(m)
    }

    pub fn with_features(&self, policy: FeaturePolicy) -> GraphDataset {
        GraphDataset {
            name: self.name.clone(),
            graphs: self
                .graphs
                .iter()
                .map(|g| default_node_features(g, policy))
                .collect(),
        }
    }

    pub fn into_graphs(self) -> Vec<Graph> {
        self.graphs
    }
}
