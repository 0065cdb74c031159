//! Reader and writer for the TUDataset plain-text corpus layout.
//!
//! A corpus `NAME` in a directory consists of
//!
//! * `NAME_A.txt`: one directed edge `i, j` per line, 1-based global node ids;
//! * `NAME_graph_indicator.txt`: line `k` holds the graph id of node `k`;
//! * `NAME_graph_labels.txt`: one integer class per graph;
//! * optionally `NAME_node_labels.txt` (one integer per node) and
//!   `NAME_node_attributes.txt` (comma-separated reals per node).
//!
//! Node labels become one-hot features over the sorted set of label values,
//! followed by any node attributes. Corpora with neither get
//! [`FeaturePolicy::default`] features.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{GramError, Result};
use crate::graph::{default_node_features, FeaturePolicy, Graph, GraphDataset};
use crate::nn::Matrix;

fn file_path(dir: &Path, name: &str, suffix: &str) -> PathBuf {
    dir.join(format!("{name}_{suffix}.txt"))
}

/// Non-empty lines with their 1-based line numbers.
fn read_lines(path: &Path, required: bool) -> Result<Option<Vec<(usize, String)>>> {
    if !path.exists() {
        if required {
            return Err(GramError::Format {
                file: path.to_path_buf(),
                msg: "missing required file".into(),
            });
        }
        return Ok(None);
    }
    let text = std::fs::read_to_string(path).map_err(|e| GramError::io(path, e))?;
    Ok(Some(
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, l.trim().to_owned()))
            .collect(),
    ))
}

fn parse_token<T: FromStr>(path: &Path, line: usize, token: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    token.trim().parse().map_err(|e| GramError::Parse {
        file: path.to_path_buf(),
        line,
        msg: format!("`{}`: {e}", token.trim()),
    })
}

pub fn parse_tudataset(dir: &Path, name: &str) -> Result<GraphDataset> {
    let a_path = file_path(dir, name, "A");
    let ind_path = file_path(dir, name, "graph_indicator");
    let lab_path = file_path(dir, name, "graph_labels");
    let nl_path = file_path(dir, name, "node_labels");
    let na_path = file_path(dir, name, "node_attributes");

    let a_lines = read_lines(&a_path, true)?.unwrap_or_default();
    let ind_lines = read_lines(&ind_path, true)?.unwrap_or_default();
    let lab_lines = read_lines(&lab_path, true)?.unwrap_or_default();

    let indicator: Vec<i64> = ind_lines
        .iter()
        .map(|(ln, l)| parse_token(&ind_path, *ln, l))
        .collect::<Result<_>>()?;
    let total_nodes = indicator.len();

    // Distinct graph ids in ascending order; nodes keep their file order
    // within each graph.
    let graph_ids: BTreeSet<i64> = indicator.iter().copied().collect();
    let graph_pos: BTreeMap<i64, usize> = graph_ids.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let mut local = vec![0usize; total_nodes];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); graph_ids.len()];
    for (node, gid) in indicator.iter().enumerate() {
        let g = graph_pos[gid];
        local[node] = members[g].len();
        members[g].push(node);
    }

    let labels: Vec<i64> = lab_lines
        .iter()
        .map(|(ln, l)| parse_token(&lab_path, *ln, l))
        .collect::<Result<_>>()?;
    if labels.len() != graph_ids.len() {
        return Err(GramError::Integrity(format!(
            "{} lists {} labels for {} graphs",
            lab_path.display(),
            labels.len(),
            graph_ids.len()
        )));
    }

    let mut edge_sets: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); graph_ids.len()];
    let mut edge_order: Vec<Vec<(usize, usize)>> = vec![Vec::new(); graph_ids.len()];
    for (ln, line) in &a_lines {
        let mut parts = line.split(',');
        let (Some(i), Some(j), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(GramError::Parse {
                file: a_path.clone(),
                line: *ln,
                msg: format!("expected `i, j`, got `{line}`"),
            });
        };
        let i: usize = parse_token(&a_path, *ln, i)?;
        let j: usize = parse_token(&a_path, *ln, j)?;
        if i == 0 || j == 0 || i > total_nodes || j > total_nodes {
            return Err(GramError::Integrity(format!(
                "{} line {ln}: node id outside 1..={total_nodes}",
                a_path.display()
            )));
        }
        let (i, j) = (i - 1, j - 1);
        if indicator[i] != indicator[j] {
            return Err(GramError::Integrity(format!(
                "{} line {ln}: edge ({}, {}) crosses graphs {} and {}",
                a_path.display(),
                i + 1,
                j + 1,
                indicator[i],
                indicator[j]
            )));
        }
        if i == j {
            continue;
        }
        let g = graph_pos[&indicator[i]];
        let e = (local[i].min(local[j]), local[i].max(local[j]));
        if edge_sets[g].insert(e) {
            edge_order[g].push(e);
        }
    }

    let node_labels: Option<Vec<i64>> = read_lines(&nl_path, false)?
        .map(|lines| {
            lines
                .iter()
                .map(|(ln, l)| parse_token(&nl_path, *ln, l))
                .collect::<Result<Vec<i64>>>()
        })
        .transpose()?;
    let node_attrs: Option<Vec<Vec<f64>>> = read_lines(&na_path, false)?
        .map(|lines| {
            lines
                .iter()
                .map(|(ln, l)| {
                    l.split(',')
                        .map(|t| parse_token(&na_path, *ln, t))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;

    if let Some(nl) = &node_labels {
        check_len(&nl_path, nl.len(), total_nodes)?;
    }
    let attr_width = match &node_attrs {
        Some(na) => {
            check_len(&na_path, na.len(), total_nodes)?;
            let w = na.first().map_or(0, Vec::len);
            if na.iter().any(|r| r.len() != w) {
                return Err(GramError::Integrity(format!(
                    "{}: ragged attribute rows",
                    na_path.display()
                )));
            }
            w
        }
        None => 0,
    };
    let label_index: BTreeMap<i64, usize> = node_labels
        .iter()
        .flatten()
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();
    let width = label_index.len() + attr_width;

    let mut graphs = Vec::with_capacity(members.len());
    for (g, nodes) in members.iter().enumerate() {
        let mut x = Matrix::zeros(nodes.len(), width);
        for (row, &node) in nodes.iter().enumerate() {
            if let Some(nl) = &node_labels {
                x[(row, label_index[&nl[node]])] = 1.0;
            }
            if let Some(na) = &node_attrs {
                for (k, v) in na[node].iter().enumerate() {
                    x[(row, label_index.len() + k)] = *v;
                }
            }
        }
        let graph = Graph::new(nodes.len(), edge_order[g].clone(), x, Some(labels[g]))?;
        graphs.push(if width == 0 {
            default_node_features(&graph, FeaturePolicy::default())
        } else {
            graph
        });
    }
    GraphDataset::new(name, graphs)
}

fn check_len(path: &Path, got: usize, nodes: usize) -> Result<()> {
    if got != nodes {
        return Err(GramError::Integrity(format!(
            "{} has {got} rows for {nodes} nodes",
            path.display()
        )));
    }
    Ok(())
}

/// Writes the structure of `ds` (edges, partition, graph labels) in the
/// same layout. Node features are not written. Unlabelled graphs get 0.
pub fn write_tudataset(ds: &GraphDataset, dir: &Path, name: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| GramError::io(dir, e))?;
    let mut a = String::new();
    let mut ind = String::new();
    let mut lab = String::new();
    let mut offset = 0usize;
    for (gid, g) in ds.graphs().iter().enumerate() {
        let mut directed: Vec<(usize, usize)> = g
            .edges()
            .iter()
            .flat_map(|&(u, v)| [(u, v), (v, u)])
            .collect();
        directed.sort_unstable();
        for (u, v) in directed {
            writeln!(a, "{}, {}", offset + u + 1, offset + v + 1).unwrap();
        }
        for _ in 0..g.num_nodes() {
            writeln!(ind, "{}", gid + 1).unwrap();
        }
        writeln!(lab, "{}", g.label().unwrap_or(0)).unwrap();
        offset += g.num_nodes();
    }
    for (suffix, body) in [("A", a), ("graph_indicator", ind), ("graph_labels", lab)] {
        let path = file_path(dir, name, suffix);
        std::fs::write(&path, body).map_err(|e| GramError::io(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, suffix: &str, body: &str) {
        std::fs::write(file_path(dir, name, suffix), body).unwrap();
    }

    #[test]
    fn smallest_corpus() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "T", "A", "1, 2\n2, 1\n");
        write(dir.path(), "T", "graph_indicator", "1\n1\n");
        write(dir.path(), "T", "graph_labels", "1\n");
        let ds = parse_tudataset(dir.path(), "T").unwrap();
        assert_eq!(ds.len(), 1);
        let g = &ds.graphs()[0];
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(g.label(), Some(1));
        // No node labels: default degree one-hot.
        assert_eq!(g.feature_dim(), 11);
    }

    #[test]
    fn missing_labels_file_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "T", "A", "1, 2\n2, 1\n");
        write(dir.path(), "T", "graph_indicator", "1\n1\n");
        match parse_tudataset(dir.path(), "T") {
            Err(GramError::Format { file, .. }) => {
                assert!(file.ends_with("T_graph_labels.txt"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cross_graph_edge_is_an_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "T", "A", "1, 3\n");
        write(dir.path(), "T", "graph_indicator", "1\n1\n2\n");
        write(dir.path(), "T", "graph_labels", "0\n1\n");
        assert!(matches!(
            parse_tudataset(dir.path(), "T"),
            Err(GramError::Integrity(_))
        ));
    }

    #[test]
    fn bad_token_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "T", "A", "1, 2\n2, x\n");
        write(dir.path(), "T", "graph_indicator", "1\n1\n");
        write(dir.path(), "T", "graph_labels", "0\n");
        match parse_tudataset(dir.path(), "T") {
            Err(GramError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn node_labels_and_attributes_become_features() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "T", "A", "1, 2\n2, 1\n3, 4\n4, 3\n");
        write(dir.path(), "T", "graph_indicator", "1\n1\n2\n2\n");
        write(dir.path(), "T", "graph_labels", "-1\n1\n");
        write(dir.path(), "T", "node_labels", "5\n2\n2\n7\n");
        write(dir.path(), "T", "node_attributes", "0.5, 1\n1.5, 2\n2.5, 3\n3.5, 4\n");
        let ds = parse_tudataset(dir.path(), "T").unwrap();
        assert_eq!(ds.class_ids().into_iter().collect::<Vec<_>>(), vec![-1, 1]);
        assert_eq!(ds.feature_dim(), Some(5));
        // Labels {2, 5, 7} map to columns 0, 1, 2.
        assert_eq!(ds.graphs()[0].features().row(0), &[0.0, 1.0, 0.0, 0.5, 1.0]);
        assert_eq!(ds.graphs()[1].features().row(1), &[0.0, 0.0, 1.0, 3.5, 4.0]);
    }
}
