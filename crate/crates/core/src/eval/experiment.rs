//! One-class experiment protocol over datasets × methods × seeds.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GramError, Result};
use crate::eval::metrics::{auc, average_precision, AP_TIE_POLICY};
use crate::eval::split::{build_split, SplitSpec};
use crate::graph::{make_synthetic_dataset, parse_tudataset, FeaturePolicy, Graph, GraphDataset, Wiring};
use crate::nn::Activation;
use crate::scorer::{score, NoiseMode};
use crate::vgae::{train, VgaeConfig, VgaeModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Gram,
    ReconstructionBaseline,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Gram => "gram",
            Method::ReconstructionBaseline => "reconstruction_baseline",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gram" => Ok(Method::Gram),
            "reconstruction_baseline" | "baseline" => Ok(Method::ReconstructionBaseline),
            _ => Err(format!("unknown method `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic {
        count_per_class: usize,
        min_nodes: usize,
        max_nodes: usize,
        seed: u64,
    },
    TuDataset {
        path: PathBuf,
        name: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub source: DataSource,
    /// Replaces node features. Without one, synthetic and featureless
    /// corpora get the default degree encoding.
    #[serde(default)]
    pub features: Option<FeaturePolicy>,
    #[serde(default)]
    pub normal_class: Option<i64>,
}

impl DatasetSpec {
    pub fn synthetic() -> Self {
        DatasetSpec {
            name: "synthetic".into(),
            source: DataSource::Synthetic {
                count_per_class: 250,
                min_nodes: 7,
                max_nodes: 15,
                seed: 0,
            },
            features: Some(FeaturePolicy::default()),
            normal_class: None,
        }
    }

    pub fn load(&self) -> Result<GraphDataset> {
        let ds = match &self.source {
            DataSource::Synthetic {
                count_per_class,
                min_nodes,
                max_nodes,
                seed,
            } => make_synthetic_dataset(
                *count_per_class,
                *min_nodes,
                *max_nodes,
                &mut ChaCha8Rng::seed_from_u64(*seed),
                Wiring::Random,
            )?
            .with_features(FeaturePolicy::default()),
            DataSource::TuDataset { path, name } => parse_tudataset(path, name)?,
        };
        Ok(match self.features {
            Some(policy) => ds.with_features(policy),
            None => ds,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub datasets: Vec<DatasetSpec>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub train_fraction: f64,
    pub model: VgaeConfig,
    pub phi: Activation,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            datasets: vec![DatasetSpec::synthetic()],
            methods: vec![Method::Gram, Method::ReconstructionBaseline],
            seeds: vec![0, 1, 2],
            train_fraction: 0.8,
            model: ExperimentConfig::default_model(),
            phi: Activation::Relu,
        }
    }
}

impl ExperimentConfig {
    /// Model settings of the evaluation protocol: the library defaults
    /// without dropout and with 100 epochs, chosen by grid search on the
    /// synthetic task.
    pub fn default_model() -> VgaeConfig {
        VgaeConfig {
            dropout_rate: 0.0,
            epochs: 100,
            ..VgaeConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(GramError::Domain("experiment lists no datasets".into()));
        }
        if self.methods.is_empty() {
            return Err(GramError::Domain("experiment lists no methods".into()));
        }
        if self.seeds.is_empty() {
            return Err(GramError::Domain("experiment lists no seeds".into()));
        }
        self.model.validate()
    }
}

/// Outcome of one (dataset, method, seed) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub dataset: String,
    pub method: Method,
    pub seed: u64,
    pub auc: Option<f64>,
    pub ap: Option<f64>,
    pub error: Option<String>,
    pub anomalies_with_replacement: bool,
}

/// Raw test-set scores of one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellScores {
    pub dataset: String,
    pub method: Method,
    pub seed: u64,
    pub graph_ids: Vec<usize>,
    pub labels: Vec<u8>,
    pub scores: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub method: Method,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub ap_mean: f64,
    pub ap_std: f64,
    pub seeds_ok: usize,
    pub seeds_failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
    pub cells: Vec<CellResult>,
    pub ap_tie_policy: String,
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl ResultsTable {
    fn from_cells(cells: Vec<CellResult>) -> Self {
        let mut rows: Vec<ResultRow> = Vec::new();
        for c in &cells {
            if rows.iter().any(|r| r.dataset == c.dataset && r.method == c.method) {
                continue;
            }
            let same: Vec<&CellResult> = cells
                .iter()
                .filter(|d| d.dataset == c.dataset && d.method == c.method)
                .collect();
            let aucs: Vec<f64> = same.iter().filter_map(|d| d.auc).collect();
            let aps: Vec<f64> = same.iter().filter_map(|d| d.ap).collect();
            let (auc_mean, auc_std) = mean_std(&aucs);
            let (ap_mean, ap_std) = mean_std(&aps);
            rows.push(ResultRow {
                dataset: c.dataset.clone(),
                method: c.method,
                auc_mean,
                auc_std,
                ap_mean,
                ap_std,
                seeds_ok: aucs.len(),
                seeds_failed: same.len() - aucs.len(),
            });
        }
        ResultsTable {
            rows,
            cells,
            ap_tie_policy: AP_TIE_POLICY.into(),
        }
    }

    pub fn row(&self, dataset: &str, method: Method) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.dataset == dataset && r.method == method)
    }

    pub fn all_failed(&self) -> bool {
        self.cells.iter().all(|c| c.error.is_some())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("dataset,method,auc_mean,auc_std,ap_mean,ap_std,seeds_ok,seeds_failed\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.dataset,
                r.method.name(),
                r.auc_mean,
                r.auc_std,
                r.ap_mean,
                r.ap_std,
                r.seeds_ok,
                r.seeds_failed
            );
        }
        out
    }

    /// Percentages, mean ± std to two decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<14} {:<24} {:>16} {:>16}", "dataset", "method", "AUC (%)", "AP (%)");
        for r in &self.rows {
            let fmt = |m: f64, s: f64| {
                if m.is_nan() {
                    "failed".to_string()
                } else {
                    format!("{:.2} ± {:.2}", 100.0 * m, 100.0 * s)
                }
            };
            let _ = writeln!(
                out,
                "{:<14} {:<24} {:>16} {:>16}",
                r.dataset,
                r.method.name(),
                fmt(r.auc_mean, r.auc_std),
                fmt(r.ap_mean, r.ap_std)
            );
        }
        out
    }
}

pub struct ExperimentOutput {
    pub table: ResultsTable,
    pub raw_scores: Vec<CellScores>,
}

impl ExperimentOutput {
    /// Writes `results.csv`, `results.json`, `results.txt` and `raw_scores.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| GramError::io(dir, e))?;
        let put = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| GramError::io(p, e))
        };
        put("results.csv", self.table.to_csv())?;
        put("results.json", serde_json::to_string_pretty(&self.table)?)?;
        put("results.txt", self.table.to_text())?;
        put("raw_scores.json", serde_json::to_string_pretty(&self.raw_scores)?)
    }
}

/// Deterministic reconstruction error of `g` under `model` (`E = 0`).
pub fn reconstruction_baseline_score(model: &VgaeModel, g: &Graph) -> Result<f64> {
    model.reconstruction_error(g)
}

fn method_scores(model: &VgaeModel, graphs: &[&Graph], method: Method, phi: Activation) -> Result<Vec<f64>> {
    graphs
        .iter()
        .map(|g| match method {
            Method::Gram => Ok(score(model, g, phi, NoiseMode::Deterministic, 0)?.graph_score),
            Method::ReconstructionBaseline => reconstruction_baseline_score(model, g),
        })
        .collect()
}

/// One training run per (dataset, seed); every method scores the same model.
fn run_job(
    name: &str,
    ds: &GraphDataset,
    normal_class: Option<i64>,
    seed: u64,
    cfg: &ExperimentConfig,
) -> Vec<(CellResult, Option<CellScores>)> {
    let fail = |msg: String, with_replacement: bool| {
        cfg.methods
            .iter()
            .map(|&method| {
                let cell = CellResult {
                    dataset: name.into(),
                    method,
                    seed,
                    auc: None,
                    ap: None,
                    error: Some(msg.clone()),
                    anomalies_with_replacement: with_replacement,
                };
                (cell, None)
            })
            .collect()
    };
    let spec = SplitSpec {
        normal_class,
        train_fraction: cfg.train_fraction,
        seed,
    };
    let split = match build_split(ds, &spec) {
        Ok(s) => s,
        Err(e) => return fail(e.to_string(), false),
    };
    let train_set: Vec<Graph> = split.train.iter().map(|&i| ds.graphs()[i].clone()).collect();
    let model_cfg = VgaeConfig {
        seed,
        ..cfg.model.clone()
    };
    let model = match train(&train_set, &model_cfg) {
        Ok((m, _)) => m,
        Err(e) => return fail(e.to_string(), split.anomalies_with_replacement),
    };
    let test: Vec<&Graph> = split.test.iter().map(|&i| &ds.graphs()[i]).collect();
    cfg.methods
        .iter()
        .map(|&method| {
            let outcome = method_scores(&model, &test, method, cfg.phi).and_then(|s| {
                let a = auc(&s, &split.test_labels)?;
                let p = average_precision(&s, &split.test_labels)?;
                Ok((s, a, p))
            });
            let mut cell = CellResult {
                dataset: name.into(),
                method,
                seed,
                auc: None,
                ap: None,
                error: None,
                anomalies_with_replacement: split.anomalies_with_replacement,
            };
            match outcome {
                Ok((scores, a, p)) => {
                    cell.auc = Some(a);
                    cell.ap = Some(p);
                    let raw = CellScores {
                        dataset: name.into(),
                        method,
                        seed,
                        graph_ids: split.test.clone(),
                        labels: split.test_labels.clone(),
                        scores,
                    };
                    (cell, Some(raw))
                }
                Err(e) => {
                    cell.error = Some(e.to_string());
                    (cell, None)
                }
            }
        })
        .collect()
}

/// Runs every (dataset, seed) job in parallel and merges the cells in
/// sorted (dataset, method, seed) order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let loaded: Vec<(String, GraphDataset, Option<i64>)> = cfg
        .datasets
        .iter()
        .map(|d| Ok((d.name.clone(), d.load()?, d.normal_class)))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, u64)> = (0..loaded.len())
        .flat_map(|d| cfg.seeds.iter().map(move |&s| (d, s)))
        .collect();
    let mut results: Vec<(CellResult, Option<CellScores>)> = jobs
        .par_iter()
        .flat_map_iter(|&(d, seed)| {
            let (name, ds, normal) = &loaded[d];
            run_job(name, ds, *normal, seed, cfg)
        })
        .collect();
    results.sort_by(|a, b| {
        (&a.0.dataset, a.0.method, a.0.seed).cmp(&(&b.0.dataset, b.0.method, b.0.seed))
    });
    let (cells, raw): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(ExperimentOutput {
        table: ResultsTable::from_cells(cells),
        raw_scores: raw.into_iter().flatten().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            datasets: vec![DatasetSpec {
                source: DataSource::Synthetic {
                    count_per_class: 10,
                    min_nodes: 6,
                    max_nodes: 8,
                    seed: 0,
                },
                ..DatasetSpec::synthetic()
            }],
            methods: vec![Method::Gram],
            seeds: vec![4],
            model: VgaeConfig {
                hidden_dim: 8,
                latent_dim: 4,
                epochs: 2,
                ..VgaeConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn one_cell_gives_one_row_with_zero_spread() {
        let out = run_experiment(&tiny()).unwrap();
        assert_eq!(out.table.rows.len(), 1);
        let r = &out.table.rows[0];
        assert_eq!((r.auc_std, r.ap_std), (0.0, 0.0));
        assert!((0.0..=1.0).contains(&r.auc_mean) && (0.0..=1.0).contains(&r.ap_mean));
        assert_eq!(out.raw_scores.len(), 1);
        assert_eq!(out.raw_scores[0].scores.len(), 4);
    }

    #[test]
    fn empty_lists_are_rejected() {
        let mut c = tiny();
        c.methods.clear();
        assert!(run_experiment(&c).is_err());
        let mut c = tiny();
        c.seeds.clear();
        assert!(run_experiment(&c).is_err());
    }

    #[test]
    fn failures_are_recorded_per_cell() {
        let mut c = tiny();
        c.datasets[0].normal_class = Some(9);
        let out = run_experiment(&c).unwrap();
        assert!(out.table.all_failed());
        assert_eq!(out.table.rows[0].seeds_failed, 1);
    }

    #[test]
    fn population_spread() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
    }
}
