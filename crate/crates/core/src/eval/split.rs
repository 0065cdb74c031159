use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GramError, Result};
use crate::graph::GraphDataset;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    /// `None` picks class 0 when present, otherwise the smallest class id.
    pub normal_class: Option<i64>,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            normal_class: None,
            train_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Indices into the dataset. `test_labels[k]` is 1 for an anomaly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub normal_class: i64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub test_labels: Vec<u8>,
    /// Set when the anomaly pool was too small and anomalies were drawn
    /// with replacement.
    pub anomalies_with_replacement: bool,
}

pub fn resolve_normal_class(ds: &GraphDataset, requested: Option<i64>) -> Result<i64> {
    let classes = ds.class_ids();
    match requested {
        Some(c) if classes.contains(&c) => Ok(c),
        Some(c) => Err(GramError::Domain(format!(
            "normal class {c} not present (classes: {classes:?})"
        ))),
        None if classes.contains(&0) => Ok(0),
        None => classes
            .first()
            .copied()
            .ok_or_else(|| GramError::Domain("dataset has no graph labels".into())),
    }
}

/// Train on a seeded `train_fraction` of the normal class; test on the
/// held-out normals plus the same number of anomalies.
pub fn build_split(ds: &GraphDataset, spec: &SplitSpec) -> Result<Split> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(GramError::Domain(format!(
            "train_fraction {} outside (0, 1)",
            spec.train_fraction
        )));
    }
    let normal_class = resolve_normal_class(ds, spec.normal_class)?;
    let mut normals = Vec::new();
    let mut anomalies = Vec::new();
    for (i, g) in ds.graphs().iter().enumerate() {
        match g.label() {
            Some(l) if l == normal_class => normals.push(i),
            Some(_) => anomalies.push(i),
            None => {}
        }
    }
    if normals.len() < 2 {
        return Err(GramError::Domain(format!(
            "normal class {normal_class} has {} graphs, need at least 2",
            normals.len()
        )));
    }
    if anomalies.is_empty() {
        return Err(GramError::Domain("no anomalous graphs in dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    normals.shuffle(&mut rng);
    let n_train = ((spec.train_fraction * normals.len() as f64).round() as usize).clamp(1, normals.len() - 1);
    let held_out = normals.split_off(n_train);
    let k = held_out.len();

    let with_replacement = anomalies.len() < k;
    let picked: Vec<usize> = if with_replacement {
        (0..k).map(|_| *anomalies.choose(&mut rng).expect("non-empty")).collect()
    } else {
        anomalies.shuffle(&mut rng);
        anomalies.truncate(k);
        anomalies
    };

    let mut test = held_out;
    let mut test_labels = vec![0u8; k];
    test.extend(picked);
    test_labels.extend(std::iter::repeat_n(1u8, k));
    Ok(Split {
        normal_class,
        train: normals,
        test,
        test_labels,
        anomalies_with_replacement: with_replacement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn ds(normals: usize, anomalies: usize) -> GraphDataset {
        let g = |l| Graph::from_edges(2, vec![(0, 1)]).unwrap().with_label(Some(l));
        let graphs = (0..normals).map(|_| g(0)).chain((0..anomalies).map(|_| g(1))).collect();
        GraphDataset::new("t", graphs).unwrap()
    }

    #[test]
    fn ten_and_ten() {
        let s = build_split(&ds(10, 10), &SplitSpec::default()).unwrap();
        assert_eq!(s.train.len(), 8);
        assert_eq!(s.test.len(), 4);
        assert_eq!(s.test_labels, vec![0, 0, 1, 1]);
        assert!(!s.anomalies_with_replacement);
        assert!(s.train.iter().all(|i| !s.test.contains(i)));
    }

    #[test]
    fn same_seed_same_split() {
        let d = ds(20, 7);
        let spec = SplitSpec { seed: 5, ..SplitSpec::default() };
        assert_eq!(build_split(&d, &spec).unwrap(), build_split(&d, &spec).unwrap());
    }

    #[test]
    fn small_anomaly_pool_is_resampled() {
        let s = build_split(&ds(20, 1), &SplitSpec::default()).unwrap();
        assert!(s.anomalies_with_replacement);
        assert_eq!(s.test_labels.iter().filter(|&&l| l == 1).count(), 4);
        assert_eq!(s.test_labels.iter().filter(|&&l| l == 0).count(), 4);
    }

    #[test]
    fn insufficient_graphs() {
        assert!(build_split(&ds(1, 3), &SplitSpec::default()).is_err());
        assert!(build_split(&ds(5, 0), &SplitSpec::default()).is_err());
        let spec = SplitSpec { normal_class: Some(7), ..SplitSpec::default() };
        assert!(build_split(&ds(5, 5), &spec).is_err());
    }

    #[test]
    fn default_normal_class_falls_back_to_smallest() {
        let g = |l| Graph::from_edges(2, vec![(0, 1)]).unwrap().with_label(Some(l));
        let d = GraphDataset::new("m", vec![g(1), g(-1), g(-1)]).unwrap();
        assert_eq!(resolve_normal_class(&d, None).unwrap(), -1);
    }
}
