//! JSON parameter checkpoints.
//!
//! ```json
//! { "format_version": 1,
//!   "architecture": { ... },
//!   "params": { "encoder.0.weight": { "shape": [7, 64], "data": [ ... ] }, ... } }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{GramError, Result};
use crate::nn::layers::Params;
use crate::nn::matrix::Matrix;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBlob {
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<A> {
    pub format_version: u32,
    pub architecture: A,
    pub params: BTreeMap<String, ParamBlob>,
}

impl<A: Serialize + DeserializeOwned> Checkpoint<A> {
    pub fn new(architecture: A, params: &Params) -> Self {
        let params = params
            .iter()
            .map(|p| {
                let (r, c) = p.value.shape();
                (
                    p.name.clone(),
                    ParamBlob {
                        shape: [r, c],
                        data: p.value.data().to_vec(),
                    },
                )
            })
            .collect();
        Checkpoint {
            format_version: FORMAT_VERSION,
            architecture,
            params,
        }
    }

    /// Copies the stored values into `target`, which must already have the
    /// right names and shapes (typically a freshly built model).
    pub fn restore_into(&self, target: &mut Params) -> Result<()> {
        if self.params.len() != target.len() {
            return Err(GramError::Integrity(format!(
                "checkpoint holds {} parameters, model expects {}",
                self.params.len(),
                target.len()
            )));
        }
        for idx in 0..target.len() {
            let name = target.name(idx).to_owned();
            let blob = self.params.get(&name).ok_or_else(|| {
                GramError::Integrity(format!("checkpoint lacks parameter `{name}`"))
            })?;
            let m = Matrix::from_vec(blob.shape[0], blob.shape[1], blob.data.clone())?;
            target.get(idx).expect_same("checkpoint restore", &m)?;
            if !m.is_finite() {
                return Err(GramError::Numeric(format!("checkpoint parameter `{name}`")));
            }
            *target.get_mut(idx) = m;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(text)?;
        if ck.format_version != FORMAT_VERSION {
            return Err(GramError::Integrity(format!(
                "unsupported checkpoint format_version {} (expected {FORMAT_VERSION})",
                ck.format_version
            )));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| GramError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GramError::io(path, e))?;
        Self::from_json(&text)
    }
}
