//! JSON checkpoints: `{"parameters": [{"name", "rows", "cols", "values"}]}`.

use serde::{Deserialize, Serialize};

use super::graph::ParamStore;
use super::{NnError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub parameters: Vec<CheckpointEntry>,
}

impl Checkpoint {
    pub fn from_store(store: &ParamStore) -> Self {
        Self {
            parameters: store
                .iter()
                .map(|(_, name, t)| CheckpointEntry {
                    name: name.to_string(),
                    rows: t.rows(),
                    cols: t.cols(),
                    values: t.data().to_vec(),
                })
                .collect(),
        }
    }

    /// Overwrites every parameter of `store`. The name sets must match
    /// exactly and every shape must agree; on error `store` is untouched.
    pub fn apply(&self, store: &mut ParamStore) -> Result<()> {
        let mut updates = Vec::with_capacity(self.parameters.len());
        for e in &self.parameters {
            let id = store
                .find(&e.name)
                .ok_or_else(|| NnError::CheckpointUnknown(e.name.clone()))?;
            let expected = store.get(id).shape();
            if (e.rows, e.cols) != expected {
                return Err(NnError::CheckpointShape {
                    name: e.name.clone(),
                    expected,
                    found: (e.rows, e.cols),
                });
            }
            if e.values.len() != e.rows * e.cols {
                return Err(NnError::CheckpointLength(e.name.clone(), e.values.len()));
            }
            updates.push((id, &e.values));
        }
        if let Some((_, name, _)) = store
            .iter()
            .find(|(_, name, _)| !self.parameters.iter().any(|e| e.name == *name))
        {
            return Err(NnError::CheckpointMissing(name.to_string()));
        }
        for (id, values) in updates {
            store.get_mut(id).data_mut().copy_from_slice(values);
        }
        Ok(())
    }
}

pub fn save_checkpoint(store: &ParamStore) -> Result<String> {
    Ok(serde_json::to_string_pretty(&Checkpoint::from_store(store))?)
}

pub fn load_checkpoint(json: &str, store: &mut ParamStore) -> Result<()> {
    let ck: Checkpoint = serde_json::from_str(json)?;
    ck.apply(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor2;

    #[test]
    fn round_trip_and_rejections() {
        let mut a = ParamStore::new();
        a.add("w", Tensor2::from_rows(&[vec![1.0, 2.0], vec![3.0, 0.1]]));
        a.add("b", Tensor2::row_vector(&[-0.5, 1e-300]));
        let json = save_checkpoint(&a).unwrap();

        let mut b = ParamStore::new();
        b.add("w", Tensor2::zeros(2, 2));
        b.add("b", Tensor2::zeros(1, 2));
        load_checkpoint(&json, &mut b).unwrap();
        assert_eq!(a, b);

        let mut wrong = ParamStore::new();
        wrong.add("w", Tensor2::zeros(2, 3));
        wrong.add("b", Tensor2::zeros(1, 2));
        assert!(matches!(
            load_checkpoint(&json, &mut wrong),
            Err(NnError::CheckpointShape { .. })
        ));
        assert_eq!(wrong.get(wrong.find("b").unwrap()).data(), &[0.0, 0.0]);

        let mut extra = b.clone();
        extra.add("c", Tensor2::zeros(1, 1));
        assert!(matches!(
            load_checkpoint(&json, &mut extra),
            Err(NnError::CheckpointMissing(_))
        ));
    }
}
