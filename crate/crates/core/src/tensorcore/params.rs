//! Named parameter tensors with paired gradient buffers.

use std::collections::HashMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{hash_str, rng_from};
use crate::tensorcore::matrix::MatRef;

/// Index of an entry in a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn as_matrix(&self) -> MatRef<'_> {
        let (rows, cols) = match self.shape.as_slice() {
            [r, c] => (*r, *c),
            [n] => (1, *n),
            _ => (1, self.value.len()),
        };
        MatRef {
            rows,
            cols,
            data: &self.value,
        }
    }
}

/// How a new entry is initialized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    Zeros,
    Constant(f64),
    /// Uniform in `[-s, s]` with `s = 1/sqrt(fan_in)`; fan-in is the column
    /// count of a matrix.
    FanIn,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    entries: Vec<Param>,
    lookup: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a tensor. The random stream for `Init::FanIn` is keyed by
    /// `(seed, name)`, so the same name gets the same values in any model
    /// built from the same seed.
    pub fn register(&mut self, name: &str, shape: &[usize], init: Init, seed: u64) -> Result<ParamId> {
        if self.lookup.contains_key(name) {
            return Err(Error::Config(format!("duplicate parameter name {name:?}")));
        }
        let n: usize = shape.iter().product();
        let value = match init {
            Init::Zeros => vec![0.0; n],
            Init::Constant(c) => vec![c; n],
            Init::FanIn => {
                let fan_in = *shape.last().unwrap_or(&1);
                let s = 1.0 / (fan_in.max(1) as f64).sqrt();
                let mut rng = rng_from(seed, &[hash_str(name)]);
                (0..n).map(|_| rng.random_range(-s..=s)).collect()
            }
        };
        self.insert(name, shape.to_vec(), value)
    }

    /// Adds an entry with explicit values.
    pub fn insert(&mut self, name: &str, shape: Vec<usize>, value: Vec<f64>) -> Result<ParamId> {
        if self.lookup.contains_key(name) {
            return Err(Error::Config(format!("duplicate parameter name {name:?}")));
        }
        if shape.iter().product::<usize>() != value.len() {
            return Err(Error::dim(format!(
                "parameter {name:?}: shape {shape:?} does not hold {} values",
                value.len()
            )));
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("parameter {name:?} has non-finite values")));
        }
        let id = ParamId(self.entries.len());
        self.lookup.insert(name.to_string(), id.0);
        self.entries.push(Param {
            name: name.to_string(),
            shape,
            grad: vec![0.0; value.len()],
            value,
        });
        Ok(id)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.lookup.get(name).map(|&i| ParamId(i))
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.entries[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.entries[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.id(name).map(|id| &mut self.entries[id.0])
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        &self.entries[id.0].value
    }

    pub fn matrix(&self, id: ParamId) -> MatRef<'_> {
        self.entries[id.0].as_matrix()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.entries.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.entries.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(Param::len).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.entries {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn grads_finite(&self) -> bool {
        self.entries.iter().all(|p| p.grad.iter().all(|g| g.is_finite()))
    }

    pub fn values_finite(&self) -> bool {
        self.entries.iter().all(|p| p.value.iter().all(|v| v.is_finite()))
    }

    /// Copies values of entries that exist in both stores under the same
    /// name and shape. Returns the number of entries copied.
    pub fn copy_matching_from(&mut self, other: &ParamStore) -> usize {
        let mut copied = 0;
        for p in &mut self.entries {
            if let Some(src) = other.by_name(&p.name) {
                if src.shape == p.shape {
                    p.value.copy_from_slice(&src.value);
                    copied += 1;
                }
            }
        }
        copied
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn register_and_lookup() {
        let mut s = ParamStore::new();
        let w = s.register("w", &[3, 4], Init::FanIn, 1).unwrap();
        let b = s.register("b", &[3], Init::Zeros, 1).unwrap();
        assert_eq!(s.id("w"), Some(w));
        assert_eq!(s.get(b).value, vec![0.0; 3]);
        assert_eq!(s.get(w).grad.len(), 12);
        assert!(s.get(w).value.iter().all(|v| v.abs() <= 0.5));
        assert!(matches!(s.register("w", &[1], Init::Zeros, 1), Err(Error::Config(_))));
    }

    #[test]
    fn init_keyed_by_name_not_order() {
        let mut a = ParamStore::new();
        a.register("x", &[5, 5], Init::FanIn, 9).unwrap();
        a.register("y", &[5, 5], Init::FanIn, 9).unwrap();
        let mut b = ParamStore::new();
        b.register("y", &[5, 5], Init::FanIn, 9).unwrap();
        assert_eq!(a.by_name("y").unwrap().value, b.by_name("y").unwrap().value);
    }

    #[test]
    fn insert_rejects_bad_shapes_and_nan() {
        let mut s = ParamStore::new();
        assert!(s.insert("a", vec![2, 2], vec![0.0; 3]).is_err());
        assert!(s.insert("a", vec![1], vec![f64::NAN]).is_err());
    }
}
