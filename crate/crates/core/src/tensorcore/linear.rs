use crate::error::Result;
use crate::tensorcore::matrix::{affine, affine_backward, Matrix};
use crate::tensorcore::params::{Init, ParamId, ParamStore};

/// Affine layer `y = W·x (+ b)` whose weights live in a [`ParamStore`].
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    pub fn register(
        store: &mut ParamStore,
        weight_name: &str,
        bias_name: Option<&str>,
        inputs: usize,
        outputs: usize,
        seed: u64,
    ) -> Result<Self> {
        let weight = store.register(weight_name, &[outputs, inputs], Init::FanIn, seed)?;
        let bias = match bias_name {
            Some(name) => Some(store.register(name, &[outputs], Init::Zeros, seed)?),
            None => None,
        };
        Ok(Linear {
            weight,
            bias,
            inputs,
            outputs,
        })
    }

    pub fn forward(&self, store: &ParamStore, x: &Matrix) -> Result<Matrix> {
        affine(x, store.matrix(self.weight), self.bias.map(|b| store.value(b)))
    }

    /// Accumulates weight and bias gradients, returns the input gradient.
    pub fn backward(&self, store: &mut ParamStore, x: &Matrix, dy: &Matrix) -> Matrix {
        let mut dw = std::mem::take(&mut store.get_mut(self.weight).grad);
        let dx = match self.bias {
            Some(b) => {
                let mut db = std::mem::take(&mut store.get_mut(b).grad);
                let dx = affine_backward(x, store.matrix(self.weight), dy, &mut dw, Some(&mut db));
                store.get_mut(b).grad = db;
                dx
            }
            None => affine_backward(x, store.matrix(self.weight), dy, &mut dw, None),
        };
        store.get_mut(self.weight).grad = dw;
        dx
    }
}
