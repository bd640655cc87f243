use crate::error::Result;
use crate::tensorcore::{Linear, Matrix, ParamStore};

/// Pre-activation of one gate: `W_x·x + W_h·u + b`.
///
/// With depth 2 the sum above has `width` rows and is passed through tanh
/// and a second affine map `V·(·) + c` back to the hidden size.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    input: Linear,
    hidden: Linear,
    deep: Option<Linear>,
}

pub(crate) struct GateCache {
    inner: Option<Matrix>,
}

impl Gate {
    /// `suffix` is the gate symbol appended to the parameter names
    /// (`W_x{suffix}`, `W_h{suffix}`, `b{_suffix}`).
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        suffix: &str,
        input_dim: usize,
        hidden_dim: usize,
        depth: usize,
        width: usize,
        seed: u64,
    ) -> Result<Self> {
        let bias_name = if suffix.is_empty() {
            format!("{prefix}.b")
        } else {
            format!("{prefix}.b_{suffix}")
        };
        let inner = if depth >= 2 { width } else { hidden_dim };
        let input = Linear::register(
            store,
            &format!("{prefix}.W_x{suffix}"),
            Some(&bias_name),
            input_dim,
            inner,
            seed,
        )?;
        let hidden = Linear::register(store, &format!("{prefix}.W_h{suffix}"), None, hidden_dim, inner, seed)?;
        let deep = if depth >= 2 {
            let c_name = if suffix.is_empty() {
                format!("{prefix}.c")
            } else {
                format!("{prefix}.c_{suffix}")
            };
            Some(Linear::register(
                store,
                &format!("{prefix}.V_{}", if suffix.is_empty() { "g" } else { suffix }),
                Some(&c_name),
                width,
                hidden_dim,
                seed,
            )?)
        } else {
            None
        };
        Ok(Gate { input, hidden, deep })
    }

    pub(crate) fn forward(&self, store: &ParamStore, x: &Matrix, u: &Matrix) -> Result<(Matrix, GateCache)> {
        let mut pre = self.input.forward(store, x)?;
        pre.add_assign(&self.hidden.forward(store, u)?);
        match &self.deep {
            None => Ok((pre, GateCache { inner: None })),
            Some(deep) => {
                let inner = pre.map(f64::tanh);
                let out = deep.forward(store, &inner)?;
                Ok((out, GateCache { inner: Some(inner) }))
            }
        }
    }

    /// Returns `(dx, du)`.
    pub(crate) fn backward(
        &self,
        store: &mut ParamStore,
        x: &Matrix,
        u: &Matrix,
        cache: &GateCache,
        dpre: &Matrix,
    ) -> (Matrix, Matrix) {
        let dsum = match (&self.deep, &cache.inner) {
            (Some(deep), Some(inner)) => {
                let dinner = deep.backward(store, inner, dpre);
                dinner.zip_map(inner, |g, a| g * (1.0 - a * a))
            }
            _ => dpre.clone(),
        };
        let dx = self.input.backward(store, x, &dsum);
        let du = self.hidden.backward(store, u, &dsum);
        (dx, du)
    }
}
