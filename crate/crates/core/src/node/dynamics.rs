use crate::error::{Error, Result};
use crate::tensorcore::{Init, Linear, Matrix, ParamId, ParamStore};

/// A vector field `dh/dt = f(h, t)` with a vector-Jacobian product.
pub trait Dynamics {
    type Cache;

    fn dim(&self) -> usize;

    fn eval(&self, store: &ParamStore, h: &Matrix, t: f64) -> Result<(Matrix, Self::Cache)>;

    /// Given `df` (gradient w.r.t. the field output), accumulates parameter
    /// gradients into `store` and returns the gradient w.r.t. `h`.
    fn vjp(&self, store: &mut ParamStore, h: &Matrix, cache: &Self::Cache, df: &Matrix) -> Matrix;
}

/// Two-layer MLP `f(h) = W₂·tanh(W₁·h + b₁) + b₂`.
///
/// With `time_scale` set, `t / time_scale` is appended to the input of the
/// first layer and the field becomes non-autonomous.
#[derive(Clone, Debug, PartialEq)]
pub struct DynamicsNet {
    pub layer1: Linear,
    pub layer2: Linear,
    pub hidden_dim: usize,
    pub units: usize,
    pub time_scale: Option<f64>,
}

pub struct NetCache {
    input: Matrix,
    act: Matrix,
}

impl DynamicsNet {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        hidden_dim: usize,
        units: usize,
        time_scale: Option<f64>,
        seed: u64,
    ) -> Result<Self> {
        if hidden_dim == 0 || units == 0 {
            return Err(Error::Config("dynamics dimensions must be positive".into()));
        }
        if let Some(s) = time_scale {
            if !(s > 0.0) {
                return Err(Error::Config(format!("time scale must be positive, got {s}")));
            }
        }
        let inputs = hidden_dim + usize::from(time_scale.is_some());
        let layer1 = Linear::register(
            store,
            &format!("{prefix}.W_1"),
            Some(&format!("{prefix}.b_1")),
            inputs,
            units,
            seed,
        )?;
        let layer2 = Linear::register(
            store,
            &format!("{prefix}.W_2"),
            Some(&format!("{prefix}.b_2")),
            units,
            hidden_dim,
            seed,
        )?;
        Ok(DynamicsNet {
            layer1,
            layer2,
            hidden_dim,
            units,
            time_scale,
        })
    }

    /// Zeroes the output layer so that `f ≡ 0`.
    pub fn zero_output(&self, store: &mut ParamStore) {
        store.get_mut(self.layer2.weight).value.iter_mut().for_each(|v| *v = 0.0);
        if let Some(b) = self.layer2.bias {
            store.get_mut(b).value.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn input(&self, h: &Matrix, t: f64) -> Result<Matrix> {
        if h.cols() != self.hidden_dim {
            return Err(Error::dim(format!(
                "dynamics expects width {}, got {}",
                self.hidden_dim,
                h.cols()
            )));
        }
        match self.time_scale {
            None => Ok(h.clone()),
            Some(scale) => {
                let mut m = Matrix::zeros(h.rows(), h.cols() + 1);
                for r in 0..h.rows() {
                    let row = m.row_mut(r);
                    row[..h.cols()].copy_from_slice(h.row(r));
                    row[h.cols()] = t / scale;
                }
                Ok(m)
            }
        }
    }
}

impl Dynamics for DynamicsNet {
    type Cache = NetCache;

    fn dim(&self) -> usize {
        self.hidden_dim
    }

    fn eval(&self, store: &ParamStore, h: &Matrix, t: f64) -> Result<(Matrix, NetCache)> {
        let input = self.input(h, t)?;
        let act = self.layer1.forward(store, &input)?.map(f64::tanh);
        let out = self.layer2.forward(store, &act)?;
        Ok((out, NetCache { input, act }))
    }

    fn vjp(&self, store: &mut ParamStore, _h: &Matrix, cache: &NetCache, df: &Matrix) -> Matrix {
        let dact = self.layer2.backward(store, &cache.act, df);
        let dpre = dact.zip_map(&cache.act, |g, a| g * (1.0 - a * a));
        let dinput = self.layer1.backward(store, &cache.input, &dpre);
        if self.time_scale.is_none() {
            return dinput;
        }
        let mut dh = Matrix::zeros(dinput.rows(), self.hidden_dim);
        for r in 0..dinput.rows() {
            dh.row_mut(r).copy_from_slice(&dinput.row(r)[..self.hidden_dim]);
        }
        dh
    }
}

/// Linear field `f(h) = A·h`, a closed-form test problem.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearField {
    pub a: ParamId,
    pub dim: usize,
}

impl LinearField {
    pub fn register(store: &mut ParamStore, name: &str, a: &[f64], dim: usize) -> Result<Self> {
        if a.len() != dim * dim {
            return Err(Error::dim("linear field matrix must be dim x dim"));
        }
        let id = store.register(name, &[dim, dim], Init::Zeros, 0)?;
        store.get_mut(id).value.copy_from_slice(a);
        Ok(LinearField { a: id, dim })
    }
}

impl Dynamics for LinearField {
    type Cache = ();

    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, store: &ParamStore, h: &Matrix, _t: f64) -> Result<(Matrix, ())> {
        Ok((crate::tensorcore::affine(h, store.matrix(self.a), None)?, ()))
    }

    fn vjp(&self, store: &mut ParamStore, h: &Matrix, _cache: &(), df: &Matrix) -> Matrix {
        let mut grad = std::mem::take(&mut store.get_mut(self.a).grad);
        let dh = crate::tensorcore::affine_backward(h, store.matrix(self.a), df, &mut grad, None);
        store.get_mut(self.a).grad = grad;
        dh
    }
}

/// Evaluates `f_θ` on one vector.
pub fn f_theta(net: &DynamicsNet, store: &ParamStore, h: &[f64]) -> Result<Vec<f64>> {
    Ok(net.eval(store, &Matrix::row_vector(h), 0.0)?.0.into_vec())
}
