//! Recurrent update cells: basic tanh RNN, LSTM and GRU.
//!
//! Each cell works on a batch (one row per series) and has a hand-written
//! backward pass. Parameter names follow the gate symbols:
//!
//! * tanh RNN: `W_x`, `W_h`, `b`
//! * LSTM: `W_xi, W_hi, b_i` (input), `W_xf, W_hf, b_f` (forget),
//!   `W_xo, W_ho, b_o` (output), `W_xz, W_hz, b_z` (update)
//! * GRU: `W_xf, W_hf, b_f` (forget), `W_xr, W_hr, b_r` (reset),
//!   `W_xz, W_hz, b_z` (update, applied to `r ∘ h`)

mod gate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensorcore::{sigmoid, Matrix, ParamStore};

pub use gate::Gate;
use gate::GateCache;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Tanh,
    Lstm,
    Gru,
}

impl fmt::Display for CellKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CellKind::Tanh => "tanh",
            CellKind::Lstm => "lstm",
            CellKind::Gru => "gru",
        })
    }
}

impl FromStr for CellKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" | "rnn" => Ok(CellKind::Tanh),
            "lstm" => Ok(CellKind::Lstm),
            "gru" => Ok(CellKind::Gru),
            other => Err(Error::Config(format!("unknown cell type {other:?}"))),
        }
    }
}

/// Batched recurrent state. `c` is present exactly for LSTM cells.
#[derive(Clone, Debug, PartialEq)]
pub struct CellState {
    pub h: Matrix,
    pub c: Option<Matrix>,
}

impl CellState {
    pub fn rows(&self) -> usize {
        self.h.rows()
    }

    pub fn gather(&self, idx: &[usize]) -> CellState {
        CellState {
            h: self.h.gather(idx),
            c: self.c.as_ref().map(|c| c.gather(idx)),
        }
    }

    pub fn scatter(&mut self, idx: &[usize], src: &CellState) {
        self.h.scatter(idx, &src.h);
        if let (Some(c), Some(sc)) = (self.c.as_mut(), src.c.as_ref()) {
            c.scatter(idx, sc);
        }
    }
}

/// Gating-MLP shape. Depth 1 is the plain cell; depth 2 inserts a hidden
/// layer of `width` units inside every gate pre-activation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatingConfig {
    pub depth: usize,
    pub width: usize,
}

impl Default for GatingConfig {
    fn default() -> Self {
        GatingConfig { depth: 1, width: 100 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub kind: CellKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    gates: Vec<Gate>,
}

pub struct CellCache {
    x: Matrix,
    h_prev: Matrix,
    c_prev: Option<Matrix>,
    /// Post-activation gate values in gate order.
    acts: Vec<Matrix>,
    gate_caches: Vec<GateCache>,
    /// GRU: `r ∘ h_prev`. LSTM: `tanh(c)`.
    aux: Option<Matrix>,
    /// Output state (tanh RNN needs it for its derivative).
    h: Matrix,
}

const LSTM_GATES: [&str; 4] = ["i", "f", "o", "z"];
const GRU_GATES: [&str; 3] = ["f", "r", "z"];

impl Cell {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        kind: CellKind,
        input_dim: usize,
        hidden_dim: usize,
        gating: GatingConfig,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || hidden_dim == 0 {
            return Err(Error::Config("cell dimensions must be positive".into()));
        }
        if gating.depth == 0 || gating.depth > 2 || gating.width == 0 {
            return Err(Error::Config(format!(
                "gating depth must be 1 or 2 with positive width, got {gating:?}"
            )));
        }
        let suffixes: &[&str] = match kind {
            CellKind::Tanh => &[""],
            CellKind::Lstm => &LSTM_GATES,
            CellKind::Gru => &GRU_GATES,
        };
        let gates = suffixes
            .iter()
            .map(|s| {
                Gate::register(
                    store,
                    prefix,
                    s,
                    input_dim,
                    hidden_dim,
                    gating.depth,
                    gating.width,
                    seed,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Cell {
            kind,
            input_dim,
            hidden_dim,
            gates,
        })
    }

    fn check(&self, x: &Matrix, state: &CellState) -> Result<()> {
        if x.cols() != self.input_dim {
            return Err(Error::dim(format!(
                "cell expects {} input features, got {}",
                self.input_dim,
                x.cols()
            )));
        }
        if state.h.cols() != self.hidden_dim || state.h.rows() != x.rows() {
            return Err(Error::dim(format!(
                "hidden state is {}x{}, expected {}x{}",
                state.h.rows(),
                state.h.cols(),
                x.rows(),
                self.hidden_dim
            )));
        }
        match (self.kind, &state.c) {
            (CellKind::Lstm, None) => Err(Error::State("LSTM step needs a cell state c".into())),
            (CellKind::Lstm, Some(c)) if c.rows() != x.rows() || c.cols() != self.hidden_dim => {
                Err(Error::dim("LSTM cell state shape does not match h"))
            }
            (CellKind::Tanh | CellKind::Gru, Some(_)) => Err(Error::State(format!(
                "{} cell does not carry a cell state",
                self.kind
            ))),
            _ => Ok(()),
        }
    }

    pub fn forward(&self, store: &ParamStore, x: &Matrix, state: &CellState) -> Result<(CellState, CellCache)> {
        self.check(x, state)?;
        let h_prev = &state.h;
        match self.kind {
            CellKind::Tanh => {
                let (pre, gc) = self.gates[0].forward(store, x, h_prev)?;
                let h = pre.map(f64::tanh);
                Ok((
                    CellState { h: h.clone(), c: None },
                    CellCache {
                        x: x.clone(),
                        h_prev: h_prev.clone(),
                        c_prev: None,
                        acts: vec![],
                        gate_caches: vec![gc],
                        aux: None,
                        h,
                    },
                ))
            }
            CellKind::Lstm => {
                let c_prev = state.c.as_ref().expect("checked");
                let mut acts = Vec::with_capacity(4);
                let mut caches = Vec::with_capacity(4);
                for (k, gate) in self.gates.iter().enumerate() {
                    let (pre, gc) = gate.forward(store, x, h_prev)?;
                    acts.push(if k == 3 { pre.map(f64::tanh) } else { pre.map(sigmoid) });
                    caches.push(gc);
                }
                let (i, f, o, z) = (&acts[0], &acts[1], &acts[2], &acts[3]);
                let mut c = Matrix::zeros(x.rows(), self.hidden_dim);
                for ((cv, (fv, cp)), (iv, zv)) in c
                    .as_mut_slice()
                    .iter_mut()
                    .zip(f.as_slice().iter().zip(c_prev.as_slice()))
                    .zip(i.as_slice().iter().zip(z.as_slice()))
                {
                    *cv = fv * cp + iv * zv;
                }
                let tanh_c = c.map(f64::tanh);
                let h = o.zip_map(&tanh_c, |a, b| a * b);
                Ok((
                    CellState {
                        h: h.clone(),
                        c: Some(c),
                    },
                    CellCache {
                        x: x.clone(),
                        h_prev: h_prev.clone(),
                        c_prev: Some(c_prev.clone()),
                        acts,
                        gate_caches: caches,
                        aux: Some(tanh_c),
                        h,
                    },
                ))
            }
            CellKind::Gru => {
                let (pf, cf) = self.gates[0].forward(store, x, h_prev)?;
                let (pr, cr) = self.gates[1].forward(store, x, h_prev)?;
                let f = pf.map(sigmoid);
                let r = pr.map(sigmoid);
                let rh = r.zip_map(h_prev, |a, b| a * b);
                let (pz, cz) = self.gates[2].forward(store, x, &rh)?;
                let z = pz.map(f64::tanh);
                let mut h = Matrix::zeros(x.rows(), self.hidden_dim);
                for (((hv, fv), hp), zv) in h
                    .as_mut_slice()
                    .iter_mut()
                    .zip(f.as_slice())
                    .zip(h_prev.as_slice())
                    .zip(z.as_slice())
                {
                    *hv = fv * hp + (1.0 - fv) * zv;
                }
                Ok((
                    CellState { h: h.clone(), c: None },
                    CellCache {
                        x: x.clone(),
                        h_prev: h_prev.clone(),
                        c_prev: None,
                        acts: vec![f, r, z],
                        gate_caches: vec![cf, cr, cz],
                        aux: Some(rh),
                        h,
                    },
                ))
            }
        }
    }

    /// Backward pass. `dc` is the gradient flowing into the new cell state
    /// (LSTM only). Returns `(dx, dh_prev, dc_prev)`.
    pub fn backward(
        &self,
        store: &mut ParamStore,
        cache: &CellCache,
        dh: &Matrix,
        dc: Option<&Matrix>,
    ) -> (Matrix, Matrix, Option<Matrix>) {
        let x = &cache.x;
        let h_prev = &cache.h_prev;
        match self.kind {
            CellKind::Tanh => {
                let dpre = dh.zip_map(&cache.h, |g, h| g * (1.0 - h * h));
                let (dx, dhp) = self.gates[0].backward(store, x, h_prev, &cache.gate_caches[0], &dpre);
                (dx, dhp, None)
            }
            CellKind::Lstm => {
                let (i, f, o, z) = (&cache.acts[0], &cache.acts[1], &cache.acts[2], &cache.acts[3]);
                let tanh_c = cache.aux.as_ref().expect("lstm cache");
                let c_prev = cache.c_prev.as_ref().expect("lstm cache");
                let n = dh.as_slice().len();
                let mut dc_total = vec![0.0; n];
                let mut dpre: Vec<Vec<f64>> = vec![vec![0.0; n]; 4];
                let mut dc_prev = Matrix::zeros(dh.rows(), dh.cols());
                for k in 0..n {
                    let g = dh.as_slice()[k];
                    let tc = tanh_c.as_slice()[k];
                    let ov = o.as_slice()[k];
                    let dcv = dc.map_or(0.0, |d| d.as_slice()[k]) + g * ov * (1.0 - tc * tc);
                    dc_total[k] = dcv;
                    let iv = i.as_slice()[k];
                    let fv = f.as_slice()[k];
                    let zv = z.as_slice()[k];
                    dpre[0][k] = dcv * zv * iv * (1.0 - iv);
                    dpre[1][k] = dcv * c_prev.as_slice()[k] * fv * (1.0 - fv);
                    dpre[2][k] = g * tc * ov * (1.0 - ov);
                    dpre[3][k] = dcv * iv * (1.0 - zv * zv);
                    dc_prev.as_mut_slice()[k] = dcv * fv;
                }
                let mut dx = Matrix::zeros(x.rows(), x.cols());
                let mut dhp = Matrix::zeros(h_prev.rows(), h_prev.cols());
                for (gate_idx, dp) in dpre.into_iter().enumerate() {
                    let dp = Matrix::from_vec(dh.rows(), dh.cols(), dp).expect("same shape");
                    let (gx, gh) = self.gates[gate_idx].backward(
                        store,
                        x,
                        h_prev,
                        &cache.gate_caches[gate_idx],
                        &dp,
                    );
                    dx.add_assign(&gx);
                    dhp.add_assign(&gh);
                }
                (dx, dhp, Some(dc_prev))
            }
            CellKind::Gru => {
                let (f, r, z) = (&cache.acts[0], &cache.acts[1], &cache.acts[2]);
                let rh = cache.aux.as_ref().expect("gru cache");
                let rows = dh.rows();
                let cols = dh.cols();
                let mut dpf = Matrix::zeros(rows, cols);
                let mut dpz = Matrix::zeros(rows, cols);
                let mut dhp = Matrix::zeros(rows, cols);
                for k in 0..rows * cols {
                    let g = dh.as_slice()[k];
                    let fv = f.as_slice()[k];
                    let zv = z.as_slice()[k];
                    let hp = h_prev.as_slice()[k];
                    dpf.as_mut_slice()[k] = g * (hp - zv) * fv * (1.0 - fv);
                    dpz.as_mut_slice()[k] = g * (1.0 - fv) * (1.0 - zv * zv);
                    dhp.as_mut_slice()[k] = g * fv;
                }
                let (dxz, drh) = self.gates[2].backward(store, x, rh, &cache.gate_caches[2], &dpz);
                let mut dpr = Matrix::zeros(rows, cols);
                for k in 0..rows * cols {
                    let rv = r.as_slice()[k];
                    let g = drh.as_slice()[k];
                    dpr.as_mut_slice()[k] = g * h_prev.as_slice()[k] * rv * (1.0 - rv);
                    dhp.as_mut_slice()[k] += g * rv;
                }
                let (dxf, dhf) = self.gates[0].backward(store, x, h_prev, &cache.gate_caches[0], &dpf);
                let (dxr, dhr) = self.gates[1].backward(store, x, h_prev, &cache.gate_caches[1], &dpr);
                let mut dx = dxz;
                dx.add_assign(&dxf);
                dx.add_assign(&dxr);
                dhp.add_assign(&dhf);
                dhp.add_assign(&dhr);
                (dx, dhp, None)
            }
        }
    }

    /// Gate activations of the last forward pass, for inspection: LSTM
    /// `[i, f, o, z]`, GRU `[f, r, z]`, tanh RNN none.
    pub fn gate_activations(cache: &CellCache) -> &[Matrix] {
        &cache.acts
    }
}

fn single(cell: &Cell, kind: CellKind, store: &ParamStore, x: &[f64], h: &[f64], c: Option<&[f64]>) -> Result<CellState> {
    if cell.kind != kind {
        return Err(Error::Config(format!("expected a {kind} cell, got {}", cell.kind)));
    }
    let state = CellState {
        h: Matrix::row_vector(h),
        c: c.map(Matrix::row_vector),
    };
    Ok(cell.forward(store, &Matrix::row_vector(x), &state)?.0)
}

/// `h = tanh(W_x·x + W_h·h_prev + b)` for one vector.
pub fn rnn_tanh_step(cell: &Cell, store: &ParamStore, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
    Ok(single(cell, CellKind::Tanh, store, x, h_prev, None)?.h.into_vec())
}

/// One LSTM step on a single vector; returns `(h, c)`.
pub fn lstm_step(
    cell: &Cell,
    store: &ParamStore,
    x: &[f64],
    h_prev: &[f64],
    c_prev: Option<&[f64]>,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if c_prev.is_none() {
        return Err(Error::State("LSTM step needs a cell state c".into()));
    }
    let s = single(cell, CellKind::Lstm, store, x, h_prev, c_prev)?;
    Ok((s.h.into_vec(), s.c.expect("lstm output has c").into_vec()))
}

/// One GRU step on a single vector.
pub fn gru_step(cell: &Cell, store: &ParamStore, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>> {
    Ok(single(cell, CellKind::Gru, store, x, h_prev, None)?.h.into_vec())
}
