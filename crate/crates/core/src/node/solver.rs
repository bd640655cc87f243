//! Fixed-step explicit Euler integration and its two gradient routes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::node::dynamics::Dynamics;
use crate::tensorcore::{axpy, Matrix, ParamStore};

/// States whose magnitude exceeds this bound abort the solve.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientMode {
    /// Chain rule through the stored Euler states.
    #[default]
    Discrete,
    /// Backward Euler integration of the augmented adjoint system, with the
    /// forward states reconstructed on the fly.
    Adjoint,
}

impl std::str::FromStr for GradientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discrete" => Ok(GradientMode::Discrete),
            "adjoint" => Ok(GradientMode::Adjoint),
            other => Err(Error::Config(format!("unknown gradient mode {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Euler steps per unit of time.
    pub steps_multiplier: usize,
    pub gradient_mode: GradientMode,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            steps_multiplier: 1,
            gradient_mode: GradientMode::Discrete,
        }
    }
}

/// Number of Euler steps between two observation times: the gap times the
/// multiplier.
pub fn steps_for_gap(t_prev: i64, t_next: i64, cfg: &SolveConfig) -> Result<usize> {
    if t_next <= t_prev {
        return Err(Error::Ordering {
            prev: t_prev,
            next: t_next,
        });
    }
    if cfg.steps_multiplier == 0 {
        return Err(Error::Config("steps_multiplier must be at least 1".into()));
    }
    Ok((t_next - t_prev) as usize * cfg.steps_multiplier)
}

/// One Euler step `h + dt·f(h, t)`, returning the field cache for backward.
pub fn euler_step<D: Dynamics>(
    dynamics: &D,
    store: &ParamStore,
    h: &Matrix,
    t: f64,
    dt: f64,
) -> Result<(Matrix, D::Cache)> {
    let (f, cache) = dynamics.eval(store, h, t)?;
    let mut next = h.clone();
    axpy(dt, f.as_slice(), next.as_mut_slice());
    check_bounded(&next)?;
    Ok((next, cache))
}

pub(crate) fn check_bounded(h: &Matrix) -> Result<()> {
    for &v in h.as_slice() {
        if !v.is_finite() || v.abs() > DIVERGENCE_LIMIT {
            return Err(Error::Divergence {
                value: v,
                limit: DIVERGENCE_LIMIT,
            });
        }
    }
    Ok(())
}

/// Reverse-mode step through `h_{k+1} = h_k + dt·f(h_k)`: returns
/// `a_k = a_{k+1} + dt·(∂f/∂h)ᵀ a_{k+1}` and accumulates
/// `dt·(∂f/∂θ)ᵀ a_{k+1}` into the parameter gradients.
pub fn discrete_step_backward<D: Dynamics>(
    dynamics: &D,
    store: &mut ParamStore,
    h_k: &Matrix,
    cache: &D::Cache,
    a_next: &Matrix,
    dt: f64,
) -> Matrix {
    let df = a_next.map(|g| g * dt);
    let mut a = dynamics.vjp(store, h_k, cache, &df);
    a.add_assign(a_next);
    a
}

/// One backward Euler step of the augmented system
/// `(ḣ, ȧ, θ̇_grad) = (f, −aᵀ∂f/∂h, −aᵀ∂f/∂θ)` from `t_next` to `t_next − dt`,
/// evaluated at the later point. Returns `(h_prev, a_prev)`.
pub fn adjoint_step_backward<D: Dynamics>(
    dynamics: &D,
    store: &mut ParamStore,
    h_next: &Matrix,
    t_next: f64,
    a_next: &Matrix,
    dt: f64,
) -> Result<(Matrix, Matrix)> {
    let (f, cache) = dynamics.eval(store, h_next, t_next)?;
    let df = a_next.map(|g| g * dt);
    let mut a = dynamics.vjp(store, h_next, &cache, &df);
    a.add_assign(a_next);
    let mut h = h_next.clone();
    axpy(-dt, f.as_slice(), h.as_mut_slice());
    check_bounded(&h)?;
    Ok((h, a))
}

/// Result of [`euler_solve`]. The tape holds every pre-step state when the
/// solve was run for discrete gradients.
pub struct EulerSolution<C> {
    pub h1: Matrix,
    pub t0: f64,
    pub t1: f64,
    pub steps: usize,
    tape: Option<Vec<(Matrix, C)>>,
}

impl<C> EulerSolution<C> {
    pub fn has_tape(&self) -> bool {
        self.tape.is_some()
    }

    pub fn dt(&self) -> f64 {
        (self.t1 - self.t0) / self.steps as f64
    }
}

/// Integrates from `t0` to `t1` with `n` equal Euler steps.
pub fn euler_solve<D: Dynamics>(
    dynamics: &D,
    store: &ParamStore,
    h0: &Matrix,
    t0: f64,
    t1: f64,
    n: usize,
    keep_tape: bool,
) -> Result<EulerSolution<D::Cache>> {
    if !(t1 > t0) {
        return Err(Error::Config(format!("integration interval ({t0}, {t1}) is empty")));
    }
    if n == 0 {
        return Err(Error::Config("Euler solve needs at least one step".into()));
    }
    if h0.cols() != dynamics.dim() {
        return Err(Error::dim(format!(
            "initial state width {} does not match field dimension {}",
            h0.cols(),
            dynamics.dim()
        )));
    }
    let dt = (t1 - t0) / n as f64;
    let mut tape = keep_tape.then(|| Vec::with_capacity(n));
    let mut h = h0.clone();
    for k in 0..n {
        let t = t0 + k as f64 * dt;
        let (next, cache) = euler_step(dynamics, store, &h, t, dt)?;
        if let Some(tape) = tape.as_mut() {
            tape.push((h, cache));
        }
        h = next;
    }
    Ok(EulerSolution {
        h1: h,
        t0,
        t1,
        steps: n,
        tape,
    })
}

/// Single-vector convenience wrapper around [`euler_solve`].
pub fn euler_solve_vec<D: Dynamics>(
    dynamics: &D,
    store: &ParamStore,
    h0: &[f64],
    t0: f64,
    t1: f64,
    n: usize,
) -> Result<Vec<f64>> {
    Ok(euler_solve(dynamics, store, &Matrix::row_vector(h0), t0, t1, n, false)?
        .h1
        .into_vec())
}

/// Propagates `dL/dh(t1)` back to `dL/dh(t0)` and accumulates `dL/dθ` into
/// `store`. Discrete mode needs the tape of the forward solve; adjoint mode
/// reconstructs the forward states from `h1`.
pub fn ode_gradients<D: Dynamics>(
    dynamics: &D,
    store: &mut ParamStore,
    solution: &EulerSolution<D::Cache>,
    dl_dh1: &Matrix,
    mode: GradientMode,
) -> Result<Matrix> {
    let dt = solution.dt();
    match mode {
        GradientMode::Discrete => {
            let tape = solution
                .tape
                .as_ref()
                .ok_or_else(|| Error::State("discrete gradients need the forward tape".into()))?;
            let mut a = dl_dh1.clone();
            for (h_k, cache) in tape.iter().rev() {
                a = discrete_step_backward(dynamics, store, h_k, cache, &a, dt);
            }
            Ok(a)
        }
        GradientMode::Adjoint => {
            let mut a = dl_dh1.clone();
            let mut h = solution.h1.clone();
            for k in (0..solution.steps).rev() {
                let t_next = solution.t0 + (k + 1) as f64 * dt;
                let (h_prev, a_prev) = adjoint_step_backward(dynamics, store, &h, t_next, &a, dt)?;
                h = h_prev;
                a = a_prev;
            }
            Ok(a)
        }
    }
}

#[cfg(test)]
mod tests;
