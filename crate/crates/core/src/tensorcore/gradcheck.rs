//! Central finite-difference oracle for analytic gradients.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensorcore::params::ParamStore;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameter name and flat index of the worst element.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    pub pass: bool,
}

/// Compares the gradients stored in `params` against central differences of
/// `loss_fn`. Step size is `cbrt(ε)·max(1,|θ|)`; relative error is
/// `|a − n| / max(1, |a|, |n|)`.
pub fn grad_check<F>(params: &ParamStore, loss_fn: F, tol: f64) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    grad_check_with(params, loss_fn, tol, None)
}

/// Like [`grad_check`], but checks at most `per_param` evenly spaced
/// elements of each tensor.
pub fn grad_check_with<F>(
    params: &ParamStore,
    mut loss_fn: F,
    tol: f64,
    per_param: Option<usize>,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    if !(tol > 0.0) {
        return Err(Error::Config(format!("grad_check tolerance must be positive, got {tol}")));
    }
    let base = loss_fn(params)?;
    if !base.is_finite() {
        return Err(Error::Numeric(format!("loss is not finite: {base}")));
    }
    let cbrt_eps = f64::EPSILON.cbrt();
    let mut probe = params.clone();
    let mut max_rel_err = 0.0f64;
    let mut worst = None;
    let mut checked = 0;
    let names: Vec<String> = params.iter().map(|p| p.name.clone()).collect();
    for name in names {
        let id = params.id(&name).expect("name from the same store");
        let len = params.get(id).len();
        let stride = match per_param {
            Some(k) if k > 0 && len > k => len.div_ceil(k),
            _ => 1,
        };
        for i in (0..len).step_by(stride) {
            let v = params.get(id).value[i];
            let h = cbrt_eps * v.abs().max(1.0);
            probe.get_mut(id).value[i] = v + h;
            let up = loss_fn(&probe)?;
            probe.get_mut(id).value[i] = v - h;
            let down = loss_fn(&probe)?;
            probe.get_mut(id).value[i] = v;
            if !up.is_finite() || !down.is_finite() {
                return Err(Error::Numeric(format!("loss not finite when perturbing {name}[{i}]")));
            }
            let numeric = (up - down) / (2.0 * h);
            let analytic = params.get(id).grad[i];
            let rel = (analytic - numeric).abs() / 1f64.max(analytic.abs()).max(numeric.abs());
            if worst.is_none() || rel > max_rel_err {
                max_rel_err = rel;
                worst = Some((name.clone(), i));
            }
            checked += 1;
        }
    }
    Ok(GradCheckReport {
        max_rel_err,
        worst,
        checked,
        pass: max_rel_err < tol,
    })
}
