use crate::error::{Error, Result};
use crate::tensorcore::matrix::Matrix;

/// Logistic sigmoid, branching on sign so `exp` never overflows.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax of one vector, max-subtracted.
pub fn softmax(z: &[f64]) -> Result<Vec<f64>> {
    if z.is_empty() {
        return Err(Error::dim("softmax of an empty vector"));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("softmax input is not finite".into()));
    }
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Row-wise softmax.
pub fn softmax_rows(z: &Matrix) -> Result<Matrix> {
    let mut out = Matrix::zeros(z.rows(), z.cols());
    for r in 0..z.rows() {
        out.row_mut(r).copy_from_slice(&softmax(z.row(r))?);
    }
    Ok(out)
}

/// Vector-Jacobian product of softmax: `dz = p ∘ (dp − ⟨dp, p⟩)`.
pub fn softmax_backward(p: &[f64], dp: &[f64]) -> Vec<f64> {
    let inner: f64 = p.iter().zip(dp).map(|(a, b)| a * b).sum();
    p.iter().zip(dp).map(|(pi, gi)| pi * (gi - inner)).collect()
}
