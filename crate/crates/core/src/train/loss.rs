use crate::error::{Error, Result};
use crate::tensorcore::Matrix;

/// Probabilities are floored here before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// `−ln(max(probs[label], 1e−12))`.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    let p = *probs.get(label).ok_or(Error::Label {
        label,
        classes: probs.len(),
    })?;
    if !p.is_finite() {
        return Err(Error::Numeric(format!("probability {p} is not finite")));
    }
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Mean cross-entropy over the rows of `probs` and its gradient with respect
/// to the logits that produced them. Rows whose label probability sits
/// below the floor get zero gradient.
pub fn batch_cross_entropy(probs: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let n = probs.rows();
    if n == 0 || labels.len() != n {
        return Err(Error::Input(format!("{} label(s) for {n} prediction row(s)", labels.len())));
    }
    let nf = n as f64;
    let mut total = 0.0;
    let mut grad = Matrix::zeros(n, probs.cols());
    for (r, &label) in labels.iter().enumerate() {
        let row = probs.row(r);
        total += cross_entropy(row, label)?;
        if row[label] < PROB_FLOOR {
            continue;
        }
        let g = grad.row_mut(r);
        for (k, (gv, &p)) in g.iter_mut().zip(row).enumerate() {
            let y = if k == label { 1.0 } else { 0.0 };
            *gv = (p - y) / nf;
        }
    }
    Ok((total / nf, grad))
}
