use serde::Serialize;

use super::{AnnError, AnnModel};

/// Regression quality over every output entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub mse: f64,
    pub mae: f64,
    pub rmse: f64,
    pub r2: f64,
}

/// Runs the single-precision model over `inputs` and scores it against
/// `targets` (both row-major). R² uses the per-dimension target mean for the
/// total sum of squares.
pub fn evaluate(model: &AnnModel, inputs: &[f32], targets: &[f32]) -> Result<Metrics, AnnError> {
    let (ni, no) = (model.arch.input, model.arch.output);
    if !inputs.len().is_multiple_of(ni)
        || !targets.len().is_multiple_of(no)
        || inputs.len() / ni != targets.len() / no
    {
        return Err(AnnError::ShapeMismatch(format!(
            "{} input values vs {} target values for a {} model",
            inputs.len(),
            targets.len(),
            model.arch
        )));
    }
    let rows = inputs.len() / ni;
    if rows == 0 {
        return Err(AnnError::EmptySplit("evaluation"));
    }
    let mut preds = vec![0.0f32; rows * no];
    let mut hidden = vec![0.0f32; model.arch.hidden];
    for (x, y) in inputs.chunks_exact(ni).zip(preds.chunks_exact_mut(no)) {
        model.forward_into(x, &mut hidden, y, &mut ());
    }
    score(&preds, targets, no)
}

/// Metrics for precomputed predictions laid out as rows of `dim` values.
pub(crate) fn score(preds: &[f32], targets: &[f32], dim: usize) -> Result<Metrics, AnnError> {
    let rows = targets.len() / dim;
    let mut mean = vec![0.0f64; dim];
    for row in targets.chunks_exact(dim) {
        for (m, t) in mean.iter_mut().zip(row) {
            *m += *t as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows as f64);

    let (mut ss_res, mut abs, mut ss_tot) = (0.0, 0.0, 0.0);
    for (k, (p, t)) in preds.iter().zip(targets).enumerate() {
        let (p, t) = (*p as f64, *t as f64);
        let e = p - t;
        ss_res += e * e;
        abs += e.abs();
        let d = t - mean[k % dim];
        ss_tot += d * d;
    }
    if ss_tot == 0.0 {
        return Err(AnnError::ZeroVariance);
    }
    let n = targets.len() as f64;
    let mse = ss_res / n;
    Ok(Metrics {
        mse,
        mae: abs / n,
        rmse: mse.sqrt(),
        r2: 1.0 - ss_res / ss_tot,
    })
}
