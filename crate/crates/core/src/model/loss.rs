use crate::channel::CsiVector;
use crate::error::{invalid, Error, Result};

/// `Σ_n ‖pred_n − truth_n‖² / Σ_n ‖truth_n‖²` over one predicted sequence.
pub fn nmse_loss(pred: &[CsiVector], truth: &[CsiVector]) -> Result<f64> {
    if pred.len() != truth.len() || pred.iter().zip(truth).any(|(p, t)| p.len() != t.len()) {
        return Err(Error::Shape(format!(
            "nmse: {} predicted vs {} true packets (or widths differ)",
            pred.len(),
            truth.len()
        )));
    }
    let energy: f64 = truth.iter().map(CsiVector::energy).sum();
    if energy == 0.0 {
        return Err(invalid!("nmse undefined for an all-zero target"));
    }
    let err: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| {
            p.as_slice()
                .iter()
                .zip(t.as_slice())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum();
    Ok(err / energy)
}

/// Mean of [`nmse_loss`] over a minibatch.
pub fn batch_nmse(preds: &[Vec<CsiVector>], truths: &[Vec<CsiVector>]) -> Result<f64> {
    if preds.is_empty() || preds.len() != truths.len() {
        return Err(invalid!(
            "batch nmse over {} predictions and {} targets",
            preds.len(),
            truths.len()
        ));
    }
    let mut total = 0.0;
    for (p, t) in preds.iter().zip(truths) {
        total += nmse_loss(p, t)?;
    }
    Ok(total / preds.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(vals: &[[f64; 4]]) -> Vec<CsiVector> {
        vals.iter().map(|v| CsiVector::new(v.to_vec()).unwrap()).collect()
    }

    #[test]
    fn identities() {
        let t = seq(&[[1.0, -2.0, 0.5, 3.0], [0.1, 0.2, -0.3, 0.4]]);
        let zero = seq(&[[0.0; 4], [0.0; 4]]);
        let twice: Vec<CsiVector> = t
            .iter()
            .map(|v| CsiVector::new(v.as_slice().iter().map(|x| 2.0 * x).collect()).unwrap())
            .collect();
        assert_eq!(nmse_loss(&t, &t).unwrap(), 0.0);
        assert_eq!(nmse_loss(&zero, &t).unwrap(), 1.0);
        assert_eq!(nmse_loss(&twice, &t).unwrap(), 1.0);
        assert!(nmse_loss(&t, &zero).is_err());
    }
}
