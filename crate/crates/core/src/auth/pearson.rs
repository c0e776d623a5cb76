use crate::channel::CsiVector;
use crate::error::{invalid, Result};

/// Sample Pearson correlation over the entries of two realified CSI vectors.
pub fn pearson(a: &CsiVector, b: &CsiVector) -> Result<f64> {
    let (a, b) = (a.as_slice(), b.as_slice());
    if a.len() != b.len() || a.len() < 2 {
        return Err(invalid!(
            "pearson needs equal lengths of at least 2, got {} and {}",
            a.len(),
            b.len()
        ));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(invalid!("pearson correlation of a constant vector"));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// `true` (legitimate) when `r ≥ epsilon`.
pub fn decide(r: f64, epsilon: f64) -> bool {
    r >= epsilon
}
