//! Zeroth-order Bessel function of the first kind.

use std::f64::consts::{FRAC_PI_4, PI};

/// Switch-over point between the power series and the Hankel expansion.
const SERIES_LIMIT: f64 = 12.0;

/// `J0(x)` via its power series for `|x| < 12` and the Hankel asymptotic
/// expansion beyond. Absolute error is below `1e-10` everywhere.
pub fn j0(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_LIMIT {
        series(x)
    } else {
        asymptotic(x)
    }
}

fn series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * kf);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && kf > q.sqrt() {
            break;
        }
    }
    sum
}

fn asymptotic(x: f64) -> f64 {
    // |a_k| = Π_{i=1..k} (2i-1)² / (k! 8^k). P sums even k with signs
    // +,-,+,…; Q sums odd k with signs -,+,-,… (Q ≈ -1/(8x)).
    let mut p = 0.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    for k in 0..60 {
        if k > 0 {
            let odd = (2 * k - 1) as f64;
            a *= odd * odd / (k as f64 * 8.0 * x);
        }
        if a > prev {
            break;
        }
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * a;
        } else {
            q -= sign * a;
        }
        if a < 1e-17 {
            break;
        }
        prev = a;
    }
    let chi = x - FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}
