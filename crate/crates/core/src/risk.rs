//! Empirical squared-loss risks, empirical norms, and the closed-form
//! minimization of the risk along a segment between two predictors.
//!
//! The segment computation rests on the identity
//!
//!   R(λf + (1−λ)g) = λ R(f) + (1−λ) R(g) − λ(1−λ) ‖f − g‖²_n
//!
//! whose minimizer over λ ∈ \[0,1\] has the closed form implemented by
//! `segment_lambda`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Minimizer of the empirical risk along the segment [g, f], with λ the
/// weight on f.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentSolution {
    pub lambda: f64,
    pub risk: f64,
}

fn check_lengths(what: &'static str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            what,
            expected: a,
            found: b,
        });
    }
    if a == 0 {
        return Err(invalid(format!("{what}: empty input")));
    }
    Ok(())
}

/// Mean squared prediction error (1/n) Σ (y_i − f(x_i))².
pub fn empirical_risk(f_preds: &[f64], y: &[f64]) -> Result<f64> {
    check_lengths("empirical risk inputs", f_preds.len(), y.len())?;
    let n = y.len() as f64;
    let s: f64 = f_preds
        .iter()
        .zip(y)
        .map(|(f, y)| {
            let d = y - f;
            d * d
        })
        .sum();
    Ok(s / n)
}

/// Squared empirical norm ‖f − g‖²_n = (1/n) Σ (f(x_i) − g(x_i))².
pub fn empirical_sq_norm(f_preds: &[f64], g_preds: &[f64]) -> Result<f64> {
    check_lengths("empirical norm inputs", f_preds.len(), g_preds.len())?;
    let n = f_preds.len() as f64;
    let s: f64 = f_preds
        .iter()
        .zip(g_preds)
        .map(|(f, g)| {
            let d = f - g;
            d * d
        })
        .sum();
    Ok(s / n)
}

/// Minimizing λ of λ ↦ R(λf + (1−λ)g) over \[0,1\], given the endpoint risks
/// and the squared distance ‖f−g‖²_n.
///
/// For a degenerate segment (distance 0) the lower-risk endpoint wins,
/// ties going to f (λ = 1).
pub fn segment_lambda(risk_f: f64, risk_g: f64, sq_dist: f64) -> Result<f64> {
    if sq_dist < 0.0 {
        return Err(invalid(format!(
            "squared distance must be nonnegative, got {sq_dist}"
        )));
    }
    if sq_dist == 0.0 {
        return Ok(if risk_f <= risk_g { 1.0 } else { 0.0 });
    }
    Ok((0.5 * ((risk_g - risk_f) / sq_dist + 1.0)).clamp(0.0, 1.0))
}

/// Exact minimization of the empirical risk over the segment
/// {λf + (1−λ)g : λ ∈ \[0,1\]}.
pub fn segment_min(f_preds: &[f64], g_preds: &[f64], y: &[f64]) -> Result<SegmentSolution> {
    check_lengths("segment inputs f vs g", f_preds.len(), g_preds.len())?;
    check_lengths("segment inputs vs y", f_preds.len(), y.len())?;
    let risk_f = empirical_risk(f_preds, y)?;
    let risk_g = empirical_risk(g_preds, y)?;
    let sq_dist = empirical_sq_norm(f_preds, g_preds)?;
    let lambda = segment_lambda(risk_f, risk_g, sq_dist)?;
    Ok(SegmentSolution {
        lambda,
        risk: mixture_risk(lambda, risk_f, risk_g, sq_dist),
    })
}

/// R(λf + (1−λ)g) from the endpoint risks and squared distance.
#[inline]
pub fn mixture_risk(lambda: f64, risk_f: f64, risk_g: f64, sq_dist: f64) -> f64 {
    lambda * risk_f + (1.0 - lambda) * risk_g - lambda * (1.0 - lambda) * sq_dist
}
