//! An explicit setup on which ERM selection over a dictionary is slow:
//! a dyadic Rademacher dictionary f_j(x) = 2x^{(j)} − 1 under a uniform
//! design, with a two-level regression function separated from the
//! dictionary by h = (C/4)√(log M / n).
//!
//! Population quantities are available in closed form (the dyadic bits are
//! i.i.d. fair coins), so the Monte Carlo below measures exact excess
//! risks rather than plug-in estimates: the ERM selector's excess risk is
//! exactly h·P\[misselection\].

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dictionary, Sample, SimplexWeights, SplitMode};
use crate::error::{invalid, Result};
use crate::linalg::Matrix;
use crate::preselect::PreselectConfig;
use crate::rng::{derive_seed, rng_from_seed};

/// Parameters of the adversarial construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversarialModel {
    /// Dictionary size M ≥ 2.
    pub m: usize,
    /// Sample size for the ERM demonstration.
    pub n: usize,
    /// Separation constant: h = (C/4)√(log M / n).
    pub c: f64,
    /// Gaussian noise level σ > 0.
    pub sigma: f64,
}

impl AdversarialModel {
    pub fn new(m: usize, n: usize, c: f64, sigma: f64) -> Result<Self> {
        if m < 2 {
            return Err(invalid(format!("need M >= 2, got {m}")));
        }
        if n < 1 {
            return Err(invalid("need n >= 1"));
        }
        if c < 0.0 {
            return Err(invalid(format!("need C >= 0, got {c}")));
        }
        if !(sigma > 0.0) {
            return Err(invalid(format!("need sigma > 0, got {sigma}")));
        }
        Ok(AdversarialModel { m, n, c, sigma })
    }

    /// h = (C/4)√(log M / n).
    pub fn h(&self) -> f64 {
        self.c / 4.0 * ((self.m as f64).ln() / self.n as f64).sqrt()
    }

    /// The rate √(log M / n) the selector's excess risk tracks.
    pub fn reference_rate(&self) -> f64 {
        ((self.m as f64).ln() / self.n as f64).sqrt()
    }
}

/// A draw from the adversarial model: the first M dyadic bits of each
/// design point and the noisy responses.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicSample {
    /// n_rows × M, entries in {0, 1}; bit j of X_i's dyadic expansion.
    bits: Vec<u8>,
    n_rows: usize,
    m: usize,
    /// Y_i = f₀(X_i) + σ ε_i.
    y: Vec<f64>,
}

impl DyadicSample {
    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn bit(&self, i: usize, j: usize) -> u8 {
        self.bits[i * self.m + j]
    }

    /// Dictionary prediction f_j(X_i) = 2·bit_j(X_i) − 1.
    #[inline]
    pub fn predictor_value(&self, i: usize, j: usize) -> f64 {
        2.0 * self.bit(i, j) as f64 - 1.0
    }

    /// Materializes the (Sample, Dictionary) pair over all rows.
    pub fn to_dictionary(&self) -> Result<(Sample, Dictionary)> {
        let sample = Sample::new(self.y.clone(), None)?;
        let mut preds = Matrix::zeros(self.m, self.n_rows);
        for j in 0..self.m {
            for i in 0..self.n_rows {
                preds.set(j, i, self.predictor_value(i, j));
            }
        }
        let labels = (1..=self.m).map(|j| format!("f_{j}")).collect();
        Ok((sample, Dictionary::from_predictions(preds, labels)?))
    }
}

/// Draws `rows` observations: i.i.d. fair-coin bits and Gaussian noise.
///
/// Bits are generated directly as coins rather than by extracting binary
/// digits of a uniform double, since M may exceed the 52-bit mantissa; the
/// first M digits of a uniform variable are i.i.d. fair coins either way.
fn draw(model: &AdversarialModel, rows: usize, seed: u64) -> DyadicSample {
    let mut rng = rng_from_seed(seed);
    let m = model.m;
    let h = model.h();
    let mut bits = vec![0u8; rows * m];
    let mut y = Vec::with_capacity(rows);
    for i in 0..rows {
        for j in 0..m {
            bits[i * m + j] = u8::from(rng.random::<bool>());
        }
        let f0 = if bits[i * m + (m - 1)] == 1 { 2.0 * h } else { h };
        let eps: f64 = rng.sample(StandardNormal);
        y.push(f0 + model.sigma * eps);
    }
    DyadicSample {
        bits,
        n_rows: rows,
        m,
        y,
    }
}

/// Draws the n-observation sample used by the ERM demonstration.
pub fn build_adversarial(model: &AdversarialModel, seed: u64) -> DyadicSample {
    draw(model, model.n, seed)
}

/// Exact population squared distances ‖f_j − f₀‖²:
/// 5h²/2 + 1 for every j < M, and 5h²/2 − h + 1 for j = M.
pub fn exact_risks(model: &AdversarialModel) -> (f64, f64) {
    let h = model.h();
    (2.5 * h * h + 1.0, 2.5 * h * h - h + 1.0)
}

/// Population excess risk ‖f_θ − f₀‖² − min_j ‖f_j − f₀‖² of a convex
/// combination f_θ = Σ θ_j f_j, in closed form.
///
/// Expands to Σθ_j² − 1 + h(1 − θ_M) using E[f_j f_k] = δ_{jk},
/// E[f_j f₀] = 0 for j < M, and E[f_M f₀] = h/2.
pub fn population_excess_risk(model: &AdversarialModel, weights: &SimplexWeights) -> f64 {
    let h = model.h();
    let sq: f64 = weights.theta().iter().map(|t| t * t).sum();
    let theta_m = weights.theta()[model.m - 1];
    sq - 1.0 + h * (1.0 - theta_m)
}

/// Population excess risk of the best convex combination of the
/// dictionary, by symmetry reduction to a one-dimensional quadratic.
pub fn best_convex_excess_risk(model: &AdversarialModel) -> f64 {
    let m = model.m as f64;
    let h = model.h();
    // Optimum puts equal weight a on every j < M and b on j = M with
    // (M−1)a + b = 1; minimizing (M−1)a² + b² − hb gives
    // b = (h(M−1) + 2) / (2M).
    let b = ((h * (m - 1.0) + 2.0) / (2.0 * m)).clamp(0.0, 1.0);
    let a = (1.0 - b) / (m - 1.0);
    (m - 1.0) * a * a + b * b - 1.0 + h * (1.0 - b)
}

/// Monte Carlo report for the ERM selector's excess risk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErmMcReport {
    pub m: usize,
    pub n: usize,
    pub reps: usize,
    /// Replications where the ERM picked some j ≠ M.
    pub misselect_count: usize,
    pub p_misselect: f64,
    /// h · p̂, the exact population excess risk of the selector.
    pub excess_risk: f64,
    /// Monte Carlo standard error of the excess risk.
    pub stderr: f64,
    pub sqrt_log_m_over_n: f64,
}

/// Index minimizing the empirical risk over the dictionary; ties go to the
/// smallest index. Penalties, when given, are added per predictor.
fn erm_selector(sample: &DyadicSample, pen: Option<&[f64]>) -> usize {
    let n = sample.n_rows() as f64;
    let mut best = (f64::INFINITY, 0usize);
    for j in 0..sample.m() {
        let mut s = 0.0;
        for i in 0..sample.n_rows() {
            let d = sample.y()[i] - sample.predictor_value(i, j);
            s += d * d;
        }
        let risk = s / n + pen.map_or(0.0, |p| p[j]);
        if risk < best.0 {
            best = (risk, j);
        }
    }
    best.1
}

/// Measures the ERM selector's excess risk by Monte Carlo, with an
/// optional constant penalty vector added to the empirical risks
/// (`None` is pen ≡ 0).
pub fn erm_excess_risk_mc_penalized(
    model: &AdversarialModel,
    pen: Option<&[f64]>,
    reps: usize,
    seed: u64,
) -> Result<ErmMcReport> {
    if reps < 1 {
        return Err(invalid("need reps >= 1"));
    }
    if let Some(p) = pen {
        if p.len() != model.m {
            return Err(invalid(format!(
                "penalty vector has length {}, dictionary has {}",
                p.len(),
                model.m
            )));
        }
    }
    let misselect_count: usize = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let sample = draw(model, model.n, derive_seed(seed, rep as u64));
            usize::from(erm_selector(&sample, pen) != model.m - 1)
        })
        .sum();
    let p_hat = misselect_count as f64 / reps as f64;
    let h = model.h();
    Ok(ErmMcReport {
        m: model.m,
        n: model.n,
        reps,
        misselect_count,
        p_misselect: p_hat,
        excess_risk: h * p_hat,
        stderr: h * (p_hat * (1.0 - p_hat) / reps as f64).sqrt(),
        sqrt_log_m_over_n: model.reference_rate(),
    })
}

/// Measures the unpenalized ERM selector's excess risk by Monte Carlo.
pub fn erm_excess_risk_mc(model: &AdversarialModel, reps: usize, seed: u64) -> Result<ErmMcReport> {
    erm_excess_risk_mc_penalized(model, None, reps, seed)
}

/// Head-to-head report: exact population excess risks of the star
/// aggregate (on 2n observations, split sequentially) and of the ERM
/// selector run on the same 2n observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarMcReport {
    pub m: usize,
    pub n: usize,
    pub reps: usize,
    pub mean_star_excess: f64,
    pub stderr_star: f64,
    pub mean_erm_excess: f64,
    pub stderr_erm: f64,
}

pub fn star_excess_risk_mc(
    model: &AdversarialModel,
    cfg: &PreselectConfig,
    reps: usize,
    seed: u64,
) -> Result<StarMcReport> {
    if reps < 1 {
        return Err(invalid("need reps >= 1"));
    }
    let per_rep: Vec<(f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|rep| -> Result<(f64, f64)> {
            let dyadic = draw(model, 2 * model.n, derive_seed(seed, rep as u64));
            let erm_j = erm_selector(&dyadic, None);
            let erm_excess = if erm_j == model.m - 1 { 0.0 } else { model.h() };

            let (sample, dict) = dyadic.to_dictionary()?;
            let split = crate::data::split_sample(sample, 0, 0.5, SplitMode::Sequential)?;
            let star = crate::aggregate::star_aggregate(&dict, &split, cfg)?;
            Ok((population_excess_risk(model, &star.weights), erm_excess))
        })
        .collect::<Result<_>>()?;

    let mean = |sel: fn(&(f64, f64)) -> f64| -> (f64, f64) {
        let vals: Vec<f64> = per_rep.iter().map(sel).collect();
        let mu = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>()
            / (vals.len().saturating_sub(1).max(1)) as f64;
        (mu, (var / vals.len() as f64).sqrt())
    };
    let (mean_star, se_star) = mean(|p| p.0);
    let (mean_erm, se_erm) = mean(|p| p.1);
    Ok(StarMcReport {
        m: model.m,
        n: model.n,
        reps,
        mean_star_excess: mean_star,
        stderr_star: se_star,
        mean_erm_excess: mean_erm,
        stderr_erm: se_erm,
    })
}
