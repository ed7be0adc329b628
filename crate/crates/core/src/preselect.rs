//! Threshold-based preselection of a dictionary on the training half.
//!
//! A predictor survives when its training risk is within
//! c·max(φ‖f̂−f‖_{n,1}, φ²) of the training ERM's risk, where φ depends on
//! the noise regime. The ERM itself always survives.

use serde::{Deserialize, Serialize};

use crate::data::{Dictionary, Regime, Sample, SplitSample};
use crate::error::{invalid, Result};
use crate::risk::{empirical_risk, empirical_sq_norm};

/// Parameters of the preselection step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreselectConfig {
    /// Confidence level x > 0.
    pub x: f64,
    /// Threshold constant c > 0.
    pub c: f64,
    pub regime: Regime,
}

impl PreselectConfig {
    pub const DEFAULT_X: f64 = 1.0;
    pub const DEFAULT_C: f64 = 2.0;

    pub fn new(x: f64, c: f64, regime: Regime) -> Result<Self> {
        if !(x > 0.0) {
            return Err(invalid(format!("confidence level x must be > 0, got {x}")));
        }
        if !(c > 0.0) {
            return Err(invalid(format!("threshold constant c must be > 0, got {c}")));
        }
        regime.validate()?;
        Ok(PreselectConfig { x, c, regime })
    }

    /// Defaults x = 1, c = 2 with a bounded regime.
    pub fn bounded(b: f64) -> Result<Self> {
        Self::new(Self::DEFAULT_X, Self::DEFAULT_C, Regime::Bounded { b })
    }

    pub fn subgaussian(sigma_eps: f64, b: f64) -> Result<Self> {
        Self::new(
            Self::DEFAULT_X,
            Self::DEFAULT_C,
            Regime::Subgaussian { sigma_eps, b },
        )
    }
}

/// Per-predictor training diagnostics: the empirical risk on the training
/// half and the right-hand side of the preselection inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictorDiag {
    pub risk: f64,
    pub threshold: f64,
}

/// Outcome of preselection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreselectResult {
    /// Surviving predictor indices, ascending.
    pub kept: Vec<usize>,
    /// Index of the training ERM; always a member of `kept`.
    pub erm_index: usize,
    pub phi: f64,
    pub per_predictor: Vec<PredictorDiag>,
}

/// The threshold scale φ_{n,M}(x). Natural logarithms throughout.
pub fn phi(regime: &Regime, n: usize, m: usize, x: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("phi needs n >= 1"));
    }
    if m < 2 {
        return Err(invalid(format!("phi needs M >= 2, got {m}")));
    }
    if !(x > 0.0) {
        return Err(invalid(format!("phi needs x > 0, got {x}")));
    }
    regime.validate()?;
    let n_f = n as f64;
    let log_m = (m as f64).ln();
    Ok(match *regime {
        Regime::Bounded { b } => b * ((log_m + x) / n_f).sqrt(),
        Regime::Subgaussian { sigma_eps, b } => {
            (sigma_eps + b) * ((log_m + x) * n_f.ln() / n_f).sqrt()
        }
    })
}

/// Index of the empirical risk minimizer over the observations in `idx`;
/// ties go to the smallest index.
pub fn erm_index(dict: &Dictionary, sample: &Sample, idx: &[usize]) -> Result<usize> {
    if idx.is_empty() {
        return Err(invalid("erm_index needs a nonempty index set"));
    }
    let y = sample.y_at(idx);
    let mut best = (f64::INFINITY, 0usize);
    for j in 0..dict.m() {
        let r = empirical_risk(&dict.predictor_at(j, idx), &y)?;
        if r < best.0 {
            best = (r, j);
        }
    }
    Ok(best.1)
}

/// Runs the preselection step on the training half of `split`.
pub fn preselect(
    dict: &Dictionary,
    split: &SplitSample,
    cfg: &PreselectConfig,
) -> Result<PreselectResult> {
    if dict.n_total() != split.parent().n_total() {
        return Err(invalid(format!(
            "dictionary covers {} observations but the split's sample has {}",
            dict.n_total(),
            split.parent().n_total()
        )));
    }
    preselect_on(dict, split.parent(), split.idx1(), cfg)
}

/// Preselection against the observations in `idx1` (the threshold's n is
/// |idx1|).
pub fn preselect_on(
    dict: &Dictionary,
    sample: &Sample,
    idx1: &[usize],
    cfg: &PreselectConfig,
) -> Result<PreselectResult> {
    if idx1.is_empty() {
        return Err(invalid("preselection needs a nonempty index set"));
    }
    let y1 = sample.y_at(idx1);
    let m = dict.m();

    let rows: Vec<Vec<f64>> = (0..m).map(|j| dict.predictor_at(j, idx1)).collect();
    let risks: Vec<f64> = rows
        .iter()
        .map(|r| empirical_risk(r, &y1))
        .collect::<Result<_>>()?;
    let erm = risks
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(j, _)| j)
        .unwrap();

    let phi_val = phi(&cfg.regime, idx1.len(), m, cfg.x)?;
    let mut kept = Vec::new();
    let mut per_predictor = Vec::with_capacity(m);
    for j in 0..m {
        let dist = empirical_sq_norm(&rows[erm], &rows[j])?.sqrt();
        let threshold = risks[erm] + cfg.c * (phi_val * dist).max(phi_val * phi_val);
        if risks[j] <= threshold {
            kept.push(j);
        }
        per_predictor.push(PredictorDiag {
            risk: risks[j],
            threshold,
        });
    }
    debug_assert!(kept.contains(&erm));
    Ok(PreselectResult {
        kept,
        erm_index: erm,
        phi: phi_val,
        per_predictor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{split_sample, SplitMode};
    use crate::linalg::Matrix;

    fn labels(m: usize) -> Vec<String> {
        (1..=m).map(|j| format!("f_{j}")).collect()
    }

    fn xorshift(state: &mut u64) -> f64 {
        *state ^= *state << 13;
        *state ^= *state >> 7;
        *state ^= *state << 17;
        (*state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    #[test]
    fn phi_bounded_hand_value() {
        // log M + x = 1 exactly with M = 2, x = 1 − ln 2; then
        // φ = b √(1/n) = 0.1 at n = 100, b = 1.
        let x = 1.0 - 2.0f64.ln();
        let got = phi(&Regime::Bounded { b: 1.0 }, 100, 2, x).unwrap();
        assert!((got - 0.1).abs() < 1e-12);
        // And the x → 0 limit: with tiny x and ln M ≈ 1 the value
        // approaches b √(ln M / n).
        let e_like = phi(&Regime::Bounded { b: 1.0 }, 100, 3, 1e-12).unwrap();
        assert!((e_like - (3.0f64.ln() / 100.0).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn phi_linear_in_b() {
        let a = phi(&Regime::Bounded { b: 1.0 }, 50, 7, 0.3).unwrap();
        let b = phi(&Regime::Bounded { b: 2.0 }, 50, 7, 0.3).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12);
    }

    #[test]
    fn phi_subgaussian_hand_value() {
        // (σ_ε + b) √((log M + x) log n / n) at σ_ε = b = 1, n = 3, M = 4,
        // x = 0.5: 2·√((ln 4 + 0.5)·ln 3 / 3) — evaluated independently.
        let got = phi(
            &Regime::Subgaussian {
                sigma_eps: 1.0,
                b: 1.0,
            },
            3,
            4,
            0.5,
        )
        .unwrap();
        let expect = 2.0 * ((4.0f64.ln() + 0.5) * 3.0f64.ln() / 3.0).sqrt();
        assert!((got - expect).abs() < 1e-12);
        assert!((got - 1.662_249_947_178_692).abs() < 1e-12);
    }

    #[test]
    fn phi_monotonicity() {
        let r = Regime::Bounded { b: 1.0 };
        // Decreasing in n.
        assert!(phi(&r, 100, 8, 1.0).unwrap() < phi(&r, 50, 8, 1.0).unwrap());
        // Increasing in M.
        assert!(phi(&r, 100, 16, 1.0).unwrap() > phi(&r, 100, 8, 1.0).unwrap());
        // Increasing in x.
        assert!(phi(&r, 100, 8, 2.0).unwrap() > phi(&r, 100, 8, 1.0).unwrap());
    }

    #[test]
    fn phi_rejects_zero_n() {
        assert!(phi(&Regime::Bounded { b: 1.0 }, 0, 4, 1.0).is_err());
    }

    #[test]
    fn erm_finds_perfect_predictor() {
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let sample = Sample::new(y.clone(), None).unwrap();
        let preds = Matrix::from_rows(vec![vec![0.0; 4], y.clone(), vec![1.0; 4]]).unwrap();
        let dict = Dictionary::from_predictions(preds, labels(3)).unwrap();
        let idx: Vec<usize> = (0..4).collect();
        assert_eq!(erm_index(&dict, &sample, &idx).unwrap(), 1);
    }

    #[test]
    fn erm_ties_break_to_smaller_index() {
        let y = vec![1.0, 1.0, 1.0, 1.0];
        let sample = Sample::new(y.clone(), None).unwrap();
        let preds = Matrix::from_rows(vec![vec![5.0; 4], y.clone(), y.clone()]).unwrap();
        let dict = Dictionary::from_predictions(preds, labels(3)).unwrap();
        let idx: Vec<usize> = (0..4).collect();
        assert_eq!(erm_index(&dict, &sample, &idx).unwrap(), 1);
    }

    #[test]
    fn erm_matches_exhaustive_scan() {
        let mut st = 42u64;
        let n = 20;
        let m = 5;
        let y: Vec<f64> = (0..n).map(|_| xorshift(&mut st)).collect();
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..n).map(|_| xorshift(&mut st)).collect())
            .collect();
        let sample = Sample::new(y.clone(), None).unwrap();
        let dict =
            Dictionary::from_predictions(Matrix::from_rows(rows.clone()).unwrap(), labels(m))
                .unwrap();
        let idx: Vec<usize> = (0..n).collect();
        let got = erm_index(&dict, &sample, &idx).unwrap();
        let mut best = (f64::INFINITY, 0);
        for (j, row) in rows.iter().enumerate() {
            let mut s = 0.0;
            for i in 0..n {
                s += (y[i] - row[i]) * (y[i] - row[i]);
            }
            let r = s / n as f64;
            if r < best.0 {
                best = (r, j);
            }
        }
        assert_eq!(got, best.1);
    }

    #[test]
    fn erm_rejects_empty_index_set() {
        let y = vec![1.0, 2.0];
        let sample = Sample::new(y.clone(), None).unwrap();
        let preds = Matrix::from_rows(vec![y.clone(), vec![0.0; 2]]).unwrap();
        let dict = Dictionary::from_predictions(preds, labels(2)).unwrap();
        assert!(erm_index(&dict, &sample, &[]).is_err());
    }

    fn toy_setup(risk_scale: &[f64]) -> (Dictionary, SplitSample) {
        // Predictor j = y + offset_j on the training half, so training
        // risks are exactly offset_j².
        let n = 8;
        let y: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let sample = Sample::new(y.clone(), None).unwrap();
        let rows: Vec<Vec<f64>> = risk_scale
            .iter()
            .map(|&off| y.iter().map(|v| v + off).collect())
            .collect();
        let dict = Dictionary::from_predictions(
            Matrix::from_rows(rows).unwrap(),
            labels(risk_scale.len()),
        )
        .unwrap();
        let split = split_sample(sample, 0, 0.5, SplitMode::Sequential).unwrap();
        (dict, split)
    }

    #[test]
    fn preselect_always_keeps_erm() {
        let (dict, split) = toy_setup(&[0.3, 0.0, 1.5]);
        let cfg = PreselectConfig::bounded(1.0).unwrap();
        let res = preselect(&dict, &split, &cfg).unwrap();
        assert_eq!(res.erm_index, 1);
        assert!(res.kept.contains(&1));
    }

    #[test]
    fn preselect_keeps_everything_for_huge_c() {
        let (dict, split) = toy_setup(&[0.3, 0.0, 100.0]);
        let cfg = PreselectConfig::new(1.0, 1e12, Regime::Bounded { b: 1.0 }).unwrap();
        let res = preselect(&dict, &split, &cfg).unwrap();
        assert_eq!(res.kept, vec![0, 1, 2]);
    }

    #[test]
    fn preselect_excludes_bad_predictor() {
        // Risks (0, 10, 0.001) with a small φ: the middle one must go.
        let (dict, split) = toy_setup(&[0.0, 10.0f64.sqrt(), 0.001f64.sqrt()]);
        let cfg = PreselectConfig::new(0.01, 2.0, Regime::Bounded { b: 0.05 }).unwrap();
        let res = preselect(&dict, &split, &cfg).unwrap();
        assert_eq!(res.erm_index, 0);
        assert!(!res.kept.contains(&1));

        // Cross-check every kept/excluded decision against a direct
        // evaluation of the inequality.
        let y1 = split.parent().y_at(split.idx1());
        let erm_row = dict.predictor_at(res.erm_index, split.idx1());
        for j in 0..dict.m() {
            let fj = dict.predictor_at(j, split.idx1());
            let rj = empirical_risk(&fj, &y1).unwrap();
            let rerm = empirical_risk(&erm_row, &y1).unwrap();
            let dist = empirical_sq_norm(&erm_row, &fj).unwrap().sqrt();
            let rhs = rerm + cfg.c * (res.phi * dist).max(res.phi * res.phi);
            assert_eq!(res.kept.contains(&j), rj <= rhs);
            assert!((res.per_predictor[j].risk - rj).abs() < 1e-15);
            assert!((res.per_predictor[j].threshold - rhs).abs() < 1e-15);
        }
    }

    #[test]
    fn preselect_monotone_in_c_and_x() {
        let (dict, split) = toy_setup(&[0.0, 0.05, 0.1, 0.4, 2.0]);
        let mut prev: Option<Vec<usize>> = None;
        for &c in &[0.5, 1.0, 2.0, 4.0, 8.0] {
            let cfg = PreselectConfig::new(1.0, c, Regime::Bounded { b: 0.3 }).unwrap();
            let res = preselect(&dict, &split, &cfg).unwrap();
            if let Some(p) = &prev {
                assert!(p.iter().all(|j| res.kept.contains(j)), "c-monotonicity");
            }
            prev = Some(res.kept);
        }
        prev = None;
        for &x in &[0.1, 0.5, 1.0, 3.0, 10.0] {
            let cfg = PreselectConfig::new(x, 2.0, Regime::Bounded { b: 0.3 }).unwrap();
            let res = preselect(&dict, &split, &cfg).unwrap();
            if let Some(p) = &prev {
                assert!(p.iter().all(|j| res.kept.contains(j)), "x-monotonicity");
            }
            prev = Some(res.kept);
        }
    }

    #[test]
    fn preselect_treats_duplicates_alike() {
        let (dict, split) = toy_setup(&[0.0, 0.05, 0.05, 3.0, 3.0]);
        let cfg = PreselectConfig::new(1.0, 2.0, Regime::Bounded { b: 0.2 }).unwrap();
        let res = preselect(&dict, &split, &cfg).unwrap();
        assert_eq!(res.kept.contains(&1), res.kept.contains(&2));
        assert_eq!(res.kept.contains(&3), res.kept.contains(&4));
    }
}
