//! Aggregation procedures over a preselected dictionary: the star and
//! segment aggregates (at most two nonzero weights), ERM over the convex
//! hull via conditional gradient, and the exponential-weights baselines.

use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};

use crate::data::{Dictionary, Sample, SimplexWeights, SplitSample};
use crate::error::{invalid, Result};
use crate::preselect::{preselect, preselect_on, PreselectConfig};
use crate::risk::{empirical_risk, segment_min};

/// Which aggregation procedure produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Star,
    Segment,
    ConvexHull,
    Aew,
    Acew,
}

/// An aggregate: simplex weights over the dictionary plus diagnostics.
///
/// Serializes to JSON as `{variant, weights: [(index, value)...], lambda,
/// pair, kept, validation_risk, converged}` with weights in sparse form.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct AggregateResult {
    pub variant: Variant,
    pub weights: SimplexWeights,
    /// R_{n,2} of the aggregate; absent for exponential weights computed
    /// without a validation half.
    pub validation_risk: Option<f64>,
    /// The preselection set the search ran over (all indices for AEW/ACEW).
    pub kept: Vec<usize>,
    /// Mixing weight on the first member of `pair`, when the result is a
    /// two-point mixture.
    pub lambda: Option<f64>,
    /// Selected pair of predictor indices, when applicable.
    pub pair: Option<(usize, usize)>,
    /// False only when the convex-hull solver hit its iteration cap before
    /// certifying the duality gap.
    pub converged: bool,
}

impl Serialize for AggregateResult {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("AggregateResult", 7)?;
        st.serialize_field("variant", &self.variant)?;
        st.serialize_field("weights", &self.weights.sparse())?;
        st.serialize_field("lambda", &self.lambda)?;
        st.serialize_field("pair", &self.pair)?;
        st.serialize_field("kept", &self.kept)?;
        st.serialize_field("validation_risk", &self.validation_risk)?;
        st.serialize_field("converged", &self.converged)?;
        st.end()
    }
}

struct ValidationView {
    rows: Vec<Vec<f64>>,
    y: Vec<f64>,
}

fn validation_view(dict: &Dictionary, sample: &Sample, idx: &[usize]) -> ValidationView {
    ValidationView {
        rows: (0..dict.m()).map(|j| dict.predictor_at(j, idx)).collect(),
        y: sample.y_at(idx),
    }
}

/// Star aggregate: ERM over the segments joining the training ERM to each
/// preselected predictor, evaluated on the validation half. The result has
/// at most two nonzero weights.
pub fn star_aggregate(
    dict: &Dictionary,
    split: &SplitSample,
    cfg: &PreselectConfig,
) -> Result<AggregateResult> {
    star_aggregate_on(dict, split.parent(), split.idx1(), split.idx2(), cfg)
}

/// Star aggregate with explicit index sets: preselection (and the
/// reference ERM) read `idx_pre`, the segment minimization reads `idx_val`.
/// The two may coincide when the caller does not want to split.
pub fn star_aggregate_on(
    dict: &Dictionary,
    sample: &Sample,
    idx_pre: &[usize],
    idx_val: &[usize],
    cfg: &PreselectConfig,
) -> Result<AggregateResult> {
    let pre = preselect_on(dict, sample, idx_pre, cfg)?;
    let view = validation_view(dict, sample, idx_val);
    let erm = pre.erm_index;

    let mut best: Option<(f64, f64, usize)> = None; // (risk, lambda, j)
    for &j in &pre.kept {
        let sol = segment_min(&view.rows[erm], &view.rows[j], &view.y)?;
        if best.as_ref().is_none_or(|(r, _, _)| sol.risk < *r) {
            best = Some((sol.risk, sol.lambda, j));
        }
    }
    let (risk, lambda, j_hat) = best.expect("preselection always keeps the ERM");

    let mut theta = vec![0.0; dict.m()];
    theta[erm] += lambda;
    theta[j_hat] += 1.0 - lambda;
    Ok(AggregateResult {
        variant: Variant::Star,
        weights: SimplexWeights::new(theta)?,
        validation_risk: Some(risk),
        kept: pre.kept,
        lambda: Some(lambda),
        pair: Some((erm, j_hat)),
        converged: true,
    })
}

/// Segment aggregate: ERM over all segments between pairs of preselected
/// predictors, evaluated on the validation half. At most two nonzero
/// weights; never worse than the star aggregate on the validation half.
pub fn segment_aggregate(
    dict: &Dictionary,
    split: &SplitSample,
    cfg: &PreselectConfig,
) -> Result<AggregateResult> {
    segment_aggregate_on(dict, split.parent(), split.idx1(), split.idx2(), cfg)
}

/// Segment aggregate with explicit preselection and validation index sets.
pub fn segment_aggregate_on(
    dict: &Dictionary,
    sample: &Sample,
    idx_pre: &[usize],
    idx_val: &[usize],
    cfg: &PreselectConfig,
) -> Result<AggregateResult> {
    let pre = preselect_on(dict, sample, idx_pre, cfg)?;
    let view = validation_view(dict, sample, idx_val);

    // (risk, lambda, f, g) with lambda the weight on f; pairs scanned in
    // lexicographic order and strict improvement required, so ties resolve
    // to the smallest pair.
    let mut best: Option<(f64, f64, usize, usize)> = None;
    for (a, &j) in pre.kept.iter().enumerate() {
        for &k in &pre.kept[a..] {
            let sol = segment_min(&view.rows[j], &view.rows[k], &view.y)?;
            if best.as_ref().is_none_or(|(r, _, _, _)| sol.risk < *r) {
                best = Some((sol.risk, sol.lambda, j, k));
            }
        }
    }
    let (risk, lambda, f, g) = best.expect("preselection always keeps the ERM");

    let mut theta = vec![0.0; dict.m()];
    theta[f] += lambda;
    theta[g] += 1.0 - lambda;
    Ok(AggregateResult {
        variant: Variant::Segment,
        weights: SimplexWeights::new(theta)?,
        validation_risk: Some(risk),
        kept: pre.kept,
        lambda: Some(lambda),
        pair: Some((f, g)),
        converged: true,
    })
}

/// One conditional-gradient state: weights over `kept`, current prediction
/// vector, and current risk.
struct FwState {
    theta: Vec<f64>, // indexed like `kept`
    preds: Vec<f64>,
    risk: f64,
}

/// Conditional gradient for min R_{n,2} over the simplex on `kept`,
/// using pairwise steps: each iteration exchanges mass between the
/// worst-weighted (away) vertex and the best descent (toward) vertex with
/// an exact line search, which sidesteps the zig-zagging of plain
/// Frank–Wolfe near a face of the simplex. Stops on the standard
/// Frank–Wolfe duality-gap certificate. Returns
/// (state, gap, iterations, converged).
fn frank_wolfe(
    rows: &[Vec<f64>],
    y: &[f64],
    kept: &[usize],
    tol: f64,
    max_iters: usize,
) -> Result<(FwState, f64, usize, bool)> {
    let n = y.len() as f64;
    let k = kept.len();

    // Start from the best vertex on the validation half.
    let mut start = (f64::INFINITY, 0usize);
    for (a, &j) in kept.iter().enumerate() {
        let r = empirical_risk(&rows[j], y)?;
        if r < start.0 {
            start = (r, a);
        }
    }
    let mut st = FwState {
        theta: {
            let mut t = vec![0.0; k];
            t[start.1] = 1.0;
            t
        },
        preds: rows[kept[start.1]].clone(),
        risk: start.0,
    };

    let mut gap = f64::INFINITY;
    let mut iters = 0;
    let mut converged = false;
    for iter in 0..max_iters {
        iters = iter;
        // ∇R(p)_i = (2/n)(p_i − y_i); toward vertex minimizes ⟨∇R, f⟩,
        // away vertex maximizes it over the current support.
        let grad: Vec<f64> = st
            .preds
            .iter()
            .zip(y)
            .map(|(p, yy)| 2.0 * (p - yy) / n)
            .collect();
        let dot_p: f64 = grad.iter().zip(&st.preds).map(|(g, p)| g * p).sum();

        let mut toward = (f64::INFINITY, 0usize);
        let mut away = (f64::NEG_INFINITY, 0usize);
        for (a, &j) in kept.iter().enumerate() {
            let d: f64 = grad.iter().zip(&rows[j]).map(|(g, f)| g * f).sum();
            if d < toward.0 {
                toward = (d, a);
            }
            if st.theta[a] > 0.0 && d > away.0 {
                away = (d, a);
            }
        }
        gap = dot_p - toward.0;
        if gap <= tol {
            converged = true;
            break;
        }

        let (si, ai) = (toward.1, away.1);
        let row_s = &rows[kept[si]];
        let row_a = &rows[kept[ai]];
        let dir: Vec<f64> = row_s.iter().zip(row_a).map(|(s, a)| s - a).collect();
        // R(p + γ d) = R(p) − 2γ⟨y − p, d⟩/n + γ²‖d‖²/n, γ ∈ [0, θ_a].
        let cov: f64 = dir
            .iter()
            .zip(y.iter().zip(&st.preds))
            .map(|(d, (yy, p))| d * (yy - p))
            .sum::<f64>()
            / n;
        let sq: f64 = dir.iter().map(|d| d * d).sum::<f64>() / n;
        let gamma_max = st.theta[ai];
        let gamma = if sq > 0.0 {
            (cov / sq).clamp(0.0, gamma_max)
        } else {
            gamma_max
        };
        st.theta[ai] -= gamma;
        st.theta[si] += gamma;
        if st.theta[ai] <= 1e-15 {
            // Transfer the fp residue so the total mass stays exactly 1.
            st.theta[si] += st.theta[ai];
            st.theta[ai] = 0.0;
        }
        for (p, d) in st.preds.iter_mut().zip(&dir) {
            *p += gamma * d;
        }
        st.risk = st.risk - 2.0 * gamma * cov + gamma * gamma * sq;
    }
    // The incremental risk recurrence is exact in exact arithmetic; refresh
    // it from the final prediction vector to drop accumulated fp noise.
    st.risk = empirical_risk(&st.preds, y)?;
    Ok((st, gap, iters, converged))
}

/// ERM over the convex hull of the preselected dictionary on the
/// validation half, by conditional gradient with exact line search.
/// Stops when the duality gap certifies `tol`, or after `max_iters`
/// iterations with `converged = false` (0 means the default
/// 10·|kept| + 100).
pub fn convex_aggregate(
    dict: &Dictionary,
    split: &SplitSample,
    cfg: &PreselectConfig,
    tol: f64,
    max_iters: usize,
) -> Result<AggregateResult> {
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be > 0, got {tol}")));
    }
    let pre = preselect(dict, split, cfg)?;
    let view = validation_view(dict, split.parent(), split.idx2());
    let iters = if max_iters == 0 {
        10 * pre.kept.len() + 100
    } else {
        max_iters
    };
    let (state, _gap, _n_iter, converged) =
        frank_wolfe(&view.rows, &view.y, &pre.kept, tol, iters)?;

    let mut theta = vec![0.0; dict.m()];
    for (a, &j) in pre.kept.iter().enumerate() {
        theta[j] += state.theta[a];
    }
    Ok(AggregateResult {
        variant: Variant::ConvexHull,
        weights: SimplexWeights::new(theta)?,
        validation_risk: Some(state.risk),
        kept: pre.kept,
        lambda: None,
        pair: None,
        converged,
    })
}

/// Total squared losses Σ_{i∈idx} (y_i − f_j(x_i))² for every predictor.
fn total_losses(dict: &Dictionary, sample: &Sample, idx: &[usize]) -> Result<Vec<f64>> {
    if idx.is_empty() {
        return Err(invalid("exponential weights need a nonempty index set"));
    }
    let n = sample.n_total();
    for &i in idx {
        if i >= n {
            return Err(invalid(format!("index {i} out of range 0..{n}")));
        }
    }
    let y = sample.y_at(idx);
    (0..dict.m())
        .map(|j| {
            let f = dict.predictor_at(j, idx);
            Ok(empirical_risk(&f, &y)? * idx.len() as f64)
        })
        .collect()
}

/// Softmax of −losses/temperature, stabilized by subtracting the smallest
/// loss. Exponents are floored so every weight stays strictly positive.
fn softmax_weights(losses: &[f64], temperature: f64) -> Vec<f64> {
    let min = losses.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = losses
        .iter()
        .map(|l| (-((l - min) / temperature)).max(-700.0).exp())
        .collect();
    let sum: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// Aggregate with exponential weights: θ_j ∝ exp(−Σ_{i∈idx}(y_i−f_j(x_i))²/T).
pub fn aew_weights(
    dict: &Dictionary,
    sample: &Sample,
    idx: &[usize],
    temperature: f64,
) -> Result<SimplexWeights> {
    if !(temperature > 0.0) {
        return Err(invalid(format!(
            "temperature must be > 0, got {temperature}"
        )));
    }
    let losses = total_losses(dict, sample, idx)?;
    SimplexWeights::new(softmax_weights(&losses, temperature))
}

/// Aggregate with cumulated exponential weights: the average over data
/// prefixes k = 1..n of the exponential weights computed from cumulative
/// losses. `idx` is an ordered sequence; its order defines the prefixes.
pub fn acew_weights(
    dict: &Dictionary,
    sample: &Sample,
    idx: &[usize],
    temperature: f64,
) -> Result<SimplexWeights> {
    if !(temperature > 0.0) {
        return Err(invalid(format!(
            "temperature must be > 0, got {temperature}"
        )));
    }
    if idx.is_empty() {
        return Err(invalid("exponential weights need a nonempty index set"));
    }
    let m = dict.m();
    let mut cum = vec![0.0; m];
    let mut acc = vec![0.0; m];
    for &i in idx {
        if i >= sample.n_total() {
            return Err(invalid(format!(
                "index {i} out of range 0..{}",
                sample.n_total()
            )));
        }
        let yi = sample.y()[i];
        for (j, c) in cum.iter_mut().enumerate() {
            let d = yi - dict.predictor(j)[i];
            *c += d * d;
        }
        for (a, w) in acc.iter_mut().zip(softmax_weights(&cum, temperature)) {
            *a += w;
        }
    }
    let k = idx.len() as f64;
    for a in acc.iter_mut() {
        *a /= k;
    }
    SimplexWeights::new(acc)
}

/// Pointwise convex combination Σ_j θ_j f_j(x_i) over the observations in
/// `idx`.
pub fn predict(weights: &SimplexWeights, dict: &Dictionary, idx: &[usize]) -> Result<Vec<f64>> {
    if weights.len() != dict.m() {
        return Err(invalid(format!(
            "weight vector has length {} but the dictionary has {} predictors",
            weights.len(),
            dict.m()
        )));
    }
    let mut out = vec![0.0; idx.len()];
    for &(j, t) in weights.sparse().iter() {
        let row = dict.predictor(j);
        for (o, &i) in out.iter_mut().zip(idx) {
            *o += t * row[i];
        }
    }
    Ok(out)
}
