//! Lasso-modified least-angle regression: the full piecewise-linear lasso
//! coefficient path, Mallows-Cp selection along it, and conversion of a
//! path into a dictionary of linear predictors.
//!
//! The path is parameterized by the working-scale penalty level
//! λ = max_j |x_jᵀ r|, the maximum absolute inner product between the
//! (centered/scaled) design columns and the residual. At every knot the
//! lasso KKT conditions hold: |x_jᵀ r| ≤ λ for all j, with equality and
//! sign agreement on the active set.

use serde::{Deserialize, Serialize};

use crate::data::Dictionary;
use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, Matrix};

/// A breakpoint of the lasso path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    /// Working-scale penalty λ = max_j |x_jᵀ r| at this knot.
    pub penalty_level: f64,
    /// Coefficients on the original design scale.
    pub coefs: Vec<f64>,
    /// Indices with nonzero coefficients, ascending.
    pub active_set: Vec<usize>,
    /// Residual sum of squares of y against intercept + x·coefs.
    pub rss: f64,
    /// Intercept on the original scale.
    pub intercept: f64,
}

/// The whole lasso path plus the internal standardization it was fit under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoPath {
    pub knots: Vec<Knot>,
    /// True when the path stopped early (rank-deficient active Gram or
    /// step cap) rather than running down to λ = 0.
    pub truncated: bool,
    standardized: bool,
    centers: Vec<f64>,
    scales: Vec<f64>,
    y_mean: f64,
}

impl LassoPath {
    pub fn standardized(&self) -> bool {
        self.standardized
    }

    /// Per-column centers subtracted before fitting (zeros when not
    /// standardizing).
    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    /// Per-column scales divided out before fitting (ones when not
    /// standardizing).
    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }
}

/// Per-knot KKT diagnostics from `kkt_check`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktSummary {
    /// max_j (|x_jᵀ r| − λ) on the working scale; ≤ 0 up to fp noise.
    pub max_violation: f64,
    /// max over active j of |sign(β_j)·x_jᵀ r − λ|; the signed form checks
    /// equality and sign agreement at once, and stays meaningful at the
    /// λ → 0 endpoint where raw correlation signs are fp noise.
    pub max_active_gap: f64,
    /// sign(β_j)·x_jᵀ r ≥ −1e−9 for every nonzero coefficient.
    pub signs_agree: bool,
}

/// Growing Cholesky factor of the active-set Gram matrix.
struct ActiveChol {
    rows: Vec<Vec<f64>>,
}

impl ActiveChol {
    fn new() -> Self {
        ActiveChol { rows: Vec::new() }
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    /// Appends a variable given its Gram column
    /// [G(a_0, new), …, G(a_{k−1}, new), G(new, new)].
    /// Returns false on a non-positive pivot (rank deficiency).
    fn try_append(&mut self, gram_col: &[f64]) -> bool {
        let k = self.len();
        let mut w = gram_col[..k].to_vec();
        for i in 0..k {
            for j in 0..i {
                w[i] -= self.rows[i][j] * w[j];
            }
            w[i] /= self.rows[i][i];
        }
        let d2 = gram_col[k] - w.iter().map(|v| v * v).sum::<f64>();
        if d2 <= 1e-12 * gram_col[k].max(f64::MIN_POSITIVE) || !d2.is_finite() {
            return false;
        }
        w.push(d2.sqrt());
        self.rows.push(w);
        true
    }

    /// Solves (L Lᵀ) x = b.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let k = self.len();
        let mut x = b.to_vec();
        for i in 0..k {
            for j in 0..i {
                x[i] -= self.rows[i][j] * x[j];
            }
            x[i] /= self.rows[i][i];
        }
        for i in (0..k).rev() {
            for j in i + 1..k {
                x[i] -= self.rows[j][i] * x[j];
            }
            x[i] /= self.rows[i][i];
        }
        x
    }
}

struct Working {
    /// p × n: row j holds the working-scale values of variable j.
    cols: Matrix,
    centers: Vec<f64>,
    scales: Vec<f64>,
    y_mean: f64,
    yc: Vec<f64>,
}

fn prepare(x: &Matrix, y: &[f64], standardize: bool) -> Result<Working> {
    let n = x.nrows();
    let p = x.ncols();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            what: "design rows vs responses",
            expected: n,
            found: y.len(),
        });
    }
    if n < 2 {
        return Err(invalid(format!("lars needs n >= 2, got {n}")));
    }
    if p == 0 {
        return Err(invalid("lars needs at least one feature"));
    }
    if let Some((r, c)) = x.find_non_finite() {
        return Err(Error::NonFinite {
            what: "design matrix",
            row: r,
            col: c,
        });
    }
    if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "responses",
            row: pos,
            col: 0,
        });
    }

    let y_mean = y.iter().sum::<f64>() / n as f64;
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();

    let mut centers = vec![0.0; p];
    let mut scales = vec![1.0; p];
    let mut cols = Matrix::zeros(p, n);
    for j in 0..p {
        if standardize {
            let mean = (0..n).map(|i| x.get(i, j)).sum::<f64>() / n as f64;
            let norm = (0..n)
                .map(|i| {
                    let d = x.get(i, j) - mean;
                    d * d
                })
                .sum::<f64>()
                .sqrt();
            if norm <= 1e-12 {
                return Err(Error::ZeroVarianceColumn { col: j });
            }
            centers[j] = mean;
            scales[j] = norm;
            for i in 0..n {
                cols.set(j, i, (x.get(i, j) - mean) / norm);
            }
        } else {
            for i in 0..n {
                cols.set(j, i, x.get(i, j));
            }
        }
    }
    Ok(Working {
        cols,
        centers,
        scales,
        y_mean,
        yc,
    })
}

fn push_knot(
    knots: &mut Vec<Knot>,
    lambda: f64,
    beta_w: &[f64],
    resid: &[f64],
    w: &Working,
) {
    let p = beta_w.len();
    let mut coefs = vec![0.0; p];
    let mut active_set = Vec::new();
    let mut intercept = w.y_mean;
    for j in 0..p {
        if beta_w[j] != 0.0 {
            coefs[j] = beta_w[j] / w.scales[j];
            intercept -= w.centers[j] * coefs[j];
            active_set.push(j);
        }
    }
    knots.push(Knot {
        penalty_level: lambda,
        coefs,
        active_set,
        rss: dot(resid, resid),
        intercept,
    });
}

/// Computes the full lasso path from the null model by the
/// lasso-modified LARS algorithm (equiangular moves, variables dropped
/// when a coefficient crosses zero).
///
/// With `standardize`, columns are centered and scaled to unit norm
/// internally and coefficients are reported on the original scale; y is
/// always centered, with the intercept reported per knot.
/// `max_steps = 0` applies a generous default cap of 20p + 200 events;
/// hitting any cap truncates the path (flagged) rather than erroring.
pub fn lars_path(x: &Matrix, y: &[f64], max_steps: usize, standardize: bool) -> Result<LassoPath> {
    let w = prepare(x, y, standardize)?;
    let n = x.nrows();
    let p = x.ncols();
    let step_cap = if max_steps == 0 { 20 * p + 200 } else { max_steps };

    let mut beta = vec![0.0; p];
    let mut active: Vec<usize> = Vec::new();
    let mut is_active = vec![false; p];
    let mut chol = ActiveChol::new();
    let mut truncated = false;

    let mut resid = w.yc.clone();
    let mut corr: Vec<f64> = (0..p).map(|j| dot(w.cols.row(j), &resid)).collect();
    let mut lambda = corr.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let lambda0 = lambda;

    let mut knots = Vec::new();
    push_knot(&mut knots, lambda, &beta, &resid, &w);
    if lambda0 <= 1e-14 {
        return Ok(LassoPath {
            knots,
            truncated: false,
            standardized: standardize,
            centers: w.centers,
            scales: w.scales,
            y_mean: w.y_mean,
        });
    }

    let gram = |a: usize, b: usize| dot(w.cols.row(a), w.cols.row(b));
    let mut drop_pending = false;
    let mut steps = 0usize;
    // Near-degenerate designs can cycle a variable in and out with
    // vanishing step sizes; a run of stalled steps truncates the path.
    let mut stalled = 0usize;

    while lambda > 1e-14 * lambda0.max(1.0) {
        if steps >= step_cap || stalled > 2 * p + 10 {
            truncated = true;
            break;
        }
        steps += 1;

        if active.is_empty() {
            drop_pending = false;
        }
        if !drop_pending {
            // Entering variable: largest |correlation| among the inactive,
            // ties to the smallest index.
            let mut enter: Option<(f64, usize)> = None;
            for j in 0..p {
                if !is_active[j] && enter.is_none_or(|(c, _)| corr[j].abs() > c) {
                    enter = Some((corr[j].abs(), j));
                }
            }
            let Some((_, j_new)) = enter else {
                // Every variable active; the final move below ends the path.
                truncated = true;
                break;
            };
            let gram_col: Vec<f64> = active
                .iter()
                .map(|&a| gram(a, j_new))
                .chain(std::iter::once(gram(j_new, j_new)))
                .collect();
            if !chol.try_append(&gram_col) {
                truncated = true;
                break;
            }
            active.push(j_new);
            is_active[j_new] = true;
        }
        drop_pending = false;

        // Direction dβ_A/d(−λ) = G_AA⁻¹ s_A.
        let signs: Vec<f64> = active
            .iter()
            .map(|&j| if corr[j] >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        let dir = chol.solve(&signs);

        // Fitted-space direction u = X_A d and its correlations a = Xᵀ u.
        let mut u = vec![0.0; n];
        for (k, &j) in active.iter().enumerate() {
            let dj = dir[k];
            for (ui, &xi) in u.iter_mut().zip(w.cols.row(j)) {
                *ui += dj * xi;
            }
        }
        let a: Vec<f64> = (0..p).map(|j| dot(w.cols.row(j), &u)).collect();

        let eps = 1e-12 * lambda.max(1.0);
        // Smallest positive step where an inactive variable's correlation
        // catches the (uniformly shrinking) active correlations.
        let mut gamma_join = f64::INFINITY;
        for j in 0..p {
            if is_active[j] {
                continue;
            }
            for (num, den) in [
                (lambda - corr[j], 1.0 - a[j]),
                (lambda + corr[j], 1.0 + a[j]),
            ] {
                if den > 1e-12 {
                    let g = num / den;
                    if g > eps && g < gamma_join {
                        gamma_join = g;
                    }
                }
            }
        }
        // Smallest positive step where an active coefficient crosses zero
        // (only coefficients moving toward zero are candidates). Several
        // can cross simultaneously.
        let mut gamma_drop = f64::INFINITY;
        let mut crossing: Vec<usize> = Vec::new();
        for (k, &j) in active.iter().enumerate() {
            if beta[j] * dir[k] < 0.0 {
                let g = -beta[j] / dir[k];
                if g < gamma_drop * (1.0 - 1e-12) {
                    gamma_drop = g;
                    crossing.clear();
                    crossing.push(k);
                } else if g <= gamma_drop * (1.0 + 1e-12) {
                    gamma_drop = gamma_drop.min(g);
                    crossing.push(k);
                }
            }
        }

        let drop_wins = gamma_drop <= gamma_join && gamma_drop <= lambda;
        let gamma = gamma_join.min(gamma_drop).min(lambda);
        if gamma <= 1e-11 * lambda.max(1.0) {
            stalled += 1;
        } else {
            stalled = 0;
        }
        for (k, &j) in active.iter().enumerate() {
            beta[j] += gamma * dir[k];
        }

        if drop_wins {
            // Remove every coefficient that crossed zero at this step and
            // rebuild the factor; the next iteration recomputes the
            // direction without adding a variable.
            for &k in &crossing {
                let j = active[k];
                beta[j] = 0.0;
                is_active[j] = false;
            }
            let kept: Vec<usize> = active.iter().copied().filter(|&j| is_active[j]).collect();
            active = kept;
            chol = ActiveChol::new();
            let mut ok = true;
            for idx in 0..active.len() {
                let j_new = active[idx];
                let gram_col: Vec<f64> = active[..idx]
                    .iter()
                    .map(|&aj| gram(aj, j_new))
                    .chain(std::iter::once(gram(j_new, j_new)))
                    .collect();
                if !chol.try_append(&gram_col) {
                    ok = false;
                    break;
                }
            }
            if !ok {
                truncated = true;
                break;
            }
            drop_pending = true;
        }

        // Recompute the residual and correlations from scratch; cheap at
        // these sizes and keeps the KKT certificates tight.
        resid.copy_from_slice(&w.yc);
        for &j in &active {
            let bj = beta[j];
            for (ri, &xi) in resid.iter_mut().zip(w.cols.row(j)) {
                *ri -= bj * xi;
            }
        }
        for (j, c) in corr.iter_mut().enumerate() {
            *c = dot(w.cols.row(j), &resid);
        }
        lambda = corr.iter().fold(0.0f64, |m, c| m.max(c.abs()));

        push_knot(&mut knots, lambda, &beta, &resid, &w);
    }

    Ok(LassoPath {
        knots,
        truncated,
        standardized: standardize,
        centers: w.centers,
        scales: w.scales,
        y_mean: w.y_mean,
    })
}

/// Certifies the lasso KKT conditions at every knot against the original
/// design, accounting for the path's internal standardization.
pub fn kkt_check(path: &LassoPath, x: &Matrix, y: &[f64]) -> Result<Vec<KktSummary>> {
    let n = x.nrows();
    let p = x.ncols();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            what: "design rows vs responses",
            expected: n,
            found: y.len(),
        });
    }
    if path.centers.len() != p {
        return Err(Error::DimensionMismatch {
            what: "path columns vs design columns",
            expected: path.centers.len(),
            found: p,
        });
    }
    let mut out = Vec::with_capacity(path.knots.len());
    for knot in &path.knots {
        let mut resid = vec![0.0; n];
        for i in 0..n {
            resid[i] = y[i] - knot.intercept - dot(&knot.coefs, x.row(i));
        }
        let resid_sum: f64 = resid.iter().sum();
        let mut max_violation = f64::NEG_INFINITY;
        let mut max_active_gap = 0.0f64;
        let mut signs_agree = true;
        for j in 0..p {
            let raw: f64 = (0..n).map(|i| x.get(i, j) * resid[i]).sum();
            let c = (raw - path.centers[j] * resid_sum) / path.scales[j];
            max_violation = max_violation.max(c.abs() - knot.penalty_level);
            if knot.coefs[j] != 0.0 {
                let signed = knot.coefs[j].signum() * c;
                max_active_gap = max_active_gap.max((signed - knot.penalty_level).abs());
                if signed < -1e-9 {
                    signs_agree = false;
                }
            }
        }
        out.push(KktSummary {
            max_violation,
            max_active_gap,
            signs_agree,
        });
    }
    Ok(out)
}

/// Mallows-Cp over the path: argmin_k rss_k/σ² − n + 2·df_k with
/// df_k = |active_set_k|; ties go to the earlier knot.
pub fn mallows_cp_select(path: &LassoPath, y: &[f64], sigma_sq: f64) -> Result<usize> {
    if !(sigma_sq > 0.0) {
        return Err(invalid(format!("sigma_sq must be > 0, got {sigma_sq}")));
    }
    if path.knots.is_empty() {
        return Err(invalid("empty lasso path"));
    }
    let n = y.len() as f64;
    let mut best = (f64::INFINITY, 0usize);
    for (k, knot) in path.knots.iter().enumerate() {
        let cp = knot.rss / sigma_sq - n + 2.0 * knot.active_set.len() as f64;
        if cp < best.0 {
            best = (cp, k);
        }
    }
    Ok(best.1)
}

/// One dictionary predictor per knot: f_k(x) = intercept_k + coefs_kᵀ x.
/// Knot coefficients are retained for coefficient-space error reporting.
pub fn path_to_dictionary(path: &LassoPath, x: &Matrix) -> Result<Dictionary> {
    if path.knots.len() < 2 {
        return Err(invalid(format!(
            "a dictionary needs at least 2 knots, path has {}",
            path.knots.len()
        )));
    }
    let p = x.ncols();
    let coefs = Matrix::from_rows(path.knots.iter().map(|k| k.coefs.clone()).collect())?;
    if coefs.ncols() != p {
        return Err(Error::DimensionMismatch {
            what: "knot coefficients vs design columns",
            expected: p,
            found: coefs.ncols(),
        });
    }
    let intercepts: Vec<f64> = path.knots.iter().map(|k| k.intercept).collect();
    let labels = (0..path.knots.len()).map(|k| format!("knot_{k}")).collect();
    Dictionary::from_coefficients_full(coefs, Some(intercepts), x, labels)
}
