//! Samples, sample splits, dictionaries of predictors, and simplex weights.
//!
//! Predictors are represented extensionally: a dictionary stores the values
//! f_j(X_i) on the sample, not function closures. Everything here is an
//! immutable value object after construction, so all of it can be shared
//! freely across Monte Carlo workers.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, Matrix};
use crate::rng::rng_from_seed;

/// Sum of simplex weights may drift from 1 by at most this much.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A regression sample: responses and, when the predictors are linear,
/// the design matrix they act on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    y: Vec<f64>,
    x: Option<Matrix>,
}

impl Sample {
    pub fn new(y: Vec<f64>, x: Option<Matrix>) -> Result<Self> {
        if y.len() < 2 {
            return Err(invalid(format!(
                "sample needs at least 2 observations, got {}",
                y.len()
            )));
        }
        if let Some(pos) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "responses y",
                row: pos,
                col: 0,
            });
        }
        if let Some(x) = &x {
            if x.nrows() != y.len() {
                return Err(Error::DimensionMismatch {
                    what: "design rows vs responses",
                    expected: y.len(),
                    found: x.nrows(),
                });
            }
            if let Some((r, c)) = x.find_non_finite() {
                return Err(Error::NonFinite {
                    what: "design matrix x",
                    row: r,
                    col: c,
                });
            }
        }
        Ok(Sample { y, x })
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn x(&self) -> Option<&Matrix> {
        self.x.as_ref()
    }

    #[inline]
    pub fn n_total(&self) -> usize {
        self.y.len()
    }

    /// Responses restricted to an index set, in the given order.
    pub fn y_at(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.y[i]).collect()
    }
}

/// How `split_sample` assigns observations to the two halves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// First ⌈ratio·n⌉ indices go to part 1, so at ratio 0.5 the first
    /// half of the observations trains and the second half validates.
    Sequential,
    /// Uniformly random subset of size ⌈ratio·n⌉ goes to part 1.
    Random,
}

/// A labeled partition of a sample into a training half and a
/// validation half.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSample {
    parent: Sample,
    idx1: Vec<usize>,
    idx2: Vec<usize>,
}

impl SplitSample {
    /// Validates that (idx1, idx2) is a partition of 0..n with both parts
    /// nonempty. Index sets are stored sorted.
    pub fn new(parent: Sample, idx1: Vec<usize>, idx2: Vec<usize>) -> Result<Self> {
        let n = parent.n_total();
        if idx1.is_empty() || idx2.is_empty() {
            return Err(invalid("both split parts must be nonempty"));
        }
        let mut seen = vec![false; n];
        for &i in idx1.iter().chain(idx2.iter()) {
            if i >= n {
                return Err(invalid(format!("split index {i} out of range 0..{n}")));
            }
            if seen[i] {
                return Err(invalid(format!("split index {i} appears twice")));
            }
            seen[i] = true;
        }
        if !seen.iter().all(|&s| s) {
            return Err(invalid("split must cover every observation"));
        }
        let mut idx1 = idx1;
        let mut idx2 = idx2;
        idx1.sort_unstable();
        idx2.sort_unstable();
        Ok(SplitSample { parent, idx1, idx2 })
    }

    #[inline]
    pub fn parent(&self) -> &Sample {
        &self.parent
    }

    #[inline]
    pub fn idx1(&self) -> &[usize] {
        &self.idx1
    }

    #[inline]
    pub fn idx2(&self) -> &[usize] {
        &self.idx2
    }
}

/// Splits a sample into two halves.
///
/// Part 1 receives ⌈ratio·n⌉ observations. Deterministic given
/// (seed, ratio, mode); the seed is ignored in sequential mode.
pub fn split_sample(sample: Sample, seed: u64, ratio: f64, mode: SplitMode) -> Result<SplitSample> {
    let n = sample.n_total();
    if n < 4 {
        return Err(invalid(format!(
            "splitting needs at least 4 observations, got {n}"
        )));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(invalid(format!("split ratio must be in (0,1), got {ratio}")));
    }
    let n1 = (ratio * n as f64).ceil() as usize;
    if n1 == 0 || n1 >= n {
        return Err(invalid(format!(
            "split ratio {ratio} leaves an empty part for n={n}"
        )));
    }
    let (idx1, idx2) = match mode {
        SplitMode::Sequential => ((0..n1).collect(), (n1..n).collect()),
        SplitMode::Random => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng_from_seed(seed));
            let mut idx1: Vec<usize> = perm[..n1].to_vec();
            let mut idx2: Vec<usize> = perm[n1..].to_vec();
            idx1.sort_unstable();
            idx2.sort_unstable();
            (idx1, idx2)
        }
    };
    SplitSample::new(sample, idx1, idx2)
}

/// A finite dictionary of predictors, stored as their prediction values on
/// the parent sample. `preds` is M × n with entry (j, i) = f_j(X_i).
///
/// Linear predictors may additionally carry their coefficient vectors (and
/// per-predictor intercepts), in which case `preds` always equals
/// `coefs · xᵀ + intercept` on the originating design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    preds: Matrix,
    labels: Vec<String>,
    coefs: Option<Matrix>,
    intercepts: Option<Vec<f64>>,
}

impl Dictionary {
    fn validate(preds: &Matrix, labels: &[String]) -> Result<()> {
        if preds.nrows() < 2 {
            return Err(invalid(format!(
                "dictionary needs at least 2 predictors, got {}",
                preds.nrows()
            )));
        }
        if labels.len() != preds.nrows() {
            return Err(Error::DimensionMismatch {
                what: "dictionary labels",
                expected: preds.nrows(),
                found: labels.len(),
            });
        }
        if let Some((r, c)) = preds.find_non_finite() {
            return Err(Error::NonFinite {
                what: "dictionary predictions",
                row: r,
                col: c,
            });
        }
        Ok(())
    }

    /// Builds a dictionary from precomputed prediction values.
    pub fn from_predictions(preds: Matrix, labels: Vec<String>) -> Result<Self> {
        Self::validate(&preds, &labels)?;
        Ok(Dictionary {
            preds,
            labels,
            coefs: None,
            intercepts: None,
        })
    }

    /// Builds a dictionary of linear predictors f_j(x) = θ_jᵀ x from an
    /// M × p coefficient matrix and an n × p design. Coefficients are
    /// retained for coefficient-space error reporting.
    pub fn from_coefficients(coefs: Matrix, x: &Matrix) -> Result<Self> {
        let labels = (1..=coefs.nrows()).map(|j| format!("f_{j}")).collect();
        Self::from_coefficients_full(coefs, None, x, labels)
    }

    /// As `from_coefficients`, with explicit per-predictor intercepts and
    /// labels: f_j(x) = intercept_j + θ_jᵀ x.
    pub fn from_coefficients_full(
        coefs: Matrix,
        intercepts: Option<Vec<f64>>,
        x: &Matrix,
        labels: Vec<String>,
    ) -> Result<Self> {
        if coefs.ncols() != x.ncols() {
            return Err(Error::DimensionMismatch {
                what: "coefficient columns vs design columns",
                expected: x.ncols(),
                found: coefs.ncols(),
            });
        }
        if let Some(ic) = &intercepts {
            if ic.len() != coefs.nrows() {
                return Err(Error::DimensionMismatch {
                    what: "intercepts vs predictors",
                    expected: coefs.nrows(),
                    found: ic.len(),
                });
            }
        }
        let m = coefs.nrows();
        let n = x.nrows();
        let mut preds = Matrix::zeros(m, n);
        for j in 0..m {
            let b = coefs.row(j);
            let c = intercepts.as_ref().map_or(0.0, |ic| ic[j]);
            for i in 0..n {
                preds.set(j, i, c + dot(b, x.row(i)));
            }
        }
        Self::validate(&preds, &labels)?;
        Ok(Dictionary {
            preds,
            labels,
            coefs: Some(coefs),
            intercepts,
        })
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.preds.nrows()
    }

    #[inline]
    pub fn n_total(&self) -> usize {
        self.preds.ncols()
    }

    #[inline]
    pub fn preds(&self) -> &Matrix {
        &self.preds
    }

    /// Prediction values of predictor j on the full sample.
    #[inline]
    pub fn predictor(&self, j: usize) -> &[f64] {
        self.preds.row(j)
    }

    /// Prediction values of predictor j restricted to an index set.
    pub fn predictor_at(&self, j: usize, idx: &[usize]) -> Vec<f64> {
        let row = self.preds.row(j);
        idx.iter().map(|&i| row[i]).collect()
    }

    #[inline]
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn coefs(&self) -> Option<&Matrix> {
        self.coefs.as_ref()
    }

    #[inline]
    pub fn intercepts(&self) -> Option<&[f64]> {
        self.intercepts.as_deref()
    }
}

/// Aggregation coefficients on the M-simplex with explicit support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexWeights {
    theta: Vec<f64>,
    support: Vec<usize>,
}

impl SimplexWeights {
    /// Validates nonnegativity and unit sum (within `SIMPLEX_TOL`) and
    /// records the support (indices with θ_j > 0).
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(invalid("weight vector must be nonempty"));
        }
        let mut sum = 0.0;
        for (j, &t) in theta.iter().enumerate() {
            if !t.is_finite() || t < 0.0 {
                return Err(invalid(format!("weight {t} at index {j} is not in [0,1]")));
            }
            sum += t;
        }
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(invalid(format!(
                "weights sum to {sum}, expected 1 within {SIMPLEX_TOL:e}"
            )));
        }
        let support = theta
            .iter()
            .enumerate()
            .filter(|(_, &t)| t > 0.0)
            .map(|(j, _)| j)
            .collect();
        Ok(SimplexWeights { theta, support })
    }

    /// Puts all mass on a single predictor.
    pub fn point_mass(m: usize, j: usize) -> Result<Self> {
        if j >= m {
            return Err(invalid(format!("index {j} out of range for M={m}")));
        }
        let mut theta = vec![0.0; m];
        theta[j] = 1.0;
        Self::new(theta)
    }

    /// Entrywise mean of several weight vectors; the mean of simplex
    /// vectors is again a simplex vector.
    pub fn average(weights: &[SimplexWeights]) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("cannot average zero weight vectors"));
        }
        let m = weights[0].len();
        let mut theta = vec![0.0; m];
        for w in weights {
            if w.len() != m {
                return Err(Error::DimensionMismatch {
                    what: "weight vector length",
                    expected: m,
                    found: w.len(),
                });
            }
            for (t, &v) in theta.iter_mut().zip(w.theta()) {
                *t += v;
            }
        }
        let k = weights.len() as f64;
        for t in theta.iter_mut() {
            *t /= k;
        }
        Self::new(theta)
    }

    #[inline]
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    #[inline]
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.theta.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Nonzero weights as (index, value) pairs, by ascending index.
    pub fn sparse(&self) -> Vec<(usize, f64)> {
        self.support.iter().map(|&j| (j, self.theta[j])).collect()
    }
}

/// Noise/envelope regime governing the preselection threshold φ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// Responses and predictors uniformly bounded by b.
    Bounded { b: f64 },
    /// Subgaussian noise (ψ₂ norm ≤ σ_ε implied scale) with envelope b.
    Subgaussian { sigma_eps: f64, b: f64 },
}

impl Regime {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Regime::Bounded { b } => {
                if !(b > 0.0) {
                    return Err(invalid(format!("bounded regime needs b > 0, got {b}")));
                }
            }
            Regime::Subgaussian { sigma_eps, b } => {
                if !(b > 0.0) {
                    return Err(invalid(format!("subgaussian regime needs b > 0, got {b}")));
                }
                if !(sigma_eps > 0.0) {
                    return Err(invalid(format!(
                        "subgaussian regime needs sigma_eps > 0, got {sigma_eps}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// A dictionary CSV: sample, predictions, and an optional pinned split.
#[derive(Debug, Clone)]
pub struct DictionaryCsv {
    pub sample: Sample,
    pub dictionary: Dictionary,
    /// Present when the file carried a `split` column.
    pub split: Option<SplitSample>,
}

/// Reads the dictionary CSV format: header `y,f_1,...,f_M[,split]`, one row
/// per observation, `split` values 1/2 pinning the partition.
pub fn read_dictionary_csv<R: Read>(reader: R) -> Result<DictionaryCsv> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rd
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .clone();
    if headers.len() < 3 {
        return Err(Error::Csv(format!(
            "expected at least 3 columns (y and 2 predictors), got {}",
            headers.len()
        )));
    }
    if headers.get(0) != Some("y") {
        return Err(Error::Csv(format!(
            "first column must be named 'y', got '{}'",
            headers.get(0).unwrap_or("")
        )));
    }
    let has_split = headers.get(headers.len() - 1) == Some("split");
    let m = headers.len() - 1 - usize::from(has_split);
    if m < 2 {
        return Err(Error::Csv(format!(
            "expected at least 2 predictor columns, got {m}"
        )));
    }
    let labels: Vec<String> = (1..=m).map(|j| headers[j].to_string()).collect();

    let mut y = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); m];
    let mut split_tags: Vec<u8> = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
        if rec.len() != headers.len() {
            return Err(Error::Csv(format!(
                "row {}: expected {} fields, got {}",
                line + 2,
                headers.len(),
                rec.len()
            )));
        }
        let parse = |s: &str, what: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Csv(format!("row {}: bad {what} value '{s}'", line + 2)))
        };
        y.push(parse(&rec[0], "y")?);
        for (j, col) in cols.iter_mut().enumerate() {
            col.push(parse(&rec[j + 1], "prediction")?);
        }
        if has_split {
            let tag = &rec[headers.len() - 1];
            match tag {
                "1" => split_tags.push(1),
                "2" => split_tags.push(2),
                other => {
                    return Err(Error::Csv(format!(
                        "row {}: split must be 1 or 2, got '{other}'",
                        line + 2
                    )))
                }
            }
        }
    }
    let sample = Sample::new(y, None)?;
    let dictionary = Dictionary::from_predictions(Matrix::from_rows(cols)?, labels)?;
    let split = if has_split {
        let idx1: Vec<usize> = split_tags
            .iter()
            .enumerate()
            .filter(|(_, &t)| t == 1)
            .map(|(i, _)| i)
            .collect();
        let idx2: Vec<usize> = split_tags
            .iter()
            .enumerate()
            .filter(|(_, &t)| t == 2)
            .map(|(i, _)| i)
            .collect();
        Some(SplitSample::new(sample.clone(), idx1, idx2)?)
    } else {
        None
    };
    Ok(DictionaryCsv {
        sample,
        dictionary,
        split,
    })
}

/// Writes the dictionary CSV format; inverse of `read_dictionary_csv`.
pub fn write_dictionary_csv<W: Write>(
    mut w: W,
    sample: &Sample,
    dict: &Dictionary,
    split: Option<&SplitSample>,
) -> Result<()> {
    if dict.n_total() != sample.n_total() {
        return Err(Error::DimensionMismatch {
            what: "dictionary columns vs sample size",
            expected: sample.n_total(),
            found: dict.n_total(),
        });
    }
    let mut emit = |s: String| -> Result<()> {
        w.write_all(s.as_bytes())
            .map_err(|e| Error::Csv(e.to_string()))
    };
    let mut header = String::from("y");
    for l in dict.labels() {
        header.push(',');
        header.push_str(l);
    }
    if split.is_some() {
        header.push_str(",split");
    }
    header.push('\n');
    emit(header)?;
    let tags: Option<Vec<u8>> = split.map(|s| {
        let mut t = vec![2u8; sample.n_total()];
        for &i in s.idx1() {
            t[i] = 1;
        }
        t
    });
    for i in 0..sample.n_total() {
        let mut row = format!("{}", sample.y()[i]);
        for j in 0..dict.m() {
            row.push_str(&format!(",{}", dict.predictor(j)[i]));
        }
        if let Some(t) = &tags {
            row.push_str(&format!(",{}", t[i]));
        }
        row.push('\n');
        emit(row)?;
    }
    Ok(())
}
