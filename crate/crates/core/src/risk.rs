//! Distortion risk measures on empirical distributions.
//!
//! Weights are stored in ascending order, `w[0] <= ... <= w[n-1]` for a
//! coherent measure. Weight `w[j]` multiplies the `j`-th largest outcome, so
//! the largest weights fall on the worst outcomes:
//!
//! ```text
//! rho(Y) = -sum_j w[j] * y_[j],   y_[0] >= y_[1] >= ... >= y_[n-1]
//! ```
//!
//! The same vector, applied to projections sorted ascending, gives the
//! support function of the weighted-mean region (see [`crate::region`]).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Tolerance on the weight sum.
pub const SUM_TOL: f64 = 1e-9;
/// Tolerance on ordering violations when classifying a vector as coherent.
pub const ORDER_TOL: f64 = 1e-12;

/// Simplex-normalized weights of a distortion risk measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector {
    w: Vec<f64>,
    coherent: bool,
    es_alpha: Option<f64>,
}

impl WeightVector {
    /// Validates nonnegativity and the unit sum, and classifies coherence.
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return domain("weight vector must be nonempty");
        }
        if let Some(j) = w.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return domain(format!("weight {j} is negative or not finite: {}", w[j]));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return domain(format!("weights sum to {sum}, expected 1"));
        }
        let coherent = w.windows(2).all(|p| p[1] >= p[0] - ORDER_TOL);
        Ok(Self {
            w,
            coherent,
            es_alpha: None,
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// True iff the weights are ascending, i.e. the measure is coherent.
    pub fn is_coherent(&self) -> bool {
        self.coherent
    }

    /// The expected-shortfall level this vector was built from, if any.
    pub fn es_alpha(&self) -> Option<f64> {
        self.es_alpha
    }

    pub(crate) fn require_coherent(&self) -> Result<()> {
        if self.coherent {
            Ok(())
        } else {
            domain("weight vector is not ascending; the measure is not coherent")
        }
    }

    /// Index of the first nonzero weight. Positions before it never contribute.
    pub(crate) fn first_active(&self) -> usize {
        self.w.iter().position(|v| *v > 0.0).unwrap_or(self.w.len())
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(w: Vec<f64>) -> Result<Self> {
        Self::new(w)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.w
    }
}

/// How a weight vector is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum DistortionSpec {
    /// Expected shortfall at level `alpha` in `(0, 1]`.
    ExpectedShortfall { alpha: f64 },
    /// Negative expectation, `r(t) = t`.
    Expectation,
    /// Piecewise-linear weight generating function given by `(t, r(t))` knots.
    Generator(Vec<(f64, f64)>),
    /// Weights given directly.
    Explicit(WeightVector),
}

/// Builds the weight vector of `spec` for a sample of size `n`.
pub fn make_weights(spec: &DistortionSpec, n: usize) -> Result<WeightVector> {
    if n == 0 {
        return domain("sample size must be positive");
    }
    match spec {
        DistortionSpec::ExpectedShortfall { alpha } => expected_shortfall_weights(*alpha, n),
        DistortionSpec::Expectation => WeightVector::new(vec![1.0 / n as f64; n]),
        DistortionSpec::Generator(grid) => weights_from_generator(grid, n),
        DistortionSpec::Explicit(w) => {
            if w.len() != n {
                return domain(format!(
                    "explicit weights have length {}, sample has {n} rows",
                    w.len()
                ));
            }
            Ok(w.clone())
        }
    }
}

/// Zonoid weights: `1/(n alpha)` on the top `floor(n alpha)` positions, the
/// fractional remainder on the position just below, zero elsewhere.
pub fn expected_shortfall_weights(alpha: f64, n: usize) -> Result<WeightVector> {
    if n == 0 {
        return domain("sample size must be positive");
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return domain(format!("expected-shortfall level {alpha} is outside (0, 1]"));
    }
    let mut na = n as f64 * alpha;
    // n*alpha lands a hair off an integer for levels like 0.7 or 0.05.
    if (na - na.round()).abs() < 1e-9 {
        na = na.round();
    }
    let k = na.floor() as usize;
    let frac = na - k as f64;
    let mut w = vec![0.0; n];
    for (j, wj) in w.iter_mut().enumerate() {
        let pos = j + 1;
        if pos + k > n {
            *wj = 1.0 / na;
        } else if pos + k == n {
            *wj = frac / na;
        }
    }
    let mut out = WeightVector::new(w)?;
    out.es_alpha = Some(alpha);
    Ok(out)
}

/// Weights from a weight generating function, linearly interpolated at `k/n`.
///
/// `w[i] = r((n-i)/n) - r((n-i-1)/n)` for zero-based `i`; the weight of the
/// worst outcome is the increment of `r` on `[0, 1/n]`. A concave `r` yields
/// ascending (coherent) weights.
pub fn weights_from_generator(grid: &[(f64, f64)], n: usize) -> Result<WeightVector> {
    if n == 0 {
        return domain("sample size must be positive");
    }
    validate_generator(grid)?;
    let r = |t: f64| interpolate(grid, t);
    let mut w: Vec<f64> = (0..n)
        .map(|i| {
            let hi = (n - i) as f64 / n as f64;
            let lo = (n - i - 1) as f64 / n as f64;
            (r(hi) - r(lo)).max(0.0)
        })
        .collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    WeightVector::new(w)
}

fn validate_generator(grid: &[(f64, f64)]) -> Result<()> {
    if grid.len() < 2 {
        return domain("generator grid needs at least two knots");
    }
    for (i, pair) in grid.windows(2).enumerate() {
        let ((t0, r0), (t1, r1)) = (pair[0], pair[1]);
        if !(t1 > t0) {
            return domain(format!("generator grid t is not increasing at knot {}", i + 1));
        }
        if r1 < r0 {
            return domain(format!("generator r(t) decreases at knot {}", i + 1));
        }
    }
    let (t_first, r_first) = grid[0];
    let (t_last, r_last) = grid[grid.len() - 1];
    if t_first.abs() > SUM_TOL || (t_last - 1.0).abs() > SUM_TOL {
        return domain("generator grid must span t in [0, 1]");
    }
    if r_first.abs() > SUM_TOL || (r_last - 1.0).abs() > SUM_TOL {
        return domain("generator must satisfy r(0) = 0 and r(1) = 1");
    }
    Ok(())
}

fn interpolate(grid: &[(f64, f64)], t: f64) -> f64 {
    let k = grid.partition_point(|(tk, _)| *tk <= t);
    if k == 0 {
        return grid[0].1;
    }
    if k == grid.len() {
        return grid[k - 1].1;
    }
    let (t0, r0) = grid[k - 1];
    let (t1, r1) = grid[k];
    r0 + (r1 - r0) * (t - t0) / (t1 - t0)
}

/// Order of `y` from largest to smallest, ties by original index.
pub(crate) fn descending_order(y: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..y.len()).collect();
    idx.sort_by(|&a, &b| y[b].partial_cmp(&y[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    idx
}

/// Empirical distortion risk `-sum_j w[j] y_[j]` with `y` sorted descending.
pub fn eval_risk(w: &WeightVector, y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return domain("sample must be nonempty");
    }
    if w.len() != y.len() {
        return domain(format!(
            "weight length {} does not match sample length {}",
            w.len(),
            y.len()
        ));
    }
    let order = descending_order(y);
    Ok(-order
        .iter()
        .zip(w.as_slice())
        .map(|(&i, wj)| wj * y[i])
        .sum::<f64>())
}

/// True iff every prefix sum of `a` is at most that of `b` (plus 1e-12).
///
/// For coherent weights this means the region of `b` is nested in the
/// region of `a`.
pub fn check_majorization(a: &WeightVector, b: &WeightVector) -> Result<bool> {
    if a.len() != b.len() {
        return domain(format!(
            "weight vectors differ in length: {} vs {}",
            a.len(),
            b.len()
        ));
    }
    let mut sa = 0.0;
    let mut sb = 0.0;
    for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
        sa += x;
        sb += y;
        if sa > sb + 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Empirical value at risk, `-y_(ceil(n alpha))` with `y` sorted ascending.
pub fn value_at_risk(y: &[f64], alpha: f64) -> Result<f64> {
    if y.is_empty() {
        return domain("sample must be nonempty");
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return domain(format!("level {alpha} is outside (0, 1]"));
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let k = ((y.len() as f64 * alpha - 1e-9).ceil() as usize).clamp(1, y.len());
    Ok(-sorted[k - 1])
}
