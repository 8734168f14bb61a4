//! Ordinary least squares with the diagnostics used for model selection:
//! adjusted R-squared, BIC, and variance inflation factors.
//!
//! The solver is SVD-based rather than normal equations; a design is
//! rejected as singular when the smallest-to-largest singular-value ratio
//! falls below 1e-10.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric::kahan_sum;

pub const RANK_TOLERANCE: f64 = 1e-10;

/// BIC value with perfect fits (rss = 0) ranked strictly ahead of any
/// positive-rss model instead of producing -inf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BicScore {
    PerfectFit,
    Value(f64),
}

impl BicScore {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            BicScore::PerfectFit => None,
            BicScore::Value(v) => Some(*v),
        }
    }
}

impl PartialOrd for BicScore {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        use BicScore::*;
        Some(match (self, other) {
            (PerfectFit, PerfectFit) => std::cmp::Ordering::Equal,
            (PerfectFit, Value(_)) => std::cmp::Ordering::Less,
            (Value(_), PerfectFit) => std::cmp::Ordering::Greater,
            (Value(a), Value(b)) => a.total_cmp(b),
        })
    }
}

/// BIC = n ln(rss/n) + (p + 1) ln(n).
///
/// The Gaussian likelihood constant n ln(2 pi) + n is dropped; it is
/// identical across candidates and cancels in comparisons. The intercept is
/// counted in p + 1.
pub fn bic(rss: f64, n: usize, p: usize) -> BicScore {
    assert!(n > 0 && rss >= 0.0);
    if rss == 0.0 {
        BicScore::PerfectFit
    } else {
        let n_f = n as f64;
        BicScore::Value(n_f * (rss / n_f).ln() + (p as f64 + 1.0) * n_f.ln())
    }
}

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub n: usize,
    pub p: usize,
    pub rss: f64,
    pub r2: f64,
    pub adj_r2: f64,
    pub bic: BicScore,
    pub residuals: Vec<f64>,
}

impl OlsFit {
    pub fn predict(&self, row: &[f64]) -> f64 {
        assert_eq!(row.len(), self.coefficients.len());
        self.intercept + kahan_sum(row.iter().zip(&self.coefficients).map(|(x, c)| x * c))
    }
}

/// Minimum-norm least squares via SVD. Returns (beta, rss, sv_ratio) where
/// sv_ratio is smallest/largest singular value.
fn lstsq(x: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, f64, f64) {
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    let eps = smax * 1e-13;
    let beta = svd.solve(y, eps).expect("SVD solve with U, V computed");
    let resid = y - x * &beta;
    let rss = kahan_sum(resid.iter().map(|r| r * r));
    (beta, rss.max(0.0), ratio)
}

/// Fit y on the given predictor columns plus an intercept.
pub fn ols_fit(columns: &[Vec<f64>], y: &[f64]) -> Result<OlsFit> {
    let n = y.len();
    let p = columns.len();
    if n < p + 2 {
        return Err(Error::SampleTooSmall { n, min: p + 2 });
    }
    for c in columns {
        assert_eq!(c.len(), n, "column length mismatch");
    }

    let mut x = DMatrix::zeros(n, p + 1);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for (j, c) in columns.iter().enumerate() {
            x[(i, j + 1)] = c[i];
        }
    }
    let yv = DVector::from_column_slice(y);
    let (beta, rss, ratio) = lstsq(&x, &yv);
    if ratio < RANK_TOLERANCE {
        return Err(Error::SingularDesign);
    }

    let mean_y = kahan_sum(y.iter().copied()) / n as f64;
    let tss = kahan_sum(y.iter().map(|v| (v - mean_y) * (v - mean_y)));
    let r2 = if tss == 0.0 { 1.0 } else { (1.0 - rss / tss).clamp(0.0, 1.0) };
    let adj_r2 = if n > p + 1 {
        1.0 - (1.0 - r2) * (n as f64 - 1.0) / (n as f64 - p as f64 - 1.0)
    } else {
        f64::NAN
    };
    let fitted = &x * &beta;
    let residuals: Vec<f64> = y.iter().zip(fitted.iter()).map(|(yi, fi)| yi - fi).collect();

    Ok(OlsFit {
        intercept: beta[0],
        coefficients: beta.iter().skip(1).copied().collect(),
        n,
        p,
        rss,
        r2,
        adj_r2,
        bic: bic(rss, n, p),
        residuals,
    })
}

/// Residual sum of squares of the least-squares fit of y on the selected
/// columns plus intercept, without the rank guard (min-norm solution for
/// degenerate designs). Used by the subset search where only rss matters.
pub fn subset_rss(columns: &[Vec<f64>], selected: &[usize], y: &[f64]) -> f64 {
    let n = y.len();
    let k = selected.len();
    let mut x = DMatrix::zeros(n, k + 1);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for (jj, &j) in selected.iter().enumerate() {
            x[(i, jj + 1)] = columns[j][i];
        }
    }
    let yv = DVector::from_column_slice(y);
    let (_, rss, _) = lstsq(&x, &yv);
    rss
}

/// Variance inflation factors: VIF_j = 1/(1 - R2_j) from regressing column
/// j on the remaining predictors plus intercept. Exactly collinear columns
/// yield `f64::INFINITY` rather than an error. A single predictor has
/// VIF = 1 by definition.
pub fn vif(columns: &[Vec<f64>]) -> Result<Vec<f64>> {
    if columns.is_empty() {
        return Err(Error::NoPredictors);
    }
    if columns.len() == 1 {
        return Ok(vec![1.0]);
    }
    let n = columns[0].len();
    let mut out = Vec::with_capacity(columns.len());
    for j in 0..columns.len() {
        let target = &columns[j];
        let mean = kahan_sum(target.iter().copied()) / n as f64;
        let tss = kahan_sum(target.iter().map(|v| (v - mean) * (v - mean)));
        if tss == 0.0 {
            // constant column duplicates the intercept
            out.push(f64::INFINITY);
            continue;
        }
        let others: Vec<usize> = (0..columns.len()).filter(|&i| i != j).collect();
        let rss = subset_rss(columns, &others, target);
        let one_minus_r2 = rss / tss;
        if one_minus_r2 < 1e-12 {
            out.push(f64::INFINITY);
        } else {
            out.push((1.0 / one_minus_r2).max(1.0));
        }
    }
    Ok(out)
}
