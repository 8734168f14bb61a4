//! Design-based estimation of total net ΔAGB under simple random sampling:
//! basic expansion (BE) total and variance, model-assisted (MA) total with
//! residual correction, relative efficiency, and normal-approximation
//! confidence intervals.
//!
//! Internal totals are in tonnes (area in ha, densities in t/ha); the
//! report converts to Mt by dividing by 1e6 exactly once.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{kahan_sum, mean};
use crate::plots::PlotTable;

pub const Z_95: f64 = 1.96;
pub const TONNES_PER_MT: f64 = 1e6;

/// BE estimator: t = (A/n) Σ y_i, Var = A² S²/n with S² the n-1 sample
/// variance. Inputs in t/ha and ha, outputs in t and t².
pub fn be_total(y: &[f64], area_ha: f64) -> Result<(f64, f64)> {
    let n = y.len();
    if n < 2 {
        return Err(Error::VarianceUndefined(n));
    }
    let total = area_ha / n as f64 * kahan_sum(y.iter().copied());
    // written as A²/(n(n-1))·Σ(y-ȳ)², the exact expression the MA variance
    // uses, so the null-model collapse is bitwise
    let y_bar = mean(y);
    let ss = kahan_sum(y.iter().map(|v| (v - y_bar) * (v - y_bar)));
    let var = area_ha * area_ha / (n as f64 * (n as f64 - 1.0)) * ss;
    Ok((total, var))
}

/// MA components in tonnes.
#[derive(Debug, Clone, Copy)]
pub struct MaEstimate {
    pub total: f64,
    pub variance: f64,
    /// A * synthetic_mean.
    pub synthetic: f64,
    /// (A/n) Σ ε_i.
    pub correction: f64,
}

/// MA estimator: t = A·ȳ_synthetic + (A/n) Σ ε_i with ε_i = y_i - ŷ_i·I_i,
/// Var = A²/(n(n-1)) Σ (ε_i - ε̄)².
///
/// `predictions` must already carry the forest indicator: ŷ_i·I_i, with 0
/// for non-forest plots and for plots whose spectra were unusable.
pub fn ma_total(y: &[f64], predictions: &[f64], synthetic_mean: f64, area_ha: f64) -> Result<MaEstimate> {
    let n = y.len();
    assert_eq!(predictions.len(), n, "one prediction per plot");
    if n < 2 {
        return Err(Error::VarianceUndefined(n));
    }
    let residuals: Vec<f64> = y.iter().zip(predictions).map(|(yi, pi)| yi - pi).collect();
    let synthetic = area_ha * synthetic_mean;
    let correction = area_ha / n as f64 * kahan_sum(residuals.iter().copied());
    let eps_bar = mean(&residuals);
    let ss = kahan_sum(residuals.iter().map(|e| (e - eps_bar) * (e - eps_bar)));
    let variance = area_ha * area_ha / (n as f64 * (n as f64 - 1.0)) * ss;
    Ok(MaEstimate {
        total: synthetic + correction,
        variance,
        synthetic,
        correction,
    })
}

/// Var(BE)/Var(MA); > 1 means the model-assisted estimate is more precise.
/// Returns +inf when var_ma is zero.
pub fn relative_efficiency(var_be: f64, var_ma: f64) -> f64 {
    if var_ma == 0.0 {
        f64::INFINITY
    } else {
        var_be / var_ma
    }
}

/// total ± 1.96·se.
pub fn confidence_interval(total: f64, se: f64) -> (f64, f64) {
    assert!(se >= 0.0);
    (total - Z_95 * se, total + Z_95 * se)
}

/// Full estimate report, serialized with units embedded in the field names.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub area_ha: f64,
    pub n: usize,
    #[serde(rename = "t_be_Mt")]
    pub t_be_mt: f64,
    #[serde(rename = "var_be_Mt2")]
    pub var_be_mt2: f64,
    #[serde(rename = "se_be_Mt")]
    pub se_be_mt: f64,
    #[serde(rename = "t_ma_Mt")]
    pub t_ma_mt: f64,
    #[serde(rename = "var_ma_Mt2")]
    pub var_ma_mt2: f64,
    #[serde(rename = "se_ma_Mt")]
    pub se_ma_mt: f64,
    #[serde(rename = "synthetic_component_Mt")]
    pub synthetic_component_mt: f64,
    #[serde(rename = "correction_component_Mt")]
    pub correction_component_mt: f64,
    pub re: f64,
    #[serde(rename = "ci95_be_Mt")]
    pub ci95_be_mt: (f64, f64),
    #[serde(rename = "ci95_ma_Mt")]
    pub ci95_ma_mt: (f64, f64),
}

impl EstimateReport {
    /// Assemble from per-plot data. Non-forest plots enter with y_i = 0
    /// regardless of their raw AGB columns.
    pub fn compute(
        plots: &PlotTable,
        predictions: &[f64],
        synthetic_mean: f64,
        area_ha: f64,
    ) -> Result<Self> {
        let y: Vec<f64> = plots.iter().map(|p| p.effective_delta()).collect();
        let (t_be, var_be) = be_total(&y, area_ha)?;
        let ma = ma_total(&y, predictions, synthetic_mean, area_ha)?;
        Ok(Self::from_totals(y.len(), area_ha, t_be, var_be, ma))
    }

    pub fn from_totals(n: usize, area_ha: f64, t_be: f64, var_be: f64, ma: MaEstimate) -> Self {
        let mt = TONNES_PER_MT;
        let se_be = var_be.sqrt();
        let se_ma = ma.variance.sqrt();
        EstimateReport {
            area_ha,
            n,
            t_be_mt: t_be / mt,
            var_be_mt2: var_be / (mt * mt),
            se_be_mt: se_be / mt,
            t_ma_mt: ma.total / mt,
            var_ma_mt2: ma.variance / (mt * mt),
            se_ma_mt: se_ma / mt,
            synthetic_component_mt: ma.synthetic / mt,
            correction_component_mt: ma.correction / mt,
            re: relative_efficiency(var_be, ma.variance),
            ci95_be_mt: confidence_interval(t_be / mt, se_be / mt),
            ci95_ma_mt: confidence_interval(ma.total / mt, se_ma / mt),
        }
    }
}
