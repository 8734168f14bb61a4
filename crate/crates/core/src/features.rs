//! Candidate predictor generation: raw bands and all pairwise
//! normalized-difference indices, per epoch.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::{PlotSpectra, SpectraFlag};

/// Which mosaic epoch a predictor is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Epoch {
    T1,
    T2,
}

impl fmt::Display for Epoch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Epoch::T1 => write!(f, "t1"),
            Epoch::T2 => write!(f, "t2"),
        }
    }
}

impl std::str::FromStr for Epoch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "t1" => Ok(Epoch::T1),
            "t2" => Ok(Epoch::T2),
            other => Err(Error::InvalidConfig(format!("unknown epoch label `{other}`"))),
        }
    }
}

/// Whether predictors come from both epochs or only the end of the period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    BiTemporal,
    UniTemporal,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TermKind {
    Raw { band: String },
    /// Normalized-difference index of an unordered band pair, stored in
    /// band-list order so each pair appears exactly once.
    Ndi { band_a: String, band_b: String },
}

/// One candidate predictor: a raw band or a band index at an epoch.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TermSpec {
    #[serde(flatten)]
    pub kind: TermKind,
    pub epoch: Epoch,
}

impl TermSpec {
    pub fn raw(band: impl Into<String>, epoch: Epoch) -> Self {
        TermSpec {
            kind: TermKind::Raw { band: band.into() },
            epoch,
        }
    }

    pub fn ndi(band_a: impl Into<String>, band_b: impl Into<String>, epoch: Epoch) -> Self {
        TermSpec {
            kind: TermKind::Ndi {
                band_a: band_a.into(),
                band_b: band_b.into(),
            },
            epoch,
        }
    }

    /// Canonical name, e.g. `ndi(B7,B12)@t1` or `raw(B5)@t2`.
    pub fn name(&self) -> String {
        match &self.kind {
            TermKind::Raw { band } => format!("raw({band})@{}", self.epoch),
            TermKind::Ndi { band_a, band_b } => format!("ndi({band_a},{band_b})@{}", self.epoch),
        }
    }

    /// Evaluate the term from a band lookup. Returns `None` when a band is
    /// missing.
    pub fn evaluate(&self, lookup: &impl Fn(Epoch, &str) -> Option<f64>) -> Option<f64> {
        match &self.kind {
            TermKind::Raw { band } => lookup(self.epoch, band),
            TermKind::Ndi { band_a, band_b } => {
                let a = lookup(self.epoch, band_a)?;
                let b = lookup(self.epoch, band_b)?;
                Some(ndi(a, b).0)
            }
        }
    }
}

/// Normalized-difference index (a - b)/(a + b).
///
/// The degenerate input a + b == 0 yields 0 with the flag set, keeping
/// pixel maps total.
pub fn ndi(a: f64, b: f64) -> (f64, bool) {
    let sum = a + b;
    if sum == 0.0 {
        (0.0, true)
    } else {
        ((a - b) / sum, false)
    }
}

/// All candidate terms for the given band lists: per included epoch, every
/// raw band plus every unordered band pair as an index (B + B(B-1)/2 terms).
/// `uni_temporal` draws from t2 only; `bi_temporal` from both epochs
/// independently.
pub fn enumerate_terms(bands_t1: &[String], bands_t2: &[String], mode: Mode) -> Result<Vec<TermSpec>> {
    let mut terms = Vec::new();
    let epochs: &[(Epoch, &[String])] = match mode {
        Mode::BiTemporal => &[(Epoch::T1, bands_t1), (Epoch::T2, bands_t2)],
        Mode::UniTemporal => &[(Epoch::T2, bands_t2)],
    };
    for &(epoch, bands) in epochs {
        if bands.is_empty() {
            return Err(Error::EmptyBandList(epoch.to_string()));
        }
        for band in bands {
            terms.push(TermSpec::raw(band.clone(), epoch));
        }
        for i in 0..bands.len() {
            for j in i + 1..bands.len() {
                terms.push(TermSpec::ndi(bands[i].clone(), bands[j].clone(), epoch));
            }
        }
    }
    Ok(terms)
}

/// Design matrix of term evaluations over the usable plots.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub row_ids: Vec<String>,
    pub terms: Vec<TermSpec>,
    /// Row-major: values[row][col].
    pub values: Vec<Vec<f64>>,
    /// Per-column observed (min, max) over the retained rows.
    pub ranges: Vec<(f64, f64)>,
    /// Plots excluded because their spectra were flagged, with the reason.
    pub dropped: Vec<(String, String)>,
}

impl FeatureMatrix {
    pub fn nrows(&self) -> usize {
        self.values.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[j]).collect()
    }

    pub fn columns(&self) -> Vec<Vec<f64>> {
        (0..self.terms.len()).map(|j| self.column(j)).collect()
    }

    /// CSV export for audit: plot id plus canonical term names as header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("plot_id");
        for t in &self.terms {
            out.push(',');
            out.push_str(&t.name());
        }
        out.push('\n');
        for (id, row) in self.row_ids.iter().zip(&self.values) {
            out.push_str(id);
            for v in row {
                out.push(',');
                out.push_str(&format!("{v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluate every term for every plot with usable spectra.
pub fn build_design(spectra: &PlotSpectra, terms: &[TermSpec]) -> Result<FeatureMatrix> {
    // validate terms against the available bands up front
    for term in terms {
        let check = |epoch: Epoch, band: &str| -> Result<()> {
            let known = spectra
                .bands
                .get(&epoch)
                .map(|b| b.iter().any(|n| n == band))
                .unwrap_or(false);
            if known {
                Ok(())
            } else {
                Err(Error::UnknownBand {
                    band: band.to_string(),
                    epoch: epoch.to_string(),
                    term: term.name(),
                })
            }
        };
        match &term.kind {
            TermKind::Raw { band } => check(term.epoch, band)?,
            TermKind::Ndi { band_a, band_b } => {
                check(term.epoch, band_a)?;
                check(term.epoch, band_b)?;
            }
        }
    }

    let mut row_ids = Vec::new();
    let mut values = Vec::new();
    let mut dropped = Vec::new();
    for rec in &spectra.records {
        match rec.flag {
            SpectraFlag::Ok => {}
            SpectraFlag::OutOfBounds => {
                dropped.push((rec.plot_id.clone(), "out of raster extent".to_string()));
                continue;
            }
            SpectraFlag::Nodata => {
                dropped.push((rec.plot_id.clone(), "nodata pixel".to_string()));
                continue;
            }
        }
        let lookup = |epoch: Epoch, band: &str| rec.values.get(&(epoch, band.to_string())).copied();
        let row: Vec<f64> = terms
            .iter()
            .map(|t| t.evaluate(&lookup).expect("bands validated above"))
            .collect();
        row_ids.push(rec.plot_id.clone());
        values.push(row);
    }

    let mut ranges = Vec::with_capacity(terms.len());
    for j in 0..terms.len() {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for row in &values {
            lo = lo.min(row[j]);
            hi = hi.max(row[j]);
        }
        ranges.push((lo, hi));
    }

    Ok(FeatureMatrix {
        row_ids,
        terms: terms.to_vec(),
        values,
        ranges,
        dropped,
    })
}

/// Band names per epoch, as used by term enumeration.
pub type BandSets = BTreeMap<Epoch, Vec<String>>;
