//! Extraction of per-plot band values from the raster stacks.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::features::Epoch;
use crate::plots::PlotTable;
use crate::raster::{locate_pixel, RasterStack};

/// Why a plot's spectra are unusable for model fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectraFlag {
    Ok,
    OutOfBounds,
    Nodata,
}

/// Band values for one plot, across epochs.
#[derive(Debug, Clone)]
pub struct PlotSpectrum {
    pub plot_id: String,
    pub values: BTreeMap<(Epoch, String), f64>,
    pub flag: SpectraFlag,
}

impl PlotSpectrum {
    pub fn new(plot_id: impl Into<String>) -> Self {
        PlotSpectrum {
            plot_id: plot_id.into(),
            values: BTreeMap::new(),
            flag: SpectraFlag::Ok,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct PlotSpectra {
    /// Band names available per epoch.
    pub bands: BTreeMap<Epoch, Vec<String>>,
    /// One record per plot, in plot-table order.
    pub records: Vec<PlotSpectrum>,
}

impl PlotSpectra {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Read the pixel containing each plot center from every band of every
/// stack. Plots outside the grid or on a nodata pixel are flagged, not
/// dropped; the flag is carried into the feature matrix.
pub fn extract_plot_spectra(plots: &PlotTable, stacks: &[&RasterStack]) -> Result<PlotSpectra> {
    for pair in stacks.windows(2) {
        if !pair[0].same_geometry(pair[1]) {
            return Err(Error::GeometryMismatch(format!(
                "stacks `{}` and `{}` differ",
                pair[0].epoch_label, pair[1].epoch_label
            )));
        }
    }
    let mut out = PlotSpectra::new();
    let mut epochs = Vec::new();
    for stack in stacks {
        let epoch: Epoch = stack.epoch_label.parse()?;
        out.bands.insert(epoch, stack.band_names.clone());
        epochs.push(epoch);
    }

    for plot in plots {
        let mut rec = PlotSpectrum::new(plot.plot_id.clone());
        for (stack, &epoch) in stacks.iter().zip(&epochs) {
            match locate_pixel(stack, plot.x, plot.y) {
                None => {
                    rec.flag = SpectraFlag::OutOfBounds;
                }
                Some((row, col)) => {
                    for (bi, name) in stack.band_names.iter().enumerate() {
                        let v = stack.value(bi, row, col);
                        if v == stack.nodata {
                            rec.flag = SpectraFlag::Nodata;
                        }
                        rec.values.insert((epoch, name.clone()), v as f64);
                    }
                }
            }
        }
        out.records.push(rec);
    }
    Ok(out)
}
