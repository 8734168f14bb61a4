//! Pixel-level model application: the ΔAGB map, the synthetic mean feeding
//! the MA estimator, and out-of-range accounting. Predictions are never
//! truncated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Epoch, TermKind};
use crate::numeric::{kahan_sum, KahanAccumulator};
use crate::plots::PlotTable;
use crate::raster::{ForestMask, RasterStack};
use crate::spectra::{PlotSpectra, SpectraFlag};
use crate::subset::ModelFit;

pub const MAP_NODATA: f32 = -9999.0;

/// Which mean feeds the synthetic component of the MA estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accounting {
    /// Forest predictions averaged over the whole population extent,
    /// non-forest counted as zero (default; consistent with zeroing
    /// non-forest plots).
    PopulationMean,
    /// Forest predictions averaged over forest pixels only.
    ForestMean,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapStats {
    pub n_total_pixels: usize,
    /// Forest-mask pixels that received a prediction.
    pub n_forest_pixels: usize,
    /// Forest-mask pixels skipped because an input band was nodata.
    pub n_nodata_in_mask: usize,
    /// Pixels where the mask itself is nodata.
    pub n_mask_nodata: usize,
    pub pixel_area_ha: f64,
    pub sum_forest_predictions_t_ha: f64,
    /// Population-mean convention (see `Accounting`).
    pub synthetic_mean_t_ha: f64,
    /// Share of predicted pixels where any model term falls outside its
    /// training range.
    pub out_of_range_fraction: f64,
    pub prediction_min_t_ha: f64,
    pub prediction_max_t_ha: f64,
}

/// intercept + Σ coef·term, with `term_values` aligned to `model.terms`.
/// Never truncated.
pub fn predict_point(model: &ModelFit, term_values: &[f64]) -> Result<f64> {
    if term_values.len() != model.terms.len() {
        let missing = model
            .terms
            .get(term_values.len())
            .map(|t| t.name())
            .unwrap_or_else(|| "extra values".into());
        return Err(Error::MissingTerm(missing));
    }
    Ok(model.intercept
        + kahan_sum(
            term_values
                .iter()
                .zip(&model.coefficients)
                .map(|(x, c)| x * c),
        ))
}

/// Per-plot model predictions already multiplied by the forest indicator:
/// non-forest plots and plots with unusable spectra get 0.
pub fn plot_predictions(model: &ModelFit, plots: &PlotTable, spectra: &PlotSpectra) -> Result<Vec<f64>> {
    assert_eq!(plots.len(), spectra.records.len());
    let mut out = Vec::with_capacity(plots.len());
    for (plot, rec) in plots.iter().zip(&spectra.records) {
        if !plot.forest || rec.flag != SpectraFlag::Ok {
            out.push(0.0);
            continue;
        }
        let lookup = |epoch: Epoch, band: &str| rec.values.get(&(epoch, band.to_string())).copied();
        let mut values = Vec::with_capacity(model.terms.len());
        for term in &model.terms {
            values.push(term.evaluate(&lookup).ok_or_else(|| Error::MissingTerm(term.name()))?);
        }
        out.push(predict_point(model, &values)?);
    }
    Ok(out)
}

/// Term resolved to band indices within a stack, for per-pixel evaluation.
enum ResolvedTerm {
    Raw { stack: usize, band: usize },
    Ndi { stack: usize, band_a: usize, band_b: usize },
}

fn resolve_terms(model: &ModelFit, stacks: &[&RasterStack]) -> Result<Vec<ResolvedTerm>> {
    let stack_for = |epoch: Epoch| -> Result<usize> {
        stacks
            .iter()
            .position(|s| s.epoch_label.parse::<Epoch>().ok() == Some(epoch))
            .ok_or_else(|| Error::MissingTerm(format!("no stack for epoch {epoch}")))
    };
    model
        .terms
        .iter()
        .map(|term| {
            let si = stack_for(term.epoch)?;
            let band_index = |name: &str| -> Result<usize> {
                stacks[si]
                    .band_names
                    .iter()
                    .position(|b| b == name)
                    .ok_or_else(|| Error::MissingTerm(term.name()))
            };
            Ok(match &term.kind {
                TermKind::Raw { band } => ResolvedTerm::Raw { stack: si, band: band_index(band)? },
                TermKind::Ndi { band_a, band_b } => ResolvedTerm::Ndi {
                    stack: si,
                    band_a: band_index(band_a)?,
                    band_b: band_index(band_b)?,
                },
            })
        })
        .collect()
}

#[derive(Default, Clone)]
struct BlockPartial {
    sum_pred: f64,
    n_forest: usize,
    n_nodata_in_mask: usize,
    n_mask_nodata: usize,
    n_out_of_range: usize,
    min: f64,
    max: f64,
}

/// Pixels per reduction block. Fixed so the merge order, and therefore the
/// result, is identical for any worker count.
const BLOCK_PIXELS: usize = 4096;

/// Apply the model to every pixel, masked to forest. Non-forest, nodata-in
/// -mask and mask-nodata pixels emit nodata. `workers` partitions the block
/// list across threads; output is bit-identical for any worker count.
pub fn predict_map(
    model: &ModelFit,
    stacks: &[&RasterStack],
    mask: &ForestMask,
    workers: usize,
) -> Result<(RasterStack, MapStats)> {
    for s in stacks {
        if !s.same_geometry(&mask.grid) {
            return Err(Error::GeometryMismatch(format!(
                "stack `{}` does not match the mask grid",
                s.epoch_label
            )));
        }
    }
    let resolved = resolve_terms(model, stacks)?;
    let npix = mask.grid.ncols * mask.grid.nrows;
    let nblocks = npix.div_ceil(BLOCK_PIXELS);
    let workers = workers.max(1);

    let mut out_values = vec![MAP_NODATA; npix];
    let mut partials: Vec<BlockPartial> = vec![BlockPartial::default(); nblocks];

    let eval_block = |block: usize, out: &mut [f32]| -> BlockPartial {
        let start = block * BLOCK_PIXELS;
        let end = (start + BLOCK_PIXELS).min(npix);
        let mut part = BlockPartial {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            ..Default::default()
        };
        let mut sum = KahanAccumulator::new();
        let mut term_values = vec![0.0f64; resolved.len()];
        'pixel: for idx in start..end {
            let mv = mask.grid.bands[0][idx];
            if mv == mask.grid.nodata {
                part.n_mask_nodata += 1;
                continue;
            }
            if mv != 1.0 {
                continue; // non-forest: nodata output, zero contribution
            }
            for (slot, term) in term_values.iter_mut().zip(&resolved) {
                *slot = match *term {
                    ResolvedTerm::Raw { stack, band } => {
                        let v = stacks[stack].bands[band][idx];
                        if v == stacks[stack].nodata {
                            part.n_nodata_in_mask += 1;
                            continue 'pixel;
                        }
                        v as f64
                    }
                    ResolvedTerm::Ndi { stack, band_a, band_b } => {
                        let a = stacks[stack].bands[band_a][idx];
                        let b = stacks[stack].bands[band_b][idx];
                        if a == stacks[stack].nodata || b == stacks[stack].nodata {
                            part.n_nodata_in_mask += 1;
                            continue 'pixel;
                        }
                        crate::features::ndi(a as f64, b as f64).0
                    }
                };
            }
            let out_of_range = term_values
                .iter()
                .zip(&model.training_ranges)
                .any(|(v, (lo, hi))| v < lo || v > hi);
            if out_of_range {
                part.n_out_of_range += 1;
            }
            let pred = model.intercept
                + kahan_sum(term_values.iter().zip(&model.coefficients).map(|(x, c)| x * c));
            out[idx - start] = pred as f32;
            part.n_forest += 1;
            part.min = part.min.min(pred);
            part.max = part.max.max(pred);
            sum.add(pred);
        }
        part.sum_pred = sum.total();
        part
    };

    if workers == 1 {
        for block in 0..nblocks {
            let start = block * BLOCK_PIXELS;
            let end = (start + BLOCK_PIXELS).min(npix);
            partials[block] = eval_block(block, &mut out_values[start..end]);
        }
    } else {
        let mut chunks: Vec<&mut [f32]> = out_values.chunks_mut(BLOCK_PIXELS).collect();
        let results: Vec<(usize, BlockPartial)> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            let eval = &eval_block;
            for (w, chunk_group) in split_round_robin(&mut chunks, workers).into_iter().enumerate() {
                handles.push(scope.spawn(move || {
                    chunk_group
                        .into_iter()
                        .map(|(block, out)| (block, eval(block, out)))
                        .collect::<Vec<_>>()
                }));
                let _ = w;
            }
            handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
        });
        for (block, part) in results {
            partials[block] = part;
        }
    }

    // deterministic merge in block order
    let mut sum = KahanAccumulator::new();
    let mut stats = BlockPartial {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
        ..Default::default()
    };
    for part in &partials {
        sum.add(part.sum_pred);
        stats.n_forest += part.n_forest;
        stats.n_nodata_in_mask += part.n_nodata_in_mask;
        stats.n_mask_nodata += part.n_mask_nodata;
        stats.n_out_of_range += part.n_out_of_range;
        stats.min = stats.min.min(part.min);
        stats.max = stats.max.max(part.max);
    }
    let sum_pred = sum.total();

    let population = npix - stats.n_nodata_in_mask - stats.n_mask_nodata;
    let synthetic_mean = if population == 0 { 0.0 } else { sum_pred / population as f64 };
    let map_stats = MapStats {
        n_total_pixels: npix,
        n_forest_pixels: stats.n_forest,
        n_nodata_in_mask: stats.n_nodata_in_mask,
        n_mask_nodata: stats.n_mask_nodata,
        pixel_area_ha: mask.grid.pixel_area_ha(),
        sum_forest_predictions_t_ha: sum_pred,
        synthetic_mean_t_ha: synthetic_mean,
        out_of_range_fraction: if stats.n_forest == 0 {
            0.0
        } else {
            stats.n_out_of_range as f64 / stats.n_forest as f64
        },
        prediction_min_t_ha: stats.min,
        prediction_max_t_ha: stats.max,
    };

    let grid = &mask.grid;
    let delta_map = RasterStack::new(
        grid.ncols,
        grid.nrows,
        grid.x0,
        grid.y0,
        grid.pixel_size,
        MAP_NODATA,
        vec!["dagb".into()],
        vec![out_values],
    )?;
    Ok((delta_map, map_stats))
}

fn split_round_robin<'a, 'b>(
    chunks: &'b mut Vec<&'a mut [f32]>,
    workers: usize,
) -> Vec<Vec<(usize, &'a mut [f32])>> {
    let mut groups: Vec<Vec<(usize, &mut [f32])>> = (0..workers).map(|_| Vec::new()).collect();
    for (block, chunk) in chunks.drain(..).enumerate() {
        groups[block % workers].push((block, chunk));
    }
    groups
}

/// The mean feeding the synthetic component of Eq. 4, under either
/// accounting convention.
pub fn synthetic_mean_for_estimator(stats: &MapStats, accounting: Accounting) -> Result<f64> {
    match accounting {
        Accounting::PopulationMean => {
            let denom = stats.n_total_pixels - stats.n_nodata_in_mask - stats.n_mask_nodata;
            if denom == 0 {
                return Err(Error::ZeroDenominator("no usable pixels in the extent".into()));
            }
            Ok(stats.sum_forest_predictions_t_ha / denom as f64)
        }
        Accounting::ForestMean => {
            if stats.n_forest_pixels == 0 {
                return Err(Error::ZeroDenominator("no forest pixels".into()));
            }
            Ok(stats.sum_forest_predictions_t_ha / stats.n_forest_pixels as f64)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Mode, TermSpec};
    use approx::assert_relative_eq;

    fn model(terms: Vec<TermSpec>, intercept: f64, coefficients: Vec<f64>, ranges: Vec<(f64, f64)>) -> ModelFit {
        ModelFit {
            mode: Mode::BiTemporal,
            terms,
            intercept,
            coefficients,
            n: 100,
            adj_r2: 0.5,
            bic: Some(0.0),
            max_vif: 1.0,
            training_ranges: ranges,
        }
    }

    fn sentinel2_bitemporal_fixture() -> ModelFit {
        model(
            vec![TermSpec::ndi("B7", "B12", Epoch::T1), TermSpec::ndi("B7", "B12", Epoch::T2)],
            -79.86,
            vec![-137.32, 284.0],
            vec![(-1.0, 1.0), (-1.0, 1.0)],
        )
    }

    #[test]
    fn predict_point_sentinel2_fixture() {
        let m = sentinel2_bitemporal_fixture();
        let v = predict_point(&m, &[0.5, 0.6]).unwrap();
        assert_relative_eq!(v, 21.88, max_relative = 1e-9);
    }

    #[test]
    fn predict_point_landsat_uni_fixture() {
        let m = model(
            vec![TermSpec::raw("B5", Epoch::T2), TermSpec::raw("B7", Epoch::T2)],
            -0.04,
            vec![0.0095, -0.04],
            vec![(0.0, 10000.0), (0.0, 10000.0)],
        );
        let v = predict_point(&m, &[1000.0, 500.0]).unwrap();
        assert_relative_eq!(v, -10.54, max_relative = 1e-9);
    }

    #[test]
    fn predict_point_zero_terms_gives_intercept() {
        let m = sentinel2_bitemporal_fixture();
        assert_relative_eq!(predict_point(&m, &[0.0, 0.0]).unwrap(), -79.86);
    }

    #[test]
    fn predict_point_missing_term_errors() {
        let m = sentinel2_bitemporal_fixture();
        assert!(matches!(predict_point(&m, &[0.5]), Err(Error::MissingTerm(_))));
    }

    fn grid_2x2(values: Vec<f32>, band: &str, epoch: &str) -> RasterStack {
        RasterStack::new(2, 2, 0.0, 20.0, 10.0, -9999.0, vec![band.into()], vec![values])
            .unwrap()
            .with_epoch(epoch)
    }

    fn mask_2x2(values: Vec<f32>) -> ForestMask {
        let stack = RasterStack::new(2, 2, 0.0, 20.0, 10.0, -9999.0, vec!["mask".into()], vec![values]).unwrap();
        ForestMask::from_stack(stack).unwrap()
    }

    #[test]
    fn mask_counting() {
        let m = model(
            vec![TermSpec::raw("B5", Epoch::T2)],
            1.0,
            vec![2.0],
            vec![(0.0, 100.0)],
        );
        let stack = grid_2x2(vec![1.0, 2.0, 3.0, 4.0], "B5", "t2");
        let mask = mask_2x2(vec![1.0, 0.0, 1.0, 1.0]);
        let (map, stats) = predict_map(&m, &[&stack], &mask, 1).unwrap();
        assert_eq!(stats.n_forest_pixels, 3);
        assert_eq!(map.bands[0][1], MAP_NODATA);
        assert_eq!(map.bands[0][0], 3.0);
    }

    #[test]
    fn constant_bands_constant_prediction() {
        let m = model(
            vec![TermSpec::raw("B5", Epoch::T2)],
            -1.0,
            vec![3.0],
            vec![(0.0, 100.0)],
        );
        let stack = grid_2x2(vec![2.0; 4], "B5", "t2");
        let mask = mask_2x2(vec![1.0; 4]);
        let (_, stats) = predict_map(&m, &[&stack], &mask, 1).unwrap();
        assert_relative_eq!(stats.synthetic_mean_t_ha, 5.0);
        assert_eq!(stats.prediction_min_t_ha, stats.prediction_max_t_ha);
    }

    #[test]
    fn out_of_range_fraction_quarter() {
        let m = model(
            vec![TermSpec::raw("B5", Epoch::T2)],
            0.0,
            vec![1.0],
            vec![(0.1, 0.4)],
        );
        let stack = grid_2x2(vec![0.2, 0.3, 0.5, 0.25], "B5", "t2");
        let mask = mask_2x2(vec![1.0; 4]);
        let (_, stats) = predict_map(&m, &[&stack], &mask, 1).unwrap();
        assert_eq!(stats.out_of_range_fraction, 0.25);
        // out-of-range pixels are still predicted, not truncated
        assert_relative_eq!(stats.prediction_max_t_ha, 0.5);
    }

    #[test]
    fn nodata_band_inside_mask_counted() {
        let m = model(
            vec![TermSpec::raw("B5", Epoch::T2)],
            0.0,
            vec![1.0],
            vec![(0.0, 100.0)],
        );
        let stack = grid_2x2(vec![-9999.0, 2.0, 3.0, 4.0], "B5", "t2");
        let mask = mask_2x2(vec![1.0; 4]);
        let (map, stats) = predict_map(&m, &[&stack], &mask, 1).unwrap();
        assert_eq!(stats.n_nodata_in_mask, 1);
        assert_eq!(stats.n_forest_pixels, 3);
        assert_eq!(map.bands[0][0], MAP_NODATA);
    }

    #[test]
    fn geometry_mismatch_rejected() {
        let m = model(vec![TermSpec::raw("B5", Epoch::T2)], 0.0, vec![1.0], vec![(0.0, 1.0)]);
        let stack = RasterStack::new(3, 2, 0.0, 20.0, 10.0, -9999.0, vec!["B5".into()], vec![vec![0.0; 6]])
            .unwrap()
            .with_epoch("t2");
        let mask = mask_2x2(vec![1.0; 4]);
        assert!(matches!(
            predict_map(&m, &[&stack], &mask, 1),
            Err(Error::GeometryMismatch(_))
        ));
    }

    #[test]
    fn synthetic_mean_conventions() {
        let stats = MapStats {
            n_total_pixels: 4,
            n_forest_pixels: 2,
            n_nodata_in_mask: 0,
            n_mask_nodata: 0,
            pixel_area_ha: 0.01,
            sum_forest_predictions_t_ha: 30.0,
            synthetic_mean_t_ha: 7.5,
            out_of_range_fraction: 0.0,
            prediction_min_t_ha: 10.0,
            prediction_max_t_ha: 20.0,
        };
        assert_relative_eq!(synthetic_mean_for_estimator(&stats, Accounting::PopulationMean).unwrap(), 7.5);
        assert_relative_eq!(synthetic_mean_for_estimator(&stats, Accounting::ForestMean).unwrap(), 15.0);
    }

    #[test]
    fn no_forest_pixels_conventions() {
        let stats = MapStats {
            n_total_pixels: 4,
            n_forest_pixels: 0,
            n_nodata_in_mask: 0,
            n_mask_nodata: 0,
            pixel_area_ha: 0.01,
            sum_forest_predictions_t_ha: 0.0,
            synthetic_mean_t_ha: 0.0,
            out_of_range_fraction: 0.0,
            prediction_min_t_ha: f64::INFINITY,
            prediction_max_t_ha: f64::NEG_INFINITY,
        };
        assert_eq!(synthetic_mean_for_estimator(&stats, Accounting::PopulationMean).unwrap(), 0.0);
        assert!(synthetic_mean_for_estimator(&stats, Accounting::ForestMean).is_err());
    }

    #[test]
    fn worker_count_does_not_change_output() {
        // grid larger than one block to exercise the merge
        let n = 130 * 130;
        let vals: Vec<f32> = (0..n).map(|i| (i % 97) as f32 * 0.013 + 0.1).collect();
        let stack = RasterStack::new(130, 130, 0.0, 1300.0, 10.0, -9999.0, vec!["B5".into()], vec![vals])
            .unwrap()
            .with_epoch("t2");
        let mask_vals: Vec<f32> = (0..n).map(|i| if i % 3 == 0 { 0.0 } else { 1.0 }).collect();
        let mask = ForestMask::from_stack(
            RasterStack::new(130, 130, 0.0, 1300.0, 10.0, -9999.0, vec!["mask".into()], vec![mask_vals]).unwrap(),
        )
        .unwrap();
        let m = model(vec![TermSpec::raw("B5", Epoch::T2)], -3.0, vec![7.0], vec![(0.0, 2.0)]);
        let (map1, stats1) = predict_map(&m, &[&stack], &mask, 1).unwrap();
        let (map4, stats4) = predict_map(&m, &[&stack], &mask, 4).unwrap();
        assert_eq!(map1.bands, map4.bands);
        assert_eq!(stats1.sum_forest_predictions_t_ha.to_bits(), stats4.sum_forest_predictions_t_ha.to_bits());
        assert_eq!(stats1.synthetic_mean_t_ha.to_bits(), stats4.synthetic_mean_t_ha.to_bits());
    }
}
