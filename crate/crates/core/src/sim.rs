//! Seeded synthetic-population generator and Monte Carlo harness for
//! validating the estimators.
//!
//! The generative model is deliberately minimal: forest pixels start from a
//! clamped-normal AGB, are harvested with a Bernoulli probability (losing a
//! fixed fraction) or grow by a normal increment, and a SWIR-like band is a
//! decreasing linear function of AGB plus noise, so it correlates
//! negatively with ΔAGB. No ecological realism is claimed.
//!
//! Randomness: every stream is a ChaCha12 generator seeded through rand's
//! `seed_from_u64` (splitmix64 expansion) from the configured 64-bit seed;
//! replicate r uses seed `mix(seed, r)` with a splitmix64-style multiply,
//! so replicates are independent of scheduling. Determinism is guaranteed
//! within this implementation, not across languages.

use rand::prelude::*;
use rand::seq::index::sample as index_sample;
use rand_chacha::ChaCha12Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{be_total, confidence_interval, ma_total, relative_efficiency};
use crate::features::{enumerate_terms, Epoch, Mode};
use crate::numeric::{kahan_sum, mean, sample_variance};
use crate::plots::{PlotRecord, PlotTable};
use crate::raster::{ForestMask, RasterStack};
use crate::spectra::{PlotSpectra, PlotSpectrum};
use crate::subset::{select_model, ModelFit};

/// How band values relate to the truth. `Quadratic` makes ΔAGB a quadratic
/// function of the SWIR-like band so that a linear model is deliberately
/// misspecified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BandModel {
    #[default]
    Linear,
    Quadratic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_pixels: usize,
    /// m.
    pub pixel_size: f64,
    pub bands_t1: Vec<String>,
    pub bands_t2: Vec<String>,
    /// t/ha over the period.
    pub growth_mean: f64,
    pub growth_sd: f64,
    pub harvest_probability: f64,
    pub harvest_loss_fraction: f64,
    /// t/ha.
    pub initial_agb_mean: f64,
    pub initial_agb_sd: f64,
    /// reflectance units.
    pub spectral_noise_sd: f64,
    pub forest_fraction: f64,
    pub seed: u64,
    #[serde(default)]
    pub band_model: BandModel,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_pixels: 10_000,
            pixel_size: 30.0,
            bands_t1: vec!["swir".into(), "nir".into()],
            bands_t2: vec!["swir".into(), "nir".into()],
            growth_mean: 10.0,
            growth_sd: 5.0,
            harvest_probability: 0.3,
            harvest_loss_fraction: 0.8,
            initial_agb_mean: 120.0,
            initial_agb_sd: 40.0,
            spectral_noise_sd: 0.01,
            forest_fraction: 0.7,
            seed: 1,
            band_model: BandModel::Linear,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if self.n_pixels == 0 {
            bad.push("n_pixels must be >= 1");
        }
        if !(self.pixel_size > 0.0) {
            bad.push("pixel_size must be > 0");
        }
        for (field, v) in [
            ("harvest_probability", self.harvest_probability),
            ("harvest_loss_fraction", self.harvest_loss_fraction),
            ("forest_fraction", self.forest_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                bad.push(match field {
                    "harvest_probability" => "harvest_probability must be in [0,1]",
                    "harvest_loss_fraction" => "harvest_loss_fraction must be in [0,1]",
                    _ => "forest_fraction must be in [0,1]",
                });
            }
        }
        for (msg, v) in [
            ("growth_sd must be >= 0", self.growth_sd),
            ("initial_agb_sd must be >= 0", self.initial_agb_sd),
            ("spectral_noise_sd must be >= 0", self.spectral_noise_sd),
        ] {
            if !(v >= 0.0) {
                bad.push(msg);
            }
        }
        if self.bands_t1.is_empty() || self.bands_t2.is_empty() {
            bad.push("band lists must be non-empty");
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(bad.join("; ")))
        }
    }

    pub fn pixel_area_ha(&self) -> f64 {
        self.pixel_size * self.pixel_size / 10_000.0
    }

    /// Total land area covered by the population extent (ha).
    pub fn area_ha(&self) -> f64 {
        self.n_pixels as f64 * self.pixel_area_ha()
    }
}

/// Pixel-level truth plus synthetic band values.
#[derive(Debug, Clone)]
pub struct SyntheticPopulation {
    pub config: SimConfig,
    pub ncols: usize,
    pub nrows: usize,
    pub forest: Vec<bool>,
    pub agb_t1: Vec<f64>,
    pub agb_t2: Vec<f64>,
    pub delta: Vec<f64>,
    /// bands_t1[band][pixel].
    pub bands_t1: Vec<Vec<f64>>,
    pub bands_t2: Vec<Vec<f64>>,
    /// Exact population sum of forest deltas times pixel area (t).
    pub true_total_t: f64,
}

// SWIR-like response: reflectance drops with standing biomass.
const SWIR_BASE: f64 = 0.9;
const SWIR_SLOPE_PER_T_HA: f64 = 0.002;
// secondary bands carry a weaker positive relation
const AUX_BASE: f64 = 0.2;
const AUX_SLOPE_PER_T_HA: f64 = 0.0005;
// quadratic mode: delta = Q0 + Q1 u + Q2 u^2 with u the t2 SWIR band
const Q0: f64 = 25.0;
const Q1: f64 = -30.0;
const Q2: f64 = -80.0;

fn band_value(band_index: usize, agb: f64, noise: f64) -> f64 {
    if band_index == 0 {
        SWIR_BASE - SWIR_SLOPE_PER_T_HA * agb + noise
    } else {
        AUX_BASE + AUX_SLOPE_PER_T_HA * agb + noise
    }
}

fn mix_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over seed + stream increment
    let mut z = seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic function of the config seed.
pub fn gen_population(config: &SimConfig) -> Result<SyntheticPopulation> {
    config.validate()?;
    let n = config.n_pixels;
    let ncols = (n as f64).sqrt().ceil() as usize;
    let nrows = n.div_ceil(ncols);
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(config.seed, 0));

    let mut forest = Vec::with_capacity(n);
    let mut agb_t1 = Vec::with_capacity(n);
    let mut agb_t2 = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    let mut bands_t1: Vec<Vec<f64>> = vec![Vec::with_capacity(n); config.bands_t1.len()];
    let mut bands_t2: Vec<Vec<f64>> = vec![Vec::with_capacity(n); config.bands_t2.len()];

    for _ in 0..n {
        let is_forest = rng.gen_bool(config.forest_fraction);
        let (a1, a2, d, u) = if !is_forest {
            (0.0, 0.0, 0.0, 0.0)
        } else {
            match config.band_model {
                BandModel::Linear => {
                    let a1 = (config.initial_agb_mean + draw_normal(&mut rng, config.initial_agb_sd)).max(0.0);
                    let a2 = if rng.gen_bool(config.harvest_probability) {
                        a1 * (1.0 - config.harvest_loss_fraction)
                    } else {
                        (a1 + config.growth_mean + draw_normal(&mut rng, config.growth_sd)).max(0.0)
                    };
                    (a1, a2, a2 - a1, 0.0)
                }
                BandModel::Quadratic => {
                    let u: f64 = rng.gen_range(0.0..1.0);
                    let d = Q0 + Q1 * u + Q2 * u * u + draw_normal(&mut rng, config.growth_sd);
                    let a1 = config.initial_agb_mean;
                    let a2 = (a1 + d).max(0.0);
                    (a1, a2, a2 - a1, u)
                }
            }
        };
        forest.push(is_forest);
        agb_t1.push(a1);
        agb_t2.push(a2);
        delta.push(d);

        for (bi, col) in bands_t1.iter_mut().enumerate() {
            col.push(band_value(bi, a1, draw_normal(&mut rng, config.spectral_noise_sd)));
        }
        for (bi, col) in bands_t2.iter_mut().enumerate() {
            let v = match (config.band_model, bi) {
                (BandModel::Quadratic, 0) => u + draw_normal(&mut rng, config.spectral_noise_sd),
                _ => band_value(bi, a2, draw_normal(&mut rng, config.spectral_noise_sd)),
            };
            col.push(v);
        }
    }

    let pixel_area = config.pixel_area_ha();
    let true_total_t = kahan_sum(delta.iter().map(|d| d * pixel_area));

    Ok(SyntheticPopulation {
        config: config.clone(),
        ncols,
        nrows,
        forest,
        agb_t1,
        agb_t2,
        delta,
        bands_t1,
        bands_t2,
        true_total_t,
    })
}

// Normal::new(0, 0) is invalid; sd = 0 degenerates to a point mass.
fn draw_normal(rng: &mut impl Rng, sd: f64) -> f64 {
    if sd > 0.0 {
        Normal::new(0.0, sd).unwrap().sample(rng)
    } else {
        0.0
    }
}

impl SyntheticPopulation {
    pub fn n_pixels(&self) -> usize {
        self.config.n_pixels
    }

    /// Pixel-center map coordinates (origin at the top-left of the grid).
    pub fn pixel_center(&self, idx: usize) -> (f64, f64) {
        let ps = self.config.pixel_size;
        let (row, col) = (idx / self.ncols, idx % self.ncols);
        let x = (col as f64 + 0.5) * ps;
        let y = self.nrows as f64 * ps - (row as f64 + 0.5) * ps;
        (x, y)
    }

    /// Plot records for the given pixels.
    pub fn plots_for(&self, indices: &[usize]) -> PlotTable {
        indices
            .iter()
            .map(|&i| {
                let (x, y) = self.pixel_center(i);
                PlotRecord::new(format!("px{i}"), x, y, self.forest[i], self.agb_t1[i], self.agb_t2[i])
            })
            .collect()
    }

    /// Spectra for the given pixels, straight from the synthetic bands.
    pub fn spectra_for(&self, indices: &[usize]) -> PlotSpectra {
        let mut out = PlotSpectra::new();
        out.bands.insert(Epoch::T1, self.config.bands_t1.clone());
        out.bands.insert(Epoch::T2, self.config.bands_t2.clone());
        for &i in indices {
            let mut rec = PlotSpectrum::new(format!("px{i}"));
            for (name, col) in self.config.bands_t1.iter().zip(&self.bands_t1) {
                rec.values.insert((Epoch::T1, name.clone()), col[i]);
            }
            for (name, col) in self.config.bands_t2.iter().zip(&self.bands_t2) {
                rec.values.insert((Epoch::T2, name.clone()), col[i]);
            }
            out.records.push(rec);
        }
        out
    }

    /// Materialize the population as BGRID-compatible stacks and mask
    /// (pixels beyond n_pixels in the last row are nodata).
    pub fn to_rasters(&self) -> (RasterStack, RasterStack, ForestMask) {
        let npix_grid = self.ncols * self.nrows;
        let nodata = -9999.0f32;
        let ps = self.config.pixel_size;
        let y0 = self.nrows as f64 * ps;
        let grid_band = |col: &Vec<f64>| -> Vec<f32> {
            (0..npix_grid)
                .map(|i| if i < self.n_pixels() { col[i] as f32 } else { nodata })
                .collect()
        };
        let make = |names: &[String], cols: &[Vec<f64>], label: &str| {
            RasterStack::new(
                self.ncols,
                self.nrows,
                0.0,
                y0,
                ps,
                nodata,
                names.to_vec(),
                cols.iter().map(grid_band).collect(),
            )
            .expect("valid synthetic grid")
            .with_epoch(label)
        };
        let t1 = make(&self.config.bands_t1, &self.bands_t1, "t1");
        let t2 = make(&self.config.bands_t2, &self.bands_t2, "t2");
        let mask_vals: Vec<f32> = (0..npix_grid)
            .map(|i| {
                if i >= self.n_pixels() {
                    nodata
                } else if self.forest[i] {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let mask = ForestMask::from_stack(
            RasterStack::new(self.ncols, self.nrows, 0.0, y0, ps, nodata, vec!["mask".into()], vec![mask_vals])
                .expect("valid mask grid"),
        )
        .expect("mask values in domain");
        (t1, t2, mask)
    }
}

/// n distinct pixels uniformly without replacement; plots at pixel centers.
pub fn draw_srs(population: &SyntheticPopulation, n: usize, seed: u64) -> Result<PlotTable> {
    Ok(population.plots_for(&draw_srs_indices(population, n, seed)?))
}

pub fn draw_srs_indices(population: &SyntheticPopulation, n: usize, seed: u64) -> Result<Vec<usize>> {
    let total = population.n_pixels();
    if n > total {
        return Err(Error::SampleExceedsPopulation { n, population: total });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seed(seed, 1));
    Ok(index_sample(&mut rng, total, n).into_vec())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub t_be_t: f64,
    pub var_be_t2: f64,
    pub t_ma_t: f64,
    pub var_ma_t2: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MCReport {
    pub replicates: usize,
    pub failures: usize,
    pub n: usize,
    pub true_total_t: f64,
    pub mean_t_be_t: f64,
    pub bias_be_t: f64,
    pub mcse_be_t: f64,
    pub emp_var_be_t2: f64,
    pub mean_var_hat_be_t2: f64,
    /// mean(Var̂_BE)/empirical Var(t_be).
    pub calibration_be: f64,
    pub mean_t_ma_t: f64,
    pub bias_ma_t: f64,
    pub mcse_ma_t: f64,
    pub emp_var_ma_t2: f64,
    pub mean_var_hat_ma_t2: f64,
    pub calibration_ma: f64,
    /// empirical Var(t_be)/empirical Var(t_ma).
    pub empirical_re: f64,
    pub mean_estimated_re: f64,
    pub coverage_be: f64,
    pub coverage_ma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<Vec<ReplicateRecord>>,
}

#[derive(Debug, Clone)]
pub struct McOptions {
    pub n: usize,
    pub replicates: usize,
    pub mode: Mode,
    pub k_max: usize,
    pub m: usize,
    pub keep_draws: bool,
}

impl McOptions {
    pub fn new(n: usize, replicates: usize) -> Self {
        McOptions {
            n,
            replicates,
            mode: Mode::BiTemporal,
            k_max: 2,
            m: 10,
            keep_draws: false,
        }
    }
}

/// Fit-and-estimate for one sample of the population; returns totals and
/// variance estimates in t and t².
pub fn run_pipeline_once(
    population: &SyntheticPopulation,
    indices: &[usize],
    mode: Mode,
    k_max: usize,
    m: usize,
) -> Result<(ReplicateRecord, ModelFit)> {
    let cfg = &population.config;
    let plots = population.plots_for(indices);
    let area = cfg.area_ha();

    // fit on forest plots only
    let forest_idx: Vec<usize> = indices.iter().copied().filter(|&i| population.forest[i]).collect();
    let spectra_fit = population.spectra_for(&forest_idx);
    let terms = enumerate_terms(&cfg.bands_t1, &cfg.bands_t2, mode)?;
    let design = crate::features::build_design(&spectra_fit, &terms)?;
    let y_fit: Vec<f64> = forest_idx.iter().map(|&i| population.delta[i]).collect();
    let model = select_model(&design, &y_fit, mode, k_max, m)?;

    // synthetic mean over the population (non-forest contributes zero)
    let lookup_for = |i: usize| {
        move |epoch: Epoch, band: &str| -> Option<f64> {
            let (names, cols) = match epoch {
                Epoch::T1 => (&cfg.bands_t1, &population.bands_t1),
                Epoch::T2 => (&cfg.bands_t2, &population.bands_t2),
            };
            let bi = names.iter().position(|b| b == band)?;
            Some(cols[bi][i])
        }
    };
    let mut sum = crate::numeric::KahanAccumulator::new();
    for i in 0..population.n_pixels() {
        if population.forest[i] {
            let values: Vec<f64> = model
                .terms
                .iter()
                .map(|t| t.evaluate(&lookup_for(i)).expect("sim bands present"))
                .collect();
            sum.add(crate::mapping::predict_point(&model, &values)?);
        }
    }
    let synthetic_mean = sum.total() / population.n_pixels() as f64;

    // per-plot predictions with the forest indicator applied
    let mut predictions = Vec::with_capacity(indices.len());
    for &i in indices {
        if population.forest[i] {
            let values: Vec<f64> = model
                .terms
                .iter()
                .map(|t| t.evaluate(&lookup_for(i)).expect("sim bands present"))
                .collect();
            predictions.push(crate::mapping::predict_point(&model, &values)?);
        } else {
            predictions.push(0.0);
        }
    }

    let y: Vec<f64> = plots.iter().map(|p| p.effective_delta()).collect();
    let (t_be, var_be) = be_total(&y, area)?;
    let ma = ma_total(&y, &predictions, synthetic_mean, area)?;
    Ok((
        ReplicateRecord {
            t_be_t: t_be,
            var_be_t2: var_be,
            t_ma_t: ma.total,
            var_ma_t2: ma.variance,
        },
        model,
    ))
}

/// Repeated-SRS experiment over one fixed synthetic population.
pub fn monte_carlo(config: &SimConfig, options: &McOptions) -> Result<MCReport> {
    if options.replicates < 1 {
        return Err(Error::InvalidConfig("replicates must be >= 1".into()));
    }
    let population = gen_population(config)?;
    let mut records = Vec::with_capacity(options.replicates);
    let mut failures = 0usize;
    let mut covered_be = 0usize;
    let mut covered_ma = 0usize;
    let mut re_sum = crate::numeric::KahanAccumulator::new();

    for r in 0..options.replicates {
        let rep_seed = mix_seed(config.seed, 0x5EED_0000 + r as u64);
        let indices = draw_srs_indices(&population, options.n, rep_seed)?;
        match run_pipeline_once(&population, &indices, options.mode, options.k_max, options.m) {
            Ok((rec, _)) => {
                let (lo, hi) = confidence_interval(rec.t_be_t, rec.var_be_t2.sqrt());
                if lo <= population.true_total_t && population.true_total_t <= hi {
                    covered_be += 1;
                }
                let (lo, hi) = confidence_interval(rec.t_ma_t, rec.var_ma_t2.sqrt());
                if lo <= population.true_total_t && population.true_total_t <= hi {
                    covered_ma += 1;
                }
                re_sum.add(relative_efficiency(rec.var_be_t2, rec.var_ma_t2));
                records.push(rec);
            }
            Err(_) => failures += 1,
        }
    }
    if records.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "too few successful replicates ({} of {})",
            records.len(),
            options.replicates
        )));
    }

    let t_be: Vec<f64> = records.iter().map(|r| r.t_be_t).collect();
    let t_ma: Vec<f64> = records.iter().map(|r| r.t_ma_t).collect();
    let var_be_hat: Vec<f64> = records.iter().map(|r| r.var_be_t2).collect();
    let var_ma_hat: Vec<f64> = records.iter().map(|r| r.var_ma_t2).collect();
    let done = records.len();

    let emp_var_be = sample_variance(&t_be);
    let emp_var_ma = sample_variance(&t_ma);
    let mean_be = mean(&t_be);
    let mean_ma = mean(&t_ma);

    Ok(MCReport {
        replicates: options.replicates,
        failures,
        n: options.n,
        true_total_t: population.true_total_t,
        mean_t_be_t: mean_be,
        bias_be_t: mean_be - population.true_total_t,
        mcse_be_t: (emp_var_be / done as f64).sqrt(),
        emp_var_be_t2: emp_var_be,
        mean_var_hat_be_t2: mean(&var_be_hat),
        calibration_be: mean(&var_be_hat) / emp_var_be,
        mean_t_ma_t: mean_ma,
        bias_ma_t: mean_ma - population.true_total_t,
        mcse_ma_t: (emp_var_ma / done as f64).sqrt(),
        emp_var_ma_t2: emp_var_ma,
        mean_var_hat_ma_t2: mean(&var_ma_hat),
        calibration_ma: mean(&var_ma_hat) / emp_var_ma,
        empirical_re: emp_var_be / emp_var_ma,
        mean_estimated_re: re_sum.total() / done as f64,
        coverage_be: covered_be as f64 / done as f64,
        coverage_ma: covered_ma as f64 / done as f64,
        draws: if options.keep_draws { Some(records) } else { None },
    })
}

/// Pearson correlation, used to audit the synthetic band-delta relation.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let cov = kahan_sum(a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)));
    let va = kahan_sum(a.iter().map(|x| (x - ma) * (x - ma)));
    let vb = kahan_sum(b.iter().map(|y| (y - mb) * (y - mb)));
    cov / (va * vb).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SimConfig {
        SimConfig {
            n_pixels: 2_000,
            seed: 99,
            ..SimConfig::default()
        }
    }

    #[test]
    fn same_seed_identical_population() {
        let cfg = small_config();
        let a = gen_population(&cfg).unwrap();
        let b = gen_population(&cfg).unwrap();
        assert_eq!(a.delta, b.delta);
        assert_eq!(a.bands_t2, b.bands_t2);
        assert_eq!(a.true_total_t, b.true_total_t);
    }

    #[test]
    fn degenerate_config_constant_delta() {
        let cfg = SimConfig {
            n_pixels: 500,
            spectral_noise_sd: 0.0,
            harvest_probability: 0.0,
            harvest_loss_fraction: 0.0,
            growth_sd: 0.0,
            initial_agb_sd: 0.0,
            forest_fraction: 1.0,
            ..small_config()
        };
        let pop = gen_population(&cfg).unwrap();
        for (i, d) in pop.delta.iter().enumerate() {
            assert_eq!(*d, cfg.growth_mean, "pixel {i}");
        }
        let expected = 500.0 * cfg.growth_mean * cfg.pixel_area_ha();
        assert!((pop.true_total_t - expected).abs() < 1e-9 * expected.abs());
    }

    #[test]
    fn no_forest_no_total() {
        let cfg = SimConfig {
            forest_fraction: 0.0,
            n_pixels: 300,
            ..small_config()
        };
        let pop = gen_population(&cfg).unwrap();
        assert_eq!(pop.true_total_t, 0.0);
    }

    #[test]
    fn invalid_config_lists_fields() {
        let cfg = SimConfig {
            harvest_probability: 1.5,
            growth_sd: -1.0,
            ..small_config()
        };
        let err = gen_population(&cfg).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("harvest_probability") && msg.contains("growth_sd"));
    }

    #[test]
    fn swir_band_negatively_correlated_with_delta() {
        let pop = gen_population(&small_config()).unwrap();
        let forest: Vec<usize> = (0..pop.n_pixels()).filter(|&i| pop.forest[i]).collect();
        let delta: Vec<f64> = forest.iter().map(|&i| pop.delta[i]).collect();
        let swir: Vec<f64> = forest.iter().map(|&i| pop.bands_t2[0][i]).collect();
        let r = correlation(&swir, &delta);
        assert!(r < -0.6, "corr = {r}");
    }

    #[test]
    fn draw_srs_full_population() {
        let cfg = SimConfig { n_pixels: 64, ..small_config() };
        let pop = gen_population(&cfg).unwrap();
        let plots = draw_srs(&pop, 64, 5).unwrap();
        assert_eq!(plots.len(), 64);
        let mut ids: Vec<&str> = plots.iter().map(|p| p.plot_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 64);
    }

    #[test]
    fn draw_srs_deterministic() {
        let pop = gen_population(&small_config()).unwrap();
        assert_eq!(draw_srs_indices(&pop, 50, 7).unwrap(), draw_srs_indices(&pop, 50, 7).unwrap());
    }

    #[test]
    fn draw_srs_too_large_rejected() {
        let cfg = SimConfig { n_pixels: 10, ..small_config() };
        let pop = gen_population(&cfg).unwrap();
        assert!(matches!(
            draw_srs(&pop, 11, 1),
            Err(Error::SampleExceedsPopulation { .. })
        ));
    }

    #[test]
    fn srs_inclusion_frequency_binomial() {
        let cfg = SimConfig { n_pixels: 100, ..small_config() };
        let pop = gen_population(&cfg).unwrap();
        let draws = 10_000;
        let target = 17usize;
        let mut hits = 0;
        for s in 0..draws {
            if draw_srs_indices(&pop, 10, s).unwrap().contains(&target) {
                hits += 1;
            }
        }
        let freq = hits as f64 / draws as f64;
        let tol = 3.0 * (0.1f64 * 0.9 / draws as f64).sqrt();
        assert!((freq - 0.1).abs() <= tol, "freq = {freq}, tol = {tol}");
    }

    #[test]
    fn monte_carlo_deterministic() {
        let cfg = SimConfig { n_pixels: 1_000, ..small_config() };
        let opts = McOptions::new(60, 20);
        let a = monte_carlo(&cfg, &opts).unwrap();
        let b = monte_carlo(&cfg, &opts).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn monte_carlo_informative_bands_re_above_one() {
        let cfg = SimConfig { n_pixels: 2_000, ..small_config() };
        let report = monte_carlo(&cfg, &McOptions::new(100, 120)).unwrap();
        assert!(report.empirical_re > 1.0, "RE = {}", report.empirical_re);
        assert!(report.bias_be_t.abs() <= 4.0 * report.mcse_be_t);
    }

    #[test]
    fn monte_carlo_pure_noise_bands_re_near_one() {
        let cfg = SimConfig {
            n_pixels: 2_000,
            spectral_noise_sd: 50.0, // drowns the signal entirely
            ..small_config()
        };
        let report = monte_carlo(&cfg, &McOptions::new(100, 120)).unwrap();
        assert!(
            (0.8..=1.2).contains(&report.empirical_re),
            "RE = {}",
            report.empirical_re
        );
    }

    #[test]
    fn zero_replicates_rejected() {
        let cfg = small_config();
        let err = monte_carlo(&cfg, &McOptions::new(50, 0)).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }
}
