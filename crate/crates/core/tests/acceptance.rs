//! Acceptance suite: one test per release criterion, each printing a single
//! PASS/FAIL line (visible with `--nocapture`). The CLI determinism criterion
//! lives in the `dagb-cli` crate next to the binary it exercises.

use std::time::Instant;

use dagb_core::estimation::{be_total, ma_total};
use dagb_core::features::{enumerate_terms, Epoch, Mode, TermKind, TermSpec};
use dagb_core::mapping::{predict_map, predict_point};
use dagb_core::raster::{ForestMask, RasterStack};
use dagb_core::sim::{correlation, gen_population, monte_carlo, BandModel, McOptions, SimConfig};
use dagb_core::subset::{best_subsets_bnb, exhaustive_best_subsets, ModelFit};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn criterion(name: &str, outcome: Result<String, String>) {
    match outcome {
        Ok(detail) => println!("PASS {name}: {detail}"),
        Err(detail) => {
            println!("FAIL {name}: {detail}");
            panic!("{name} failed: {detail}");
        }
    }
}

fn bands(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("B{i}")).collect()
}

#[test]
fn c01_candidate_pool_counts() {
    let run = || -> Result<String, String> {
        let b10 = bands(10);
        let b6 = bands(6);
        let uni10 = enumerate_terms(&b10, &b10, Mode::UniTemporal).map_err(|e| e.to_string())?;
        let bi10 = enumerate_terms(&b10, &b10, Mode::BiTemporal).map_err(|e| e.to_string())?;
        let uni6 = enumerate_terms(&b6, &b6, Mode::UniTemporal).map_err(|e| e.to_string())?;
        let indices = |terms: &[TermSpec]| {
            terms.iter().filter(|t| matches!(t.kind, TermKind::Ndi { .. })).count()
        };
        let checks = [
            ("10-band index count", indices(&uni10), 45),
            ("6-band index count", indices(&uni6), 15),
            ("uni-temporal 10-band pool", uni10.len(), 55),
            ("bi-temporal 10-band pool", bi10.len(), 110),
        ];
        for (label, got, want) in checks {
            if got != want {
                return Err(format!("{label}: got {got}, want {want}"));
            }
        }
        Ok("45/15 indices, 55/110 pools".into())
    };
    criterion("candidate-pool counts", run());
}

fn fixture_model(mode: Mode, terms: Vec<TermSpec>, intercept: f64, coefficients: Vec<f64>) -> ModelFit {
    let p = terms.len();
    ModelFit {
        mode,
        terms,
        intercept,
        coefficients,
        n: 0,
        adj_r2: 0.0,
        bic: None,
        max_vif: 1.0,
        training_ranges: vec![(f64::NEG_INFINITY, f64::INFINITY); p],
    }
}

#[test]
fn c02_printed_model_fixtures() {
    let run = || -> Result<String, String> {
        // bi-temporal Sentinel-2: -79.86 - 137.32 x1 + 284 x2 at (0.5, 0.6)
        let m1 = fixture_model(
            Mode::BiTemporal,
            vec![TermSpec::ndi("B7", "B12", Epoch::T1), TermSpec::ndi("B7", "B12", Epoch::T2)],
            -79.86,
            vec![-137.32, 284.0],
        );
        let got1 = predict_point(&m1, &[0.5, 0.6]).map_err(|e| e.to_string())?;
        // uni-temporal Landsat: -0.04 + 0.0095 B5 - 0.04 B7 at (1000, 500)
        let m2 = fixture_model(
            Mode::UniTemporal,
            vec![TermSpec::raw("B5", Epoch::T2), TermSpec::raw("B7", Epoch::T2)],
            -0.04,
            vec![0.0095, -0.04],
        );
        let got2 = predict_point(&m2, &[1000.0, 500.0]).map_err(|e| e.to_string())?;
        for (label, got, want) in [("bi-temporal", got1, 21.88), ("uni-temporal", got2, -10.54)] {
            let rel = ((got - want) / want).abs();
            if rel > 1e-9 {
                return Err(format!("{label}: got {got}, want {want} (rel err {rel:.2e})"));
            }
        }
        Ok(format!("{got1:.6} t/ha and {got2:.6} t/ha match hand evaluation"))
    };
    criterion("printed-model prediction fixtures", run());
}

#[test]
fn c03_subset_search_oracle_equivalence() {
    let run = || -> Result<String, String> {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..100 {
            let p = 8 + trial % 5;
            let n = 50;
            let columns: Vec<Vec<f64>> = (0..p)
                .map(|_| (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect())
                .collect();
            let signal: Vec<f64> = (0..n)
                .map(|i| 2.0 * columns[0][i] - columns[p / 2][i] + rng.gen_range(-1.0..1.0))
                .collect();
            let a = best_subsets_bnb(&columns, &signal, 3, 5).map_err(|e| e.to_string())?;
            let b = exhaustive_best_subsets(&columns, &signal, 3, 5).map_err(|e| e.to_string())?;
            for k in 0..3 {
                if a.per_size[k].len() != b.per_size[k].len() {
                    return Err(format!("trial {trial} size {}: list lengths differ", k + 1));
                }
                for (ca, cb) in a.per_size[k].iter().zip(&b.per_size[k]) {
                    if ca.columns != cb.columns {
                        return Err(format!(
                            "trial {trial} size {}: {:?} != {:?}",
                            k + 1,
                            ca.columns,
                            cb.columns
                        ));
                    }
                    if (ca.rss - cb.rss).abs() > 1e-9 {
                        return Err(format!(
                            "trial {trial} size {}: rss {} vs {}",
                            k + 1,
                            ca.rss,
                            cb.rss
                        ));
                    }
                }
            }
        }
        let elapsed = start.elapsed();
        if elapsed.as_secs() >= 60 {
            return Err(format!("took {elapsed:?}, budget 60 s"));
        }
        Ok(format!("100 random designs matched exhaustive enumeration in {elapsed:.2?}"))
    };
    criterion("branch-and-bound oracle equivalence", run());
}

#[test]
fn c04_estimator_hand_fixtures() {
    let run = || -> Result<String, String> {
        let (t_be, var_be) = be_total(&[1.0, 2.0, 3.0], 100.0).map_err(|e| e.to_string())?;
        let ma = ma_total(&[10.0, 2.0], &[8.0, 4.0], 5.0, 100.0).map_err(|e| e.to_string())?;
        let checks = [
            ("BE total", t_be, 200.0),
            ("BE variance", var_be, 10_000.0 / 3.0),
            ("MA total", ma.total, 500.0),
            ("MA variance", ma.variance, 40_000.0),
        ];
        for (label, got, want) in checks {
            let rel = ((got - want) / want).abs();
            if rel > 1e-9 {
                return Err(format!("{label}: got {got}, want {want} (rel err {rel:.2e})"));
            }
        }
        Ok("BE (200 t, 3333.33 t²) and MA (500 t, 40000 t²) fixtures match".into())
    };
    criterion("estimator hand fixtures", run());
}

#[test]
fn c05_null_model_collapse_bitwise() {
    let run = || -> Result<String, String> {
        let y = [4.25, -1.5, 0.75, 9.125, -3.0, 2.2, 0.0, 5.5];
        let zeros = [0.0; 8];
        let area = 1234.5;
        let (t_be, var_be) = be_total(&y, area).map_err(|e| e.to_string())?;
        let ma = ma_total(&y, &zeros, 0.0, area).map_err(|e| e.to_string())?;
        if ma.total.to_bits() != t_be.to_bits() {
            return Err(format!("totals differ bitwise: {} vs {}", ma.total, t_be));
        }
        if ma.variance.to_bits() != var_be.to_bits() {
            return Err(format!("variances differ bitwise: {} vs {}", ma.variance, var_be));
        }
        Ok("MA equals BE bit-for-bit with all-zero predictions".into())
    };
    criterion("null-model collapse (bitwise)", run());
}

#[test]
fn c06_monte_carlo_calibration() {
    let run = || -> Result<String, String> {
        let start = Instant::now();
        let config = SimConfig { seed: 31, ..SimConfig::default() };

        // auxiliary-signal audit: the SWIR-like band must carry the relation
        let pop = gen_population(&config).map_err(|e| e.to_string())?;
        let forest: Vec<usize> = (0..pop.n_pixels()).filter(|&i| pop.forest[i]).collect();
        let swir: Vec<f64> = forest.iter().map(|&i| pop.bands_t2[0][i]).collect();
        let delta: Vec<f64> = forest.iter().map(|&i| pop.delta[i]).collect();
        let r = correlation(&swir, &delta);
        if r.abs() < 0.6 {
            return Err(format!("|corr(swir_t2, delta)| = {:.3} < 0.6", r.abs()));
        }

        let options = McOptions::new(200, 1000);
        let report = monte_carlo(&config, &options).map_err(|e| e.to_string())?;
        if report.bias_be_t.abs() > 3.0 * report.mcse_be_t {
            return Err(format!(
                "BE bias {} exceeds 3 MCSE {}",
                report.bias_be_t, report.mcse_be_t
            ));
        }
        if !(0.9..=1.1).contains(&report.calibration_be) {
            return Err(format!("BE variance calibration {} outside [0.9, 1.1]", report.calibration_be));
        }
        if report.empirical_re <= 1.5 {
            return Err(format!("empirical RE {} not > 1.5", report.empirical_re));
        }

        // deliberately misspecified: quadratic truth, linear fit
        let mis = SimConfig { seed: 32, band_model: BandModel::Quadratic, ..SimConfig::default() };
        let mis_report = monte_carlo(&mis, &options).map_err(|e| e.to_string())?;
        if mis_report.bias_ma_t.abs() > 3.0 * mis_report.mcse_ma_t {
            return Err(format!(
                "MA bias {} exceeds 3 MCSE {} under misspecification",
                mis_report.bias_ma_t, mis_report.mcse_ma_t
            ));
        }

        Ok(format!(
            "|r| = {:.2}, RE = {:.2}, calibration = {:.3}, biases within 3 MCSE, {:.1?}",
            r.abs(),
            report.empirical_re,
            report.calibration_be,
            start.elapsed()
        ))
    };
    criterion("Monte Carlo calibration", run());
}

#[test]
fn c07_ci_coverage_be() {
    let run = || -> Result<String, String> {
        let config = SimConfig { seed: 33, ..SimConfig::default() };
        let options = McOptions::new(200, 2000);
        let report = monte_carlo(&config, &options).map_err(|e| e.to_string())?;
        if !(0.93..=0.97).contains(&report.coverage_be) {
            return Err(format!("BE coverage {} outside [0.93, 0.97]", report.coverage_be));
        }
        Ok(format!("BE 95% CI coverage = {:.4} over 2000 replicates", report.coverage_be))
    };
    criterion("confidence-interval coverage", run());
}

#[test]
fn c09_out_of_range_accounting() {
    let run = || -> Result<String, String> {
        // 2x2 all-forest grid; one pixel's band value leaves the training range
        let stack = RasterStack::new(
            2,
            2,
            0.0,
            200.0,
            100.0,
            -9999.0,
            vec!["B1".into()],
            vec![vec![0.125, 0.25, 0.375, 0.875]],
        )
        .map_err(|e| e.to_string())?
        .with_epoch("t2");
        let mask = ForestMask::from_stack(
            RasterStack::new(2, 2, 0.0, 200.0, 100.0, -9999.0, vec!["mask".into()], vec![vec![1.0; 4]])
                .map_err(|e| e.to_string())?,
        )
        .map_err(|e| e.to_string())?;
        let mut model = fixture_model(
            Mode::UniTemporal,
            vec![TermSpec::raw("B1", Epoch::T2)],
            1.0,
            vec![2.0],
        );
        model.training_ranges = vec![(0.125, 0.5)];
        let (_, stats) = predict_map(&model, &[&stack], &mask, 1).map_err(|e| e.to_string())?;
        if stats.out_of_range_fraction != 0.25 {
            return Err(format!("fraction {} != 0.25", stats.out_of_range_fraction));
        }
        Ok("1 of 4 forest pixels flagged, fraction exactly 0.25".into())
    };
    criterion("out-of-range accounting", run());
}
