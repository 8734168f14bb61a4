//! Field-plot table parsing.
//!
//! A plot table is a UTF-8, comma-delimited CSV with a header row containing
//! at least `plot_id,x,y,forest,agb_t1,agb_t2`. Decimal point is ".", no
//! thousands separators.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One field plot with above-ground biomass at both inventory times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRecord {
    pub plot_id: String,
    /// Map coordinates in a projected CRS shared with the rasters (m).
    pub x: f64,
    pub y: f64,
    /// Binary forest indicator (1 = forest).
    pub forest: bool,
    /// AGB density at T1/T2 (t/ha).
    pub agb_t1: f64,
    pub agb_t2: f64,
    /// agb_t2 - agb_t1 (t/ha per period).
    pub delta_agb: f64,
}

impl PlotRecord {
    pub fn new(plot_id: impl Into<String>, x: f64, y: f64, forest: bool, agb_t1: f64, agb_t2: f64) -> Self {
        PlotRecord {
            plot_id: plot_id.into(),
            x,
            y,
            forest,
            agb_t1,
            agb_t2,
            delta_agb: agb_t2 - agb_t1,
        }
    }

    /// The response entering the estimators: non-forest plots contribute zero
    /// change regardless of their raw AGB columns.
    pub fn effective_delta(&self) -> f64 {
        if self.forest {
            self.delta_agb
        } else {
            0.0
        }
    }
}

pub type PlotTable = Vec<PlotRecord>;

const REQUIRED_COLUMNS: [&str; 6] = ["plot_id", "x", "y", "forest", "agb_t1", "agb_t2"];

/// Parse a plot table. Row order is preserved; `delta_agb` is computed.
pub fn parse_plot_table(text: &str) -> Result<PlotTable> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::MissingColumn("plot_id (empty input)".into()))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();

    let mut idx = [0usize; 6];
    for (k, name) in REQUIRED_COLUMNS.iter().enumerate() {
        idx[k] = columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn((*name).into()))?;
    }

    let mut seen: HashSet<String> = HashSet::new();
    let mut table = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < columns.len() {
            return Err(Error::RowError {
                line: lineno + 1,
                message: format!("expected {} fields, got {}", columns.len(), fields.len()),
            });
        }
        let parse_num = |col: usize, name: &str| -> Result<f64> {
            fields[col].parse::<f64>().map_err(|_| Error::RowError {
                line: lineno + 1,
                message: format!("non-numeric {name}: `{}`", fields[col]),
            })
        };
        let plot_id = fields[idx[0]].to_string();
        if !seen.insert(plot_id.clone()) {
            return Err(Error::DuplicatePlotId(plot_id));
        }
        let x = parse_num(idx[1], "x")?;
        let y = parse_num(idx[2], "y")?;
        let forest = match fields[idx[3]] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::RowError {
                    line: lineno + 1,
                    message: format!("forest indicator must be 0 or 1, got `{other}`"),
                })
            }
        };
        let agb_t1 = parse_num(idx[4], "agb_t1")?;
        let agb_t2 = parse_num(idx[5], "agb_t2")?;
        if agb_t1 < 0.0 || agb_t2 < 0.0 {
            return Err(Error::RowError {
                line: lineno + 1,
                message: "AGB must be non-negative".into(),
            });
        }
        table.push(PlotRecord::new(plot_id, x, y, forest, agb_t1, agb_t2));
    }
    Ok(table)
}
