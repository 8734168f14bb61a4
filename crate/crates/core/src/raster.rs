//! BGRID raster I/O and plot-to-pixel location.
//!
//! BGRID layout (bit-exact): five ASCII header lines terminated by `\n` —
//! magic `BGRID1`; `ncols nrows nbands`; `x0 y0 pixel_size`; nodata;
//! space-separated band names — followed by a binary payload of
//! `nbands * nrows * ncols` values, band-sequential, row-major from the
//! top-left pixel, 32-bit IEEE-754 little-endian.

use crate::error::{Error, Result};

/// A georeferenced multi-band grid of reflectance values for one epoch.
///
/// `(x0, y0)` is the map coordinate of the top-left corner of the top-left
/// pixel; pixels are square with side `pixel_size` (m).
#[derive(Debug, Clone, PartialEq)]
pub struct RasterStack {
    pub ncols: usize,
    pub nrows: usize,
    pub x0: f64,
    pub y0: f64,
    pub pixel_size: f64,
    pub nodata: f32,
    pub band_names: Vec<String>,
    /// One row-major grid per band.
    pub bands: Vec<Vec<f32>>,
    pub epoch_label: String,
}

impl RasterStack {
    pub fn new(
        ncols: usize,
        nrows: usize,
        x0: f64,
        y0: f64,
        pixel_size: f64,
        nodata: f32,
        band_names: Vec<String>,
        bands: Vec<Vec<f32>>,
    ) -> Result<Self> {
        if pixel_size <= 0.0 || !pixel_size.is_finite() {
            return Err(Error::RasterFormat(format!("pixel_size must be positive, got {pixel_size}")));
        }
        if !x0.is_finite() || !y0.is_finite() {
            return Err(Error::RasterFormat("non-finite grid origin".into()));
        }
        if band_names.len() != bands.len() {
            return Err(Error::RasterFormat(format!(
                "{} band names for {} bands",
                band_names.len(),
                bands.len()
            )));
        }
        for (i, a) in band_names.iter().enumerate() {
            if band_names[..i].contains(a) {
                return Err(Error::RasterFormat(format!("duplicate band name `{a}`")));
            }
        }
        for (name, grid) in band_names.iter().zip(&bands) {
            if grid.len() != ncols * nrows {
                return Err(Error::RasterLength {
                    expected: ncols * nrows,
                    got: grid.len(),
                });
            }
            let _ = name;
        }
        Ok(RasterStack {
            ncols,
            nrows,
            x0,
            y0,
            pixel_size,
            nodata,
            band_names,
            bands,
            epoch_label: String::new(),
        })
    }

    pub fn with_epoch(mut self, label: impl Into<String>) -> Self {
        self.epoch_label = label.into();
        self
    }

    pub fn band(&self, name: &str) -> Option<&[f32]> {
        let i = self.band_names.iter().position(|b| b == name)?;
        Some(&self.bands[i])
    }

    pub fn value(&self, band_index: usize, row: usize, col: usize) -> f32 {
        self.bands[band_index][row * self.ncols + col]
    }

    /// True if two stacks cover the same grid.
    pub fn same_geometry(&self, other: &RasterStack) -> bool {
        self.ncols == other.ncols
            && self.nrows == other.nrows
            && self.x0 == other.x0
            && self.y0 == other.y0
            && self.pixel_size == other.pixel_size
    }

    /// Pixel area in hectares.
    pub fn pixel_area_ha(&self) -> f64 {
        self.pixel_size * self.pixel_size / 10_000.0
    }
}

/// Binary forest mask on the same grid as the stacks it masks.
/// Single band named "mask", values in {0, 1, nodata}.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestMask {
    pub grid: RasterStack,
}

impl ForestMask {
    pub fn from_stack(stack: RasterStack) -> Result<Self> {
        if stack.band_names.as_slice() != ["mask"] {
            return Err(Error::RasterFormat(format!(
                "forest mask must have a single band named `mask`, got {:?}",
                stack.band_names
            )));
        }
        let nodata = stack.nodata;
        for &v in &stack.bands[0] {
            if v != 0.0 && v != 1.0 && v != nodata {
                return Err(Error::RasterFormat(format!("mask value {v} not in {{0, 1, nodata}}")));
            }
        }
        Ok(ForestMask { grid: stack })
    }

    pub fn is_forest(&self, row: usize, col: usize) -> bool {
        self.grid.value(0, row, col) == 1.0
    }

    pub fn is_nodata(&self, row: usize, col: usize) -> bool {
        self.grid.value(0, row, col) == self.grid.nodata
    }
}

/// Map coordinates to the (row, col) of the containing pixel.
///
/// Cells are half-open: the left and top edges belong to the cell,
/// `col = floor((x - x0)/pixel_size)`, `row = floor((y0 - y)/pixel_size)`.
/// Returns `None` when the point falls outside the grid.
pub fn locate_pixel(stack: &RasterStack, x: f64, y: f64) -> Option<(usize, usize)> {
    let col = ((x - stack.x0) / stack.pixel_size).floor();
    let row = ((stack.y0 - y) / stack.pixel_size).floor();
    if col < 0.0 || row < 0.0 || col >= stack.ncols as f64 || row >= stack.nrows as f64 {
        return None;
    }
    Some((row as usize, col as usize))
}

const MAGIC: &str = "BGRID1";

/// Parse a BGRID byte string.
pub fn read_raster(bytes: &[u8]) -> Result<RasterStack> {
    let mut pos = 0usize;
    let mut next_line = || -> Result<&str> {
        let rest = &bytes[pos..];
        let end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| Error::RasterFormat("missing header line terminator".into()))?;
        let line = std::str::from_utf8(&rest[..end])
            .map_err(|_| Error::RasterFormat("non-UTF-8 header".into()))?;
        pos += end + 1;
        Ok(line)
    };

    let magic = next_line()?;
    if magic != MAGIC {
        return Err(Error::RasterFormat(format!("bad magic `{magic}`, expected `{MAGIC}`")));
    }

    let dims = next_line()?.to_string();
    let mut it = dims.split_whitespace();
    let parse_usize = |s: Option<&str>, what: &str| -> Result<usize> {
        s.and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::RasterFormat(format!("bad {what} in header")))
    };
    let ncols = parse_usize(it.next(), "ncols")?;
    let nrows = parse_usize(it.next(), "nrows")?;
    let nbands = parse_usize(it.next(), "nbands")?;

    let geom = next_line()?.to_string();
    let mut it = geom.split_whitespace();
    let parse_f64 = |s: Option<&str>, what: &str| -> Result<f64> {
        let v: f64 = s
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::RasterFormat(format!("bad {what} in header")))?;
        if v.is_nan() {
            return Err(Error::RasterFormat(format!("NaN {what} in header")));
        }
        Ok(v)
    };
    let x0 = parse_f64(it.next(), "x0")?;
    let y0 = parse_f64(it.next(), "y0")?;
    let pixel_size = parse_f64(it.next(), "pixel_size")?;

    let nodata: f32 = next_line()?
        .trim()
        .parse()
        .map_err(|_| Error::RasterFormat("bad nodata value".into()))?;

    let band_names: Vec<String> = next_line()?.split_whitespace().map(String::from).collect();
    if band_names.len() != nbands {
        return Err(Error::RasterFormat(format!(
            "{} band names for declared nbands = {nbands}",
            band_names.len()
        )));
    }

    let payload = &bytes[pos..];
    let expected = nbands * nrows * ncols;
    if payload.len() != expected * 4 {
        return Err(Error::RasterLength {
            expected,
            got: payload.len() / 4,
        });
    }
    let mut bands = Vec::with_capacity(nbands);
    for b in 0..nbands {
        let mut grid = Vec::with_capacity(nrows * ncols);
        for i in 0..nrows * ncols {
            let off = (b * nrows * ncols + i) * 4;
            grid.push(f32::from_le_bytes(payload[off..off + 4].try_into().unwrap()));
        }
        bands.push(grid);
    }

    RasterStack::new(ncols, nrows, x0, y0, pixel_size, nodata, band_names, bands)
}

/// Serialize a stack to canonical BGRID bytes. `read_raster(write_raster(s))`
/// reproduces `s` exactly, and re-writing the parse reproduces the bytes.
pub fn write_raster(stack: &RasterStack) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC.as_bytes());
    out.push(b'\n');
    out.extend_from_slice(format!("{} {} {}\n", stack.ncols, stack.nrows, stack.bands.len()).as_bytes());
    out.extend_from_slice(format!("{} {} {}\n", stack.x0, stack.y0, stack.pixel_size).as_bytes());
    out.extend_from_slice(format!("{}\n", stack.nodata).as_bytes());
    out.extend_from_slice(stack.band_names.join(" ").as_bytes());
    out.push(b'\n');
    for band in &stack.bands {
        for v in band {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_raster_file(path: &std::path::Path) -> Result<RasterStack> {
    read_raster(&std::fs::read(path)?)
}

pub fn write_raster_file(path: &std::path::Path, stack: &RasterStack) -> Result<()> {
    std::fs::write(path, write_raster(stack))?;
    Ok(())
}
