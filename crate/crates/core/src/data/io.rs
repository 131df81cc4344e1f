//! On-disk dataset format.
//!
//! A dataset directory holds `manifest.json` plus one flat binary file per
//! variable: 32-bit little-endian floats in (time, row, col) order, with a
//! static variable storing a single time step. Missing values live in an
//! optional companion mask of one byte per value (1 = missing). Fire
//! observations are one byte per cell-day (0 or 1), with an optional per-cell
//! byte mask for unobserved cells.
//!
//! Small fixtures can use a single CSV instead: header
//! `date,row,col,lat,lon,<input variables...>,fire`, one row per cell-day, and
//! an empty field for a missing value.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::grid::GridDefinition;
use super::raster::{Dataset, FireObservationGrid, Layer, RasterStack, VariableKind, INPUT_VARIABLES};
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";
const FORMAT: &str = "pyric-grid";
const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub byte_order: String,
    pub lat: Vec<f64>,
    pub lon: Vec<f64>,
    pub start: NaiveDate,
    pub n_days: usize,
    pub variables: Vec<VariableEntry>,
    pub fire: FireEntry,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableEntry {
    pub name: String,
    pub kind: VariableKind,
    pub units: String,
    /// One time step shared by every day.
    #[serde(rename = "static")]
    pub is_static: bool,
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_file: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FireEntry {
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub missing_cells_file: Option<String>,
}

/// Converts a value in `units` to the unit the IC chain expects, returning
/// the canonical unit name. Unknown units pass through unchanged.
pub fn to_canonical(units: &str, v: f64) -> (f64, &'static str) {
    match units {
        "K" => ((v - 273.15) * 9.0 / 5.0 + 32.0, "degF"),
        "degC" | "C" => (v * 9.0 / 5.0 + 32.0, "degF"),
        "degF" | "F" => (v, "degF"),
        "m/s" => (v * 2.236_936_292_054_402, "mph"),
        "km/h" => (v / 1.609_344, "mph"),
        "mm/yr" => (v / 25.4, "in/yr"),
        _ => (v, ""),
    }
}

fn canonical_units(units: &str) -> String {
    match to_canonical(units, 0.0).1 {
        "" => units.to_string(),
        u => u.to_string(),
    }
}

fn convert_layer(units: &str, layer: &mut Layer) {
    if to_canonical(units, 0.0).1.is_empty() || canonical_units(units) == units {
        return;
    }
    for v in &mut layer.values {
        *v = to_canonical(units, *v as f64).0 as f32;
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_f32(path: &Path, expected: usize) -> Result<Vec<f32>> {
    let bytes = read_bytes(path)?;
    if bytes.len() != expected * 4 {
        return Err(Error::Data(format!(
            "{} holds {} bytes, expected {} ({} floats)",
            path.display(),
            bytes.len(),
            expected * 4,
            expected
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect())
}

fn read_flags(path: &Path, expected: usize) -> Result<Vec<u8>> {
    let bytes = read_bytes(path)?;
    if bytes.len() != expected {
        return Err(Error::Data(format!("{} holds {} bytes, expected {expected}", path.display(), bytes.len())));
    }
    if let Some(v) = bytes.iter().find(|&&v| v > 1) {
        return Err(Error::Data(format!("{} holds flag value {v}; flags are 0 or 1", path.display())));
    }
    Ok(bytes)
}

fn manifest_dir(path: &Path) -> (PathBuf, PathBuf) {
    if path.is_dir() {
        (path.to_path_buf(), path.join(MANIFEST_NAME))
    } else {
        (path.parent().map(Path::to_path_buf).unwrap_or_default(), path.to_path_buf())
    }
}

/// Reads a dataset from a manifest path or the directory holding one.
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let (dir, manifest_path) = manifest_dir(path);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", manifest_path.display())))?;
    if m.format != FORMAT || m.version != VERSION {
        return Err(Error::Data(format!("unsupported dataset format {} v{}", m.format, m.version)));
    }
    if m.byte_order != "little" {
        return Err(Error::Data(format!("unsupported byte order {}", m.byte_order)));
    }
    let grid = GridDefinition::new(m.lat, m.lon)?;
    let (n_rows, n_cols) = (grid.n_rows(), grid.n_cols());
    let mut stack = RasterStack::new(grid.clone(), m.start, m.n_days);
    for v in &m.variables {
        let n_time = if v.is_static { 1 } else { m.n_days };
        let n = n_time * n_rows * n_cols;
        let values = read_f32(&dir.join(&v.file), n)?;
        let missing = match &v.missing_file {
            Some(f) => Some(read_flags(&dir.join(f), n)?.into_iter().map(|b| b == 1).collect()),
            None => None,
        };
        let mut layer = Layer::new(n_time, n_rows, n_cols, values, missing)?;
        convert_layer(&v.units, &mut layer);
        stack.insert(&v.name, v.kind, &canonical_units(&v.units), layer)?;
    }
    let fire = read_flags(&dir.join(&m.fire.file), m.n_days * n_rows * n_cols)?;
    let mut fires = FireObservationGrid::new(grid.clone(), m.start, m.n_days, fire)?;
    if let Some(f) = &m.fire.missing_cells_file {
        fires.missing_cells = read_flags(&dir.join(f), grid.n_cells())?.into_iter().map(|b| b == 1).collect();
    }
    Dataset::new(stack, fires)
}

/// Writes `data` into directory `dir` (created if needed). Output bytes depend
/// only on the dataset.
pub fn write_dataset(data: &Dataset, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut variables = Vec::new();
    for (name, v) in &data.stack.variables {
        let file = format!("{name}.f32");
        let bytes: Vec<u8> = v.layer.values.iter().flat_map(|x| x.to_le_bytes()).collect();
        write_bytes(&dir.join(&file), &bytes)?;
        let missing_file = if v.layer.missing.iter().any(|&m| m) {
            let f = format!("{name}.missing");
            let flags: Vec<u8> = v.layer.missing.iter().map(|&m| m as u8).collect();
            write_bytes(&dir.join(&f), &flags)?;
            Some(f)
        } else {
            None
        };
        variables.push(VariableEntry {
            name: name.clone(),
            kind: v.kind,
            units: v.units.clone(),
            is_static: v.layer.is_static() && data.stack.n_days != 1,
            file,
            missing_file,
        });
    }
    write_bytes(&dir.join("fire.u8"), &data.fires.fire)?;
    let missing_cells_file = if data.fires.missing_cells.iter().any(|&m| m) {
        let flags: Vec<u8> = data.fires.missing_cells.iter().map(|&m| m as u8).collect();
        write_bytes(&dir.join("fire_cells.missing"), &flags)?;
        Some("fire_cells.missing".to_string())
    } else {
        None
    };
    let m = Manifest {
        format: FORMAT.into(),
        version: VERSION,
        byte_order: "little".into(),
        lat: data.grid().lat.clone(),
        lon: data.grid().lon.clone(),
        start: data.stack.start,
        n_days: data.n_days(),
        variables,
        fire: FireEntry {
            file: "fire.u8".into(),
            missing_cells_file,
        },
    };
    let path = dir.join(MANIFEST_NAME);
    let mut text = serde_json::to_string_pretty(&m).expect("manifest serializes");
    text.push('\n');
    write_bytes(&path, text.as_bytes())?;
    Ok(path)
}

const CSV_FIXED: [&str; 5] = ["date", "row", "col", "lat", "lon"];

/// Reads the single-file CSV fixture format. Units are the canonical ones.
pub fn read_csv_dataset(path: &Path) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::io(path, e))?;
    let headers = rdr.headers().map_err(|e| Error::io(path, e))?.clone();
    let expected: Vec<&str> = CSV_FIXED
        .iter()
        .copied()
        .chain(INPUT_VARIABLES.iter().map(|(n, _)| *n))
        .chain(["fire"])
        .collect();
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Data(format!("{}: header must be {}", path.display(), expected.join(","))));
    }
    let bad = |line: usize, what: &str| Error::Data(format!("{}:{}: bad {what}", path.display(), line + 2));

    struct Row {
        date: NaiveDate,
        r: usize,
        c: usize,
        vals: Vec<Option<f32>>,
        fire: u8,
    }
    let mut rows = Vec::new();
    let mut lat = Vec::<Option<f64>>::new();
    let mut lon = Vec::<Option<f64>>::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::io(path, e))?;
        let date: NaiveDate = rec[0].parse().map_err(|_| bad(i, "date"))?;
        let r: usize = rec[1].parse().map_err(|_| bad(i, "row"))?;
        let c: usize = rec[2].parse().map_err(|_| bad(i, "col"))?;
        let la: f64 = rec[3].parse().map_err(|_| bad(i, "lat"))?;
        let lo: f64 = rec[4].parse().map_err(|_| bad(i, "lon"))?;
        for (axis, k, v) in [(&mut lat, r, la), (&mut lon, c, lo)] {
            if axis.len() <= k {
                axis.resize(k + 1, None);
            }
            match axis[k] {
                Some(prev) if prev != v => return Err(bad(i, "coordinate (differs from earlier rows)")),
                _ => axis[k] = Some(v),
            }
        }
        let vals = (0..INPUT_VARIABLES.len())
            .map(|k| {
                let s = rec[5 + k].trim();
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse::<f32>().map(Some).map_err(|_| bad(i, INPUT_VARIABLES[k].0))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let fire = match rec[5 + INPUT_VARIABLES.len()].trim() {
            "0" => 0,
            "1" => 1,
            _ => return Err(bad(i, "fire flag")),
        };
        rows.push(Row { date, r, c, vals, fire });
    }
    let coords = |axis: Vec<Option<f64>>, what: &str| {
        axis.into_iter()
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| Error::Data(format!("{}: some {what} index has no rows", path.display())))
    };
    let grid = GridDefinition::new(coords(lat, "row")?, coords(lon, "col")?)?;
    let start = rows
        .iter()
        .map(|r| r.date)
        .min()
        .ok_or_else(|| Error::Data(format!("{}: no rows", path.display())))?;
    let end = rows.iter().map(|r| r.date).max().expect("non-empty");
    let n_days = (end - start).num_days() as usize + 1;
    let (nr, nc) = (grid.n_rows(), grid.n_cols());
    let n = n_days * nr * nc;
    let mut values = vec![vec![0.0f32; n]; INPUT_VARIABLES.len()];
    let mut missing = vec![vec![true; n]; INPUT_VARIABLES.len()];
    let mut fire = vec![0u8; n];
    let mut seen = vec![false; n];
    for (i, row) in rows.iter().enumerate() {
        let off = ((row.date - start).num_days() as usize * nr + row.r) * nc + row.c;
        if std::mem::replace(&mut seen[off], true) {
            return Err(bad(i, "cell-day (duplicate)"));
        }
        for (k, v) in row.vals.iter().enumerate() {
            if let Some(v) = v {
                values[k][off] = *v;
                missing[k][off] = false;
            }
        }
        fire[off] = row.fire;
    }
    let mut stack = RasterStack::new(grid.clone(), start, n_days);
    for (k, (name, kind)) in INPUT_VARIABLES.iter().enumerate() {
        let layer = Layer::new(n_days, nr, nc, std::mem::take(&mut values[k]), Some(std::mem::take(&mut missing[k])))?;
        stack.insert(name, *kind, default_units(name), layer)?;
    }
    let fires = FireObservationGrid::new(grid, start, n_days, fire)?;
    Dataset::new(stack, fires)
}

fn default_units(name: &str) -> &'static str {
    match name {
        "temp" | "temp_max" | "temp_min" => "degF",
        "rh" | "rh_max" | "rh_min" => "percent",
        "wind_speed" => "mph",
        "cloud_cover" => "fraction",
        "precip_duration" => "hours",
        "annual_precip_mean" => "in/yr",
        _ => "class",
    }
}

/// Writes the CSV fixture format; every cell-day becomes one row.
pub fn write_csv_dataset(data: &Dataset, path: &Path) -> Result<()> {
    data.stack.check_inputs()?;
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, e))?;
    let header: Vec<&str> = CSV_FIXED
        .iter()
        .copied()
        .chain(INPUT_VARIABLES.iter().map(|(n, _)| *n))
        .chain(["fire"])
        .collect();
    w.write_record(&header).map_err(|e| Error::io(path, e))?;
    let g = data.grid();
    for t in 0..data.n_days() {
        for r in 0..g.n_rows() {
            for c in 0..g.n_cols() {
                let mut rec = vec![
                    data.stack.date(t).to_string(),
                    r.to_string(),
                    c.to_string(),
                    g.lat[r].to_string(),
                    g.lon[c].to_string(),
                ];
                for (name, _) in INPUT_VARIABLES {
                    let v = data.stack.variable(name)?.layer.get(t, r, c);
                    rec.push(v.map(|v| v.to_string()).unwrap_or_default());
                }
                rec.push(if data.fires.get(t, r, c) { "1" } else { "0" }.to_string());
                w.write_record(&rec).map_err(|e| Error::io(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a dataset from a manifest, a dataset directory, or a `.csv` fixture.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    if path.extension().is_some_and(|e| e == "csv") {
        read_csv_dataset(path)
    } else {
        read_dataset(path)
    }
}
