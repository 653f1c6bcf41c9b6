//! Dataset CSV files: header `y,x_1,...,x_m`, one observation per row, curve
//! values at equispaced points including both endpoints.

use std::io::{Read, Write};
use std::path::Path;

use fpcr_core::fpcr::Dataset;
use fpcr_core::function_space::GridFunction;

use crate::output::fmt17;
use crate::{CliError, CliResult};

pub const MIN_ROWS: usize = 10;
pub const MIN_GRID: usize = 2;

fn input(msg: String) -> CliError {
    CliError::Input(msg)
}

fn check_header(header: &csv::StringRecord) -> CliResult<usize> {
    if header.get(0).map(str::trim) != Some("y") {
        return Err(input(format!(
            "column 1 of the header must be `y`, found `{}`",
            header.get(0).unwrap_or("")
        )));
    }
    let m = header.len() - 1;
    for (k, name) in header.iter().enumerate().skip(1) {
        let want = format!("x_{k}");
        if name.trim() != want {
            return Err(input(format!("column {} of the header must be `{want}`, found `{name}`", k + 1)));
        }
    }
    if m < MIN_GRID {
        return Err(input(format!(
            "curves need at least {MIN_GRID} grid columns, found {m} (a single value is not a curve)"
        )));
    }
    Ok(m)
}

pub fn read_dataset_from<R: Read>(reader: R) -> CliResult<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers().map_err(|e| input(format!("cannot read header: {e}")))?.clone();
    let m = check_header(&header)?;
    let mut ys = Vec::new();
    let mut xs = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        // row 1 is the header
        let row = r + 2;
        let rec = rec.map_err(|e| input(format!("row {row}: {e}")))?;
        if rec.len() != m + 1 {
            return Err(input(format!("row {row}: expected {} fields, found {}", m + 1, rec.len())));
        }
        let mut vals = Vec::with_capacity(m + 1);
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| input(format!("row {row}, column {} (`{}`): cannot parse `{field}` as a number", c + 1, &header[c])))?;
            if !v.is_finite() {
                return Err(input(format!("row {row}, column {}: value is not finite", c + 1)));
            }
            vals.push(v);
        }
        ys.push(vals[0]);
        xs.push(GridFunction::new(vals.split_off(1))?);
    }
    if ys.len() < MIN_ROWS {
        return Err(input(format!("need at least {MIN_ROWS} observations, found {}", ys.len())));
    }
    Ok(Dataset::new(xs, ys)?)
}

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| input(format!("cannot open {}: {e}", path.display())))?;
    read_dataset_from(std::io::BufReader::new(file))
}

pub fn write_dataset_to<W: Write>(writer: W, data: &Dataset) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header = vec!["y".to_string()];
    header.extend((1..=data.grid_size()).map(|k| format!("x_{k}")));
    w.write_record(&header).map_err(|e| CliError::Other(e.into()))?;
    for (y, x) in data.y().iter().zip(data.x()) {
        let mut row = vec![fmt17(*y)];
        row.extend(x.values().iter().map(|v| fmt17(*v)));
        w.write_record(&row).map_err(|e| CliError::Other(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset(path: &Path, data: &Dataset) -> CliResult<()> {
    let file = std::fs::File::create(path)?;
    write_dataset_to(std::io::BufWriter::new(file), data)
}
