//! Points as CSV: one point per line, comma-separated, optional header.

use std::io::Write;

use kchol::geometry::{BoundaryPolicy, PointCloud};
use kchol::{Error, Result};

fn format_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Parses CSV points. A first row that is not entirely numeric is taken as
/// a header.
pub fn read_points(bytes: &[u8], boundary: BoundaryPolicy) -> Result<PointCloud> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(bytes);
    let mut coords = Vec::new();
    let mut dim = None;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(format_err)?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if line == 0 => continue,
            Err(_) => return Err(Error::Format(format!("line {}: non-numeric field", line + 1))),
        };
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::Format(format!("line {}: expected {d} fields, found {}", line + 1, row.len())))
            }
            _ => {}
        }
        coords.extend(row);
    }
    let dim = dim.ok_or(Error::EmptyCloud)?;
    PointCloud::new(coords, dim, boundary)
}

/// Writes points without a header, using the shortest exact decimal form.
pub fn write_points(w: &mut impl Write, cloud: &PointCloud) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().from_writer(w);
    for i in 0..cloud.len() {
        writer.write_record(cloud.point(i).iter().map(|x| x.to_string())).map_err(format_err)?;
    }
    writer.flush()?;
    Ok(())
}
