use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::learn::{LabeledDataset, LabeledPoint};
use crate::{Error, Result};

const HEADER: [&str; 3] = ["x1", "x2", "label"];

/// Reads `x1,x2,label` rows; an `x1,x2,label` header line is optional.
pub fn load_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    read_csv(File::open(path)?)
}

pub fn read_csv<R: Read>(reader: R) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Csv {
            line: e.position().map_or(i + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(i + 1, |p| p.line() as usize);
        let bad = |message: String| Error::Csv { line, message };
        if i == 0 && rec.iter().eq(HEADER) {
            continue;
        }
        if rec.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", rec.len())));
        }
        let num = |k: usize| {
            rec[k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("cannot parse {:?} as a number", &rec[k])))
        };
        let x = vec![num(0)?, num(1)?];
        let y = match &rec[2] {
            "1" | "+1" => 1.0,
            "-1" => -1.0,
            other => return Err(bad(format!("label must be 1 or -1, got {other:?}"))),
        };
        points.push(LabeledPoint { x, y });
    }
    if points.is_empty() {
        return Err(Error::Empty("CSV file has no data rows"));
    }
    LabeledDataset::new(points)
}

/// Writes the dataset with a header; floats use their shortest exact form.
pub fn write_csv(path: impl AsRef<Path>, data: &LabeledDataset) -> Result<()> {
    let mut f = std::io::BufWriter::new(File::create(path)?);
    write_csv_to(&mut f, data)?;
    f.flush()?;
    Ok(())
}

pub fn write_csv_to<W: Write>(w: W, data: &LabeledDataset) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let io = |e: csv::Error| Error::Io(e.into());
    wtr.write_record(HEADER).map_err(io)?;
    for p in data.points() {
        if p.x.len() != 2 {
            return Err(Error::Dimension(format!("CSV rows hold 2 features, point has {}", p.x.len())));
        }
        let label = if p.y > 0.0 { "1" } else { "-1" };
        wtr.write_record([p.x[0].to_string(), p.x[1].to_string(), label.to_string()])
            .map_err(io)?;
    }
    wtr.flush()?;
    Ok(())
}
