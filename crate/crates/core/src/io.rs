//! CSV and JSON artifacts. Floats are written in shortest round-trip form.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::Result;
use crate::genmodel::{FitRecord, WeightedDataset};
use crate::synthdata::{DatasetPair, LabeledPoint};

fn x_header(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("x_{i}")).collect()
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Columns `x_1..x_d, z_hidden, y`; biased rows first.
pub fn write_dataset_csv(path: &Path, pair: &DatasetPair) -> Result<()> {
    let d = pair.spec.dim();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = x_header(d);
    header.extend(["z_hidden".into(), "y".into()]);
    w.write_record(&header)?;
    let rows: Vec<&LabeledPoint> = pair.d_bias.iter().chain(&pair.d_ref).collect();
    for p in rows {
        let mut rec: Vec<String> = p.x.iter().copied().map(fmt).collect();
        rec.push(p.z_hidden.to_string());
        rec.push(p.y.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `x_1..x_d, w, z_hidden, y`. `z_labels` aligns with the points.
pub fn write_weights_csv(path: &Path, wd: &WeightedDataset, z_labels: &[usize]) -> Result<()> {
    let d = wd.dim().unwrap_or(0);
    let mut w = csv::Writer::from_path(path)?;
    let mut header = x_header(d);
    header.extend(["w".into(), "z_hidden".into(), "y".into()]);
    w.write_record(&header)?;
    for ((x, &wt), (z, y)) in wd.points.iter().zip(&wd.weights).zip(z_labels.iter().zip(&wd.origins)) {
        let mut rec: Vec<String> = x.iter().copied().map(fmt).collect();
        rec.push(fmt(wt));
        rec.push(z.to_string());
        rec.push(y.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_samples_csv(path: &Path, samples: &[Vec<f64>]) -> Result<()> {
    let d = samples.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(x_header(d))?;
    for s in samples {
        w.write_record(s.iter().copied().map(fmt))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

pub fn write_fit_log_csv(path: &Path, log: &[FitRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in log {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}
