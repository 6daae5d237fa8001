//! Median and interquartile range of cell metrics per (method, perc, α).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Method;
use crate::error::Result;
use crate::runner::{read_metrics, MetricsRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Spread {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Linear-interpolation quantiles. `values` must be non-empty.
pub fn spread(values: &[f64]) -> Spread {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
    };
    Spread {
        median: q(0.5),
        q1: q(0.25),
        q3: q(0.75),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub perc: f64,
    pub alpha: Option<f64>,
    pub seeds: usize,
    pub fd: Spread,
    pub fd_thresholded: Spread,
    pub frechet: Spread,
}

pub fn summarize_records(records: &[MetricsRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, u64, Option<u64>)> = records
        .iter()
        .map(|r| (r.method, r.perc.to_bits(), r.alpha.map(f64::to_bits)))
        .collect();
    keys.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(f64::from_bits(a.1).total_cmp(&f64::from_bits(b.1)))
            .then(
                a.2.map(f64::from_bits)
                    .unwrap_or(-1.0)
                    .total_cmp(&b.2.map(f64::from_bits).unwrap_or(-1.0)),
            )
    });
    keys.dedup();
    keys.into_iter()
        .map(|(method, perc, alpha)| {
            let group: Vec<&MetricsRecord> = records
                .iter()
                .filter(|r| r.method == method && r.perc.to_bits() == perc && r.alpha.map(f64::to_bits) == alpha)
                .collect();
            let col = |f: fn(&MetricsRecord) -> f64| spread(&group.iter().map(|r| f(r)).collect::<Vec<_>>());
            SummaryRow {
                method,
                perc: f64::from_bits(perc),
                alpha: alpha.map(f64::from_bits),
                seeds: group.len(),
                fd: col(|r| r.fd),
                fd_thresholded: col(|r| r.fd_thresholded),
                frechet: col(|r| r.frechet),
            }
        })
        .collect()
}

/// Writes `summary.json` and `summary.csv` into `root`, replacing earlier ones.
pub fn summarize(root: &Path) -> Result<Vec<SummaryRow>> {
    let rows = summarize_records(&read_metrics(root)?);
    fairweight::io::write_json(&root.join("summary.json"), &rows)?;
    let mut w = csv::Writer::from_path(root.join("summary.csv"))?;
    w.write_record([
        "method",
        "perc",
        "alpha",
        "seeds",
        "fd_median",
        "fd_iqr",
        "fd_thresholded_median",
        "fd_thresholded_iqr",
        "frechet_median",
        "frechet_iqr",
    ])?;
    for r in &rows {
        w.write_record([
            r.method.label().to_string(),
            r.perc.to_string(),
            r.alpha.map_or_else(String::new, |a| a.to_string()),
            r.seeds.to_string(),
            r.fd.median.to_string(),
            r.fd.iqr().to_string(),
            r.fd_thresholded.median.to_string(),
            r.fd_thresholded.iqr().to_string(),
            r.frechet.median.to_string(),
            r.frechet.iqr().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quartiles_interpolate() {
        let s = spread(&[4.0, 1.0, 3.0, 2.0, 5.0]);
        assert_eq!((s.q1, s.median, s.q3), (2.0, 3.0, 4.0));
        let s = spread(&[1.0, 2.0]);
        assert_eq!((s.q1, s.median, s.q3), (1.25, 1.5, 1.75));
        assert_eq!(spread(&[7.0]).iqr(), 0.0);
    }
}
