//! CSV point clouds: header `id,x1,...,xd,weight`, plus an optional dense
//! metric file holding one row of distances per point, in point order.

use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

use super::{Metric, SampledSpace};

/// Triples checked for the triangle inequality when loading a dense metric.
const TRIANGLE_SAMPLES: usize = 10_000;

pub fn read_point_cloud(path: &Path, metric_path: Option<&Path>) -> Result<SampledSpace> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let cols = headers.len();
    if cols < 2 || &headers[0] != "id" || &headers[cols - 1] != "weight" {
        return Err(Error::Config(format!("{}: expected header `id,x1,...,xd,weight`", path.display())));
    }
    let dim = cols - 2;
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    for record in reader.records() {
        let record = record?;
        ids.push(record[0].to_string());
        for k in 1..=dim {
            coords.push(parse(&record[k], path)?);
        }
        weights.push(parse(&record[cols - 1], path)?);
    }
    let metric = match metric_path {
        None => Metric::Euclidean,
        Some(mp) => Metric::Dense(read_dense_metric(mp, ids.len())?),
    };
    SampledSpace::new(ids, dim, coords, weights, metric, None)
}

fn parse(field: &str, path: &Path) -> Result<f64> {
    field.trim().parse().map_err(|_| Error::Config(format!("{}: cannot parse `{field}` as a number", path.display())))
}

/// Reads and validates an `n x n` distance matrix.
pub fn read_dense_metric(path: &Path, n: usize) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut m = Vec::with_capacity(n * n);
    for record in reader.records() {
        let record = record?;
        if record.len() != n {
            return Err(Error::Mismatch(format!("metric row has {} entries, expected {n}", record.len())));
        }
        for f in record.iter() {
            m.push(parse(f, path)?);
        }
    }
    if m.len() != n * n {
        return Err(Error::Mismatch(format!("metric has {} rows, expected {n}", m.len() / n.max(1))));
    }
    validate_dense(&m, n)?;
    Ok(m)
}

fn validate_dense(m: &[f64], n: usize) -> Result<()> {
    for i in 0..n {
        for j in 0..n {
            let d = m[i * n + j];
            if !d.is_finite() || d < 0.0 || (i == j) != (d == 0.0) || d != m[j * n + i] {
                return Err(Error::InvalidParameter {
                    name: "metric",
                    reason: format!("entry ({i}, {j}) = {d} breaks symmetry, positivity or the zero diagonal"),
                });
            }
        }
    }
    let mut rng = crate::stats::rng(0);
    for _ in 0..TRIANGLE_SAMPLES {
        let (x, y, z) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
        let (xy, yz, xz) = (m[x * n + y], m[y * n + z], m[x * n + z]);
        if xz > (xy + yz) * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter {
                name: "metric",
                reason: format!("triangle inequality fails on ({x}, {y}, {z})"),
            });
        }
    }
    Ok(())
}

pub fn write_point_cloud(space: &SampledSpace, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["id".to_string()];
    header.extend((1..=space.dim()).map(|k| format!("x{k}")));
    header.push("weight".into());
    w.write_record(&header)?;
    for i in 0..space.len() {
        let mut row = vec![space.ids()[i].clone()];
        row.extend(space.coords(i).iter().map(|c| format!("{c:?}")));
        row.push(format!("{:?}", space.weight(i)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
