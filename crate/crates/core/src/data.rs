//! Observed locations, covariates and responses, with CSV ingestion.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    /// Horizontal coordinate.
    pub s_h: f64,
    /// Vertical coordinate.
    pub s_v: f64,
}

impl Location {
    pub fn new(s_h: f64, s_v: f64) -> Self {
        Self { s_h, s_v }
    }

    /// Rejects non-finite coordinates and points outside `[0, 1]²`.
    pub fn validate(&self) -> Result<()> {
        let ok = |c: f64| c.is_finite() && (0.0..=1.0).contains(&c);
        if ok(self.s_h) && ok(self.s_v) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                s_h: self.s_h,
                s_v: self.s_v,
            })
        }
    }
}

/// `n` observations of `(location, covariate row, response)`.
///
/// Covariates are stored row-major as an `n × d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    locations: Vec<Location>,
    covariates: Vec<f64>,
    responses: Vec<f64>,
    dim: usize,
}

impl Dataset {
    pub fn new(
        locations: Vec<Location>,
        covariates: Vec<f64>,
        responses: Vec<f64>,
        dim: usize,
    ) -> Result<Self> {
        let n = locations.len();
        if dim == 0 {
            return Err(Error::InvalidDataset("covariate dimension must be >= 1".into()));
        }
        if responses.len() != n || covariates.len() != n * dim {
            return Err(Error::InvalidDataset(format!(
                "row counts disagree: {} locations, {} responses, {} covariate values for d = {}",
                n,
                responses.len(),
                covariates.len(),
                dim
            )));
        }
        for (i, loc) in locations.iter().enumerate() {
            loc.validate().map_err(|_| {
                Error::InvalidDataset(format!("row {}: location outside [0,1]^2", i + 1))
            })?;
        }
        if let Some(i) = covariates.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "row {}: non-finite covariate",
                i / dim + 1
            )));
        }
        if let Some(i) = responses.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!("row {}: non-finite response", i + 1)));
        }
        Ok(Self {
            locations,
            covariates,
            responses,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    /// Covariate dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn location(&self, i: usize) -> Location {
        self.locations[i]
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.covariates[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self, i: usize) -> f64 {
        self.responses[i]
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    /// Keeps only the rows listed in `rows`, in that order.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let mut covariates = Vec::with_capacity(rows.len() * self.dim);
        for &i in rows {
            covariates.extend_from_slice(self.x(i));
        }
        Self {
            locations: rows.iter().map(|&i| self.locations[i]).collect(),
            covariates,
            responses: rows.iter().map(|&i| self.responses[i]).collect(),
            dim: self.dim,
        }
    }

    /// Unbiased sample variance of the responses.
    pub fn response_variance(&self) -> f64 {
        let n = self.len() as f64;
        if self.len() < 2 {
            return 0.0;
        }
        let mean = self.responses.iter().sum::<f64>() / n;
        self.responses.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1.0)
    }

    /// Reads a CSV with header `s_h,s_v,x1,...,xd,y`.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let table = read_table(reader)?;
        let header = &table.header;
        let covariate_cols = expect_layout(header, true)?;
        let dim = covariate_cols.len();
        let mut locations = Vec::with_capacity(table.rows.len());
        let mut covariates = Vec::with_capacity(table.rows.len() * dim);
        let mut responses = Vec::with_capacity(table.rows.len());
        for (row_no, row) in table.rows.iter().enumerate() {
            let loc = Location::new(row[0], row[1]);
            loc.validate().map_err(|_| Error::Csv {
                row: row_no + 1,
                msg: "location outside [0,1]^2".into(),
            })?;
            locations.push(loc);
            covariates.extend_from_slice(&row[2..2 + dim]);
            responses.push(row[2 + dim]);
        }
        Self::new(locations, covariates, responses, dim)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["s_h".to_string(), "s_v".to_string()];
        header.extend((1..=self.dim).map(|j| format!("x{j}")));
        header.push("y".into());
        w.write_record(&header).map_err(csv_err)?;
        for i in 0..self.len() {
            let loc = self.locations[i];
            let mut rec = vec![loc.s_h.to_string(), loc.s_v.to_string()];
            rec.extend(self.x(i).iter().map(|v| v.to_string()));
            rec.push(self.y(i).to_string());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Prediction inputs: a CSV with header `s_h,s_v,x1,...,xd`. A trailing `y`
/// column is accepted and ignored.
pub fn read_points_csv<R: Read>(reader: R) -> Result<(Vec<Location>, Vec<Vec<f64>>)> {
    let table = read_table(reader)?;
    let has_y = table.header.last().map(String::as_str) == Some("y");
    let dim = expect_layout(&table.header, has_y)?.len();
    let mut locs = Vec::with_capacity(table.rows.len());
    let mut xs = Vec::with_capacity(table.rows.len());
    for (row_no, row) in table.rows.iter().enumerate() {
        let loc = Location::new(row[0], row[1]);
        loc.validate().map_err(|_| Error::Csv {
            row: row_no + 1,
            msg: "location outside [0,1]^2".into(),
        })?;
        locs.push(loc);
        xs.push(row[2..2 + dim].to_vec());
    }
    Ok((locs, xs))
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn csv_err(e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    Error::Csv {
        row,
        msg: e.to_string(),
    }
}

fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row_no = idx + 1;
        let rec = rec.map_err(csv_err)?;
        if rec.len() != header.len() {
            return Err(Error::Csv {
                row: row_no,
                msg: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        let mut vals = Vec::with_capacity(rec.len());
        for (field, name) in rec.iter().zip(&header) {
            let v: f64 = field.parse().map_err(|_| Error::Csv {
                row: row_no,
                msg: format!("column `{name}`: cannot parse `{field}` as a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv {
                    row: row_no,
                    msg: format!("column `{name}`: non-finite value `{field}`"),
                });
            }
            vals.push(v);
        }
        rows.push(vals);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Table { header, rows })
}

/// Checks the `s_h,s_v,x1..xd[,y]` layout and returns the covariate column names.
fn expect_layout(header: &[String], with_response: bool) -> Result<Vec<String>> {
    for (pos, name) in [(0, "s_h"), (1, "s_v")] {
        if header.get(pos).map(String::as_str) != Some(name) {
            return Err(Error::MissingColumn(name.into()));
        }
    }
    let end = if with_response {
        if header.last().map(String::as_str) != Some("y") || header.len() < 3 {
            return Err(Error::MissingColumn("y".into()));
        }
        header.len() - 1
    } else {
        header.len()
    };
    let covs: Vec<String> = header[2..end].to_vec();
    if covs.is_empty() {
        return Err(Error::MissingColumn("x1".into()));
    }
    for (j, name) in covs.iter().enumerate() {
        let want = format!("x{}", j + 1);
        if *name != want {
            return Err(Error::MissingColumn(want));
        }
    }
    Ok(covs)
}
