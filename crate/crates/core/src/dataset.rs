//! Paired samples `{(X_i, Y_i)}` with real-vector inputs and outputs.

use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

/// An immutable paired sample. Inputs share one dimension, outputs another,
/// and every coordinate is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<Vec<f64>>,
    responses: Vec<Vec<f64>>,
}

impl Dataset {
    /// Validates and wraps a paired sample. Requires at least two rows,
    /// consistent dimensions and finite coordinates.
    pub fn new(points: Vec<Vec<f64>>, responses: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() != responses.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} responses",
                points.len(),
                responses.len()
            )));
        }
        if points.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 rows, got {}",
                points.len()
            )));
        }
        let d_in = points[0].len();
        let d_out = responses[0].len();
        if d_in == 0 || d_out == 0 {
            return Err(Error::InvalidInput("zero-dimensional rows".into()));
        }
        for (i, x) in points.iter().enumerate() {
            if x.len() != d_in {
                return Err(Error::DimensionMismatch(format!(
                    "point {i} has dimension {}, expected {d_in}",
                    x.len()
                )));
            }
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("point {i} has a non-finite coordinate")));
            }
        }
        for (i, y) in responses.iter().enumerate() {
            if y.len() != d_out {
                return Err(Error::DimensionMismatch(format!(
                    "response {i} has dimension {}, expected {d_out}",
                    y.len()
                )));
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "response {i} has a non-finite coordinate"
                )));
            }
        }
        Ok(Self { points, responses })
    }

    /// Convenience constructor for scalar responses.
    pub fn with_scalar_responses(points: Vec<Vec<f64>>, responses: Vec<f64>) -> Result<Self> {
        let responses = responses.into_iter().map(|y| vec![y]).collect();
        Self::new(points, responses)
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn input_dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn output_dim(&self) -> usize {
        self.responses[0].len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn response(&self, i: usize) -> &[f64] {
        &self.responses[i]
    }

    /// Scalar response accessor; panics unless `output_dim() == 1`.
    pub fn scalar_response(&self, i: usize) -> f64 {
        assert_eq!(self.output_dim(), 1, "scalar_response on vector-valued data");
        self.responses[i][0]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn responses(&self) -> &[Vec<f64>] {
        &self.responses
    }

    /// Reads the CSV schema written by [`Dataset::write_csv`]: a header row of
    /// input columns `x0..x{d-1}` followed by output columns `y0..y{d'-1}`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse(format!("reading CSV header: {e}")))?
            .clone();

        let mut x_cols: Vec<(usize, usize)> = Vec::new(); // (index in row, coordinate)
        let mut y_cols: Vec<(usize, usize)> = Vec::new();
        for (col, name) in headers.iter().enumerate() {
            let name = name.trim();
            if let Some(rest) = name.strip_prefix('x') {
                if let Ok(k) = rest.parse::<usize>() {
                    x_cols.push((col, k));
                    continue;
                }
            }
            if let Some(rest) = name.strip_prefix('y') {
                if let Ok(k) = rest.parse::<usize>() {
                    y_cols.push((col, k));
                    continue;
                }
            }
            return Err(Error::Parse(format!(
                "line 1: unrecognised column {name:?} (expected x0..x{{d-1}}, y0..y{{d'-1}})"
            )));
        }
        x_cols.sort_by_key(|&(_, k)| k);
        y_cols.sort_by_key(|&(_, k)| k);
        for (want, &(_, got)) in x_cols.iter().enumerate() {
            if got != want {
                return Err(Error::Parse(format!(
                    "line 1: input columns must be x0..x{{d-1}} without gaps, missing x{want}"
                )));
            }
        }
        for (want, &(_, got)) in y_cols.iter().enumerate() {
            if got != want {
                return Err(Error::Parse(format!(
                    "line 1: output columns must be y0..y{{d'-1}} without gaps, missing y{want}"
                )));
            }
        }
        if x_cols.is_empty() || y_cols.is_empty() {
            return Err(Error::Parse("line 1: need at least one x column and one y column".into()));
        }

        let mut points = Vec::new();
        let mut responses = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Parse(format!("reading CSV record: {e}")))?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let parse = |col: usize| -> Result<f64> {
                let raw = rec.get(col).ok_or_else(|| {
                    Error::Parse(format!("line {line}: missing column {}", col + 1))
                })?;
                raw.trim().parse::<f64>().map_err(|_| {
                    Error::Parse(format!("line {line}: {raw:?} is not a number"))
                })
            };
            let mut x = Vec::with_capacity(x_cols.len());
            for &(col, _) in &x_cols {
                x.push(parse(col)?);
            }
            let mut y = Vec::with_capacity(y_cols.len());
            for &(col, _) in &y_cols {
                y.push(parse(col)?);
            }
            points.push(x);
            responses.push(y);
        }
        Self::new(points, responses)
    }

    pub fn read_csv_path<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    /// Writes the dataset as CSV. Floats are printed in shortest round-trip
    /// form so that read-after-write reproduces the values bit for bit.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let header: Vec<String> = (0..self.input_dim())
            .map(|k| format!("x{k}"))
            .chain((0..self.output_dim()).map(|k| format!("y{k}")))
            .collect();
        wtr.write_record(&header)
            .map_err(|e| Error::Parse(format!("writing CSV: {e}")))?;
        for i in 0..self.n() {
            // `{}` on f64 is shortest round-trip formatting.
            let row: Vec<String> = self.points[i]
                .iter()
                .chain(self.responses[i].iter())
                .map(|v| format!("{v}"))
                .collect();
            wtr.write_record(&row)
                .map_err(|e| Error::Parse(format!("writing CSV: {e}")))?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_csv_path<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}
