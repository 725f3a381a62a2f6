//! Point clouds and their CSV representation.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// `n_points` points in `ambient_dim`-dimensional space, stored row-major.
///
/// Every coordinate is finite; construction rejects NaN and infinities.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    ambient_dim: usize,
    data: Vec<f64>,
}

impl PointCloud {
    pub fn new(ambient_dim: usize, data: Vec<f64>) -> Result<Self> {
        if ambient_dim == 0 {
            return Err(Error::InvalidArgument("ambient_dim must be >= 1".into()));
        }
        if !data.len().is_multiple_of(ambient_dim) {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not form rows of width {ambient_dim}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput {
                point: pos / ambient_dim,
                dim: pos % ambient_dim,
            });
        }
        Ok(Self { ambient_dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = match rows.first() {
            Some(r) => r.as_ref().len(),
            None => return Err(Error::InvalidArgument("cannot infer dimension of an empty row set".into())),
        };
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} columns, expected {dim}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    #[inline]
    pub fn n_points(&self) -> usize {
        self.data.len() / self.ambient_dim
    }

    #[inline]
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.ambient_dim..(i + 1) * self.ambient_dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.ambient_dim)
    }

    /// New cloud made of the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let mut data = Vec::with_capacity(indices.len() * self.ambient_dim);
        for &i in indices {
            data.extend_from_slice(self.point(i));
        }
        PointCloud {
            ambient_dim: self.ambient_dim,
            data,
        }
    }

    /// Reads one point per row. A first row that does not parse as numbers
    /// is treated as a header.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut data = Vec::new();
        let mut dim = None;
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            if record.iter().all(|f| f.is_empty()) {
                continue;
            }
            let parsed: std::result::Result<Vec<f64>, _> =
                record.iter().map(|f| f.parse::<f64>()).collect();
            let values = match parsed {
                Ok(v) => v,
                Err(_) if row == 0 => continue,
                Err(e) => {
                    return Err(Error::Format(format!("csv row {}: {e}", row + 1)));
                }
            };
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(Error::DimensionMismatch(format!(
                        "csv row {} has {} columns, expected {d}",
                        row + 1,
                        values.len()
                    )))
                }
                _ => {}
            }
            data.extend(values);
        }
        let dim = dim.ok_or_else(|| Error::Format("csv contains no numeric rows".into()))?;
        Self::new(dim, data)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    /// Writes one point per row without a header. Values use the shortest
    /// representation that round-trips.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        let mut buf = Vec::with_capacity(self.ambient_dim);
        for row in self.rows() {
            buf.clear();
            buf.extend(row.iter().map(|v| v.to_string()));
            wtr.write_record(&buf)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}
