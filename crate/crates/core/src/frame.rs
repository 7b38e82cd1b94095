use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::scalar::Real;

/// `T × m` block of observations with an integer time index, one row per
/// time point.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame<T> {
    time: Vec<i64>,
    values: Matrix<T>,
}

impl<T: Real> TimeSeriesFrame<T> {
    pub fn new(time: Vec<i64>, values: Matrix<T>) -> Result<Self> {
        if time.len() != values.rows() {
            return Err(Error::LengthMismatch {
                what: "time index vs. observation rows",
                expected: values.rows(),
                got: time.len(),
            });
        }
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::EmptyData);
        }
        Ok(Self { time, values })
    }

    /// Frame with time index `1..=T`.
    pub fn from_values(values: Matrix<T>) -> Result<Self> {
        let time = (1..=values.rows() as i64).collect();
        Self::new(time, values)
    }

    /// Number of time points `T`.
    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    /// Number of component series `m`.
    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn time(&self) -> &[i64] {
        &self.time
    }

    pub fn values(&self) -> &Matrix<T> {
        &self.values
    }

    pub fn observation(&self, t: usize) -> &[T] {
        self.values.row(t)
    }

    /// Rows `start..start + len` as a new frame (time labels preserved).
    pub fn window(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() || len == 0 {
            return Err(Error::LengthMismatch {
                what: "window exceeds series",
                expected: self.len(),
                got: start + len,
            });
        }
        Ok(Self {
            time: self.time[start..start + len].to_vec(),
            values: self.values.slice_rows(start, start + len),
        })
    }
}
