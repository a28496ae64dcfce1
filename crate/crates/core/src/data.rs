use crate::error::{invalid_input, Result};
use crate::margins::MarginScale;

/// An `n × D` panel of observations stored row-major. Missing entries are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationMatrix {
    nrows: usize,
    ncols: usize,
    values: Vec<f64>,
    scale: MarginScale,
}

impl ObservationMatrix {
    pub fn new(nrows: usize, ncols: usize, values: Vec<f64>, scale: MarginScale) -> Result<Self> {
        if values.len() != nrows * ncols {
            return invalid_input(format!(
                "expected {} values for a {nrows}x{ncols} matrix, got {}",
                nrows * ncols,
                values.len()
            ));
        }
        if values.iter().any(|v| v.is_infinite()) {
            return invalid_input("observations must be finite or missing");
        }
        Ok(Self { nrows, ncols, values, scale })
    }

    pub fn from_rows(rows: &[Vec<f64>], scale: MarginScale) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return invalid_input("rows have different lengths");
        }
        let values = rows.iter().flatten().copied().collect();
        Self::new(rows.len(), ncols, values, scale)
    }

    pub fn filled(nrows: usize, ncols: usize, value: f64, scale: MarginScale) -> Self {
        Self { nrows, ncols, values: vec![value; nrows * ncols], scale }
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn scale(&self) -> MarginScale {
        self.scale
    }

    pub fn with_scale(mut self, scale: MarginScale) -> Self {
        self.scale = scale;
        self
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.ncols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[i * self.ncols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.ncols..(i + 1) * self.ncols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.values[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.ncols.max(1)).take(self.nrows)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.nrows).map(|i| self.get(i, j)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_missing(&self, i: usize, j: usize) -> bool {
        self.get(i, j).is_nan()
    }

    /// New matrix made of the given rows, in order. Indices may repeat.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut values = Vec::with_capacity(idx.len() * self.ncols);
        for &i in idx {
            values.extend_from_slice(self.row(i));
        }
        Self { nrows: idx.len(), ncols: self.ncols, values, scale: self.scale }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.nrows * cols.len());
        for i in 0..self.nrows {
            for &j in cols {
                values.push(self.get(i, j));
            }
        }
        Self { nrows: self.nrows, ncols: cols.len(), values, scale: self.scale }
    }

    /// Applies `f` to every non-missing entry.
    pub fn map(&self, scale: MarginScale, f: impl Fn(f64) -> f64) -> Self {
        let values = self.values.iter().map(|&v| if v.is_nan() { v } else { f(v) }).collect();
        Self { nrows: self.nrows, ncols: self.ncols, values, scale }
    }

    /// Stacks matrices with the same width vertically.
    pub fn vstack(parts: &[ObservationMatrix]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return invalid_input("nothing to stack");
        };
        let mut values = Vec::new();
        let mut nrows = 0;
        for p in parts {
            if p.ncols != first.ncols {
                return invalid_input("column counts differ");
            }
            values.extend_from_slice(&p.values);
            nrows += p.nrows;
        }
        Ok(Self { nrows, ncols: first.ncols, values, scale: first.scale })
    }
}
