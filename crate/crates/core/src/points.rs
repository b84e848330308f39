use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite set of points in R^d stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "point dimension must be positive");
        PointSet {
            dim,
            coords: Vec::new(),
        }
    }

    pub fn with_capacity(dim: usize, n: usize) -> Self {
        assert!(dim > 0, "point dimension must be positive");
        PointSet {
            dim,
            coords: Vec::with_capacity(dim * n),
        }
    }

    pub fn from_flat(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::param(
                "coords",
                format!("{} values do not form points of dimension {dim}", coords.len()),
            ));
        }
        Ok(PointSet { dim, coords })
    }

    pub fn from_rows<R: AsRef<[f64]>>(dim: usize, rows: &[R]) -> Result<Self> {
        let mut set = PointSet::with_capacity(dim, rows.len());
        for r in rows {
            set.push(r.as_ref())?;
        }
        Ok(set)
    }

    /// One-dimensional points from scalars.
    pub fn from_scalars(values: &[f64]) -> Self {
        PointSet {
            dim: 1,
            coords: values.to_vec(),
        }
    }

    pub fn push(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: p.len(),
            });
        }
        self.coords.extend_from_slice(p);
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    /// Points `x + shift_j` for every shift in `shifts`.
    pub fn translated(x: &[f64], shifts: &PointSet) -> PointSet {
        debug_assert_eq!(x.len(), shifts.dim);
        let mut coords = Vec::with_capacity(shifts.coords.len());
        for z in shifts.iter() {
            coords.extend(x.iter().zip(z).map(|(a, b)| a + b));
        }
        PointSet {
            dim: shifts.dim,
            coords,
        }
    }

    pub fn select(&self, indices: &[usize]) -> PointSet {
        let mut out = PointSet::with_capacity(self.dim, indices.len());
        for &i in indices {
            out.coords.extend_from_slice(self.point(i));
        }
        out
    }
}

#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
