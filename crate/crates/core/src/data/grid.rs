use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rectilinear latitude/longitude grid, described by its cell centers.
///
/// Row `r` sits at `lat[r]` and column `c` at `lon[c]`. Each axis must be
/// strictly monotone; either direction is accepted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDefinition {
    pub lat: Vec<f64>,
    pub lon: Vec<f64>,
}

impl GridDefinition {
    pub fn new(lat: Vec<f64>, lon: Vec<f64>) -> Result<Self> {
        let g = GridDefinition { lat, lon };
        g.validate()?;
        Ok(g)
    }

    /// Evenly spaced grid whose first center is `(lat0, lon0)`.
    pub fn regular(lat0: f64, lon0: f64, dlat: f64, dlon: f64, n_rows: usize, n_cols: usize) -> Result<Self> {
        Self::new(
            (0..n_rows).map(|i| lat0 + dlat * i as f64).collect(),
            (0..n_cols).map(|j| lon0 + dlon * j as f64).collect(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (name, axis) in [("lat", &self.lat), ("lon", &self.lon)] {
            if axis.is_empty() {
                return Err(Error::Data(format!("grid axis {name} is empty")));
            }
            if axis.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("grid axis {name} has non-finite centers")));
            }
            let up = axis.windows(2).all(|w| w[1] > w[0]);
            let down = axis.windows(2).all(|w| w[1] < w[0]);
            if !(up || down) {
                return Err(Error::Data(format!("grid axis {name} is not strictly monotone")));
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.lat.len()
    }

    pub fn n_cols(&self) -> usize {
        self.lon.len()
    }

    pub fn n_cells(&self) -> usize {
        self.n_rows() * self.n_cols()
    }

    /// Mean center spacing (degrees) along latitude and longitude; zero for a
    /// single-center axis.
    pub fn resolution(&self) -> (f64, f64) {
        (mean_spacing(&self.lat), mean_spacing(&self.lon))
    }

    pub fn same_as(&self, other: &GridDefinition) -> bool {
        self == other
    }

    pub fn ensure_same(&self, other: &GridDefinition, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: {}x{} grid differs from {}x{}",
                other.n_rows(),
                other.n_cols(),
                self.n_rows(),
                self.n_cols()
            )))
        }
    }
}

fn mean_spacing(axis: &[f64]) -> f64 {
    if axis.len() < 2 {
        return 0.0;
    }
    (axis[axis.len() - 1] - axis[0]).abs() / (axis.len() - 1) as f64
}

/// Cell edges along one axis: midpoints between neighboring centers, with the
/// outer edges half a spacing beyond the end centers. Returned in ascending
/// order together with a flag telling whether the axis itself ascends.
pub(crate) fn ascending_edges(axis: &[f64]) -> (Vec<f64>, bool) {
    let ascending = axis.len() < 2 || axis[1] > axis[0];
    let centers: Vec<f64> = if ascending {
        axis.to_vec()
    } else {
        axis.iter().rev().copied().collect()
    };
    let n = centers.len();
    let half = if n < 2 { 0.5 } else { (centers[1] - centers[0]) / 2.0 };
    let half_last = if n < 2 { 0.5 } else { (centers[n - 1] - centers[n - 2]) / 2.0 };
    let mut edges = Vec::with_capacity(n + 1);
    edges.push(centers[0] - half);
    for w in centers.windows(2) {
        edges.push((w[0] + w[1]) / 2.0);
    }
    edges.push(centers[n - 1] + half_last);
    (edges, ascending)
}

/// Index of the cell along `axis` whose edges contain `x` (lower edge
/// inclusive, upper exclusive, last upper edge inclusive).
pub(crate) fn containing_cell(edges: &[f64], ascending: bool, x: f64) -> Option<usize> {
    let n = edges.len() - 1;
    if !(x >= edges[0] && x <= edges[n]) {
        return None;
    }
    let k = edges.partition_point(|&e| e <= x).saturating_sub(1).min(n - 1);
    Some(if ascending { k } else { n - 1 - k })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_monotone_axes() {
        assert!(GridDefinition::new(vec![0.0, 1.0, 1.0], vec![0.0]).is_err());
        assert!(GridDefinition::new(vec![0.0, 2.0, 1.0], vec![0.0]).is_err());
        assert!(GridDefinition::new(vec![], vec![0.0]).is_err());
        assert!(GridDefinition::new(vec![3.0, 2.0, 1.0], vec![0.0, 0.5]).is_ok());
    }

    #[test]
    fn containment_in_both_directions() {
        let (e, up) = ascending_edges(&[0.0, 1.0, 2.0]);
        assert_eq!(e, vec![-0.5, 0.5, 1.5, 2.5]);
        assert_eq!(containing_cell(&e, up, 0.5), Some(1));
        assert_eq!(containing_cell(&e, up, 2.5), Some(2));
        assert_eq!(containing_cell(&e, up, 2.6), None);
        let (e, up) = ascending_edges(&[2.0, 1.0, 0.0]);
        assert_eq!(containing_cell(&e, up, 0.1), Some(2));
        assert_eq!(containing_cell(&e, up, 1.9), Some(0));
    }

    #[test]
    fn resolution_is_mean_spacing() {
        let g = GridDefinition::regular(30.0, -120.0, -0.25, 0.25, 5, 3).unwrap();
        assert_eq!(g.resolution(), (0.25, 0.25));
        assert_eq!(g.n_cells(), 15);
    }
}
