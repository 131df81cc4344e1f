use super::grid::{ascending_edges, containing_cell, GridDefinition};
use super::raster::{FireObservationGrid, Layer};
use crate::error::{Error, Result};

fn check_layer(layer: &Layer, grid: &GridDefinition) -> Result<()> {
    if layer.n_rows != grid.n_rows() || layer.n_cols != grid.n_cols() {
        return Err(Error::GridMismatch(format!(
            "layer is {}x{}, source grid is {}x{}",
            layer.n_rows,
            layer.n_cols,
            grid.n_rows(),
            grid.n_cols()
        )));
    }
    Ok(())
}

/// Interpolation stencil along one axis: `(i0, i1, w)` with value
/// `(1 − w)·v[i0] + w·v[i1]`. Targets outside the source hull clamp to the end center.
fn stencil(src: &[f64], x: f64) -> (usize, usize, f64) {
    let n = src.len();
    let ascending = src[1] > src[0];
    let at = |k: usize| if ascending { src[k] } else { src[n - 1 - k] };
    let idx = |k: usize| if ascending { k } else { n - 1 - k };
    let (lo, hi) = (at(0), at(n - 1));
    let x = x.clamp(lo, hi);
    let mut k = 0;
    while k + 2 < n && at(k + 1) <= x {
        k += 1;
    }
    let w = (x - at(k)) / (at(k + 1) - at(k));
    (idx(k), idx(k + 1), w)
}

/// Bilinear interpolation between source cell centers, every time step.
///
/// A target value is missing when any source corner with nonzero weight is
/// missing.
pub fn resample_continuous(source: &Layer, from: &GridDefinition, to: &GridDefinition) -> Result<Layer> {
    check_layer(source, from)?;
    if from.n_rows() < 2 || from.n_cols() < 2 {
        return Err(Error::Data(format!(
            "bilinear resampling needs at least 2x2 source cells, got {}x{}",
            from.n_rows(),
            from.n_cols()
        )));
    }
    let rows: Vec<_> = to.lat.iter().map(|&y| stencil(&from.lat, y)).collect();
    let cols: Vec<_> = to.lon.iter().map(|&x| stencil(&from.lon, x)).collect();
    let mut out = Layer::filled(source.n_time, to.n_rows(), to.n_cols(), 0.0);
    for t in 0..source.n_time {
        for (r, &(r0, r1, wr)) in rows.iter().enumerate() {
            for (c, &(c0, c1, wc)) in cols.iter().enumerate() {
                let corners = [
                    (r0, c0, (1.0 - wr) * (1.0 - wc)),
                    (r0, c1, (1.0 - wr) * wc),
                    (r1, c0, wr * (1.0 - wc)),
                    (r1, c1, wr * wc),
                ];
                let mut acc = 0.0f64;
                let mut missing = false;
                for (i, j, w) in corners {
                    if w == 0.0 {
                        continue;
                    }
                    match source.get(t, i, j) {
                        Some(v) => acc += w * v as f64,
                        None => missing = true,
                    }
                }
                if missing {
                    out.set_missing(t, r, c);
                } else {
                    out.set(t, r, c, acc as f32);
                }
            }
        }
    }
    Ok(out)
}

/// Nearest source center along one axis; ties go to the smaller index.
fn nearest(src: &[f64], x: f64) -> usize {
    let mut best = 0;
    for (k, &s) in src.iter().enumerate() {
        if (s - x).abs() < (src[best] - x).abs() {
            best = k;
        }
    }
    best
}

/// Nearest-neighbor class assignment, every time step.
///
/// On a rectilinear grid the nearest center is found axis by axis, so ties
/// resolve to the lexicographically smallest `(row, col)`.
pub fn resample_categorical(source: &Layer, from: &GridDefinition, to: &GridDefinition) -> Result<Layer> {
    check_layer(source, from)?;
    if source.values.is_empty() {
        return Err(Error::Data("categorical resampling of an empty source".into()));
    }
    let rows: Vec<usize> = to.lat.iter().map(|&y| nearest(&from.lat, y)).collect();
    let cols: Vec<usize> = to.lon.iter().map(|&x| nearest(&from.lon, x)).collect();
    let mut out = Layer::filled(source.n_time, to.n_rows(), to.n_cols(), 0.0);
    for t in 0..source.n_time {
        for (r, &i) in rows.iter().enumerate() {
            for (c, &j) in cols.iter().enumerate() {
                match source.get(t, i, j) {
                    Some(v) => out.set(t, r, c, v),
                    None => out.set_missing(t, r, c),
                }
            }
        }
    }
    Ok(out)
}

/// Logical OR of fine-grid fires into the target cell containing each fine
/// cell center. Target cells that receive no fine cell are flagged missing.
pub fn pool_fire(fine: &FireObservationGrid, target: &GridDefinition) -> Result<FireObservationGrid> {
    let (fr, fc) = fine.grid.resolution();
    let (tr, tc) = target.resolution();
    let coarser = |f: f64, t: f64| f > 0.0 && t > 0.0 && f > t * (1.0 + 1e-9);
    if coarser(fr, tr) || coarser(fc, tc) {
        return Err(Error::Data(format!(
            "fine grid spacing ({fr}, {fc}) is coarser than target spacing ({tr}, {tc})"
        )));
    }
    let (lat_edges, lat_up) = ascending_edges(&target.lat);
    let (lon_edges, lon_up) = ascending_edges(&target.lon);
    let row_map: Vec<Option<usize>> = fine.grid.lat.iter().map(|&y| containing_cell(&lat_edges, lat_up, y)).collect();
    let col_map: Vec<Option<usize>> = fine.grid.lon.iter().map(|&x| containing_cell(&lon_edges, lon_up, x)).collect();

    let mut out = FireObservationGrid::empty(target.clone(), fine.start, fine.n_days);
    let mut covered = vec![false; target.n_cells()];
    for (i, ri) in row_map.iter().enumerate() {
        for (j, cj) in col_map.iter().enumerate() {
            let (Some(r), Some(c)) = (ri, cj) else { continue };
            if fine.missing_cells[i * fine.grid.n_cols() + j] {
                continue;
            }
            covered[r * target.n_cols() + c] = true;
            for t in 0..fine.n_days {
                if fine.get(t, i, j) {
                    out.set(t, *r, *c, true);
                }
            }
        }
    }
    out.missing_cells = covered.iter().map(|&k| !k).collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn layer2d(rows: usize, cols: usize, v: &[f32]) -> Layer {
        Layer::new(1, rows, cols, v.to_vec(), None).unwrap()
    }

    #[test]
    fn bilinear_midpoint() {
        let g = GridDefinition::regular(0.0, 0.0, 1.0, 1.0, 2, 2).unwrap();
        let src = layer2d(2, 2, &[0.0, 1.0, 0.0, 1.0]);
        let t = GridDefinition::new(vec![0.5], vec![0.5]).unwrap();
        let out = resample_continuous(&src, &g, &t).unwrap();
        assert_eq!(out.get(0, 0, 0), Some(0.5));
    }

    #[test]
    fn bilinear_needs_two_by_two() {
        let g = GridDefinition::regular(0.0, 0.0, 1.0, 1.0, 1, 3).unwrap();
        let src = layer2d(1, 3, &[0.0, 1.0, 2.0]);
        assert!(resample_continuous(&src, &g, &g).is_err());
    }

    #[test]
    fn bilinear_clamps_outside_hull() {
        let g = GridDefinition::regular(0.0, 0.0, 1.0, 1.0, 2, 2).unwrap();
        let src = layer2d(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let t = GridDefinition::new(vec![-5.0, 9.0], vec![-1.0]).unwrap();
        let out = resample_continuous(&src, &g, &t).unwrap();
        assert_eq!(out.get(0, 0, 0), Some(1.0));
        assert_eq!(out.get(0, 1, 0), Some(3.0));
    }

    #[test]
    fn categorical_tie_goes_to_smaller_index() {
        let g = GridDefinition::regular(0.0, 0.0, 1.0, 1.0, 1, 2).unwrap();
        let src = layer2d(1, 2, &[2.0, 7.0]);
        let t = GridDefinition::new(vec![0.0], vec![0.5]).unwrap();
        assert_eq!(resample_categorical(&src, &g, &t).unwrap().get(0, 0, 0), Some(2.0));
        // same with a descending axis: index 0 still wins
        let g = GridDefinition::new(vec![0.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(resample_categorical(&src, &g, &t).unwrap().get(0, 0, 0), Some(2.0));
    }

    #[test]
    fn pooling_ors_blocks_and_flags_empty_cells() {
        let d = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let fine_grid = GridDefinition::regular(0.125, 0.125, 0.25, 0.25, 4, 8).unwrap();
        let mut fine = FireObservationGrid::empty(fine_grid, d, 1);
        fine.set(0, 2, 1, true);
        let target = GridDefinition::regular(0.5, 0.5, 1.0, 1.0, 1, 3).unwrap();
        let out = pool_fire(&fine, &target).unwrap();
        assert_eq!(out.day(0), &[1, 0, 0]);
        assert_eq!(out.missing_cells, vec![false, false, true]);
    }

    #[test]
    fn pooling_rejects_coarser_source() {
        let d = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let coarse = GridDefinition::regular(0.0, 0.0, 2.0, 2.0, 2, 2).unwrap();
        let fine = GridDefinition::regular(0.0, 0.0, 1.0, 1.0, 3, 3).unwrap();
        assert!(pool_fire(&FireObservationGrid::empty(coarse, d, 1), &fine).is_err());
    }
}
