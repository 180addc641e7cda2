//! Uniform grids on the unit square, finite differences and P1 elements.

use crate::linalg::{CsrMatrix, SparseSym};
use crate::{Error, Result};

/// Number of cells per side, `1/h`, for a mesh width that divides the unit interval.
pub fn cells_per_side(h: f64) -> Result<usize> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::InvalidMeshWidth(h));
    }
    let m = (1.0 / h).round();
    if (m * h - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidMeshWidth(h));
    }
    Ok(m as usize)
}

fn interior_cells(h: f64) -> Result<usize> {
    let m = cells_per_side(h)?;
    if m < 2 {
        return Err(Error::InvalidMeshWidth(h));
    }
    Ok(m)
}

/// Index of grid node `(i, j)`, or `None` on the boundary. `x` runs fastest.
#[inline]
pub fn node_index(m: usize, i: usize, j: usize) -> Option<usize> {
    if i == 0 || j == 0 || i >= m || j >= m {
        None
    } else {
        Some((j - 1) * (m - 1) + (i - 1))
    }
}

/// Five-point finite-difference Laplacian with Dirichlet boundary.
pub fn fd_laplacian(h: f64) -> Result<SparseSym> {
    let m = interior_cells(h)?;
    let inv = 1.0 / (h * h);
    let mut trip = Vec::new();
    for j in 1..m {
        for i in 1..m {
            let p = node_index(m, i, j).unwrap();
            trip.push((p, p, 4.0 * inv));
            for (a, b) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                if let Some(q) = node_index(m, a, b) {
                    trip.push((p, q, -inv));
                }
            }
        }
    }
    SparseSym::from_triplets((m - 1) * (m - 1), &trip)
}

/// The two triangles of cell `(i, j)`, split along the lower-left to
/// upper-right diagonal, as lists of grid nodes.
pub fn cell_triangles(i: usize, j: usize) -> [[(usize, usize); 3]; 2] {
    [[(i, j), (i + 1, j), (i + 1, j + 1)], [(i, j), (i + 1, j + 1), (i, j + 1)]]
}

/// P1 stiffness and consistent mass matrices on the interior nodes.
pub fn fem_p1(h: f64) -> Result<(SparseSym, SparseSym)> {
    let m = interior_cells(h)?;
    let n = (m - 1) * (m - 1);
    let mut kt = Vec::new();
    let mut mt = Vec::new();
    for j in 0..m {
        for i in 0..m {
            for tri in cell_triangles(i, j) {
                let xy: Vec<(f64, f64)> = tri.iter().map(|&(a, b)| (a as f64 * h, b as f64 * h)).collect();
                let det = (xy[1].0 - xy[0].0) * (xy[2].1 - xy[0].1) - (xy[2].0 - xy[0].0) * (xy[1].1 - xy[0].1);
                let area = det.abs() / 2.0;
                let grad: Vec<(f64, f64)> = (0..3)
                    .map(|k| {
                        let (p, q) = (xy[(k + 1) % 3], xy[(k + 2) % 3]);
                        ((p.1 - q.1) / det, (q.0 - p.0) / det)
                    })
                    .collect();
                for a in 0..3 {
                    let Some(ia) = node_index(m, tri[a].0, tri[a].1) else { continue };
                    for b in 0..3 {
                        let Some(ib) = node_index(m, tri[b].0, tri[b].1) else { continue };
                        kt.push((ia, ib, area * (grad[a].0 * grad[b].0 + grad[a].1 * grad[b].1)));
                        let mass = if a == b { area / 6.0 } else { area / 12.0 };
                        mt.push((ia, ib, mass));
                    }
                }
            }
        }
    }
    Ok((SparseSym::from_triplets(n, &kt)?, SparseSym::from_triplets(n, &mt)?))
}

/// Coarse/fine grids with overlapping subdomains and the coarse prolongation.
#[derive(Debug, Clone)]
pub struct MeshHierarchy {
    pub h: f64,
    pub coarse_h: f64,
    pub overlap_ratio: f64,
    /// `1/h`
    pub fine_cells: usize,
    /// `1/H`
    pub coarse_cells: usize,
    /// Overlap band width in fine cells.
    pub overlap_cells: usize,
    pub subdomains: Vec<Vec<usize>>,
    /// Fine × coarse interpolation matrix; absent when there is no coarse interior node.
    pub prolongation: Option<CsrMatrix>,
}

impl MeshHierarchy {
    pub fn n_fine(&self) -> usize {
        (self.fine_cells - 1) * (self.fine_cells - 1)
    }

    pub fn n_coarse(&self) -> usize {
        self.coarse_cells.saturating_sub(1).pow(2)
    }

    pub fn node_coordinates(&self) -> Vec<(f64, f64)> {
        let m = self.fine_cells;
        let mut out = Vec::with_capacity(self.n_fine());
        for j in 1..m {
            for i in 1..m {
                out.push((i as f64 * self.h, j as f64 * self.h));
            }
        }
        out
    }
}

pub fn mesh_hierarchy(coarse_h: f64, h: f64, overlap_ratio: f64) -> Result<MeshHierarchy> {
    let m = interior_cells(h)?;
    let mc = cells_per_side(coarse_h)?;
    if !(overlap_ratio > 0.0 && overlap_ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!("overlap ratio {overlap_ratio} outside (0, 1]")));
    }
    if mc >= m || m % mc != 0 || !(m / mc).is_power_of_two() {
        return Err(Error::InvalidArgument(format!("H/h = {}/{} is not a power of two greater than one", m, mc)));
    }
    let r = m / mc;
    let delta = overlap_ratio * coarse_h;
    let d = (delta / h).round();
    if d < 1.0 || (d * h - delta).abs() > 1e-12 {
        return Err(Error::MisalignedOverlap { delta, h });
    }
    let d = d as i64;
    let mut subdomains = Vec::with_capacity(mc * mc);
    for cj in 0..mc as i64 {
        for ci in 0..mc as i64 {
            let (xlo, xhi) = (ci * r as i64 - d, (ci + 1) * r as i64 + d);
            let (ylo, yhi) = (cj * r as i64 - d, (cj + 1) * r as i64 + d);
            let mut set = Vec::new();
            for j in (ylo + 1).max(1)..yhi.min(m as i64) {
                for i in (xlo + 1).max(1)..xhi.min(m as i64) {
                    set.push(node_index(m, i as usize, j as usize).unwrap());
                }
            }
            if set.is_empty() {
                return Err(Error::EmptySubdomain(subdomains.len()));
            }
            subdomains.push(set);
        }
    }
    let prolongation = if mc >= 2 { Some(p1_prolongation(m, mc)?) } else { None };
    Ok(MeshHierarchy {
        h,
        coarse_h,
        overlap_ratio,
        fine_cells: m,
        coarse_cells: mc,
        overlap_cells: d as usize,
        subdomains,
        prolongation,
    })
}

/// Interpolation of coarse P1 functions at fine nodes. Both meshes use the
/// same diagonal orientation, so the coarse space is nested in the fine one.
fn p1_prolongation(m: usize, mc: usize) -> Result<CsrMatrix> {
    let r = m / mc;
    let nc = (mc - 1) * (mc - 1);
    let mut trip = Vec::new();
    for j in 1..m {
        for i in 1..m {
            let row = node_index(m, i, j).unwrap();
            let (ci, cj) = ((i / r).min(mc - 1), (j / r).min(mc - 1));
            let s = (i - ci * r) as f64 / r as f64;
            let t = (j - cj * r) as f64 / r as f64;
            let weights = if s >= t {
                [((ci, cj), 1.0 - s), ((ci + 1, cj), s - t), ((ci + 1, cj + 1), t)]
            } else {
                [((ci, cj), 1.0 - t), ((ci + 1, cj + 1), s), ((ci, cj + 1), t - s)]
            };
            for ((a, b), w) in weights {
                if w != 0.0 {
                    if let Some(col) = node_index(mc, a, b) {
                        trip.push((row, col, w));
                    }
                }
            }
        }
    }
    CsrMatrix::from_triplets((m - 1) * (m - 1), nc, &trip)
}
