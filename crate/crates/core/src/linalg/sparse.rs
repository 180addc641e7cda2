use std::collections::BTreeMap;

use super::{check_dim, DenseSym, LinearOperator};
use crate::{Error, Result};

/// General sparse matrix in CSR format (rows × cols).
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles from triplets; duplicates are summed, explicit zeros kept.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut per_row: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); rows];
        for &(i, j, v) in triplets {
            if i >= rows || j >= cols {
                return Err(Error::InvalidArgument(format!(
                    "triplet ({i}, {j}) outside a {rows}x{cols} matrix"
                )));
            }
            *per_row[i].entry(j).or_insert(0.0) += v;
        }
        let mut indptr = Vec::with_capacity(rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in per_row {
            for (j, v) in row {
                indices.push(j);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(Self { rows, cols, indptr, indices, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[r.clone()], &self.values[r])
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let (idx, val) = self.row(i);
                idx.iter().zip(val).map(|(&j, v)| v * x[j]).sum()
            })
            .collect()
    }

    /// `selfᵀ x`
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            if *xi == 0.0 {
                continue;
            }
            let (idx, val) = self.row(i);
            for (&j, v) in idx.iter().zip(val) {
                y[j] += v * xi;
            }
        }
        y
    }

    /// Row sums; handy for checking interpolation operators.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    /// Numerical rank via dense Gram matrix (small matrices only).
    pub fn gram(&self) -> DenseSym {
        let mut g = vec![0.0; self.cols * self.cols];
        for i in 0..self.rows {
            let (idx, val) = self.row(i);
            for (a, &ja) in idx.iter().enumerate() {
                for (b, &jb) in idx.iter().enumerate() {
                    g[ja * self.cols + jb] += val[a] * val[b];
                }
            }
        }
        DenseSym::from_row_major(self.cols, g).expect("square")
    }
}

/// Sparse symmetric matrix in CSR format, both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    inner: CsrMatrix,
}

impl SparseSym {
    /// Assembles from triplets covering both triangles. Fails if the
    /// result is not structurally and numerically symmetric.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let inner = CsrMatrix::from_triplets(n, n, triplets)?;
        let m = Self { inner };
        m.check_symmetric()?;
        Ok(m)
    }

    /// Assembles from the lower (or upper) triangle only, mirroring
    /// off-diagonal entries.
    pub fn from_triangle(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut full = Vec::with_capacity(2 * triplets.len());
        for &(i, j, v) in triplets {
            full.push((i, j, v));
            if i != j {
                full.push((j, i, v));
            }
        }
        Self::from_triplets(n, &full)
    }

    fn check_symmetric(&self) -> Result<()> {
        let n = self.n();
        for i in 0..n {
            let (idx, val) = self.inner.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                let t = self.get(j, i);
                if t != v {
                    return Err(Error::InvalidArgument(format!(
                        "sparse matrix not symmetric at ({i}, {j}): {v} vs {t}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.inner.rows
    }

    pub fn nnz(&self) -> usize {
        self.inner.nnz()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        self.inner.row(i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (idx, val) = self.inner.row(i);
        match idx.binary_search(&j) {
            Ok(k) => val[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.inner.matvec(x)
    }

    pub fn as_csr(&self) -> &CsrMatrix {
        &self.inner
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, &t).expect("diagonal is symmetric")
    }

    pub fn diag(d: &[f64]) -> Self {
        let t: Vec<_> = d.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        Self::from_triplets(d.len(), &t).expect("diagonal is symmetric")
    }

    pub fn to_dense(&self) -> DenseSym {
        DenseSym::from_fn(self.n(), |i, j| self.get(i, j))
    }

    pub fn from_dense(m: &DenseSym) -> Self {
        let n = m.n();
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = m.get(i, j);
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, &t).expect("dense input is symmetric")
    }

    /// Principal submatrix on the given (sorted, distinct) index set.
    pub fn principal(&self, index: &[usize]) -> Self {
        let mut local = vec![usize::MAX; self.n()];
        for (k, &g) in index.iter().enumerate() {
            local[g] = k;
        }
        let mut t = Vec::new();
        for (k, &g) in index.iter().enumerate() {
            let (idx, val) = self.row(g);
            for (&j, &v) in idx.iter().zip(val) {
                let lj = local[j];
                if lj != usize::MAX {
                    t.push((k, lj, v));
                }
            }
        }
        Self::from_triplets(index.len(), &t).expect("principal submatrix of a symmetric matrix")
    }

    /// Galerkin product `Pᵀ · self · P` for a prolongation `P` (n × m).
    pub fn galerkin(&self, p: &CsrMatrix) -> Result<Self> {
        check_dim(self.n(), p.rows())?;
        let m = p.cols();
        // columns of P as sparse lists: pt[c] = [(row, value)]
        let mut pt: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for i in 0..p.rows() {
            let (idx, val) = p.row(i);
            for (&c, &v) in idx.iter().zip(val) {
                pt[c].push((i, v));
            }
        }
        let mut acc: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); m];
        for (a, col) in pt.iter().enumerate() {
            // w = A * P[:, a]
            let mut w: BTreeMap<usize, f64> = BTreeMap::new();
            for &(i, pv) in col {
                let (idx, val) = self.row(i);
                for (&k, &av) in idx.iter().zip(val) {
                    *w.entry(k).or_insert(0.0) += av * pv;
                }
            }
            for (k, wv) in w {
                let (pidx, pval) = p.row(k);
                for (&b, &pv) in pidx.iter().zip(pval) {
                    *acc[b].entry(a).or_insert(0.0) += pv * wv;
                }
            }
        }
        let mut t = Vec::new();
        for (b, row) in acc.into_iter().enumerate() {
            for (a, v) in row {
                t.push((b, a, v));
            }
        }
        // Rounding can break exact symmetry; average the two triangles.
        let mut sym = Vec::with_capacity(t.len());
        let lookup: BTreeMap<(usize, usize), f64> = t.iter().map(|&(i, j, v)| ((i, j), v)).collect();
        for (&(i, j), &v) in &lookup {
            let w = lookup.get(&(j, i)).copied().unwrap_or(0.0);
            sym.push((i, j, 0.5 * (v + w)));
        }
        Self::from_triplets(m, &sym)
    }
}

impl LinearOperator for SparseSym {
    fn dim(&self) -> usize {
        self.n()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x)
    }
}
