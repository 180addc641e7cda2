//! Dense kernel matrices over Gaussian point clouds.

use serde::{Deserialize, Serialize};

use crate::linalg::{cholesky, DenseSym, Precision, Rng};
use crate::par::{map_range, Execution};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    /// `exp(−‖x−y‖/2)`
    Laplacian,
    /// `K(x_i,x_j) + K(y_i,y_j) + Im(K(x_i,y_j) − K(y_i,x_j))` with `K(x,y) = (xᵀy+1)³`
    PolyComplex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub n: usize,
    /// Point dimension; defaults to `n`.
    pub d: Option<usize>,
    pub seed: u64,
    pub tau: f64,
}

impl KernelSpec {
    pub fn new(kind: KernelKind, n: usize, seed: u64) -> Self {
        Self { kind, n, d: None, seed, tau: 0.0 }
    }

    pub fn dim_points(&self) -> usize {
        self.d.unwrap_or(self.n)
    }
}

#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub matrix: DenseSym,
    /// Largest magnitude of the imaginary cross term; zero for real points.
    pub imag_max: f64,
}

fn draw_points(rng: &mut Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| rng.gaussian_vector(d)).collect()
}

fn poly(x: &[f64], y: &[f64]) -> f64 {
    let s: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() + 1.0;
    s * s * s
}

/// `(xᵀy + 1)³` for points with real part `x` and imaginary part `xi`.
fn poly_complex(x: (&[f64], &[f64]), y: (&[f64], &[f64])) -> (f64, f64) {
    let mut re = 1.0;
    let mut im = 0.0;
    for k in 0..x.0.len() {
        re += x.0[k] * y.0[k] - x.1[k] * y.1[k];
        im += x.0[k] * y.1[k] + x.1[k] * y.0[k];
    }
    let (re2, im2) = (re * re - im * im, 2.0 * re * im);
    (re2 * re - im2 * im, re2 * im + im2 * re)
}

pub fn kernel_matrix_dense(spec: &KernelSpec, exec: Execution) -> Result<KernelMatrix> {
    if spec.n < 2 {
        return Err(Error::InvalidArgument("kernel matrices need n >= 2".into()));
    }
    if !(spec.tau >= 0.0) {
        return Err(Error::InvalidArgument(format!("diagonal shift {} must be nonnegative", spec.tau)));
    }
    let n = spec.n;
    let d = spec.dim_points();
    let mut rng = Rng::new(spec.seed);
    let xs = draw_points(&mut rng, n, d);
    let (rows, imag_max) = match spec.kind {
        KernelKind::Laplacian => {
            let rows = map_range(exec, n, |i| {
                (0..n)
                    .map(|j| {
                        let d2: f64 = xs[i].iter().zip(&xs[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                        (-d2.sqrt() / 2.0).exp()
                    })
                    .collect::<Vec<f64>>()
            });
            (rows, 0.0)
        }
        KernelKind::PolyComplex => {
            let ys = draw_points(&mut rng, n, d);
            let zero = vec![0.0; d];
            let rows = map_range(exec, n, |i| {
                let mut imag = 0.0f64;
                let row = (0..n)
                    .map(|j| {
                        let a = poly_complex((&xs[i], &zero), (&ys[j], &zero));
                        let b = poly_complex((&ys[i], &zero), (&xs[j], &zero));
                        let im = a.1 - b.1;
                        imag = imag.max(im.abs());
                        poly(&xs[i], &xs[j]) + poly(&ys[i], &ys[j]) + im
                    })
                    .collect::<Vec<f64>>();
                (row, imag)
            });
            let imag = rows.iter().map(|r| r.1).fold(0.0, f64::max);
            (rows.into_iter().map(|r| r.0).collect(), imag)
        }
    };
    let mut data = Vec::with_capacity(n * n);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row.into_iter().enumerate() {
            data.push(if i == j { v + spec.tau } else { v });
        }
    }
    let matrix = DenseSym::from_row_major(n, data)?;
    cholesky(&matrix, Precision::Binary64)?;
    Ok(KernelMatrix { matrix, imag_max })
}
