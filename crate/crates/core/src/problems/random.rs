//! Random SPD instances for tests and the validation suite.

use crate::linalg::{dense_sym_eig, DenseSym, Rng};
use crate::Result;

/// A random orthogonal matrix, as the eigenvectors of a Gaussian symmetric matrix.
pub fn random_orthogonal(n: usize, rng: &mut Rng) -> Result<Vec<Vec<f64>>> {
    let g: Vec<f64> = rng.gaussian_vector(n * n);
    let m = DenseSym::from_row_major(n, g)?;
    Ok(dense_sym_eig(&m)?.vectors)
}

/// Random SPD matrix with the given eigenvalues.
pub fn spd_with_spectrum(values: &[f64], rng: &mut Rng) -> Result<DenseSym> {
    let n = values.len();
    let q = random_orthogonal(n, rng)?;
    Ok(DenseSym::from_fn(n, |i, j| (0..n).map(|k| values[k] * q[k][i] * q[k][j]).sum()))
}

/// Random SPD matrix with eigenvalues log-spread over `[1, cond]`, both ends attained.
pub fn random_spd(n: usize, cond: f64, rng: &mut Rng) -> Result<DenseSym> {
    let mut t: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    if n >= 2 {
        t[0] = 0.0;
        t[n - 1] = 1.0;
    }
    t.sort_by(f64::total_cmp);
    let values: Vec<f64> = t.iter().map(|s| cond.powf(*s)).collect();
    spd_with_spectrum(&values, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectrum_is_reproduced() {
        let mut rng = Rng::new(1);
        let a = random_spd(12, 50.0, &mut rng).unwrap();
        let e = dense_sym_eig(&a).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-12);
        assert!((e.values[11] - 50.0).abs() < 1e-11);
    }
}
