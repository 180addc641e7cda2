//! Independent x-space oracle: everything is formed densely from `B^{±1/2}`
//! and the sphere, with no use of the library's u-space identities.
#![allow(dead_code)]

use rsd_eig::linalg::{dense_sym_eig, DenseSym};

pub type Mat = Vec<Vec<f64>>;

pub fn matvec(m: &Mat, x: &[f64]) -> Vec<f64> {
    m.iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn normalized(x: &[f64]) -> Vec<f64> {
    let n = norm(x);
    x.iter().map(|v| v / n).collect()
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

pub fn to_mat(m: &DenseSym) -> Mat {
    (0..m.n()).map(|i| m.row(i).to_vec()).collect()
}

/// `Q f(D) Qᵀ` for symmetric `m = Q D Qᵀ`.
pub fn spectral_fn(m: &DenseSym, f: impl Fn(f64) -> f64) -> Mat {
    let e = dense_sym_eig(m).unwrap();
    let n = m.n();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| f(e.values[k]) * e.vectors[k][i] * e.vectors[k][j]).sum()).collect())
        .collect()
}

/// Jacobi eigenvalues of a dense symmetric `Mat`, ascending.
pub fn eigvals(m: &Mat) -> Vec<f64> {
    let n = m.len();
    let sym = DenseSym::from_fn(n, |i, j| 0.5 * (m[i][j] + m[j][i]));
    dense_sym_eig(&sym).unwrap().values
}

/// `great-circle distance to ±y`, whichever is nearer.
pub fn sphere_dist_pm(x: &[f64], y: &[f64]) -> f64 {
    let d = |s: f64| {
        let (mut m, mut p) = (0.0, 0.0);
        for (a, b) in x.iter().zip(y) {
            m += (a - s * b).powi(2);
            p += (a + s * b).powi(2);
        }
        2.0 * m.sqrt().atan2(p.sqrt())
    };
    d(1.0).min(d(-1.0))
}

/// The x-space picture of a dense pair `(A, B)`.
pub struct XSpace {
    pub n: usize,
    pub b_half: Mat,
    pub b_inv: Mat,
    /// `B^{-1/2} A B^{-1/2}`
    pub m: Mat,
    pub lambda: Vec<f64>,
    pub u_star: Vec<f64>,
    pub x_star: Vec<f64>,
    pub nu_min: f64,
    pub nu_max: f64,
    pub cos_phi: f64,
    pub ustar_b2: f64,
    pub ustar_binv2: f64,
    pub ustar_a: f64,
    pub ustar_2: f64,
}

impl XSpace {
    pub fn new(a: &DenseSym, b: &DenseSym) -> Self {
        let n = a.n();
        let b_half = spectral_fn(b, f64::sqrt);
        let b_mhalf = spectral_fn(b, |v| 1.0 / v.sqrt());
        let b_inv = spectral_fn(b, |v| 1.0 / v);
        let m = matmul(&matmul(&b_mhalf, &to_mat(a)), &b_mhalf);
        let ea = dense_sym_eig(a).unwrap();
        let u_star = ea.vectors[0].clone();
        let x_star = normalized(&matvec(&b_half, &u_star));
        let nu = eigvals(&m);
        let bmat = to_mat(b);
        let ustar_b2 = dot(&u_star, &matvec(&bmat, &u_star));
        let ustar_binv2 = dot(&u_star, &matvec(&b_inv, &u_star));
        let ustar_2 = dot(&u_star, &u_star);
        let sin_phi = ustar_2 / (ustar_b2 * ustar_binv2).sqrt();
        Self {
            n,
            b_half,
            b_inv,
            ustar_a: dot(&u_star, &a.matvec(&u_star)).sqrt(),
            m,
            lambda: ea.values,
            u_star,
            x_star,
            nu_min: nu[0],
            nu_max: nu[n - 1],
            cos_phi: (1.0 - sin_phi * sin_phi).max(0.0).sqrt(),
            ustar_b2,
            ustar_binv2,
            ustar_2,
        }
    }

    pub fn phi(&self) -> f64 {
        self.cos_phi.acos()
    }

    pub fn kappa(&self) -> f64 {
        self.nu_max / self.nu_min
    }

    pub fn x_of_u(&self, u: &[f64]) -> Vec<f64> {
        normalized(&matvec(&self.b_half, u))
    }

    pub fn f(&self, x: &[f64]) -> f64 {
        -dot(x, &matvec(&self.b_inv, x)) / dot(x, &matvec(&self.m, x))
    }

    /// Riemannian gradient: the Euclidean gradient projected onto `x⊥`.
    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let bx = matvec(&self.b_inv, x);
        let mx = matvec(&self.m, x);
        let (p, q) = (dot(x, &bx), dot(x, &mx));
        let e: Vec<f64> = bx.iter().zip(&mx).map(|(b, m)| -2.0 * b / q + 2.0 * p * m / (q * q)).collect();
        let c = dot(&e, x);
        e.iter().zip(x).map(|(ei, xi)| ei - c * xi).collect()
    }

    pub fn exp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let t = norm(v);
        if t == 0.0 {
            return x.to_vec();
        }
        let (s, c) = t.sin_cos();
        normalized(&x.iter().zip(v).map(|(xi, vi)| c * xi + s * vi / t).collect::<Vec<_>>())
    }

    pub fn dist(&self, x: &[f64]) -> f64 {
        sphere_dist_pm(x, &self.x_star)
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        dot(x, &matvec(&self.m, x))
    }

    fn spread(&self) -> f64 {
        1.0 / self.lambda[0] - 1.0 / self.lambda[self.n - 1]
    }

    fn gap(&self) -> f64 {
        1.0 / self.lambda[0] - 1.0 / self.lambda[1]
    }

    pub fn gamma(&self, x: &[f64]) -> f64 {
        self.nu_max * self.spread() / self.energy(x)
    }

    pub fn mu(&self, x: &[f64]) -> f64 {
        let pi2 = std::f64::consts::PI.powi(2);
        8.0 * self.nu_min * self.gap() * self.ustar_b2.sqrt() / (pi2 * self.energy(x).sqrt() * self.ustar_a)
    }

    pub fn a(&self, x: &[f64]) -> f64 {
        self.lambda[0] * self.ustar_binv2 * (self.dist(x).cos() - self.cos_phi) / (self.energy(x) * self.ustar_2)
    }

    /// One Riemannian steepest-descent step of length `eta`.
    pub fn step(&self, x: &[f64], eta: f64) -> Vec<f64> {
        let g: Vec<f64> = self.grad(x).iter().map(|v| -eta * v).collect();
        self.exp(x, &g)
    }

    /// `u` with `‖u‖_B = 1` at B-angle `theta` from `u*`, direction from `w`.
    pub fn u_at_angle(&self, theta: f64, w: &[f64]) -> Vec<f64> {
        let mut t: Vec<f64> = w.to_vec();
        let c = dot(&t, &self.x_star);
        t.iter_mut().zip(&self.x_star).for_each(|(ti, xs)| *ti -= c * xs);
        let t = normalized(&t);
        let x: Vec<f64> = self.x_star.iter().zip(&t).map(|(a, b)| theta.cos() * a + theta.sin() * b).collect();
        matvec(&self.b_inv, &matvec(&self.b_half, &x))
    }
}
