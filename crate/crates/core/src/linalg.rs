//! Small dense Cholesky factorisation for normal-equation systems.

/// Relative pivot tolerance below which a design is declared rank deficient.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

/// Upper-triangular factor `R` with `A = RᵀR`, stored row-major.
#[derive(Debug, Clone)]
pub(crate) struct Cholesky {
    dim: usize,
    r: Vec<f64>,
}

impl Cholesky {
    /// Factors the symmetric matrix `a` (row-major, only the upper triangle is
    /// read). Fails with the index of the first column whose pivot falls below
    /// `PIVOT_TOLERANCE` times its original diagonal.
    pub fn factor(a: &[f64], dim: usize) -> Result<Self, usize> {
        debug_assert_eq!(a.len(), dim * dim);
        let mut r = vec![0.0; dim * dim];
        for j in 0..dim {
            let diag = a[j * dim + j];
            let mut d = diag;
            for k in 0..j {
                d -= r[k * dim + j] * r[k * dim + j];
            }
            if !(diag > 0.0) || !(d > PIVOT_TOLERANCE * diag) {
                return Err(j);
            }
            let rjj = d.sqrt();
            r[j * dim + j] = rjj;
            for i in j + 1..dim {
                let mut s = a[j * dim + i];
                for k in 0..j {
                    s -= r[k * dim + j] * r[k * dim + i];
                }
                r[j * dim + i] = s / rjj;
            }
        }
        Ok(Cholesky { dim, r })
    }

    /// Solves `Rᵀ w = b` (forward substitution).
    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut w = b.to_vec();
        for i in 0..n {
            let mut s = w[i];
            for k in 0..i {
                s -= self.r[k * n + i] * w[k];
            }
            w[i] = s / self.r[i * n + i];
        }
        w
    }

    /// Solves `R x = w` (back substitution).
    pub fn back(&self, w: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut x = w.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.r[i * n + k] * x[k];
            }
            x[i] = s / self.r[i * n + i];
        }
        x
    }

    /// `Rᵀ z`, which has covariance `A` when `z` is standard normal.
    pub fn lower_mul(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim;
        (0..n)
            .map(|i| (0..=i).map(|k| self.r[k * n + i] * z[k]).sum())
            .collect()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.back(&self.forward(b))
    }

    /// `A⁻¹`, row-major.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.dim;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        inv
    }
}
