//! Small dense linear algebra for normal equations (a few parameters at most).

use crate::scalar::Real;

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Square<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Real> Square<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn add(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] += v;
    }

    pub fn diag(&self, i: usize) -> T {
        self.get(i, i)
    }

    /// Solve `A x = b` by Gaussian elimination with partial pivoting.
    ///
    /// Returns `None` when a pivot is negligible relative to the largest
    /// entry of the matrix.
    pub fn solve(&self, b: &[T]) -> Option<Vec<T>> {
        let n = self.n;
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        let scale = a.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if scale == T::zero() || !scale.is_finite() {
            return None;
        }
        let tiny = scale * T::epsilon() * T::from_count(n * 16);
        for col in 0..n {
            let (piv, pmax) = (col..n)
                .map(|r| (r, a[r * n + col].abs()))
                .fold((col, T::zero()), |best, c| if c.1 > best.1 { c } else { best });
            if pmax <= tiny {
                return None;
            }
            if piv != col {
                for k in 0..n {
                    a.swap(col * n + k, piv * n + k);
                }
                x.swap(col, piv);
            }
            let d = a[col * n + col];
            for r in col + 1..n {
                let f = a[r * n + col] / d;
                if f == T::zero() {
                    continue;
                }
                for k in col..n {
                    let v = a[col * n + k];
                    a[r * n + k] -= f * v;
                }
                let v = x[col];
                x[r] -= f * v;
            }
        }
        for col in (0..n).rev() {
            let mut s = x[col];
            for k in col + 1..n {
                s -= a[col * n + k] * x[k];
            }
            x[col] = s / a[col * n + col];
        }
        x.iter().all(|v| v.is_finite()).then_some(x)
    }

    /// `D^-1/2` with `D` the diagonal, or `None` if a diagonal entry is not positive.
    fn jacobi_scale(&self) -> Option<Vec<T>> {
        (0..self.n)
            .map(|i| {
                let d = self.diag(i);
                (d > T::zero() && d.is_finite()).then(|| T::one() / d.sqrt())
            })
            .collect()
    }

    fn rescaled(&self, s: &[T]) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(i, j, self.get(i, j) * s[i] * s[j]);
            }
        }
        out
    }

    /// [`Square::solve`] on the unit-diagonal rescaling of a symmetric
    /// positive matrix, so unknowns of very different magnitude are handled.
    pub fn solve_equilibrated(&self, b: &[T]) -> Option<Vec<T>> {
        let s = self.jacobi_scale()?;
        let sb: Vec<T> = b.iter().zip(&s).map(|(v, k)| *v * *k).collect();
        let y = self.rescaled(&s).solve(&sb)?;
        Some(y.iter().zip(&s).map(|(v, k)| *v * *k).collect())
    }

    /// Inverse of a symmetric positive matrix via its unit-diagonal rescaling.
    pub fn inverse_equilibrated(&self) -> Option<Self> {
        let s = self.jacobi_scale()?;
        let inv = self.rescaled(&s).inverse()?;
        Some(inv.rescaled(&s))
    }

    /// Inverse via column-by-column solves.
    pub fn inverse(&self) -> Option<Self> {
        let n = self.n;
        let mut inv = Self::zeros(n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = T::zero());
            e[j] = T::one();
            let col = self.solve(&e)?;
            for (i, &v) in col.iter().enumerate() {
                inv.set(i, j, v);
            }
        }
        Some(inv)
    }
}

/// Weighted linear least squares `y ~ X c` with weights `w`.
///
/// Columns are normalised before forming the normal equations so that
/// regressors of wildly different magnitude stay well conditioned. Returns
/// coefficients and the unscaled covariance `(X^T W X)^-1`.
pub fn weighted_least_squares<T: Real>(
    design: &[Vec<T>],
    y: &[T],
    w: &[T],
) -> Option<(Vec<T>, Square<T>)> {
    let m = y.len();
    if design.len() != m || w.len() != m || m == 0 {
        return None;
    }
    let n = design[0].len();
    if n == 0 || m < n {
        return None;
    }
    let mut norms = vec![T::zero(); n];
    for row in design {
        for (k, v) in row.iter().enumerate() {
            norms[k] = norms[k].max(v.abs());
        }
    }
    if norms.iter().any(|v| *v == T::zero()) {
        return None;
    }
    let mut ata = Square::zeros(n);
    let mut atb = vec![T::zero(); n];
    for ((row, &yi), &wi) in design.iter().zip(y).zip(w) {
        for i in 0..n {
            let xi = row[i] / norms[i];
            atb[i] += wi * xi * yi;
            for j in 0..n {
                ata.add(i, j, wi * xi * row[j] / norms[j]);
            }
        }
    }
    let inv = ata.inverse()?;
    let mut coef = vec![T::zero(); n];
    for i in 0..n {
        let mut s = T::zero();
        for (j, &b) in atb.iter().enumerate() {
            s += inv.get(i, j) * b;
        }
        coef[i] = s / norms[i];
    }
    let mut cov = Square::zeros(n);
    for i in 0..n {
        for j in 0..n {
            cov.set(i, j, inv.get(i, j) / (norms[i] * norms[j]));
        }
    }
    Some((coef, cov))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrated_inverse_of_badly_scaled_matrix() {
        // diagonal entries 18 orders apart
        let mut a = Square::<f64>::zeros(2);
        a.set(0, 0, 2e-18);
        a.set(0, 1, 1e-9);
        a.set(1, 0, 1e-9);
        a.set(1, 1, 1.0);
        let inv = a.inverse_equilibrated().unwrap();
        // exact inverse: det = 1e-18
        assert!((inv.get(0, 0) - 1e18).abs() < 1e6);
        assert!((inv.get(0, 1) + 1e9).abs() < 1e-3);
        assert!((inv.get(1, 1) - 2.0).abs() < 1e-12);
        let x = a.solve_equilibrated(&[1e-9, 1.0]).unwrap();
        assert!(x[0].abs() < 1e-4 && (x[1] - 1.0).abs() < 1e-12, "{x:?}");
    }

    #[test]
    fn solves_small_system() {
        let a = Square {
            n: 3,
            data: vec![2.0, 1.0, -1.0, -3.0, -1.0, 2.0, -2.0, 1.0, 2.0],
        };
        let x = a.solve(&[8.0, -11.0, -3.0]).unwrap();
        for (v, e) in x.iter().zip([2.0_f64, 3.0, -1.0]) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_is_none() {
        let a = Square {
            n: 2,
            data: vec![1.0, 2.0, 2.0, 4.0],
        };
        assert!(a.solve(&[1.0, 2.0]).is_none());
    }

    #[test]
    fn wls_exact_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64 * 1e-20).collect();
        let design: Vec<Vec<f64>> = xs.iter().map(|x| vec![1.0, *x]).collect();
        let y: Vec<f64> = xs.iter().map(|x| 3.0 + 2e19 * x).collect();
        let (c, _) = weighted_least_squares(&design, &y, &[1.0; 10]).unwrap();
        assert!((c[0] - 3.0).abs() < 1e-12);
        assert!((c[1] - 2e19).abs() / 2e19 < 1e-12);
    }
}
