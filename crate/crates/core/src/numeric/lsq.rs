//! Levenberg-Marquardt damped least squares with central-difference Jacobians.

use super::linalg::Square;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy)]
pub struct LmSettings<T> {
    pub max_iterations: usize,
    /// Convergence when every `|step_i| <= xtol * max(|p_i|, scale_i)`.
    pub xtol: T,
    /// Relative finite-difference step for the Jacobian.
    pub jacobian_step: T,
}

impl<T: Real> Default for LmSettings<T> {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            xtol: T::lit(1e-10),
            jacobian_step: T::lit(1e-6),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome<T> {
    pub params: Vec<T>,
    /// `(J^T J)^-1` at the solution, not scaled by the residual variance.
    pub covariance: Option<Square<T>>,
    pub cost: T,
    pub residual_count: usize,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
}

impl<T: Real> LmOutcome<T> {
    /// Reduced chi-square `cost / (m - n)`; zero when there are no spare degrees of freedom.
    pub fn reduced_chi2(&self) -> T {
        let dof = self.residual_count.saturating_sub(self.params.len());
        if dof == 0 {
            T::zero()
        } else {
            self.cost / T::from_count(dof)
        }
    }

    /// One-sigma uncertainties, optionally rescaled by the reduced chi-square.
    pub fn sigmas(&self, scale_by_residuals: bool) -> Vec<T> {
        let s2 = if scale_by_residuals { self.reduced_chi2() } else { T::one() };
        match &self.covariance {
            Some(c) => (0..c.n).map(|i| (c.diag(i).max(T::zero()) * s2).sqrt()).collect(),
            None => vec![T::infinity(); self.params.len()],
        }
    }
}

fn sum_sq<T: Real>(r: &[T]) -> T {
    r.iter().fold(T::zero(), |s, v| s + *v * *v)
}

/// Minimise `sum r_i(p)^2` starting from `initial`.
///
/// `scales` sets a per-parameter magnitude floor used for finite-difference
/// steps and the convergence test, so parameters near zero are handled. The
/// residual closure returns `None` if the model cannot be evaluated at a
/// trial point; such points are treated as uphill.
pub fn levenberg_marquardt<T, F>(
    mut residuals: F,
    initial: &[T],
    scales: &[T],
    settings: &LmSettings<T>,
) -> LmOutcome<T>
where
    T: Real,
    F: FnMut(&[T]) -> Option<Vec<T>>,
{
    let n = initial.len();
    assert_eq!(n, scales.len(), "one scale per parameter");
    let mut p = initial.to_vec();
    let Some(mut r) = residuals(&p) else {
        return LmOutcome {
            params: p,
            covariance: None,
            cost: T::infinity(),
            residual_count: 0,
            iterations: 0,
            converged: false,
            message: "model could not be evaluated at the initial guess".into(),
        };
    };
    let m = r.len();
    let mut cost = sum_sq(&r);
    let mut lambda = T::lit(1e-3);
    let lambda_max = T::lit(1e16);
    let mut converged = false;
    let mut message = String::from("iteration limit reached");
    let mut iterations = 0;

    let jacobian = |p: &[T], f: &mut F| -> Option<Vec<Vec<T>>> {
        // column-major: jac[k][i] = d r_i / d p_k
        let mut jac = Vec::with_capacity(n);
        let mut q = p.to_vec();
        for k in 0..n {
            let h = settings.jacobian_step * p[k].abs().max(scales[k]);
            q[k] = p[k] + h;
            let up = f(&q)?;
            q[k] = p[k] - h;
            let dn = f(&q)?;
            q[k] = p[k];
            if up.len() != m || dn.len() != m {
                return None;
            }
            let two_h = T::lit(2.0) * h;
            jac.push(up.iter().zip(&dn).map(|(a, b)| (*a - *b) / two_h).collect());
        }
        Some(jac)
    };

    let normal = |jac: &[Vec<T>], r: &[T]| -> (Square<T>, Vec<T>) {
        let mut jtj = Square::zeros(n);
        let mut jtr = vec![T::zero(); n];
        for i in 0..n {
            jtr[i] = jac[i].iter().zip(r).fold(T::zero(), |s, (a, b)| s + *a * *b);
            for j in i..n {
                let v = jac[i].iter().zip(&jac[j]).fold(T::zero(), |s, (a, b)| s + *a * *b);
                jtj.set(i, j, v);
                jtj.set(j, i, v);
            }
        }
        (jtj, jtr)
    };

    'outer: while iterations < settings.max_iterations {
        iterations += 1;
        if cost == T::zero() {
            converged = true;
            message = "exact fit".into();
            break;
        }
        let Some(jac) = jacobian(&p, &mut residuals) else {
            message = "model failed while forming the Jacobian".into();
            break;
        };
        let (jtj, jtr) = normal(&jac, &r);
        loop {
            let mut damped = jtj.clone();
            for i in 0..n {
                let d = jtj.diag(i);
                let floor = T::epsilon() * (T::one() + d);
                damped.add(i, i, lambda * d.max(floor));
            }
            let neg: Vec<T> = jtr.iter().map(|v| -*v).collect();
            let step = damped.solve_equilibrated(&neg);
            if let Some(step) = step {
                let trial: Vec<T> = p.iter().zip(&step).map(|(a, b)| *a + *b).collect();
                if let Some(rt) = residuals(&trial) {
                    let ct = sum_sq(&rt);
                    if ct.is_finite() && ct <= cost {
                        let small = step
                            .iter()
                            .enumerate()
                            .all(|(k, s)| s.abs() <= settings.xtol * trial[k].abs().max(scales[k]));
                        p = trial;
                        r = rt;
                        cost = ct;
                        lambda = (lambda / T::lit(10.0)).max(T::lit(1e-12));
                        if small {
                            converged = true;
                            message = "relative parameter change below tolerance".into();
                            break 'outer;
                        }
                        continue 'outer;
                    }
                }
            }
            lambda *= T::lit(10.0);
            if lambda > lambda_max {
                // No downhill step exists even for vanishing step length.
                converged = true;
                message = "no further reduction possible".into();
                break 'outer;
            }
        }
    }

    let covariance = jacobian(&p, &mut residuals).and_then(|jac| normal(&jac, &r).0.inverse_equilibrated());
    if covariance.is_none() && converged {
        converged = false;
        message = "singular normal matrix at the solution".into();
    }
    LmOutcome {
        params: p,
        covariance,
        cost,
        residual_count: m,
        iterations,
        converged,
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock_as_least_squares() {
        let out = levenberg_marquardt(
            |p: &[f64]| Some(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]]),
            &[-1.2, 1.0],
            &[1.0, 1.0],
            &LmSettings::default(),
        );
        assert!(out.converged, "{}", out.message);
        assert!((out.params[0] - 1.0).abs() < 1e-8);
        assert!((out.params[1] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn exponential_fit_recovers_parameters() {
        let t: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.5 * (-t / 1.7).exp()).collect();
        let out = levenberg_marquardt(
            |p: &[f64]| Some(t.iter().zip(&y).map(|(t, y)| p[0] * (-t / p[1]).exp() - y).collect()),
            &[1.0, 1.0],
            &[1.0, 1.0],
            &LmSettings::default(),
        );
        assert!(out.converged);
        assert!((out.params[0] - 2.5).abs() < 1e-9);
        assert!((out.params[1] - 1.7).abs() < 1e-9);
    }

    #[test]
    fn covariance_of_linear_model() {
        // y = a + b x, unit weights: cov = (X^T X)^-1
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.1, 4.9, 7.2];
        let out = levenberg_marquardt(
            |p: &[f64]| Some(xs.iter().zip(&ys).map(|(x, y)| p[0] + p[1] * x - y).collect()),
            &[0.0, 0.0],
            &[1.0, 1.0],
            &LmSettings::default(),
        );
        let c = out.covariance.unwrap();
        // X^T X = [[4, 6], [6, 14]], det 20
        assert!((c.get(0, 0) - 14.0 / 20.0).abs() < 1e-6);
        assert!((c.get(1, 1) - 4.0 / 20.0).abs() < 1e-6);
        assert!((c.get(0, 1) + 6.0 / 20.0).abs() < 1e-6);
    }

    #[test]
    fn unevaluable_start_is_reported() {
        let out = levenberg_marquardt(|_: &[f64]| None, &[1.0], &[1.0], &LmSettings::default());
        assert!(!out.converged);
    }
}
