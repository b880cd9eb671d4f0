//! Three-stage Gauss-Legendre collocation (order 6).
//!
//! The method is symplectic and conserves quadratic invariants exactly, so
//! harmonic energy does not drift over long runs. Stage equations are solved
//! by fixed-point iteration; if that fails to converge the step is halved.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Right-hand side `dy/dt = f(t, y)` of a first-order system.
pub trait OdeSystem<T, const N: usize> {
    fn rhs(&self, t: T, y: &[T; N]) -> [T; N];
}

impl<T, const N: usize, F> OdeSystem<T, N> for F
where
    F: Fn(T, &[T; N]) -> [T; N],
{
    fn rhs(&self, t: T, y: &[T; N]) -> [T; N] {
        self(t, y)
    }
}

/// Leading coefficient of the phase error per step on `y' = i w y`
/// for the (3,3) Pade approximant: `(3!)^2 / (6! 7!)`.
const PHASE_ERROR_COEFF: f64 = 36.0 / (720.0 * 5040.0);

#[derive(Debug, Clone, Copy)]
pub struct GaussLegendre6<T> {
    pub max_iterations: usize,
    /// Smallest step the integrator may fall back to before failing.
    pub min_step: T,
}

impl<T: Real> Default for GaussLegendre6<T> {
    fn default() -> Self {
        Self {
            max_iterations: 60,
            min_step: T::lit(1e-300).max(T::min_positive_value()),
        }
    }
}

struct Tableau<T> {
    c: [T; 3],
    a: [[T; 3]; 3],
    b: [T; 3],
}

fn tableau<T: Real>() -> Tableau<T> {
    let s15 = T::lit(15.0).sqrt();
    let l = T::lit;
    let half = l(0.5);
    Tableau {
        c: [half - s15 / l(10.0), half, half + s15 / l(10.0)],
        a: [
            [l(5.0 / 36.0), l(2.0 / 9.0) - s15 / l(15.0), l(5.0 / 36.0) - s15 / l(30.0)],
            [l(5.0 / 36.0) + s15 / l(24.0), l(2.0 / 9.0), l(5.0 / 36.0) - s15 / l(24.0)],
            [l(5.0 / 36.0) + s15 / l(30.0), l(2.0 / 9.0) + s15 / l(15.0), l(5.0 / 36.0)],
        ],
        b: [l(5.0 / 18.0), l(4.0 / 9.0), l(5.0 / 18.0)],
    }
}

/// Largest step keeping the per-step phase error of an oscillation at
/// angular rate `omega` below `rtol` (radians).
pub fn step_for_tolerance<T: Real>(omega: T, rtol: T) -> T {
    let z = (rtol / T::lit(PHASE_ERROR_COEFF)).powf(T::lit(1.0 / 7.0));
    z.min(T::one()) / omega
}

impl<T: Real> GaussLegendre6<T> {
    /// One step of size `h`. `scale` gives the typical magnitude of each
    /// component and sets the stage-iteration stopping criterion.
    pub fn step<S, const N: usize>(&self, sys: &S, t: T, y: &[T; N], h: T, scale: &[T; N]) -> Option<[T; N]>
    where
        S: OdeSystem<T, N>,
    {
        let tab = tableau::<T>();
        let f0 = sys.rhs(t, y);
        let mut k = [f0; 3];
        let tol = T::lit(16.0) * T::epsilon();
        let mut last_err = T::infinity();
        let mut stalled = 0;
        for _ in 0..self.max_iterations {
            let mut next = k;
            for (s, next_s) in next.iter_mut().enumerate() {
                let mut ys = *y;
                for (i, ysi) in ys.iter_mut().enumerate() {
                    let mut acc = T::zero();
                    for (j, kj) in k.iter().enumerate() {
                        acc += tab.a[s][j] * kj[i];
                    }
                    *ysi += h * acc;
                }
                *next_s = sys.rhs(t + tab.c[s] * h, &ys);
            }
            let mut err = T::zero();
            for s in 0..3 {
                for i in 0..N {
                    let e = (h * (next[s][i] - k[s][i])).abs() / scale[i];
                    err = err.max(e);
                }
            }
            k = next;
            if !err.is_finite() {
                return None;
            }
            if err <= tol {
                return Some(self.combine(y, &k, h, &tab));
            }
            // Round-off floor: stop once the update no longer shrinks.
            if err >= last_err && err < T::lit(1e4) * T::epsilon() {
                stalled += 1;
                if stalled >= 2 {
                    return Some(self.combine(y, &k, h, &tab));
                }
            }
            last_err = err;
        }
        None
    }

    fn combine<const N: usize>(&self, y: &[T; N], k: &[[T; N]; 3], h: T, tab: &Tableau<T>) -> [T; N] {
        let mut out = *y;
        for (i, o) in out.iter_mut().enumerate() {
            let inc = tab.b[0] * k[0][i] + tab.b[1] * k[1][i] + tab.b[2] * k[2][i];
            *o += h * inc;
        }
        out
    }

    /// Advance from `t` by exactly `dt` using equal substeps no longer than `h_max`.
    ///
    /// A substep whose stage iteration diverges is retried with half the step;
    /// falling below `min_step` is an error.
    pub fn advance<S, const N: usize>(
        &self,
        sys: &S,
        t: T,
        y: &[T; N],
        dt: T,
        h_max: T,
        scale: &[T; N],
    ) -> Result<[T; N]>
    where
        S: OdeSystem<T, N>,
    {
        let pieces = (dt / h_max).ceil().max(T::one());
        let count = pieces.to_usize().unwrap_or(1);
        let h = dt / pieces;
        let mut state = *y;
        let mut time = t;
        for _ in 0..count {
            state = self.advance_one(sys, time, &state, h, scale)?;
            time += h;
        }
        Ok(state)
    }

    fn advance_one<S, const N: usize>(&self, sys: &S, t: T, y: &[T; N], h: T, scale: &[T; N]) -> Result<[T; N]>
    where
        S: OdeSystem<T, N>,
    {
        if let Some(next) = self.step(sys, t, y, h, scale) {
            return Ok(next);
        }
        let half = h / T::lit(2.0);
        if half < self.min_step {
            return Err(Error::IntegrationFailed {
                time: t.as_f64(),
                reason: format!(
                    "stage iteration did not converge and step {} fell below the minimum {}",
                    half.as_f64(),
                    self.min_step.as_f64()
                ),
            });
        }
        let mid = self.advance_one(sys, t, y, half, scale)?;
        self.advance_one(sys, t + half, &mid, half, scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_one_period() {
        let w = 2.0 * std::f64::consts::PI;
        let sys = move |_t: f64, y: &[f64; 2]| [y[1], -w * w * y[0]];
        let gl = GaussLegendre6::default();
        let h = step_for_tolerance(w, 1e-10);
        let y = gl.advance(&sys, 0.0, &[1.0, 0.0], 1.0, h, &[1.0, w]).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9, "{y:?}");
        assert!(y[1].abs() / w < 1e-8, "{y:?}");
    }

    #[test]
    fn order_six_convergence() {
        // y' = y on [0, 1]; halving h cuts the error by ~2^6.
        let sys = |_t: f64, y: &[f64; 1]| [y[0]];
        let gl = GaussLegendre6::default();
        let err = |h: f64| (gl.advance(&sys, 0.0, &[1.0], 1.0, h, &[1.0]).unwrap()[0] - 1f64.exp()).abs();
        let ratio = err(0.5) / err(0.25);
        assert!(ratio > 50.0 && ratio < 80.0, "ratio {ratio}");
    }

    #[test]
    fn quadratic_invariant_preserved() {
        let sys = |_t: f64, y: &[f64; 2]| [y[1], -y[0]];
        let gl = GaussLegendre6::default();
        let mut y = [1.0, 0.0];
        for i in 0..2000 {
            y = gl.advance(&sys, i as f64 * 0.3, &y, 0.3, 0.3, &[1.0, 1.0]).unwrap();
        }
        let e = 0.5 * (y[0] * y[0] + y[1] * y[1]);
        assert!((e - 0.5).abs() < 1e-13, "{e}");
    }

    #[test]
    fn stiff_system_fails_cleanly() {
        let sys = |_t: f64, y: &[f64; 1]| [-1e300 * y[0] * y[0].abs()];
        let gl = GaussLegendre6 {
            max_iterations: 5,
            min_step: 1e-3,
        };
        let err = gl.advance(&sys, 0.0, &[1.0], 1.0, 1.0, &[1.0]).unwrap_err();
        assert!(matches!(err, Error::IntegrationFailed { .. }));
    }
}
