//! Complete elliptic integral of the first kind via the arithmetic-geometric mean.

use crate::scalar::Real;

/// Arithmetic-geometric mean of two non-negative numbers.
///
/// Iterates until successive means agree to a few ulps (1e-15 relative in
/// `f64`). Convergence is quadratic, so this takes at most a handful of rounds.
pub fn agm<T: Real>(a: T, b: T) -> T {
    let (mut a, mut b) = (a, b);
    if a == T::zero() || b == T::zero() {
        return T::zero();
    }
    let tol = T::lit(4.0) * T::epsilon();
    for _ in 0..64 {
        if (a - b).abs() <= tol * a.max(b) {
            break;
        }
        let next = (a + b) / T::lit(2.0);
        b = (a * b).sqrt();
        a = next;
    }
    (a + b) / T::lit(2.0)
}

/// `K(k) = pi / (2 agm(1, sqrt(1 - k^2)))` for modulus `0 <= k < 1`.
///
/// Returns infinity at `k = 1` and NaN outside `[0, 1]`.
pub fn complete_k<T: Real>(k: T) -> T {
    if !(k >= T::zero() && k <= T::one()) {
        return T::nan();
    }
    let kp = (T::one() - k * k).sqrt();
    if kp == T::zero() {
        return T::infinity();
    }
    T::PI() / (T::lit(2.0) * agm(T::one(), kp))
}
