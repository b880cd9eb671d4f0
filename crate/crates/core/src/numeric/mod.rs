//! Numerical building blocks: elliptic integrals, an implicit Runge-Kutta
//! integrator, and least-squares solvers.

pub mod elliptic;
pub mod linalg;
pub mod lsq;
pub mod ode;
