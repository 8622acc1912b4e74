//! Momentum methods on convex quadratics and their oscillator and Lyapunov
//! analysis.
//!
//! [`problems`] builds quadratic test objectives, [`optimizers`] runs gradient
//! descent, heavy ball and Nesterov-type iterations, [`integrator`] relates the
//! heavy-ball iteration to a Stormer-Verlet oscillator, [`lyapunov`] evaluates
//! and certifies the discrete Lyapunov function, and [`ode`] integrates the
//! continuous-time limits.

pub mod export;
pub mod integrator;
pub mod linalg;
pub mod lyapunov;
pub mod ode;
pub mod optimizers;
pub mod problems;

pub use optimizers::{run, Method, StepSize, Trajectory};
pub use problems::{ProblemError, QuadraticObjective};
