//! Neural-ODE hidden-state dynamics, the Euler solver and its gradients.

pub mod dynamics;
pub mod solver;

pub use dynamics::{f_theta, Dynamics, DynamicsNet, LinearField, NetCache};
pub use solver::{
    adjoint_step_backward, discrete_step_backward, euler_solve, euler_solve_vec, euler_step, ode_gradients,
    steps_for_gap, EulerSolution, GradientMode, SolveConfig, DIVERGENCE_LIMIT,
};
