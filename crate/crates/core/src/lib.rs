pub mod bigfloat;
pub mod error;
pub mod linalg;
pub mod moment_system;
pub mod propagator;
pub mod initial_conditions;
pub mod solver;
pub mod error_analysis;
pub mod theory_bounds;
