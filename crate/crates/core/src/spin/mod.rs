//! States, operators, spin systems and free evolution.

pub mod density;
pub mod evolution;
pub mod ket;
pub mod operators;
pub mod system;

pub use density::{DensityMatrix, DeviationDensityMatrix};
pub use evolution::{
    equal_up_to_global_phase, evolve, free_hamiltonian, free_hamiltonian_diag, free_propagator, global_phase_between, propagator,
    thermal_state, thermal_state_linear,
};
pub use ket::Ket;
pub use operators::{embed, pauli_string, rotation_xy, rotation_z, spin_op, total_spin_op, ProductOperatorExpansion};
pub use system::{Spin, SpinSystem, MAX_SPINS};
