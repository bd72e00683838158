//! Classical simulation of the quantum algorithm on enumerable instances.
//!
//! States are real amplitude vectors; every reflection, consumed qsample copy
//! and restoration is counted in a [`ResourceLedger`].

pub mod ae;
pub mod jump;
pub mod mean;
pub mod pipeline;
pub mod qsample;
pub mod schedule;

pub use ae::{amplitude_estimate_nondestructive, AeBackend, AeInput, AeMode, AeOutcome};
pub use jump::{jump_by_measurement, jump_failure_probability, jump_with_rounds};
pub use mean::{quantum_mean_bounded_second_moment, quantum_mean_relative, relative_mean_copies};
pub use pipeline::{estimate_ratio_quantum, QuantumOptions};
pub use qsample::{overlap_squared, prepare_qsample, reflect, Projector, QSample, ResourceLedger};
pub use schedule::{generate_schedule_quantum, QuantumScheduleOptions, QUANTUM_C2};
