//! Design laboratory for variational graphical quantum error-correcting codes.
//!
//! The crate simulates encode / noise / recover pipelines exactly on small
//! qubit registers (up to seven qubits including recovery ancillas), builds
//! optimal, Petz and syndrome-table recoveries, and trains parameterized code
//! families against a given noise model.
//!
//! Module map:
//!
//! - [`qcore`]: dense complex linear algebra, Pauli strings, states.
//! - [`channels`]: Kraus / Choi channels, fidelities, noise models.
//! - [`codes`]: encoders, code projectors, Knill–Laflamme checks, decoders.
//! - [`ansatz`]: gate-level circuits and the variational encoder/recovery builders.
//! - [`recovery`]: SDP-optimal recovery, Petz recovery, biconvex code search.
//! - [`varopt`]: 2-design fidelity objective, optimizers, training protocols.
//! - [`experiments`]: JSON-configured sweeps with CSV output.
//!
//! Qubit ordering: qubit 0 is the most significant tensor factor everywhere.

pub mod ansatz;
pub mod channels;
pub mod codes;
mod error;
pub mod experiments;
pub mod qcore;
pub mod recovery;
pub mod varopt;

pub use error::{Error, Result};
pub use qcore::ComplexMatrix;
