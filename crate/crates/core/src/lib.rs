//! Constraint satisfaction over roots-of-unity domains, with an operator
//! (finite-dimensional quantum) relaxation.
//!
//! Domain values are indices `0..d`; index `k` stands for the root of unity
//! `λ_k = exp(2πik/d)`. The crate provides:
//!
//! * [`cyclotomic`]: exact arithmetic in `Q(ζ_L)` and univariate polynomials over it.
//! * [`csp`]: relations, languages, instances, brute-force solving.
//! * [`fourier`]: characteristic polynomials of relations and the `Dom`/`Rule` encodings.
//! * [`consistency`]: arc consistency, linear arc consistency and SLAC with provenance.
//! * [`operators`]: verification of operator assignments on dense complex matrices.
//! * [`certificates`]: exact certificates that a SLAC-refuted instance has no
//!   satisfying operator assignment, and an independent checker.
//! * [`reductions`]: pp-gadgets, equality collapse, cores, constants, subalgebra and
//!   factor transports, including the transport of operator assignments.
//! * [`gap_instances`]: the magic square, its Pauli solution and linear systems over `Z_p`.

pub mod certificates;
pub mod consistency;
pub mod csp;
pub mod cyclotomic;
pub mod fourier;
pub mod gap_instances;
pub mod operators;
pub mod reductions;

pub use csp::{ClassicalAssignment, Constraint, CspError, Instance, Language, Relation, ValueSet};
pub use cyclotomic::{CycNum, UniPoly};
pub use fourier::MultiPoly;
