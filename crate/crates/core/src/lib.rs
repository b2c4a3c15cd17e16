//! Positional strategies of k-pebble games represented as presheaves of partial
//! homomorphisms (or partial isomorphisms), and the deciders built on them:
//!
//! * strong k-consistency as coflasquification ([`presheaf::coflasquify`]);
//! * cohomological k-consistency, where local sections are filtered by an
//!   integer linear test for Z-compatible extensions ([`cohomology`]);
//! * existential, k-variable, counting and cohomological equivalence of
//!   structures ([`equivalence`]);
//! * a generic greatest-fixpoint engine for deflationary operators
//!   ([`fixpoint`]) and the exact integer linear algebra behind the
//!   cohomological test ([`zlin`]).
//!
//! Every decider is cross-checked against brute-force oracles in the test
//! suites; [`structures::brute_force`] is the homomorphism oracle.
//!
//! Inner loops (per-context filters, per-section tests, brute-force
//! enumeration) run on rayon when the `parallel` feature is enabled; see
//! [`exec`] for the runtime switch and the combinatorial budget.

pub mod cohomology;
pub mod corpus;
pub mod equivalence;
pub mod error;
pub mod exec;
pub mod fixpoint;
pub mod presheaf;
pub mod structures;
pub mod zlin;

pub use error::{Error, Result};
pub use presheaf::{ContextPoset, GlobalSection, PresheafFamily};
pub use structures::{LinearTemplate, Mode, Section, Structure, Vocabulary};
