//! Workbench for a real-valued logic whose only quantifier is integration
//! against a probability measure.
//!
//! The crate is organized around finite, exactly-computable models:
//!
//! * [`logic`]: formulas with compositional bounds, a concrete grammar, and a
//!   round-tripping printer.
//! * [`structures`]: finite probability structures, exact evaluation,
//!   sup-norms, minimalization, and elementary-substructure checks.
//! * [`invariance`]: semigroup actions, invariant measures with LP duality
//!   certificates, iterated averaging limits, paradoxical decompositions, and
//!   generated axiom sets.
//! * [`stability`]: value matrices of binary formulas, ladder indices, and
//!   the metric on rows.
//! * [`nip`]: function families, box-cover measures, independence dimension,
//!   and L1 type quotients.
//! * [`topometric`]: finite topologies with pseudometrics and derivative
//!   sequences that discard metrically small points.
//! * [`files`] and [`cli`]: the textual formats and the command front end.
//!
//! All numeric work uses arbitrary-precision rationals; nothing in the crate
//! rounds. Long searches accept a [`cancel::CancelToken`].

pub mod cancel;
pub mod cli;
pub mod files;
pub mod invariance;
pub mod logic;
pub mod nip;
pub mod rational;
pub mod stability;
pub mod structures;
pub mod topometric;
