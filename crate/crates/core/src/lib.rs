//! Motion planning through gadgets with many robots.
//!
//! - [`gadget`] / [`library`]: gadget types, systems, configurations, moves.
//! - [`zero_player`]: round-robin simulation of directed systems with spawners.
//! - [`counter`]: three-counter machines and their compilation to gadget systems.
//! - [`petri`]: Petri nets, forward exploration and backward coverability.
//! - [`translate`]: gadget systems to Petri nets and back.
//! - [`one_player`]: robot reachability and targeted reconfiguration.
//! - [`two_player`]: the impartial shared-robot game with the ko rule.
//! - [`formats`]: JSON and text interchange formats.

pub mod gadget;
pub mod library;
pub mod zero_player;
pub mod counter;
pub mod one_player;
pub mod petri;
pub mod translate;
pub mod two_player;
pub mod formats;

pub use gadget::{Configuration, Diagnostic, GadgetError, GadgetType, LocId, Move, System, SystemBuilder, Transition};
