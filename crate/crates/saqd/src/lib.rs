//! Simulator and algebra toolkit for three-dimensional subsystem abelian
//! quantum double codes over Z_d.

pub mod algebra;
pub mod channel;
pub mod code;
pub mod decoder;
pub mod experiment;
pub mod lattice;
