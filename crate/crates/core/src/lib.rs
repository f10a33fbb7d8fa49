//! Simulation of a Bose condensate coupled dispersively to a single cavity
//! mode, where the condensate number `a^dag a` drives the cavity quadrature
//! `c + c^dag` like radiation pressure drives a mirror.
//!
//! The crate covers the truncated Fock-space toolkit ([`fock`]), the trap
//! transition moments that set the coupling ([`trap`]), exact and numerical
//! time evolution ([`dynamics`]), state preparation and Wigner readout
//! protocols ([`protocols`]) and finite-shot emulation ([`sampling`]).

pub mod dynamics;
pub mod error;
pub mod fock;
pub mod protocols;
pub mod sampling;
pub mod special;
pub mod trap;

pub use error::{Error, ErrorKind, Result};
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
