//! Numerical laboratory for near-equal-speed two-soliton collisions of the
//! BBM equation `(1 - lambda d^2) u_t + (u'' - u + u^2)' = 0`.

pub mod ansatz;
pub mod dynamics;
pub mod error;
pub mod evolver;
pub mod grid;
pub mod krylov;
pub mod linear;
pub mod modulation;
pub mod profiles;
pub mod soliton;

pub use error::{BbmError, Result};
pub use grid::{Grid, GridFunction, Spectral};
pub use soliton::{ModelParams, SolitonParams};
