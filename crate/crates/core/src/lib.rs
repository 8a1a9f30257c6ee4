//! Numerical toolkit for spin-boson Hamiltonians with ultraviolet-divergent
//! coupling functions on truncated Fock spaces.
//!
//! The crate builds finite models of an N-coupling, D-level system coupled
//! linearly to a boson field, grades the ultraviolet behaviour of the
//! coupling functions, assembles the Hamiltonian and its interaction parts
//! as dense matrices, and verifies the constructive machinery around them
//! at desk scale:
//!
//! - exact canonical commutation relations on the safe sector of the
//!   truncation ([`fock`]),
//! - validation and simultaneous diagonalization of the coupling matrices,
//!   and the induced block splitting of the interaction ([`gsb`]),
//! - the block resolvent formula with the minimal bounded regularizer,
//!   cross-checked against dense inversion, plus domain diagnostics and
//!   weighted resolvent decay ([`resolvent`]),
//! - cutoff ladders with norm-resolvent convergence rates, self-energies,
//!   and the unitary dressing of the scalar model ([`renorm`]).
//!
//! All values are immutable after construction and all operations are pure
//! functions, so everything is safe to use from concurrent readers.
//!
//! ```
//! use num_complex::Complex64;
//! use spinboson::{fock, gsb, resolvent, Dispersion, FormFactorSpec, ModeGrid};
//!
//! let grid = ModeGrid::uniform(1.0, 4.0, 4, Dispersion::Massive { mass: 1.0 }, 1.0)?;
//! let basis = fock::build_basis(4, 2)?;
//! let params = gsb::PresetParams::single(1.0, FormFactorSpec::default_case1());
//! let model = gsb::preset("sigma_x", &params, grid, basis)?;
//!
//! let z = Complex64::new(-3.0, 0.0);
//! let ctx = resolvent::ResolventContext::from_model(&model, -1.0)?;
//! let via_block_formula = ctx.krein_resolvent(z)?;
//! let h = gsb::assemble_hamiltonian(&model)?;
//! let via_dense_inverse = resolvent::resolvent_direct(&h, z)?;
//! assert!((&via_block_formula - &via_dense_inverse).operator_norm() < 1e-10);
//! # Ok::<(), spinboson::Error>(())
//! ```

pub mod error;
pub mod fit;
pub mod fock;
pub mod gsb;
pub mod linalg;
pub mod modes;
pub mod renorm;
pub mod report;
pub mod resolvent;
pub mod sample;

pub use error::{Error, Result};
pub use fock::{build_basis, FockBasis, FockVec, LinOp};
pub use gsb::{preset, ModelSpec, PresetParams, SpinSystem};
pub use linalg::{C64, CMatrix, CVector};
pub use modes::{CaseLabel, Dispersion, FormFactor, FormFactorSpec, ModeGrid, Tail};
pub use renorm::{ConvergenceReport, DressingReport};
pub use resolvent::ResolventContext;
