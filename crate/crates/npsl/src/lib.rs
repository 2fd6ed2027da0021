//! Absolute stability and contraction certificates for Lur'e systems in
//! weighted ℓᵖ norms, built on weak pairings, logarithmic norms, and a
//! non-polynomial S-Lemma.
//!
//! The crate is organised bottom-up:
//!
//! * [`linalg`] — dense matrix helpers (Metzler majorants, spectral
//!   abscissa, Perron pairs, symmetric eigensolves).
//! * [`pairings`] — weighted ℓᵖ norms, weak pairings ⟦x,y⟧, and the
//!   logarithmic norms μ_p they induce, plus conic (orthant-restricted)
//!   variants.
//! * [`lp`] — a small dense two-phase simplex used by the S-Lemma layer.
//! * [`slemma`] — primal/dual machinery for `sup ⟦P₀x,x⟧ s.t. ⟦P_jx,x⟧ ≤ ρ_j`
//!   on the unit sphere, with zero-duality-gap special cases.
//! * [`lure`] — transcription of Lur'e feedback systems into form families
//!   and the certification paths (LP dual, ℓ² Schur/KYP, circle criterion,
//!   Metzler/Perron weights, Aizerman scan).
//! * [`simulate`] — fixed-step RK4 trajectories against declared sector and
//!   slope classes; decay/contraction ratios used to validate certificates.
//! * [`schema`] — JSON (de)serialisation of systems, form families, and
//!   certificates shared with the CLI.

pub mod linalg;
pub mod lp;
pub mod lure;
pub mod pairings;
pub mod schema;
pub mod simulate;
pub mod slemma;

pub use linalg::{Matrix, Vector};
