//! Filter design: discount weights, orthonormal bases and the derivation of
//! recursive coefficients.

mod basis;
mod dd;
mod export;
mod lde;
mod tables;
mod weight;

pub use basis::{orthonormal_basis, BasisSet, MAX_DEGREE};
pub use export::{CoefficientDocument, DesignRecord};
pub use lde::{
    derive_causal_lde, derive_noncausal_pair, impulse_response_prefix, spectrum_filter_bank,
    synthesis_weights, two_sided_impulse_response, FilterCoefficients, FilterDesign,
    LdeCoefficients, NonCausalPair, SpectrumFilterBank,
};
pub use tables::{optimal_q, table_coefficients, ClosedForm};
pub use weight::{weight_moments, Causality, WeightSpec};
