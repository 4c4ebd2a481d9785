//! Conjugacies of analytic cocycles: the band-function algebra, reduction
//! of near-Schrödinger cocycles to Schrödinger form, normalization of
//! constant cocycles, and the triangular model cocycle.

pub mod band;
pub mod normalize;
pub mod reduction;
pub mod triangular;

pub use band::{BandFunction, MatFunction};
pub use normalize::{normalize_constant, ConstantCase, Normalization};
pub use reduction::{perturbed_schrodinger, schrodinger_reduction, ReductionOptions, ReductionResult};
pub use triangular::{
    perturbation_bound_check, tx_asymptotics_check, tx_bruteforce, tx_closed_form, TriangularCocycle, TxRecord,
};
