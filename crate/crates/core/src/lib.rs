//! Decoherence of symmetric collective spin (Dicke) states of `N` two-level
//! atoms under inhomogeneous per-atom coupling fields.
//!
//! The amplitude layers ([`ensemble`], [`su2`], [`overlap`]) are generic over
//! the floating-point scalar via [`Real`]; the `*64` aliases below fix it to
//! `f64`, which is what the Monte Carlo [`experiments`] and the CLI use.
// `!(x > 0.0)` deliberately rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]


pub mod cli;
pub mod combinatorics;
pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod overlap;
pub mod scalar;
pub mod su2;

pub use ensemble::{
    log_dicke_norm, map_raw_to_field, sample_ensemble, AtomicEnsemble, DickeLabel, FieldDistribution,
    FieldVector, RawAtomParams, SuperpositionState,
};
pub use error::{Error, Result};
pub use overlap::{
    dephasing_overlap, general_overlap, leakage, oracle_overlap, CostBudget, EngineChoice, EngineId,
    OverlapEngine, OverlapSeries, TimeGrid,
};
pub use scalar::Real;
pub use su2::{g_factor, interference_operator, propagator, GFactor, Mat2};

pub type Complex64 = num_complex::Complex<f64>;
pub type FieldVector64 = FieldVector<f64>;
pub type AtomicEnsemble64 = AtomicEnsemble<f64>;
pub type SuperpositionState64 = SuperpositionState<f64>;
pub type Mat2f64 = Mat2<f64>;
pub type GFactor64 = GFactor<f64>;
pub type TimeGrid64 = TimeGrid<f64>;
pub type OverlapSeries64 = OverlapSeries<f64>;

pub type FieldVector32 = FieldVector<f32>;
pub type AtomicEnsemble32 = AtomicEnsemble<f32>;
pub type Mat2f32 = Mat2<f32>;
pub type TimeGrid32 = TimeGrid<f32>;
pub type OverlapSeries32 = OverlapSeries<f32>;
