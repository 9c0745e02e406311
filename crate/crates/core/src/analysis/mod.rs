//! Checks run against solver traces: the inductive bounds satisfied by the
//! counterexample trajectory, its limit bounds, agreement with the published
//! reference run, the regularity assumptions and a strong-stationarity
//! residual.

mod assumptions;
mod lemma;
mod stationarity;
mod table1;

pub use assumptions::{check_assumptions, AssumptionCheck};
pub use lemma::{
    limit_bound_constants, verify_lemma_bounds, BoundFailure, PairCheck, VerificationReport, LEMMA_BOUNDS, TAU_LOWER,
};
pub use stationarity::{stationarity_residual, StationarityReport, DEFAULT_TOL_ACTIVE};
pub use table1::{
    compare_to_table1, compare_to_table1_detailed, sig3_matches, table1_trace, Table1Comparison, TABLE1_ITERATES,
    TABLE1_PRED_MODEL, TABLE1_ARED_SIGNED,
};
