// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Errors raised by the library. Report-style operations never return these
/// for "soft" findings; those are flags on the report instead.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("operator contains non-finite entries")]
    NonFinite,
    #[error("operator is not Hermitian (max |a - a†| = {max_asymmetry:e})")]
    NotHermitian { max_asymmetry: f64 },
    #[error("operator is not unitary (max |U†U - 1| = {defect:e})")]
    NotUnitary { defect: f64 },
    #[error("eigenvalue routine did not converge")]
    DecompositionFailure,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("time {0} is not on the evolution grid")]
    TimeNotOnGrid(f64),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("groupoid law violated by {defect:e}")]
    GroupoidViolation { defect: f64 },
    #[error("invalid density state: {0}")]
    InvalidState(String),
    #[error("invalid projective resolution: {0}")]
    InvalidResolution(String),
    #[error("invalid block partition: {0}")]
    InvalidPartition(String),
    #[error("filtration does not refine: {0}")]
    InvalidFiltration(String),
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),
    #[error("history family has {size} histories, cap is {cap}")]
    FamilyTooLarge { size: String, cap: usize },
    #[error("multi-indices differ outside slot {slot}")]
    IndicesNotAdjacentVariant { slot: usize },
    #[error("family has a single slot; no interference term is defined")]
    NoInteriorSlot,
    #[error("probability {0:e} is negative beyond roundoff")]
    NegativeProbability(f64),
    #[error("branch has zero probability ({0:e})")]
    ZeroProbabilityBranch(f64),
    #[error("POVM completeness violated by {defect:e}")]
    InvalidPovm { defect: f64 },
    #[error("invalid good set: {0}")]
    InvalidGoodSet(String),
    #[error("unknown event `{0}`")]
    UnknownEvent(String),
    #[error("invalid classical model: {0}")]
    InvalidModel(String),
    #[error("eigenvalue gap {gap:e} does not exceed 2*delta = {bound:e}")]
    EigenvalueGapTooSmall { gap: f64, bound: f64 },
    #[error("empty time grid")]
    EmptyGrid,
    #[error("observed outcome {0} has zero predictive probability")]
    ImpossibleOutcome(usize),
    #[error("enumeration of {size} histories exceeds cap {cap}")]
    EnumerationTooLarge { size: String, cap: usize },
    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),
}

pub type Result<T> = std::result::Result<T, Error>;
