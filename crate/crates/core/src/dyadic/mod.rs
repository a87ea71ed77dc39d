//! Dyadic intervals, Cantor sets and their Frostman measures.
//!
//! Interval endpoints and masses are exact rationals. Floating point only
//! enters when a flow is flattened into an [`AtomicMeasure`] for the spectral
//! layer.

mod atomic;
mod cantor;
mod flow;
mod index;

pub use atomic::{Atom, AtomicMeasure, Interval};
pub use cantor::{cantor_intervals, CantorSpec, ClosedInterval, Survivors, MAX_SURVIVOR_LEVEL};
pub use flow::{
    cantor_flow, flow_check, frostman_check, hull_check, n_approximation, FlowReport,
    FrostmanReport, HullReport, TreeFlowMeasure, FLOW_TOLERANCE, MAX_FLOW_DEPTH,
};
pub use index::{three_cover, DyadicIndex};

/// Exact masses. Every constructed flow has dyadic masses, which keeps the
/// denominators small enough for `i128`.
pub type Rational = num_rational::Ratio<i128>;
