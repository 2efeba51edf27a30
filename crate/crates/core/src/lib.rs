//! Numerical laboratory for Fejér monotone sequences: convex sets and
//! operators, iteration traces, directional asymptotics, and exact rational
//! oracles for the averaged right shift.
//!
//! Numerical code is generic over [`Scalar`] (`f32`/`f64`); the exact oracle
//! works over big rationals. The aliases below fix the common `f64` choice.

// `!(a > b)` is used on purpose so that NaN falls on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod exact;
pub mod experiments;
pub mod fejer;
pub mod operators;
pub mod scalar;
pub mod sets;
mod solvers;
pub mod vectorspace;

pub use asymptotics::{
    cluster_directions, direction_sequences, max_angular_gap, no_zigzag_check, normal_cone_distance, polar_residual,
    AsymptoticsError, ClusterEstimate, DirectionKind, DirectionOptions, DirectionRecord, DirectionSet, NoZigzagReport,
    NormalCone,
};
pub use exact::{oracle_report, rational_rotation_cluster_count, ExactError, OracleReport, QVector};
pub use fejer::{
    audit_fejer_inequalities, fejer_violation, iterate, largest_fejer_halfspaces, AuditSlacks, FejerError, Halfspace,
    IterationTrace, StopReason,
};
pub use operators::{OperatorError, OperatorSpec, Theta};
pub use scalar::Scalar;
pub use sets::{Constraint, ConvexSetSpec, SetError};
pub use vectorspace::{inner_product, unit_direction, Matrix, UnitVector, Vector, VectorError};

pub type Vector64 = Vector<f64>;
pub type Vector32 = Vector<f32>;
pub type UnitVector64 = UnitVector<f64>;
pub type Matrix64 = Matrix<f64>;
pub type ConvexSet64 = ConvexSetSpec<f64>;
pub type Operator64 = OperatorSpec<f64>;
pub type Operator32 = OperatorSpec<f32>;
pub type Trace64 = IterationTrace<f64>;
pub type Trace32 = IterationTrace<f32>;
pub type DirectionSet64 = DirectionSet<f64>;
