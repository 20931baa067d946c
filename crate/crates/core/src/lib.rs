//! Sequential prediction with log loss for one-parameter exponential families.
//!
//! The crate implements four prediction strategies (NML, conditional NML,
//! sequential NML, and Bayes with the Jeffreys prior) and the numerical
//! checks that decide when sequential NML is exchangeable: the constancy
//! integral, the variance-function ODE, the higher-order Taylor condition,
//! and transformations of families.

pub mod analysis;
pub mod error;
pub mod families;
pub mod quadrature;
pub mod strategies;
pub mod tweedie;

pub use error::{Error, Result, Tail};
pub use families::{
    BaseMeasure, Chart, ConvexCore, FamilyKind, FamilySpec, Interval, MleEstimate, MonotoneMap,
    ObservationSequence, ParamValue, Support,
};
pub use analysis::{
    AnalysisReport, Classification, DerivativeBundle, Position, TestSet, VarianceFunctionSpec, Verdict,
};
pub use quadrature::{Integrator, QuadratureError, QuadratureResult, Tolerance};
pub use strategies::{
    PredictiveDistribution, RegretRecord, Strategy,
};
pub use tweedie::{tweedie_log_density, tweedie_moments, tweedie_sample, TweedieDensityValue};
