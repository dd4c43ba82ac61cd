//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter `{field}` must be strictly positive, got {value}")]
    NonPositiveInput { field: &'static str, value: f64 },

    #[error("bare dissipation {bare} rad/s exceeds the feedback-controlled rate {feedback} rad/s")]
    BareExceedsFeedbackDamping { bare: f64, feedback: f64 },

    #[error("gravitational coupling epsilon = {epsilon} >= 1: differential mode frequency is imaginary")]
    EpsilonOutOfRange { epsilon: f64 },

    #[error("{what} is not positive semidefinite")]
    NotPsd { what: &'static str },

    #[error("negativity discriminant {discriminant} is negative beyond tolerance: covariance is unphysical")]
    ComplexBranch { discriminant: f64 },

    #[error("covariance determinant {det} is not strictly positive")]
    SingularCovariance { det: f64 },

    #[error("measurement rate is zero: conditional steady state does not exist below the thermal state")]
    DegenerateMeasurement,

    #[error("log argument {bracket} <= 0: closed-form negativity is outside its expansion's domain")]
    LogDomain { bracket: f64 },

    #[error("negativity is not differentiable at the requested point")]
    NonDifferentiable,

    #[error("propagated variance {value} is negative beyond rounding tolerance")]
    NegativeVariance { value: f64 },

    #[error("steady-state negativity {en} is not positive: no signal to budget")]
    NotEntangled { en: f64 },

    #[error("step size underflow at t = {t} s (h = {step} s)")]
    StepSizeUnderflow { t: f64, step: f64 },

    #[error("covariance positivity lost at t = {t} s (min eigenvalue {min_eigenvalue})")]
    PositivityLost { t: f64, min_eigenvalue: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),
}
