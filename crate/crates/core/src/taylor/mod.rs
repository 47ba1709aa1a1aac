//! Truncated multivariate Taylor arithmetic.
//!
//! [`Series`] carries Taylor coefficients of a function around an implicit
//! base point; elementary functions are propagated with the standard
//! homogeneous-degree recurrences, so every coefficient is exact up to
//! floating-point rounding. [`Dual`] adds one level of forward-mode
//! differentiation on top of any [`Scalar`].

mod basis;
mod dual;
mod scalar;
mod series;

pub use basis::{
    degree, multi_binomial, multi_factorial, multi_indices_of_degree, multi_indices_up_to,
    MonomialBasis, MultiIndex, MAX_SERIES_ORDER,
};
pub use dual::Dual;
pub use scalar::Scalar;
pub use series::Series;
