//! Exact truncated power series and the convergence-order oracle.

mod expand;
mod oracle;
pub mod qseries;

pub use expand::{expand_family, expand_full, Expansion, SymbolBinding};
pub use oracle::{
    condition_binding, derive_conditions, eighth_order_leading, first_nonzero, leading_coefficient_check,
    observed_order, order_report, random_c, random_rational, two_point_leading, Affine, DeriveError,
    DeriveReport, DeriveRequest, Derived, DerivedConditions, LeadingCoefficient, OrderReport, DEFAULT_ORDER,
};
pub use qseries::{QSeries, SeriesError, SeriesResult};
