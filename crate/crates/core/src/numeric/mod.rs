//! Scalar special functions behind every likelihood evaluation.

mod bvn;
mod gamma;
mod normal;

pub use bvn::{bvn_cdf, PROB_CEIL, PROB_FLOOR, RHO_CAP};
pub(crate) use bvn::{bvn_pdf, bvn_raw};
pub use gamma::{chi_square_sf, gamma_q, ln_gamma};
pub(crate) use normal::{cdf, pdf};
pub use normal::{
    std_normal_cdf, std_normal_pdf, std_normal_quantile, Correlation, Probability,
    FRAC_1_SQRT_2PI,
};
