//! Distribution-free risk control: exact binomial tail bounds and threshold
//! selection with a guaranteed selective risk.

mod binomial;
mod sgr;

pub use binomial::{binomial_cdf, clopper_pearson_upper, ln_binomial_cdf};
pub use sgr::{calibration_split, probe_budget, sgr_select, split_indices, SgrProbe, SgrResult};
