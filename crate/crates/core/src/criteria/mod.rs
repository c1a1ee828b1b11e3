//! Uniqueness criteria: dust-rate matrices and the Dobrushin constant,
//! maximal percolation parameters, oscillations and the dusting audit, and
//! the bounded-uniformity constant.
//!
//! Decisions are one-sided: a criterion either certifies uniqueness or is
//! inconclusive.

pub mod closed_form;
mod dust;
mod oscillation;
pub mod phase;
mod uniformity;

use std::fmt;

use serde::Serialize;

pub use dust::{
    dobrushin_gamma, dp_decision, dust_rate_matrix, max_perc_params, DobrushinReport, DpReport,
    DustRateMatrix, Method, PercParams,
};
pub use oscillation::{apply_kernel, dusting_audit, DustingCase, DustingReport, TestFunction};
pub use uniformity::{uniformity_constant, UniformityReport};

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Uniqueness,
    Inconclusive,
}

impl Decision {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Decision::Uniqueness
        } else {
            Decision::Inconclusive
        }
    }

    pub fn is_uniqueness(self) -> bool {
        self == Decision::Uniqueness
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Uniqueness => "uniqueness",
            Decision::Inconclusive => "inconclusive",
        })
    }
}

/// `½ Σ |μ(ω) − ν(ω)|` for two distributions on the same atoms.
pub fn variational_distance(mu: &[f64], nu: &[f64]) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::Domain(format!(
            "distributions live on {} and {} atoms",
            mu.len(),
            nu.len()
        )));
    }
    Ok(0.5 * mu.iter().zip(nu).map(|(a, b)| (a - b).abs()).sum::<f64>())
}
