//! Benchmark kernels, PCA embeddings and file-defined kernels.

mod ising;
mod pca;
mod stavskaya;
mod table;

pub use ising::{voter_epsilon, IsingKernel, VoterKernel};
pub use pca::{pca_to_pomm, PcaDocument, PcaKernel, PcaSpec};
pub use stavskaya::StavskayaKernel;
pub use table::{export_table, load_kernel, load_kernel_str, LoadedKernel, TableDocument, TableKernel};

use crate::color::{Color, ColorSpace};
use crate::error::{Error, Result};
use crate::geometry::{SiteId, SiteSpace};
use crate::kernel::{markov_footprint, Kernel};

/// Kernel whose law ignores the past entirely.
#[derive(Clone, Debug)]
pub struct ConstantKernel {
    colors: ColorSpace,
    law: Vec<f64>,
}

impl ConstantKernel {
    pub fn new(colors: ColorSpace, law: Vec<f64>) -> Result<Self> {
        if law.len() != colors.len() {
            return Err(Error::Domain(format!(
                "law has {} entries for {} colors",
                law.len(),
                colors.len()
            )));
        }
        let sum: f64 = law.iter().sum();
        if law.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("law {law:?} is not a probability vector")));
        }
        Ok(ConstantKernel { colors, law })
    }

    /// Fair coin on `{-1, +1}`.
    pub fn fair_spins() -> Self {
        ConstantKernel {
            colors: ColorSpace::spins(),
            law: vec![0.5, 0.5],
        }
    }
}

impl Kernel for ConstantKernel {
    fn label(&self) -> String {
        format!("constant{:?}", self.law)
    }

    fn colors(&self) -> &ColorSpace {
        &self.colors
    }

    fn footprint(&self, space: &SiteSpace, x: SiteId) -> Result<Vec<SiteId>> {
        markov_footprint(space, x)
    }

    fn law(&self, _: &SiteSpace, _: SiteId, _: &[Color], out: &mut [f64]) {
        out.copy_from_slice(&self.law);
    }

    fn is_homogeneous(&self) -> bool {
        true
    }
}
