use crate::color::{Color, ColorSpace};
use crate::error::{Error, Result};
use crate::geometry::{SiteId, SiteSpace};
use crate::kernel::{markov_footprint, Kernel};

/// Stavskaya kernel on `{0, 1}`: `P(σ = 1 | ξ) = p` if some past neighbor
/// is occupied, and `0` otherwise.
#[derive(Clone, Debug)]
pub struct StavskayaKernel {
    p: f64,
    colors: ColorSpace,
}

impl StavskayaKernel {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("p must lie in [0,1], got {p}")));
        }
        Ok(StavskayaKernel {
            p,
            colors: ColorSpace::occupation(),
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

impl Kernel for StavskayaKernel {
    fn label(&self) -> String {
        format!("stavskaya(p={})", self.p)
    }

    fn colors(&self) -> &ColorSpace {
        &self.colors
    }

    fn footprint(&self, space: &SiteSpace, x: SiteId) -> Result<Vec<SiteId>> {
        markov_footprint(space, x)
    }

    #[inline]
    fn law(&self, _: &SiteSpace, _: SiteId, past: &[Color], out: &mut [f64]) {
        let q = if past.iter().any(|c| c.0 == 1) { self.p } else { 0.0 };
        out[0] = 1.0 - q;
        out[1] = q;
    }

    fn is_homogeneous(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn law_cases() {
        let space = SiteSpace::z2_window(1, 1).unwrap();
        let x = space.site((1, 1)).unwrap();
        let mut out = [0.0; 2];
        StavskayaKernel::new(0.7).unwrap().law(&space, x, &[Color(0), Color(0)], &mut out);
        assert_eq!(out, [1.0, 0.0]);
        StavskayaKernel::new(1.0).unwrap().law(&space, x, &[Color(0), Color(1)], &mut out);
        assert_eq!(out[1], 1.0);
        StavskayaKernel::new(0.7).unwrap().law(&space, x, &[Color(1), Color(0)], &mut out);
        assert!((out[0] - 0.3).abs() < 1e-15);
        assert!(StavskayaKernel::new(1.2).is_err());
        assert!(StavskayaKernel::new(-0.1).is_err());
    }
}
