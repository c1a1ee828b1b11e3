use serde::Serialize;

use crate::color::{Color, Configuration};
use crate::error::Result;
use crate::geometry::{SiteId, TimeBox};
use crate::kernel::{box_event_probability, state_count, BoxPlan, Kernel};

#[derive(Clone, Debug, Serialize)]
pub struct UniformityReport {
    /// `inf_ω γ_Λ(A|ω) / sup_ω γ_Λ(A|ω)`.
    pub c: f64,
    pub min: f64,
    pub max: f64,
    /// Number of boundary configurations enumerated.
    pub boundaries: usize,
    /// Boundary sites that the box reads.
    pub exterior: Vec<SiteId>,
}

/// Enumerates every configuration of the sites read across the past boundary
/// and returns the ratio of the extreme values of `γ_Λ(A|·)`.
///
/// `c` is 1 when `A` has probability zero under every boundary.
pub fn uniformity_constant(
    kernel: &dyn Kernel,
    tbox: &TimeBox,
    event: impl Fn(&Configuration) -> bool,
) -> Result<UniformityReport> {
    let plan = BoxPlan::new(kernel, tbox)?;
    let exterior = plan.exterior().to_vec();
    let n = kernel.colors().len();
    let count = state_count(n, exterior.len())?;
    let window = tbox.space().len();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut boundary = Configuration::empty(window);
    for mut r in 0..count {
        for &s in exterior.iter().rev() {
            boundary.set(s, Color((r % n) as u8));
            r /= n;
        }
        let p = box_event_probability(kernel, tbox, &boundary, &event)?;
        min = min.min(p);
        max = max.max(p);
    }
    let c = if max <= 0.0 { 1.0 } else { min / max };
    Ok(UniformityReport {
        c,
        min,
        max,
        boundaries: count,
        exterior,
    })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::geometry::SiteSpace;
    use crate::models::{voter_epsilon, IsingKernel, StavskayaKernel};

    #[test]
    fn single_site_ising() {
        let space = Arc::new(SiteSpace::z2_window(1, 1).unwrap());
        let tbox = TimeBox::window_interior(space.clone()).unwrap();
        let x = tbox.sites()[0];
        let k = IsingKernel::new(0.5, 0.0).unwrap();
        let r = uniformity_constant(&k, &tbox, |c| c.get(x) == Some(Color(1))).unwrap();
        let e = voter_epsilon(0.5);
        assert_eq!(r.boundaries, 4);
        assert!((r.c - e / (1.0 - e)).abs() < 1e-12);
    }

    #[test]
    fn stavskaya_can_be_degenerate() {
        let space = Arc::new(SiteSpace::z2_window(1, 1).unwrap());
        let tbox = TimeBox::window_interior(space).unwrap();
        let x = tbox.sites()[0];
        let k = StavskayaKernel::new(0.7).unwrap();
        let r = uniformity_constant(&k, &tbox, |c| c.get(x) == Some(Color(1))).unwrap();
        assert_eq!(r.c, 0.0);
        let never = uniformity_constant(&k, &tbox, |_| false).unwrap();
        assert_eq!(never.c, 1.0);
    }
}
