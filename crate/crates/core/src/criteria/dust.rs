use std::collections::BTreeMap;

use serde::Serialize;

use super::{variational_distance, Decision};
use crate::color::Color;
use crate::error::{Error, Result};
use crate::geometry::{SiteId, SiteSpace};
use crate::kernel::{state_count, Kernel};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ClosedForm,
    Enumerated,
}

/// Sparse `α_{y,x}` for `x` in the footprint of `y`.
///
/// For homogeneous kernels a single representative row is computed; entries
/// of other sites are looked up by footprint position.
#[derive(Clone, Debug)]
pub struct DustRateMatrix {
    pub method: Method,
    rows: BTreeMap<SiteId, Vec<(SiteId, f64)>>,
    representative: Option<Vec<f64>>,
    /// Set when rows of sites with truncated footprints were skipped.
    pub warning: Option<String>,
}

impl DustRateMatrix {
    /// Matrix whose rows all equal `row` (aligned with each footprint).
    pub fn homogeneous(
        kernel: &dyn Kernel,
        space: &SiteSpace,
        row: Vec<f64>,
        method: Method,
    ) -> Result<Self> {
        let y = representative(kernel, space)?;
        let fp = kernel.footprint(space, y)?;
        if fp.len() != row.len() {
            return Err(Error::Domain(format!(
                "row has {} entries for a footprint of {}",
                row.len(),
                fp.len()
            )));
        }
        let mut rows = BTreeMap::new();
        rows.insert(y, fp.into_iter().zip(row.iter().copied()).collect());
        Ok(DustRateMatrix {
            method,
            rows,
            representative: Some(row),
            warning: None,
        })
    }

    /// Rows that were computed explicitly.
    pub fn rows(&self) -> &BTreeMap<SiteId, Vec<(SiteId, f64)>> {
        &self.rows
    }

    /// `α_{y,x}`; zero unless `x` is in the footprint of `y`.
    pub fn get(&self, kernel: &dyn Kernel, space: &SiteSpace, y: SiteId, x: SiteId) -> f64 {
        if let Some(row) = self.rows.get(&y) {
            return row.iter().find(|(s, _)| *s == x).map_or(0.0, |e| e.1);
        }
        match (&self.representative, kernel.footprint(space, y)) {
            (Some(rep), Ok(fp)) if fp.len() == rep.len() => {
                fp.iter().position(|&s| s == x).map_or(0.0, |j| rep[j])
            }
            _ => 0.0,
        }
    }

    /// `Σ_x α_{y,x}` for a computed row.
    pub fn row_sum(&self, y: SiteId) -> Option<f64> {
        self.rows.get(&y).map(|r| r.iter().map(|e| e.1).sum())
    }

    /// Every entry moved by `delta` (clamped at zero).
    pub fn shifted(&self, delta: f64) -> Self {
        let mut out = self.clone();
        for row in out.rows.values_mut() {
            for e in row.iter_mut() {
                e.1 = (e.1 + delta).max(0.0);
            }
        }
        if let Some(rep) = &mut out.representative {
            for v in rep.iter_mut() {
                *v = (*v + delta).max(0.0);
            }
        }
        out
    }
}

/// Latest site (in topological order) whose footprint lies inside the window.
fn representative(kernel: &dyn Kernel, space: &SiteSpace) -> Result<SiteId> {
    space
        .topo_order()
        .iter()
        .rev()
        .copied()
        .find(|&x| kernel.footprint(space, x).is_ok())
        .ok_or_else(|| Error::Domain("no site of the window has a complete footprint".into()))
}

/// Sites to scan: one representative for homogeneous kernels, every site
/// with a complete footprint otherwise.
fn scanned_sites(kernel: &dyn Kernel, space: &SiteSpace) -> Result<(Vec<SiteId>, Option<String>)> {
    if kernel.is_homogeneous() {
        return Ok((vec![representative(kernel, space)?], None));
    }
    let mut sites = Vec::new();
    let mut skipped = 0;
    for x in space.sites() {
        match kernel.footprint(space, x) {
            Ok(_) => sites.push(x),
            Err(Error::Truncation { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let warning = (skipped > 0).then(|| {
        format!("{skipped} sites with truncated footprints were skipped; the supremum covers the window only")
    });
    Ok((sites, warning))
}

/// Laws of `y` for every footprint configuration, in mixed radix.
fn all_laws(kernel: &dyn Kernel, space: &SiteSpace, y: SiteId, k: usize) -> Result<Vec<Vec<f64>>> {
    let n = kernel.colors().len();
    let count = state_count(n, k)?;
    // pairs of configurations are compared
    state_count(n, 2 * k)?;
    let mut past = vec![Color(0); k];
    let mut out = Vec::with_capacity(count);
    for r in 0..count {
        let mut v = r;
        for slot in past.iter_mut().rev() {
            *slot = Color((v % n) as u8);
            v /= n;
        }
        let mut law = vec![0.0; n];
        kernel.law(space, y, &past, &mut law);
        out.push(law);
    }
    Ok(out)
}

/// `α_{y,x} = sup { ‖γ_y(·|ξ) − γ_y(·|η)‖ : ξ, η differ only at x }`,
/// enumerated over footprint configurations.
pub fn dust_rate_matrix(kernel: &dyn Kernel, space: &SiteSpace) -> Result<DustRateMatrix> {
    let (sites, warning) = scanned_sites(kernel, space)?;
    let n = kernel.colors().len();
    let mut rows = BTreeMap::new();
    let mut representative = None;
    for &y in &sites {
        let fp = kernel.footprint(space, y)?;
        let k = fp.len();
        let laws = all_laws(kernel, space, y, k)?;
        let mut row = vec![0.0f64; k];
        for (r, law) in laws.iter().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                let weight = n.pow((k - 1 - j) as u32);
                let digit = (r / weight) % n;
                for c in digit + 1..n {
                    let other = &laws[r + (c - digit) * weight];
                    *entry = entry.max(variational_distance(law, other)?);
                }
            }
        }
        if kernel.is_homogeneous() {
            representative = Some(row.clone());
        }
        rows.insert(y, fp.into_iter().zip(row).collect());
    }
    Ok(DustRateMatrix {
        method: Method::Enumerated,
        rows,
        representative,
        warning,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DobrushinReport {
    /// `Γ = sup_y Σ_x α_{y,x}`.
    pub gamma: f64,
    /// Row attaining the supremum.
    pub site: Option<SiteId>,
    pub decision: Decision,
}

pub fn dobrushin_gamma(alpha: &DustRateMatrix) -> DobrushinReport {
    let mut best: (f64, Option<SiteId>) = (0.0, None);
    for &y in alpha.rows.keys() {
        let s = alpha.row_sum(y).unwrap();
        if best.1.is_none() || s > best.0 {
            best = (s, Some(y));
        }
    }
    DobrushinReport {
        gamma: best.0,
        site: best.1,
        decision: Decision::from_bool(best.0 < 1.0),
    }
}

/// Per-site `p_x^γ = sup_{ξ,η} ‖γ_x(·|ξ) − γ_x(·|η)‖`.
#[derive(Clone, Debug)]
pub struct PercParams {
    pub method: Method,
    pub values: Vec<(SiteId, f64)>,
    pub warning: Option<String>,
}

impl PercParams {
    pub fn sup(&self) -> f64 {
        self.values.iter().map(|e| e.1).fold(0.0, f64::max)
    }
}

pub fn max_perc_params(kernel: &dyn Kernel, space: &SiteSpace) -> Result<PercParams> {
    let (sites, warning) = scanned_sites(kernel, space)?;
    let mut values = Vec::with_capacity(sites.len());
    for &y in &sites {
        let k = kernel.footprint(space, y)?.len();
        let laws = all_laws(kernel, space, y, k)?;
        let mut sup = 0.0f64;
        for a in 0..laws.len() {
            for b in a + 1..laws.len() {
                sup = sup.max(variational_distance(&laws[a], &laws[b])?);
            }
        }
        values.push((y, sup));
    }
    Ok(PercParams {
        method: Method::Enumerated,
        values,
        warning,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DpReport {
    pub sup_px: f64,
    pub pc_plus: f64,
    /// `pc_plus − sup p_x`; positive margins certify uniqueness.
    pub margin: f64,
    pub decision: Decision,
}

/// Uniqueness iff `sup_x p_x^γ < p_c⁺`.
pub fn dp_decision(sup_px: f64, pc_plus: f64) -> Result<DpReport> {
    if !(pc_plus > 0.0 && pc_plus <= 1.0) {
        return Err(Error::Domain(format!("p_c+ must lie in (0,1], got {pc_plus}")));
    }
    Ok(DpReport {
        sup_px,
        pc_plus,
        margin: pc_plus - sup_px,
        decision: Decision::from_bool(sup_px < pc_plus),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::closed_form;
    use crate::models::{ConstantKernel, IsingKernel, StavskayaKernel};

    #[test]
    fn stavskaya_rates() {
        let space = SiteSpace::z2_window(3, 3).unwrap();
        let k = StavskayaKernel::new(0.4).unwrap();
        let a = dust_rate_matrix(&k, &space).unwrap();
        let (&y, row) = a.rows().iter().next().unwrap();
        assert_eq!(row.len(), 2);
        for &(x, v) in row {
            assert!((v - 0.4).abs() < 1e-15);
            assert!(space.strictly_below(x, y));
        }
        let d = dobrushin_gamma(&a);
        assert!((d.gamma - 0.8).abs() < 1e-15);
        assert!(d.decision.is_uniqueness());
        assert!((max_perc_params(&k, &space).unwrap().sup() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn ising_rates_match_closed_form() {
        let space = SiteSpace::z2_window(2, 2).unwrap();
        let k = IsingKernel::new(2.0, 0.05).unwrap();
        let d = dobrushin_gamma(&dust_rate_matrix(&k, &space).unwrap());
        assert!((d.gamma - closed_form::ising_gamma(2.0, 0.05)).abs() < 1e-12);
        assert!((d.gamma - 1.0989).abs() < 1e-4);
        assert_eq!(d.decision, Decision::Inconclusive);
    }

    #[test]
    fn constant_kernel_has_zero_rates() {
        let space = SiteSpace::z2_window(2, 2).unwrap();
        let k = ConstantKernel::fair_spins();
        assert_eq!(dobrushin_gamma(&dust_rate_matrix(&k, &space).unwrap()).gamma, 0.0);
        assert_eq!(max_perc_params(&k, &space).unwrap().sup(), 0.0);
    }

    #[test]
    fn dp_decisions() {
        let r = dp_decision(0.5f64.tanh(), 0.5).unwrap();
        assert!(r.decision.is_uniqueness());
        let px = 0.6f64.tanh();
        assert_eq!(dp_decision(px, 0.5).unwrap().decision, Decision::Inconclusive);
        assert!(dp_decision(px, 0.64450).unwrap().decision.is_uniqueness());
        assert!(dp_decision(px, 0.0).is_err());
        assert!(dp_decision(px, 1.5).is_err());
    }
}
