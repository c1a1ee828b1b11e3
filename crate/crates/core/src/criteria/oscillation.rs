use serde::Serialize;

use super::DustRateMatrix;
use crate::color::Color;
use crate::error::{Error, Result};
use crate::geometry::{SiteId, SiteSpace};
use crate::kernel::{state_count, Kernel};

/// A function of the colors on a finite support, tabulated in mixed radix
/// over the sorted support.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    support: Vec<SiteId>,
    n_colors: usize,
    table: Vec<f64>,
}

impl TestFunction {
    pub fn new(mut support: Vec<SiteId>, n_colors: usize, table: Vec<f64>) -> Result<Self> {
        let len = support.len();
        support.sort_unstable();
        support.dedup();
        if support.len() != len {
            return Err(Error::Domain("support lists a site twice".into()));
        }
        if table.len() != state_count(n_colors, len)? {
            return Err(Error::Domain(format!(
                "table has {} entries, expected {}",
                table.len(),
                n_colors.pow(len as u32)
            )));
        }
        Ok(TestFunction {
            support,
            n_colors,
            table,
        })
    }

    /// Tabulates `f` over the support (sorted); `f` receives colors aligned
    /// with the sorted support.
    pub fn from_fn(mut support: Vec<SiteId>, n_colors: usize, f: impl Fn(&[Color]) -> f64) -> Result<Self> {
        support.sort_unstable();
        let count = state_count(n_colors, support.len())?;
        let table = (0..count)
            .map(|i| f(&decode(n_colors, support.len(), i)))
            .collect();
        Self::new(support, n_colors, table)
    }

    /// `1{σ_x = c}`.
    pub fn indicator(x: SiteId, c: Color, n_colors: usize) -> Self {
        let mut table = vec![0.0; n_colors];
        table[c.index()] = 1.0;
        TestFunction {
            support: vec![x],
            n_colors,
            table,
        }
    }

    pub fn constant(v: f64, n_colors: usize) -> Self {
        TestFunction {
            support: Vec::new(),
            n_colors,
            table: vec![v],
        }
    }

    pub fn support(&self) -> &[SiteId] {
        &self.support
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn n_colors(&self) -> usize {
        self.n_colors
    }

    pub fn value(&self, colors: &[Color]) -> f64 {
        self.table[encode(self.n_colors, colors)]
    }

    /// `δ_x(f) = sup{|f(σ) − f(η)| : σ, η differ only at x}`.
    pub fn oscillation(&self, x: SiteId) -> f64 {
        let Ok(j) = self.support.binary_search(&x) else {
            return 0.0;
        };
        let n = self.n_colors;
        let weight = n.pow((self.support.len() - 1 - j) as u32);
        let mut sup = 0.0f64;
        for (i, &v) in self.table.iter().enumerate() {
            let digit = (i / weight) % n;
            for c in digit + 1..n {
                sup = sup.max((v - self.table[i + (c - digit) * weight]).abs());
            }
        }
        sup
    }

    /// `Δ(f) = Σ_x δ_x(f)`.
    pub fn total_oscillation(&self) -> f64 {
        self.support.iter().map(|&x| self.oscillation(x)).sum()
    }

    /// `sup f − inf f`.
    pub fn range(&self) -> f64 {
        let max = self.table.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = self.table.iter().copied().fold(f64::INFINITY, f64::min);
        max - min
    }

    /// `Σ_σ p(σ) f(σ)` for a law tabulated like `f`.
    pub fn expectation(&self, probs: &[f64]) -> Result<f64> {
        if probs.len() != self.table.len() {
            return Err(Error::Domain("law and function live on different tables".into()));
        }
        Ok(probs.iter().zip(&self.table).map(|(p, v)| p * v).sum())
    }
}

fn decode(n: usize, len: usize, mut i: usize) -> Vec<Color> {
    let mut out = vec![Color(0); len];
    for slot in out.iter_mut().rev() {
        *slot = Color((i % n) as u8);
        i /= n;
    }
    out
}

fn encode(n: usize, colors: &[Color]) -> usize {
    colors.iter().fold(0, |acc, c| acc * n + c.index())
}

/// `γ_y f(σ) = Σ_a γ_y(a | σ_{footprint}) f(σ with σ_y = a)`, supported on
/// `(supp f ∖ {y}) ∪ footprint(y)`, or `f` itself when `y ∉ supp f`.
pub fn apply_kernel(kernel: &dyn Kernel, space: &SiteSpace, y: SiteId, f: &TestFunction) -> Result<TestFunction> {
    let n = f.n_colors;
    if kernel.colors().len() != n {
        return Err(Error::Domain("kernel and test function use different color spaces".into()));
    }
    if f.support.binary_search(&y).is_err() {
        return Ok(f.clone());
    }
    let fp = kernel.footprint(space, y)?;
    let mut support: Vec<SiteId> = f
        .support
        .iter()
        .copied()
        .filter(|&s| s != y)
        .chain(fp.iter().copied())
        .collect();
    support.sort_unstable();
    support.dedup();
    let fp_pos: Vec<usize> = fp
        .iter()
        .map(|s| support.binary_search(s).unwrap())
        .collect();
    let f_pos: Vec<Option<usize>> = f
        .support
        .iter()
        .map(|s| if *s == y { None } else { support.binary_search(s).ok() })
        .collect();
    TestFunction::from_fn(support, n, |tau| {
        let past: Vec<Color> = fp_pos.iter().map(|&p| tau[p]).collect();
        let mut law = vec![0.0; n];
        kernel.law(space, y, &past, &mut law);
        let mut args = vec![Color(0); f_pos.len()];
        let mut total = 0.0;
        for (a, &w) in law.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (slot, pos) in args.iter_mut().zip(&f_pos) {
                *slot = pos.map_or(Color(a as u8), |p| tau[p]);
            }
            total += w * f.value(&args);
        }
        total
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct DustingCase {
    pub site: SiteId,
    /// `equal`, `past` (x < y) or `other` (future or outer time).
    pub relation: &'static str,
    pub value: f64,
    pub bound: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DustingReport {
    pub cases: Vec<DustingCase>,
    pub violations: usize,
}

/// Computes `γ_y f` exactly and checks
/// `δ_x(γ_y f) ≤ 1{x≠y} (δ_x(f) + δ_y(f) α_{y,x})` with `α_{y,x} = 0`
/// unless `x < y`.
pub fn dusting_audit(
    kernel: &dyn Kernel,
    space: &SiteSpace,
    alpha: &DustRateMatrix,
    f: &TestFunction,
    y: SiteId,
) -> Result<DustingReport> {
    let g = apply_kernel(kernel, space, y, f)?;
    let mut sites: Vec<SiteId> = g
        .support
        .iter()
        .chain(f.support.iter())
        .copied()
        .chain(std::iter::once(y))
        .collect();
    sites.sort_unstable();
    sites.dedup();
    let dy = f.oscillation(y);
    let mut cases = Vec::with_capacity(sites.len());
    let mut violations = 0;
    for x in sites {
        let value = g.oscillation(x);
        let (relation, bound) = if x == y {
            ("equal", 0.0)
        } else if space.strictly_below(x, y) {
            ("past", f.oscillation(x) + dy * alpha.get(kernel, space, y, x))
        } else {
            ("other", f.oscillation(x))
        };
        let slack = bound - value;
        if slack < -1e-12 {
            violations += 1;
        }
        cases.push(DustingCase {
            site: x,
            relation,
            value,
            bound,
            slack,
        });
    }
    Ok(DustingReport { cases, violations })
}
