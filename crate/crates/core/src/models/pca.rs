use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::color::{Color, ColorSpace};
use crate::error::{Error, Result};
use crate::geometry::{SiteId, SiteSpace, WindowDescriptor};
use crate::kernel::{markov_footprint, Kernel};

/// A probabilistic cellular automaton on a finite cell set.
///
/// `theta[i]` holds the rows of `θ_i(· | η_{V_i})` in mixed radix over the
/// resolved neighborhood `V_i` (sorted, wrapped when periodic).
#[derive(Clone, Debug)]
pub struct PcaSpec {
    pub colors: ColorSpace,
    pub cells: Vec<i64>,
    pub neighborhoods: BTreeMap<i64, Vec<i64>>,
    pub depth: u32,
    pub periodic: bool,
    theta: BTreeMap<i64, Vec<f64>>,
}

/// JSON form of a [`PcaSpec`]. `transition` is keyed by cell, or `"*"` for
/// a rule shared by every cell; rows are keyed by the comma-separated colors
/// of the sorted neighborhood.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PcaDocument {
    pub colors: Vec<i64>,
    pub cells: Vec<i64>,
    pub neighborhoods: BTreeMap<String, Vec<i64>>,
    pub depth: u32,
    #[serde(default)]
    pub periodic: bool,
    pub transition: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>,
}

impl PcaSpec {
    /// Builds the tables by evaluating `theta(cell, neighborhood colors)`.
    pub fn from_fn(
        colors: ColorSpace,
        cells: Vec<i64>,
        neighborhoods: BTreeMap<i64, Vec<i64>>,
        depth: u32,
        periodic: bool,
        theta: impl Fn(i64, &[Color]) -> Vec<f64>,
    ) -> Result<Self> {
        let resolved = resolve(&cells, &neighborhoods, periodic)?;
        let n = colors.len();
        let mut tables = BTreeMap::new();
        for (&i, v) in &resolved {
            let rows = n.pow(v.len() as u32);
            let mut flat = Vec::with_capacity(rows * n);
            for r in 0..rows {
                let past = decode(n, v.len(), r);
                let law = theta(i, &past);
                check_row(&law, n).map_err(|m| Error::Domain(format!("cell {i}: {m}")))?;
                flat.extend(law);
            }
            tables.insert(i, flat);
        }
        Ok(PcaSpec {
            colors,
            cells,
            neighborhoods,
            depth,
            periodic,
            theta: tables,
        })
    }

    pub fn from_document(doc: &PcaDocument) -> Result<Self> {
        let colors = ColorSpace::new(doc.colors.clone())
            .map_err(|e| Error::load("colors", e.to_string()))?;
        let mut neighborhoods = BTreeMap::new();
        for (k, v) in &doc.neighborhoods {
            let i: i64 = k
                .parse()
                .map_err(|_| Error::load(format!("neighborhoods.{k}"), "cell keys must be integers"))?;
            neighborhoods.insert(i, v.clone());
        }
        let resolved = resolve(&doc.cells, &neighborhoods, doc.periodic)?;
        let n = colors.len();
        let mut theta = BTreeMap::new();
        for (&i, v) in &resolved {
            let key = i.to_string();
            let (location, rows) = match doc.transition.get(&key) {
                Some(rows) => (format!("transition.{key}"), rows),
                None => match doc.transition.get("*") {
                    Some(rows) => ("transition.*".to_string(), rows),
                    None => return Err(Error::load(format!("transition.{key}"), "no rule for this cell")),
                },
            };
            let count = n.pow(v.len() as u32);
            let mut flat = vec![f64::NAN; count * n];
            for (rk, row) in rows {
                let loc = format!("{location}.\"{rk}\"");
                let past: Vec<Color> = rk
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| {
                        s.trim()
                            .parse::<i64>()
                            .ok()
                            .and_then(|c| colors.color_of(c).ok())
                            .ok_or_else(|| Error::load(loc.clone(), format!("bad color '{s}'")))
                    })
                    .collect::<Result<_>>()?;
                if past.len() != v.len() {
                    return Err(Error::load(
                        loc,
                        format!("cell {i} has {} neighbors, key lists {}", v.len(), past.len()),
                    ));
                }
                let r = past.iter().fold(0, |acc, c| acc * n + c.index());
                let mut law = vec![0.0; n];
                for (c, &p) in row {
                    let col = c
                        .parse::<i64>()
                        .ok()
                        .and_then(|c| colors.color_of(c).ok())
                        .ok_or_else(|| Error::load(loc.clone(), format!("unknown color {c}")))?;
                    law[col.index()] = p;
                }
                check_row(&law, n).map_err(|m| Error::load(loc.clone(), m))?;
                flat[r * n..(r + 1) * n].copy_from_slice(&law);
            }
            if let Some(r) = (0..count).find(|&r| flat[r * n].is_nan()) {
                let missing: Vec<String> = decode(n, v.len(), r)
                    .iter()
                    .map(|c| colors.value(*c).to_string())
                    .collect();
                return Err(Error::load(location, format!("missing row \"{}\"", missing.join(","))));
            }
            theta.insert(i, flat);
        }
        Ok(PcaSpec {
            colors,
            cells: doc.cells.clone(),
            neighborhoods,
            depth: doc.depth,
            periodic: doc.periodic,
            theta,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PcaDocument = serde_json::from_str(text)
            .map_err(|e| Error::load(format!("line {}", e.line()), e.to_string()))?;
        Self::from_document(&doc)
    }

    /// `θ_i(· | η_{V_i})` with `past` aligned with the resolved neighborhood.
    pub fn theta(&self, cell: i64, past: &[Color]) -> &[f64] {
        let n = self.colors.len();
        let r = past.iter().fold(0, |acc, c| acc * n + c.index());
        &self.theta[&cell][r * n..(r + 1) * n]
    }

    /// Sorted neighborhood of a cell after wrapping.
    pub fn resolved_neighborhood(&self, cell: i64) -> Result<Vec<i64>> {
        let r = resolve(&self.cells, &self.neighborhoods, self.periodic)?;
        r.get(&cell)
            .cloned()
            .ok_or_else(|| Error::Domain(format!("{cell} is not a cell")))
    }
}

fn check_row(law: &[f64], n: usize) -> std::result::Result<(), String> {
    if law.len() != n {
        return Err(format!("row has {} entries for {n} colors", law.len()));
    }
    if law.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(format!("row {law:?} has entries outside [0,1]"));
    }
    let sum: f64 = law.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(format!("row sums to {sum}, not 1"));
    }
    Ok(())
}

fn decode(n: usize, len: usize, mut r: usize) -> Vec<Color> {
    let mut out = vec![Color(0); len];
    for slot in out.iter_mut().rev() {
        *slot = Color((r % n) as u8);
        r /= n;
    }
    out
}

fn resolve(
    cells: &[i64],
    neighborhoods: &BTreeMap<i64, Vec<i64>>,
    periodic: bool,
) -> Result<BTreeMap<i64, Vec<i64>>> {
    // the geometry performs the same validation and wrapping
    let space = SiteSpace::pca(cells, neighborhoods, 1, periodic)?;
    let mut out = BTreeMap::new();
    for &i in cells {
        let x = space.site((i, 1))?;
        out.insert(i, space.nearest_past(x).iter().map(|&y| space.key(y).0).collect());
    }
    Ok(out)
}

/// Kernel of the embedded POMM: `γ_{(i,t)}(· | η) = θ_i(· | η_{V_i × {t−1}})`.
#[derive(Clone, Debug)]
pub struct PcaKernel {
    spec: Arc<PcaSpec>,
}

impl PcaKernel {
    pub fn spec(&self) -> &PcaSpec {
        &self.spec
    }
}

impl Kernel for PcaKernel {
    fn label(&self) -> String {
        format!("pca({} cells)", self.spec.cells.len())
    }

    fn colors(&self) -> &ColorSpace {
        &self.spec.colors
    }

    fn footprint(&self, space: &SiteSpace, x: SiteId) -> Result<Vec<SiteId>> {
        if !matches!(space.descriptor(), WindowDescriptor::Pca { .. }) {
            return Err(Error::Unsupported("PCA kernels need a PCA window".into()));
        }
        markov_footprint(space, x)
    }

    fn law(&self, space: &SiteSpace, x: SiteId, past: &[Color], out: &mut [f64]) {
        out.copy_from_slice(self.spec.theta(space.key(x).0, past));
    }
}

/// Space-time window `U × {0, …, T}` and the embedded kernel.
pub fn pca_to_pomm(spec: PcaSpec) -> Result<(Arc<SiteSpace>, PcaKernel)> {
    let space = SiteSpace::pca(&spec.cells, &spec.neighborhoods, spec.depth, spec.periodic)?;
    Ok((
        Arc::new(space),
        PcaKernel {
            spec: Arc::new(spec),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn majority_noise(cells: Vec<i64>, periodic: bool) -> Result<PcaSpec> {
        let nb = cells.iter().map(|&i| (i, vec![i - 1, i, i + 1])).collect();
        PcaSpec::from_fn(ColorSpace::occupation(), cells, nb, 2, periodic, |_, past| {
            let ones = past.iter().filter(|c| c.0 == 1).count();
            let p = if 2 * ones > past.len() { 0.9 } else { 0.2 };
            vec![1.0 - p, p]
        })
    }

    #[test]
    fn open_neighborhoods_truncate() {
        assert!(matches!(
            majority_noise(vec![0, 1, 2], false),
            Err(Error::Truncation { .. })
        ));
        let spec = majority_noise(vec![0, 1, 2], true).unwrap();
        assert_eq!(spec.resolved_neighborhood(0).unwrap(), vec![0, 1, 2]);
        let (space, kernel) = pca_to_pomm(spec).unwrap();
        assert_eq!(space.len(), 9);
        let x = space.site((1, 2)).unwrap();
        assert_eq!(kernel.footprint(&space, x).unwrap().len(), 3);
    }

    #[test]
    fn json_shared_rule() {
        let text = r#"{
            "colors": [0, 1], "cells": [0, 1], "depth": 1,
            "neighborhoods": {"0": [0, 1], "1": [0, 1]},
            "transition": {"*": {"0,0": {"0": 1.0}, "0,1": {"1": 0.5, "0": 0.5},
                                  "1,0": {"1": 0.5, "0": 0.5}, "1,1": {"1": 1.0}}}
        }"#;
        let spec = PcaSpec::from_json(text).unwrap();
        assert_eq!(spec.theta(1, &[Color(1), Color(1)]), &[0.0, 1.0]);
        let missing = text.replace(r#""1,1": {"1": 1.0}"#, r#""1,1": {"1": 0.8}"#);
        assert!(matches!(PcaSpec::from_json(&missing), Err(Error::Load { .. })));
    }
}
