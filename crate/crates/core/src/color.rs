//! Finite ordered color spaces and (partial) configurations over a window.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::SiteId;

/// Index of a color inside its [`ColorSpace`]. The order of indices is the
/// color order used for domination and FKG arguments.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Color(pub u8);

impl Color {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A finite, totally ordered list of color values (strictly increasing).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorSpace {
    values: Vec<i64>,
}

impl ColorSpace {
    pub fn new(mut values: Vec<i64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("color space must be nonempty".into()));
        }
        if values.len() > u8::MAX as usize {
            return Err(Error::Domain(format!(
                "at most {} colors are supported, got {}",
                u8::MAX,
                values.len()
            )));
        }
        let n = values.len();
        values.sort_unstable();
        values.dedup();
        if values.len() != n {
            return Err(Error::Domain("color values must be distinct".into()));
        }
        Ok(ColorSpace { values })
    }

    /// `{-1, +1}`.
    pub fn spins() -> Self {
        ColorSpace {
            values: vec![-1, 1],
        }
    }

    /// `{0, 1}`.
    pub fn occupation() -> Self {
        ColorSpace { values: vec![0, 1] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[i64] {
        &self.values
    }

    pub fn value(&self, c: Color) -> i64 {
        self.values[c.index()]
    }

    pub fn color_of(&self, value: i64) -> Result<Color> {
        self.values
            .binary_search(&value)
            .map(|i| Color(i as u8))
            .map_err(|_| Error::Domain(format!("{value} is not a color of {self}")))
    }

    pub fn contains(&self, c: Color) -> bool {
        c.index() < self.values.len()
    }

    pub fn check(&self, c: Color) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(Error::Domain(format!("color index {} outside {self}", c.0)))
        }
    }

    /// Minimal color (the ⊖ value).
    pub fn min(&self) -> Color {
        Color(0)
    }

    /// Maximal color (the ⊕ value).
    pub fn max(&self) -> Color {
        Color((self.values.len() - 1) as u8)
    }

    pub fn iter(&self) -> impl Iterator<Item = Color> + Clone {
        (0..self.values.len()).map(|i| Color(i as u8))
    }
}

impl fmt::Display for ColorSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

/// Partial assignment `site -> color` over a window.
///
/// Indexed by [`SiteId`]; unassigned sites hold `None`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    values: Vec<Option<Color>>,
}

impl Configuration {
    /// No site assigned.
    pub fn empty(window_len: usize) -> Self {
        Configuration {
            values: vec![None; window_len],
        }
    }

    /// Every site of the window set to `color`.
    pub fn constant(window_len: usize, color: Color) -> Self {
        Configuration {
            values: vec![Some(color); window_len],
        }
    }

    pub fn window_len(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn get(&self, site: SiteId) -> Option<Color> {
        self.values.get(site.index()).copied().flatten()
    }

    #[inline]
    pub fn set(&mut self, site: SiteId, color: Color) {
        self.values[site.index()] = Some(color);
    }

    pub fn clear(&mut self, site: SiteId) {
        self.values[site.index()] = None;
    }

    pub fn is_defined(&self, site: SiteId) -> bool {
        self.get(site).is_some()
    }

    /// Sites with an assigned color, in id order.
    pub fn defined_sites(&self) -> impl Iterator<Item = SiteId> + '_ {
        self.values
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_some())
            .map(|(i, _)| SiteId::from_index(i))
    }

    /// Assign `colors[k]` to `sites[k]`.
    pub fn assign(&mut self, sites: &[SiteId], colors: &[Color]) {
        debug_assert_eq!(sites.len(), colors.len());
        for (&s, &c) in sites.iter().zip(colors) {
            self.set(s, c);
        }
    }

    /// Copy of `self` where sites defined in `other` take `other`'s colors.
    pub fn overlaid(&self, other: &Configuration) -> Configuration {
        let mut out = self.clone();
        for s in other.defined_sites() {
            out.set(s, other.get(s).unwrap());
        }
        out
    }

    /// Colors of `sites` in order, failing on the first undefined site.
    pub fn colors_at(&self, sites: &[SiteId]) -> Option<Vec<Color>> {
        sites.iter().map(|&s| self.get(s)).collect()
    }

    /// Every assigned color belongs to `colors`.
    pub fn validate(&self, colors: &ColorSpace) -> Result<()> {
        for c in self.values.iter().flatten() {
            colors.check(*c)?;
        }
        Ok(())
    }

    /// Pointwise order on the sites defined in both configurations.
    pub fn le_on(&self, other: &Configuration, sites: &[SiteId]) -> bool {
        sites.iter().all(|&s| match (self.get(s), other.get(s)) {
            (Some(a), Some(b)) => a <= b,
            _ => true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn color_space_is_sorted_and_rejects_duplicates() {
        let e = ColorSpace::new(vec![1, -1]).unwrap();
        assert_eq!(e.values(), &[-1, 1]);
        assert_eq!(e.min(), Color(0));
        assert_eq!(e.max(), Color(1));
        assert_eq!(e.color_of(1).unwrap(), Color(1));
        assert!(e.color_of(0).is_err());
        assert!(ColorSpace::new(vec![]).is_err());
        assert!(ColorSpace::new(vec![2, 2]).is_err());
    }

    #[test]
    fn overlay_prefers_the_second_configuration() {
        let mut a = Configuration::constant(3, Color(0));
        let mut b = Configuration::empty(3);
        b.set(SiteId(1), Color(1));
        a.clear(SiteId(2));
        let c = a.overlaid(&b);
        assert_eq!(c.get(SiteId(0)), Some(Color(0)));
        assert_eq!(c.get(SiteId(1)), Some(Color(1)));
        assert_eq!(c.get(SiteId(2)), None);
        assert_eq!(c.defined_sites().count(), 2);
    }
}
