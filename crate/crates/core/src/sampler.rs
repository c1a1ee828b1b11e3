//! Forward sampling over time boxes and the monotone (POS-Holley) coupling.
//!
//! Sites are drawn slice by slice. Site `x` of replica `r` always consumes
//! the uniform addressed by `(seed, r, x)`, and its color is the quantile
//! `max{e : γ_x(σ_x ≥ e | ·) ≥ U_x}`. Two boxes driven by the same uniforms
//! are therefore coupled monotonically whenever the kernel is monotone.

use rand::Rng;
use rayon::prelude::*;

use crate::color::{Color, ColorSpace, Configuration};
use crate::error::{Error, Result};
use crate::geometry::{SiteId, SiteSpace, TimeBox};
use crate::kernel::{BoxPlan, Kernel};
use crate::rng::{self, Purpose, UniformBlock};
use crate::stats::Estimate;

/// Colors outside the box.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryCondition {
    /// Every exterior site takes the maximal color (⊕).
    Plus,
    /// Every exterior site takes the minimal color (⊖).
    Minus,
    /// Exterior colors read from a configuration.
    Explicit(Configuration),
    /// Independent colors with the given law, redrawn per replica.
    IidRandom(Vec<f64>),
}

impl BoundaryCondition {
    /// `plus`, `minus` or `random:p` (a binary law with `P(max) = p`).
    pub fn parse(text: &str, colors: &ColorSpace) -> Result<Self> {
        match text {
            "plus" | "+" => Ok(BoundaryCondition::Plus),
            "minus" | "-" => Ok(BoundaryCondition::Minus),
            _ => {
                let p: f64 = text
                    .strip_prefix("random:")
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Domain(format!("unknown boundary '{text}'")))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Domain(format!("boundary density {p} outside [0,1]")));
                }
                let mut law = vec![0.0; colors.len()];
                law[colors.max().index()] += p;
                law[colors.min().index()] += 1.0 - p;
                Ok(BoundaryCondition::IidRandom(law))
            }
        }
    }
}

/// `max{e : Σ_{c≥e} law[c] ≥ u}` for `u ∈ (0, 1]`.
#[inline]
pub fn quantile(law: &[f64], u: f64) -> Color {
    let mut tail = 0.0;
    for e in (1..law.len()).rev() {
        tail += law[e];
        if tail >= u {
            return Color(e as u8);
        }
    }
    Color(0)
}

/// A read-only view of one sampled box configuration.
#[derive(Copy, Clone)]
pub struct SampleView<'a> {
    tbox: &'a TimeBox,
    colors: &'a [Color],
}

impl<'a> SampleView<'a> {
    /// Colors in the box's slicing order.
    pub fn colors(&self) -> &'a [Color] {
        self.colors
    }

    pub fn get(&self, site: SiteId) -> Option<Color> {
        self.tbox.position(site).map(|i| self.colors[i])
    }

    pub fn to_configuration(&self) -> Configuration {
        let mut c = Configuration::empty(self.tbox.space().len());
        c.assign(self.tbox.order(), self.colors);
        c
    }
}

/// Precomputed state for repeated sampling of one box.
pub struct BoxSampler<'a> {
    kernel: &'a dyn Kernel,
    tbox: &'a TimeBox,
    plan: BoxPlan,
    lo: usize,
    hi: usize,
}

/// Per-thread buffers.
pub struct Scratch {
    uniforms: UniformBlock,
    past: Vec<Color>,
    law: Vec<f64>,
}

impl Scratch {
    fn split(&mut self) -> (&mut UniformBlock, Buffers<'_>) {
        (
            &mut self.uniforms,
            Buffers {
                past: &mut self.past,
                law: &mut self.law,
            },
        )
    }
}

/// Working memory of a single draw.
pub struct Buffers<'a> {
    past: &'a mut Vec<Color>,
    law: &'a mut Vec<f64>,
}

impl<'a> BoxSampler<'a> {
    pub fn new(kernel: &'a dyn Kernel, tbox: &'a TimeBox) -> Result<Self> {
        let plan = BoxPlan::new(kernel, tbox)?;
        let lo = tbox.sites().first().map_or(0, |s| s.index());
        let hi = tbox.sites().last().map_or(0, |s| s.index() + 1);
        Ok(BoxSampler {
            kernel,
            tbox,
            plan,
            lo,
            hi,
        })
    }

    pub fn plan(&self) -> &BoxPlan {
        &self.plan
    }

    pub fn tbox(&self) -> &TimeBox {
        self.tbox
    }

    pub fn scratch(&self) -> Scratch {
        Scratch {
            uniforms: UniformBlock::new(0, 0, Purpose::Sample, 0, 0, 1),
            past: Vec::new(),
            law: vec![0.0; self.kernel.colors().len()],
        }
    }

    /// Exterior colors for replica `replica`.
    pub fn exterior(&self, boundary: &BoundaryCondition, seed: u64, replica: u64) -> Result<Vec<Color>> {
        let colors = self.kernel.colors();
        let ext = self.plan.exterior();
        match boundary {
            BoundaryCondition::Plus => Ok(vec![colors.max(); ext.len()]),
            BoundaryCondition::Minus => Ok(vec![colors.min(); ext.len()]),
            BoundaryCondition::Explicit(c) => {
                let out = self.plan.exterior_colors(self.tbox.space(), c)?;
                for &col in &out {
                    colors.check(col)?;
                }
                Ok(out)
            }
            BoundaryCondition::IidRandom(law) => {
                if law.len() != colors.len() {
                    return Err(Error::Domain(format!(
                        "boundary law has {} entries for {} colors",
                        law.len(),
                        colors.len()
                    )));
                }
                let lo = ext.iter().map(|s| s.index()).min().unwrap_or(0);
                let hi = ext.iter().map(|s| s.index() + 1).max().unwrap_or(0);
                let u = UniformBlock::new(seed, replica, Purpose::Boundary, lo, hi, 1);
                Ok(ext.iter().map(|s| quantile(law, u.get(s.index(), 0))).collect())
            }
        }
    }

    /// Draws the box given exterior colors and uniforms for the box sites.
    #[inline]
    pub fn draw_with(&self, exterior: &[Color], uniforms: &UniformBlock, out: &mut [Color], buf: Buffers<'_>) {
        let space = self.tbox.space();
        for (i, &x) in self.plan.order().iter().enumerate() {
            self.plan.gather(i, out, exterior, buf.past);
            self.kernel.law(space, x, buf.past, buf.law);
            out[i] = quantile(buf.law, uniforms.get(x.index(), 0));
        }
    }

    /// One replica in slicing order.
    pub fn draw(&self, exterior: &[Color], seed: u64, replica: u64, out: &mut [Color], scratch: &mut Scratch) {
        let (u, buf) = scratch.split();
        u.refill(seed, replica, Purpose::Sample, self.lo, self.hi);
        self.draw_with(exterior, u, out, buf);
    }

    /// Replicas `0..replicas` mapped through `f`, in replica order.
    pub fn map<T, F>(&self, boundary: &BoundaryCondition, seed: u64, replicas: usize, f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(SampleView<'_>) -> T + Sync,
    {
        // validates the boundary once; random boundaries are redrawn per replica
        let first = self.exterior(boundary, seed, 0)?;
        let fixed = match boundary {
            BoundaryCondition::IidRandom(_) => None,
            _ => Some(first),
        };
        let out = (0..replicas as u64)
            .into_par_iter()
            .map_init(
                || (self.scratch(), vec![Color(0); self.plan.len()]),
                |(scratch, buf), r| {
                    let drawn;
                    let ext: &[Color] = match &fixed {
                        Some(e) => e,
                        None => {
                            drawn = self.exterior(boundary, seed, r).expect("validated boundary");
                            &drawn
                        }
                    };
                    self.draw(ext, seed, r, buf, scratch);
                    f(SampleView {
                        tbox: self.tbox,
                        colors: buf,
                    })
                },
            )
            .collect();
        Ok(out)
    }
}

/// One configuration of the box (replica 0 of `seed`).
pub fn sample_box(
    kernel: &dyn Kernel,
    tbox: &TimeBox,
    boundary: &BoundaryCondition,
    seed: u64,
) -> Result<Configuration> {
    let sampler = BoxSampler::new(kernel, tbox)?;
    let mut v = sampler.map(boundary, seed, 1, |s| s.to_configuration())?;
    Ok(v.pop().unwrap())
}

/// Stored replicas of a box.
#[derive(Clone, Debug)]
pub struct SampleRun {
    pub seed: u64,
    pub replicas: usize,
    pub tbox: TimeBox,
    pub colors: ColorSpace,
    samples: Vec<Vec<Color>>,
}

pub fn sample_replicas(
    kernel: &dyn Kernel,
    tbox: &TimeBox,
    boundary: &BoundaryCondition,
    seed: u64,
    replicas: usize,
) -> Result<SampleRun> {
    let sampler = BoxSampler::new(kernel, tbox)?;
    let samples = sampler.map(boundary, seed, replicas, |s| s.colors().to_vec())?;
    Ok(SampleRun {
        seed,
        replicas,
        tbox: tbox.clone(),
        colors: kernel.colors().clone(),
        samples,
    })
}

impl SampleRun {
    pub fn view(&self, replica: usize) -> SampleView<'_> {
        SampleView {
            tbox: &self.tbox,
            colors: &self.samples[replica],
        }
    }

    pub fn views(&self) -> impl Iterator<Item = SampleView<'_>> {
        (0..self.replicas).map(|r| self.view(r))
    }

    fn values_at(&self, site: SiteId) -> Result<Vec<f64>> {
        let i = self
            .tbox
            .position(site)
            .ok_or_else(|| Error::Domain(format!("site {site} is not in the box")))?;
        Ok(self
            .samples
            .iter()
            .map(|s| self.colors.value(s[i]) as f64)
            .collect())
    }

    /// Mean color value at every box site, in slicing order.
    pub fn site_means(&self) -> Vec<(SiteId, Estimate)> {
        self.tbox
            .order()
            .iter()
            .map(|&s| (s, Estimate::from_values(&self.values_at(s).unwrap())))
            .collect()
    }

    /// Sample covariance of the color values at `a` and `b`, with the
    /// standard error of the mean of centred products.
    pub fn covariance(&self, a: SiteId, b: SiteId) -> Result<Estimate> {
        let va = self.values_at(a)?;
        let vb = self.values_at(b)?;
        let ma = Estimate::from_values(&va).mean;
        let mb = Estimate::from_values(&vb).mean;
        let prods: Vec<f64> = va.iter().zip(&vb).map(|(x, y)| (x - ma) * (y - mb)).collect();
        Ok(Estimate::from_values(&prods))
    }

    /// Average color value over `sites`, per replica.
    pub fn mean_of_sites(&self, sites: &[SiteId]) -> Result<Estimate> {
        let pos: Vec<usize> = sites
            .iter()
            .map(|&s| {
                self.tbox
                    .position(s)
                    .ok_or_else(|| Error::Domain(format!("site {s} is not in the box")))
            })
            .collect::<Result<_>>()?;
        if pos.is_empty() {
            return Err(Error::Domain("empty observable".into()));
        }
        Ok(empirical_mean(self, |v| {
            pos.iter()
                .map(|&i| self.colors.value(v.colors()[i]) as f64)
                .sum::<f64>()
                / pos.len() as f64
        }))
    }
}

/// Replica mean of an observable with its standard error.
pub fn empirical_mean(run: &SampleRun, f: impl Fn(SampleView<'_>) -> f64) -> Estimate {
    let values: Vec<f64> = run.views().map(f).collect();
    Estimate::from_values(&values)
}

/// Checks `γ_y(σ ≥ a | ω) ≤ γ_y(σ ≥ a | η)` on `pairs` random comparable
/// footprint configurations `ω ≤ η` at random box sites.
pub fn monotonicity_audit(kernel: &dyn Kernel, tbox: &TimeBox, pairs: usize, seed: u64) -> Result<()> {
    let space: &SiteSpace = tbox.space();
    let sites = tbox.sites();
    if sites.is_empty() {
        return Ok(());
    }
    let n = kernel.colors().len();
    let mut rng = rng::stream(seed, 1, Purpose::Audit);
    let (mut lo_law, mut hi_law) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..pairs {
        let x = sites[rng.gen_range(0..sites.len())];
        let fp = kernel.footprint(space, x)?;
        let hi: Vec<Color> = fp.iter().map(|_| Color(rng.gen_range(0..n) as u8)).collect();
        let lo: Vec<Color> = hi.iter().map(|c| Color(rng.gen_range(0..=c.0))).collect();
        kernel.law(space, x, &lo, &mut lo_law);
        kernel.law(space, x, &hi, &mut hi_law);
        let (mut tl, mut th) = (0.0, 0.0);
        for a in (1..n).rev() {
            tl += lo_law[a];
            th += hi_law[a];
            if tl > th + 1e-12 {
                let show = |v: &[Color]| {
                    v.iter()
                        .map(|c| kernel.colors().value(*c))
                        .collect::<Vec<_>>()
                };
                return Err(Error::NotMonotone(format!(
                    "at {}: past {:?} gives P(σ ≥ {}) = {tl}, larger past {:?} gives {th}",
                    space.describe(x),
                    show(&lo),
                    kernel.colors().value(Color(a as u8)),
                    show(&hi)
                )));
            }
        }
    }
    Ok(())
}

/// Lower and upper samples sharing their uniforms.
pub struct CoupledSampler<'a> {
    inner: BoxSampler<'a>,
    lower: Vec<Color>,
    upper: Vec<Color>,
}

impl<'a> CoupledSampler<'a> {
    /// Audits monotonicity and checks `lower ≤ upper` on the exterior.
    pub fn new(
        kernel: &'a dyn Kernel,
        tbox: &'a TimeBox,
        lower: &BoundaryCondition,
        upper: &BoundaryCondition,
        seed: u64,
    ) -> Result<Self> {
        let inner = BoxSampler::new(kernel, tbox)?;
        for b in [lower, upper] {
            if matches!(b, BoundaryCondition::IidRandom(_)) {
                return Err(Error::Unsupported(
                    "coupled sampling needs deterministic boundaries".into(),
                ));
            }
        }
        let lo = inner.exterior(lower, seed, 0)?;
        let hi = inner.exterior(upper, seed, 0)?;
        if let Some(i) = (0..lo.len()).find(|&i| lo[i] > hi[i]) {
            return Err(Error::Domain(format!(
                "lower boundary exceeds upper boundary at {}",
                tbox.space().describe(inner.plan.exterior()[i])
            )));
        }
        monotonicity_audit(kernel, tbox, 1000, seed)?;
        Ok(CoupledSampler {
            inner,
            lower: lo,
            upper: hi,
        })
    }

    /// Replicas mapped through `f(lower, upper)`, in replica order.
    pub fn map<T, F>(&self, seed: u64, replicas: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(SampleView<'_>, SampleView<'_>) -> T + Sync,
    {
        let n = self.inner.plan.len();
        (0..replicas as u64)
            .into_par_iter()
            .map_init(
                || (self.inner.scratch(), vec![Color(0); n], vec![Color(0); n]),
                |(scratch, a, b), r| {
                    let (u, _) = scratch.split();
                    u.refill(seed, r, Purpose::Sample, self.inner.lo, self.inner.hi);
                    let (u, buf) = scratch.split();
                    self.inner.draw_with(&self.lower, u, a, buf);
                    let (u, buf) = scratch.split();
                    self.inner.draw_with(&self.upper, u, b, buf);
                    let tbox = self.inner.tbox;
                    f(SampleView { tbox, colors: a }, SampleView { tbox, colors: b })
                },
            )
            .collect()
    }
}

/// One monotone coupled pair (replica 0 of `seed`).
pub fn sample_coupled_monotone(
    kernel: &dyn Kernel,
    tbox: &TimeBox,
    lower: &BoundaryCondition,
    upper: &BoundaryCondition,
    seed: u64,
) -> Result<(Configuration, Configuration)> {
    let sampler = CoupledSampler::new(kernel, tbox, lower, upper, seed)?;
    let mut v = sampler.map(seed, 1, |a, b| (a.to_configuration(), b.to_configuration()));
    Ok(v.pop().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{IsingKernel, StavskayaKernel};
    use std::sync::Arc;

    #[test]
    fn quantile_takes_the_maximal_color() {
        assert_eq!(quantile(&[0.3, 0.7], 0.7), Color(1));
        assert_eq!(quantile(&[0.3, 0.7], 0.7000001), Color(0));
        assert_eq!(quantile(&[0.0, 1.0], 1.0), Color(1));
        assert_eq!(quantile(&[1.0, 0.0], 1e-300), Color(0));
        assert_eq!(quantile(&[0.2, 0.0, 0.8], 0.9), Color(0));
        assert_eq!(quantile(&[0.2, 0.0, 0.8], 0.8), Color(2));
    }

    #[test]
    fn stavskaya_trivial_boundaries() {
        let space = Arc::new(SiteSpace::z2_window(8, 8).unwrap());
        let tbox = TimeBox::z2_interior(space).unwrap();
        let k = StavskayaKernel::new(0.9).unwrap();
        let c = sample_box(&k, &tbox, &BoundaryCondition::Minus, 3).unwrap();
        assert!(tbox.sites().iter().all(|&s| c.get(s) == Some(Color(0))));
        let k1 = StavskayaKernel::new(1.0).unwrap();
        let c = sample_box(&k1, &tbox, &BoundaryCondition::Plus, 3).unwrap();
        assert!(tbox.sites().iter().all(|&s| c.get(s) == Some(Color(1))));
    }

    #[test]
    fn identical_seeds_reproduce() {
        let space = Arc::new(SiteSpace::z2_window(10, 10).unwrap());
        let tbox = TimeBox::z2_interior(space).unwrap();
        let k = IsingKernel::new(0.4, 0.0).unwrap();
        let b = BoundaryCondition::IidRandom(vec![0.5, 0.5]);
        let a = sample_replicas(&k, &tbox, &b, 99, 5).unwrap();
        let c = sample_replicas(&k, &tbox, &b, 99, 5).unwrap();
        for r in 0..5 {
            assert_eq!(a.view(r).colors(), c.view(r).colors());
        }
        let d = sample_replicas(&k, &tbox, &b, 100, 5).unwrap();
        assert_ne!(a.view(0).colors(), d.view(0).colors());
    }

    #[test]
    fn coupled_equal_boundaries_agree() {
        let space = Arc::new(SiteSpace::z2_window(6, 6).unwrap());
        let tbox = TimeBox::z2_interior(space).unwrap();
        let k = IsingKernel::new(0.5, 0.1).unwrap();
        let (a, b) =
            sample_coupled_monotone(&k, &tbox, &BoundaryCondition::Plus, &BoundaryCondition::Plus, 4)
                .unwrap();
        assert_eq!(a, b);
        assert!(CoupledSampler::new(&k, &tbox, &BoundaryCondition::Plus, &BoundaryCondition::Minus, 4).is_err());
    }

    #[test]
    fn missing_explicit_boundary_is_named() {
        let space = Arc::new(SiteSpace::z2_window(2, 2).unwrap());
        let tbox = TimeBox::z2_interior(space.clone()).unwrap();
        let k = IsingKernel::new(0.5, 0.0).unwrap();
        let mut partial = Configuration::empty(space.len());
        partial.set(space.site((0, 1)).unwrap(), Color(1));
        match sample_box(&k, &tbox, &BoundaryCondition::Explicit(partial), 1) {
            Err(Error::MissingBoundary { sites }) => {
                assert!(sites.contains(&"(1,0)".to_string()));
                assert!(!sites.contains(&"(0,1)".to_string()));
            }
            other => panic!("expected missing boundary, got {other:?}"),
        }
    }
}
