//! Single-site oriented kernels and their composition over time boxes.

use std::sync::Arc;

use rand::Rng;

use crate::color::{Color, ColorSpace, Configuration};
use crate::error::{Error, Result};
use crate::geometry::{SiteId, SiteSpace, TimeBox};
use crate::rng::{self, Purpose};

/// Largest number of interior configurations enumerated exactly.
pub const MAX_STATES: usize = 1 << 20;

/// Boxes larger than this are multiplied in log space.
pub const LOG_SPACE_SITES: usize = 64;

/// A single-site oriented kernel `γ_x(σ_x | ·)`.
///
/// The kernel declares, for every site, a finite footprint inside the strict
/// past of the site. [`Kernel::law`] receives the colors of the footprint in
/// the declared order and nothing else, so orientedness only has to be
/// checked on the footprint declaration.
pub trait Kernel: Send + Sync {
    fn label(&self) -> String;

    fn colors(&self) -> &ColorSpace;

    /// Sites whose colors the law of `x` depends on.
    fn footprint(&self, space: &SiteSpace, x: SiteId) -> Result<Vec<SiteId>>;

    /// Writes `γ_x(c | past)` into `out[c]` for every color `c`.
    fn law(&self, space: &SiteSpace, x: SiteId, past: &[Color], out: &mut [f64]);

    /// The footprint is exactly `∂̲x`.
    fn is_markov(&self) -> bool {
        true
    }

    /// All sites with a complete past share one law (translation invariance).
    fn is_homogeneous(&self) -> bool {
        false
    }

    /// Tolerance for `Σ_c γ_x(c | ·) = 1`.
    fn normalization_tolerance(&self) -> f64 {
        1e-12
    }
}

impl<K: Kernel + ?Sized> Kernel for Arc<K> {
    fn label(&self) -> String {
        (**self).label()
    }
    fn colors(&self) -> &ColorSpace {
        (**self).colors()
    }
    fn footprint(&self, space: &SiteSpace, x: SiteId) -> Result<Vec<SiteId>> {
        (**self).footprint(space, x)
    }
    fn law(&self, space: &SiteSpace, x: SiteId, past: &[Color], out: &mut [f64]) {
        (**self).law(space, x, past, out)
    }
    fn is_markov(&self) -> bool {
        (**self).is_markov()
    }
    fn is_homogeneous(&self) -> bool {
        (**self).is_homogeneous()
    }
    fn normalization_tolerance(&self) -> f64 {
        (**self).normalization_tolerance()
    }
}

/// `∂̲x`, or a truncation error when part of it lies outside the window.
pub fn markov_footprint(space: &SiteSpace, x: SiteId) -> Result<Vec<SiteId>> {
    let missing = space.missing_past(x);
    if !missing.is_empty() {
        return Err(Error::Truncation {
            missing: missing.iter().map(|&k| space.describe_key(k)).collect(),
        });
    }
    Ok(space.nearest_past(x).to_vec())
}

/// Where a footprint color comes from during box evaluation.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Slot {
    /// Position in the elimination order.
    Interior(usize),
    /// Index into [`BoxPlan::exterior`].
    Exterior(usize),
}

/// Footprints of a time box resolved against an elimination order.
#[derive(Clone, Debug)]
pub struct BoxPlan {
    order: Vec<SiteId>,
    refs: Vec<Vec<Slot>>,
    exterior: Vec<SiteId>,
    colors: usize,
}

impl BoxPlan {
    /// Plan for the slicing order of the box.
    pub fn new(kernel: &dyn Kernel, tbox: &TimeBox) -> Result<Self> {
        Self::build(kernel, tbox, tbox.order().to_vec())
    }

    /// Plan for an explicit elimination order, which must list every box
    /// site once and place each site after its in-box past.
    pub fn with_order(kernel: &dyn Kernel, tbox: &TimeBox, order: &[SiteId]) -> Result<Self> {
        let space = tbox.space();
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != tbox.sites() {
            return Err(Error::Domain(
                "elimination order must list every box site exactly once".into(),
            ));
        }
        let mut seen = vec![false; space.len()];
        for &x in order {
            if let Some(p) = space
                .nearest_past(x)
                .iter()
                .find(|p| tbox.contains(**p) && !seen[p.index()])
            {
                return Err(Error::Domain(format!(
                    "site {} is eliminated before its past site {}",
                    space.describe(x),
                    space.describe(*p)
                )));
            }
            seen[x.index()] = true;
        }
        Self::build(kernel, tbox, order.to_vec())
    }

    fn build(kernel: &dyn Kernel, tbox: &TimeBox, order: Vec<SiteId>) -> Result<Self> {
        let space = tbox.space();
        let position: std::collections::HashMap<SiteId, usize> =
            order.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let mut exterior_index = std::collections::HashMap::new();
        let mut exterior = Vec::new();
        let mut refs = Vec::with_capacity(order.len());
        for (i, &x) in order.iter().enumerate() {
            let fp = kernel.footprint(space, x)?;
            let mut r = Vec::with_capacity(fp.len());
            for y in fp {
                match position.get(&y) {
                    Some(&j) if j < i => r.push(Slot::Interior(j)),
                    Some(_) => {
                        return Err(Error::Domain(format!(
                            "footprint of {} contains {} which is not earlier in the order",
                            space.describe(x),
                            space.describe(y)
                        )))
                    }
                    None => {
                        let k = *exterior_index.entry(y).or_insert_with(|| {
                            exterior.push(y);
                            exterior.len() - 1
                        });
                        r.push(Slot::Exterior(k));
                    }
                }
            }
            refs.push(r);
        }
        Ok(BoxPlan {
            order,
            refs,
            exterior,
            colors: kernel.colors().len(),
        })
    }

    pub fn order(&self) -> &[SiteId] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Footprint slots of the site at position `i`.
    pub fn refs(&self, i: usize) -> &[Slot] {
        &self.refs[i]
    }

    /// Sites outside the box that some footprint reads.
    pub fn exterior(&self) -> &[SiteId] {
        &self.exterior
    }

    pub fn n_colors(&self) -> usize {
        self.colors
    }

    /// Exterior colors read from `boundary`, or an error naming the gaps.
    pub fn exterior_colors(&self, space: &SiteSpace, boundary: &Configuration) -> Result<Vec<Color>> {
        let mut missing = Vec::new();
        let mut out = Vec::with_capacity(self.exterior.len());
        for &y in &self.exterior {
            match boundary.get(y) {
                Some(c) => out.push(c),
                None => {
                    missing.push(space.describe(y));
                    out.push(Color(0));
                }
            }
        }
        if missing.is_empty() {
            Ok(out)
        } else {
            Err(Error::MissingBoundary { sites: missing })
        }
    }

    /// Fills `past` with the footprint colors of position `i`.
    #[inline]
    pub fn gather(&self, i: usize, interior: &[Color], exterior: &[Color], past: &mut Vec<Color>) {
        past.clear();
        for s in &self.refs[i] {
            past.push(match *s {
                Slot::Interior(j) => interior[j],
                Slot::Exterior(k) => exterior[k],
            });
        }
    }

    /// `∏_i γ_{x_i}(σ_i | ·)` with `interior` indexed by order position.
    pub fn probability(
        &self,
        kernel: &dyn Kernel,
        space: &SiteSpace,
        interior: &[Color],
        exterior: &[Color],
    ) -> f64 {
        let mut past = Vec::new();
        let mut law = vec![0.0; self.colors];
        let log_space = self.order.len() > LOG_SPACE_SITES;
        let mut acc = if log_space { 0.0 } else { 1.0 };
        for (i, &x) in self.order.iter().enumerate() {
            self.gather(i, interior, exterior, &mut past);
            kernel.law(space, x, &past, &mut law);
            let p = law[interior[i].index()];
            if log_space {
                if p <= 0.0 {
                    return 0.0;
                }
                acc += p.ln();
            } else {
                acc *= p;
                if acc == 0.0 {
                    return 0.0;
                }
            }
        }
        if log_space {
            acc.exp()
        } else {
            acc
        }
    }
}

fn footprint_colors(
    kernel: &dyn Kernel,
    space: &SiteSpace,
    x: SiteId,
    past: &Configuration,
) -> Result<Vec<Color>> {
    let fp = kernel.footprint(space, x)?;
    let missing: Vec<String> = fp
        .iter()
        .filter(|y| !past.is_defined(**y))
        .map(|&y| space.describe(y))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingBoundary { sites: missing });
    }
    Ok(fp.iter().map(|&y| past.get(y).unwrap()).collect())
}

/// `γ_x(· | past)` as a vector over colors.
pub fn single_site_law(
    kernel: &dyn Kernel,
    space: &SiteSpace,
    x: SiteId,
    past: &Configuration,
) -> Result<Vec<f64>> {
    if !space.contains(x) {
        return Err(Error::OutsideWindow(x.to_string()));
    }
    let colors = footprint_colors(kernel, space, x, past)?;
    let mut out = vec![0.0; kernel.colors().len()];
    kernel.law(space, x, &colors, &mut out);
    Ok(out)
}

/// `γ_x(color | past)`.
pub fn eval_single_site(
    kernel: &dyn Kernel,
    space: &SiteSpace,
    x: SiteId,
    color: Color,
    past: &Configuration,
) -> Result<f64> {
    kernel.colors().check(color)?;
    Ok(single_site_law(kernel, space, x, past)?[color.index()])
}

fn interior_colors(tbox: &TimeBox, order: &[SiteId], interior: &Configuration) -> Result<Vec<Color>> {
    let space = tbox.space();
    let missing: Vec<String> = order
        .iter()
        .filter(|s| !interior.is_defined(**s))
        .map(|&s| space.describe(s))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Domain(format!(
            "interior configuration does not define {}",
            missing.join(", ")
        )));
    }
    Ok(order.iter().map(|&s| interior.get(s).unwrap()).collect())
}

/// `γ_Λ(σ | η) = ∏_{x∈Λ} γ_x(σ_x | σ_Λ η)` in slicing order.
pub fn box_probability(
    kernel: &dyn Kernel,
    tbox: &TimeBox,
    interior: &Configuration,
    boundary: &Configuration,
) -> Result<f64> {
    let plan = BoxPlan::new(kernel, tbox)?;
    plan_probability(kernel, tbox, &plan, interior, boundary)
}

/// As [`box_probability`] but multiplying along a given elimination order.
pub fn box_probability_with_order(
    kernel: &dyn Kernel,
    tbox: &TimeBox,
    order: &[SiteId],
    interior: &Configuration,
    boundary: &Configuration,
) -> Result<f64> {
    let plan = BoxPlan::with_order(kernel, tbox, order)?;
    plan_probability(kernel, tbox, &plan, interior, boundary)
}

fn plan_probability(
    kernel: &dyn Kernel,
    tbox: &TimeBox,
    plan: &BoxPlan,
    interior: &Configuration,
    boundary: &Configuration,
) -> Result<f64> {
    let inner = interior_colors(tbox, plan.order(), interior)?;
    for &c in &inner {
        kernel.colors().check(c)?;
    }
    let outer = plan.exterior_colors(tbox.space(), boundary)?;
    Ok(plan.probability(kernel, tbox.space(), &inner, &outer))
}

/// A probability table over the configurations of a finite site list.
///
/// Configurations are encoded in mixed radix over `sites`, the first site
/// being the most significant digit.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    sites: Vec<SiteId>,
    n_colors: usize,
    probs: Vec<f64>,
}

impl JointDistribution {
    pub fn new(sites: Vec<SiteId>, n_colors: usize, probs: Vec<f64>) -> Self {
        debug_assert_eq!(probs.len(), state_count(n_colors, sites.len()).unwrap_or(0));
        JointDistribution {
            sites,
            n_colors,
            probs,
        }
    }

    pub fn sites(&self) -> &[SiteId] {
        &self.sites
    }

    pub fn n_colors(&self) -> usize {
        self.n_colors
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Colors of configuration `index`, aligned with [`Self::sites`].
    pub fn decode(&self, mut index: usize) -> Vec<Color> {
        let mut out = vec![Color(0); self.sites.len()];
        for slot in out.iter_mut().rev() {
            *slot = Color((index % self.n_colors) as u8);
            index /= self.n_colors;
        }
        out
    }

    pub fn encode(&self, colors: &[Color]) -> usize {
        colors
            .iter()
            .fold(0, |acc, c| acc * self.n_colors + c.index())
    }

    /// Probability of the configuration's restriction to [`Self::sites`].
    pub fn prob_of(&self, config: &Configuration) -> Option<f64> {
        let colors = config.colors_at(&self.sites)?;
        Some(self.probs[self.encode(&colors)])
    }

    /// Marginal on a subset of the sites, in the subset's given order.
    pub fn marginal(&self, subset: &[SiteId]) -> Result<JointDistribution> {
        let idx: Vec<usize> = subset
            .iter()
            .map(|s| {
                self.sites
                    .iter()
                    .position(|t| t == s)
                    .ok_or_else(|| Error::Domain(format!("site {s} is not in the table")))
            })
            .collect::<Result<_>>()?;
        let mut out = JointDistribution {
            sites: subset.to_vec(),
            n_colors: self.n_colors,
            probs: vec![0.0; state_count(self.n_colors, subset.len())?],
        };
        for (i, &p) in self.probs.iter().enumerate() {
            let full = self.decode(i);
            let part: Vec<Color> = idx.iter().map(|&j| full[j]).collect();
            let k = out.encode(&part);
            out.probs[k] += p;
        }
        Ok(out)
    }

    /// Configuration on the table's sites for entry `index`.
    pub fn configuration(&self, window_len: usize, index: usize) -> Configuration {
        let mut c = Configuration::empty(window_len);
        c.assign(&self.sites, &self.decode(index));
        c
    }
}

/// `n_colors^sites`, refusing anything above [`MAX_STATES`].
pub fn state_count(n_colors: usize, sites: usize) -> Result<usize> {
    let size = (n_colors as f64).powi(sites as i32);
    if size > MAX_STATES as f64 {
        return Err(Error::TooLarge {
            size,
            limit: MAX_STATES as f64,
        });
    }
    Ok(n_colors.pow(sites as u32))
}

/// Full table of `γ_Λ(· | boundary)` over the box sites in id order.
pub fn exact_box_distribution(
    kernel: &dyn Kernel,
    tbox: &TimeBox,
    boundary: &Configuration,
) -> Result<JointDistribution> {
    let plan = BoxPlan::new(kernel, tbox)?;
    enumerate_plan(kernel, tbox, &plan, boundary)
}

/// As [`exact_box_distribution`] using a given elimination order.
pub fn exact_box_distribution_with_order(
    kernel: &dyn Kernel,
    tbox: &TimeBox,
    order: &[SiteId],
    boundary: &Configuration,
) -> Result<JointDistribution> {
    let plan = BoxPlan::with_order(kernel, tbox, order)?;
    enumerate_plan(kernel, tbox, &plan, boundary)
}

fn enumerate_plan(
    kernel: &dyn Kernel,
    tbox: &TimeBox,
    plan: &BoxPlan,
    boundary: &Configuration,
) -> Result<JointDistribution> {
    let n = kernel.colors().len();
    let count = state_count(n, plan.len())?;
    let outer = plan.exterior_colors(tbox.space(), boundary)?;
    let sites = tbox.sites().to_vec();
    // digit of each order position in the id-ordered encoding
    let weight: Vec<usize> = plan
        .order()
        .iter()
        .map(|s| {
            let pos = sites.binary_search(s).unwrap();
            n.pow((sites.len() - 1 - pos) as u32)
        })
        .collect();
    let mut walk = Enumeration {
        kernel,
        space: tbox.space(),
        plan,
        outer: &outer,
        weight: &weight,
        inner: vec![Color(0); plan.len()],
        laws: vec![vec![0.0; n]; plan.len()],
        past: Vec::new(),
        probs: vec![0.0; count],
    };
    walk.go(0, 1.0, 0);
    let probs = walk.probs;
    Ok(JointDistribution::new(sites, n, probs))
}

// Depth-first walk over the elimination order, sharing prefix products.
struct Enumeration<'a> {
    kernel: &'a dyn Kernel,
    space: &'a SiteSpace,
    plan: &'a BoxPlan,
    outer: &'a [Color],
    weight: &'a [usize],
    inner: Vec<Color>,
    laws: Vec<Vec<f64>>,
    past: Vec<Color>,
    probs: Vec<f64>,
}

impl Enumeration<'_> {
    fn go(&mut self, i: usize, acc: f64, index: usize) {
        if i == self.plan.len() {
            self.probs[index] += acc;
            return;
        }
        let x = self.plan.order()[i];
        self.plan.gather(i, &self.inner, self.outer, &mut self.past);
        let mut law = std::mem::take(&mut self.laws[i]);
        self.kernel.law(self.space, x, &self.past, &mut law);
        for (c, &p) in law.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            self.inner[i] = Color(c as u8);
            self.go(i + 1, acc * p, index + c * self.weight[i]);
        }
        self.laws[i] = law;
    }
}

/// `γ_Λ(A | boundary)` for an event `A` evaluated on the overlaid
/// configuration `σ_Λ η`.
pub fn box_event_probability(
    kernel: &dyn Kernel,
    tbox: &TimeBox,
    boundary: &Configuration,
    event: impl Fn(&Configuration) -> bool,
) -> Result<f64> {
    let table = exact_box_distribution(kernel, tbox, boundary)?;
    let mut config = boundary.clone();
    let mut total = 0.0;
    for (i, &p) in table.probs().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        config.assign(table.sites(), &table.decode(i));
        if event(&config) {
            total += p;
        }
    }
    Ok(total)
}

/// Outcome of [`properness_check`].
#[derive(Clone, Debug, Default)]
pub struct PropernessReport {
    pub trials: usize,
    /// Sites skipped because their footprint leaves the window.
    pub truncated: usize,
    pub normalization: Vec<String>,
    pub orientation: Vec<String>,
}

impl PropernessReport {
    pub fn is_proper(&self) -> bool {
        self.normalization.is_empty() && self.orientation.is_empty()
    }

    pub fn violations(&self) -> usize {
        self.normalization.len() + self.orientation.len()
    }
}

/// Randomized audit of normalization and of footprint containment in the
/// strict past, at `trials` random (site, past) pairs.
pub fn properness_check(
    kernel: &dyn Kernel,
    space: &SiteSpace,
    trials: usize,
    seed: u64,
) -> PropernessReport {
    let mut report = PropernessReport {
        trials,
        ..Default::default()
    };
    if space.is_empty() {
        return report;
    }
    let mut rng = rng::stream(seed, 0, Purpose::Audit);
    let n = kernel.colors().len();
    let tol = kernel.normalization_tolerance();
    let mut audited = vec![false; space.len()];
    let mut law = vec![0.0; n];
    for _ in 0..trials {
        let x = SiteId::from_index(rng.gen_range(0..space.len()));
        let fp = match kernel.footprint(space, x) {
            Ok(fp) => fp,
            Err(_) => {
                report.truncated += 1;
                continue;
            }
        };
        if !audited[x.index()] {
            audited[x.index()] = true;
            for &y in &fp {
                if !space.strictly_below(y, x) {
                    report.orientation.push(format!(
                        "footprint of {} contains {} outside its strict past",
                        space.describe(x),
                        space.describe(y)
                    ));
                }
            }
        }
        let past: Vec<Color> = fp.iter().map(|_| Color(rng.gen_range(0..n) as u8)).collect();
        kernel.law(space, x, &past, &mut law);
        let sum: f64 = law.iter().sum();
        let bad_entry = law.iter().any(|p| !p.is_finite() || *p < -tol || *p > 1.0 + tol);
        if (sum - 1.0).abs() > tol || bad_entry {
            report.normalization.push(format!(
                "site {} with past {:?}: probabilities {:?} sum to {}",
                space.describe(x),
                past.iter().map(|c| kernel.colors().value(*c)).collect::<Vec<_>>(),
                law,
                sum
            ));
        }
    }
    report
}

/// Induced unoriented specification on a finite target set:
/// `P(σ_Υ | η) ∝ ∏_{x∈Υ} γ_x(σ_x | ·) ∏_{x∈∂̄Υ} γ_x(η_x | ·)`.
///
/// The surround must define `∂̲Υ`, `∂̄Υ` and the nearest past of `∂̄Υ`
/// outside `Υ`.
pub fn gibbs_specification(
    kernel: &dyn Kernel,
    space: &SiteSpace,
    target: &[SiteId],
    surround: &Configuration,
) -> Result<JointDistribution> {
    if !kernel.is_markov() {
        return Err(Error::Unsupported(format!(
            "{} is not a Markov kernel",
            kernel.label()
        )));
    }
    let mut target = target.to_vec();
    target.sort_unstable();
    target.dedup();
    for &s in &target {
        if !space.contains(s) {
            return Err(Error::OutsideWindow(s.to_string()));
        }
    }
    let future = space.nearest_future(&target)?;
    let n = kernel.colors().len();
    let count = state_count(n, target.len())?;
    let factors: Vec<SiteId> = target.iter().chain(future.iter()).copied().collect();
    let mut footprints = Vec::with_capacity(factors.len());
    let mut missing = Vec::new();
    for &x in &factors {
        let fp = kernel.footprint(space, x)?;
        for &y in &fp {
            if target.binary_search(&y).is_err() && !surround.is_defined(y) {
                missing.push(space.describe(y));
            }
        }
        footprints.push(fp);
    }
    for &x in &future {
        if !surround.is_defined(x) {
            missing.push(space.describe(x));
        }
    }
    if !missing.is_empty() {
        missing.sort();
        missing.dedup();
        return Err(Error::MissingBoundary { sites: missing });
    }
    let mut table = JointDistribution::new(target.clone(), n, vec![0.0; count]);
    let mut config = surround.clone();
    let mut law = vec![0.0; n];
    let mut past = Vec::new();
    for i in 0..count {
        config.assign(&target, &table.decode(i));
        let mut w = 1.0;
        for (k, &x) in factors.iter().enumerate() {
            past.clear();
            past.extend(footprints[k].iter().map(|&y| config.get(y).unwrap()));
            kernel.law(space, x, &past, &mut law);
            w *= law[config.get(x).unwrap().index()];
            if w == 0.0 {
                break;
            }
        }
        table.probs[i] = w;
    }
    let z: f64 = table.probs.iter().sum();
    if z <= 0.0 || !z.is_finite() {
        return Err(Error::Singular(format!(
            "every configuration of {} has zero weight given the surround",
            target
                .iter()
                .map(|&s| space.describe(s))
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    for p in &mut table.probs {
        *p /= z;
    }
    Ok(table)
}
