//! Bernoulli oriented site percolation and the disagreement coupling.
//!
//! A site of replica `r` is open iff its uniform `U_x` (purpose
//! [`Purpose::Percolation`]) satisfies `U_x ≤ q_x`, so fields at different
//! `q` built from the same seed are nested. Crossing at level `q` then
//! reduces to a bottleneck value per replica: the smallest `q` for which an
//! open path exists.

use std::collections::VecDeque;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::color::Color;
use crate::error::{Error, Result};
use crate::geometry::{SiteId, SiteSpace, TimeBox};
use crate::kernel::Kernel;
use crate::rng::{Purpose, UniformBlock};
use crate::sampler::{quantile, BoundaryCondition, BoxSampler};
use crate::stats::{wilson_interval, Estimate, Z95};

/// Open probabilities of the sites.
#[derive(Clone, Debug, PartialEq)]
pub enum OpenProbability {
    Uniform(f64),
    /// Indexed by site index.
    PerSite(Vec<f64>),
}

impl OpenProbability {
    fn check(&self, len: usize) -> Result<()> {
        let bad = |q: f64| !(0.0..=1.0).contains(&q);
        match self {
            OpenProbability::Uniform(q) if bad(*q) => {
                Err(Error::Domain(format!("open probability {q} outside [0,1]")))
            }
            OpenProbability::PerSite(v) if v.len() != len => Err(Error::Domain(format!(
                "{} open probabilities for {len} sites",
                v.len()
            ))),
            OpenProbability::PerSite(v) => match v.iter().find(|q| bad(**q)) {
                Some(q) => Err(Error::Domain(format!("open probability {q} outside [0,1]"))),
                None => Ok(()),
            },
            OpenProbability::Uniform(_) => Ok(()),
        }
    }

    #[inline]
    pub fn at(&self, x: SiteId) -> f64 {
        match self {
            OpenProbability::Uniform(q) => *q,
            OpenProbability::PerSite(v) => v[x.index()],
        }
    }
}

/// Percolation uniforms of one replica, indexed by site index.
pub fn percolation_uniforms(space: &SiteSpace, seed: u64, replica: u64) -> UniformBlock {
    UniformBlock::new(seed, replica, Purpose::Percolation, 0, space.len(), 1)
}

/// Open/closed state of every window site.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BernoulliField {
    open: Vec<bool>,
}

impl BernoulliField {
    pub fn from_open(open: Vec<bool>) -> Self {
        BernoulliField { open }
    }

    pub fn sample(space: &SiteSpace, params: &OpenProbability, seed: u64, replica: u64) -> Result<Self> {
        params.check(space.len())?;
        let u = percolation_uniforms(space, seed, replica);
        Ok(BernoulliField {
            open: space.sites().map(|x| u.get(x.index(), 0) <= params.at(x)).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.open.len()
    }

    pub fn is_empty(&self) -> bool {
        self.open.is_empty()
    }

    #[inline]
    pub fn is_open(&self, x: SiteId) -> bool {
        self.open[x.index()]
    }

    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|o| **o).count()
    }
}

/// Sites reached from the open sites of `start` by open paths towards the
/// past, in id order.
pub fn oriented_cluster(field: &BernoulliField, start: &[SiteId], space: &SiteSpace) -> Result<Vec<SiteId>> {
    if field.len() != space.len() {
        return Err(Error::Domain("field and window differ in size".into()));
    }
    if let Some(s) = start.iter().find(|s| !space.contains(**s)) {
        return Err(Error::OutsideWindow(s.to_string()));
    }
    let mut seen = vec![false; space.len()];
    let mut queue = VecDeque::new();
    for &s in start {
        if field.is_open(s) && !seen[s.index()] {
            seen[s.index()] = true;
            queue.push_back(s);
        }
    }
    while let Some(x) = queue.pop_front() {
        for &p in space.nearest_past(x) {
            if field.is_open(p) && !seen[p.index()] {
                seen[p.index()] = true;
                queue.push_back(p);
            }
        }
    }
    Ok(space.sites().filter(|s| seen[s.index()]).collect())
}

/// Start sites, target sites and the sites a path may use.
#[derive(Clone, Debug)]
pub struct CrossingGeometry {
    pub start: Vec<SiteId>,
    target: Vec<bool>,
    allowed: Vec<bool>,
    /// Number of layers between start and target, when layered.
    pub depth: Option<u32>,
}

impl CrossingGeometry {
    /// From the top layer of the window down to `depth` layers below it.
    pub fn layered(space: &SiteSpace, depth: u32) -> Result<Self> {
        let top = space.max_layer();
        if depth > top {
            return Err(Error::Domain(format!(
                "depth {depth} exceeds the {top} layers of the window"
            )));
        }
        let bottom = top - depth;
        Ok(CrossingGeometry {
            start: space.layer_sites(top),
            target: space.sites().map(|s| space.layer(s) == bottom).collect(),
            allowed: vec![true; space.len()],
            depth: Some(depth),
        })
    }

    /// From `start` to the sites of the box adjacent to its past boundary,
    /// staying inside the box.
    pub fn to_past_boundary(tbox: &TimeBox, start: &[SiteId]) -> Result<Self> {
        let space = tbox.space();
        if let Some(s) = start.iter().find(|s| !tbox.contains(**s)) {
            return Err(Error::Domain(format!("{} is not in the box", space.describe(*s))));
        }
        let mut target = vec![false; space.len()];
        for s in space.entry_sites(tbox.sites()) {
            target[s.index()] = true;
        }
        let mut allowed = vec![false; space.len()];
        for s in tbox.sites() {
            allowed[s.index()] = true;
        }
        Ok(CrossingGeometry {
            start: start.to_vec(),
            target,
            allowed,
            depth: None,
        })
    }

    pub fn is_target(&self, x: SiteId) -> bool {
        self.target[x.index()]
    }

    /// Whether an open path joins a start site to a target site.
    pub fn crosses(&self, field: &BernoulliField, space: &SiteSpace) -> bool {
        let mut seen = vec![false; space.len()];
        let mut queue: VecDeque<SiteId> = VecDeque::new();
        for &s in &self.start {
            if field.is_open(s) && !seen[s.index()] {
                seen[s.index()] = true;
                queue.push_back(s);
            }
        }
        while let Some(x) = queue.pop_front() {
            if self.target[x.index()] {
                return true;
            }
            for &p in space.nearest_past(x) {
                if self.allowed[p.index()] && field.is_open(p) && !seen[p.index()] {
                    seen[p.index()] = true;
                    queue.push_back(p);
                }
            }
        }
        false
    }

    /// `min` over start-to-target paths of the largest `value(x)` on the
    /// path. With `value = U` this is the smallest `q` at which the replica
    /// crosses.
    pub fn bottleneck(&self, space: &SiteSpace, value: impl Fn(SiteId) -> f64) -> f64 {
        let mut cost = vec![f64::INFINITY; space.len()];
        for &x in space.topo_order() {
            if !self.allowed[x.index()] {
                continue;
            }
            let below = if self.target[x.index()] {
                0.0
            } else {
                space
                    .nearest_past(x)
                    .iter()
                    .filter(|p| self.allowed[p.index()])
                    .map(|p| cost[p.index()])
                    .fold(f64::INFINITY, f64::min)
            };
            cost[x.index()] = value(x).max(below);
        }
        self.start
            .iter()
            .map(|s| cost[s.index()])
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossingEstimate {
    pub successes: usize,
    pub replicas: usize,
    pub estimate: Estimate,
    /// Wilson 95% interval.
    pub ci: (f64, f64),
}

impl CrossingEstimate {
    pub fn from_counts(successes: usize, replicas: usize) -> Self {
        CrossingEstimate {
            successes,
            replicas,
            estimate: Estimate::proportion(successes, replicas),
            ci: wilson_interval(successes, replicas, Z95),
        }
    }
}

/// Fraction of replicas in which the geometry is crossed.
pub fn crossing_probability(
    space: &SiteSpace,
    params: &OpenProbability,
    geometry: &CrossingGeometry,
    replicas: usize,
    seed: u64,
) -> Result<CrossingEstimate> {
    params.check(space.len())?;
    let successes = (0..replicas as u64)
        .into_par_iter()
        .filter(|&r| {
            let u = percolation_uniforms(space, seed, r);
            let field = BernoulliField {
                open: space.sites().map(|x| u.get(x.index(), 0) <= params.at(x)).collect(),
            };
            geometry.crosses(&field, space)
        })
        .count();
    Ok(CrossingEstimate::from_counts(successes, replicas))
}

/// Per-replica crossing levels under a uniform `q`: replica `r` crosses at
/// `q` iff `levels[r] ≤ q`.
pub fn crossing_levels(space: &SiteSpace, geometry: &CrossingGeometry, replicas: usize, seed: u64) -> Vec<f64> {
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let u = percolation_uniforms(space, seed, r);
            geometry.bottleneck(space, |x| u.get(x.index(), 0))
        })
        .collect()
}

/// Families of windows on which `p_c⁺` is estimated.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lattice {
    /// Z² with the NW order: the backward cone of `(L, L)` down to the
    /// anti-diagonal `a + b = L`.
    Z2,
    /// One past neighbour per site.
    Chain,
    /// Two past neighbours per site, no shared ancestors.
    BinaryTree,
}

impl Lattice {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "z2" => Ok(Lattice::Z2),
            "chain" => Ok(Lattice::Chain),
            "tree" | "binary-tree" => Ok(Lattice::BinaryTree),
            _ => Err(Error::Domain(format!("unknown lattice '{text}'"))),
        }
    }

    /// Window of depth `depth` with its layered crossing geometry.
    pub fn window(self, depth: u32) -> Result<(Arc<SiteSpace>, CrossingGeometry)> {
        let l = depth as i64;
        let space = match self {
            Lattice::Z2 => SiteSpace::z2_region(
                (0..=l).flat_map(|a| (l - a..=l).map(move |b| (a, b))),
            )?,
            Lattice::Chain => SiteSpace::chain(0, l)?,
            Lattice::BinaryTree => SiteSpace::binary_tree(depth)?,
        };
        let geometry = CrossingGeometry::layered(&space, depth)?;
        Ok((Arc::new(space), geometry))
    }
}

/// Crossing curve and bisection result at one depth.
#[derive(Clone, Debug, Serialize)]
pub struct DepthCurve {
    pub depth: u32,
    pub replicas: usize,
    /// Bisection bracket against crossing probability ½.
    pub bracket: (f64, f64),
    /// Range of `q` whose 95% interval contains ½.
    pub statistical: (f64, f64),
    /// Levels at which the crossing probability reaches ¼ and ¾.
    pub sensitivity: (f64, f64),
    pub curve: Vec<(f64, CrossingEstimate)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PcEstimate {
    pub lattice: Lattice,
    /// Bracket at the deepest level of the schedule.
    pub bracket: (f64, f64),
    pub per_depth: Vec<DepthCurve>,
    pub warnings: Vec<String>,
}

/// Quantities derived from sorted crossing levels.
struct LevelCdf {
    sorted: Vec<f64>,
}

impl LevelCdf {
    fn count(&self, q: f64) -> usize {
        self.sorted.partition_point(|&t| t <= q)
    }

    fn estimate(&self, q: f64) -> CrossingEstimate {
        CrossingEstimate::from_counts(self.count(q), self.sorted.len())
    }

    /// Bisection for the level at which the crossing fraction reaches
    /// `level`; returns the bracket and whether `tolerance` was met.
    fn bisect(&self, level: f64, tolerance: f64, max_iter: usize) -> ((f64, f64), bool) {
        let n = self.sorted.len() as f64;
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..max_iter {
            if hi - lo <= tolerance {
                return ((lo, hi), true);
            }
            let mid = 0.5 * (lo + hi);
            if (self.count(mid) as f64) < level * n {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        ((lo, hi), hi - lo <= tolerance)
    }

    /// Smallest and largest grid `q` whose Wilson interval contains ½.
    fn statistical(&self, grid: usize) -> (f64, f64) {
        let hits: Vec<f64> = (0..=grid)
            .map(|i| i as f64 / grid as f64)
            .filter(|&q| {
                let (a, b) = self.estimate(q).ci;
                a <= 0.5 && 0.5 <= b
            })
            .collect();
        match (hits.first(), hits.last()) {
            (Some(&a), Some(&b)) => (a, b),
            _ => (f64::NAN, f64::NAN),
        }
    }
}

/// Options of [`estimate_pc_plus`].
#[derive(Clone, Debug, Serialize)]
pub struct PcOptions {
    /// Depths of the schedule, each twice the previous one.
    pub depths: Vec<u32>,
    pub replicas: usize,
    pub tolerance: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Number of grid points of the reported curves.
    pub curve_points: usize,
}

impl PcOptions {
    /// Doubling schedule `start, 2·start, …, ≤ max_depth`.
    pub fn doubling(start: u32, max_depth: u32, replicas: usize, tolerance: f64, seed: u64) -> Self {
        let mut depths = Vec::new();
        let mut l = start.max(1);
        while l <= max_depth {
            depths.push(l);
            l *= 2;
        }
        PcOptions {
            depths,
            replicas,
            tolerance,
            max_iter: 64,
            seed,
            curve_points: 40,
        }
    }
}

/// Bisection on `q` against crossing probability ½ at every depth of the
/// schedule, using common random numbers across `q`.
pub fn estimate_pc_plus(lattice: Lattice, options: &PcOptions) -> Result<PcEstimate> {
    if options.tolerance.is_nan() || options.tolerance <= 0.0 {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    if options.depths.is_empty() || options.replicas == 0 {
        return Err(Error::Domain("empty schedule".into()));
    }
    let mut per_depth = Vec::with_capacity(options.depths.len());
    let mut warnings = Vec::new();
    for &depth in &options.depths {
        let (space, geometry) = lattice.window(depth)?;
        let seed = options.seed ^ (depth as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let mut sorted = crossing_levels(&space, &geometry, options.replicas, seed);
        sorted.sort_by(f64::total_cmp);
        let cdf = LevelCdf { sorted };
        let (bracket, converged) = cdf.bisect(0.5, options.tolerance, options.max_iter);
        if !converged {
            warnings.push(format!(
                "depth {depth}: bracket [{:.6}, {:.6}] wider than {} after {} steps",
                bracket.0, bracket.1, options.tolerance, options.max_iter
            ));
        }
        let statistical = cdf.statistical(1000);
        if statistical.1 - statistical.0 > options.tolerance {
            warnings.push(format!(
                "depth {depth}: sampling uncertainty spans q in [{:.4}, {:.4}], wider than the tolerance",
                statistical.0, statistical.1
            ));
        }
        let sensitivity = (
            cdf.bisect(0.25, options.tolerance, options.max_iter).0 .1,
            cdf.bisect(0.75, options.tolerance, options.max_iter).0 .1,
        );
        let points = options.curve_points.max(2);
        let curve = (0..=points)
            .map(|i| {
                let q = i as f64 / points as f64;
                (q, cdf.estimate(q))
            })
            .collect();
        per_depth.push(DepthCurve {
            depth,
            replicas: options.replicas,
            bracket,
            statistical,
            sensitivity,
            curve,
        });
    }
    Ok(PcEstimate {
        lattice,
        bracket: per_depth.last().unwrap().bracket,
        per_depth,
        warnings,
    })
}

/// One replica of the disagreement coupling.
#[derive(Clone, Debug)]
pub struct CouplingRun {
    pub tbox: TimeBox,
    /// Exterior sites read by the box and their colors under both boundaries.
    pub exterior: Vec<SiteId>,
    pub eta: Vec<Color>,
    pub eta_prime: Vec<Color>,
    /// Box colors in slicing order.
    pub first: Vec<Color>,
    pub second: Vec<Color>,
}

impl CouplingRun {
    /// `1{σ_x ≠ σ'_x}` in slicing order.
    pub fn disagreement(&self) -> Vec<bool> {
        self.first.iter().zip(&self.second).map(|(a, b)| a != b).collect()
    }

    pub fn disagreement_count(&self) -> usize {
        self.disagreement().iter().filter(|d| **d).count()
    }

    pub fn disagrees_at(&self, x: SiteId) -> Option<bool> {
        self.tbox.position(x).map(|i| self.first[i] != self.second[i])
    }

    /// Sites reached from the differing boundary sites by future-directed
    /// steps through disagreeing box sites, in slicing order.
    pub fn reached_from_boundary(&self) -> Vec<bool> {
        let space = self.tbox.space();
        let dis = self.disagreement();
        let mut reached = vec![false; dis.len()];
        let mut queue: VecDeque<SiteId> = self
            .exterior
            .iter()
            .zip(self.eta.iter().zip(&self.eta_prime))
            .filter(|(_, (a, b))| a != b)
            .map(|(s, _)| *s)
            .collect();
        while let Some(y) = queue.pop_front() {
            for &x in space.nearest_future_of(y) {
                if let Some(i) = self.tbox.position(x) {
                    if dis[i] && !reached[i] {
                        reached[i] = true;
                        queue.push_back(x);
                    }
                }
            }
        }
        reached
    }

    /// First disagreement site not joined to the boundary by a path of
    /// disagreements, if any.
    pub fn path_property_violation(&self) -> Option<SiteId> {
        let reached = self.reached_from_boundary();
        self.disagreement()
            .iter()
            .zip(&reached)
            .position(|(d, r)| d != r)
            .map(|i| self.tbox.order()[i])
    }
}

/// Maximal coupling of two site laws driven by `(u0, u1, u2)`: a common
/// color with probability `Σ min(μ, ν)`, otherwise independent draws from
/// the disjoint residuals.
pub fn maximal_coupling(mu: &[f64], nu: &[f64], u: [f64; 3], scratch: &mut [f64]) -> (Color, Color) {
    let w: f64 = mu.iter().zip(nu).map(|(a, b)| a.min(*b)).sum();
    if u[0] <= w {
        for ((s, a), b) in scratch.iter_mut().zip(mu).zip(nu) {
            *s = a.min(*b) / w;
        }
        let c = quantile(scratch, u[1]);
        return (c, c);
    }
    let rest = 1.0 - w;
    for ((s, a), b) in scratch.iter_mut().zip(mu).zip(nu) {
        *s = (a - a.min(*b)) / rest;
    }
    let a = quantile(scratch, u[1]);
    for ((s, a), b) in scratch.iter_mut().zip(mu).zip(nu) {
        *s = (b - a.min(*b)) / rest;
    }
    (a, quantile(scratch, u[2]))
}

/// Two copies of a box under different boundaries, built site by site in
/// slicing order with maximal single-site couplings.
pub struct DisagreementCoupler<'a> {
    kernel: &'a dyn Kernel,
    sampler: BoxSampler<'a>,
    eta: Vec<Color>,
    eta_prime: Vec<Color>,
    lo: usize,
    hi: usize,
}

impl<'a> DisagreementCoupler<'a> {
    pub fn new(
        kernel: &'a dyn Kernel,
        tbox: &'a TimeBox,
        eta: &BoundaryCondition,
        eta_prime: &BoundaryCondition,
    ) -> Result<Self> {
        if !kernel.is_markov() {
            return Err(Error::Unsupported(
                "the disagreement coupling needs a nearest-past kernel".into(),
            ));
        }
        for b in [eta, eta_prime] {
            if matches!(b, BoundaryCondition::IidRandom(_)) {
                return Err(Error::Unsupported(
                    "the disagreement coupling needs deterministic boundaries".into(),
                ));
            }
        }
        let sampler = BoxSampler::new(kernel, tbox)?;
        let e = sampler.exterior(eta, 0, 0)?;
        let f = sampler.exterior(eta_prime, 0, 0)?;
        let lo = tbox.sites().first().map_or(0, |s| s.index());
        let hi = tbox.sites().last().map_or(0, |s| s.index() + 1);
        Ok(DisagreementCoupler {
            kernel,
            sampler,
            eta: e,
            eta_prime: f,
            lo,
            hi,
        })
    }

    /// Replica `replica` of the coupling.
    pub fn run(&self, seed: u64, replica: u64) -> CouplingRun {
        let plan = self.sampler.plan();
        let tbox = self.sampler.tbox();
        let space = tbox.space();
        let n = self.kernel.colors().len();
        let u = UniformBlock::new(seed, replica, Purpose::Coupling, self.lo, self.hi, 3);
        let mut first = vec![Color(0); plan.len()];
        let mut second = vec![Color(0); plan.len()];
        let (mut pa, mut pb) = (Vec::new(), Vec::new());
        let (mut la, mut lb, mut scratch) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for (i, &x) in plan.order().iter().enumerate() {
            plan.gather(i, &first, &self.eta, &mut pa);
            plan.gather(i, &second, &self.eta_prime, &mut pb);
            let k = x.index();
            self.kernel.law(space, x, &pa, &mut la);
            if pa == pb {
                let c = quantile(&la, u.get(k, 1));
                first[i] = c;
                second[i] = c;
            } else {
                self.kernel.law(space, x, &pb, &mut lb);
                let draws = [u.get(k, 0), u.get(k, 1), u.get(k, 2)];
                (first[i], second[i]) = maximal_coupling(&la, &lb, draws, &mut scratch);
            }
        }
        CouplingRun {
            tbox: tbox.clone(),
            exterior: plan.exterior().to_vec(),
            eta: self.eta.clone(),
            eta_prime: self.eta_prime.clone(),
            first,
            second,
        }
    }

    /// Replicas `0..replicas` mapped through `f`, in replica order.
    pub fn map<T: Send>(&self, seed: u64, replicas: usize, f: impl Fn(&CouplingRun) -> T + Sync) -> Vec<T> {
        (0..replicas as u64)
            .into_par_iter()
            .map(|r| f(&self.run(seed, r)))
            .collect()
    }
}

/// Replica 0 of the disagreement coupling.
pub fn disagreement_coupling(
    kernel: &dyn Kernel,
    tbox: &TimeBox,
    eta: &BoundaryCondition,
    eta_prime: &BoundaryCondition,
    seed: u64,
) -> Result<CouplingRun> {
    Ok(DisagreementCoupler::new(kernel, tbox, eta, eta_prime)?.run(seed, 0))
}
