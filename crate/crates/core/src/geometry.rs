//! Finite windows of partially ordered site spaces.
//!
//! A [`SiteSpace`] stores the nearest-past relation `∂̲x` of every site as a
//! transitive reduction. Sites whose nearest past leaves the window form the
//! past-boundary stratum; their missing neighbors are kept so that
//! operations can report truncation instead of silently clipping.
//!
//! Site ids are assigned in lexicographic order of the site coordinates, so
//! sorting by [`SiteId`] is the canonical order used within slices.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SiteId(pub u32);

impl SiteId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn from_index(i: usize) -> Self {
        SiteId(i as u32)
    }
}

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Coordinates of a site. Lattice windows use `(x, y)` (or `(cell, time)`
/// for PCA windows); one-dimensional and DAG spaces use `(id, 0)`.
pub type Key = (i64, i64);

/// How a window was generated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum WindowDescriptor {
    /// Rectangle of `Z²` with the NW order: `∂̲(x, y) = {(x, y-1), (x-1, y)}`.
    /// The vertical axis points downwards.
    Z2Rect {
        x_min: i64,
        x_max: i64,
        y_min: i64,
        y_max: i64,
    },
    /// Arbitrary finite point set of `Z²` with the NW order.
    Z2Region { points: usize },
    /// Interval of `Z` with its total order.
    Chain { lo: i64, hi: i64 },
    /// Binary tree growing towards the past: site `k` has past `{2k, 2k+1}`.
    BinaryTree { depth: u32 },
    /// Explicit DAG from an edge list.
    Dag,
    /// Space-time window `U × {0..=depth}` of a PCA.
    Pca {
        cells: Vec<i64>,
        depth: u32,
        periodic: bool,
    },
}

impl WindowDescriptor {
    pub fn is_z2(&self) -> bool {
        matches!(
            self,
            WindowDescriptor::Z2Rect { .. } | WindowDescriptor::Z2Region { .. }
        )
    }
}

/// JSON edge-list document: `{"sites": [ids], "past_edges": [[y, x], ...]}`
/// where each pair states `x ∈ ∂̲y`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DagDocument {
    pub sites: Vec<i64>,
    pub past_edges: Vec<[i64; 2]>,
}

#[derive(Clone, Debug)]
pub struct SiteSpace {
    descriptor: WindowDescriptor,
    keys: Vec<Key>,
    index: HashMap<Key, SiteId>,
    past: Vec<Vec<SiteId>>,
    future: Vec<Vec<SiteId>>,
    missing_past: Vec<Vec<Key>>,
    missing_future: Vec<Vec<Key>>,
    topo: Vec<SiteId>,
    layer: Vec<u32>,
}

/// Nearest past and nearest future keys of a site in the ambient (infinite)
/// space; keys outside the window are recorded as missing.
struct Neighbors {
    past: Vec<Key>,
    future: Vec<Key>,
}

impl SiteSpace {
    fn build(
        descriptor: WindowDescriptor,
        mut keys: Vec<Key>,
        neighbors: impl Fn(Key) -> Neighbors,
        reduce: bool,
    ) -> Result<Self> {
        keys.sort_unstable();
        keys.dedup();
        let index: HashMap<Key, SiteId> = keys
            .iter()
            .enumerate()
            .map(|(i, &k)| (k, SiteId::from_index(i)))
            .collect();
        let n = keys.len();
        let mut past = vec![Vec::new(); n];
        let mut missing_past = vec![Vec::new(); n];
        let mut missing_future = vec![Vec::new(); n];
        for (i, &k) in keys.iter().enumerate() {
            let nb = neighbors(k);
            for p in nb.past {
                match index.get(&p) {
                    Some(&s) => past[i].push(s),
                    None => missing_past[i].push(p),
                }
            }
            for f in nb.future {
                if !index.contains_key(&f) {
                    missing_future[i].push(f);
                }
            }
            past[i].sort_unstable();
            past[i].dedup();
            missing_past[i].sort_unstable();
            missing_past[i].dedup();
            missing_future[i].sort_unstable();
            missing_future[i].dedup();
        }
        let mut space = SiteSpace {
            descriptor,
            keys,
            index,
            future: Vec::new(),
            past,
            missing_past,
            missing_future,
            topo: Vec::new(),
            layer: Vec::new(),
        };
        space.rebuild_order()?;
        if reduce {
            space.transitive_reduction();
            space.rebuild_order()?;
        }
        Ok(space)
    }

    fn rebuild_order(&mut self) -> Result<()> {
        let n = self.keys.len();
        let mut future = vec![Vec::new(); n];
        for (x, ps) in self.past.iter().enumerate() {
            for p in ps {
                future[p.index()].push(SiteId::from_index(x));
            }
        }
        self.future = future;

        // Kahn's algorithm, smallest id first so the order is canonical.
        let mut indegree: Vec<usize> = self.past.iter().map(Vec::len).collect();
        let mut ready: std::collections::BTreeSet<SiteId> = (0..n)
            .filter(|&i| indegree[i] == 0)
            .map(SiteId::from_index)
            .collect();
        let mut topo = Vec::with_capacity(n);
        while let Some(x) = ready.pop_first() {
            topo.push(x);
            for &y in &self.future[x.index()] {
                indegree[y.index()] -= 1;
                if indegree[y.index()] == 0 {
                    ready.insert(y);
                }
            }
        }
        if topo.len() != n {
            let stuck = (0..n).find(|&i| indegree[i] > 0).unwrap();
            return Err(Error::Cyclic(self.describe(SiteId::from_index(stuck))));
        }
        let mut layer = vec![0u32; n];
        for &x in &topo {
            let l = self.past[x.index()]
                .iter()
                .map(|p| layer[p.index()] + 1)
                .max()
                .unwrap_or(0);
            layer[x.index()] = l;
        }
        self.topo = topo;
        self.layer = layer;
        Ok(())
    }

    /// Drops every edge `p -> x` for which `p` is also reachable from another
    /// nearest-past candidate of `x`.
    fn transitive_reduction(&mut self) {
        let n = self.keys.len();
        for x in 0..n {
            if self.past[x].len() < 2 {
                continue;
            }
            let candidates = self.past[x].clone();
            let mut keep = Vec::with_capacity(candidates.len());
            for &p in &candidates {
                let implied = candidates
                    .iter()
                    .any(|&q| q != p && self.strictly_below(p, q));
                if !implied {
                    keep.push(p);
                }
            }
            self.past[x] = keep;
        }
    }

    /// Rectangle `[x_min, x_max] × [y_min, y_max]` of `Z²` with the NW order.
    pub fn z2_rect(x_min: i64, x_max: i64, y_min: i64, y_max: i64) -> Result<Self> {
        if x_min > x_max || y_min > y_max {
            return Err(Error::Domain(format!(
                "empty rectangle [{x_min},{x_max}]x[{y_min},{y_max}]"
            )));
        }
        let keys = (x_min..=x_max)
            .flat_map(|x| (y_min..=y_max).map(move |y| (x, y)))
            .collect();
        Self::build(
            WindowDescriptor::Z2Rect {
                x_min,
                x_max,
                y_min,
                y_max,
            },
            keys,
            z2_neighbors,
            false,
        )
    }

    /// Simulation window for a `width × height` box: `[0, width] × [0, height]`,
    /// whose top row and left column form the past boundary of the box
    /// `[1, width] × [1, height]`.
    pub fn z2_window(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Domain("window dimensions must be positive".into()));
        }
        Self::z2_rect(0, width as i64, 0, height as i64)
    }

    /// Arbitrary finite set of `Z²` points with the NW order.
    pub fn z2_region(points: impl IntoIterator<Item = Key>) -> Result<Self> {
        let keys: Vec<Key> = points.into_iter().collect();
        if keys.is_empty() {
            return Err(Error::Domain("empty region".into()));
        }
        let count = keys.len();
        Self::build(
            WindowDescriptor::Z2Region { points: count },
            keys,
            z2_neighbors,
            false,
        )
    }

    /// Interval `[lo, hi]` of `Z` with its natural total order.
    pub fn chain(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::Domain(format!("empty interval [{lo},{hi}]")));
        }
        Self::build(
            WindowDescriptor::Chain { lo, hi },
            (lo..=hi).map(|i| (i, 0)).collect(),
            |(i, _)| Neighbors {
                past: vec![(i - 1, 0)],
                future: vec![(i + 1, 0)],
            },
            false,
        )
    }

    /// Complete binary tree of the given depth, growing towards the past.
    /// Site `k` (heap numbering, root `1`) has nearest past `{2k, 2k+1}`.
    pub fn binary_tree(depth: u32) -> Result<Self> {
        if depth > 24 {
            return Err(Error::TooLarge {
                size: 2f64.powi(depth as i32 + 1),
                limit: 2f64.powi(25),
            });
        }
        let count = (1i64 << (depth + 1)) - 1;
        Self::build(
            WindowDescriptor::BinaryTree { depth },
            (1..=count).map(|k| (k, 0)).collect(),
            |(k, _)| Neighbors {
                past: vec![(2 * k, 0), (2 * k + 1, 0)],
                future: if k > 1 { vec![(k / 2, 0)] } else { vec![] },
            },
            false,
        )
    }

    /// Explicit DAG. `past_edges` holds pairs `[y, x]` meaning `x ∈ ∂̲y`;
    /// edges implied by longer paths are removed.
    pub fn from_dag(sites: &[i64], past_edges: &[[i64; 2]]) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::load("sites", "site list is empty"));
        }
        let known: std::collections::HashSet<i64> = sites.iter().copied().collect();
        if known.len() != sites.len() {
            return Err(Error::load("sites", "duplicate site ids"));
        }
        let mut adjacency: HashMap<i64, Vec<i64>> = HashMap::new();
        for (i, &[y, x]) in past_edges.iter().enumerate() {
            for id in [y, x] {
                if !known.contains(&id) {
                    return Err(Error::load(
                        format!("past_edges[{i}]"),
                        format!("unknown site {id}"),
                    ));
                }
            }
            if x == y {
                return Err(Error::Cyclic(y.to_string()));
            }
            adjacency.entry(y).or_default().push(x);
        }
        Self::build(
            WindowDescriptor::Dag,
            sites.iter().map(|&s| (s, 0)).collect(),
            |(s, _)| Neighbors {
                past: adjacency
                    .get(&s)
                    .map(|v| v.iter().map(|&x| (x, 0)).collect())
                    .unwrap_or_default(),
                future: Vec::new(),
            },
            true,
        )
    }

    pub fn from_dag_document(doc: &DagDocument) -> Result<Self> {
        Self::from_dag(&doc.sites, &doc.past_edges)
    }

    pub fn from_dag_json(text: &str) -> Result<Self> {
        let doc: DagDocument = serde_json::from_str(text)?;
        Self::from_dag_document(&doc)
    }

    /// Space-time window `cells × {0, …, depth}` of a PCA with
    /// `∂̲(i, t) = V_i × {t − 1}`. Without wrapping, a neighborhood that
    /// names a cell outside `cells` is a truncation error.
    pub fn pca(
        cells: &[i64],
        neighborhoods: &BTreeMap<i64, Vec<i64>>,
        depth: u32,
        periodic: bool,
    ) -> Result<Self> {
        let mut sorted = cells.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.is_empty() {
            return Err(Error::Domain("PCA needs at least one cell".into()));
        }
        let lo = sorted[0];
        let period = sorted.len() as i64;
        if periodic && sorted.last().copied() != Some(lo + period - 1) {
            return Err(Error::Domain(
                "periodic PCA windows need a contiguous range of cells".into(),
            ));
        }
        let wrap = |j: i64| if periodic { lo + (j - lo).rem_euclid(period) } else { j };
        let cell_set: std::collections::HashSet<i64> = sorted.iter().copied().collect();
        let mut resolved: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
        let mut missing = Vec::new();
        for &i in &sorted {
            let v = neighborhoods
                .get(&i)
                .ok_or_else(|| Error::Domain(format!("no neighborhood for cell {i}")))?;
            if !v.contains(&i) {
                return Err(Error::Domain(format!(
                    "neighborhood of cell {i} must contain the cell itself"
                )));
            }
            let mut w: Vec<i64> = v.iter().map(|&j| wrap(j)).collect();
            for &j in &w {
                if !cell_set.contains(&j) {
                    missing.push(format!("cell {j} (neighbor of {i})"));
                }
            }
            w.sort_unstable();
            w.dedup();
            resolved.insert(i, w);
        }
        if !missing.is_empty() {
            return Err(Error::Truncation { missing });
        }
        let mut inverse: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
        for (&i, v) in &resolved {
            for &j in v {
                inverse.entry(j).or_default().push(i);
            }
        }
        let keys = sorted
            .iter()
            .flat_map(|&i| (0..=depth as i64).map(move |t| (i, t)))
            .collect();
        Self::build(
            WindowDescriptor::Pca {
                cells: sorted.clone(),
                depth,
                periodic,
            },
            keys,
            |(i, t)| Neighbors {
                past: resolved[&i].iter().map(|&j| (j, t - 1)).collect(),
                future: inverse
                    .get(&i)
                    .map(|v| v.iter().map(|&j| (j, t + 1)).collect())
                    .unwrap_or_default(),
            },
            false,
        )
    }

    pub fn descriptor(&self) -> &WindowDescriptor {
        &self.descriptor
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn sites(&self) -> impl Iterator<Item = SiteId> + '_ {
        (0..self.keys.len()).map(SiteId::from_index)
    }

    pub fn key(&self, site: SiteId) -> Key {
        self.keys[site.index()]
    }

    pub fn site_at(&self, key: Key) -> Option<SiteId> {
        self.index.get(&key).copied()
    }

    /// Site at `key`, or a domain error naming the key.
    pub fn site(&self, key: Key) -> Result<SiteId> {
        self.site_at(key)
            .ok_or_else(|| Error::OutsideWindow(self.describe_key(key)))
    }

    /// Sites at `keys`, in the given order.
    pub fn sites_at(&self, keys: &[Key]) -> Result<Vec<SiteId>> {
        keys.iter().map(|&k| self.site(k)).collect()
    }

    pub fn contains(&self, site: SiteId) -> bool {
        site.index() < self.keys.len()
    }

    pub fn describe(&self, site: SiteId) -> String {
        match self.keys.get(site.index()) {
            Some(&k) => self.describe_key(k),
            None => format!("{site}"),
        }
    }

    pub fn describe_key(&self, (a, b): Key) -> String {
        match self.descriptor {
            WindowDescriptor::Z2Rect { .. }
            | WindowDescriptor::Z2Region { .. }
            | WindowDescriptor::Pca { .. } => format!("({a},{b})"),
            _ => a.to_string(),
        }
    }

    /// `∂̲x` restricted to the window, in canonical order.
    pub fn nearest_past(&self, x: SiteId) -> &[SiteId] {
        &self.past[x.index()]
    }

    /// `∂̄x` restricted to the window, in canonical order.
    pub fn nearest_future_of(&self, x: SiteId) -> &[SiteId] {
        &self.future[x.index()]
    }

    /// Nearest-past keys of `x` that fall outside the window.
    pub fn missing_past(&self, x: SiteId) -> &[Key] {
        &self.missing_past[x.index()]
    }

    pub fn missing_future(&self, x: SiteId) -> &[Key] {
        &self.missing_future[x.index()]
    }

    /// The site has no complete nearest past inside the window.
    pub fn on_past_boundary(&self, x: SiteId) -> bool {
        !self.missing_past[x.index()].is_empty() || self.past[x.index()].is_empty()
    }

    /// Topological order (every site after its past), ties by id.
    pub fn topo_order(&self) -> &[SiteId] {
        &self.topo
    }

    /// Length of the longest past path inside the window ending at `x`.
    pub fn layer(&self, x: SiteId) -> u32 {
        self.layer[x.index()]
    }

    pub fn max_layer(&self) -> u32 {
        self.layer.iter().copied().max().unwrap_or(0)
    }

    /// Sites of the window at a given layer, in id order.
    pub fn layer_sites(&self, layer: u32) -> Vec<SiteId> {
        self.sites().filter(|&s| self.layer(s) == layer).collect()
    }

    fn check_sites(&self, sites: &[SiteId]) -> Result<()> {
        match sites.iter().find(|s| !self.contains(**s)) {
            Some(s) => Err(Error::OutsideWindow(s.to_string())),
            None => Ok(()),
        }
    }

    fn reach(&self, sites: &[SiteId], edges: &[Vec<SiteId>]) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut queue: VecDeque<SiteId> = sites.iter().copied().collect();
        while let Some(x) = queue.pop_front() {
            for &y in &edges[x.index()] {
                if !seen[y.index()] {
                    seen[y.index()] = true;
                    queue.push_back(y);
                }
            }
        }
        seen
    }

    /// Mask of sites strictly below some site of `sites`.
    pub fn strict_past_mask(&self, sites: &[SiteId]) -> Vec<bool> {
        self.reach(sites, &self.past)
    }

    /// Mask of sites strictly above some site of `sites`.
    pub fn strict_future_mask(&self, sites: &[SiteId]) -> Vec<bool> {
        self.reach(sites, &self.future)
    }

    /// `a < b` in the window order.
    pub fn strictly_below(&self, a: SiteId, b: SiteId) -> bool {
        if a == b {
            return false;
        }
        // a < b forces a strictly smaller longest-path layer
        if !self.layer.is_empty() && self.layer[a.index()] >= self.layer[b.index()] {
            return false;
        }
        let mut seen = vec![false; self.len()];
        let mut stack = vec![b];
        while let Some(x) = stack.pop() {
            for &p in &self.past[x.index()] {
                if p == a {
                    return true;
                }
                if !seen[p.index()] {
                    seen[p.index()] = true;
                    stack.push(p);
                }
            }
        }
        false
    }

    pub fn related(&self, a: SiteId, b: SiteId) -> bool {
        a == b || self.strictly_below(a, b) || self.strictly_below(b, a)
    }

    /// Partition of the window into `(Υ, Υ₊, Υ₋, Υ*)`.
    pub fn classify_region(&self, sites: &[SiteId]) -> Result<Region> {
        self.check_sites(sites)?;
        let mut inside = vec![false; self.len()];
        for s in sites {
            inside[s.index()] = true;
        }
        let below = self.strict_past_mask(sites);
        let above = self.strict_future_mask(sites);
        let mut region = Region::default();
        for x in self.sites() {
            let i = x.index();
            if inside[i] {
                region.sites.push(x);
                continue;
            }
            if below[i] {
                region.past.push(x);
            }
            if above[i] {
                region.future.push(x);
            }
            if !below[i] && !above[i] {
                region.outer.push(x);
            }
        }
        Ok(region)
    }

    /// `Λ₋ ∩ Λ₊ = ∅`. The empty set counts as a time box.
    pub fn is_time_box(&self, sites: &[SiteId]) -> Result<bool> {
        Ok(self.classify_region(sites)?.is_time_box())
    }

    /// Iterated minima `Δ_k = min(Δ ∖ (Δ₁ ∪ … ∪ Δ_{k−1}))`, each slice in
    /// canonical order. Bad boxes are rejected with a witness.
    pub fn slicing(&self, sites: &[SiteId]) -> Result<Vec<Vec<SiteId>>> {
        let region = self.classify_region(sites)?;
        if let Some(w) = region.bad_box_witness() {
            return Err(Error::BadBox {
                witness: self.describe(w),
            });
        }
        Ok(self.slices_of_time_box(&region.sites))
    }

    // In a time box every path between two box sites stays in the box, so
    // the slice index is the longest in-box past path.
    fn slices_of_time_box(&self, sites: &[SiteId]) -> Vec<Vec<SiteId>> {
        let mut level: HashMap<SiteId, usize> = HashMap::with_capacity(sites.len());
        let mut inside = vec![false; self.len()];
        for s in sites {
            inside[s.index()] = true;
        }
        let mut depth = 0;
        for &x in &self.topo {
            if !inside[x.index()] {
                continue;
            }
            let l = self.past[x.index()]
                .iter()
                .filter_map(|p| level.get(p).map(|l| l + 1))
                .max()
                .unwrap_or(0);
            depth = depth.max(l + 1);
            level.insert(x, l);
        }
        let mut slices = vec![Vec::new(); depth];
        for &s in sites {
            slices[level[&s]].push(s);
        }
        for slice in &mut slices {
            slice.sort_unstable();
        }
        slices
    }

    fn union_minus(&self, sites: &[SiteId], edges: &[Vec<SiteId>], missing: &[Vec<Key>]) -> Result<Vec<SiteId>> {
        self.check_sites(sites)?;
        let mut inside = vec![false; self.len()];
        for s in sites {
            inside[s.index()] = true;
        }
        let mut absent = Vec::new();
        let mut out = Vec::new();
        let mut taken = vec![false; self.len()];
        for &x in sites {
            for k in &missing[x.index()] {
                absent.push(self.describe_key(*k));
            }
            for &y in &edges[x.index()] {
                if !inside[y.index()] && !taken[y.index()] {
                    taken[y.index()] = true;
                    out.push(y);
                }
            }
        }
        if !absent.is_empty() {
            absent.sort();
            absent.dedup();
            return Err(Error::Truncation { missing: absent });
        }
        out.sort_unstable();
        Ok(out)
    }

    /// `∂̲Λ = (⋃_{x∈Λ} ∂̲x) ∖ Λ`; truncation if some `∂̲x` leaves the window.
    pub fn nearest_past_of(&self, sites: &[SiteId]) -> Result<Vec<SiteId>> {
        self.union_minus(sites, &self.past, &self.missing_past)
    }

    /// `∂̄Λ = (⋃_{x∈Λ} ∂̄x) ∖ Λ`; truncation if some `∂̄x` leaves the window.
    pub fn nearest_future(&self, sites: &[SiteId]) -> Result<Vec<SiteId>> {
        self.union_minus(sites, &self.future, &self.missing_future)
    }

    /// `∂̲ᵏΛ := ∂̲(∂̲^{k−1}Λ) ∪ ∂̲^{k−1}Λ` with `∂̲¹Λ = ∂̲Λ`.
    pub fn k_past(&self, sites: &[SiteId], k: u32) -> Result<Vec<SiteId>> {
        if k == 0 {
            return Err(Error::Domain("k must be at least 1".into()));
        }
        let mut current = self.nearest_past_of(sites)?;
        for _ in 1..k {
            let next = self.nearest_past_of(&current)?;
            current.extend(next);
            current.sort_unstable();
            current.dedup();
        }
        Ok(current)
    }

    /// Sites of the time box whose nearest past is not contained in it,
    /// i.e. the sites adjacent to `∂̲Λ` (or to the window boundary).
    pub fn entry_sites(&self, sites: &[SiteId]) -> Vec<SiteId> {
        let mut inside = vec![false; self.len()];
        for s in sites {
            inside[s.index()] = true;
        }
        sites
            .iter()
            .copied()
            .filter(|&x| {
                !self.missing_past[x.index()].is_empty()
                    || self.past[x.index()].iter().any(|p| !inside[p.index()])
            })
            .collect()
    }

    /// Edge list document of this window (keys' first coordinate as id for
    /// 1-D spaces, dense ids otherwise).
    pub fn to_dag_document(&self) -> DagDocument {
        let id = |s: SiteId| -> i64 {
            match self.descriptor {
                WindowDescriptor::Chain { .. }
                | WindowDescriptor::BinaryTree { .. }
                | WindowDescriptor::Dag => self.key(s).0,
                _ => s.index() as i64,
            }
        };
        DagDocument {
            sites: self.sites().map(id).collect(),
            past_edges: self
                .sites()
                .flat_map(|y| self.nearest_past(y).iter().map(move |&x| [id(y), id(x)]))
                .collect(),
        }
    }
}

fn z2_neighbors((x, y): Key) -> Neighbors {
    Neighbors {
        past: vec![(x, y - 1), (x - 1, y)],
        future: vec![(x, y + 1), (x + 1, y)],
    }
}

/// A finite site set `Υ` together with its past `Υ₋`, future `Υ₊` and outer
/// time `Υ*` inside the window. For a bad box, `past` and `future` overlap.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Region {
    pub sites: Vec<SiteId>,
    pub past: Vec<SiteId>,
    pub future: Vec<SiteId>,
    pub outer: Vec<SiteId>,
}

impl Region {
    /// First site of `Υ₋ ∩ Υ₊`, if any.
    pub fn bad_box_witness(&self) -> Option<SiteId> {
        // both lists are sorted
        let (mut i, mut j) = (0, 0);
        while i < self.past.len() && j < self.future.len() {
            match self.past[i].cmp(&self.future[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return Some(self.past[i]),
            }
        }
        None
    }

    pub fn is_time_box(&self) -> bool {
        self.bad_box_witness().is_none()
    }
}

/// A time box with its slicing and nearest-past boundary.
#[derive(Clone, Debug)]
pub struct TimeBox {
    space: Arc<SiteSpace>,
    region: Region,
    slices: Vec<Vec<SiteId>>,
    order: Vec<SiteId>,
    position: HashMap<SiteId, usize>,
    nearest_past_boundary: Vec<SiteId>,
}

impl TimeBox {
    /// Validates `Λ₋ ∩ Λ₊ = ∅` and computes the slicing.
    pub fn new(space: Arc<SiteSpace>, sites: &[SiteId]) -> Result<Self> {
        let region = space.classify_region(sites)?;
        if let Some(w) = region.bad_box_witness() {
            return Err(Error::BadBox {
                witness: space.describe(w),
            });
        }
        let slices = space.slices_of_time_box(&region.sites);
        let order: Vec<SiteId> = slices.iter().flatten().copied().collect();
        let position = order.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let nearest_past_boundary = {
            let mut inside = vec![false; space.len()];
            for s in &region.sites {
                inside[s.index()] = true;
            }
            let mut b: Vec<SiteId> = region
                .sites
                .iter()
                .flat_map(|&x| space.nearest_past(x).iter().copied())
                .filter(|p| !inside[p.index()])
                .collect();
            b.sort_unstable();
            b.dedup();
            b
        };
        Ok(TimeBox {
            space,
            region,
            slices,
            order,
            position,
            nearest_past_boundary,
        })
    }

    pub fn from_keys(space: Arc<SiteSpace>, keys: &[Key]) -> Result<Self> {
        let sites = space.sites_at(keys)?;
        Self::new(space, &sites)
    }

    /// The box `[1, width] × [1, height]` of [`SiteSpace::z2_window`].
    pub fn z2_interior(space: Arc<SiteSpace>) -> Result<Self> {
        let WindowDescriptor::Z2Rect {
            x_min,
            x_max,
            y_min,
            y_max,
        } = *space.descriptor()
        else {
            return Err(Error::Unsupported("interior box needs a Z² rectangle".into()));
        };
        let keys: Vec<Key> = (x_min + 1..=x_max)
            .flat_map(|x| (y_min + 1..=y_max).map(move |y| (x, y)))
            .collect();
        Self::from_keys(space, &keys)
    }

    /// Every window site whose nearest past lies inside the window.
    pub fn window_interior(space: Arc<SiteSpace>) -> Result<Self> {
        let sites: Vec<SiteId> = space.sites().filter(|&s| !space.on_past_boundary(s)).collect();
        Self::new(space, &sites)
    }

    pub fn space(&self) -> &Arc<SiteSpace> {
        &self.space
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    /// Box sites in id order.
    pub fn sites(&self) -> &[SiteId] {
        &self.region.sites
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn slices(&self) -> &[Vec<SiteId>] {
        &self.slices
    }

    /// Box sites slice by slice: a valid composition order.
    pub fn order(&self) -> &[SiteId] {
        &self.order
    }

    /// Position of a site in [`TimeBox::order`].
    pub fn position(&self, site: SiteId) -> Option<usize> {
        self.position.get(&site).copied()
    }

    pub fn contains(&self, site: SiteId) -> bool {
        self.position.contains_key(&site)
    }

    /// `∂̲Λ` inside the window.
    pub fn nearest_past_boundary(&self) -> &[SiteId] {
        &self.nearest_past_boundary
    }

    /// Every linear extension of the in-box order (for small boxes).
    pub fn linear_extensions(&self) -> Vec<Vec<SiteId>> {
        fn go(
            space: &SiteSpace,
            remaining: &mut Vec<SiteId>,
            inside: &dyn Fn(SiteId) -> bool,
            placed: &mut Vec<SiteId>,
            out: &mut Vec<Vec<SiteId>>,
        ) {
            if remaining.is_empty() {
                out.push(placed.clone());
                return;
            }
            for i in 0..remaining.len() {
                let x = remaining[i];
                let ready = space
                    .nearest_past(x)
                    .iter()
                    .all(|p| !inside(*p) || placed.contains(p));
                if ready {
                    remaining.remove(i);
                    placed.push(x);
                    go(space, remaining, inside, placed, out);
                    placed.pop();
                    remaining.insert(i, x);
                }
            }
        }
        let mut out = Vec::new();
        let inside = |s: SiteId| self.contains(s);
        go(
            &self.space,
            &mut self.region.sites.clone(),
            &inside,
            &mut Vec::new(),
            &mut out,
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keys(space: &SiteSpace, sites: &[SiteId]) -> Vec<Key> {
        sites.iter().map(|&s| space.key(s)).collect()
    }

    #[test]
    fn classify_single_site_in_3x3() {
        let space = SiteSpace::z2_rect(-1, 1, -1, 1).unwrap();
        let r = space.classify_region(&[space.site((0, 0)).unwrap()]).unwrap();
        assert_eq!(keys(&space, &r.past), vec![(-1, -1), (-1, 0), (0, -1)]);
        assert_eq!(keys(&space, &r.future), vec![(0, 1), (1, 0), (1, 1)]);
        assert_eq!(keys(&space, &r.outer), vec![(-1, 1), (1, -1)]);
    }

    #[test]
    fn whole_window_has_no_exterior() {
        let space = SiteSpace::z2_rect(0, 2, 0, 2).unwrap();
        let all: Vec<SiteId> = space.sites().collect();
        let r = space.classify_region(&all).unwrap();
        assert!(r.past.is_empty() && r.future.is_empty() && r.outer.is_empty());
    }

    #[test]
    fn total_order_has_no_outer_time() {
        let space = SiteSpace::chain(-5, 5).unwrap();
        let sites = space.sites_at(&[(-1, 0), (0, 0), (1, 0)]).unwrap();
        let r = space.classify_region(&sites).unwrap();
        assert!(r.outer.is_empty());
        assert_eq!(r.past.len(), 4);
        assert_eq!(r.future.len(), 4);
    }

    #[test]
    fn outside_window_is_a_domain_error() {
        let space = SiteSpace::z2_rect(0, 1, 0, 1).unwrap();
        assert!(matches!(space.site((5, 5)), Err(Error::OutsideWindow(_))));
        assert!(space.classify_region(&[SiteId(99)]).is_err());
        assert!(space.is_time_box(&[SiteId(99)]).is_err());
    }

    #[test]
    fn time_box_examples() {
        let space = SiteSpace::z2_rect(-2, 3, -2, 3).unwrap();
        let single = space.sites_at(&[(0, 0)]).unwrap();
        assert!(space.is_time_box(&single).unwrap());
        assert!(space.is_time_box(&[]).unwrap());

        let gap = space.sites_at(&[(0, 0), (2, 0)]).unwrap();
        let r = space.classify_region(&gap).unwrap();
        assert_eq!(r.bad_box_witness().map(|w| space.key(w)), Some((1, 0)));
        match space.slicing(&gap) {
            Err(Error::BadBox { witness }) => assert_eq!(witness, "(1,0)"),
            other => panic!("expected bad box, got {other:?}"),
        }

        let rect: Vec<Key> = (0..3).flat_map(|x| (0..2).map(move |y| (x, y))).collect();
        assert!(space.is_time_box(&space.sites_at(&rect).unwrap()).unwrap());
    }

    #[test]
    fn slicing_of_2x2_square() {
        let space = SiteSpace::z2_rect(-1, 2, -1, 2).unwrap();
        let sites = space.sites_at(&[(0, 0), (1, 0), (0, 1), (1, 1)]).unwrap();
        let slices = space.slicing(&sites).unwrap();
        let as_keys: Vec<Vec<Key>> = slices.iter().map(|s| keys(&space, s)).collect();
        assert_eq!(
            as_keys,
            vec![vec![(0, 0)], vec![(0, 1), (1, 0)], vec![(1, 1)]]
        );
        let single = space.sites_at(&[(1, 1)]).unwrap();
        assert_eq!(space.slicing(&single).unwrap(), vec![single.clone()]);
    }

    #[test]
    fn l_shaped_box_last_slice_is_strictly_inside_maxima() {
        let space = SiteSpace::z2_rect(-1, 3, -1, 3).unwrap();
        let sites = space.sites_at(&[(0, 0), (1, 0), (0, 1), (0, 2)]).unwrap();
        assert!(space.is_time_box(&sites).unwrap());
        let slices = space.slicing(&sites).unwrap();
        let last = keys(&space, slices.last().unwrap());
        assert_eq!(last, vec![(0, 2)]);
        // maxima of the box: no other box site above them
        let mut maxima: Vec<Key> = sites
            .iter()
            .filter(|&&x| !sites.iter().any(|&y| space.strictly_below(x, y)))
            .map(|&x| space.key(x))
            .collect();
        maxima.sort_unstable();
        assert_eq!(maxima, vec![(0, 2), (1, 0)]);
        assert!(last.len() < maxima.len());
    }

    #[test]
    fn k_past_and_truncation() {
        let space = SiteSpace::z2_rect(-3, 0, -3, 0).unwrap();
        let origin = space.sites_at(&[(0, 0)]).unwrap();
        let p1 = space.k_past(&origin, 1).unwrap();
        assert_eq!(keys(&space, &p1), vec![(-1, 0), (0, -1)]);
        assert_eq!(p1, space.nearest_past_of(&origin).unwrap());
        let p2 = space.k_past(&origin, 2).unwrap();
        assert_eq!(
            keys(&space, &p2),
            vec![(-2, 0), (-1, -1), (-1, 0), (0, -2), (0, -1)]
        );
        assert!(space.k_past(&origin, 0).is_err());
        match space.k_past(&origin, 4) {
            Err(Error::Truncation { missing }) => {
                assert!(missing.contains(&"(-4,0)".to_string()), "{missing:?}")
            }
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    /// `x` has nearest past `{a, b}`; `a ← z1 ← z2 ← c` and `b ← c`.
    fn two_step_bad_dag() -> SiteSpace {
        // ids: x=0, a=1, b=2, z1=3, z2=4, c=5
        SiteSpace::from_dag(
            &[0, 1, 2, 3, 4, 5],
            &[[0, 1], [0, 2], [1, 3], [3, 4], [4, 5], [2, 5]],
        )
        .unwrap()
    }

    #[test]
    fn two_past_can_be_a_bad_box() {
        let space = two_step_bad_dag();
        let x = space.site((0, 0)).unwrap();
        let two = space.k_past(&[x], 2).unwrap();
        assert_eq!(keys(&space, &two), vec![(1, 0), (2, 0), (3, 0), (5, 0)]);
        assert!(!space.is_time_box(&two).unwrap());
        let one = space.k_past(&[x], 1).unwrap();
        assert!(space.is_time_box(&one).unwrap());
    }

    #[test]
    fn nearest_future_examples() {
        let space = SiteSpace::z2_rect(-1, 1, -1, 1).unwrap();
        let f = space.nearest_future(&space.sites_at(&[(0, 0)]).unwrap()).unwrap();
        assert_eq!(keys(&space, &f), vec![(0, 1), (1, 0)]);

        let chain = SiteSpace::chain(-3, 3).unwrap();
        let f = chain.nearest_future(&chain.sites_at(&[(0, 0)]).unwrap()).unwrap();
        assert_eq!(keys(&chain, &f), vec![(1, 0)]);

        let dag = two_step_bad_dag();
        let all: Vec<SiteId> = dag.sites().collect();
        assert!(dag.nearest_future(&all).unwrap().is_empty());

        // a finite lattice window cannot see the future of its last row
        let all: Vec<SiteId> = space.sites().collect();
        assert!(matches!(
            space.nearest_future(&all),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn dag_edges_are_reduced_and_cycles_rejected() {
        // 2 -> 1 -> 0 plus the implied shortcut 2 -> 0
        let space = SiteSpace::from_dag(&[0, 1, 2], &[[1, 0], [2, 1], [2, 0]]).unwrap();
        let two = space.site((2, 0)).unwrap();
        assert_eq!(keys(&space, space.nearest_past(two)), vec![(1, 0)]);
        assert!(matches!(
            SiteSpace::from_dag(&[0, 1], &[[0, 1], [1, 0]]),
            Err(Error::Cyclic(_))
        ));
        assert!(matches!(
            SiteSpace::from_dag(&[], &[]),
            Err(Error::Load { .. })
        ));
        let json = r#"{"sites":[1,2,3],"past_edges":[[3,2],[2,1]]}"#;
        let space = SiteSpace::from_dag_json(json).unwrap();
        assert_eq!(space.max_layer(), 2);
    }

    #[test]
    fn pca_geometry_follows_neighborhoods() {
        let cells: Vec<i64> = (-2..=2).collect();
        let nb: BTreeMap<i64, Vec<i64>> = cells
            .iter()
            .map(|&i| (i, vec![i - 1, i, i + 1]))
            .collect();
        assert!(matches!(
            SiteSpace::pca(&cells, &nb, 3, false),
            Err(Error::Truncation { .. })
        ));
        let space = SiteSpace::pca(&cells, &nb, 3, true).unwrap();
        let x = space.site((0, 2)).unwrap();
        assert_eq!(
            keys(&space, space.nearest_past(x)),
            vec![(-1, 1), (0, 1), (1, 1)]
        );
        let y = space.site((1, 3)).unwrap();
        let a = space.site((0, 2)).unwrap();
        assert!(space.strictly_below(a, y));
        assert!(space.related(a, a));
        let bottom = space.site((0, 0)).unwrap();
        assert!(space.on_past_boundary(bottom));
    }

    #[test]
    fn z2_window_boundary_is_top_row_and_left_column() {
        let space = SiteSpace::z2_window(3, 2).unwrap();
        let boundary: Vec<Key> = space
            .sites()
            .filter(|&s| space.on_past_boundary(s))
            .map(|s| space.key(s))
            .collect();
        assert_eq!(
            boundary,
            vec![(0, 0), (0, 1), (0, 2), (1, 0), (2, 0), (3, 0)]
        );
        let b = TimeBox::z2_interior(Arc::new(space)).unwrap();
        assert_eq!(b.len(), 6);
        assert_eq!(b.nearest_past_boundary().len(), 5);
    }

    #[test]
    fn tree_and_chain_layers() {
        let tree = SiteSpace::binary_tree(3).unwrap();
        assert_eq!(tree.len(), 15);
        let root = tree.site((1, 0)).unwrap();
        assert_eq!(tree.layer(root), 3);
        assert_eq!(tree.layer_sites(0).len(), 8);
        let chain = SiteSpace::chain(0, 9).unwrap();
        assert_eq!(chain.max_layer(), 9);
    }
}
