use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::color::{Color, ColorSpace};
use crate::error::{Error, Result};
use crate::geometry::{SiteId, SiteSpace};
use crate::kernel::{properness_check, Kernel, PropernessReport};

/// Normalization tolerance for tabulated rows.
const TABLE_TOLERANCE: f64 = 1e-9;

/// JSON form of a tabulated kernel.
///
/// Rows are keyed by the comma-separated color values of the footprint, in
/// the footprint's listed order; the empty footprint uses the key `""`.
/// Sites without a `footprint` entry use their nearest past.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TableDocument {
    pub colors: Vec<i64>,
    pub sites: Vec<i64>,
    #[serde(default)]
    pub past_edges: Vec<[i64; 2]>,
    #[serde(default)]
    pub footprint: BTreeMap<String, Vec<i64>>,
    pub table: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>,
}

/// Kernel given by explicit conditional probability tables.
#[derive(Clone, Debug)]
pub struct TableKernel {
    colors: ColorSpace,
    footprints: Vec<Vec<SiteId>>,
    // per site: rows in mixed radix over the footprint, each `colors.len()` wide
    rows: Vec<Vec<f64>>,
    markov: bool,
}

impl TableKernel {
    pub fn from_document(doc: &TableDocument) -> Result<(Arc<SiteSpace>, TableKernel)> {
        let colors = ColorSpace::new(doc.colors.clone())
            .map_err(|e| Error::load("colors", e.to_string()))?;
        let space = SiteSpace::from_dag(&doc.sites, &doc.past_edges).map_err(|e| match e {
            Error::Cyclic(site) => Error::load("past_edges", format!("cycle through site {site}")),
            e => e,
        })?;
        let space = Arc::new(space);
        let n = colors.len();
        let site_of = |id: i64, loc: &str| {
            space
                .site_at((id, 0))
                .ok_or_else(|| Error::load(loc.to_string(), format!("unknown site {id}")))
        };
        for key in doc.footprint.keys().chain(doc.table.keys()) {
            let id: i64 = key
                .parse()
                .map_err(|_| Error::load(key.clone(), "site keys must be integers"))?;
            site_of(id, key)?;
        }
        let mut footprints = Vec::with_capacity(space.len());
        let mut rows = Vec::with_capacity(space.len());
        for x in space.sites() {
            let id = space.key(x).0;
            let fp: Vec<SiteId> = match doc.footprint.get(&id.to_string()) {
                Some(list) => list
                    .iter()
                    .map(|&y| site_of(y, &format!("footprint.{id}")))
                    .collect::<Result<_>>()?,
                None => space.nearest_past(x).to_vec(),
            };
            let location = format!("table.{id}");
            let table = doc
                .table
                .get(&id.to_string())
                .ok_or_else(|| Error::load(location.clone(), "no rows for this site"))?;
            let count = n.pow(fp.len() as u32);
            let mut flat = vec![f64::NAN; count * n];
            for (key, row) in table {
                let past = parse_key(&colors, key)
                    .map_err(|m| Error::load(format!("{location}.\"{key}\""), m))?;
                if past.len() != fp.len() {
                    return Err(Error::load(
                        format!("{location}.\"{key}\""),
                        format!("expected {} footprint colors, got {}", fp.len(), past.len()),
                    ));
                }
                let r = row_index(n, &past);
                let slot = &mut flat[r * n..(r + 1) * n];
                slot.fill(0.0);
                for (color, &p) in row {
                    let c = color
                        .parse::<i64>()
                        .ok()
                        .and_then(|v| colors.color_of(v).ok())
                        .ok_or_else(|| {
                            Error::load(
                                format!("{location}.\"{key}\""),
                                format!("unknown color {color}"),
                            )
                        })?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::load(
                            format!("{location}.\"{key}\""),
                            format!("probability {p} outside [0,1]"),
                        ));
                    }
                    slot[c.index()] = p;
                }
                let sum: f64 = slot.iter().sum();
                if (sum - 1.0).abs() > TABLE_TOLERANCE {
                    return Err(Error::load(
                        format!("{location}.\"{key}\""),
                        format!("row sums to {sum}, not 1"),
                    ));
                }
            }
            if let Some(r) = (0..count).find(|&r| flat[r * n].is_nan()) {
                let past = decode_row(n, fp.len(), r);
                return Err(Error::load(
                    location,
                    format!("missing row \"{}\"", row_key(&colors, &past)),
                ));
            }
            footprints.push(fp);
            rows.push(flat);
        }
        let markov = space
            .sites()
            .all(|x| sorted(&footprints[x.index()]) == space.nearest_past(x));
        Ok((
            space,
            TableKernel {
                colors,
                footprints,
                rows,
                markov,
            },
        ))
    }

    pub fn footprint_of(&self, x: SiteId) -> &[SiteId] {
        &self.footprints[x.index()]
    }
}

fn sorted(v: &[SiteId]) -> Vec<SiteId> {
    let mut v = v.to_vec();
    v.sort_unstable();
    v
}

fn parse_key(colors: &ColorSpace, key: &str) -> std::result::Result<Vec<Color>, String> {
    if key.trim().is_empty() {
        return Ok(Vec::new());
    }
    key.split(',')
        .map(|s| {
            let v: i64 = s
                .trim()
                .parse()
                .map_err(|_| format!("cannot parse color '{s}'"))?;
            colors.color_of(v).map_err(|e| e.to_string())
        })
        .collect()
}

fn row_key(colors: &ColorSpace, past: &[Color]) -> String {
    past.iter()
        .map(|c| colors.value(*c).to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn row_index(n: usize, past: &[Color]) -> usize {
    past.iter().fold(0, |acc, c| acc * n + c.index())
}

fn decode_row(n: usize, len: usize, mut r: usize) -> Vec<Color> {
    let mut out = vec![Color(0); len];
    for slot in out.iter_mut().rev() {
        *slot = Color((r % n) as u8);
        r /= n;
    }
    out
}

impl Kernel for TableKernel {
    fn label(&self) -> String {
        format!("table({} sites)", self.footprints.len())
    }

    fn colors(&self) -> &ColorSpace {
        &self.colors
    }

    fn footprint(&self, space: &SiteSpace, x: SiteId) -> Result<Vec<SiteId>> {
        if space.len() != self.footprints.len() || !space.contains(x) {
            return Err(Error::OutsideWindow(space.describe(x)));
        }
        Ok(self.footprints[x.index()].clone())
    }

    fn law(&self, _: &SiteSpace, x: SiteId, past: &[Color], out: &mut [f64]) {
        let n = self.colors.len();
        let r = row_index(n, past);
        out.copy_from_slice(&self.rows[x.index()][r * n..(r + 1) * n]);
    }

    fn is_markov(&self) -> bool {
        self.markov
    }

    fn normalization_tolerance(&self) -> f64 {
        TABLE_TOLERANCE
    }
}

/// A loaded kernel with its site space and the automatic properness audit.
pub struct LoadedKernel {
    pub space: Arc<SiteSpace>,
    pub kernel: TableKernel,
    pub report: PropernessReport,
}

/// Parses, validates and audits a tabulated kernel.
pub fn load_kernel_str(text: &str) -> Result<LoadedKernel> {
    let doc: TableDocument =
        serde_json::from_str(text).map_err(|e| Error::load(format!("line {}", e.line()), e.to_string()))?;
    if doc.sites.is_empty() {
        return Err(Error::load("sites", "site list is empty"));
    }
    let (space, kernel) = TableKernel::from_document(&doc)?;
    let report = properness_check(&kernel, &space, 1000.max(4 * space.len()), 0);
    if let Some(v) = report.orientation.first() {
        return Err(Error::load("footprint", v.clone()));
    }
    if let Some(v) = report.normalization.first() {
        return Err(Error::load("table", v.clone()));
    }
    Ok(LoadedKernel {
        space,
        kernel,
        report,
    })
}

pub fn load_kernel(path: impl AsRef<Path>) -> Result<LoadedKernel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::load(path.display().to_string(), e.to_string()))?;
    load_kernel_str(&text)
}

/// Tabulates `kernel` over a window.
///
/// Sites are numbered by their dense index (their own id on one-dimensional
/// and DAG windows). Sites whose footprint leaves the window keep their
/// in-window nearest past as footprint and get the uniform law.
pub fn export_table(kernel: &dyn Kernel, space: &SiteSpace) -> Result<TableDocument> {
    let dag = space.to_dag_document();
    let colors = kernel.colors();
    let n = colors.len();
    let mut doc = TableDocument {
        colors: colors.values().to_vec(),
        sites: dag.sites.clone(),
        past_edges: dag.past_edges,
        ..Default::default()
    };
    let mut law = vec![0.0; n];
    for x in space.sites() {
        let id = dag.sites[x.index()];
        let (fp, uniform) = match kernel.footprint(space, x) {
            Ok(fp) => (fp, false),
            Err(Error::Truncation { .. }) => (space.nearest_past(x).to_vec(), true),
            Err(e) => return Err(e),
        };
        crate::kernel::state_count(n, fp.len() + 1)?;
        let mut rows = BTreeMap::new();
        for r in 0..n.pow(fp.len() as u32) {
            let past = decode_row(n, fp.len(), r);
            if uniform {
                law.fill(1.0 / n as f64);
            } else {
                kernel.law(space, x, &past, &mut law);
            }
            let row = colors
                .iter()
                .map(|c| (colors.value(c).to_string(), law[c.index()]))
                .collect();
            rows.insert(row_key(colors, &past), row);
        }
        doc.footprint
            .insert(id.to_string(), fp.iter().map(|&y| dag.sites[y.index()]).collect());
        doc.table.insert(id.to_string(), rows);
    }
    Ok(doc)
}
