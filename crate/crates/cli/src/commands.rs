use serde::Serialize;

use poclab::criteria::closed_form::ising_dp_boundary_zero_field;
use poclab::criteria::phase::{ising_phase_scan, stavskaya_phase_scan, write_csv};
use poclab::criteria::{dobrushin_gamma, dp_decision, dust_rate_matrix, max_perc_params, DpReport};
use poclab::percolation::{
    crossing_probability, estimate_pc_plus, DisagreementCoupler, Lattice, OpenProbability, PcOptions,
};
use poclab::sampler::sample_replicas;
use poclab::stats::{Estimate, Accumulator};
use poclab::texture::{render_texture, Image, Palette};
use poclab::{SiteSpace, TimeBox};

use crate::args::{
    CriteriaArgs, DisagreeArgs, PcArgs, PercolateArgs, PhaseScanArgs, ScanModel, SimulateArgs,
};
use crate::model::{self, Model};
use crate::run::{num, parse_range, CliError, Run};

const PUBLISHED_PC: f64 = 0.64450;

fn positive(n: usize, flag: &str) -> Result<(), CliError> {
    if n == 0 {
        Err(CliError::Usage(format!("{flag} must be positive")))
    } else {
        Ok(())
    }
}

fn lattice(text: &str) -> Result<Lattice, CliError> {
    Lattice::parse(text).map_err(|e| CliError::Usage(e.to_string()))
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(buf)
}

#[derive(Serialize)]
struct SiteRow {
    site_x: i64,
    site_y: i64,
    mean: f64,
    stderr: f64,
}

pub fn simulate(a: &SimulateArgs, run: &mut Run) -> Result<(), CliError> {
    positive(a.replicas, "--replicas")?;
    let m = model::build(&a.model, a.width, a.height, run)?;
    let boundary = model::boundary(&a.boundary, &m, run)?;
    let samples = sample_replicas(m.kernel(), &m.tbox, &boundary, a.seed, a.replicas)?;
    let colors = m.colors();
    let box_means: Vec<f64> = samples
        .views()
        .map(|v| v.colors().iter().map(|&c| colors.value(c) as f64).sum::<f64>() / v.colors().len().max(1) as f64)
        .collect();
    let mean = Estimate::from_values(&box_means);
    run.say(format!("model: {}", m.kernel.label()));
    run.say(format!("box: {} sites, boundary {}", m.tbox.len(), a.boundary));
    run.say(format!("replicas: {}, seed {}", a.replicas, a.seed));
    if a.replicas > 1 {
        run.say(format!("mean color: {} ± {}", num(mean.mean), num(mean.stderr)));
    } else {
        run.say(format!("mean color: {}", num(mean.mean)));
    }
    if let Some(path) = &a.out {
        let config = samples.view(0).to_configuration();
        let image = render_texture(&m.space, m.tbox.sites(), &config, colors, &Palette::default_for(colors))?;
        run.file(path, image.to_pnm_bytes());
    }
    if let Some(path) = &a.stats {
        let mut rows: Vec<(poclab::SiteId, SiteRow)> = samples
            .site_means()
            .into_iter()
            .map(|(s, e)| {
                let (x, y) = m.space.key(s);
                (
                    s,
                    SiteRow {
                        site_x: x,
                        site_y: y,
                        mean: e.mean,
                        stderr: e.stderr,
                    },
                )
            })
            .collect();
        rows.sort_by_key(|r| r.0);
        let rows: Vec<SiteRow> = rows.into_iter().map(|r| r.1).collect();
        run.file(path, csv_bytes(&rows)?);
    }
    Ok(())
}

fn estimated_pc(lat: &str, depth: u32, replicas: usize, seed: u64, run: &mut Run) -> Result<f64, CliError> {
    positive(replicas, "--pc-replicas")?;
    let lat = lattice(lat)?;
    let options = PcOptions::doubling(depth, depth, replicas, 1e-3, seed);
    let est = estimate_pc_plus(lat, &options)?;
    let (lo, hi) = est.bracket;
    run.say(format!(
        "Monte Carlo p_c+ ({lat:?}, depth {depth}, {replicas} replicas): [{}, {}]",
        num(lo),
        num(hi)
    ));
    Ok(0.5 * (lo + hi))
}

#[derive(Serialize)]
struct CriteriaReport {
    model: String,
    gamma: f64,
    dobrushin: String,
    sup_px: f64,
    dp: Vec<(String, DpReport)>,
    warnings: Vec<String>,
}

pub fn criteria(a: &CriteriaArgs, run: &mut Run) -> Result<(), CliError> {
    let m = model::build(&a.model, 3, 3, run)?;
    criteria_for(&m, &a.pc, a.seed, a.out.as_deref(), run)
}

fn criteria_for(
    m: &Model,
    pc: &PcArgs,
    seed: u64,
    out: Option<&std::path::Path>,
    run: &mut Run,
) -> Result<(), CliError> {
    let alpha = dust_rate_matrix(m.kernel(), &m.space)?;
    let d = dobrushin_gamma(&alpha);
    let perc = max_perc_params(m.kernel(), &m.space)?;
    let sup = perc.sup();
    run.say(format!("model: {}", m.kernel.label()));
    run.say(format!("Dobrushin: {} (Γ={})", d.decision, num(d.gamma)));
    run.say(format!("sup p_x: {}", num(sup)));
    let mut levels = vec![("lower bound".to_string(), 0.5)];
    if let Some(p) = pc.pc {
        levels.push(("given".to_string(), p));
    }
    if pc.estimate_pc {
        let p = estimated_pc(&pc.pc_lattice, pc.pc_depth, pc.pc_replicas, seed, run)?;
        levels.push(("Monte Carlo".to_string(), p));
    }
    let mut dp = Vec::new();
    for (label, p) in levels {
        let r = dp_decision(sup, p).map_err(|e| CliError::Usage(e.to_string()))?;
        run.say(format!(
            "DP at p_c+={} ({label}): {} (margin {})",
            num(p),
            r.decision,
            num(r.margin)
        ));
        dp.push((label, r));
    }
    let warnings: Vec<String> = alpha.warning.iter().chain(perc.warning.iter()).cloned().collect();
    for w in &warnings {
        run.say(format!("warning: {w}"));
    }
    if let Some(path) = out {
        let report = CriteriaReport {
            model: m.kernel.label(),
            gamma: d.gamma,
            dobrushin: d.decision.to_string(),
            sup_px: sup,
            dp,
            warnings,
        };
        run.file(path, serde_json::to_vec_pretty(&report)?);
    }
    Ok(())
}

pub fn phase_scan(a: &PhaseScanArgs, run: &mut Run) -> Result<(), CliError> {
    let pc = match a.pc {
        Some(p) => {
            run.say(format!("p_c+ for dp_ok_mc: {} (given)", num(p)));
            p
        }
        None => estimated_pc("z2", a.pc_depth, a.pc_replicas, a.seed, run)?,
    };
    let csv = match a.model {
        ScanModel::Ising => {
            let betas = parse_range(&a.beta_range, "--beta-range")?;
            let hs = parse_range(&a.field_range, "--field-range")?;
            let rows = ising_phase_scan(&betas, &hs, pc).map_err(|e| CliError::Usage(e.to_string()))?;
            run.say(format!("{} rows ({} β × {} h)", rows.len(), betas.len(), hs.len()));
            run.say(format!(
                "DP (p_c+=1/2) boundary at h=0: β={}",
                num(ising_dp_boundary_zero_field(0.5))
            ));
            let dob = rows.iter().filter(|r| r.dobrushin_ok).count();
            let half = rows.iter().filter(|r| r.dp_ok_half).count();
            let mc = rows.iter().filter(|r| r.dp_ok_mc).count();
            run.say(format!("uniqueness certified: Dobrushin {dob}, DP@1/2 {half}, DP@MC {mc}"));
            if let Some(path) = &a.image {
                let data = rows
                    .iter()
                    .map(|r| match (r.dobrushin_ok, r.dp_ok_mc) {
                        (true, _) => 64,
                        (false, true) => 160,
                        _ => 255,
                    })
                    .collect();
                let image = Image {
                    width: hs.len(),
                    height: betas.len(),
                    channels: 1,
                    data,
                };
                run.file(path, image.to_pnm_bytes());
            }
            csv_bytes(&rows)?
        }
        ScanModel::Stavskaya => {
            if a.image.is_some() {
                return Err(CliError::Usage("--image needs --model ising".into()));
            }
            let ps = parse_range(&a.p_range, "--p-range")?;
            let rows = stavskaya_phase_scan(&ps, pc).map_err(|e| CliError::Usage(e.to_string()))?;
            let dob = rows.iter().filter(|r| r.dobrushin_ok).count();
            run.say(format!("{} rows; Dobrushin certifies {dob} (p < 1/2)", rows.len()));
            csv_bytes(&rows)?
        }
    };
    match &a.out {
        Some(path) => run.file(path, csv),
        None => run.stdout.push_str(&String::from_utf8_lossy(&csv)),
    }
    Ok(())
}

#[derive(Serialize)]
struct CurveRow {
    depth: u32,
    q: f64,
    successes: usize,
    replicas: usize,
    mean: f64,
    ci_lo: f64,
    ci_hi: f64,
}

pub fn percolate(a: &PercolateArgs, run: &mut Run) -> Result<(), CliError> {
    positive(a.replicas, "--replicas")?;
    let lat = lattice(&a.space)?;
    let mut rows = Vec::new();
    if let Some(q) = a.q {
        let (space, geometry) = lat.window(a.depth)?;
        let est = crossing_probability(&space, &OpenProbability::Uniform(q), &geometry, a.replicas, a.seed)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        run.say(format!(
            "crossing probability ({lat:?}, depth {}, q={}): {} (95% CI [{}, {}], {} replicas)",
            a.depth,
            num(q),
            num(est.estimate.mean),
            num(est.ci.0),
            num(est.ci.1),
            a.replicas
        ));
        rows.push(CurveRow {
            depth: a.depth,
            q,
            successes: est.successes,
            replicas: est.replicas,
            mean: est.estimate.mean,
            ci_lo: est.ci.0,
            ci_hi: est.ci.1,
        });
    } else {
        let mut options = PcOptions::doubling(a.min_depth.min(a.depth), a.depth, a.replicas, a.tolerance, a.seed);
        if options.depths.last() != Some(&a.depth) {
            options.depths.push(a.depth);
        }
        let est = estimate_pc_plus(lat, &options).map_err(|e| CliError::Usage(e.to_string()))?;
        for d in &est.per_depth {
            run.say(format!(
                "depth {:>4}: bracket [{}, {}], 95% band [{}, {}], crossing 1/4 and 3/4 at {} and {}",
                d.depth,
                num(d.bracket.0),
                num(d.bracket.1),
                num(d.statistical.0),
                num(d.statistical.1),
                num(d.sensitivity.0),
                num(d.sensitivity.1)
            ));
            for (q, c) in &d.curve {
                rows.push(CurveRow {
                    depth: d.depth,
                    q: *q,
                    successes: c.successes,
                    replicas: c.replicas,
                    mean: c.estimate.mean,
                    ci_lo: c.ci.0,
                    ci_hi: c.ci.1,
                });
            }
        }
        run.say(format!("p_c+ bracket ({lat:?}): [{}, {}]", num(est.bracket.0), num(est.bracket.1)));
        if lat == Lattice::Z2 {
            run.say(format!("published Monte Carlo value for comparison: {PUBLISHED_PC:.5}"));
        }
        for w in &est.warnings {
            run.say(format!("warning: {w}"));
        }
    }
    if let Some(path) = &a.out {
        run.file(path, csv_bytes(&rows)?);
    }
    Ok(())
}

#[derive(Serialize)]
struct DisagreementRow {
    site_x: i64,
    site_y: i64,
    disagreement: f64,
    stderr: f64,
}

/// Sites of the box without a future inside it.
fn top_sites(space: &SiteSpace, tbox: &TimeBox) -> Vec<poclab::SiteId> {
    tbox.sites()
        .iter()
        .copied()
        .filter(|&s| space.nearest_future_of(s).iter().all(|f| !tbox.contains(*f)))
        .collect()
}

pub fn disagree(a: &DisagreeArgs, run: &mut Run) -> Result<(), CliError> {
    positive(a.replicas, "--replicas")?;
    let m = model::build(&a.model, a.size, a.size, run)?;
    let parts: Vec<&str> = a.boundaries.split(',').map(str::trim).collect();
    let [first, second] = parts.as_slice() else {
        return Err(CliError::Usage(format!(
            "--boundaries expects two boundaries separated by a comma, got '{}'",
            a.boundaries
        )));
    };
    let eta = model::boundary(first, &m, run)?;
    let eta_prime = model::boundary(second, &m, run)?;
    let coupler = DisagreementCoupler::new(m.kernel(), &m.tbox, &eta, &eta_prime)?;
    let runs = coupler.map(a.seed, a.replicas, |r| (r.disagreement(), r.path_property_violation().is_some()));
    let n = m.tbox.len();
    let mut per_site = vec![Accumulator::default(); n];
    let mut counts = Vec::with_capacity(runs.len());
    for (dis, _) in &runs {
        for (acc, &d) in per_site.iter_mut().zip(dis) {
            acc.push(f64::from(u8::from(d)));
        }
        counts.push(dis.iter().filter(|d| **d).count() as f64);
    }
    let violations = runs.iter().filter(|r| r.1).count();
    let any = counts.iter().filter(|c| **c > 0.0).count();
    let sites = Estimate::from_values(&counts);
    run.say(format!("model: {}", m.kernel.label()));
    run.say(format!("box: {} sites, boundaries {} / {}", n, first, second));
    run.say(format!("replicas: {}, seed {}", a.replicas, a.seed));
    if any == 0 {
        run.say("disagreement: none (zero disagreeing sites in every replica)");
    } else {
        run.say(format!(
            "disagreeing sites per replica: {} ± {}",
            num(sites.mean),
            num(sites.stderr)
        ));
        run.say(format!("replicas with some disagreement: {any}/{}", a.replicas));
    }
    let order = m.tbox.order();
    for top in top_sites(&m.space, &m.tbox) {
        let i = m.tbox.position(top).unwrap();
        let e = per_site[i].estimate();
        run.say(format!(
            "disagreement at {}: {} ± {}",
            m.space.describe(order[i]),
            num(e.mean),
            num(e.stderr)
        ));
    }
    run.say(format!("path property violations: {violations}"));
    if let Some(path) = &a.out {
        let mut rows: Vec<(poclab::SiteId, DisagreementRow)> = order
            .iter()
            .zip(&per_site)
            .map(|(&s, acc)| {
                let e = acc.estimate();
                let (x, y) = m.space.key(s);
                (
                    s,
                    DisagreementRow {
                        site_x: x,
                        site_y: y,
                        disagreement: e.mean,
                        stderr: e.stderr,
                    },
                )
            })
            .collect();
        rows.sort_by_key(|r| r.0);
        let rows: Vec<DisagreementRow> = rows.into_iter().map(|r| r.1).collect();
        run.file(path, csv_bytes(&rows)?);
    }
    if violations > 0 {
        return Err(CliError::Runtime(format!(
            "{violations} replicas broke the disagreement path property"
        )));
    }
    Ok(())
}
