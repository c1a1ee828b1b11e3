//! Region maps of the Dobrushin and percolation criteria.

use std::io::Write;

use serde::Serialize;

use super::closed_form::{ising_gamma, ising_px, stavskaya_gamma, stavskaya_px};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseRow {
    pub beta: f64,
    pub h: f64,
    pub gamma: f64,
    pub px: f64,
    pub dobrushin_ok: bool,
    pub dp_ok_half: bool,
    pub dp_ok_mc: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StavskayaRow {
    pub p: f64,
    pub gamma: f64,
    pub px: f64,
    pub dobrushin_ok: bool,
    pub dp_ok_half: bool,
    pub dp_ok_mc: bool,
}

fn check_pc(pc: f64) -> Result<()> {
    if pc > 0.0 && pc <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("p_c+ must lie in (0,1], got {pc}")))
    }
}

/// One row per `(β, h)`, with `β` varying slowest.
pub fn ising_phase_scan(betas: &[f64], hs: &[f64], pc_mc: f64) -> Result<Vec<PhaseRow>> {
    check_pc(pc_mc)?;
    if let Some(b) = betas.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
        return Err(Error::Domain(format!("β must be positive, got {b}")));
    }
    let mut rows = Vec::with_capacity(betas.len() * hs.len());
    for &beta in betas {
        for &h in hs {
            let gamma = ising_gamma(beta, h);
            let px = ising_px(beta, h);
            rows.push(PhaseRow {
                beta,
                h,
                gamma,
                px,
                dobrushin_ok: gamma < 1.0,
                dp_ok_half: px < 0.5,
                dp_ok_mc: px < pc_mc,
            });
        }
    }
    Ok(rows)
}

pub fn stavskaya_phase_scan(ps: &[f64], pc_mc: f64) -> Result<Vec<StavskayaRow>> {
    check_pc(pc_mc)?;
    ps.iter()
        .map(|&p| {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("p must lie in [0,1], got {p}")));
            }
            let px = stavskaya_px(p);
            Ok(StavskayaRow {
                p,
                gamma: stavskaya_gamma(p),
                px,
                dobrushin_ok: stavskaya_gamma(p) < 1.0,
                dp_ok_half: px < 0.5,
                dp_ok_mc: px < pc_mc,
            })
        })
        .collect()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// CSV with a header row.
pub fn write_csv<T: Serialize>(rows: &[T], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Domain(format!("{other:?}")),
    }
}
