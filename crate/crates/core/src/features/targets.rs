use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::snapshot::{LinkHistory, LinkScope};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    /// Link change rate: fraction of intervals with at least one new outlink.
    Lcr,
    /// New-link indicator in the target interval.
    Nl,
    /// Number of new links in the target interval.
    Nnl,
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetKind::Lcr => "LCR",
            TargetKind::Nl => "NL",
            TargetKind::Nnl => "NNL",
        })
    }
}

impl FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LCR" => Ok(TargetKind::Lcr),
            "NL" => Ok(TargetKind::Nl),
            "NNL" => Ok(TargetKind::Nnl),
            _ => Err(Error::invalid(format!("unknown target `{s}` (LCR, NL or NNL)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetVector {
    pub kind: TargetKind,
    pub scope: LinkScope,
    /// Intervals the target reads: the whole history for LCR, one interval otherwise.
    pub intervals: Range<usize>,
    pub values: Vec<f64>,
}

fn check_interval(h: &LinkHistory, interval: usize) -> Result<()> {
    if interval >= h.n_intervals() {
        return Err(Error::invalid(format!(
            "interval {interval} out of range (series has {} intervals)",
            h.n_intervals()
        )));
    }
    Ok(())
}

/// Fraction of intervals in `range` with at least one new outlink of `scope`.
pub fn compute_lcr(h: &LinkHistory, page: usize, scope: LinkScope, range: Range<usize>) -> Result<f64> {
    if range.is_empty() {
        return Err(Error::invalid("link change rate over an empty interval range"));
    }
    check_interval(h, range.end - 1)?;
    let changed = range.clone().filter(|&i| h.new_count(page, i, scope) > 0).count();
    Ok(changed as f64 / range.len() as f64)
}

pub fn compute_nl(h: &LinkHistory, page: usize, scope: LinkScope, interval: usize) -> Result<u8> {
    check_interval(h, interval)?;
    Ok(u8::from(h.new_count(page, interval, scope) > 0))
}

pub fn compute_nnl(h: &LinkHistory, page: usize, scope: LinkScope, interval: usize) -> Result<u32> {
    check_interval(h, interval)?;
    Ok(h.new_count(page, interval, scope))
}

/// Ground truth for every page: LCR over all intervals, NL/NNL at `interval`.
pub fn target_vector(h: &LinkHistory, kind: TargetKind, scope: LinkScope, interval: usize) -> Result<TargetVector> {
    check_interval(h, interval)?;
    let intervals = match kind {
        TargetKind::Lcr => 0..h.n_intervals(),
        _ => interval..interval + 1,
    };
    let values = (0..h.n_pages())
        .map(|p| match kind {
            TargetKind::Lcr => compute_lcr(h, p, scope, intervals.clone()),
            TargetKind::Nl => compute_nl(h, p, scope, interval).map(f64::from),
            TargetKind::Nnl => compute_nnl(h, p, scope, interval).map(f64::from),
        })
        .collect::<Result<_>>()?;
    Ok(TargetVector {
        kind,
        scope,
        intervals,
        values,
    })
}
