use std::fmt::Write as _;

use serde::Serialize;

use crate::snapshot::{CrawlSeries, LinkScope};

/// New-outlink count groups: 0, 1 or 2, 3 to 10, more than 10.
pub const GROUP_LABELS: [&str; 4] = ["0", "1-2", "3-10", ">10"];
const CCDF_POINTS: [u32; 11] = [1, 2, 3, 5, 10, 20, 50, 100, 200, 500, 1000];
const LCR_BINS: usize = 10;

pub fn group_of(count: u32) -> usize {
    match count {
        0 => 0,
        1..=2 => 1,
        3..=10 => 2,
        _ => 3,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalMoments {
    pub interval: usize,
    pub mean: f64,
    /// Population standard deviation over pages.
    pub std: f64,
    pub zero_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScopeCalibration {
    pub scope: LinkScope,
    pub moments: Vec<IntervalMoments>,
    /// `(x, share of page-intervals with at least x new outlinks)`.
    pub ccdf: Vec<(u32, f64)>,
    /// Group-to-group page counts for every pair of consecutive intervals.
    pub transitions: Vec<[[usize; 4]; 4]>,
    /// Pages per tenth of the link change rate over all intervals.
    pub lcr_histogram: [usize; LCR_BINS],
}

impl ScopeCalibration {
    /// Mean new outlinks per page and interval over the whole series.
    pub fn pooled_mean(&self) -> f64 {
        self.moments.iter().map(|m| m.mean).sum::<f64>() / self.moments.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub n_pages: usize,
    pub n_intervals: usize,
    pub scopes: Vec<ScopeCalibration>,
}

impl CalibrationReport {
    pub fn scope(&self, scope: LinkScope) -> &ScopeCalibration {
        &self.scopes[scope.index()]
    }

    /// Tab-separated sections, one block per table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# pages\t{}\n# intervals\t{}", self.n_pages, self.n_intervals);
        out.push_str("\n[moments]\nscope\tinterval\tmean\tstd\tzero_fraction\n");
        for s in &self.scopes {
            for m in &s.moments {
                let _ = writeln!(out, "{}\t{}\t{:.6}\t{:.6}\t{:.6}", s.scope.tag(), m.interval, m.mean, m.std, m.zero_fraction);
            }
        }
        out.push_str("\n[ccdf]\nscope\tx\tshare_at_least_x\n");
        for s in &self.scopes {
            for (x, v) in &s.ccdf {
                let _ = writeln!(out, "{}\t{x}\t{v:.6}", s.scope.tag());
            }
        }
        out.push_str("\n[transitions]\nscope\tfrom_interval\tfrom_group\tto_group\tpages\n");
        for s in &self.scopes {
            for (i, t) in s.transitions.iter().enumerate() {
                for (a, row) in t.iter().enumerate() {
                    for (b, n) in row.iter().enumerate() {
                        let _ = writeln!(out, "{}\t{i}\t{}\t{}\t{n}", s.scope.tag(), GROUP_LABELS[a], GROUP_LABELS[b]);
                    }
                }
            }
        }
        out.push_str("\n[lcr_histogram]\nscope\tbin_low\tbin_high\tpages\n");
        for s in &self.scopes {
            for (b, n) in s.lcr_histogram.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{}\t{:.1}\t{:.1}\t{n}",
                    s.scope.tag(),
                    b as f64 / LCR_BINS as f64,
                    (b + 1) as f64 / LCR_BINS as f64
                );
            }
        }
        out
    }
}

/// Summary statistics of the new-outlink process of a series.
pub fn calibration_report(series: &CrawlSeries) -> CalibrationReport {
    let h = series.link_history();
    let n = series.n_pages();
    let n_int = series.n_intervals();
    let scopes = [LinkScope::Internal, LinkScope::External]
        .into_iter()
        .map(|scope| {
            let counts: Vec<Vec<u32>> = (0..n_int).map(|i| (0..n).map(|p| h.new_count(p, i, scope)).collect()).collect();
            let moments = counts
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let mean = c.iter().map(|&v| f64::from(v)).sum::<f64>() / n as f64;
                    let var = c.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / n as f64;
                    IntervalMoments {
                        interval: i,
                        mean,
                        std: var.sqrt(),
                        zero_fraction: c.iter().filter(|&&v| v == 0).count() as f64 / n as f64,
                    }
                })
                .collect();
            let total = (n * n_int) as f64;
            let ccdf = CCDF_POINTS
                .iter()
                .map(|&x| (x, counts.iter().flatten().filter(|&&v| v >= x).count() as f64 / total))
                .collect();
            let transitions = counts
                .windows(2)
                .map(|w| {
                    let mut t = [[0usize; 4]; 4];
                    for p in 0..n {
                        t[group_of(w[0][p])][group_of(w[1][p])] += 1;
                    }
                    t
                })
                .collect();
            let mut lcr_histogram = [0usize; LCR_BINS];
            for p in 0..n {
                let active = counts.iter().filter(|c| c[p] > 0).count();
                let lcr = active as f64 / n_int as f64;
                lcr_histogram[((lcr * LCR_BINS as f64) as usize).min(LCR_BINS - 1)] += 1;
            }
            ScopeCalibration {
                scope,
                moments,
                ccdf,
                transitions,
                lcr_histogram,
            }
        })
        .collect();
    CalibrationReport {
        n_pages: n,
        n_intervals: n_int,
        scopes,
    }
}
