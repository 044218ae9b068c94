//! Split protocol, point and ranking metrics, one-feature baselines and the
//! ranking comparison report.

mod metrics;
mod rank;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use metrics::{classification_scores, regression_scores, scores_from_confusion, ClassificationScores, RegressionScores};
pub use rank::{
    average_ranks, curve_area, precision_at_k_curve, precision_curve_from_orders, spearman_rho, top_count,
    PrecisionCurve,
};

use crate::error::{Error, Result};
use crate::features::TargetKind;
use crate::seed::rng;
use crate::snapshot::{CrawlSeries, LinkHistory, LinkScope};

pub const DEFAULT_REALIZATIONS: usize = 5;

/// Test (25%), development (25%) and core-training (50%) pages. Tuning
/// uses the development part; the final fit uses core-train plus dev.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub test: Vec<usize>,
    pub dev: Vec<usize>,
    pub core_train: Vec<usize>,
    pub seed: u64,
}

impl SplitPlan {
    /// Core-train and dev together, sorted.
    pub fn train(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.core_train.iter().chain(&self.dev).copied().collect();
        t.sort_unstable();
        t
    }
}

pub fn make_split(n_pages: usize, seed: u64) -> Result<SplitPlan> {
    if n_pages < 8 {
        return Err(Error::invalid(format!("a split needs at least 8 pages, got {n_pages}")));
    }
    let mut ids: Vec<usize> = (0..n_pages).collect();
    ids.shuffle(&mut rng(seed));
    let quarter = (n_pages as f64 / 4.0).round() as usize;
    let mut test = ids[..quarter].to_vec();
    let mut dev = ids[quarter..2 * quarter].to_vec();
    let mut core_train = ids[2 * quarter..].to_vec();
    test.sort_unstable();
    dev.sort_unstable();
    core_train.sort_unstable();
    Ok(SplitPlan {
        test,
        dev,
        core_train,
        seed,
    })
}

/// Ranking methods compared in the ranking report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    LcrEt,
    NlEt,
    PnlEt,
    NnlNgb,
    NnlEt,
    LcrEtLbla,
    NlEtLbla,
    PnlEtLbla,
    NnlNgbLbla,
    NnlEtLbla,
    /// Mean past new-link count.
    NnlAv,
    /// Previous interval's new-link count.
    NnlPr,
    /// Content change rate.
    Ccr,
}

impl Method {
    pub const ALL: [Method; 13] = [
        Method::LcrEt,
        Method::NlEt,
        Method::PnlEt,
        Method::NnlNgb,
        Method::NnlEt,
        Method::LcrEtLbla,
        Method::NlEtLbla,
        Method::PnlEtLbla,
        Method::NnlNgbLbla,
        Method::NnlEtLbla,
        Method::NnlAv,
        Method::NnlPr,
        Method::Ccr,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::LcrEt => "LCR-ET",
            Method::NlEt => "NL-ET",
            Method::PnlEt => "PNL-ET",
            Method::NnlNgb => "NNL-NGB",
            Method::NnlEt => "NNL-ET",
            Method::LcrEtLbla => "LCR-ET_LBLA",
            Method::NlEtLbla => "NL-ET_LBLA",
            Method::PnlEtLbla => "PNL-ET_LBLA",
            Method::NnlNgbLbla => "NNL-NGB_LBLA",
            Method::NnlEtLbla => "NNL-ET_LBLA",
            Method::NnlAv => "NNL-Av",
            Method::NnlPr => "NNL-Pr",
            Method::Ccr => "CCR",
        }
    }

    pub fn is_baseline(self) -> bool {
        matches!(self, Method::NnlAv | Method::NnlPr | Method::Ccr)
    }

    pub fn is_lbla(self) -> bool {
        self.tag().ends_with("_LBLA")
    }

    /// Target the method's model is trained on (None for baselines).
    pub fn trained_target(self) -> Option<TargetKind> {
        match self {
            Method::LcrEt | Method::LcrEtLbla => Some(TargetKind::Lcr),
            Method::NlEt | Method::PnlEt | Method::NlEtLbla | Method::PnlEtLbla => Some(TargetKind::Nl),
            Method::NnlNgb | Method::NnlEt | Method::NnlNgbLbla | Method::NnlEtLbla => Some(TargetKind::Nnl),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown ranking method `{s}`")))
    }
}

/// Scores of one method over a page set, with the induced order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub method: Method,
    /// Evaluated page ids, in input order.
    pub pages: Vec<usize>,
    /// Score per entry of `pages`.
    pub scores: Vec<f64>,
    /// Positions into `pages` by non-increasing score (ties by page id).
    pub order: Vec<usize>,
    /// Number of tied groups with more than one page.
    pub tie_groups: usize,
}

impl RankingResult {
    pub fn new(method: Method, pages: Vec<usize>, scores: Vec<f64>) -> Result<Self> {
        if pages.len() != scores.len() {
            return Err(Error::invalid("one score per page required"));
        }
        if let Some(s) = scores.iter().find(|s| s.is_nan()) {
            return Err(Error::invalid(format!("{method} produced score {s}")));
        }
        let mut order: Vec<usize> = (0..pages.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(pages[a].cmp(&pages[b])));
        let mut tie_groups = 0;
        let mut i = 0;
        while i < order.len() {
            let mut j = i;
            while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
                j += 1;
            }
            tie_groups += usize::from(j > i);
            i = j + 1;
        }
        Ok(Self {
            method,
            pages,
            scores,
            order,
            tie_groups,
        })
    }

    /// Subset in the order of `pages` (which must all be present).
    pub fn restrict(&self, pages: &[usize]) -> Result<Self> {
        let pos: std::collections::HashMap<usize, usize> =
            self.pages.iter().enumerate().map(|(i, &p)| (p, i)).collect();
        let scores = pages
            .iter()
            .map(|p| {
                pos.get(p)
                    .map(|&i| self.scores[i])
                    .ok_or_else(|| Error::invalid(format!("page {p} not ranked by {}", self.method)))
            })
            .collect::<Result<_>>()?;
        Self::new(self.method, pages.to_vec(), scores)
    }
}

/// One-feature baseline scores for every page at target interval `t`.
/// Baselines read past intervals `0..t` only, unless
/// `include_target_interval` extends the content change rate through `t`.
pub fn baseline_scores(
    series: &CrawlSeries,
    history: &LinkHistory,
    scope: LinkScope,
    method: Method,
    t: usize,
    include_target_interval: bool,
) -> Result<RankingResult> {
    if t >= series.n_intervals() {
        return Err(Error::invalid(format!("target interval {t} out of range")));
    }
    let n = series.n_pages();
    let scores: Vec<f64> = match method {
        Method::NnlAv => {
            if t < 2 {
                return Err(Error::invalid(format!("NNL-Av needs at least 2 past intervals, have {t}")));
            }
            (0..n)
                .map(|p| (0..t).map(|i| history.new_count(p, i, scope) as f64).sum::<f64>() / t as f64)
                .collect()
        }
        Method::NnlPr => {
            if t < 1 {
                return Err(Error::invalid("NNL-Pr needs a past interval"));
            }
            (0..n).map(|p| history.new_count(p, t - 1, scope) as f64).collect()
        }
        Method::Ccr => {
            let end = if include_target_interval { t + 1 } else { t };
            if end == 0 {
                return Err(Error::invalid("CCR needs a past interval"));
            }
            (0..n)
                .map(|p| {
                    let changes = series.content_changes(p)?;
                    Ok(changes[..end].iter().filter(|&&c| c).count() as f64 / end as f64)
                })
                .collect::<Result<_>>()?
        }
        other => return Err(Error::invalid(format!("{other} is not a baseline"))),
    };
    RankingResult::new(method, (0..n).collect(), scores)
}

/// Ground truth of one target over the evaluated pages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthColumn {
    pub target: TargetKind,
    pub pages: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpearmanCell {
    pub method: Method,
    pub target: TargetKind,
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub method: Method,
    pub target: TargetKind,
    pub curve: PrecisionCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub spearman: Vec<SpearmanCell>,
    pub curves: Vec<CurveRow>,
}

impl RankingReport {
    pub fn rho(&self, method: Method, target: TargetKind) -> Option<f64> {
        self.spearman
            .iter()
            .find(|c| c.method == method && c.target == target)
            .and_then(|c| c.rho)
    }

    pub fn curve(&self, method: Method, target: TargetKind) -> Option<&PrecisionCurve> {
        self.curves
            .iter()
            .find(|c| c.method == method && c.target == target)
            .map(|c| &c.curve)
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut m: Vec<Method> = self.spearman.iter().map(|c| c.method).collect();
        m.dedup();
        m
    }

    /// `method, target, rho` rows; undefined correlations print as `NA`.
    pub fn write_spearman_tsv<W: Write>(&self, header: &str, mut w: W) -> Result<()> {
        let io = |e| Error::io("<report>", e);
        write!(w, "{header}").map_err(io)?;
        writeln!(w, "method\ttarget\trho").map_err(io)?;
        for c in &self.spearman {
            let rho = c.rho.map_or("NA".to_string(), |r| format!("{r:.6}"));
            writeln!(w, "{}\t{}\t{rho}", c.method, c.target).map_err(io)?;
        }
        Ok(())
    }

    /// `method, target, k, precision` rows.
    pub fn write_curves_tsv<W: Write>(&self, header: &str, mut w: W) -> Result<()> {
        let io = |e| Error::io("<report>", e);
        write!(w, "{header}").map_err(io)?;
        writeln!(w, "method\ttarget\tk_percent\tprecision").map_err(io)?;
        for c in &self.curves {
            for (k, p) in c.curve.precision.iter().enumerate() {
                writeln!(w, "{}\t{}\t{}\t{p:.6}", c.method, c.target, k + 1).map_err(io)?;
            }
        }
        Ok(())
    }

    /// `method, target, area` rows.
    pub fn write_areas_tsv<W: Write>(&self, header: &str, mut w: W) -> Result<()> {
        let io = |e| Error::io("<report>", e);
        write!(w, "{header}").map_err(io)?;
        writeln!(w, "method\ttarget\tarea").map_err(io)?;
        for c in &self.curves {
            writeln!(w, "{}\t{}\t{:.6}", c.method, c.target, c.curve.area).map_err(io)?;
        }
        Ok(())
    }
}

/// Spearman matrix (methods x targets) and Precision@k% curves of every
/// ranking against every truth column. All must cover the same pages.
pub fn evaluate_rankings(
    results: &[RankingResult],
    truths: &[TruthColumn],
    n_realizations: usize,
    seed: u64,
) -> Result<RankingReport> {
    let pages = match (results.first(), truths.first()) {
        (Some(r), _) => &r.pages,
        (None, Some(t)) => &t.pages,
        (None, None) => {
            return Ok(RankingReport {
                spearman: vec![],
                curves: vec![],
            })
        }
    };
    let mut sorted_ref = pages.clone();
    sorted_ref.sort_unstable();
    let same = |p: &[usize]| {
        let mut s = p.to_vec();
        s.sort_unstable();
        s == sorted_ref
    };
    if results.iter().any(|r| !same(&r.pages)) || truths.iter().any(|t| !same(&t.pages)) {
        return Err(Error::invalid("rankings and truths cover different page sets"));
    }
    let mut spearman = Vec::new();
    let mut curves = Vec::new();
    for r in results {
        for t in truths {
            let aligned = r.restrict(&t.pages)?;
            spearman.push(SpearmanCell {
                method: r.method,
                target: t.target,
                rho: spearman_rho(&aligned.scores, &t.values)?,
            });
            curves.push(CurveRow {
                method: r.method,
                target: t.target,
                curve: precision_at_k_curve(&t.values, &aligned.scores, n_realizations, seed)?,
            });
        }
    }
    Ok(RankingReport { spearman, curves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::target_vector;
    use crate::snapshot::SeriesBuilder;

    #[test]
    fn split_proportions_and_determinism() {
        let s = make_split(1000, 3).unwrap();
        assert_eq!((s.test.len(), s.dev.len(), s.core_train.len()), (250, 250, 500));
        assert_eq!(make_split(1000, 3).unwrap(), s);
        let mut all: Vec<usize> = s.test.iter().chain(&s.dev).chain(&s.core_train).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        assert!(make_split(7, 0).is_err());
        for n in 8..40 {
            let s = make_split(n, n as u64).unwrap();
            assert!((s.test.len() as f64 - n as f64 / 4.0).abs() <= 1.0);
            assert!((s.core_train.len() as f64 - n as f64 / 2.0).abs() <= 1.0);
        }
    }

    #[test]
    fn test_sets_overlap_like_independent_draws() {
        // expected overlap of two independent 250-of-1000 draws: 62.5, sd ~ 6.6
        let a = make_split(1000, 11).unwrap().test;
        for seed in [12, 13] {
            let b = make_split(1000, seed).unwrap().test;
            let overlap = a.iter().filter(|p| b.binary_search(p).is_ok()).count() as f64;
            assert!((overlap - 62.5).abs() < 4.0 * 6.6, "overlap {overlap}");
        }
    }

    fn counts_series(counts: &[usize]) -> CrawlSeries {
        let n = counts.len() + 1;
        let mut b = SeriesBuilder::new(&["https://a.org/"], n).unwrap();
        let mut links: Vec<String> = Vec::new();
        for c in 0..n {
            if c > 0 {
                let base = links.len();
                links.extend((0..counts[c - 1]).map(|i| format!("https://a.org/{}", base + i)));
            }
            b = b.links(c, 0, &links);
        }
        b.build().unwrap()
    }

    #[test]
    fn baseline_arithmetic() {
        // past intervals 0..4 hold (0, 3, 0, 3); interval 4 is the target
        let s = counts_series(&[0, 3, 0, 3, 5]);
        let h = s.link_history();
        let sc = LinkScope::Internal;
        let av = baseline_scores(&s, &h, sc, Method::NnlAv, 4, false).unwrap();
        let pr = baseline_scores(&s, &h, sc, Method::NnlPr, 4, false).unwrap();
        assert_eq!((av.scores[0], pr.scores[0]), (1.5, 3.0));
        assert!(baseline_scores(&s, &h, sc, Method::NnlAv, 1, false).is_err());
        assert!(baseline_scores(&s, &h, sc, Method::NnlPr, 0, false).is_err());
        // one past interval: NNL-Av would equal NNL-Pr, but it needs two
        let s2 = counts_series(&[2, 7, 1]);
        let h2 = s2.link_history();
        let av2 = baseline_scores(&s2, &h2, sc, Method::NnlAv, 2, false).unwrap();
        assert_eq!(av2.scores[0], 4.5);
    }

    #[test]
    fn ccr_digest_fixture() {
        // 10 crawls, digests change in intervals 1, 3, 4, 6 (4 of the 8 past ones)
        let digests = [1u8, 1, 2, 2, 3, 4, 4, 5, 5, 5];
        let mut b = SeriesBuilder::new(&["https://a.org/", "https://b.org/"], 10).unwrap();
        for (c, d) in digests.iter().enumerate() {
            b = b.with(c, 0, |s| s.content_digest = vec![*d]);
        }
        let s = b.build().unwrap();
        let h = s.link_history();
        let ccr = baseline_scores(&s, &h, LinkScope::Internal, Method::Ccr, 8, false).unwrap();
        assert_eq!(ccr.scores, vec![0.5, 0.0]);
        let with_t = baseline_scores(&s, &h, LinkScope::Internal, Method::Ccr, 8, true).unwrap();
        assert!((with_t.scores[0] - 4.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn ranking_order_and_report() {
        let r = RankingResult::new(Method::NnlPr, vec![0, 1, 2, 3], vec![1.0, 3.0, 1.0, 2.0]).unwrap();
        assert_eq!(r.order, vec![1, 3, 0, 2]);
        assert_eq!(r.tie_groups, 1);
        assert!(r.order.windows(2).all(|w| r.scores[w[0]] >= r.scores[w[1]]));

        let s = counts_series(&[1, 2, 0, 4]);
        let h = s.link_history();
        let tv = target_vector(&h, TargetKind::Nnl, LinkScope::Internal, 3).unwrap();
        let truth = TruthColumn {
            target: TargetKind::Nnl,
            pages: vec![0],
            values: tv.values.clone(),
        };
        let self_rank = RankingResult::new(Method::NnlEt, vec![0], tv.values).unwrap();
        assert!(evaluate_rankings(&[self_rank], &[truth], 1, 0).is_err(), "one page is too few for rho");

        let truth = TruthColumn {
            target: TargetKind::Nnl,
            pages: vec![0, 1, 2, 3, 4],
            values: vec![0.0, 5.0, 1.0, 2.0, 9.0],
        };
        let perfect = RankingResult::new(Method::NnlEt, truth.pages.clone(), truth.values.clone()).unwrap();
        let other = RankingResult::new(Method::NnlPr, vec![4, 3, 2, 1, 0], vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let rep = evaluate_rankings(&[perfect, other], std::slice::from_ref(&truth), 3, 0).unwrap();
        assert_eq!(rep.rho(Method::NnlEt, TargetKind::Nnl), Some(1.0));
        assert_eq!(rep.methods(), vec![Method::NnlEt, Method::NnlPr]);
        assert!((rep.curve(Method::NnlEt, TargetKind::Nnl).unwrap().area - 1.0).abs() < 1e-12);
        let bad = RankingResult::new(Method::Ccr, vec![0, 1], vec![0.0, 1.0]).unwrap();
        assert!(evaluate_rankings(&[bad], &[truth], 1, 0).is_err());
    }
}
