//! MOS per condition after outlier removal, plus pooled Z-score and
//! per-subject outlier summaries.

use super::descriptive::{ci95, kurtosis, kurtosis_flag, mean, remove_outliers, sample_std, zscores, OutlierPolicy};
use super::{Condition, Result, ScoreTable, Setup, StatsError, Stimulus};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::io;

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Valid,
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionStats {
    /// Subjects in score order (sorted by id).
    pub subjects: Vec<String>,
    pub scores: Vec<u8>,
    /// Z-scores of the raw scores; `None` when every score is equal.
    pub zscores: Option<Vec<f64>>,
    /// `None` below 4 scores or for a constant set.
    pub kurtosis: Option<f64>,
    pub kurtosis_flag: bool,
    pub outliers: Vec<bool>,
    pub n_kept: usize,
    pub mos: f64,
    /// Sample standard deviation of the surviving scores.
    pub sample_std: f64,
    pub ci95: (f64, f64),
    pub status: Status,
}

impl ConditionStats {
    pub fn n(&self) -> usize {
        self.scores.len()
    }

    pub fn is_valid(&self) -> bool {
        self.status == Status::Valid
    }

    /// Scores (subject, score) → statistics. Outlier removal needs 4 scores;
    /// smaller conditions keep every score.
    pub fn compute(scores: &[(String, u8)], policy: OutlierPolicy) -> Self {
        let raw: Vec<f64> = scores.iter().map(|s| s.1 as f64).collect();
        let mut stats = ConditionStats {
            subjects: scores.iter().map(|s| s.0.clone()).collect(),
            scores: scores.iter().map(|s| s.1).collect(),
            zscores: zscores(&raw).ok(),
            kurtosis: kurtosis(&raw).ok(),
            kurtosis_flag: false,
            outliers: vec![false; raw.len()],
            n_kept: 0,
            mos: f64::NAN,
            sample_std: f64::NAN,
            ci95: (f64::NAN, f64::NAN),
            status: Status::Valid,
        };
        stats.kurtosis_flag = stats.kurtosis.is_some_and(kurtosis_flag);
        if raw.len() < 2 {
            stats.status = Status::Invalid(format!("{} score(s), need at least 2", raw.len()));
            return stats;
        }
        let kept = match remove_outliers(&raw, policy) {
            Ok((kept, flags)) => {
                stats.outliers = flags;
                kept
            }
            Err(_) => raw,
        };
        stats.n_kept = kept.len();
        if kept.is_empty() {
            stats.status = Status::Invalid("every score is an outlier".into());
            return stats;
        }
        stats.mos = mean(&kept);
        if kept.len() >= 2 {
            stats.sample_std = sample_std(&kept).expect("n >= 2");
            stats.ci95 = ci95(&kept).expect("n >= 2");
        } else {
            stats.sample_std = 0.0;
            stats.ci95 = (stats.mos, stats.mos);
        }
        stats
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MosTable {
    pub policy: OutlierPolicy,
    pub conditions: BTreeMap<Condition, ConditionStats>,
}

pub fn mos(table: &ScoreTable, policy: OutlierPolicy) -> MosTable {
    let groups: Vec<_> = table.by_condition().into_iter().collect();
    let conditions = groups
        .into_par_iter()
        .map(|(cond, scores)| {
            let stats = ConditionStats::compute(&scores, policy);
            (cond, stats)
        })
        .collect();
    MosTable { policy, conditions }
}

impl MosTable {
    /// MOS per stimulus, averaged over its valid focus variants.
    pub fn focus_averaged(&self) -> BTreeMap<Stimulus, f64> {
        let mut acc: BTreeMap<Stimulus, Vec<f64>> = BTreeMap::new();
        for (cond, stats) in &self.conditions {
            if stats.is_valid() {
                acc.entry(cond.stimulus.clone()).or_default().push(stats.mos);
            }
        }
        acc.into_iter().map(|(k, v)| (k, mean(&v))).collect()
    }

    pub fn write_csv(&self, writer: impl io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "setup", "hologram", "codec", "bpp", "perspective", "focus", "n", "n_kept", "mos", "sample_std",
            "ci95_lo", "ci95_hi", "kurtosis", "kurtosis_flag", "outliers", "status",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (c, s) in &self.conditions {
            let st = &c.stimulus;
            let outliers: Vec<&str> = s
                .subjects
                .iter()
                .zip(&s.outliers)
                .filter(|(_, &f)| f)
                .map(|(id, _)| id.as_str())
                .collect();
            w.write_record([
                st.setup.to_string(),
                st.hologram.clone(),
                st.codec.clone(),
                st.bpp.to_string(),
                st.perspective.to_string(),
                c.focus.to_string(),
                s.n().to_string(),
                s.n_kept.to_string(),
                s.mos.to_string(),
                s.sample_std.to_string(),
                s.ci95.0.to_string(),
                s.ci95.1.to_string(),
                opt(s.kurtosis),
                s.kurtosis_flag.to_string(),
                outliers.join(" "),
                match &s.status {
                    Status::Valid => "valid".to_string(),
                    Status::Invalid(why) => format!("invalid: {why}"),
                },
            ])?;
        }
        w.flush().map_err(|source| StatsError::Io { path: "<csv>".into(), source })?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZScoreSummary {
    pub n: usize,
    /// Fraction with |z| <= 1 and |z| <= 2.
    pub within_1: f64,
    pub within_2: f64,
    /// `(lower edge, count)` for bins of width 0.25 on [-4, 4); values
    /// outside are counted in the end bins.
    pub histogram: Vec<(f64, usize)>,
    /// Conditions without Z-scores (all scores equal or fewer than 2).
    pub degenerate: Vec<Condition>,
}

pub const HISTOGRAM_BIN: f64 = 0.25;

/// Pools the raw Z-scores of every condition (of one setup, if given).
pub fn zscore_summary(table: &MosTable, setup: Option<Setup>) -> ZScoreSummary {
    let bins = (8.0 / HISTOGRAM_BIN) as usize;
    let mut histogram: Vec<(f64, usize)> = (0..bins).map(|i| (-4.0 + i as f64 * HISTOGRAM_BIN, 0)).collect();
    let (mut n, mut w1, mut w2) = (0usize, 0usize, 0usize);
    let mut degenerate = Vec::new();
    for (cond, stats) in &table.conditions {
        if setup.is_some_and(|s| s != cond.stimulus.setup) {
            continue;
        }
        let Some(z) = &stats.zscores else {
            degenerate.push(cond.clone());
            continue;
        };
        for &v in z {
            n += 1;
            w1 += (v.abs() <= 1.0) as usize;
            w2 += (v.abs() <= 2.0) as usize;
            let bin = ((v + 4.0) / HISTOGRAM_BIN).floor().clamp(0.0, (bins - 1) as f64) as usize;
            histogram[bin].1 += 1;
        }
    }
    let frac = |k: usize| if n == 0 { f64::NAN } else { k as f64 / n as f64 };
    ZScoreSummary { n, within_1: frac(w1), within_2: frac(w2), histogram, degenerate }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubjectOutliers {
    pub subject: String,
    /// Conditions where outlier removal was applied to this subject's score.
    pub screened: usize,
    pub outliers: usize,
    pub percent: f64,
    /// Above the reporting threshold; subjects are never dropped automatically.
    pub flagged: bool,
}

pub fn subject_outliers(table: &MosTable, threshold_percent: f64) -> Vec<SubjectOutliers> {
    let mut acc: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for stats in table.conditions.values() {
        if stats.n() < 4 {
            continue;
        }
        for (subject, &flag) in stats.subjects.iter().zip(&stats.outliers) {
            let e = acc.entry(subject).or_default();
            e.0 += 1;
            e.1 += flag as usize;
        }
    }
    acc.into_iter()
        .map(|(subject, (screened, outliers))| {
            let percent = 100.0 * outliers as f64 / screened as f64;
            SubjectOutliers {
                subject: subject.to_string(),
                screened,
                outliers,
                percent,
                flagged: percent > threshold_percent,
            }
        })
        .collect()
}
