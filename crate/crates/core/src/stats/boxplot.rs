//! Boxplot summaries of per-stimulus MOS differences between two setups.

use super::descriptive::{median, tukey_hinges, OutlierPolicy};
use super::{Result, Setup, StatsError, Stimulus};
use ordered_float::OrderedFloat;
use std::collections::BTreeMap;
use std::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    Hologram,
    Bpp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxplotRow {
    pub group: String,
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Most extreme differences inside the 1.5 IQR fences.
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    pub outliers: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceBoxplots {
    pub first: Setup,
    pub second: Setup,
    pub group_by: GroupBy,
    pub rows: Vec<BoxplotRow>,
    /// Stimuli without a counterpart on the other setup; excluded.
    pub unmatched: Vec<Stimulus>,
}

/// Differences `MOS(first) - MOS(second)` of matched stimuli (same hologram,
/// codec, rate and perspective), grouped by hologram or by rate.
pub fn difference_boxplots(
    averaged: &BTreeMap<Stimulus, f64>,
    first: Setup,
    second: Setup,
    group_by: GroupBy,
) -> DifferenceBoxplots {
    let side = |setup: Setup| -> BTreeMap<_, (f64, &Stimulus)> {
        averaged.iter().filter(|(s, _)| s.setup == setup).map(|(s, &v)| (s.content(), (v, s))).collect()
    };
    let (a, b) = (side(first), side(second));
    let mut groups: BTreeMap<(OrderedFloat<f64>, String), Vec<f64>> = BTreeMap::new();
    let mut unmatched = Vec::new();
    for (key, &(va, s)) in &a {
        let Some(&(vb, _)) = b.get(key) else {
            unmatched.push(s.clone());
            continue;
        };
        let group = match group_by {
            GroupBy::Hologram => (OrderedFloat(0.0), s.hologram.clone()),
            GroupBy::Bpp => (s.bpp, s.bpp.to_string()),
        };
        groups.entry(group).or_default().push(va - vb);
    }
    unmatched.extend(b.iter().filter(|(k, _)| !a.contains_key(*k)).map(|(_, &(_, s))| s.clone()));

    let fences = OutlierPolicy::default();
    let rows = groups
        .into_iter()
        .map(|((_, group), d)| {
            let (q1, q3) = tukey_hinges(&d).expect("groups are never empty");
            let (lo, hi) = fences.fences(&d).expect("groups are never empty");
            let inside: Vec<f64> = d.iter().copied().filter(|v| (lo..=hi).contains(v)).collect();
            BoxplotRow {
                group,
                n: d.len(),
                median: median(&d),
                q1,
                q3,
                whisker_lo: inside.iter().copied().fold(f64::INFINITY, f64::min),
                whisker_hi: inside.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                outliers: d.len() - inside.len(),
            }
        })
        .collect();
    DifferenceBoxplots { first, second, group_by, rows, unmatched }
}

impl DifferenceBoxplots {
    pub fn write_csv(&self, writer: impl io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["first", "second", "group", "n", "median", "q1", "q3", "whisker_lo", "whisker_hi", "outliers"])?;
        for r in &self.rows {
            w.write_record([
                self.first.to_string(),
                self.second.to_string(),
                r.group.clone(),
                r.n.to_string(),
                r.median.to_string(),
                r.q1.to_string(),
                r.q3.to_string(),
                r.whisker_lo.to_string(),
                r.whisker_hi.to_string(),
                r.outliers.to_string(),
            ])?;
        }
        w.flush().map_err(|source| StatsError::Io { path: "<csv>".into(), source })?;
        Ok(())
    }
}
