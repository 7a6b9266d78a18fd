//! Inter-setup fits and their sensitivity to a single changed score.

use super::fit::{fit_quartic, QuarticFit};
use super::mos::ConditionStats;
use super::{Condition, OutlierPolicy, Perspective, Result, ScoreTable, Setup, StatsError, Stimulus};
use ordered_float::OrderedFloat;
use rayon::prelude::*;
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    /// Setup whose MOS is the predictor.
    pub source: Setup,
    /// Setup whose MOS is predicted.
    pub target: Setup,
    pub perspective: Perspective,
    pub policy: OutlierPolicy,
}

type ContentKey = (String, String, OrderedFloat<f64>);

/// Matched focus-averaged MOS values, ordered by (hologram, codec, bpp).
#[derive(Debug, Clone, PartialEq)]
pub struct Pairs {
    pub keys: Vec<ContentKey>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Stimuli present on only one of the two setups.
    pub unmatched: Vec<Stimulus>,
}

pub fn pair_setups(averaged: &BTreeMap<Stimulus, f64>, source: Setup, target: Setup, perspective: Perspective) -> Pairs {
    let side = |setup: Setup| -> BTreeMap<ContentKey, (f64, &Stimulus)> {
        averaged
            .iter()
            .filter(|(s, _)| s.setup == setup && s.perspective == perspective)
            .map(|(s, &v)| ((s.hologram.clone(), s.codec.clone(), s.bpp), (v, s)))
            .collect()
    };
    let (xs, ys) = (side(source), side(target));
    let mut pairs = Pairs { keys: Vec::new(), x: Vec::new(), y: Vec::new(), unmatched: Vec::new() };
    for (key, &(x, s)) in &xs {
        match ys.get(key) {
            Some(&(y, _)) => {
                pairs.keys.push(key.clone());
                pairs.x.push(x);
                pairs.y.push(y);
            }
            None => pairs.unmatched.push(s.clone()),
        }
    }
    pairs.unmatched.extend(ys.iter().filter(|(k, _)| !xs.contains_key(*k)).map(|(_, &(_, s))| s.clone()));
    pairs
}

/// Focus-averaged MOS over `conds`, with one condition optionally replaced.
fn averaged(
    conds: &BTreeMap<Condition, ConditionStats>,
    replaced: Option<(&Condition, &ConditionStats)>,
) -> BTreeMap<Stimulus, f64> {
    let mut acc: BTreeMap<Stimulus, Vec<f64>> = BTreeMap::new();
    for (cond, stats) in conds {
        let stats = match replaced {
            Some((c, s)) if c == cond => s,
            _ => stats,
        };
        if stats.is_valid() {
            acc.entry(cond.stimulus.clone()).or_default().push(stats.mos);
        }
    }
    acc.into_iter().map(|(k, v)| (k, super::mean(&v))).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetupFit {
    pub config: FitConfig,
    pub fit: QuarticFit,
    pub pairs: Pairs,
    pub max_perturbation_error: f64,
}

struct Prepared {
    conds: BTreeMap<Condition, ConditionStats>,
    raw: BTreeMap<Condition, Vec<(String, u8)>>,
    pairs: Pairs,
    fit: QuarticFit,
}

fn prepare(table: &ScoreTable, config: &FitConfig) -> Result<Prepared> {
    let raw: BTreeMap<Condition, Vec<(String, u8)>> = table
        .by_condition()
        .into_iter()
        .filter(|(c, _)| {
            (c.stimulus.setup == config.source || c.stimulus.setup == config.target)
                && c.stimulus.perspective == config.perspective
        })
        .collect();
    let conds = raw
        .iter()
        .map(|(c, scores)| (c.clone(), ConditionStats::compute(scores, config.policy)))
        .collect();
    let pairs = pair_setups(&averaged(&conds, None), config.source, config.target, config.perspective);
    if pairs.x.is_empty() {
        return Err(StatsError::NoPairs(config.source, config.target));
    }
    let fit = fit_quartic(&pairs.x, &pairs.y)?;
    Ok(Prepared { conds, raw, pairs, fit })
}

fn max_change(base: &QuarticFit, other: &QuarticFit, grid: &[f64]) -> f64 {
    grid.iter()
        .map(|&x| (other.poly.eval(x) - base.poly.eval(x)).abs())
        .fold(0.0, f64::max)
}

fn perturbation_of(p: &Prepared, config: &FitConfig) -> Result<f64> {
    let jobs: Vec<(&Condition, usize, i16)> = p
        .raw
        .iter()
        .flat_map(|(c, scores)| {
            scores.iter().enumerate().flat_map(move |(i, &(_, s))| {
                [-1i16, 1]
                    .into_iter()
                    .filter(move |d| (1..=5).contains(&(s as i16 + d)))
                    .map(move |d| (c, i, d))
            })
        })
        .collect();
    let changes = jobs
        .par_iter()
        .map(|&(cond, i, d)| {
            let mut scores = p.raw[cond].clone();
            scores[i].1 = (scores[i].1 as i16 + d) as u8;
            let stats = ConditionStats::compute(&scores, config.policy);
            let avg = averaged(&p.conds, Some((cond, &stats)));
            let pairs = pair_setups(&avg, config.source, config.target, config.perspective);
            let fit = fit_quartic(&pairs.x, &pairs.y)?;
            Ok(max_change(&p.fit, &fit, &p.pairs.x))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(changes.into_iter().fold(0.0, f64::max))
}

/// Largest change of the fitted values, over the observed source MOS values,
/// when any one subject moves any one score by ±1 within 1..=5.
pub fn perturbation_error(table: &ScoreTable, config: &FitConfig) -> Result<f64> {
    let p = prepare(table, config)?;
    perturbation_of(&p, config)
}

/// Fits target-setup MOS against source-setup MOS and evaluates the
/// perturbation error.
pub fn fit_setups(table: &ScoreTable, config: &FitConfig) -> Result<SetupFit> {
    let p = prepare(table, config)?;
    let max_perturbation_error = perturbation_of(&p, config)?;
    Ok(SetupFit { config: *config, fit: p.fit, pairs: p.pairs, max_perturbation_error })
}
