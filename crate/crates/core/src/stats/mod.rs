//! Subjective-score statistics: Z-scores and kurtosis screening, boxplot
//! outlier removal, MOS with confidence intervals, inter-setup quartic fits
//! with correlations and single-score perturbation sensitivity.

mod boxplot;
mod descriptive;
mod fit;
mod mos;
mod perturb;
mod plot;

pub use boxplot::{difference_boxplots, BoxplotRow, DifferenceBoxplots, GroupBy};
pub use descriptive::{
    ci95, kurtosis, kurtosis_flag, mean, median, outlier_flags, remove_outliers, sample_std, tukey_hinges,
    zscores, OutlierPolicy,
};
pub use fit::{fit_quartic, pearson, spearman, Polynomial, QuarticFit};
pub use mos::{
    mos, subject_outliers, zscore_summary, ConditionStats, MosTable, Status, SubjectOutliers, ZScoreSummary,
};
pub use perturb::{fit_setups, pair_setups, perturbation_error, FitConfig, Pairs, SetupFit};
pub use plot::{plot_boxplots, plot_fit, plot_zscore_histogram};

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum StatsError {
    #[error("need at least {needed} values, got {n}")]
    TooFew { n: usize, needed: usize },
    #[error("all values are equal")]
    Degenerate,
    #[error("whisker length must be positive, got {0}")]
    InvalidPolicy(f64),
    #[error("row {row}: score {score} is outside 1..=5")]
    InvalidScore { row: usize, score: i64 },
    #[error("row {row}: invalid bpp {bpp}")]
    InvalidBpp { row: usize, bpp: f64 },
    #[error("row {row}: subject `{subject}` already scored {condition}")]
    Duplicate { row: usize, subject: String, condition: String },
    #[error("x and y lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("quartic fit needs at least 5 distinct x values, got {0}")]
    RankDeficient(usize),
    #[error("no matched conditions between {0} and {1}")]
    NoPairs(Setup, Setup),
    #[error("plot: {0}")]
    Plot(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

pub type Result<T, E = StatsError> = std::result::Result<T, E>;

/// Display setup a score was collected on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Setup {
    #[serde(rename = "holographic")]
    Holographic,
    #[serde(rename = "light_field")]
    LightField,
    #[serde(rename = "flat_2d")]
    Flat2d,
}

impl Setup {
    pub const ALL: [Setup; 3] = [Setup::Holographic, Setup::LightField, Setup::Flat2d];

    pub fn as_str(self) -> &'static str {
        match self {
            Setup::Holographic => "holographic",
            Setup::LightField => "light_field",
            Setup::Flat2d => "flat_2d",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Perspective {
    #[serde(rename = "center")]
    Center,
    #[serde(rename = "right_corner")]
    RightCorner,
}

impl Perspective {
    pub fn as_str(self) -> &'static str {
        match self {
            Perspective::Center => "center",
            Perspective::RightCorner => "right_corner",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Focus {
    #[serde(rename = "front")]
    Front,
    #[serde(rename = "back")]
    Back,
    #[serde(rename = "single")]
    Single,
}

impl Focus {
    pub fn as_str(self) -> &'static str {
        match self {
            Focus::Front => "front",
            Focus::Back => "back",
            Focus::Single => "single",
        }
    }
}

macro_rules! display_via_as_str {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    )*};
}
display_via_as_str!(Setup, Perspective, Focus);

/// A stimulus as shown, irrespective of focus: the unit MOS values are
/// compared on across setups.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Stimulus {
    pub setup: Setup,
    pub hologram: String,
    pub codec: String,
    pub bpp: OrderedFloat<f64>,
    pub perspective: Perspective,
}

impl Stimulus {
    /// Key shared by the same content on different setups.
    pub fn content(&self) -> (String, String, OrderedFloat<f64>, Perspective) {
        (self.hologram.clone(), self.codec.clone(), self.bpp, self.perspective)
    }
}

/// One test condition: a stimulus at one focus setting.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Condition {
    pub stimulus: Stimulus,
    pub focus: Focus,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = &self.stimulus;
        write!(f, "{}/{}/{}/{}bpp/{}/{}", s.setup, s.hologram, s.codec, s.bpp, s.perspective, self.focus)
    }
}

/// One CSV row of the score table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub subject_id: String,
    pub setup: Setup,
    pub hologram: String,
    pub codec: String,
    pub bpp: f64,
    pub perspective: Perspective,
    pub focus: Focus,
    pub score: i64,
}

impl ScoreRecord {
    pub fn condition(&self) -> Condition {
        Condition {
            stimulus: Stimulus {
                setup: self.setup,
                hologram: self.hologram.clone(),
                codec: self.codec.clone(),
                bpp: OrderedFloat(self.bpp),
                perspective: self.perspective,
            },
            focus: self.focus,
        }
    }
}

/// Validated scores: each in 1..=5, at most one per (subject, condition).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    records: Vec<ScoreRecord>,
}

impl ScoreTable {
    pub fn new(records: Vec<ScoreRecord>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for (row, r) in records.iter().enumerate() {
            if !(1..=5).contains(&r.score) {
                return Err(StatsError::InvalidScore { row: row + 1, score: r.score });
            }
            if !(r.bpp.is_finite() && r.bpp >= 0.0) {
                return Err(StatsError::InvalidBpp { row: row + 1, bpp: r.bpp });
            }
            if !seen.insert((r.subject_id.clone(), r.condition())) {
                return Err(StatsError::Duplicate {
                    row: row + 1,
                    subject: r.subject_id.clone(),
                    condition: r.condition().to_string(),
                });
            }
        }
        Ok(ScoreTable { records })
    }

    pub fn records(&self) -> &[ScoreRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Scores per condition as (subject, score), sorted by subject.
    pub fn by_condition(&self) -> BTreeMap<Condition, Vec<(String, u8)>> {
        let mut map: BTreeMap<Condition, Vec<(String, u8)>> = BTreeMap::new();
        for r in &self.records {
            map.entry(r.condition()).or_default().push((r.subject_id.clone(), r.score as u8));
        }
        for v in map.values_mut() {
            v.sort();
        }
        map
    }

    pub fn from_reader(reader: impl io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let records = rdr.deserialize().collect::<std::result::Result<Vec<ScoreRecord>, _>>()?;
        Self::new(records)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|source| StatsError::Io { path: path.to_path_buf(), source })?;
        Self::from_reader(io::BufReader::new(file))
    }

    pub fn write_csv(&self, writer: impl io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush().map_err(|source| StatsError::Io { path: PathBuf::from("<csv>"), source })?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "subject_id,setup,hologram,codec,bpp,perspective,focus,score
s1,holographic,Ball,builtin_wavelet,0.25,center,front,3
s2,holographic,Ball,builtin_wavelet,0.25,center,front,4
s1,flat_2d,Ball,builtin_wavelet,0.25,right_corner,single,5
";

    #[test]
    fn reads_and_groups() {
        let t = ScoreTable::from_reader(CSV.as_bytes()).unwrap();
        assert_eq!(t.len(), 3);
        let groups = t.by_condition();
        assert_eq!(groups.len(), 2);
        let first = groups.values().next().unwrap();
        assert_eq!(first, &vec![("s1".to_string(), 3), ("s2".to_string(), 4)]);
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), CSV);
    }

    #[test]
    fn rejects_bad_tables() {
        let dup = format!("{CSV}s1,holographic,Ball,builtin_wavelet,0.25,center,front,2\n");
        assert!(matches!(ScoreTable::from_reader(dup.as_bytes()), Err(StatsError::Duplicate { row: 4, .. })));
        let six = CSV.replace("front,4", "front,6");
        assert!(matches!(ScoreTable::from_reader(six.as_bytes()), Err(StatsError::InvalidScore { row: 2, score: 6 })));
        let setup = CSV.replace("flat_2d", "paper");
        assert!(matches!(ScoreTable::from_reader(setup.as_bytes()), Err(StatsError::Csv(_))));
    }
}
