//! Scoring, calibration, intransitivity-stratified comparison, cluster
//! bootstrap intervals and rank-trend tests over a prediction ledger.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::ingest::{Surface, Tour};
use crate::pipeline::PredictionRecord;

/// Probability column of the prediction ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Model,
    Elo,
    Welo,
    Bt,
    Shin,
}

impl Source {
    pub const ALL: [Source; 5] = [Source::Model, Source::Elo, Source::Welo, Source::Bt, Source::Shin];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::Model => "model",
            Source::Elo => "elo",
            Source::Welo => "welo",
            Source::Bt => "bt",
            Source::Shin => "shin",
        }
    }

    pub fn get(self, r: &PredictionRecord) -> Option<f64> {
        match self {
            Source::Model => Some(r.model),
            Source::Elo => Some(r.elo),
            Source::Welo => Some(r.welo),
            Source::Bt => Some(r.bt),
            Source::Shin => r.shin,
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Source::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown probability source `{s}`"))
    }
}

/// `(probability, outcome)` pairs for rows where `source` is available.
pub fn column<'a, I>(records: I, source: Source) -> Vec<(f64, u8)>
where
    I: IntoIterator<Item = &'a PredictionRecord>,
{
    records
        .into_iter()
        .filter_map(|r| source.get(r).map(|p| (p, r.outcome)))
        .collect()
}

/// Share of rows where `p > 0.5` agrees with the outcome; `p = 0.5` predicts
/// a loss.
pub fn accuracy(rows: &[(f64, u8)]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptySubset);
    }
    let hits = rows.iter().filter(|(p, o)| u8::from(*p > 0.5) == *o).count();
    Ok(hits as f64 / rows.len() as f64)
}

pub fn brier(rows: &[(f64, u8)]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptySubset);
    }
    Ok(rows.iter().map(|(p, o)| (p - *o as f64).powi(2)).sum::<f64>() / rows.len() as f64)
}

/// Bin edges from recursive halving towards both ends of `[0, 1]`, with the
/// central half split into quarters-of-a-half around 0.5.
pub const CALIBRATION_EDGES: [f64; 13] = [
    0.0,
    1.0 / 32.0,
    1.0 / 16.0,
    1.0 / 8.0,
    1.0 / 4.0,
    3.0 / 8.0,
    1.0 / 2.0,
    5.0 / 8.0,
    3.0 / 4.0,
    7.0 / 8.0,
    15.0 / 16.0,
    31.0 / 32.0,
    1.0,
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_predicted: Option<f64>,
    pub observed: Option<f64>,
}

/// Every bin is reported, empty ones with `count = 0`. Bins are half-open
/// except the last, which includes 1.
pub fn calibration_curve(rows: &[(f64, u8)]) -> Vec<CalibrationBin> {
    let nb = CALIBRATION_EDGES.len() - 1;
    let mut sums = vec![(0usize, 0.0, 0.0); nb];
    for &(p, o) in rows {
        let b = CALIBRATION_EDGES[1..].iter().position(|&hi| p < hi).unwrap_or(nb - 1);
        sums[b].0 += 1;
        sums[b].1 += p;
        sums[b].2 += o as f64;
    }
    sums.into_iter()
        .enumerate()
        .map(|(b, (count, sp, so))| CalibrationBin {
            lo: CALIBRATION_EDGES[b],
            hi: CALIBRATION_EDGES[b + 1],
            count,
            mean_predicted: (count > 0).then(|| sp / count as f64),
            observed: (count > 0).then(|| so / count as f64),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessBin {
    pub bin: usize,
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub brier_model: f64,
    pub brier_shin: f64,
    pub brier_welo: f64,
    pub model_minus_shin: f64,
    pub model_minus_welo: f64,
}

/// Bin 0 holds pairs without head-to-head evidence; the remaining rows are
/// split into tertiles of weighted intransitivity, ties kept in ledger
/// order. Rows without bookmaker probabilities are left out.
pub fn robustness_bins(records: &[PredictionRecord]) -> Result<Vec<RobustnessBin>> {
    let rows: Vec<&PredictionRecord> = records.iter().filter(|r| r.shin.is_some()).collect();
    let zero: Vec<&PredictionRecord> = rows.iter().copied().filter(|r| r.intransitivity == 0.0).collect();
    let mut rest: Vec<&PredictionRecord> = rows.iter().copied().filter(|r| r.intransitivity != 0.0).collect();
    if rest.len() < 3 {
        return Err(Error::TooFew {
            needed: 3,
            got: rest.len(),
        });
    }
    rest.sort_by(|a, b| a.intransitivity.total_cmp(&b.intransitivity));
    let n = rest.len();
    let mut groups = vec![zero];
    for k in 0..3 {
        groups.push(rest[k * n / 3..(k + 1) * n / 3].to_vec());
    }
    let mut out = Vec::new();
    for (bin, g) in groups.into_iter().enumerate() {
        let score = |s: Source| brier(&column(g.iter().copied(), s)).unwrap_or(f64::NAN);
        let (bm, bs, bw) = (score(Source::Model), score(Source::Shin), score(Source::Welo));
        let lo = g.first().map_or(0.0, |r| r.intransitivity);
        let hi = g.last().map_or(0.0, |r| r.intransitivity);
        out.push(RobustnessBin {
            bin,
            lo,
            hi,
            n: g.len(),
            brier_model: bm,
            brier_shin: bs,
            brier_welo: bw,
            model_minus_shin: bm - bs,
            model_minus_welo: bm - bw,
        });
    }
    Ok(out)
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapCi {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Matches drawn by one player resample: every match involving at least one
/// drawn player, each included once.
pub fn cluster_members<'a>(records: &'a [PredictionRecord], drawn: &BTreeSet<&str>) -> Vec<&'a PredictionRecord> {
    records
        .iter()
        .filter(|r| drawn.contains(r.player_a.as_str()) || drawn.contains(r.player_b.as_str()))
        .collect()
}

/// Percentile interval from resampling players with replacement. Resample
/// `i` draws from a generator seeded with `seed` on stream `i`.
pub fn cluster_bootstrap_ci<F>(records: &[PredictionRecord], statistic: F, resamples: usize, seed: u64) -> Result<BootstrapCi>
where
    F: Fn(&[&PredictionRecord]) -> f64,
{
    if records.is_empty() {
        return Err(Error::EmptySubset);
    }
    let all: Vec<&PredictionRecord> = records.iter().collect();
    let point = statistic(&all);
    if resamples == 0 {
        return Err(Error::TooFew { needed: 1, got: 0 });
    }
    let players: Vec<&str> = records
        .iter()
        .flat_map(|r| [r.player_a.as_str(), r.player_b.as_str()])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut values = Vec::with_capacity(resamples);
    for i in 0..resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let drawn: BTreeSet<&str> = (0..players.len()).map(|_| players[rng.random_range(0..players.len())]).collect();
        values.push(statistic(&cluster_members(records, &drawn)));
    }
    values.sort_by(f64::total_cmp);
    Ok(BootstrapCi {
        point,
        lo: percentile(&values, 0.025),
        hi: percentile(&values, 0.975),
    })
}

/// Average ranks (1-based) with ties sharing their mean rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spearman {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Spearman correlation with a two-sided p-value from the t approximation.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<Spearman> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("{} vs {} values", x.len(), y.len())));
    }
    let n = x.len();
    if n < 10 {
        return Err(Error::TooFew { needed: 10, got: n });
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let mean = (n as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (a, b) = (rx[i] - mean, ry[i] - mean);
        sxy += a * b;
        sxx += a * a;
        syy += b * b;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::AllTied);
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p_value = if rho.abs() == 1.0 {
        0.0
    } else {
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Ok(Spearman { rho, p_value, n })
}

/// Per-match Brier gap `(p_model − o)² − (p_shin − o)²` against weighted
/// intransitivity, over rows with bookmaker probabilities.
pub fn intransitivity_trend(records: &[PredictionRecord]) -> Result<Spearman> {
    let rows: Vec<&PredictionRecord> = records.iter().filter(|r| r.shin.is_some()).collect();
    let x: Vec<f64> = rows.iter().map(|r| r.intransitivity).collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| {
            let o = r.outcome as f64;
            (r.model - o).powi(2) - (r.shin.expect("filtered") - o).powi(2)
        })
        .collect();
    spearman(&x, &y)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub tour: String,
    pub surface: String,
    pub source: Source,
    pub count: usize,
    pub accuracy: f64,
    pub brier: f64,
}

/// Accuracy and Brier per tour (and both) by surface (and all), for every
/// probability source. Empty cells are omitted.
pub fn metrics_table(records: &[PredictionRecord]) -> Vec<MetricsRow> {
    let tours: [(&str, Option<Tour>); 3] = [("men", Some(Tour::Men)), ("women", Some(Tour::Women)), ("both", None)];
    let surfaces: [(&str, Option<Surface>); 4] = [
        ("hard", Some(Surface::Hard)),
        ("clay", Some(Surface::Clay)),
        ("grass", Some(Surface::Grass)),
        ("all", None),
    ];
    let mut out = Vec::new();
    for (tname, tour) in tours {
        for (sname, surface) in surfaces {
            let subset = records
                .iter()
                .filter(|r| tour.is_none_or(|t| r.tour == t) && surface.is_none_or(|s| r.surface == s));
            for source in Source::ALL {
                let rows = column(subset.clone(), source);
                if let (Ok(accuracy), Ok(b)) = (accuracy(&rows), brier(&rows)) {
                    out.push(MetricsRow {
                        tour: tname.to_string(),
                        surface: sname.to_string(),
                        source,
                        count: rows.len(),
                        accuracy,
                        brier: b,
                    });
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntransitivitySummary {
    pub tour: String,
    pub surface: String,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub max: f64,
}

/// Weighted intransitivity over matches with head-to-head evidence
/// (`I* > 0`), per tour and surface plus pooled rows.
pub fn intransitivity_summary(records: &[PredictionRecord]) -> Vec<IntransitivitySummary> {
    let tours: [(&str, Option<Tour>); 3] = [("men", Some(Tour::Men)), ("women", Some(Tour::Women)), ("both", None)];
    let surfaces: [(&str, Option<Surface>); 4] = [
        ("hard", Some(Surface::Hard)),
        ("clay", Some(Surface::Clay)),
        ("grass", Some(Surface::Grass)),
        ("all", None),
    ];
    let mut out = Vec::new();
    for (tname, tour) in tours {
        for (sname, surface) in surfaces {
            let mut v: Vec<f64> = records
                .iter()
                .filter(|r| r.intransitivity > 0.0 && tour.is_none_or(|t| r.tour == t) && surface.is_none_or(|s| r.surface == s))
                .map(|r| r.intransitivity)
                .collect();
            if v.is_empty() {
                continue;
            }
            v.sort_by(f64::total_cmp);
            out.push(IntransitivitySummary {
                tour: tname.to_string(),
                surface: sname.to_string(),
                n: v.len(),
                mean: v.iter().sum::<f64>() / v.len() as f64,
                median: percentile(&v, 0.5),
                max: v[v.len() - 1],
            });
        }
    }
    out
}

pub fn write_csv<T: Serialize, W: Write>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
