//! Walk-forward validation: rolling graphs, scheduled retraining and
//! per-snapshot prediction, with baselines and intransitivity computed in
//! the same causal sweep.

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::baselines::{shin_probabilities, EloState, EloWeighting, RollingBt};
use crate::error::{Error, Result};
use crate::graphs::{build_surface_graphs, node_features, DominanceLedger, GraphParams, Roster, SurfaceGraph};
use crate::ingest::{build_snapshots, impute_attributes, roster, MatchRecord, RawPlayerAttributes, Surface, Tier, Tour};
use crate::intransitivity::{weighted_intransitivity, NeighbourIndex};
use crate::magnet::{
    embed_all, match_win_probability, save_checkpoint, set_win_probability, train, LaplacianBundle, MagnetHyperparams, ModelState,
    SetSample,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Period {
    Validation,
    Test,
}

impl Period {
    pub fn as_str(self) -> &'static str {
        match self {
            Period::Validation => "validation",
            Period::Test => "test",
        }
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Period {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "validation" => Ok(Period::Validation),
            "test" => Ok(Period::Test),
            other => Err(format!("unknown period `{other}`")),
        }
    }
}

/// Inclusive date range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateRange {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateRange {
    pub fn contains(&self, d: NaiveDate) -> bool {
        d >= self.start && d <= self.end
    }
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid calendar date")
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkForwardConfig {
    pub tour: Tour,
    /// Matches before this date are ignored entirely.
    pub history_start: NaiveDate,
    pub validation: DateRange,
    pub test: DateRange,
    /// Share of accumulated history, by match count, used as training labels.
    pub train_fraction: f64,
    pub seed: u64,
    pub graph: GraphParams,
    pub model: MagnetHyperparams,
    /// When set, the model state is written here after every training run.
    pub checkpoint_dir: Option<PathBuf>,
}

impl WalkForwardConfig {
    pub fn new(tour: Tour) -> Self {
        WalkForwardConfig {
            tour,
            history_start: ymd(2014, 1, 1),
            validation: DateRange {
                start: ymd(2019, 8, 29),
                end: ymd(2022, 11, 20),
            },
            test: DateRange {
                start: ymd(2023, 1, 1),
                end: ymd(2025, 6, 8),
            },
            train_fraction: 0.15,
            seed: 42,
            graph: GraphParams::default(),
            model: MagnetHyperparams::default(),
            checkpoint_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ordered = self.history_start <= self.validation.start
            && self.validation.start <= self.validation.end
            && self.validation.end < self.test.start
            && self.test.start <= self.test.end;
        if !ordered {
            return Err(Error::Config("date ranges must be ordered and non-overlapping".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config("train_fraction must lie in (0, 1)".into()));
        }
        self.graph.validate()?;
        self.model.validate()
    }

    pub fn period_of(&self, d: NaiveDate) -> Option<Period> {
        if self.validation.contains(d) {
            Some(Period::Validation)
        } else if self.test.contains(d) {
            Some(Period::Test)
        } else {
            None
        }
    }
}

/// One predicted match. `player_a` is the lexicographically smaller id and
/// every probability is for `player_a` winning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub match_id: String,
    pub period: Period,
    pub snapshot: usize,
    pub date: NaiveDate,
    pub tour: Tour,
    pub tournament: String,
    pub tier: Tier,
    pub surface: Surface,
    pub best_of: u8,
    pub player_a: String,
    pub player_b: String,
    pub outcome: u8,
    pub model: f64,
    pub model_set: f64,
    pub elo: f64,
    pub welo: f64,
    pub bt: f64,
    pub shin: Option<f64>,
    pub odds_a: Option<f64>,
    pub odds_b: Option<f64>,
    pub intransitivity_raw: f64,
    pub evidence_weight: f64,
    pub intransitivity: f64,
    pub neighbourhood: usize,
}

impl PredictionRecord {
    pub fn odds(&self) -> Option<(f64, f64)> {
        Some((self.odds_a?, self.odds_b?))
    }
}

pub fn write_prediction_ledger<W: Write>(records: &[PredictionRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_prediction_ledger_from<R: Read>(input: R) -> Result<Vec<PredictionRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in rdr.deserialize() {
        out.push(row?);
    }
    Ok(out)
}

pub fn read_prediction_ledger(path: &Path) -> Result<Vec<PredictionRecord>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    read_prediction_ledger_from(std::fs::File::open(path)?)
}

/// Loss trace of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingRun {
    pub snapshot: usize,
    pub first_epoch: u64,
    pub losses: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct WalkForwardOutput {
    pub records: Vec<PredictionRecord>,
    pub training: Vec<TrainingRun>,
    pub state: Option<ModelState>,
    pub roster: Roster,
}

/// One set sample per scored set of each match.
pub fn set_samples(matches: &[MatchRecord], roster: &Roster) -> Vec<SetSample> {
    let mut out = Vec::new();
    for m in matches {
        let (Some(w), Some(l)) = (roster.index_of(&m.winner_id), roster.index_of(&m.loser_id)) else {
            continue;
        };
        for set in &m.sets {
            if let Some(won) = set.won_by_match_winner() {
                out.push(SetSample {
                    u: w,
                    v: l,
                    surface: m.surface,
                    label: if won { 1.0 } else { 0.0 },
                });
            }
        }
    }
    out
}

/// Graph-building prefix length: the most recent `train_fraction` of
/// `history` (at least one match when any exist) is held out as labels.
pub fn graph_prefix_len(history: usize, train_fraction: f64) -> usize {
    if history == 0 {
        return 0;
    }
    let train = ((history as f64 * train_fraction).round() as usize).clamp(1, history);
    history - train
}

struct SnapshotView {
    at: NaiveDate,
    features: DMatrix<f64>,
    bundle: LaplacianBundle,
    samples: Vec<SetSample>,
    full_graphs: [SurfaceGraph; 3],
    full_index: NeighbourIndex,
    full_ledger: DominanceLedger,
}

/// Runs the walk-forward sweep for one tour over `records`.
///
/// Every input to a prediction at a snapshot dated `τ` comes from matches
/// dated strictly before `τ`.
pub fn walk_forward_run(config: &WalkForwardConfig, records: &[MatchRecord], attributes: &[RawPlayerAttributes]) -> Result<WalkForwardOutput> {
    config.validate()?;
    let mut matches: Vec<MatchRecord> = records
        .iter()
        .filter(|m| m.tour == config.tour && m.date >= config.history_start && Tier::RETAINED.contains(&m.tier))
        .cloned()
        .collect();
    crate::ingest::sort_records(&mut matches);
    let players = roster(&matches, config.tour);
    let attrs = impute_attributes(attributes, &players)?;
    let roster = Roster::new(&players);
    let snapshots = build_snapshots(&matches, config.tour);

    let mut elo = EloState::new(EloWeighting::Standard);
    let mut welo = EloState::new(EloWeighting::GamesShare);
    let mut bt = RollingBt::new(&matches);
    let mut admitted = 0usize;

    let mut state: Option<ModelState> = None;
    let mut embeddings: Option<[DMatrix<f64>; 3]> = None;
    let mut view: Option<SnapshotView> = None;
    let mut training = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0usize;

    for snap in &snapshots {
        let Some(period) = config.period_of(snap.timestamp) else {
            continue;
        };
        let at = snap.timestamp;
        // admit every match dated before the snapshot
        while admitted < matches.len() && matches[admitted].date < at {
            elo.update(&matches[admitted]);
            welo.update(&matches[admitted]);
            admitted += 1;
        }
        let history = &matches[..admitted];

        if view.as_ref().map(|v| v.at) != Some(at) {
            let cut = graph_prefix_len(history.len(), config.train_fraction);
            let model_ledger = DominanceLedger::from_matches(&roster, &history[..cut]);
            let graphs = build_surface_graphs(snap.index, at, roster.len(), &model_ledger, &config.graph);
            let features = node_features(&graphs, &attrs)?;
            let bundle = LaplacianBundle::from_graphs(&graphs, config.model.q);
            let samples = set_samples(&history[cut..], &roster);
            let full_ledger = DominanceLedger::from_matches(&roster, history);
            let full_graphs = build_surface_graphs(snap.index, at, roster.len(), &full_ledger, &config.graph);
            let full_index = NeighbourIndex::new(&full_graphs[0]);
            view = Some(SnapshotView {
                at,
                features,
                bundle,
                samples,
                full_graphs,
                full_index,
                full_ledger,
            });
            embeddings = None;
        }
        let v = view.as_ref().expect("view built above");

        let epochs = if counter == 0 {
            if history.is_empty() {
                return Err(Error::EmptyHistory);
            }
            state = Some(ModelState::new(v.features.ncols(), &config.model, config.seed));
            config.model.initial_epochs
        } else if counter % config.model.retrain_interval_snapshots == 0 {
            config.model.retrain_epochs
        } else {
            0
        };
        let st = state.as_mut().expect("initialised at the first prediction snapshot");
        if epochs > 0 {
            if v.samples.is_empty() {
                return Err(Error::NoTrainingSamples);
            }
            let first_epoch = st.epochs_done;
            let losses = train(st, &v.bundle, &v.features, &v.samples, &config.model, epochs)?;
            training.push(TrainingRun {
                snapshot: snap.index,
                first_epoch,
                losses,
            });
            if let Some(dir) = &config.checkpoint_dir {
                let path = dir.join(format!("{}_snapshot_{:05}.json", config.tour, snap.index));
                save_checkpoint(&path, st, &config.model)?;
            }
            embeddings = None;
        }
        if embeddings.is_none() {
            embeddings = Some(embed_all(&v.bundle, &v.features, st, &config.model)?);
        }
        let emb = embeddings.as_ref().expect("computed above");
        let bt_fit = bt.fit_for(at);

        for m in &snap.matches {
            let a_is_winner = m.winner_id <= m.loser_id;
            let (a, b) = if a_is_winner { (&m.winner_id, &m.loser_id) } else { (&m.loser_id, &m.winner_id) };
            let (ia, ib) = (
                roster.index_of(a).expect("roster covers all matches"),
                roster.index_of(b).expect("roster covers all matches"),
            );
            let (odds_a, odds_b) = if a_is_winner { (m.odds_winner, m.odds_loser) } else { (m.odds_loser, m.odds_winner) };
            let p_set = set_win_probability(&emb[m.surface.index()], ia, ib, st);
            let score = weighted_intransitivity(
                &m.match_id,
                ia,
                ib,
                m.surface,
                &v.full_graphs,
                &v.full_index,
                &v.full_ledger,
                at,
                &config.graph,
            );
            let shin = match (odds_a, odds_b) {
                (Some(oa), Some(ob)) if oa > 1.0 && ob > 1.0 => Some(shin_probabilities(oa, ob).probs[0]),
                _ => None,
            };
            out.push(PredictionRecord {
                match_id: m.match_id.clone(),
                period,
                snapshot: snap.index,
                date: m.date,
                tour: m.tour,
                tournament: m.tournament.clone(),
                tier: m.tier,
                surface: m.surface,
                best_of: m.best_of,
                player_a: a.clone(),
                player_b: b.clone(),
                outcome: u8::from(a_is_winner),
                model: match_win_probability(p_set, m.best_of)?,
                model_set: p_set,
                elo: elo.predict(a, b),
                welo: welo.predict(a, b),
                bt: bt_fit.predict(a, b),
                shin,
                odds_a,
                odds_b,
                intransitivity_raw: score.raw,
                evidence_weight: score.evidence_weight,
                intransitivity: score.weighted,
                neighbourhood: score.neighbourhood,
            });
        }
        counter += 1;
    }
    Ok(WalkForwardOutput {
        records: out,
        training,
        state,
        roster,
    })
}

/// A tuning trial scored on both tours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub brier_men: f64,
    pub brier_women: f64,
    #[serde(default)]
    pub params: String,
}

/// Trials not dominated under joint minimisation of both Brier scores, in
/// input order.
pub fn pareto_front(trials: &[Trial]) -> Vec<Trial> {
    trials
        .iter()
        .filter(|t| {
            !trials.iter().any(|o| {
                o.brier_men <= t.brier_men
                    && o.brier_women <= t.brier_women
                    && (o.brier_men < t.brier_men || o.brier_women < t.brier_women)
            })
        })
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trial(m: f64, w: f64) -> Trial {
        Trial {
            brier_men: m,
            brier_women: w,
            params: String::new(),
        }
    }

    #[test]
    fn front_drops_dominated() {
        let t = [trial(0.21, 0.22), trial(0.22, 0.21), trial(0.23, 0.23)];
        assert_eq!(pareto_front(&t), t[..2].to_vec());
        assert_eq!(pareto_front(&t[2..]), t[2..].to_vec());
    }

    #[test]
    fn duplicates_both_survive() {
        let t = [trial(0.2, 0.2), trial(0.2, 0.2)];
        assert_eq!(pareto_front(&t).len(), 2);
    }

    #[test]
    fn prefix_split() {
        assert_eq!(graph_prefix_len(0, 0.15), 0);
        assert_eq!(graph_prefix_len(1, 0.15), 0);
        assert_eq!(graph_prefix_len(100, 0.15), 85);
        assert_eq!(graph_prefix_len(7, 0.15), 6);
    }

    #[test]
    fn default_ranges_are_valid() {
        let c = WalkForwardConfig::new(Tour::Women);
        c.validate().unwrap();
        assert_eq!(c.period_of(ymd(2020, 1, 1)), Some(Period::Validation));
        assert_eq!(c.period_of(ymd(2022, 12, 1)), None);
        assert_eq!(c.period_of(ymd(2025, 6, 8)), Some(Period::Test));
    }
}
