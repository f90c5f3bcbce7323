//! Temporal per-surface dominance graphs.
//!
//! Every head-to-head result is kept in a [`DominanceLedger`] with its date,
//! surface, tier and games share. At a snapshot timestamp the ledger is
//! folded into a decayed, surface- and prestige-weighted dominance score per
//! pair, which fixes the direction and weight of that pair's edge in each of
//! the three surface graphs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use chrono::{Datelike, NaiveDate};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Handedness, MatchRecord, PlayerAttributes, Surface, Tier};

const DAYS_PER_YEAR: f64 = 365.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TierPrestige {
    pub grand_slam: f64,
    pub finals: f64,
    pub t1000: f64,
    pub t500: f64,
}

impl Default for TierPrestige {
    fn default() -> Self {
        TierPrestige {
            grand_slam: 1.0,
            finals: 0.94,
            t1000: 0.85,
            t500: 0.69,
        }
    }
}

impl TierPrestige {
    /// Tiers below 500 never survive filtering; they borrow the 500 weight.
    pub fn weight(&self, tier: Tier) -> f64 {
        match tier {
            Tier::GrandSlam => self.grand_slam,
            Tier::Finals => self.finals,
            Tier::T1000 => self.t1000,
            Tier::T500 | Tier::T250 | Tier::Other => self.t500,
        }
    }
}

/// Graph construction parameters.
///
/// `surface_transfer[target][source]` is the weight a match on `source`
/// carries in the graph for `target`, indexed by [`Surface::index`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphParams {
    /// Per-year exponential decay rate.
    pub lambda_decay: f64,
    pub surface_transfer: [[f64; 3]; 3],
    pub tier_prestige: TierPrestige,
    /// Treatment of unlinked pairs inside an intransitivity neighbourhood.
    pub unobserved_pairs: crate::intransitivity::UnobservedPairs,
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams {
            lambda_decay: 0.38,
            surface_transfer: [
                // hard    clay  grass   (source)
                [1.0, 0.01, 0.37], // hard target
                [0.07, 1.0, 0.09], // clay target
                [0.45, 0.05, 1.0], // grass target
            ],
            tier_prestige: TierPrestige::default(),
            unobserved_pairs: Default::default(),
        }
    }
}

impl GraphParams {
    pub fn transfer(&self, target: Surface, source: Surface) -> f64 {
        self.surface_transfer[target.index()][source.index()]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_decay > 0.0 && self.lambda_decay.is_finite()) {
            return Err(Error::Config("lambda_decay must be > 0".into()));
        }
        for (s, row) in self.surface_transfer.iter().enumerate() {
            for (t, a) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(a) {
                    return Err(Error::Config(format!("surface transfer [{s}][{t}] outside [0,1]")));
                }
                if s == t && *a != 1.0 {
                    return Err(Error::Config("surface transfer diagonal must be 1".into()));
                }
            }
        }
        let p = &self.tier_prestige;
        if [p.grand_slam, p.finals, p.t1000, p.t500].iter().any(|b| !(*b > 0.0)) {
            return Err(Error::Config("tier prestige weights must be > 0".into()));
        }
        Ok(())
    }
}

/// `exp(-λ Δ)` with Δ the gap in years (days / 365.25).
pub fn decay_coefficient(snapshot: NaiveDate, played: NaiveDate, lambda: f64) -> Result<f64> {
    if played > snapshot {
        return Err(Error::FutureMatch {
            match_date: played,
            snapshot_date: snapshot,
        });
    }
    let years = (snapshot - played).num_days() as f64 / DAYS_PER_YEAR;
    Ok((-lambda * years).exp())
}

/// Fixed, sorted player set of one tour. Node `i` is `ids[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Roster {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl Roster {
    pub fn new(players: &BTreeSet<String>) -> Self {
        let ids: Vec<String> = players.iter().cloned().collect();
        let index = ids.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
        Roster { ids, index }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

/// One stored head-to-head result, seen from the lower-indexed player.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry {
    pub date: NaiveDate,
    pub surface: Surface,
    pub tier: Tier,
    /// Games share of the lower-indexed player of the pair.
    pub share_low: f64,
}

/// Decayed dominance of one player over another with the total weight
/// behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dominance {
    pub score: f64,
    pub evidence: f64,
}

/// Raw per-pair match history; scores are re-evaluated at each snapshot.
#[derive(Debug, Clone, Default)]
pub struct DominanceLedger {
    pairs: BTreeMap<(usize, usize), Vec<HistoryEntry>>,
}

impl DominanceLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a ledger from every record whose players are both on the roster.
    pub fn from_matches<'a, I>(roster: &Roster, matches: I) -> Self
    where
        I: IntoIterator<Item = &'a MatchRecord>,
    {
        let mut ledger = Self::new();
        for m in matches {
            ledger.add(roster, m);
        }
        ledger
    }

    pub fn add(&mut self, roster: &Roster, m: &MatchRecord) -> bool {
        let (Some(w), Some(l)) = (roster.index_of(&m.winner_id), roster.index_of(&m.loser_id)) else {
            return false;
        };
        let share_w = m.winner_games_share();
        let (key, share_low) = if w < l { ((w, l), share_w) } else { ((l, w), 1.0 - share_w) };
        self.pairs.entry(key).or_default().push(HistoryEntry {
            date: m.date,
            surface: m.surface,
            tier: m.tier,
            share_low,
        });
        true
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn history(&self, u: usize, v: usize) -> &[HistoryEntry] {
        let key = if u < v { (u, v) } else { (v, u) };
        self.pairs.get(&key).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Pairs `(low, high)` with at least one stored match.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs.keys().copied()
    }

    /// Dominance of `u` over `v` on `surface` using matches strictly before `at`.
    pub fn dominance(&self, u: usize, v: usize, surface: Surface, at: NaiveDate, params: &GraphParams) -> Option<Dominance> {
        dominance_before(self.history(u, v), u < v, surface, at, params)
    }
}

/// Weighted mean games share for one pair.
///
/// `from_low` selects the perspective: true for the lower-indexed player.
/// Entries dated after `at` are ignored. Returns `None` when no match up to
/// `at` carries positive weight.
pub fn dominance_score(
    entries: &[HistoryEntry],
    from_low: bool,
    surface: Surface,
    at: NaiveDate,
    params: &GraphParams,
) -> Option<Dominance> {
    weighted_share(entries.iter().filter(|e| e.date <= at), from_low, surface, at, params)
}

/// As [`dominance_score`] but only over matches strictly before `at`, which
/// is what a snapshot dated `at` may see.
pub fn dominance_before(
    entries: &[HistoryEntry],
    from_low: bool,
    surface: Surface,
    at: NaiveDate,
    params: &GraphParams,
) -> Option<Dominance> {
    weighted_share(entries.iter().filter(|e| e.date < at), from_low, surface, at, params)
}

fn weighted_share<'a>(
    entries: impl Iterator<Item = &'a HistoryEntry>,
    from_low: bool,
    surface: Surface,
    at: NaiveDate,
    params: &GraphParams,
) -> Option<Dominance> {
    let mut num = 0.0;
    let mut den = 0.0;
    for e in entries {
        let phi = decay_coefficient(at, e.date, params.lambda_decay).expect("filtered to past matches");
        let w = params.transfer(surface, e.surface) * params.tier_prestige.weight(e.tier) * phi;
        let g = if from_low { e.share_low } else { 1.0 - e.share_low };
        num += w * g;
        den += w;
    }
    (den > 0.0).then(|| Dominance {
        score: num / den,
        evidence: den,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceGraph {
    pub snapshot: usize,
    pub surface: Surface,
    pub n_nodes: usize,
    /// Sorted by unordered pair; at most one edge per pair.
    pub edges: Vec<Edge>,
}

impl SurfaceGraph {
    pub fn in_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_nodes];
        for e in &self.edges {
            d[e.to] += 1;
        }
        d
    }

    pub fn out_degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_nodes];
        for e in &self.edges {
            d[e.from] += 1;
        }
        d
    }

    /// Weight of the edge between `u` and `v` seen from `u`: `w` if `u`
    /// dominates, `1 - w` if `v` does, `None` without an edge.
    pub fn dominance_of(&self, u: usize, v: usize) -> Option<f64> {
        let key = (u.min(v), u.max(v));
        self.edges
            .binary_search_by(|e| (e.from.min(e.to), e.from.max(e.to)).cmp(&key))
            .ok()
            .map(|i| {
                let e = &self.edges[i];
                if e.from == u {
                    e.weight
                } else {
                    1.0 - e.weight
                }
            })
    }
}

/// Builds the hard, clay and grass graphs for a snapshot at `at`.
///
/// A pair is in the shared edge set when it has history before `at` and its
/// score differs from exactly one half on every surface; the edge points from
/// the dominant player with weight equal to its score.
pub fn build_surface_graphs(
    snapshot: usize,
    at: NaiveDate,
    n_nodes: usize,
    ledger: &DominanceLedger,
    params: &GraphParams,
) -> [SurfaceGraph; 3] {
    let mut graphs = Surface::ALL.map(|surface| SurfaceGraph {
        snapshot,
        surface,
        n_nodes,
        edges: Vec::new(),
    });
    for (lo, hi) in ledger.pairs() {
        let entries = ledger.history(lo, hi);
        let scores = Surface::ALL.map(|s| dominance_before(entries, true, s, at, params));
        if scores.iter().any(|d| d.map_or(true, |d| d.score == 0.5)) {
            continue;
        }
        for (g, d) in graphs.iter_mut().zip(scores) {
            let d = d.expect("checked above").score;
            g.edges.push(if d > 0.5 {
                Edge {
                    from: lo,
                    to: hi,
                    weight: d,
                }
            } else {
                Edge {
                    from: hi,
                    to: lo,
                    weight: 1.0 - d,
                }
            });
        }
    }
    graphs
}

/// Number of node feature columns produced by [`node_features`].
pub const FEATURE_DIM: usize = 11;

pub const FEATURE_NAMES: [&str; FEATURE_DIM] = [
    "height_cm",
    "weight_kg",
    "birth_year",
    "left_handed",
    "right_handed",
    "in_hard",
    "out_hard",
    "in_clay",
    "out_clay",
    "in_grass",
    "out_grass",
];

/// Static attributes plus per-surface in/out degree, each column scaled to
/// unit Euclidean norm (all-zero columns stay zero).
///
/// `attributes` must be aligned with the roster order.
pub fn node_features(graphs: &[SurfaceGraph; 3], attributes: &[PlayerAttributes]) -> Result<DMatrix<f64>> {
    let n = graphs[0].n_nodes;
    if attributes.len() != n {
        return Err(Error::Shape(format!("{} attribute rows for {n} nodes", attributes.len())));
    }
    let mut x = DMatrix::<f64>::zeros(n, FEATURE_DIM);
    for (i, a) in attributes.iter().enumerate() {
        x[(i, 0)] = a.height_cm;
        x[(i, 1)] = a.weight_kg;
        x[(i, 2)] = a.birth_date.year() as f64 + a.birth_date.ordinal0() as f64 / DAYS_PER_YEAR;
        let left = a.handedness == Handedness::Left;
        x[(i, 3)] = if left { 1.0 } else { 0.0 };
        x[(i, 4)] = if left { 0.0 } else { 1.0 };
    }
    for (s, g) in graphs.iter().enumerate() {
        for (i, d) in g.in_degrees().into_iter().enumerate() {
            x[(i, 5 + 2 * s)] = d as f64;
        }
        for (i, d) in g.out_degrees().into_iter().enumerate() {
            x[(i, 6 + 2 * s)] = d as f64;
        }
    }
    for mut col in x.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    Ok(x)
}

/// Edge list dump: `u,v,surface,weight` with player ids.
pub fn write_edge_dump<W: Write>(graphs: &[SurfaceGraph; 3], roster: &Roster, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["u", "v", "surface", "weight"])?;
    for g in graphs {
        for e in &g.edges {
            w.write_record([roster.id(e.from), roster.id(e.to), g.surface.as_str(), &e.weight.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_feature_dump<W: Write>(features: &DMatrix<f64>, roster: &Roster, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["player_id"];
    header.extend(FEATURE_NAMES);
    w.write_record(&header)?;
    for i in 0..features.nrows() {
        let mut row = vec![roster.id(i).to_string()];
        row.extend(features.row(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
