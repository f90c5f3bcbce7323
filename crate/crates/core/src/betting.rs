//! Kelly and unit staking against bookmaker odds, with an intransitivity
//! eligibility threshold, Sharpe ratios and a random-bet significance test.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Source;
use crate::pipeline::PredictionRecord;

pub const THRESHOLD_STEP: f64 = 0.05;

/// Optimal bankroll fraction for decimal odds `odds`, floored at zero.
pub fn kelly_fraction(p: f64, odds: f64) -> f64 {
    ((p * odds - 1.0) / (odds - 1.0)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Staking {
    Kelly,
    Unit,
}

impl fmt::Display for Staking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Staking::Kelly => "kelly",
            Staking::Unit => "unit",
        })
    }
}

impl FromStr for Staking {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kelly" => Ok(Staking::Kelly),
            "unit" => Ok(Staking::Unit),
            other => Err(format!("unknown staking rule `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Strategy {
    pub staking: Staking,
    /// Minimum weighted intransitivity for a match to be eligible.
    pub gamma: Option<f64>,
    pub source: Source,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetRecord {
    pub match_id: String,
    pub date: NaiveDate,
    pub side: Side,
    pub stake: f64,
    pub odds: f64,
    pub probability: f64,
    pub intransitivity: f64,
    pub won: bool,
    pub payout: f64,
    pub profit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub bets: Vec<BetRecord>,
    pub staked: f64,
    pub returned: f64,
    pub profit: f64,
    /// Profit over total stake; `None` without any stake.
    pub roi: Option<f64>,
    pub skipped_no_odds: usize,
}

fn settle(stake: f64, odds: f64, won: bool) -> (f64, f64) {
    if won {
        (stake * odds, stake * (odds - 1.0))
    } else {
        (0.0, -stake)
    }
}

/// Totals are accumulated in a canonical bet order, so they do not depend on
/// the order of the ledger.
fn summarise(bets: Vec<BetRecord>, skipped_no_odds: usize) -> Simulation {
    let mut order: Vec<&BetRecord> = bets.iter().collect();
    order.sort_by(|a, b| {
        a.match_id
            .cmp(&b.match_id)
            .then(a.date.cmp(&b.date))
            .then(a.stake.total_cmp(&b.stake))
            .then(a.odds.total_cmp(&b.odds))
            .then(a.won.cmp(&b.won))
    });
    let staked: f64 = order.iter().map(|b| b.stake).sum();
    let returned: f64 = order.iter().map(|b| b.payout).sum();
    let profit: f64 = order.iter().map(|b| b.profit).sum();
    Simulation {
        roi: (staked > 0.0).then(|| profit / staked),
        bets,
        staked,
        returned,
        profit,
        skipped_no_odds,
    }
}

/// The bet a strategy places on one match, if any: `(side, stake, odds,
/// probability of that side)`.
fn choose(p_a: f64, odds_a: f64, odds_b: f64, staking: Staking) -> Option<(Side, f64, f64, f64)> {
    match staking {
        Staking::Unit => {
            if p_a > 0.5 {
                Some((Side::A, 1.0, odds_a, p_a))
            } else {
                Some((Side::B, 1.0, odds_b, 1.0 - p_a))
            }
        }
        Staking::Kelly => {
            let fa = kelly_fraction(p_a, odds_a);
            let fb = kelly_fraction(1.0 - p_a, odds_b);
            if fa <= 0.0 && fb <= 0.0 {
                None
            } else if fa >= fb {
                Some((Side::A, fa, odds_a, p_a))
            } else {
                Some((Side::B, fb, odds_b, 1.0 - p_a))
            }
        }
    }
}

/// Bankroll resets to 1 before every bet, so Kelly stakes are plain
/// fractions and bet order does not matter.
pub fn simulate(records: &[PredictionRecord], strategy: &Strategy) -> Simulation {
    let mut bets = Vec::new();
    let mut skipped = 0;
    for r in records {
        if strategy.gamma.is_some_and(|g| r.intransitivity < g) {
            continue;
        }
        let Some(p_a) = strategy.source.get(r) else {
            continue;
        };
        let Some((oa, ob)) = r.odds() else {
            skipped += 1;
            continue;
        };
        if let Some((side, stake, odds, probability)) = choose(p_a, oa, ob, strategy.staking) {
            let won = (side == Side::A) == (r.outcome == 1);
            let (payout, profit) = settle(stake, odds, won);
            bets.push(BetRecord {
                match_id: r.match_id.clone(),
                date: r.date,
                side,
                stake,
                odds,
                probability,
                intransitivity: r.intransitivity,
                won,
                payout,
                profit,
            });
        }
    }
    summarise(bets, skipped)
}

/// Profit summed per calendar day with at least one bet.
pub fn daily_profits(bets: &[BetRecord]) -> Vec<(NaiveDate, f64)> {
    let mut days: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    for b in bets {
        *days.entry(b.date).or_default() += b.profit;
    }
    days.into_iter().collect()
}

/// Annualised Sharpe ratio of daily profits; `None` with fewer than two
/// days or zero dispersion.
pub fn sharpe(daily: &[f64]) -> Option<f64> {
    if daily.len() < 2 {
        return None;
    }
    let n = daily.len() as f64;
    let mean = daily.iter().sum::<f64>() / n;
    let var = daily.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    (sd > 0.0).then(|| mean / sd * 365.25f64.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub gamma: f64,
    pub kelly_bets: usize,
    pub kelly_roi: f64,
    pub unit_bets: usize,
    pub unit_roi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSearch {
    pub best: Option<GridPoint>,
    pub grid: Vec<GridPoint>,
}

/// Scans `γ = 0, 0.05, …` up to the largest weighted intransitivity and
/// keeps the point with the highest mean of Kelly and unit ROI; ties go to
/// the smaller `γ`. Points where either rule places no bet are reported but
/// never selected.
pub fn threshold_search(records: &[PredictionRecord], source: Source) -> ThresholdSearch {
    let max = records.iter().map(|r| r.intransitivity).fold(0.0, f64::max);
    let steps = (max / THRESHOLD_STEP).ceil() as usize;
    let mut grid = Vec::with_capacity(steps + 1);
    let mut best: Option<GridPoint> = None;
    for k in 0..=steps {
        let gamma = k as f64 * THRESHOLD_STEP;
        let run = |staking| {
            simulate(
                records,
                &Strategy {
                    staking,
                    gamma: Some(gamma),
                    source,
                },
            )
        };
        let (kelly, unit) = (run(Staking::Kelly), run(Staking::Unit));
        let point = GridPoint {
            gamma,
            kelly_bets: kelly.bets.len(),
            kelly_roi: kelly.roi.unwrap_or(f64::NAN),
            unit_bets: unit.bets.len(),
            unit_roi: unit.roi.unwrap_or(f64::NAN),
        };
        grid.push(point);
        if let (Some(kr), Some(ur)) = (kelly.roi, unit.roi) {
            let score = 0.5 * (kr + ur);
            if best.is_none_or(|b| score > 0.5 * (b.kelly_roi + b.unit_roi)) {
                best = Some(point);
            }
        }
    }
    ThresholdSearch { best, grid }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Significance {
    pub observed_roi: f64,
    pub trials: usize,
    pub p_value: f64,
    pub staking: Staking,
}

/// Random-bet test: each trial places as many bets as the strategy did, on
/// uniformly drawn matches and sides from the matches with odds. Unit trials
/// stake 1; Kelly trials stake the Kelly fraction implied by the model's
/// probability for the drawn side, drawing only among match sides where that
/// fraction is positive (a redraw-until-positive rule).
/// Trial `t` uses a generator seeded with `seed` on stream `t`.
pub fn significance_mc(
    observed: &Simulation,
    universe: &[PredictionRecord],
    staking: Staking,
    source: Source,
    trials: usize,
    seed: u64,
) -> Result<Significance> {
    let observed_roi = observed.roi.ok_or(Error::EmptySubset)?;
    let pool: Vec<(f64, f64, f64, u8)> = universe
        .iter()
        .filter_map(|r| {
            let (oa, ob) = r.odds()?;
            Some((source.get(r)?, oa, ob, r.outcome))
        })
        .collect();
    if pool.is_empty() {
        return Err(Error::EmptySubset);
    }
    let options: Vec<(usize, Side)> = pool
        .iter()
        .enumerate()
        .flat_map(|(i, &(p, oa, ob, _))| {
            let mut v = Vec::new();
            if staking == Staking::Unit || kelly_fraction(p, oa) > 0.0 {
                v.push((i, Side::A));
            }
            if staking == Staking::Unit || kelly_fraction(1.0 - p, ob) > 0.0 {
                v.push((i, Side::B));
            }
            v
        })
        .collect();
    if options.is_empty() {
        return Err(Error::EmptySubset);
    }
    let n = observed.bets.len();
    let mut at_least = 0usize;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let (mut staked, mut profit) = (0.0, 0.0);
        for _ in 0..n {
            let (i, side) = options[rng.random_range(0..options.len())];
            let (p, oa, ob, outcome) = pool[i];
            let (prob, odds) = match side {
                Side::A => (p, oa),
                Side::B => (1.0 - p, ob),
            };
            let stake = match staking {
                Staking::Unit => 1.0,
                Staking::Kelly => kelly_fraction(prob, odds),
            };
            let won = (side == Side::A) == (outcome == 1);
            staked += stake;
            profit += settle(stake, odds, won).1;
        }
        if staked > 0.0 && profit / staked >= observed_roi {
            at_least += 1;
        }
    }
    Ok(Significance {
        observed_roi,
        trials,
        p_value: at_least as f64 / trials.max(1) as f64,
        staking,
    })
}

pub fn write_bets<W: Write>(bets: &[BetRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for b in bets {
        w.serialize(b)?;
    }
    w.flush()?;
    Ok(())
}
