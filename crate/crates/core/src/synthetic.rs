//! Deterministic synthetic tours for self-tests and offline runs.
//!
//! Players carry a latent strength per surface that drifts week to week, plus
//! a style angle whose pairwise sine term injects rock-paper-scissors cycles.
//! One knockout event is played per week; set outcomes follow the logistic
//! of the strength gap and odds are a noisy, margined view of the true match
//! probability.

use chrono::{Datelike, Duration, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::{sort_records, Handedness, MatchRecord, RawPlayerAttributes, SetScore, Surface, Tier, Tour};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub tour: Tour,
    pub players: usize,
    pub start: NaiveDate,
    pub weeks: usize,
    /// Knockout draw size; a power of two, at least 4.
    pub draw: usize,
    /// Bookmaker overround, e.g. 0.03.
    pub margin: f64,
    /// Share of matches that receive odds.
    pub odds_coverage: f64,
    /// Weight of the cyclic style term in the set logit.
    pub cycle_strength: f64,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn small(tour: Tour, seed: u64) -> Self {
        SyntheticConfig {
            tour,
            players: 24,
            start: NaiveDate::from_ymd_opt(2018, 1, 1).expect("valid date"),
            weeks: 60,
            draw: 8,
            margin: 0.03,
            odds_coverage: 0.9,
            cycle_strength: 0.6,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub matches: Vec<MatchRecord>,
    pub attributes: Vec<RawPlayerAttributes>,
}

struct Player {
    strength: [f64; 3],
    style: f64,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn surface_for(date: NaiveDate) -> Surface {
    match date.month() {
        4 | 5 => Surface::Clay,
        6 => Surface::Grass,
        _ => Surface::Hard,
    }
}

fn tier_for(week: usize) -> Tier {
    match week % 13 {
        0 => Tier::GrandSlam,
        12 => Tier::Finals,
        w if w % 2 == 1 => Tier::T1000,
        _ => Tier::T500,
    }
}

fn round_name(round: usize, rounds: usize) -> String {
    match rounds - round {
        0 => "The Final".into(),
        1 => "Semifinals".into(),
        2 => "Quarterfinals".into(),
        _ => ["1st Round", "2nd Round", "3rd Round", "4th Round"]
            .get(round - 1)
            .copied()
            .unwrap_or("Round Robin")
            .into(),
    }
}

fn play_set(rng: &mut ChaCha8Rng, first_wins: bool) -> SetScore {
    let (w, l) = match rng.random_range(0..10) {
        0 => (7, 6),
        1 => (7, 5),
        _ => (6, rng.random_range(0..5)),
    };
    if first_wins {
        SetScore {
            winner_games: w,
            loser_games: l,
        }
    } else {
        SetScore {
            winner_games: l,
            loser_games: w,
        }
    }
}

/// Probability that `a` takes a set from `b` on `surface`.
fn set_probability(a: &Player, b: &Player, surface: Surface, cycle: f64) -> f64 {
    let s = surface.index();
    sigmoid(a.strength[s] - b.strength[s] + cycle * (a.style - b.style).sin())
}

fn margined_odds(p: f64, margin: f64) -> f64 {
    (100.0 / (p * (1.0 + margin))).floor() / 100.0
}

pub fn generate(config: &SyntheticConfig) -> SyntheticCorpus {
    assert!(config.draw >= 4 && config.draw.is_power_of_two(), "draw must be a power of two >= 4");
    assert!(config.players >= config.draw, "need at least one full draw of players");
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let prefix = match config.tour {
        Tour::Men => "M",
        Tour::Women => "W",
    };
    let ids: Vec<String> = (0..config.players).map(|i| format!("{prefix}{i:03}")).collect();

    let mut players: Vec<Player> = (0..config.players)
        .map(|_| {
            let base = unit.sample(&mut rng);
            Player {
                strength: [0; 3].map(|_| base + 0.4 * unit.sample(&mut rng)),
                style: rng.random_range(0.0..std::f64::consts::TAU),
            }
        })
        .collect();

    let (h_mean, w_mean) = match config.tour {
        Tour::Men => (186.0, 80.0),
        Tour::Women => (174.0, 63.0),
    };
    let attributes = ids
        .iter()
        .map(|id| {
            let height = rng.random_bool(0.93).then(|| (h_mean + 7.0 * unit.sample(&mut rng)).round());
            let weight = rng.random_bool(0.93).then(|| (w_mean + 6.0 * unit.sample(&mut rng)).round());
            let birth = rng.random_bool(0.93).then(|| {
                NaiveDate::from_ymd_opt(1985, 1, 1).expect("valid date") + Duration::days(rng.random_range(0..6500))
            });
            let hand = rng.random_bool(0.93).then(|| if rng.random_bool(0.12) { Handedness::Left } else { Handedness::Right });
            RawPlayerAttributes {
                player_id: id.clone(),
                name: format!("Player {id}"),
                height_cm: height,
                weight_kg: weight,
                birth_date: birth,
                handedness: hand,
            }
        })
        .collect();

    let rounds = config.draw.trailing_zeros() as usize;
    let mut matches = Vec::new();
    for week in 0..config.weeks {
        let monday = config.start + Duration::weeks(week as i64);
        let surface = surface_for(monday);
        let tier = tier_for(week);
        let best_of = if tier == Tier::GrandSlam && config.tour == Tour::Men { 5 } else { 3 };
        let tournament = format!("Event {week:03}");

        let mut pool: Vec<usize> = (0..config.players).collect();
        for i in (1..pool.len()).rev() {
            pool.swap(i, rng.random_range(0..=i));
        }
        let mut alive: Vec<usize> = pool[..config.draw].to_vec();
        for round in 1..=rounds {
            let date = monday + Duration::days(round as i64 - 1);
            let mut next = Vec::with_capacity(alive.len() / 2);
            for (k, pair) in alive.chunks(2).enumerate() {
                let (a, b) = (pair[0], pair[1]);
                let p = set_probability(&players[a], &players[b], surface, config.cycle_strength);
                let need = best_of / 2 + 1;
                let (mut wa, mut wb) = (0, 0);
                let mut sets_a = Vec::new();
                while wa < need && wb < need {
                    let a_takes = rng.random_bool(p);
                    if a_takes {
                        wa += 1;
                    } else {
                        wb += 1;
                    }
                    sets_a.push(play_set(&mut rng, a_takes));
                }
                let a_won = wa == need;
                let (winner, loser) = if a_won { (a, b) } else { (b, a) };
                // sets were recorded from a's side; flip to the winner's side
                let sets: Vec<SetScore> = sets_a
                    .into_iter()
                    .map(|s| {
                        if a_won {
                            s
                        } else {
                            SetScore {
                                winner_games: s.loser_games,
                                loser_games: s.winner_games,
                            }
                        }
                    })
                    .collect();
                let (odds_winner, odds_loser) = if rng.random_bool(config.odds_coverage) {
                    let q = if a_won { p } else { 1.0 - p };
                    let pm = crate::magnet::match_win_probability(q, best_of as u8).expect("best of 3 or 5");
                    let noisy = sigmoid((pm / (1.0 - pm)).ln() + 0.35 * unit.sample(&mut rng)).clamp(0.08, 0.92);
                    (
                        Some(margined_odds(noisy, config.margin)),
                        Some(margined_odds(1.0 - noisy, config.margin)),
                    )
                } else {
                    (None, None)
                };
                matches.push(MatchRecord {
                    match_id: format!("{prefix}-{week:04}-{round}-{k:02}"),
                    date,
                    tour: config.tour,
                    tournament: tournament.clone(),
                    tier,
                    round: round_name(round, rounds),
                    surface,
                    best_of: best_of as u8,
                    winner_id: ids[winner].clone(),
                    loser_id: ids[loser].clone(),
                    games_winner: sets.iter().map(|s| s.winner_games).sum(),
                    games_loser: sets.iter().map(|s| s.loser_games).sum(),
                    sets,
                    odds_winner,
                    odds_loser,
                });
                next.push(winner);
            }
            alive = next;
        }
        for pl in players.iter_mut() {
            for s in pl.strength.iter_mut() {
                *s += 0.03 * unit.sample(&mut rng);
            }
        }
    }
    sort_records(&mut matches);
    SyntheticCorpus { matches, attributes }
}

fn source_tier_label(tier: Tier, tour: Tour) -> &'static str {
    match (tier, tour) {
        (Tier::GrandSlam, _) => "Grand Slam",
        (Tier::Finals, Tour::Men) => "Masters Cup",
        (Tier::Finals, Tour::Women) => "Tour Championships",
        (Tier::T1000, Tour::Men) => "Masters 1000",
        (Tier::T1000, Tour::Women) => "WTA1000",
        (Tier::T500, Tour::Men) => "ATP500",
        (Tier::T500, Tour::Women) => "WTA500",
        (Tier::T250, Tour::Men) => "ATP250",
        (Tier::T250, Tour::Women) => "WTA250",
        (Tier::Other, _) => "Other",
    }
}

/// Writes matches in the raw results layout the ingester reads: one row per
/// match, `dd/mm/yyyy` dates, source tier labels, up to five set columns and
/// closing odds. Player ids stand in for names.
pub fn write_results_csv<W: std::io::Write>(matches: &[MatchRecord], out: W) -> crate::error::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["Tournament", "Date", "Series", "Surface", "Round", "Best of", "Winner", "Loser"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for k in 1..=5 {
        header.push(format!("W{k}"));
        header.push(format!("L{k}"));
    }
    header.extend(["Comment", "PSW", "PSL"].map(String::from));
    w.write_record(&header)?;
    for m in matches {
        let mut row = vec![
            m.tournament.clone(),
            m.date.format("%d/%m/%Y").to_string(),
            source_tier_label(m.tier, m.tour).to_string(),
            m.surface.as_str().to_string(),
            m.round.clone(),
            m.best_of.to_string(),
            m.winner_id.clone(),
            m.loser_id.clone(),
        ];
        for k in 0..5 {
            match m.sets.get(k) {
                Some(s) => {
                    row.push(s.winner_games.to_string());
                    row.push(s.loser_games.to_string());
                }
                None => row.extend([String::new(), String::new()]),
            }
        }
        row.push("Completed".into());
        let odds = |o: Option<f64>| o.map_or(String::new(), |v| v.to_string());
        row.push(odds(m.odds_winner));
        row.push(odds(m.odds_loser));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Copy of `matches` where every match dated on or after `cutoff` has its
/// result reversed, its set scores mirrored and its odds swapped. Players,
/// dates and events are unchanged.
pub fn reverse_results_from(matches: &[MatchRecord], cutoff: NaiveDate) -> Vec<MatchRecord> {
    matches
        .iter()
        .map(|m| {
            if m.date < cutoff {
                return m.clone();
            }
            let mut r = m.clone();
            std::mem::swap(&mut r.winner_id, &mut r.loser_id);
            std::mem::swap(&mut r.games_winner, &mut r.games_loser);
            std::mem::swap(&mut r.odds_winner, &mut r.odds_loser);
            for s in r.sets.iter_mut() {
                std::mem::swap(&mut s.winner_games, &mut s.loser_games);
            }
            r
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_well_formed() {
        let cfg = SyntheticConfig::small(Tour::Men, 3);
        let a = generate(&cfg);
        assert_eq!(a, generate(&cfg));
        assert_eq!(a.matches.len(), cfg.weeks * (cfg.draw - 1));
        for m in &a.matches {
            let won = m.sets.iter().filter(|s| s.winner_games > s.loser_games).count();
            assert_eq!(won, (m.best_of / 2 + 1) as usize);
            assert!(m.sets.len() <= m.best_of as usize);
            if let (Some(w), Some(l)) = (m.odds_winner, m.odds_loser) {
                assert!(w > 1.0 && l > 1.0 && 1.0 / w + 1.0 / l > 1.0);
            }
        }
        assert_ne!(a, generate(&SyntheticConfig::small(Tour::Men, 4)));
    }

    #[test]
    fn raw_layout_parses_back() {
        let c = generate(&SyntheticConfig::small(Tour::Men, 2));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("2018.csv");
        write_results_csv(&c.matches, std::fs::File::create(&path).unwrap()).unwrap();
        let report = crate::ingest::parse_match_csv(&path, Some(Tour::Men), None).unwrap();
        assert_eq!(report.records.len(), c.matches.len());
        let strip = |m: &MatchRecord| MatchRecord {
            match_id: String::new(),
            ..m.clone()
        };
        let mut want: Vec<MatchRecord> = c.matches.iter().map(strip).collect();
        let mut got: Vec<MatchRecord> = report.records.iter().map(strip).collect();
        let key = |m: &MatchRecord| (m.date, m.winner_id.clone(), m.loser_id.clone());
        want.sort_by_key(key);
        got.sort_by_key(key);
        assert_eq!(got, want);
    }

    #[test]
    fn reversal_keeps_past() {
        let c = generate(&SyntheticConfig::small(Tour::Women, 1));
        let cut = c.matches[c.matches.len() / 2].date;
        let r = reverse_results_from(&c.matches, cut);
        for (x, y) in c.matches.iter().zip(&r) {
            if x.date < cut {
                assert_eq!(x, y);
            } else {
                assert_eq!((&x.winner_id, &x.loser_id), (&y.loser_id, &y.winner_id));
                assert_eq!(x.games_winner, y.games_loser);
            }
        }
    }
}
