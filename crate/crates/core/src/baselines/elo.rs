use std::collections::HashMap;

use crate::ingest::MatchRecord;

pub const INITIAL_RATING: f64 = 1500.0;
/// Slope of the games-share multiplier used by the weighted variant.
pub const GAMES_SHARE_SLOPE: f64 = 2.0;

/// Probability that a player rated `ra` beats one rated `rb`.
pub fn elo_predict(ra: f64, rb: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((rb - ra) / 400.0))
}

/// Dynamic K-factor for a player with `prior_matches` rated matches.
pub fn k_factor(prior_matches: u32) -> f64 {
    250.0 / (5.0 + prior_matches as f64).powf(0.4)
}

/// Update multiplier for the winner's share of games.
pub fn games_share_multiplier(share: f64) -> f64 {
    1.0 + GAMES_SHARE_SLOPE * (share - 0.5)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EloWeighting {
    Standard,
    /// Scales both updates by the winner's games share.
    GamesShare,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlayerRating {
    pub rating: f64,
    pub matches: u32,
}

impl Default for PlayerRating {
    fn default() -> Self {
        PlayerRating {
            rating: INITIAL_RATING,
            matches: 0,
        }
    }
}

/// Rating table folded over matches in date order.
#[derive(Debug, Clone)]
pub struct EloState {
    pub weighting: EloWeighting,
    players: HashMap<String, PlayerRating>,
}

impl EloState {
    pub fn new(weighting: EloWeighting) -> Self {
        EloState {
            weighting,
            players: HashMap::new(),
        }
    }

    pub fn player(&self, id: &str) -> PlayerRating {
        self.players.get(id).copied().unwrap_or_default()
    }

    pub fn rating(&self, id: &str) -> f64 {
        self.player(id).rating
    }

    pub fn predict(&self, a: &str, b: &str) -> f64 {
        elo_predict(self.rating(a), self.rating(b))
    }

    /// Applies one result; returns the winner's and loser's rating changes.
    pub fn update(&mut self, m: &MatchRecord) -> (f64, f64) {
        let w = self.player(&m.winner_id);
        let l = self.player(&m.loser_id);
        let expected = elo_predict(w.rating, l.rating);
        let scale = match self.weighting {
            EloWeighting::Standard => 1.0,
            EloWeighting::GamesShare => games_share_multiplier(m.winner_games_share()),
        };
        let dw = k_factor(w.matches) * (1.0 - expected) * scale;
        let dl = -k_factor(l.matches) * (1.0 - expected) * scale;
        self.players.insert(
            m.winner_id.clone(),
            PlayerRating {
                rating: w.rating + dw,
                matches: w.matches + 1,
            },
        );
        self.players.insert(
            m.loser_id.clone(),
            PlayerRating {
                rating: l.rating + dl,
                matches: l.matches + 1,
            },
        );
        (dw, dl)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{SetScore, Surface, Tier, Tour};
    use chrono::NaiveDate;

    fn result(w: &str, l: &str, gw: u32, gl: u32) -> MatchRecord {
        MatchRecord {
            match_id: "t:1".into(),
            date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap(),
            tour: Tour::Men,
            tournament: "T".into(),
            tier: Tier::T500,
            round: "1st Round".into(),
            surface: Surface::Hard,
            best_of: 3,
            winner_id: w.into(),
            loser_id: l.into(),
            sets: vec![SetScore {
                winner_games: gw,
                loser_games: gl,
            }],
            games_winner: gw,
            games_loser: gl,
            odds_winner: None,
            odds_loser: None,
        }
    }

    #[test]
    fn logistic_base_ten() {
        assert_eq!(elo_predict(1500.0, 1500.0), 0.5);
        assert!((elo_predict(1900.0, 1500.0) - 10.0 / 11.0).abs() < 1e-15);
        assert!((elo_predict(1620.0, 1480.0) + elo_predict(1480.0, 1620.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn first_match_update() {
        let mut s = EloState::new(EloWeighting::Standard);
        let (dw, dl) = s.update(&result("a", "b", 6, 4));
        let expect = 0.5 * 250.0 / 5f64.powf(0.4);
        assert!((dw - expect).abs() < 1e-12);
        assert!((dw - 65.66).abs() < 0.005);
        assert!((dl + expect).abs() < 1e-12);
        assert_eq!(s.player("a").matches, 1);
        assert_eq!(s.player("b").matches, 1);
    }

    #[test]
    fn games_share_scaling() {
        let mut plain = EloState::new(EloWeighting::Standard);
        let mut even = EloState::new(EloWeighting::GamesShare);
        let mut bagel = EloState::new(EloWeighting::GamesShare);
        let base = plain.update(&result("a", "b", 6, 4)).0;
        assert!((even.update(&result("a", "b", 6, 6)).0 - base).abs() < 1e-12);
        assert!((bagel.update(&result("a", "b", 12, 0)).0 - 2.0 * base).abs() < 1e-12);
        assert_eq!(games_share_multiplier(0.5), 1.0);
    }
}
