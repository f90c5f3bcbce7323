mod common;

use std::collections::BTreeSet;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use proptest::prelude::*;

use tennis_graph::graphs::{build_surface_graphs, DominanceLedger, GraphParams, Roster};
use tennis_graph::ingest::{MatchRecord, SetScore, Surface, Tier, Tour};
use tennis_graph::intransitivity::{hodge_decompose, intransitivity, weighted_intransitivity, NeighbourIndex};

fn antisymmetric(n: usize, upper: &[f64]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            a[(i, j)] = upper[k % upper.len()];
            a[(j, i)] = -a[(i, j)];
            k += 1;
        }
    }
    a
}

proptest! {
    #[test]
    fn potential_is_the_least_squares_fit(n in 2usize..9, upper in prop::collection::vec(-7.0f64..7.0, 1..28)) {
        let a = antisymmetric(n, &upper);
        let (t, c) = hodge_decompose(&a).unwrap();
        prop_assert!((&t - common::least_squares_potential(&a)).abs().max() < 1e-8);
        // the cyclic part carries no divergence
        for i in 0..n {
            prop_assert!((c.row(i).sum() / n as f64).abs() < 1e-10);
        }
        prop_assert!((&t + &c - &a).abs().max() < 1e-14);
    }

    #[test]
    fn relabelling_players_leaves_score(n in 3usize..8, upper in prop::collection::vec(-5.0f64..5.0, 1..21), shift in 1usize..7) {
        let a = antisymmetric(n, &upper);
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let b = DMatrix::from_fn(n, n, |i, j| a[(perm[i], perm[j])]);
        prop_assert!((intransitivity(&a).unwrap() - intransitivity(&b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn parts_scale_linearly(n in 2usize..8, upper in prop::collection::vec(-5.0f64..5.0, 1..21), k in 0.1f64..4.0) {
        let a = antisymmetric(n, &upper);
        let (t, c) = hodge_decompose(&a).unwrap();
        let (tk, ck) = hodge_decompose(&(&a * k)).unwrap();
        prop_assert!((&tk - &t * k).abs().max() < 1e-10);
        prop_assert!((&ck - &c * k).abs().max() < 1e-10);
    }

    #[test]
    fn pure_potential_has_no_cycle(s in prop::collection::vec(-3.0f64..3.0, 2..8)) {
        let n = s.len();
        let a = DMatrix::from_fn(n, n, |i, j| s[i] - s[j]);
        let (t, c) = hodge_decompose(&a).unwrap();
        // residue bounded by the potential grid spacing
        prop_assert!(c.abs().max() < 1e-11);
        let expect = 1.0 / (1.0 + t.norm());
        prop_assert!((intransitivity(&a).unwrap() - expect).abs() < 1e-10);
    }
}

fn result(w: &str, l: &str, date: NaiveDate, gw: u32, gl: u32) -> MatchRecord {
    MatchRecord {
        match_id: format!("{w}>{l}@{date}"),
        date,
        tour: Tour::Women,
        tournament: "T".into(),
        tier: Tier::GrandSlam,
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
fn rock_paper_scissors_neighbourhood() {
    let d = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
    // a > b > c > a, with u = a and v = b sharing opponent c
    let ms = [result("a", "b", d, 6, 2), result("b", "c", d, 6, 2), result("c", "a", d, 6, 2)];
    let ids: BTreeSet<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
    let roster = Roster::new(&ids);
    let params = GraphParams::default();
    let ledger = DominanceLedger::from_matches(&roster, &ms);
    let at = d + chrono::Duration::days(1);
    let graphs = build_surface_graphs(0, at, roster.len(), &ledger, &params);
    let index = NeighbourIndex::new(&graphs[0]);
    let (a, b, dd) = (roster.index_of("a").unwrap(), roster.index_of("b").unwrap(), roster.index_of("d").unwrap());
    let s = weighted_intransitivity("m", a, b, Surface::Hard, &graphs, &index, &ledger, at, &params);
    assert_eq!(s.neighbourhood, 1);
    // equal margins around a 3-cycle: no transitive part at all
    let logit = (0.75f64 / 0.25).ln();
    let expect_raw = 1.0 + (6.0 * logit * logit).sqrt();
    assert!((s.raw - expect_raw).abs() < 1e-12, "{} vs {}", s.raw, expect_raw);
    let phi = (-0.38f64 / 365.25).exp();
    assert!((s.evidence_weight - phi.sqrt()).abs() < 1e-12);
    assert!((s.weighted - s.raw * s.evidence_weight).abs() < 1e-15);

    // no prior meeting: zero evidence, so zero weighted score
    let none = weighted_intransitivity("n", a, dd, Surface::Hard, &graphs, &index, &ledger, at, &params);
    assert_eq!(none.weighted, 0.0);
    assert_eq!(none.neighbourhood, 0);

    // the score at the match date itself cannot see that day's results
    let same_day = weighted_intransitivity("m", a, b, Surface::Hard, &graphs, &index, &ledger, d, &params);
    assert_eq!(same_day.evidence_weight, 0.0);
}
