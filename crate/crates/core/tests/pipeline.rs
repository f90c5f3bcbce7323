mod common;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use proptest::prelude::*;

use tennis_graph::ingest::Tour;
use tennis_graph::pipeline::{pareto_front, read_prediction_ledger_from, walk_forward_run, write_prediction_ledger, PredictionRecord, Trial};
use tennis_graph::synthetic::{generate, reverse_results_from, SyntheticConfig};

/// Everything a prediction is computed from, excluding the realised result.
fn forecast(r: &PredictionRecord) -> (String, usize, [u64; 8]) {
    (
        r.match_id.clone(),
        r.snapshot,
        [
            r.model.to_bits(),
            r.model_set.to_bits(),
            r.elo.to_bits(),
            r.welo.to_bits(),
            r.bt.to_bits(),
            r.intransitivity_raw.to_bits(),
            r.evidence_weight.to_bits(),
            r.intransitivity.to_bits(),
        ],
    )
}

fn snapshot_starts(records: &[PredictionRecord]) -> BTreeMap<usize, NaiveDate> {
    let mut m: BTreeMap<usize, NaiveDate> = BTreeMap::new();
    for r in records {
        let e = m.entry(r.snapshot).or_insert(r.date);
        *e = (*e).min(r.date);
    }
    m
}

#[test]
fn identical_inputs_identical_ledger() {
    let corpus = generate(&SyntheticConfig::small(Tour::Women, 5));
    let cfg = common::small_walk_forward(Tour::Women);
    let a = walk_forward_run(&cfg, &corpus.matches, &corpus.attributes).unwrap();
    let b = walk_forward_run(&cfg, &corpus.matches, &corpus.attributes).unwrap();
    assert!(!a.records.is_empty());
    assert_eq!(a.records, b.records);
    assert_eq!(a.training, b.training);
    for r in &a.records {
        assert!(r.model > 0.0 && r.model < 1.0);
        assert!(r.intransitivity >= 0.0);
        assert_eq!(cfg.period_of(r.date).is_some() || cfg.period_of(snapshot_starts(&a.records)[&r.snapshot]).is_some(), true);
    }
}

#[test]
fn reversing_future_results_leaves_past_forecasts() {
    let corpus = generate(&SyntheticConfig::small(Tour::Men, 8));
    let cfg = common::small_walk_forward(Tour::Men);
    let base = walk_forward_run(&cfg, &corpus.matches, &corpus.attributes).unwrap();
    let starts = snapshot_starts(&base.records);
    let dates: Vec<NaiveDate> = starts.values().copied().collect();
    for cut in [dates[dates.len() / 4], dates[dates.len() / 2], dates[dates.len() - 3]] {
        let altered = reverse_results_from(&corpus.matches, cut);
        let run = walk_forward_run(&cfg, &altered, &corpus.attributes).unwrap();
        assert_eq!(base.records.len(), run.records.len());
        let mut compared = 0;
        let mut changed = 0;
        for (x, y) in base.records.iter().zip(&run.records) {
            if starts[&x.snapshot] <= cut {
                assert_eq!(forecast(x), forecast(y), "forecast for {} moved after cut {cut}", x.match_id);
                compared += 1;
            } else if forecast(x) != forecast(y) {
                changed += 1;
            }
        }
        assert!(compared > 0);
        // the perturbation is real: later forecasts see it
        assert!(changed > 0 || cut == *dates.last().unwrap());
    }
}

#[test]
fn dropping_future_matches_leaves_past_forecasts() {
    let corpus = generate(&SyntheticConfig::small(Tour::Women, 13));
    let cfg = common::small_walk_forward(Tour::Women);
    let base = walk_forward_run(&cfg, &corpus.matches, &corpus.attributes).unwrap();
    let starts = snapshot_starts(&base.records);
    let cut = *starts.values().nth(starts.len() / 2).unwrap();
    let kept: Vec<_> = corpus.matches.iter().filter(|m| m.date < cut).cloned().collect();
    let run = walk_forward_run(&cfg, &kept, &corpus.attributes).unwrap();
    // every synthetic player appears long before the cut, so the roster agrees
    assert_eq!(base.roster.ids(), run.roster.ids());
    let past: Vec<_> = base.records.iter().filter(|r| r.date < cut).map(forecast).collect();
    let again: Vec<_> = run.records.iter().map(forecast).collect();
    assert!(!past.is_empty());
    assert_eq!(past, again);
}

#[test]
fn ledger_round_trip_and_checkpoints() {
    let corpus = generate(&SyntheticConfig::small(Tour::Men, 2));
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::small_walk_forward(Tour::Men);
    cfg.checkpoint_dir = Some(dir.path().to_path_buf());
    let out = walk_forward_run(&cfg, &corpus.matches, &corpus.attributes).unwrap();
    let mut buf = Vec::new();
    write_prediction_ledger(&out.records, &mut buf).unwrap();
    assert_eq!(read_prediction_ledger_from(buf.as_slice()).unwrap(), out.records);
    let written = std::fs::read_dir(dir.path()).unwrap().count();
    assert_eq!(written, out.training.len());
    assert!(out.training.len() >= 2);
    // warm starts continue the epoch count
    for w in out.training.windows(2) {
        assert_eq!(w[1].first_epoch, w[0].first_epoch + w[0].losses.len() as u64);
    }
}

fn dominated(t: &Trial, by: &Trial) -> bool {
    by.brier_men <= t.brier_men && by.brier_women <= t.brier_women && (by.brier_men < t.brier_men || by.brier_women < t.brier_women)
}

proptest! {
    #[test]
    fn front_matches_brute_force(points in prop::collection::vec((0u8..6, 0u8..6), 1..25)) {
        let trials: Vec<Trial> = points
            .iter()
            .enumerate()
            .map(|(i, &(m, w))| Trial { brier_men: 0.2 + m as f64 * 0.01, brier_women: 0.2 + w as f64 * 0.01, params: i.to_string() })
            .collect();
        let front = pareto_front(&trials);
        let expect: Vec<Trial> = trials.iter().filter(|t| trials.iter().all(|o| !dominated(t, o))).cloned().collect();
        prop_assert_eq!(&front, &expect);
        for a in &front {
            for b in &front {
                prop_assert!(!dominated(a, b));
            }
        }
    }
}
