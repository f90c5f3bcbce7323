//! Property checks over built-in synthetic fixtures.

use chrono::NaiveDate;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use tennis_graph::betting::{kelly_fraction, simulate, Staking, Strategy};
use tennis_graph::eval::Source;
use tennis_graph::graphs::Edge;
use tennis_graph::ingest::Tour;
use tennis_graph::intransitivity::{hodge_decompose, intransitivity};
use tennis_graph::magnet::{match_win_probability, power_iteration, SurfaceOperator, POWER_MAX_ITER};
use tennis_graph::pipeline::{walk_forward_run, DateRange, WalkForwardConfig, WalkForwardOutput};
use tennis_graph::synthetic::{generate, reverse_results_from, SyntheticConfig};

use crate::run::Run;

#[derive(Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn random_edges(rng: &mut ChaCha8Rng, n: usize) -> Vec<Edge> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.random_bool(0.3) {
                let weight = rng.random_range(0.5..1.0);
                let (from, to) = if rng.random_bool(0.5) { (u, v) } else { (v, u) };
                edges.push(Edge { from, to, weight });
            }
        }
    }
    edges
}

fn laplacian_spectrum(rng: &mut ChaCha8Rng) -> (bool, String) {
    let (mut defect, mut top, mut bottom) = (0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..100 {
        let n = rng.random_range(2..30);
        let q = [0.05, 0.1, 0.25][rng.random_range(0..3)];
        let op = SurfaceOperator::new(n, &random_edges(rng, n), q);
        defect = defect.max(op.laplacian.hermitian_defect());
        top = top.max(power_iteration(&op.laplacian, 1e-10, 20 * POWER_MAX_ITER).eigenvalue);
        // smallest eigenvalue via the top of 2I − L
        let flipped = power_iteration(&op.laplacian.scale_shift(-1.0, 2.0), 1e-10, 20 * POWER_MAX_ITER);
        bottom = bottom.min(2.0 - flipped.eigenvalue);
    }
    (
        defect <= 1e-12 && top <= 2.0 + 1e-6 && bottom >= -1e-6,
        format!("hermitian defect {defect:.1e}, spectrum within [{bottom:.2e}, {top:.6}]"),
    )
}

fn hodge(rng: &mut ChaCha8Rng) -> (bool, String) {
    let mut worst = 0.0f64;
    let mut divergence = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(2..12);
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                a[(i, j)] = rng.random_range(-5.0..5.0);
                a[(j, i)] = -a[(i, j)];
            }
        }
        let (t, c) = hodge_decompose(&a).expect("n >= 2");
        worst = worst.max((&t + &c - &a).abs().max());
        for i in 0..n {
            divergence = divergence.max((c.row(i).sum() / n as f64).abs());
        }
    }
    let cycle = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, -1.0, -1.0, 0.0, 1.0, 1.0, -1.0, 0.0]);
    let three = intransitivity(&cycle).expect("3 nodes");
    let expect = 1.0 + 6f64.sqrt();
    (
        worst < 1e-12 && divergence < 1e-10 && (three - expect).abs() < 1e-10,
        format!("reconstruction {worst:.1e}, divergence {divergence:.1e}, 3-cycle score {three:.12}"),
    )
}

fn set_to_match() -> (bool, String) {
    let mut ok = true;
    for best_of in [3u8, 5] {
        let p = |x| match_win_probability(x, best_of).expect("supported format");
        ok &= p(0.0) == 0.0 && p(1.0) == 1.0 && p(0.5) == 0.5;
        let grid: Vec<f64> = (0..=1000).map(|i| p(i as f64 / 1000.0)).collect();
        ok &= grid.windows(2).all(|w| w[1] > w[0]);
        ok &= (0..=1000).all(|i| {
            let x = i as f64 / 1000.0;
            (p(x) + p(1.0 - x) - 1.0).abs() < 1e-12
        });
    }
    (ok, "fixed points, monotonicity and complement for best of 3 and 5".into())
}

fn kelly(rng: &mut ChaCha8Rng) -> (bool, String) {
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let p = rng.random_range(0.05..0.95);
        let odds = rng.random_range(1.05..8.0);
        let f = kelly_fraction(p, odds);
        let growth = |f: f64| p * (1.0 + f * (odds - 1.0)).ln() + (1.0 - p) * (1.0 - f).ln();
        let best = (0..100_000)
            .map(|i| i as f64 / 100_000.0)
            .max_by(|a, b| growth(*a).total_cmp(&growth(*b)))
            .expect("non-empty grid");
        worst = worst.max((f - best).abs());
    }
    (worst < 2e-5, format!("largest gap to a brute-force growth maximum {worst:.1e}"))
}

fn small_walk_forward(tour: Tour) -> WalkForwardConfig {
    let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).expect("valid date");
    let mut c = WalkForwardConfig::new(tour);
    c.history_start = d(2018, 1, 1);
    c.validation = DateRange {
        start: d(2018, 5, 1),
        end: d(2018, 9, 30),
    };
    c.test = DateRange {
        start: d(2018, 10, 1),
        end: d(2019, 3, 31),
    };
    c.seed = 11;
    c.model.hidden = 4;
    c.model.initial_epochs = 10;
    c.model.retrain_epochs = 3;
    c.model.retrain_interval_snapshots = 5;
    c
}

fn walk_forward_checks(seed: u64) -> Vec<Check> {
    let corpus = generate(&SyntheticConfig::small(Tour::Men, seed));
    let cfg = small_walk_forward(Tour::Men);
    let run = |ms: &[_]| -> WalkForwardOutput { walk_forward_run(&cfg, ms, &corpus.attributes).expect("synthetic run") };
    let base = run(&corpus.matches);
    let again = run(&corpus.matches);
    let cut = NaiveDate::from_ymd_opt(2018, 11, 1).expect("valid date");
    let reversed = run(&reverse_results_from(&corpus.matches, cut));

    let in_range = base
        .records
        .iter()
        .all(|r| [r.model, r.elo, r.welo, r.bt].iter().all(|p| *p > 0.0 && *p < 1.0));
    let past: Vec<_> = base.records.iter().filter(|r| r.date < cut).collect();
    let past_reversed: Vec<_> = reversed.records.iter().filter(|r| r.date < cut).collect();
    let causal = past.len() == past_reversed.len()
        && past.iter().zip(&past_reversed).all(|(a, b)| {
            a.match_id == b.match_id
                && a.model.to_bits() == b.model.to_bits()
                && a.bt.to_bits() == b.bt.to_bits()
                && a.intransitivity.to_bits() == b.intransitivity.to_bits()
        });
    vec![
        Check {
            name: "walk-forward is deterministic",
            passed: base.records == again.records,
            detail: format!("{} forecasts", base.records.len()),
        },
        Check {
            name: "forecasts are probabilities",
            passed: in_range && !base.records.is_empty(),
            detail: "model, Elo, WElo and BT inside (0, 1)".into(),
        },
        Check {
            name: "later results never change earlier forecasts",
            passed: causal && !past.is_empty(),
            detail: format!("{} forecasts before {cut} compared bitwise", past.len()),
        },
    ]
}

fn betting_order(rng: &mut ChaCha8Rng, seed: u64) -> (bool, String) {
    let corpus = generate(&SyntheticConfig::small(Tour::Women, seed));
    let out = walk_forward_run(&small_walk_forward(Tour::Women), &corpus.matches, &corpus.attributes).expect("synthetic run");
    let strategy = Strategy {
        staking: Staking::Kelly,
        gamma: None,
        source: Source::Model,
    };
    let base = simulate(&out.records, &strategy);
    let mut ok = base.roi.is_some();
    for _ in 0..5 {
        let mut shuffled = out.records.clone();
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let s = simulate(&shuffled, &strategy);
        ok &= s.roi.map(f64::to_bits) == base.roi.map(f64::to_bits) && s.bets.len() == base.bets.len();
    }
    (ok, format!("{} Kelly bets, ROI identical under 5 shuffles", base.bets.len()))
}

pub fn run(run: &mut Run) -> anyhow::Result<()> {
    let seed = run.config.seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let mut push = |name, (passed, detail): (bool, String)| checks.push(Check { name, passed, detail });
    push("magnetic Laplacian is Hermitian with spectrum in [0, 2]", laplacian_spectrum(&mut rng));
    push("Hodge parts reconstruct the advantage matrix", hodge(&mut rng));
    push("set-to-match probability", set_to_match());
    push("Kelly fraction maximises log growth", kelly(&mut rng));
    push("betting totals ignore ledger order", betting_order(&mut rng, seed));
    checks.extend(walk_forward_checks(seed));

    for c in &checks {
        println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    run.write_json("selftest.json", &checks)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        anyhow::bail!("{failed} of {} self-test checks failed", checks.len());
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}
