use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;

use tennis_graph::betting::{
    daily_profits, sharpe, significance_mc, simulate, threshold_search, write_bets, Simulation, Staking, Strategy,
};
use tennis_graph::eval::{
    accuracy, brier, calibration_curve, cluster_bootstrap_ci, column, intransitivity_summary, intransitivity_trend,
    metrics_table, robustness_bins, write_csv, Source,
};
use tennis_graph::ingest::{parse_results_dir, read_attributes, read_match_ledger, write_match_ledger, NameMap, Tour};
use tennis_graph::magnet::write_loss_trace;
use tennis_graph::pipeline::{
    pareto_front, read_prediction_ledger, walk_forward_run, write_prediction_ledger, Period, PredictionRecord, Trial,
};

use crate::run::Run;

fn match_ledger_name(tour: Tour) -> String {
    format!("matches_{tour}.csv")
}

fn prediction_ledger_name(tour: Tour) -> String {
    format!("predictions_{tour}.csv")
}

fn csv_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Err(tennis_graph::Error::MissingFile(dir.to_path_buf()).into());
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")));
    files.sort();
    Ok(files)
}

#[derive(Serialize)]
struct IngestSummary {
    tour: Tour,
    files: usize,
    records: usize,
    with_odds: usize,
    dropped_incomplete: usize,
    dropped_bad_score: usize,
    dropped_invalid: usize,
    unmatched_names: Vec<String>,
}

pub fn ingest(run: &mut Run, tours: &[Tour]) -> anyhow::Result<()> {
    let names = match run.config.data.names.clone() {
        Some(p) => {
            let path = run.input(&run.config.data.resolve(&p))?;
            Some(NameMap::read(&path)?)
        }
        None => None,
    };
    for &tour in tours {
        let dir = run.config.data.results_dir(tour);
        let files = csv_files(&dir)?;
        for f in &files {
            run.input(f)?;
        }
        let report = parse_results_dir(&dir, tour, names.as_ref())?;
        write_match_ledger(&report.records, run.create(&match_ledger_name(tour))?)?;
        let summary = IngestSummary {
            tour,
            files: files.len(),
            records: report.records.len(),
            with_odds: report.records.iter().filter(|m| m.has_odds()).count(),
            dropped_incomplete: report.dropped_incomplete,
            dropped_bad_score: report.dropped_bad_score,
            dropped_invalid: report.dropped_invalid,
            unmatched_names: report.unmatched_names.into_iter().collect(),
        };
        eprintln!(
            "{tour}: {} matches from {} files ({} incomplete, {} bad scores, {} invalid dropped)",
            summary.records, summary.files, summary.dropped_incomplete, summary.dropped_bad_score, summary.dropped_invalid
        );
        run.write_json(&format!("ingest_{tour}.json"), &summary)?;
    }
    Ok(())
}

pub fn walkforward(run: &mut Run, tours: &[Tour]) -> anyhow::Result<()> {
    for &tour in tours {
        let ledger = run.input(&run.artifact(&match_ledger_name(tour)))?;
        let players = run.input(&run.config.data.players_file(tour))?;
        let matches = read_match_ledger(&ledger)?;
        let attrs = read_attributes(&players)?;
        let checkpoints = run.artifact("checkpoints");
        std::fs::create_dir_all(&checkpoints)?;
        let mut wf = run.config.walk_forward(tour);
        wf.checkpoint_dir = Some(checkpoints.clone());
        eprintln!("{tour}: walking forward over {} matches", matches.len());
        let out = walk_forward_run(&wf, &matches, &attrs).with_context(|| format!("{tour} walk-forward"))?;
        for t in &out.training {
            let name = format!("{tour}_snapshot_{:05}", t.snapshot);
            run.output(checkpoints.join(format!("{name}.json")));
            write_loss_trace(&t.losses, t.first_epoch, run.create(&format!("loss/{name}.csv"))?)?;
        }
        write_prediction_ledger(&out.records, run.create(&prediction_ledger_name(tour))?)?;
        eprintln!("{tour}: {} forecasts, {} training runs", out.records.len(), out.training.len());
    }
    Ok(())
}

fn load_predictions(run: &mut Run, tours: &[Tour]) -> anyhow::Result<Vec<PredictionRecord>> {
    let mut all = Vec::new();
    for &tour in tours {
        let path = run.input(&run.artifact(&prediction_ledger_name(tour)))?;
        all.extend(read_prediction_ledger(&path)?);
    }
    Ok(all)
}

fn periods(records: &[PredictionRecord]) -> Vec<(Period, Vec<PredictionRecord>)> {
    [Period::Validation, Period::Test]
        .into_iter()
        .map(|p| (p, records.iter().filter(|r| r.period == p).cloned().collect::<Vec<_>>()))
        .filter(|(_, rs)| !rs.is_empty())
        .collect()
}

fn tour_groups(records: &[PredictionRecord]) -> Vec<(&'static str, Vec<PredictionRecord>)> {
    let pick = |t: Option<Tour>| records.iter().filter(|r| t.is_none_or(|t| r.tour == t)).cloned().collect::<Vec<_>>();
    [("men", Some(Tour::Men)), ("women", Some(Tour::Women)), ("both", None)]
        .into_iter()
        .map(|(name, t)| (name, pick(t)))
        .filter(|(_, rs)| !rs.is_empty())
        .collect()
}

#[derive(Serialize)]
struct CalibrationRow {
    tour: &'static str,
    source: Source,
    lo: f64,
    hi: f64,
    count: usize,
    mean_predicted: Option<f64>,
    observed: Option<f64>,
}

#[derive(Serialize)]
struct RobustnessRow {
    tour: &'static str,
    bin: usize,
    lo: f64,
    hi: f64,
    n: usize,
    brier_model: f64,
    brier_shin: f64,
    brier_welo: f64,
    model_minus_shin: f64,
    model_minus_welo: f64,
}

#[derive(Serialize)]
struct TrendRow {
    tour: &'static str,
    rho: f64,
    p_value: f64,
    n: usize,
}

#[derive(Serialize)]
struct IntervalRow {
    tour: &'static str,
    source: Source,
    metric: &'static str,
    point: f64,
    lo: f64,
    hi: f64,
}

pub fn evaluate(run: &mut Run, tours: &[Tour]) -> anyhow::Result<()> {
    let records = load_predictions(run, tours)?;
    let resamples = run.config.evaluation.bootstrap_resamples;
    let seed = run.config.seed;
    for (period, rows) in periods(&records) {
        write_csv(&metrics_table(&rows), run.create(&format!("metrics_{period}.csv"))?)?;

        let mut calibration = Vec::new();
        let mut robustness = Vec::new();
        let mut trend = Vec::new();
        let mut intervals = Vec::new();
        for (tour, group) in tour_groups(&rows) {
            for source in Source::ALL {
                for b in calibration_curve(&column(&group, source)) {
                    calibration.push(CalibrationRow {
                        tour,
                        source,
                        lo: b.lo,
                        hi: b.hi,
                        count: b.count,
                        mean_predicted: b.mean_predicted,
                        observed: b.observed,
                    });
                }
                type Metric = fn(&[(f64, u8)]) -> tennis_graph::Result<f64>;
                for (metric, f) in [("accuracy", accuracy as Metric), ("brier", brier as Metric)] {
                    if column(&group, source).is_empty() {
                        continue;
                    }
                    let stat = |rs: &[&PredictionRecord]| f(&column(rs.iter().copied(), source)).unwrap_or(f64::NAN);
                    let ci = cluster_bootstrap_ci(&group, stat, resamples, seed)?;
                    intervals.push(IntervalRow {
                        tour,
                        source,
                        metric,
                        point: ci.point,
                        lo: ci.lo,
                        hi: ci.hi,
                    });
                }
            }
            match robustness_bins(&group) {
                Ok(bins) => robustness.extend(bins.into_iter().map(|b| RobustnessRow {
                    tour,
                    bin: b.bin,
                    lo: b.lo,
                    hi: b.hi,
                    n: b.n,
                    brier_model: b.brier_model,
                    brier_shin: b.brier_shin,
                    brier_welo: b.brier_welo,
                    model_minus_shin: b.model_minus_shin,
                    model_minus_welo: b.model_minus_welo,
                })),
                Err(e) => eprintln!("{period} {tour}: no robustness bins ({e})"),
            }
            match intransitivity_trend(&group) {
                Ok(s) => trend.push(TrendRow {
                    tour,
                    rho: s.rho,
                    p_value: s.p_value,
                    n: s.n,
                }),
                Err(e) => eprintln!("{period} {tour}: no trend test ({e})"),
            }
        }
        write_csv(&calibration, run.create(&format!("calibration_{period}.csv"))?)?;
        write_csv(&robustness, run.create(&format!("robustness_{period}.csv"))?)?;
        write_csv(&trend, run.create(&format!("trend_{period}.csv"))?)?;
        write_csv(&intervals, run.create(&format!("intervals_{period}.csv"))?)?;
        eprintln!("{period}: {} forecasts evaluated", rows.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct IntransitivityRow<'a> {
    match_id: &'a str,
    period: Period,
    tour: Tour,
    surface: tennis_graph::ingest::Surface,
    date: chrono::NaiveDate,
    player_a: &'a str,
    player_b: &'a str,
    raw: f64,
    evidence_weight: f64,
    weighted: f64,
    neighbourhood: usize,
}

pub fn intransitivity(run: &mut Run, tours: &[Tour]) -> anyhow::Result<()> {
    let records = load_predictions(run, tours)?;
    let rows: Vec<IntransitivityRow> = records
        .iter()
        .map(|r| IntransitivityRow {
            match_id: &r.match_id,
            period: r.period,
            tour: r.tour,
            surface: r.surface,
            date: r.date,
            player_a: &r.player_a,
            player_b: &r.player_b,
            raw: r.intransitivity_raw,
            evidence_weight: r.evidence_weight,
            weighted: r.intransitivity,
            neighbourhood: r.neighbourhood,
        })
        .collect();
    write_csv(&rows, run.create("intransitivity.csv")?)?;
    for (period, rs) in periods(&records) {
        write_csv(&intransitivity_summary(&rs), run.create(&format!("intransitivity_summary_{period}.csv"))?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ReportRow {
    method: Source,
    gamma: String,
    kelly_bets: usize,
    kelly_staked: f64,
    kelly_return: f64,
    kelly_profit: f64,
    kelly_roi_pct: Option<f64>,
    kelly_sharpe: Option<f64>,
    unit_bets: usize,
    unit_staked: f64,
    unit_return: f64,
    unit_profit: f64,
    unit_roi_pct: Option<f64>,
    unit_sharpe: Option<f64>,
}

fn annual_sharpe(sim: &Simulation) -> Option<f64> {
    let daily: Vec<f64> = daily_profits(&sim.bets).into_iter().map(|(_, p)| p).collect();
    sharpe(&daily)
}

fn report_row(records: &[PredictionRecord], source: Source, gamma: Option<f64>) -> ReportRow {
    let run = |staking| simulate(records, &Strategy { staking, gamma, source });
    let (k, u) = (run(Staking::Kelly), run(Staking::Unit));
    ReportRow {
        method: source,
        gamma: gamma.map_or("none".into(), |g| g.to_string()),
        kelly_bets: k.bets.len(),
        kelly_staked: k.staked,
        kelly_return: k.returned,
        kelly_profit: k.profit,
        kelly_roi_pct: k.roi.map(|r| 100.0 * r),
        kelly_sharpe: annual_sharpe(&k),
        unit_bets: u.bets.len(),
        unit_staked: u.staked,
        unit_return: u.returned,
        unit_profit: u.profit,
        unit_roi_pct: u.roi.map(|r| 100.0 * r),
        unit_sharpe: annual_sharpe(&u),
    }
}

#[derive(Serialize)]
struct BetSummary {
    source: Source,
    staking: Staking,
    gamma: Option<f64>,
    validation_gamma: Option<f64>,
    bets: usize,
    staked: f64,
    profit: f64,
    roi: Option<f64>,
    sharpe: Option<f64>,
    skipped_no_odds: usize,
    significance_trials: usize,
    p_value: Option<f64>,
}

pub fn bet(
    run: &mut Run,
    tours: &[Tour],
    gamma: Option<f64>,
    staking: Option<Staking>,
    source: Option<Source>,
) -> anyhow::Result<()> {
    let records = load_predictions(run, tours)?;
    let cfg = run.config.betting.clone();
    let gamma = gamma.unwrap_or(cfg.gamma);
    if !(gamma >= 0.0) {
        bail!("--gamma must be non-negative");
    }
    let gamma = (gamma > 0.0).then_some(gamma);
    let staking = staking.unwrap_or(cfg.staking);
    let source = source.unwrap_or(cfg.source);

    let validation: Vec<PredictionRecord> = records.iter().filter(|r| r.period == Period::Validation).cloned().collect();
    let test: Vec<PredictionRecord> = records.iter().filter(|r| r.period == Period::Test).cloned().collect();

    let mut validation_gamma = None;
    if !validation.is_empty() {
        let search = threshold_search(&validation, source);
        write_csv(&search.grid, run.create("gamma_grid_validation.csv")?)?;
        validation_gamma = search.best.map(|b| b.gamma);
    }
    if test.is_empty() {
        bail!("the prediction ledger has no test-period rows");
    }
    write_csv(&threshold_search(&test, source).grid, run.create("gamma_grid_test.csv")?)?;

    let mut report = Vec::new();
    for method in [source, Source::Welo] {
        if report.iter().any(|r: &ReportRow| r.method == method) {
            continue;
        }
        for g in [gamma, None] {
            report.push(report_row(&test, method, g));
            if gamma.is_none() {
                break;
            }
        }
    }
    write_csv(&report, run.create("betting_report.csv")?)?;

    let sim = simulate(&test, &Strategy { staking, gamma, source });
    write_bets(&sim.bets, run.create("bets.csv")?)?;
    let p_value = match sim.roi {
        Some(_) => Some(significance_mc(&sim, &test, staking, source, cfg.trials, run.config.seed)?.p_value),
        None => None,
    };
    let summary = BetSummary {
        source,
        staking,
        gamma,
        validation_gamma,
        bets: sim.bets.len(),
        staked: sim.staked,
        profit: sim.profit,
        roi: sim.roi,
        sharpe: annual_sharpe(&sim),
        skipped_no_odds: sim.skipped_no_odds,
        significance_trials: cfg.trials,
        p_value,
    };
    eprintln!(
        "{staking} staking on {source}, gamma {}: {} bets, ROI {}",
        gamma.map_or("none".into(), |g| g.to_string()),
        summary.bets,
        summary.roi.map_or("n/a".into(), |r| format!("{:.2}%", 100.0 * r))
    );
    run.write_json("bet_summary.json", &summary)?;
    Ok(())
}

pub fn pareto(run: &mut Run, trials: &Path) -> anyhow::Result<()> {
    let path = run.input(trials)?;
    let mut rdr = csv::Reader::from_path(&path)?;
    let all: Vec<Trial> = rdr.deserialize().collect::<Result<_, _>>().with_context(|| format!("reading {}", path.display()))?;
    let front = pareto_front(&all);
    eprintln!("{} of {} trials on the front", front.len(), all.len());
    write_csv(&front, run.create("pareto_front.csv")?)?;
    Ok(())
}
