//! Independent oracles shared by the integration and acceptance targets.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tennis_graph::graphs::Edge;
use tennis_graph::ingest::Surface;
use tennis_graph::magnet::{loss_and_gradients, LaplacianBundle, MagnetHyperparams, ModelState, SetSample, SurfaceOperator};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random weighted digraph without self-loops or reciprocal pairs.
pub fn random_digraph(r: &mut ChaCha8Rng, n: usize, density: f64) -> Vec<Edge> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if r.random::<f64>() < density {
                let weight = 0.5 + 0.5 * r.random::<f64>();
                if r.random::<bool>() {
                    edges.push(Edge { from: u, to: v, weight });
                } else {
                    edges.push(Edge { from: v, to: u, weight });
                }
            }
        }
    }
    edges
}

/// Eigenvalues of a Hermitian matrix from the dense solver.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Six-node fixture: a directed triangle and two chains over the hard and
/// clay graphs, with set samples on both surfaces.
pub fn six_node_fixture() -> (LaplacianBundle, DMatrix<f64>, Vec<SetSample>) {
    let e = |from, to, weight| Edge { from, to, weight };
    let hard = vec![e(0, 1, 0.8), e(1, 2, 0.6), e(2, 0, 0.7), e(3, 4, 0.9), e(2, 5, 0.65)];
    let clay = vec![e(1, 0, 0.55), e(4, 5, 0.75), e(3, 1, 0.6)];
    let grass = vec![e(5, 0, 0.85)];
    let bundle = LaplacianBundle {
        surfaces: [
            SurfaceOperator::new(6, &hard, 0.25),
            SurfaceOperator::new(6, &clay, 0.25),
            SurfaceOperator::new(6, &grass, 0.25),
        ],
    };
    let x = DMatrix::from_fn(6, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 / 5.0 + 0.1);
    let s = |u, v, surface, label| SetSample { u, v, surface, label };
    let samples = vec![
        s(0, 1, Surface::Hard, 1.0),
        s(1, 2, Surface::Hard, 1.0),
        s(2, 0, Surface::Hard, 0.0),
        s(4, 3, Surface::Hard, 0.0),
        s(1, 0, Surface::Clay, 1.0),
        s(4, 5, Surface::Clay, 1.0),
        s(5, 0, Surface::Grass, 1.0),
        s(0, 5, Surface::Grass, 1.0),
    ];
    (bundle, x, samples)
}

/// State with a random non-zero head, so filter gradients do not vanish.
pub fn perturbed_state(hp: &MagnetHyperparams, input_dim: usize, seed: u64) -> ModelState {
    let mut state = ModelState::new(input_dim, hp, seed);
    let mut r = rng(seed ^ 0xabc);
    state.head_weight = state.head_weight.map(|_| r.random::<f64>() - 0.5);
    state.head_bias = [r.random::<f64>() - 0.5, r.random::<f64>() - 0.5];
    state
}

/// Relative disagreement `‖a − n‖ / max(‖a‖, ‖n‖)` between analytic and
/// central-difference gradients, per parameter class.
#[derive(Debug)]
pub struct GradientReport {
    pub classes: Vec<(String, f64)>,
}

impl GradientReport {
    pub fn worst(&self) -> f64 {
        self.classes.iter().map(|c| c.1).fold(0.0, f64::max)
    }
}

fn relative(a: &[f64], n: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(n).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(n));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub fn gradient_check(
    bundle: &LaplacianBundle,
    x: &DMatrix<f64>,
    samples: &[SetSample],
    state: &ModelState,
    hp: &MagnetHyperparams,
    dropout_seed: Option<u64>,
    eps: f64,
) -> GradientReport {
    let loss = |s: &ModelState| loss_and_gradients(bundle, x, samples, s, hp, dropout_seed).unwrap().0;
    let (_, grads) = loss_and_gradients(bundle, x, samples, state, hp, dropout_seed).unwrap();
    let mut classes = Vec::new();
    for l in 0..state.filters.len() {
        for k in 0..state.filters[l].len() {
            for part in ["re", "im"] {
                let mut analytic = Vec::new();
                let mut numeric = Vec::new();
                for idx in 0..state.filters[l][k].len() {
                    let g = grads.filters[l][k][idx];
                    analytic.push(if part == "re" { g.re } else { g.im });
                    let bump = if part == "re" { Complex64::new(eps, 0.0) } else { Complex64::new(0.0, eps) };
                    let mut plus = state.clone();
                    plus.filters[l][k][idx] += bump;
                    let mut minus = state.clone();
                    minus.filters[l][k][idx] -= bump;
                    numeric.push((loss(&plus) - loss(&minus)) / (2.0 * eps));
                }
                classes.push((format!("filter[{l}][{k}].{part}"), relative(&analytic, &numeric)));
            }
        }
    }
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for idx in 0..state.head_weight.len() {
        analytic.push(grads.head_weight[idx]);
        let mut plus = state.clone();
        plus.head_weight[idx] += eps;
        let mut minus = state.clone();
        minus.head_weight[idx] -= eps;
        numeric.push((loss(&plus) - loss(&minus)) / (2.0 * eps));
    }
    classes.push(("head_weight".into(), relative(&analytic, &numeric)));
    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for r in 0..2 {
        analytic.push(grads.head_bias[r]);
        let mut plus = state.clone();
        plus.head_bias[r] += eps;
        let mut minus = state.clone();
        minus.head_bias[r] -= eps;
        numeric.push((loss(&plus) - loss(&minus)) / (2.0 * eps));
    }
    classes.push(("head_bias".into(), relative(&analytic, &numeric)));
    GradientReport { classes }
}

/// Fits ordinary least squares of the potential-difference model
/// `A[i,j] ≈ s_i − s_j` over all ordered pairs via the normal equations,
/// pinning `Σ s = 0`, and returns the fitted `T`.
pub fn least_squares_potential(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let rows = n * (n - 1) + 1;
    let mut design = DMatrix::<f64>::zeros(rows, n);
    let mut target = nalgebra::DVector::<f64>::zeros(rows);
    let mut r = 0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                design[(r, i)] = 1.0;
                design[(r, j)] = -1.0;
                target[r] = a[(i, j)];
                r += 1;
            }
        }
    }
    for i in 0..n {
        design[(r, i)] = 1.0;
    }
    let normal = design.transpose() * &design;
    let rhs = design.transpose() * target;
    let s = normal.lu().solve(&rhs).expect("pinned normal equations are regular");
    DMatrix::from_fn(n, n, |i, j| s[i] - s[j])
}

/// `argmax_f E[log(1 + f(o-1)W − f(1-W))]` over `[0, 1)`: a uniform grid,
/// then repeated finer grids around the incumbent.
pub fn kelly_grid(p: f64, odds: f64) -> f64 {
    let growth = |f: f64| p * (1.0 + f * (odds - 1.0)).ln() + (1.0 - p) * (1.0 - f).ln();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut best = 0.0;
    for _ in 0..12 {
        let steps = 100;
        let h = (hi - lo) / steps as f64;
        let mut top = (lo, f64::NEG_INFINITY);
        for i in 0..=steps {
            let f = (lo + i as f64 * h).min(1.0 - 1e-12);
            let g = growth(f);
            if g > top.1 {
                top = (f, g);
            }
        }
        best = top.0;
        lo = (best - h).max(0.0);
        hi = (best + h).min(1.0);
    }
    best
}

/// Walk-forward settings sized for the small synthetic corpus.
pub fn small_walk_forward(tour: tennis_graph::ingest::Tour) -> tennis_graph::pipeline::WalkForwardConfig {
    use chrono::NaiveDate;
    use tennis_graph::pipeline::{DateRange, WalkForwardConfig};
    let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).unwrap();
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
    c.model.initial_epochs = 15;
    c.model.retrain_epochs = 4;
    c.model.retrain_interval_snapshots = 5;
    c
}

/// Ledger row with every probability column set to `p` and the given odds.
pub fn ledger_row(
    id: usize,
    players: (&str, &str),
    p: f64,
    odds: Option<(f64, f64)>,
    outcome: u8,
    intransitivity: f64,
) -> tennis_graph::pipeline::PredictionRecord {
    use chrono::NaiveDate;
    use tennis_graph::ingest::{Surface, Tier, Tour};
    use tennis_graph::pipeline::{Period, PredictionRecord};
    PredictionRecord {
        match_id: format!("m{id:05}"),
        period: Period::Test,
        snapshot: id / 50,
        date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Duration::days((id / 10) as i64),
        tour: Tour::Men,
        tournament: "T".into(),
        tier: Tier::T500,
        surface: Surface::Hard,
        best_of: 3,
        player_a: players.0.into(),
        player_b: players.1.into(),
        outcome,
        model: p,
        model_set: p,
        elo: p,
        welo: p,
        bt: p,
        shin: odds.map(|_| p),
        odds_a: odds.map(|o| o.0),
        odds_b: odds.map(|o| o.1),
        intransitivity_raw: intransitivity,
        evidence_weight: if intransitivity > 0.0 { 1.0 } else { 0.0 },
        intransitivity,
        neighbourhood: 0,
    }
}
