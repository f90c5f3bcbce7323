mod common;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

use common::*;
use tennis_graph::graphs::Edge;
use tennis_graph::ingest::Surface;
use tennis_graph::magnet::*;

#[test]
fn laplacian_hermitian_with_bounded_spectrum() {
    let mut r = rng(11);
    for _ in 0..60 {
        let n = r.random_range(2..=25);
        let edges = random_digraph(&mut r, n, 0.3);
        let l = magnetic_laplacian(n, &edges, 0.25);
        assert!(l.hermitian_defect() < 1e-10);
        let ev = hermitian_eigenvalues(&l.to_dense());
        assert!(ev[0] > -1e-8 && *ev.last().unwrap() < 2.0 + 1e-8, "{ev:?}");
    }
}

#[test]
fn power_iteration_matches_dense_solver() {
    let mut r = rng(5);
    for _ in 0..20 {
        let n = r.random_range(3..=12);
        let b = DMatrix::from_fn(n, n, |_, _| Complex64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5));
        let psd = &b * b.adjoint();
        let dense = *hermitian_eigenvalues(&psd).last().unwrap();
        let est = power_iteration(&CsrMatrix::from_dense(&psd), 1e-12, 100_000);
        assert!(est.converged);
        assert!((est.eigenvalue - dense).abs() < 1e-5, "{} vs {dense}", est.eigenvalue);
    }
}

#[test]
fn rescaled_spectrum_in_unit_interval() {
    let mut r = rng(8);
    for _ in 0..20 {
        let n = r.random_range(2..=20);
        let edges = random_digraph(&mut r, n, 0.4);
        let op = SurfaceOperator::new(n, &edges, 0.25);
        let ev = hermitian_eigenvalues(&op.scaled.to_dense());
        // the Rayleigh estimate of λ_max is a lower bound, so the top end may overshoot slightly
        assert!(ev[0] >= -1.0 - 1e-4 && *ev.last().unwrap() <= 1.0 + 1e-4, "{ev:?}");
    }
}

#[test]
fn analytic_gradients_match_central_differences() {
    let (bundle, x, samples) = six_node_fixture();
    let base = MagnetHyperparams {
        hidden: 3,
        dropout: 0.0,
        ..MagnetHyperparams::default()
    };
    for (hp, dropout_seed) in [
        (base.clone(), None),
        (
            MagnetHyperparams {
                use_activation: true,
                ..base.clone()
            },
            None,
        ),
        (
            MagnetHyperparams {
                order: 3,
                layers: 3,
                dropout: 0.3,
                ..base.clone()
            },
            Some(99),
        ),
    ] {
        let state = perturbed_state(&hp, 4, 21);
        let report = gradient_check(&bundle, &x, &samples, &state, &hp, dropout_seed, 1e-5);
        assert!(report.worst() < 1e-4, "{report:?}");
    }
}

#[test]
fn q_zero_matches_symmetrised_graph() {
    let mut r = rng(17);
    let hp = MagnetHyperparams {
        q: 0.0,
        hidden: 4,
        ..MagnetHyperparams::default()
    };
    let n = 9;
    let edges = random_digraph(&mut r, n, 0.5);
    let symmetric: Vec<Edge> = edges
        .iter()
        .flat_map(|e| {
            [
                Edge {
                    from: e.from,
                    to: e.to,
                    weight: e.weight / 2.0,
                },
                Edge {
                    from: e.to,
                    to: e.from,
                    weight: e.weight / 2.0,
                },
            ]
        })
        .collect();
    let x = DMatrix::from_fn(n, 3, |_, _| r.random::<f64>());
    let state = perturbed_state(&hp, 3, 4);
    let a = forward(&SurfaceOperator::new(n, &edges, 0.0), &x, &state, &hp, None).unwrap();
    let b = forward(&SurfaceOperator::new(n, &symmetric, 0.0), &x, &state, &hp, None).unwrap();
    assert!((a.embedding - b.embedding).abs().max() < 1e-10);
}

#[test]
fn training_is_bitwise_deterministic() {
    let (bundle, x, samples) = six_node_fixture();
    let hp = MagnetHyperparams {
        hidden: 8,
        ..MagnetHyperparams::default()
    };
    let run = || {
        let mut state = ModelState::new(4, &hp, 77);
        let trace = train(&mut state, &bundle, &x, &samples, &hp, 25).unwrap();
        (trace, state)
    };
    let (t1, s1) = run();
    let (t2, s2) = run();
    assert_eq!(t1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), t2.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(s1, s2);
}

#[test]
fn resumed_training_replays_uninterrupted_run() {
    let (bundle, x, samples) = six_node_fixture();
    let hp = MagnetHyperparams {
        hidden: 4,
        ..MagnetHyperparams::default()
    };
    let mut whole = ModelState::new(4, &hp, 3);
    let full = train(&mut whole, &bundle, &x, &samples, &hp, 20).unwrap();
    let mut part = ModelState::new(4, &hp, 3);
    let mut trace = train(&mut part, &bundle, &x, &samples, &hp, 12).unwrap();
    let mut buf = Vec::new();
    write_checkpoint(&part, &hp, &mut buf).unwrap();
    let (mut restored, _) = read_checkpoint(buf.as_slice()).unwrap();
    trace.extend(train(&mut restored, &bundle, &x, &samples, &hp, 8).unwrap());
    assert_eq!(full, trace);
    assert_eq!(whole, restored);
}

/// Strong players 0-2 beat weak players 3-5 in every set; out-degree alone
/// separates them.
fn separable_fixture() -> (LaplacianBundle, DMatrix<f64>, Vec<SetSample>) {
    let mut edges = Vec::new();
    let mut samples = Vec::new();
    for s in 0..3 {
        for w in 3..6 {
            edges.push(Edge {
                from: s,
                to: w,
                weight: 0.7,
            });
            samples.push(SetSample {
                u: s,
                v: w,
                surface: Surface::Hard,
                label: 1.0,
            });
            samples.push(SetSample {
                u: w,
                v: s,
                surface: Surface::Hard,
                label: 0.0,
            });
        }
    }
    let out_deg = |i: usize| if i < 3 { 3.0 } else { 0.0 };
    let in_deg = |i: usize| if i < 3 { 0.0 } else { 3.0 };
    let norm = (3.0f64 * 9.0).sqrt();
    let x = DMatrix::from_fn(6, 3, |i, j| match j {
        0 => out_deg(i) / norm,
        1 => in_deg(i) / norm,
        _ => 1.0 / 6f64.sqrt(),
    });
    let bundle = LaplacianBundle {
        surfaces: [
            SurfaceOperator::new(6, &edges, 0.25),
            SurfaceOperator::new(6, &[], 0.25),
            SurfaceOperator::new(6, &[], 0.25),
        ],
    };
    (bundle, x, samples)
}

/// Plain logistic regression on the feature difference `x_u − x_v`.
fn logistic_oracle_accuracy(x: &DMatrix<f64>, samples: &[SetSample]) -> f64 {
    let mut w = vec![0.0; x.ncols()];
    for _ in 0..2000 {
        let mut g = vec![0.0; w.len()];
        for s in samples {
            let d: Vec<f64> = (0..x.ncols()).map(|j| x[(s.u, j)] - x[(s.v, j)]).collect();
            let z: f64 = d.iter().zip(&w).map(|(a, b)| a * b).sum();
            let p = 1.0 / (1.0 + (-z).exp());
            for j in 0..w.len() {
                g[j] += (p - s.label) * d[j];
            }
        }
        for j in 0..w.len() {
            w[j] -= 0.5 * g[j];
        }
    }
    let hits = samples
        .iter()
        .filter(|s| {
            let z: f64 = (0..x.ncols()).map(|j| (x[(s.u, j)] - x[(s.v, j)]) * w[j]).sum();
            (z > 0.0) == (s.label == 1.0)
        })
        .count();
    hits as f64 / samples.len() as f64
}

#[test]
fn separable_fixture_is_fit_exactly() {
    let (bundle, x, samples) = separable_fixture();
    assert_eq!(logistic_oracle_accuracy(&x, &samples), 1.0);
    let hp = MagnetHyperparams::default();
    let mut state = ModelState::new(3, &hp, 2024);
    let trace = train(&mut state, &bundle, &x, &samples, &hp, 150).unwrap();
    let median = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        (s[4] + s[5]) / 2.0
    };
    assert!(median(&trace[140..]) < median(&trace[..10]));
    let emb = embed_all(&bundle, &x, &state, &hp).unwrap();
    let hits = samples
        .iter()
        .filter(|s| (set_win_probability(&emb[0], s.u, s.v, &state) > 0.5) == (s.label == 1.0))
        .count();
    assert_eq!(hits, samples.len());
}

proptest! {
    #[test]
    fn set_probabilities_complement(seed in 0u64..10_000, u in 0usize..6, v in 0usize..6) {
        let (bundle, x, _) = six_node_fixture();
        let hp = MagnetHyperparams { hidden: 3, ..MagnetHyperparams::default() };
        let state = perturbed_state(&hp, 4, seed);
        let f = forward(&bundle.surfaces[0], &x, &state, &hp, None).unwrap();
        let total = set_win_probability(&f.embedding, u, v, &state) + set_win_probability(&f.embedding, v, u, &state);
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn match_probability_monotone_and_format_ordered(a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assume!(hi - lo > 1e-9);
        for best_of in [3u8, 5] {
            prop_assert!(match_win_probability(lo, best_of).unwrap() < match_win_probability(hi, best_of).unwrap());
        }
        let p3 = match_win_probability(a, 3).unwrap();
        let p5 = match_win_probability(a, 5).unwrap();
        if a > 0.5 { prop_assert!(p5 >= p3); }
        if a < 0.5 { prop_assert!(p5 <= p3); }
    }
}
