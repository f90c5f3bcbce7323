use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use super::operator::{power_iteration, CsrMatrix};
use crate::graphs::{Edge, SurfaceGraph};

pub const POWER_TOL: f64 = 1e-6;
pub const POWER_MAX_ITER: usize = 1000;
/// Upper bound of the normalised magnetic Laplacian spectrum.
pub const SPECTRAL_BOUND: f64 = 2.0;

/// Normalised magnetic Laplacian of a weighted digraph.
///
/// `A_s = (A + Aᵀ)/2`, phases `2πq(A(u,v) − A(v,u))`, and
/// `L = I − D_s^{-1/2} A_s D_s^{-1/2} ⊙ exp(iΘ)`. Zero-degree nodes keep a
/// plain identity row. Parallel edges between the same ordered pair add up;
/// self-loops are ignored.
pub fn magnetic_laplacian(n: usize, edges: &[Edge], q: f64) -> CsrMatrix {
    // directed weights keyed by unordered pair: (low→high, high→low)
    let mut pairs: BTreeMap<(usize, usize), (f64, f64)> = BTreeMap::new();
    for e in edges.iter().filter(|e| e.from != e.to) {
        let (lo, hi) = (e.from.min(e.to), e.from.max(e.to));
        let slot = pairs.entry((lo, hi)).or_insert((0.0, 0.0));
        if e.from == lo {
            slot.0 += e.weight;
        } else {
            slot.1 += e.weight;
        }
    }
    let mut degree = vec![0.0; n];
    for (&(lo, hi), &(fwd, back)) in &pairs {
        let s = 0.5 * (fwd + back);
        degree[lo] += s;
        degree[hi] += s;
    }

    let mut rows: Vec<Vec<(usize, Complex64)>> = (0..n).map(|i| vec![(i, Complex64::new(1.0, 0.0))]).collect();
    for (&(lo, hi), &(fwd, back)) in &pairs {
        let s = 0.5 * (fwd + back);
        let theta = 2.0 * PI * q * (fwd - back);
        let entry = -Complex64::from_polar(s / (degree[lo] * degree[hi]).sqrt(), theta);
        rows[lo].push((hi, entry));
        rows[hi].push((lo, entry.conj()));
    }
    CsrMatrix::from_rows(rows)
}

/// Rescaled operator `2L/λ_max − I` and the λ_max used.
///
/// λ_max comes from power iteration; a non-converged or non-positive
/// estimate, or an operator without off-diagonal structure, falls back to
/// the spectral bound 2.
pub fn chebyshev_rescale(laplacian: &CsrMatrix) -> (CsrMatrix, f64) {
    let lambda_max = if laplacian.is_diagonal() {
        SPECTRAL_BOUND
    } else {
        let r = power_iteration(laplacian, POWER_TOL, POWER_MAX_ITER);
        if r.converged && r.eigenvalue > 1e-12 {
            r.eigenvalue
        } else {
            SPECTRAL_BOUND
        }
    };
    (laplacian.scale_shift(2.0 / lambda_max, -1.0), lambda_max)
}

/// One surface's Laplacian with its Chebyshev-ready rescaling.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceOperator {
    pub laplacian: CsrMatrix,
    pub scaled: CsrMatrix,
    pub lambda_max: f64,
}

impl SurfaceOperator {
    pub fn new(n: usize, edges: &[Edge], q: f64) -> Self {
        let laplacian = magnetic_laplacian(n, edges, q);
        let (scaled, lambda_max) = chebyshev_rescale(&laplacian);
        SurfaceOperator {
            laplacian,
            scaled,
            lambda_max,
        }
    }

    pub fn from_graph(graph: &SurfaceGraph, q: f64) -> Self {
        Self::new(graph.n_nodes, &graph.edges, q)
    }

    pub fn n_nodes(&self) -> usize {
        self.laplacian.dim()
    }
}

/// Operators for the hard, clay and grass graphs of one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianBundle {
    pub surfaces: [SurfaceOperator; 3],
}

impl LaplacianBundle {
    pub fn from_graphs(graphs: &[SurfaceGraph; 3], q: f64) -> Self {
        LaplacianBundle {
            surfaces: [
                SurfaceOperator::from_graph(&graphs[0], q),
                SurfaceOperator::from_graph(&graphs[1], q),
                SurfaceOperator::from_graph(&graphs[2], q),
            ],
        }
    }
}
