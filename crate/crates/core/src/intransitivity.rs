//! Evidence-weighted intransitivity of a matchup from the cyclic part of its
//! common-opponent neighbourhood.

use std::collections::BTreeSet;
use std::io::Write;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::{DominanceLedger, GraphParams, SurfaceGraph};
use crate::ingest::Surface;

pub const LOGIT_CLAMP: f64 = 1e-3;

/// Per-node neighbour sets of the shared edge index.
#[derive(Debug, Clone)]
pub struct NeighbourIndex {
    neighbours: Vec<BTreeSet<usize>>,
}

impl NeighbourIndex {
    /// Every surface graph carries the same pairs, so any one of them
    /// defines the index.
    pub fn new(graph: &SurfaceGraph) -> Self {
        let mut neighbours = vec![BTreeSet::new(); graph.n_nodes];
        for e in &graph.edges {
            neighbours[e.from].insert(e.to);
            neighbours[e.to].insert(e.from);
        }
        NeighbourIndex { neighbours }
    }

    pub fn neighbours(&self, u: usize) -> &BTreeSet<usize> {
        &self.neighbours[u]
    }

    /// Players linked to both `u` and `v`, in index order.
    pub fn common_opponents(&self, u: usize, v: usize) -> Vec<usize> {
        self.neighbours[u]
            .intersection(&self.neighbours[v])
            .copied()
            .filter(|&w| w != u && w != v)
            .collect()
    }
}

pub fn clamped_logit(w: f64) -> f64 {
    let w = w.clamp(LOGIT_CLAMP, 1.0 - LOGIT_CLAMP);
    (w / (1.0 - w)).ln()
}

/// Antisymmetric logit advantages over a node subset. Pairs without an edge
/// hold zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvantageMatrix {
    pub nodes: Vec<usize>,
    pub values: DMatrix<f64>,
    pub observed: DMatrix<bool>,
}

pub fn advantage_matrix(nodes: &[usize], graph: &SurfaceGraph) -> AdvantageMatrix {
    let n = nodes.len();
    let mut values = DMatrix::zeros(n, n);
    let mut observed = DMatrix::from_element(n, n, false);
    for i in 0..n {
        for j in (i + 1)..n {
            if let Some(w) = graph.dominance_of(nodes[i], nodes[j]) {
                let a = clamped_logit(w);
                values[(i, j)] = a;
                values[(j, i)] = -a;
                observed[(i, j)] = true;
                observed[(j, i)] = true;
            }
        }
    }
    AdvantageMatrix {
        nodes: nodes.to_vec(),
        values,
        observed,
    }
}

/// Potentials are rounded to multiples of this step. Inputs on the same grid
/// then decompose without rounding error, so `T + C` reproduces `A` exactly.
pub const POTENTIAL_GRID: f64 = 1.0 / (1u64 << 40) as f64;

/// Splits an antisymmetric matrix into the potential-difference part
/// `T[i,j] = s_i − s_j`, with `s_i` the row mean, and the remainder.
pub fn hodge_decompose(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if n < 2 {
        return Err(Error::TooSmall);
    }
    if a.ncols() != n {
        return Err(Error::Shape(format!("advantage matrix is {}x{}", n, a.ncols())));
    }
    let s: Vec<f64> = (0..n)
        .map(|i| (a.row(i).sum() / n as f64 / POTENTIAL_GRID).round() * POTENTIAL_GRID)
        .collect();
    let t = DMatrix::from_fn(n, n, |i, j| s[i] - s[j]);
    let c = a - &t;
    Ok((t, c))
}

/// `(1 + ‖C‖_F) / (1 + ‖T‖_F)`.
pub fn intransitivity_ratio(transitive: &DMatrix<f64>, cyclic: &DMatrix<f64>) -> f64 {
    (1.0 + cyclic.norm()) / (1.0 + transitive.norm())
}

pub fn intransitivity(a: &DMatrix<f64>) -> Result<f64> {
    let (t, c) = hodge_decompose(a)?;
    Ok(intransitivity_ratio(&t, &c))
}

/// How pairs without a shared edge enter the decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnobservedPairs {
    /// Held at zero advantage and fitted like every other pair.
    #[default]
    ZeroFill,
    /// Left out: potentials are fitted on observed pairs only, and both parts
    /// vanish off them.
    Excluded,
}

/// Least-squares potentials over the observed pairs only. Each connected
/// component of the mask gets zero-mean potentials.
pub fn hodge_decompose_observed(a: &DMatrix<f64>, observed: &DMatrix<bool>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if n < 2 {
        return Err(Error::TooSmall);
    }
    if a.ncols() != n || observed.shape() != a.shape() {
        return Err(Error::Shape(format!("advantage matrix is {}x{}", n, a.ncols())));
    }
    let mut laplacian = DMatrix::<f64>::zeros(n, n);
    let mut divergence = DVector::<f64>::zeros(n);
    for i in 0..n {
        for j in 0..n {
            if i != j && observed[(i, j)] {
                laplacian[(i, i)] += 1.0;
                laplacian[(i, j)] -= 1.0;
                divergence[i] += a[(i, j)];
            }
        }
    }
    let s = laplacian
        .pseudo_inverse(1e-10)
        .map_err(|e| Error::Shape(e.to_string()))?
        * divergence;
    let t = DMatrix::from_fn(n, n, |i, j| if observed[(i, j)] { s[i] - s[j] } else { 0.0 });
    let c = DMatrix::from_fn(n, n, |i, j| if observed[(i, j)] { a[(i, j)] - t[(i, j)] } else { 0.0 });
    Ok((t, c))
}

pub fn matrix_intransitivity(adv: &AdvantageMatrix, policy: UnobservedPairs) -> Result<f64> {
    let (t, c) = match policy {
        UnobservedPairs::ZeroFill => hodge_decompose(&adv.values)?,
        UnobservedPairs::Excluded => hodge_decompose_observed(&adv.values, &adv.observed)?,
    };
    Ok(intransitivity_ratio(&t, &c))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntransitivityScore {
    pub match_id: String,
    pub raw: f64,
    pub evidence_weight: f64,
    pub weighted: f64,
    pub neighbourhood: usize,
}

/// Intransitivity of `u` against `v` on `surface`, scaled by the square root
/// of their accumulated head-to-head weight before `at`.
#[allow(clippy::too_many_arguments)]
pub fn weighted_intransitivity(
    match_id: &str,
    u: usize,
    v: usize,
    surface: Surface,
    graphs: &[SurfaceGraph; 3],
    index: &NeighbourIndex,
    ledger: &DominanceLedger,
    at: NaiveDate,
    params: &GraphParams,
) -> IntransitivityScore {
    let common = index.common_opponents(u, v);
    let mut nodes = vec![u, v];
    nodes.extend(&common);
    let adv = advantage_matrix(&nodes, &graphs[surface.index()]);
    let raw = matrix_intransitivity(&adv, params.unobserved_pairs).expect("neighbourhood holds at least u and v");
    let evidence = ledger.dominance(u, v, surface, at, params).map_or(0.0, |d| d.evidence);
    let evidence_weight = evidence.sqrt();
    IntransitivityScore {
        match_id: match_id.to_string(),
        raw,
        evidence_weight,
        weighted: raw * evidence_weight,
        neighbourhood: common.len(),
    }
}

pub fn write_scores<W: Write>(scores: &[IntransitivityScore], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in scores {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}
