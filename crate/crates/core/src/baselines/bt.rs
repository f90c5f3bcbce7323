//! Bradley–Terry strengths via iterative Luce spectral ranking over a
//! trailing window of results.

use std::collections::{BTreeMap, HashMap};

use chrono::{Days, NaiveDate};
use faer::linalg::solvers::Solve;
use faer::Mat;

use crate::ingest::MatchRecord;

pub const REGULARISATION: f64 = 0.01;
pub const TOLERANCE: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 10_000;
pub const WINDOW_DAYS: u64 = 730;

/// Fitted strengths, scaled so the virtual reference player has strength 1.
#[derive(Debug, Clone, PartialEq)]
pub struct BtFit {
    pub strengths: HashMap<String, f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl BtFit {
    /// Strength of `id`; players absent from the window sit at the
    /// reference level.
    pub fn strength(&self, id: &str) -> f64 {
        self.strengths.get(id).copied().unwrap_or(1.0)
    }

    pub fn predict(&self, a: &str, b: &str) -> f64 {
        let (sa, sb) = (self.strength(a), self.strength(b));
        sa / (sa + sb)
    }
}

/// Weighted comparison `winner` beat `loser` over dense player indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub winner: usize,
    pub loser: usize,
    pub weight: f64,
}

/// Adds one virtual win and one virtual loss of weight `reg` between each
/// player and a reference node (index `n`), the returned comparison list
/// spanning `n + 1` items.
pub fn with_reference_ties(n: usize, comparisons: &[Comparison], reg: f64) -> Vec<Comparison> {
    let mut out = comparisons.to_vec();
    for i in 0..n {
        out.push(Comparison {
            winner: i,
            loser: n,
            weight: reg,
        });
        out.push(Comparison {
            winner: n,
            loser: i,
            weight: reg,
        });
    }
    out
}

/// Stationary distribution of the continuous-time chain that moves from
/// each comparison's loser to its winner at rate `weight / (π_w + π_l)`.
fn stationary(m: usize, comparisons: &[Comparison], pi: &[f64]) -> Option<Vec<f64>> {
    // transposed generator: row i holds the inflow to i
    let mut a = Mat::<f64>::zeros(m, m);
    for c in comparisons {
        let rate = c.weight / (pi[c.winner] + pi[c.loser]);
        a[(c.winner, c.loser)] += rate;
        a[(c.loser, c.loser)] -= rate;
    }
    // replace the last balance equation with Σπ = 1
    for j in 0..m {
        a[(m - 1, j)] = 1.0;
    }
    let mut b = Mat::<f64>::zeros(m, 1);
    b[(m - 1, 0)] = 1.0;
    let x = a.partial_piv_lu().solve(&b);
    let out: Vec<f64> = (0..m).map(|i| x[(i, 0)]).collect();
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// ILSR on `m` items. Each round builds a chain whose rate from loser to
/// winner is `weight / (π_w + π_l)` and takes its stationary distribution as
/// the next strengths. `start` warm-starts the iteration.
pub fn ilsr(m: usize, comparisons: &[Comparison], start: Option<&[f64]>) -> (Vec<f64>, usize, bool) {
    let mut pi: Vec<f64> = match start {
        Some(s) if s.len() == m => s.to_vec(),
        _ => vec![1.0 / m as f64; m],
    };
    for it in 1..=MAX_ITERATIONS {
        let Some(next) = stationary(m, comparisons, &pi) else {
            return (pi, it, false);
        };
        let total: f64 = next.iter().sum();
        let next: Vec<f64> = next.iter().map(|v| (v / total).max(f64::MIN_POSITIVE)).collect();
        let change = pi.iter().zip(&next).map(|(a, b)| ((b - a) / a).abs()).fold(0.0, f64::max);
        pi = next;
        if change < TOLERANCE {
            return (pi, it, true);
        }
    }
    (pi, MAX_ITERATIONS, false)
}

/// Fits strengths on `matches` with the reference-tie regulariser.
pub fn bt_fit<'a, I>(matches: I, warm: Option<&BtFit>) -> BtFit
where
    I: IntoIterator<Item = &'a MatchRecord>,
{
    let mut index: BTreeMap<&str, usize> = BTreeMap::new();
    let mut raw = Vec::new();
    for m in matches {
        raw.push((m.winner_id.as_str(), m.loser_id.as_str()));
        index.entry(m.winner_id.as_str()).or_insert(0);
        index.entry(m.loser_id.as_str()).or_insert(0);
    }
    for (i, slot) in index.values_mut().enumerate() {
        *slot = i;
    }
    let n = index.len();
    let comparisons: Vec<Comparison> = raw
        .iter()
        .map(|(w, l)| Comparison {
            winner: index[w],
            loser: index[l],
            weight: 1.0,
        })
        .collect();
    let all = with_reference_ties(n, &comparisons, REGULARISATION);
    let start = warm.map(|fit| {
        let mut s: Vec<f64> = index.keys().map(|id| fit.strength(id)).collect();
        s.push(1.0);
        let total: f64 = s.iter().sum();
        s.into_iter().map(|v| v / total).collect::<Vec<_>>()
    });
    let (pi, iterations, converged) = ilsr(n + 1, &all, start.as_deref());
    let reference = pi[n];
    let strengths = index.into_iter().map(|(id, i)| (id.to_string(), pi[i] / reference)).collect();
    BtFit {
        strengths,
        iterations,
        converged,
    }
}

/// Rolling refits: strengths for day `d` use results dated in
/// `[d − 730 days, d)`. Matches must be sorted by date.
pub struct RollingBt<'a> {
    matches: &'a [MatchRecord],
    cached: Option<(NaiveDate, BtFit)>,
}

impl<'a> RollingBt<'a> {
    pub fn new(matches: &'a [MatchRecord]) -> Self {
        RollingBt { matches, cached: None }
    }

    pub fn fit_for(&mut self, day: NaiveDate) -> &BtFit {
        if self.cached.as_ref().map(|c| c.0) != Some(day) {
            let start = day.checked_sub_days(Days::new(WINDOW_DAYS)).unwrap_or(NaiveDate::MIN);
            let lo = self.matches.partition_point(|m| m.date < start);
            let hi = self.matches.partition_point(|m| m.date < day);
            let warm = self.cached.take().map(|c| c.1);
            let fit = bt_fit(&self.matches[lo..hi], warm.as_ref());
            self.cached = Some((day, fit));
        }
        &self.cached.as_ref().expect("cache filled above").1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_result_orders_players() {
        let c = [Comparison {
            winner: 0,
            loser: 1,
            weight: 1.0,
        }];
        let all = with_reference_ties(2, &c, REGULARISATION);
        let (pi, _, converged) = ilsr(3, &all, None);
        assert!(converged);
        let p = pi[0] / (pi[0] + pi[1]);
        assert!(p > 0.5 && p < 1.0);
    }

    #[test]
    fn balanced_round_robin_is_flat() {
        let mut c = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    c.push(Comparison {
                        winner: i,
                        loser: j,
                        weight: 1.0,
                    });
                }
            }
        }
        let all = with_reference_ties(4, &c, REGULARISATION);
        let (pi, _, _) = ilsr(5, &all, None);
        for i in 1..4 {
            assert!((pi[i] / pi[0] - 1.0).abs() < 1e-9);
        }
        assert!((pi[0] / pi[4] - 1.0).abs() < 1e-9);
    }
}
