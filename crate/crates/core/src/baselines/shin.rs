//! Margin removal for two-way decimal odds under Shin's insider model.

/// De-margined probabilities for one market.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShinResult {
    pub probs: [f64; 2],
    /// Estimated insider fraction.
    pub z: f64,
    /// Set when the implied booksum is below 1 and plain normalisation was
    /// used instead.
    pub arbitrage: bool,
}

pub const BISECTION_TOL: f64 = 1e-10;

fn fair(pi: f64, booksum: f64, z: f64) -> f64 {
    ((z * z + 4.0 * (1.0 - z) * pi * pi / booksum).sqrt() - z) / (2.0 * (1.0 - z))
}

fn excess(implied: &[f64; 2], booksum: f64, z: f64) -> f64 {
    implied.iter().map(|&p| fair(p, booksum, z)).sum::<f64>() - 1.0
}

/// Fair probabilities from decimal odds `(o_a, o_b)`, both above 1.
pub fn shin_probabilities(odds_a: f64, odds_b: f64) -> ShinResult {
    let implied = [1.0 / odds_a, 1.0 / odds_b];
    let booksum = implied[0] + implied[1];
    if booksum < 1.0 {
        return ShinResult {
            probs: [implied[0] / booksum, implied[1] / booksum],
            z: 0.0,
            arbitrage: true,
        };
    }
    // The fair sum decreases in z from Π towards Σπ²/Π < 1, so the root lies in
    // [0, 1). Π − 1 brackets it only for level prices; otherwise halve the gap to 1.
    let mut lo = 0.0;
    let mut hi = (booksum - 1.0).max(BISECTION_TOL);
    while excess(&implied, booksum, hi) > 0.0 {
        lo = hi;
        hi = 0.5 * (1.0 + hi);
    }
    if excess(&implied, booksum, lo) <= 0.0 {
        hi = lo;
    }
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if excess(&implied, booksum, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = 0.5 * (lo + hi);
    let a = fair(implied[0], booksum, z);
    let b = fair(implied[1], booksum, z);
    ShinResult {
        probs: [a / (a + b), b / (a + b)],
        z,
        arbitrage: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fair_even_market() {
        let r = shin_probabilities(2.0, 2.0);
        assert_eq!(r.z, 0.0);
        assert_eq!(r.probs, [0.5, 0.5]);
        assert!(!r.arbitrage);
    }

    #[test]
    fn arbitrage_normalised_and_flagged() {
        let r = shin_probabilities(2.2, 2.1);
        assert!(r.arbitrage);
        assert!((r.probs[0] + r.probs[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn solved_z_reconstructs_implied() {
        let r = shin_probabilities(1.50, 2.75);
        let booksum: f64 = 1.0 / 1.5 + 1.0 / 2.75;
        assert!((booksum - 1.0303).abs() < 1e-4);
        // inverse map: π_i = sqrt(Π (z p_i + (1 − z) p_i²))
        for (p, o) in r.probs.iter().zip([1.50, 2.75]) {
            let back = (booksum * (r.z * p + (1.0 - r.z) * p * p)).sqrt();
            assert!((back - 1.0 / o).abs() < 1e-8, "{back} vs {}", 1.0 / o);
        }
        assert!(r.probs[0] > r.probs[1]);
    }
}
