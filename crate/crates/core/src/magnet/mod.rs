//! Complex-spectral graph convolution over the magnetic Laplacian.

mod checkpoint;
mod laplacian;
mod model;
mod operator;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, FORMAT_VERSION};
pub use laplacian::{chebyshev_rescale, magnetic_laplacian, LaplacianBundle, SurfaceOperator, POWER_MAX_ITER, POWER_TOL, SPECTRAL_BOUND};
pub use model::{
    edge_probability, embed_all, forward, loss_and_gradients, set_win_probability, Forward, Gradients, MagnetHyperparams, ModelState,
    Moments, SetSample,
};
pub use operator::{power_iteration, CsrMatrix, PowerIteration};
pub use train::{adam_step, train, write_loss_trace, ADAM_EPS, BETA1, BETA2};

use crate::error::{Error, Result};

/// Match win probability from an i.i.d. per-set probability.
pub fn match_win_probability(p_set: f64, best_of: u8) -> Result<f64> {
    let p = p_set;
    let l = 1.0 - p;
    match best_of {
        3 => Ok(p * p + 2.0 * p * p * l),
        5 => {
            let p3 = p * p * p;
            Ok(p3 + 3.0 * p3 * l + 6.0 * p3 * l * l)
        }
        other => Err(Error::BestOf(other)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Sums the probability of every set sequence that ends the match.
    fn enumerate(p: f64, best_of: u32) -> f64 {
        let need = best_of / 2 + 1;
        fn walk(p: f64, need: u32, won: u32, lost: u32) -> f64 {
            if won == need {
                return 1.0;
            }
            if lost == need {
                return 0.0;
            }
            p * walk(p, need, won + 1, lost) + (1.0 - p) * walk(p, need, won, lost + 1)
        }
        walk(p, need, 0, 0)
    }

    #[test]
    fn formats_match_enumeration() {
        for i in 0..=100 {
            let p = i as f64 / 100.0;
            assert!((match_win_probability(p, 3).unwrap() - enumerate(p, 3)).abs() < 1e-14);
            assert!((match_win_probability(p, 5).unwrap() - enumerate(p, 5)).abs() < 1e-14);
        }
        assert!((match_win_probability(0.6, 3).unwrap() - 0.648).abs() < 1e-12);
        assert!((match_win_probability(0.6, 5).unwrap() - 0.68256).abs() < 1e-12);
    }

    #[test]
    fn fixed_points() {
        assert_eq!(match_win_probability(0.5, 3).unwrap(), 0.5);
        assert_eq!(match_win_probability(0.5, 5).unwrap(), 0.5);
        assert_eq!(match_win_probability(1.0, 3).unwrap(), 1.0);
        assert_eq!(match_win_probability(1.0, 5).unwrap(), 1.0);
    }

    #[test]
    fn other_formats_rejected() {
        assert!(matches!(match_win_probability(0.5, 4), Err(Error::BestOf(4))));
    }
}
