//! Reference predictors: Elo, games-weighted Elo, Bradley–Terry and
//! de-margined bookmaker odds.

mod bt;
mod elo;
mod shin;

pub use bt::{bt_fit, ilsr, with_reference_ties, BtFit, Comparison, RollingBt, MAX_ITERATIONS, REGULARISATION, TOLERANCE, WINDOW_DAYS};
pub use elo::{elo_predict, games_share_multiplier, k_factor, EloState, EloWeighting, PlayerRating, GAMES_SHARE_SLOPE, INITIAL_RATING};
pub use shin::{shin_probabilities, ShinResult, BISECTION_TOL};
