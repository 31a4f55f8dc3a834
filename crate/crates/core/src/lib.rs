//! Simulation and estimation toolkit for continuous-time nearest-neighbour
//! random walks on one-dimensional dynamical random environments.
//!
//! The crate is organised bottom-up:
//!
//! * [`rng`], [`lattice`], [`clock`]: splittable randomness, space-time
//!   primitives, and the per-site Poisson clock field that drives everything.
//! * [`env`]: interacting-particle environments (contact process, East model,
//!   renewal chains, independent spin flips) as queryable trajectories.
//! * [`walker`]: jump rules, single and coupled walker runs, allowed-path
//!   checking, reachability envelopes.
//! * [`renorm`]: multi-scale ladders, displacement-deviation events and their
//!   Monte Carlo estimators, speed brackets, trap/threat census machinery.
//! * [`mixing`]: box observables, covariance estimation, decay-profile fits.
//! * [`soup`]: the tilted-rectangle Poisson soup, its colour field, drift
//!   walkers and fluctuation/covariance experiments.

pub mod clock;
pub mod env;
pub mod error;
pub mod lattice;
pub mod mixing;
pub mod renorm;
pub mod rng;
pub mod soup;
pub mod stats;
pub mod walker;

pub use clock::{sample_clock_field, Arrival, ClockField, ClockStep, Clocks, LazyClockField};
pub use env::contact::{contact_dual_ancestors, contact_simulate, contact_simulate_stationary};
pub use env::east::{
    draw_east_init, east_distinguished_zero, east_front, east_simulate, east_zero_run,
    front_initial_configuration, leftmost_zero_path, EastRealization, Ring,
};
pub use env::renewal::{
    occupation_frequencies, renewal_generator_residual, renewal_simulate, renewal_stationary,
    RenewalLaw,
};
pub use env::spinflip::{spinflip_autocovariance, spinflip_simulate};
pub use env::{
    Boundary, EastInit, EnvInstance, EnvTrajectory, Environment, ModelParams, StateSpace,
};
pub use error::{Error, Result};
pub use lattice::{time_distance, PlanePoint, SpaceTimeBox, SpaceTimePoint, TimeGap};
pub use mixing::{
    covariance_decay_profile, estimate_box_covariance, fit_decay, BoxObservable, DecayFit,
    DecayModel, DecayOutcome, ObservableKind,
};
pub use renorm::{
    bracket_speeds, build_ladder, census_starts, concentration_diagnostic, estimate_ph,
    estimate_ph_tilde, event_a, event_a_tilde, is_threatened, is_trapped, round_point,
    threatened_density, trapped_at, BracketPoint, ConcentrationTable, LadderVariant, PhEstimate,
    ScaleEntry, ScaleLadder, SpeedBracket,
};
pub use soup::{
    color_at, fluctuation_experiment, generate_soup, rect_touches_box, run_drift_walker,
    soup_covariance_check, soup_touch_bound, ColorField, FluctuationRow, RectColor,
    RectangleSoup, SoupColor, TiltedRect,
};
pub use stats::EstimateWithCI;
pub use walker::ensemble::{run_coupled, CoupledEnsemble};
pub use walker::{
    check_allowed_path, reachability_envelope, run_walker, JumpRule, Preset, WalkerPath,
};
