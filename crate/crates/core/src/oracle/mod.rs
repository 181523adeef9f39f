//! The two-class annulus counter-example: a data distribution `p` and a model
//! `q` that are close in both KL directions, yet admit confident, undetectable
//! adversarial moves for roughly half of the data.

mod annulus;
mod counterexample;
mod verify;

pub use annulus::{annulus_log_density, sample_annulus, sample_annulus_point, AnnulusMixture, AnnulusSpec};
pub use counterexample::{
    construct_adversarial, kl_p_q, kl_q_p, mc_kl, posteriors_in_unit_ball, proof_conditions, solve_dimension, CounterexampleParams,
    DimensionSolution, KlDirection, ProofConditions, Side, ETA,
};
pub use verify::{check_sample, verify_proposition, PropositionReport, SampleCheck, BALL_MASS_LIMIT, CONDITIONS_HEADER, CONDITION_NAMES, WILSON_Z};
