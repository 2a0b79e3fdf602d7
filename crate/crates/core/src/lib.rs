//! Learning dynamics for single-population games on a finite strategy set.
//!
//! States live on the simplex, payoffs come from a [`PayoffField`], and the
//! regularized processes are parameterized by a [`Regularizer`] together with
//! a [`Schedule`] for the weight or learning rate.

pub mod dynamics_ct;
pub mod dynamics_dt;
pub mod equilibrium;
pub mod error;
pub mod game;
pub mod record;
pub mod regularizer;
pub mod schedule;
pub mod simplex;

pub use equilibrium::{
    best_response, brute_force_equilibria, certify, ess_check, gap, mvi_violation,
    regularized_best_response, regularized_gap, solve_regularized_equilibrium,
    BestResponseResult, CertificateFlags, CertifyOptions, EquilibriumCertificate, EssReport,
    FixedPointOptions, OraclePoint, OracleResult,
};
pub use record::{
    ChannelConfig, Channels, Labeled, RefPoint, RunRecord, Series, TableView, TrajectoryRecord,
};
pub use error::{PopdynError, Result};
pub use dynamics_ct::{
    integrate_brd, integrate_dad, integrate_rbrd, integrate_replicator, integrate_vbrd,
    projection_rhs, regret_along_trajectory, replicator_rhs, score_for_state, RegretSeries,
};
pub use dynamics_dt::{
    discrete_regret, discrete_regret_bound, fenchel_zone_monitor, run_da, run_fp, run_rfp,
    run_vrfp, template_inequality_check, DaInit, TemplateReport, ZoneLevel, ZoneReport,
};
pub use game::{
    check_jacobian_sampled, check_monotone_sampled, check_potential_sampled, congestion_field,
    payoff_eval, random_matching_field, CongestionField, FnField, GameSpec, JacobianReport,
    MatrixField, MonotoneReport, PayoffField, PotentialReport, StructureFlags, BUILTIN_GAMES,
};
pub use regularizer::{
    choice, conjugate_value, fenchel_coupling, h_value, project_onto_simplex, subgrad_selection,
    Entropic, Euclidean, NormKind, Regularizer, RegularizerKind,
};
pub use schedule::{learning_rate_diagnostics, LearningRateDiagnostics, Schedule};
pub use simplex::SimplexState;
