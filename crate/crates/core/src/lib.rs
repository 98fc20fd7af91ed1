//! Opinion formation on social graphs under averaging dynamics, solved three
//! ways: the uncontrolled flow, the open-loop Nash equilibrium of the
//! noncooperative opinion game (each agent trades final disagreement with her
//! neighbors against control effort), and the centralized social optimum.
//! All closed forms are cross-checked against independent numerical oracles
//! in [`verify`].

pub mod dynamics;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod matrix_functions;
pub mod nash;
pub mod social;
pub mod verify;

pub use dynamics::{
    discrete_hk_step, evaluate_individual_cost, evaluate_social_cost, simulate,
    simulate_with_oversample, uncontrolled_closed_form, ControlledSolution, GameConfig, Provenance,
    Trajectory,
};
pub use error::{Error, Result};
pub use graph::{
    agent_laplacian, dynamics_matrix, global_laplacian, load_edge_list, spread,
    zachary_karate_club, GraphMatrices, Indexing, SocialGraph,
};
pub use matrix_functions::{
    gramian_integral, gramian_quadrature, matrix_exponential, stacked_psi, GramianMethod,
    GramianResult,
};
pub use nash::{build_boundary_matrix, build_delta, costate, solve, NashSolution, OpenLoopPolicy};
pub use social::{social_vs_nash_gap, solve_social, SocialSolution};
pub use verify::{
    check_nash_deviation, check_pontryagin, check_social_deviation, check_trajectory_oracle,
    locality_probe, DeviationOptions, DeviationReport, LocalityProbe, PontryaginReport,
    VerificationReport,
};
