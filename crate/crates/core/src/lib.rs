//! Minimax adaptive control for linear systems whose state matrix has an
//! unknown sign.
//!
//! The controller plays a zero-sum dynamic game against the disturbance
//! and the sign hypothesis jointly. This crate provides:
//!
//! * [`mat`] — dense symmetric linear algebra sized for small systems;
//! * [`riccati`] — synthesis of the game Riccati fixed point, the
//!   state-feedback gain, and three-level feasibility certification;
//! * [`value_fn`] — closed-form value functions over (state, data);
//! * [`bellman`] — a numerical Bellman operator, value iteration, and
//!   verification batteries for the fixed-point and endpoint identities;
//! * [`sim`] — closed-loop simulation of the explicit adaptive law
//!   against configurable adversaries, with dissipation accounting.

pub mod bellman;
pub mod error;
pub mod mat;
pub mod riccati;
pub mod sim;
pub mod value_fn;

pub use bellman::{
    bellman_apply, congruence_battery, congruence_identities, endpoint_bruteforce_check,
    endpoint_equivalence_battery, endpoint_psd_check, fixed_point_residual,
    sample_scalar_states, value_iteration, value_iteration_table, BellmanOutcome,
    EndpointBattery, EndpointPsdCheck, EndpointSearch, EndpointWitness, SearchGrid, ValueHandle,
    ValueIterationTable,
};
pub use error::{Error, Result};
pub use mat::{quad_form, sat, trace_inner, weighted_norm_sq, Matrix, SymmetricMatrix};
pub use riccati::{
    check_condition_ii, check_lower_bound, criterion_feasible, gain, gamma_search,
    solve_riccati, ConditionIiCheck, GameSpec, GammaCriterion, LowerBoundCheck, RiccatiSolution,
};
pub use sim::{
    controller_u, dissipation_check, simulate, update_info, worst_case_v, AdversaryPolicy,
    DissipationCheck, InfoState, Sign, Trajectory,
};
pub use value_fn::{
    extract_y, saturated_minimax, v_bar0, v_bar1, v_star, ClosedFormValue, InfoMatrix,
};
