//! Correctness oracles shared by the per-topic test targets and the
//! acceptance run, which evaluates all of them before any experiment.

#![allow(dead_code)]

pub mod lemma1;
pub mod master;
pub mod ridge;
pub mod trigger;
pub mod zero_regret;

pub type Check = (&'static str, fn());

/// Every oracle check, grouped by what it pins down.
pub const SUITE: &[(&str, &[Check])] = &[
    (
        "compact statistics equal the literal population objects (1e-9)",
        &[
            ("membership statistics", master::membership_statistics_match_literal_population_form),
            ("representation statistics", master::representation_statistics_match_literal_population_form),
            ("pending upload", master::pending_upload_matches_literal_increment),
            ("score", master::score_matches_literal_population_form),
            ("design forms", master::design_forms_predict_identically),
        ],
    ),
    (
        "alternating solves never increase the objective (1e-9 relative)",
        &[
            ("objective monotone", master::alternating_solves_never_increase_the_objective),
            ("ridge floor", master::gram_matrices_stay_above_their_ridge_floor),
            ("width shrinks", master::exploration_width_shrinks_with_information),
        ],
    ),
    (
        "closed-form solves equal stacked least squares (1e-8)",
        &[
            ("membership step", ridge::membership_step_is_the_ridge_solution),
            ("representation step", ridge::representation_step_is_the_ridge_solution),
            ("rank one", ridge::rank_one_representation_is_plain_ridge),
            ("server", ridge::server_estimate_is_ridge_over_all_uploaded_rows),
            ("after broadcast", ridge::local_representation_after_broadcast_counts_each_observation_once),
            ("ridge arm", ridge::linucb_arm_after_five_observations),
        ],
    ),
    (
        "determinant trigger on hand-computed 2x2 cases",
        &[
            ("hand cases", trigger::hand_computed_two_by_two_cases),
            ("invalid inputs", trigger::rejects_invalid_inputs),
        ],
    ),
    (
        "confidence radii equal independent evaluation (1e-12)",
        &[
            ("spot values", lemma1::spot_values),
            ("zero trials", lemma1::zero_trials_leave_only_the_log_and_prior_terms),
            ("monotone", lemma1::radii_grow_with_time),
            ("invalid constants", lemma1::rejects_rates_outside_the_unit_interval),
        ],
    ),
    (
        "oracle-parameter runs have exactly zero regret",
        &[
            ("true parameters", zero_regret::oracle_policies_have_zero_regret),
            ("full budget", zero_regret::full_budget_has_zero_regret_for_every_policy),
        ],
    ),
];
