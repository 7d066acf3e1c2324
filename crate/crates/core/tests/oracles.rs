//! Learned and planned quantities against independent closed-form or
//! brute-force answers.

mod support;

use sfrl::harness::{evaluate, OraclePolicy};
use sfrl::maze::{builtin, optimal_return, EnvConfig, Planner};

#[test]
fn planner_matches_breadth_first_search_on_random_maps() {
    let (bad, checked) = support::planner_mismatches(20, 42);
    assert!(checked > 1000);
    assert_eq!(bad, 0);
}

#[test]
fn planner_returns_match_the_step_cost_identity() {
    assert!((optimal_return(5.640) - 0.814).abs() < 5e-4);
    assert!((optimal_return(10.120) - 0.635).abs() < 5e-4);
    let env = EnvConfig {
        max_steps: 500,
        ..EnvConfig::default()
    };
    for name in ["map1", "map2", "map3", "map4"] {
        let map = builtin(name).unwrap();
        let s = evaluate(&mut OraclePolicy(Planner::new(map.clone())), &map, env, 50, 9).unwrap();
        assert_eq!(s.successes, 50);
        assert!((s.mean_reward - optimal_return(s.mean_steps)).abs() < 1e-6, "{name}: {s:?}");
    }
}

#[test]
fn tabular_successor_features_match_closed_form() {
    let (psi_err, q_err) = support::tabular_sf_errors();
    assert!(psi_err < 1e-3, "{psi_err}");
    assert!(q_err < 1e-3, "{q_err}");
}

#[test]
fn dqn_matches_value_iteration_on_a_two_state_chain() {
    let err = support::dqn_chain_error();
    assert!(err < 1e-3, "{err}");
}
