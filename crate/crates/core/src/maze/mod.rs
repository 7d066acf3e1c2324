//! Discrete maze world: maps, ray-cast observations, dynamics and planners.

mod env;
mod map;
mod observe;
mod planner;
mod pose;

pub use env::{
    optimal_return, random_start, transition, EnvConfig, MazeEnv, StackedState, StepResult, COLLISION_REWARD,
    GOAL_REWARD, STEP_REWARD,
};
pub use map::{load_map, Cell, MazeMap};
pub use observe::{observe, ray_offsets, Observation, SensorConfig};
pub use planner::{astar_distance, optimal_action, shortest_path, Planner, PLAN_ACTIONS};
pub use pose::{Action, Heading, Pose};

use crate::error::{Error, Result};

const BUILTIN: [(&str, &str); 4] = [
    ("map1", include_str!("../../maps/map1.txt")),
    ("map2", include_str!("../../maps/map2.txt")),
    ("map3", include_str!("../../maps/map3.txt")),
    ("map4", include_str!("../../maps/map4.txt")),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}

/// One of the bundled maps, by name (`map1` .. `map4`).
pub fn builtin(name: &str) -> Result<MazeMap> {
    BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::MapLoad(format!("no built-in map named {name:?}")))
        .and_then(|(n, text)| Ok(load_map(text)?.with_name(*n)))
}

/// Resolves `name` as a built-in map first, then as a file path.
pub fn resolve_map(name: &str) -> Result<MazeMap> {
    match builtin(name) {
        Ok(m) => Ok(m),
        Err(_) => MazeMap::load_file(name),
    }
}
