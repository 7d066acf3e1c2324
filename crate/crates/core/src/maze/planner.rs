use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use crate::error::{Error, Result};
use crate::maze::{transition, Action, Cell, Heading, MazeMap, Pose};

/// Planner actions in tie-break order.
pub const PLAN_ACTIONS: [Action; 3] = [Action::Forward, Action::TurnLeft, Action::TurnRight];

fn successor(map: &MazeMap, pose: Pose, action: Action) -> Option<Pose> {
    let (next, _, _, collided) = transition(map, pose, action);
    (!collided).then_some(next)
}

fn rotations(from: Heading, to: Heading) -> u32 {
    match (to.index() + 4 - from.index()) % 4 {
        0 => 0,
        2 => 2,
        _ => 1,
    }
}

/// Admissible cost-to-go: Manhattan distance plus the fewest turns needed
/// to face every axis direction the goal requires.
fn heuristic(pose: Pose, goal: (usize, usize)) -> u32 {
    let dx = goal.0 as i64 - pose.x as i64;
    let dy = goal.1 as i64 - pose.y as i64;
    let mut needed = Vec::with_capacity(2);
    if dx > 0 {
        needed.push(Heading::East);
    } else if dx < 0 {
        needed.push(Heading::West);
    }
    if dy > 0 {
        needed.push(Heading::South);
    } else if dy < 0 {
        needed.push(Heading::North);
    }
    let turns = match needed.as_slice() {
        [] => 0,
        [d] => rotations(pose.heading, *d),
        [a, b] => rotations(pose.heading, *a).min(rotations(pose.heading, *b)) + 1,
        _ => unreachable!(),
    };
    (dx.unsigned_abs() + dy.unsigned_abs()) as u32 + turns
}

fn is_goal(map: &MazeMap, pose: Pose) -> bool {
    map.cell(pose.x as i64, pose.y as i64) == Cell::Goal
}

/// A* over `(x, y, heading)` with unit action costs; returns the plan length.
pub fn astar_distance(map: &MazeMap, start: Pose) -> Result<usize> {
    if is_goal(map, start) {
        return Ok(0);
    }
    let goal = map.goal();
    let mut best: HashMap<Pose, u32> = HashMap::from([(start, 0)]);
    let mut open = BinaryHeap::from([Reverse((heuristic(start, goal), 0u32, start))]);
    while let Some(Reverse((_, g, pose))) = open.pop() {
        if best.get(&pose).is_some_and(|&b| b < g) {
            continue;
        }
        if is_goal(map, pose) {
            return Ok(g as usize);
        }
        for a in PLAN_ACTIONS {
            let Some(next) = successor(map, pose, a) else { continue };
            let ng = g + 1;
            if best.get(&next).map_or(true, |&b| ng < b) {
                best.insert(next, ng);
                open.push(Reverse((ng + heuristic(next, goal), ng, next)));
            }
        }
    }
    Err(Error::MapLoad(format!("goal unreachable from {start:?}")))
}

/// Optimal-action oracle with memoized A* distances.
#[derive(Clone, Debug)]
pub struct Planner {
    map: MazeMap,
    dist: HashMap<Pose, usize>,
}

impl Planner {
    pub fn new(map: MazeMap) -> Self {
        Planner {
            map,
            dist: HashMap::new(),
        }
    }

    pub fn map(&self) -> &MazeMap {
        &self.map
    }

    pub fn distance(&mut self, pose: Pose) -> Result<usize> {
        if let Some(&d) = self.dist.get(&pose) {
            return Ok(d);
        }
        let d = astar_distance(&self.map, pose)?;
        self.dist.insert(pose, d);
        Ok(d)
    }

    /// First action of the tie-broken shortest plan
    /// (`Forward < TurnLeft < TurnRight`). At the goal, `Stand`.
    pub fn optimal_action(&mut self, pose: Pose) -> Result<Action> {
        let d = self.distance(pose)?;
        if d == 0 {
            return Ok(Action::Stand);
        }
        for a in PLAN_ACTIONS {
            if let Some(next) = successor(&self.map, pose, a) {
                if self.distance(next)? + 1 == d {
                    return Ok(a);
                }
            }
        }
        unreachable!("an optimal successor always exists")
    }

    pub fn shortest_path(&mut self, start: Pose) -> Result<Vec<Action>> {
        let mut pose = start;
        let mut plan = Vec::new();
        while !is_goal(&self.map, pose) {
            let a = self.optimal_action(pose)?;
            plan.push(a);
            pose = transition(&self.map, pose, a).0;
        }
        Ok(plan)
    }
}

pub fn shortest_path(map: &MazeMap, start: Pose) -> Result<Vec<Action>> {
    Planner::new(map.clone()).shortest_path(start)
}

pub fn optimal_action(map: &MazeMap, pose: Pose) -> Result<Action> {
    Planner::new(map.clone()).optimal_action(pose)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maze::load_map;

    const ROOM: &str = "#######\n#.....#\n#.....#\n#..G..#\n#.....#\n#######\n";

    #[test]
    fn facing_goal_is_one_forward() {
        let map = load_map(ROOM).unwrap();
        assert_eq!(shortest_path(&map, Pose::new(3, 2, Heading::South)).unwrap(), vec![Action::Forward]);
    }

    #[test]
    fn goal_behind_turns_left_first() {
        let map = load_map(ROOM).unwrap();
        let p = Pose::new(3, 2, Heading::North);
        assert_eq!(
            shortest_path(&map, p).unwrap(),
            vec![Action::TurnLeft, Action::TurnLeft, Action::Forward]
        );
        // 90° off: one turn then forward.
        let p = Pose::new(3, 2, Heading::East);
        assert_eq!(shortest_path(&map, p).unwrap(), vec![Action::TurnRight, Action::Forward]);
    }

    #[test]
    fn heuristic_never_overestimates_on_room() {
        let map = load_map(ROOM).unwrap();
        for (x, y) in map.free_cells() {
            for h in Heading::ALL {
                let p = Pose::new(x, y, h);
                assert!(heuristic(p, map.goal()) as usize <= astar_distance(&map, p).unwrap());
            }
        }
    }
}
