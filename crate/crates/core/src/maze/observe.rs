use crate::maze::{Cell, MazeMap, Pose};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorConfig {
    pub rays: usize,
    pub fov_degrees: f64,
    pub max_range: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            rays: 16,
            fov_degrees: 180.0,
            max_range: 10.0,
        }
    }
}

/// One egocentric range reading; rays are ordered left to right.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    /// Distance to the first wall over `max_range`, clamped to `[0, 1]`.
    pub rays: Vec<f32>,
    /// 1 where the goal cell is crossed before any wall (within range).
    pub goal_mask: Vec<f32>,
}

impl Observation {
    /// `[rays..., goal_mask...]`, the layout fed to networks.
    pub fn to_features(&self) -> Vec<f32> {
        let mut v = Vec::with_capacity(self.rays.len() * 2);
        v.extend_from_slice(&self.rays);
        v.extend_from_slice(&self.goal_mask);
        v
    }
}

struct RayHit {
    distance: f64,
    saw_goal: bool,
}

/// Grid traversal from the agent's cell center along `dir` until a wall
/// boundary is crossed or `max_range` is exceeded.
fn cast(map: &MazeMap, pose: Pose, dir: (f64, f64), max_range: f64) -> RayHit {
    let (mut cx, mut cy) = (pose.x as i64, pose.y as i64);
    let mut saw_goal = map.cell(cx, cy) == Cell::Goal;
    let step_x = if dir.0 > 0.0 { 1 } else { -1 };
    let step_y = if dir.1 > 0.0 { 1 } else { -1 };
    // The origin sits half a cell from every boundary.
    let first = |d: f64| if d == 0.0 { f64::INFINITY } else { 0.5 / d.abs() };
    let delta = |d: f64| if d == 0.0 { f64::INFINITY } else { 1.0 / d.abs() };
    let (mut t_x, mut t_y) = (first(dir.0), first(dir.1));
    let (dt_x, dt_y) = (delta(dir.0), delta(dir.1));
    loop {
        let t;
        let blocked;
        if t_x < t_y {
            t = t_x;
            cx += step_x;
            t_x += dt_x;
            blocked = map.cell(cx, cy) == Cell::Wall;
        } else if t_y < t_x {
            t = t_y;
            cy += step_y;
            t_y += dt_y;
            blocked = map.cell(cx, cy) == Cell::Wall;
        } else {
            // Exactly through a grid vertex: the ray is stopped by the
            // diagonal cell, or by two walls meeting at the corner.
            t = t_x;
            let side_x = map.cell(cx + step_x, cy) == Cell::Wall;
            let side_y = map.cell(cx, cy + step_y) == Cell::Wall;
            cx += step_x;
            cy += step_y;
            t_x += dt_x;
            t_y += dt_y;
            blocked = map.cell(cx, cy) == Cell::Wall || (side_x && side_y);
        }
        if t > max_range {
            return RayHit {
                distance: max_range,
                saw_goal,
            };
        }
        if blocked {
            return RayHit { distance: t, saw_goal };
        }
        if map.cell(cx, cy) == Cell::Goal {
            saw_goal = true;
        }
    }
}

/// Ray offsets in radians relative to the heading, left to right.
pub fn ray_offsets(rays: usize, fov_degrees: f64) -> Vec<f64> {
    let fov = fov_degrees.to_radians();
    if rays == 1 {
        return vec![0.0];
    }
    (0..rays)
        .map(|i| -fov / 2.0 + fov * i as f64 / (rays - 1) as f64)
        .collect()
}

pub fn observe(map: &MazeMap, pose: Pose, sensor: &SensorConfig) -> Observation {
    let (fx, fy) = pose.heading.delta();
    let (rx, ry) = pose.heading.right().delta();
    let mut rays = Vec::with_capacity(sensor.rays);
    let mut goal_mask = Vec::with_capacity(sensor.rays);
    for a in ray_offsets(sensor.rays, sensor.fov_degrees) {
        let (c, s) = (a.cos(), a.sin());
        // Heading basis vectors are integral, so rotating the pose by 90°
        // permutes the direction components exactly.
        let dir = (fx as f64 * c + rx as f64 * s, fy as f64 * c + ry as f64 * s);
        let hit = cast(map, pose, dir, sensor.max_range);
        rays.push((hit.distance / sensor.max_range).clamp(0.0, 1.0) as f32);
        goal_mask.push(if hit.saw_goal { 1.0 } else { 0.0 });
    }
    Observation { rays, goal_mask }
}
