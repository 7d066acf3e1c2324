use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Heading {
        Heading::ALL[i % 4]
    }

    pub fn right(self) -> Heading {
        Heading::from_index(self.index() + 1)
    }

    pub fn left(self) -> Heading {
        Heading::from_index(self.index() + 3)
    }

    /// Unit step in grid coordinates (y grows southwards).
    pub fn delta(self) -> (i64, i64) {
        match self {
            Heading::North => (0, -1),
            Heading::East => (1, 0),
            Heading::South => (0, 1),
            Heading::West => (-1, 0),
        }
    }

    /// Heading angle in radians, clockwise from North.
    pub fn angle(self) -> f64 {
        self.index() as f64 * std::f64::consts::FRAC_PI_2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pose {
    pub x: usize,
    pub y: usize,
    pub heading: Heading,
}

impl Pose {
    pub fn new(x: usize, y: usize, heading: Heading) -> Pose {
        Pose { x, y, heading }
    }

    pub fn ahead(self) -> (i64, i64) {
        let (dx, dy) = self.heading.delta();
        (self.x as i64 + dx, self.y as i64 + dy)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Action {
    Stand,
    TurnLeft,
    TurnRight,
    Forward,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Stand, Action::TurnLeft, Action::TurnRight, Action::Forward];
    pub const COUNT: usize = 4;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Action::Stand => "stand",
            Action::TurnLeft => "left",
            Action::TurnRight => "right",
            Action::Forward => "forward",
        };
        f.write_str(s)
    }
}

impl FromStr for Heading {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "n" | "north" => Ok(Heading::North),
            "e" | "east" => Ok(Heading::East),
            "s" | "south" => Ok(Heading::South),
            "w" | "west" => Ok(Heading::West),
            _ => Err(format!("unknown heading {s:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_lefts_restore_heading() {
        for h in Heading::ALL {
            assert_eq!(h.left().left().left().left(), h);
            assert_eq!(h.left().right(), h);
        }
    }
}
