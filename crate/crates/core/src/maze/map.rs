use std::collections::VecDeque;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cell {
    Free,
    Wall,
    Goal,
}

impl Cell {
    pub fn is_open(self) -> bool {
        self != Cell::Wall
    }

    fn symbol(self) -> char {
        match self {
            Cell::Free => '.',
            Cell::Wall => '#',
            Cell::Goal => 'G',
        }
    }
}

/// Validated rectangular grid: walled border, one goal, every free cell
/// 4-connected to the goal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MazeMap {
    name: String,
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    goal: (usize, usize),
}

impl MazeMap {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn goal(&self) -> (usize, usize) {
        self.goal
    }

    /// Out-of-range coordinates read as walls.
    pub fn cell(&self, x: i64, y: i64) -> Cell {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return Cell::Wall;
        }
        self.cells[y as usize * self.width + x as usize]
    }

    /// Free (non-goal) cells in row-major order.
    pub fn free_cells(&self) -> Vec<(usize, usize)> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .filter(|&(x, y)| self.cells[y * self.width + x] == Cell::Free)
            .collect()
    }

    /// Largest straight-line extent of the grid, in cells.
    pub fn diameter(&self) -> f64 {
        ((self.width * self.width + self.height * self.height) as f64).sqrt()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Mirror across the main diagonal.
    pub fn transpose(&self) -> MazeMap {
        let mut cells = Vec::with_capacity(self.cells.len());
        for y in 0..self.width {
            for x in 0..self.height {
                cells.push(self.cells[x * self.width + y]);
            }
        }
        MazeMap {
            name: format!("{}-transposed", self.name),
            width: self.height,
            height: self.width,
            cells,
            goal: (self.goal.1, self.goal.0),
        }
    }

    pub fn load_file(path: impl AsRef<Path>) -> Result<MazeMap> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "map".into());
        Ok(load_map(&text)?.with_name(name))
    }
}

impl fmt::Display for MazeMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for y in 0..self.height {
            let row: String = (0..self.width).map(|x| self.cells[y * self.width + x].symbol()).collect();
            writeln!(f, "{row}")?;
        }
        Ok(())
    }
}

/// Parses an ASCII map: `#` wall, `.` free, `G` goal.
pub fn load_map(text: &str) -> Result<MazeMap> {
    let rows: Vec<&str> = text
        .lines()
        .map(|l| l.trim_end_matches('\r'))
        .filter(|l| !l.is_empty())
        .collect();
    if rows.is_empty() {
        return Err(Error::MapLoad("empty map".into()));
    }
    let width = rows[0].chars().count();
    let height = rows.len();
    let mut cells = Vec::with_capacity(width * height);
    let mut goals = Vec::new();
    for (y, row) in rows.iter().enumerate() {
        if row.chars().count() != width {
            return Err(Error::MapLoad(format!(
                "ragged rows: row {y} has {} columns, expected {width}",
                row.chars().count()
            )));
        }
        for (x, ch) in row.chars().enumerate() {
            cells.push(match ch {
                '#' => Cell::Wall,
                '.' => Cell::Free,
                'G' => {
                    goals.push((x, y));
                    Cell::Goal
                }
                other => {
                    return Err(Error::MapLoad(format!("unknown symbol {other:?} at ({x}, {y})")));
                }
            });
        }
    }
    let goal = match goals.as_slice() {
        [g] => *g,
        [] => return Err(Error::MapLoad("no goal cell".into())),
        _ => return Err(Error::MapLoad(format!("{} goal cells, expected exactly one", goals.len()))),
    };
    let at = |x: usize, y: usize| cells[y * width + x];
    for x in 0..width {
        if at(x, 0) != Cell::Wall || at(x, height - 1) != Cell::Wall {
            return Err(Error::MapLoad(format!("open border at column {x}")));
        }
    }
    for y in 0..height {
        if at(0, y) != Cell::Wall || at(width - 1, y) != Cell::Wall {
            return Err(Error::MapLoad(format!("open border at row {y}")));
        }
    }

    // Flood fill from the goal through open cells.
    let mut seen = vec![false; cells.len()];
    let mut queue = VecDeque::from([goal]);
    seen[goal.1 * width + goal.0] = true;
    while let Some((x, y)) = queue.pop_front() {
        for (nx, ny) in [(x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)] {
            let i = ny * width + nx;
            if cells[i].is_open() && !seen[i] {
                seen[i] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    let mut any_free = false;
    for (i, c) in cells.iter().enumerate() {
        if *c == Cell::Free {
            any_free = true;
            if !seen[i] {
                return Err(Error::MapLoad(format!(
                    "unreachable goal: free cell ({}, {}) has no path to the goal",
                    i % width,
                    i / width
                )));
            }
        }
    }
    if !any_free {
        return Err(Error::MapLoad("unreachable goal: no free start cell exists".into()));
    }
    Ok(MazeMap {
        name: "map".into(),
        width,
        height,
        cells,
        goal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_goal_only_map_rejected() {
        let err = load_map("###\n#G#\n###").unwrap_err();
        assert!(err.to_string().contains("unreachable"), "{err}");
    }

    #[test]
    fn small_valid_map() {
        let m = load_map("#####\n#..G#\n#.#.#\n#...#\n#####\n").unwrap();
        assert_eq!((m.width(), m.height(), m.goal()), (5, 5, (3, 1)));
        assert_eq!(m.free_cells().len(), 7);
    }

    #[test]
    fn walled_off_region_rejected() {
        let err = load_map("#######\n#.G#..#\n#..#..#\n#######").unwrap_err();
        assert!(err.to_string().contains("unreachable goal"), "{err}");
    }

    #[test]
    fn structural_errors_are_named() {
        assert!(load_map("####\n#G.\n####").unwrap_err().to_string().contains("ragged"));
        assert!(load_map("####\n#..#\n####").unwrap_err().to_string().contains("no goal"));
        assert!(load_map("#####\n#G.G#\n#####").unwrap_err().to_string().contains("2 goal"));
        assert!(load_map("####\n#G..\n####").unwrap_err().to_string().contains("border"));
    }

    #[test]
    fn display_round_trips() {
        let text = "#####\n#..G#\n#.#.#\n#...#\n#####\n";
        assert_eq!(load_map(text).unwrap().to_string(), text);
    }

    #[test]
    fn trailing_newline_optional() {
        assert_eq!(
            load_map("####\n#.G#\n####").unwrap(),
            load_map("####\n#.G#\n####\n").unwrap()
        );
    }
}
