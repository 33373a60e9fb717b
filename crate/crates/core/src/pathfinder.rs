//! 4-connected grid planning (A* with a Manhattan heuristic) and
//! arc-length path following.
//!
//! Columns run along world +X and rows along world +Z; cell (0, 0) is
//! centered on the grid origin.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pose::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

impl Cell {
    pub const fn new(col: usize, row: usize) -> Self {
        Self { col, row }
    }
}

impl From<[usize; 2]> for Cell {
    fn from(a: [usize; 2]) -> Self {
        Cell::new(a[0], a[1])
    }
}

impl From<Cell> for [usize; 2] {
    fn from(c: Cell) -> Self {
        [c.col, c.row]
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PathError {
    #[error("no path from {from:?} to {to:?}")]
    NoPath { from: Cell, to: Cell },
    #[error("cell {0:?} outside the grid")]
    OutOfBounds(Cell),
    #[error("cell {0:?} is blocked")]
    BlockedEndpoint(Cell),
    #[error("grid file line {line}: {message}")]
    GridFormat { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavGrid {
    width: usize,
    height: usize,
    cell_size: f64,
    origin: Vec3,
    blocked: Vec<bool>,
}

impl NavGrid {
    pub fn new(width: usize, height: usize, cell_size: f64, origin: Vec3) -> Result<Self, PathError> {
        if width == 0 || height == 0 {
            return Err(PathError::GridFormat { line: 1, message: "grid must be at least 1x1".into() });
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(PathError::GridFormat { line: 1, message: "cell size must be positive".into() });
        }
        Ok(Self { width, height, cell_size, origin, blocked: vec![false; width * height] })
    }

    /// Parses the ASCII grid format: a header line
    /// `cols rows cell_size origin_x origin_y origin_z`, then one line per
    /// row of `.` (free) and `#` (blocked), row 0 first.
    pub fn parse(text: &str) -> Result<Self, PathError> {
        let err = |line: usize, message: String| PathError::GridFormat { line, message };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines.next().ok_or_else(|| err(1, "empty grid file".into()))?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 6 {
            return Err(err(hl + 1, format!("expected 6 header fields, found {}", f.len())));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| err(hl + 1, format!("bad integer {s:?}")));
        let num = |s: &str| s.parse::<f64>().map_err(|_| err(hl + 1, format!("bad number {s:?}")));
        let mut grid = NavGrid::new(
            int(f[0])?,
            int(f[1])?,
            num(f[2])?,
            Vec3::new(num(f[3])?, num(f[4])?, num(f[5])?),
        )?;
        let mut row = 0;
        for (i, line) in lines {
            let line = line.trim();
            if row >= grid.height {
                return Err(err(i + 1, "more rows than declared".into()));
            }
            if line.chars().count() != grid.width {
                return Err(err(i + 1, format!("expected {} cells, found {}", grid.width, line.chars().count())));
            }
            for (col, ch) in line.chars().enumerate() {
                match ch {
                    '.' => {}
                    '#' => grid.set_blocked(Cell::new(col, row), true),
                    other => return Err(err(i + 1, format!("unexpected cell character {other:?}"))),
                }
            }
            row += 1;
        }
        if row != grid.height {
            return Err(err(text.lines().count(), format!("expected {} rows, found {row}", grid.height)));
        }
        Ok(grid)
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }
    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.col < self.width && c.row < self.height
    }

    fn idx(&self, c: Cell) -> usize {
        c.row * self.width + c.col
    }

    pub fn set_blocked(&mut self, c: Cell, blocked: bool) {
        if self.in_bounds(c) {
            let i = self.idx(c);
            self.blocked[i] = blocked;
        }
    }

    pub fn is_blocked(&self, c: Cell) -> bool {
        self.in_bounds(c) && self.blocked[self.idx(c)]
    }

    /// Scenery position of a cell center.
    pub fn cell_center(&self, c: Cell) -> Vec3 {
        self.origin + Vec3::new(c.col as f64 * self.cell_size, 0.0, c.row as f64 * self.cell_size)
    }

    /// Cell whose center is nearest to `p` in the ground plane.
    pub fn cell_at(&self, p: Vec3) -> Result<Cell, PathError> {
        let col = ((p.x - self.origin.x) / self.cell_size).round();
        let row = ((p.z - self.origin.z) / self.cell_size).round();
        if col < 0.0 || row < 0.0 || col >= self.width as f64 || row >= self.height as f64 {
            return Err(PathError::OutOfBounds(Cell::new(col.max(0.0) as usize, row.max(0.0) as usize)));
        }
        Ok(Cell::new(col as usize, row as usize))
    }

    /// In-bounds free 4-neighbours in (row, col) order.
    pub fn neighbours(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        let cand = [
            c.row.checked_sub(1).map(|r| Cell::new(c.col, r)),
            c.col.checked_sub(1).map(|cc| Cell::new(cc, c.row)),
            Some(Cell::new(c.col + 1, c.row)),
            Some(Cell::new(c.col, c.row + 1)),
        ];
        cand.into_iter().flatten().filter(move |n| self.in_bounds(*n) && !self.is_blocked(*n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPath {
    pub cells: Vec<Cell>,
    pub waypoints: Vec<Vec3>,
    pub total_length: f64,
}

impl PlannedPath {
    pub fn from_cells(grid: &NavGrid, cells: Vec<Cell>) -> Self {
        let waypoints: Vec<Vec3> = cells.iter().map(|c| grid.cell_center(*c)).collect();
        let total_length = cells.len().saturating_sub(1) as f64 * grid.cell_size;
        Self { cells, waypoints, total_length }
    }

    /// Number of moves (waypoints minus one).
    pub fn steps(&self) -> usize {
        self.cells.len().saturating_sub(1)
    }
}

fn manhattan(a: Cell, b: Cell) -> usize {
    a.col.abs_diff(b.col) + a.row.abs_diff(b.row)
}

/// Shortest 4-connected path by cell count.
///
/// The open set pops the lowest f, then lowest h, then lowest (row, col),
/// so results are reproducible.
pub fn plan(grid: &NavGrid, start: Cell, goal: Cell) -> Result<PlannedPath, PathError> {
    for c in [start, goal] {
        if !grid.in_bounds(c) {
            return Err(PathError::OutOfBounds(c));
        }
        if grid.is_blocked(c) {
            return Err(PathError::BlockedEndpoint(c));
        }
    }
    let n = grid.width * grid.height;
    let mut g = vec![usize::MAX; n];
    let mut came_from: Vec<Option<Cell>> = vec![None; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    g[grid.idx(start)] = 0;
    let h0 = manhattan(start, goal);
    open.push(Reverse((h0, h0, start.row, start.col)));

    while let Some(Reverse((_, _, row, col))) = open.pop() {
        let cur = Cell::new(col, row);
        let ci = grid.idx(cur);
        if closed[ci] {
            continue;
        }
        closed[ci] = true;
        if cur == goal {
            let mut cells = vec![cur];
            let mut at = cur;
            while let Some(prev) = came_from[grid.idx(at)] {
                cells.push(prev);
                at = prev;
            }
            cells.reverse();
            return Ok(PlannedPath::from_cells(grid, cells));
        }
        let gc = g[ci];
        for nb in grid.neighbours(cur) {
            let ni = grid.idx(nb);
            if closed[ni] || gc + 1 >= g[ni] {
                continue;
            }
            g[ni] = gc + 1;
            came_from[ni] = Some(cur);
            let h = manhattan(nb, goal);
            open.push(Reverse((gc + 1 + h, h, nb.row, nb.col)));
        }
    }
    Err(PathError::NoPath { from: start, to: goal })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowSample {
    pub position: Vec3,
    /// Heading of the current segment; 0 for a single-waypoint path.
    pub yaw: f64,
    pub done: bool,
}

/// Position `speed * t` meters along the path (clamped to its end).
pub fn follow(path: &PlannedPath, speed: f64, t: f64) -> FollowSample {
    let wp = &path.waypoints;
    let Some(&first) = wp.first() else {
        return FollowSample { position: Vec3::ZERO, yaw: 0.0, done: true };
    };
    if wp.len() == 1 {
        return FollowSample { position: first, yaw: 0.0, done: true };
    }
    let total = path.total_length;
    let dist = (speed.max(0.0) * t.max(0.0)).min(total);
    let seg_yaw = |i: usize| {
        let d = wp[i + 1] - wp[i];
        d.x.atan2(d.z)
    };
    let segs = wp.len() - 1;
    if dist >= total {
        return FollowSample { position: wp[segs], yaw: seg_yaw(segs - 1), done: true };
    }
    let mut start = 0.0;
    for i in 0..segs {
        let len = (wp[i + 1] - wp[i]).length();
        if dist < start + len {
            let u = (dist - start) / len;
            return FollowSample { position: wp[i].lerp(wp[i + 1], u), yaw: seg_yaw(i), done: false };
        }
        start += len;
    }
    // rounding: accumulated segment lengths fell short of total_length
    FollowSample { position: wp[segs], yaw: seg_yaw(segs - 1), done: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    fn bfs_len(grid: &NavGrid, s: Cell, g: Cell) -> Option<usize> {
        let mut dist = vec![usize::MAX; grid.width() * grid.height()];
        let id = |c: Cell| c.row * grid.width() + c.col;
        let mut q = VecDeque::from([s]);
        dist[id(s)] = 0;
        while let Some(c) = q.pop_front() {
            if c == g {
                return Some(dist[id(c)]);
            }
            for n in grid.neighbours(c) {
                if dist[id(n)] == usize::MAX {
                    dist[id(n)] = dist[id(c)] + 1;
                    q.push_back(n);
                }
            }
        }
        None
    }

    #[test]
    fn straight_line() {
        let grid = NavGrid::new(5, 5, 0.5, Vec3::ZERO).unwrap();
        let p = plan(&grid, Cell::new(0, 0), Cell::new(0, 3)).unwrap();
        assert_eq!(p.waypoints.len(), 4);
        assert_eq!(p.total_length, 1.5);
    }

    #[test]
    fn detour_matches_bfs() {
        let grid = NavGrid::parse("7 5 1 0 0 0\n.......\n.#####.\n...#...\n.#.#.#.\n.#...#.\n").unwrap();
        let (s, g) = (Cell::new(2, 2), Cell::new(4, 2));
        let p = plan(&grid, s, g).unwrap();
        assert_eq!(Some(p.steps()), bfs_len(&grid, s, g));
        assert!(p.steps() > 2);
        for w in p.cells.windows(2) {
            assert_eq!(manhattan(w[0], w[1]), 1);
            assert!(!grid.is_blocked(w[1]));
        }
    }

    #[test]
    fn endpoint_errors() {
        let mut grid = NavGrid::new(3, 3, 1.0, Vec3::ZERO).unwrap();
        grid.set_blocked(Cell::new(2, 2), true);
        assert_eq!(plan(&grid, Cell::new(0, 0), Cell::new(2, 2)), Err(PathError::BlockedEndpoint(Cell::new(2, 2))));
        assert_eq!(plan(&grid, Cell::new(0, 0), Cell::new(3, 0)), Err(PathError::OutOfBounds(Cell::new(3, 0))));
        grid.set_blocked(Cell::new(1, 0), true);
        grid.set_blocked(Cell::new(1, 1), true);
        grid.set_blocked(Cell::new(1, 2), true);
        assert!(matches!(plan(&grid, Cell::new(0, 0), Cell::new(2, 0)), Err(PathError::NoPath { .. })));
    }

    #[test]
    fn grid_file_errors() {
        assert!(NavGrid::parse("2 2 1 0 0 0\n..\n").is_err());
        assert!(NavGrid::parse("2 2 1 0 0 0\n..\n.x\n").is_err());
        assert!(NavGrid::parse("2 2 0 0 0 0\n..\n..\n").is_err());
        let g = NavGrid::parse("3 2 0.5 -1 0 -1\n..#\n...\n").unwrap();
        assert!(g.is_blocked(Cell::new(2, 0)));
        assert_eq!(g.cell_center(Cell::new(2, 1)), Vec3::new(0.0, 0.0, -0.5));
    }

    #[test]
    fn follow_examples() {
        let grid = NavGrid::new(1, 4, 1.0, Vec3::ZERO).unwrap();
        let p = plan(&grid, Cell::new(0, 0), Cell::new(0, 3)).unwrap();
        let s = follow(&p, 1.5, 0.0);
        assert_eq!((s.position, s.done), (Vec3::ZERO, false));
        let s = follow(&p, 1.5, 1.0);
        assert!((s.position - Vec3::new(0.0, 0.0, 1.5)).length() < 1e-12);
        assert_eq!(s.yaw, 0.0);
        let s = follow(&p, 1.5, 10.0);
        assert_eq!((s.position, s.done), (Vec3::new(0.0, 0.0, 3.0), true));
        assert_eq!(s.yaw, 0.0);
    }

    #[test]
    fn follow_yaw_uses_outgoing_segment() {
        let grid = NavGrid::new(3, 3, 1.0, Vec3::ZERO).unwrap();
        let p = PlannedPath::from_cells(&grid, vec![Cell::new(0, 0), Cell::new(0, 1), Cell::new(1, 1)]);
        // exactly at the corner waypoint: heading of the second segment (+X)
        let s = follow(&p, 1.0, 1.0);
        assert!((s.yaw - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let s = follow(&p, 1.0, 5.0);
        assert!(s.done && (s.yaw - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
