//! Planner optimality against breadth-first search, and follow() behaviour.

use std::collections::VecDeque;

use proptest::prelude::*;
use stagelink_core::pathfinder::{follow, plan, Cell, NavGrid, PathError, PlannedPath};
use stagelink_core::Vec3;

fn bfs(grid: &NavGrid, s: Cell, g: Cell) -> Option<usize> {
    let (w, h) = (grid.width(), grid.height());
    let mut dist = vec![usize::MAX; w * h];
    let mut q = VecDeque::from([s]);
    dist[s.row * w + s.col] = 0;
    while let Some(c) = q.pop_front() {
        if c == g {
            return Some(dist[c.row * w + c.col]);
        }
        let mut next = Vec::new();
        if c.col > 0 {
            next.push(Cell::new(c.col - 1, c.row));
        }
        if c.row > 0 {
            next.push(Cell::new(c.col, c.row - 1));
        }
        if c.col + 1 < w {
            next.push(Cell::new(c.col + 1, c.row));
        }
        if c.row + 1 < h {
            next.push(Cell::new(c.col, c.row + 1));
        }
        for n in next {
            if !grid.is_blocked(n) && dist[n.row * w + n.col] == usize::MAX {
                dist[n.row * w + n.col] = dist[c.row * w + c.col] + 1;
                q.push_back(n);
            }
        }
    }
    None
}

fn grid() -> impl Strategy<Value = (NavGrid, Cell, Cell)> {
    (prop::collection::vec(prop::bool::weighted(0.2), 400), 0usize..400, 0usize..400).prop_map(|(blocked, s, g)| {
        let mut grid = NavGrid::new(20, 20, 0.5, Vec3::ZERO).unwrap();
        for (i, b) in blocked.into_iter().enumerate() {
            grid.set_blocked(Cell::new(i % 20, i / 20), b);
        }
        let (s, g) = (Cell::new(s % 20, s / 20), Cell::new(g % 20, g / 20));
        grid.set_blocked(s, false);
        grid.set_blocked(g, false);
        (grid, s, g)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn astar_is_optimal((grid, s, g) in grid()) {
        match (plan(&grid, s, g), bfs(&grid, s, g)) {
            (Ok(p), Some(n)) => {
                prop_assert_eq!(p.steps(), n);
                prop_assert_eq!(p.cells[0], s);
                prop_assert_eq!(*p.cells.last().unwrap(), g);
                for w in p.cells.windows(2) {
                    prop_assert_eq!(w[0].col.abs_diff(w[1].col) + w[0].row.abs_diff(w[1].row), 1);
                    prop_assert!(!grid.is_blocked(w[1]));
                }
            }
            (Err(PathError::NoPath { .. }), None) => {}
            (a, b) => prop_assert!(false, "planner {:?} vs bfs {:?}", a, b),
        }
    }

    #[test]
    fn follow_is_continuous_and_monotone((grid, s, g) in grid(), speed in 0.2f64..3.0) {
        if let Ok(p) = plan(&grid, s, g) {
            let dt = 0.01;
            let mut prev = follow(&p, speed, 0.0);
            prop_assert_eq!(prev.position, p.waypoints[0]);
            let mut t = 0.0;
            while !prev.done {
                t += dt;
                let cur = follow(&p, speed, t);
                prop_assert!((cur.position - prev.position).length() <= speed * dt + 1e-9);
                prev = cur;
            }
            prop_assert_eq!(prev.position, *p.waypoints.last().unwrap());
        }
    }
}

#[test]
fn same_grid_same_path() {
    let text = "6 4 1 0 0 0\n......\n.##.#.\n...#..\n.#....\n";
    let g = NavGrid::parse(text).unwrap();
    let a = plan(&g, Cell::new(0, 0), Cell::new(5, 3)).unwrap();
    let b = plan(&NavGrid::parse(text).unwrap(), Cell::new(0, 0), Cell::new(5, 3)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.steps(), 8);
}

#[test]
fn single_cell_path_is_done() {
    let g = NavGrid::new(2, 2, 1.0, Vec3::ZERO).unwrap();
    let p: PlannedPath = plan(&g, Cell::new(1, 1), Cell::new(1, 1)).unwrap();
    let s = follow(&p, 1.0, 0.0);
    assert!(s.done);
    assert_eq!(s.position, Vec3::new(1.0, 0.0, 1.0));
}
