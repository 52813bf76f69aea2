//! Grid A* over (cell, heading) states. Paths are shortest by cell count;
//! among equally short paths the one with the fewest turns wins.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::grid::{CellId, NavGrid};

/// Cost of one step, large enough that turns only break ties.
const STEP: u64 = 1 << 20;
const NO_HEADING: usize = 4;

fn turn_cost(from: usize, to: usize) -> u64 {
    if from == NO_HEADING || from == to {
        0
    } else if (from + 2) % 4 == to {
        2
    } else {
        1
    }
}

/// Cells passable under the chosen rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Passability {
    Strict,
    /// Adaptable facilities do not block.
    IgnoreAdaptable,
}

fn heuristic(g: &NavGrid, a: CellId, b: CellId) -> u64 {
    let (ai, aj, af) = g.coords(a);
    let (bi, bj, bf) = g.coords(b);
    (ai.abs_diff(bi) + aj.abs_diff(bj) + af.abs_diff(bf)) as u64 * STEP
}

/// Shortest 4-connected path from `from` to `to`, both included. Stair cells
/// connect vertically and count as one step.
pub fn astar_path(g: &NavGrid, from: CellId, to: CellId, mode: Passability) -> Option<Vec<CellId>> {
    let ok = |c: CellId| match mode {
        Passability::Strict => g.passable(c),
        Passability::IgnoreAdaptable => g.passable_relaxed(c),
    };
    if !ok(from) || !ok(to) {
        return None;
    }
    if from == to {
        return Some(vec![from]);
    }
    let n = g.cell_count() * 5;
    let state = |c: CellId, h: usize| c * 5 + h;
    let mut best = vec![u64::MAX; n];
    let mut parent = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    let s0 = state(from, NO_HEADING);
    best[s0] = 0;
    heap.push(Reverse((heuristic(g, from, to), 0u64, s0)));
    while let Some(Reverse((_, cost, s))) = heap.pop() {
        if cost > best[s] {
            continue;
        }
        let (c, h) = (s / 5, s % 5);
        if c == to {
            let mut path = vec![c];
            let mut cur = s;
            while parent[cur] != usize::MAX {
                cur = parent[cur];
                path.push(cur / 5);
            }
            path.reverse();
            return Some(path);
        }
        for (nc, dir) in g.neighbors(c) {
            if !ok(nc) {
                continue;
            }
            let nh = dir.unwrap_or(h);
            let nd = cost + STEP + dir.map_or(0, |d| turn_cost(h, d));
            let ns = state(nc, nh);
            if nd < best[ns] {
                best[ns] = nd;
                parent[ns] = s;
                heap.push(Reverse((nd + heuristic(g, nc, to), nd, ns)));
            }
        }
    }
    None
}

/// Cells reachable from `from` under strict passability.
pub fn reachable(g: &NavGrid, from: CellId) -> Vec<bool> {
    let mut seen = vec![false; g.cell_count()];
    if !g.passable(from) {
        return seen;
    }
    seen[from] = true;
    let mut stack = vec![from];
    while let Some(c) = stack.pop() {
        for (n, _) in g.neighbors(c) {
            if !seen[n] && g.passable(n) {
                seen[n] = true;
                stack.push(n);
            }
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::ArchType;
    use crate::navsim::fixtures::{level, room};
    use crate::navsim::grid::build_nav_grid;

    #[test]
    fn trivial_and_corner_to_corner() {
        let lv = level(vec![room(0, 0.0, 10.0, 10.0, ArchType::Enclosed)], 10.0, 10.0);
        let g = build_nav_grid(&lv);
        let a = g.id(1, 1, 0);
        let b = g.id(8, 8, 0);
        assert_eq!(astar_path(&g, a, a, Passability::Strict), Some(vec![a]));
        let p = astar_path(&g, a, b, Passability::Strict).unwrap();
        assert_eq!(p.len(), 7 + 7 + 1);
        let turns = p
            .windows(3)
            .filter(|w| {
                let (a, b, c) = (g.coords(w[0]), g.coords(w[1]), g.coords(w[2]));
                (b.0 as i64 - a.0 as i64, b.1 as i64 - a.1 as i64) != (c.0 as i64 - b.0 as i64, c.1 as i64 - b.1 as i64)
            })
            .count();
        assert_eq!(turns, 1);
    }

    #[test]
    fn walls_disconnect() {
        let lv = level(vec![room(0, 0.0, 10.0, 10.0, ArchType::Enclosed), room(1, 11.0, 5.0, 5.0, ArchType::Enclosed)], 16.0, 10.0);
        let g = build_nav_grid(&lv);
        assert_eq!(astar_path(&g, g.id(2, 2, 0), g.id(13, 2, 0), Passability::Strict), None);
    }
}
