//! Graph-based key placement used by the algorithmic comparison groups.

use std::collections::VecDeque;

use rand::Rng;

use crate::geometry::{dist2, Rect};
use crate::level::{LevelSkeleton, RoomId};
use crate::rng::StageRng;

/// Room graph of one floor. Nodes are indexed locally; `rooms[i]` maps back
/// to the level.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorGraph {
    pub rooms: Vec<RoomId>,
    pub tau: Vec<u32>,
    pub rects: Vec<Rect>,
    pub adj: Vec<Vec<usize>>,
    pub start: usize,
    pub end: usize,
}

impl FloorGraph {
    /// Graph from explicit edges; used for hand-built cases.
    pub fn new(tau: Vec<u32>, rects: Vec<Rect>, edges: &[(usize, usize)]) -> Self {
        let n = tau.len();
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a != b && !adj[a].contains(&b) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        let start = (0..n).min_by_key(|&i| tau[i]).unwrap_or(0);
        let end = (0..n).max_by_key(|&i| tau[i]).unwrap_or(0);
        Self { rooms: (0..n).collect(), tau, rects, adj, start, end }
    }

    pub fn from_skeleton(skeleton: &LevelSkeleton, floor: usize) -> Self {
        let mut members: Vec<&_> = skeleton.rooms_on_floor(floor).collect();
        members.sort_by_key(|r| r.tau);
        let index = |id: RoomId| members.iter().position(|r| r.id == id);
        let edges: Vec<(usize, usize)> = skeleton
            .adjacency
            .iter()
            .filter_map(|&(a, b)| Some((index(a)?, index(b)?)))
            .collect();
        let mut g = Self::new(
            members.iter().map(|r| r.tau).collect(),
            members.iter().map(|r| r.rect()).collect(),
            &edges,
        );
        g.rooms = members.iter().map(|r| r.id).collect();
        g
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// Index with the best score; ties go to the lowest `tau`.
    fn argmax(&self, scores: impl Iterator<Item = (usize, f64)>) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, s) in scores {
            let better = match best {
                None => true,
                Some((b, bs)) => s > bs + 1e-12 || ((s - bs).abs() <= 1e-12 && self.tau[i] < self.tau[b]),
            };
            if better {
                best = Some((i, s));
            }
        }
        best.map(|(i, _)| i)
    }
}

/// Hop distances from `src`; `None` for unreachable nodes.
pub fn bfs_distances(g: &FloorGraph, src: usize) -> Vec<Option<u32>> {
    let mut d = vec![None; g.len()];
    d[src] = Some(0);
    let mut q = VecDeque::from([src]);
    while let Some(n) = q.pop_front() {
        let dn = d[n].expect("visited");
        for &m in &g.adj[n] {
            if d[m].is_none() {
                d[m] = Some(dn + 1);
                q.push_back(m);
            }
        }
    }
    d
}

/// `w_start / d_start + w_end / d_end`, maximized over rooms that are neither
/// endpoint.
pub fn bfs_balanced_room(g: &FloorGraph, w_start: f64, w_end: f64) -> RoomId {
    if g.start == g.end {
        return g.rooms[g.start];
    }
    let ds = bfs_distances(g, g.start);
    let de = bfs_distances(g, g.end);
    let scores = (0..g.len()).filter_map(|i| match (ds[i], de[i]) {
        (Some(a), Some(b)) if a > 0 && b > 0 => Some((i, w_start / f64::from(a) + w_end / f64::from(b))),
        _ => None,
    });
    g.rooms[g.argmax(scores).unwrap_or(g.start)]
}

/// Gaussian key density at `p`.
pub fn key_density(p: [f64; 2], keys: &[[f64; 2]], sigma: f64) -> f64 {
    keys.iter()
        .map(|k| {
            let d = dist2(p, *k);
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .sum()
}

/// Population deviation of center distances from room `i` to its neighbors.
pub fn neighbor_spread(g: &FloorGraph, i: usize) -> f64 {
    let c = g.rects[i].center();
    let d: Vec<f64> = g.adj[i].iter().map(|&j| dist2(c, g.rects[j].center())).collect();
    if d.is_empty() {
        return 0.0;
    }
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    (d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / d.len() as f64).sqrt()
}

/// Exploration score of a point in room `i` given the keys placed so far.
/// Density is divided by the key count so the factor stays in `[0, 1]`.
pub fn exploration_score(g: &FloorGraph, i: usize, p: [f64; 2], keys: &[[f64; 2]], sigma: f64) -> f64 {
    let rho = if keys.is_empty() { 0.0 } else { key_density(p, keys, sigma) / keys.len() as f64 };
    neighbor_spread(g, i) * (1.0 - rho)
}

/// Monte Carlo search for `n` low-density rooms. Each round samples points
/// uniformly over the floor's room interiors, keeps the best-scoring point
/// and adds its room's center to the key set. Chosen rooms are not sampled
/// again.
pub fn mc_dispersion_rooms(
    g: &FloorGraph,
    existing_keys: &[[f64; 2]],
    n: usize,
    sigma: f64,
    samples: usize,
    rng: &mut StageRng,
) -> Vec<RoomId> {
    if n >= g.len() {
        return g.rooms.clone();
    }
    let mut keys = existing_keys.to_vec();
    let mut chosen: Vec<usize> = Vec::new();
    for _ in 0..n {
        let open: Vec<usize> = (0..g.len()).filter(|i| !chosen.contains(i)).collect();
        let total_area: f64 = open.iter().map(|&i| g.rects[i].area()).sum();
        let mut best: Option<(usize, f64)> = None;
        for _ in 0..samples.max(1) {
            let mut pick = rng.random::<f64>() * total_area;
            let mut room = *open.last().expect("n < len leaves rooms open");
            for &i in &open {
                let a = g.rects[i].area();
                if pick < a {
                    room = i;
                    break;
                }
                pick -= a;
            }
            let r = g.rects[room];
            let p = [rng.random_range(r.x0..=r.x1), rng.random_range(r.y0..=r.y1)];
            let s = exploration_score(g, room, p, &keys, sigma);
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((room, s));
            }
        }
        let (room, _) = best.expect("sampled");
        chosen.push(room);
        keys.push(g.rects[room].center());
    }
    chosen.into_iter().map(|i| g.rooms[i]).collect()
}

/// All-pairs hop distances; `u32::MAX` marks unreachable pairs.
pub fn floyd_warshall(g: &FloorGraph) -> Vec<Vec<u32>> {
    let n = g.len();
    let mut d = vec![vec![u32::MAX; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
        for &j in &g.adj[i] {
            row[j] = 1;
        }
    }
    for k in 0..n {
        for i in 0..n {
            if d[i][k] == u32::MAX {
                continue;
            }
            for j in 0..n {
                if d[k][j] == u32::MAX {
                    continue;
                }
                let via = d[i][k] + d[k][j];
                if via < d[i][j] {
                    d[i][j] = via;
                }
            }
        }
    }
    d
}

/// `(N - 1) / sum of distances` per node; 1 for a single node.
pub fn closeness(g: &FloorGraph) -> Vec<f64> {
    let n = g.len();
    if n == 1 {
        return vec![1.0];
    }
    let d = floyd_warshall(g);
    (0..n)
        .map(|i| {
            let reach: Vec<u32> = (0..n).filter(|&j| j != i && d[i][j] != u32::MAX).map(|j| d[i][j]).collect();
            let sum: u32 = reach.iter().sum();
            if sum == 0 {
                0.0
            } else {
                (n - 1) as f64 / f64::from(sum)
            }
        })
        .collect()
}

/// Room with the highest closeness, scaled by the start-to-end path length.
pub fn centrality_room(g: &FloorGraph) -> RoomId {
    let c = closeness(g);
    let d = floyd_warshall(g);
    let path = d[g.start][g.end];
    let path = if path == u32::MAX { 1.0 } else { f64::from(path.max(1)) };
    let best = g.argmax(c.iter().enumerate().map(|(i, &ci)| (i, ci / path))).unwrap_or(g.start);
    g.rooms[best]
}
