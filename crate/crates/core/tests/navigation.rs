use std::collections::{BTreeSet, VecDeque};

use levelforge::arrangement::place_doors;
use levelforge::constraints::ArchType;
use levelforge::database::Positioning;
use levelforge::geometry::{Dimensions, Pose};
use levelforge::level::{FacilityInstance, Level, LevelSkeleton, RoomInstance};
use levelforge::navsim::astar::reachable;
use levelforge::navsim::{astar_path, build_nav_grid, flood_fill_room, geometric_repair, CellId, NavGrid, Passability};
use proptest::prelude::*;

fn room(id: usize, x: f64, w: f64, l: f64) -> RoomInstance {
    RoomInstance {
        id,
        template: "T".into(),
        floor: 0,
        origin: [x, 0.0],
        dims: Dimensions::new(w, l, 3.0),
        tau: id as u32 + 1,
        arch_type: ArchType::Enclosed,
    }
}

/// Crate as `(x, y, long, adaptable)` in room-local cells.
type Crate = (u8, u8, bool, bool);

/// A crated room 0 between two side rooms, so it has a doorway on each side.
fn level(w0: u8, w1: u8, l: u8, crates: &[Crate]) -> Level {
    let (w0, w1, l) = (f64::from(w0), f64::from(w1), f64::from(l));
    let sk = LevelSkeleton {
        width: w0 + 2.0 * w1,
        length: l,
        height: 3.0,
        floors: 1,
        rooms: vec![room(0, w1, w0, l), room(1, 0.0, w1, l), room(2, w1 + w0, w1, l)],
        stairs: Vec::new(),
        doors: Vec::new(),
        open_edges: Vec::new(),
        adjacency: Vec::new(),
    };
    let skeleton = place_doors(sk).expect("rooms share a long wall");
    let facilities = crates
        .iter()
        .enumerate()
        .map(|(k, &(x, y, long, adaptable))| {
            let dims = Dimensions::new(1.0, if long { 2.0 } else { 1.0 }, 1.0);
            let x = 1.5 + f64::from(x) % (w0 - 2.0);
            let y = 1.5 + f64::from(y) % (l - 3.0);
            FacilityInstance {
                id: format!("crate{k}"),
                def: "Crate".into(),
                room: 0,
                pose: Pose::on_floor(x, y + if long { 0.5 } else { 0.0 }, 0.0, dims),
                positioning: if adaptable { Positioning::Adaptable } else { Positioning::Fixed },
            }
        })
        .collect();
    Level { seed: 0, group: None, skeleton, facilities, mechanics: Vec::new() }
}

fn planar_neighbors(g: &NavGrid, c: CellId) -> Vec<CellId> {
    let (i, j, f) = g.coords(c);
    let mut out = Vec::new();
    if i > 0 {
        out.push(g.id(i - 1, j, f));
    }
    if j > 0 {
        out.push(g.id(i, j - 1, f));
    }
    if i + 1 < g.width {
        out.push(g.id(i + 1, j, f));
    }
    if j + 1 < g.length {
        out.push(g.id(i, j + 1, f));
    }
    out
}

/// Unit-weight shortest distances by breadth-first search.
fn bfs(g: &NavGrid, from: CellId, ok: impl Fn(CellId) -> bool) -> Vec<Option<usize>> {
    let mut d = vec![None; g.cell_count()];
    if !ok(from) {
        return d;
    }
    d[from] = Some(0);
    let mut q = VecDeque::from([from]);
    while let Some(c) = q.pop_front() {
        for n in planar_neighbors(g, c) {
            if d[n].is_none() && ok(n) {
                d[n] = Some(d[c].unwrap() + 1);
                q.push_back(n);
            }
        }
    }
    d
}

fn crates() -> impl Strategy<Value = Vec<Crate>> {
    prop::collection::vec((0u8..20, 0u8..20, any::<bool>(), any::<bool>()), 0..8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn astar_matches_bfs(w0 in 6u8..14, w1 in 5u8..10, l in 6u8..14, cs in crates(), pick in any::<(u16, u16)>()) {
        let lv = level(w0, w1, l, &cs);
        let g = build_nav_grid(&lv);
        let open: Vec<CellId> = (0..g.cell_count()).filter(|&c| g.passable(c)).collect();
        prop_assume!(!open.is_empty());
        let a = open[pick.0 as usize % open.len()];
        let b = open[pick.1 as usize % open.len()];
        let oracle = bfs(&g, a, |c| g.passable(c))[b];
        let path = astar_path(&g, a, b, Passability::Strict);
        prop_assert_eq!(path.as_ref().map(|p| p.len() - 1), oracle);
        if let Some(p) = path {
            prop_assert_eq!((p[0], *p.last().unwrap()), (a, b));
            for w in p.windows(2) {
                prop_assert!(planar_neighbors(&g, w[0]).contains(&w[1]));
                prop_assert!(g.passable(w[1]));
            }
        }
        let relaxed = bfs(&g, a, |c| g.passable_relaxed(c))[b];
        prop_assert_eq!(astar_path(&g, a, b, Passability::IgnoreAdaptable).map(|p| p.len() - 1), relaxed);
    }

    #[test]
    fn reachable_count_matches_bfs(w0 in 6u8..14, w1 in 5u8..10, l in 6u8..14, cs in crates()) {
        let lv = level(w0, w1, l, &cs);
        let g = build_nav_grid(&lv);
        let start = g.anchors[0].unwrap();
        let seen = reachable(&g, start);
        let oracle = bfs(&g, start, |c| g.passable(c));
        let want: Vec<bool> = oracle.iter().map(Option::is_some).collect();
        prop_assert_eq!(seen, want);
    }

    #[test]
    fn flood_fill_matches_components(w0 in 6u8..14, w1 in 5u8..10, l in 6u8..14, cs in crates()) {
        let lv = level(w0, w1, l, &cs);
        let g = build_nav_grid(&lv);
        for r in 0..3 {
            let report = flood_fill_room(r, &g);
            let inside = |c: CellId| g.room[c] == Some(r) && g.passable(c);
            let region_of = |cells: &[CellId]| -> BTreeSet<CellId> {
                cells
                    .iter()
                    .flat_map(|&c| {
                        let d = bfs(&g, c, inside);
                        (0..g.cell_count()).filter(move |&n| d[n].is_some())
                    })
                    .collect()
            };
            let regions: Vec<BTreeSet<CellId>> = g.doorways[r].iter().map(|w| region_of(&w.cells)).collect();
            prop_assert_eq!(&report.regions, &regions);
            let blocked: Vec<usize> = (0..regions.len())
                .filter(|&d| (0..regions.len()).any(|e| e != d && regions[d].is_disjoint(&regions[e])))
                .collect();
            prop_assert_eq!(report.blocked, blocked);
        }
    }

    #[test]
    fn geometric_repair_never_adds_blockage(w0 in 6u8..14, w1 in 5u8..10, l in 6u8..14, cs in crates()) {
        let mut lv = level(w0, w1, l, &cs);
        let mut g = build_nav_grid(&lv);
        let before: Vec<BTreeSet<usize>> = (0..3).map(|r| flood_fill_room(r, &g).blocked.into_iter().collect()).collect();
        let fixed_before: Vec<Pose> = lv.facilities.iter().filter(|f| f.positioning == Positioning::Fixed).map(|f| f.pose).collect();
        geometric_repair(&mut lv, &mut g);
        let after: Vec<BTreeSet<usize>> = (0..3).map(|r| flood_fill_room(r, &g).blocked.into_iter().collect()).collect();
        for r in 0..3 {
            prop_assert!(after[r].is_subset(&before[r]), "room {}: {:?} -> {:?}", r, before[r], after[r]);
        }
        let fixed_after: Vec<Pose> = lv.facilities.iter().filter(|f| f.positioning == Positioning::Fixed).map(|f| f.pose).collect();
        prop_assert_eq!(fixed_before, fixed_after);
        // The incrementally updated grid agrees with a fresh build.
        let sorted = |g: &NavGrid| -> Vec<Vec<usize>> {
            g.occupants.iter().map(|o| { let mut o = o.clone(); o.sort_unstable(); o }).collect()
        };
        prop_assert_eq!(sorted(&build_nav_grid(&lv)), sorted(&g));
    }
}
