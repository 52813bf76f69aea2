//! Acceptance suite. Each criterion prints one PASS/FAIL line; the binary
//! exits non-zero when any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use levelforge::anneal::SaParams;
use levelforge::arrangement::LevelConfig;
use levelforge::constraints::{
    eval_facility_penalty, eval_overlap_penalty, eval_room_penalty, ArchType, Axis, AxisFunction, ConstraintKind,
    ConstraintSpec, PlacedFacility, RoomBox, RoomContext, RoomGeometry, WeightConfig,
};
use levelforge::database::{samples, Positioning, TopoKind};
use levelforge::export::vmf_reader::read_vmf;
use levelforge::export::{export_level_json, export_vmf, import_level_json};
use levelforge::geometry::{footprint_half_extents, Dimensions, Pose, Rect, WallAxis, QUARTER_YAWS};
use levelforge::harness::{
    generate_level_with, level_seed, run_experiment, AggregateStats, ExperimentConfig, ExperimentOutput, Group,
    MetricsRecord, PipelineOptions, Status,
};
use levelforge::layout::{objective, optimize_with_restarts, FacilitySlot, LayoutProblem};
use levelforge::mechanics::{
    assign_with_restarts, AssignmentProblem, MechanicInstance, RoomContents, TopoRule, TopoTarget,
};
use levelforge::navsim::{build_nav_grid, rerun_validation};
use levelforge::par::Execution;
use levelforge::rng::{stream, StageRng};
use levelforge::Level;
use rand::seq::SliceRandom;
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

// ---------------------------------------------------------------- 1

fn unit_at(x: f64, y: f64) -> Pose {
    Pose::on_floor(x, y, 0.0, Dimensions::new(1.0, 1.0, 1.0))
}

fn formula_correctness() -> Verdict {
    let t0 = Instant::now();
    let w = WeightConfig::default();
    let mut room = RoomGeometry::new(20.0, 20.0, 10.0);
    room.entrances = vec![[0.0, 10.0]];
    let fac = |kind: ConstraintKind, weight: f64, subject: Pose, others: &[PlacedFacility<'_>]| {
        eval_facility_penalty(&ConstraintSpec::weighted(kind, weight), &subject, &room, others, &w).unwrap()
    };
    let locker = [PlacedFacility { name: "Locker", pose: unit_at(10.0, 2.0) }];
    let facing_up = [PlacedFacility {
        name: "T",
        pose: Pose::on_floor(5.0, 5.0, std::f64::consts::FRAC_PI_2, Dimensions::new(1.0, 1.0, 1.0)),
    }];
    let door = PlacedFacility { name: "Door", pose: unit_at(10.0, 5.0) };
    let shelf = PlacedFacility { name: "Shelf", pose: unit_at(6.0, 5.0) };
    let deg = |d: f64| d.to_radians();

    // (label, computed, hand value)
    let mut cases: Vec<(&str, f64, f64)> = vec![
        ("AxisFunction centered", fac(ConstraintKind::AxisFunction { function: AxisFunction::CenteredXy }, 20.0, unit_at(13.0, 14.0), &[]), 20.0 * 25.0),
        ("AxisFunction on-floor", fac(ConstraintKind::AxisFunction { function: AxisFunction::OnFloor }, 20.0, Pose { center: [3.0, 3.0, 2.5], yaw: 0.0, dims: Dimensions::new(1.0, 1.0, 1.0) }, &[]), 20.0 * 4.0),
        ("AxisFunction entrance", fac(ConstraintKind::AxisFunction { function: AxisFunction::NearLevelEntrance }, 20.0, unit_at(3.0, 14.0), &[]), 20.0 * 25.0),
        ("PlaceInRange", fac(ConstraintKind::PlaceInRange { p1: [0.0, 0.0, 0.0], p2: [2.0, 2.0, 5.0] }, 20.0, unit_at(5.0, 6.0), &[]), 20.0 * 25.0),
        ("PlaceByWall", fac(ConstraintKind::PlaceByWall { orientation_deg: Some(90.0) }, 20.0, unit_at(3.0, 10.0), &[]), 20.0 * (2.5 + deg(90.0)).powi(2)),
        ("Near", fac(ConstraintKind::Near { target: "Locker".into(), d_min: Some(5.0) }, 10.0, unit_at(2.0, 2.0), &locker), 90.0),
        ("Near satisfied", fac(ConstraintKind::Near { target: "Locker".into(), d_min: Some(5.0) }, 10.0, unit_at(7.0, 2.0), &locker), 0.0),
        ("Far", fac(ConstraintKind::Far { target: "Locker".into(), d_max: Some(10.0) }, 15.0, unit_at(6.0, 2.0), &locker), 15.0 * 36.0),
        ("Far boundary", fac(ConstraintKind::Far { target: "Locker".into(), d_max: Some(10.0) }, 15.0, unit_at(0.0, 2.0), &locker), 0.0),
        ("CanSee blocked", fac(ConstraintKind::CanSee { target: "Door".into() }, 2.0, unit_at(2.0, 5.0), &[door, shelf]), 2.0),
        ("CanSee clear", fac(ConstraintKind::CanSee { target: "Door".into() }, 2.0, unit_at(2.0, 5.0), &[door]), 0.0),
        ("Focus", fac(ConstraintKind::Focus { target: "T".into(), threshold_deg: None }, 10.0, unit_at(5.0, 1.0), &facing_up), 10.0 * (deg(90.0) - deg(15.0)).powi(2)),
        ("Alignment", fac(ConstraintKind::Alignment { target: "T".into(), axis: Axis::X }, 15.0, unit_at(1.0, 1.0), &facing_up), 15.0 * deg(45.0).powi(2)),
        ("Orientation", fac(ConstraintKind::Orientation { target: "T".into() }, 20.0, unit_at(1.0, 1.0), &facing_up), 20.0 * deg(90.0).powi(2)),
        ("overlap coincident", eval_overlap_penalty(&unit_at(3.0, 3.0), &unit_at(3.0, 3.0), 30.0), 30.0),
        ("overlap touching", eval_overlap_penalty(&unit_at(3.0, 3.0), &unit_at(4.0, 3.0), 30.0), 0.0),
    ];

    let rbox = |t: &str, floor: usize, x0: f64, y0: f64, x1: f64, y1: f64| RoomBox {
        template: t.into(),
        floor,
        rect: Rect::new(x0, y0, x1, y1),
    };
    let placed = vec![rbox("Cafeteria", 0, 0.0, 0.0, 10.0, 10.0)];
    let ctx = RoomContext { level_width: 50.0, level_length: 50.0, floor_height: 10.0, entrance: [5.0, 5.0, 5.0], placed: &placed };
    let room_pen = |kind: ConstraintKind, weight: f64, subject: &RoomBox| {
        eval_room_penalty(&ConstraintSpec::weighted(kind, weight), subject, &ctx, &w).unwrap()
    };
    let touching = rbox("Kitchen", 0, 10.0, 0.0, 16.0, 6.0);
    let apart = rbox("Kitchen", 0, 17.0, 0.0, 23.0, 6.0);
    let upstairs = rbox("Kitchen", 1, 22.0, 22.0, 28.0, 28.0);
    cases.extend([
        ("room AdjacentTo satisfied", room_pen(ConstraintKind::AdjacentTo { target: "Cafeteria".into() }, 10.0, &touching), 0.0),
        ("room AdjacentTo", room_pen(ConstraintKind::AdjacentTo { target: "Cafeteria".into() }, 10.0, &apart), 70.0),
        ("room SeparateFrom", room_pen(ConstraintKind::SeparateFrom { target: "Cafeteria".into() }, 15.0, &touching), 150.0),
        ("room AxisFunction centered", room_pen(ConstraintKind::AxisFunction { function: AxisFunction::CenteredXy }, 20.0, &rbox("Kitchen", 0, 0.0, 0.0, 6.0, 8.0)), 20.0 * (22.0f64.powi(2) + 21.0f64.powi(2))),
        ("room AxisFunction on-floor", room_pen(ConstraintKind::AxisFunction { function: AxisFunction::OnFloor }, 20.0, &upstairs), 20.0 * 100.0),
        ("room AxisFunction entrance", room_pen(ConstraintKind::AxisFunction { function: AxisFunction::NearLevelEntrance }, 20.0, &upstairs), 20.0 * (20.0f64.powi(2) * 2.0 + 100.0)),
        ("room MaxInstances", room_pen(ConstraintKind::MaxInstances { count: 2 }, 20.0, &apart), 0.0),
        ("room SetType", room_pen(ConstraintKind::SetType { arch: ArchType::Open }, 20.0, &apart), 0.0),
    ]);

    // Mechanic tier: one rule per problem, fitness terms evaluated by hand.
    let topo = |kind: TopoKind, threshold: Option<u32>, ti: u32, tj: u32| {
        let mech = |id: &str, rules: Vec<TopoRule>| MechanicInstance {
            id: id.into(),
            mechanic: id.into(),
            dims: Dimensions::new(0.5, 0.5, 0.5),
            standard_constraints: Vec::new(),
            rules,
            candidates: vec![0, 1],
            pinned: None,
        };
        let contents: Vec<RoomContents> = (0..2)
            .map(|_| RoomContents { geometry: RoomGeometry::new(6.0, 6.0, 3.0), facilities: Vec::new(), keep_out: Vec::new() })
            .collect();
        let p = AssignmentProblem::new(
            vec![ti, tj],
            &contents,
            vec![mech("a", vec![TopoRule::new(kind, TopoTarget::Mechanic(1), threshold)]), mech("b", Vec::new())],
            &w,
            0,
        );
        p.fitness(&[0, 1]).unwrap().total
    };
    cases.extend([
        ("Precedes satisfied", topo(TopoKind::Precedes, None, 3, 5), 0.0),
        ("Precedes", topo(TopoKind::Precedes, None, 5, 3), 200.0),
        ("TopologicalNear", topo(TopoKind::TopologicalNear, None, 1, 8), 10.0 * 9.0),
        ("TopologicalNear within", topo(TopoKind::TopologicalNear, None, 1, 5), 0.0),
        ("TopologicalFar", topo(TopoKind::TopologicalFar, None, 4, 5), 60.0),
        ("TopologicalFar apart", topo(TopoKind::TopologicalFar, None, 1, 4), 0.0),
    ]);

    let wrong: Vec<String> = cases
        .iter()
        .filter(|(_, got, want)| !rel_eq(*got, *want))
        .map(|(l, got, want)| format!("{l}: {got} != {want}"))
        .collect();
    let elapsed = t0.elapsed();
    verdict(
        wrong.is_empty() && elapsed < Duration::from_secs(1),
        format!("{} hand-evaluated cases, {} mismatched {:?}, {:.3}s", cases.len(), wrong.len(), wrong, elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- 2

const SIZES: [(f64, f64); 5] = [(1.0, 1.0), (1.0, 2.0), (0.5, 1.5), (2.0, 1.0), (1.5, 1.5)];

fn random_constraint(rng: &mut StageRng, room: (f64, f64), other: Option<&str>) -> ConstraintKind {
    let pick = rng.random_range(0..if other.is_some() { 8 } else { 4 });
    let other = other.unwrap_or_default().to_owned();
    match pick {
        0 => ConstraintKind::PlaceByWall { orientation_deg: if rng.random() { Some(90.0) } else { None } },
        1 => ConstraintKind::AxisFunction { function: AxisFunction::CenteredXy },
        2 => ConstraintKind::AxisFunction { function: AxisFunction::NearLevelEntrance },
        3 => {
            let x = rng.random_range(0.0..room.0 - 1.0);
            let y = rng.random_range(0.0..room.1 - 1.0);
            ConstraintKind::PlaceInRange { p1: [x, y, 0.0], p2: [x + 1.0, y + 1.0, 3.0] }
        }
        4 => ConstraintKind::Near { target: other, d_min: Some(2.0) },
        5 => ConstraintKind::Far { target: other, d_max: Some(5.0) },
        6 => ConstraintKind::Orientation { target: other },
        _ => ConstraintKind::Focus { target: other, threshold_deg: None },
    }
}

fn layout_instance(i: u64) -> LayoutProblem {
    let mut rng = stream(2024, "acceptance-layout", i);
    let w = f64::from(rng.random_range(4u32..=8));
    let l = f64::from(rng.random_range(4u32..=8));
    let n = rng.random_range(1..=2usize);
    let mut slots = Vec::new();
    for k in 0..n {
        let (sw, sl) = SIZES[rng.random_range(0..SIZES.len())];
        let other = if n == 2 { Some(format!("F{}", 1 - k)) } else { None };
        let constraints = (0..rng.random_range(0..=2))
            .map(|_| ConstraintSpec::new(random_constraint(&mut rng, (w, l), other.as_deref())))
            .collect();
        slots.push(FacilitySlot {
            id: format!("F{k}"),
            def: format!("F{k}"),
            dims: Dimensions::new(sw, sl, 1.0),
            positioning: Positioning::Adaptable,
            constraints,
            fixed_pose: None,
        });
    }
    if rng.random_bool(0.5) {
        let dims = Dimensions::new(1.0, 1.0, 1.0);
        slots.push(FacilitySlot {
            id: "fixed".into(),
            def: "Fixed".into(),
            dims,
            positioning: Positioning::Fixed,
            constraints: Vec::new(),
            fixed_pose: Some(Pose::on_floor(0.5, 0.5, 0.0, dims)),
        });
    }
    let mut geometry = RoomGeometry::new(w, l, 3.0);
    geometry.entrances = vec![[0.0, (l / 2.0).floor()]];
    LayoutProblem { room: 0, geometry, slots, keep_out: Vec::new() }
}

/// Every in-bounds pose on the half-unit lattice at the four quarter yaws.
fn lattice_poses(dims: Dimensions, room: &RoomGeometry) -> Vec<Pose> {
    let mut out = Vec::new();
    for yaw in QUARTER_YAWS {
        let (hx, hy) = footprint_half_extents(dims, yaw);
        let xs = ((2.0 * hx).ceil() as i64..=(2.0 * (room.width - hx)).floor() as i64).map(|k| k as f64 * 0.5);
        for x in xs {
            let ys = ((2.0 * hy).ceil() as i64..=(2.0 * (room.length - hy)).floor() as i64).map(|k| k as f64 * 0.5);
            for y in ys {
                out.push(Pose::on_floor(x, y, yaw, dims));
            }
        }
    }
    out
}

fn exhaustive_optimum(p: &LayoutProblem, w: &WeightConfig) -> f64 {
    let base: Vec<Pose> =
        p.slots.iter().map(|s| s.fixed_pose.unwrap_or(Pose::on_floor(0.0, 0.0, 0.0, s.dims))).collect();
    let movable: Vec<usize> = p.adaptable().collect();
    let options: Vec<Vec<Pose>> = movable.iter().map(|&i| lattice_poses(p.slots[i].dims, &p.geometry)).collect();
    let mut best = f64::INFINITY;
    let mut poses = base;
    match movable.as_slice() {
        [a] => {
            for pa in &options[0] {
                poses[*a] = *pa;
                best = best.min(objective(p, &poses, w).total);
            }
        }
        [a, b] => {
            for pa in &options[0] {
                poses[*a] = *pa;
                for pb in &options[1] {
                    poses[*b] = *pb;
                    best = best.min(objective(p, &poses, w).total);
                }
            }
        }
        _ => unreachable!("instances hold one or two adaptable facilities"),
    }
    best
}

fn layout_oracle() -> Verdict {
    let t0 = Instant::now();
    let w = WeightConfig::default();
    let sa = SaParams::default();
    let mut ok = 0;
    let mut worst = 0.0f64;
    for i in 0..100 {
        let p = layout_instance(i);
        let oracle = exhaustive_optimum(&p, &w);
        let got = optimize_with_restarts(&p, &w, &sa, 5, i, Execution::Sequential).unwrap().breakdown.total;
        let ratio = got / oracle;
        worst = worst.max(ratio);
        if got <= 1.05 * oracle {
            ok += 1;
        } else if std::env::var_os("ACCEPTANCE_VERBOSE").is_some() {
            println!("  layout instance {i}: {got:.3} vs {oracle:.3} {:?}", p.slots);
        }
    }
    let elapsed = t0.elapsed();
    verdict(
        ok >= 95 && elapsed < Duration::from_secs(120),
        format!("{ok}/100 within 5% of the lattice optimum (worst ratio {worst:.4}), {:.1}s", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- 3

fn assignment_instance(i: u64) -> AssignmentProblem {
    let mut rng = stream(2024, "acceptance-assign", i);
    let n = rng.random_range(2..=8usize);
    let mut tau: Vec<u32> = (1..=n as u32).collect();
    tau.shuffle(&mut rng);
    let contents: Vec<RoomContents> = (0..n)
        .map(|_| {
            let geometry = RoomGeometry::new(f64::from(rng.random_range(4u32..=10)), f64::from(rng.random_range(4u32..=10)), 3.0);
            let facilities = if rng.random() {
                vec![("Locker".to_owned(), Pose::on_floor(1.0, 1.0, 0.0, Dimensions::new(1.0, 1.0, 2.0)))]
            } else {
                Vec::new()
            };
            RoomContents { geometry, facilities, keep_out: Vec::new() }
        })
        .collect();
    let k = rng.random_range(1..=2usize);
    let mechanics = (0..k)
        .map(|j| {
            let mut rules = Vec::new();
            for _ in 0..rng.random_range(1..=2) {
                let kind = [TopoKind::Precedes, TopoKind::TopologicalNear, TopoKind::TopologicalFar][rng.random_range(0..3)];
                let target = match rng.random_range(0..3) {
                    0 if k == 2 => TopoTarget::Mechanic(1 - j),
                    1 => TopoTarget::Room(rng.random_range(0..n)),
                    _ => TopoTarget::Tau(f64::from(rng.random_range(1..=n as u32))),
                };
                let threshold = if rng.random() { Some(rng.random_range(0..=3)) } else { None };
                rules.push(TopoRule::new(kind, target, threshold));
            }
            let standard_constraints = match rng.random_range(0..3) {
                0 => vec![ConstraintSpec::new(ConstraintKind::PlaceByWall { orientation_deg: None })],
                1 => vec![ConstraintSpec::new(ConstraintKind::Near { target: "Locker".into(), d_min: Some(2.0) })],
                _ => Vec::new(),
            };
            MechanicInstance {
                id: format!("m{j}"),
                mechanic: format!("M{j}"),
                dims: Dimensions::new(0.5, 0.5, 0.5),
                standard_constraints,
                rules,
                candidates: (0..n).collect(),
                pinned: None,
            }
        })
        .collect();
    AssignmentProblem::new(tau, &contents, mechanics, &WeightConfig::default(), i)
}

fn brute_force_fitness(p: &AssignmentProblem) -> f64 {
    let n = p.room_tau.len();
    let k = p.mechanics.len();
    let mut best = f64::INFINITY;
    for code in 0..n.pow(k as u32) {
        let a: Vec<usize> = (0..k).map(|j| code / n.pow(j as u32) % n).collect();
        best = best.min(p.fitness(&a).unwrap().total);
    }
    best
}

fn assignment_oracle() -> Verdict {
    let t0 = Instant::now();
    let sa = SaParams::default();
    let mut ok = 0;
    for i in 0..100 {
        let p = assignment_instance(i);
        let oracle = brute_force_fitness(&p);
        let got = assign_with_restarts(&p, &sa, 5, i, Execution::Sequential).unwrap().fitness.total;
        if rel_eq(got, oracle) {
            ok += 1;
        }
    }
    let elapsed = t0.elapsed();
    verdict(
        ok >= 95 && elapsed < Duration::from_secs(30),
        format!("{ok}/100 equal to the brute-force minimum, {:.1}s", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- 4

fn validity_rate() -> Verdict {
    let t0 = Instant::now();
    let exp = ExperimentConfig { levels_per_group: 10, base_seed: 7, ..ExperimentConfig::default() };
    let out = run_experiment(&exp, &samples::hospital()).unwrap();
    let valid = out.records.iter().filter(|r| r.status == Status::Valid).count();
    let elapsed = t0.elapsed();
    verdict(
        out.records.len() == 60 && valid * 100 >= 85 * 60 && elapsed < Duration::from_secs(600),
        format!("{valid}/{} valid ({:.1}%), {:.1}s", out.records.len(), 100.0 * valid as f64 / 60.0, elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- 5

fn repair_soundness(batch: &ExperimentOutput) -> Verdict {
    let config = LevelConfig::default();
    let db = samples::hospital();
    let opts = PipelineOptions::default();
    let (mut checked, mut unreachable) = (0, 0);
    for &group in &Group::ALL {
        for index in 0..4 {
            let seed = level_seed(42, group, index);
            let Ok(g) = generate_level_with(&config, &db, group, seed, index, &opts) else { continue };
            if matches!(g.metrics.status, Status::Unrepairable | Status::Failed) {
                continue;
            }
            checked += 1;
            if rerun_validation(&g.level, &build_nav_grid(&g.level), &opts.agent).is_err() {
                unreachable += 1;
            }
        }
    }
    let ratios: Vec<f64> = batch
        .records
        .iter()
        .filter(|r| r.status != Status::Failed && r.adaptable_facilities > 0)
        .map(|r| f64::from(r.facilities_removed) / f64::from(r.adaptable_facilities))
        .collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    verdict(
        checked > 0 && unreachable == 0 && mean <= 0.15,
        format!(
            "{checked} repaired levels re-validated, {unreachable} with unreachable rooms; removed/adaptable mean {:.4}% over {} levels",
            100.0 * mean,
            ratios.len()
        ),
    )
}

// ---------------------------------------------------------------- 6, 7

fn sim_time(stats: &AggregateStats, group: Group) -> (f64, f64, f64) {
    let m = stats.group(group.name()).and_then(|g| g.metric("simulation_time")).expect("group present");
    (m.mean, m.ci_low, m.ci_high)
}

fn pacing_ordering(batch: &ExperimentOutput) -> Verdict {
    let families = [
        ("A", Group::ABaseline, Group::AExploration, Group::ASpeedrun),
        ("DB", Group::DbBaseline, Group::DbExploration, Group::DbSpeedrun),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, b, e, s) in families {
        let (mb, _, _) = sim_time(&batch.stats, b);
        let (me, el, eh) = sim_time(&batch.stats, e);
        let (ms, sl, sh) = sim_time(&batch.stats, s);
        let ordered = ms < mb && mb < me;
        let separated = sh < el || eh < sl;
        pass &= ordered && separated;
        parts.push(format!(
            "{name}: speedrun {ms:.2} [{sl:.2}, {sh:.2}] {} baseline {mb:.2} {} exploration {me:.2} [{el:.2}, {eh:.2}]{}",
            if ms < mb { "<" } else { ">=" },
            if mb < me { "<" } else { ">=" },
            if separated { "" } else { " (CIs overlap)" }
        ));
    }
    verdict(pass, parts.join("; "))
}

fn db_a_equivalence(batch: &ExperimentOutput) -> Verdict {
    let pairs = [
        ("baseline", Group::ABaseline, Group::DbBaseline),
        ("exploration", Group::AExploration, Group::DbExploration),
        ("speedrun", Group::ASpeedrun, Group::DbSpeedrun),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, a, db) in pairs {
        let (ma, _, _) = sim_time(&batch.stats, a);
        let (md, _, _) = sim_time(&batch.stats, db);
        let gap = (md - ma).abs() / ma;
        pass &= gap <= 0.10;
        parts.push(format!("{name}: A {ma:.2} DB {md:.2} gap {:.1}%", 100.0 * gap));
    }
    verdict(pass, parts.join("; "))
}

// ---------------------------------------------------------------- 8

fn coverage_ordering(batch: &ExperimentOutput) -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for g in &batch.stats.groups {
        let rerun = g.metric("grid_exploration").unwrap().mean;
        let sim = g.metric("sim_grid_exploration").unwrap().mean;
        pass &= rerun > sim;
        parts.push(format!("{} {rerun:.0}>{sim:.0}", g.group));
    }
    let identities = |r: &MetricsRecord| {
        r.avg_completion_time == (r.rerun_time + r.simulation_time) / 2.0
            && r.avg_grid_exploration == (f64::from(r.grid_exploration) + f64::from(r.sim_grid_exploration)) / 2.0
    };
    let broken = batch.records.iter().filter(|r| !identities(r)).count();
    pass &= broken == 0;
    verdict(pass, format!("{}; identities broken on {broken}/{} records", parts.join(", "), batch.records.len()))
}

// ---------------------------------------------------------------- 9

fn determinism(first: &Path) -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let exp = ExperimentConfig {
        out_dir: Some(dir.path().to_path_buf()),
        threads: Some(4),
        exec: Execution::Parallel,
        ..ExperimentConfig::default()
    };
    run_experiment(&exp, &samples::hospital()).unwrap();
    let a = std::fs::read(first.join("records.csv")).unwrap();
    let b = std::fs::read(dir.path().join("records.csv")).unwrap();
    verdict(a == b, format!("records.csv sequential vs 4 workers: {} bytes, identical={}", a.len(), a == b))
}

// ---------------------------------------------------------------- 10

/// Brushes expected from the room geometry, counted on unit cells along
/// every wall: one brush per solid run, one lintel per door cell.
fn expected_brushes(level: &Level) -> usize {
    let sk = &level.skeleton;
    let mut total = 0;
    for r in &sk.rooms {
        total += 2;
        let [x0, y0] = r.origin;
        let (x1, y1) = (x0 + r.dims.width, y0 + r.dims.length);
        let wall_h = r.dims.height - 0.5;
        let walls = [(WallAxis::Y, y0, x0, x1), (WallAxis::Y, y1, x0, x1), (WallAxis::X, x0, y0 + 1.0, y1 - 1.0), (WallAxis::X, x1, y0 + 1.0, y1 - 1.0)];
        for (axis, coord, lo, hi) in walls {
            let mut open: BTreeMap<i64, bool> = BTreeMap::new(); // cell -> is door
            for d in sk.doors.iter().filter(|d| (d.room_a == r.id || d.room_b == r.id) && d.axis == axis) {
                let (c, along) = match axis {
                    WallAxis::X => (d.position[0], d.position[1]),
                    WallAxis::Y => (d.position[1], d.position[0]),
                };
                if c == coord {
                    open.insert(along.floor() as i64, true);
                }
            }
            for e in sk.open_edges.iter().filter(|e| (e.room_a == r.id || e.room_b == r.id) && e.axis == axis && e.coord == coord) {
                for k in (e.from.round() as i64 + 1)..(e.to.round() as i64 - 1) {
                    open.insert(k, false);
                }
            }
            let mut in_run = false;
            for k in (lo as i64)..(hi as i64) {
                let solid = !open.contains_key(&k);
                if solid && !in_run {
                    total += 1;
                }
                in_run = solid;
            }
            if wall_h > 2.5 {
                total += open.iter().filter(|(&k, &door)| door && k >= lo as i64 && k < hi as i64).count();
            }
        }
    }
    total
}

fn export_integrity() -> Verdict {
    let db = samples::hospital();
    let opts = PipelineOptions::default();
    let mut rng = stream(2024, "acceptance-export", 0);
    let (mut levels, mut json_ok, mut vmf_ok, mut attempts) = (0, 0, 0, 0);
    let mut mismatch = Vec::new();
    while levels < 100 && attempts < 300 {
        attempts += 1;
        let floors = rng.random_range(1..=3usize);
        let config = LevelConfig {
            width: f64::from(rng.random_range(24u32..=50)),
            length: f64::from(rng.random_range(24u32..=50)),
            height: 10.0 * floors as f64,
            floors,
            ..LevelConfig::default()
        };
        let group = Group::ALL[rng.random_range(0..Group::ALL.len())];
        let Ok(g) = generate_level_with(&config, &db, group, rng.random(), levels, &opts) else { continue };
        levels += 1;
        let bytes = export_level_json(&g.level);
        if let Ok(back) = import_level_json(&bytes) {
            if back.content_hash() == g.level.content_hash() && export_level_json(&back) == bytes {
                json_ok += 1;
            }
        }
        let text = String::from_utf8(export_vmf(&g.level, 64.0)).unwrap();
        if let Ok(summary) = read_vmf(&text) {
            let brushes = expected_brushes(&g.level);
            let entities = g.level.facilities.len() + g.level.mechanics.len();
            if summary.solids.len() == brushes && summary.entities.len() == entities {
                vmf_ok += 1;
            } else if mismatch.len() < 3 {
                mismatch.push(format!("{}/{} solids, {}/{} entities", summary.solids.len(), brushes, summary.entities.len(), entities));
            }
        }
    }
    verdict(
        levels == 100 && json_ok == 100 && vmf_ok == 100,
        format!("{levels} levels: {json_ok} JSON round trips hash-equal, {vmf_ok} VMF reparses with matching counts {mismatch:?}"),
    )
}

/// `ACCEPTANCE_ONLY=2,10` restricts the run to the listed criteria.
fn selected(n: u32) -> bool {
    match std::env::var("ACCEPTANCE_ONLY") {
        Ok(list) => list.split(',').any(|s| s.trim().parse() == Ok(n)),
        Err(_) => true,
    }
}

fn main() {
    let mut results: Vec<(u32, Verdict)> = Vec::new();
    let mut report = |n: u32, name: &str, check: &dyn Fn() -> Verdict| {
        if !selected(n) {
            return;
        }
        let v = check();
        println!("{} criterion {n} ({name}): {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        results.push((n, v));
    };
    report(1, "formula correctness", &formula_correctness);
    report(2, "layout annealing vs lattice oracle", &layout_oracle);
    report(3, "mechanic assignment vs brute force", &assignment_oracle);
    report(4, "pipeline validity rate", &validity_rate);

    let first = tempfile::tempdir().unwrap();
    let batch = std::sync::OnceLock::new();
    let batch = || {
        batch.get_or_init(|| {
            let exp = ExperimentConfig {
                out_dir: Some(first.path().to_path_buf()),
                threads: Some(1),
                exec: Execution::Sequential,
                ..ExperimentConfig::default()
            };
            run_experiment(&exp, &samples::hospital()).unwrap()
        })
    };
    report(5, "repair soundness", &|| repair_soundness(batch()));
    report(6, "pacing ordering", &|| pacing_ordering(batch()));
    report(7, "DB and A equivalence", &|| db_a_equivalence(batch()));
    report(8, "coverage ordering and identities", &|| coverage_ordering(batch()));
    report(9, "determinism across worker counts", &|| {
        batch();
        determinism(first.path())
    });
    report(10, "export integrity", &export_integrity);

    let failed: Vec<String> = results.iter().filter(|r| !r.1.pass).map(|r| r.0.to_string()).collect();
    println!("acceptance: {}/{} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
