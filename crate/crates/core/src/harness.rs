//! End-to-end pipeline and the six-group batch experiment.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anneal::TraceRow;
use crate::arrangement::{arrange_rooms, ArrangementError, LevelConfig};
use crate::constraints::RoomGeometry;
use crate::database::Database;
use crate::geometry::{Pose, Rect, WallAxis};
use crate::layout::{anneal_layout, LayoutError, LayoutProblem};
use crate::level::{Level, LevelSkeleton, MechanicPlacement, RoomId, TopoEcho};
use crate::mechanics::{
    assign_mechanics, db_group_mechanics, db_mechanic_instances, place_mechanic_in_room, AssignmentProblem,
    DbGroup, GroupParams, MechanicInstance, MechanicsError, RoomContents, TopoTarget, FLOOR_KEY, KEY_FRAGMENT,
};
use crate::navsim::agent::path_trace_jsonl;
use crate::navsim::{
    agent_repair, build_nav_grid, geometric_repair, rerun_validation, simulate_objectives, AgentParams,
    RepairStatus, SimError,
};
use crate::par::{self, Execution};
use crate::rng::{derive_seed, stream};
use crate::strategies::{bfs_balanced_room, centrality_room, mc_dispersion_rooms, FloorGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "A-Baseline")]
    ABaseline,
    #[serde(rename = "A-Exploration")]
    AExploration,
    #[serde(rename = "A-Speedrun")]
    ASpeedrun,
    #[serde(rename = "DB-Baseline")]
    DbBaseline,
    #[serde(rename = "DB-Exploration")]
    DbExploration,
    #[serde(rename = "DB-Speedrun")]
    DbSpeedrun,
}

impl Group {
    pub const ALL: [Group; 6] = [
        Group::ABaseline,
        Group::AExploration,
        Group::ASpeedrun,
        Group::DbBaseline,
        Group::DbExploration,
        Group::DbSpeedrun,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Group::ABaseline => "A-Baseline",
            Group::AExploration => "A-Exploration",
            Group::ASpeedrun => "A-Speedrun",
            Group::DbBaseline => "DB-Baseline",
            Group::DbExploration => "DB-Exploration",
            Group::DbSpeedrun => "DB-Speedrun",
        }
    }

    /// Position in [`Group::ALL`], used for seed derivation.
    pub fn index(self) -> u64 {
        Group::ALL.iter().position(|&g| g == self).expect("listed") as u64
    }

    pub fn is_algorithmic(self) -> bool {
        matches!(self, Group::ABaseline | Group::AExploration | Group::ASpeedrun)
    }

    pub fn pacing(self) -> DbGroup {
        match self {
            Group::ABaseline | Group::DbBaseline => DbGroup::Baseline,
            Group::AExploration | Group::DbExploration => DbGroup::Exploration,
            Group::ASpeedrun | Group::DbSpeedrun => DbGroup::Speedrun,
        }
    }

    /// Parses a comma-separated list; `all` selects every group.
    pub fn parse_list(s: &str) -> Result<Vec<Group>, String> {
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(Group::ALL.to_vec());
        }
        s.split(',').map(|p| p.trim().parse()).collect()
    }
}

impl FromStr for Group {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Group::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown group {s:?}"))
    }
}

impl std::fmt::Display for Group {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Valid,
    Unrepairable,
    Abnormal,
    /// The room arrangement itself could not be built.
    Failed,
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("generation failed: {0}")]
    Arrangement(#[from] ArrangementError),
    #[error("generation failed: {0}")]
    Layout(#[from] LayoutError),
    #[error("generation failed: {0}")]
    Mechanics(#[from] MechanicsError),
}

/// Knobs of the pipeline beyond the level configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineOptions {
    pub agent: AgentParams,
    pub group_params: GroupParams,
    pub balanced_w_start: f64,
    pub balanced_w_end: f64,
    pub dispersion_sigma: f64,
    pub dispersion_samples: usize,
    #[serde(skip)]
    pub exec: Execution,
    #[serde(skip)]
    pub record_trace: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            agent: AgentParams::default(),
            group_params: GroupParams::default(),
            balanced_w_start: 0.5,
            balanced_w_end: 0.5,
            dispersion_sigma: 3.0,
            dispersion_samples: 200,
            exec: Execution::Sequential,
            record_trace: false,
        }
    }
}

/// Per-level outcome. Times are simulated seconds, explorations are cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub level_id: String,
    pub group: String,
    pub index: u32,
    pub seed: u64,
    pub status: Status,
    pub rooms: u32,
    pub floors: u32,
    pub keys: u32,
    pub adaptable_facilities: u32,
    pub phase1_moves: u32,
    pub phase2_moves: u32,
    pub facilities_removed: u32,
    pub repair_time: f64,
    pub rerun_time: f64,
    pub simulation_time: f64,
    pub avg_completion_time: f64,
    pub grid_exploration: u32,
    pub sim_grid_exploration: u32,
    pub avg_grid_exploration: f64,
    pub grid_coverage: f64,
    pub sim_grid_coverage: f64,
    pub level_hash: String,
}

impl MetricsRecord {
    fn empty(group: &str, index: u32, seed: u64, status: Status) -> Self {
        Self {
            level_id: level_id(group, index),
            group: group.into(),
            index,
            seed,
            status,
            rooms: 0,
            floors: 0,
            keys: 0,
            adaptable_facilities: 0,
            phase1_moves: 0,
            phase2_moves: 0,
            facilities_removed: 0,
            repair_time: 0.0,
            rerun_time: 0.0,
            simulation_time: 0.0,
            avg_completion_time: 0.0,
            grid_exploration: 0,
            sim_grid_exploration: 0,
            avg_grid_exploration: 0.0,
            grid_coverage: 0.0,
            sim_grid_coverage: 0.0,
            level_hash: String::new(),
        }
    }
}

pub fn level_id(group: &str, index: u32) -> String {
    format!("{group}-{index:04}")
}

/// Everything one pipeline run produces.
#[derive(Debug, Clone)]
pub struct Generated {
    pub level: Level,
    pub metrics: MetricsRecord,
    /// Annealing traces per room, filled when tracing is on.
    pub layout_traces: Vec<(RoomId, Vec<TraceRow>)>,
    /// JSON lines of the rerun and objective walks, filled when tracing is on.
    pub path_trace: String,
}

fn doorway_points(sk: &LevelSkeleton, room: RoomId) -> Vec<[f64; 2]> {
    let r = &sk.rooms[room];
    let mut pts: Vec<[f64; 2]> = sk
        .doors
        .iter()
        .filter(|d| d.room_a == room || d.room_b == room)
        .map(|d| d.position)
        .collect();
    for e in sk.open_edges.iter().filter(|e| e.room_a == room || e.room_b == room) {
        let mid = (e.from + e.to) * 0.5;
        pts.push(match e.axis {
            WallAxis::X => [e.coord, mid],
            WallAxis::Y => [mid, e.coord],
        });
    }
    for s in sk.stairs.iter().filter(|s| s.room == room || s.upper_room == room) {
        pts.push(s.position);
    }
    pts.into_iter().map(|p| r.to_local(p)).collect()
}

/// Local unit squares of stair cells in `room`.
fn stair_keep_out(sk: &LevelSkeleton, room: RoomId) -> Vec<Rect> {
    let r = &sk.rooms[room];
    sk.stairs
        .iter()
        .filter(|s| s.room == room || s.upper_room == room)
        .map(|s| {
            let [x, y] = r.to_local(s.position);
            Rect::new(x.floor(), y.floor(), x.floor() + 1.0, y.floor() + 1.0)
        })
        .collect()
}

fn room_contents(level: &Level, room: RoomId) -> RoomContents {
    let sk = &level.skeleton;
    let r = &sk.rooms[room];
    RoomContents {
        geometry: RoomGeometry {
            width: r.dims.width,
            length: r.dims.length,
            height: r.dims.height,
            entrances: doorway_points(sk, room),
        },
        facilities: level.facilities_in(room).map(|f| (f.def.clone(), f.pose)).collect(),
        keep_out: stair_keep_out(sk, room),
    }
}

fn key_name(group: Group) -> &'static str {
    match group.pacing() {
        DbGroup::Exploration => KEY_FRAGMENT,
        _ => FLOOR_KEY,
    }
}

/// Algorithmic key rooms for every floor.
fn strategy_mechanics(
    level: &Level,
    db: &Database,
    group: Group,
    opts: &PipelineOptions,
    seed: u64,
) -> Vec<MechanicInstance> {
    let sk = &level.skeleton;
    let name = key_name(group);
    let def = db.mechanic(name).cloned();
    let mut out = Vec::new();
    for floor in 0..sk.used_floors() {
        let g = FloorGraph::from_skeleton(sk, floor);
        if g.is_empty() {
            continue;
        }
        let rooms = match group.pacing() {
            DbGroup::Baseline => vec![bfs_balanced_room(&g, opts.balanced_w_start, opts.balanced_w_end)],
            DbGroup::Speedrun => vec![centrality_room(&g)],
            DbGroup::Exploration => {
                let mut rng = stream(seed, "dispersion", floor as u64);
                mc_dispersion_rooms(
                    &g,
                    &[],
                    opts.group_params.exploration_keys,
                    opts.dispersion_sigma,
                    opts.dispersion_samples,
                    &mut rng,
                )
            }
        };
        for (k, room) in rooms.into_iter().enumerate() {
            let id = format!("f{floor}:{name}#{k}");
            let mut m = match &def {
                Some(d) => MechanicInstance::from_def(id, d, vec![room]),
                None => {
                    let fallback = crate::database::MechanicDef {
                        name: name.into(),
                        dimensions: crate::geometry::Dimensions::new(0.3, 0.3, 0.3),
                        standard_constraints: Vec::new(),
                        topo_constraints: Vec::new(),
                        tags: vec!["key".into()],
                    };
                    MechanicInstance::from_def(id, &fallback, vec![room])
                }
            };
            m.pinned = Some(room);
            out.push(m);
        }
    }
    out
}

fn db_mechanics(level: &Level, db: &Database, group: Group, config: &LevelConfig, opts: &PipelineOptions) -> Vec<MechanicInstance> {
    let sk = &level.skeleton;
    let mut out = Vec::new();
    for floor in 0..sk.used_floors() {
        let offset = out.len();
        out.extend(db_group_mechanics(group.pacing(), sk, floor, db, &opts.group_params, &config.weights, offset));
    }
    out
}

fn echo(rule: &crate::mechanics::TopoRule, mechanics: &[MechanicInstance]) -> TopoEcho {
    let target = match rule.target {
        TopoTarget::Mechanic(j) => mechanics[j].id.clone(),
        TopoTarget::Tau(t) => format!("tau:{t}"),
        TopoTarget::Room(r) => format!("room:{r}"),
    };
    TopoEcho { kind: rule.kind, target, threshold: rule.threshold }
}

/// Decides key rooms, then places every key greedily inside its room.
fn place_mechanics(
    level: &mut Level,
    db: &Database,
    group: Group,
    config: &LevelConfig,
    opts: &PipelineOptions,
) -> Result<(), GenerationError> {
    let seed = level.seed;
    let mut instances = if group.is_algorithmic() {
        strategy_mechanics(level, db, group, opts, seed)
    } else {
        db_mechanics(level, db, group, config, opts)
    };
    let all_rooms: Vec<RoomId> = level.skeleton.rooms.iter().map(|r| r.id).collect();
    let offset = instances.len();
    instances.extend(db_mechanic_instances(db, &config.selected_mechanics, &all_rooms, &config.weights, offset));
    if instances.is_empty() {
        return Ok(());
    }
    let contents: Vec<RoomContents> = all_rooms.iter().map(|&r| room_contents(level, r)).collect();
    let room_tau: Vec<u32> = level.skeleton.rooms.iter().map(|r| r.tau).collect();
    let problem = AssignmentProblem::new(room_tau, &contents, instances, &config.weights, seed);
    let assignment = assign_mechanics(&problem, &config.sa, &mut stream(seed, "assign", 0))?;
    let mut placed: Vec<Vec<Pose>> = vec![Vec::new(); all_rooms.len()];
    for (i, (m, &room)) in problem.mechanics.iter().zip(&assignment.rooms).enumerate() {
        let mut rng = stream(seed, "place-mechanic", i as u64);
        // An overlapping best pose is still used; keys are small.
        let (best, _) = place_mechanic_in_room(m, &contents[room], &placed[room], &config.weights, &mut rng);
        placed[room].push(best.pose);
        level.mechanics.push(MechanicPlacement {
            id: m.id.clone(),
            mechanic: m.mechanic.clone(),
            room,
            pose: best.pose,
            standard_constraints: m.standard_constraints.clone(),
            topo: m.rules.iter().map(|r| echo(r, &problem.mechanics)).collect(),
        });
    }
    Ok(())
}

type LayoutTraces = Vec<(RoomId, Vec<TraceRow>)>;

/// Arrangement and annealed room layouts.
fn build_level(
    config: &LevelConfig,
    db: &Database,
    seed: u64,
    opts: &PipelineOptions,
) -> Result<(Level, LayoutTraces), GenerationError> {
    let skeleton = arrange_rooms(config, db, &mut stream(seed, "arrange", 0))?;
    let problems: Vec<LayoutProblem> = skeleton
        .rooms
        .iter()
        .map(|r| {
            let template = db.room(&r.template).ok_or_else(|| ArrangementError::UnknownTemplate(r.template.clone()))?;
            Ok(LayoutProblem::from_template(
                r,
                template,
                db,
                stair_keep_out(&skeleton, r.id),
                doorway_points(&skeleton, r.id),
            )?)
        })
        .collect::<Result<_, GenerationError>>()?;
    let layouts = par::map(opts.exec, &problems, |p| -> Result<_, LayoutError> {
        let mut rng = stream(seed, "layout", p.room as u64);
        let init = p.random_layout(&mut rng)?;
        Ok(anneal_layout(p, init, &config.weights, &config.sa, &mut rng, opts.record_trace))
    });
    let mut facilities = Vec::new();
    let mut traces = Vec::new();
    for (p, l) in problems.iter().zip(layouts) {
        let l = l?;
        facilities.extend(p.to_instances(&l.poses));
        if opts.record_trace {
            traces.push((p.room, l.trace));
        }
    }
    let level = Level { seed, group: None, skeleton, facilities, mechanics: Vec::new() };
    Ok((level, traces))
}

pub fn generate_level(
    config: &LevelConfig,
    db: &Database,
    group: Group,
    seed: u64,
) -> Result<(Level, MetricsRecord), GenerationError> {
    let g = generate_level_with(config, db, group, seed, 0, &PipelineOptions::default())?;
    Ok((g.level, g.metrics))
}

/// Full pipeline: arrangement, layout, mechanics, both repair phases, rerun
/// and objective simulation. `index` only names the level.
pub fn generate_level_with(
    config: &LevelConfig,
    db: &Database,
    group: Group,
    seed: u64,
    index: u32,
    opts: &PipelineOptions,
) -> Result<Generated, GenerationError> {
    let (mut level, layout_traces) = build_level(config, db, seed, opts)?;
    level.group = Some(group.name().into());
    place_mechanics(&mut level, db, group, config, opts)?;

    let adaptable = level.facilities.iter().filter(|f| f.positioning == crate::database::Positioning::Adaptable).count();
    let mut grid = build_nav_grid(&level);
    let phase1 = geometric_repair(&mut level, &mut grid);
    let phase2 = agent_repair(&mut level, &mut grid, &opts.agent);
    let grid = build_nav_grid(&level);

    let mut m = MetricsRecord::empty(group.name(), index, seed, Status::Valid);
    m.rooms = level.skeleton.rooms.len() as u32;
    m.floors = level.skeleton.used_floors() as u32;
    m.keys = level.mechanics.len() as u32;
    m.adaptable_facilities = adaptable as u32;
    m.phase1_moves = phase1.phase1_moves;
    m.phase2_moves = phase2.phase2_moves;
    m.facilities_removed = phase2.facilities_removed;
    m.repair_time = phase2.repair_time;

    let mut path_trace = String::new();
    if phase2.status == RepairStatus::Unrepairable {
        m.status = Status::Unrepairable;
    } else {
        let keys: Vec<usize> = (0..level.mechanics.len()).collect();
        match (
            rerun_validation(&level, &grid, &opts.agent),
            simulate_objectives(&level, &grid, &keys, &opts.agent),
        ) {
            (Ok(rerun), Ok(sim)) => {
                m.rerun_time = rerun.rerun_time;
                m.simulation_time = sim.simulation_time;
                m.grid_exploration = rerun.grid_cells as u32;
                m.sim_grid_exploration = sim.sim_grid_cells as u32;
                if rerun.abnormal || sim.simulation_time > opts.agent.total_budget {
                    m.status = Status::Abnormal;
                }
                if opts.record_trace {
                    path_trace = path_trace_jsonl(&grid, &rerun.legs, &opts.agent);
                    path_trace.push_str(&path_trace_jsonl(&grid, &sim.legs, &opts.agent));
                }
            }
            _ => m.status = Status::Unrepairable,
        }
    }
    m.avg_completion_time = (m.rerun_time + m.simulation_time) / 2.0;
    m.avg_grid_exploration = (f64::from(m.grid_exploration) + f64::from(m.sim_grid_exploration)) / 2.0;
    let total = grid.cell_count().max(1) as f64;
    m.grid_coverage = f64::from(m.grid_exploration) / total;
    m.sim_grid_coverage = f64::from(m.sim_grid_exploration) / total;
    m.level_hash = format!("{:016x}", level.content_hash());
    Ok(Generated { level, metrics: m, layout_traces, path_trace })
}

/// Navigation metrics of a stored level, measured without repairing it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub rerun_time: f64,
    pub simulation_time: f64,
    pub avg_completion_time: f64,
    pub grid_exploration: u32,
    pub sim_grid_exploration: u32,
    pub avg_grid_exploration: f64,
    pub abnormal: bool,
}

/// Reruns both walks on `level` as is, collecting every mechanic as a key.
pub fn resimulate(level: &Level, agent: &AgentParams) -> Result<SimulationSummary, SimError> {
    let grid = build_nav_grid(level);
    let keys: Vec<usize> = (0..level.mechanics.len()).collect();
    let rerun = rerun_validation(level, &grid, agent)?;
    let sim = simulate_objectives(level, &grid, &keys, agent)?;
    let (ge, se) = (rerun.grid_cells as u32, sim.sim_grid_cells as u32);
    Ok(SimulationSummary {
        rerun_time: rerun.rerun_time,
        simulation_time: sim.simulation_time,
        avg_completion_time: (rerun.rerun_time + sim.simulation_time) / 2.0,
        grid_exploration: ge,
        sim_grid_exploration: se,
        avg_grid_exploration: (f64::from(ge) + f64::from(se)) / 2.0,
        abnormal: rerun.abnormal || sim.simulation_time > agent.total_budget,
    })
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub groups: Vec<Group>,
    pub levels_per_group: u32,
    pub base_seed: u64,
    pub level: LevelConfig,
    pub options: PipelineOptions,
    /// Where `records.csv`, `stats.md` and `stats.csv` go; nothing is written
    /// when unset.
    pub out_dir: Option<PathBuf>,
    /// Worker cap; `None` uses every core.
    pub threads: Option<usize>,
    pub exec: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            groups: Group::ALL.to_vec(),
            levels_per_group: 30,
            base_seed: 42,
            level: LevelConfig::default(),
            options: PipelineOptions::default(),
            out_dir: None,
            threads: None,
            exec: Execution::Parallel,
        }
    }
}

/// Level seed for `(base, group, index)`.
pub fn level_seed(base: u64, group: Group, index: u32) -> u64 {
    derive_seed(base, &[group.index(), u64::from(index)])
}

/// Runs one level, turning generation failures into `failed` records.
pub fn run_one(config: &LevelConfig, db: &Database, group: Group, index: u32, base_seed: u64, opts: &PipelineOptions) -> MetricsRecord {
    let seed = level_seed(base_seed, group, index);
    match generate_level_with(config, db, group, seed, index, opts) {
        Ok(g) => g.metrics,
        Err(_) => MetricsRecord::empty(group.name(), index, seed, Status::Failed),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub records: Vec<MetricsRecord>,
    pub stats: AggregateStats,
}

pub fn run_experiment(exp: &ExperimentConfig, db: &Database) -> Result<ExperimentOutput, HarnessError> {
    run_experiment_with(exp, db, &|_| {})
}

/// Generates every level (in parallel when enabled), then aggregates in
/// record order. `progress` sees each record as it completes.
pub fn run_experiment_with(
    exp: &ExperimentConfig,
    db: &Database,
    progress: &(dyn Fn(&MetricsRecord) + Sync),
) -> Result<ExperimentOutput, HarnessError> {
    if exp.levels_per_group < 1 {
        return Err(HarnessError::Config("levels_per_group must be at least 1".into()));
    }
    if exp.groups.is_empty() {
        return Err(HarnessError::Config("no groups selected".into()));
    }
    if !exp.level.is_valid() {
        return Err(HarnessError::Config("invalid level configuration".into()));
    }
    let jobs: Vec<(Group, u32)> =
        exp.groups.iter().flat_map(|&g| (0..exp.levels_per_group).map(move |i| (g, i))).collect();
    let mut opts = exp.options;
    opts.exec = Execution::Sequential;
    opts.record_trace = false;
    let records = par::with_threads(exp.threads, || {
        par::map(exp.exec, &jobs, |&(g, i)| {
            let r = run_one(&exp.level, db, g, i, exp.base_seed, &opts);
            progress(&r);
            r
        })
    });
    let total_cells = (exp.level.width.ceil() * exp.level.length.ceil()) as u64 * exp.level.floors as u64;
    let stats = aggregate(&records, &exp.groups, total_cells);
    if let Some(dir) = &exp.out_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("records.csv"), records_csv(&records)?)?;
        std::fs::write(dir.join("stats.md"), emit_table(&stats))?;
        std::fs::write(dir.join("stats.csv"), stats_csv(&stats)?)?;
    }
    Ok(ExperimentOutput { records, stats })
}

pub fn records_csv(records: &[MetricsRecord]) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub fn parse_records_csv(bytes: &[u8]) -> Result<Vec<MetricsRecord>, csv::Error> {
    csv::Reader::from_reader(bytes).deserialize().collect()
}

/// Aggregated metrics, in table row order.
pub const METRICS: [&str; 8] = [
    "repair_time",
    "facilities_removed",
    "rerun_time",
    "simulation_time",
    "avg_completion_time",
    "grid_exploration",
    "sim_grid_exploration",
    "avg_grid_exploration",
];

pub fn metric_value(r: &MetricsRecord, metric: &str) -> Option<f64> {
    Some(match metric {
        "repair_time" => r.repair_time,
        "facilities_removed" => f64::from(r.facilities_removed),
        "rerun_time" => r.rerun_time,
        "simulation_time" => r.simulation_time,
        "avg_completion_time" => r.avg_completion_time,
        "grid_exploration" => f64::from(r.grid_exploration),
        "sim_grid_exploration" => f64::from(r.sim_grid_exploration),
        "avg_grid_exploration" => r.avg_grid_exploration,
        _ => return None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StatusTallies {
    pub valid: u32,
    pub unrepairable: u32,
    pub abnormal: u32,
    pub failed: u32,
}

impl StatusTallies {
    pub fn total(&self) -> u32 {
        self.valid + self.unrepairable + self.abnormal + self.failed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub n: u32,
    pub mean: f64,
    /// Sample standard deviation.
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl MetricStats {
    /// Mean, sample deviation and the normal-approximation 95% interval.
    pub fn from_values(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self { n: 0, mean: 0.0, std: 0.0, ci_low: 0.0, ci_high: 0.0 };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let half = 1.96 * std / (n as f64).sqrt();
        Self { n: n as u32, mean, std, ci_low: mean - half, ci_high: mean + half }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub group: String,
    pub tallies: StatusTallies,
    /// Parallel to [`METRICS`].
    pub metrics: Vec<MetricStats>,
}

impl GroupStats {
    pub fn metric(&self, name: &str) -> Option<&MetricStats> {
        METRICS.iter().position(|m| *m == name).map(|i| &self.metrics[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateStats {
    /// Cell count of the full grid, the coverage denominator.
    pub total_cells: u64,
    pub groups: Vec<GroupStats>,
}

impl AggregateStats {
    pub fn group(&self, name: &str) -> Option<&GroupStats> {
        self.groups.iter().find(|g| g.group == name)
    }
}

/// Statistics over valid records only; tallies count every record.
pub fn aggregate(records: &[MetricsRecord], groups: &[Group], total_cells: u64) -> AggregateStats {
    let groups = groups
        .iter()
        .map(|g| {
            let mine: Vec<&MetricsRecord> = records.iter().filter(|r| r.group == g.name()).collect();
            let mut tallies = StatusTallies::default();
            for r in &mine {
                match r.status {
                    Status::Valid => tallies.valid += 1,
                    Status::Unrepairable => tallies.unrepairable += 1,
                    Status::Abnormal => tallies.abnormal += 1,
                    Status::Failed => tallies.failed += 1,
                }
            }
            let valid: Vec<&&MetricsRecord> = mine.iter().filter(|r| r.status == Status::Valid).collect();
            let metrics = METRICS
                .iter()
                .map(|m| {
                    let xs: Vec<f64> = valid.iter().map(|r| metric_value(r, m).expect("known metric")).collect();
                    MetricStats::from_values(&xs)
                })
                .collect();
            GroupStats { group: g.name().into(), tallies, metrics }
        })
        .collect();
    AggregateStats { total_cells, groups }
}

fn pct(cells: f64, total: u64) -> String {
    format!("{:.1}%", 100.0 * cells / total.max(1) as f64)
}

/// Markdown table: one row per metric, one column per group.
pub fn emit_table(stats: &AggregateStats) -> String {
    let mut out = String::from("| Metric |");
    for g in &stats.groups {
        let _ = write!(out, " {} |", g.group);
    }
    out.push_str("\n|---|");
    for _ in &stats.groups {
        out.push_str("---|");
    }
    out.push('\n');
    if stats.groups.is_empty() {
        return out;
    }
    let row = |out: &mut String, label: &str, cell: &dyn Fn(&GroupStats) -> String| {
        let _ = write!(out, "| {label} |");
        for g in &stats.groups {
            let _ = write!(out, " {} |", cell(g));
        }
        out.push('\n');
    };
    row(&mut out, "levels (valid/unrepairable/abnormal/failed)", &|g| {
        let t = g.tallies;
        format!("{}/{}/{}/{}", t.valid, t.unrepairable, t.abnormal, t.failed)
    });
    for (i, m) in METRICS.iter().enumerate() {
        row(&mut out, m, &|g| format!("{:.2} ± {:.2}", g.metrics[i].mean, g.metrics[i].std));
        if m.ends_with("grid_exploration") {
            let label = format!("{m} coverage");
            row(&mut out, &label, &|g| pct(g.metrics[i].mean, stats.total_cells));
        }
    }
    out
}

#[derive(Serialize, Deserialize)]
struct StatsRow {
    group: String,
    total_cells: u64,
    valid: u32,
    unrepairable: u32,
    abnormal: u32,
    failed: u32,
    metric: String,
    n: u32,
    mean: f64,
    std: f64,
    ci_low: f64,
    ci_high: f64,
}

/// Lossless CSV form of the statistics, one row per group and metric.
pub fn stats_csv(stats: &AggregateStats) -> Result<Vec<u8>, csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record([
        "group",
        "total_cells",
        "valid",
        "unrepairable",
        "abnormal",
        "failed",
        "metric",
        "n",
        "mean",
        "std",
        "ci_low",
        "ci_high",
    ])?;
    for g in &stats.groups {
        for (m, s) in METRICS.iter().zip(&g.metrics) {
            w.serialize(StatsRow {
                group: g.group.clone(),
                total_cells: stats.total_cells,
                valid: g.tallies.valid,
                unrepairable: g.tallies.unrepairable,
                abnormal: g.tallies.abnormal,
                failed: g.tallies.failed,
                metric: (*m).into(),
                n: s.n,
                mean: s.mean,
                std: s.std,
                ci_low: s.ci_low,
                ci_high: s.ci_high,
            })?;
        }
    }
    w.into_inner().map_err(|e| e.into_error().into())
}

pub fn parse_stats_csv(bytes: &[u8]) -> Result<AggregateStats, csv::Error> {
    let mut stats = AggregateStats { total_cells: 0, groups: Vec::new() };
    for row in csv::Reader::from_reader(bytes).deserialize::<StatsRow>() {
        let row = row?;
        stats.total_cells = row.total_cells;
        if stats.groups.last().is_none_or(|g| g.group != row.group) {
            stats.groups.push(GroupStats {
                group: row.group.clone(),
                tallies: StatusTallies {
                    valid: row.valid,
                    unrepairable: row.unrepairable,
                    abnormal: row.abnormal,
                    failed: row.failed,
                },
                metrics: Vec::new(),
            });
        }
        let g = stats.groups.last_mut().expect("pushed");
        g.metrics.push(MetricStats { n: row.n, mean: row.mean, std: row.std, ci_low: row.ci_low, ci_high: row.ci_high });
    }
    Ok(stats)
}
