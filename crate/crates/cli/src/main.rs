use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use levelforge::database::samples;
use levelforge::export::{export_level_json, export_vmf_with, import_level_json, ClassnameMap, DEFAULT_SCALE};
use levelforge::harness::{
    generate_level_with, resimulate, run_experiment_with, ExperimentConfig, Group, PipelineOptions,
};
use levelforge::par::{self, Execution};
use levelforge::{load_database, validate_database, Database};

#[derive(Parser)]
#[command(name = "levelforge", version, about = "Multi-floor level generation from a facility database")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a database document and list every violation.
    ValidateDb { db: PathBuf },
    /// Generate one level.
    Generate {
        /// Database document; the bundled hospital sample when omitted.
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long, default_value = "DB-Baseline")]
        group: Group,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write layout_trace.csv and path_trace.jsonl.
        #[arg(long)]
        trace: bool,
    },
    /// Run the batch experiment over the selected groups.
    Experiment {
        #[arg(long)]
        db: Option<PathBuf>,
        #[arg(long, default_value = "all")]
        groups: String,
        #[arg(long, default_value_t = 30)]
        levels_per_group: u32,
        #[arg(long, default_value_t = 42)]
        base_seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Generate levels one after another on the calling thread.
        #[arg(long)]
        sequential: bool,
    },
    /// Write a stored level as a Valve Map Format file.
    ExportVmf {
        #[arg(long)]
        level: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Map units per meter.
        #[arg(long, default_value_t = DEFAULT_SCALE)]
        scale: f64,
        /// JSON object `{"default": .., "map": {def: classname}}`.
        #[arg(long)]
        classmap: Option<PathBuf>,
    },
    /// Rerun the navigation agent on a stored level.
    Simulate {
        #[arg(long)]
        level: PathBuf,
    },
}

enum Failure {
    Invalid(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Io(_) => 2,
        }
    }
}

type Outcome = Result<(), Failure>;

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Outcome {
    fs::write(path, bytes).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Outcome {
    fs::create_dir_all(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn threads() -> Option<usize> {
    std::env::var("LEVELFORGE_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Loads and validates a database, falling back to the bundled sample.
fn database(path: Option<&Path>) -> Result<Database, Failure> {
    let db = match path {
        None => return Ok(samples::hospital()),
        Some(p) => load_database(&read(p)?).map_err(|e| Failure::Invalid(e.to_string()))?,
    };
    let violations = validate_database(&db);
    if let Some(v) = violations.first() {
        return Err(Failure::Invalid(format!(
            "{} violation(s), first: {} [{}] {}",
            violations.len(),
            v.entity,
            v.rule,
            v.message
        )));
    }
    Ok(db)
}

fn validate_db(path: &Path) -> Outcome {
    let db = load_database(&read(path)?).map_err(|e| Failure::Invalid(e.to_string()))?;
    let violations = validate_database(&db);
    for v in &violations {
        println!("{}: [{}] {}", v.entity, v.rule, v.message);
    }
    if violations.is_empty() {
        println!(
            "ok: {} facilities, {} room templates, {} mechanics",
            db.facilities.len(),
            db.rooms.len(),
            db.mechanics.len()
        );
        Ok(())
    } else {
        Err(Failure::Invalid(format!("{} violation(s)", violations.len())))
    }
}

fn generate(db: Option<&Path>, group: Group, seed: u64, out: &Path, trace: bool) -> Outcome {
    let db = database(db)?;
    let exp = ExperimentConfig::default();
    let opts = PipelineOptions { exec: Execution::Parallel, record_trace: trace, ..exp.options };
    let g = par::with_threads(threads(), || generate_level_with(&exp.level, &db, group, seed, 0, &opts))
        .map_err(|e| Failure::Invalid(e.to_string()))?;
    create_dir(out)?;
    write(&out.join("level.json"), export_level_json(&g.level))?;
    let mut metrics = serde_json::to_string_pretty(&g.metrics).expect("metrics serialize");
    metrics.push('\n');
    write(&out.join("metrics.json"), metrics)?;
    if trace {
        let mut csv = String::from("room,iteration,temperature,current,best\n");
        for (room, rows) in &g.layout_traces {
            for r in rows {
                let _ = writeln!(csv, "{room},{},{},{},{}", r.iteration, r.temperature, r.current, r.best);
            }
        }
        write(&out.join("layout_trace.csv"), csv)?;
        write(&out.join("path_trace.jsonl"), &g.path_trace)?;
    }
    let m = &g.metrics;
    println!(
        "{} status={:?} rooms={} keys={} simulation_time={:.2} hash={}",
        m.level_id, m.status, m.rooms, m.keys, m.simulation_time, m.level_hash
    );
    Ok(())
}

fn experiment(db: Option<&Path>, groups: &str, levels: u32, base_seed: u64, out: &Path, sequential: bool) -> Outcome {
    let db = database(db)?;
    let groups = Group::parse_list(groups).map_err(Failure::Invalid)?;
    let exp = ExperimentConfig {
        groups,
        levels_per_group: levels,
        base_seed,
        out_dir: Some(out.to_path_buf()),
        threads: threads(),
        exec: if sequential { Execution::Sequential } else { Execution::Parallel },
        ..ExperimentConfig::default()
    };
    let log = |m: &levelforge::harness::MetricsRecord| {
        eprintln!("{} {:?} simulation_time={:.2}", m.level_id, m.status, m.simulation_time);
    };
    let result = run_experiment_with(&exp, &db, &log).map_err(|e| match e {
        levelforge::harness::HarnessError::Config(msg) => Failure::Invalid(msg),
        other => Failure::Io(other.to_string()),
    })?;
    print!("{}", levelforge::harness::emit_table(&result.stats));
    Ok(())
}

fn export(level: &Path, out: &Path, scale: f64, classmap: Option<&Path>) -> Outcome {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Failure::Invalid(format!("scale must be positive, got {scale}")));
    }
    let lv = import_level_json(&read(level)?).map_err(|e| Failure::Invalid(e.to_string()))?;
    let classes = match classmap {
        None => ClassnameMap::default(),
        Some(p) => serde_json::from_slice(&read(p)?).map_err(|e| Failure::Invalid(format!("classmap: {e}")))?,
    };
    write(out, export_vmf_with(&lv, scale, &classes))
}

fn simulate(level: &Path) -> Outcome {
    let lv = import_level_json(&read(level)?).map_err(|e| Failure::Invalid(e.to_string()))?;
    let summary = resimulate(&lv, &PipelineOptions::default().agent).map_err(|e| Failure::Invalid(e.to_string()))?;
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    if summary.abnormal {
        return Err(Failure::Invalid("traversal exceeds the time budget".into()));
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors are validation failures; clap would report them as 2.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::ValidateDb { db } => validate_db(db),
        Command::Generate { db, group, seed, out, trace } => generate(db.as_deref(), *group, *seed, out, *trace),
        Command::Experiment { db, groups, levels_per_group, base_seed, out, sequential } => {
            experiment(db.as_deref(), groups, *levels_per_group, *base_seed, out, *sequential)
        }
        Command::ExportVmf { level, out, scale, classmap } => export(level, out, *scale, classmap.as_deref()),
        Command::Simulate { level } => simulate(level),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Invalid(msg) => eprintln!("error: {msg}"),
                Failure::Io(msg) => eprintln!("i/o error: {msg}"),
            }
            ExitCode::from(f.code())
        }
    }
}
