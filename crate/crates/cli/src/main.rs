use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::Serialize;

use navgen::harness::curriculum::{default_curriculum, read_stages, run_curriculum, AdvanceRule};
use navgen::harness::dataset::{
    build_dataset, build_instructions, generate_scenes, read_instruction_file, read_scene_file,
    validate_dataset, write_instruction_file, write_scene_file, DatasetManifest,
};
use navgen::harness::eval::{build_episodes, evaluate, select_episodes, Episode};
use navgen::program::enumerate_complex_space;
use navgen::scene::{ObjectDescriptor, ValidationOptions};
use navgen::source::{load_scene_file, ImportConfig, SceneSelection, DEFAULT_MIN_SEPARATION};
use navgen::{
    EnvConfig, FilterProgram, InstructionKind, Lexicon, LexiconMode, MappingConfig, PolicyKind, RewardScheme,
    Vocabulary,
};

#[derive(Parser)]
#[command(name = "navgen", version, about = "Generate, validate and roll out grounded navigation instructions")]
struct Cli {
    /// Base seed (unsigned 64-bit)
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = LexiconArg::Env)]
    lexicon: LexiconArg,
    #[arg(long, global = true, value_enum, default_value_t = RewardArg::Sparse)]
    reward: RewardArg,
    /// Output file; reports go to stdout when omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, ValueEnum)]
enum LexiconArg {
    Scene,
    Env,
}

#[derive(Copy, Clone, ValueEnum)]
enum RewardArg {
    Sparse,
    Dense,
}

#[derive(Copy, Clone, ValueEnum)]
enum PolicyArg {
    Oracle,
    Random,
    Noop,
}

#[derive(Copy, Clone, ValueEnum)]
enum KindArg {
    Simple,
    Complex,
    Mixed,
}

#[derive(Copy, Clone, ValueEnum)]
enum SelectArg {
    First,
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Generate seeded scenes, or import scenes from a CLEVR scenes file
    GenScenes {
        #[arg(long, default_value_t = 100, conflicts_with = "clevr")]
        count: usize,
        /// Object count per scene, cycled over scene ids
        #[arg(long, value_delimiter = ',', default_value = "3,4,5")]
        objects: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_MIN_SEPARATION)]
        d_min: f64,
        #[arg(long)]
        clevr: Option<PathBuf>,
        /// How to pick scenes from a CLEVR file
        #[arg(long, value_enum, default_value_t = SelectArg::First, requires = "clevr")]
        select: SelectArg,
        /// Number of CLEVR scenes to keep (all when omitted)
        #[arg(long, requires = "clevr")]
        limit: Option<usize>,
    },
    /// Sample instructions for a scene file, or build scenes and instructions in one go
    GenInstructions {
        /// Existing scene file; scenes that cannot carry the instructions are skipped
        #[arg(long)]
        scenes: Option<PathBuf>,
        /// Generate this many scenes instead of reading --scenes
        #[arg(long, conflicts_with = "scenes")]
        count: Option<usize>,
        /// Where to write generated scenes (with --count)
        #[arg(long, requires = "count")]
        scenes_out: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        simple: usize,
        #[arg(long, default_value_t = 5)]
        complex: usize,
        /// Also write the token vocabulary, one word per line
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Re-check scenes and instruction records with the independent oracles
    Validate {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        instructions: PathBuf,
    },
    /// Run a scripted policy over instruction episodes and report accuracy
    Rollout {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        instructions: PathBuf,
        #[arg(long, value_enum, default_value_t = PolicyArg::Oracle)]
        policy: PolicyArg,
        /// Episodes per instruction kind
        #[arg(short, default_value_t = 300)]
        n: usize,
        #[arg(long, value_enum, default_value_t = KindArg::Mixed)]
        kind: KindArg,
        /// Keep episodes whose oracle path passes other objects
        #[arg(long)]
        include_obstructed: bool,
        /// Per-episode results as JSON lines
        #[arg(long)]
        episodes_out: Option<PathBuf>,
    },
    /// Run curriculum stages with rollouts per stage
    Curriculum {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        instructions: PathBuf,
        /// Stage list (JSON); the default five-stage schedule when omitted
        #[arg(long)]
        stages: Option<PathBuf>,
        /// Episode budget per default stage
        #[arg(long, default_value_t = 300)]
        budget: usize,
        #[arg(long, value_enum, default_value_t = PolicyArg::Oracle)]
        policy: PolicyArg,
        /// Advance early once rolling accuracy reaches this value
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value_t = 50, requires = "threshold")]
        window: usize,
    },
    /// Print instruction-space counts
    Enumerate,
}

/// Distinguishes "the data is bad" (exit 1) from everything else.
#[derive(Debug)]
struct ValidationFailed;

impl std::fmt::Display for ValidationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("validation failed")
    }
}

impl std::error::Error for ValidationFailed {}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if e.downcast_ref::<ValidationFailed>().is_none() {
                eprintln!("error: {e:#}");
            }
            ExitCode::from(1)
        }
    }
}

fn lexicon_mode(arg: LexiconArg) -> LexiconMode {
    match arg {
        LexiconArg::Scene => LexiconMode::Scene,
        LexiconArg::Env => LexiconMode::Env,
    }
}

fn env_config(arg: RewardArg) -> EnvConfig {
    EnvConfig::with_reward(match arg {
        RewardArg::Sparse => RewardScheme::Sparse,
        RewardArg::Dense => RewardScheme::Dense,
    })
}

fn policy_kind(arg: PolicyArg) -> PolicyKind {
    match arg {
        PolicyArg::Oracle => PolicyKind::Oracle,
        PolicyArg::Random => PolicyKind::Random,
        PolicyArg::Noop => PolicyKind::NoOp,
    }
}

fn require_out(out: &Option<PathBuf>) -> Result<&Path> {
    match out {
        Some(p) => Ok(p),
        None => usage("--out is required for this command"),
    }
}

fn usage<T>(msg: &str) -> Result<T> {
    eprintln!("error: {msg}");
    std::process::exit(2)
}

fn emit<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mode = lexicon_mode(cli.lexicon);
    match cli.command {
        Command::GenScenes {
            count,
            objects,
            d_min,
            clevr,
            select,
            limit,
        } => {
            let out = require_out(&cli.out)?;
            match clevr {
                Some(path) => {
                    let selection = match (select, limit) {
                        (_, None) => SceneSelection::All,
                        (SelectArg::First, Some(n)) => SceneSelection::First(n),
                        (SelectArg::Random, Some(count)) => SceneSelection::Random { count, seed: cli.seed },
                    };
                    let loaded = load_scene_file(&path, &ImportConfig::default(), selection)?;
                    for (index, e) in &loaded.skipped {
                        warn!("skipping CLEVR scene {index}: {e}");
                    }
                    write_scene_file(out, &loaded.scenes, None)?;
                    info!("imported {} scenes ({} skipped)", loaded.scenes.len(), loaded.skipped.len());
                }
                None => {
                    let mut manifest = DatasetManifest::new(cli.seed, count);
                    manifest.object_counts = objects;
                    manifest.d_min = d_min;
                    manifest.lexicon = mode;
                    let scenes = generate_scenes(&manifest)?;
                    write_scene_file(out, &scenes, Some(&manifest))?;
                }
            }
        }
        Command::GenInstructions {
            scenes,
            count,
            scenes_out,
            simple,
            complex,
            vocab,
        } => {
            let out = require_out(&cli.out)?;
            let dataset = match (scenes, count) {
                (Some(path), None) => {
                    let (scenes, file_manifest) = read_scene_file(&path)?;
                    let mut manifest = file_manifest.unwrap_or_else(|| DatasetManifest::new(cli.seed, scenes.len()));
                    manifest.seed = cli.seed;
                    manifest.lexicon = mode;
                    manifest.simple_per_scene = simple;
                    manifest.complex_per_scene = complex;
                    build_instructions(scenes, &manifest)
                }
                (None, Some(n)) => {
                    let mut manifest = DatasetManifest::new(cli.seed, n);
                    manifest.lexicon = mode;
                    manifest.simple_per_scene = simple;
                    manifest.complex_per_scene = complex;
                    let dataset = build_dataset(&manifest)?;
                    if let Some(p) = scenes_out {
                        write_scene_file(&p, &dataset.scenes, Some(&dataset.manifest))?;
                    }
                    dataset
                }
                _ => return usage("exactly one of --scenes or --count is required"),
            };
            write_instruction_file(out, &dataset.records)?;
            if let Some(p) = vocab {
                let file = fs::File::create(&p).with_context(|| format!("writing {}", p.display()))?;
                Vocabulary::standard().write_sidecar(std::io::BufWriter::new(file))?;
            }
            info!("{} records over {} scenes", dataset.records.len(), dataset.scenes.len());
        }
        Command::Validate { scenes, instructions } => {
            let (scene_list, manifest) = read_scene_file(&scenes)?;
            let records = read_instruction_file(&instructions)?;
            // imported layouts are not ours to disambiguate
            let opts = match &manifest {
                Some(m) => ValidationOptions::new(m.d_min),
                None => ValidationOptions {
                    check_ambiguity: false,
                    ..ValidationOptions::new(DEFAULT_MIN_SEPARATION)
                },
            };
            let report = validate_dataset(&scene_list, &records, &Lexicon::new(mode), &opts);
            for (scene_id, v) in &report.scene_issues {
                eprintln!("scene {scene_id}: {v}");
            }
            for issue in &report.record_issues {
                eprintln!(
                    "{}:{}: record {} (scene {}): {}",
                    instructions.display(),
                    issue.index + 1,
                    issue.index,
                    issue.scene_id,
                    issue.message
                );
            }
            if !report.is_valid() {
                eprintln!(
                    "validation failed: {} scene issue(s), {} bad record(s) of {}",
                    report.scene_issues.len(),
                    report.record_issues.len(),
                    report.records_checked
                );
                return Err(ValidationFailed.into());
            }
            println!("ok: {} scenes, {} records", scene_list.len(), report.records_checked);
        }
        Command::Rollout {
            scenes,
            instructions,
            policy,
            n,
            kind,
            include_obstructed,
            episodes_out,
        } => {
            if n == 0 {
                return usage("-n must be at least 1");
            }
            let cfg = env_config(cli.reward);
            let pool = load_pool(&scenes, &instructions)?;
            let kinds: &[InstructionKind] = match kind {
                KindArg::Simple => &[InstructionKind::Simple],
                KindArg::Complex => &[InstructionKind::Complex],
                KindArg::Mixed => &InstructionKind::ALL,
            };
            let mut episodes = Vec::new();
            for &k in kinds {
                let picked = select_episodes(&pool, Some(k), Some(n), cli.seed, !include_obstructed, &cfg);
                if picked.len() < n {
                    warn!("only {} {k} episodes available (asked for {n})", picked.len());
                }
                episodes.extend(picked);
            }
            if episodes.is_empty() {
                bail!("no episodes to run");
            }
            let (report, results) = evaluate(&episodes, policy_kind(policy), &cfg, cli.seed)?;
            if let Some(p) = episodes_out {
                let mut text = String::new();
                for r in &results {
                    text.push_str(&serde_json::to_string(r)?);
                    text.push('\n');
                }
                fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
            }
            emit(&cli.out, &report)?;
        }
        Command::Curriculum {
            scenes,
            instructions,
            stages,
            budget,
            policy,
            threshold,
            window,
        } => {
            let stages = match stages {
                Some(p) => read_stages(&p)?,
                None => default_curriculum(budget),
            };
            let rule = match threshold {
                Some(accuracy) => AdvanceRule::Threshold { accuracy, window },
                None => AdvanceRule::Budget,
            };
            let pool = load_pool(&scenes, &instructions)?;
            let cfg = env_config(cli.reward);
            let reports = run_curriculum(&stages, &pool, policy_kind(policy), &cfg, rule, cli.seed)?;
            emit(&cli.out, &reports)?;
        }
        Command::Enumerate => {
            #[derive(Serialize)]
            struct Counts {
                object_types: usize,
                complex_instructions: usize,
                simple_programs: usize,
                filter_programs: usize,
                vocabulary: usize,
            }
            emit(
                &cli.out,
                &Counts {
                    object_types: ObjectDescriptor::enumerate_fully_specified().count(),
                    complex_instructions: enumerate_complex_space(),
                    simple_programs: ObjectDescriptor::enumerate().count(),
                    filter_programs: FilterProgram::enumerate().count(),
                    vocabulary: Vocabulary::standard().len(),
                },
            )?;
        }
    }
    Ok(())
}

fn load_pool(scenes: &Path, instructions: &Path) -> Result<Vec<Episode>> {
    let (scene_list, _) = read_scene_file(scenes)?;
    let records = read_instruction_file(instructions)?;
    Ok(build_episodes(&scene_list, &records, &MappingConfig::default())?)
}
