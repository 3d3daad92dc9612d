use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, warn};
use pcsreg::frames::{default_preferences, load_preferences, PreferenceTable};
use pcsreg::generator::{realize, GenerationError, GeneratorConfig};
use pcsreg::harness::{load_trial_config, run_comparison, TrialConfig};
use pcsreg::optimizer::{generate, score_space, Generation, Method, Score};
use pcsreg::resolver::{denote, parse_expression, Denotation, ExpressionTree, Lexicon};
use pcsreg::scene::{load_scene, EntityKind, Scene};
use serde::Serialize;
use serde_json::json;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const SCENE_SCHEMA: &str = include_str!("../schemas/scene.schema.json");
const PREFS_SCHEMA: &str = include_str!("../schemas/prefs.schema.json");
const CONFIG_SCHEMA: &str = include_str!("../schemas/config.schema.json");

/// Imperative openings dropped before parsing.
const VERB_PREFIXES: &[&str] = &["pick up ", "give me "];

#[derive(Parser)]
#[command(
    name = "pcsreg",
    version,
    about = "Perspective-corrected spatial referring expressions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Describe a target object.
    Generate(GenerateArgs),
    /// Resolve an expression to a distribution over scene entities.
    Resolve(ResolveArgs),
    /// Show the landmark chain and every scored candidate for a target.
    Explain(GenerateArgs),
    /// Run the simulated-listener comparison of generation methods.
    Evaluate(EvaluateArgs),
    /// Print JSON schemas for input documents.
    Schema(SchemaArgs),
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[arg(long, value_name = "PATH")]
    scene: PathBuf,
    /// Entity id of the object to describe.
    #[arg(long, value_name = "ID")]
    target: String,
    /// Frame preference table; defaults to the built-in one.
    #[arg(long, value_name = "PATH")]
    prefs: Option<PathBuf>,
    #[arg(long, default_value = "pcsreg", value_parser = parse_method)]
    method: Method,
    /// Required by the random method.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args)]
struct ResolveArgs {
    #[arg(long, value_name = "PATH")]
    scene: PathBuf,
    /// Expression text or JSON tree; `@PATH` reads it from a file.
    #[arg(long, value_name = "STRING|@PATH")]
    expr: String,
    #[arg(long, value_name = "PATH")]
    prefs: Option<PathBuf>,
    /// Intended referent; adds its scores to the output.
    #[arg(long, value_name = "ID")]
    target: Option<String>,
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    /// Trial configuration; defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for report.json, report.txt and trials.csv.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    json: bool,
}

#[derive(clap::Args)]
struct SchemaArgs {
    /// Document to print; all three when omitted.
    #[arg(value_enum)]
    document: Option<SchemaDocument>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemaDocument {
    Scene,
    Prefs,
    Config,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
    /// Extra lines for stderr after the error itself.
    notes: Vec<String>,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
            notes: Vec::new(),
        }
    }
}

const USAGE: u8 = 1;
const INVALID_INPUT: u8 = 2;
const INVALID_TARGET: u8 = 3;
const GENERATION_FAILED: u8 = 4;
const PARSE_FAILED: u8 = 5;

type Outcome = Result<String, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("PCSREG_LOG", "warn"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let result = match cli.command {
        Command::Generate(args) => run_generate(&args),
        Command::Resolve(args) => run_resolve(&args),
        Command::Explain(args) => run_explain(&args),
        Command::Evaluate(args) => run_evaluate(&args),
        Command::Schema(args) => Ok(run_schema(&args)),
    };
    match result {
        Ok(out) => {
            let mut stdout = io::stdout().lock();
            if stdout.write_all(out.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::FAILURE;
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", describe(&f.error));
            for note in &f.notes {
                eprintln!("{note}");
            }
            ExitCode::from(f.code)
        }
    }
}

/// The error chain on one line, skipping causes already quoted by their parent.
fn describe(error: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in error.chain() {
        let text = cause.to_string();
        if out.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}

fn read_scene(path: &Path) -> Result<Scene, Failure> {
    let file = File::open(path)
        .with_context(|| format!("cannot open scene {}", path.display()))
        .map_err(|e| Failure::new(INVALID_INPUT, e))?;
    let scene = load_scene(BufReader::new(file))
        .with_context(|| format!("invalid scene {}", path.display()))
        .map_err(|e| Failure::new(INVALID_INPUT, e))?;
    info!("loaded {} entities from {}", scene.len(), path.display());
    Ok(scene)
}

fn read_prefs(path: Option<&Path>) -> Result<PreferenceTable, Failure> {
    let Some(path) = path else {
        return Ok(default_preferences());
    };
    let file = File::open(path)
        .with_context(|| format!("cannot open preferences {}", path.display()))
        .map_err(|e| Failure::new(INVALID_INPUT, e))?;
    load_preferences(BufReader::new(file))
        .with_context(|| format!("invalid preferences {}", path.display()))
        .map_err(|e| Failure::new(INVALID_INPUT, e))
}

fn find_target(scene: &Scene, id: &str) -> Result<usize, Failure> {
    let idx = scene
        .index_of(id)
        .ok_or_else(|| Failure::new(INVALID_TARGET, anyhow!("no entity with id {id:?}")))?;
    if !scene.entity(idx).referable_as_target() {
        return Err(Failure::new(
            INVALID_TARGET,
            anyhow!("entity {id:?} cannot be a target"),
        ));
    }
    Ok(idx)
}

fn method_seed(args: &GenerateArgs) -> Result<u64, Failure> {
    match (args.method, args.seed) {
        (Method::Random, None) => Err(Failure::new(USAGE, anyhow!("--method random requires --seed"))),
        (_, seed) => Ok(seed.unwrap_or(0)),
    }
}

fn run_generation(args: &GenerateArgs) -> Result<(Scene, PreferenceTable, Generation), Failure> {
    let seed = method_seed(args)?;
    let scene = read_scene(&args.scene)?;
    let prefs = read_prefs(args.prefs.as_deref())?;
    let target = find_target(&scene, &args.target)?;
    match generate(&scene, target, &prefs, args.method, seed, &GeneratorConfig::default()) {
        Ok(g) => {
            info!(
                "chain of {} landmarks after {} rebuilds",
                g.chain.k(),
                g.chain.outer_iterations
            );
            Ok((scene, prefs, g))
        }
        Err(e) => Err(generation_failure(e)),
    }
}

fn generation_failure(e: GenerationError) -> Failure {
    let code = match e {
        GenerationError::UnknownTarget(_) | GenerationError::NotReferable(_) => INVALID_TARGET,
        _ => GENERATION_FAILED,
    };
    let notes = match &e {
        GenerationError::NoDiscriminatingLandmark { best_effort, .. } => vec![
            "warning: the following description is ambiguous in this scene".to_string(),
            format!("best effort: {}", realize(best_effort)),
        ],
        _ => Vec::new(),
    };
    Failure {
        code,
        error: e.into(),
        notes,
    }
}

fn score_json(score: &Score) -> serde_json::Value {
    json!({
        "appropriateness": score.appropriateness,
        "effectiveness": score.effectiveness,
        "total": score.total,
    })
}

fn run_generate(args: &GenerateArgs) -> Outcome {
    let (scene, _, g) = run_generation(args)?;
    if !args.json {
        return Ok(format!("{}\n", g.selected.surface));
    }
    let landmarks: Vec<&str> = g
        .chain
        .landmarks()
        .iter()
        .map(|&e| scene.entity(e).id.as_str())
        .collect();
    let doc = json!({
        "target": args.target,
        "method": g.method,
        "surface": g.selected.surface,
        "tree": g.selected.tree,
        "strategy": g.selected.strategy.assignments,
        "score": score_json(&g.score),
        "k": g.chain.k(),
        "landmarks": landmarks,
    });
    Ok(pretty(&doc))
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output serializes");
    s.push('\n');
    s
}

fn read_expression(arg: &str) -> Result<String, Failure> {
    match arg.strip_prefix('@') {
        Some(path) => fs::read_to_string(path)
            .with_context(|| format!("cannot read expression file {path}"))
            .map_err(|e| Failure::new(USAGE, e)),
        None => Ok(arg.to_string()),
    }
}

fn strip_verb(text: &str) -> &str {
    let text = text.trim();
    for prefix in VERB_PREFIXES {
        if let Some(head) = text.get(..prefix.len()) {
            if head.eq_ignore_ascii_case(prefix) {
                return text[prefix.len()..].trim_start();
            }
        }
    }
    text
}

fn parse_input(text: &str, scene: &Scene) -> Result<ExpressionTree, Failure> {
    let text = text.trim();
    if text.starts_with('{') {
        return serde_json::from_str(text)
            .context("invalid expression tree")
            .map_err(|e| Failure::new(PARSE_FAILED, e));
    }
    parse_expression(strip_verb(text), &Lexicon::for_scene(scene))
        .context("cannot parse expression")
        .map_err(|e| Failure::new(PARSE_FAILED, e))
}

#[derive(Serialize)]
struct Entry<'a> {
    id: &'a str,
    probability: f64,
}

/// Entities worth listing: every object, plus agents with any mass.
fn listing<'a>(scene: &'a Scene, d: &Denotation) -> Vec<Entry<'a>> {
    let mut entries: Vec<Entry> = scene
        .entities()
        .iter()
        .enumerate()
        .filter(|(i, e)| e.kind == EntityKind::Object || d.prob(*i) > 0.0)
        .map(|(i, e)| Entry {
            id: &e.id,
            probability: d.prob(i),
        })
        .collect();
    entries.sort_by(|a, b| b.probability.total_cmp(&a.probability).then_with(|| a.id.cmp(b.id)));
    entries
}

fn run_resolve(args: &ResolveArgs) -> Outcome {
    let scene = read_scene(&args.scene)?;
    let prefs = read_prefs(args.prefs.as_deref())?;
    let target = args.target.as_deref().map(|id| find_target(&scene, id)).transpose()?;
    let tree = parse_input(&read_expression(&args.expr)?, &scene)?;
    let d = denote(&tree, &scene, &prefs);
    let score = target.map(|t| Score::from_denotation(&d, t));
    let argmax = d.argmax(&scene).map(|i| scene.entity(i).id.as_str());

    if args.json {
        let mut doc = json!({
            "expression": realize(&tree),
            "tree": tree,
            "resolvable": d.is_resolvable(),
            "distribution": if d.is_resolvable() { Some(listing(&scene, &d)) } else { None },
            "argmax": argmax,
        });
        if let (Some(score), Some(id)) = (score, &args.target) {
            doc["target"] = json!(id);
            doc["score"] = score_json(&score);
        }
        return Ok(pretty(&doc));
    }

    let mut out = String::new();
    if d.is_resolvable() {
        for e in listing(&scene, &d) {
            let _ = writeln!(out, "{}\t{}", e.id, e.probability);
        }
        let _ = writeln!(out, "argmax: {}", argmax.unwrap_or("-"));
    } else {
        let _ = writeln!(out, "unresolvable: no entity fits the expression");
    }
    if let Some(score) = score {
        let _ = writeln!(out, "appropriateness: {}", score.appropriateness);
        let _ = writeln!(out, "effectiveness: {}", score.effectiveness);
    }
    Ok(out)
}

#[derive(Serialize)]
struct ChainLink<'a> {
    id: &'a str,
    description: String,
    distinguishing: bool,
}

#[derive(Serialize)]
struct ExplainedCandidate<'a> {
    surface: &'a str,
    strategy: String,
    appropriateness: f64,
    effectiveness: f64,
    total: f64,
    denotation: Option<&'a [f64]>,
}

fn run_explain(args: &GenerateArgs) -> Outcome {
    let (scene, prefs, g) = run_generation(args)?;
    let target = g.chain.target;
    let scored = score_space(&g.space, target, &scene, &prefs);
    let selected = scored
        .iter()
        .position(|s| s.candidate.tree == g.selected.tree)
        .expect("every method picks from the expression space");

    let mut chain_ids = vec![target];
    chain_ids.extend(g.chain.landmarks());
    let chain: Vec<ChainLink> = chain_ids
        .iter()
        .zip(g.chain.descriptions())
        .map(|(&e, d)| ChainLink {
            id: &scene.entity(e).id,
            description: realize(&ExpressionTree::Leaf(d.attrs.clone())),
            distinguishing: d.distinguishing,
        })
        .collect();
    let candidates: Vec<ExplainedCandidate> = scored
        .iter()
        .map(|s| ExplainedCandidate {
            surface: &s.candidate.surface,
            strategy: s.candidate.strategy.to_string(),
            appropriateness: s.score.appropriateness,
            effectiveness: s.score.effectiveness,
            total: s.score.total,
            denotation: s.denotation.probs(),
        })
        .collect();

    if args.json {
        let entities: Vec<&str> = scene.entities().iter().map(|e| e.id.as_str()).collect();
        let doc = json!({
            "target": args.target,
            "method": g.method,
            "entities": entities,
            "chain": chain,
            "outer_iterations": g.chain.outer_iterations,
            "candidates": candidates,
            "selected": selected,
        });
        return Ok(pretty(&doc));
    }

    let mut out = String::new();
    let _ = writeln!(out, "chain ({} rebuilds):", g.chain.outer_iterations);
    for (i, link) in chain.iter().enumerate() {
        let role = if i == 0 { "target" } else { "landmark" };
        let _ = writeln!(out, "  {role:<8} {:<6} {}", link.id, link.description);
    }
    let _ = writeln!(out, "candidates:");
    for (i, c) in candidates.iter().enumerate() {
        let mark = if i == selected { '*' } else { ' ' };
        let _ = writeln!(
            out,
            "{mark} {:>2} {:<40} w1={} w2={:.6} total={:.6}  {}",
            i, c.strategy, c.appropriateness, c.effectiveness, c.total, c.surface
        );
    }
    let _ = writeln!(out, "selected ({}): {}", g.method, g.selected.surface);
    Ok(out)
}

fn run_evaluate(args: &EvaluateArgs) -> Outcome {
    let cfg = match &args.config {
        None => TrialConfig::default(),
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))
                .map_err(|e| Failure::new(INVALID_INPUT, e))?;
            load_trial_config(&text)
                .with_context(|| format!("invalid config {}", path.display()))
                .map_err(|e| Failure::new(INVALID_INPUT, e))?
        }
    };
    info!("evaluating {} methods over {} scenes", cfg.methods.len(), cfg.n_scenes);
    let report = run_comparison(&cfg).map_err(|e| Failure::new(INVALID_INPUT, e))?;
    if report.targets == 0 {
        warn!("no sampled scene had an ambiguous target");
    }
    let json = report.to_json() + "\n";
    let table = report.to_table();
    if let Some(dir) = &args.out {
        let write = |name: &str, body: &str| {
            fs::write(dir.join(name), body)
                .with_context(|| format!("cannot write {}", dir.join(name).display()))
                .map_err(|e| Failure::new(INVALID_INPUT, e))
        };
        fs::create_dir_all(dir)
            .with_context(|| format!("cannot create {}", dir.display()))
            .map_err(|e| Failure::new(INVALID_INPUT, e))?;
        write("report.json", &json)?;
        write("report.txt", &table)?;
        if cfg.record_trials {
            write("trials.csv", &report.to_csv())?;
        }
    }
    Ok(if args.json { json } else { table })
}

fn run_schema(args: &SchemaArgs) -> String {
    let text = match args.document {
        Some(SchemaDocument::Scene) => SCENE_SCHEMA.to_string(),
        Some(SchemaDocument::Prefs) => PREFS_SCHEMA.to_string(),
        Some(SchemaDocument::Config) => CONFIG_SCHEMA.to_string(),
        None => {
            let parse = |s: &str| serde_json::from_str::<serde_json::Value>(s).expect("bundled schema is JSON");
            let all = json!({
                "scene": parse(SCENE_SCHEMA),
                "prefs": parse(PREFS_SCHEMA),
                "config": parse(CONFIG_SCHEMA),
            });
            return pretty(&all);
        }
    };
    if text.ends_with('\n') {
        text
    } else {
        text + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verb_prefixes_are_stripped_case_insensitively() {
        assert_eq!(strip_verb("Pick up the red block"), "the red block");
        assert_eq!(strip_verb("  GIVE ME the cup "), "the cup");
        assert_eq!(strip_verb("the pick up truck"), "the pick up truck");
    }

    #[test]
    fn bundled_schemas_are_json() {
        for s in [SCENE_SCHEMA, PREFS_SCHEMA, CONFIG_SCHEMA] {
            serde_json::from_str::<serde_json::Value>(s).unwrap();
        }
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
