use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use erb::analyzer::{classify, render_table, GraphKind, Options, SearchBudget};
use erb::chase::{entails_bcq, run_chase, ChaseConfig, ChaseError, ChaseVariant, NegationMode};
use erb::generators::{random_rule_set, rewrite_complete, rewrite_propagate, rewrite_split, GeneratorSpec, Linking};
use erb::graphs::export::{grd_dot, grd_json, position_graph_dot, position_graph_json};
use erb::graphs::{Grd, PositionGraph, Variant};
use erb::markings::Property;
use erb::parser::{parse, parse_bytes, serialize_rules, Document, ParseError};
use erb::unify::DEFAULT_UNIFIER_CAP;
use erb::Exec;

#[derive(Parser)]
#[command(name = "erb", version, about = "Acyclicity analysis and chase for existential rule bases")]
struct Cli {
    /// Worker threads for the parallel phases.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a rule set in the acyclicity hierarchy.
    Analyze(AnalyzeArgs),
    /// Run a chase on the rules and facts of a file.
    Chase {
        file: PathBuf,
        #[command(flatten)]
        chase: ChaseArgs,
        /// Write the derivation as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Answer a boolean conjunctive query by saturation.
    Query {
        file: PathBuf,
        #[arg(long)]
        bcq: String,
        #[command(flatten)]
        chase: ChaseArgs,
    },
    /// Export a dependency or position graph.
    Graph {
        file: PathBuf,
        #[arg(long, value_enum)]
        kind: GraphChoice,
        /// DOT output path; standard output when neither output is given.
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Rewrite a rule set or generate a random one.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    file: PathBuf,
    #[arg(long, value_delimiter = ',')]
    classes: Option<Vec<Property>>,
    #[arg(long, value_delimiter = ',')]
    graphs: Option<Vec<GraphKind>>,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    witness: bool,
    /// Evaluate every cell of the matrix.
    #[arg(long)]
    full: bool,
    /// Multiplier applied to the unifier cap and the walk-search caps.
    #[arg(long, default_value_t = 1)]
    budget: usize,
    #[arg(long)]
    dump_markings: bool,
    /// Cross-check dependency edges with the brute-force oracle.
    #[arg(long)]
    paranoid: bool,
    /// Exit with status 1 unless skolem-chase termination is certified.
    #[arg(long)]
    expect_terminating: bool,
}

#[derive(Args)]
struct ChaseArgs {
    #[arg(long, default_value = "skolem")]
    variant: ChaseVariant,
    #[arg(long, default_value_t = 100_000)]
    max_steps: usize,
    #[arg(long, default_value_t = 100_000)]
    max_atoms: usize,
    #[arg(long)]
    detect_cyclic_terms: bool,
    #[arg(long, default_value = "check")]
    neg: NegationMode,
}

#[derive(Clone, Copy, ValueEnum)]
enum GraphChoice {
    Grd,
    PgBasic,
    PgF,
    PgD,
    PgU,
}

#[derive(Clone, Copy, ValueEnum)]
enum GenerateKind {
    Split,
    Propagate,
    Complete,
    Random,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: GenerateKind,
    #[arg(long = "in", required_unless_present = "seed")]
    input: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 4)]
    rules: usize,
    #[arg(long, default_value_t = 4)]
    predicates: usize,
    #[arg(long, default_value_t = 3)]
    max_arity: usize,
    #[arg(long, default_value_t = 2)]
    max_body: usize,
    #[arg(long, default_value_t = 2)]
    max_head: usize,
    #[arg(long, default_value_t = 0.3)]
    existential_probability: f64,
    #[arg(long, default_value_t = 0.0)]
    negation_probability: f64,
    /// Link rule pairs joined by a direct dependency only.
    #[arg(long)]
    direct: bool,
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{source}")]
    Parse { path: String, source: ParseError },
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Chase(#[from] ChaseError),
}

fn read_document(path: &Path) -> Result<Document, CliError> {
    let bytes = fs::read(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_bytes(&bytes).map_err(|source| CliError::Parse {
        path: path.display().to_string(),
        source,
    })
}

fn write_out(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io {
            path: p.display().to_string(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize") + "\n"
}

impl ChaseArgs {
    fn config(&self) -> ChaseConfig {
        ChaseConfig {
            max_steps: self.max_steps,
            max_atoms: self.max_atoms,
            detect_cyclic_terms: self.detect_cyclic_terms,
            negation: self.neg,
            ..ChaseConfig::new(self.variant)
        }
    }
}

fn analyze(a: &AnalyzeArgs) -> Result<ExitCode, CliError> {
    let doc = read_document(&a.file)?;
    let base = SearchBudget::default();
    let n = a.budget.max(1);
    let opts = Options {
        classes: a.classes.clone().unwrap_or_else(|| Property::ALL.to_vec()),
        graphs: a.graphs.clone().unwrap_or_else(|| GraphKind::ALL.to_vec()),
        full: a.full,
        budget: SearchBudget {
            unifier_cap: base.unifier_cap.saturating_mul(n),
            sequence_nodes: base.sequence_nodes.saturating_mul(n),
            walk_length: base.walk_length.saturating_mul(n),
        },
        oracle: a.paranoid,
        dump_markings: a.dump_markings,
        exec: Exec::default(),
    };
    let report = classify(&doc.rules, &opts);
    if a.json {
        print!("{}", to_json(&report));
    } else {
        print!("{}", render_table(&report, a.witness));
    }
    Ok(if a.expect_terminating && !report.termination.skolem {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn graph(file: &Path, kind: GraphChoice, dot: Option<&Path>, json: Option<&Path>) -> Result<(), CliError> {
    let doc = read_document(file)?;
    let grd = Grd::build(&doc.rules, DEFAULT_UNIFIER_CAP, Exec::default());
    let variant = match kind {
        GraphChoice::Grd => None,
        GraphChoice::PgBasic => Some(Variant::Basic),
        GraphChoice::PgF => Some(Variant::F),
        GraphChoice::PgD => Some(Variant::D),
        GraphChoice::PgU => Some(Variant::U),
    };
    let (dot_text, json_text) = match variant {
        None => (grd_dot(&grd), grd_json(&grd)),
        Some(v) => {
            let pg = PositionGraph::build(&doc.rules, v, &grd, DEFAULT_UNIFIER_CAP, Exec::default());
            (position_graph_dot(&pg), position_graph_json(&pg))
        }
    };
    if dot.is_none() && json.is_none() {
        return write_out(None, &dot_text);
    }
    if let Some(p) = dot {
        write_out(Some(p), &dot_text)?;
    }
    if let Some(p) = json {
        write_out(Some(p), &json_text)?;
    }
    Ok(())
}

fn generate(g: &GenerateArgs) -> Result<(), CliError> {
    let rules = match (g.kind, &g.input) {
        (GenerateKind::Random, _) => random_rule_set(&GeneratorSpec {
            seed: g.seed.unwrap_or(0),
            rules: g.rules,
            predicates: g.predicates,
            max_arity: g.max_arity,
            max_body: g.max_body,
            max_head: g.max_head,
            existential_probability: g.existential_probability,
            negation_probability: g.negation_probability,
            ..GeneratorSpec::default()
        }),
        (_, None) => return Err(CliError::Input("this rewriting needs --in FILE".into())),
        (kind, Some(path)) => {
            let rs = read_document(path)?.rules;
            match kind {
                GenerateKind::Split => rewrite_split(&rs),
                GenerateKind::Complete => rewrite_complete(&rs),
                _ => {
                    let grd = Grd::build(&rs, DEFAULT_UNIFIER_CAP, Exec::default());
                    let linking = if g.direct { Linking::Direct } else { Linking::Path };
                    rewrite_propagate(&rs, &grd, linking)
                }
            }
        }
    };
    write_out(g.output.as_deref(), &serialize_rules(&rules))
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    if let Some(n) = cli.threads {
        erb::par::set_threads(n.max(1));
    }
    match cli.command {
        Command::Analyze(a) => return analyze(&a),
        Command::Chase { file, chase, trace } => {
            let doc = read_document(&file)?;
            let d = run_chase(&doc.facts, &doc.rules, chase.config())?;
            println!("{}", d.summary());
            if let Some(p) = trace {
                write_out(Some(&p), &to_json(&d))?;
            }
        }
        Command::Query { file, bcq, chase } => {
            let doc = read_document(&file)?;
            let text = format!("? {}.", bcq.trim().trim_end_matches('.'));
            let query = parse(&text)
                .map_err(|e| CliError::Input(format!("--bcq: {e}")))?
                .queries
                .pop()
                .ok_or_else(|| CliError::Input("--bcq: empty query".into()))?;
            let (answer, _) = entails_bcq(&doc.facts, &doc.rules, &query, chase.config())?;
            println!("{answer}");
        }
        Command::Graph { file, kind, dot, json } => graph(&file, kind, dot.as_deref(), json.as_deref())?,
        Command::Generate(g) => generate(&g)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
