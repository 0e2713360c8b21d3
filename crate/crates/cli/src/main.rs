use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use aspect_rgat::corpus::{self, build_instances, load_conllu, load_semeval_xml, load_twitter, write_sentence_export};
use aspect_rgat::harness::{self, Dataset};
use aspect_rgat::reshape::{reshape, ReshapeOptions};
use aspect_rgat::{Mode, Model, RunConfig};

/// Aspect-oriented dependency trees and relational graph attention for
/// aspect-level sentiment classification.
#[derive(Parser)]
#[command(name = "aspect-rgat", version)]
struct Cli {
    /// Log level for stderr (error, warn, info, debug).
    #[arg(long, global = true, default_value = "info")]
    log: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert SemEval XML or Twitter triples plus CoNLL-U parses to JSONL
    /// instances. Without --parses, write `id<TAB>text` lines for a parser.
    Preprocess {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        parses: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Auto)]
        format: Format,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write aspect-oriented trees as JSONL, optionally with DOT files.
    Reshape {
        /// JSONL instances.
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = aspect_rgat::reshape::DEFAULT_N_MAX)]
        n_max: usize,
        /// Suffix relations of children that head the aspect with `:rev`.
        #[arg(long)]
        mark_reversed: bool,
        /// Directory for one DOT file per instance.
        #[arg(long)]
        dot: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one model; writes the epoch log and best checkpoint to --out.
    Train {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on JSONL instances.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Directory for report.json and report.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the tree × head-type matrix for each seed.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated seeds; defaults to the run seed.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Accuracy by nearest aspect-to-aspect embedding distance over
    /// sentences with several aspects.
    AnalyzeDistance {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated interior bucket edges; quintiles by default.
        #[arg(long, value_delimiter = ',')]
        edges: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample misclassified instances as JSONL.
    ExportErrors {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(short, long, default_value_t = 100)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    /// `.xml` files are SemEval, anything else Twitter.
    Auto,
    Semeval,
    Twitter,
}

/// Run configuration: a TOML file overridden by flags.
#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training instances (JSONL).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Evaluation instances (JSONL).
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => RunConfig::default(),
        };
        if let Some(p) = &self.dataset {
            cfg.train = p.clone();
        }
        if let Some(p) = &self.test {
            cfg.test = p.clone();
        }
        if let Some(p) = &self.embeddings {
            cfg.embeddings = Some(p.clone());
        }
        if let Some(m) = self.mode {
            cfg.hyper.mode = m;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if cfg.train.as_os_str().is_empty() || cfg.test.as_os_str().is_empty() {
            bail!("training and test instances are required (--dataset/--test or `train`/`test` in --config)");
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(content.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn load_model(path: &Path) -> Result<Model> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let (model, _) = Model::load(std::io::BufReader::new(file)).with_context(|| format!("loading {}", path.display()))?;
    Ok(model)
}

fn preprocess(dataset: &Path, parses: Option<&Path>, format: Format, out: &Path) -> Result<()> {
    let semeval = match format {
        Format::Semeval => true,
        Format::Twitter => false,
        Format::Auto => dataset.extension().is_some_and(|e| e.eq_ignore_ascii_case("xml")),
    };
    let raw = if semeval {
        load_semeval_xml(dataset)?
    } else {
        load_twitter(dataset)?
    };
    let counts = corpus::polarity_counts(&raw);
    log::info!(
        "{} sentences; positive {} / neutral {} / negative {}",
        raw.len(),
        counts[0],
        counts[1],
        counts[2]
    );
    let Some(parses) = parses else {
        let mut w = create(out)?;
        write_sentence_export(&mut w, &raw)?;
        w.flush()?;
        return Ok(());
    };
    let parses = load_conllu(parses)?;
    let aligned = build_instances(&raw, &parses);
    for w in &aligned.warnings {
        log::warn!("{w}");
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    corpus::write_instances(out, &aligned.instances)?;
    log::info!("wrote {} instances to {}", aligned.instances.len(), out.display());
    Ok(())
}

fn reshape_cmd(dataset: &Path, options: ReshapeOptions, dot: Option<&Path>, out: &Path) -> Result<()> {
    let instances = corpus::read_instances(dataset)?;
    let mut w = create(out)?;
    if let Some(dir) = dot {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    for inst in &instances {
        let tree = reshape(&inst.parse, inst.aspect, options).with_context(|| format!("instance {}", inst.id))?;
        let children: Vec<serde_json::Value> = tree
            .children
            .iter()
            .map(|c| serde_json::json!([c.token + 1, c.relation.to_string(), c.direction.as_str()]))
            .collect();
        let line = serde_json::json!({
            "id": inst.id,
            "aspect": [inst.aspect.first + 1, inst.aspect.last + 1],
            "children": children,
        });
        writeln!(w, "{line}")?;
        if let Some(dir) = dot {
            let name: String = inst.id.chars().map(|c| if c.is_alphanumeric() { c } else { '_' }).collect();
            write_file(&dir.join(format!("{name}.dot")), &tree.to_dot(&inst.tokens))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess {
            dataset,
            parses,
            format,
            out,
        } => preprocess(&dataset, parses.as_deref(), format, &out),
        Command::Reshape {
            dataset,
            n_max,
            mark_reversed,
            dot,
            out,
        } => reshape_cmd(&dataset, ReshapeOptions { n_max, mark_reversed }, dot.as_deref(), &out),
        Command::Train { run, out } => {
            let cfg = run.resolve()?;
            let data = Dataset::load(&cfg)?;
            let outcome = harness::train(&cfg, &data, Some(&out))?;
            println!(
                "best epoch {}: accuracy {:.4}, macro-F1 {:.4}",
                outcome.best_epoch, outcome.best_report.accuracy, outcome.best_report.macro_f1
            );
            Ok(())
        }
        Command::Eval { checkpoint, dataset, out } => {
            let model = load_model(&checkpoint)?;
            let instances = corpus::read_instances(&dataset)?;
            let report = harness::evaluate(&model, &instances)?;
            print!("{report}");
            if let Some(dir) = out {
                write_file(&dir.join("report.json"), &serde_json::to_string_pretty(&report)?)?;
                write_file(&dir.join("report.csv"), &report.to_csv())?;
            }
            Ok(())
        }
        Command::Ablate { run, seeds, out } => {
            let cfg = run.resolve()?;
            let seeds = if seeds.is_empty() { vec![cfg.seed] } else { seeds };
            let data = Dataset::load(&cfg)?;
            let table = harness::ablate(&cfg, &data, &seeds, Some(&out))?;
            print!("{table}");
            write_file(&out.join("ablation.csv"), &table.to_csv())?;
            write_file(&out.join("ablation.txt"), &table.to_string())?;
            write_file(&out.join("ablation.json"), &serde_json::to_string_pretty(&table)?)?;
            Ok(())
        }
        Command::AnalyzeDistance {
            checkpoint,
            dataset,
            edges,
            out,
        } => {
            let model = load_model(&checkpoint)?;
            let instances = corpus::read_instances(&dataset)?;
            let edges = (!edges.is_empty()).then_some(edges.as_slice());
            let report = harness::multi_aspect_analysis(&model, &instances, edges)?;
            print!("{report}");
            write_file(&out.join("distance.csv"), &report.to_csv())?;
            write_file(&out.join("distance.txt"), &report.to_string())?;
            write_file(&out.join("distance.json"), &serde_json::to_string_pretty(&report)?)?;
            Ok(())
        }
        Command::ExportErrors {
            checkpoint,
            dataset,
            k,
            seed,
            out,
        } => {
            let model = load_model(&checkpoint)?;
            let instances = corpus::read_instances(&dataset)?;
            let report = harness::evaluate(&model, &instances)?;
            let sample = harness::export_errors(&report, k, seed);
            let mut w = create(&out)?;
            harness::write_errors(&mut w, &sample)?;
            w.flush()?;
            println!("exported {} of {} misclassified instances", sample.errors.len(), sample.total_errors);
            Ok(())
        }
    }
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log)
        .format_timestamp(None)
        .init();
    if let Err(e) = run(cli) {
        // Drop causes the message already contains.
        let mut message = e.to_string();
        for cause in e.chain().skip(1) {
            let cause = cause.to_string();
            if !message.contains(&cause) {
                message = format!("{message}: {cause}");
            }
        }
        eprintln!("error: {message}");
        std::process::exit(1);
    }
}
