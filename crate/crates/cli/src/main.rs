use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use chemminer_core::agents::TemplateSet;
use chemminer_core::config::{BackendKind, ConfigError};
use chemminer_core::eval::{build_report, load_papers, read_timing, EvalOptions};
use chemminer_core::ingest::{classify_section, ocr_quality_gate, OcrStatus};
use chemminer_core::par::Executor;
use chemminer_core::pipeline::{
    analyze_document, build_dictionary, decoder_for, discover_inputs, load_document, paper_id_of, run_pipeline,
    DocStatus, RunSummary,
};
use chemminer_core::reactions::to_canonical_json;
use chemminer_core::PipelineConfig;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chemminer", version, about = "Reaction mining from chemistry papers")]
struct Cli {
    /// TOML configuration file. Flags override it; environment variables
    /// override both.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the whole pipeline over PDFs and interchange JSON files.
    Run(RunArgs),
    /// Convert one document to interchange JSON and report OCR flags.
    Ingest(IngestArgs),
    /// Score extracted reactions against ground truth.
    Eval(EvalArgs),
    /// Build the coreference dictionary for one document and print it.
    DumpDict(DumpArgs),
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    backend: Option<BackendKind>,
    #[arg(long)]
    workers: Option<usize>,
    /// External PDF decoder program.
    #[arg(long)]
    decoder: Option<PathBuf>,
    /// Directory of prompt template overrides.
    #[arg(long)]
    templates: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Files or directories of .pdf and .json inputs.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
#[group(required = true, multiple = false, id = "source")]
struct Source {
    #[arg(long)]
    pdf: Option<PathBuf>,
    #[arg(long)]
    interchange: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    decoder: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    extracted: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// JSON report path; the text table goes to stdout.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    score_catalyst: bool,
    /// CSV with columns paper_id, seconds, usd.
    #[arg(long)]
    timing: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct DumpArgs {
    input: PathBuf,
    /// Write the dump here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

/// A failure that maps to an exit status.
enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn load_config(path: Option<&Path>, overrides: Option<&Overrides>) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(o) = overrides {
        if let Some(b) = o.backend {
            cfg.backend = b;
        }
        if let Some(w) = o.workers {
            cfg.workers = w;
        }
        if let Some(d) = &o.decoder {
            cfg.decoder = Some(d.clone());
        }
        if let Some(t) = &o.templates {
            cfg.templates_dir = Some(t.clone());
        }
    }
    cfg.apply_env()?;
    cfg.validate()?;
    Ok(cfg)
}

fn templates(cfg: &PipelineConfig) -> Result<TemplateSet, Failure> {
    match &cfg.templates_dir {
        Some(d) => TemplateSet::from_dir(d).map_err(|e| Failure::Usage(format!("templates: {e}"))),
        None => Ok(TemplateSet::default()),
    }
}

fn print_summary(summary: &RunSummary, out: &Path) {
    for d in &summary.documents {
        let status = match d.status {
            DocStatus::Complete => "complete",
            DocStatus::Partial => "partial",
            DocStatus::Failed => "failed",
        };
        match &d.error {
            Some(e) => println!("{:<24} {status:<9} {e}", d.paper_id),
            None => println!("{:<24} {status:<9} {} reactions", d.paper_id, d.reactions),
        }
    }
    // Flagged pages need a manual look; list them where they can be found.
    for d in &summary.documents {
        let path = out.join(&d.paper_id).join("flags.json");
        let Ok(text) = std::fs::read_to_string(&path) else { continue };
        let Ok(v) = serde_json::from_str::<serde_json::Value>(&text) else { continue };
        for p in v["pages"].as_array().into_iter().flatten() {
            if p["flagged"].as_bool() == Some(true) {
                println!("{}: page {} flagged for OCR review", d.paper_id, p["page_index"]);
            }
        }
    }
}

fn cmd_run(cli: &Cli, args: &RunArgs) -> Result<ExitCode, Failure> {
    let mut cfg = load_config(cli.config.as_deref(), Some(&args.overrides))?;
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    let backend = cfg.build_backend()?;
    let templates = templates(&cfg)?;
    let inputs = discover_inputs(&args.inputs).map_err(|e| Failure::Usage(e.to_string()))?;
    let summary = run_pipeline(&cfg, &inputs, backend.as_ref(), &templates)
        .with_context(|| format!("writing outputs under {}", cfg.output_dir.display()))?;
    print_summary(&summary, &cfg.output_dir);
    Ok(ExitCode::from(summary.exit_code() as u8))
}

fn cmd_ingest(cli: &Cli, args: &IngestArgs) -> Result<ExitCode, Failure> {
    let mut cfg = load_config(cli.config.as_deref(), None)?;
    if let Some(d) = &args.decoder {
        cfg.decoder = Some(d.clone());
    }
    let path = args.source.pdf.as_ref().or(args.source.interchange.as_ref()).expect("clap requires one");
    let doc = load_document(path, decoder_for(&cfg).as_ref()).with_context(|| path.display().to_string())?;
    std::fs::create_dir_all(&args.out).context("creating output directory")?;
    let id = paper_id_of(path);
    let target = args.out.join(format!("{id}.json"));
    std::fs::write(&target, doc.to_interchange_json()).with_context(|| target.display().to_string())?;
    let mut flags = Vec::new();
    for page in &doc.pages {
        let text = chemminer_core::doc::render_text(
            &chemminer_core::doc::reading_order(page, cfg.text.row_tol),
            &cfg.text,
        );
        let verdict = ocr_quality_gate(&text, &cfg.ocr);
        if verdict.status == OcrStatus::Misspelled {
            println!("page {} flagged for OCR review", page.index);
        }
        flags.push(serde_json::json!({
            "page_index": page.index,
            "section": classify_section(&text, &cfg.sections),
            "ocr": verdict,
        }));
    }
    std::fs::write(args.out.join(format!("{id}.flags.json")), to_canonical_json(&flags))
        .context("writing flags")?;
    println!("{} pages -> {}", doc.pages.len(), target.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(args: &EvalArgs) -> Result<ExitCode, Failure> {
    let papers = load_papers(&args.extracted, &args.truth).context("loading papers")?;
    let timing = match &args.timing {
        Some(p) => Some(read_timing(p).with_context(|| p.display().to_string())?),
        None => None,
    };
    let exec = Executor::new(args.workers.unwrap_or(4).max(1));
    let opts = EvalOptions {
        score_catalyst: args.score_catalyst,
    };
    let report = build_report(&papers, opts, timing.as_deref(), &exec);
    if let Some(dir) = args.report.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).context("creating report directory")?;
    }
    std::fs::write(&args.report, to_canonical_json(&report)).context("writing report")?;
    print!("{}", report.to_text());
    if !report.undefined_fields.is_empty() {
        eprintln!("no annotated truth for: {:?}", report.undefined_fields);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_dump(cli: &Cli, args: &DumpArgs) -> Result<ExitCode, Failure> {
    let cfg = load_config(cli.config.as_deref(), Some(&args.overrides))?;
    let backend = cfg.build_backend()?;
    let templates = templates(&cfg)?;
    let doc = load_document(&args.input, decoder_for(&cfg).as_ref()).with_context(|| args.input.display().to_string())?;
    let exec = Executor::new(cfg.workers);
    let analysis = analyze_document(&doc, &cfg, &exec);
    let stage = build_dictionary(&analysis, backend.as_ref(), &templates, &cfg, &exec);
    let json = to_canonical_json(&stage.dict.dump());
    match &args.out {
        Some(p) => std::fs::write(p, json).with_context(|| p.display().to_string())?,
        None => print!("{json}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(&cli, a),
        Command::Ingest(a) => cmd_ingest(&cli, a),
        Command::Eval(a) => cmd_eval(a),
        Command::DumpDict(a) => cmd_dump(&cli, a),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
