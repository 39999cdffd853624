use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::Serialize;

use veriforge::adaptive::{compare_modes, route, CompareConfig, DispatchOptions, RouteMode};
use veriforge::corpus::{load_corpus, save_corpus, Corpus};
use veriforge::dedup::{deduplicate_with_groups, Combine, NgramHashEmbedder};
use veriforge::evalkit::{evaluate_benchmark, EvalConfig};
use veriforge::generation::SamplingParams;
use veriforge::pipeline::{
    build_backend, build_classifier, build_generator, build_judge, build_rules, build_templates, report, run_pipeline,
    BackendKind, ClassifierKind, GeneratorKind, JudgeMode, PipelineConfig, PipelineDeps, Stage, EFFICIENCY_JSON,
    PASSK_JSON,
};
use veriforge::quality::{compression_ratio, parse_fields, quality_filter};
use veriforge::reference::external_table;
use veriforge::taxonomy::{assign_domains, KeywordDomainClassifier};
use veriforge::verify::{compile_check, verify_corpus, VerifyConfig};
use veriforge::Error;

#[derive(Parser)]
#[command(
    name = "veriforge",
    version,
    about = "Curate, verify and evaluate Verilog code datasets"
)]
struct Cli {
    /// TOML config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Io {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    /// Write the structured record of this run as JSON.
    #[arg(long)]
    record: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct BackendFlags {
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// JSON map of sample id to mock outcome.
    #[arg(long)]
    mock_script: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    timeout_secs: Option<u64>,
    #[arg(long)]
    fail_pattern: Option<String>,
}

#[derive(Args, Clone, Default)]
struct DedupFlags {
    #[arg(long)]
    sim_threshold: Option<f64>,
    #[arg(long)]
    sim_combine: Option<Combine>,
}

#[derive(Args, Clone, Default)]
struct QualityFlags {
    #[arg(long, value_enum)]
    judge: Option<JudgeMode>,
    /// Lint rules TOML.
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    concurrency: Option<usize>,
    /// Comma-separated fields for the compression ratio.
    #[arg(long)]
    fields: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a JSONL corpus.
    Ingest {
        #[command(flatten)]
        io: Io,
        /// Fill missing domain labels.
        #[arg(long)]
        assign_domains: bool,
    },
    /// Keep samples whose solution compiles on its own.
    CompileCheck {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        backend: BackendFlags,
    },
    /// Drop near-duplicates within each domain.
    Dedup {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        dedup: DedupFlags,
    },
    /// Lint and judge samples, and report compression ratios.
    Quality {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        quality: QualityFlags,
    },
    /// Simulate each sample against its testbench.
    Verify {
        #[command(flatten)]
        io: Io,
        #[command(flatten)]
        backend: BackendFlags,
    },
    /// pass@k of a generator on a benchmark.
    Evaluate {
        #[arg(long)]
        benchmark: PathBuf,
        #[arg(long)]
        n: Option<u64>,
        /// Comma-separated k values.
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<u64>>,
        #[arg(long, value_enum)]
        generator: Option<GeneratorKind>,
        #[arg(long)]
        max_new_tokens: Option<u32>,
        #[command(flatten)]
        backend: BackendFlags,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Difficulty-routed generation.
    Route {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "adaptive")]
        mode: RouteMode,
        #[arg(long, value_enum)]
        classifier: Option<ClassifierKind>,
        #[arg(long, value_enum)]
        generator: Option<GeneratorKind>,
        #[arg(long)]
        templates_dir: Option<PathBuf>,
        /// Run every mode and tabulate pass@1 and tokens.
        #[arg(long)]
        compare: bool,
        #[command(flatten)]
        backend: BackendFlags,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run ingest, compile-check, dedup, quality and verify.
    Pipeline {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "ingest")]
        from_stage: Stage,
        #[command(flatten)]
        backend: BackendFlags,
        #[command(flatten)]
        dedup: DedupFlags,
        #[command(flatten)]
        quality: QualityFlags,
    },
    /// Summarize the artifacts in an output directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

/// Exit status 2 for configuration and argument problems, 1 otherwise.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Argument(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = Result<(), Failure>;

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, Error> {
    match path {
        Some(p) => {
            info!("config: {}", p.display());
            PipelineConfig::load(p)
        }
        None => {
            info!("config: built-in defaults");
            Ok(PipelineConfig::default())
        }
    }
}

fn apply_backend(cfg: &mut PipelineConfig, f: &BackendFlags) {
    let v = &mut cfg.verify;
    if let Some(b) = f.backend {
        v.backend = b;
    }
    if f.mock_script.is_some() {
        v.mock_script = f.mock_script.clone();
    }
    if let Some(w) = f.workers {
        v.workers = w;
    }
    if let Some(t) = f.timeout_secs {
        v.timeout_secs = t;
    }
    if let Some(p) = &f.fail_pattern {
        v.fail_pattern = p.clone();
    }
}

fn apply_dedup(cfg: &mut PipelineConfig, f: &DedupFlags) {
    if let Some(t) = f.sim_threshold {
        cfg.dedup.threshold = t;
    }
    if let Some(c) = f.sim_combine {
        cfg.dedup.combine = c;
    }
}

fn apply_quality(cfg: &mut PipelineConfig, f: &QualityFlags) -> Result<(), Error> {
    if let Some(j) = f.judge {
        cfg.quality.judge = j;
    }
    if f.rules.is_some() {
        cfg.quality.rules = f.rules.clone();
    }
    if let Some(c) = f.concurrency {
        cfg.quality.concurrency = c;
    }
    if let Some(fields) = &f.fields {
        cfg.quality.compression_fields = parse_fields(fields).map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn verify_config(cfg: &PipelineConfig) -> Result<VerifyConfig, Error> {
    VerifyConfig::default()
        .with_timeout(cfg.verify.timeout())
        .with_fail_pattern(&cfg.verify.fail_pattern)
}

fn write_record<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), Error> {
    let Some(path) = path else { return Ok(()) };
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Integrity(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn out_dir(dir: &Option<PathBuf>) -> Result<Option<&Path>, Error> {
    if let Some(d) = dir {
        std::fs::create_dir_all(d).map_err(|e| Error::Io {
            path: d.clone(),
            source: e,
        })?;
    }
    Ok(dir.as_deref())
}

fn print_stage(c: &Corpus) {
    if let Some(r) = c.stage_log().last() {
        println!(
            "{}: {} -> {} ({:.2}% removed)",
            r.stage,
            r.input,
            r.output,
            r.reduction() * 100.0
        );
    }
}

#[derive(Serialize)]
struct StageRecordOut<'a, T: Serialize> {
    stage_log: &'a [veriforge::StageRecord],
    #[serde(flatten)]
    details: T,
}

fn run(cli: Cli) -> CliResult {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest {
            io,
            assign_domains: assign,
        } => {
            let mut c = load_corpus(&io.input)?;
            if assign || cfg.ingest.assign_domains {
                c = assign_domains(&c, &KeywordDomainClassifier::default())?;
            }
            save_corpus(&c, &io.output)?;
            println!("ingest: {} samples", c.len());
            write_record(io.record.as_deref(), &c.stage_log())?;
        }
        Command::CompileCheck { io, backend } => {
            apply_backend(&mut cfg, &backend);
            cfg.validate()?;
            let vcfg = verify_config(&cfg)?;
            let b = build_backend(&cfg.verify)?;
            let out = compile_check(&load_corpus(&io.input)?, b.as_ref(), cfg.verify.workers, &vcfg)?;
            save_corpus(&out.corpus, &io.output)?;
            print_stage(&out.corpus);
            #[derive(Serialize)]
            struct D<'a> {
                results: &'a [veriforge::verify::VerificationResult],
            }
            write_record(
                io.record.as_deref(),
                &StageRecordOut {
                    stage_log: out.corpus.stage_log(),
                    details: D { results: &out.results },
                },
            )?;
        }
        Command::Dedup { io, dedup } => {
            apply_dedup(&mut cfg, &dedup);
            cfg.validate()?;
            info!(
                "dedup: threshold {} combine {:?}",
                cfg.dedup.threshold, cfg.dedup.combine
            );
            let input = load_corpus(&io.input)?;
            let (c, groups) = deduplicate_with_groups(&input, &NgramHashEmbedder::default(), cfg.dedup.similarity())?;
            save_corpus(&c, &io.output)?;
            print_stage(&c);
            #[derive(Serialize)]
            struct D<'a> {
                groups: &'a [veriforge::dedup::DomainGrouping],
            }
            write_record(
                io.record.as_deref(),
                &StageRecordOut {
                    stage_log: c.stage_log(),
                    details: D { groups: &groups },
                },
            )?;
        }
        Command::Quality { io, quality } => {
            apply_quality(&mut cfg, &quality)?;
            cfg.validate()?;
            let judge = build_judge(&cfg.quality)?;
            let rules = build_rules(&cfg.quality)?;
            info!(
                "quality: judge {:?}, rules version {}",
                cfg.quality.judge, rules.version
            );
            let input = load_corpus(&io.input)?;
            let q = quality_filter(&input, judge.as_ref(), &rules, cfg.quality.concurrency)?;
            save_corpus(&q.corpus, &io.output)?;
            print_stage(&q.corpus);
            for r in &q.rejected {
                let first = r
                    .violations
                    .first()
                    .map(|v| v.message.clone())
                    .or_else(|| r.error.clone());
                println!("  rejected {} by {}: {}", r.id, r.by, first.unwrap_or_default());
            }
            if !q.undetermined.is_empty() {
                println!("  kept without a judge verdict: {}", q.undetermined.join(", "));
            }
            let cr = if q.corpus.is_empty() {
                None
            } else {
                let r = compression_ratio(&q.corpus, &cfg.quality.compression_fields)?;
                println!("CR {:.3}  CR-POS {:.3}  ({})", r.cr, r.cr_pos, r.cr_pos_interpretation);
                Some(r)
            };
            #[derive(Serialize)]
            struct D<'a> {
                rejected: &'a [veriforge::quality::Rejection],
                undetermined: &'a [String],
                compression: Option<veriforge::quality::CompressionReport>,
            }
            write_record(
                io.record.as_deref(),
                &StageRecordOut {
                    stage_log: q.corpus.stage_log(),
                    details: D {
                        rejected: &q.rejected,
                        undetermined: &q.undetermined,
                        compression: cr,
                    },
                },
            )?;
        }
        Command::Verify { io, backend } => {
            apply_backend(&mut cfg, &backend);
            cfg.validate()?;
            let vcfg = verify_config(&cfg)?;
            let b = build_backend(&cfg.verify)?;
            info!(
                "verify: backend {}, workers {}, timeout {}s",
                b.name(),
                cfg.verify.workers,
                cfg.verify.timeout_secs
            );
            let out = verify_corpus(&load_corpus(&io.input)?, b.as_ref(), cfg.verify.workers, &vcfg)?;
            save_corpus(&out.corpus, &io.output)?;
            print_stage(&out.corpus);
            for (status, n) in &out.summary.counts {
                println!("  {:<13} {n}", status.as_str());
            }
            println!("rejection rate {:.2}%", out.summary.rejection_rate * 100.0);
            for w in &out.summary.warnings {
                println!("warning: {w}");
            }
            #[derive(Serialize)]
            struct D<'a> {
                summary: &'a veriforge::verify::VerificationSummary,
                results: &'a [veriforge::verify::VerificationResult],
            }
            write_record(
                io.record.as_deref(),
                &StageRecordOut {
                    stage_log: out.corpus.stage_log(),
                    details: D {
                        summary: &out.summary,
                        results: &out.results,
                    },
                },
            )?;
        }
        Command::Evaluate {
            benchmark,
            n,
            k,
            generator,
            max_new_tokens,
            backend,
            out_dir: dir,
        } => {
            apply_backend(&mut cfg, &backend);
            if let Some(n) = n {
                cfg.eval.n = n;
            }
            if let Some(k) = k {
                cfg.eval.k = k;
            }
            if let Some(g) = generator {
                cfg.eval.generator = g;
            }
            if let Some(m) = max_new_tokens {
                cfg.eval.max_new_tokens = m;
            }
            cfg.validate()?;
            let problems = load_corpus(&benchmark)?;
            let gen = build_generator(&cfg.eval, &problems)?;
            let b = build_backend(&cfg.verify)?;
            let ecfg = EvalConfig {
                n: cfg.eval.n,
                ks: cfg.eval.k.clone(),
                sampling: SamplingParams {
                    temperature: cfg.eval.temperature,
                    top_p: cfg.eval.top_p,
                },
                max_new_tokens: cfg.eval.max_new_tokens,
                workers: cfg.verify.workers,
                verify: verify_config(&cfg)?,
            };
            info!(
                "evaluate: n {}, k {:?}, generator {:?}",
                ecfg.n, ecfg.ks, cfg.eval.generator
            );
            let out = evaluate_benchmark(&problems, gen.as_ref(), b.as_ref(), &ecfg)?;
            println!("pass@k over {} problems (n = {})", problems.len(), ecfg.n);
            print!("{}", out.report.to_table());
            if let Some(m) = out.usage.mean_tokens() {
                let label = if out.usage.proxy { " (whitespace proxy)" } else { "" };
                println!("mean completion tokens {m:.1}{label}");
            }
            println!();
            print!("{}", external_table());
            if let Some(d) = out_dir(&dir)? {
                write_record(Some(&d.join(PASSK_JSON)), &out.report)?;
                write_record(Some(&d.join("usage.json")), &out.usage)?;
                write_record(Some(&d.join("candidates.json")), &out.candidates)?;
            }
        }
        Command::Route {
            input,
            mode,
            classifier,
            generator,
            templates_dir,
            compare,
            backend,
            out_dir: dir,
        } => {
            apply_backend(&mut cfg, &backend);
            if let Some(c) = classifier {
                cfg.adaptive.classifier = c;
            }
            if let Some(g) = generator {
                cfg.eval.generator = g;
            }
            if templates_dir.is_some() {
                cfg.adaptive.templates_dir = templates_dir;
            }
            cfg.validate()?;
            let problems = load_corpus(&input)?;
            let cls = build_classifier(&cfg.adaptive)?;
            let gen = build_generator(&cfg.eval, &problems)?;
            let templates = build_templates(&cfg.adaptive)?;
            let opts = DispatchOptions {
                sampling: SamplingParams {
                    temperature: cfg.eval.temperature,
                    top_p: cfg.eval.top_p,
                },
                candidate_index: 0,
            };
            let dir = out_dir(&dir)?;
            if compare {
                let b = build_backend(&cfg.verify)?;
                let cmp = compare_modes(
                    &problems,
                    cls.as_ref(),
                    gen.as_ref(),
                    b.as_ref(),
                    &templates,
                    &CompareConfig {
                        workers: cfg.verify.workers,
                        verify: verify_config(&cfg)?,
                        dispatch: opts,
                    },
                )?;
                if cmp.table.rows.is_empty() {
                    println!("no problems to compare");
                } else {
                    print!("{}", cmp.table);
                }
                for m in &cmp.modes {
                    if m.errors > 0 {
                        println!("warning: {} problem(s) failed under {}", m.errors, m.mode.as_str());
                    }
                }
                if let Some(d) = dir {
                    write_record(Some(&d.join(EFFICIENCY_JSON)), &cmp.table)?;
                    write_record(Some(&d.join("comparison.json")), &cmp)?;
                }
            } else {
                let mut records = Vec::new();
                let mut failed = 0;
                for p in problems.samples() {
                    match route(p, mode, cls.as_ref(), gen.as_ref(), &templates, &opts) {
                        Ok(d) => {
                            println!(
                                "{}: {} ({}, budget {}) used {} tokens{}",
                                p.id,
                                d.plan.difficulty,
                                d.plan.prompt_mode.as_str(),
                                d.plan.max_new_tokens,
                                d.tokens_used,
                                if d.truncated { ", truncated" } else { "" }
                            );
                            records.push(serde_json::json!({ "problem_id": p.id, "dispatch": d }));
                        }
                        Err(e) => {
                            failed += 1;
                            warn!("{}: {e}", p.id);
                            println!("{}: error: {e}", p.id);
                            records.push(serde_json::json!({ "problem_id": p.id, "error": e.to_string() }));
                        }
                    }
                }
                if let Some(d) = dir {
                    write_record(Some(&d.join("routes.json")), &records)?;
                }
                if failed > 0 {
                    return Err(Failure {
                        code: 1,
                        message: format!("{failed} problem(s) failed to generate"),
                    });
                }
            }
        }
        Command::Pipeline {
            input,
            output_dir,
            from_stage,
            backend,
            dedup,
            quality,
        } => {
            if input.is_some() {
                cfg.paths.input = input;
            }
            if output_dir.is_some() {
                cfg.paths.output_dir = output_dir;
            }
            apply_backend(&mut cfg, &backend);
            apply_dedup(&mut cfg, &dedup);
            apply_quality(&mut cfg, &quality)?;
            cfg.validate()?;
            info!("effective config:\n{}", cfg.to_toml());
            let b = build_backend(&cfg.verify)?;
            let judge = build_judge(&cfg.quality)?;
            let rules = build_rules(&cfg.quality)?;
            let deps = PipelineDeps {
                backend: b.as_ref(),
                judge: judge.as_ref(),
                embedder: &NgramHashEmbedder::default(),
                rules: &rules,
                domains: &KeywordDomainClassifier::default(),
            };
            let run = run_pipeline(&cfg, &deps, from_stage).map_err(|e| Failure {
                code: e.exit_code() as u8,
                message: e.to_string(),
            })?;
            print!("{}", run.funnel.to_table());
            println!("artifacts in {}", run.output_dir.display());
        }
        Command::Report { dir } => {
            let r = report(&dir)?;
            print!("{}", r.text);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
