use std::fs;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use sp_core::learner::{derive_from_corpus, select_grammar, LearnPolicy};
use sp_core::{
    build_alignments, extract_code, group_and_rank, parse_knowledge_file, parse_new_patterns,
    render_rotated, serialize_knowledge, AlignmentDocument, DiagnosisConfig, DiagnosisReport,
    DiagnosisSession, KnowledgeStore, MatchOptions, Pattern, SearchOptions,
};
use sp_service::{http, Service};

#[derive(Parser)]
#[command(
    name = "sp",
    version,
    about = "Pattern recognition by multiple alignment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Pretty,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Align New patterns against a knowledge file and print the best results.
    Align {
        kb: PathBuf,
        new_file: PathBuf,
        #[arg(long, default_value_t = 20)]
        beam: usize,
        /// Alternatives kept per merge state.
        #[arg(long, default_value_t = 8)]
        depth: usize,
        /// Cost in bits of each gap in a New pattern.
        #[arg(long = "gap-bits", default_value_t = 1.0)]
        gap_bits: f64,
        #[arg(long, default_value_t = 5)]
        top: usize,
        #[arg(long, value_enum, default_value_t = Format::Pretty)]
        format: Format,
    },
    /// Run one diagnostic pass over a findings file.
    Diagnose {
        kb: PathBuf,
        findings_file: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Pretty)]
        format: Format,
    },
    /// Learn a knowledge file from a corpus of blank-line separated patterns.
    Learn {
        corpus: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "sp-data")]
        data: PathBuf,
    },
}

fn read(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_store(path: &PathBuf) -> Result<KnowledgeStore> {
    parse_knowledge_file(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Align {
            kb,
            new_file,
            beam,
            depth,
            gap_bits,
            top,
            format,
        } => {
            let store = load_store(&kb)?;
            let news = parse_new_patterns(&read(&new_file)?)
                .with_context(|| format!("parsing {}", new_file.display()))?;
            let opts = SearchOptions {
                beam_width: beam,
                matching: MatchOptions {
                    depth,
                    gap_cost_bits: gap_bits,
                    ..MatchOptions::default()
                },
                ..SearchOptions::default()
            };
            align(&store, &news, &opts, top, format)
        }
        Command::Diagnose {
            kb,
            findings_file,
            format,
        } => {
            let store = load_store(&kb)?;
            let config = DiagnosisConfig::default();
            let mut session = DiagnosisSession::new("cli", kb.display().to_string());
            for w in session.add_findings(&store, &read(&findings_file)?, &config)? {
                eprintln!("warning: {w}");
            }
            match format {
                Format::Json => println!("{}", serde_json::to_string_pretty(session.report())?),
                Format::Pretty => print_report(session.report()),
            }
            Ok(())
        }
        Command::Learn { corpus, output } => learn(&corpus, &output),
        Command::Serve { port, data } => serve(port, data),
    }
}

fn align(
    store: &KnowledgeStore,
    news: &[Pattern],
    opts: &SearchOptions,
    top: usize,
    format: Format,
) -> Result<()> {
    let results = build_alignments(news, store, opts)?;
    let ranked: Vec<_> = group_and_rank(results)
        .into_iter()
        .enumerate()
        .flat_map(|(g, group)| group.members.into_iter().map(move |m| (g, m)))
        .take(top)
        .collect();
    match format {
        Format::Json => {
            let docs: Vec<serde_json::Value> = ranked
                .iter()
                .map(|(g, m)| {
                    serde_json::json!({
                        "group": g,
                        "alignment": AlignmentDocument::new(&m.alignment, &m.score),
                    })
                })
                .collect();
            println!("{}", serde_json::to_string_pretty(&docs)?);
        }
        Format::Pretty => {
            if ranked.is_empty() {
                println!("no alignment compresses the New patterns");
            }
            for (i, (g, m)) in ranked.iter().enumerate() {
                let s = &m.score;
                let code: Vec<String> = extract_code(&m.alignment)
                    .iter()
                    .map(|x| x.to_string())
                    .collect();
                println!(
                    "#{} group {} cd {:.2} b_n {:.2} b_e {:.2} p_rel {:.5}  code: {}",
                    i + 1,
                    g + 1,
                    s.cd,
                    s.b_n,
                    s.b_e,
                    s.p_rel.unwrap_or(1.0),
                    code.join(" ")
                );
                println!("{}", render_rotated(&m.alignment));
            }
        }
    }
    Ok(())
}

fn print_report(r: &DiagnosisReport) {
    if r.groups.is_empty() {
        println!("no hypotheses");
    }
    for (g, group) in r.groups.iter().enumerate() {
        println!(
            "group {} ({} finding symbols explained)",
            g + 1,
            group.explained_symbols
        );
        for h in &group.hypotheses {
            println!(
                "  {:<20} p_rel {:>8.4}%  cd {:.2}  alignment #{}",
                h.name,
                h.p_rel * 100.0,
                h.compression,
                h.alignment
            );
            let list = |label: &str, items: &[sp_core::diagnosis::FieldInference]| {
                if !items.is_empty() {
                    let v: Vec<String> = items
                        .iter()
                        .map(|f| format!("{}={}", f.field, f.value))
                        .collect();
                    println!("    {label}: {}", v.join(", "));
                }
            };
            list("expect", &h.predicted_symptoms);
            list("investigate", &h.investigations);
            list("treat", &h.treatments);
        }
    }
    let unexplained: Vec<&str> = r
        .findings
        .iter()
        .filter(|f| !f.explained)
        .map(|f| f.text.as_str())
        .collect();
    if !unexplained.is_empty() {
        println!("unexplained: {}", unexplained.join("; "));
    }
    if !r.top_alignment.is_empty() {
        println!("\n{}", r.top_alignment);
    }
}

fn learn(corpus: &PathBuf, output: &PathBuf) -> Result<()> {
    let data = parse_new_patterns(&read(corpus)?)
        .with_context(|| format!("parsing {}", corpus.display()))?;
    let mut distinct: Vec<Pattern> = Vec::new();
    for p in &data {
        if !distinct.iter().any(|q| q.symbols() == p.symbols()) {
            distinct.push(p.clone());
        }
    }
    if distinct.len() < 2 {
        bail!("the corpus needs at least two distinct patterns");
    }
    let candidates: Vec<Pattern> = derive_from_corpus(&distinct, &MatchOptions::default())?
        .into_iter()
        .map(|c| c.pattern)
        .collect();
    if candidates.is_empty() {
        bail!("no two corpus patterns share a symbol");
    }
    let grammar = select_grammar(&candidates, &data, &LearnPolicy::default())?;
    log::info!(
        "{} of {} candidates kept; grammar {:.1} bits + data {:.1} bits = {:.1} bits",
        grammar.patterns.len(),
        candidates.len(),
        grammar.score.grammar_bits,
        grammar.score.data_bits,
        grammar.score.total_bits
    );
    if grammar.patterns.is_empty() {
        log::warn!("no candidate pays for itself; the corpus is left unencoded");
    }
    fs::write(output, serialize_knowledge(&grammar.patterns))
        .with_context(|| format!("writing {}", output.display()))?;
    Ok(())
}

fn serve(port: u16, data: PathBuf) -> Result<()> {
    let svc = Arc::new(Service::open(&data, DiagnosisConfig::default())?);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let addr = SocketAddr::from(([0, 0, 0, 0], port));
        let listener = tokio::net::TcpListener::bind(addr).await?;
        log::info!("listening on {addr}, data in {}", data.display());
        axum::serve(listener, http::router(svc))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
