//! `rxdb`: load XML collections, run and benchmark twig queries.
//!
//! Exit codes: 0 success, 1 storage or runtime failure, 2 query rejection
//! (or bad usage).

mod bench;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand};

use bench::BenchConfig;
use rxdb_core::executor::{evaluate, explain, Algo, EvalOptions, ExecError, IoStats};
use rxdb_core::frontend::{compile, QueryError};
use rxdb_core::storage::{Collection, CollectionBuilder, StorageError};

#[derive(Parser)]
#[command(name = "rxdb", version, about = "Native XML database with twig-join query evaluation")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Create a collection from XML files (directories contribute their *.xml files).
    Load {
        collection: PathBuf,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Run one query and print its result count.
    Query {
        collection: PathBuf,
        /// Query text, or @FILE to read it from a file.
        query: String,
        #[arg(long, default_value = "fpbj")]
        algo: Algo,
        /// Print the evaluation plan.
        #[arg(long)]
        plan: bool,
        /// Print per-stream I/O statistics.
        #[arg(long)]
        stats: bool,
    },
    /// Time every .xq file of a directory.
    Bench {
        collection: PathBuf,
        query_dir: PathBuf,
        #[arg(long, default_value = "fpbj")]
        algo: Algo,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        /// Average all runs instead of dropping the best and the worst.
        #[arg(long)]
        no_trim: bool,
        /// Per-run timeout in seconds; slower queries are reported as DNF.
        #[arg(long, default_value_t = 300)]
        timeout: u64,
        /// Write a tab-separated report to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print collection statistics.
    Stats { collection: PathBuf },
}

enum Failure {
    Runtime(String),
    Rejected(String),
}

impl From<StorageError> for Failure {
    fn from(e: StorageError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<ExecError> for Failure {
    fn from(e: ExecError) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<QueryError> for Failure {
    fn from(e: QueryError) -> Self {
        Failure::Rejected(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn plural(n: u64, word: &str) -> String {
    if n == 1 {
        format!("{n} {word}")
    } else {
        format!("{n} {word}s")
    }
}

fn xml_inputs(files: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for f in files {
        if f.is_dir() {
            let mut inner: Vec<PathBuf> = fs::read_dir(f)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            inner.retain(|p| p.extension().is_some_and(|x| x == "xml"));
            inner.sort();
            out.extend(inner);
        } else {
            out.push(f.clone());
        }
    }
    Ok(out)
}

fn cmd_load(collection: &Path, files: &[PathBuf]) -> Result<()> {
    let inputs = xml_inputs(files)?;
    let start = Instant::now();
    // dropping the builder on an error removes its staging directory
    let mut b = CollectionBuilder::create(collection)?;
    for f in &inputs {
        let bytes = fs::read(f).map_err(|e| Failure::Runtime(format!("{}: {e}", f.display())))?;
        let d = b
            .load_document(&f.display().to_string(), &bytes)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", f.display())))?;
        println!("{}: 1 document, {} nodes, depth {}", d.source, d.nodes(), d.max_depth);
    }
    let coll = b.commit()?;
    let s = coll.stats();
    println!(
        "{}, {} nodes, depth {} ({:.2}s)",
        plural(s.documents, "document"),
        s.nodes(),
        s.max_depth,
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn query_text(arg: &str) -> Result<String> {
    match arg.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{path}: {e}"))),
        None => Ok(arg.to_owned()),
    }
}

fn print_io(io: &IoStats, tpq: &rxdb_core::query::Tpq) {
    for (q, s) in io.streams.iter().enumerate() {
        println!(
            "stream #{q} {}: elements_read={} posting_len={} pages_touched={}",
            tpq.node(q).name_test,
            s.elements_read,
            s.posting_len,
            s.pages_touched
        );
    }
    let t = io.total();
    println!(
        "total: elements_read={} posting_len={} pages_touched={} peak_stack_frames={} records_scanned={}",
        t.elements_read, t.posting_len, t.pages_touched, io.peak_stack_frames, io.records_scanned
    );
}

fn cmd_query(collection: &Path, query: &str, algo: Algo, plan: bool, stats: bool) -> Result<()> {
    let text = query_text(query)?;
    let (ast, det) = compile(&text)?;
    let coll = Collection::open(collection)?;
    let start = Instant::now();
    let r = evaluate(&coll, &ast, &det, algo, EvalOptions::default())?;
    let elapsed = start.elapsed();
    println!("{}", r.count);
    if plan {
        print!("{}", explain(&det.tpq, algo));
    }
    if stats {
        print_io(&r.io, &det.tpq);
        println!("time: {:.6}s", elapsed.as_secs_f64());
    }
    Ok(())
}

fn cmd_bench(collection: &Path, dir: &Path, cfg: &BenchConfig, report: Option<&Path>) -> Result<()> {
    cfg.validate().map_err(Failure::Rejected)?;
    let coll = Collection::open(collection)?;
    let rows = bench::bench_dir(&coll, dir, cfg)?;
    print!("{}", bench::report_table(&rows));
    if let Some(path) = report {
        fs::write(path, bench::report_tsv(&rows))?;
    }
    Ok(())
}

fn cmd_stats(collection: &Path) -> Result<()> {
    let coll = Collection::open(collection)?;
    let s = coll.stats();
    println!("documents: {}", s.documents);
    println!("nodes: {} (elements {}, attributes {})", s.nodes(), s.elements, s.attributes);
    println!("text nodes: {}", s.texts);
    println!("max depth: {}", s.max_depth);
    println!("distinct names: {}", s.distinct_names);
    println!("size on disk: {} bytes", s.size_on_disk);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.cmd {
        Cmd::Load { collection, files } => cmd_load(collection, files),
        Cmd::Query {
            collection,
            query,
            algo,
            plan,
            stats,
        } => cmd_query(collection, query, *algo, *plan, *stats),
        Cmd::Bench {
            collection,
            query_dir,
            algo,
            runs,
            no_trim,
            timeout,
            report,
        } => {
            let cfg = BenchConfig {
                runs: *runs,
                trim: !no_trim,
                timeout: Duration::from_secs(*timeout),
                algo: *algo,
            };
            cmd_bench(collection, query_dir, &cfg, report.as_deref())
        }
        Cmd::Stats { collection } => cmd_stats(collection),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Rejected(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
