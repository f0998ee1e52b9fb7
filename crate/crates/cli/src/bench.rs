//! Benchmark runs over a directory of query files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rxdb_core::executor::{evaluate, Algo, EvalOptions, ExecError, IoStats};
use rxdb_core::frontend::compile;
use rxdb_core::storage::Collection;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub runs: usize,
    /// Drop the best and the worst run before averaging.
    pub trim: bool,
    pub timeout: Duration,
    pub algo: Algo,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            runs: 5,
            trim: true,
            timeout: Duration::from_secs(300),
            algo: Algo::Fpbj,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.runs == 0 {
            return Err("--runs must be at least 1".into());
        }
        if self.trim && self.runs < 3 {
            return Err("trimming best and worst needs --runs >= 3 (or pass --no-trim)".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Done { mean: Duration, count: u64, io: IoStats },
    /// Did not finish within the timeout.
    Dnf,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub query: String,
    pub algo: Algo,
    pub outcome: Outcome,
}

/// Arithmetic mean, optionally without the single best and worst sample.
pub fn trimmed_mean(samples: &[Duration], trim: bool) -> Duration {
    let mut s = samples.to_vec();
    s.sort();
    let kept = if trim && s.len() >= 3 { &s[1..s.len() - 1] } else { &s[..] };
    if kept.is_empty() {
        return Duration::ZERO;
    }
    kept.iter().sum::<Duration>() / kept.len() as u32
}

/// The `.xq` files of a directory, by name.
pub fn query_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.retain(|p| p.extension().is_some_and(|x| x == "xq"));
    files.sort();
    Ok(files)
}

pub fn bench_query(coll: &Collection, name: &str, text: &str, cfg: &BenchConfig) -> BenchRow {
    let row = |outcome| BenchRow {
        query: name.to_owned(),
        algo: cfg.algo,
        outcome,
    };
    let (ast, det) = match compile(text) {
        Ok(x) => x,
        Err(e) => return row(Outcome::Failed(e.to_string())),
    };
    let mut times = Vec::with_capacity(cfg.runs);
    let mut result: Option<(u64, IoStats)> = None;
    for _ in 0..cfg.runs {
        let opts = EvalOptions {
            materialize: false,
            deadline: Some(Instant::now() + cfg.timeout),
        };
        let t = Instant::now();
        let r = evaluate(coll, &ast, &det, cfg.algo, opts);
        let elapsed = t.elapsed();
        match r {
            Ok(r) => {
                if let Some((count, _)) = &result {
                    if *count != r.count {
                        return row(Outcome::Failed(format!("count changed between runs: {count} then {}", r.count)));
                    }
                }
                result = Some((r.count, r.io));
                times.push(elapsed);
            }
            Err(ExecError::Timeout) => return row(Outcome::Dnf),
            Err(e) => return row(Outcome::Failed(e.to_string())),
        }
    }
    let (count, io) = result.expect("at least one run");
    row(Outcome::Done {
        mean: trimmed_mean(&times, cfg.trim),
        count,
        io,
    })
}

pub fn bench_dir(coll: &Collection, dir: &Path, cfg: &BenchConfig) -> std::io::Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for f in query_files(dir)? {
        let name = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let row = match fs::read_to_string(&f) {
            Ok(text) => bench_query(coll, &name, &text, cfg),
            Err(e) => BenchRow {
                query: name,
                algo: cfg.algo,
                outcome: Outcome::Failed(e.to_string()),
            },
        };
        rows.push(row);
    }
    Ok(rows)
}

pub const REPORT_HEADER: &str =
    "query\talgo\tstatus\tcount\tmean_seconds\telements_read\tposting_len\tpages_touched\tpeak_frames";

/// Tab-separated report with a header row; one line per query.
pub fn report_tsv(rows: &[BenchRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        let _ = match &r.outcome {
            Outcome::Done { mean, count, io } => {
                let t = io.total();
                writeln!(
                    out,
                    "{}\t{}\tok\t{count}\t{:.6}\t{}\t{}\t{}\t{}",
                    r.query,
                    r.algo,
                    mean.as_secs_f64(),
                    t.elements_read,
                    t.posting_len,
                    t.pages_touched,
                    io.peak_stack_frames
                )
            }
            Outcome::Dnf => writeln!(out, "{}\t{}\tDNF\t\t\t\t\t\t", r.query, r.algo),
            Outcome::Failed(msg) => {
                let msg = msg.replace(['\t', '\n'], " ");
                writeln!(out, "{}\t{}\terror: {msg}\t\t\t\t\t\t", r.query, r.algo)
            }
        };
    }
    out
}

/// Human-readable table for the terminal.
pub fn report_table(rows: &[BenchRow]) -> String {
    let width = rows.iter().map(|r| r.query.len()).max().unwrap_or(5).max(5);
    let mut out = format!("{:<width$}  {:<5}  {:>12}  {:>12}\n", "query", "algo", "count", "seconds");
    for r in rows {
        let (count, secs) = match &r.outcome {
            Outcome::Done { mean, count, .. } => (count.to_string(), format!("{:.4}", mean.as_secs_f64())),
            Outcome::Dnf => (String::new(), "DNF".into()),
            Outcome::Failed(msg) => (String::new(), format!("error: {msg}")),
        };
        let _ = writeln!(out, "{:<width$}  {:<5}  {count:>12}  {secs:>12}", r.query, r.algo.name());
    }
    out
}
