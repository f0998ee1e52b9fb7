//! Acceptance gate: one PASS / FAIL / BLOCKED line per criterion.
//!
//! BLOCKED means the criterion needs an external corpus that is not present;
//! it does not fail the run. Set `RXDB_XMARK_F1` (and optionally
//! `RXDB_XMARK_F10`, `RXDB_DBLP`, `RXDB_SWISSPROT`, `RXDB_TREEBANK`) to an XML
//! file or an already loaded collection directory to run the published-count
//! checks.

mod common;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::SeedableRng;

use common::{build_collection, cross_check, random_doc, random_doc_with, random_supported_query, run, GenDoc};
use rxdb_core::executor::{evaluate, explain, Algo, EvalOptions};
use rxdb_core::frontend::{compile, equivalent_form_check};
use rxdb_core::storage::collection::META_FILE;
use rxdb_core::storage::{Collection, CollectionBuilder, StorageError};

const CORPUS_DOCS: usize = 200;
const CORPUS_QUERIES: usize = 200;
const CORPUS_SEED: u64 = 0xacce;
const QUERY_SEED: u64 = 0x7e57;

enum Outcome {
    Pass(String),
    Fail(String),
    Blocked(String),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Pass(d) => write!(f, "PASS     {d}"),
            Outcome::Fail(d) => write!(f, "FAIL     {d}"),
            Outcome::Blocked(d) => write!(f, "BLOCKED  {d}"),
        }
    }
}

fn check(ok: bool, pass: String, fail: impl FnOnce() -> String) -> Outcome {
    if ok {
        Outcome::Pass(pass)
    } else {
        Outcome::Fail(fail())
    }
}

struct Corpus {
    _dir: tempfile::TempDir,
    path: PathBuf,
    docs: Vec<GenDoc>,
    coll: Collection,
    queries: Vec<String>,
}

fn corpus() -> Corpus {
    let mut rng = StdRng::seed_from_u64(CORPUS_SEED);
    let docs: Vec<GenDoc> = (0..CORPUS_DOCS).map(|_| random_doc(&mut rng, 500, 8)).collect();
    let xml: Vec<String> = docs.iter().map(|d| d.xml.clone()).collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus");
    let coll = build_collection(&path, &xml);
    let mut rng = StdRng::seed_from_u64(QUERY_SEED);
    let queries = (0..CORPUS_QUERIES).map(|_| random_supported_query(&mut rng)).collect();
    Corpus {
        _dir: dir,
        path,
        docs,
        coll,
        queries,
    }
}

fn queries_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../queries")
}

/// (file stem, query text) of one workload directory, sorted by name.
fn workload(kind: &str) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = fs::read_dir(queries_dir().join(kind))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "xq"))
        .map(|p| (p.file_stem().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn oracle_equivalence(c: &Corpus) -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut nonzero = 0;
    let mut outputs = 0u64;
    for q in &c.queries {
        match cross_check(&c.coll, q) {
            Ok([g, ..]) => {
                nonzero += usize::from(g.count > 0);
                outputs += g.count;
            }
            Err(e) => failures.push(e),
        }
    }
    let elapsed = start.elapsed();
    let detail = format!(
        "oracle equivalence: {} docs x {} queries, gtp = fpbj = naive on counts and tuples \
         ({nonzero} non-empty queries, {outputs} items total, {:.1}s)",
        c.docs.len(),
        c.queries.len(),
        elapsed.as_secs_f64()
    );
    if let Some(first) = failures.first() {
        return Outcome::Fail(format!("{detail}; {} disagreements, first: {first}", failures.len()));
    }
    check(elapsed < Duration::from_secs(300), detail.clone(), || format!("{detail}; over the 5 minute budget"))
}

fn labeling_soundness(c: &Corpus) -> Outcome {
    let mut pairs = 0u64;
    for (i, doc) in c.docs.iter().enumerate() {
        let recs = c.coll.doc_scan(i as u32).unwrap();
        if recs.len() != doc.nodes.len() {
            return Outcome::Fail(format!(
                "labeling soundness: doc {i} stores {} nodes, tree has {}",
                recs.len(),
                doc.nodes.len()
            ));
        }
        for (x, a) in recs.iter().enumerate() {
            for (y, b) in recs.iter().enumerate() {
                pairs += 1;
                if a.label.is_ancestor_of(&b.label) != doc.is_ancestor(x, y)
                    || a.label.is_parent_of(&b.label) != doc.is_parent(x, y)
                {
                    return Outcome::Fail(format!("labeling soundness: doc {i} nodes {x},{y} disagree with the tree"));
                }
            }
        }
    }
    Outcome::Pass(format!(
        "labeling soundness: ancestor/parent from stored labels match the generating tree on all {pairs} ordered pairs of {} docs",
        c.docs.len()
    ))
}

const NEGATIVE: &[(&str, &str)] = &[
    ("for $a in //x for $b in //y return ($a, $b)", "NotSingleTwig"),
    ("for $a in //x where //y return $a", "NotSingleTwig"),
    ("//x[//y]", "NotSingleTwig"),
    ("for $a in //x let $b := $a/y for $c in $b/z return $c", "UnsupportedConstruct"),
    ("for $a in //x let $b := $a/y[z] return $b", "UnsupportedConstruct"),
    ("for $a in //x where $a/y or $a/z return $a", "UnsupportedConstruct"),
    ("for $a in //x where $a/y = $a/z return $a", "UnsupportedConstruct"),
    ("for $a in //x where $a/y + 1 = 2 return $a", "UnsupportedConstruct"),
    ("for $a in //x order by $a return $a", "UnsupportedConstruct"),
    ("//x[1]", "UnsupportedConstruct"),
    ("//x/..", "UnsupportedConstruct"),
    ("//x | //y", "UnsupportedConstruct"),
    ("some $a in //x satisfies $a/y", "UnsupportedConstruct"),
    ("for $a in //x return $a/y", "UnsupportedConstruct"),
    ("for $a in //x return ($a, $a)", "UnsupportedConstruct"),
    ("for $a in //x[. = 1 and . = 2] return $a", "UnsupportedConstruct"),
    ("//x[", "SyntaxError"),
    ("for $a in //x return $b", "SyntaxError"),
    ("for $a in x return $a", "SyntaxError"),
    ("for $a //x return $a", "SyntaxError"),
];

fn detection_coverage() -> Outcome {
    let structural = workload("structural");
    let value = workload("value");
    let mut problems = Vec::new();
    for (kind, list) in [("structural", &structural), ("value", &value)] {
        for (name, text) in list {
            match compile(text) {
                Err(e) => problems.push(format!("{kind}/{name}: {e}")),
                Ok((_, det)) => {
                    if det.tpq.validate().is_err() {
                        problems.push(format!("{kind}/{name}: invalid twig"));
                    }
                    let preds = det.tpq.nodes.iter().filter(|n| n.value_pred.is_some()).count();
                    if kind == "structural" && preds > 0 {
                        problems.push(format!("{kind}/{name}: carries {preds} value predicates"));
                    }
                    if kind == "value" && preds == 0 {
                        problems.push(format!("{kind}/{name}: no value predicate detected"));
                    }
                }
            }
        }
    }
    for &(q, code) in NEGATIVE {
        match compile(q) {
            Ok(_) => problems.push(format!("`{q}` was accepted")),
            Err(e) => {
                if e.code() != code || !e.to_string().starts_with(code) {
                    problems.push(format!("`{q}`: expected {code}, got `{e}`"));
                }
            }
        }
    }
    let detail = format!(
        "detection coverage: {} structural + {} value workload queries detect as single twigs; \
         {} rejections name their rule",
        structural.len(),
        value.len(),
        NEGATIVE.len()
    );
    let enough = structural.len() == 20 && value.len() == 15;
    check(problems.is_empty() && enough, detail.clone(), || {
        format!("{detail}; problems: {}", problems.join("; "))
    })
}

/// Published result sizes per dataset: (env var, workload, file stem, count).
const PUBLISHED: &[(&str, &str, &str, u64)] = &[
    ("RXDB_XMARK_F1", "structural", "xm1", 24_000),
    ("RXDB_XMARK_F1", "structural", "xm2", 80_925),
    ("RXDB_XMARK_F1", "structural", "xm3", 582),
    ("RXDB_XMARK_F1", "structural", "xm4", 113_067),
    ("RXDB_XMARK_F1", "structural", "xm5", 30_904),
    ("RXDB_XMARK_F1", "value", "xm1", 174),
    ("RXDB_XMARK_F1", "value", "xm2", 4_454),
    ("RXDB_XMARK_F1", "value", "xm3", 1),
    ("RXDB_XMARK_F1", "value", "xm4", 979),
    ("RXDB_XMARK_F1", "value", "xm5", 92),
    ("RXDB_XMARK_F10", "structural", "xm1", 240_000),
    ("RXDB_XMARK_F10", "structural", "xm2", 812_838),
    ("RXDB_XMARK_F10", "structural", "xm3", 6_073),
    ("RXDB_XMARK_F10", "structural", "xm4", 1_141_008),
    ("RXDB_XMARK_F10", "structural", "xm5", 308_428),
    ("RXDB_XMARK_F10", "value", "xm1", 2_433),
    ("RXDB_XMARK_F10", "value", "xm2", 44_849),
    ("RXDB_XMARK_F10", "value", "xm3", 0),
    ("RXDB_XMARK_F10", "value", "xm4", 9_717),
    ("RXDB_XMARK_F10", "value", "xm5", 860),
    ("RXDB_TREEBANK", "structural", "tb1", 20),
    ("RXDB_TREEBANK", "structural", "tb2", 318),
    ("RXDB_TREEBANK", "structural", "tb3", 1_864),
    ("RXDB_TREEBANK", "structural", "tb4", 33_971),
    ("RXDB_TREEBANK", "structural", "tb5", 159_591),
    ("RXDB_SWISSPROT", "structural", "sp1", 859),
    ("RXDB_SWISSPROT", "structural", "sp2", 1_240_896),
    ("RXDB_SWISSPROT", "structural", "sp3", 34_134),
    ("RXDB_SWISSPROT", "structural", "sp4", 1_751),
    ("RXDB_SWISSPROT", "structural", "sp5", 1_465_377),
    ("RXDB_SWISSPROT", "value", "sp1", 4),
    ("RXDB_SWISSPROT", "value", "sp2", 6),
    ("RXDB_SWISSPROT", "value", "sp3", 5_300),
    ("RXDB_SWISSPROT", "value", "sp4", 5),
    ("RXDB_SWISSPROT", "value", "sp5", 61_946),
    ("RXDB_DBLP", "structural", "db1", 541_644),
    ("RXDB_DBLP", "structural", "db2", 2_474),
    ("RXDB_DBLP", "structural", "db3", 29_766),
    ("RXDB_DBLP", "structural", "db4", 222_594),
    ("RXDB_DBLP", "structural", "db5", 47_624),
    ("RXDB_DBLP", "value", "db1", 13),
    ("RXDB_DBLP", "value", "db2", 411),
    ("RXDB_DBLP", "value", "db3", 16_235),
    ("RXDB_DBLP", "value", "db4", 38),
    ("RXDB_DBLP", "value", "db5", 1_240),
];

/// Opens a loaded collection directory, or loads an XML file into a scratch one.
fn dataset(path: &Path, scratch: &Path) -> Result<(Collection, Duration), StorageError> {
    let start = Instant::now();
    if path.join(META_FILE).exists() {
        return Ok((Collection::open(path)?, start.elapsed()));
    }
    let bytes = fs::read(path)?;
    let mut b = CollectionBuilder::create(scratch)?;
    b.load_document(&path.display().to_string(), &bytes)?;
    Ok((b.commit()?, start.elapsed()))
}

fn published_counts() -> Vec<Outcome> {
    let mut vars: Vec<&str> = PUBLISHED.iter().map(|p| p.0).collect();
    vars.dedup();
    let mut out = Vec::new();
    for var in vars {
        let Some(path) = std::env::var_os(var).map(PathBuf::from) else {
            let blocked = format!("published counts [{var}]: dataset not available (set {var} to run)");
            // XMark f=1 is the criterion proper; the others are reported only when present.
            if var == "RXDB_XMARK_F1" {
                out.push(Outcome::Blocked(blocked));
            }
            continue;
        };
        let scratch = tempfile::tempdir().unwrap();
        let (coll, load) = match dataset(&path, &scratch.path().join("c")) {
            Ok(x) => x,
            Err(e) => {
                out.push(Outcome::Fail(format!("published counts [{var}]: cannot load {}: {e}", path.display())));
                continue;
            }
        };
        let mut bad = Vec::new();
        let mut slowest = Duration::ZERO;
        let mut n = 0;
        for &(_, kind, stem, want) in PUBLISHED.iter().filter(|p| p.0 == var) {
            let text = fs::read_to_string(queries_dir().join(kind).join(format!("{stem}.xq"))).unwrap();
            let (ast, det) = compile(&text).unwrap();
            let t = Instant::now();
            let got = evaluate(&coll, &ast, &det, Algo::Fpbj, EvalOptions::default()).map(|r| r.count);
            slowest = slowest.max(t.elapsed());
            n += 1;
            match got {
                Ok(c) if c == want => {}
                Ok(c) => bad.push(format!("{kind}/{stem} = {c}, published {want}")),
                Err(e) => bad.push(format!("{kind}/{stem}: {e}")),
            }
        }
        let detail = format!(
            "published counts [{var}]: {n} queries, load {:.1}s, slowest query {:.1}s",
            load.as_secs_f64(),
            slowest.as_secs_f64()
        );
        let timely = load < Duration::from_secs(600) && slowest < Duration::from_secs(60);
        out.push(check(bad.is_empty() && timely, detail.clone(), || format!("{detail}; {}", bad.join("; "))));
    }
    out
}

/// Element and attribute names a query mentions.
fn vocabulary(text: &str) -> (Vec<String>, Vec<String>) {
    let (_, det) = compile(text).unwrap();
    let mut elems = Vec::new();
    let mut attrs = Vec::new();
    for n in &det.tpq.nodes {
        let name = n.name_test.to_string();
        match name.strip_prefix('@') {
            Some(a) => attrs.push(a.to_string()),
            None => elems.push(name),
        }
    }
    elems.sort();
    elems.dedup();
    attrs.sort();
    attrs.dedup();
    (elems, attrs)
}

struct PassCheck {
    runs: usize,
    max_ratio: f64,
}

impl PassCheck {
    fn record(&mut self, coll: &Collection, q: &str, problems: &mut Vec<String>) {
        let (_, det) = compile(q).unwrap();
        let depth = coll.stats().max_depth as u64;
        let bound = depth * det.tpq.len() as u64;
        for algo in [Algo::Gtp, Algo::Fpbj] {
            let r = run(coll, q, algo);
            self.runs += 1;
            for (i, s) in r.io.streams.iter().enumerate() {
                if s.elements_read > s.posting_len {
                    problems.push(format!("{algo} `{q}`: stream {i} read {} of {}", s.elements_read, s.posting_len));
                }
            }
            if r.io.streams.len() != det.tpq.len() {
                problems.push(format!("{algo} `{q}`: {} streams for {} nodes", r.io.streams.len(), det.tpq.len()));
            }
            if algo == Algo::Gtp {
                if r.io.peak_stack_frames > bound {
                    problems.push(format!("`{q}`: {} frames > bound {bound}", r.io.peak_stack_frames));
                }
                if bound > 0 {
                    self.max_ratio = self.max_ratio.max(r.io.peak_stack_frames as f64 / bound as f64);
                }
            } else if !r.io.joins_ordered {
                problems.push(format!("`{q}`: a join emitted out of its declared order"));
            }
        }
    }
}

fn single_pass(c: &Corpus) -> Outcome {
    let mut problems = Vec::new();
    let mut pc = PassCheck { runs: 0, max_ratio: 0.0 };
    for q in &c.queries {
        pc.record(&c.coll, q, &mut problems);
    }
    // the structural workload, each on synthetic documents over its own names
    let mut rng = StdRng::seed_from_u64(0x5ca1e);
    let structural = workload("structural");
    let mut workload_items = 0;
    for (name, text) in &structural {
        let (elems, attrs) = vocabulary(text);
        let elems: Vec<&str> = elems.iter().map(String::as_str).collect();
        let attrs: Vec<&str> = attrs.iter().map(String::as_str).collect();
        let xml: Vec<String> = (0..40)
            .map(|_| random_doc_with(&mut rng, &elems, &attrs, 400, 10).xml)
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let coll = build_collection(&dir.path().join(name), &xml);
        match cross_check(&coll, text) {
            Ok([g, ..]) => workload_items += g.count,
            Err(e) => problems.push(format!("{name}: evaluators disagree: {e}")),
        }
        pc.record(&coll, text, &mut problems);
    }
    let detail = format!(
        "single pass and memory: {} runs ({} random queries + {} structural workload queries on synthetic \
         documents over their names, {workload_items} workload items); every stream read at most once, peak frames <= depth x nodes \
         (max ratio {:.2}), all joins order-preserving",
        pc.runs,
        c.queries.len(),
        structural.len(),
        pc.max_ratio
    );
    check(problems.is_empty(), detail.clone(), || format!("{detail}; {}", problems.join("; ")))
}

fn durability(c: &Corpus) -> Outcome {
    let counts = |coll: &Collection| -> Vec<u64> { c.queries.iter().map(|q| run(coll, q, Algo::Gtp).count).collect() };
    let before = counts(&c.coll);
    let reopened = Collection::open(&c.path).unwrap();
    let after = counts(&reopened);
    let stats_equal = reopened.stats() == c.coll.stats();
    drop(reopened);

    // corrupt a copy of the meta file
    let dir = tempfile::tempdir().unwrap();
    let copy = dir.path().join("copy");
    fs::create_dir(&copy).unwrap();
    for e in fs::read_dir(&c.path).unwrap() {
        let e = e.unwrap();
        fs::copy(e.path(), copy.join(e.file_name())).unwrap();
    }
    let meta = copy.join(META_FILE);
    let mut bytes = fs::read(&meta).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x01;
    fs::write(&meta, &bytes).unwrap();
    let corrupt_detected = matches!(Collection::open(&copy), Err(StorageError::Corrupt(_)));

    let detail = format!(
        "durability: reopen reproduces all {} query counts and the collection stats; flipped meta byte detected",
        before.len()
    );
    check(before == after && stats_equal && corrupt_detected, detail, || {
        format!(
            "durability: counts equal {}, stats equal {stats_equal}, corruption detected {corrupt_detected}",
            before == after
        )
    })
}

/// Nested-for form and path form of the same twig, grafting in the same order.
const EQUIVALENT_PAIRS: [(&str, &str); 20] = [
    ("for $x in //a for $y in $x/b return $y", "//a/b"),
    ("for $x in //a for $y in $x//b return $y", "//a//b"),
    ("for $x in //a[c] for $y in $x/b return $y", "//a[c]/b"),
    ("for $x in //a for $y in $x/b for $z in $y/c return $z", "//a/b/c"),
    ("for $x in //a for $y in $x/b where $y/c return $y", "//a/b[c]"),
    ("for $x in //a for $y in $x/b where $y//c and $y/d return $y", "//a/b[.//c and d]"),
    ("for $x in //a[@v = 2] for $y in $x//b return $y", "//a[@v = 2]//b"),
    ("for $x in //a for $y in $x/b where $y = 3 return $y", "//a/b[. = 3]"),
    ("for $x in //a for $y in $x/b where $y/c > 1 return $y", "//a/b[c > 1]"),
    ("for $x in /a for $y in $x//c return $y", "/a//c"),
    ("for $x in //a for $y in $x/b[d] for $z in $y//e return $z", "//a/b[d]//e"),
    ("for $x in //b for $y in $x//c where $y/@w return $y", "//b//c[@w]"),
    ("for $x in //a[b/c] for $y in $x/d return $y", "//a[b/c]/d"),
    ("for $x in //c for $y in $x/@v return $y", "//c/@v"),
    ("for $x in //a[. = 1] for $y in $x//b return $y", "//a[. = 1]//b"),
    ("for $x in //d for $y in $x/e where $y/f and $y/@v != 1 return $y", "//d/e[f and @v != 1]"),
    ("count(for $x in //a for $y in $x/b return $y)", "count(//a/b)"),
    ("for $x in //a//b for $y in $x/c return $y", "//a//b/c"),
    ("for $x in //e for $y in $x//f where $y >= 2 return $y", "//e//f[. >= 2]"),
    ("for $x in //a[c and d] for $y in $x/e return $y", "//a[c and d]/e"),
];

fn equivalent_forms(c: &Corpus) -> Outcome {
    let mut problems = Vec::new();
    let mut total = 0;
    for (nested, path) in EQUIVALENT_PAIRS {
        match equivalent_form_check(nested, path) {
            Ok(true) => {}
            Ok(false) => problems.push(format!("`{nested}` vs `{path}`: not equivalent")),
            Err(e) => problems.push(format!("`{nested}` vs `{path}`: {e}")),
        }
        let (Ok((_, d1)), Ok((_, d2))) = (compile(nested), compile(path)) else { continue };
        for algo in [Algo::Gtp, Algo::Fpbj, Algo::Naive] {
            let (a, b) = (run(&c.coll, nested, algo).count, run(&c.coll, path, algo).count);
            total += a;
            if a != b {
                problems.push(format!("{algo} `{nested}` = {a}, `{path}` = {b}"));
            }
            if explain(&d1.tpq, algo) != explain(&d2.tpq, algo) {
                problems.push(format!("`{nested}` vs `{path}`: {algo} explain differs"));
            }
        }
    }
    let detail = format!(
        "equivalent forms: {} nested-for / path pairs equivalent, identical counts ({total} items over all runs) and explain",
        EQUIVALENT_PAIRS.len()
    );
    check(problems.is_empty() && total > 0, detail.clone(), || format!("{detail}; {}", problems.join("; ")))
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture` or a filter;
    // none of them change what the gate checks.
    let start = Instant::now();
    let c = corpus();
    let mut outcomes = vec![oracle_equivalence(&c), labeling_soundness(&c), detection_coverage()];
    outcomes.extend(published_counts());
    outcomes.push(single_pass(&c));
    outcomes.push(durability(&c));
    outcomes.push(equivalent_forms(&c));

    println!("\nacceptance criteria");
    for o in &outcomes {
        println!("  {o}");
    }
    let failed = outcomes.iter().filter(|o| matches!(o, Outcome::Fail(_))).count();
    let blocked = outcomes.iter().filter(|o| matches!(o, Outcome::Blocked(_))).count();
    println!(
        "acceptance: {} passed, {failed} failed, {blocked} blocked ({:.1}s)\n",
        outcomes.len() - failed - blocked,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
