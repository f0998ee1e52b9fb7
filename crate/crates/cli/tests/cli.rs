use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn rxdb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rxdb")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn load_mini(dir: &Path) -> String {
    let coll = dir.join("mini").display().to_string();
    let o = rxdb(&["load", &coll, data().join("mini").to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("site1.xml: 1 document, "), "{out}");
    assert!(out.lines().last().unwrap().starts_with("2 documents, "), "{out}");
    coll
}

// Expected counts worked out by hand from tests/data/mini.
const QUERIES: [(&str, u64); 4] = [("auctions", 4), ("items", 2), ("mail", 9), ("keywords", 3)];

fn query_arg(name: &str) -> String {
    match name {
        "keywords" => "count(//keyword)".into(),
        n => format!("@{}", data().join("queries").join(format!("{n}.xq")).display()),
    }
}

#[test]
fn load_stats_query_bench() {
    let dir = tempfile::tempdir().unwrap();
    let coll = load_mini(dir.path());

    let o = rxdb(&["stats", &coll]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("documents: 2"), "{s}");
    assert!(s.contains("max depth: "), "{s}");
    assert!(s.contains("distinct names: "), "{s}");

    for (name, want) in QUERIES {
        let q = query_arg(name);
        for algo in ["gtp", "fpbj", "naive"] {
            let o = rxdb(&["query", &coll, &q, "--algo", algo]);
            assert!(o.status.success(), "{name} {algo}: {}", stderr(&o));
            assert_eq!(stdout(&o).trim(), want.to_string(), "{name} {algo}");
        }
    }

    let o = rxdb(&["query", &coll, &query_arg("items"), "--plan", "--stats"]);
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("2"));
    assert_eq!(lines.next(), Some("FP-BJ"));
    assert!(out.contains("StructJoin J1 "), "{out}");
    assert!(out.contains("stream #0 regions: elements_read="), "{out}");
    assert!(out.contains("total: "), "{out}");

    let report = dir.path().join("report.tsv");
    let o = rxdb(&[
        "bench",
        &coll,
        data().join("queries").to_str().unwrap(),
        "--runs",
        "3",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let tsv = fs::read_to_string(&report).unwrap();
    let rows: Vec<Vec<&str>> = tsv.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert!(tsv.starts_with("query\talgo\tstatus\tcount\t"));
    assert_eq!(rows.len(), 4);
    for (name, want) in QUERIES.iter().filter(|q| q.0 != "keywords") {
        let row = rows.iter().find(|r| r[0] == *name).unwrap();
        assert_eq!(row[1], "fpbj");
        assert_eq!(row[2], "ok");
        assert_eq!(row[3], want.to_string(), "bench count equals query count for {name}");
    }
    let broken = rows.iter().find(|r| r[0] == "broken").unwrap();
    assert!(broken[2].contains("UnsupportedConstruct"), "{broken:?}");
}

#[test]
fn query_rejections_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let coll = load_mini(dir.path());
    for (q, code) in [
        ("//item[", "SyntaxError"),
        ("//item | //mail", "UnsupportedConstruct"),
        ("for $a in //item for $b in //mail return ($a, $b)", "NotSingleTwig"),
    ] {
        let o = rxdb(&["query", &coll, q]);
        assert_eq!(o.status.code(), Some(2), "{q}");
        assert!(stderr(&o).contains(code), "{q}: {}", stderr(&o));
    }
}

#[test]
fn storage_failures_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    // malformed input: nothing is left behind
    let target = dir.path().join("bad");
    let o = rxdb(&["load", target.to_str().unwrap(), data().join("mini/site1.xml").to_str().unwrap(), data().join("bad.xml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("bad.xml"), "{}", stderr(&o));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0, "leftover files after a failed load");

    // missing collection
    let o = rxdb(&["stats", target.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    // corrupt collection
    let coll = load_mini(dir.path());
    let meta = Path::new(&coll).join("meta");
    let mut bytes = fs::read(&meta).unwrap();
    bytes[8] ^= 0xff;
    fs::write(&meta, &bytes).unwrap();
    let o = rxdb(&["stats", &coll]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("corrupt"), "{}", stderr(&o));
    let o = rxdb(&["query", &coll, "count(//item)"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn empty_collection_and_trim_check() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("none");
    fs::create_dir(&empty).unwrap();
    let coll = dir.path().join("c");
    let o = rxdb(&["load", coll.to_str().unwrap(), empty.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("0 documents, 0 nodes"), "{}", stdout(&o));
    let o = rxdb(&["stats", coll.to_str().unwrap()]);
    assert!(stdout(&o).contains("nodes: 0 "), "{}", stdout(&o));
    let o = rxdb(&["query", coll.to_str().unwrap(), "count(//a)"]);
    assert_eq!(stdout(&o).trim(), "0");

    let o = rxdb(&["bench", coll.to_str().unwrap(), data().join("queries").to_str().unwrap(), "--runs", "2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = rxdb(&["bench", coll.to_str().unwrap(), data().join("queries").to_str().unwrap(), "--runs", "2", "--no-trim"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn slow_query_is_dnf() {
    let dir = tempfile::tempdir().unwrap();
    let mut xml = String::from("<r>");
    for _ in 0..20_000 {
        xml.push_str("<a><b/></a>");
    }
    xml.push_str("</r>");
    let file = dir.path().join("big.xml");
    fs::write(&file, xml).unwrap();
    let coll = dir.path().join("c");
    assert!(rxdb(&["load", coll.to_str().unwrap(), file.to_str().unwrap()]).status.success());
    let qdir = dir.path().join("q");
    fs::create_dir(&qdir).unwrap();
    fs::write(qdir.join("ab.xq"), "count(//a/b)").unwrap();
    let report = dir.path().join("r.tsv");
    let mut args = vec!["bench", coll.to_str().unwrap(), qdir.to_str().unwrap(), "--timeout", "0"];
    args.extend(["--report", report.to_str().unwrap()]);
    let o = rxdb(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let tsv = fs::read_to_string(&report).unwrap();
    assert!(tsv.lines().nth(1).unwrap().starts_with("ab\tfpbj\tDNF"), "{tsv}");
    assert!(stdout(&o).contains("DNF"));
}
