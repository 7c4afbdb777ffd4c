use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn scindex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scindex"))
        .args(args)
        .env_remove("SCINDEX_CONFIG")
        .output()
        .expect("binary runs")
}

fn corpus_args() -> Vec<String> {
    vec![
        "--articles".into(),
        fixture("articles.csv").display().to_string(),
        "--edges".into(),
        fixture("edges.csv").display().to_string(),
        "--scheme".into(),
        fixture("journal.csv").display().to_string(),
    ]
}

fn run_with(base: &[&str], extra: &[&str]) -> Output {
    let corpus = corpus_args();
    let mut args: Vec<&str> = base.to_vec();
    args.extend(corpus.iter().map(String::as_str));
    args.extend_from_slice(extra);
    scindex(&args)
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "failed: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn split_header(text: &str) -> (&str, &str) {
    text.split_once('\n').expect("header line")
}

#[test]
fn nlcs_matches_golden() {
    let out = stdout(&run_with(&["compute", "--indicator", "nlcs", "--window", "3"], &[]));
    let (header, body) = split_header(&out);
    assert!(header.starts_with("# scindex 0.1.0 config="), "{header}");
    assert!(header.ends_with("seed=none"));
    let golden = std::fs::read_to_string(fixture("expected_nlcs_w3.csv")).unwrap();
    assert_eq!(body, golden);
}

#[test]
fn window_changes_config_hash() {
    let a = stdout(&run_with(&["compute", "--indicator", "ncs", "--window", "3"], &[]));
    let b = stdout(&run_with(&["compute", "--indicator", "ncs", "--window", "2"], &[]));
    assert_ne!(split_header(&a).0, split_header(&b).0);
}

#[test]
fn config_file_and_env_var() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"window": 3}"#).unwrap();
    let flag = stdout(&run_with(
        &["--config", cfg.to_str().unwrap(), "compute", "--indicator", "nlcs"],
        &[],
    ));
    let golden = std::fs::read_to_string(fixture("expected_nlcs_w3.csv")).unwrap();
    assert_eq!(split_header(&flag).1, golden);

    let corpus = corpus_args();
    let mut args = vec!["compute", "--indicator", "nlcs"];
    args.extend(corpus.iter().map(String::as_str));
    let env = Command::new(env!("CARGO_BIN_EXE_scindex"))
        .args(&args)
        .env("SCINDEX_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(stdout(&env), flag);

    std::fs::write(&cfg, r#"{"windw": 3}"#).unwrap();
    let bad = run_with(
        &["--config", cfg.to_str().unwrap(), "compute", "--indicator", "nlcs"],
        &[],
    );
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn missing_seed_is_usage_error() {
    let o = scindex(&["simulate", "probmodel"]);
    assert_eq!(o.status.code(), Some(2));
    let o = scindex(&["simulate", "corpus", "--out", "/tmp/never"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_corpus_reports_json() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(
        &bad,
        "id,year,journal_id,doc_type,authors,fields\nA,2019,J,article,x,F\nA,2020,J,article,y,F\nB,notayear,J,article,z,F\n",
    )
    .unwrap();
    let o = scindex(&["ingest", "--articles", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    let json_line = err.lines().find(|l| l.starts_with('{')).expect("json on stderr");
    let v: serde_json::Value = serde_json::from_str(json_line).unwrap();
    assert_eq!(v["status"], "invalid");
}

#[test]
fn correlate_by_field() {
    let out = stdout(&run_with(
        &[
            "correlate",
            "--window",
            "3",
            "--x",
            "citations",
            "--y",
            "quality_score",
            "--group-by",
            "field",
        ],
        &[],
    ));
    let (_, body) = split_header(&out);
    let rows: Vec<&str> = body.lines().skip(1).collect();
    let groups: Vec<&str> = rows.iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(groups, ["BIO", "CHEM", "PHYS"]);
    assert!(body.starts_with("group,method,n,rho,ci_low,ci_high,band,note\n"));
}

#[test]
fn every_output_has_header() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let units = fixture("units.csv").display().to_string();
    let outputs = [
        run_with(&["compute", "--indicator", "all"], &[]),
        run_with(&["compute", "--indicator", "jif", "--year", "2020"], &[]),
        run_with(&["compute", "--indicator", "pagerank"], &[]),
        run_with(&["aggregate", "units", "--units", &units], &[]),
        run_with(&["features", "--census-year", "2024"], &[]),
        run_with(&["correlate", "--x", "ncs", "--y", "pages"], &[]),
        scindex(&["simulate", "probmodel", "--seed", "3", "--trials", "200"]),
        scindex(&["simulate", "worked"]),
        scindex(&[
            "llm",
            "convert",
            "--scores",
            fixture("llm_scores.csv").to_str().unwrap(),
        ]),
    ];
    for o in &outputs {
        let text = stdout(o);
        let first = text.lines().next().unwrap();
        let ok = first.starts_with("# scindex 0.1.0 config=")
            || serde_json::from_str::<serde_json::Value>(&text)
                .map(|v| {
                    v["header"]
                        .as_str()
                        .is_some_and(|h| h.starts_with("scindex 0.1.0 config="))
                })
                .unwrap_or(false);
        assert!(ok, "no header in: {first}");
    }
    let stats = d.join("stats.csv");
    run_with(&["export", "--stats", stats.to_str().unwrap()], &[]);
    assert!(std::fs::read_to_string(stats).unwrap().starts_with("# scindex "));
}

fn synth_and_gain(dir: &Path, seed: &str) -> (Vec<u8>, Vec<u8>) {
    let corpus = dir.join("corpus");
    let spec = dir.join("spec.json");
    std::fs::write(&spec, r#"{"n_articles": 400, "n_units": 8}"#).unwrap();
    let o = scindex(
        &[
            "simulate",
            "corpus",
            "--spec",
            spec.to_str().unwrap(),
            "--seed",
            seed,
            "--out",
        ]
        .into_iter()
        .chain([corpus.to_str().unwrap()])
        .collect::<Vec<_>>(),
    );
    stdout(&o);
    let articles = std::fs::read(corpus.join("articles.jsonl")).unwrap();
    let gain = dir.join("gain.csv");
    let o = scindex(&[
        "aggregate",
        "gain",
        "--articles",
        corpus.join("articles.jsonl").to_str().unwrap(),
        "--edges",
        corpus.join("edges.csv").to_str().unwrap(),
        "--units",
        corpus.join("units.csv").to_str().unwrap(),
        "--seed",
        seed,
        "--iterations",
        "5",
        "--out",
        gain.to_str().unwrap(),
    ]);
    stdout(&o);
    (articles, std::fs::read(gain).unwrap())
}

#[test]
fn seeded_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let ra = synth_and_gain(a.path(), "11");
    let rb = synth_and_gain(b.path(), "11");
    let rc = synth_and_gain(c.path(), "12");
    assert_eq!(ra, rb);
    assert_ne!(ra.0, rc.0);
    assert!(String::from_utf8_lossy(&ra.1).contains("seed=11"));
}
