use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use boostcd::catalog::Catalog;
use boostcd::decoding::{TableEntry, TableSpec};
use boostcd::vocab::Special;
use tempfile::TempDir;

const DATA: &str = r#"{"id":"1","text":"Carol Douglas works at PepsiCo, maker of Pepsi.","triplets":[["Carol Douglas","employer","PepsiCo"],["PepsiCo","product or material produced","Pepsi"]]}
{"id":"2","text":"PepsiCo makes Pepsi.","triplets":[["PepsiCo","product or material produced","Pepsi"]]}
{"id":"3","text":"Nothing to see.","triplets":[]}
"#;

const PEPSI: &str = "[s] PepsiCo [r] product or material produced [o] Pepsi [e]";

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    /// Catalog, dataset, an n-gram scorer, and a table scorer `memo.json`
    /// that emits one fixed linearization whatever the prompt.
    fn new() -> Self {
        let f = Fixture {
            dir: TempDir::new().unwrap(),
        };
        f.write("ents.txt", "PepsiCo\nPepsi\nCarol Douglas\n");
        f.write("rels.txt", "employer\nproduct or material produced\n");
        f.write("data.jsonl", DATA);
        f.write("lines.txt", &format!("{PEPSI}\n"));
        f.ok(&[
            "catalog",
            "build",
            "--entities",
            "ents.txt",
            "--relations",
            "rels.txt",
            "--dataset",
            "data.jsonl",
            "--out",
            "cat.json",
        ]);
        f.ok(&[
            "scorer",
            "fit-ngram",
            "--order",
            "8",
            "--train",
            "lines.txt",
            "--catalog",
            "cat.json",
            "--out",
            "ng.json",
        ]);
        f.write(
            "memo.json",
            &memorizing_table(&Catalog::load(&f.path("cat.json")).unwrap(), PEPSI),
        );
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, content: &str) {
        fs::write(self.path(name), content).unwrap();
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.path(name)).unwrap()
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_boostcd"))
            .args(args)
            .current_dir(self.dir.path())
            .env_remove("BOOSTCD_CATALOG")
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out
    }
}

fn memorizing_table(catalog: &Catalog, target: &str) -> String {
    let vocab = catalog.vocab();
    let ids = vocab.encode_marked(target).unwrap();
    let entries = (0..=ids.len())
        .map(|i| {
            let next = ids.get(i).copied().unwrap_or(Special::Eos.id());
            TableEntry {
                prompt: None,
                context: vocab.raw(&ids[..i]),
                dist: [(vocab.token(next).unwrap().to_owned(), 1.0)].into(),
            }
        })
        .collect();
    serde_json::to_string(&TableSpec {
        floor: 1e-6,
        default: Default::default(),
        entries,
    })
    .unwrap()
}

fn lines(path: &Path) -> Vec<serde_json::Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn decode_prints_linearization_and_trace() {
    let f = Fixture::new();
    f.write("x.txt", "PepsiCo makes Pepsi.\n");
    let out = f.ok(&[
        "decode",
        "--scorer",
        "memo.json",
        "--catalog",
        "cat.json",
        "--prompt-file",
        "x.txt",
        "--constrained",
        "--beams",
        "10",
        "--trace",
        "trace.json",
    ]);
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim_end(), PEPSI);
    let trace: serde_json::Value = serde_json::from_str(&f.read("trace.json")).unwrap();
    let hyps = trace["hypotheses"].as_array().unwrap();
    assert_eq!(hyps[0]["text"], PEPSI);
    assert_eq!(hyps[0]["parse"]["triplets"][0][1], "product or material produced");
    assert_eq!(trace["config"]["beams"], 10);
    // the fitted n-gram file loads and decodes too
    f.ok(&[
        "decode",
        "--scorer",
        "ng.json",
        "--catalog",
        "cat.json",
        "--prompt",
        "PepsiCo",
        "--top",
        "2",
    ]);
}

#[test]
fn eval_twice_gives_identical_reports() {
    let f = Fixture::new();
    f.write(
        "pred.jsonl",
        r#"{"id":"1","triplets":[["PepsiCo","product or material produced","Pepsi"],["Pepsi","employer","PepsiCo"]]}
{"id":"2","triplets":[["PepsiCo","product or material produced","Pepsi"]]}
"#,
    );
    f.write(
        "counts.tsv",
        "relation\tcount\nemployer\t3\nproduct or material produced\t12\n",
    );
    let args = |out: &str, csv: &str| {
        f.ok(&[
            "eval",
            "--pred",
            "pred.jsonl",
            "--gold",
            "data.jsonl",
            "--counts",
            "counts.tsv",
            "--boot",
            "50",
            "--seed",
            "7",
            "--out",
            out,
            "--csv",
            csv,
        ])
    };
    args("a.json", "a.csv");
    args("b.json", "b.csv");
    assert_eq!(f.read("a.json"), f.read("b.json"));
    assert_eq!(f.read("a.csv"), f.read("b.csv"));
    let report: serde_json::Value = serde_json::from_str(&f.read("a.json")).unwrap();
    // 2 of 3 predictions correct, 2 of 3 gold triplets found
    let micro = &report["micro"];
    assert!((micro["precision"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!((micro["recall"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!(report["macro"]["f1"].is_number());
    assert_eq!(report["buckets"]["buckets"].as_array().unwrap().len(), 2);
}

#[test]
fn curate_without_seed_names_the_flag() {
    let f = Fixture::new();
    let out = f.run(&["curate", "--in", "data.jsonl", "--out", "c.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
    assert!(!f.path("c.jsonl").exists());
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let f = Fixture::new();
    for sub in [
        "catalog",
        "scorer",
        "decode",
        "phase1",
        "assemble",
        "build-train",
        "curate",
        "infer",
        "eval",
        "buckets",
        "dpo-prep",
        "report",
    ] {
        assert_eq!(f.run(&[sub, "--help"]).status.code(), Some(0), "{sub} --help");
    }
    assert_eq!(f.run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        f.run(&["curate", "--in", "missing.jsonl", "--out", "o.jsonl", "--seed", "1"])
            .status
            .code(),
        Some(1)
    );
    f.write("bad.jsonl", "{\"id\": 1}\n");
    let out = f.run(&["curate", "--in", "bad.jsonl", "--out", "o.jsonl", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("line 1"),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        f.run(&[
            "curate",
            "--in",
            "data.jsonl",
            "--out",
            "o.jsonl",
            "--seed",
            "1",
            "--fraction",
            "2"
        ])
        .status
        .code(),
        Some(1)
    );
    let out = f.run(&[
        "curate",
        "--in",
        "data.jsonl",
        "--out",
        "no/such/dir/o.jsonl",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pipeline_stages_agree() {
    let f = Fixture::new();
    f.ok(&[
        "curate",
        "--in",
        "data.jsonl",
        "--out",
        "cur.jsonl",
        "--fraction",
        "0.5",
        "--seed",
        "4",
    ]);
    let curated = lines(&f.path("cur.jsonl"));
    assert_eq!(curated.len(), 3);
    assert!(f.path("cur.jsonl.config.json").exists());

    f.ok(&[
        "phase1",
        "--in",
        "cur.jsonl",
        "--scorer",
        "memo.json",
        "--catalog",
        "cat.json",
        "--out",
        "weak.jsonl",
    ]);
    f.ok(&[
        "assemble",
        "--weak",
        "weak.jsonl",
        "--catalog",
        "cat.json",
        "--out",
        "train_a.jsonl",
    ]);
    for jobs in ["1", "3"] {
        f.ok(&[
            "build-train",
            "--in",
            "cur.jsonl",
            "--scorer",
            "memo.json",
            "--catalog",
            "cat.json",
            "--out",
            "train_b.jsonl",
            "--jobs",
            jobs,
        ]);
        assert_eq!(f.read("train_a.jsonl"), f.read("train_b.jsonl"));
    }
    for (record, weak) in lines(&f.path("train_a.jsonl")).iter().zip(lines(&f.path("weak.jsonl"))) {
        let input = record["input_text"].as_str().unwrap();
        assert!(input.starts_with("[TEXT] "));
        assert!(input.find("[UNC]").unwrap() < input.find("[CON]").unwrap());
        assert!(input.contains(weak["unconstrained_text"].as_str().unwrap()));
        // removed entities never survive constrained decoding
        for e in weak["removed_entities"].as_array().unwrap() {
            for t in weak["constrained"].as_array().unwrap() {
                assert!(t[0] != *e && t[2] != *e);
            }
        }
    }

    for mode in ["constrained", "unconstrained"] {
        f.ok(&[
            "infer",
            "--base",
            "memo.json",
            "--boosted",
            "memo.json",
            "--catalog",
            "cat.json",
            "--in",
            "data.jsonl",
            "--out",
            "pred.jsonl",
            "--final-mode",
            mode,
        ]);
        let preds = lines(&f.path("pred.jsonl"));
        assert_eq!(preds.len(), 3);
        assert_eq!(preds[0]["triplets"][0][0], "PepsiCo");
    }
    f.ok(&[
        "eval",
        "--pred",
        "pred.jsonl",
        "--gold",
        "data.jsonl",
        "--seed",
        "1",
        "--out",
        "r.json",
    ]);
}

#[test]
fn report_renders_tables_and_chart() {
    let f = Fixture::new();
    f.write(
        "pred.jsonl",
        r#"{"id":"2","triplets":[["PepsiCo","product or material produced","Pepsi"]]}"#,
    );
    f.write("counts.tsv", "employer\t1\nproduct or material produced\t5\n");
    f.ok(&[
        "buckets",
        "--pred",
        "pred.jsonl",
        "--gold",
        "data.jsonl",
        "--counts",
        "counts.tsv",
        "--seed",
        "3",
        "--out",
        "b.json",
    ]);
    f.ok(&["report", "--buckets", "b.json", "--csv", "b.csv", "--svg", "b.svg"]);
    let table = f.read("b.csv");
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("0,1,1,1,"));
    assert!(rows[2].starts_with("2,4,7,1,1,0.5,0.6666666666666"), "{}", rows[2]);
    assert!(f.read("b.svg").starts_with("<svg"));

    f.write(
        "ann.jsonl",
        "{\"sample_id\":\"1\",\"errors\":[\"Unrelated\",\"Unexhaustive\"]}\n{\"sample_id\":\"2\",\"errors\":[]}\n",
    );
    assert_eq!(f.run(&["report", "--annotations", "ann.jsonl"]).status.code(), Some(1));
    f.ok(&[
        "report",
        "--annotations",
        "ann.jsonl",
        "--seed",
        "9",
        "--errors-csv",
        "e.csv",
    ]);
    let errors = f.read("e.csv");
    assert!(errors.contains("Unrelated,0.5,"));
    assert!(errors.contains("EntityCentered,0,0,0"));
}

#[test]
fn dpo_prep_splits_and_keeps_judged_pairs() {
    let f = Fixture::new();
    f.write(
        "a.jsonl",
        r#"{"id":"1","triplets":[["PepsiCo","product or material produced","Pepsi"]]}
{"id":"2","triplets":[["PepsiCo","product or material produced","Pepsi"]]}
{"id":"3","triplets":[]}
"#,
    );
    f.write(
        "b.jsonl",
        r#"{"id":"1","triplets":[["Carol Douglas","employer","PepsiCo"]]}
{"id":"2","triplets":[]}
{"id":"3","triplets":[]}
"#,
    );
    f.write(
        "rules.json",
        r#"{"rules":{"2":"PreferB","3":"PreferA"},"default":"PreferA"}"#,
    );
    f.write(
        "real.json",
        r#"{"scores":{"PepsiCo makes Pepsi.":0.9,"Carol Douglas works at PepsiCo, maker of Pepsi.":0.8},"default":0.1}"#,
    );
    f.ok(&[
        "dpo-prep",
        "--in",
        "data.jsonl",
        "--catalog",
        "cat.json",
        "--pred-a",
        "a.jsonl",
        "--pred-b",
        "b.jsonl",
        "--name-a",
        "genie",
        "--name-b",
        "synthie",
        "--judge-rules",
        "rules.json",
        "--realness",
        "real.json",
        "--train-size",
        "1",
        "--val-size",
        "2",
        "--out-train",
        "train.jsonl",
        "--out-val",
        "val.jsonl",
    ]);
    let train = lines(&f.path("train.jsonl"));
    assert_eq!(train.len(), 1);
    assert_eq!(train[0]["id"], "2");
    assert_eq!(train[0]["prompt"], "PepsiCo makes Pepsi.");
    assert_eq!(train[0]["chosen"], "");
    assert_eq!(train[0]["chosen_provider"], "synthie");
    // sample 3 has identical candidates and is dropped
    let val = lines(&f.path("val.jsonl"));
    assert_eq!(val.len(), 1);
    assert_eq!(val[0]["id"], "1");
    assert_eq!(val[0]["chosen"], PEPSI);

    let out = f.run(&[
        "dpo-prep",
        "--in",
        "data.jsonl",
        "--catalog",
        "cat.json",
        "--pred-a",
        "a.jsonl",
        "--pred-b",
        "b.jsonl",
        "--judge-rules",
        "rules.json",
        "--train-size",
        "3",
        "--val-size",
        "1",
        "--out-train",
        "t.jsonl",
        "--out-val",
        "v.jsonl",
    ]);
    assert_eq!(out.status.code(), Some(1));
}
