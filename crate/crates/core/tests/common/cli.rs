//! Helpers for driving the compiled binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

pub fn binary() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_surprise-rr"));
    cmd.env("SOURCE_DATE_EPOCH", "0")
        .env_remove("SURPRISE_RR_THREADS");
    cmd
}

pub fn run(args: &[&str], out: &Path) -> Output {
    binary()
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

pub fn run_threads(args: &[&str], out: &Path, threads: Option<usize>) -> Output {
    let mut cmd = binary();
    cmd.args(args).arg("--out").arg(out);
    if let Some(t) = threads {
        cmd.arg("--threads").arg(t.to_string());
    }
    cmd.output().expect("binary runs")
}

/// Every file in `dir`, by name.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (PathBuf::from(p.file_name().unwrap()), fs::read(&p).unwrap())
        })
        .collect()
}

pub fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Argument lists for the reports that must not depend on thread count.
pub fn determinism_runs() -> Vec<(&'static str, Vec<String>)> {
    let onom_a = fixture("onom_a.csv");
    vec![
        (
            "null",
            vec![
                "null".into(),
                "--onomasticon".into(),
                onom_a.clone(),
                "--assumptions".into(),
                fixture("assumptions_a.json"),
                "--cluster".into(),
                fixture("talpiyot_like.json"),
                "--sims".into(),
                "30000".into(),
                "--seed".into(),
                "19".into(),
            ],
        ),
        (
            "sweep",
            vec![
                "sweep".into(),
                "--onomasticon".into(),
                onom_a,
                "--assumptions".into(),
                fixture("sweep_desk_assumptions.json"),
                "--cluster".into(),
                fixture("sweep_desk_cluster.json"),
                "--variants".into(),
                fixture("sweep_desk_variants.json"),
                "--sims".into(),
                "20000".into(),
                "--seed".into(),
                "23".into(),
            ],
        ),
        (
            "bootstrap",
            vec![
                "bootstrap".into(),
                "--onomasticon".into(),
                fixture("onom_b.csv"),
                "--assumptions".into(),
                fixture("assumptions_b.json"),
                "--cluster".into(),
                fixture("cluster_b.json"),
                "--sims".into(),
                "5000".into(),
                "--replicates".into(),
                "40".into(),
                "--seed".into(),
                "29".into(),
            ],
        ),
    ]
}
