//! Replays the fuzz corpus seeds through the parsers they target.

use std::path::PathBuf;
use std::str::FromStr;

use profex::gp::{read_model, write_model};
use profex::pipeline::{parse_doe, ProjectionSpec, RunConfig};

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn model_seeds() {
    let parsed: Vec<_> = seeds("model_file").into_iter().filter_map(|(_, t)| read_model(&t).ok()).collect();
    assert!(!parsed.is_empty());
    for m in parsed {
        read_model(&write_model(&m)).unwrap();
    }
}

#[test]
fn config_seeds() {
    for (name, text) in seeds("run_config") {
        let res = RunConfig::from_toml(&text);
        assert_eq!(res.is_ok(), !name.starts_with("bad"), "{name}: {res:?}");
    }
}

#[test]
fn doe_seeds() {
    for (name, text) in seeds("doe_csv") {
        match parse_doe(&text, None) {
            Ok(d) => assert!(d.x.iter().flatten().all(|v| (0.0..=1.0).contains(v)), "{name}"),
            Err(e) => assert_eq!(name, "ragged.csv", "{e}"),
        }
    }
}

#[test]
fn projection_seeds() {
    for (name, text) in seeds("projection_spec") {
        let spec = ProjectionSpec::from_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(ProjectionSpec::from_str(&spec.to_string()).unwrap(), spec);
    }
}
