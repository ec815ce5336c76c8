use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use wifiprox::ingest::load_canonical;
use wifiprox::pairing::{load_pairs, PairingConfig};
use wifiprox::ProximityClass;

fn wifiprox(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wifiprox"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = wifiprox(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Value printed on a `key value` summary line.
fn printed(stdout: &str, key: &str) -> usize {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(key)?.strip_prefix(' ')?.split(' ').next()?.parse().ok())
        .unwrap_or_else(|| panic!("no {key:?} line in\n{stdout}"))
}

const SMALL_SITE: &str = "density = \"medium\"\nwidth_m = 12.0\ndepth_m = 8.0\nscans_per_burst = 9\n";

fn pipeline(dir: &Path) {
    fs::write(dir.join("site.toml"), SMALL_SITE).unwrap();
    ok(
        dir,
        &["synth", "--seed", "5", "--config", "site.toml", "--out", "fps.jsonl"],
    );
    ok(dir, &["pairs", "--fingerprints", "fps.jsonl", "--out", "pairs.jsonl"]);
    ok(
        dir,
        &[
            "featurize",
            "--fingerprints",
            "fps.jsonl",
            "--pairs",
            "pairs.jsonl",
            "--n-close",
            "300",
            "--n-far",
            "300",
            "--seed",
            "6",
            "--out",
            "features.csv",
        ],
    );
    ok(
        dir,
        &[
            "train",
            "--features",
            "features.csv",
            "--seed",
            "7",
            "--trees",
            "25",
            "--n-close",
            "200",
            "--n-far",
            "200",
            "--remainder-out",
            "eval.csv",
            "--out",
            "model.json",
        ],
    );
    ok(
        dir,
        &[
            "select",
            "--features",
            "features.csv",
            "--top-k",
            "5",
            "--out",
            "ranked.tsv",
        ],
    );
    ok(
        dir,
        &[
            "evaluate",
            "--model",
            "model.json",
            "--features",
            "eval.csv",
            "--out",
            "report.json",
        ],
    );
    ok(
        dir,
        &[
            "pr-curve",
            "--model",
            "model.json",
            "--features",
            "eval.csv",
            "--out",
            "pr.tsv",
        ],
    );
}

const ARTIFACTS: [&str; 8] = [
    "fps.jsonl",
    "pairs.jsonl",
    "features.csv",
    "model.json",
    "eval.csv",
    "ranked.tsv",
    "report.json",
    "pr.tsv",
];

#[test]
fn pipeline_is_complete_and_reproducible() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    pipeline(first.path());
    pipeline(second.path());
    for name in ARTIFACTS {
        let a = fs::read(first.path().join(name)).unwrap();
        assert!(!a.is_empty(), "{name} is empty");
        assert_eq!(
            a,
            fs::read(second.path().join(name)).unwrap(),
            "{name} differs between runs"
        );
    }
    for name in ["features.csv", "model.json", "report.json", "pr.tsv"] {
        let meta = format!("{name}.meta.json");
        let a = fs::read_to_string(first.path().join(&meta)).unwrap();
        assert_eq!(a, fs::read_to_string(second.path().join(&meta)).unwrap());
        assert!(a.contains("\"config_sha256\""));
    }
    let model = fs::read_to_string(first.path().join("model.json")).unwrap();
    assert!(model.contains("\"config_sha256\""));
    let pr = fs::read_to_string(first.path().join("pr.tsv")).unwrap();
    assert!(pr.starts_with("threshold\tprecision\trecall\n0\t"));
}

#[test]
fn printed_counts_match_pairs_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("site.toml"), SMALL_SITE).unwrap();
    ok(
        d,
        &["synth", "--seed", "1", "--config", "site.toml", "--out", "fps.jsonl"],
    );
    let out = ok(d, &["pairs", "--fingerprints", "fps.jsonl", "--out", "pairs.jsonl"]);
    let pairs = load_pairs(d.join("pairs.jsonl")).unwrap();
    let close = pairs.iter().filter(|p| p.label == ProximityClass::Close).count();
    assert_eq!(printed(&out, "close"), close);
    assert_eq!(printed(&out, "far"), pairs.len() - close);
    assert!(out.contains("# config sha256 "));
    assert!(out.contains("# input fps.jsonl sha256 "));
}

#[test]
fn sub_burst_pairs_follow_burst_arithmetic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("site.toml"), SMALL_SITE).unwrap();
    ok(
        d,
        &["synth", "--seed", "2", "--config", "site.toml", "--out", "fps.jsonl"],
    );
    let out = ok(
        d,
        &[
            "pairs",
            "--fingerprints",
            "fps.jsonl",
            "--sub-bursts",
            "--pseudo-out",
            "pseudo.jsonl",
            "--out",
            "pairs.jsonl",
        ],
    );

    // one position per burst; every burst yields two pseudo-fingerprints
    let fps = load_canonical(d.join("fps.jsonl")).unwrap();
    let mut bursts = BTreeMap::new();
    for f in &fps {
        bursts.insert(f.burst_id.clone().unwrap(), f.position);
    }
    let positions: Vec<_> = bursts.values().copied().collect();
    let cfg = PairingConfig::default();
    let (mut close, mut far) = (positions.len(), 0);
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let d = positions[i].distance(&positions[j]);
            if d <= cfg.close_max_m {
                close += 4;
            } else if d >= cfg.far_min_m && d <= cfg.far_max_m {
                far += 4;
            }
        }
    }
    assert_eq!(printed(&out, "pseudo-fingerprints"), 2 * positions.len());
    assert_eq!(
        load_canonical(d.join("pseudo.jsonl")).unwrap().len(),
        2 * positions.len()
    );
    assert_eq!((printed(&out, "close"), printed(&out, "far")), (close, far));
}

#[test]
fn generic_protocol_sampling_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--density", "low", "--seed", "4", "--out", "fps.jsonl"]);
    ok(d, &["pairs", "--fingerprints", "fps.jsonl", "--out", "pairs.jsonl"]);
    ok(
        d,
        &[
            "featurize",
            "--fingerprints",
            "fps.jsonl",
            "--pairs",
            "pairs.jsonl",
            "--n-close",
            "9000",
            "--n-far",
            "9000",
            "--seed",
            "1",
            "--out",
            "features.csv",
        ],
    );
    let out = ok(
        d,
        &[
            "train",
            "--features",
            "features.csv",
            "--seed",
            "2",
            "--trees",
            "10",
            "--n-close",
            "9000",
            "--n-far",
            "8000",
            "--out",
            "model.json",
        ],
    );
    assert_eq!(printed(&out, "training rows"), 17_000);
    assert_eq!((printed(&out, "close"), printed(&out, "far")), (9000, 8000));
}

#[test]
fn ingest_round_trips_and_reports_skips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("WAP001,WAP002,WAP003,LONGITUDE,LATITUDE,FLOOR\n");
    for i in 0..10 {
        if i == 3 || i == 7 {
            csv.push_str(&format!("100,100,100,{i},0,1\n"));
        } else {
            csv.push_str(&format!("-{},100,-70,{i},0,1\n", 40 + i));
        }
    }
    fs::write(d.join("wide.csv"), csv).unwrap();
    fs::write(
        d.join("wide.toml"),
        "dataset_id = \"tiny\"\nformat = \"wide_csv\"\npath = \"wide.csv\"\nfloor_column = \"FLOOR\"\n",
    )
    .unwrap();
    let out = ok(d, &["ingest", "--manifest", "wide.toml", "--out", "tiny.jsonl"]);
    assert_eq!(printed(&out, "records"), 8);
    assert_eq!(printed(&out, "skipped"), 2);

    let out = ok(d, &["ingest", "--canonical", "tiny.jsonl", "--out", "again.jsonl"]);
    assert_eq!(printed(&out, "records"), 8);
    assert_eq!(
        fs::read(d.join("tiny.jsonl")).unwrap(),
        fs::read(d.join("again.jsonl")).unwrap()
    );
}

#[test]
fn exit_codes_follow_error_family() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let out = wifiprox(d, &["ingest", "--canonical", "missing.jsonl", "--out", "x.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.jsonl"));

    fs::write(d.join("bad.jsonl"), "{not json}\n").unwrap();
    let out = wifiprox(d, &["ingest", "--canonical", "bad.jsonl", "--out", "x.jsonl"]);
    assert_eq!(out.status.code(), Some(3));

    fs::write(d.join("site.toml"), SMALL_SITE).unwrap();
    let out = wifiprox(
        d,
        &[
            "pairs",
            "--fingerprints",
            "site.toml",
            "--close-max-m",
            "5",
            "--far-min-m",
            "4",
            "--out",
            "p",
        ],
    );
    assert_eq!(out.status.code(), Some(4));

    let out = wifiprox(d, &["train", "--features", "f.csv", "--out", "m.json"]);
    assert_eq!(out.status.code(), Some(4), "missing --seed is a usage error");
}
