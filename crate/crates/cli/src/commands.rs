use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use wifiprox::features::{DistanceMode, FeatureConfig};
use wifiprox::ingest::{
    group_bursts, index_by_id, load_canonical, load_manifest_dataset, pseudo_fingerprints, save_canonical,
    DatasetManifest, SkipReport,
};
use wifiprox::metrics::{evaluate, pr_curve, pr_points_tsv};
use wifiprox::model::{load_model, save_model_with_metadata, train_ensemble, EnsembleConfig, DEFAULT_THRESHOLD};
use wifiprox::pairing::{
    enumerate_pairs, load_pairs, sample_training_set, save_pairs, ClassCounts, PairRecord, PairingConfig,
};
use wifiprox::selection::{mrmr_select, Discretization, MrmrConfig, MrmrPick};
use wifiprox::synth::{generate, Density, SynthConfig};
use wifiprox::table::{featurize, FeatureTable};
use wifiprox::{Error, FingerprintPair, Result};

use crate::repro::Run;

#[derive(Parser)]
#[command(name = "wifiprox", version, about = "Wi-Fi fingerprint proximity detection pipeline")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic survey as canonical fingerprints.
    Synth(SynthArgs),
    /// Convert a dataset (manifest or canonical file) to canonical fingerprints.
    Ingest(IngestArgs),
    /// Enumerate labeled Close/Far pairs per floor.
    Pairs(PairsArgs),
    /// Compute the feature table for a pairs file.
    Featurize(FeaturizeArgs),
    /// Train an attribute-bagged tree ensemble.
    Train(TrainArgs),
    /// Rank features with mRMR.
    Select(SelectArgs),
    /// Score a feature table and report confusion metrics.
    Evaluate(EvaluateArgs),
    /// Write precision-recall points for a feature table.
    PrCurve(PrCurveArgs),
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Ingest(a) => ingest(a),
        Command::Pairs(a) => pairs(a),
        Command::Featurize(a) => featurize_cmd(a),
        Command::Train(a) => train(a),
        Command::Select(a) => select(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::PrCurve(a) => pr_curve_cmd(a),
    }
}

// synth

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value = "medium")]
    density: Density,
    #[arg(long)]
    seed: u64,
    /// TOML file with generator parameters; replaces the density preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the AP count.
    #[arg(long)]
    aps: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str::<SynthConfig>(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => SynthConfig::with_density(a.density, a.seed),
    };
    cfg.seed = a.seed;
    if a.aps.is_some() {
        cfg.n_aps = a.aps;
    }
    let inputs: Vec<&Path> = a.config.iter().map(PathBuf::as_path).collect();
    let run = Run::start("synth", &cfg, &inputs)?;
    let site = generate(&cfg)?;
    save_canonical(&a.out, &site.fingerprints)?;
    let mean_aps = site.fingerprints.iter().map(|f| f.readings().len()).sum::<usize>() as f64
        / site.fingerprints.len().max(1) as f64;
    println!("fingerprints {}", site.fingerprints.len());
    println!("access points {}", cfg.ap_count());
    println!("mean APs per scan {mean_aps:.1}");
    run.finish(&a.out, &[])
}

// ingest

#[derive(Args)]
struct IngestArgs {
    /// Dataset manifest (TOML).
    #[arg(long, required_unless_present = "canonical", conflicts_with = "canonical")]
    manifest: Option<PathBuf>,
    /// Canonical fingerprint file (JSON lines).
    #[arg(long)]
    canonical: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn ingest(a: IngestArgs) -> Result<()> {
    let (fps, skips, run) = if let Some(m) = &a.manifest {
        let manifest = DatasetManifest::load(m)?;
        let run = Run::start(
            "ingest",
            &manifest_config(&manifest),
            &[m.as_path(), manifest.path.as_path()],
        )?;
        let (fps, skips) = load_manifest_dataset(&manifest)?;
        (fps, skips, run)
    } else {
        let c = a.canonical.as_ref().expect("clap enforces one source");
        let run = Run::start(
            "ingest",
            &serde_json::json!({ "format": "canonical_jsonl" }),
            &[c.as_path()],
        )?;
        let fps = load_canonical(c)?;
        let skips = SkipReport {
            rows_read: fps.len(),
            ..Default::default()
        };
        (fps, skips, run)
    };
    save_canonical(&a.out, &fps)?;
    let floors: std::collections::BTreeSet<_> = fps.iter().map(|f| &f.floor_key).collect();
    println!("records {}", fps.len());
    println!("floors {}", floors.len());
    println!(
        "skipped {} (empty {}, oversized {}, malformed {})",
        skips.skipped(),
        skips.empty,
        skips.oversized,
        skips.malformed
    );
    run.finish(&a.out, &[])
}

/// The manifest minus its data path, which is recorded as an input digest.
fn manifest_config(m: &DatasetManifest) -> serde_json::Value {
    let mut v = serde_json::to_value(m).expect("manifest serializes");
    if let Some(o) = v.as_object_mut() {
        o.remove("path");
    }
    v
}

// pairs

#[derive(Args)]
struct PairingArgs {
    #[arg(long, default_value_t = PairingConfig::default().close_max_m)]
    close_max_m: f64,
    #[arg(long, default_value_t = PairingConfig::default().far_min_m)]
    far_min_m: f64,
    #[arg(long, default_value_t = PairingConfig::default().far_max_m)]
    far_max_m: f64,
    /// Skip pairs whose scans come from the same burst.
    #[arg(long)]
    exclude_same_burst: bool,
}

impl PairingArgs {
    fn config(&self) -> PairingConfig {
        PairingConfig {
            close_max_m: self.close_max_m,
            far_min_m: self.far_min_m,
            far_max_m: self.far_max_m,
            exclude_same_burst: self.exclude_same_burst,
        }
    }
}

#[derive(Args)]
struct PairsArgs {
    #[arg(long)]
    fingerprints: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    pairing: PairingArgs,
    /// Pair pseudo-fingerprints built from the first two 4-scan sub-bursts
    /// of each burst instead of raw scans.
    #[arg(long, requires = "pseudo_out")]
    sub_bursts: bool,
    /// Where the pseudo-fingerprints are written in sub-burst mode.
    #[arg(long)]
    pseudo_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct PairsConfig {
    pairing: PairingConfig,
    sub_bursts: bool,
}

fn pairs(a: PairsArgs) -> Result<()> {
    let cfg = PairsConfig {
        pairing: a.pairing.config(),
        sub_bursts: a.sub_bursts,
    };
    cfg.pairing.validate()?;
    let run = Run::start("pairs", &cfg, &[a.fingerprints.as_path()])?;
    let mut fps = load_canonical(&a.fingerprints)?;
    let mut extra = Vec::new();
    if a.sub_bursts {
        let bursts = group_bursts(&fps)?;
        let (pseudo, short) = pseudo_fingerprints(&bursts);
        println!("bursts {} (too short {short})", bursts.len());
        println!("pseudo-fingerprints {}", pseudo.len());
        let out = a.pseudo_out.as_ref().expect("clap enforces --pseudo-out");
        save_canonical(out, &pseudo)?;
        extra.push(out.as_path());
        fps = pseudo;
    }
    let pairs = enumerate_pairs(&fps, &cfg.pairing);
    let records: Vec<PairRecord> = pairs.iter().map(PairRecord::from).collect();
    save_pairs(&a.out, &records)?;
    print_counts(ClassCounts::of(records.iter().map(|r| r.label)));
    run.finish(&a.out, &extra)
}

fn print_counts(c: ClassCounts) {
    println!("close {}", c.close);
    println!("far {}", c.far);
}

// featurize

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum DistanceChoice {
    /// Shared APs only.
    Shared,
    /// Union of APs, missing readings filled with --floor-dbm.
    Union,
}

#[derive(Args)]
struct SampleArgs {
    /// Close pairs to sample (requires --n-far and --seed).
    #[arg(long, requires_all = ["n_far", "seed"])]
    n_close: Option<usize>,
    #[arg(long, requires_all = ["n_close", "seed"])]
    n_far: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Serialize)]
struct Sampling {
    n_close: usize,
    n_far: usize,
    seed: u64,
}

impl SampleArgs {
    fn sampling(&self) -> Option<Sampling> {
        Some(Sampling {
            n_close: self.n_close?,
            n_far: self.n_far?,
            seed: self.seed?,
        })
    }
}

#[derive(Args)]
struct FeaturizeArgs {
    #[arg(long)]
    fingerprints: PathBuf,
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "shared")]
    distance_mode: DistanceChoice,
    #[arg(long, default_value_t = -100.0, allow_hyphen_values = true)]
    floor_dbm: f64,
    #[command(flatten)]
    sample: SampleArgs,
    /// Pairs left over after sampling, for later evaluation.
    #[arg(long, requires = "n_close")]
    remainder_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct FeaturizeConfig {
    features: FeatureConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sampling: Option<Sampling>,
}

fn featurize_cmd(a: FeaturizeArgs) -> Result<()> {
    let features = FeatureConfig {
        distance_mode: match a.distance_mode {
            DistanceChoice::Shared => DistanceMode::SharedOnly,
            DistanceChoice::Union => DistanceMode::UnionWithFloor { floor_dbm: a.floor_dbm },
        },
        ..FeatureConfig::default()
    };
    let cfg = FeaturizeConfig {
        features,
        seed: a.sample.seed,
        sampling: a.sample.sampling(),
    };
    let run = Run::start("featurize", &cfg, &[a.fingerprints.as_path(), a.pairs.as_path()])?;
    let fps = load_canonical(&a.fingerprints)?;
    let index = index_by_id(&fps)?;
    let mut records = load_pairs(&a.pairs)?;
    let mut extra = Vec::new();
    if let Some(s) = &cfg.sampling {
        let labels: Vec<_> = records.iter().map(|r| r.label).collect();
        let split = sample_training_set(&labels, s.n_close, s.n_far, s.seed)?;
        if let Some(rem) = &a.remainder_out {
            let rest: Vec<PairRecord> = split.remainder.iter().map(|&i| records[i].clone()).collect();
            save_pairs(rem, &rest)?;
            println!("remainder pairs {}", rest.len());
            extra.push(rem.as_path());
        }
        records = split.train.iter().map(|&i| records[i].clone()).collect();
    }
    let lookup = |id: &str| {
        index
            .get(id)
            .copied()
            .ok_or_else(|| Error::Validation(format!("pair references unknown fingerprint {id:?}")))
    };
    let pairs = records
        .iter()
        .map(|r| {
            Ok(FingerprintPair::new(
                lookup(&r.a)?,
                lookup(&r.b)?,
                r.distance_m,
                r.label,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let table = featurize(&pairs, &cfg.features);
    table.save(&a.out)?;
    println!("rows {}", table.len());
    println!("features {}", table.n_features());
    print_counts(table.class_counts());
    run.finish(&a.out, &extra)
}

// train

#[derive(Args)]
struct TrainArgs {
    /// Feature table; repeat to train on the concatenation of several.
    #[arg(long, required = true)]
    features: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Close rows to sample for training (default: all).
    #[arg(long, requires = "n_far")]
    n_close: Option<usize>,
    #[arg(long, requires = "n_close")]
    n_far: Option<usize>,
    #[arg(long, default_value_t = EnsembleConfig::default().n_estimators)]
    trees: usize,
    #[arg(long, default_value_t = EnsembleConfig::default().max_features)]
    max_features: usize,
    /// Train every tree on the full sample instead of a bootstrap draw.
    #[arg(long)]
    no_bootstrap: bool,
    /// Restrict the model to the top k mRMR features of the training sample.
    #[arg(long, conflicts_with = "feature_list")]
    top_k: Option<usize>,
    /// Restrict the model to the features named in a file (one per line, or
    /// the output of `select`).
    #[arg(long)]
    feature_list: Option<PathBuf>,
    /// Rows not sampled for training, as a feature table.
    #[arg(long, requires = "n_close")]
    remainder_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct TrainConfig {
    seed: u64,
    sampling: Option<ClassCounts>,
    ensemble: EnsembleConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    mrmr: Option<MrmrConfig>,
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = TrainConfig {
        seed: a.seed,
        sampling: a.n_close.zip(a.n_far).map(|(close, far)| ClassCounts { close, far }),
        ensemble: EnsembleConfig {
            n_estimators: a.trees,
            max_features: a.max_features,
            bootstrap: !a.no_bootstrap,
            seed: a.seed,
        },
        mrmr: a.top_k.map(|k| MrmrConfig {
            k,
            ..Default::default()
        }),
    };
    cfg.ensemble.validate()?;
    let mut inputs: Vec<&Path> = a.features.iter().map(PathBuf::as_path).collect();
    inputs.extend(a.feature_list.as_deref());
    let run = Run::start("train", &cfg, &inputs)?;
    let mut table = FeatureTable::load(&a.features[0])?;
    for path in &a.features[1..] {
        table.append(&FeatureTable::load(path)?)?;
    }
    let mut extra = Vec::new();
    let mut train = match cfg.sampling {
        Some(n) => {
            let split = sample_training_set(&table.labels, n.close, n.far, a.seed)?;
            if let Some(rem) = &a.remainder_out {
                table.subset(&split.remainder).save(rem)?;
                extra.push(rem.as_path());
            }
            table.subset(&split.train)
        }
        None => table,
    };
    if let Some(m) = &cfg.mrmr {
        let picks = mrmr_select(&train, m)?;
        let names: Vec<String> = picks.iter().map(|p| p.name.clone()).collect();
        println!("selected {}", names.join(" "));
        train = train.project(&names)?;
    } else if let Some(list) = &a.feature_list {
        train = train.project(&read_feature_list(list)?)?;
    }
    let model = train_ensemble(&train, &cfg.ensemble)?;
    let meta = BTreeMap::from([
        ("config_sha256".to_string(), run.config_sha256().to_string()),
        ("tool_version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ]);
    save_model_with_metadata(&model, &meta, &a.out)?;
    let fit = evaluate(&model, &train, DEFAULT_THRESHOLD, Some(0))?;
    println!("training rows {}", train.len());
    print_counts(train.class_counts());
    println!("features {}", train.n_features());
    println!("trees {}", model.trees.len());
    println!("training balanced accuracy {:.2}%", 100.0 * fit.balanced_accuracy);
    run.finish(&a.out, &extra)
}

fn read_feature_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty()).peekable();
    let ranked = lines.peek().is_some_and(|l| l.starts_with("rank\tname"));
    if ranked {
        lines.next();
    }
    let names: Vec<String> = lines
        .map(|l| {
            if ranked {
                l.split('\t').nth(1).unwrap_or("").to_string()
            } else {
                l.trim().to_string()
            }
        })
        .collect();
    if names.is_empty() || names.iter().any(String::is_empty) {
        return Err(Error::Config(format!("{}: no usable feature names", path.display())));
    }
    Ok(names)
}

// select

#[derive(Clone, Copy, ValueEnum)]
enum DiscretizationChoice {
    MeanSigma,
    EqualFrequency,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = MrmrConfig::default().k)]
    top_k: usize,
    #[arg(long, value_enum, default_value = "mean-sigma")]
    discretization: DiscretizationChoice,
    /// Width of the middle state in standard deviations (mean-sigma).
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Bin count (equal-frequency).
    #[arg(long, default_value_t = 10)]
    bins: usize,
}

fn select(a: SelectArgs) -> Result<()> {
    let cfg = MrmrConfig {
        k: a.top_k,
        discretization: match a.discretization {
            DiscretizationChoice::MeanSigma => Discretization::MeanPmSigma { alpha: a.alpha },
            DiscretizationChoice::EqualFrequency => Discretization::EqualFrequency { n: a.bins },
        },
    };
    cfg.validate()?;
    let run = Run::start("select", &cfg, &[a.features.as_path()])?;
    let table = FeatureTable::load(&a.features)?;
    let picks = mrmr_select(&table, &cfg)?;
    let text = ranked_tsv(&picks);
    fs::write(&a.out, &text).map_err(|e| Error::io(&a.out, e))?;
    print!("{text}");
    run.finish(&a.out, &[])
}

fn ranked_tsv(picks: &[MrmrPick]) -> String {
    let mut out = String::from("rank\tname\trelevance\tscore\n");
    for (i, p) in picks.iter().enumerate() {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", i + 1, p.name, p.relevance, p.score));
    }
    out
}

// evaluate / pr-curve

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// JSON report.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Evenly spaced PR thresholds in the report instead of every distinct score.
    #[arg(long)]
    pr_grid: Option<usize>,
    /// Also write the human-readable table here.
    #[arg(long)]
    text_out: Option<PathBuf>,
}

#[derive(Serialize)]
struct EvaluateConfig {
    threshold: f64,
    pr_grid: Option<usize>,
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    if !a.threshold.is_finite() {
        return Err(Error::Config(format!("threshold must be finite, got {}", a.threshold)));
    }
    let cfg = EvaluateConfig {
        threshold: a.threshold,
        pr_grid: a.pr_grid,
    };
    let run = Run::start("evaluate", &cfg, &[a.model.as_path(), a.features.as_path()])?;
    let model = load_model(&a.model)?;
    let table = FeatureTable::load(&a.features)?;
    let report = evaluate(&model, &table, a.threshold, a.pr_grid)?;
    fs::write(&a.out, report.to_json()).map_err(|e| Error::io(&a.out, e))?;
    let text = report.to_text();
    print!("{text}");
    let mut extra = Vec::new();
    if let Some(t) = &a.text_out {
        fs::write(t, &text).map_err(|e| Error::io(t, e))?;
        extra.push(t.as_path());
    }
    run.finish(&a.out, &extra)
}

#[derive(Args)]
struct PrCurveArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    features: PathBuf,
    /// Tab-separated points file.
    #[arg(long)]
    out: PathBuf,
    /// Evenly spaced thresholds instead of every distinct score.
    #[arg(long)]
    grid: Option<usize>,
}

fn pr_curve_cmd(a: PrCurveArgs) -> Result<()> {
    let run = Run::start(
        "pr-curve",
        &serde_json::json!({ "grid": a.grid }),
        &[a.model.as_path(), a.features.as_path()],
    )?;
    let model = load_model(&a.model)?;
    let table = FeatureTable::load(&a.features)?;
    let scores = model.score_table(&table)?;
    let points = pr_curve(&scores, &table.labels, a.grid)?;
    fs::write(&a.out, pr_points_tsv(&points)).map_err(|e| Error::io(&a.out, e))?;
    println!("points {}", points.len());
    run.finish(&a.out, &[])
}
