//! Command-line front end: `segment`, `eval` and `selfcheck`.
//!
//! Exit codes: 0 when everything succeeded, 1 when any image failed, 2 for
//! bad arguments. Training settings are resolved as flags over an optional
//! config file over [`TrainConfig::default`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{score, EvalReport, ImageScore};
use crate::graph::{PatchFeatureGrid, SelfLoops};
use crate::io::{read_features, read_mask, read_rgb, scan_dataset, write_mask, FEATURE_EXTENSION};
use crate::nn::{derive_seed, Activation, DecayMode};
use crate::pipeline::{segment_features, Provenance, RefineMode, TrainConfig};
use crate::selfcheck;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURES: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp", "ppm"];

#[derive(Debug, Parser)]
#[command(name = "patchseg", version, about = "Unsupervised binary segmentation from patch features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment every feature file and write `<stem>.png` plus `<stem>.json`.
    Segment(SegmentArgs),
    /// Score predicted masks against ground truth.
    Eval(EvalArgs),
    /// Run the built-in verification battery.
    Selfcheck,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Feature file or directory of `.unsg` files.
    #[arg(long, required_unless_present = "dataset", conflicts_with = "dataset")]
    pub features: Option<PathBuf>,
    /// Dataset root with images/, masks/ and features/.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Directory of RGB images used for edge refinement (matched by stem).
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML or JSON file with training settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Cosine similarity threshold [default: 0.5]
    #[arg(long)]
    pub tau: Option<f64>,
    /// Training epochs [default: 100]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Decoupled weight decay [default: 0.01]
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// How --weight-decay is applied: weight or learning-rate [default: weight]
    #[arg(long)]
    pub decay_mode: Option<DecayMode>,
    /// Number of clusters [default: 2]
    #[arg(long)]
    pub k: Option<usize>,
    /// silu, selu, gelu or relu [default: silu]
    #[arg(long)]
    pub activation: Option<Activation>,
    /// Base seed; each image uses a seed derived from it and the file stem [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent runs per image, lowest final loss kept [default: 1]
    #[arg(long)]
    pub restarts: Option<usize>,
    /// none or smooth [default: smooth]
    #[arg(long)]
    pub refine: Option<RefineMode>,
    /// strip or keep [default: strip]
    #[arg(long)]
    pub self_loops: Option<SelfLoops>,
    /// Worker threads [default: logical CPU count]
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of predicted masks.
    #[arg(long)]
    pub pred: PathBuf,
    /// Directory of ground-truth masks.
    #[arg(long)]
    pub gt: PathBuf,
    /// Where to write the JSON report.
    #[arg(long)]
    pub report: PathBuf,
}

impl SegmentArgs {
    /// Flags over the config file over defaults.
    pub fn resolve_config(&self) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => TrainConfig::default(),
        };
        macro_rules! overlay {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        overlay!(tau, epochs, lr, weight_decay, decay_mode, k, activation, seed, restarts, refine, self_loops);
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_config(path: &Path) -> Result<TrainConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "json" => Ok(serde_json::from_str(&text)?),
        "toml" => toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display()))),
        other => Err(Error::InvalidConfig(format!(
            "{}: config must be .toml or .json, got {other:?}",
            path.display()
        ))),
    }
}

/// Seed used for the image with this stem.
pub fn image_seed(base: u64, stem: &str) -> u64 {
    derive_seed(base, stem)
}

#[derive(Debug, Clone)]
pub struct SegmentJob {
    pub stem: String,
    pub features: PathBuf,
    pub image: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    stem: &'a str,
    features: String,
    image: Option<String>,
    width: usize,
    height: usize,
    foreground_pixels: usize,
    #[serde(flatten)]
    provenance: &'a Provenance,
}

fn stem_of(path: &Path) -> Option<String> {
    path.file_stem().and_then(|s| s.to_str()).map(str::to_owned)
}

fn files_with_ext(dir: &Path, exts: &[&str]) -> Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| exts.contains(&e.as_str())) {
            if let Some(stem) = stem_of(&path) {
                out.entry(stem).or_insert(path);
            }
        }
    }
    Ok(out)
}

fn collect_jobs(args: &SegmentArgs) -> Result<Vec<SegmentJob>> {
    if let Some(root) = &args.dataset {
        let scan = scan_dataset(root)?;
        let features_dir = root.join("features");
        return Ok(scan
            .items
            .into_iter()
            .map(|item| SegmentJob {
                features: item
                    .features
                    .unwrap_or_else(|| features_dir.join(format!("{}.{FEATURE_EXTENSION}", item.stem))),
                image: Some(item.image),
                stem: item.stem,
            })
            .collect());
    }
    let features = args.features.as_ref().expect("clap enforces --features or --dataset");
    let images = match &args.images {
        Some(dir) => files_with_ext(dir, IMAGE_EXTENSIONS)?,
        None => BTreeMap::new(),
    };
    let feature_files = if features.is_dir() {
        files_with_ext(features, &[FEATURE_EXTENSION])?
    } else {
        let stem = stem_of(features)
            .ok_or_else(|| Error::InvalidConfig(format!("{}: no file stem", features.display())))?;
        BTreeMap::from([(stem, features.clone())])
    };
    Ok(feature_files
        .into_iter()
        .map(|(stem, path)| SegmentJob {
            image: images.get(&stem).cloned(),
            features: path,
            stem,
        })
        .collect())
}

/// Segments one image and writes its mask and sidecar into `out`.
pub fn segment_job(job: &SegmentJob, cfg: &TrainConfig, out: &Path) -> Result<PathBuf> {
    let features: PatchFeatureGrid = read_features(&job.features)?;
    let image = job.image.as_ref().map(read_rgb).transpose()?;
    let per_image = TrainConfig {
        seed: image_seed(cfg.seed, &job.stem),
        ..cfg.clone()
    };
    let out_size = image.as_ref().map(|img| (img.width() as usize, img.height() as usize));
    let (mut mask, _) = segment_features(&features, &per_image, image.as_ref(), out_size)?;
    let provenance = mask.provenance.as_mut().expect("segment_features sets provenance");
    provenance.config.seed = cfg.seed;

    let mask_path = out.join(format!("{}.png", job.stem));
    write_mask(&mask, &mask_path)?;
    let sidecar = Sidecar {
        stem: &job.stem,
        features: job.features.display().to_string(),
        image: job.image.as_ref().map(|p| p.display().to_string()),
        width: mask.width(),
        height: mask.height(),
        foreground_pixels: mask.foreground_count(),
        provenance: mask.provenance.as_ref().expect("set above"),
    };
    let json_path = out.join(format!("{}.json", job.stem));
    fs::write(&json_path, serde_json::to_string_pretty(&sidecar)? + "\n").map_err(|e| Error::io(&json_path, e))?;
    Ok(mask_path)
}

fn usage_error(sub: &str, msg: &str) -> i32 {
    eprintln!("error: {msg}\n");
    let mut cmd = Cli::command();
    if let Some(sc) = cmd.find_subcommand_mut(sub) {
        eprintln!("{}", sc.render_usage());
    }
    EXIT_USAGE
}

pub fn cmd_segment(args: &SegmentArgs) -> i32 {
    let cfg = match args.resolve_config() {
        Ok(c) => c,
        Err(e) => return usage_error("segment", &e.to_string()),
    };
    if let Some(p) = args.features.as_ref().filter(|p| !p.exists()) {
        return usage_error("segment", &format!("{} does not exist", p.display()));
    }
    let jobs = match collect_jobs(args) {
        Ok(j) => j,
        Err(e) => return usage_error("segment", &e.to_string()),
    };
    if jobs.is_empty() {
        return usage_error("segment", "no feature files found");
    }
    if let Err(e) = fs::create_dir_all(&args.out) {
        eprintln!("error: {}: {e}", args.out.display());
        return EXIT_FAILURES;
    }
    let workers = args.workers.unwrap_or_else(default_workers).max(1);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return EXIT_FAILURES;
        }
    };
    let results: Vec<_> = pool.install(|| {
        jobs.par_iter()
            .map(|job| (job.stem.clone(), segment_job(job, &cfg, &args.out)))
            .collect()
    });
    let mut failed = 0;
    for (stem, result) in &results {
        match result {
            Ok(path) => log::info!("{stem}: wrote {}", path.display()),
            Err(e) => {
                failed += 1;
                eprintln!("failed: {stem}: {e}");
            }
        }
    }
    println!("segmented {} of {} images", results.len() - failed, results.len());
    if failed > 0 {
        EXIT_FAILURES
    } else {
        EXIT_OK
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

pub fn cmd_eval(args: &EvalArgs) -> i32 {
    for (flag, dir) in [("--pred", &args.pred), ("--gt", &args.gt)] {
        if !dir.is_dir() {
            return usage_error("eval", &format!("{flag} {} is not a directory", dir.display()));
        }
    }
    let report = match evaluate_dirs(&args.pred, &args.gt) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURES;
        }
    };
    if let Err(e) = report.write_json(&args.report) {
        eprintln!("error: {e}");
        return EXIT_FAILURES;
    }
    for f in &report.failures {
        eprintln!("failed: {}: {}", f.name, f.error);
    }
    match report.aggregate_miou {
        Some(m) => println!("aggregate mIoU: {m:.6} over {} images", report.images.len()),
        None => println!("aggregate mIoU: n/a (no image could be scored)"),
    }
    if report.has_failures() || report.images.is_empty() {
        EXIT_FAILURES
    } else {
        EXIT_OK
    }
}

/// Pairs `<pred>/<stem>.{png,pgm}` with `<gt>/<stem>.{png,pgm}` and scores
/// them. A missing or unreadable prediction is a failure for that stem. The
/// report's config is taken from the first prediction sidecar found.
pub fn evaluate_dirs(pred: &Path, gt: &Path) -> Result<EvalReport> {
    let gts = files_with_ext(gt, &["png", "pgm"])?;
    if gts.is_empty() {
        return Err(Error::EmptyDataset(gt.to_path_buf()));
    }
    let preds = files_with_ext(pred, &["png", "pgm"])?;
    let config = gts
        .keys()
        .find_map(|stem| fs::read_to_string(pred.join(format!("{stem}.json"))).ok())
        .and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok())
        .and_then(|v| v.get("config").cloned())
        .unwrap_or(serde_json::Value::Null);
    let scored: Vec<_> = gts
        .par_iter()
        .map(|(stem, gt_path)| {
            let result = preds
                .get(stem)
                .ok_or_else(|| "no predicted mask".to_owned())
                .and_then(|p| {
                    let p = read_mask(p).map_err(|e| e.to_string())?;
                    let g = read_mask(gt_path).map_err(|e| e.to_string())?;
                    score(&p, &g).map_err(|e| e.to_string())
                });
            (stem.clone(), result)
        })
        .collect();
    let mut report = EvalReport::new(config);
    for (name, result) in scored {
        match result {
            Ok(s) => report.push_score(ImageScore {
                name,
                miou: s.miou,
                iou_fg: s.iou_fg,
                iou_bg: s.iou_bg,
            }),
            Err(e) => report.push_failure(name, e),
        }
    }
    Ok(report)
}

pub fn cmd_selfcheck() -> i32 {
    let battery = selfcheck::run();
    print!("{}", battery.table());
    if battery.all_passed() {
        EXIT_OK
    } else {
        EXIT_FAILURES
    }
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match &cli.command {
        Command::Segment(a) => cmd_segment(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Selfcheck => cmd_selfcheck(),
    }
}

pub fn run() -> i32 {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    run_from(std::env::args_os())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn segment_help() -> String {
        let mut cmd = Cli::command();
        cmd.find_subcommand_mut("segment").unwrap().render_long_help().to_string()
    }

    #[test]
    fn help_defaults_match_config_defaults() {
        let d = TrainConfig::default();
        let help = segment_help();
        let expected = [
            ("--tau", d.tau.to_string()),
            ("--epochs", d.epochs.to_string()),
            ("--lr", d.lr.to_string()),
            ("--weight-decay", d.weight_decay.to_string()),
            ("--decay-mode", d.decay_mode.to_string()),
            ("--k", d.k.to_string()),
            ("--activation", d.activation.to_string()),
            ("--seed", d.seed.to_string()),
            ("--restarts", d.restarts.to_string()),
            ("--refine", d.refine.to_string()),
            ("--self-loops", d.self_loops.to_string()),
        ];
        for (flag, default) in expected {
            let start = help.find(&format!("{flag} <")).unwrap_or_else(|| panic!("{flag} missing from help"));
            let section = &help[start..];
            let end = section[2..].find("\n  -").map_or(section.len(), |i| i + 2);
            assert!(
                section[..end].contains(&format!("[default: {default}]")),
                "{flag} should document default {default}: {}",
                &section[..end]
            );
        }
        assert!(help.contains("--workers"));
    }

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, "epochs = 7\ntau = 0.3\n").unwrap();
        let cli = Cli::try_parse_from([
            "patchseg", "segment", "--features", "x.unsg", "--out", "o", "--config",
            path.to_str().unwrap(), "--tau", "0.6",
        ])
        .unwrap();
        let Command::Segment(args) = cli.command else { panic!() };
        let cfg = args.resolve_config().unwrap();
        assert_eq!(cfg.tau, 0.6);
        assert_eq!(cfg.epochs, 7);
        assert_eq!(cfg.lr, TrainConfig::default().lr);
    }

    #[test]
    fn json_config_and_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let good = dir.path().join("c.json");
        fs::write(&good, r#"{"k": 3, "activation": "gelu"}"#).unwrap();
        let cfg = load_config(&good).unwrap();
        assert_eq!((cfg.k, cfg.activation), (3, Activation::Gelu));
        let bad = dir.path().join("d.toml");
        fs::write(&bad, "epoch = 3\n").unwrap();
        assert!(load_config(&bad).is_err());
    }

    #[test]
    fn bad_arguments_exit_two() {
        assert_eq!(run_from(["patchseg", "segment", "--out", "o"]), EXIT_USAGE);
        assert_eq!(run_from(["patchseg", "segment", "--features", "f", "--out", "o", "--tau", "x"]), EXIT_USAGE);
        assert_eq!(run_from(["patchseg", "frobnicate"]), EXIT_USAGE);
    }

    #[test]
    fn image_seed_depends_on_stem() {
        assert_eq!(image_seed(0, "a"), image_seed(0, "a"));
        assert_ne!(image_seed(0, "a"), image_seed(0, "b"));
        assert_ne!(image_seed(0, "a"), image_seed(1, "a"));
    }
}
