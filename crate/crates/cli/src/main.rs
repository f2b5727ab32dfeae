//! `fuselage`: synthesize data, train, run inference, cross-validate and time
//! the patch-based fuselage defect detector.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fuselage_core::dataset::{group_kfold, FoldPlan};
use fuselage_core::features::{load_embeddings, EmbeddingStore, FeatureKind};
use fuselage_core::image::{BinaryMask, RgbImage};
use fuselage_core::manifest::{read_manifest, save_dataset};
use fuselage_core::pipeline::{
    benchmark, cross_validate, draw_overlay, evaluate_mask, export_patches, infer, load_model, read_defect_map,
    train_pipeline, write_defect_map, write_metrics_csv, Mode, ModelArtifact, PipelineConfig,
};
use fuselage_core::synth::{generate_dataset, DefectKind, SynthConfig};
use fuselage_core::Error;

#[derive(Debug, Parser)]
#[command(name = "fuselage", version, about = "Patch-based fuselage defect detection")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalArgs {
    /// Seed for data generation, balancing, fold assignment and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    patch_size: Option<usize>,
    #[arg(long, global = true, value_parser = parse_feature)]
    feature: Option<FeatureKind>,
    /// Embeddings manifest for `--feature external`.
    #[arg(long, global = true)]
    embeddings: Option<PathBuf>,
    #[arg(long, global = true, value_parser = parse_mode)]
    mode: Option<Mode>,
    /// Intensity-variation threshold for neighbour expansion (0-255 scale).
    #[arg(long, global = true)]
    iv_threshold: Option<f64>,
    /// Hessian response threshold of the keypoint gate.
    #[arg(long, global = true)]
    surf_threshold: Option<f64>,
    /// Blur sigma used in unwashed mode.
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Force neighbour expansion on or off instead of following the mode.
    #[arg(long, global = true)]
    expand: Option<bool>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its manifest.
    Synth(SynthArgs),
    /// Train a model from a manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Detect defects in one image; writes an overlay PNG and a JSON defect map.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        overlay: PathBuf,
        #[arg(long = "map")]
        map: PathBuf,
    },
    /// Grouped k-fold cross-validation of patch classification.
    Cv {
        #[arg(long)]
        manifest: PathBuf,
        /// Fold count; ignored when the manifest assigns folds.
        #[arg(long, default_value_t = 10)]
        folds: usize,
        /// Per-fold metrics as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Time gated against full-grid inference on one image.
    Bench {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        image: PathBuf,
        /// Write the timing JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a defect map against a ground-truth mask.
    Eval {
        #[arg(long = "map")]
        map: PathBuf,
        #[arg(long)]
        mask: PathBuf,
    },
    /// Write the labeled and augmented training patches as PNGs.
    ExportPatches {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Scratch,
    Dent,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    images: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1024)]
    width: usize,
    #[arg(long, default_value_t = 1024)]
    height: usize,
    /// Defects per image.
    #[arg(long, default_value_t = 2)]
    defects: usize,
    #[arg(long, value_delimiter = ',', default_value = "scratch,dent")]
    kinds: Vec<KindArg>,
    /// Unmarked dirt speckle, 0 = freshly washed.
    #[arg(long, default_value_t = 0.0)]
    dirt: f64,
    /// Record a round-robin fold assignment with this many folds in the manifest.
    #[arg(long)]
    folds: Option<usize>,
}

fn parse_feature(s: &str) -> Result<FeatureKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type CliResult<T> = Result<T, Failure>;

impl GlobalArgs {
    /// Training-time configuration: defaults overridden by every given flag.
    fn train_config(&self) -> CliResult<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Some(p) = self.patch_size {
            cfg.patch_size = p;
        }
        if let Some(f) = self.feature {
            cfg.feature = f;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.train.seed = seed;
        }
        self.apply_runtime(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Inference configuration: the model's own settings, with runtime flags
    /// applied. Flags that would change the descriptor must match the model.
    fn infer_config(&self, artifact: &ModelArtifact) -> CliResult<PipelineConfig> {
        let mut cfg = artifact.config.clone();
        if let Some(p) = self.patch_size.filter(|&p| p != cfg.patch_size) {
            return Err(Failure::Usage(format!(
                "--patch-size {p} does not match the model's patch size {}",
                cfg.patch_size
            )));
        }
        if let Some(f) = self.feature.filter(|&f| f != cfg.feature) {
            return Err(Failure::Usage(format!(
                "--feature {f} does not match the model's feature {}",
                cfg.feature
            )));
        }
        self.apply_runtime(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_runtime(&self, cfg: &mut PipelineConfig) {
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(t) = self.iv_threshold {
            cfg.iv_threshold = t;
        }
        if let Some(t) = self.surf_threshold {
            cfg.detector.threshold = t;
        }
        if let Some(s) = self.sigma {
            cfg.sigma = s;
        }
        if self.expand.is_some() {
            cfg.expand = self.expand;
        }
    }

    fn embeddings(&self, feature: FeatureKind) -> CliResult<Option<EmbeddingStore>> {
        match (&self.embeddings, feature) {
            (Some(path), _) => Ok(Some(load_embeddings(path)?)),
            (None, FeatureKind::External) => Err(Failure::Usage(
                "--feature external requires --embeddings <manifest>".into(),
            )),
            (None, _) => Ok(None),
        }
    }
}

fn image_id(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "image".to_string(), |s| s.to_string_lossy().into_owned())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::Io {
            path: parent.into(),
            source: e,
        })?;
    }
    fs::write(path, text).map_err(|e| {
        Failure::Core(Error::Io {
            path: path.into(),
            source: e,
        })
    })
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report types serialize") + "\n"
}

fn synth(global: &GlobalArgs, args: &SynthArgs) -> CliResult<()> {
    let cfg = SynthConfig {
        width: args.width,
        height: args.height,
        defect_count: args.defects,
        kinds: args
            .kinds
            .iter()
            .map(|k| match k {
                KindArg::Scratch => DefectKind::Scratch,
                KindArg::Dent => DefectKind::Dent,
            })
            .collect(),
        dirt_level: args.dirt,
        seed: global.seed.unwrap_or(SynthConfig::default().seed),
        ..SynthConfig::default()
    };
    let samples = generate_dataset(&cfg, args.images)?;
    let folds: Option<Vec<usize>> = match args.folds {
        Some(0) => return Err(Failure::Usage("--folds must be positive".into())),
        Some(k) => Some((0..samples.len()).map(|i| i % k).collect()),
        None => None,
    };
    let manifest = save_dataset(&samples, &args.out, folds.as_deref())?;
    println!("wrote {} images to {}", samples.len(), manifest.display());
    Ok(())
}

fn cv(global: &GlobalArgs, manifest_path: &Path, k: usize, csv: Option<&Path>) -> CliResult<()> {
    let cfg = global.train_config()?;
    let embeddings = global.embeddings(cfg.feature)?;
    let manifest = read_manifest(manifest_path)?;
    let plan = if !manifest.is_empty() && manifest.records.iter().all(|r| r.fold.is_some()) {
        let assignment: BTreeMap<String, usize> = manifest
            .records
            .iter()
            .map(|r| (r.id.clone(), r.fold.unwrap_or(0)))
            .collect();
        let k = assignment.values().max().map_or(0, |m| m + 1);
        FoldPlan::from_assignment(k, assignment)?
    } else {
        group_kfold(&manifest.ids(), k, cfg.seed)?
    };
    let samples = manifest.load_samples()?;
    let report = cross_validate(&samples, &plan, &cfg, embeddings.as_ref())?;
    print!("{}", report.to_table());
    if let Some(path) = csv {
        write_metrics_csv(&report, path)?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let g = &cli.global;
    match &cli.command {
        Command::Synth(args) => synth(g, args),
        Command::Train { manifest, model } => {
            let cfg = g.train_config()?;
            let embeddings = g.embeddings(cfg.feature)?;
            let artifact = train_pipeline(manifest, &cfg, embeddings.as_ref(), model)?;
            let r = artifact.model.report;
            println!(
                "trained {} model: {} epochs, duality gap {:.3e}, converged {}",
                cfg.feature, r.epochs, r.duality_gap, r.converged
            );
            Ok(())
        }
        Command::Infer {
            model,
            image,
            overlay,
            map,
        } => {
            let artifact = load_model(model)?;
            let cfg = g.infer_config(&artifact)?;
            let embeddings = g.embeddings(cfg.feature)?;
            let img = RgbImage::load_png(image)?;
            let defects = infer(&artifact.model, &image_id(image), &img, &cfg, embeddings.as_ref())?;
            draw_overlay(&img, &defects)?.save_png(overlay)?;
            write_defect_map(&defects, map)?;
            println!("{} defect patches of {}", defects.defect_count(), defects.entries().len());
            Ok(())
        }
        Command::Cv { manifest, folds, csv } => cv(g, manifest, *folds, csv.as_deref()),
        Command::Bench { model, image, out } => {
            let artifact = load_model(model)?;
            let cfg = g.infer_config(&artifact)?;
            let embeddings = g.embeddings(cfg.feature)?;
            let img = RgbImage::load_png(image)?;
            let timing = benchmark(&artifact.model, &image_id(image), &img, &cfg, embeddings.as_ref())?;
            match out {
                Some(path) => write_text(path, &json(&timing)),
                None => {
                    print!("{}", json(&timing));
                    Ok(())
                }
            }
        }
        Command::Eval { map, mask } => {
            let defects = read_defect_map(map)?;
            let mask = BinaryMask::load_png(mask)?;
            print!("{}", json(&evaluate_mask(&defects, &mask)?));
            Ok(())
        }
        Command::ExportPatches { manifest, out } => {
            let cfg = g.train_config()?;
            let samples = read_manifest(manifest)?.load_samples()?;
            let n = export_patches(&samples, &cfg, out)?;
            println!("wrote {n} patches to {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 1 })
        }
    }
}
