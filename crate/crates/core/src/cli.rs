//! Command-line front end: `synth`, `extract`, `train`, `predict`, `evaluate`.
//!
//! Machine-readable results go to files; progress and confusion tables go to
//! the terminal. Every output file except the model file starts with `#`
//! comment lines echoing the effective [`RunConfig`].

use crate::classify::{
    predict, vote_fusion, FeatureMask, FeatureVector, Label, LabeledSample, SvmModel, SvmTrainer, FEATURE_ARITY,
    FEATURE_NAMES,
};
use crate::evaluate::{confusion, metrics_with, split_indices, ConfusionMatrix, Metrics, SpecificityFormula};
use crate::pgm::{emit_pgm, load_pgm, PgmFormat};
use crate::pipeline::{extract_features, FusionMode, RunConfig};
use crate::synth::{self, make_dataset};
use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "texfrac", version, about = "Fractal + GLCM texture features and linear SVM classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic two-class texture set as PGM files plus manifest.csv.
    Synth(SynthArgs),
    /// Extract the eight-feature descriptor of every manifest image.
    Extract(ExtractArgs),
    /// Train linear SVM model(s) on a features CSV.
    Train(TrainArgs),
    /// Label the rows of a features CSV with one model or a vote of several.
    Predict(PredictArgs),
    /// Split, train and report sensitivity / specificity / CCR per feature family.
    Evaluate(EvaluateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    #[arg(long, default_value_t = RunConfig::default().glcm_distance)]
    pub glcm_distance: u32,
    #[arg(long, default_value_t = RunConfig::default().glcm_levels)]
    pub glcm_levels: u16,
    /// Comma-separated box sides in pixels; powers of two when omitted.
    #[arg(long, value_delimiter = ',')]
    pub box_sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = RunConfig::default().holder_windows)]
    pub holder_windows: Vec<usize>,
    #[arg(long, default_value_t = RunConfig::default().spectrum_bins)]
    pub spectrum_bins: usize,
    #[arg(long, default_value_t = RunConfig::default().svm_c)]
    pub svm_c: f64,
    #[arg(long, default_value_t = RunConfig::default().svm_iterations)]
    pub svm_iterations: usize,
    #[arg(long, default_value_t = RunConfig::default().fusion_mode)]
    pub fusion_mode: FusionMode,
    #[arg(long, default_value_t = RunConfig::default().feature_mask)]
    pub feature_mask: FeatureMask,
    #[arg(long, default_value_t = RunConfig::default().seed)]
    pub seed: u64,
    #[arg(long, default_value_t = RunConfig::default().split_fraction)]
    pub split_fraction: f64,
}

impl Default for ConfigArgs {
    fn default() -> Self {
        Self::from(&RunConfig::default())
    }
}

impl From<&RunConfig> for ConfigArgs {
    fn from(c: &RunConfig) -> Self {
        Self {
            glcm_distance: c.glcm_distance,
            glcm_levels: c.glcm_levels,
            box_sizes: c.box_sizes.clone().unwrap_or_default(),
            holder_windows: c.holder_windows.clone(),
            spectrum_bins: c.spectrum_bins,
            svm_c: c.svm_c,
            svm_iterations: c.svm_iterations,
            fusion_mode: c.fusion_mode,
            feature_mask: c.feature_mask,
            seed: c.seed,
            split_fraction: c.split_fraction,
        }
    }
}

impl ConfigArgs {
    pub fn to_config(&self) -> RunConfig {
        RunConfig {
            glcm_distance: self.glcm_distance,
            glcm_levels: self.glcm_levels,
            box_sizes: (!self.box_sizes.is_empty()).then(|| self.box_sizes.clone()),
            holder_windows: self.holder_windows.clone(),
            spectrum_bins: self.spectrum_bins,
            svm_c: self.svm_c,
            svm_iterations: self.svm_iterations,
            fusion_mode: self.fusion_mode,
            feature_mask: self.feature_mask,
            seed: self.seed,
            split_fraction: self.split_fraction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// One class signal in roughness, one in stripe contrast.
    Fusion,
    /// Classes far apart in both roughness and stripe contrast.
    Separable,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Preset::Fusion)]
    pub preset: Preset,
    #[arg(long, default_value_t = 20)]
    pub n_per_class: usize,
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    #[arg(long, default_value_t = synth::FUSION_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory receiving one `<image>.loglog.csv` per image.
    #[arg(long)]
    pub loglog_dump: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Model path. Vote mode writes `<stem>.fractal.<ext>` and `<stem>.glcm.<ext>`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// One model, or several combined by vote.
    #[arg(long, required = true, num_args = 1..)]
    pub model: Vec<PathBuf>,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Add a specificity column computed as TN / (TN + FN).
    #[arg(long)]
    pub paper_eq2: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Extract(a) => cmd_extract(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
    }
}

fn comment_block(title: &str, config: Option<&RunConfig>) -> String {
    let mut out = format!("# texfrac {title}\n");
    if let Some(c) = config {
        for line in c.provenance() {
            let _ = writeln!(out, "# {line}");
        }
    }
    out
}

fn csv_reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes())
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: String,
    pub label: Label,
    pub kind: String,
    pub params: String,
}

pub fn manifest_csv(entries: &[ManifestEntry], header: &str) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["path", "label", "kind", "params"])?;
    for e in entries {
        w.write_record([e.path.as_str(), &e.label.to_string(), e.kind.as_str(), e.params.as_str()])?;
    }
    Ok(format!("{header}{}", String::from_utf8(w.into_inner()?)?))
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut rdr = csv_reader(text);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| anyhow!("manifest lacks a {name} column"));
    let (ip, il) = (col("path")?, col("label")?);
    let (ik, ipar) = (headers.iter().position(|h| h == "kind"), headers.iter().position(|h| h == "params"));
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("").to_string();
        let label = field(il).parse::<Label>().map_err(|e| anyhow!("manifest row {}: {e}", n + 1))?;
        out.push(ManifestEntry {
            path: field(ip),
            label,
            kind: ik.map(field).unwrap_or_default(),
            params: ipar.map(field).unwrap_or_default(),
        });
    }
    Ok(out)
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let (a, b) = match args.preset {
        Preset::Fusion => synth::fusion_templates(args.size),
        Preset::Separable => synth::separable_templates(args.size),
    };
    let data = make_dataset(&a, &b, args.n_per_class, args.seed)?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    let mut entries = Vec::with_capacity(data.len());
    for (i, sample) in data.iter().enumerate() {
        let class = if sample.label == Label::Normal { "a" } else { "b" };
        let name = format!("{class}_{i:03}.pgm");
        write_file(&args.out_dir.join(&name), &emit_pgm(&sample.image, PgmFormat::Binary))?;
        entries.push(ManifestEntry {
            path: name,
            label: sample.label,
            kind: sample.spec.kind_name().to_string(),
            params: sample.spec.params(),
        });
    }
    let preset = format!("{:?}", args.preset).to_lowercase();
    let header = format!(
        "# texfrac manifest\n# preset={preset}\n# n_per_class={}\n# size={}\n# seed={}\n",
        args.n_per_class, args.size, args.seed
    );
    write_file(&args.out_dir.join("manifest.csv"), manifest_csv(&entries, &header)?.as_bytes())?;
    eprintln!("wrote {} images to {}", data.len(), args.out_dir.display());
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub path: String,
    pub label: Label,
    pub features: FeatureVector,
}

/// Features CSV: comment header, then `path,label,<8 features>`. An undefined
/// correlation is an empty cell.
pub fn features_csv(rows: &[FeatureRow], config: &RunConfig) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["path", "label"];
    header.extend(FEATURE_NAMES);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.path.clone(), r.label.to_string()];
        for (k, v) in r.features.values().iter().enumerate() {
            if k == 5 && !r.features.correlation_defined() {
                rec.push(String::new());
            } else {
                rec.push(v.to_string());
            }
        }
        w.write_record(&rec)?;
    }
    Ok(format!("{}{}", comment_block("features", Some(config)), String::from_utf8(w.into_inner()?)?))
}

pub fn parse_features(text: &str) -> Result<Vec<FeatureRow>> {
    let mut rdr = csv_reader(text);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| anyhow!("features CSV lacks a {name} column"));
    let ip = col("path")?;
    let il = col("label")?;
    let cols: Vec<usize> = FEATURE_NAMES.iter().map(|n| col(n)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = n + 1;
        let label = rec.get(il).unwrap_or("").parse::<Label>().map_err(|e| anyhow!("features row {row}: {e}"))?;
        let mut values = [0.0; FEATURE_ARITY];
        let mut correlation_defined = true;
        for (k, &c) in cols.iter().enumerate() {
            let cell = rec.get(c).unwrap_or("");
            if k == 5 && cell.is_empty() {
                correlation_defined = false;
                continue;
            }
            values[k] = cell
                .parse()
                .map_err(|_| anyhow!("features row {row}: column {} holds {cell:?}", FEATURE_NAMES[k]))?;
        }
        let features = FeatureVector::new(values, correlation_defined).map_err(|e| anyhow!("features row {row}: {e}"))?;
        out.push(FeatureRow { path: rec.get(ip).unwrap_or("").to_string(), label, features });
    }
    Ok(out)
}

/// Extracts features for every manifest entry, in manifest order. Returns the
/// successful rows and the per-file failures.
pub fn extract_manifest(
    manifest: &Path,
    config: &RunConfig,
    loglog_dump: Option<&Path>,
) -> Result<(Vec<FeatureRow>, Vec<String>)> {
    let entries = parse_manifest(&read_text(manifest)?)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    if let Some(dir) = loglog_dump {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let results: Vec<Result<FeatureRow>> = entries
        .par_iter()
        .map(|e| {
            let path = base.join(&e.path);
            let bytes = fs::read(&path).with_context(|| format!("{}: read failed", path.display()))?;
            let img = load_pgm(&bytes).with_context(|| format!("{}: invalid PGM", path.display()))?;
            let f = extract_features(&img, config).with_context(|| format!("{}: extraction failed", path.display()))?;
            if let Some(dir) = loglog_dump {
                let stem = Path::new(&e.path).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                write_file(&dir.join(format!("{stem}.loglog.csv")), f.box_dimension.to_csv().as_bytes())?;
            }
            Ok(FeatureRow { path: e.path.clone(), label: e.label, features: f.vector })
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(format!("{e:#}")),
        }
    }
    Ok((rows, failures))
}

pub fn cmd_extract(args: &ExtractArgs) -> Result<()> {
    let config = args.config.to_config();
    let (rows, failures) = extract_manifest(&args.manifest, &config, args.loglog_dump.as_deref())?;
    write_file(&args.out, features_csv(&rows, &config)?.as_bytes())?;
    for f in &failures {
        eprintln!("error: {f}");
    }
    if !failures.is_empty() {
        bail!("{} of {} images failed", failures.len(), failures.len() + rows.len());
    }
    eprintln!("extracted {} feature rows to {}", rows.len(), args.out.display());
    Ok(())
}

fn samples(rows: &[FeatureRow]) -> Vec<LabeledSample> {
    rows.iter().map(|r| LabeledSample { features: r.features, label: r.label }).collect()
}

fn trainer(config: &RunConfig) -> SvmTrainer {
    SvmTrainer { iterations: config.svm_iterations, ..SvmTrainer::new(config.svm_c) }
}

/// Early fusion trains one model on `config.feature_mask`; vote mode trains
/// the fractal and GLCM families separately.
pub fn train_models(rows: &[FeatureRow], config: &RunConfig) -> Result<Vec<SvmModel>> {
    let data = samples(rows);
    let masks: &[FeatureMask] = match config.fusion_mode {
        FusionMode::Early => std::slice::from_ref(&config.feature_mask),
        FusionMode::Vote => &[FeatureMask::Fractal, FeatureMask::Glcm],
    };
    masks.iter().map(|&m| trainer(config).fit(&data, m).map_err(Into::into)).collect()
}

fn family_path(out: &Path, mask: FeatureMask) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    let name = match out.extension() {
        Some(ext) => format!("{stem}.{mask}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{mask}"),
    };
    out.with_file_name(name)
}

/// Paths `cmd_train` writes for the given mode.
pub fn model_paths(out: &Path, mode: FusionMode) -> Vec<PathBuf> {
    match mode {
        FusionMode::Early => vec![out.to_path_buf()],
        FusionMode::Vote => vec![family_path(out, FeatureMask::Fractal), family_path(out, FeatureMask::Glcm)],
    }
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let config = args.config.to_config();
    let rows = parse_features(&read_text(&args.features)?)?;
    let models = train_models(&rows, &config)?;
    for (model, path) in models.iter().zip(model_paths(&args.out, config.fusion_mode)) {
        write_file(&path, model.to_text().as_bytes())?;
        eprintln!("wrote {} model to {}", model.mask(), path.display());
    }
    Ok(())
}

/// One model predicts directly; several are combined with [`vote_fusion`].
pub fn predict_rows(models: &[SvmModel], rows: &[FeatureRow]) -> Result<Vec<(Label, f64)>> {
    rows.iter()
        .map(|r| {
            let decisions: Vec<(Label, f64)> =
                models.iter().map(|m| predict(m, &r.features)).collect::<Result<_, _>>()?;
            if decisions.len() == 1 {
                Ok(decisions[0])
            } else {
                Ok(vote_fusion(&decisions)?)
            }
        })
        .collect()
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let models: Vec<SvmModel> = args
        .model
        .iter()
        .map(|p| SvmModel::from_text(&read_text(p)?).with_context(|| format!("{}: invalid model", p.display())))
        .collect::<Result<_>>()?;
    let rows = parse_features(&read_text(&args.features)?)?;
    let preds = predict_rows(&models, &rows)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["path", "label", "predicted", "score"])?;
    for (r, (label, score)) in rows.iter().zip(&preds) {
        w.write_record([r.path.clone(), r.label.to_string(), label.to_string(), score.to_string()])?;
    }
    let body = String::from_utf8(w.into_inner()?)?;
    write_file(&args.out, format!("{}{body}", comment_block("predictions", None)).as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationResult {
    pub method: &'static str,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    /// Specificity as `TN / (TN + FN)`.
    pub specificity_eq2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub rows: Vec<AblationResult>,
}

impl EvaluationReport {
    pub fn get(&self, method: &str) -> Option<&AblationResult> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_csv(&self, config: &RunConfig, with_eq2: bool) -> Result<String> {
        let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.4}"));
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["method", "sensitivity", "specificity", "ccr"];
        if with_eq2 {
            header.push("specificity_eq2");
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.method.to_string(),
                fmt(r.metrics.sensitivity),
                fmt(r.metrics.specificity),
                fmt(Some(r.metrics.ccr)),
            ];
            if with_eq2 {
                rec.push(fmt(r.specificity_eq2));
            }
            w.write_record(&rec)?;
        }
        Ok(format!("{}{}", comment_block("metrics", Some(config)), String::from_utf8(w.into_inner()?)?))
    }
}

fn ablation(method: &'static str, truth: &[Label], predicted: &[Label]) -> Result<AblationResult> {
    let cm = confusion(truth, predicted)?;
    Ok(AblationResult {
        method,
        confusion: cm,
        metrics: metrics_with(&cm, SpecificityFormula::Standard)?,
        specificity_eq2: metrics_with(&cm, SpecificityFormula::TnOverTnPlusFn)?.specificity,
    })
}

/// Stratified split by `config.seed`, then fractal-only, GLCM-only and
/// combined classifiers scored on the held-out side. The combined row is an
/// eight-feature SVM in early mode and a vote of the two family models in
/// vote mode.
pub fn evaluate_rows(rows: &[FeatureRow], config: &RunConfig) -> Result<EvaluationReport> {
    let labels: Vec<Label> = rows.iter().map(|r| r.label).collect();
    let (train_idx, test_idx) = split_indices(&labels, config.split_fraction, config.seed)?;
    let train: Vec<FeatureRow> = train_idx.iter().map(|&i| rows[i].clone()).collect();
    let test: Vec<FeatureRow> = test_idx.iter().map(|&i| rows[i].clone()).collect();
    let truth: Vec<Label> = test.iter().map(|r| r.label).collect();
    let data = samples(&train);
    let t = trainer(config);

    let fractal = t.fit(&data, FeatureMask::Fractal)?;
    let glcm = t.fit(&data, FeatureMask::Glcm)?;
    let labels_of = |p: Vec<(Label, f64)>| p.into_iter().map(|d| d.0).collect::<Vec<_>>();
    let fractal_pred = labels_of(predict_rows(std::slice::from_ref(&fractal), &test)?);
    let glcm_pred = labels_of(predict_rows(std::slice::from_ref(&glcm), &test)?);
    let combined_pred = match config.fusion_mode {
        FusionMode::Early => labels_of(predict_rows(&[t.fit(&data, FeatureMask::Combined)?], &test)?),
        FusionMode::Vote => labels_of(predict_rows(&[fractal.clone(), glcm.clone()], &test)?),
    };
    Ok(EvaluationReport {
        rows: vec![
            ablation("fractal", &truth, &fractal_pred)?,
            ablation("glcm", &truth, &glcm_pred)?,
            ablation("combined", &truth, &combined_pred)?,
        ],
    })
}

/// The file-writing half of `evaluate`, without terminal output.
pub fn write_evaluation(args: &EvaluateArgs) -> Result<EvaluationReport> {
    let config = args.config.to_config();
    let rows = parse_features(&read_text(&args.features)?)?;
    let report = evaluate_rows(&rows, &config)?;
    write_file(&args.out, report.to_csv(&config, args.paper_eq2)?.as_bytes())?;
    Ok(report)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let report = write_evaluation(args)?;
    for r in &report.rows {
        let pct = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.2}%"));
        println!(
            "{}: sensitivity {}, specificity {}, CCR {:.2}%",
            r.method,
            pct(r.metrics.sensitivity),
            pct(r.metrics.specificity),
            r.metrics.ccr
        );
        if args.paper_eq2 {
            println!("  specificity TN/(TN+FN): {}", pct(r.specificity_eq2));
        }
        println!("{}\n", r.confusion);
    }
    Ok(())
}
