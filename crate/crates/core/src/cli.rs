//! Command-line front end: `fit`, `eval`, `cv` and `grid`.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::adversary::{adversarial_accuracy, AttackReport};
use crate::data::openml::{DatasetRef, OpenMlClient};
use crate::data::{load_csv, parse_arff, stratified_kfold, ArffOptions, CsvOptions, Dataset, FeatureKind, Scaler};
use crate::threat_model::{AttackedClasses, ThreatModel};
use crate::tree::{fit, FitParams, Tree};
use crate::{Error, Result};

/// Environment variable naming the openML cache directory.
pub const CACHE_ENV: &str = "ROBUST_TREE_CACHE";

#[derive(Debug, Parser)]
#[command(name = "robust-tree", version, about = "Fit and attack decision trees that are robust to bounded perturbations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a tree and write the model file.
    Fit(FitArgs),
    /// Accuracy and adversarial accuracy of a saved model.
    Eval(EvalArgs),
    /// Stratified cross-validation of a robust tree against a natural one.
    Cv(CvArgs),
    /// Predictions on a regular grid over two features, as CSV.
    Grid(GridArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DataArgs {
    /// CSV (header row) or ARFF file.
    #[arg(long, conflicts_with = "openml", required_unless_present = "openml")]
    pub data: Option<PathBuf>,
    /// openML dataset id, name, or name:version.
    #[arg(long)]
    pub openml: Option<String>,
    /// Label column of a CSV file (name or index); ARFF defaults to the target attribute.
    #[arg(long)]
    pub label_col: Option<String>,
    /// Comma-separated categorical CSV columns.
    #[arg(long, value_delimiter = ',')]
    pub categorical: Vec<String>,
    #[arg(long, default_value = ",")]
    pub delimiter: char,
    /// Label value mapped to 1 when the target has more than two values.
    #[arg(long)]
    pub positive_class: Option<String>,
    /// Drop ARFF rows with missing values.
    #[arg(long)]
    pub drop_missing: bool,
    /// openML cache directory (default: $ROBUST_TREE_CACHE or ./openml-cache).
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ThreatArgs {
    /// One token per feature, comma separated, e.g. "0.1,<>,(0,0.2),{0,1}".
    #[arg(long, conflicts_with_all = ["threat_file", "epsilon"])]
    pub threat: Option<String>,
    /// JSON threat model file.
    #[arg(long, conflicts_with = "epsilon")]
    pub threat_file: Option<PathBuf>,
    /// Symmetric perturbation of this size on every feature.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Labels the attacker controls, e.g. "0,1" or "1".
    #[arg(long, value_delimiter = ',')]
    pub attacked_classes: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitOptions {
    #[arg(long, default_value_t = 4)]
    pub max_depth: usize,
    #[arg(long, default_value_t = 2)]
    pub min_samples_split: usize,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fit on raw feature values instead of scaling them to [0, 1].
    #[arg(long)]
    pub no_scale: bool,
}

impl FitOptions {
    fn params(&self) -> FitParams {
        FitParams {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            rho: self.rho,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub threat: ThreatArgs,
    #[command(flatten)]
    pub fit: FitOptions,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the summary document here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub threat: ThreatArgs,
    /// Write the per-sample attack report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CvArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub threat: ThreatArgs,
    #[command(flatten)]
    pub fit: FitOptions,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Write the document here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print a plain-text table instead of JSON.
    #[arg(long)]
    pub table: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Points per axis.
    #[arg(long, default_value_t = 100)]
    pub grid_resolution: usize,
    /// Feature on the x axis; required unless the model has two features.
    #[arg(long)]
    pub x_feature: Option<usize>,
    #[arg(long)]
    pub y_feature: Option<usize>,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Fit(a) => cmd_fit(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Grid(a) => cmd_grid(a),
    }
}

pub fn load_data(args: &DataArgs) -> Result<Dataset> {
    let arff_options = ArffOptions {
        target: args.label_col.clone(),
        drop_missing: args.drop_missing,
        positive: args.positive_class.clone(),
    };
    if let Some(spec) = &args.openml {
        let cache = args
            .cache_dir
            .clone()
            .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("openml-cache"));
        let dataset: DatasetRef = spec.parse()?;
        return OpenMlClient::new(cache).load(&dataset, &arff_options);
    }
    let path = args
        .data
        .as_ref()
        .ok_or_else(|| Error::InvalidParam("one of --data or --openml is required".into()))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("arff")) {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        return parse_arff(&text, &arff_options);
    }
    if !args.delimiter.is_ascii() {
        return Err(Error::InvalidParam(format!("delimiter {:?} is not ASCII", args.delimiter)));
    }
    let options = CsvOptions {
        label_column: args.label_col.clone().unwrap_or_else(|| "label".into()),
        categorical: args.categorical.clone(),
        delimiter: args.delimiter as u8,
    };
    load_csv(path, &options)
}

pub fn resolve_threat(args: &ThreatArgs, n_features: usize) -> Result<ThreatModel> {
    let attacked = match &args.attacked_classes {
        Some(labels) => Some(AttackedClasses::from_labels(labels)?),
        None => None,
    };
    let threat = if let Some(inline) = &args.threat {
        ThreatModel::parse_inline(inline, attacked.unwrap_or(AttackedClasses::BOTH))?
    } else if let Some(path) = &args.threat_file {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let model = ThreatModel::from_json(&text)?;
        match attacked {
            Some(a) => ThreatModel::new(model.perturbations().to_vec(), a)?,
            None => model,
        }
    } else if let Some(eps) = args.epsilon {
        let uniform = ThreatModel::uniform(n_features, eps)?;
        ThreatModel::new(uniform.perturbations().to_vec(), attacked.unwrap_or(AttackedClasses::BOTH))?
    } else {
        ThreatModel::null(n_features)
    };
    if threat.len() != n_features {
        return Err(Error::ThreatArity {
            expected: n_features,
            got: threat.len(),
        });
    }
    Ok(threat)
}

/// Resolved inputs of a run, embedded in every output document.
#[derive(Debug, Serialize)]
struct RunConfig<'a, A: Serialize> {
    command: &'static str,
    args: &'a A,
    threat: Vec<String>,
    attacked_classes: Vec<u8>,
    threat_digest: String,
    seed: u64,
}

fn run_config<'a, A: Serialize>(command: &'static str, args: &'a A, threat: &ThreatModel, seed: u64) -> RunConfig<'a, A> {
    RunConfig {
        command,
        args,
        threat: threat.tokens(),
        attacked_classes: threat.attacked_classes().labels(),
        threat_digest: threat.digest(),
        seed,
    }
}

fn emit(doc: &impl Serialize, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(doc)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn validate_threat(threat: &ThreatModel, data: &Dataset) -> Result<()> {
    threat.validate_for(&data.categorical_mask())
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub depth: usize,
    pub nodes: usize,
    pub leaves: usize,
    pub train_accuracy: f64,
    pub train_adversarial_accuracy: f64,
    pub fit_seconds: f64,
}

/// Scales (unless disabled), fits and times one tree.
pub fn fit_scaled(data: &Dataset, threat: &ThreatModel, params: &FitParams, scale: bool) -> Result<(Tree, Dataset, f64)> {
    let (train, scaler) = if scale {
        let scaler = Scaler::fit(data);
        (scaler.transform(data), Some(scaler))
    } else {
        (data.clone(), None)
    };
    let start = Instant::now();
    let mut tree = fit(&train, threat, params)?;
    let seconds = start.elapsed().as_secs_f64();
    tree.scaler = scaler;
    Ok((tree, train, seconds))
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let params = args.fit.params();
    params.validate()?;
    let data = load_data(&args.data)?;
    let threat = resolve_threat(&args.threat, data.n_features())?;
    validate_threat(&threat, &data)?;
    let (tree, train, fit_seconds) = fit_scaled(&data, &threat, &params, !args.fit.no_scale)?;
    tree.save(&args.out)?;
    let attack = adversarial_accuracy(&tree, &train, &threat)?;
    let summary = FitSummary {
        depth: tree.depth(),
        nodes: tree.root.n_nodes(),
        leaves: tree.root.n_leaves(),
        train_accuracy: attack.accuracy,
        train_adversarial_accuracy: attack.adversarial_accuracy,
        fit_seconds,
    };
    #[derive(Serialize)]
    struct Doc<'a> {
        config: RunConfig<'a, FitArgs>,
        summary: FitSummary,
    }
    let doc = Doc {
        config: run_config("fit", args, &threat, params.seed),
        summary,
    };
    if let Some(path) = &args.report {
        emit(&doc, Some(path))?;
    }
    emit(&doc, None)
}

/// Applies the model's scaler, if any, to raw data.
pub fn prepare_for(tree: &Tree, data: &Dataset) -> Result<Dataset> {
    if data.n_features() != tree.n_features() {
        return Err(Error::SampleArity {
            expected: tree.n_features(),
            got: data.n_features(),
        });
    }
    Ok(match &tree.scaler {
        Some(scaler) => scaler.transform(data),
        None => data.clone(),
    })
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let tree = Tree::load(&args.model)?;
    let data = load_data(&args.data)?;
    let threat = resolve_threat(&args.threat, data.n_features())?;
    validate_threat(&threat, &data)?;
    let prepared = prepare_for(&tree, &data)?;
    let report = adversarial_accuracy(&tree, &prepared, &threat)?;
    #[derive(Serialize)]
    struct Doc<'a> {
        config: RunConfig<'a, EvalArgs>,
        accuracy: f64,
        adversarial_accuracy: f64,
    }
    if let Some(path) = &args.report {
        emit(&report, Some(path))?;
    }
    emit(
        &Doc {
            config: run_config("eval", args, &threat, tree.params.seed),
            accuracy: report.accuracy,
            adversarial_accuracy: report.adversarial_accuracy,
        },
        None,
    )
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FoldScores {
    pub accuracy: f64,
    pub adversarial_accuracy: f64,
    pub fit_seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub robust: FoldScores,
    pub natural: FoldScores,
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MeanStd { mean, std: var.sqrt() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub accuracy: MeanStd,
    pub adversarial_accuracy: MeanStd,
    pub fit_seconds: MeanStd,
}

impl ModelSummary {
    fn of(scores: &[FoldScores]) -> ModelSummary {
        let pick = |f: fn(&FoldScores) -> f64| MeanStd::of(&scores.iter().map(f).collect::<Vec<_>>());
        ModelSummary {
            accuracy: pick(|s| s.accuracy),
            adversarial_accuracy: pick(|s| s.adversarial_accuracy),
            fit_seconds: pick(|s| s.fit_seconds),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub robust: ModelSummary,
    pub natural: ModelSummary,
}

/// Stratified k-fold evaluation of a tree fitted against `threat` and a
/// tree fitted without a threat model, both attacked with `threat`. Test
/// folds are scaled with statistics of their training folds only.
pub fn cross_validate(data: &Dataset, threat: &ThreatModel, params: &FitParams, folds: usize, scale: bool) -> Result<CvReport> {
    params.validate()?;
    validate_threat(threat, data)?;
    let plan = stratified_kfold(data.labels(), folds, params.seed)?;
    let null = ThreatModel::null(data.n_features());
    let mut results = Vec::with_capacity(folds);
    for k in 0..plan.k() {
        let (train_idx, test_idx) = plan.split(k);
        let train = data.subset(&train_idx);
        let test = data.subset(&test_idx);
        let score = |model_threat: &ThreatModel| -> Result<FoldScores> {
            let (tree, _, fit_seconds) = fit_scaled(&train, model_threat, params, scale)?;
            let report: AttackReport = adversarial_accuracy(&tree, &prepare_for(&tree, &test)?, threat)?;
            Ok(FoldScores {
                accuracy: report.accuracy,
                adversarial_accuracy: report.adversarial_accuracy,
                fit_seconds,
            })
        };
        let robust = score(threat)?;
        let natural = score(&null)?;
        results.push(FoldResult {
            fold: k,
            train_size: train_idx.len(),
            test_size: test_idx.len(),
            robust,
            natural,
        });
    }
    let robust: Vec<FoldScores> = results.iter().map(|r| r.robust).collect();
    let natural: Vec<FoldScores> = results.iter().map(|r| r.natural).collect();
    Ok(CvReport {
        robust: ModelSummary::of(&robust),
        natural: ModelSummary::of(&natural),
        folds: results,
    })
}

fn cmd_cv(args: &CvArgs) -> Result<()> {
    let params = args.fit.params();
    params.validate()?;
    let data = load_data(&args.data)?;
    let threat = resolve_threat(&args.threat, data.n_features())?;
    let report = cross_validate(&data, &threat, &params, args.folds, !args.fit.no_scale)?;
    if args.table {
        let text = render_table(&report);
        return match &args.out {
            Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
            None => {
                print!("{text}");
                Ok(())
            }
        };
    }
    #[derive(Serialize)]
    struct Doc<'a> {
        config: RunConfig<'a, CvArgs>,
        rows: usize,
        features: usize,
        #[serde(flatten)]
        report: CvReport,
    }
    emit(
        &Doc {
            config: run_config("cv", args, &threat, params.seed),
            rows: data.n_rows(),
            features: data.n_features(),
            report,
        },
        args.out.as_deref(),
    )
}

pub fn render_table(report: &CvReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<6} {:>16} {:>16} {:>16} {:>16} {:>10} {:>10}\n",
        "fold", "robust acc", "robust adv acc", "natural acc", "natural adv acc", "robust s", "natural s"
    ));
    for f in &report.folds {
        out.push_str(&format!(
            "{:<6} {:>16.3} {:>16.3} {:>16.3} {:>16.3} {:>10.3} {:>10.3}\n",
            f.fold,
            f.robust.accuracy,
            f.robust.adversarial_accuracy,
            f.natural.accuracy,
            f.natural.adversarial_accuracy,
            f.robust.fit_seconds,
            f.natural.fit_seconds
        ));
    }
    let ms = |m: MeanStd| format!("{:.3} ± {:.3}", m.mean, m.std);
    out.push_str(&format!(
        "{:<6} {:>16} {:>16} {:>16} {:>16} {:>10.3} {:>10.3}\n",
        "mean",
        ms(report.robust.accuracy),
        ms(report.robust.adversarial_accuracy),
        ms(report.natural.accuracy),
        ms(report.natural.adversarial_accuracy),
        report.robust.fit_seconds.mean,
        report.natural.fit_seconds.mean
    ));
    out
}

/// `(x, y, label)` rows on a `resolution × resolution` grid placed at the
/// cell centres of the two features' ranges. Other numerical features sit
/// at the middle of their range; categorical ones take category 0.
pub fn prediction_grid(tree: &Tree, resolution: usize, fx: usize, fy: usize) -> Result<Vec<(f64, f64, u8)>> {
    if resolution == 0 {
        return Err(Error::InvalidParam("grid resolution must be positive".into()));
    }
    let n = tree.n_features();
    for f in [fx, fy] {
        if f >= n {
            return Err(Error::FeatureIndex { index: f, count: n });
        }
        if tree.features[f].kind.is_categorical() {
            return Err(Error::InvalidParam(format!("grid feature {f} is categorical")));
        }
    }
    let base: Vec<f64> = tree
        .features
        .iter()
        .map(|f| match f.kind {
            FeatureKind::Numerical => 0.5 * (f.range.0 + f.range.1),
            FeatureKind::Categorical { .. } => 0.0,
        })
        .collect();
    let at = |f: usize, k: usize| {
        let (lo, hi) = tree.features[f].range;
        lo + (k as f64 + 0.5) / resolution as f64 * (hi - lo)
    };
    let mut rows = Vec::with_capacity(resolution * resolution);
    for j in 0..resolution {
        for i in 0..resolution {
            let mut sample = base.clone();
            sample[fx] = at(fx, i);
            sample[fy] = at(fy, j);
            rows.push((sample[fx], sample[fy], tree.leaf(&sample).predicted_label()));
        }
    }
    Ok(rows)
}

fn cmd_grid(args: &GridArgs) -> Result<()> {
    let tree = Tree::load(&args.model)?;
    let (fx, fy) = match (args.x_feature, args.y_feature) {
        (Some(x), Some(y)) => (x, y),
        (None, None) if tree.n_features() == 2 => (0, 1),
        _ => {
            return Err(Error::InvalidParam(format!(
                "the model has {} features; pass --x-feature and --y-feature",
                tree.n_features()
            )))
        }
    };
    let rows = prediction_grid(&tree, args.grid_resolution, fx, fy)?;
    let mut text = String::from("x,y,label\n");
    for (x, y, label) in rows {
        text.push_str(&format!("{x},{y},{label}\n"));
    }
    match &args.out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::splitter::SplitRule;
    use crate::tree::{DecisionNode, Leaf, Node};

    fn stump() -> Tree {
        let features = (0..2)
            .map(|j| crate::data::FeatureInfo {
                name: format!("f{j}"),
                kind: FeatureKind::Numerical,
                range: (0.0, 1.0),
            })
            .collect();
        Tree {
            root: Node::Split(DecisionNode {
                feature: 0,
                rule: SplitRule::Threshold(0.5),
                left: Box::new(Node::Leaf(Leaf { count0: 1, count1: 0 })),
                right: Box::new(Node::Leaf(Leaf { count0: 0, count1: 1 })),
            }),
            features,
            params: FitParams::default(),
            threat_digest: String::new(),
            scaler: None,
        }
    }

    #[test]
    fn grid_matches_predict() {
        let t = stump();
        let rows = prediction_grid(&t, 3, 0, 1).unwrap();
        assert_eq!(rows.len(), 9);
        for (x, y, label) in rows {
            assert_eq!(t.predict(&[x, y]).unwrap(), label);
        }
        assert_eq!(prediction_grid(&t, 1, 0, 1).unwrap(), vec![(0.5, 0.5, 0)]);
        assert!(matches!(prediction_grid(&t, 3, 0, 2), Err(Error::FeatureIndex { .. })));
    }

    #[test]
    fn population_std() {
        let m = MeanStd::of(&[1.0, 3.0]);
        assert_eq!((m.mean, m.std), (2.0, 1.0));
    }

    #[test]
    fn threat_resolution() {
        let args = ThreatArgs {
            threat: None,
            threat_file: None,
            epsilon: Some(0.1),
            attacked_classes: Some(vec![1]),
        };
        let t = resolve_threat(&args, 3).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.attacked_classes(), AttackedClasses::MALICIOUS);
        let inline = ThreatArgs {
            threat: Some("0.1,0.2".into()),
            epsilon: None,
            attacked_classes: None,
            ..args
        };
        assert!(matches!(resolve_threat(&inline, 3), Err(Error::ThreatArity { .. })));
        assert!(resolve_threat(&inline, 2).is_ok());
    }
}
