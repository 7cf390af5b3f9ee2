use std::time::Instant;

use multisys_core::explain::{
    beeswarm_csv, beeswarm_export, global_importance, partial_dependence, tree_shap, ImportanceEntry, ImportanceRanking,
    ShapAttribution,
};
use multisys_core::indices::{prevalence_summary, PrevalenceSummary, SystemIndices, SystemSet};
use multisys_core::ingest::{clean, load_cohort, read_cohort, FeatureMatrix, SchemaConfig};
use multisys_core::metrics::{cv_evaluate, metrics_csv, roc_auc, CvSummary, MetricsRow};
use multisys_core::models::{
    fit_gradient_boosting, fit_random_forest, Classifier, LogisticClassifier, TrainedModel, TreeEnsemble,
};
use multisys_core::report::{render, summary_csv, table_summary, FigureKind, FigureSpec, LabeledPdp, LabeledRoc};
use multisys_core::split::{stratified_kfold, stratified_split, FoldPlan, Partition};
use multisys_core::synth::generate;
use multisys_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::store::RunDir;
use crate::{CliError, RunConfig};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Simulate,
    Ingest,
    Features,
    Split,
    Train,
    Evaluate,
    Explain,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Simulate,
        Stage::Ingest,
        Stage::Features,
        Stage::Split,
        Stage::Train,
        Stage::Evaluate,
        Stage::Explain,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Ingest => "ingest",
            Stage::Features => "features",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Explain => "explain",
            Stage::Report => "report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelId {
    LogisticRegression,
    RandomForest,
    GradientBoosting,
}

impl ModelId {
    pub const ALL: [ModelId; 3] = [ModelId::LogisticRegression, ModelId::RandomForest, ModelId::GradientBoosting];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelId::LogisticRegression => "logistic_regression",
            ModelId::RandomForest => "random_forest",
            ModelId::GradientBoosting => "gradient_boosting",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModelId::LogisticRegression => "Logistic regression",
            ModelId::RandomForest => "Random forest",
            ModelId::GradientBoosting => "Gradient boosting",
        }
    }

    pub fn artifact(self) -> String {
        format!("models/{}.json", self.as_str())
    }
}

/// Holdout partition plus the CV fold plan, whose row ids index into `partition.train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitArtifact {
    pub partition: Partition,
    pub folds: FoldPlan,
    pub train_positives: usize,
    pub validation_positives: usize,
    pub test_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingReport {
    pub n_train: usize,
    pub n_features: usize,
    pub logistic_iterations: usize,
    pub logistic_converged: bool,
    pub logistic_gradient_max_norm: f64,
    /// Training deviance before the first stage and after each stage.
    pub boosting_deviance: Vec<f64>,
    pub forest_trees: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCv {
    pub model: ModelId,
    #[serde(flatten)]
    pub summary: CvSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsArtifact {
    pub threshold: f64,
    pub rows: Vec<MetricsRow>,
    pub cross_validation: Vec<ModelCv>,
}

impl MetricsArtifact {
    pub fn row(&self, model: ModelId, subset: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.model == model.as_str() && r.subset == subset)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapArtifact {
    pub model: ModelId,
    pub output_scale: String,
    /// Partition rows the attributions belong to, in order.
    pub rows: Vec<usize>,
    pub feature_names: Vec<String>,
    pub attribution: ShapAttribution,
    pub max_local_accuracy_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub n: usize,
    pub target_count: usize,
    pub target_prevalence: f64,
    pub system_prevalence: Vec<(String, f64)>,
    pub burden_mean: f64,
    pub burden_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

/// Final run summary; `schema_version` changes whenever a field does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub config_hash: String,
    pub cohort: CohortSummary,
    pub split: SplitSizes,
    pub threshold: f64,
    /// Validation and test rows for every model.
    pub metrics: Vec<MetricsRow>,
    pub cross_validation: Vec<ModelCv>,
    pub shap_model: ModelId,
    pub shap_output_scale: String,
    pub importance: Vec<ImportanceEntry>,
    pub figures: Vec<String>,
}

const COHORT: &str = "cohort.csv";
const FEATURES_CSV: &str = "features.csv";
const FEATURE_MATRIX: &str = "feature_matrix.json";
const AUDIT: &str = "cleaning_audit.json";
const INDICES_CSV: &str = "indices.csv";
const INDICES_JSON: &str = "indices.json";
const PREVALENCE: &str = "prevalence.json";
const TABLE1: &str = "table1.csv";
const CORRELATION_INPUT: &str = "correlation_input.csv";
const SPLIT: &str = "split.json";
const TRAINING: &str = "training.json";
const METRICS_JSON: &str = "metrics.json";
const METRICS_CSV: &str = "metrics.csv";
const ROC: &str = "roc.json";
const SHAP: &str = "shap.json";
const IMPORTANCE_CSV: &str = "importance.csv";
const IMPORTANCE_JSON: &str = "importance.json";
const BEESWARM: &str = "beeswarm.csv";
const PDP: &str = "pdp.json";
pub const SUMMARY: &str = "summary.json";

const SHAP_SCALE: &str = "log-odds margin";

fn schema(cfg: &RunConfig) -> Result<SchemaConfig, CliError> {
    match &cfg.schema {
        Some(p) => SchemaConfig::load(p).map_err(|e| CliError::Config(e.to_string())),
        None => Ok(SchemaConfig::default()),
    }
}

fn systems(cfg: &RunConfig) -> Result<SystemSet, CliError> {
    match &cfg.systems {
        Some(p) => SystemSet::load(p).map_err(|e| CliError::Config(e.to_string())),
        None => Ok(SystemSet::default()),
    }
}

fn csv_bytes(stage: &'static str, f: impl FnOnce(&mut Vec<u8>) -> Result<(), String>) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::stage(stage, e))?;
    Ok(buf)
}

fn pick(labels: &[bool], rows: &[usize]) -> Vec<bool> {
    rows.iter().map(|&r| labels[r]).collect()
}

fn load_model(dir: &RunDir, id: ModelId) -> Result<TrainedModel, CliError> {
    let rel = id.artifact();
    let text = dir.read_text("model", &rel)?;
    TrainedModel::from_json(&text).map_err(|e| CliError::MalformedArtifact { path: dir.path(&rel), reason: e.to_string() })
}

fn load_boosting(dir: &RunDir) -> Result<TreeEnsemble, CliError> {
    match load_model(dir, ModelId::GradientBoosting)? {
        TrainedModel::Ensemble(e) => Ok(e),
        TrainedModel::Logistic(_) => Err(CliError::MalformedArtifact {
            path: dir.path(&ModelId::GradientBoosting.artifact()),
            reason: "expected a tree ensemble".into(),
        }),
    }
}

struct Data {
    matrix: FeatureMatrix,
    labels: Vec<bool>,
    split: SplitArtifact,
}

impl Data {
    fn load(dir: &RunDir) -> Result<Self, CliError> {
        let matrix: FeatureMatrix = dir.read_json("feature matrix", FEATURE_MATRIX)?;
        let indices: SystemIndices = dir.read_json("indices", INDICES_JSON)?;
        let split: SplitArtifact = dir.read_json("split", SPLIT)?;
        if indices.len() != matrix.rows() || split.partition.sizes().iter().sum::<usize>() != matrix.rows() {
            return Err(CliError::MalformedArtifact {
                path: dir.path(SPLIT),
                reason: "row counts of features, indices and split disagree".into(),
            });
        }
        Ok(Self { labels: indices.targets(), matrix, split })
    }

    fn subset(&self, rows: &[usize]) -> (Matrix, Vec<bool>) {
        (self.matrix.values().select_rows(rows), pick(&self.labels, rows))
    }
}

pub fn simulate(cfg: &RunConfig, dir: &mut RunDir) -> Result<(), CliError> {
    let spec = cfg.synth.as_ref().ok_or_else(|| CliError::Config("simulate needs a `synth` spec".into()))?;
    let cohort = generate(spec).map_err(|e| CliError::stage("simulate", e))?;
    log::info!("generated {} synthetic patients", cohort.len());
    let bytes = csv_bytes("simulate", |b| cohort.write_csv(b).map_err(|e| e.to_string()))?;
    dir.write("simulate", COHORT, &bytes)
}

pub fn ingest(cfg: &RunConfig, dir: &mut RunDir) -> Result<(), CliError> {
    let schema = schema(cfg)?;
    let loaded = match &cfg.input {
        Some(path) => load_cohort(path, &schema),
        None => {
            let path = dir.require("cohort", COHORT)?;
            let file = std::fs::File::open(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
            read_cohort(file, &schema)
        }
    }
    .map_err(|e| CliError::stage("ingest", e))?;
    if !loaded.dropped_columns.is_empty() {
        log::info!("ignoring columns not in the schema: {:?}", loaded.dropped_columns);
    }
    let (matrix, audit) = clean(&loaded.cohort, &schema).map_err(|e| CliError::stage("ingest", e))?;
    log::info!("cleaned {} rows x {} columns", matrix.rows(), matrix.columns().len());
    let bytes = csv_bytes("ingest", |b| matrix.write_csv(b).map_err(|e| e.to_string()))?;
    dir.write("ingest", FEATURES_CSV, &bytes)?;
    dir.write_json("ingest", FEATURE_MATRIX, &matrix)?;
    dir.write_json("ingest", AUDIT, &audit)
}

pub fn features(cfg: &RunConfig, dir: &mut RunDir) -> Result<(), CliError> {
    let systems = systems(cfg)?;
    let matrix: FeatureMatrix = dir.read_json("feature matrix", FEATURE_MATRIX)?;
    let indices = multisys_core::compute_indices(&matrix, &systems).map_err(|e| CliError::stage("features", e))?;
    let prevalence = prevalence_summary(&indices).map_err(|e| CliError::stage("features", e))?;
    log::info!("target prevalence {:.3} ({} patients)", prevalence.target_prevalence, prevalence.target_count);

    let bytes = csv_bytes("features", |b| indices.write_csv(b).map_err(|e| e.to_string()))?;
    dir.write("features", INDICES_CSV, &bytes)?;
    dir.write_json("features", INDICES_JSON, &indices)?;
    dir.write_json("features", PREVALENCE, &prevalence)?;

    let rows = table_summary(&matrix).map_err(|e| CliError::stage("features", e))?;
    dir.write("features", TABLE1, summary_csv(&rows).as_bytes())?;

    // Analytes plus the composite indices, one numeric column each.
    let mut header = matrix.names();
    header.extend(["burden_score", "affected_systems"].map(String::from));
    let quoted = header.iter().any(|h| h.contains([',', '"', '\n']));
    if quoted {
        return Err(CliError::stage("features", "analyte names must not contain commas or quotes"));
    }
    let mut text = header.join(",") + "\n";
    for (r, p) in indices.patients.iter().enumerate() {
        let mut cells: Vec<String> = matrix.values().row(r).iter().map(|v| format!("{v}")).collect();
        cells.push(p.burden_score().to_string());
        cells.push(p.affected_systems().to_string());
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    dir.write("features", CORRELATION_INPUT, text.as_bytes())
}

pub fn split(cfg: &RunConfig, dir: &mut RunDir) -> Result<(), CliError> {
    let indices: SystemIndices = dir.read_json("indices", INDICES_JSON)?;
    let labels = indices.targets();
    let partition = stratified_split(&labels, cfg.split, cfg.seed).map_err(|e| CliError::stage("split", e))?;
    let train_labels = pick(&labels, &partition.train);
    let folds = stratified_kfold(&train_labels, cfg.cv_folds, cfg.seed).map_err(|e| CliError::stage("split", e))?;
    let positives = |rows: &[usize]| rows.iter().filter(|&&r| labels[r]).count();
    let [a, b, c] = partition.sizes();
    log::info!("split {a}/{b}/{c}");
    let artifact = SplitArtifact {
        train_positives: positives(&partition.train),
        validation_positives: positives(&partition.validation),
        test_positives: positives(&partition.test),
        partition,
        folds,
    };
    dir.write_json("split", SPLIT, &artifact)
}

pub fn train(cfg: &RunConfig, dir: &mut RunDir) -> Result<(), CliError> {
    let data = Data::load(dir)?;
    let names = data.matrix.names();
    let (x, y) = data.subset(&data.split.partition.train);

    let t = Instant::now();
    let (lr, lr_fit) = LogisticClassifier::fit(&x, &y, &cfg.logistic).map_err(|e| CliError::stage("train", e))?;
    if !lr_fit.converged {
        log::warn!("logistic regression stopped at {} iterations without converging", lr_fit.iterations);
    }
    let rf = fit_random_forest(&x, &y, &cfg.forest, cfg.seed).map_err(|e| CliError::stage("train", e))?.with_feature_names(names.clone());
    let gb = fit_gradient_boosting(&x, &y, &cfg.boosting).map_err(|e| CliError::stage("train", e))?;
    log::info!("trained three models in {:.2?}", t.elapsed());

    let report = TrainingReport {
        n_train: x.rows(),
        n_features: x.cols(),
        logistic_iterations: lr_fit.iterations,
        logistic_converged: lr_fit.converged,
        logistic_gradient_max_norm: lr_fit.gradient_max_norm,
        boosting_deviance: gb.deviance,
        forest_trees: rf.trees.len(),
    };
    let gb = gb.ensemble.with_feature_names(names);
    let models = [
        (ModelId::LogisticRegression, TrainedModel::Logistic(lr)),
        (ModelId::RandomForest, TrainedModel::Ensemble(rf)),
        (ModelId::GradientBoosting, TrainedModel::Ensemble(gb)),
    ];
    for (id, model) in models {
        dir.write("train", &id.artifact(), (model.to_json() + "\n").as_bytes())?;
    }
    dir.write_json("train", TRAINING, &report)
}

fn cross_validate(cfg: &RunConfig, id: ModelId, x: &Matrix, y: &[bool], plan: &FoldPlan) -> Result<CvSummary, CliError> {
    let res = match id {
        ModelId::LogisticRegression => {
            cv_evaluate(|x: &Matrix, y: &[bool]| LogisticClassifier::fit(x, y, &cfg.logistic).map(|m| m.0), x, y, plan)
        }
        ModelId::RandomForest => cv_evaluate(|x: &Matrix, y: &[bool]| fit_random_forest(x, y, &cfg.forest, cfg.seed), x, y, plan),
        ModelId::GradientBoosting => {
            cv_evaluate(|x: &Matrix, y: &[bool]| fit_gradient_boosting(x, y, &cfg.boosting).map(|f| f.ensemble), x, y, plan)
        }
    };
    res.map_err(|e| CliError::stage("evaluate", e))
}

pub fn evaluate(cfg: &RunConfig, dir: &mut RunDir) -> Result<(), CliError> {
    let models = ModelId::ALL.map(|id| load_model(dir, id).map(|m| (id, m)));
    let models = models.into_iter().collect::<Result<Vec<_>, _>>()?;
    let data = Data::load(dir)?;
    let p = &data.split.partition;

    let mut rows = Vec::new();
    let mut rocs = Vec::new();
    for (id, model) in &models {
        for (subset, idx) in [("validation", &p.validation), ("test", &p.test)] {
            let (x, y) = data.subset(idx);
            let scores = model.predict_proba(&x).map_err(|e| CliError::stage("evaluate", e))?;
            rows.push(MetricsRow::evaluate(id.as_str(), subset, &scores, &y, cfg.threshold).map_err(|e| CliError::stage("evaluate", e))?);
            if subset == "test" {
                let curve = roc_auc(&scores, &y).map_err(|e| CliError::stage("evaluate", e))?;
                rocs.push(LabeledRoc { model: id.label().to_string(), curve });
            }
        }
    }
    let (xtr, ytr) = data.subset(&p.train);
    let mut cross_validation = Vec::new();
    for id in ModelId::ALL {
        let t = Instant::now();
        let summary = cross_validate(cfg, id, &xtr, &ytr, &data.split.folds)?;
        log::info!("{} CV AUC {:.4} ± {:.4} in {:.2?}", id.as_str(), summary.mean_auc, summary.sd_auc, t.elapsed());
        cross_validation.push(ModelCv { model: id, summary });
    }
    dir.write("evaluate", METRICS_CSV, metrics_csv(&rows).as_bytes())?;
    dir.write_json("evaluate", METRICS_JSON, &MetricsArtifact { threshold: cfg.threshold, rows, cross_validation })?;
    dir.write_json("evaluate", ROC, &rocs)
}

pub fn explain(cfg: &RunConfig, dir: &mut RunDir) -> Result<(), CliError> {
    let gb = load_boosting(dir)?;
    let data = Data::load(dir)?;
    let names = data.matrix.names();
    let p = &data.split.partition;

    let (xte, _) = data.subset(&p.test);
    let attribution = tree_shap(&gb, &xte).map_err(|e| CliError::stage("explain", e))?;
    let margins = gb.predict_margin(&xte).map_err(|e| CliError::stage("explain", e))?;
    let max_err = margins.iter().enumerate().map(|(r, m)| (attribution.reconstruct(r) - m).abs()).fold(0.0, f64::max);
    log::info!("SHAP local accuracy max error {max_err:.3e}");

    let ranking = global_importance(&attribution, &names).map_err(|e| CliError::stage("explain", e))?;
    let records = beeswarm_export(&attribution, &xte, &ranking).map_err(|e| CliError::stage("explain", e))?;

    let (xtr, _) = data.subset(&p.train);
    let mut curves = Vec::new();
    for entry in ranking.top(cfg.pdp_features) {
        let curve = partial_dependence(&gb, &xtr, entry.feature, &cfg.pdp).map_err(|e| CliError::stage("explain", e))?;
        curves.push(LabeledPdp { feature: entry.name.clone(), curve });
    }

    dir.write("explain", IMPORTANCE_CSV, ranking.to_csv().as_bytes())?;
    dir.write_json("explain", IMPORTANCE_JSON, &ranking)?;
    dir.write("explain", BEESWARM, beeswarm_csv(&records).as_bytes())?;
    dir.write_json("explain", PDP, &curves)?;
    let shap = ShapArtifact {
        model: ModelId::GradientBoosting,
        output_scale: SHAP_SCALE.into(),
        rows: p.test.clone(),
        feature_names: names,
        attribution,
        max_local_accuracy_error: max_err,
    };
    dir.write_json("explain", SHAP, &shap)
}

fn figure_plan(cfg: &RunConfig, dir: &RunDir) -> Result<Vec<(FigureKind, FigureSpec)>, CliError> {
    let mut out = Vec::new();
    for kind in FigureKind::ALL {
        let (what, data) = match kind {
            FigureKind::HistogramGrid => ("features", FEATURES_CSV),
            FigureKind::BurdenDistribution => ("indices", INDICES_CSV),
            FigureKind::CorrelationHeatmap => ("correlation input", CORRELATION_INPUT),
            FigureKind::Roc => ("roc", ROC),
            FigureKind::ShapBeeswarm => ("beeswarm", BEESWARM),
            FigureKind::ImportanceBar => ("importance", IMPORTANCE_CSV),
            FigureKind::PdpPanel => ("pdp", PDP),
        };
        let spec = FigureSpec {
            kind,
            data: dir.require(what, data)?,
            output: dir.path(&format!("figures/{}.svg", kind.as_str())),
            columns: None,
            top: Some(cfg.importance_top),
        };
        out.push((kind, spec));
    }
    Ok(out)
}

pub fn report(cfg: &RunConfig, dir: &mut RunDir) -> Result<(), CliError> {
    let prevalence: PrevalenceSummary = dir.read_json("prevalence", PREVALENCE)?;
    let split: SplitArtifact = dir.read_json("split", SPLIT)?;
    let metrics: MetricsArtifact = dir.read_json("metrics", METRICS_JSON)?;
    let ranking: ImportanceRanking = dir.read_json("importance", IMPORTANCE_JSON)?;

    let mut names = Vec::new();
    for (kind, spec) in figure_plan(cfg, dir)? {
        let svg = render(&spec).map_err(|e| CliError::stage("report", e))?;
        let rel = format!("figures/{}.svg", kind.as_str());
        dir.write("report", &rel, svg.as_bytes())?;
        names.push(rel);
    }

    let [train, validation, test] = split.partition.sizes();
    let summary = Summary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        config_hash: dir.hash().to_string(),
        cohort: CohortSummary {
            n: prevalence.n,
            target_count: prevalence.target_count,
            target_prevalence: prevalence.target_prevalence,
            system_prevalence: prevalence.systems.iter().map(|s| (s.system.as_str().to_string(), s.prevalence)).collect(),
            burden_mean: prevalence.burden_mean,
            burden_sd: prevalence.burden_sd,
        },
        split: SplitSizes { train, validation, test },
        threshold: metrics.threshold,
        metrics: metrics.rows,
        cross_validation: metrics.cross_validation,
        shap_model: ModelId::GradientBoosting,
        shap_output_scale: SHAP_SCALE.into(),
        importance: ranking.top(cfg.importance_top).to_vec(),
        figures: names,
    };
    dir.write_json("report", SUMMARY, &summary)
}

pub fn run_stage(stage: Stage, cfg: &RunConfig, dir: &mut RunDir) -> Result<(), CliError> {
    let t = Instant::now();
    let res = match stage {
        Stage::Simulate => simulate(cfg, dir),
        Stage::Ingest => ingest(cfg, dir),
        Stage::Features => features(cfg, dir),
        Stage::Split => split(cfg, dir),
        Stage::Train => train(cfg, dir),
        Stage::Evaluate => evaluate(cfg, dir),
        Stage::Explain => explain(cfg, dir),
        Stage::Report => report(cfg, dir),
    };
    log::info!("{} finished in {:.2?}", stage.as_str(), t.elapsed());
    res
}

/// Every stage in order; `simulate` only when the config has a synth spec.
pub fn run_all(cfg: &RunConfig, dir: &mut RunDir) -> Result<Summary, CliError> {
    dir.claim()?;
    for stage in Stage::ALL {
        if stage == Stage::Simulate && cfg.synth.is_none() {
            continue;
        }
        run_stage(stage, cfg, dir)?;
    }
    dir.read_json("summary", SUMMARY)
}
