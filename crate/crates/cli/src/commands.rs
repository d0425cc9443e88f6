//! The seven subcommands. Each returns `Ok(())` or a [`CliError`] whose
//! exit code `main` propagates.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use kgam_core::dataset::{
    friedman_generate, fnv1a64, iris_binarize, parse_iris_csv, split_dataset, Dataset, SplitPart,
};
use kgam_core::embedding::{embed_batch, fit_normalizer};
use kgam_core::kgam::{KgamModel, LossKind, Metrics, OuterMode, Task};
use kgam_core::koppen::{psi_series_on, KstParams};
use kgam_core::smoothers::{glm_fit, glm_predict, GlmFit};

use crate::checkpoint::Checkpoint;
use crate::config::{DatasetSpec, RunConfig, TaskKind};
use crate::csvio::{fmt17, matrix_csv, read_matrix_csv, series_csv, write_atomic};
use crate::error::CliError;

/// `psi`: sample the inner function onto a CSV with header `x,psi`.
pub fn cmd_psi(
    gamma: u32,
    k_digits: u32,
    n_beta: u32,
    grid: usize,
    lo: f64,
    hi: f64,
    out: &Path,
) -> Result<(), CliError> {
    let params = KstParams::sprecher(1, gamma, n_beta, k_digits)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let series =
        psi_series_on(&params, lo, hi, grid).map_err(|e| CliError::usage(e.to_string()))?;
    write_atomic(out, &series_csv(("x", "psi"), &series))?;
    eprintln!("wrote {} rows to {}", series.len(), out.display());
    Ok(())
}

/// `embed`: read a feature CSV, fit the normalizer on it, emit the
/// channel matrix with header `z0..z2d`.
pub fn cmd_embed(
    input: &Path,
    gamma: u32,
    k_digits: u32,
    n_beta: Option<u32>,
    out: &Path,
) -> Result<(), CliError> {
    let (_names, rows) = read_matrix_csv(input)?;
    if rows.is_empty() {
        return Err(CliError::data(format!("{} has no data rows", input.display())));
    }
    let d = rows[0].len();
    let params = KstParams::sprecher(d, gamma, n_beta.unwrap_or(d.max(1) as u32), k_digits)
        .map_err(|e| CliError::usage(e.to_string()))?;
    let normalizer = fit_normalizer(&rows, &params)?;
    let embedded = embed_batch(&rows, &normalizer, &params)?;
    let names: Vec<String> = (0..params.num_channels()).map(|q| format!("z{q}")).collect();
    write_atomic(out, &matrix_csv(&names, &embedded))?;
    eprintln!("embedded {} rows into {} channels -> {}", embedded.len(), names.len(), out.display());
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct SimulateManifest {
    n: usize,
    seed: u64,
    noise_sd: f64,
    csv_checksum_fnv1a64: String,
    feature_names: Vec<String>,
}

/// `simulate`: generate the Friedman #1 dataset as CSV (+ manifest).
pub fn cmd_simulate(
    n: usize,
    seed: u64,
    noise_sd: f64,
    out: &Path,
    manifest: Option<&Path>,
) -> Result<(), CliError> {
    if n == 0 {
        return Err(CliError::usage("n must be >= 1".to_string()));
    }
    if noise_sd < 0.0 {
        return Err(CliError::usage("noise_sd must be >= 0".to_string()));
    }
    let data = friedman_generate(n, seed, noise_sd);
    let mut names = data.feature_names.clone();
    names.push("y".to_string());
    let rows: Vec<Vec<f64>> = data
        .x
        .iter()
        .zip(&data.y)
        .map(|(x, &y)| {
            let mut r = x.clone();
            r.push(y);
            r
        })
        .collect();
    let csv = matrix_csv(&names, &rows);
    write_atomic(out, &csv)?;
    if let Some(mpath) = manifest {
        let m = SimulateManifest {
            n,
            seed,
            noise_sd,
            csv_checksum_fnv1a64: format!("{:016x}", fnv1a64(csv.as_bytes())),
            feature_names: data.feature_names.clone(),
        };
        let mut json = serde_json::to_string_pretty(&m)?;
        json.push('\n');
        write_atomic(mpath, &json)?;
    }
    eprintln!("simulated {n} rows -> {}", out.display());
    Ok(())
}

/// Builds the dataset a config describes, split attached when requested.
pub fn load_dataset(config: &RunConfig) -> Result<Dataset, CliError> {
    let data = match &config.dataset {
        DatasetSpec::Friedman { n, seed, noise_sd } => friedman_generate(*n, *seed, *noise_sd),
        DatasetSpec::Iris { path } => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::data(format!("cannot read {path}: {e}")))?;
            let (raw, warnings) = parse_iris_csv(&text)?;
            for w in warnings {
                eprintln!("warning: {w}");
            }
            match config.task {
                TaskKind::Classification => iris_binarize(&raw)?,
                TaskKind::Regression => raw,
            }
        }
    };
    match config.train_n {
        Some(train_n) => Ok(split_dataset(&data, train_n, config.split_seed())?),
        None => Ok(data),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum MetricsDto {
    Regression { n: usize, rmse: f64, r_squared: f64 },
    Classification { n: usize, rmse: f64, accuracy: f64, confusion: [[usize; 2]; 2] },
}

impl From<Metrics> for MetricsDto {
    fn from(m: Metrics) -> Self {
        match m {
            Metrics::Regression { rmse, r_squared, n } => {
                MetricsDto::Regression { n, rmse, r_squared }
            }
            Metrics::Classification { rmse, accuracy, confusion, n } => {
                MetricsDto::Classification { n, rmse, accuracy, confusion }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: RunConfig,
    pub final_train_loss: Option<f64>,
    pub train: MetricsDto,
    pub test: Option<MetricsDto>,
}

pub fn render_metrics(report: &MetricsReport) -> String {
    let mut out = String::new();
    let mut section = |name: &str, m: &MetricsDto| match m {
        MetricsDto::Regression { n, rmse, r_squared } => {
            out.push_str(&format!(
                "{name}: n = {n}, RMSE = {rmse:.6}, R^2 = {r_squared:.6}\n"
            ));
        }
        MetricsDto::Classification { n, rmse, accuracy, confusion } => {
            out.push_str(&format!(
                "{name}: n = {n}, RMSE = {rmse:.6}, accuracy = {accuracy:.6}\n"
            ));
            out.push_str(&confusion_table(confusion));
        }
    };
    section("train", &report.train);
    if let Some(test) = &report.test {
        section("test", test);
    }
    out
}

/// Actual classes as rows, predicted classes as columns.
pub fn confusion_table(confusion: &[[usize; 2]; 2]) -> String {
    let mut s = String::new();
    s.push_str("           Predicted 0  Predicted 1\n");
    s.push_str(&format!(
        "Actual 0  {:>11}  {:>11}\n",
        confusion[0][0], confusion[0][1]
    ));
    s.push_str(&format!(
        "Actual 1  {:>11}  {:>11}\n",
        confusion[1][0], confusion[1][1]
    ));
    s
}

pub struct TrainOutput {
    pub checkpoint_path: PathBuf,
    pub metrics_path: PathBuf,
    pub report: MetricsReport,
}

/// `train`: dataset -> embedding -> K-GAM fit; writes checkpoint.json,
/// metrics.json and trace.csv into the output directory.
pub fn cmd_train(config: &RunConfig, out_dir: &Path) -> Result<TrainOutput, CliError> {
    config.validate()?;
    let data = load_dataset(config)?;
    let params = config.kst_params().map_err(|e| CliError::usage(e.to_string()))?;
    let normalizer = fit_normalizer(&data.x, &params)?;
    let mut model = KgamModel::new(
        params,
        normalizer,
        config.outer_mode(),
        config.task(),
        &config.net_dims(),
        config.seed,
    )?;
    let loss_kind = match config.task() {
        Task::Regression => LossKind::L2,
        Task::BinaryClassification => LossKind::Logistic,
    };
    let trace = model.train(&data, &config.train_config(), loss_kind)?;
    let trace: Vec<f64> = trace.into_iter().map(|l| l.value).collect();

    // Channel ranges over the training rows, recorded for gplot.
    let train_rows: Vec<Vec<f64>> =
        data.indices(SplitPart::Train).iter().map(|&i| data.x[i].clone()).collect();
    let embedded = model.embed_rows(&train_rows)?;
    let channels = model.channel_count();
    let mut channel_ranges = vec![[f64::INFINITY, f64::NEG_INFINITY]; channels];
    for row in &embedded {
        for (q, &z) in row.iter().enumerate() {
            channel_ranges[q][0] = channel_ranges[q][0].min(z);
            channel_ranges[q][1] = channel_ranges[q][1].max(z);
        }
    }

    let train_metrics = model.evaluate(&data, SplitPart::Train)?;
    let test_metrics = match &data.split {
        Some(_) => Some(model.evaluate(&data, SplitPart::Test)?),
        None => None,
    };
    let report = MetricsReport {
        config: config.clone(),
        final_train_loss: trace.last().copied(),
        train: train_metrics.into(),
        test: test_metrics.map(Into::into),
    };

    std::fs::create_dir_all(out_dir)?;
    let checkpoint_path = out_dir.join("checkpoint.json");
    Checkpoint::from_model(config, &model, channel_ranges, trace.clone())
        .save(&checkpoint_path)?;
    let metrics_path = out_dir.join("metrics.json");
    let mut metrics_json = serde_json::to_string_pretty(&report)?;
    metrics_json.push('\n');
    write_atomic(&metrics_path, &metrics_json)?;
    let trace_rows: Vec<(f64, f64)> =
        trace.iter().enumerate().map(|(i, &l)| (i as f64, l)).collect();
    write_atomic(&out_dir.join("trace.csv"), &series_csv(("epoch", "loss"), &trace_rows))?;
    let manifest = DatasetManifest {
        dataset: config.dataset.clone(),
        split_seed: config.train_n.map(|_| config.split_seed()),
        checksum_fnv1a64: match &data.provenance {
            kgam_core::dataset::Provenance::File { checksum } => Some(format!("{checksum:016x}")),
            _ => None,
        },
        train_indices: data.split.as_ref().map(|s| s.train.clone()),
        test_indices: data.split.as_ref().map(|s| s.test.clone()),
    };
    let mut manifest_json = serde_json::to_string_pretty(&manifest)?;
    manifest_json.push('\n');
    write_atomic(&out_dir.join("dataset_manifest.json"), &manifest_json)?;

    print!("{}", render_metrics(&report));
    Ok(TrainOutput { checkpoint_path, metrics_path, report })
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetManifest {
    dataset: DatasetSpec,
    split_seed: Option<u64>,
    checksum_fnv1a64: Option<String>,
    train_indices: Option<Vec<usize>>,
    test_indices: Option<Vec<usize>>,
}

/// `eval`: reload a checkpoint, rebuild its dataset (or an override),
/// recompute metrics.
pub fn cmd_eval(
    checkpoint_path: &Path,
    iris_path_override: Option<&str>,
) -> Result<MetricsReport, CliError> {
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    let mut config = checkpoint.config.clone();
    if let Some(path) = iris_path_override {
        match &mut config.dataset {
            DatasetSpec::Iris { path: p } => *p = path.to_string(),
            DatasetSpec::Friedman { .. } => {
                return Err(CliError::usage(
                    "--iris-path override only applies to iris checkpoints".to_string(),
                ))
            }
        }
    }
    let model = checkpoint.to_model()?;
    let data = load_dataset(&config)?;
    if data.d() != model.params.d {
        return Err(CliError::data(format!(
            "dataset has {} features but the checkpoint expects {}",
            data.d(),
            model.params.d
        )));
    }
    let train = model.evaluate(&data, SplitPart::Train)?;
    let test = match &data.split {
        Some(_) => Some(model.evaluate(&data, SplitPart::Test)?),
        None => None,
    };
    let report = MetricsReport {
        config,
        final_train_loss: checkpoint.trace.last().copied(),
        train: train.into(),
        test: test.map(Into::into),
    };
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    print!("{json}");
    print!("{}", render_metrics(&report));
    Ok(report)
}

/// `gplot`: sample one outer function over its channel's observed range.
pub fn cmd_gplot(
    checkpoint_path: &Path,
    channel: Option<usize>,
    grid: usize,
    out: &Path,
) -> Result<(), CliError> {
    if grid < 2 {
        return Err(CliError::usage("grid needs at least 2 points".to_string()));
    }
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    let model = checkpoint.to_model()?;
    let (net_index, range) = match model.outer_mode {
        OuterMode::PerChannelG => {
            let q = channel.ok_or_else(|| {
                CliError::usage("--channel is required for per-channel checkpoints".to_string())
            })?;
            if q >= model.channel_count() {
                return Err(CliError::usage(format!(
                    "channel {q} out of range (0..{})",
                    model.channel_count() - 1
                )));
            }
            (q, checkpoint.channel_ranges[q])
        }
        OuterMode::SharedG | OuterMode::BadicSingleG { .. } => {
            if let Some(q) = channel {
                if q >= model.channel_count() {
                    return Err(CliError::usage(format!(
                        "channel {q} out of range (0..{})",
                        model.channel_count() - 1
                    )));
                }
                (0, checkpoint.channel_ranges[q])
            } else {
                // union of the observed channel ranges
                let lo = checkpoint
                    .channel_ranges
                    .iter()
                    .map(|r| r[0])
                    .fold(f64::INFINITY, f64::min);
                let hi = checkpoint
                    .channel_ranges
                    .iter()
                    .map(|r| r[1])
                    .fold(f64::NEG_INFINITY, f64::max);
                (0, [lo, hi])
            }
        }
    };
    let [lo, hi] = range;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(CliError::data(format!("degenerate recorded channel range [{lo}, {hi}]")));
    }
    let step = (hi - lo) / (grid - 1) as f64;
    let series: Vec<(f64, f64)> = (0..grid)
        .map(|i| {
            let z = if i + 1 == grid { hi } else { lo + step * i as f64 };
            (z, model.outer_value(net_index, z))
        })
        .collect();
    write_atomic(out, &series_csv(("z", "g"), &series))?;
    eprintln!("wrote {} samples of g over [{lo}, {hi}] to {}", grid, out.display());
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct GlmReport {
    pub n_train: usize,
    pub coefficients: Vec<(String, f64)>,
    pub log_likelihood: f64,
    pub aic: f64,
    pub bic: f64,
    pub converged: bool,
    pub quasi_separated: bool,
    pub train_rmse: f64,
    pub test_rmse: Option<f64>,
    pub test_accuracy: Option<f64>,
    pub test_confusion: Option<[[usize; 2]; 2]>,
}

/// `glm`: the IRLS logistic baseline on binarized Iris.
pub fn cmd_glm(
    iris_path: &str,
    train_n: Option<usize>,
    seed: u64,
    json_out: Option<&Path>,
) -> Result<GlmReport, CliError> {
    let text = std::fs::read_to_string(iris_path)
        .map_err(|e| CliError::data(format!("cannot read {iris_path}: {e}")))?;
    let (raw, warnings) = parse_iris_csv(&text)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    let data = iris_binarize(&raw)?;
    let data = match train_n {
        Some(t) => split_dataset(&data, t, seed)?,
        None => data,
    };
    let train_idx = data.indices(SplitPart::Train);
    let x: Vec<Vec<f64>> = train_idx.iter().map(|&i| data.x[i].clone()).collect();
    let y: Vec<f64> = train_idx.iter().map(|&i| data.y[i]).collect();
    let fit = glm_fit(&x, &y, 50, 1e-8)?;

    let rmse = |fit: &GlmFit, part: SplitPart| -> Option<(f64, f64, [[usize; 2]; 2])> {
        let idx = data.indices(part);
        if idx.is_empty() {
            return None;
        }
        let xs: Vec<Vec<f64>> = idx.iter().map(|&i| data.x[i].clone()).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| data.y[i]).collect();
        let p = glm_predict(fit, &xs);
        let mse =
            p.iter().zip(&ys).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / ys.len() as f64;
        let mut confusion = [[0usize; 2]; 2];
        let mut correct = 0;
        for (pi, yi) in p.iter().zip(&ys) {
            let pred = usize::from(*pi > 0.5);
            let act = usize::from(*yi == 1.0);
            confusion[act][pred] += 1;
            if pred == act {
                correct += 1;
            }
        }
        Some((mse.sqrt(), correct as f64 / ys.len() as f64, confusion))
    };
    let (train_rmse, _, _) = rmse(&fit, SplitPart::Train).expect("train split is never empty");
    let test = rmse(&fit, SplitPart::Test);

    let mut names = vec!["(Intercept)".to_string()];
    names.extend(data.feature_names.iter().map(|n| prettify(n)));
    let report = GlmReport {
        n_train: y.len(),
        coefficients: names.into_iter().zip(fit.coefficients.iter().copied()).collect(),
        log_likelihood: fit.log_likelihood,
        aic: fit.aic,
        bic: fit.bic,
        converged: fit.converged,
        quasi_separated: fit.quasi_separated,
        train_rmse,
        test_rmse: test.map(|t| t.0),
        test_accuracy: test.map(|t| t.1),
        test_confusion: test.map(|t| t.2),
    };

    // Table-1 style summary. Standard errors are out of scope here.
    println!("{:<14} {:>12}", "", "GLM");
    for (name, value) in &report.coefficients {
        println!("{name:<14} {value:>12.3}");
    }
    println!("{:<14} {:>12}", "Num.Obs.", report.n_train);
    println!("{:<14} {:>12.1}", "AIC", report.aic);
    println!("{:<14} {:>12.1}", "BIC", report.bic);
    println!("{:<14} {:>12.3}", "Log.Lik.", report.log_likelihood);
    println!("{:<14} {:>12.2}", "RMSE (train)", report.train_rmse);
    if let Some(t) = report.test_rmse {
        println!("{:<14} {:>12.2}", "RMSE (test)", t);
    }
    if !report.converged {
        println!("note: IRLS did not converge");
    }
    if report.quasi_separated {
        println!("note: coefficients exceed 1e3, data look quasi-separated");
    }
    if let Some(c) = &report.test_confusion {
        print!("{}", confusion_table(c));
    }

    if let Some(path) = json_out {
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        write_atomic(path, &json)?;
    }
    Ok(report)
}

/// `SepalWidth` -> `Sepal.Width`, matching the usual R column style.
fn prettify(name: &str) -> String {
    let mut out = String::new();
    for (i, c) in name.chars().enumerate() {
        if c.is_uppercase() && i > 0 {
            out.push('.');
        }
        out.push(c);
    }
    out
}

pub fn fmt_float_17(v: f64) -> String {
    fmt17(v)
}
