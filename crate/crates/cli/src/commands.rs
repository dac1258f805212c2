use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use distlrp::baselines::BaselineConfig;
use distlrp::dataset::{load_csv, preprocess, Dataset, Schema};
use distlrp::eval::{evaluate_method, write_curves_csv, write_summary_csv, AufcSummary, KdeInpainter};
use distlrp::explainer::write_explanation_csv;
use distlrp::tuning::{grid_search, Grid};
use distlrp::{heuristic_params, neuralize, Explainer, LrpHyperparams, Method, Model, ModelDocument, Points};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::*;
use crate::error::{CliError, CliResult};
use crate::plot;

/// A model file with its feature names and content hash.
struct LoadedModel {
    model: Model,
    feature_names: Vec<String>,
    sha256: String,
}

fn load_model(path: &Path) -> CliResult<LoadedModel> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::config(format!("cannot read model {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| CliError::config(format!("{} is not UTF-8", path.display())))?;
    let doc = ModelDocument::from_json(text)?;
    let model = doc.to_model()?;
    let feature_names = if doc.feature_names.len() == model.dim() {
        doc.feature_names
    } else {
        (0..model.dim()).map(|k| format!("x{k}")).collect()
    };
    Ok(LoadedModel {
        model,
        feature_names,
        sha256: format!("{:x}", Sha256::digest(&bytes)),
    })
}

fn load_split(path: &Path, dim: usize) -> CliResult<Dataset> {
    if !path.exists() {
        return Err(CliError::config(format!("no such file: {}", path.display())));
    }
    let data = Dataset::load_split(path)?;
    if data.dim() != dim {
        return Err(distlrp::Error::DimensionMismatch {
            expected: dim,
            got: data.dim(),
        }
        .into());
    }
    Ok(data)
}

fn leading_rows(data: &Dataset, samples: Option<usize>) -> CliResult<Points> {
    let n = match samples {
        Some(0) => return Err(CliError::config("--samples must be at least 1")),
        Some(s) => s.min(data.len()),
        None => data.len(),
    };
    if n == 0 {
        return Err(CliError::config("the data file has no rows"));
    }
    Ok(data.features.select(&(0..n).collect::<Vec<_>>()))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// LRP hyperparameters, one set per requested η. `--heuristic` supplies the
/// defaults, explicit flags override them.
fn lrp_params(model: &Model, a: &MethodArgs) -> CliResult<Vec<LrpHyperparams>> {
    let base = a.heuristic.then(|| heuristic_params(model));
    let etas = match (&a.eta[..], base) {
        ([], Some(b)) => vec![b.eta],
        ([], None) => return Err(CliError::config("lrp needs --eta or --heuristic")),
        (etas, _) => etas.to_vec(),
    };
    etas.into_iter()
        .map(|eta| {
            let p = match model {
                Model::Knn(_) => LrpHyperparams::knn(
                    eta,
                    a.kappa
                        .or(base.and_then(|b| b.kappa))
                        .ok_or_else(|| CliError::config("knn lrp needs --kappa or --heuristic"))?,
                ),
                _ => LrpHyperparams::svm(
                    eta,
                    a.beta
                        .or(base.and_then(|b| b.beta))
                        .ok_or_else(|| CliError::config("kernel lrp needs --beta or --heuristic"))?,
                ),
            };
            p.validate().map_err(|e| CliError::config(e.to_string()))?;
            Ok(p)
        })
        .collect()
}

fn baseline_config(a: &MethodArgs, fill: Vec<f64>, seed: u64) -> CliResult<BaselineConfig> {
    let config = BaselineConfig {
        ig_steps: a.ig_steps,
        shap_permutations: a.shap_permutations,
        ..BaselineConfig::new(fill, seed)
    };
    config.validate().map_err(|e| CliError::config(e.to_string()))?;
    Ok(config)
}

fn fill_values(train: Option<&PathBuf>, dim: usize, method: Method) -> CliResult<Vec<f64>> {
    match train {
        Some(p) => Ok(load_split(p, dim)?.features.column_means()),
        None if matches!(method, Method::Occlusion | Method::Shap) => Err(CliError::config(format!(
            "{method} needs --train for its fill values"
        ))),
        None => Ok(vec![0.0; dim]),
    }
}

pub fn train(args: &TrainArgs, seed: u64) -> CliResult<()> {
    if args.folds < 2 {
        return Err(CliError::config("--folds must be at least 2"));
    }
    let grid = match args.kind {
        Kind::Svm => {
            if let Some(g) = args.gamma.iter().find(|g| !(**g > 0.0)) {
                return Err(CliError::config(format!("gamma must be positive, got {g}")));
            }
            if let Some(c) = args.c.iter().find(|c| !(**c > 0.0)) {
                return Err(CliError::config(format!("C must be positive, got {c}")));
            }
            Grid::Svm {
                gammas: args.gamma.clone(),
                cs: args.c.clone(),
            }
        }
        Kind::Knn => {
            if let Some(k) = args.k.iter().find(|k| **k % 2 == 0) {
                return Err(CliError::config(format!("k must be odd, got {k}")));
            }
            Grid::Knn { ks: args.k.clone() }
        }
    };
    if !args.data.exists() {
        return Err(CliError::config(format!("no such file: {}", args.data.display())));
    }
    let raw = load_csv(&args.data, &Schema::new(args.label.clone(), args.binarize.clone()))?;
    let splits = preprocess(&raw, seed)?;
    for name in splits.normalization.dropped() {
        eprintln!("warning: dropped constant feature `{name}`");
    }
    let (model, report) = grid_search(&splits.train, &grid, args.folds, seed)?;

    create_dir(&args.out)?;
    ModelDocument::from_model(&model, splits.normalization.output_names())
        .save(args.out.join("model.json"))?;
    splits.train.save_csv(args.out.join("train.csv"))?;
    splits.validation.save_csv(args.out.join("validation.csv"))?;
    splits.explain.save_csv(args.out.join("explain.csv"))?;
    splits.normalization.save(args.out.join("normalization.json"))?;
    write_json(&args.out.join("cv_report.json"), &report)?;

    let labels = splits.validation.labels()?;
    let correct = splits
        .validation
        .features
        .rows()
        .zip(&labels)
        .filter(|(x, l)| model.decision(x).map(distlrp::Class::of).ok() == Some(**l))
        .count();
    println!(
        "trained {} model {:?}: {} train rows, validation accuracy {:.4}",
        model.kind(),
        report.best,
        splits.train.len(),
        correct as f64 / labels.len() as f64
    );
    Ok(())
}

pub fn neuralize_cmd(args: &NeuralizeArgs) -> CliResult<()> {
    let loaded = load_model(&args.model)?;
    let net = neuralize(&loaded.model)?;
    create_dir(&args.out)?;
    write_json(&args.out.join("neural.json"), &net.to_document())?;
    Ok(())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    method: Method,
    sample: usize,
    model_sha256: &'a str,
    model_kind: &'a str,
    f_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    g_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hyperparams: Option<LrpHyperparams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline: Option<&'a BaselineConfig>,
}

pub fn explain_cmd(args: &ExplainArgs, seed: u64) -> CliResult<()> {
    let loaded = load_model(&args.model)?;
    let model = &loaded.model;
    let dim = model.dim();
    let config = baseline_config(
        &args.params,
        fill_values(args.train.as_ref(), dim, args.method)?,
        seed,
    )?;
    let runs: Vec<(String, Option<LrpHyperparams>)> = if args.method == Method::Lrp {
        lrp_params(model, &args.params)?
            .into_iter()
            .map(|p| (format!("lrp_eta{}", p.eta), Some(p)))
            .collect()
    } else {
        vec![(args.method.name().to_string(), None)]
    };
    let explainers = runs
        .iter()
        .map(|(_, p)| Explainer::new(model, args.method, *p, config.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    let data = load_split(&args.data, dim)?;
    let samples = leading_rows(&data, args.samples)?;

    let uses_baseline = !matches!(args.method, Method::Lrp | Method::Gi | Method::GiNeural | Method::Sensitivity);
    for ((label, params), explainer) in runs.iter().zip(&explainers) {
        let dir = args.out.join(label);
        create_dir(&dir)?;
        for (i, x) in samples.rows().enumerate() {
            let relevance = explainer.attribute(x, i as u64)?;
            write_explanation_csv(
                BufWriter::new(File::create(dir.join(format!("sample_{i:04}.csv")))?),
                &loaded.feature_names,
                &relevance,
                x,
            )?;
            let sidecar = Sidecar {
                method: args.method,
                sample: i,
                model_sha256: &loaded.sha256,
                model_kind: model.kind(),
                f_value: model.decision(x)?,
                g_value: explainer.net().map(|n| n.output(x)).transpose()?,
                hyperparams: *params,
                baseline: uses_baseline.then_some(&config),
            };
            write_json(&dir.join(format!("sample_{i:04}.json")), &sidecar)?;
        }
    }
    println!("explained {} samples with {}", samples.n_rows(), args.method);
    Ok(())
}

/// Shared setup of `evaluate` and `ablate`.
struct EvalContext {
    loaded: LoadedModel,
    samples: Points,
    inpainter: KdeInpainter,
    config: BaselineConfig,
    lrp: Option<LrpHyperparams>,
}

fn eval_context(
    model: &Path,
    data: &Path,
    train: &Path,
    samples: Option<usize>,
    repeats: usize,
    params: &MethodArgs,
    needs_lrp: bool,
    seed: u64,
) -> CliResult<EvalContext> {
    if repeats == 0 {
        return Err(CliError::config("--repeats must be at least 1"));
    }
    if params.eta.len() > 1 {
        return Err(CliError::config("give at most one --eta when evaluating"));
    }
    let loaded = load_model(model)?;
    let dim = loaded.model.dim();
    let lrp = if needs_lrp {
        Some(lrp_params(&loaded.model, params)?[0])
    } else {
        None
    };
    let train = load_split(train, dim)?;
    let config = baseline_config(params, train.features.column_means(), seed)?;
    let samples = leading_rows(&load_split(data, dim)?, samples)?;
    let inpainter = KdeInpainter::silverman(train.features, seed)?;
    Ok(EvalContext {
        loaded,
        samples,
        inpainter,
        config,
        lrp,
    })
}

fn run_methods(ctx: &EvalContext, methods: &[Method], repeats: usize) -> CliResult<Vec<AufcSummary>> {
    let model = &ctx.loaded.model;
    let explainers = methods
        .iter()
        .map(|&m| Explainer::new(model, m, ctx.lrp, ctx.config.clone()))
        .collect::<Result<Vec<_>, _>>()?;
    explainers
        .iter()
        .map(|ex| {
            evaluate_method(
                ex.method().name(),
                model,
                &ctx.samples,
                |i, x| ex.importance(x, i as u64),
                &ctx.inpainter,
                repeats,
            )
            .map_err(CliError::from)
        })
        .collect()
}

fn write_summaries(out: &Path, summaries: &[AufcSummary], summary_name: &str) -> CliResult<()> {
    create_dir(out)?;
    write_summary_csv(File::create(out.join(summary_name))?, summaries)?;
    for s in summaries {
        write_curves_csv(
            BufWriter::new(File::create(out.join(format!("curves_{}.csv", s.method)))?),
            s,
        )?;
    }
    Ok(())
}

pub fn evaluate_cmd(args: &EvaluateArgs, seed: u64) -> CliResult<()> {
    let mut methods = Vec::new();
    for m in &args.methods {
        if !methods.contains(m) {
            methods.push(*m);
        }
    }
    let ctx = eval_context(
        &args.model,
        &args.data,
        &args.train,
        args.samples,
        args.repeats,
        &args.params,
        methods.contains(&Method::Lrp),
        seed,
    )?;
    let summaries = run_methods(&ctx, &methods, args.repeats)?;
    write_summaries(&args.out, &summaries, "summary.csv")?;
    let series: Vec<(String, Vec<f64>)> = summaries
        .iter()
        .map(|s| (s.method.clone(), s.mean_curve()))
        .collect();
    fs::write(args.out.join("curves.svg"), plot::flipping_curves(&series))?;
    for s in &summaries {
        println!(
            "{:12} mean AUFC {:.4}  std {:.4}  n {}",
            s.method, s.mean_aufc, s.std, s.n
        );
    }
    Ok(())
}

pub fn ablate_cmd(args: &AblateArgs, seed: u64) -> CliResult<()> {
    let kind = load_model(&args.model)?.model.kind();
    if kind != "svm" {
        return Err(CliError::Incompatible(format!(
            "ablation compares gradient arms and needs an svm model, got {kind}"
        )));
    }
    let ctx = eval_context(
        &args.model,
        &args.data,
        &args.train,
        args.samples,
        args.repeats,
        &args.params,
        true,
        seed,
    )?;
    let arms = [Method::Gi, Method::GiNeural, Method::Lrp];
    let summaries = run_methods(&ctx, &arms, args.repeats)?;
    write_summaries(&args.out, &summaries, "ablation.csv")?;
    let bars: Vec<(String, f64, f64)> = summaries
        .iter()
        .map(|s| (s.method.clone(), s.mean_aufc, s.std_error()))
        .collect();
    fs::write(args.out.join("ablation.svg"), plot::bars(&bars, "mean AUFC"))?;
    for s in &summaries {
        println!(
            "{:12} mean AUFC {:.4}  std error {:.4}",
            s.method,
            s.mean_aufc,
            s.std_error()
        );
    }
    Ok(())
}

fn model_points(model: &Model) -> &Points {
    match model {
        Model::Svm(m) => m.support_vectors(),
        Model::Knn(m) => m.points(),
        Model::Krr(m) => m.points(),
    }
}

pub fn surface_cmd(args: &SurfaceArgs) -> CliResult<()> {
    if args.resolution < 2 {
        return Err(CliError::config("--resolution must be at least 2"));
    }
    let loaded = load_model(&args.model)?;
    let model = &loaded.model;
    if model.dim() != 2 {
        return Err(distlrp::Error::DimensionMismatch {
            expected: 2,
            got: model.dim(),
        }
        .into());
    }
    let window = match &args.window {
        Some(w) => {
            if w.len() != 4 {
                return Err(CliError::config("--window takes four values xmin,xmax,ymin,ymax"));
            }
            if !(w[0] < w[1] && w[2] < w[3]) {
                return Err(CliError::config("--window needs xmin < xmax and ymin < ymax"));
            }
            [w[0], w[1], w[2], w[3]]
        }
        None => {
            let pts = model_points(model);
            let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
            for p in pts.rows() {
                b = [b[0].min(p[0]), b[1].max(p[0]), b[2].min(p[1]), b[3].max(p[1])];
            }
            let (mx, my) = (0.1 * (b[1] - b[0]).max(1e-3), 0.1 * (b[3] - b[2]).max(1e-3));
            [b[0] - mx, b[1] + mx, b[2] - my, b[3] + my]
        }
    };
    let net = neuralize(model)?;
    let n = args.resolution;
    let centre = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
    let mut f = Vec::with_capacity(n * n);
    let mut g = Vec::with_capacity(n * n);
    let mut rows = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let x = [centre(window[0], window[1], c), centre(window[2], window[3], r)];
            let (fv, gv) = (model.decision(&x)?, net.output(&x)?);
            rows.push(format!("{},{},{fv},{gv}", x[0], x[1]));
            f.push(fv);
            g.push(gv);
        }
    }
    create_dir(&args.out)?;
    let mut csv = String::from("x1,x2,f,g\n");
    for r in rows {
        csv.push_str(&r);
        csv.push('\n');
    }
    fs::write(args.out.join("surface.csv"), csv)?;
    fs::write(
        args.out.join("surface.svg"),
        plot::heatmaps(&[("f(x)", &f), ("g(x)", &g)], n),
    )?;
    let agree = f
        .iter()
        .zip(&g)
        .filter(|(a, _)| a.abs() > distlrp::neuralize::SIGN_DEAD_ZONE)
        .filter(|(a, b)| (**a > 0.0) == (**b > 0.0))
        .count();
    let off_boundary = f
        .iter()
        .filter(|a| a.abs() > distlrp::neuralize::SIGN_DEAD_ZONE)
        .count();
    println!("sign agreement {agree}/{off_boundary} off-boundary grid points");
    Ok(())
}
