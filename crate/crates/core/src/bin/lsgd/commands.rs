use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use lsgd::eval::{bench_compare, evaluate, make_blobs, train_test_split, BenchConfig, EvalOptions, METRICS_SCHEMA_VERSION};
use lsgd::incremental::{inc_train_with, IncOptions, KChoice};
use lsgd::io::{
    default_block_size, load_model, read_dense_binary, read_sparse_text, save_model, split_blocks, BlockSpec,
    LabelMap, SparseOptions,
};
use lsgd::kmeans::KMeansOptions;
use lsgd::{with_threads, Classifier, Error as LsgdError, LabeledPoint, SgdParams};

use crate::args::*;
use crate::data;

const PREDICT_CHUNK: usize = 8192;

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Every effective training setting, resolved. Stored in the metrics JSON
/// and accepted back by `train --replay`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainSettings {
    pub input: PathBuf,
    pub format: Format,
    pub dims: Option<usize>,
    pub k: Option<usize>,
    pub cluster_size: usize,
    pub block_size: usize,
    pub epochs: u32,
    pub eta: f64,
    pub lambda: f64,
    pub schedule: ScheduleArg,
    pub seed: u64,
    pub kmeans: KMeansArg,
    pub batch_size: usize,
    pub max_iters: usize,
    pub threads: usize,
}

impl TrainSettings {
    fn params(&self) -> SgdParams {
        SgdParams {
            lambda: self.lambda,
            eta: self.eta,
            epochs: self.epochs,
            seed: self.seed,
            schedule: self.schedule.into(),
        }
    }

    fn kmeans(&self) -> KMeansOptions {
        KMeansOptions { mode: self.kmeans.into(), max_iters: self.max_iters, batch_size: self.batch_size }
    }

    fn k_choice(&self) -> KChoice {
        match self.k {
            Some(k) => KChoice::Fixed(k),
            None => KChoice::ClusterSize(self.cluster_size),
        }
    }
}

fn sgd_params(a: &SgdArgs) -> SgdParams {
    SgdParams { lambda: a.lambda, eta: a.eta, epochs: a.epochs, seed: a.seed, schedule: a.schedule.into() }
}

pub fn train(args: TrainArgs) -> Result<()> {
    let (settings, model_out) = match &args.replay {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let doc: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let settings: TrainSettings = serde_json::from_value(
                doc.get("reproducibility").cloned().ok_or_else(|| anyhow!("{} has no reproducibility stanza", path.display()))?,
            )?;
            let model_out = match args.model_out.clone() {
                Some(p) => p,
                None => doc["model"].as_str().map(PathBuf::from).ok_or_else(|| anyhow!("no model path to replay to"))?,
            };
            (settings, model_out)
        }
        None => {
            let input = args.input.clone().expect("clap requires --input");
            let input = fs::canonicalize(&input).with_context(|| format!("cannot open {}", input.display()))?;
            let format = data::detect(&input, args.format)?;
            let src = data::open(&input, format, args.dims, None)?;
            let block_size = match (args.blocks, args.block_size) {
                (Some(0), _) => bail!("--blocks must be >= 1"),
                (Some(b), _) => (src.n_points as usize).div_ceil(b),
                (None, Some(s)) => s,
                (None, None) => default_block_size(args.memory_budget, src.dims),
            };
            let settings = TrainSettings {
                input,
                format,
                dims: args.dims,
                k: args.k,
                cluster_size: args.cluster_size,
                block_size,
                epochs: args.sgd.epochs,
                eta: args.sgd.eta,
                lambda: args.sgd.lambda,
                schedule: args.sgd.schedule,
                seed: args.sgd.seed,
                kmeans: args.sgd.kmeans,
                batch_size: args.sgd.batch_size,
                max_iters: args.sgd.max_iters,
                threads: args.sgd.threads.unwrap_or_else(default_threads),
            };
            (settings, args.model_out.clone().expect("clap requires --model-out"))
        }
    };
    let metrics_out = args.metrics_out.clone().unwrap_or_else(|| {
        let mut p = model_out.clone().into_os_string();
        p.push(".metrics.json");
        p.into()
    });
    run_train(&settings, &model_out, &metrics_out)
}

fn run_train(s: &TrainSettings, model_out: &Path, metrics_out: &Path) -> Result<()> {
    let params = s.params();
    params.validate()?;
    if s.k == Some(0) {
        bail!("--k must be >= 1");
    }
    let src = data::open(&s.input, s.format, s.dims, None)?;
    let (n_points, dims, labels) = (src.n_points, src.dims, src.labels.clone());
    let opts = IncOptions { k: s.k_choice(), kmeans: s.kmeans(), n_classes: Some(labels.len() as u32) };
    let blocks = split_blocks(src.points, BlockSpec::new(s.block_size)?);
    log::info!(
        "training on {n_points} points ({dims} dims, {} classes), {} blocks of up to {} points",
        labels.len(),
        n_points.div_ceil(s.block_size as u64),
        s.block_size
    );

    let start = Instant::now();
    let (model, reports) = with_threads(s.threads, || inc_train_with(blocks, &params, &opts))?
        .with_context(|| format!("training on {}", s.input.display()))?;
    let train_seconds = start.elapsed().as_secs_f64();
    let model = model.with_labels(labels.names().to_vec())?;

    save_model(&model, model_out).with_context(|| format!("writing {}", model_out.display()))?;
    let omega_mean = reports.iter().map(|r| r.omega).sum::<f64>() / reports.len() as f64;
    let doc = json!({
        "schema_version": METRICS_SCHEMA_VERSION,
        "command": "train",
        "reproducibility": s,
        "model": model_out,
        "n_points": n_points,
        "n_dims": dims,
        "n_classes": labels.len(),
        "members": model.members().len(),
        "train_seconds": train_seconds,
        "omega_mean": omega_mean,
        "blocks": reports,
    });
    write_json(metrics_out, &doc)?;
    eprintln!(
        "trained {} members ({} local models) in {:.2}s -> {}",
        model.members().len(),
        model.members().iter().map(|m| m.locals().len()).sum::<usize>(),
        train_seconds,
        model_out.display()
    );
    Ok(())
}

/// Unlabeled-friendly feature stream for `predict`.
type FeatureStream = Box<dyn Iterator<Item = lsgd::Result<Vec<f32>>>>;

fn feature_stream(
    path: &Path,
    format: Format,
    dims: usize,
    vocab: &LabelMap,
) -> Result<Option<FeatureStream>> {
    let ctx = || format!("reading {}", path.display());
    match data::detect(path, format)? {
        Format::Dense => match read_dense_binary(path) {
            Err(LsgdError::NoData) => Ok(None),
            Err(e) => Err(e).with_context(ctx),
            Ok(r) => {
                if r.header().n_dims as usize != dims {
                    bail!("{}: dimensionality {} does not match the model's {dims}", path.display(), r.header().n_dims);
                }
                Ok(Some(Box::new(r.map(|p| p.map(|p| p.features)))))
            }
        },
        _ => {
            let opts = SparseOptions { n_dims: Some(dims), labels: Some(vocab.clone()) };
            match read_sparse_text(path, &opts) {
                Err(LsgdError::NoData) => Ok(None),
                Err(e) => Err(e).with_context(ctx),
                Ok(mut r) => Ok(Some(Box::new(std::iter::from_fn(move || {
                    r.next_record().map(|rec| rec.map(|(_, x)| x))
                })))),
            }
        }
    }
}

pub fn predict(args: PredictArgs) -> Result<()> {
    let model = load_model(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let vocab = LabelMap::from_names(model.labels().iter().cloned());
    let stream = feature_stream(&args.input, args.format, model.dimensionality(), &vocab)?;
    let mut out = BufWriter::new(File::create(&args.output).with_context(|| format!("creating {}", args.output.display()))?);
    let threads = args.threads.unwrap_or_else(default_threads);
    let mut written = 0u64;

    if let Some(mut stream) = stream {
        loop {
            let chunk: Vec<Vec<f32>> = stream
                .by_ref()
                .take(PREDICT_CHUNK)
                .collect::<lsgd::Result<_>>()
                .with_context(|| format!("reading {}", args.input.display()))?;
            if chunk.is_empty() {
                break;
            }
            let xs: Vec<&[f32]> = chunk.iter().map(|x| x.as_slice()).collect();
            let preds = with_threads(threads, || model.predict_batch(&xs))??;
            for p in preds {
                writeln!(out, "{}", model.label(p))?;
            }
            written += chunk.len() as u64;
        }
    }
    out.flush()?;
    eprintln!("wrote {written} predictions to {}", args.output.display());
    Ok(())
}

pub fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    let model = load_model(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let vocab = LabelMap::from_names(model.labels().iter().cloned());
    let src = data::open(&args.input, args.format, Some(model.dimensionality()), Some(&vocab))?;
    let labels = src.labels.clone();
    let opts = EvalOptions { confusion_max_classes: args.confusion_max_classes, ..Default::default() };
    let threads = args.threads.unwrap_or_else(default_threads);
    let metrics = with_threads(threads, || evaluate(&model, src.points, &opts))?
        .with_context(|| format!("evaluating on {}", args.input.display()))?;

    println!("accuracy: {:.2}%", 100.0 * metrics.accuracy);
    let doc = json!({
        "schema_version": METRICS_SCHEMA_VERSION,
        "command": "evaluate",
        "model": args.model,
        "input": args.input,
        "labels": labels.names(),
        "metrics": metrics,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    if let Some(p) = &args.json_out {
        write_json(p, &doc)?;
    }
    Ok(())
}

fn parse_config(spec: &str, sgd: &SgdArgs) -> Result<BenchConfig> {
    let (label, rest) = spec.split_once(':').ok_or_else(|| anyhow!("config {spec:?}: expected label:key=value,..."))?;
    let mut cfg = BenchConfig {
        label: label.to_owned(),
        k: KChoice::ClusterSize(500),
        blocks: 1,
        params: sgd_params(sgd),
        kmeans: KMeansOptions { mode: sgd.kmeans.into(), max_iters: sgd.max_iters, batch_size: sgd.batch_size },
        threads: sgd.threads.unwrap_or_else(default_threads),
    };
    for kv in rest.split(',').filter(|s| !s.is_empty()) {
        let (key, value) = kv.split_once('=').ok_or_else(|| anyhow!("config {spec:?}: expected key=value, found {kv:?}"))?;
        let n: usize = value.parse().with_context(|| format!("config {spec:?}: bad value for {key}"))?;
        match key {
            "k" => cfg.k = KChoice::Fixed(n),
            "cluster-size" => cfg.k = KChoice::ClusterSize(n),
            "blocks" => cfg.blocks = n,
            "threads" => cfg.threads = n,
            _ => bail!("config {spec:?}: unknown key {key:?}"),
        }
    }
    Ok(cfg)
}

pub fn bench(args: BenchArgs) -> Result<()> {
    let configs = args.configs.iter().map(|c| parse_config(c, &args.sgd)).collect::<Result<Vec<_>>>()?;
    let src = data::open(&args.input, args.format, None, None)?;
    let dims = src.dims;
    let labels = src.labels.clone();
    let all: Vec<LabeledPoint> = src.points.collect::<lsgd::Result<_>>().with_context(|| format!("reading {}", args.input.display()))?;
    let (train, test) = match &args.test_input {
        Some(p) => {
            let t = data::open(p, Format::Auto, Some(dims), Some(&labels))?;
            let test = t.points.collect::<lsgd::Result<_>>().with_context(|| format!("reading {}", p.display()))?;
            (all, test)
        }
        None => train_test_split(all, args.test_fraction, args.sgd.seed)?,
    };
    let rows = bench_compare(&train, &test, &configs)?;

    let doc = json!({
        "schema_version": METRICS_SCHEMA_VERSION,
        "command": "bench",
        "run": {
            "input": args.input,
            "test_input": args.test_input,
            "test_fraction": if args.test_input.is_some() { None } else { Some(args.test_fraction) },
            "split_seed": args.sgd.seed,
            "n_train": train.len(),
            "n_test": test.len(),
            "n_dims": dims,
            "n_classes": labels.len(),
            "params": sgd_params(&args.sgd),
            "configs": args.configs,
        },
        "rows": rows,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    if let Some(p) = &args.json_out {
        write_json(p, &doc)?;
    }
    if let Some(p) = &args.csv_out {
        let mut w = csv::Writer::from_path(p).with_context(|| format!("writing {}", p.display()))?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
    }
    Ok(())
}

pub fn split(args: SplitArgs) -> Result<()> {
    let format = data::detect(&args.input, args.format)?;
    let src = data::open(&args.input, format, None, None)?;
    let block_size = match (args.block_size, args.blocks) {
        (Some(s), _) => s,
        (None, Some(0)) => bail!("--blocks must be >= 1"),
        (None, Some(b)) => (src.n_points as usize).div_ceil(b),
        (None, None) => unreachable!("clap requires one of --block-size/--blocks"),
    };
    fs::create_dir_all(&args.out_dir)?;
    let ext = if format == Format::Dense { "lsgd" } else { "svm" };
    let mut count = 0;
    for block in split_blocks(src.points, BlockSpec::new(block_size)?) {
        let block = block.with_context(|| format!("reading {}", args.input.display()))?;
        let path = args.out_dir.join(format!("block_{:04}.{ext}", block.id));
        data::write(&path, format, &block.points, &src.labels)?;
        count += 1;
    }
    eprintln!("wrote {count} blocks to {}", args.out_dir.display());
    Ok(())
}

pub fn holdout(args: HoldoutArgs) -> Result<()> {
    let format = data::detect(&args.input, args.format)?;
    let src = data::open(&args.input, format, None, None)?;
    let all: Vec<LabeledPoint> = src.points.collect::<lsgd::Result<_>>().with_context(|| format!("reading {}", args.input.display()))?;
    let (train, test) = train_test_split(all, args.test_fraction, args.seed)?;
    data::write(&args.train_out, format, &train, &src.labels)?;
    data::write(&args.test_out, format, &test, &src.labels)?;
    eprintln!("{} train / {} test points (seed {})", train.len(), test.len(), args.seed);
    Ok(())
}

pub fn gen_blobs(args: GenBlobsArgs) -> Result<()> {
    let points = make_blobs(args.classes, args.points_per_class, args.dims, args.separation, args.seed)?;
    let format = if args.format == Format::Auto { Format::Dense } else { args.format };
    data::write(&args.output, format, &points, &LabelMap::identity(args.classes as u32))?;
    eprintln!("wrote {} points to {}", points.len(), args.output.display());
    Ok(())
}
