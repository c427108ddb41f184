//! Subcommand drivers. Each returns the files to write; nothing touches the
//! output directory until computation has finished.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clustab::gridsearch::TableMeta;
use clustab::selection::Mode;
use clustab::{
    best_nclust_cv, best_nclust_cv_auto, evaluate, evaluate_auto, internal_sweep, search,
    with_workers, Scalar, SearchSpace, StabilityResult,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{self, Loaded, Precision, Prepared};
use crate::svg::{self, CurvePoint};

/// Exit status classes.
#[derive(Debug)]
pub enum Failure {
    /// Bad config, data or prior report; detected before computing.
    Input(anyhow::Error),
    /// A computation step failed.
    Compute(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Compute(_) => 1,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Input(e) | Failure::Compute(e) => e,
        }
    }
}

trait Classify<T> {
    fn input(self) -> Result<T, Failure>;
    fn compute(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into()))
    }

    fn compute(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Compute(e.into()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Select,
    Evaluate,
    Gridsearch,
    Internal,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Select => "select",
            Command::Evaluate => "evaluate",
            Command::Gridsearch => "gridsearch",
            Command::Internal => "internal",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Options {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    /// Prior selection report for `evaluate`; defaults to
    /// `<out>/stability.json`.
    pub stability: Option<PathBuf>,
}

/// Files produced by a run, plus a failure that still leaves artifacts
/// (a grid search where every configuration failed).
struct Output {
    files: Vec<(&'static str, String)>,
    failure: Option<Failure>,
}

/// Runs `cmd` and writes its artifacts into the output directory.
pub fn run(cmd: Command, opts: &Options) -> Result<PathBuf, Failure> {
    let loaded = config::load(&opts.config).input()?;
    let out_dir = opts
        .out
        .clone()
        .or_else(|| loaded.config.out.as_ref().map(|p| loaded.base_dir.join(p)))
        .unwrap_or_else(|| PathBuf::from("out"));
    let workers = opts.workers.or(loaded.config.workers).unwrap_or(0);
    let seed = opts.seed.unwrap_or(loaded.config.cv.base_seed);
    let ctx = RunCtx {
        loaded: &loaded,
        seed,
        stability: opts
            .stability
            .clone()
            .unwrap_or_else(|| out_dir.join("stability.json")),
    };

    let started = Instant::now();
    let output = with_workers(workers, || match loaded.config.precision {
        Precision::F64 => dispatch::<f64>(cmd, &ctx),
        Precision::F32 => dispatch::<f32>(cmd, &ctx),
    })
    .input()??;
    let wall = started.elapsed().as_secs_f64();

    let provenance = json!({
        "command": cmd.name(),
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": loaded.hash,
        "seed": seed,
        "config": loaded.config,
        "workers": workers,
        "wall_clock_seconds": wall,
        "succeeded": output.failure.is_none(),
    });
    let mut files = output.files;
    files.push(("provenance.json", pretty(&provenance)));
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))
        .compute()?;
    for (name, body) in &files {
        let path = out_dir.join(name);
        std::fs::write(&path, body)
            .with_context(|| format!("cannot write {}", path.display()))
            .compute()?;
    }
    match output.failure {
        Some(f) => Err(f),
        None => Ok(out_dir),
    }
}

struct RunCtx<'a> {
    loaded: &'a Loaded,
    seed: u64,
    stability: PathBuf,
}

fn dispatch<T: Scalar>(cmd: Command, ctx: &RunCtx) -> Result<Output, Failure> {
    let data: Prepared<T> = ctx.loaded.prepare().input()?;
    match cmd {
        Command::Select => select(ctx, &data),
        Command::Evaluate => evaluate_cmd(ctx, &data),
        Command::Gridsearch => gridsearch(ctx, &data),
        Command::Internal => internal(ctx, &data),
    }
}

fn pretty<V: Serialize>(v: &V) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serializes");
    s.push('\n');
    s
}

fn header_line(ctx: &RunCtx) -> String {
    format!("# config_hash={} seed={}\n", ctx.loaded.hash, ctx.seed)
}

fn grid(ctx: &RunCtx) -> clustab::CvGrid {
    let mut g = ctx.loaded.config.cv.clone();
    g.base_seed = ctx.seed;
    g
}

/// Wraps `body` with an integrity hash over its canonical JSON.
pub fn seal(mut body: Value) -> Value {
    let digest = config::sha256_hex(body.to_string().as_bytes());
    body.as_object_mut()
        .expect("report is an object")
        .insert("integrity".into(), Value::String(digest));
    body
}

/// Checks and strips the integrity hash written by [`seal`].
pub fn unseal(mut sealed: Value) -> anyhow::Result<Value> {
    let obj = sealed
        .as_object_mut()
        .ok_or_else(|| anyhow!("report is not a JSON object"))?;
    let stored = match obj.remove("integrity") {
        Some(Value::String(s)) => s,
        _ => bail!("report has no integrity hash"),
    };
    if config::sha256_hex(sealed.to_string().as_bytes()) != stored {
        bail!("integrity check failed: report was modified after it was written");
    }
    Ok(sealed)
}

fn run_selection<T: Scalar>(ctx: &RunCtx, data: &Prepared<T>) -> clustab::Result<StabilityResult> {
    let cfg = &ctx.loaded.config;
    let mut g = grid(ctx);
    if cfg.clusterer.is_auto_k() {
        g.k_values.clear();
        best_nclust_cv_auto(
            &data.train,
            &cfg.clusterer,
            &cfg.classifier,
            &g,
            data.stratifier.as_ref(),
        )
    } else {
        best_nclust_cv(
            &data.train,
            &cfg.clusterer,
            &cfg.classifier,
            &g,
            data.stratifier.as_ref(),
        )
    }
}

fn select<T: Scalar>(ctx: &RunCtx, data: &Prepared<T>) -> Result<Output, Failure> {
    let cfg = &ctx.loaded.config;
    let result = run_selection(ctx, data).compute()?;

    let report = seal(json!({
        "config_hash": ctx.loaded.hash,
        "seed": ctx.seed,
        "clusterer": cfg.clusterer,
        "classifier": cfg.classifier,
        "cv": grid(ctx),
        "result": result,
    }));

    let mut csv = header_line(ctx);
    csv.push_str("k,mean_norm,ci_lo,ci_hi,mean_train,random_threshold\n");
    let mut points = Vec::new();
    for (&k, s) in &result.per_k {
        let _ = writeln!(
            csv,
            "{k},{},{},{},{},1",
            s.mean_norm, s.ci95.0, s.ci95.1, s.mean_train
        );
        points.push(CurvePoint {
            k,
            mean: s.mean_norm,
            ci_lo: s.ci95.0,
            ci_hi: s.ci95.1,
            train: s.mean_train,
        });
    }
    let title = format!(
        "{} / {}: k* = {}",
        cfg.clusterer.name(),
        cfg.classifier.name(),
        result.k_star
    );
    let plot = svg::render(
        &points,
        &title,
        &format!("config_hash={} seed={}", ctx.loaded.hash, ctx.seed),
    );
    Ok(Output {
        files: vec![
            ("stability.json", pretty(&report)),
            ("curve.csv", csv),
            ("curve.svg", plot),
        ],
        failure: None,
    })
}

fn read_prior(path: &Path, ctx: &RunCtx) -> anyhow::Result<StabilityResult> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read prior selection report {}", path.display()))?;
    let sealed: Value = serde_json::from_str(&text)
        .with_context(|| format!("{} is not valid JSON", path.display()))?;
    let body = unseal(sealed).with_context(|| format!("refusing {}", path.display()))?;
    if body.get("config_hash").and_then(Value::as_str) != Some(ctx.loaded.hash.as_str()) {
        bail!(
            "{} was produced from a different configuration",
            path.display()
        );
    }
    if body.get("seed").and_then(Value::as_u64) != Some(ctx.seed) {
        bail!("{} was produced with a different seed", path.display());
    }
    let result = body
        .get("result")
        .cloned()
        .ok_or_else(|| anyhow!("{} has no result", path.display()))?;
    Ok(serde_json::from_value(result)?)
}

fn evaluate_cmd<T: Scalar>(ctx: &RunCtx, data: &Prepared<T>) -> Result<Output, Failure> {
    let cfg = &ctx.loaded.config;
    let prior = read_prior(&ctx.stability, ctx).input()?;
    let report = match prior.mode {
        Mode::FixedK => evaluate(
            &data.train,
            &data.test,
            prior.k_star,
            &cfg.clusterer,
            &cfg.classifier,
            ctx.seed,
        ),
        Mode::AutoK => {
            let mut g = grid(ctx);
            g.k_values.clear();
            evaluate_auto(
                &data.train,
                &data.test,
                &prior,
                &cfg.clusterer,
                &cfg.classifier,
                &g,
                data.stratifier.as_ref(),
            )
        }
    }
    .compute()?;
    let body = json!({
        "config_hash": ctx.loaded.hash,
        "seed": ctx.seed,
        "mode": prior.mode,
        "k_star": prior.k_star,
        "report": report,
    });
    Ok(Output {
        files: vec![("evaluation.json", pretty(&body))],
        failure: None,
    })
}

fn gridsearch<T: Scalar>(ctx: &RunCtx, data: &Prepared<T>) -> Result<Output, Failure> {
    let cfg = &ctx.loaded.config;
    let sc = cfg
        .search
        .as_ref()
        .ok_or_else(|| anyhow!("gridsearch needs a `search` section"))
        .input()?;
    let space = SearchSpace {
        pairs: sc.pairs.clone(),
        cv: grid(ctx),
        true_k: sc.true_k,
    };
    clustab::expand_grid(&space).input()?;
    let outcome = search(
        &data.train,
        Some(&data.test),
        &space,
        data.stratifier.as_ref(),
    )
    .compute()?;
    let meta = TableMeta {
        dataset: data.dataset_name.clone(),
        classes: data.n_classes,
        preprocessing: serde_json::to_value(cfg.preprocessing)
            .ok()
            .and_then(|v| v.as_str().map(String::from))
            .unwrap_or_default(),
    };
    let mut csv = header_line(ctx);
    csv.push_str(&outcome.to_table_csv(&meta));
    let body = json!({
        "config_hash": ctx.loaded.hash,
        "seed": ctx.seed,
        "leaderboard": outcome,
    });
    let failure = outcome.best.is_none().then(|| {
        let first = outcome
            .ranked
            .first()
            .and_then(|e| e.error.clone())
            .unwrap_or_default();
        Failure::Compute(anyhow!(
            "all {} configurations failed; first error: {first}",
            outcome.ranked.len()
        ))
    });
    Ok(Output {
        files: vec![
            ("leaderboard.json", pretty(&body)),
            ("leaderboard.csv", csv),
        ],
        failure,
    })
}

fn internal<T: Scalar>(ctx: &RunCtx, data: &Prepared<T>) -> Result<Output, Failure> {
    let cfg = &ctx.loaded.config;
    if cfg.clusterer.is_auto_k() {
        return Err(Failure::Input(anyhow!(
            "internal indices need a clusterer with a fixed k"
        )));
    }
    let ks = &cfg.cv.k_values;
    if ks.is_empty() {
        return Err(Failure::Input(anyhow!("cv.k_values must not be empty")));
    }
    let mut csv = header_line(ctx);
    csv.push_str("split,k,silhouette,davies_bouldin,is_best_silh,is_best_db\n");
    for (split, d) in [("train", &data.train), ("test", &data.test)] {
        let sweep = internal_sweep(d, &cfg.clusterer, ks, ctx.seed)
            .with_context(|| format!("{split} split"))
            .compute()?;
        for (&k, s) in &sweep.per_k {
            let _ = writeln!(
                csv,
                "{split},{k},{},{},{},{}",
                s.silhouette,
                s.davies_bouldin,
                k == sweep.best_silhouette_k,
                k == sweep.best_db_k
            );
        }
    }
    Ok(Output {
        files: vec![("internal.csv", csv)],
        failure: None,
    })
}
