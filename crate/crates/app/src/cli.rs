//! Subcommands of the `bundlerec` binary.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use bundlerec::corpus::{synth_corpus, write_repository, SynthConfig};
use bundlerec::eval::{k_sweep, run_experiment, EvalConfig, EvalRecord, KReport};
use bundlerec::recmodel::{
    train_hybrid_recommender, train_recommender, FeatureContext, PipelineConfig, Recommender, Strategy, TrainConfig, Variant,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::service::{router, Engine, SessionStore};
use crate::store::{self, RunConfig, Slot};

#[derive(Debug, Parser)]
#[command(name = "bundlerec", version, about = "Multi-round service bundle recommendation")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Global {
    /// Directory holding services.jsonl and mashups.jsonl.
    #[arg(long, global = true, default_value = "data")]
    pub data_dir: PathBuf,
    /// Directory for models and reports.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Root seed; every random choice is derived from it.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Print the resolved configuration as JSON and exit.
    #[arg(long, global = true)]
    pub dump_config: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic clustered corpus to the data directory.
    GenData(GenData),
    /// Train per-fold models (or one model on all data with --full).
    Train(Train),
    /// Run the multi-round experiment on trained fold models.
    Evaluate(Evaluate),
    /// Retrain and evaluate for several neighbour counts.
    SweepK(SweepK),
    /// Rank services for one requirements text.
    Recommend(Recommend),
    /// Start the HTTP session service.
    Serve(Serve),
}

#[derive(Debug, Args, Serialize)]
pub struct GenData {
    #[arg(long, default_value_t = 200)]
    pub mashups: usize,
    #[arg(long, default_value_t = 80)]
    pub services: usize,
    #[arg(long, default_value_t = 500)]
    pub vocab: usize,
    #[arg(long, default_value_t = 30)]
    pub tags: usize,
    #[arg(long, default_value_t = 10)]
    pub providers: usize,
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct ModelArgs {
    #[arg(long, default_value = "hisr")]
    pub variant: Variant,
    #[arg(long, default_value = "attention")]
    pub strategy: Strategy,
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct TrainArgs {
    /// Neighbours used for the invocation-space mashup vector.
    #[arg(long, default_value_t = 20)]
    pub k_neighbors: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 3e-4)]
    pub lr: f64,
    /// Fine-tuning epochs of the hybrid after its head is trained.
    #[arg(long, default_value_t = 3)]
    pub finetune_epochs: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    /// Train Stage-1 samples into the multi-round model instead of a
    /// separate cold-start model.
    #[arg(long)]
    pub unified_cold_start: bool,
    /// JSON file overriding feature pipeline settings.
    #[arg(long)]
    pub pipeline: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Train {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    /// Train a single model set on every mashup (for serving).
    #[arg(long)]
    pub full: bool,
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct EvalArgs {
    #[arg(long, default_value_t = 10)]
    pub top_n: usize,
    /// Rounds to evaluate; 0 is the cold-start stage.
    #[arg(long, value_delimiter = ',', default_values_t = [0usize, 1, 2, 3])]
    pub rounds: Vec<usize>,
    /// Random selections per mashup for each nonzero round.
    #[arg(long, default_value_t = 3)]
    pub draws: usize,
}

#[derive(Debug, Args)]
pub struct Evaluate {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
}

#[derive(Debug, Args)]
pub struct SweepK {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub train: TrainArgs,
    #[command(flatten)]
    pub eval: EvalArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [10usize, 20, 30, 40, 50])]
    pub ks: Vec<usize>,
}

#[derive(Debug, Args)]
pub struct Recommend {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Text file with the mashup requirements.
    #[arg(long)]
    pub requirements: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub tags: Vec<String>,
    /// Ids of services already selected, in selection order.
    #[arg(long, value_delimiter = ',')]
    pub selected: Vec<String>,
    #[arg(long, default_value_t = 10)]
    pub top_n: usize,
    /// Use the models of this fold instead of the full-data models.
    #[arg(long)]
    pub fold: Option<usize>,
}

#[derive(Debug, Args)]
pub struct Serve {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
    /// Append-only session log; replayed on startup if it exists.
    #[arg(long)]
    pub session_log: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub top_n: usize,
    #[arg(long)]
    pub fold: Option<usize>,
}

fn slot_of(fold: Option<usize>) -> Slot {
    fold.map_or(Slot::Full, Slot::Fold)
}

impl TrainArgs {
    fn resolve(&self, seed: u64) -> anyhow::Result<RunConfig> {
        let mut pipeline = match &self.pipeline {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => PipelineConfig::default(),
        };
        pipeline.k_neighbors = self.k_neighbors;
        if self.k_neighbors == 0 || self.folds < 2 || !(self.lr > 0.0) {
            bail!("--k-neighbors must be positive, --folds at least 2 and --lr positive");
        }
        let train = TrainConfig {
            epochs: self.epochs,
            lr: self.lr,
            finetune_epochs: self.finetune_epochs,
            separate_cold_start: !self.unified_cold_start,
            ..TrainConfig::default()
        };
        Ok(RunConfig { seed, folds: self.folds, pipeline, train })
    }
}

impl EvalArgs {
    fn resolve(&self, cfg: &RunConfig) -> EvalConfig {
        EvalConfig { top_n: self.top_n, rounds: self.rounds.clone(), draws: self.draws, seed: store::eval_seed(cfg) }
    }
}

fn dump(value: &impl Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::GenData(a) => gen_data(g, a),
        Command::Train(a) => train(g, a),
        Command::Evaluate(a) => evaluate(g, a),
        Command::SweepK(a) => sweep_k(g, a),
        Command::Recommend(a) => recommend(g, a),
        Command::Serve(a) => serve(g, a),
    }
}

fn gen_data(g: &Global, a: &GenData) -> anyhow::Result<()> {
    let cfg = SynthConfig {
        n_mashups: a.mashups,
        n_services: a.services,
        vocab_size: a.vocab,
        n_tags: a.tags,
        n_providers: a.providers,
        seed: g.seed,
    };
    if g.dump_config {
        return dump(&serde_json::json!({ "seed": g.seed, "data_dir": g.data_dir, "corpus": a }));
    }
    let corpus = synth_corpus(&cfg)?;
    fs::create_dir_all(&g.data_dir).with_context(|| format!("creating {}", g.data_dir.display()))?;
    write_repository(&corpus.repository, &g.data_dir)?;
    println!("wrote {} mashups and {} services to {}", a.mashups, a.services, g.data_dir.display());
    Ok(())
}

/// Loads the fisr and nisr model sets a hybrid is built from and checks
/// they share the hybrid's data split and features.
fn underlying(out: &Path, strategy: Strategy, cfg: &RunConfig) -> anyhow::Result<()> {
    for v in [Variant::Fisr, Variant::Nisr] {
        let dir = store::model_dir(out, v, strategy);
        let Ok(theirs) = store::read_config(&dir) else {
            bail!("hisr is trained from fisr and nisr models; train --variant {v} --strategy {strategy} first");
        };
        if (theirs.seed, theirs.folds, &theirs.pipeline) != (cfg.seed, cfg.folds, &cfg.pipeline) {
            bail!("{} was trained with a different seed, fold count or feature pipeline", dir.display());
        }
        if theirs.train.separate_cold_start != cfg.train.separate_cold_start {
            bail!("{} disagrees on the cold-start setting", dir.display());
        }
    }
    Ok(())
}

fn train(g: &Global, a: &Train) -> anyhow::Result<()> {
    let cfg = a.train.resolve(g.seed)?;
    if g.dump_config {
        return dump(&serde_json::json!({ "model": a.model, "full": a.full, "run": cfg }));
    }
    let (variant, strategy) = (a.model.variant, a.model.strategy);
    if variant == Variant::Hisr {
        underlying(&g.out_dir, strategy, &cfg)?;
    }
    let repo = store::load_repo(&g.data_dir)?;
    let dir = store::model_dir(&g.out_dir, variant, strategy);
    let slots: Vec<Slot> = if a.full { vec![Slot::Full] } else { (0..cfg.folds).map(Slot::Fold).collect() };
    for slot in slots {
        let ctx = store::build_context(repo.clone(), &cfg, slot)?;
        let seed = store::train_seed(&cfg, slot);
        let rec = match variant {
            Variant::Hisr => {
                let f = store::load_recommender(&store::model_dir(&g.out_dir, Variant::Fisr, strategy), slot)?;
                let n = store::load_recommender(&store::model_dir(&g.out_dir, Variant::Nisr, strategy), slot)?;
                train_hybrid_recommender(&ctx, &f, &n, &cfg.train, seed)?
            }
            v => train_recommender(&ctx, v, strategy, &cfg.train, seed)?,
        };
        store::save_recommender(&dir, slot, &rec)?;
        println!("{variant}-{strategy} {}: final loss {:.6}", slot.dir_name(), rec.multi.meta.loss_trace.last().copied().unwrap_or(f64::NAN));
    }
    store::write_config(&dir, &cfg)
}

fn write_report(dir: &Path, stem: &str, report: &impl Serialize, tsv: &str, records: Option<&[EvalRecord]>) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = |ext: &str| dir.join(format!("{stem}.{ext}"));
    fs::write(path("tsv"), tsv).with_context(|| format!("writing {}", path("tsv").display()))?;
    fs::write(path("json"), serde_json::to_string_pretty(report)? + "\n").with_context(|| format!("writing {}", path("json").display()))?;
    if let Some(records) = records {
        let mut f = fs::File::create(path("records.jsonl")).with_context(|| format!("writing {}", path("records.jsonl").display()))?;
        for r in records {
            writeln!(f, "{}", serde_json::to_string(r)?)?;
        }
    }
    Ok(())
}

fn evaluate(g: &Global, a: &Evaluate) -> anyhow::Result<()> {
    let (variant, strategy) = (a.model.variant, a.model.strategy);
    let dir = store::model_dir(&g.out_dir, variant, strategy);
    let cfg = store::read_config(&dir)?;
    let eval = a.eval.resolve(&cfg);
    if g.dump_config {
        return dump(&serde_json::json!({ "model": a.model, "run": cfg, "eval": eval }));
    }
    let repo = store::load_repo(&g.data_dir)?;
    let mut folds: Vec<(FeatureContext, Recommender)> = Vec::new();
    for k in 0..cfg.folds {
        let rec = store::load_recommender(&dir, Slot::Fold(k))?;
        folds.push((store::build_context(repo.clone(), &cfg, Slot::Fold(k))?, rec));
    }
    let pairs: Vec<(&FeatureContext, &Recommender)> = folds.iter().map(|(c, r)| (c, r)).collect();
    let (report, records) = run_experiment(&pairs, &eval)?;
    let tsv = report.to_tsv();
    write_report(&store::reports_dir(&g.out_dir), &format!("{variant}-{strategy}"), &report, &tsv, Some(&records))?;
    print!("{tsv}");
    Ok(())
}

fn sweep_k(g: &Global, a: &SweepK) -> anyhow::Result<()> {
    let (variant, strategy) = (a.model.variant, a.model.strategy);
    if variant == Variant::Fisr {
        bail!("the neighbour count only affects nisr and hisr");
    }
    let cfg = a.train.resolve(g.seed)?;
    let eval = a.eval.resolve(&cfg);
    if g.dump_config {
        return dump(&serde_json::json!({ "model": a.model, "run": cfg, "eval": eval, "ks": a.ks }));
    }
    let fisr = if variant == Variant::Hisr {
        // fisr ignores the neighbour count, so it is trained once and reused
        let dir = store::model_dir(&g.out_dir, Variant::Fisr, strategy);
        let Ok(theirs) = store::read_config(&dir) else {
            bail!("the hisr sweep reuses fisr models; train --variant fisr --strategy {strategy} first");
        };
        let same = PipelineConfig { k_neighbors: cfg.pipeline.k_neighbors, ..theirs.pipeline.clone() } == cfg.pipeline;
        if !same || (theirs.seed, theirs.folds) != (cfg.seed, cfg.folds) || theirs.train.separate_cold_start != cfg.train.separate_cold_start {
            bail!("{} was trained with a different seed, fold count or feature pipeline", dir.display());
        }
        Some((0..cfg.folds).map(|k| store::load_recommender(&dir, Slot::Fold(k))).collect::<anyhow::Result<Vec<_>>>()?)
    } else {
        None
    };
    let repo = store::load_repo(&g.data_dir)?;
    let contexts = (0..cfg.folds).map(|k| store::build_context(repo.clone(), &cfg, Slot::Fold(k))).collect::<anyhow::Result<Vec<_>>>()?;
    let reports: Vec<KReport> = k_sweep(&contexts, &a.ks, &eval, |ctx| {
        let slot = Slot::Fold(ctx.fold.index);
        let seed = store::train_seed(&cfg, slot);
        let nisr = train_recommender(ctx, Variant::Nisr, strategy, &cfg.train, seed)?;
        match &fisr {
            Some(f) => train_hybrid_recommender(ctx, &f[ctx.fold.index], &nisr, &cfg.train, seed),
            None => Ok(nisr),
        }
    })?;
    let mut tsv = String::new();
    for (i, r) in reports.iter().enumerate() {
        if i == 0 {
            tsv.push_str(&format!("k\t{}", r.report.tsv_header()));
        }
        for line in r.report.tsv_rows().lines() {
            tsv.push_str(&format!("{}\t{line}\n", r.k));
        }
    }
    write_report(&store::reports_dir(&g.out_dir), &format!("sweep-k-{variant}-{strategy}"), &reports, &tsv, None)?;
    print!("{tsv}");
    Ok(())
}

#[derive(Serialize)]
struct Recommendation<'a> {
    rank: usize,
    service_id: &'a str,
    name: &'a str,
    score: f64,
}

fn recommend(g: &Global, a: &Recommend) -> anyhow::Result<()> {
    if g.dump_config {
        return dump(&serde_json::json!({
            "model": a.model, "requirements": a.requirements, "tags": a.tags,
            "selected": a.selected, "top_n": a.top_n, "fold": a.fold,
        }));
    }
    let text = fs::read_to_string(&a.requirements).with_context(|| format!("reading {}", a.requirements.display()))?;
    let engine = Engine::load(&g.data_dir, &g.out_dir, a.model.variant, a.model.strategy, slot_of(a.fold), a.top_n)?;
    let selected = a
        .selected
        .iter()
        .map(|id| engine.repo().service_idx(id).with_context(|| format!("unknown service {id}")))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let ranking = engine.rank(&Engine::target(&text, &a.tags), &selected)?;
    let out: Vec<Recommendation> = ranking
        .items
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let svc = engine.repo().service(s.service);
            Recommendation { rank: i + 1, service_id: &svc.id, name: &svc.name, score: s.score }
        })
        .collect();
    dump(&out)
}

fn serve(g: &Global, a: &Serve) -> anyhow::Result<()> {
    if g.dump_config {
        return dump(&serde_json::json!({ "model": a.model, "addr": a.addr, "session_log": a.session_log, "top_n": a.top_n, "fold": a.fold }));
    }
    let store = Arc::new(match &a.session_log {
        Some(path) => SessionStore::with_log(path)?,
        None => SessionStore::new(),
    });
    let engine = Engine::load(&g.data_dir, &g.out_dir, a.model.variant, a.model.strategy, slot_of(a.fold), a.top_n)?;
    store.set_engine(Arc::new(engine));
    if let Some(path) = &a.session_log {
        let replayed = store.replay(path)?;
        log::info!("replayed {} logged changes from {}", replayed.len(), path.display());
    }
    let rt = tokio::runtime::Runtime::new().context("starting the async runtime")?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&a.addr).await.with_context(|| format!("binding {}", a.addr))?;
        println!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(store)).await.context("serving")
    })
}
