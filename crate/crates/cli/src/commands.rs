use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use fairgram::bench::{audit_disjointness, build_suite, suite_summary, training_pairs, BuiltTest};
use fairgram::client::{CachedClient, GenerationClient, HttpClient, SamplingParams};
use fairgram::dataset::jsonl::write_atomic;
use fairgram::dataset::{
    file_digest, mix, read_jsonl, sha256_hex, split, write_jsonl, Backend, DatasetManifest, InstanceRecord,
    PipelineConfig, SPLIT_NAMES,
};
use fairgram::demo::demo_lexicon;
use fairgram::eval::{evaluate, MetricReport, Prediction, ProductionOptions, Setting};
use fairgram::grammar::{SlotLabel, Span, StructKind};
use fairgram::lexicon::{
    augment_sparse_slot, cluster_lexicon, ingest_plead, read_clusters, select_clusters, write_clusters, Cluster,
    ClusterIndex, Selection, TrigramHasher,
};
use fairgram::planner::{instantiate, plan_inventory, verify_balance, BalanceReport, Plan};
use fairgram::realize::{template_batch, ExemplarStore, RealizedPost, Realizer};
use fairgram::tree::{partition, InstanceTree, Intent, UNSPECIFIED_TARGET};
use log::{info, warn};
use serde::Serialize;

use crate::{BackendArg, Baseline, BenchAction, Cli, Command, ProductionArgs, SettingArg};

/// Held-out clusters per kind in the built-in lexicon.
const DEMO_HELD_OUT: usize = 2;

struct Ctx {
    cfg: PipelineConfig,
    seed: u64,
    out: PathBuf,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn or_default(&self, given: Option<PathBuf>, name: &str) -> PathBuf {
        given.unwrap_or_else(|| self.path(name))
    }
}

pub fn dispatch(cli: Cli) -> Result<ExitCode> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::from_path(p)?,
        None => PipelineConfig::desk(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let ctx = Ctx { seed: cfg.seed, cfg, out: cli.out };
    std::fs::create_dir_all(&ctx.out).with_context(|| format!("creating {}", ctx.out.display()))?;
    match cli.command {
        Command::Ingest { input } => ingest(&ctx, &input),
        Command::Cluster { spans, held_out } => cluster(&ctx, spans.as_deref(), held_out),
        Command::Augment { spans, label } => augment(&ctx, &spans, &label),
        Command::Plan => plan_cmd(&ctx),
        Command::Build { clusters, allow_infeasible } => {
            build(&ctx, clusters.as_deref(), allow_infeasible)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Realize { backend, trees, clusters } => {
            let backend = match backend {
                Some(BackendArg::Template) => Backend::Template,
                Some(BackendArg::Remote) => Backend::Remote,
                None => ctx.cfg.realize.backend,
            };
            realize(&ctx, backend, &ctx.or_default(trees, "trees.jsonl"), clusters.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::VerifyBalance { dataset, plan, strict } => {
            let report = balance(&ctx, &ctx.or_default(dataset, "dataset.jsonl"), plan)?;
            Ok(if strict && !report.is_balanced() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Command::Split { dataset } => {
            split_cmd(&ctx, &ctx.or_default(dataset, "dataset.jsonl"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Mix { real, synthetic, fraction, total } => mix_cmd(&ctx, &real, &synthetic, fraction, total),
        Command::Bench { action: BenchAction::Build { train, clusters } } => {
            bench_build(&ctx, &ctx.or_default(train, "train.jsonl"), clusters.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench { action: BenchAction::Audit { bench, train } } => {
            let n = bench_audit(&ctx.or_default(bench, "bench.jsonl"), &ctx.or_default(train, "train.jsonl"))?;
            Ok(if n == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Predict { gold, baseline, train } => {
            predict(&ctx, &gold, baseline, &ctx.or_default(train, "train.jsonl"))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval { setting, gold, predictions, productions } => {
            eval(&ctx, setting, &gold, &predictions, productions)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Report => report(&ctx),
        Command::Run { clusters } => run(&ctx, clusters.as_deref()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<String> {
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    write_atomic(path, body.as_bytes())?;
    Ok(sha256_hex(body.as_bytes()))
}

fn read_records(path: &Path) -> Result<Vec<InstanceRecord>> {
    read_jsonl(path).with_context(|| format!("reading records from {}", path.display()))
}

fn records_to_trees(records: &[InstanceRecord]) -> Result<Vec<InstanceTree>> {
    records.iter().map(|r| r.to_tree().with_context(|| format!("record {}", r.id))).collect()
}

fn ingest(ctx: &Ctx, input: &Path) -> Result<ExitCode> {
    let got = ingest_plead(input)?;
    for d in &got.diagnostics {
        warn!("{d}");
    }
    let mut spans = got.spans.clone();
    spans.extend(got.contexts.iter().cloned());
    let path = ctx.path("spans.jsonl");
    write_jsonl(&path, &spans)?;
    println!(
        "{} records, {} slot spans, {} context spans, {} skipped -> {}",
        got.records,
        got.spans.len(),
        got.contexts.len(),
        got.diagnostics.len(),
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn load_clusters(ctx: &Ctx, path: Option<&Path>) -> Result<Vec<Cluster>> {
    match path {
        Some(p) => Ok(read_clusters(p)?),
        None => {
            info!("using the built-in demo lexicon");
            Ok(demo_lexicon(&ctx.cfg.clusters, DEMO_HELD_OUT))
        }
    }
}

fn selection(ctx: &Ctx, clusters: &[Cluster]) -> Selection {
    select_clusters(clusters, &ctx.cfg.clusters)
}

fn cluster(ctx: &Ctx, spans: Option<&Path>, held_out: usize) -> Result<ExitCode> {
    let clusters = match spans {
        Some(p) => {
            let spans: Vec<Span> = read_jsonl(p)?;
            cluster_lexicon(&spans, ctx.cfg.lexicon.threshold, &TrigramHasher::default())?
        }
        None => demo_lexicon(&ctx.cfg.clusters, held_out),
    };
    let path = ctx.path("clusters.jsonl");
    write_clusters(&path, &clusters)?;
    let mut per_kind: BTreeMap<StructKind, usize> = BTreeMap::new();
    for c in clusters.iter().filter(|c| c.label != SlotLabel::ProtectedCharacteristic) {
        *per_kind.entry(c.kind()).or_insert(0) += 1;
    }
    let sel = selection(ctx, &clusters);
    for (k, n) in &per_kind {
        println!("{:<4} {:>5} clusters, {:>3} selected", k.symbol(), n, sel.selected(*k).len());
    }
    println!("-> {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn remote_client(ctx: &Ctx) -> Result<Arc<dyn GenerationClient>> {
    let http = ctx.cfg.realize.http.clone().context("the remote backend needs [realize.http] in the config")?;
    let client = HttpClient::new(http);
    Ok(match &ctx.cfg.realize.cache_dir {
        Some(dir) => Arc::new(CachedClient::new(client, dir)?),
        None => Arc::new(client),
    })
}

fn augment(ctx: &Ctx, spans_path: &Path, label: &str) -> Result<ExitCode> {
    let label: SlotLabel = label.parse()?;
    let spans: Vec<Span> = read_jsonl(spans_path)?;
    let existing: Vec<Span> = spans.iter().filter(|s| s.label == label).cloned().collect();
    if existing.len() >= ctx.cfg.lexicon.sparse_floor {
        println!("{label}: {} spans, at or above the floor of {}", existing.len(), ctx.cfg.lexicon.sparse_floor);
        return Ok(ExitCode::SUCCESS);
    }
    let client = remote_client(ctx)?;
    let params = SamplingParams { temperature: ctx.cfg.realize.temperature, top_p: ctx.cfg.realize.top_p };
    let added = augment_sparse_slot(&existing, label, client.as_ref(), &params);
    let mut all = spans;
    all.extend(added.iter().cloned());
    let path = ctx.path("spans.augmented.jsonl");
    write_jsonl(&path, &all)?;
    println!("{label}: {} new spans -> {}", added.len(), path.display());
    Ok(ExitCode::SUCCESS)
}

fn make_plan(ctx: &Ctx) -> Result<Plan> {
    Ok(plan_inventory(&ctx.cfg.planner())?)
}

fn print_plan(plan: &Plan) {
    println!("instances: {}  without injections: {}", plan.total, plan.no_injection);
    for (k, n) in &plan.pair_n {
        println!("{:<4} pair count {n}", k.symbol());
    }
    for (k, n) in &plan.class_n {
        println!("{:<4} per-class count {n}", k.symbol());
    }
    for i in &plan.issues {
        println!("issue: {i}");
    }
    println!("{}", if plan.is_feasible() { "feasible" } else { "infeasible" });
}

fn plan_cmd(ctx: &Ctx) -> Result<ExitCode> {
    let plan = make_plan(ctx)?;
    write_json(&ctx.path("plan.json"), &plan)?;
    print_plan(&plan);
    Ok(if plan.is_feasible() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn build(ctx: &Ctx, clusters: Option<&Path>, allow_infeasible: bool) -> Result<Vec<InstanceTree>> {
    let plan = make_plan(ctx)?;
    if !allow_infeasible {
        plan.require_feasible()?;
    }
    let clusters = load_clusters(ctx, clusters)?;
    let sel = selection(ctx, &clusters);
    let flat = instantiate(&plan, &sel, ctx.seed)?;
    let trees: Vec<InstanceTree> = flat.iter().map(partition).collect::<fairgram::Result<_>>()?;
    let path = ctx.path("trees.jsonl");
    write_jsonl(&path, &trees)?;
    println!("{} trees -> {}", trees.len(), path.display());
    Ok(trees)
}

fn realize_trees(ctx: &Ctx, backend: Backend, trees: &[InstanceTree], clusters: Option<&Path>) -> Result<Vec<RealizedPost>> {
    match backend {
        Backend::Template => Ok(template_batch(trees, ctx.seed)),
        Backend::Remote => {
            let all = load_clusters(ctx, clusters)?;
            let index = ClusterIndex::new(all, Arc::new(TrigramHasher::default()), ctx.cfg.lexicon.threshold)?;
            let realizer = Realizer {
                client: remote_client(ctx)?,
                exemplars: ExemplarStore::default_shots(),
                index: Some(Arc::new(index)),
                settings: ctx.cfg.realize.settings(),
            };
            let mut posts = Vec::with_capacity(trees.len());
            for (tree, r) in trees.iter().zip(realizer.realize_batch(trees)?) {
                match r {
                    Ok(p) => posts.push(p),
                    Err(e) => warn!("{}: not realized: {e}", tree.id),
                }
            }
            Ok(posts)
        }
    }
}

/// Records for complete posts, in tree order.
fn complete_records(trees: &[InstanceTree], posts: &[RealizedPost], test_name: Option<&str>) -> Vec<InstanceRecord> {
    let by_id: BTreeMap<&str, &RealizedPost> = posts.iter().map(|p| (p.id.as_str(), p)).collect();
    trees
        .iter()
        .filter_map(|t| {
            let p = by_id.get(t.id.as_str()).filter(|p| p.is_complete())?;
            Some(InstanceRecord::new(t, Some(p), test_name.map(str::to_string)))
        })
        .collect()
}

fn realize(ctx: &Ctx, backend: Backend, trees_path: &Path, clusters: Option<&Path>) -> Result<Vec<InstanceRecord>> {
    let trees: Vec<InstanceTree> = read_jsonl(trees_path).with_context(|| format!("reading {}", trees_path.display()))?;
    let posts = realize_trees(ctx, backend, &trees, clusters)?;
    write_jsonl(&ctx.path("posts.jsonl"), &posts)?;
    let records = complete_records(&trees, &posts, None);
    let path = ctx.path("dataset.jsonl");
    write_jsonl(&path, &records)?;
    let incomplete = trees.len() - records.len();
    if incomplete > 0 {
        warn!("{incomplete} trees without a complete post were left out");
    }
    println!("{} posts, {} complete -> {}", posts.len(), records.len(), path.display());
    Ok(records)
}

fn balance(ctx: &Ctx, dataset: &Path, with_plan: bool) -> Result<BalanceReport> {
    let trees = records_to_trees(&read_records(dataset)?)?;
    let plan = if with_plan { Some(make_plan(ctx)?) } else { None };
    let report = verify_balance(&trees, plan.as_ref());
    write_json(&ctx.path("balance.json"), &report)?;
    print!("{}", report.table());
    Ok(report)
}

fn split_cmd(ctx: &Ctx, dataset: &Path) -> Result<DatasetManifest> {
    let records = read_records(dataset)?;
    let parts = split(records, InstanceRecord::intent, ctx.cfg.split, ctx.seed)?;
    let mut manifest = DatasetManifest::new(&ctx.cfg, ctx.seed);
    manifest.notes = parts.notes.clone();
    for (name, part) in SPLIT_NAMES.iter().zip(&parts.parts) {
        let digest = write_jsonl(&ctx.path(&format!("{name}.jsonl")), part)?;
        manifest.add_split(name, part, digest);
        println!("{name:<5} {:>6}", part.len());
    }
    write_json(&ctx.path("manifest.json"), &manifest)?;
    Ok(manifest)
}

fn mix_cmd(ctx: &Ctx, real: &Path, synthetic: &Path, fraction: f64, total: usize) -> Result<ExitCode> {
    let real = read_records(real)?;
    let syn = read_records(synthetic)?;
    let mixed = mix(&real, &syn, fraction, total, ctx.seed)?;
    let path = ctx.path("mixed.jsonl");
    write_jsonl(&path, &mixed)?;
    println!("{} records ({:.0}% synthetic) -> {}", mixed.len(), fraction * 100.0, path.display());
    Ok(ExitCode::SUCCESS)
}

fn bench_build(ctx: &Ctx, train: &Path, clusters: Option<&Path>) -> Result<Vec<BuiltTest>> {
    let train = records_to_trees(&read_records(train)?)?;
    let pairs = training_pairs(&train);
    let all = load_clusters(ctx, clusters)?;
    let sel = selection(ctx, &all);
    let built = build_suite(&ctx.cfg.bench.tests(), &sel, &pairs, ctx.seed)?;
    let mut records = Vec::new();
    for b in &built {
        let posts = realize_trees(ctx, ctx.cfg.realize.backend, &b.trees, clusters)?;
        records.extend(complete_records(&b.trees, &posts, Some(&b.test.name)));
        println!("test {:<3} {:>5} instances, shortfall {}", b.test.name, b.trees.len(), b.shortfall);
    }
    let path = ctx.path("bench.jsonl");
    write_jsonl(&path, &records)?;
    write_json(&ctx.path("bench_manifest.json"), &suite_summary(&built))?;
    println!("{} records -> {}", records.len(), path.display());
    Ok(built)
}

fn bench_audit(bench: &Path, train: &Path) -> Result<usize> {
    let bench = read_records(bench)?;
    let pairs = training_pairs(&records_to_trees(&read_records(train)?)?);
    let mut by_test: BTreeMap<String, Vec<InstanceRecord>> = BTreeMap::new();
    for r in bench {
        by_test.entry(r.test_name.clone().unwrap_or_default()).or_default().push(r);
    }
    let mut total = 0;
    for (name, recs) in &by_test {
        let v = audit_disjointness(&records_to_trees(recs)?, &pairs);
        println!("test {name:<3} {:>5} instances, {} violations", recs.len(), v.len());
        for x in v.iter().take(5) {
            println!("  {}: {} shared pairs", x.instance, x.pairs.len());
        }
        total += v.len();
    }
    println!("{}", if total == 0 { "disjoint" } else { "not disjoint" });
    Ok(total)
}

fn predict(ctx: &Ctx, gold: &Path, baseline: Baseline, train: &Path) -> Result<PathBuf> {
    let gold = read_records(gold)?;
    let preds: Vec<Prediction> = match baseline {
        Baseline::Gold => gold
            .iter()
            .map(|r| Prediction {
                id: r.id.clone(),
                intent: Some(r.intent().to_string()),
                trees: Some(vec![r.to_bnode().to_string()]),
            })
            .collect(),
        Baseline::Majority => {
            let mut counts: BTreeMap<Intent, usize> = BTreeMap::new();
            for r in read_records(train)? {
                *counts.entry(r.intent()).or_insert(0) += 1;
            }
            let majority = Intent::ALL
                .iter()
                .copied()
                .max_by_key(|i| (counts.get(i).copied().unwrap_or(0), std::cmp::Reverse(*i)))
                .unwrap_or(Intent::NotHateful);
            let tree = format!("[IN:{majority} [SL:Target {UNSPECIFIED_TARGET}]]");
            gold.iter()
                .map(|r| Prediction { id: r.id.clone(), intent: Some(majority.to_string()), trees: Some(vec![tree.clone()]) })
                .collect()
        }
    };
    let path = ctx.path("predictions.jsonl");
    write_jsonl(&path, &preds)?;
    println!("{} predictions -> {}", preds.len(), path.display());
    Ok(path)
}

fn eval(ctx: &Ctx, setting: SettingArg, gold: &Path, predictions: &Path, p: ProductionArgs) -> Result<MetricReport> {
    let gold: Vec<_> = read_records(gold)?.iter().map(InstanceRecord::to_gold).collect();
    let preds: Vec<Prediction> = read_jsonl(predictions)?;
    let (setting, name) = match setting {
        SettingArg::Cls => (Setting::Cls, "cls"),
        SettingArg::Icsf => (Setting::Icsf, "icsf"),
    };
    let opts = ProductionOptions { include_intents: !p.no_intents, multiset: p.multiset };
    let report = evaluate(&gold, &preds, setting, opts);
    write_json(&ctx.path(&format!("metrics-{name}.json")), &report)?;
    print!("{}", report.table());
    Ok(report)
}

const MODEL_NOTE: &str = "note: scores here come from baseline predictions. Scores for fine-tuned 8-9B parameter \
models need those models; score their predictions with `fairgram eval`.";

fn report(ctx: &Ctx) -> Result<ExitCode> {
    let mut found = false;
    if let Ok(text) = std::fs::read_to_string(ctx.path("manifest.json")) {
        let m: DatasetManifest = serde_json::from_str(&text)?;
        found = true;
        println!("dataset: {} instances, seed {}", m.total, m.seed);
        for (name, s) in &m.splits {
            let intents: Vec<String> = s.intents.iter().map(|(i, n)| format!("{i}={n}")).collect();
            println!("  {name:<5} {:>6}  {}", s.size, intents.join(" "));
        }
    }
    if let Ok(text) = std::fs::read_to_string(ctx.path("balance.json")) {
        let b: BalanceReport = serde_json::from_str(&text)?;
        found = true;
        println!("balance: {} violations over {} instances", b.violations.len(), b.total);
    }
    if let Ok(text) = std::fs::read_to_string(ctx.path("bench_manifest.json")) {
        let v: BTreeMap<String, serde_json::Value> = serde_json::from_str(&text)?;
        found = true;
        let sizes: Vec<String> = v.iter().map(|(k, x)| format!("{k}={}", x["count"])).collect();
        println!("bench: {}", sizes.join(" "));
    }
    for name in ["cls", "icsf"] {
        if let Ok(text) = std::fs::read_to_string(ctx.path(&format!("metrics-{name}.json"))) {
            let r: MetricReport = serde_json::from_str(&text)?;
            found = true;
            println!("metrics ({name}):");
            print!("{}", r.table());
        }
    }
    if !found {
        bail!("nothing to report in {}", ctx.out.display());
    }
    println!("{MODEL_NOTE}");
    Ok(ExitCode::SUCCESS)
}

/// Files whose digests make up the run digest.
const RUN_OUTPUTS: [&str; 15] = [
    "plan.json",
    "trees.jsonl",
    "posts.jsonl",
    "dataset.jsonl",
    "balance.json",
    "train.jsonl",
    "dev.jsonl",
    "test.jsonl",
    "manifest.json",
    "bench.jsonl",
    "bench_manifest.json",
    "predictions.jsonl",
    "metrics-cls.json",
    "metrics-icsf.json",
    "report.txt",
];

fn run(ctx: &Ctx, clusters: Option<&Path>) -> Result<ExitCode> {
    let plan = make_plan(ctx)?;
    write_json(&ctx.path("plan.json"), &plan)?;
    print_plan(&plan);
    build(ctx, clusters, false)?;
    realize(ctx, ctx.cfg.realize.backend, &ctx.path("trees.jsonl"), clusters)?;
    let report = balance(ctx, &ctx.path("dataset.jsonl"), true)?;
    split_cmd(ctx, &ctx.path("dataset.jsonl"))?;
    bench_build(ctx, &ctx.path("train.jsonl"), clusters)?;
    let leaks = bench_audit(&ctx.path("bench.jsonl"), &ctx.path("train.jsonl"))?;
    predict(ctx, &ctx.path("bench.jsonl"), Baseline::Majority, &ctx.path("train.jsonl"))?;
    let args = ProductionArgs { no_intents: false, multiset: false };
    let cls = eval(ctx, SettingArg::Cls, &ctx.path("bench.jsonl"), &ctx.path("predictions.jsonl"), args)?;
    eval(ctx, SettingArg::Icsf, &ctx.path("bench.jsonl"), &ctx.path("predictions.jsonl"), args)?;
    let summary = format!(
        "balanced: {}\nbench leaks: {leaks}\nbaseline micro F1: {:.2}\n{MODEL_NOTE}\n",
        report.is_balanced(),
        cls.overall.micro_f1
    );
    write_atomic(&ctx.path("report.txt"), summary.as_bytes())?;
    let mut listing = String::new();
    for name in RUN_OUTPUTS {
        listing.push_str(&format!("{}  {name}\n", file_digest(&ctx.path(name))?));
    }
    let digest = sha256_hex(listing.as_bytes());
    listing.push_str(&format!("{digest}  run\n"));
    write_atomic(&ctx.path("digests.txt"), listing.as_bytes())?;
    println!("{MODEL_NOTE}");
    println!("run digest: {digest}");
    Ok(if report.is_balanced() && leaks == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
