//! `stats`, `generate`, `augment`, `evaluate` and `report`.
//!
//! Each command validates its inputs before doing any work, writes its
//! outputs plus a redacted config echo into the output directory, and returns
//! a text summary for stdout. Output bytes depend only on config and seed.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use crsbias::augment::{
    flat_corpus, longtail_report, pop_nudge, AugmentationPlan, LongtailReport, PlanStats, PopNudgeParams, Strategy,
    SyntheticPool,
};
use crsbias::corpus::{load_corpus, Corpus, ItemCatalog};
use crsbias::metrics::{evaluate_run, initial_item_coverage, render_comparison, BiasReport, EvalConfig, RankedRun, ReportRecord};
use crsbias::popularity::{build_popularity, popular_item_ratio, PopularityTable, ThresholdPolicy};
use crsbias::synthgen::{
    build_pool, items_from_catalog, GenerationBackend, HttpChatBackend, OfflineBackend, PoolOptions, PromptTemplate,
};
use serde::Serialize;

use crate::config::{BackendKind, RunConfig};
use crate::CliError;

pub const CONFIG_ECHO: &str = "config.toml";

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub summary: String,
    pub files: Vec<PathBuf>,
}

struct Output {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    fn create(dir: PathBuf, cfg: &RunConfig) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| crsbias::Error::Io { path: dir.clone(), source: e })?;
        let mut out = Output { dir, files: Vec::new() };
        out.write(CONFIG_ECHO, cfg.redacted_toml().as_bytes())?;
        Ok(out)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| crsbias::Error::Io { path: path.clone(), source: e })?;
        self.files.push(path);
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(crsbias::Error::from)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(|e| crsbias::Error::Io { path: self.path(name), source: e })?;
        self.write(name, &buf)
    }

    fn finish(self, summary: String) -> CommandOutput {
        CommandOutput {
            summary,
            files: self.files,
        }
    }
}

fn load(cfg: &RunConfig, corpus: &Path, catalog: &Path) -> Result<(Corpus, PopularityTable), CliError> {
    cfg.eta_policy.validate()?;
    let (corpus, _) = load_corpus(corpus, catalog)?;
    let table = build_popularity(&corpus, cfg.eta_policy)?;
    Ok((corpus, table))
}

fn pct(x: f64) -> String {
    format!("{:.2}%", 100.0 * x)
}

fn eta_label(p: ThresholdPolicy) -> String {
    match p {
        ThresholdPolicy::CountThreshold { min_count } => format!("freq > {min_count}"),
        ThresholdPolicy::Quantile { top_fraction } => format!("top {top_fraction} of catalog"),
    }
}

/// Dataset statistics in the column set used to compare corpora.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetStats {
    pub dialogues: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    pub synthetic: usize,
    pub turns: usize,
    pub catalog_items: usize,
    pub covered_items: usize,
    pub iic: f64,
    pub popular_items: usize,
    pub popular_ratio: f64,
    pub eta_policy: ThresholdPolicy,
    pub unknown_mentions: usize,
}

pub fn dataset_stats(corpus: &Corpus, table: &PopularityTable) -> DatasetStats {
    let s = corpus.summary();
    let iic = initial_item_coverage(corpus);
    DatasetStats {
        dialogues: s.dialogues,
        train: s.train,
        valid: s.valid,
        test: s.test,
        synthetic: s.synthetic,
        turns: corpus.dialogues().iter().map(|d| d.turns.len()).sum(),
        catalog_items: s.catalog_items,
        covered_items: (iic * s.catalog_items as f64).round() as usize,
        iic,
        popular_items: table.popular_set().len(),
        popular_ratio: popular_item_ratio(table, corpus.catalog()),
        eta_policy: table.policy(),
        unknown_mentions: s.unknown_mentions,
    }
}

fn stats_text(s: &DatasetStats) -> String {
    let rows = [
        ("dialogues", s.dialogues.to_string()),
        ("train", s.train.to_string()),
        ("valid", s.valid.to_string()),
        ("test", s.test.to_string()),
        ("synthetic", s.synthetic.to_string()),
        ("turns", s.turns.to_string()),
        ("catalog items", s.catalog_items.to_string()),
        ("covered items", s.covered_items.to_string()),
        ("IIC", pct(s.iic)),
        ("popular items", format!("{} ({})", s.popular_items, eta_label(s.eta_policy))),
        ("popular ratio", pct(s.popular_ratio)),
        ("unknown mentions", s.unknown_mentions.to_string()),
    ];
    let mut out = String::new();
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<18}{v}");
    }
    out
}

pub fn cmd_stats(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    const CMD: &str = "stats";
    let corpus_path = cfg.input("corpus", cfg.paths.corpus.as_ref(), CMD)?;
    let catalog_path = cfg.input("catalog", cfg.paths.catalog.as_ref(), CMD)?;
    let dir = cfg.output_dir(CMD)?;

    let (corpus, table) = load(cfg, &corpus_path, &catalog_path)?;
    let stats = dataset_stats(&corpus, &table);
    let text = stats_text(&stats);
    let mut out = Output::create(dir, cfg)?;
    out.write_json("stats.json", &stats)?;
    out.write("stats.txt", text.as_bytes())?;
    Ok(out.finish(text))
}

fn load_template(cfg: &RunConfig) -> Result<PromptTemplate, CliError> {
    let name = cfg.generate.template.as_str();
    if matches!(name, "redial_en" | "tgredial_zh") {
        return Ok(PromptTemplate::builtin(name)?);
    }
    let path = cfg.input("template", Some(&PathBuf::from(name)), "generate")
        .map_err(|_| CliError::Config(format!("generate.template: no bundled template or file named `{name}`")))?;
    Ok(PromptTemplate::load(path)?)
}

fn make_backend(cfg: &RunConfig) -> Result<GenerationBackend, CliError> {
    match cfg.generate.backend {
        BackendKind::Offline => Ok(GenerationBackend::OfflineTemplate(OfflineBackend)),
        BackendKind::Http => {
            let http = cfg.generate.http.clone().ok_or_else(|| {
                CliError::Config("missing required field `generate.http` for the http backend".into())
            })?;
            let http = http.from_env().map_err(crsbias::Error::from)?;
            Ok(GenerationBackend::HttpChat(HttpChatBackend::new(http).map_err(crsbias::Error::from)?))
        }
    }
}

fn generation_items(cfg: &RunConfig, catalog: &ItemCatalog) -> Result<Vec<crsbias::synthgen::ItemRef>, CliError> {
    let ids: Vec<String> = match &cfg.generate.items {
        Some(ids) => ids.clone(),
        None => catalog.ids().map(str::to_string).collect(),
    };
    let ids = match cfg.generate.limit {
        Some(n) => ids.into_iter().take(n).collect(),
        None => ids,
    };
    items_from_catalog(catalog, &ids).map_err(|e| CliError::Config(format!("generate.items: {e}")))
}

pub fn cmd_generate(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    const CMD: &str = "generate";
    let seed = cfg.seed(CMD)?;
    let catalog_path = cfg.input("catalog", cfg.paths.catalog.as_ref(), CMD)?;
    let dir = cfg.output_dir(CMD)?;
    let template = load_template(cfg)?;
    let catalog = ItemCatalog::load(&catalog_path)?;
    let items = generation_items(cfg, &catalog)?;
    let backend = make_backend(cfg)?;

    let options = PoolOptions {
        max_attempts: cfg.generate.max_attempts,
        concurrency: cfg.generate.concurrency,
        ..PoolOptions::default()
    };
    let built = build_pool(&backend, &template, &items, seed, &options, None)?;
    let mut out = Output::create(dir, cfg)?;
    out.write_with("pool.jsonl", |w| built.pool.write_jsonl(w))?;
    out.write_with("generation_log.jsonl", |w| {
        for e in &built.log {
            serde_json::to_writer(&mut *w, e)?;
            w.push(b'\n');
        }
        Ok(())
    })?;
    let summary = format!(
        "generated {} dialogue(s) for {} item(s), {} skipped\npool digest {}\n",
        built.pool.len(),
        items.len(),
        built.skipped(),
        built.pool.digest()
    );
    Ok(out.finish(summary))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AugmentSummary {
    pub strategy: Strategy,
    pub seed: u64,
    pub k: usize,
    pub batch_size: usize,
    pub iic_before: f64,
    pub iic_after: f64,
    pub plan_digest: String,
    pub stats: PlanStats,
    pub rank_correlation: f64,
    pub newly_covered: usize,
    pub decreased: usize,
}

pub fn cmd_augment(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    const CMD: &str = "augment";
    let seed = cfg.seed(CMD)?;
    let corpus_path = cfg.input("corpus", cfg.paths.corpus.as_ref(), CMD)?;
    let catalog_path = cfg.input("catalog", cfg.paths.catalog.as_ref(), CMD)?;
    let pool_path = cfg.input("pool", cfg.paths.pool.as_ref(), CMD)?;
    let dir = cfg.output_dir(CMD)?;
    let aug = &cfg.augment;
    if aug.strategy == Strategy::PopNudge && (aug.k == 0 || aug.batch_size == 0) {
        return Err(CliError::Config("augment.k and augment.batch_size must be at least 1".into()));
    }

    let (corpus, table) = load(cfg, &corpus_path, &catalog_path)?;
    let pool = SyntheticPool::load(&pool_path)?;
    let plan = match aug.strategy {
        Strategy::OnceAug => AugmentationPlan::once_aug(&pool, seed),
        Strategy::PopNudge => {
            let params = PopNudgeParams {
                exec: cfg.exec,
                ..PopNudgeParams::new(aug.k, aug.batch_size, seed)
            };
            pop_nudge(&corpus, &pool, &table, params)?
        }
    };
    plan.verify(&corpus, &pool, &table)?;
    let augmented = flat_corpus(&plan, &corpus, &pool)?;
    let longtail: LongtailReport = longtail_report(&corpus, &augmented)?;

    let summary = AugmentSummary {
        strategy: aug.strategy,
        seed,
        k: plan.header.k,
        batch_size: plan.header.batch_size,
        iic_before: longtail.coverage_before,
        iic_after: longtail.coverage_after,
        plan_digest: plan.digest(),
        stats: plan.stats(),
        rank_correlation: longtail.rank_correlation,
        newly_covered: longtail.newly_covered,
        decreased: longtail.decreased,
    };
    let mut out = Output::create(dir, cfg)?;
    out.write("plan.jsonl", &plan.to_bytes())?;
    out.write_with("augmented_corpus.jsonl", |w| augmented.write_jsonl(w))?;
    out.write_json("longtail.json", &longtail)?;
    out.write_json("augment_summary.json", &summary)?;

    let mut text = String::new();
    let _ = writeln!(text, "strategy          {}", summary.strategy);
    if aug.strategy == Strategy::PopNudge {
        let _ = writeln!(text, "k / batch size    {} / {}", summary.k, summary.batch_size);
    }
    let _ = writeln!(text, "IIC before        {}", pct(summary.iic_before));
    let _ = writeln!(text, "IIC after         {}", pct(summary.iic_after));
    let _ = writeln!(
        text,
        "appended          {} distinct of {} pool dialogues",
        summary.stats.distinct_appended,
        pool.len()
    );
    let _ = writeln!(text, "newly covered     {}", summary.newly_covered);
    let _ = writeln!(text, "rank correlation  {:.4}", summary.rank_correlation);
    let _ = writeln!(text, "plan digest       {}", summary.plan_digest);
    Ok(out.finish(text))
}

pub fn cmd_evaluate(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    const CMD: &str = "evaluate";
    let corpus_path = cfg.input("corpus", cfg.paths.corpus.as_ref(), CMD)?;
    let catalog_path = cfg.input("catalog", cfg.paths.catalog.as_ref(), CMD)?;
    let run_paths = cfg.runs(CMD)?;
    let dir = cfg.output_dir(CMD)?;
    let eval = EvalConfig {
        log_base: cfg.log_base()?,
        exec: cfg.exec,
    };
    if cfg.cutoffs.is_empty() || cfg.cutoffs.contains(&0) {
        return Err(CliError::Config("cutoffs must be non-empty and positive".into()));
    }

    let (corpus, table) = load(cfg, &corpus_path, &catalog_path)?;
    let corpus = corpus.segment(cfg.episode_policy)?;
    let mut reports = Vec::with_capacity(run_paths.len());
    for p in &run_paths {
        let run = RankedRun::load(p)?.with_cutoffs(cfg.cutoffs.clone());
        reports.push(evaluate_run(&run, &corpus, &table, &eval)?);
    }
    let table_text = render_comparison(&reports);
    let mut out = Output::create(dir, cfg)?;
    out.write_with("reports.jsonl", |w| reports.iter().try_for_each(|r| r.write_jsonl(&mut *w)))?;
    out.write("report.txt", table_text.as_bytes())?;
    out.write_with("popularity.jsonl", |w| table.write_jsonl(w))?;
    Ok(out.finish(table_text))
}

/// Re-renders the comparison table from a previous `evaluate` and exports the
/// popularity table it was computed against.
pub fn cmd_report(cfg: &RunConfig) -> Result<CommandOutput, CliError> {
    const CMD: &str = "report";
    let corpus_path = cfg.input("corpus", cfg.paths.corpus.as_ref(), CMD)?;
    let catalog_path = cfg.input("catalog", cfg.paths.catalog.as_ref(), CMD)?;
    let dir = cfg.output_dir(CMD)?;
    let reports_path = dir.join("reports.jsonl");
    if !reports_path.is_file() {
        return Err(CliError::Config(format!(
            "paths.output_dir: {} not found; run `evaluate` first",
            reports_path.display()
        )));
    }

    let file = fs::File::open(&reports_path).map_err(|e| crsbias::Error::Io {
        path: reports_path.clone(),
        source: e,
    })?;
    let mut records = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| crsbias::Error::Io {
            path: reports_path.clone(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let r: ReportRecord = serde_json::from_str(&line).map_err(|e| crsbias::Error::Parse {
            path: reports_path.clone(),
            line: n + 1,
            message: e.to_string(),
        })?;
        records.push(r);
    }
    let reports = BiasReport::from_records(records);
    let (corpus, table) = load(cfg, &corpus_path, &catalog_path)?;
    let stats = dataset_stats(&corpus, &table);

    let mut text = render_comparison(&reports);
    let _ = writeln!(
        text,
        "\npopular items: {} of {} ({}), threshold {}",
        stats.popular_items,
        stats.catalog_items,
        pct(stats.popular_ratio),
        eta_label(stats.eta_policy)
    );
    let mut out = Output::create(dir, cfg)?;
    out.write("report.txt", text.as_bytes())?;
    out.write_with("popularity.jsonl", |w| table.write_jsonl(w))?;
    Ok(out.finish(text))
}

