//! Subcommands: `toy`, `simulate`, `pairs`, `separability`, `unigram`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use minpair_core::model::{enumerate_pairs, string_prob_approx, ErrorModel, PairCriteria, SimPair};
use minpair_core::predictions::sim::{run_simulation, SimCorpus, SimulationConfig, SimulationOutput};
use minpair_core::predictions::{
    self, bootstrap_r, logprob_columns, minpair_accuracy, pred1_run, pred2_run, pred3_run, BinBy,
    PredictionReport,
};
use minpair_core::scoring::{MetricKind, ScoringAux};
use minpair_core::world::{build_cube_world, MessageField, ProbLaw, World};
use rayon::prelude::*;
use serde::Serialize;

use crate::ingest::{self, LevThresholds, QuantileScope};
use crate::output::{self, fmt_g6, Table};
use crate::svg;
use crate::world_io::WorldFile;

#[derive(Debug, Parser)]
#[command(name = "minpair", version, about = "Minimal-pair evaluation and error-model simulation")]
pub struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enumerate the eight-string toy language, its probabilities and pairs.
    Toy(ToyArgs),
    /// Build a random world and run all prediction harnesses on it.
    Simulate(SimulateArgs),
    /// Correlation analyses on paired sentences from a score dump.
    Pairs(PairsArgs),
    /// Pooled separability (ROC/AUC) of grammatical and ungrammatical sentences.
    Separability(SeparabilityArgs),
    /// Build a smoothed unigram table from a one-token-per-line corpus.
    Unigram(UnigramArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ToyArgs {
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 3)]
    pub k: u32,
    /// Message probabilities for "The moon emerges", "A moon emerges",
    /// "The moons emerge".
    #[arg(long, value_delimiter = ',', default_values_t = [0.6, 0.3, 0.1])]
    pub probs: Vec<f64>,
    #[arg(long, default_value_t = PairCriteria::CUBE_DELTA)]
    pub delta: f64,
    /// Score dump for the eight strings; adds a surprisal column.
    #[arg(long)]
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldArg {
    Independent,
    SlotFactored,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// One or more error rates; several produce one `eps-<value>` directory each.
    #[arg(long, value_delimiter = ',', default_values_t = [0.02])]
    pub epsilon: Vec<f64>,
    #[arg(long, default_value_t = 4)]
    pub k: u32,
    #[arg(long, default_value_t = 20240611)]
    pub seed: u64,
    #[arg(long, default_value_t = 64)]
    pub messages: usize,
    #[arg(long, default_value_t = 9)]
    pub length: usize,
    #[arg(long, default_value_t = 2)]
    pub symbols: usize,
    /// `uniform`, `zipf:<a>` or `lognormal:<sigma>`.
    #[arg(long, default_value = "zipf:1.3", value_parser = parse_law)]
    pub law: ProbLaw,
    #[arg(long, value_enum, default_value_t = FieldArg::SlotFactored)]
    pub field: FieldArg,
    #[arg(long, default_value_t = 0.5)]
    pub delta: f64,
    #[arg(long, default_value_t = 500)]
    pub max_pairs: usize,
    #[arg(long, default_value_t = 2000)]
    pub graded_pairs: usize,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.5, 1.0, 2.0])]
    pub noise: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = MetricKind::ALL.to_vec())]
    pub metrics: Vec<MetricKind>,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BinArg {
    Cosine,
    Lev,
}

#[derive(Debug, Clone, Args)]
pub struct PairsArgs {
    /// JSON Lines score dump.
    #[arg(long)]
    pub scores: PathBuf,
    /// `participant,item,rating` CSV; items are sentence ids.
    #[arg(long)]
    pub judgments: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long, value_enum, default_value_t = BinArg::Cosine)]
    pub bin_by: BinArg,
    /// Keep only pairs below this Levenshtein quantile (with --lev-filter).
    #[arg(long, default_value_t = 0.75)]
    pub quantile: f64,
    #[arg(long)]
    pub lev_filter: bool,
    #[arg(long, value_enum, default_value_t = QuantileScope::PerDataset)]
    pub quantile_scope: QuantileScope,
    /// Ignore embeddings even if present.
    #[arg(long)]
    pub no_embeddings: bool,
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct SeparabilityArgs {
    #[arg(long)]
    pub scores: PathBuf,
    /// Unigram table written by `minpair unigram`.
    #[arg(long)]
    pub unigram: Option<PathBuf>,
    #[arg(long)]
    pub vocab_size: Option<u64>,
    /// Defaults to every metric whose inputs are available.
    #[arg(long, value_delimiter = ',')]
    pub metrics: Vec<MetricKind>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct UnigramArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub vocab_size: u64,
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_law(s: &str) -> Result<ProbLaw, String> {
    let (name, arg) = s.split_once(':').unwrap_or((s, ""));
    let value = || -> Result<f64, String> {
        arg.parse::<f64>()
            .map_err(|_| format!("`{s}`: expected a number after `{name}:`"))
    };
    match name {
        "uniform" if arg.is_empty() => Ok(ProbLaw::Uniform),
        "zipf" => Ok(ProbLaw::Zipf { a: value()? }),
        "lognormal" => Ok(ProbLaw::LogNormal { sigma: value()? }),
        _ => Err(format!("unknown law `{s}` (uniform, zipf:<a>, lognormal:<sigma>)")),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("building thread pool")?;
    pool.install(|| match cli.command {
        Command::Toy(a) => {
            let report = cmd_toy(&a)?;
            print!("{}", report.render());
            Ok(())
        }
        Command::Simulate(a) => cmd_simulate(&a).map(|_| ()),
        Command::Pairs(a) => cmd_pairs(&a).map(|_| ()),
        Command::Separability(a) => cmd_separability(&a).map(|_| ()),
        Command::Unigram(a) => cmd_unigram(&a),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToyRow {
    pub text: String,
    pub grammatical: bool,
    pub exact: f64,
    pub approx: f64,
    pub surprisal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToyReport {
    pub epsilon: f64,
    pub rows: Vec<ToyRow>,
    pub meaning_matched: Vec<(String, String, usize)>,
    pub minimal: Vec<(String, String)>,
}

impl ToyReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let with_surprisal = self.rows.iter().any(|r| r.surprisal.is_some());
        let _ = write!(s, "{:<20} {:<12} {:>12} {:>12}", "string", "grammatical", "P(s)", "approx");
        if with_surprisal {
            let _ = write!(s, " {:>12}", "surprisal");
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(
                s,
                "{:<20} {:<12} {:>12} {:>12}",
                r.text,
                if r.grammatical { "yes" } else { "no" },
                fmt_g6(r.exact),
                fmt_g6(r.approx)
            );
            if with_surprisal {
                let _ = write!(s, " {:>12}", r.surprisal.map(fmt_g6).unwrap_or_else(|| "-".into()));
            }
            s.push('\n');
        }
        let n_gram = self.rows.iter().filter(|r| r.grammatical).count();
        let _ = writeln!(
            s,
            "\n{} grammatical, {} ungrammatical (epsilon = {})",
            n_gram,
            self.rows.len() - n_gram,
            self.epsilon
        );
        let _ = writeln!(s, "\nmeaning-matched pairs: {}", self.meaning_matched.len());
        for (g, u, d) in &self.meaning_matched {
            let _ = writeln!(s, "  {g:<20} | {u:<20} d={d}");
        }
        let _ = writeln!(s, "\nminimal pairs: {}", self.minimal.len());
        for (g, u) in &self.minimal {
            let _ = writeln!(s, "  {g:<20} | {u}");
        }
        s
    }
}

pub fn cmd_toy(args: &ToyArgs) -> Result<ToyReport> {
    let probs: [f64; 3] = args
        .probs
        .as_slice()
        .try_into()
        .map_err(|_| anyhow!("--probs needs exactly three values"))?;
    let world = build_cube_world(probs, args.epsilon, args.k)?;
    let model = ErrorModel::with_default_depth(&world);
    let surprisal: BTreeMap<String, f64> = match &args.scores {
        Some(path) => ingest::read_scored_jsonl(path)?
            .strict()?
            .records
            .iter()
            .map(|r| (r.text.clone(), -r.token_logprobs.iter().sum::<f64>()))
            .collect(),
        None => BTreeMap::new(),
    };
    let rows = (0..world.node_count())
        .map(|n| {
            let form = world.string_of(n);
            let text = form.to_string();
            Ok(ToyRow {
                surprisal: surprisal.get(&text).copied(),
                grammatical: world.message_at(n).is_some(),
                exact: model.string_prob(n).prob,
                approx: string_prob_approx(&world, &form)?,
                text,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let text = |n| world.string_of(n).to_string();
    let mm = enumerate_pairs(&model, PairCriteria::meaning_matched(args.delta))?;
    let min = enumerate_pairs(&model, PairCriteria::minimal(args.delta))?;
    Ok(ToyReport {
        epsilon: args.epsilon,
        meaning_matched: mm.iter().map(|p: &SimPair| (text(p.gram), text(p.ungram), p.error_dist)).collect(),
        minimal: min.iter().map(|p| (text(p.gram), text(p.ungram))).collect(),
        rows,
    })
}

impl SimulateArgs {
    pub fn config(&self, epsilon: f64) -> SimulationConfig {
        let mut c = SimulationConfig::default();
        c.world.epsilon = epsilon;
        c.world.k_branch = self.k;
        c.world.seed = self.seed;
        c.world.messages = self.messages;
        c.world.length = self.length;
        c.world.symbols_per_slot = self.symbols;
        c.world.law = self.law;
        c.world.field = match self.field {
            FieldArg::Independent => MessageField::Independent,
            FieldArg::SlotFactored => MessageField::SlotFactored,
        };
        c.delta = self.delta;
        c.max_pairs = self.max_pairs;
        c.graded_pairs = self.graded_pairs;
        c.k_bins = self.bins;
        c.noise_levels = self.noise.clone();
        c.metrics = self.metrics.clone();
        c.bootstrap_resamples = self.bootstrap;
        c.seed = self.seed;
        c
    }
}

fn eps_dir_name(eps: f64) -> String {
    format!("eps-{eps}")
}

/// Runs one simulation per ε (in parallel) and writes each run's tables,
/// plots and report. Returns the output directories in ε order.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<PathBuf>> {
    if args.epsilon.is_empty() {
        bail!("--epsilon needs at least one value");
    }
    let mut problems = Vec::new();
    for &e in &args.epsilon {
        if !(e > 0.0 && e < 0.5) {
            problems.push(format!("--epsilon {e}: simulation needs 0 < epsilon < 0.5"));
        }
    }
    if args.noise.iter().any(|n| !(*n >= 0.0 && n.is_finite())) {
        problems.push(String::from("--noise values must be finite and nonnegative"));
    }
    if args.bins == 0 {
        problems.push(String::from("--bins must be positive"));
    }
    if !problems.is_empty() {
        bail!("invalid parameters:\n  {}", problems.join("\n  "));
    }
    let configs: Vec<SimulationConfig> = args.epsilon.iter().map(|&e| args.config(e)).collect();
    let results: Vec<Result<SimulationOutput>> = configs
        .par_iter()
        .map(|c| run_simulation(c).with_context(|| format!("epsilon {}", c.world.epsilon)))
        .collect();
    let mut dirs = Vec::new();
    for (config, result) in configs.iter().zip(results) {
        let out = result?;
        let dir = if args.epsilon.len() > 1 {
            args.out.join(eps_dir_name(config.world.epsilon))
        } else {
            args.out.clone()
        };
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        write_simulation(&dir, &out)?;
        dirs.push(dir);
    }
    Ok(dirs)
}

fn corpus_points(corpus: &SimCorpus) -> Vec<(f64, f64)> {
    let (x, y) = logprob_columns(&corpus.sentences, &corpus.pairs);
    x.into_iter().zip(y).collect()
}

fn write_simulation(dir: &Path, out: &SimulationOutput) -> Result<()> {
    let world = minpair_core::world::build_random_world(&out.config.world)?;
    output::write_json(&dir.join("world.json"), &WorldFile::from_world(&world))?;

    let mut header = vec!["set"];
    header.extend(output::CORRELATION_COLUMNS);
    let mut t = Table::new(&header);
    output::correlation_rows(&mut t, &["minimal".into()], &out.pred1);
    output::correlation_rows(&mut t, &["graded".into()], &out.pred1_graded);
    t.write(&dir.join("pred1.csv"))?;

    let mut header = vec!["noise_sd", "set"];
    header.extend(output::CORRELATION_COLUMNS);
    let mut t = Table::new(&header);
    for level in &out.pred2 {
        let noise = fmt_g6(level.noise_sd);
        output::correlation_rows(&mut t, &[noise.clone(), "matched".into()], &level.matched);
        output::correlation_rows(&mut t, &[noise, "unmatched".into()], &level.unmatched);
    }
    t.write(&dir.join("pred2.csv"))?;

    let mut t = Table::new(&output::SEPARABILITY_COLUMNS);
    output::separability_rows(&mut t, &[], &out.pred3);
    t.write(&dir.join("pred3.csv"))?;

    let c = &out.corpora;
    output::pairs_table(&c.minimal.sentences, &c.minimal.pairs).write(&dir.join("pairs_minimal.csv"))?;
    output::pairs_table(&c.graded.sentences, &c.graded.pairs).write(&dir.join("pairs_graded.csv"))?;
    output::write_json(&dir.join("report.json"), out)?;

    fs::write(
        dir.join("pred1_scatter.svg"),
        svg::scatter(
            "minimal pairs",
            "log P(grammatical)",
            "log P(ungrammatical)",
            &corpus_points(&c.minimal),
        ),
    )?;
    if let Some((matched, _)) = c.acceptability.first() {
        let (acc, lp) = predictions::delta_columns(&matched.sentences, &matched.pairs)?;
        let pts: Vec<(f64, f64)> = lp.into_iter().zip(acc).collect();
        fs::write(
            dir.join("pred2_scatter.svg"),
            svg::scatter("acceptability vs log-probability difference", "log-prob delta", "acceptability delta", &pts),
        )?;
    }
    fs::write(dir.join("pred3_roc.svg"), roc_svg("pooled minimal pairs", &out.pred3))?;
    Ok(())
}

fn roc_svg(title: &str, report: &PredictionReport) -> String {
    let curves: Vec<(String, f64, Vec<(f64, f64)>)> = report
        .roc_by_metric
        .iter()
        .map(|(m, r)| (m.to_string(), r.auc, r.points.clone()))
        .collect();
    svg::roc(title, &curves)
}

fn file_stem(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() {
        "dataset".into()
    } else {
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetPairsReport {
    pub n_pairs: usize,
    pub incomplete_pairs: usize,
    pub missing_embeddings: usize,
    pub lev_filter: Option<LevFilterSummary>,
    pub missing_acceptability: Option<usize>,
    pub pred1: PredictionReport,
    pub pred2: Option<PredictionReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LevFilterSummary {
    pub thresholds: LevThresholds,
    pub kept: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PairsReport {
    pub scores: PathBuf,
    pub records: usize,
    pub flagged_ratings: usize,
    pub datasets: BTreeMap<String, DatasetPairsReport>,
}

pub fn cmd_pairs(args: &PairsArgs) -> Result<PairsReport> {
    let dump = ingest::read_scored_jsonl(&args.scores)?.strict()?;
    let mut corpus = ingest::build_pairs(&dump.records)?;
    let summary = ingest::annotate_distances(&corpus.sentences, &mut corpus.pairs, !args.no_embeddings)?;
    if !summary.missing_embeddings.is_empty() {
        log::warn!(
            "{} pair(s) lack embeddings and are left out of cosine binning",
            summary.missing_embeddings.len()
        );
    }
    let judgments = args.judgments.as_deref().map(ingest::read_judgments_csv).transpose()?;
    let acc = judgments.as_ref().map(ingest::item_acceptability).transpose()?;

    let filter = if args.lev_filter {
        Some(ingest::filter_levenshtein_quantile(&corpus.pairs, args.quantile, args.quantile_scope)?)
    } else {
        None
    };
    let bin_by = match args.bin_by {
        BinArg::Cosine => BinBy::CosineDist,
        BinArg::Lev => BinBy::LevDist,
    };
    fs::create_dir_all(&args.out)?;

    let names: Vec<String> = corpus.datasets().into_iter().collect();
    let results: Vec<(String, Result<(DatasetPairsReport, ingest::PairedCorpus)>)> = names
        .par_iter()
        .map(|name| {
            let mut sub = corpus.dataset(name);
            let n_before = sub.pairs.len();
            let lev_filter = filter.as_ref().map(|f| {
                let keep: std::collections::BTreeSet<&str> = f
                    .kept
                    .iter()
                    .filter(|p| &p.dataset == name)
                    .map(|p| p.pair_id.as_str())
                    .collect();
                sub.pairs.retain(|p| keep.contains(p.pair_id.as_str()));
                LevFilterSummary {
                    thresholds: f.thresholds.clone(),
                    kept: sub.pairs.len(),
                    dropped: n_before - sub.pairs.len(),
                }
            });
            let result = (|| {
                let missing_embeddings = sub.pairs.iter().filter(|p| p.cosine_dist.is_none()).count();
                let mut pred1 = pred1_run(&sub.sentences, &sub.pairs, args.bins, bin_by)?;
                let (x, y) = logprob_columns(&sub.sentences, &sub.pairs);
                pred1.bootstrap.extend(bootstrap_r("overall_r", &x, &y, args.bootstrap, args.seed));
                let (pred2, missing_acceptability) = match &acc {
                    Some(acc) => {
                        let missing = ingest::attach_acceptability(&sub.sentences, &mut sub.pairs, acc);
                        let rated: Vec<_> = sub
                            .pairs
                            .iter()
                            .filter(|p| p.acc_gram.is_some() && p.acc_ungram.is_some())
                            .cloned()
                            .collect();
                        let mut rep = pred2_run(&sub.sentences, &rated, args.bins, bin_by)?;
                        let (a, l) = predictions::delta_columns(&sub.sentences, &rated)?;
                        rep.bootstrap.extend(bootstrap_r("overall_r", &a, &l, args.bootstrap, args.seed));
                        (Some(rep), Some(missing))
                    }
                    None => (None, None),
                };
                Ok::<_, anyhow::Error>((
                    DatasetPairsReport {
                        n_pairs: sub.pairs.len(),
                        incomplete_pairs: sub.incomplete.len(),
                        missing_embeddings,
                        lev_filter,
                        missing_acceptability,
                        pred1,
                        pred2,
                    },
                    sub,
                ))
            })();
            (name.clone(), result)
        })
        .collect();

    let mut errors = Vec::new();
    let mut report = PairsReport {
        scores: args.scores.clone(),
        records: dump.records.len(),
        flagged_ratings: judgments.as_ref().map_or(0, |j| j.flagged.len()),
        datasets: BTreeMap::new(),
    };
    let mut t1 = Table::new(&[&["dataset"][..], &output::CORRELATION_COLUMNS[..]].concat());
    let mut t2 = Table::new(&[&["dataset"][..], &output::CORRELATION_COLUMNS[..]].concat());
    let mut all_pairs = Table::new(&output::PAIR_COLUMNS);
    for (name, result) in results {
        match result {
            Ok((rep, sub)) => {
                output::correlation_rows(&mut t1, &[name.clone()], &rep.pred1);
                if let Some(p2) = &rep.pred2 {
                    output::correlation_rows(&mut t2, &[name.clone()], p2);
                    let (a, l) = predictions::delta_columns(
                        &sub.sentences,
                        &sub.pairs
                            .iter()
                            .filter(|p| p.acc_gram.is_some() && p.acc_ungram.is_some())
                            .cloned()
                            .collect::<Vec<_>>(),
                    )?;
                    let pts: Vec<(f64, f64)> = l.into_iter().zip(a).collect();
                    fs::write(
                        args.out.join(format!("pred2_{}.svg", file_stem(&name))),
                        svg::scatter(&name, "log-prob delta", "acceptability delta", &pts),
                    )?;
                }
                let (x, y) = logprob_columns(&sub.sentences, &sub.pairs);
                fs::write(
                    args.out.join(format!("pred1_{}.svg", file_stem(&name))),
                    svg::scatter(&name, "log P(grammatical)", "log P(ungrammatical)", &x.into_iter().zip(y).collect::<Vec<_>>()),
                )?;
                output::pair_rows(&mut all_pairs, &sub.sentences, &sub.pairs);
                report.datasets.insert(name, rep);
            }
            Err(e) => errors.push(format!("dataset `{name}`: {e:#}")),
        }
    }
    if !errors.is_empty() {
        bail!("{} dataset(s) failed:\n  {}", errors.len(), errors.join("\n  "));
    }
    all_pairs.write(&args.out.join("pairs.csv"))?;
    t1.write(&args.out.join("pred1.csv"))?;
    if acc.is_some() {
        t2.write(&args.out.join("pred2.csv"))?;
    }
    output::write_json(&args.out.join("report.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SeparabilityReport {
    pub scores: PathBuf,
    pub metrics: Vec<MetricKind>,
    pub datasets: BTreeMap<String, PredictionReport>,
}

pub fn cmd_separability(args: &SeparabilityArgs) -> Result<SeparabilityReport> {
    let dump = ingest::read_scored_jsonl(&args.scores)?.strict()?;
    let corpus = ingest::build_pairs(&dump.records)?;
    let uni = args.unigram.as_deref().map(ingest::read_unigram_tsv).transpose()?;
    let aux = ScoringAux {
        unigram: uni.as_ref(),
        vocab_size: args.vocab_size,
    };
    let metrics: Vec<MetricKind> = if args.metrics.is_empty() {
        MetricKind::ALL
            .into_iter()
            .filter(|m| aux.check(&[*m]).is_ok())
            .collect()
    } else {
        args.metrics.clone()
    };
    let problems: Vec<String> = metrics
        .iter()
        .filter_map(|m| aux.check(&[*m]).err().map(|e| e.to_string()))
        .collect();
    if !problems.is_empty() {
        bail!("metric configuration:\n  {}", problems.join("\n  "));
    }
    fs::create_dir_all(&args.out)?;
    let names: Vec<String> = corpus.datasets().into_iter().collect();
    let results: Vec<(String, Result<PredictionReport>)> = names
        .par_iter()
        .map(|name| {
            let sub = corpus.dataset(name);
            let run = || -> Result<PredictionReport> {
                let mut rep = pred3_run(&sub.sentences, &sub.grammatical_flags(), &metrics, &aux)?;
                rep.n_pairs = sub.pairs.len();
                for &m in &metrics {
                    if let Some(a) = minpair_accuracy(&sub.sentences, &sub.pairs, m, &aux)? {
                        rep.accuracy_by_metric.insert(m, a);
                    }
                }
                Ok(rep)
            };
            (name.clone(), run())
        })
        .collect();
    let mut errors = Vec::new();
    let mut report = SeparabilityReport {
        scores: args.scores.clone(),
        metrics: metrics.clone(),
        datasets: BTreeMap::new(),
    };
    let mut t = Table::new(&[&["dataset"][..], &output::SEPARABILITY_COLUMNS[..]].concat());
    for (name, result) in results {
        match result {
            Ok(rep) => {
                output::separability_rows(&mut t, &[name.clone()], &rep);
                fs::write(args.out.join(format!("roc_{}.svg", file_stem(&name))), roc_svg(&name, &rep))?;
                report.datasets.insert(name, rep);
            }
            Err(e) => errors.push(format!("dataset `{name}`: {e:#}")),
        }
    }
    if !errors.is_empty() {
        bail!("{} dataset(s) failed:\n  {}", errors.len(), errors.join("\n  "));
    }
    t.write(&args.out.join("pred3.csv"))?;
    output::write_json(&args.out.join("report.json"), &report)?;
    Ok(report)
}

pub fn cmd_unigram(args: &UnigramArgs) -> Result<()> {
    let table = ingest::build_unigram(&args.corpus, args.vocab_size, args.alpha)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    ingest::write_unigram_tsv(&args.out, &table)?;
    Ok(())
}

/// Exact and approximate probabilities of every string in `world`.
pub fn world_table(world: &World) -> Table {
    let model = ErrorModel::with_default_depth(world);
    let mut t = Table::new(&["node", "string", "grammatical", "p_exact"]);
    for n in 0..world.node_count() {
        t.row([
            n.to_string(),
            world.string_of(n).to_string(),
            world.message_at(n).is_some().to_string(),
            fmt_g6(model.string_prob(n).prob),
        ]);
    }
    t
}
