//! CSV tables and JSON reports. CSV numbers carry 6 significant digits;
//! JSON keeps full precision.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use minpair_core::predictions::{PairRecord, PredictionReport, ScoredSentence};
use serde::Serialize;

/// `%g`-style formatting with 6 significant digits. Non-finite values print
/// as `nan`, `inf` or `-inf`.
pub fn fmt_g6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt_g6(x: Option<f64>) -> String {
    x.map(fmt_g6).unwrap_or_default()
}

/// A CSV table built in memory and written in one go.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Self { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }

    pub fn write(self, path: &Path) -> Result<()> {
        std::fs::write(path, self.into_bytes()).with_context(|| format!("writing {}", path.display()))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Appends overall and per-bin rows of a correlation report.
pub fn correlation_rows(table: &mut Table, prefix: &[String], report: &PredictionReport) {
    let bin_by = report.bin_by.map(|b| b.name()).unwrap_or("");
    let mut row = prefix.to_vec();
    row.extend([
        "overall".to_string(),
        bin_by.to_string(),
        String::new(),
        opt_g6(report.overall_r),
        report.n_pairs.to_string(),
    ]);
    table.row(row);
    for b in &report.per_bin {
        let mut row = prefix.to_vec();
        row.extend([
            b.bin.to_string(),
            bin_by.to_string(),
            fmt_g6(b.mean_distance),
            fmt_g6(b.r),
            b.n.to_string(),
        ]);
        table.row(row);
    }
}

pub const CORRELATION_COLUMNS: [&str; 5] = ["bin", "bin_by", "mean_distance", "r", "n"];

/// One row per metric: AUC, within-pair accuracy and class score summaries.
pub fn separability_rows(table: &mut Table, prefix: &[String], report: &PredictionReport) {
    for (metric, auc) in &report.auc_by_metric {
        let summary = |g: bool| {
            report
                .score_summary
                .iter()
                .find(|s| s.metric == *metric && s.grammatical == g)
        };
        let (sg, su) = (summary(true), summary(false));
        let mut row = prefix.to_vec();
        row.extend([
            metric.to_string(),
            fmt_g6(*auc),
            opt_g6(report.accuracy_by_metric.get(metric).copied()),
            sg.map(|s| s.n.to_string()).unwrap_or_default(),
            opt_g6(sg.map(|s| s.mean)),
            opt_g6(sg.map(|s| s.sd)),
            su.map(|s| s.n.to_string()).unwrap_or_default(),
            opt_g6(su.map(|s| s.mean)),
            opt_g6(su.map(|s| s.sd)),
        ]);
        table.row(row);
    }
}

pub const SEPARABILITY_COLUMNS: [&str; 9] = [
    "metric",
    "auc",
    "minpair_accuracy",
    "n_gram",
    "gram_mean",
    "gram_sd",
    "n_ungram",
    "ungram_mean",
    "ungram_sd",
];

pub const PAIR_COLUMNS: [&str; 12] = [
    "pair_id",
    "dataset",
    "gram_id",
    "ungram_id",
    "gram_logprob",
    "ungram_logprob",
    "error_dist",
    "lev_dist",
    "cosine_dist",
    "msg_similarity",
    "acc_gram",
    "acc_ungram",
];

/// Per-pair table with log-probabilities and annotations.
pub fn pairs_table(sentences: &[ScoredSentence], pairs: &[PairRecord]) -> Table {
    let mut t = Table::new(&PAIR_COLUMNS);
    pair_rows(&mut t, sentences, pairs);
    t
}

pub fn pair_rows(t: &mut Table, sentences: &[ScoredSentence], pairs: &[PairRecord]) {
    for p in pairs {
        let (g, u) = (&sentences[p.gram], &sentences[p.ungram]);
        t.row([
            p.pair_id.clone(),
            p.dataset.clone(),
            g.id.clone(),
            u.id.clone(),
            fmt_g6(g.logprob()),
            fmt_g6(u.logprob()),
            p.error_dist.map(|d| d.to_string()).unwrap_or_default(),
            p.lev_dist.map(|d| d.to_string()).unwrap_or_default(),
            opt_g6(p.cosine_dist),
            opt_g6(p.msg_similarity),
            opt_g6(p.acc_gram),
            opt_g6(p.acc_ungram),
        ]);
    }
}
