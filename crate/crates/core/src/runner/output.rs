use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::train::{EvalRecord, Mode, NodeScore, RoundLog, RunResult, DEFAULT_METRIC};
use crate::learn::ScoreReport;
use crate::{Error, Result};

pub const ROUNDS_FILE: &str = "rounds.jsonl";
pub const SCORES_FILE: &str = "scores.json";
pub const GRAM_FILE: &str = "gram_final.csv";

/// Contents of `scores.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresFile {
    pub mode: Mode,
    pub seed: u64,
    pub rounds_run: usize,
    pub converged: bool,
    pub metric: String,
    pub target_accuracy: f64,
    pub iteration_to_threshold: Option<usize>,
    pub nodes: Vec<NodeScore>,
    /// Mean over honest nodes.
    pub average: Option<ScoreReport>,
    pub evaluations: Vec<EvalRecord>,
    pub config: ExperimentConfig,
}

impl ScoresFile {
    pub fn new(cfg: &ExperimentConfig, result: &RunResult) -> Self {
        Self {
            mode: result.mode,
            seed: cfg.seed,
            rounds_run: result.rounds_run,
            converged: result.converged,
            metric: DEFAULT_METRIC.to_string(),
            target_accuracy: cfg.train.target_accuracy,
            iteration_to_threshold: result.iteration_to_threshold,
            nodes: result.scores.clone(),
            average: result.average(),
            evaluations: result.logs.evals.clone(),
            config: cfg.clone(),
        }
    }
}

pub fn write_rounds<W: Write>(mut w: W, rounds: &[RoundLog]) -> Result<()> {
    for r in rounds {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rounds(path: impl AsRef<Path>) -> Result<Vec<RoundLog>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<ScoresFile> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Writes `rounds.jsonl`, `scores.json` and, when present, `gram_final.csv`.
pub fn write_outputs(dir: impl AsRef<Path>, cfg: &ExperimentConfig, result: &RunResult) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    write_rounds(BufWriter::new(File::create(dir.join(ROUNDS_FILE))?), &result.logs.rounds)?;
    let mut f = BufWriter::new(File::create(dir.join(SCORES_FILE))?);
    serde_json::to_writer_pretty(&mut f, &ScoresFile::new(cfg, result))?;
    f.write_all(b"\n")?;
    f.flush()?;
    if let Some(k) = &result.gram_final {
        let mut f = BufWriter::new(File::create(dir.join(GRAM_FILE))?);
        for i in 0..k.nrows() {
            let row: Vec<String> = (0..k.ncols()).map(|j| k[(i, j)].to_string()).collect();
            writeln!(f, "{}", row.join(","))?;
        }
        f.flush()?;
    }
    Ok(())
}

fn pct(v: f64) -> String {
    format!("{:6.2}%", 100.0 * v)
}

/// Plain-text score table for one run.
pub fn format_report(name: &str, s: &ScoresFile) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{name}: mode={:?} seed={} rounds={}{}",
        s.mode,
        s.seed,
        s.rounds_run,
        if s.converged { " (converged)" } else { "" }
    );
    let _ = writeln!(out, "  node  role                 score1   score2   score3  alignment");
    for n in &s.nodes {
        let role = format!("{:?}", n.role);
        match &n.report {
            Some(r) => {
                let _ = writeln!(
                    out,
                    "  {:>4}  {:<18} {}  {}  {}  {:9.4}",
                    n.node,
                    role,
                    pct(r.score1),
                    pct(r.score2),
                    pct(r.score3),
                    r.alignment
                );
            }
            None => {
                let _ = writeln!(out, "  {:>4}  {:<18}      -        -        -          -", n.node, role);
            }
        }
    }
    if let Some(a) = &s.average {
        let _ = writeln!(
            out,
            "  avg   {:<18} {}  {}  {}  {:9.4}",
            "(honest)",
            pct(a.score1),
            pct(a.score2),
            pct(a.score3),
            a.alignment
        );
    }
    let reached = s
        .iteration_to_threshold
        .map_or_else(|| "never".to_string(), |r| format!("round {r}"));
    let _ = writeln!(out, "  {} >= {}: {reached}", s.metric, s.target_accuracy);
    out
}

/// Reads every run directory and renders its table.
pub fn report_dirs<P: AsRef<Path>>(dirs: &[P]) -> Result<String> {
    if dirs.is_empty() {
        return Err(Error::Empty("no run directories given"));
    }
    let mut out = String::new();
    for d in dirs {
        let d = d.as_ref();
        let scores = read_scores(d.join(SCORES_FILE))?;
        out.push_str(&format_report(&d.display().to_string(), &scores));
    }
    Ok(out)
}
