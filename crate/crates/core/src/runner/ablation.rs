use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::train::{pretrain, run_condition, Provenance, RunResult, TrainLog};
use super::RunConfig;
use crate::eval::{evaluate_model, write_hypotheses, EvalReport};
use crate::io::{save_checkpoint, Checkpoint};
use crate::synth::{build_corpus, Corpus, Tier};
use crate::{Error, Result};

/// Column labels of the results table, in order.
pub const RESULT_COLUMNS: [&str; 5] = ["A", "B", "C", "D", "Global"];

#[derive(Clone, Debug)]
pub struct CellRun {
    pub run: RunResult,
    pub report: EvalReport,
}

#[derive(Debug)]
pub struct CellResult {
    pub condition_id: u32,
    pub seed: u64,
    /// A failed cell keeps its error code, message and partial log.
    pub outcome: std::result::Result<CellRun, (Error, TrainLog)>,
}

impl CellResult {
    pub fn run(&self) -> Option<&CellRun> {
        self.outcome.as_ref().ok()
    }

    pub fn final_checkpoint(&self) -> Option<&Checkpoint> {
        self.run().and_then(|r| r.run.checkpoints.last())
    }
}

/// One line of the results file. `seed == None` marks a median row.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub condition_id: u32,
    pub seed: Option<u64>,
    pub status: String,
    /// WER in percent per column of `RESULT_COLUMNS`; `None` if undefined.
    pub wer: [Option<f64>; 5],
    pub final_window_loss: Option<f64>,
}

#[derive(Debug)]
pub struct AblationResults {
    pub seeds: Vec<u64>,
    pub conditions: Vec<u32>,
    /// Base checkpoint per seed, or the pretraining error.
    pub bases: Vec<(u64, std::result::Result<Checkpoint, String>)>,
    pub cells: Vec<CellResult>,
}

/// Median of the finite values, averaging the middle pair for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

fn report_wers(r: &EvalReport) -> [Option<f64>; 5] {
    let mut out = [None; 5];
    for (i, (_, stats)) in r.rows().iter().enumerate() {
        out[i] = stats.wer().ok();
    }
    out
}

impl AblationResults {
    pub fn base(&self, seed: u64) -> Option<&Checkpoint> {
        self.bases.iter().find(|(s, _)| *s == seed).and_then(|(_, b)| b.as_ref().ok())
    }

    pub fn cell(&self, condition_id: u32, seed: u64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.condition_id == condition_id && c.seed == seed)
    }

    /// Per-seed values of `f` for one condition, skipping failed cells.
    pub fn per_seed(&self, condition_id: u32, f: impl Fn(&CellRun) -> Option<f64>) -> Vec<(u64, f64)> {
        self.cells
            .iter()
            .filter(|c| c.condition_id == condition_id)
            .filter_map(|c| c.run().and_then(&f).map(|v| (c.seed, v)))
            .collect()
    }

    pub fn median_of(&self, condition_id: u32, f: impl Fn(&CellRun) -> Option<f64>) -> Option<f64> {
        let v: Vec<f64> = self.per_seed(condition_id, f).into_iter().map(|(_, v)| v).collect();
        median(&v)
    }

    pub fn median_wer(&self, condition_id: u32, column: &str) -> Option<f64> {
        let k = RESULT_COLUMNS.iter().position(|c| *c == column)?;
        self.median_of(condition_id, |r| report_wers(&r.report)[k])
    }

    pub fn median_final_loss(&self, condition_id: u32) -> Option<f64> {
        self.median_of(condition_id, |r| r.run.log.final_window_loss())
    }

    /// One row per cell in grid order, then one median row per condition.
    pub fn rows(&self) -> Vec<ResultRow> {
        let mut rows: Vec<ResultRow> = self
            .cells
            .iter()
            .map(|c| match &c.outcome {
                Ok(r) => ResultRow {
                    condition_id: c.condition_id,
                    seed: Some(c.seed),
                    status: "ok".into(),
                    wer: report_wers(&r.report),
                    final_window_loss: r.run.log.final_window_loss(),
                },
                Err((e, _)) => ResultRow {
                    condition_id: c.condition_id,
                    seed: Some(c.seed),
                    status: e.code().into(),
                    wer: [None; 5],
                    final_window_loss: None,
                },
            })
            .collect();
        for &k in &self.conditions {
            let cells: Vec<&ResultRow> = rows.iter().filter(|r| r.condition_id == k).collect();
            let mut wer = [None; 5];
            for (i, w) in wer.iter_mut().enumerate() {
                *w = median(&cells.iter().filter_map(|r| r.wer[i]).collect::<Vec<_>>());
            }
            let loss = median(&cells.iter().filter_map(|r| r.final_window_loss).collect::<Vec<_>>());
            let ok = cells.iter().filter(|r| r.status == "ok").count();
            rows.push(ResultRow {
                condition_id: k,
                seed: None,
                status: format!("median_of_{ok}"),
                wer,
                final_window_loss: loss,
            });
        }
        rows
    }

    pub fn to_csv(&self) -> String {
        results_csv(&self.rows())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

pub fn results_csv(rows: &[ResultRow]) -> String {
    let mut s = String::from("condition_id,seed,status,wer_A,wer_B,wer_C,wer_D,wer_global,final_window_loss\n");
    for r in rows {
        let seed = r.seed.map_or_else(|| "median".to_string(), |s| s.to_string());
        let wers: Vec<String> = r.wer.iter().map(|w| opt(*w)).collect();
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            r.condition_id,
            seed,
            r.status,
            wers.join(","),
            opt(r.final_window_loss)
        ));
    }
    s
}

/// Parse a results file written by `results_csv`.
pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    let bad = |detail: String| Error::Format { what: "results csv", detail };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    if header.split(',').count() != 9 {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let num = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| bad(format!("bad number {s:?}")))
        }
    };
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(bad(format!("expected 9 fields in {line:?}")));
            }
            let mut wer = [None; 5];
            for i in 0..5 {
                wer[i] = num(f[3 + i])?;
            }
            Ok(ResultRow {
                condition_id: f[0].parse().map_err(|_| bad(format!("bad condition {:?}", f[0])))?,
                seed: match f[1] {
                    "median" => None,
                    s => Some(s.parse().map_err(|_| bad(format!("bad seed {s:?}")))?),
                },
                status: f[2].to_string(),
                wer,
                final_window_loss: num(f[8])?,
            })
        })
        .collect()
}

/// Grid parallelism from `RMFT_THREADS`; absent or unparsable means one.
pub fn threads_from_env() -> usize {
    std::env::var("RMFT_THREADS")
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or(1)
}

/// Source and target corpora for a config. They depend only on
/// `corpus_seed`, so every training seed sees the same data.
pub fn build_corpora(config: &RunConfig) -> Result<(Corpus, Corpus)> {
    let source = build_corpus(&config.source, crate::rng::derive_seed(config.corpus_seed, &[crate::rng::tag("source")]))?;
    let target = build_corpus(&config.target, crate::rng::derive_seed(config.corpus_seed, &[crate::rng::tag("target")]))?;
    Ok((source, target))
}

pub fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

pub fn cell_dir(out: &Path, condition_id: u32, seed: u64) -> PathBuf {
    seed_dir(out, seed).join(format!("cond-{condition_id}"))
}

#[derive(Serialize)]
struct ProvenanceFile<'a> {
    #[serde(flatten)]
    provenance: &'a Provenance,
    condition_id: Option<u32>,
    status: &'a str,
}

/// Provenance record plus the full config, written next to run outputs.
pub fn write_provenance(dir: &Path, config: &RunConfig, seed: u64, condition_id: Option<u32>, status: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.toml"), config.canonical_text())?;
    let p = Provenance::new(config, seed);
    let mut text = serde_json::to_string_pretty(&ProvenanceFile {
        provenance: &p,
        condition_id,
        status,
    })?;
    text.push('\n');
    fs::write(dir.join("provenance.json"), text)?;
    Ok(())
}

/// Write logs, stage checkpoints, eval output and provenance for one cell.
pub fn write_cell(dir: &Path, config: &RunConfig, target: &Corpus, cell: &CellResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    match &cell.outcome {
        Ok(r) => {
            fs::write(dir.join("train_log.csv"), r.run.log.steps_csv())?;
            fs::write(dir.join("val_log.csv"), r.run.log.val_csv())?;
            fs::write(dir.join("stages.json"), serde_json::to_string_pretty(&r.run.log.stages)? + "\n")?;
            for (i, ck) in r.run.checkpoints.iter().enumerate() {
                save_checkpoint(&dir.join(format!("stage-{}.ckpt", i + 1)), ck)?;
            }
            fs::write(dir.join("eval.json"), serde_json::to_string_pretty(&r.report)? + "\n")?;
            let params = &r.run.checkpoints.last().expect("at least one stage").params;
            let (_, hyps) = evaluate_model(params, target, config.eval.include_d_in_global);
            write_hypotheses(&dir.join("hypotheses.jsonl"), &hyps)?;
            write_provenance(dir, config, cell.seed, Some(cell.condition_id), "ok")
        }
        Err((e, log)) => {
            fs::write(dir.join("train_log.csv"), log.steps_csv())?;
            fs::write(dir.join("error.txt"), format!("{}: {}\n", e.code(), e))?;
            write_provenance(dir, config, cell.seed, Some(cell.condition_id), e.code())
        }
    }
}

/// Run the condition × seed grid.
///
/// Each seed pretrains its own base on the source corpus; all conditions
/// of that seed start from it. A failed cell is recorded and the grid
/// continues. With `out`, every cell writes to its own directory and the
/// aggregate results file lands in `out/results.csv`.
pub fn run_ablation(
    config: &RunConfig,
    seeds: &[u64],
    corpora: &(Corpus, Corpus),
    threads: usize,
    out: Option<&Path>,
) -> Result<AblationResults> {
    config.validate()?;
    if seeds.is_empty() {
        return Err(Error::Config("ablation needs at least one seed".into()));
    }
    let conditions = config.grid.conditions.clone();
    let built = conditions
        .iter()
        .map(|&k| config.condition(k))
        .collect::<Result<Vec<_>>>()?;
    let (source, target) = corpora;
    if target.utterances.iter().any(|u| u.tier == Tier::D && u.split != crate::synth::Split::Eval) {
        return Err(Error::Config("target corpus has tier D outside the eval split".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    pool.install(|| {
        let bases: Vec<(u64, std::result::Result<Checkpoint, String>)> = seeds
            .par_iter()
            .map(|&seed| {
                let base = pretrain(config, source, seed);
                if let Some(out) = out {
                    let dir = seed_dir(out, seed);
                    let status = match &base {
                        Ok((ck, log)) => save_checkpoint(&dir.join("base.ckpt"), ck)
                            .and_then(|_| Ok(fs::write(dir.join("pretrain_log.csv"), log.steps_csv())?))
                            .map(|_| "ok"),
                        Err(f) => Ok(f.error.code()),
                    };
                    let status = status.and_then(|s| write_provenance(&dir, config, seed, None, s));
                    if let Err(e) = status {
                        return (seed, Err(format!("{}: {}", e.code(), e)));
                    }
                }
                (seed, base.map(|(ck, _)| ck).map_err(|f| format!("{}: {}", f.error.code(), f.error)))
            })
            .collect();

        let jobs: Vec<(usize, u64)> = seeds
            .iter()
            .flat_map(|&s| (0..built.len()).map(move |c| (c, s)))
            .collect();
        let cells: Vec<CellResult> = jobs
            .par_iter()
            .map(|&(ci, seed)| {
                let condition = &built[ci];
                let base = bases.iter().find(|(s, _)| *s == seed).map(|(_, b)| b).expect("base per seed");
                let outcome = match base {
                    Err(msg) => Err((Error::Config(format!("base pretraining failed: {msg}")), TrainLog::default())),
                    Ok(base) => match run_condition(base, condition, target, seed, config) {
                        Ok(run) => {
                            let report = run
                                .log
                                .stages
                                .last()
                                .and_then(|s| s.eval.clone())
                                .unwrap_or_else(|| {
                                    let p = &run.checkpoints.last().expect("stage checkpoint").params;
                                    evaluate_model(p, target, config.eval.include_d_in_global).0
                                });
                            Ok(CellRun { run, report })
                        }
                        Err(f) => Err((f.error, f.partial_log)),
                    },
                };
                let cell = CellResult {
                    condition_id: condition.id,
                    seed,
                    outcome,
                };
                if let Some(out) = out {
                    if let Err(e) = write_cell(&cell_dir(out, condition.id, seed), config, target, &cell) {
                        let log = cell.run().map(|r| r.run.log.clone()).unwrap_or_default();
                        return CellResult {
                            outcome: Err((e, log)),
                            ..cell
                        };
                    }
                }
                cell
            })
            .collect();

        let results = AblationResults {
            seeds: seeds.to_vec(),
            conditions,
            bases,
            cells,
        };
        if let Some(out) = out {
            fs::create_dir_all(out)?;
            fs::write(out.join("results.csv"), results.to_csv())?;
        }
        Ok(results)
    })
}
