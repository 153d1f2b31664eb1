//! `rmft <subcommand> --config PATH [flags]`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{compare_models, ActivationProbe, ReprReport, ANALYSIS_HEADER};
use crate::eval::{evaluate_model, write_hypotheses};
use crate::io::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::report::{render_tables, Bundle};
use crate::runner::{
    build_corpora, cell_dir, pretrain, run_ablation, run_condition, threads_from_env, write_cell, write_provenance,
    AblationResults, CellResult, CellRun, RunConfig,
};
use crate::synth::{load_corpus, save_corpus, Corpus};
use crate::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "rmft", about = "Curriculum and learning-rate timing lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate source and target corpora.
    Synth(Common),
    /// Pretrain the base model on the source corpus.
    Pretrain(Common),
    /// Fine-tune the base through one condition.
    Train(Common),
    /// Decode the target eval split and score WER.
    Eval(Common),
    /// Compare a fine-tuned checkpoint against the base.
    Analyze(Common),
    /// Run the full condition × seed grid.
    Ablate(Common),
    /// Render summary tables from an output directory.
    Report(Common),
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// A single seed or an inclusive range `a..b`.
    #[arg(long, default_value = "0")]
    seed: String,
    #[arg(long)]
    condition: Option<u32>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    base: Option<PathBuf>,
    #[arg(long)]
    ft: Option<PathBuf>,
    /// Corpora written by `synth`; regenerated from the config if absent.
    #[arg(long)]
    data: Option<PathBuf>,
}

/// Parse `N` or the inclusive range `a..b`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| Error::Config(format!("bad seed {t:?}")));
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
            if a > b {
                return Err(Error::Config(format!("empty seed range {s}")));
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![num(s)?]),
    }
}

fn single_seed(s: &str) -> Result<u64> {
    match parse_seeds(s)?.as_slice() {
        [one] => Ok(*one),
        _ => Err(Error::Config("this subcommand takes a single seed".into())),
    }
}

fn require<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::Config(format!("missing required flag --{flag}")))
}

fn corpora(args: &Common, config: &RunConfig) -> Result<(Corpus, Corpus)> {
    match &args.data {
        Some(dir) => Ok((load_corpus(&dir.join("source"))?, load_corpus(&dir.join("target"))?)),
        None => build_corpora(config),
    }
}

fn checkpoint(path: &Path, config: &RunConfig) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    load_checkpoint(path, Some(config.hash()))
}

fn probe(config: &RunConfig, target: &Corpus) -> Result<ActivationProbe> {
    ActivationProbe::new(target, config.analysis.probe_size, config.analysis.max_rows, config.corpus_seed)
}

/// Base versus final checkpoint for every successful cell, in grid order.
pub fn analyze_grid(results: &AblationResults, config: &RunConfig, target: &Corpus) -> Result<Vec<ReprReport>> {
    let probe = probe(config, target)?;
    let mut out = Vec::new();
    for cell in &results.cells {
        if let (Some(base), Some(ft)) = (results.base(cell.seed), cell.final_checkpoint()) {
            let id = format!("c{}_s{}", cell.condition_id, cell.seed);
            out.push(compare_models(&id, &base.params, &ft.params, target, &probe, &config.analysis)?);
        }
    }
    Ok(out)
}

pub fn analysis_csv(reports: &[ReprReport]) -> String {
    let mut s = format!("{ANALYSIS_HEADER}\n");
    for r in reports {
        s.push_str(&r.csv_rows());
    }
    s
}

fn run(cli: Cli) -> Result<()> {
    let (name, args) = match &cli.command {
        Command::Synth(a) => ("synth", a),
        Command::Pretrain(a) => ("pretrain", a),
        Command::Train(a) => ("train", a),
        Command::Eval(a) => ("eval", a),
        Command::Analyze(a) => ("analyze", a),
        Command::Ablate(a) => ("ablate", a),
        Command::Report(a) => ("report", a),
    };
    let config = RunConfig::load(&args.config)?;
    let out = &args.out;
    fs::create_dir_all(out)?;
    match name {
        "synth" => {
            let (source, target) = build_corpora(&config)?;
            save_corpus(&out.join("source"), &source)?;
            save_corpus(&out.join("target"), &target)?;
            write_provenance(out, &config, config.corpus_seed, None, "ok")?;
            println!("wrote {} source and {} target utterances to {}", source.utterances.len(), target.utterances.len(), out.display());
        }
        "pretrain" => {
            let seed = single_seed(&args.seed)?;
            let (source, _) = corpora(args, &config)?;
            match pretrain(&config, &source, seed) {
                Ok((ck, log)) => {
                    save_checkpoint(&out.join("base.ckpt"), &ck)?;
                    fs::write(out.join("pretrain_log.csv"), log.steps_csv())?;
                    fs::write(out.join("pretrain_val_log.csv"), log.val_csv())?;
                    write_provenance(out, &config, seed, None, "ok")?;
                    let (report, _) = evaluate_model(&ck.params, &source, config.eval.include_d_in_global);
                    println!("base.ckpt final-window loss {:.4}", log.final_window_loss().unwrap_or(f64::NAN));
                    for (tier, s) in report.rows() {
                        println!("source {tier} WER {}", s.render());
                    }
                }
                Err(f) => {
                    fs::write(out.join("pretrain_log.csv"), f.partial_log.steps_csv())?;
                    write_provenance(out, &config, seed, None, f.error.code())?;
                    return Err(f.error);
                }
            }
        }
        "train" => {
            let seed = single_seed(&args.seed)?;
            let k = args.condition.ok_or_else(|| Error::Config("missing required flag --condition".into()))?;
            let condition = config.condition(k)?;
            let base = checkpoint(require(&args.base, "base")?, &config)?;
            let (_, target) = corpora(args, &config)?;
            let outcome = run_condition(&base, &condition, &target, seed, &config).map(|run| {
                let last = run.log.stages.last().and_then(|s| s.eval.clone());
                let report = last.unwrap_or_else(|| {
                    evaluate_model(&run.checkpoints.last().unwrap().params, &target, config.eval.include_d_in_global).0
                });
                CellRun { run, report }
            });
            let cell = CellResult {
                condition_id: k,
                seed,
                outcome: outcome.map_err(|f| (f.error, f.partial_log)),
            };
            write_cell(out, &config, &target, &cell)?;
            match cell.outcome {
                Ok(r) => {
                    for (tier, s) in r.report.rows() {
                        println!("condition {k} {tier} WER {}", s.render());
                    }
                }
                Err((e, _)) => return Err(e),
            }
        }
        "eval" => {
            let path = args.ft.as_ref().or(args.base.as_ref());
            let ck = checkpoint(require(&path.cloned(), "ft or --base")?, &config)?;
            let (_, target) = corpora(args, &config)?;
            let (report, hyps) = evaluate_model(&ck.params, &target, config.eval.include_d_in_global);
            fs::write(out.join("eval.json"), serde_json::to_string_pretty(&report)? + "\n")?;
            write_hypotheses(&out.join("hypotheses.jsonl"), &hyps)?;
            write_provenance(out, &config, ck.meta.seed, ck.meta.condition_id, "ok")?;
            for (tier, s) in report.rows() {
                println!("{tier} WER {} (S {} I {} D {} N {})", s.render(), s.substitutions, s.insertions, s.deletions, s.ref_tokens);
            }
        }
        "analyze" => {
            let base = checkpoint(require(&args.base, "base")?, &config)?;
            let ft = checkpoint(require(&args.ft, "ft")?, &config)?;
            let (_, target) = corpora(args, &config)?;
            let id = args.ft.as_ref().and_then(|p| p.file_stem()).map_or("ft".into(), |s| s.to_string_lossy().to_string());
            let report = compare_models(&id, &base.params, &ft.params, &target, &probe(&config, &target)?, &config.analysis)?;
            fs::write(out.join("analysis.csv"), report.to_csv())?;
            write_provenance(out, &config, ft.meta.seed, ft.meta.condition_id, "ok")?;
            print!("{}", report.to_csv());
        }
        "ablate" => {
            let seeds = parse_seeds(&args.seed)?;
            let corpora = corpora(args, &config)?;
            let results = run_ablation(&config, &seeds, &corpora, threads_from_env(), Some(out))?;
            let reports = analyze_grid(&results, &config, &corpora.1)?;
            fs::write(out.join("analysis.csv"), analysis_csv(&reports))?;
            for (cell, r) in results.cells.iter().filter(|c| c.final_checkpoint().is_some()).zip(&reports) {
                fs::write(cell_dir(out, cell.condition_id, cell.seed).join("analysis.csv"), r.to_csv())?;
            }
            write_provenance(out, &config, seeds[0], None, "ok")?;
            let failed = results.cells.iter().filter(|c| c.outcome.is_err()).count();
            println!("{} cells, {failed} failed; results in {}", results.cells.len(), out.join("results.csv").display());
        }
        "report" => {
            let tables = render_tables(&Bundle::load(out)?);
            tables.write(out)?;
            print!("{}", tables.to_text());
        }
        _ => unreachable!(),
    }
    Ok(())
}

/// One-line error record for scripts: `error code=<code> msg=<message>`.
pub fn error_line(code: &str, message: &str) -> String {
    format!("error code={code} msg={}", message.replace(['\n', '\r'], " "))
}

/// Entry point behind the binary; returns the process exit code.
pub fn cli<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", error_line("usage", first));
            return 2;
        }
    };
    match run(parsed) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(e.code(), &e.to_string()));
            1
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("4").unwrap(), vec![4]);
        assert_eq!(parse_seeds("1..3").unwrap(), vec![1, 2, 3]);
        assert!(parse_seeds("3..1").is_err());
        assert!(parse_seeds("x").is_err());
        assert!(single_seed("1..2").is_err());
    }

    #[test]
    fn usage_errors_exit_nonzero() {
        assert_eq!(cli(["rmft", "train", "--bogus"]), 2);
        assert_eq!(cli(["rmft", "fly", "--config", "x"]), 2);
        assert_eq!(cli(["rmft", "report", "--config", "/nonexistent/c.toml"]), 1);
    }
}
