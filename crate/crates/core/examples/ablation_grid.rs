//! Run the six-condition grid and print median WER and loss per condition.
//!
//! cargo run --release --example ablation_grid -- --quick --seeds 0..2
//!
//! Other flags: --lr-scale X, --stage-steps N, --batch N, --pretrain-steps N,
//! --out DIR. RMFT_THREADS sets grid parallelism.

use std::path::PathBuf;
use std::time::Instant;

use rmft::cli::parse_seeds;
use rmft::runner::{build_corpora, run_ablation, threads_from_env, RunConfig};

fn flag<'a>(args: &'a [String], name: &str) -> Option<&'a str> {
    args.iter().position(|a| a == name).map(|i| args[i + 1].as_str())
}

fn main() -> rmft::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut config = if args.iter().any(|a| a == "--quick") { RunConfig::quick() } else { RunConfig::default() };
    if let Some(v) = flag(&args, "--lr-scale") {
        config.lr_scale = v.parse().expect("--lr-scale X");
    }
    if let Some(v) = flag(&args, "--stage-steps") {
        config.budget.steps_per_stage = v.parse().expect("--stage-steps N");
        config.budget.single_stage_steps = 3 * config.budget.steps_per_stage;
    }
    if let Some(v) = flag(&args, "--batch") {
        config.budget.batch_size = v.parse().expect("--batch N");
    }
    if let Some(v) = flag(&args, "--pretrain-steps") {
        config.pretrain.steps = v.parse().expect("--pretrain-steps N");
    }
    let seeds = parse_seeds(flag(&args, "--seeds").unwrap_or("0"))?;
    let out = flag(&args, "--out").map(PathBuf::from);

    let t = Instant::now();
    let corpora = build_corpora(&config)?;
    let results = run_ablation(&config, &seeds, &corpora, threads_from_env(), out.as_deref())?;
    println!("grid of {} cells in {:.0}s", results.cells.len(), t.elapsed().as_secs_f64());
    for (seed, base) in &results.bases {
        if let Err(e) = base {
            println!("seed {seed}: pretraining failed: {e}");
        }
    }
    println!("cond  final_loss   wer_A   wer_B   wer_C   wer_D  global");
    for &k in &results.conditions {
        let w = |c: &str| results.median_wer(k, c).map_or("—".to_string(), |v| format!("{v:7.2}"));
        println!(
            "{k:>4}  {:>10.4} {} {} {} {} {}",
            results.median_final_loss(k).unwrap_or(f64::NAN),
            w("A"),
            w("B"),
            w("C"),
            w("D"),
            w("Global")
        );
    }
    Ok(())
}
