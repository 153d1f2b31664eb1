//! Pretrain a base model on the source language and score it.
//!
//! cargo run --release --example pretrain_base [-- --quick] [-- --steps N]

use std::time::Instant;

use rmft::eval::evaluate_model;
use rmft::runner::{build_corpora, pretrain, RunConfig};
use rmft::synth::Tier;

fn main() -> rmft::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut config = if args.iter().any(|a| a == "--quick") {
        RunConfig::quick()
    } else {
        RunConfig::default()
    };
    if let Some(i) = args.iter().position(|a| a == "--steps") {
        config.pretrain.steps = args[i + 1].parse().expect("--steps N");
    }
    if let Some(i) = args.iter().position(|a| a == "--lr") {
        config.pretrain.peak_lr = args[i + 1].parse().expect("--lr X");
    }
    let corpora = build_corpora(&config)?;
    let t = Instant::now();
    let (base, log) = pretrain(&config, &corpora.0, 0)?;
    let secs = t.elapsed().as_secs_f64();
    println!(
        "{} steps in {secs:.1}s ({:.1} ms/step); loss {:.3} -> {:.3}",
        log.steps.len(),
        1e3 * secs / log.steps.len() as f64,
        log.steps[0].loss,
        log.final_window_loss().unwrap()
    );
    let (report, _) = evaluate_model(&base.params, &corpora.0, true);
    println!("source tier A WER {}%", report.tier(Tier::A).render());
    Ok(())
}
