//! Build the target corpus, print per-tier statistics, and round-trip it
//! through the on-disk feature format.
//!
//! cargo run --release --example synth_corpus [-- OUT_DIR]

use rmft::runner::RunConfig;
use rmft::synth::{build_corpus, load_corpus, save_corpus, Split, Tier};

fn main() -> rmft::Result<()> {
    let config = RunConfig::quick();
    let corpus = build_corpus(&config.target, 17)?;
    println!("language {} vocab {}", corpus.language.language_id, corpus.language.vocab_size);
    println!("split  tier  utts  mean_frames  mean_tokens");
    for split in [Split::Train, Split::Val, Split::Eval] {
        for tier in Tier::ALL {
            let utts: Vec<_> = corpus.select(split, tier).collect();
            if utts.is_empty() {
                continue;
            }
            let n = utts.len() as f64;
            let frames = utts.iter().map(|u| u.n_frames()).sum::<usize>() as f64 / n;
            let tokens = utts.iter().map(|u| u.tokens.len()).sum::<usize>() as f64 / n;
            println!("{:<6} {tier:<4} {:>5}  {frames:>11.1}  {tokens:>11.1}", format!("{split:?}"), utts.len());
        }
    }

    let dir = match std::env::args().nth(1) {
        Some(d) => std::path::PathBuf::from(d),
        None => std::env::temp_dir().join("rmft-synth-example"),
    };
    save_corpus(&dir, &corpus)?;
    let back = load_corpus(&dir)?;
    assert_eq!(back.utterances, corpus.utterances);
    println!("saved and reloaded {} utterances under {}", back.utterances.len(), dir.display());
    Ok(())
}
