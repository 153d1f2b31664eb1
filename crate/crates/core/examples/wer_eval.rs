//! Word error rate on hand-made pairs, then per-tier scoring of an
//! untrained model on a small target corpus.
//!
//! cargo run --release --example wer_eval

use rmft::eval::{evaluate_model, levenshtein_alignment, wer};
use rmft::model::init_params;
use rmft::runner::RunConfig;
use rmft::synth::{build_corpus, SplitCounts};

fn main() -> rmft::Result<()> {
    let pairs: [(&[u32], &[u32]); 3] = [(&[1, 2, 3, 4], &[1, 2, 3, 4]), (&[1, 2, 3], &[1, 3]), (&[5, 6], &[5, 7, 6, 8])];
    for (r, h) in pairs {
        let e = levenshtein_alignment(r, h);
        println!("ref {r:?} hyp {h:?}: S {} I {} D {}", e.substitutions, e.insertions, e.deletions);
    }
    println!("pooled WER {}%", wer(&pairs)?.render());

    let mut config = RunConfig::quick();
    config.target.train = SplitCounts::default();
    config.target.val = SplitCounts::default();
    config.target.eval = SplitCounts { a: 20, b: 20, c: 20, d: 20 };
    let corpus = build_corpus(&config.target, 3)?;
    let params = init_params(&config.model, 0)?;
    let (report, hyps) = evaluate_model(&params, &corpus, true);
    println!("untrained model on {} eval utterances:", hyps.len());
    for (tier, stats) in report.rows() {
        println!("  {tier:<6} {:>7}%", stats.render());
    }
    Ok(())
}
