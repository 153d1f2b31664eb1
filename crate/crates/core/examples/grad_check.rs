//! Compare manual backpropagation against central finite differences on a
//! tiny model.
//!
//! cargo run --release --example grad_check

use rand::Rng as _;
use rmft::model::{grad_check, init_params, Batch, ModelConfig};
use rmft::rng::rng_for;
use rmft::synth::Features;

fn main() -> rmft::Result<()> {
    let config = ModelConfig {
        feature_dim: 4,
        content_vocab: 5,
        enc_hidden: 6,
        dec_hidden: 5,
        emb_dim: 3,
        attn_dim: 4,
    };
    for seed in 0..10 {
        let params = init_params::<f64>(&config, seed)?;
        let mut rng = rng_for(seed, &[1]);
        let examples: Vec<(Features, Vec<usize>)> = (0..2)
            .map(|_| {
                let n = rng.random_range(3..8);
                let data = (0..n * 4).map(|_| rng.random_range(-1.0..1.0)).collect();
                let len = rng.random_range(1..5);
                let tokens = (0..len).map(|_| rng.random_range(0..5)).collect();
                (Features { n_frames: n, dim: 4, data }, tokens)
            })
            .collect();
        let refs: Vec<(&Features, &[usize])> = examples.iter().map(|(f, t)| (f, t.as_slice())).collect();
        let batch: Batch<f64> = Batch::new(&config, &refs)?;
        let err = grad_check(&params, &batch, 1e-4)?;
        println!("seed {seed}: max relative error {err:.2e}");
    }
    Ok(())
}
