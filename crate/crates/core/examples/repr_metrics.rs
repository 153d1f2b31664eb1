//! Representation metrics on random matrices and on two model
//! initializations.
//!
//! cargo run --release --example repr_metrics

use nalgebra::DMatrix;
use rand::Rng as _;
use rmft::analysis::{compare_models, emd_1d, linear_cka, spectral_stats, ActivationProbe};
use rmft::model::init_params;
use rmft::rng::rng_for;
use rmft::runner::RunConfig;
use rmft::synth::{build_corpus, SplitCounts};

fn main() -> rmft::Result<()> {
    let mut rng = rng_for(0, &[]);
    let x = DMatrix::from_fn(200, 8, |_, _| rng.random_range(-1.0..1.0));
    let noise = DMatrix::from_fn(200, 8, |_, _| rng.random_range(-1.0..1.0));
    for mix in [0.0, 0.5, 1.0, 3.0] {
        let y = &x + &noise * mix;
        println!("noise {mix:.1}: CKA {:.4}  EMD {:.4}", linear_cka(&x, &y)?, emd_1d(x.as_slice(), y.as_slice())?);
    }
    let low_rank = DMatrix::from_fn(200, 8, |r, c| x[(r, c % 2)]);
    for (name, m) in [("full", &x), ("rank 2", &low_rank)] {
        let s = spectral_stats(m, 0.99)?;
        println!("{name}: effective rank {} tail {:.3e}", s.effective_rank, s.tail);
    }

    let mut config = RunConfig::quick();
    config.target.train = SplitCounts::default();
    config.target.val = SplitCounts::default();
    config.target.eval = SplitCounts { a: 16, b: 0, c: 16, d: 0 };
    let corpus = build_corpus(&config.target, 1)?;
    let probe = ActivationProbe::new(&corpus, 32, config.analysis.max_rows, 0)?;
    let base = init_params(&config.model, 0)?;
    let mut moved = base.clone();
    for t in moved.tensors.iter_mut().filter(|t| t.name.starts_with("decoder")) {
        t.tensor.data.iter_mut().for_each(|v| *v *= 1.2);
    }
    for (id, ft) in [("self", &base), ("decoder x1.2", &moved)] {
        print!("{}", compare_models(id, &base, ft, &corpus, &probe, &config.analysis)?.csv_rows());
    }
    Ok(())
}
