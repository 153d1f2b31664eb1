//! Save a checkpoint, reload it, and show that corruption and config
//! drift are caught.
//!
//! cargo run --release --example checkpoint_io

use rmft::io::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMeta};
use rmft::model::init_params;
use rmft::runner::RunConfig;

fn main() -> rmft::Result<()> {
    let config = RunConfig::default();
    let ck = Checkpoint {
        meta: CheckpointMeta {
            condition_id: Some(4),
            stage_index: Some(0),
            step: 0,
            seed: 1,
            config_hash: config.hash(),
            model: config.model.clone(),
            payload_hash: 0,
        },
        params: init_params(&config.model, 1)?,
        optim: None,
    };
    let dir = std::env::temp_dir().join("rmft-checkpoint-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("model.ckpt");
    save_checkpoint(&path, &ck)?;
    let back = load_checkpoint(&path, Some(config.hash()))?;
    println!("{} bytes, {} tensors, {} scalars", std::fs::metadata(&path)?.len(), back.params.tensors.len(), back.params.num_scalars());
    for t in &back.params.tensors {
        println!("  {:<24} {:?} {:?}", t.name, t.component, t.tensor.shape);
    }

    let other = RunConfig { corpus_seed: 99, ..config };
    match load_checkpoint(&path, Some(other.hash())) {
        Err(e) => println!("different config: {} ({})", e.code(), e),
        Ok(_) => unreachable!("config drift must be rejected"),
    }
    let mut bytes = std::fs::read(&path)?;
    let n = bytes.len();
    bytes[n - 10] ^= 0x40;
    let corrupt = dir.join("corrupt.ckpt");
    std::fs::write(&corrupt, bytes)?;
    match load_checkpoint(&corrupt, None) {
        Err(e) => println!("flipped byte: {} ({})", e.code(), e),
        Ok(_) => unreachable!("corruption must be rejected"),
    }
    Ok(())
}
