//! Print the six grid conditions and sample their learning-rate curves.
//!
//! cargo run --release --example lr_schedule

use rmft::optim::{build_condition, lr_at, warmup_steps, CONDITION_IDS};

fn main() -> rmft::Result<()> {
    for id in CONDITION_IDS {
        let c = build_condition(id)?;
        println!("{id}. {}  [{}]  [{}]", c.name, c.curriculum_label(), c.schedule_label());
        for (i, s) in c.stages.iter().enumerate() {
            let w = warmup_steps(s);
            let mid = w + (s.total_steps - 1 - w) / 2;
            let points = [0, w / 2, w, mid, s.total_steps - 1];
            let lrs: Vec<String> = points
                .iter()
                .map(|&t| Ok(format!("{t}:{:.3e}", lr_at(s, t)?)))
                .collect::<rmft::Result<_>>()?;
            println!("   stage {} {:<5} peak {:.0e}  {}", i + 1, s.mixture.label(), s.peak_lr, lrs.join("  "));
        }
    }
    Ok(())
}
