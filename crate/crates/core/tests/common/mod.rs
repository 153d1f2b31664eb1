use rmft::optim::StepBudget;
use rmft::runner::RunConfig;
use rmft::synth::SplitCounts;

/// A few seconds of work end to end.
pub fn tiny_config() -> RunConfig {
    let mut c = RunConfig::quick();
    c.source.train = SplitCounts { a: 24, b: 24, c: 0, d: 0 };
    c.source.val = SplitCounts { a: 4, b: 4, c: 0, d: 0 };
    c.source.eval = SplitCounts { a: 6, b: 0, c: 0, d: 0 };
    c.target.train = SplitCounts { a: 12, b: 12, c: 24, d: 0 };
    c.target.val = SplitCounts { a: 4, b: 4, c: 4, d: 0 };
    c.target.eval = SplitCounts { a: 6, b: 6, c: 6, d: 6 };
    c.budget = StepBudget {
        steps_per_stage: 10,
        single_stage_steps: 30,
        batch_size: 4,
        warmup_fraction: 0.1,
    };
    c.pretrain.steps = 40;
    c.pretrain.batch_size = 8;
    c.eval.val_every = 5;
    c.eval.final_window = 5;
    c.analysis.probe_size = 8;
    c.analysis.max_rows = 200;
    c
}
