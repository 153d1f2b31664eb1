use super::{backward, forward_loss, Batch, Parameters};
use crate::tensor::Real;
use crate::{Error, Result};

/// Compare analytic gradients against central finite differences, in
/// double precision. Per-coordinate relative error is
/// `|g_a - g_fd| / max(1e-8, |g_a| + |g_fd|)`; returns the maximum.
pub fn grad_check<T: Real>(params: &Parameters<T>, batch: &Batch<T>, eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!("finite-difference step must be > 0, got {eps}")));
    }
    let mut p: Parameters<f64> = params.cast();
    let batch: Batch<f64> = batch.cast();
    let (_, cache) = forward_loss(&p, &batch)?;
    let analytic = backward(&p, &cache);

    let mut worst = 0.0f64;
    for k in 0..p.tensors.len() {
        for i in 0..p.tensors[k].tensor.data.len() {
            let orig = p.tensors[k].tensor.data[i];
            p.tensors[k].tensor.data[i] = orig + eps;
            let (plus, _) = forward_loss(&p, &batch)?;
            p.tensors[k].tensor.data[i] = orig - eps;
            let (minus, _) = forward_loss(&p, &batch)?;
            p.tensors[k].tensor.data[i] = orig;
            let fd = (plus - minus) / (2.0 * eps);
            let ga = analytic.tensors[k].tensor.data[i];
            let rel = (ga - fd).abs() / f64::max(1e-8, ga.abs() + fd.abs());
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig};
    use crate::rng::{rng_for, tag};
    use crate::synth::Features;
    use rand::Rng as _;

    pub(crate) fn tiny_instance(seed: u64) -> (Parameters<f64>, Batch<f64>) {
        let c = ModelConfig {
            feature_dim: 4,
            content_vocab: 5,
            enc_hidden: 6,
            dec_hidden: 5,
            emb_dim: 3,
            attn_dim: 4,
        };
        let p = init_params(&c, seed).unwrap();
        let mut rng = rng_for(seed, &[tag("gradcheck-batch")]);
        let ex: Vec<(Features, Vec<usize>)> = (0..2)
            .map(|_| {
                let n = rng.random_range(3..7);
                let f = Features {
                    n_frames: n,
                    dim: 4,
                    data: (0..n * 4).map(|_| rng.random_range(-1.0..1.0)).collect(),
                };
                let len = rng.random_range(1..5);
                (f, (0..len).map(|_| rng.random_range(0..5)).collect())
            })
            .collect();
        let refs: Vec<(&Features, &[usize])> = ex.iter().map(|(f, t)| (f, t.as_slice())).collect();
        (p, Batch::new(&c, &refs).unwrap())
    }

    #[test]
    fn analytic_matches_finite_differences() {
        for seed in 0..3 {
            let (p, b) = tiny_instance(seed);
            let err = grad_check(&p, &b, 1e-3).unwrap();
            assert!(err < 1e-4, "seed {seed}: max relative error {err}");
        }
    }

    #[test]
    fn zero_step_rejected_and_repeatable() {
        let (p, b) = tiny_instance(7);
        assert!(grad_check(&p, &b, 0.0).is_err());
        assert_eq!(grad_check(&p, &b, 1e-3).unwrap(), grad_check(&p, &b, 1e-3).unwrap());
    }
}
