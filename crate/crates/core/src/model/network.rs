use super::{Batch, ModelConfig, Parameters, TensorId as P};
use crate::tensor::{axpy, dot, matvec_acc, matvec_t_acc, outer_acc, sigmoid, softmax_in_place, Real};
use crate::{Error, Result};

/// GRU activations for a run of steps, each `[steps, hidden]`.
#[derive(Clone, Debug, Default)]
struct GruTrace<T> {
    z: Vec<T>,
    r: Vec<T>,
    n: Vec<T>,
    rh: Vec<T>,
}

impl<T: Real> GruTrace<T> {
    fn with_len(len: usize) -> Self {
        GruTrace {
            z: vec![T::zero(); len],
            r: vec![T::zero(); len],
            n: vec![T::zero(); len],
            rh: vec![T::zero(); len],
        }
    }
}

/// Weights of one GRU cell.
struct Gru<'a, T> {
    w_in: &'a [T],
    w_rec: &'a [T],
    bias: &'a [T],
    hidden: usize,
}

/// Gradient buffers for one GRU cell.
struct GruGrad<'a, T> {
    w_in: &'a mut [T],
    w_rec: &'a mut [T],
    bias: &'a mut [T],
}

impl<T: Real> Gru<'_, T> {
    /// One step; writes gates into the `k`-th slot of `trace` and the new
    /// state into `h_out`.
    fn step(&self, x: &[T], h_prev: &[T], trace: &mut GruTrace<T>, k: usize, h_out: &mut [T]) {
        let h = self.hidden;
        let mut pre = self.bias.to_vec();
        matvec_acc(self.w_in, x, &mut pre);
        matvec_acc(&self.w_rec[..2 * h * h], h_prev, &mut pre[..2 * h]);
        let (z, r, n, rh) = (
            &mut trace.z[k * h..(k + 1) * h],
            &mut trace.r[k * h..(k + 1) * h],
            &mut trace.n[k * h..(k + 1) * h],
            &mut trace.rh[k * h..(k + 1) * h],
        );
        for i in 0..h {
            z[i] = sigmoid(pre[i]);
            r[i] = sigmoid(pre[h + i]);
            rh[i] = r[i] * h_prev[i];
        }
        matvec_acc(&self.w_rec[2 * h * h..], rh, &mut pre[2 * h..]);
        for i in 0..h {
            n[i] = pre[2 * h + i].tanh();
            h_out[i] = (T::one() - z[i]) * h_prev[i] + z[i] * n[i];
        }
    }

    /// Backward through one step. `dh` is the gradient w.r.t. the step's
    /// output state; accumulates into `grad`, `dh_prev` and (optionally) `dx`.
    #[allow(clippy::too_many_arguments)]
    fn step_backward(
        &self,
        x: &[T],
        h_prev: &[T],
        trace: &GruTrace<T>,
        k: usize,
        dh: &[T],
        grad: &mut GruGrad<'_, T>,
        dh_prev: &mut [T],
        dx: Option<&mut [T]>,
    ) {
        let h = self.hidden;
        let z = &trace.z[k * h..(k + 1) * h];
        let r = &trace.r[k * h..(k + 1) * h];
        let n = &trace.n[k * h..(k + 1) * h];
        let rh = &trace.rh[k * h..(k + 1) * h];
        let mut dpre = vec![T::zero(); 3 * h];
        for i in 0..h {
            let dz = dh[i] * (n[i] - h_prev[i]);
            let dn = dh[i] * z[i];
            dh_prev[i] = dh_prev[i] + dh[i] * (T::one() - z[i]);
            dpre[i] = dz * z[i] * (T::one() - z[i]);
            dpre[2 * h + i] = dn * (T::one() - n[i] * n[i]);
        }
        let mut drh = vec![T::zero(); h];
        matvec_t_acc(&self.w_rec[2 * h * h..], &dpre[2 * h..], &mut drh);
        outer_acc(&mut grad.w_rec[2 * h * h..], &dpre[2 * h..], rh);
        for i in 0..h {
            dh_prev[i] = dh_prev[i] + drh[i] * r[i];
            dpre[h + i] = drh[i] * h_prev[i] * r[i] * (T::one() - r[i]);
        }
        outer_acc(&mut grad.w_rec[..2 * h * h], &dpre[..2 * h], h_prev);
        matvec_t_acc(&self.w_rec[..2 * h * h], &dpre[..2 * h], dh_prev);
        outer_acc(grad.w_in, &dpre, x);
        axpy(T::one(), &dpre, grad.bias);
        if let Some(dx) = dx {
            matvec_t_acc(self.w_in, &dpre, dx);
        }
    }
}

fn encoder<T: Real>(p: &Parameters<T>) -> Gru<'_, T> {
    Gru {
        w_in: p.get(P::EncWIn),
        w_rec: p.get(P::EncWRec),
        bias: p.get(P::EncBias),
        hidden: p.config.enc_hidden,
    }
}

fn decoder<T: Real>(p: &Parameters<T>) -> Gru<'_, T> {
    Gru {
        w_in: p.get(P::DecWIn),
        w_rec: p.get(P::DecWRec),
        bias: p.get(P::DecBias),
        hidden: p.config.dec_hidden,
    }
}

/// Encoder pass over one utterance.
pub(crate) struct Encoded<T> {
    pub frames: usize,
    pub x: Vec<T>,
    /// `[frames + 1, enc_hidden]`, row 0 is the zero initial state.
    pub h: Vec<T>,
    trace: GruTrace<T>,
    /// Attention keys `W_k h_t`, `[frames, attn_dim]`.
    pub keys: Vec<T>,
}

impl<T: Real> Encoded<T> {
    pub fn state(&self, t: usize, he: usize) -> &[T] {
        &self.h[(t + 1) * he..(t + 2) * he]
    }
    pub fn states(&self, he: usize) -> &[T] {
        &self.h[he..]
    }
}

pub(crate) fn encode<T: Real>(p: &Parameters<T>, x: &[T], frames: usize) -> Encoded<T> {
    let c = &p.config;
    let (d, he, a) = (c.feature_dim, c.enc_hidden, c.attn_dim);
    let gru = encoder(p);
    let mut h = vec![T::zero(); (frames + 1) * he];
    let mut trace = GruTrace::with_len(frames * he);
    for t in 0..frames {
        let (prev, next) = h.split_at_mut((t + 1) * he);
        gru.step(&x[t * d..(t + 1) * d], &prev[t * he..], &mut trace, t, &mut next[..he]);
    }
    let w_key = p.get(P::AttKey);
    let mut keys = vec![T::zero(); frames * a];
    for t in 0..frames {
        matvec_acc(w_key, &h[(t + 1) * he..(t + 2) * he], &mut keys[t * a..(t + 1) * a]);
    }
    Encoded {
        frames,
        x: x.to_vec(),
        h,
        trace,
        keys,
    }
}

/// Decoder pass under teacher forcing (or step-by-step during decoding).
pub(crate) struct Decoded<T> {
    pub steps: usize,
    /// `[steps + 1, dec_hidden]`, row 0 is the zero initial state.
    pub s: Vec<T>,
    trace: GruTrace<T>,
    /// `tanh(W_q s_prev + key_t)`, `[steps, frames, attn_dim]`.
    u: Vec<T>,
    /// `[steps, frames]`
    alpha: Vec<T>,
    /// `[steps, emb_dim + enc_hidden]` GRU inputs; the tail is the context.
    inputs: Vec<T>,
    /// `[steps, vocab]` softmax outputs.
    pub probs: Vec<T>,
}

impl<T: Real> Decoded<T> {
    pub fn new(c: &ModelConfig, frames: usize, capacity: usize) -> Self {
        let (hd, he, a, e, v) = (c.dec_hidden, c.enc_hidden, c.attn_dim, c.emb_dim, c.vocab_total());
        Decoded {
            steps: 0,
            s: vec![T::zero(); (capacity + 1) * hd],
            trace: GruTrace::with_len(capacity * hd),
            u: vec![T::zero(); capacity * frames * a],
            alpha: vec![T::zero(); capacity * frames],
            inputs: vec![T::zero(); capacity * (e + he)],
            probs: vec![T::zero(); capacity * v],
        }
    }

    pub fn state(&self, j: usize, hd: usize) -> &[T] {
        &self.s[(j + 1) * hd..(j + 2) * hd]
    }

    /// Run decoder step `j` with previous token `prev`; returns the
    /// negative log-likelihood of `target` when one is given.
    pub fn step(
        &mut self,
        p: &Parameters<T>,
        enc: &Encoded<T>,
        j: usize,
        prev: usize,
        target: Option<usize>,
    ) -> Option<T> {
        let c = &p.config;
        let (hd, he, a, e, v) = (c.dec_hidden, c.enc_hidden, c.attn_dim, c.emb_dim, c.vocab_total());
        let frames = enc.frames;
        let s_prev = self.s[j * hd..(j + 1) * hd].to_vec();

        let mut q = vec![T::zero(); a];
        matvec_acc(p.get(P::AttQuery), &s_prev, &mut q);
        let att_v = p.get(P::AttV);
        let u = &mut self.u[j * frames * a..(j + 1) * frames * a];
        let alpha = &mut self.alpha[j * frames..(j + 1) * frames];
        for t in 0..frames {
            let ut = &mut u[t * a..(t + 1) * a];
            for (k, out) in ut.iter_mut().enumerate() {
                *out = (q[k] + enc.keys[t * a + k]).tanh();
            }
            alpha[t] = dot(att_v, ut);
        }
        softmax_in_place(alpha);

        let input = &mut self.inputs[j * (e + he)..(j + 1) * (e + he)];
        input[..e].copy_from_slice(&p.get(P::Embed)[prev * e..(prev + 1) * e]);
        let ctx = &mut input[e..];
        ctx.fill(T::zero());
        for t in 0..frames {
            axpy(alpha[t], enc.state(t, he), ctx);
        }

        let (head, tail) = self.s.split_at_mut((j + 1) * hd);
        decoder(p).step(input, &head[j * hd..], &mut self.trace, j, &mut tail[..hd]);

        let probs = &mut self.probs[j * v..(j + 1) * v];
        probs.copy_from_slice(p.get(P::OutB));
        let w_out = p.get(P::OutW);
        let s_new = &tail[..hd];
        for (k, out) in probs.iter_mut().enumerate() {
            let row = &w_out[k * (hd + he)..(k + 1) * (hd + he)];
            *out = *out + dot(&row[..hd], s_new) + dot(&row[hd..], &input[e..]);
        }
        let logit = target.map(|t| probs[t]);
        let log_z = softmax_in_place(probs);
        self.steps = self.steps.max(j + 1);
        logit.map(|l| log_z - l)
    }
}

struct ExampleCache<T> {
    enc: Encoded<T>,
    dec: Decoded<T>,
    inputs: Vec<usize>,
    targets: Vec<usize>,
}

/// Everything `backward` needs from `forward_loss`.
pub struct Cache<T> {
    examples: Vec<ExampleCache<T>>,
    /// Number of non-PAD target tokens across the batch.
    pub n_tokens: usize,
}

/// Teacher-forced mean cross-entropy over non-PAD targets.
pub fn forward_loss<T: Real>(p: &Parameters<T>, batch: &Batch<T>) -> Result<(T, Cache<T>)> {
    let c = &p.config;
    if batch.feature_dim != c.feature_dim {
        return Err(Error::Shape(format!(
            "batch feature dim {} vs model {}",
            batch.feature_dim, c.feature_dim
        )));
    }
    let v = c.vocab_total();
    let mut examples = Vec::with_capacity(batch.size);
    let mut total = T::zero();
    let mut n_tokens = 0;
    for b in 0..batch.size {
        let frames = batch.n_frames(b)?;
        let steps = batch.n_steps(b)?;
        let row = b * batch.max_steps;
        let inputs = batch.input_tokens[row..row + steps].to_vec();
        let targets = batch.target_tokens[row..row + steps].to_vec();
        if let Some(&t) = inputs.iter().chain(&targets).find(|&&t| t >= v) {
            return Err(Error::Shape(format!("token id {t} >= vocab {v}")));
        }
        if frames == 0 && steps > 0 {
            return Err(Error::Shape(format!("example {b} has targets but no frames")));
        }
        let enc = encode(p, batch.frames(b, frames), frames);
        let mut dec = Decoded::new(c, frames, steps);
        for j in 0..steps {
            let nll = dec.step(p, &enc, j, inputs[j], Some(targets[j]));
            total = total + nll.expect("target given");
        }
        n_tokens += steps;
        examples.push(ExampleCache {
            enc,
            dec,
            inputs,
            targets,
        });
    }
    let loss = if n_tokens == 0 {
        T::zero()
    } else {
        total / T::of(n_tokens as f64)
    };
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }
    Ok((loss, Cache { examples, n_tokens }))
}

/// Exact gradient of the mean loss w.r.t. every parameter tensor.
pub fn backward<T: Real>(p: &Parameters<T>, cache: &Cache<T>) -> Parameters<T> {
    let mut g = Parameters::zeros(&p.config);
    if cache.n_tokens == 0 {
        return g;
    }
    let scale = T::one() / T::of(cache.n_tokens as f64);
    for ex in &cache.examples {
        backward_example(p, ex, scale, &mut g);
    }
    g
}

fn split_grads<T: Real>(g: &mut Parameters<T>) -> [&mut [T]; 12] {
    let mut it = g.tensors.iter_mut().map(|t| t.tensor.data.as_mut_slice());
    std::array::from_fn(|_| it.next().expect("twelve tensors"))
}

fn backward_example<T: Real>(p: &Parameters<T>, ex: &ExampleCache<T>, scale: T, g: &mut Parameters<T>) {
    let c = &p.config;
    let (hd, he, a, e, v) = (c.dec_hidden, c.enc_hidden, c.attn_dim, c.emb_dim, c.vocab_total());
    let (enc, dec) = (&ex.enc, &ex.dec);
    let frames = enc.frames;
    let [g_enc_w_in, g_enc_w_rec, g_enc_bias, g_embed, g_wq, g_wk, g_v, g_dec_w_in, g_dec_w_rec, g_dec_bias, g_out_w, g_out_b] =
        split_grads(g);

    let w_out = p.get(P::OutW);
    let w_q = p.get(P::AttQuery);
    let att_v = p.get(P::AttV);
    let dec_gru = decoder(p);
    let mut dec_grad = GruGrad {
        w_in: g_dec_w_in,
        w_rec: g_dec_w_rec,
        bias: g_dec_bias,
    };

    let mut dh_enc = vec![T::zero(); frames * he];
    let mut dkeys = vec![T::zero(); frames * a];
    let mut ds = vec![T::zero(); hd];
    let mut dlogits = vec![T::zero(); v];
    let mut d_out_in = vec![T::zero(); hd + he];
    let mut dx = vec![T::zero(); e + he];
    let mut dalpha = vec![T::zero(); frames];
    let mut dq = vec![T::zero(); a];

    for j in (0..dec.steps).rev() {
        let probs = &dec.probs[j * v..(j + 1) * v];
        for (k, dl) in dlogits.iter_mut().enumerate() {
            *dl = probs[k] * scale;
        }
        dlogits[ex.targets[j]] = dlogits[ex.targets[j]] - scale;

        let s_new = dec.state(j, hd);
        let input = &dec.inputs[j * (e + he)..(j + 1) * (e + he)];
        let ctx = &input[e..];
        d_out_in.fill(T::zero());
        for (k, &dl) in dlogits.iter().enumerate() {
            let row = k * (hd + he);
            axpy(dl, s_new, &mut g_out_w[row..row + hd]);
            axpy(dl, ctx, &mut g_out_w[row + hd..row + hd + he]);
            axpy(dl, &w_out[row..row + hd + he], &mut d_out_in);
        }
        axpy(T::one(), &dlogits, g_out_b);
        axpy(T::one(), &d_out_in[..hd], &mut ds);

        let s_prev = &dec.s[j * hd..(j + 1) * hd];
        let mut ds_prev = vec![T::zero(); hd];
        dx.fill(T::zero());
        dec_gru.step_backward(input, s_prev, &dec.trace, j, &ds, &mut dec_grad, &mut ds_prev, Some(&mut dx));

        let tok = ex.inputs[j];
        axpy(T::one(), &dx[..e], &mut g_embed[tok * e..(tok + 1) * e]);
        let mut dctx = d_out_in[hd..].to_vec();
        axpy(T::one(), &dx[e..], &mut dctx);

        // attention
        let alpha = &dec.alpha[j * frames..(j + 1) * frames];
        let u = &dec.u[j * frames * a..(j + 1) * frames * a];
        let mut weighted = T::zero();
        for t in 0..frames {
            let h_t = enc.state(t, he);
            dalpha[t] = dot(&dctx, h_t);
            weighted = weighted + alpha[t] * dalpha[t];
            axpy(alpha[t], &dctx, &mut dh_enc[t * he..(t + 1) * he]);
        }
        dq.fill(T::zero());
        for t in 0..frames {
            let de = alpha[t] * (dalpha[t] - weighted);
            if de == T::zero() {
                continue;
            }
            let ut = &u[t * a..(t + 1) * a];
            axpy(de, ut, g_v);
            let dk = &mut dkeys[t * a..(t + 1) * a];
            for k in 0..a {
                let dpre = de * att_v[k] * (T::one() - ut[k] * ut[k]);
                dq[k] = dq[k] + dpre;
                dk[k] = dk[k] + dpre;
            }
        }
        outer_acc(g_wq, &dq, s_prev);
        matvec_t_acc(w_q, &dq, &mut ds_prev);
        ds = ds_prev;
    }

    let w_k = p.get(P::AttKey);
    for t in 0..frames {
        let dk = &dkeys[t * a..(t + 1) * a];
        outer_acc(g_wk, dk, enc.state(t, he));
        matvec_t_acc(w_k, dk, &mut dh_enc[t * he..(t + 1) * he]);
    }

    let enc_gru = encoder(p);
    let mut enc_grad = GruGrad {
        w_in: g_enc_w_in,
        w_rec: g_enc_w_rec,
        bias: g_enc_bias,
    };
    let d = c.feature_dim;
    let mut dh = vec![T::zero(); he];
    for t in (0..frames).rev() {
        axpy(T::one(), &dh_enc[t * he..(t + 1) * he], &mut dh);
        let mut dh_prev = vec![T::zero(); he];
        enc_gru.step_backward(
            &enc.x[t * d..(t + 1) * d],
            &enc.h[t * he..(t + 1) * he],
            &enc.trace,
            t,
            &dh,
            &mut enc_grad,
            &mut dh_prev,
            None,
        );
        dh = dh_prev;
    }
}

/// Final encoder states for each frame of each example, stacked by rows.
pub fn encoder_states<T: Real>(p: &Parameters<T>, batch: &Batch<T>) -> Result<Vec<Vec<T>>> {
    (0..batch.size)
        .map(|b| {
            let frames = batch.n_frames(b)?;
            let enc = encode(p, batch.frames(b, frames), frames);
            Ok(enc.states(p.config.enc_hidden).to_vec())
        })
        .collect()
}

/// Decoder states under teacher forcing, one row per non-PAD step.
pub fn teacher_forced_states<T: Real>(p: &Parameters<T>, batch: &Batch<T>) -> Result<Vec<Vec<T>>> {
    let hd = p.config.dec_hidden;
    let (_, cache) = forward_loss(p, batch)?;
    Ok(cache
        .examples
        .iter()
        .map(|ex| ex.dec.s[hd..(ex.dec.steps + 1) * hd].to_vec())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelConfig};
    use crate::rng::Rng;
    use crate::synth::Features;
    use rand::{Rng as _, SeedableRng};

    fn tiny() -> ModelConfig {
        ModelConfig {
            feature_dim: 4,
            content_vocab: 5,
            enc_hidden: 6,
            dec_hidden: 5,
            emb_dim: 3,
            attn_dim: 4,
        }
    }

    fn random_example(c: &ModelConfig, rng: &mut Rng) -> (Features, Vec<usize>) {
        let n = rng.random_range(2..8);
        let f = Features {
            n_frames: n,
            dim: c.feature_dim,
            data: (0..n * c.feature_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let len = rng.random_range(1..5);
        (f, (0..len).map(|_| rng.random_range(0..c.content_vocab)).collect())
    }

    fn batch_of(c: &ModelConfig, ex: &[(Features, Vec<usize>)]) -> Batch<f64> {
        let refs: Vec<(&Features, &[usize])> = ex.iter().map(|(f, t)| (f, t.as_slice())).collect();
        Batch::new(c, &refs).unwrap()
    }

    #[test]
    fn zero_output_layer_gives_log_vocab() {
        let c = tiny();
        let mut p: Parameters<f64> = init_params(&c, 1).unwrap();
        p.get_mut(P::OutW).fill(0.0);
        p.get_mut(P::OutB).fill(0.0);
        let mut rng = Rng::seed_from_u64(0);
        let ex: Vec<_> = (0..3).map(|_| random_example(&c, &mut rng)).collect();
        let (loss, _) = forward_loss(&p, &batch_of(&c, &ex)).unwrap();
        assert!((loss - (c.vocab_total() as f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn duplicate_and_order_invariance() {
        let c = tiny();
        let p: Parameters<f64> = init_params(&c, 2).unwrap();
        let mut rng = Rng::seed_from_u64(1);
        let a = random_example(&c, &mut rng);
        let b = random_example(&c, &mut rng);
        let (single, _) = forward_loss(&p, &batch_of(&c, std::slice::from_ref(&a))).unwrap();
        let (double, _) = forward_loss(&p, &batch_of(&c, &[a.clone(), a.clone()])).unwrap();
        assert!((single - double).abs() < 1e-12);
        assert!(single.is_finite() && single >= 0.0);
        let (ab, _) = forward_loss(&p, &batch_of(&c, &[a.clone(), b.clone()])).unwrap();
        let (ba, _) = forward_loss(&p, &batch_of(&c, &[b, a])).unwrap();
        assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn padding_does_not_change_loss() {
        let c = tiny();
        let p: Parameters<f64> = init_params(&c, 3).unwrap();
        let mut rng = Rng::seed_from_u64(2);
        let ex: Vec<_> = (0..3).map(|_| random_example(&c, &mut rng)).collect();
        let refs: Vec<(&Features, &[usize])> = ex.iter().map(|(f, t)| (f, t.as_slice())).collect();
        let plain: Batch<f64> = Batch::new(&c, &refs).unwrap();
        let padded: Batch<f64> = Batch::padded(&c, &refs, 5, 3).unwrap();
        let (l1, _) = forward_loss(&p, &plain).unwrap();
        let (l2, _) = forward_loss(&p, &padded).unwrap();
        assert!((l1 - l2).abs() <= 1e-10);
    }

    #[test]
    fn empty_target_mask_gives_zero_gradients() {
        let c = tiny();
        let p: Parameters<f64> = init_params(&c, 4).unwrap();
        let mut rng = Rng::seed_from_u64(3);
        let ex: Vec<_> = (0..2).map(|_| random_example(&c, &mut rng)).collect();
        let mut batch = batch_of(&c, &ex);
        batch.token_mask.fill(false);
        let (loss, cache) = forward_loss(&p, &batch).unwrap();
        assert_eq!(loss, 0.0);
        let g = backward(&p, &cache);
        assert!(g.same_layout(&p));
        assert!(g.tensors.iter().all(|t| t.tensor.data.iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn feature_dim_mismatch_is_an_error() {
        let c = tiny();
        let p: Parameters<f64> = init_params(&c, 4).unwrap();
        let other = ModelConfig { feature_dim: 3, ..c.clone() };
        let f = Features { n_frames: 2, dim: 3, data: vec![0.0; 6] };
        let batch: Batch<f64> = Batch::new(&other, &[(&f, &[1, 2][..])]).unwrap();
        assert!(matches!(forward_loss(&p, &batch), Err(Error::Shape(_))));
    }
}
