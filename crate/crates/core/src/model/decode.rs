use super::network::{encode, Decoded};
use super::Parameters;
use crate::synth::Features;
use crate::tensor::{argmax, Real};

/// Decode budget for a reference of `ref_len` tokens.
pub fn max_decode_len(ref_len: usize) -> usize {
    2 * ref_len + 10
}

/// Greedy decoding from BOS until EOS or `max_len` steps. Returned tokens
/// exclude specials; argmax ties go to the lowest id.
pub fn greedy_decode<T: Real>(p: &Parameters<T>, features: &Features, max_len: usize) -> Vec<usize> {
    assert!(features.n_frames > 0, "cannot decode an empty utterance");
    let c = &p.config;
    let x: Vec<T> = features.data.iter().map(|&v| T::of(v as f64)).collect();
    let enc = encode(p, &x, features.n_frames);
    let mut dec = Decoded::new(c, features.n_frames, max_len);
    let v = c.vocab_total();
    let mut prev = c.bos();
    let mut out = Vec::new();
    for j in 0..max_len {
        dec.step(p, &enc, j, prev, None);
        let next = argmax(&dec.probs[j * v..(j + 1) * v]);
        if next == c.eos() {
            break;
        }
        if next < c.content_vocab {
            out.push(next);
        }
        prev = next;
    }
    out
}
