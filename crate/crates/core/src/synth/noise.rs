use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Features;
use crate::rng::Rng;
use crate::{Error, Result};

const WALK_STEP_STD: f64 = 0.05;
const WALK_SMOOTHING: usize = 5;
const BABBLE_SPEAKERS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseProfile {
    Babble,
    Music,
    Environmental,
}

impl NoiseProfile {
    pub const ALL: [NoiseProfile; 3] = [
        NoiseProfile::Babble,
        NoiseProfile::Music,
        NoiseProfile::Environmental,
    ];
}

/// Add a synthetic noise track to `features`.
///
/// * babble: mean of three donor utterances, each tiled cyclically to the
///   target length;
/// * music: two sinusoids, one per half of the feature dimensions;
/// * environmental: a Gaussian random walk smoothed by a moving average.
pub fn apply_noise_profile(
    features: &Features,
    profile: NoiseProfile,
    gain: f64,
    rng: &mut Rng,
    donor_pool: &[&Features],
) -> Result<Features> {
    let (t_len, dim) = (features.n_frames, features.dim);
    let mut track = vec![0.0f64; t_len * dim];
    match profile {
        NoiseProfile::Babble => {
            if donor_pool.is_empty() {
                return Err(Error::Config("babble noise needs a non-empty donor pool".into()));
            }
            for _ in 0..BABBLE_SPEAKERS {
                let donor = donor_pool[rng.random_range(0..donor_pool.len())];
                if donor.dim != dim || donor.n_frames == 0 {
                    return Err(Error::Shape(format!(
                        "donor {}x{} incompatible with {}x{}",
                        donor.n_frames, donor.dim, t_len, dim
                    )));
                }
                for t in 0..t_len {
                    let src = donor.frame(t % donor.n_frames);
                    for (acc, &v) in track[t * dim..(t + 1) * dim].iter_mut().zip(src) {
                        *acc += v as f64;
                    }
                }
            }
            track.iter_mut().for_each(|v| *v /= BABBLE_SPEAKERS as f64);
        }
        NoiseProfile::Music => {
            let tones: Vec<(f64, f64)> = (0..2)
                .map(|_| {
                    (
                        rng.random_range(0.05..0.3),
                        rng.random_range(0.0..std::f64::consts::TAU),
                    )
                })
                .collect();
            let half = dim / 2;
            for t in 0..t_len {
                for j in 0..dim {
                    let (freq, phase) = tones[usize::from(j >= half)];
                    track[t * dim + j] = (std::f64::consts::TAU * freq * t as f64 + phase).sin();
                }
            }
        }
        NoiseProfile::Environmental => {
            let step = Normal::new(0.0, WALK_STEP_STD).expect("valid std");
            let mut walk = vec![0.0f64; t_len * dim];
            let mut pos = vec![0.0f64; dim];
            for t in 0..t_len {
                for j in 0..dim {
                    pos[j] += step.sample(rng);
                    walk[t * dim + j] = pos[j];
                }
            }
            for t in 0..t_len {
                let lo = t.saturating_sub(WALK_SMOOTHING / 2);
                let hi = (t + WALK_SMOOTHING / 2 + 1).min(t_len);
                for j in 0..dim {
                    let s: f64 = (lo..hi).map(|u| walk[u * dim + j]).sum();
                    track[t * dim + j] = s / (hi - lo) as f64;
                }
            }
        }
    }
    let data = features
        .data
        .iter()
        .zip(&track)
        .map(|(&x, &n)| (x as f64 + gain * n) as f32)
        .collect();
    Ok(Features {
        n_frames: t_len,
        dim,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn feats(n: usize, dim: usize, seed: u64) -> Features {
        let mut rng = Rng::seed_from_u64(seed);
        Features {
            n_frames: n,
            dim,
            data: (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn zero_gain_is_identity_and_shape_preserved() {
        let x = feats(13, 6, 1);
        let donor = feats(5, 6, 2);
        for p in NoiseProfile::ALL {
            let mut rng = Rng::seed_from_u64(9);
            let y = apply_noise_profile(&x, p, 0.0, &mut rng, &[&donor]).unwrap();
            assert_eq!(y, x);
            let z = apply_noise_profile(&x, p, 0.7, &mut rng, &[&donor]).unwrap();
            assert_eq!((z.n_frames, z.dim), (x.n_frames, x.dim));
        }
    }

    #[test]
    fn babble_with_constant_donor_shifts_by_gain_times_donor() {
        let x = feats(11, 4, 3);
        let c = [0.5f32, -1.0, 2.0, 0.25];
        let donor = Features {
            n_frames: 3,
            dim: 4,
            data: c.repeat(3),
        };
        let g = 0.5;
        let y = apply_noise_profile(&x, NoiseProfile::Babble, g, &mut Rng::seed_from_u64(0), &[&donor])
            .unwrap();
        for t in 0..x.n_frames {
            for j in 0..4 {
                let expect = (x.frame(t)[j] as f64 + g * c[j] as f64) as f32;
                assert_eq!(y.frame(t)[j], expect);
            }
        }
    }

    #[test]
    fn babble_requires_donors() {
        let x = feats(4, 4, 3);
        let err = apply_noise_profile(&x, NoiseProfile::Babble, 0.5, &mut Rng::seed_from_u64(0), &[]);
        assert!(err.is_err());
    }
}
