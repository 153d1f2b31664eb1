use serde::{Deserialize, Serialize};

use super::metrics::{emd_1d, emd_per_dimension, linear_cka, spectral_stats, weight_displacement};
use super::probe::{capture_activations, ActivationProbe};
use crate::model::{Component, Parameters};
use crate::runner::AnalysisConfig;
use crate::synth::Corpus;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    pub component: Component,
    pub cka: f64,
    pub emd: f64,
    pub delta_theta: f64,
    pub effective_rank: usize,
    pub tail: f64,
}

impl ComponentReport {
    pub fn is_finite(&self) -> bool {
        [self.cka, self.emd, self.delta_theta, self.tail].iter().all(|v| v.is_finite())
    }
}

/// Base versus fine-tuned shift, encoder row first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReprReport {
    pub comparison_id: String,
    pub components: [ComponentReport; 2],
}

impl ReprReport {
    pub fn get(&self, c: Component) -> &ComponentReport {
        &self.components[c.tag() as usize]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(ANALYSIS_HEADER);
        s.push('\n');
        s.push_str(&self.csv_rows());
        s
    }

    pub fn csv_rows(&self) -> String {
        self.components
            .iter()
            .map(|c| {
                format!(
                    "{},{},{},{},{},{},{}\n",
                    self.comparison_id,
                    c.component.short(),
                    c.cka,
                    c.emd,
                    c.delta_theta,
                    c.effective_rank,
                    c.tail
                )
            })
            .collect()
    }
}

pub const ANALYSIS_HEADER: &str = "comparison_id,component,cka,emd,delta_theta,eff_rank,tail";

/// Parse analysis rows back into reports, pairing enc and dec rows by id.
pub fn parse_analysis_csv(text: &str) -> Result<Vec<ReprReport>> {
    let bad = |detail: String| Error::Format { what: "analysis csv", detail };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == ANALYSIS_HEADER => {}
        other => return Err(bad(format!("unexpected header {other:?}"))),
    }
    let mut pending: Vec<(String, Option<ComponentReport>, Option<ComponentReport>)> = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad(format!("expected 7 fields in {line:?}")));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
        let component = match f[1] {
            "enc" => Component::Encoder,
            "dec" => Component::Decoder,
            other => return Err(bad(format!("unknown component {other:?}"))),
        };
        let row = ComponentReport {
            component,
            cka: num(f[2])?,
            emd: num(f[3])?,
            delta_theta: num(f[4])?,
            effective_rank: f[5].parse().map_err(|_| bad(format!("bad rank {:?}", f[5])))?,
            tail: num(f[6])?,
        };
        let idx = match pending.iter().position(|p| p.0 == f[0]) {
            Some(i) => i,
            None => {
                pending.push((f[0].to_string(), None, None));
                pending.len() - 1
            }
        };
        let slot = if component == Component::Encoder { &mut pending[idx].1 } else { &mut pending[idx].2 };
        if slot.replace(row).is_some() {
            return Err(bad(format!("duplicate {} row for {}", f[1], f[0])));
        }
    }
    pending
        .into_iter()
        .map(|(id, e, d)| match (e, d) {
            (Some(e), Some(d)) => Ok(ReprReport {
                comparison_id: id,
                components: [e, d],
            }),
            _ => Err(bad(format!("comparison {id} lacks an enc or dec row"))),
        })
        .collect()
}

/// Weight displacement plus activation CKA and EMD between `base` and
/// `ft`; spectral statistics describe the fine-tuned activations.
pub fn compare_models(
    comparison_id: &str,
    base: &Parameters<f32>,
    ft: &Parameters<f32>,
    corpus: &Corpus,
    probe: &ActivationProbe,
    config: &AnalysisConfig,
) -> Result<ReprReport> {
    if base.config != ft.config {
        return Err(Error::Config("compared checkpoints have different model configs".into()));
    }
    let dtheta = weight_displacement(base, ft)?;
    let a = capture_activations(base, corpus, probe)?;
    let b = capture_activations(ft, corpus, probe)?;
    let row = |component: Component| -> Result<ComponentReport> {
        let (x, y) = match component {
            Component::Encoder => (&a.encoder, &b.encoder),
            Component::Decoder => (&a.decoder, &b.decoder),
        };
        let emd = if config.per_dimension_emd {
            emd_per_dimension(x, y)?
        } else {
            emd_1d(x.as_slice(), y.as_slice())?
        };
        let spectrum = spectral_stats(y, config.energy_threshold)?;
        Ok(ComponentReport {
            component,
            cka: linear_cka(x, y)?,
            emd,
            delta_theta: dtheta.get(component),
            effective_rank: spectrum.effective_rank,
            tail: spectrum.tail,
        })
    };
    Ok(ReprReport {
        comparison_id: comparison_id.to_string(),
        components: [row(Component::Encoder)?, row(Component::Decoder)?],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;
    use crate::runner::RunConfig;
    use crate::synth::{build_corpus, SplitCounts};

    fn setup() -> (Corpus, ActivationProbe, RunConfig) {
        let mut cfg = RunConfig::quick();
        cfg.target.train = SplitCounts::default();
        cfg.target.val = SplitCounts::default();
        cfg.target.eval = SplitCounts { a: 12, b: 0, c: 12, d: 0 };
        let corpus = build_corpus(&cfg.target, 5).unwrap();
        let probe = ActivationProbe::new(&corpus, 16, 300, 7).unwrap();
        (corpus, probe, cfg)
    }

    #[test]
    fn self_comparison_is_fixed_point() {
        let (corpus, probe, cfg) = setup();
        let p = init_params(&cfg.model, 1).unwrap();
        let r = compare_models("self", &p, &p, &corpus, &probe, &cfg.analysis).unwrap();
        for c in &r.components {
            assert!((c.cka - 1.0).abs() < 1e-10, "{c:?}");
            assert_eq!((c.emd, c.delta_theta), (0.0, 0.0));
            assert!(c.effective_rank >= 1 && c.tail > 0.0 && c.tail <= 1.0);
        }
        assert_eq!(parse_analysis_csv(&r.to_csv()).unwrap(), vec![r]);
    }

    #[test]
    fn activations_shape_and_repeatability() {
        let (corpus, probe, cfg) = setup();
        let p = init_params(&cfg.model, 1).unwrap();
        let q = init_params(&cfg.model, 2).unwrap();
        let a = capture_activations(&p, &corpus, &probe).unwrap();
        assert_eq!(a.encoder.ncols(), cfg.model.enc_hidden);
        assert_eq!(a.decoder.ncols(), cfg.model.dec_hidden);
        assert!(a.encoder.nrows() <= 300 && a.decoder.nrows() > 0);
        assert_eq!(a, capture_activations(&p, &corpus, &probe).unwrap());
        let b = capture_activations(&q, &corpus, &probe).unwrap();
        assert_eq!(a.encoder.shape(), b.encoder.shape());
        assert_eq!(a.decoder.shape(), b.decoder.shape());
        let r = compare_models("pq", &p, &q, &corpus, &probe, &cfg.analysis).unwrap();
        assert!(r.components.iter().all(|c| c.is_finite() && c.cka < 1.0 && c.emd > 0.0));
    }

    #[test]
    fn probe_errors() {
        let (corpus, mut probe, cfg) = setup();
        assert!(ActivationProbe::new(&corpus, 40, 300, 0).is_err());
        probe.ids.push("missing".into());
        let p = init_params(&cfg.model, 1).unwrap();
        assert!(capture_activations(&p, &corpus, &probe).is_err());
        let other = init_params(&crate::model::ModelConfig { dec_hidden: 8, ..cfg.model.clone() }, 1).unwrap();
        assert!(compare_models("x", &p, &other, &corpus, &probe, &cfg.analysis).is_err());
    }
}
