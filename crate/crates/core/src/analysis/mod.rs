//! Representational shift between a base and a fine-tuned model.

mod compare;
mod metrics;
mod probe;

pub use compare::{compare_models, parse_analysis_csv, ComponentReport, ReprReport, ANALYSIS_HEADER};
pub use metrics::{
    center_columns, effective_rank, emd_1d, emd_per_dimension, linear_cka, spectral_stats, spectral_stats_raw,
    weight_displacement, Displacement, Spectrum,
};
pub use probe::{capture_activations, ActivationProbe, Activations};
