//! Scalar chaos indicators and heatmap assembly.

pub mod ftle_stats;
pub mod heatmap;
pub mod moments;
pub mod ratios;

pub use ftle_stats::{column_max, positive_fraction, rescaled_mean_ftle, Rescale};
pub use heatmap::{DisplayTransform, HeatCell, HeatmapTable};
pub use moments::{eev_sigma, excess_kurtosis, fit_scaling_exponent, window_kurtosis, KurtosisPooling};
pub use ratios::{
    kl_divergence, mean_ratio_distance, reference_pdf, spacing_ratios, spacing_ratios_with_width, RatioSample,
    Reference,
};
