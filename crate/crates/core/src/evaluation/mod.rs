//! Fidelity metrics for synthetic sequences and 2D projection data.

mod features;
mod pca;
mod similarity;

pub use features::{
    extract_features, feature_matrix, FeatureMatrix, FeatureVector, FEATURES_PER_CHANNEL,
    FEATURE_NAMES,
};
pub use pca::{pca_project, symmetric_eigen, Pca, SymmetricEigen};
pub use similarity::{
    avg_cos_sim, avg_jen_dis, cosine_similarity, histogram, js_distance, js_per_feature,
    kl_divergence, similarity_report, JsReduction, MetricOptions, SimilarityReport,
    DEFAULT_BINS, SMOOTHING,
};
