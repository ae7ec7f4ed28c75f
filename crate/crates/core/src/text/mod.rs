//! Tweet text processing: tokenizing, keyword lexicons, document-term
//! counts, truncated SVD and the per-segment feature channels.

pub mod dtm;
pub mod features;
pub mod geo;
pub mod lexicon;
pub mod svd;
pub mod tokenize;

pub use dtm::DocumentTermMatrix;
pub use features::{
    assign_tweets, extract_features, keyword_count, term_frequency_signal, FeatureOptions, FeatureSet,
    SegmentFeatureSeries, TermFreqMode, TweetRecord,
};
pub use geo::{assign_to_segment, haversine_km, SegmentCenter};
pub use lexicon::{KeywordLexicon, LexiconKind};
pub use svd::{components_for_ratio, explained_variance_curve, truncated_svd, truncated_svd_with, LinearOperator, SvdFactors, SvdOptions};
pub use tokenize::tokenize;
