//! Traffic/tweet tensors, fusion, time encoding and windowed datasets.

pub mod dataset;
pub mod fusion;
pub mod tensor;
pub mod timeenc;

pub use dataset::{make_windows, window_offsets, Dataset, DatasetManifest, NormStats, SplitSpec, WindowSpec, WindowedSample};
pub use fusion::{fuse, fuse_step, unfuse, unfuse_step, Channel, Layout};
pub use tensor::{check_aligned, TrafficTensor, TweetFeatureTensor, TRAFFIC_CHANNELS, TWEET_CHANNELS};
pub use timeenc::{calendar_features, calendar_matrix, encode_input, sinusoidal_encoding, sinusoids_from, CALENDAR_DIM, CALENDAR_NAMES};
