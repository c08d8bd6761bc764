//! Threshold-free evaluation, latency measurement and synthetic data.

mod bench;
mod roc;
mod synthetic;

pub use bench::{bench_detection, BenchReport};
pub use roc::{pairwise_auc, roc_auc, roc_auc_stream, RocCurve};
pub use synthetic::{generate_synthetic, random_injections, ChannelSpec, Injection, SyntheticSpec};
