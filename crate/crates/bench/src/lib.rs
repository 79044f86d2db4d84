//! Shared fixtures for the solver benchmarks.

use fdsec_core::model::{sample_channels, ChannelSet, SystemParams};
use fdsec_core::robust::MomentModel;

/// Four antennas at 5 dB with SI factor 0.01, on a fixed channel draw.
pub fn default_instance() -> (ChannelSet, SystemParams) {
    let p = SystemParams::symmetric(4, 5.0, 0.01);
    (sample_channels(7, &p), p)
}

/// Moment estimates with radii 0.05 and outage threshold 0.05.
pub fn uncertain_moments(n: usize) -> MomentModel {
    MomentModel::isotropic(n, 0.01, 0.002, 0.05, 0.05, 0.05)
}
