//! CDL channel synthesis.
//!
//! Builds frequency-domain MIMO channel realizations from clustered delay
//! line profiles: per-cluster rays with deterministic angular offsets, random
//! initial phases, UPA steering on both link ends, Doppler from UE motion,
//! and one frequency sample per resource block.

mod generate;
mod profile;
mod types;

pub use generate::{generate_channel, generate_taps, rms_delay_spread, rms_of_taps, steering_vector, Tap};
pub use profile::{load_profile, load_profile_from_dir, parse_profile};
pub use types::{
    AngleSpreadDeg, ArrayConfig, CdlProfileSpec, ChannelRealization, ClusterParam, LinkConfig,
    ProfileId,
};

use crate::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// UMa LOS probability as a function of 2-D BS-UE distance and UE antenna
/// height.
///
/// Distances of 18 m or less are LOS with probability one; beyond that the
/// closed form applies, with the height correction active between 13 m and
/// 28 m. Heights above 28 m are outside the model's domain.
pub fn los_probability(d_2d: f64, h_ut: f64) -> Result<f64> {
    if !(d_2d.is_finite() && h_ut.is_finite()) || d_2d < 0.0 {
        return Err(Error::Domain(format!("d_2d must be finite and >= 0, got {d_2d}")));
    }
    if !(0.0..=28.0).contains(&h_ut) {
        return Err(Error::Domain(format!("h_ut must be in [0, 28] m, got {h_ut}")));
    }
    if d_2d <= 18.0 {
        return Ok(1.0);
    }
    let c = if h_ut <= 13.0 {
        0.0
    } else {
        ((h_ut - 13.0) / 10.0).powf(1.5)
    };
    let base = 18.0 / d_2d + (-d_2d / 63.0).exp() * (1.0 - 18.0 / d_2d);
    let uplift = 1.0 + 0.8 * c * (d_2d / 100.0).powi(3) * (-d_2d / 150.0).exp();
    Ok((base * uplift).clamp(0.0, 1.0))
}
