use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// CDL profile identifier. A-C are NLOS, D-E are LOS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProfileId {
    A,
    B,
    C,
    D,
    E,
}

impl ProfileId {
    pub const ALL: [ProfileId; 5] = [ProfileId::A, ProfileId::B, ProfileId::C, ProfileId::D, ProfileId::E];

    /// Class label used by the identification networks.
    pub fn label(self) -> u8 {
        match self {
            ProfileId::A => 0,
            ProfileId::B => 1,
            ProfileId::C => 2,
            ProfileId::D => 3,
            ProfileId::E => 4,
        }
    }

    pub fn from_label(label: u8) -> Result<Self> {
        Self::ALL
            .get(label as usize)
            .copied()
            .ok_or_else(|| Error::Domain(format!("label {label} outside 0..=4")))
    }

    pub fn is_los(self) -> bool {
        matches!(self, ProfileId::D | ProfileId::E)
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(ProfileId::A),
            "B" | "b" => Ok(ProfileId::B),
            "C" | "c" => Ok(ProfileId::C),
            "D" | "d" => Ok(ProfileId::D),
            "E" | "e" => Ok(ProfileId::E),
            other => Err(Error::Domain(format!("unknown CDL profile {other:?}"))),
        }
    }
}

impl std::fmt::Display for ProfileId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let c = match self {
            ProfileId::A => 'A',
            ProfileId::B => 'B',
            ProfileId::C => 'C',
            ProfileId::D => 'D',
            ProfileId::E => 'E',
        };
        write!(f, "{c}")
    }
}

/// Uniform planar array geometry. Elements sit on a regular grid in the
/// array plane; spacing is in wavelengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub rows: usize,
    pub cols: usize,
    /// Element spacing in wavelengths.
    pub element_spacing: f64,
    /// Boresight azimuth in radians.
    pub orientation_az_rad: f64,
    /// Boresight zenith in radians (pi/2 = horizon).
    pub orientation_zen_rad: f64,
}

impl ArrayConfig {
    pub fn new(rows: usize, cols: usize) -> Self {
        ArrayConfig {
            rows,
            cols,
            element_spacing: 0.5,
            orientation_az_rad: 0.0,
            orientation_zen_rad: std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn elements(&self) -> usize {
        self.rows * self.cols
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows < 1 || self.cols < 1 {
            return Err(Error::Domain("array must have rows >= 1 and cols >= 1".into()));
        }
        if !(self.element_spacing > 0.0) {
            return Err(Error::Domain("element spacing must be > 0".into()));
        }
        Ok(())
    }
}

/// One row of a CDL cluster table. Angles are in degrees as transcribed;
/// `is_los_ray` marks the deterministic specular component of LOS profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParam {
    pub delay_normalized: f64,
    pub power_db: f64,
    pub aod_deg: f64,
    pub aoa_deg: f64,
    pub zod_deg: f64,
    pub zoa_deg: f64,
    pub is_los_ray: bool,
}

/// Per-cluster angle spreads in degrees: azimuth departure/arrival, zenith
/// departure/arrival.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleSpreadDeg {
    pub asd: f64,
    pub asa: f64,
    pub zsd: f64,
    pub zsa: f64,
}

/// A validated CDL profile: cluster table plus the LOS flag, K-factor and
/// ray-fanning parameters that drive channel synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdlProfileSpec {
    pub profile_id: ProfileId,
    pub is_los: bool,
    pub k_factor_db: Option<f64>,
    pub clusters: Vec<ClusterParam>,
    pub rays_per_cluster: usize,
    pub angle_spread_deg: AngleSpreadDeg,
}

impl CdlProfileSpec {
    /// Linear cluster powers normalized to sum to one (LOS ray included).
    pub fn normalized_linear_powers(&self) -> Vec<f64> {
        let lin: Vec<f64> = self
            .clusters
            .iter()
            .map(|c| 10f64.powf(c.power_db / 10.0))
            .collect();
        let total: f64 = lin.iter().sum();
        lin.iter().map(|p| p / total).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters.is_empty() {
            return Err(Error::Domain("profile has no clusters".into()));
        }
        if self.rays_per_cluster < 1 {
            return Err(Error::Domain("rays_per_cluster must be >= 1".into()));
        }
        if self.is_los != self.profile_id.is_los() {
            return Err(Error::Domain(format!(
                "profile {} must have is_los = {}",
                self.profile_id,
                self.profile_id.is_los()
            )));
        }
        if self.is_los && self.k_factor_db.is_none() {
            return Err(Error::Domain("LOS profile requires k_factor_db".into()));
        }
        if self.is_los && !self.clusters.iter().any(|c| c.is_los_ray) {
            return Err(Error::Domain("LOS profile requires a LOS ray row".into()));
        }
        if !self.is_los && self.clusters.iter().any(|c| c.is_los_ray) {
            return Err(Error::Domain("NLOS profile must not contain a LOS ray row".into()));
        }
        let mut prev = 0.0;
        for c in &self.clusters {
            if c.delay_normalized < 0.0 {
                return Err(Error::Domain("cluster delays must be >= 0".into()));
            }
            if c.delay_normalized < prev {
                return Err(Error::Domain("cluster delays must be sorted non-decreasing".into()));
            }
            prev = c.delay_normalized;
        }
        Ok(())
    }
}

/// Link-level simulation settings: carrier, numerology and UE motion.
/// Defaults follow the 28 GHz / 60 kHz / 13-RB mmWave setup with an
/// 8x8-element BS and 2x2-element UE panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub carrier_hz: f64,
    pub scs_hz: f64,
    pub n_rb: usize,
    pub ue_speed_mps: f64,
    pub travel_azimuth_deg: f64,
    /// Target RMS delay spread in seconds (profile-scaled per Table II).
    pub delay_spread_s: f64,
    pub snapshot_time_s: f64,
    pub bs_array: ArrayConfig,
    pub ue_array: ArrayConfig,
}

impl Default for LinkConfig {
    fn default() -> Self {
        LinkConfig {
            carrier_hz: 28e9,
            scs_hz: 60e3,
            n_rb: 13,
            ue_speed_mps: 0.0,
            travel_azimuth_deg: 0.0,
            delay_spread_s: 129e-9,
            snapshot_time_s: 0.0,
            bs_array: ArrayConfig::new(8, 8),
            ue_array: ArrayConfig::new(2, 2),
        }
    }
}

impl LinkConfig {
    pub fn wavelength(&self) -> f64 {
        super::SPEED_OF_LIGHT / self.carrier_hz
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_hz > 0.0) {
            return Err(Error::Domain("carrier_hz must be > 0".into()));
        }
        if self.n_rb < 1 {
            return Err(Error::Domain("n_rb must be >= 1".into()));
        }
        if !(self.delay_spread_s > 0.0) {
            return Err(Error::Domain("delay_spread_s must be > 0".into()));
        }
        if self.ue_speed_mps < 0.0 {
            return Err(Error::Domain("ue_speed_mps must be >= 0".into()));
        }
        self.bs_array.validate()?;
        self.ue_array.validate()
    }
}

/// A single synthesized channel: complex frequency response per RB, with the
/// generating label, seed and link settings attached.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Flat row-major tensor of shape `n_rb x n_r x n_t`.
    pub h: Vec<Complex64>,
    pub n_rb: usize,
    pub n_r: usize,
    pub n_t: usize,
    pub label: u8,
    pub seed: u64,
    pub link: LinkConfig,
}

impl ChannelRealization {
    pub fn entry(&self, rb: usize, r: usize, t: usize) -> Complex64 {
        self.h[(rb * self.n_r + r) * self.n_t + t]
    }

    /// The `n_r x n_t` slice for one resource block.
    pub fn rb_slice(&self, rb: usize) -> &[Complex64] {
        let len = self.n_r * self.n_t;
        &self.h[rb * len..(rb + 1) * len]
    }
}
