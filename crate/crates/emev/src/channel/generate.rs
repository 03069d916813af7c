use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::types::{ArrayConfig, CdlProfileSpec, ChannelRealization, LinkConfig};
use crate::{Error, Result};

/// Ray offset pattern: 20 deterministic offsets, symmetric about 0, in units
/// of the per-cluster angle spread (3GPP TR 38.901 Table 7.5-3 ordering).
const RAY_OFFSETS: [f64; 20] = [
    0.0447, -0.0447, 0.1413, -0.1413, 0.2492, -0.2492, 0.3715, -0.3715, 0.5129, -0.5129, 0.6797,
    -0.6797, 0.8844, -0.8844, 1.1481, -1.1481, 1.5195, -1.5195, 2.1551, -2.1551,
];

fn ray_offset(m: usize) -> f64 {
    RAY_OFFSETS[m % RAY_OFFSETS.len()]
}

/// Array response for a plane wave from direction `(azimuth, zenith)`.
///
/// Elements sit on a row/column grid in the local y-z plane (boresight +x);
/// the array orientation shifts the incoming direction into that local frame.
/// Every entry has unit magnitude.
pub fn steering_vector(
    array: &ArrayConfig,
    azimuth_rad: f64,
    zenith_rad: f64,
    wavelength_m: f64,
) -> Result<Vec<Complex64>> {
    array.validate()?;
    if !(wavelength_m > 0.0) {
        return Err(Error::Domain("wavelength must be > 0".into()));
    }
    let az = azimuth_rad - array.orientation_az_rad;
    let zen = zenith_rad - (array.orientation_zen_rad - std::f64::consts::FRAC_PI_2);
    // Unit direction in the local frame.
    let uy = zen.sin() * az.sin();
    let uz = zen.cos();
    let d = array.element_spacing * wavelength_m;
    let k = 2.0 * std::f64::consts::PI / wavelength_m;
    let mut v = Vec::with_capacity(array.elements());
    for row in 0..array.rows {
        for col in 0..array.cols {
            // Rows progress along z, columns along y.
            let phase = k * d * (col as f64 * uy + row as f64 * uz);
            v.push(Complex64::from_polar(1.0, phase));
        }
    }
    Ok(v)
}

/// One resolvable tap of a realized channel: absolute delay plus the power
/// of the cluster's composite gain summed over all antenna pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub delay_s: f64,
    pub power: f64,
}

struct RayField {
    /// Per-cluster composite gain matrices G_n (n_r x n_t, row-major) at the
    /// snapshot time, and the cluster's absolute delay.
    taps: Vec<(f64, Vec<Complex64>)>,
    n_r: usize,
    n_t: usize,
}

/// Sums ray contributions per cluster. The per-RB frequency response is then
/// a delay-phased combination of these cluster gain matrices.
fn realize_rays(profile: &CdlProfileSpec, link: &LinkConfig, seed: u64) -> Result<RayField> {
    profile.validate()?;
    link.validate()?;

    let lambda = link.wavelength();
    let n_r = link.ue_array.elements();
    let n_t = link.bs_array.elements();
    let m_rays = profile.rays_per_cluster;
    let powers = profile.normalized_linear_powers();
    let spread = profile.angle_spread_deg;
    let travel_az = link.travel_azimuth_deg.to_radians();
    let t = link.snapshot_time_s;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut taps = Vec::with_capacity(profile.clusters.len());
    for (cluster, &p_n) in profile.clusters.iter().zip(&powers) {
        let mut gain = vec![Complex64::new(0.0, 0.0); n_r * n_t];
        let rays = if cluster.is_los_ray { 1 } else { m_rays };
        let amp = if cluster.is_los_ray {
            p_n.sqrt()
        } else {
            (p_n / m_rays as f64).sqrt()
        };
        for m in 0..rays {
            let (aod, aoa, zod, zoa, phase) = if cluster.is_los_ray {
                // Deterministic specular component: no fanning, zero initial
                // phase.
                (cluster.aod_deg, cluster.aoa_deg, cluster.zod_deg, cluster.zoa_deg, 0.0)
            } else {
                let off = ray_offset(m);
                (
                    cluster.aod_deg + spread.asd * off,
                    cluster.aoa_deg + spread.asa * off,
                    cluster.zod_deg + spread.zsd * off,
                    cluster.zoa_deg + spread.zsa * off,
                    rng.gen_range(0.0..std::f64::consts::TAU),
                )
            };
            let aoa_rad = aoa.to_radians();
            let zoa_rad = zoa.to_radians();
            let doppler_hz = link.ue_speed_mps / lambda * (aoa_rad - travel_az).cos() * zoa_rad.sin();
            let coeff = Complex64::from_polar(amp, phase + std::f64::consts::TAU * doppler_hz * t);
            let a_rx = steering_vector(&link.ue_array, aoa_rad, zoa_rad, lambda)?;
            let a_tx = steering_vector(&link.bs_array, aod.to_radians(), zod.to_radians(), lambda)?;
            for (r, &ar) in a_rx.iter().enumerate() {
                let row = &mut gain[r * n_t..(r + 1) * n_t];
                let c = coeff * ar;
                for (g, &at) in row.iter_mut().zip(&a_tx) {
                    *g += c * at;
                }
            }
        }
        taps.push((cluster.delay_normalized * link.delay_spread_s, gain));
    }
    Ok(RayField { taps, n_r, n_t })
}

/// Synthesizes one channel realization: per-RB frequency response of shape
/// `n_rb x n_r x n_t`, deterministic in `(profile, link, seed)`.
pub fn generate_channel(
    profile: &CdlProfileSpec,
    link: &LinkConfig,
    seed: u64,
) -> Result<ChannelRealization> {
    let field = realize_rays(profile, link, seed)?;
    let (n_r, n_t) = (field.n_r, field.n_t);
    let n_rb = link.n_rb;
    let per_rb = n_r * n_t;
    let mut h = vec![Complex64::new(0.0, 0.0); n_rb * per_rb];
    let center = (n_rb as f64 - 1.0) / 2.0;
    for rb in 0..n_rb {
        // RB center-subcarrier frequency offset from the carrier.
        let f_rb = (rb as f64 - center) * 12.0 * link.scs_hz;
        let out = &mut h[rb * per_rb..(rb + 1) * per_rb];
        for (delay, gain) in &field.taps {
            let rot = Complex64::from_polar(1.0, -std::f64::consts::TAU * f_rb * delay);
            for (o, &g) in out.iter_mut().zip(gain) {
                *o += rot * g;
            }
        }
    }
    Ok(ChannelRealization {
        h,
        n_rb,
        n_r,
        n_t,
        label: profile.profile_id.label(),
        seed,
        link: link.clone(),
    })
}

/// Realized power-delay profile of one channel draw, for delay-spread
/// validation. Power is the squared Frobenius norm of each cluster's
/// composite gain matrix, normalized per antenna pair.
pub fn generate_taps(profile: &CdlProfileSpec, link: &LinkConfig, seed: u64) -> Result<Vec<Tap>> {
    let field = realize_rays(profile, link, seed)?;
    let pairs = (field.n_r * field.n_t) as f64;
    Ok(field
        .taps
        .iter()
        .map(|(delay, gain)| Tap {
            delay_s: *delay,
            power: gain.iter().map(|g| g.norm_sqr()).sum::<f64>() / pairs,
        })
        .collect())
}

/// Power-weighted RMS width of a power-delay profile.
pub fn rms_of_taps(taps: &[Tap]) -> f64 {
    let total: f64 = taps.iter().map(|t| t.power).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mean: f64 = taps.iter().map(|t| t.power / total * t.delay_s).sum();
    let second: f64 = taps.iter().map(|t| t.power / total * t.delay_s * t.delay_s).sum();
    (second - mean * mean).max(0.0).sqrt()
}

/// Analytic RMS delay spread of a profile's cluster table after scaling the
/// normalized delays by `delay_spread_s`.
pub fn rms_delay_spread(profile: &CdlProfileSpec, delay_spread_s: f64) -> f64 {
    let powers = profile.normalized_linear_powers();
    let taps: Vec<Tap> = profile
        .clusters
        .iter()
        .zip(&powers)
        .map(|(c, &p)| Tap { delay_s: c.delay_normalized * delay_spread_s, power: p })
        .collect();
    rms_of_taps(&taps)
}
