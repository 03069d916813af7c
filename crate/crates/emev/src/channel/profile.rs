//! CDL profile table loading.
//!
//! Profiles ship as structured text files (one per profile, transcribed from
//! the 3GPP cluster tables; the source table is named in each file header).
//! The loader sorts clusters by delay and rescales the normalized delays so
//! their power-weighted RMS is exactly 1; the generator then multiplies by
//! the link's target delay spread.

use std::path::Path;

use super::types::{AngleSpreadDeg, CdlProfileSpec, ClusterParam, ProfileId};
use crate::{Error, Result};

const CDL_A: &str = include_str!("../../data/cdl_a.txt");
const CDL_B: &str = include_str!("../../data/cdl_b.txt");
const CDL_C: &str = include_str!("../../data/cdl_c.txt");
const CDL_D: &str = include_str!("../../data/cdl_d.txt");
const CDL_E: &str = include_str!("../../data/cdl_e.txt");

/// Loads the built-in table for a profile.
pub fn load_profile(profile_id: ProfileId) -> Result<CdlProfileSpec> {
    let text = match profile_id {
        ProfileId::A => CDL_A,
        ProfileId::B => CDL_B,
        ProfileId::C => CDL_C,
        ProfileId::D => CDL_D,
        ProfileId::E => CDL_E,
    };
    let spec = parse_profile(text, &format!("<builtin cdl_{}>", profile_id.to_string().to_lowercase()))?;
    if spec.profile_id != profile_id {
        return Err(Error::ProfileLoad {
            path: "<builtin>".into(),
            reason: format!("expected profile {profile_id}, file declares {}", spec.profile_id),
        });
    }
    Ok(spec)
}

/// Loads `cdl_<x>.txt` from an override directory instead of the built-in
/// tables.
pub fn load_profile_from_dir(dir: &Path, profile_id: ProfileId) -> Result<CdlProfileSpec> {
    let path = dir.join(format!("cdl_{}.txt", profile_id.to_string().to_lowercase()));
    let text = std::fs::read_to_string(&path).map_err(|e| Error::ProfileLoad {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let spec = parse_profile(&text, &path.display().to_string())?;
    if spec.profile_id != profile_id {
        return Err(Error::ProfileLoad {
            path: path.display().to_string(),
            reason: format!("expected profile {profile_id}, file declares {}", spec.profile_id),
        });
    }
    Ok(spec)
}

fn load_err(path: &str, reason: impl Into<String>) -> Error {
    Error::ProfileLoad { path: path.to_string(), reason: reason.into() }
}

/// Parses a profile table from text. `path_hint` only labels error messages.
pub fn parse_profile(text: &str, path_hint: &str) -> Result<CdlProfileSpec> {
    let mut profile_id: Option<ProfileId> = None;
    let mut is_los: Option<bool> = None;
    let mut k_factor_db: Option<f64> = None;
    let mut rays_per_cluster: Option<usize> = None;
    let mut angle_spread: Option<AngleSpreadDeg> = None;
    let mut clusters: Vec<ClusterParam> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let starts_numeric = fields[0]
            .chars()
            .next()
            .map(|c| c.is_ascii_digit() || c == '-' || c == '+' || c == '.')
            .unwrap_or(false);
        if starts_numeric {
            if fields.len() != 6 && fields.len() != 7 {
                return Err(load_err(
                    path_hint,
                    format!("line {}: expected 6 numeric fields (+ optional `los`)", lineno + 1),
                ));
            }
            let mut nums = [0f64; 6];
            for (i, f) in fields[..6].iter().enumerate() {
                nums[i] = f.parse::<f64>().map_err(|_| {
                    load_err(path_hint, format!("line {}: bad number {f:?}", lineno + 1))
                })?;
                if !nums[i].is_finite() {
                    return Err(load_err(path_hint, format!("line {}: non-finite value", lineno + 1)));
                }
            }
            let is_los_ray = match fields.get(6) {
                None => false,
                Some(&"los") => true,
                Some(other) => {
                    return Err(load_err(
                        path_hint,
                        format!("line {}: unexpected trailing field {other:?}", lineno + 1),
                    ))
                }
            };
            clusters.push(ClusterParam {
                delay_normalized: nums[0],
                power_db: nums[1],
                aod_deg: nums[2],
                aoa_deg: nums[3],
                zod_deg: nums[4],
                zoa_deg: nums[5],
                is_los_ray,
            });
        } else {
            let key = fields[0];
            let rest = &fields[1..];
            let one = |what: &str| -> Result<&str> {
                rest.first().copied().ok_or_else(|| {
                    load_err(path_hint, format!("line {}: {what} needs a value", lineno + 1))
                })
            };
            match key {
                "profile" => profile_id = Some(ProfileId::parse(one("profile")?)?),
                "is_los" => {
                    is_los = Some(match one("is_los")? {
                        "true" => true,
                        "false" => false,
                        other => {
                            return Err(load_err(
                                path_hint,
                                format!("line {}: is_los must be true/false, got {other:?}", lineno + 1),
                            ))
                        }
                    })
                }
                "k_factor_db" => {
                    let v: f64 = one("k_factor_db")?
                        .parse()
                        .map_err(|_| load_err(path_hint, format!("line {}: bad k_factor_db", lineno + 1)))?;
                    if !v.is_finite() {
                        return Err(load_err(path_hint, format!("line {}: non-finite k_factor_db", lineno + 1)));
                    }
                    k_factor_db = Some(v);
                }
                "rays_per_cluster" => {
                    rays_per_cluster = Some(one("rays_per_cluster")?.parse().map_err(|_| {
                        load_err(path_hint, format!("line {}: bad rays_per_cluster", lineno + 1))
                    })?)
                }
                "angle_spread_deg" => {
                    if rest.len() != 4 {
                        return Err(load_err(
                            path_hint,
                            format!("line {}: angle_spread_deg needs 4 values", lineno + 1),
                        ));
                    }
                    let mut vals = [0f64; 4];
                    for (i, f) in rest.iter().enumerate() {
                        vals[i] = f.parse().map_err(|_| {
                            load_err(path_hint, format!("line {}: bad angle spread {f:?}", lineno + 1))
                        })?;
                        if !vals[i].is_finite() || vals[i] < 0.0 {
                            return Err(load_err(
                                path_hint,
                                format!("line {}: angle spreads must be finite and >= 0", lineno + 1),
                            ));
                        }
                    }
                    angle_spread = Some(AngleSpreadDeg { asd: vals[0], asa: vals[1], zsd: vals[2], zsa: vals[3] });
                }
                other => {
                    return Err(load_err(path_hint, format!("line {}: unknown key {other:?}", lineno + 1)))
                }
            }
        }
    }

    let profile_id = profile_id.ok_or_else(|| load_err(path_hint, "missing `profile` header"))?;
    let is_los = is_los.ok_or_else(|| load_err(path_hint, "missing `is_los` header"))?;
    let rays_per_cluster = rays_per_cluster.ok_or_else(|| load_err(path_hint, "missing `rays_per_cluster` header"))?;
    let angle_spread = angle_spread.ok_or_else(|| load_err(path_hint, "missing `angle_spread_deg` header"))?;

    // Stable sort by delay; rescale so the power-weighted RMS delay is 1.
    clusters.sort_by(|a, b| a.delay_normalized.total_cmp(&b.delay_normalized));
    let rms = {
        let lin: Vec<f64> = clusters.iter().map(|c| 10f64.powf(c.power_db / 10.0)).collect();
        let total: f64 = lin.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(load_err(path_hint, "cluster powers do not sum to a positive finite value"));
        }
        let mean: f64 = clusters
            .iter()
            .zip(&lin)
            .map(|(c, p)| p / total * c.delay_normalized)
            .sum();
        let second: f64 = clusters
            .iter()
            .zip(&lin)
            .map(|(c, p)| p / total * c.delay_normalized * c.delay_normalized)
            .sum();
        (second - mean * mean).max(0.0).sqrt()
    };
    if rms.is_finite() && rms > 0.0 {
        for c in &mut clusters {
            c.delay_normalized /= rms;
        }
    }

    let spec = CdlProfileSpec {
        profile_id,
        is_los,
        k_factor_db,
        clusters,
        rays_per_cluster,
        angle_spread_deg: angle_spread,
    };
    spec.validate()
        .map_err(|e| load_err(path_hint, e.to_string()))?;
    Ok(spec)
}
