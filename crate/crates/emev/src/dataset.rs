//! Dataset pipeline: channel synthesis → optional AWGN → eigen features,
//! stratified splitting, and bit-exact binary serialization.
//!
//! A generation run produces two parallel datasets from the same channel
//! draws — raw CSI tensors and EMEV features — plus a JSON manifest that is
//! sufficient to regenerate both byte-for-byte.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read as _, Write as _};
use std::path::Path;

use crate::channel::{
    generate_channel, load_profile, load_profile_from_dir, CdlProfileSpec, ChannelRealization,
    LinkConfig, ProfileId,
};
use crate::eigen::extract_emev;
use crate::nn::{FeatureSet, SampleInput};
use crate::seeding::sample_seed;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"EMDS";
const FORMAT_VERSION: u16 = 1;

/// UE speed choices, km/h.
pub const SPEEDS_KMH: [f64; 4] = [4.8, 24.0, 40.0, 60.0];

/// Per-profile target RMS delay spread in seconds.
pub fn delay_spread_for(profile: ProfileId) -> f64 {
    match profile {
        ProfileId::A => 129e-9,
        ProfileId::B | ProfileId::C => 634e-9,
        ProfileId::D | ProfileId::E => 65e-9,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Csi,
    Emev,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csi" => Ok(Mode::Csi),
            "emev" => Ok(Mode::Emev),
            other => Err(Error::Domain(format!("unknown mode {other:?} (expected csi|emev)"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Csi => "csi",
            Mode::Emev => "emev",
        }
    }
}

/// Per-sample payload. CSI holds the normalized channel tensor (flat
/// `n_rb x n_r x n_t`); EMEV holds the stacked eigenmatrices (flat
/// `n_rb x n_r x n_r`) and singular-value rows (flat `n_rb x n_r`).
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Csi(Vec<Complex64>),
    Emev { u: Vec<Complex64>, s: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Features,
    pub label: u8,
    pub sample_seed: u64,
    /// `None` means a clean sample; only clean samples are serialized.
    pub snr_db: Option<f64>,
}

/// A homogeneous, in-memory dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub mode: Mode,
    pub n_rb: usize,
    pub n_r: usize,
    pub n_t: usize,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Everything needed to regenerate a dataset bit-for-bit, plus the split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u16,
    pub master_seed: u64,
    pub per_class: usize,
    pub class_labels: Vec<String>,
    pub speeds_kmh: Vec<f64>,
    /// Base link configuration; per-sample speed, snapshot time and delay
    /// spread are derived during generation.
    pub link: LinkConfig,
    pub split: SplitAssignment,
}

impl DatasetManifest {
    pub fn total_samples(&self) -> usize {
        self.per_class * self.class_labels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported manifest version {}",
                self.format_version
            )));
        }
        if self.per_class == 0 {
            return Err(Error::Manifest("per_class must be >= 1".into()));
        }
        let total = self.total_samples();
        let mut seen = vec![false; total];
        for &i in self.split.train.iter().chain(&self.split.val).chain(&self.split.test) {
            if i >= total {
                return Err(Error::Manifest(format!("split index {i} out of range {total}")));
            }
            if seen[i] {
                return Err(Error::Manifest(format!("split index {i} assigned twice")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::Manifest("split does not cover all samples".into()));
        }
        Ok(())
    }
}

/// Mean of |entry|^2 over the whole tensor.
pub fn measure_power(h: &[Complex64]) -> Result<f64> {
    if h.is_empty() {
        return Err(Error::Domain("measure_power: empty tensor".into()));
    }
    Ok(h.iter().map(|x| x.norm_sqr()).sum::<f64>() / h.len() as f64)
}

/// Adds circularly-symmetric complex Gaussian noise at the requested SNR:
/// noise power P_n = P_H * 10^(-snr/10), split evenly between the real and
/// imaginary components. `snr_db = +inf` returns the input unchanged.
pub fn add_awgn(h: &[Complex64], snr_db: f64, seed: u64) -> Result<Vec<Complex64>> {
    if snr_db.is_nan() {
        return Err(Error::Domain("snr_db must not be NaN".into()));
    }
    if snr_db.is_infinite() && snr_db > 0.0 {
        return Ok(h.to_vec());
    }
    let p_h = measure_power(h)?;
    if p_h <= 0.0 {
        return Err(Error::Domain("add_awgn: zero-power input".into()));
    }
    let p_n = p_h * 10f64.powf(-snr_db / 10.0);
    let sigma = (p_n / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(h.iter()
        .map(|&x| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            x + Complex64::new(sigma * re, sigma * im)
        })
        .collect())
}

/// 65:15:20-style stratified split over per-sample labels. Counts per class
/// follow largest-remainder rounding; order within each split is a seeded
/// shuffle of each class block.
pub fn stratified_split(labels: &[u8], ratios: [u32; 3], seed: u64) -> Result<SplitAssignment> {
    if ratios.iter().sum::<u32>() != 100 {
        return Err(Error::Domain(format!("split ratios {ratios:?} must sum to 100")));
    }
    if labels.is_empty() {
        return Err(Error::Domain("stratified_split: no samples".into()));
    }
    let mut by_class: std::collections::BTreeMap<u8, Vec<usize>> = Default::default();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut split = SplitAssignment { train: Vec::new(), val: Vec::new(), test: Vec::new() };
    for (label, mut indices) in by_class {
        let n = indices.len();
        // Largest-remainder apportionment of n over the three ratios; ties
        // go to the earlier split (train before val before test).
        let mut counts = [0usize; 3];
        let mut rema: Vec<(usize, f64)> = Vec::new();
        let mut assigned = 0;
        for (k, &r) in ratios.iter().enumerate() {
            let exact = n as f64 * r as f64 / 100.0;
            counts[k] = exact.floor() as usize;
            assigned += counts[k];
            rema.push((k, exact - exact.floor()));
        }
        rema.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for (k, _) in rema.into_iter().take(n - assigned) {
            counts[k] += 1;
        }
        if counts.iter().any(|&c| c == 0) {
            return Err(Error::Domain(format!(
                "class {label} has {n} samples, too few for a three-way split"
            )));
        }
        use rand::seq::SliceRandom;
        indices.shuffle(&mut rng);
        let (a, rest) = indices.split_at(counts[0]);
        let (b, c) = rest.split_at(counts[1]);
        split.train.extend_from_slice(a);
        split.val.extend_from_slice(b);
        split.test.extend_from_slice(c);
    }
    Ok(split)
}

/// Environment variable naming a directory of `cdl_<x>.txt` files that
/// overrides the built-in profile tables.
pub const CDL_DIR_ENV: &str = "EMEV_CDL_DIR";

fn load_profiles() -> Result<Vec<CdlProfileSpec>> {
    match std::env::var_os(CDL_DIR_ENV) {
        Some(dir) => {
            let dir = std::path::PathBuf::from(dir);
            ProfileId::ALL.iter().map(|&p| load_profile_from_dir(&dir, p)).collect()
        }
        None => ProfileId::ALL.iter().map(|&p| load_profile(p)).collect(),
    }
}

fn normalize_unit_power(h: &mut [Complex64]) -> Result<()> {
    let p = measure_power(h)?;
    if p <= 0.0 {
        return Err(Error::Domain("cannot normalize zero-power tensor".into()));
    }
    let scale = 1.0 / p.sqrt();
    for x in h.iter_mut() {
        *x *= scale;
    }
    Ok(())
}

/// Synthesizes the CSI and EMEV datasets prescribed by a manifest. Samples
/// are ordered class-blocked (all label 0, then label 1, ...); sample `i`
/// derives all of its randomness from `sample_seed(master_seed, i)`.
pub fn synthesize(manifest: &DatasetManifest) -> Result<(Dataset, Dataset)> {
    manifest.validate()?;
    let profiles = load_profiles()?;
    let per_class = manifest.per_class;
    let total = manifest.total_samples();

    let results: Vec<(Sample, Sample)> = (0..total)
        .into_par_iter()
        .map(|i| -> Result<(Sample, Sample)> {
            let class = i / per_class;
            let profile = &profiles[class];
            let seed = sample_seed(manifest.master_seed, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let speed_kmh = manifest.speeds_kmh[rng.gen_range(0..manifest.speeds_kmh.len())];
            let snapshot_time_s = rng.gen_range(0.0..1e-3);
            let channel_seed: u64 = rng.gen();

            let mut link = manifest.link.clone();
            link.ue_speed_mps = speed_kmh / 3.6;
            link.snapshot_time_s = snapshot_time_s;
            link.delay_spread_s = delay_spread_for(profile.profile_id);

            let mut ch = generate_channel(profile, &link, channel_seed)?;
            normalize_unit_power(&mut ch.h)?;
            let feats = extract_emev(&ch)?;
            let csi = Sample {
                features: Features::Csi(ch.h),
                label: class as u8,
                sample_seed: seed,
                snr_db: None,
            };
            let emev = Sample {
                features: Features::Emev { u: feats.u_stack, s: feats.s_stack },
                label: class as u8,
                sample_seed: seed,
                snr_db: None,
            };
            Ok((csi, emev))
        })
        .collect::<Result<_>>()?;

    let (n_rb, n_r, n_t) =
        (manifest.link.n_rb, manifest.link.ue_array.elements(), manifest.link.bs_array.elements());
    let mut csi = Dataset { mode: Mode::Csi, n_rb, n_r, n_t, samples: Vec::with_capacity(total) };
    let mut emev = Dataset { mode: Mode::Emev, n_rb, n_r, n_t, samples: Vec::with_capacity(total) };
    for (c, e) in results {
        csi.samples.push(c);
        emev.samples.push(e);
    }
    Ok((csi, emev))
}

/// Builds a manifest (including the stratified split), synthesizes both
/// datasets, and writes `dataset_csi.bin`, `dataset_emev.bin` and
/// `manifest.json` under `out_dir`.
pub fn generate_dataset(
    per_class: usize,
    link: &LinkConfig,
    master_seed: u64,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    if per_class == 0 {
        return Err(Error::Domain("per_class must be >= 1".into()));
    }
    link.validate()?;
    let labels: Vec<u8> = (0..5u8).flat_map(|l| std::iter::repeat(l).take(per_class)).collect();
    let split = stratified_split(&labels, [65, 15, 20], master_seed)?;
    let manifest = DatasetManifest {
        format_version: FORMAT_VERSION,
        master_seed,
        per_class,
        class_labels: ProfileId::ALL.iter().map(|p| p.to_string()).collect(),
        speeds_kmh: SPEEDS_KMH.to_vec(),
        link: link.clone(),
        split,
    };
    let (csi, emev) = synthesize(&manifest)?;
    std::fs::create_dir_all(out_dir)?;
    serialize(&csi, &out_dir.join("dataset_csi.bin"))?;
    serialize(&emev, &out_dir.join("dataset_emev.bin"))?;
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Manifest(format!("serialize manifest: {e}")))?;
    write_atomic(&out_dir.join("manifest.json"), json.as_bytes())?;
    Ok(manifest)
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path)?;
    parse_manifest(&text)
}

/// Parses and validates manifest JSON. Split out so it can be fuzzed.
pub fn parse_manifest(text: &str) -> Result<DatasetManifest> {
    let manifest: DatasetManifest =
        serde_json::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
    manifest.validate()?;
    manifest.link.validate().map_err(|e| Error::Manifest(format!("link config: {e}")))?;
    if manifest.speeds_kmh.is_empty() || manifest.speeds_kmh.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Manifest("speeds must be positive and non-empty".into()));
    }
    if manifest.class_labels.len() != 5 {
        return Err(Error::Manifest("expected 5 class labels".into()));
    }
    Ok(manifest)
}

fn per_sample_floats(mode: Mode, n_rb: usize, n_r: usize, n_t: usize) -> usize {
    match mode {
        Mode::Csi => n_rb * n_r * n_t * 2,
        Mode::Emev => n_rb * n_r * n_r * 2 + n_rb * n_r,
    }
}

fn push_f32(buf: &mut Vec<u8>, x: f64) {
    buf.extend_from_slice(&(x as f32).to_le_bytes());
}

/// Writes a dataset as: magic, u16 version, u8 mode, three u32 dims, u64
/// sample count, then per sample the feature floats (f32 LE, real/imag
/// interleaved for complex), the label byte, and the u64 sample seed.
/// Noisy samples are an in-memory construct and are rejected here.
pub fn serialize(data: &Dataset, path: &Path) -> Result<()> {
    let floats = per_sample_floats(data.mode, data.n_rb, data.n_r, data.n_t);
    let mut buf = Vec::with_capacity(19 + data.samples.len() * (floats * 4 + 9));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(match data.mode {
        Mode::Csi => 0,
        Mode::Emev => 1,
    });
    for dim in [data.n_rb, data.n_r, data.n_t] {
        let dim = u32::try_from(dim).map_err(|_| Error::Format("dimension exceeds u32".into()))?;
        buf.extend_from_slice(&dim.to_le_bytes());
    }
    buf.extend_from_slice(&(data.samples.len() as u64).to_le_bytes());
    for sample in &data.samples {
        if sample.snr_db.is_some() {
            return Err(Error::Format("refusing to serialize noisy samples".into()));
        }
        if sample.label > 4 {
            return Err(Error::Format(format!("label {} out of range", sample.label)));
        }
        let start = buf.len();
        match (&sample.features, data.mode) {
            (Features::Csi(h), Mode::Csi) => {
                for z in h {
                    push_f32(&mut buf, z.re);
                    push_f32(&mut buf, z.im);
                }
            }
            (Features::Emev { u, s }, Mode::Emev) => {
                for z in u {
                    push_f32(&mut buf, z.re);
                    push_f32(&mut buf, z.im);
                }
                for &x in s {
                    push_f32(&mut buf, x);
                }
            }
            _ => return Err(Error::Format("sample mode does not match dataset mode".into())),
        }
        if buf.len() - start != floats * 4 {
            return Err(Error::Shape(format!(
                "sample has {} floats, dims require {floats}",
                (buf.len() - start) / 4
            )));
        }
        buf.push(sample.label);
        buf.extend_from_slice(&sample.sample_seed.to_le_bytes());
    }
    write_atomic(path, &buf)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut file = std::fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn deserialize(path: &Path) -> Result<Dataset> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_dataset(&bytes)
}

/// Parses a dataset from raw bytes. Split out so it can be fuzzed.
pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    struct Cursor<'a>(&'a [u8]);
    impl<'a> Cursor<'a> {
        fn take(&mut self, n: usize) -> Result<&'a [u8]> {
            if self.0.len() < n {
                return Err(Error::Format("dataset file truncated".into()));
            }
            let (head, tail) = self.0.split_at(n);
            self.0 = tail;
            Ok(head)
        }
        fn dim(&mut self) -> Result<usize> {
            Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
        }
    }
    let mut cur = Cursor(bytes);
    if cur.take(4)? != MAGIC {
        return Err(Error::Format("bad dataset magic".into()));
    }
    let version = u16::from_le_bytes(cur.take(2)?.try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    let mode = match cur.take(1)?[0] {
        0 => Mode::Csi,
        1 => Mode::Emev,
        other => return Err(Error::Format(format!("unknown mode tag {other}"))),
    };
    let (n_rb, n_r, n_t) = (cur.dim()?, cur.dim()?, cur.dim()?);
    if n_rb == 0 || n_r == 0 || n_t == 0 || n_rb > 4096 || n_r > 1024 || n_t > 4096 {
        return Err(Error::Format("dataset dimensions out of range".into()));
    }
    let count = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
    let floats = per_sample_floats(mode, n_rb, n_r, n_t);
    let sample_bytes = floats * 4 + 9;
    if count as usize > cur.0.len() / sample_bytes.max(1) + 1 {
        return Err(Error::Format("declared sample count exceeds file size".into()));
    }
    let mut samples = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let mut payload = cur.take(floats * 4)?;
        let mut next = || {
            let (head, tail) = payload.split_at(4);
            payload = tail;
            f32::from_le_bytes(head.try_into().unwrap()) as f64
        };
        let features = match mode {
            Mode::Csi => {
                let h = (0..n_rb * n_r * n_t)
                    .map(|_| Complex64::new(next(), next()))
                    .collect::<Vec<_>>();
                Features::Csi(h)
            }
            Mode::Emev => {
                let u = (0..n_rb * n_r * n_r)
                    .map(|_| Complex64::new(next(), next()))
                    .collect::<Vec<_>>();
                let s = (0..n_rb * n_r).map(|_| next()).collect::<Vec<_>>();
                Features::Emev { u, s }
            }
        };
        let label = cur.take(1)?[0];
        if label > 4 {
            return Err(Error::Format(format!("label {label} out of range")));
        }
        let seed = u64::from_le_bytes(cur.take(8)?.try_into().unwrap());
        samples.push(Sample { features, label, sample_seed: seed, snr_db: None });
    }
    if !cur.0.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after last sample", cur.0.len())));
    }
    Ok(Dataset { mode, n_rb, n_r, n_t, samples })
}

/// Derives a noisy dataset from clean CSI tensors for robustness testing:
/// AWGN at `snr_db`, re-normalization to unit mean power, then either the
/// noisy H itself (csi target) or freshly extracted eigen features (emev
/// target). Noise seeds derive from each sample's seed and the SNR, so the
/// result is deterministic and differs across grid points.
pub fn apply_awgn_dataset(clean_csi: &Dataset, snr_db: f64, target: Mode) -> Result<Dataset> {
    if clean_csi.mode != Mode::Csi {
        return Err(Error::Domain("noise injection needs the raw CSI dataset".into()));
    }
    let (n_rb, n_r, n_t) = (clean_csi.n_rb, clean_csi.n_r, clean_csi.n_t);
    let samples: Vec<Sample> = clean_csi
        .samples
        .par_iter()
        .map(|sample| -> Result<Sample> {
            let Features::Csi(h) = &sample.features else {
                return Err(Error::Domain("csi dataset holds non-CSI sample".into()));
            };
            let noise_seed = sample_seed(sample.sample_seed, snr_db.to_bits());
            let mut noisy = add_awgn(h, snr_db, noise_seed)?;
            normalize_unit_power(&mut noisy)?;
            let features = match target {
                Mode::Csi => Features::Csi(noisy),
                Mode::Emev => {
                    let ch = ChannelRealization {
                        h: noisy,
                        n_rb,
                        n_r,
                        n_t,
                        label: sample.label,
                        seed: sample.sample_seed,
                        link: LinkConfig::default(),
                    };
                    let feats = extract_emev(&ch)?;
                    Features::Emev { u: feats.u_stack, s: feats.s_stack }
                }
            };
            Ok(Sample {
                features,
                label: sample.label,
                sample_seed: sample.sample_seed,
                snr_db: Some(snr_db),
            })
        })
        .collect::<Result<_>>()?;
    Ok(Dataset { mode: target, n_rb, n_r, n_t, samples })
}

/// Converts one sample to network input: channels-last real/imag planes for
/// the complex tensor, plus the singular-value plane for EMEV.
pub fn sample_input(sample: &Sample) -> SampleInput<f32> {
    match &sample.features {
        Features::Csi(h) => {
            let mut primary = Vec::with_capacity(h.len() * 2);
            for z in h {
                primary.push(z.re as f32);
                primary.push(z.im as f32);
            }
            SampleInput { primary, secondary: None }
        }
        Features::Emev { u, s } => {
            let mut primary = Vec::with_capacity(u.len() * 2);
            for z in u {
                primary.push(z.re as f32);
                primary.push(z.im as f32);
            }
            let secondary = s.iter().map(|&x| x as f32).collect();
            SampleInput { primary, secondary: Some(secondary) }
        }
    }
}

/// Materializes the subset of a dataset selected by `indices` as network
/// inputs, in the given index order.
pub fn feature_set(data: &Dataset, indices: &[usize]) -> Result<FeatureSet<f32>> {
    let mut set = FeatureSet::default();
    for &i in indices {
        let sample = data
            .samples
            .get(i)
            .ok_or_else(|| Error::Domain(format!("sample index {i} out of range")))?;
        set.inputs.push(sample_input(sample));
        set.labels.push(sample.label);
    }
    Ok(set)
}
