//! Training-sample construction from field maps: contrast-stretched
//! grayscale images or sensor lattices around the field extrema, location
//! encodings, pressure flags, Gaussian test-input noise, stratified splits,
//! and the `manifest.json` + `payload.bin` dataset files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::grid::CylindricalGrid;
use crate::growth::FieldMaps;
use crate::insult::{InsultKind, InsultProfile};
use crate::io::{bytes_to_f32, f32_to_bytes, Provenance};
use crate::material::Scenario;
use crate::special::percentile;

/// Contrast-stretched image of one map; width runs over theta, height over
/// z, pixels row-major (z outer) in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrayscaleImage {
    pub width: usize,
    pub height: usize,
    #[serde(skip)]
    pub pixels: Vec<f32>,
}

impl GrayscaleImage {
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }
}

/// Percentile stretch of a map to [0, 1]: `(v - q1) / (q99 - q1)` clamped,
/// with the 1st/99th percentiles of the map itself. A (numerically)
/// constant map becomes all zeros.
pub fn to_grayscale(grid: &CylindricalGrid, values: &[f64]) -> Result<GrayscaleImage> {
    if values.len() != grid.len() {
        return Err(CoreError::format("map length does not match grid"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::numerical(
            "non-finite map value in grayscale conversion",
        ));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q1 = percentile(&sorted, 1.0);
    let q99 = percentile(&sorted, 99.0);
    let span = q99 - q1;
    let pixels: Vec<f32> = if span <= 0.0 {
        vec![0.0; values.len()]
    } else {
        values
            .iter()
            .map(|&v| (((v - q1) / span).clamp(0.0, 1.0)) as f32)
            .collect()
    };
    Ok(GrayscaleImage {
        width: grid.n_theta,
        height: grid.n_z,
        pixels,
    })
}

/// How sensor-lattice center locations are encoded for the branch nets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationEncoding {
    /// `(cos theta, sin theta, z / length)` — periodic in theta.
    Trig,
    /// Scalar planar distance from the origin `(0, 0)` of the unrolled map.
    Scalar,
}

/// Sensor-branch inputs (five branches).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorInputs {
    /// Diastolic dilatation at the lattice nodes, centered at its maximum.
    pub dilatation: Vec<f32>,
    /// Location encoding of the dilatation maximum.
    pub dilatation_loc: Vec<f32>,
    /// Distensibility at the lattice nodes, centered at its minimum.
    pub distensibility: Vec<f32>,
    /// Location encoding of the distensibility minimum.
    pub distensibility_loc: Vec<f32>,
    /// 0 normotensive, 1 hypertensive.
    pub pressure_flag: f32,
}

/// Image-branch inputs (three branches).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageInputs {
    pub dilatation: GrayscaleImage,
    pub distensibility: GrayscaleImage,
    pub pressure_flag: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BranchInputs {
    Sensor(SensorInputs),
    Image(ImageInputs),
}

/// Input layout of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputMode {
    /// `spacing` 1 is the 5x5 adjacent lattice (25 sensors); `spacing` 2 is
    /// the 3x3 lattice of nodes two apart (9 sensors).
    Sensor { spacing: usize },
    Image,
}

impl InputMode {
    pub fn sensor_count(&self) -> Option<usize> {
        match self {
            InputMode::Sensor { spacing: 1 } => Some(25),
            InputMode::Sensor { spacing: 2 } => Some(9),
            InputMode::Sensor { .. } => None,
            InputMode::Image => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            InputMode::Sensor { spacing: 1 } => "sensor25",
            InputMode::Sensor { spacing: 2 } => "sensor9",
            InputMode::Sensor { .. } => "sensor",
            InputMode::Image => "image",
        }
    }
}

/// One training/testing example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub case_id: String,
    pub kind: InsultKind,
    pub scenario: Scenario,
    pub severity_max: f64,
    pub inputs: BranchInputs,
    /// Normalized insult values at the query points.
    #[serde(skip)]
    pub targets: Vec<f32>,
}

/// A full dataset: samples plus the shared query points (all grid nodes,
/// encoded as `(cos theta, sin theta, z / length)`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub grid: CylindricalGrid,
    pub mode: InputMode,
    pub samples: Vec<SampleRecord>,
    /// Row-major `(cos, sin, z_norm)` triples, one per grid node.
    pub query_points: Vec<[f32; 3]>,
    /// Indices into `samples`.
    pub train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    pub seed: u64,
}

impl Dataset {
    pub fn train_samples(&self) -> Vec<&SampleRecord> {
        self.train_ids.iter().map(|&i| &self.samples[i]).collect()
    }

    pub fn test_samples(&self) -> Vec<&SampleRecord> {
        self.test_ids.iter().map(|&i| &self.samples[i]).collect()
    }
}

/// Query-point encoding of every grid node in row-major order.
pub fn grid_query_points(grid: &CylindricalGrid) -> Vec<[f32; 3]> {
    let mut pts = Vec::with_capacity(grid.len());
    for i in 0..grid.n_z {
        let zn = grid.z(i) / grid.length;
        for j in 0..grid.n_theta {
            let t = grid.theta(j);
            pts.push([t.cos() as f32, t.sin() as f32, zn as f32]);
        }
    }
    pts
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

fn encode_location(grid: &CylindricalGrid, node: usize, encoding: LocationEncoding) -> Vec<f32> {
    let (i, j) = grid.coords(node);
    let theta = grid.theta(j);
    let z = grid.z(i);
    match encoding {
        LocationEncoding::Trig => vec![
            theta.cos() as f32,
            theta.sin() as f32,
            (z / grid.length) as f32,
        ],
        LocationEncoding::Scalar => {
            let arc = grid.radius * theta;
            vec![(z * z + arc * arc).sqrt() as f32]
        }
    }
}

/// Lattice values around a center node: theta wraps, z clamps at the ends.
/// Row-major over (dz, dtheta) with offsets `{-2..2}` (spacing 1) or
/// `{-2, 0, 2}` (spacing 2).
fn lattice_values(
    grid: &CylindricalGrid,
    values: &[f64],
    center: usize,
    spacing: usize,
) -> Vec<f32> {
    let (ci, cj) = grid.coords(center);
    let offsets: &[isize] = match spacing {
        1 => &[-2, -1, 0, 1, 2],
        _ => &[-2, 0, 2],
    };
    let mut out = Vec::with_capacity(offsets.len() * offsets.len());
    for &dz in offsets {
        let i = (ci as isize + dz).clamp(0, grid.n_z as isize - 1) as usize;
        for &dt in offsets {
            let j = (cj as isize + dt).rem_euclid(grid.n_theta as isize) as usize;
            out.push(values[grid.index(i, j)] as f32);
        }
    }
    out
}

/// Extract the five sensor-branch inputs from a pair of maps.
pub fn extract_sensors(
    maps: &FieldMaps,
    spacing: usize,
    encoding: LocationEncoding,
) -> Result<SensorInputs> {
    if spacing != 1 && spacing != 2 {
        return Err(CoreError::parameter(format!(
            "sensor spacing must be 1 or 2, got {spacing}"
        )));
    }
    let max_dia = argmax(&maps.dilatation_dia);
    let min_dist = argmin(&maps.distensibility);
    Ok(SensorInputs {
        dilatation: lattice_values(&maps.grid, &maps.dilatation_dia, max_dia, spacing),
        dilatation_loc: encode_location(&maps.grid, max_dia, encoding),
        distensibility: lattice_values(&maps.grid, &maps.distensibility, min_dist, spacing),
        distensibility_loc: encode_location(&maps.grid, min_dist, encoding),
        pressure_flag: maps.scenario.flag() as f32,
    })
}

/// Build the image-branch inputs from a pair of maps.
pub fn extract_images(maps: &FieldMaps) -> Result<ImageInputs> {
    Ok(ImageInputs {
        dilatation: to_grayscale(&maps.grid, &maps.dilatation_dia)?,
        distensibility: to_grayscale(&maps.grid, &maps.distensibility)?,
        pressure_flag: maps.scenario.flag() as f32,
    })
}

/// Assemble one sample from maps and the profile that produced them.
pub fn build_sample(
    maps: &FieldMaps,
    profile: &InsultProfile,
    mode: InputMode,
    encoding: LocationEncoding,
    case_id: String,
) -> Result<SampleRecord> {
    let inputs = match mode {
        InputMode::Sensor { spacing } => {
            BranchInputs::Sensor(extract_sensors(maps, spacing, encoding)?)
        }
        InputMode::Image => BranchInputs::Image(extract_images(maps)?),
    };
    Ok(SampleRecord {
        case_id,
        kind: profile.kind,
        scenario: maps.scenario,
        severity_max: profile.severity_max,
        inputs,
        targets: profile.values.iter().map(|&v| v as f32).collect(),
    })
}

/// Seeded stratified split into train/test index sets.
///
/// The total test count is `round(test_frac * N)`, apportioned across the
/// `(kind, scenario)` strata by largest remainder, so every stratum lands
/// within one sample of its proportional share.
pub fn split(
    samples: &[SampleRecord],
    test_frac: f64,
    rng: &mut impl Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = samples.len();
    if n < 10 {
        return Err(CoreError::parameter(format!(
            "split needs at least 10 samples, got {n}"
        )));
    }
    if !(0.0..1.0).contains(&test_frac) {
        return Err(CoreError::parameter("test_frac must lie in [0, 1)"));
    }
    let total_test = (test_frac * n as f64).round() as usize;

    let mut strata: BTreeMap<(InsultKind, Scenario), Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        strata.entry((s.kind, s.scenario)).or_default().push(i);
    }

    // largest-remainder apportionment of the test quota
    let mut quotas: Vec<(usize, f64, &Vec<usize>)> = strata
        .values()
        .map(|ids| {
            let exact = total_test as f64 * ids.len() as f64 / n as f64;
            (exact.floor() as usize, exact - exact.floor(), ids)
        })
        .collect();
    let assigned: usize = quotas.iter().map(|q| q.0).sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| quotas[b].1.partial_cmp(&quotas[a].1).unwrap());
    for &k in order.iter().take(total_test.saturating_sub(assigned)) {
        quotas[k].0 += 1;
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    for (take, _, ids) in quotas {
        let mut shuffled = ids.clone();
        // Fisher-Yates with the shared rng; stratum order is deterministic
        for i in (1..shuffled.len()).rev() {
            let j = rng.random_range(0..=i);
            shuffled.swap(i, j);
        }
        let take = take.min(shuffled.len());
        test.extend_from_slice(&shuffled[..take]);
        train.extend_from_slice(&shuffled[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Per-channel noise scales of the continuous inputs over a set of samples.
/// Sensor channels are per coordinate; each image type is a single channel
/// pooled over pixels. Pressure flags are excluded.
#[derive(Debug, Clone)]
pub struct NoiseScale {
    pub sensor_channels: Option<[Vec<f64>; 4]>,
    pub image_channels: Option<[f64; 2]>,
}

fn std_of(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Compute per-channel standard deviations of the clean inputs.
pub fn noise_scale(samples: &[SampleRecord]) -> Result<NoiseScale> {
    if samples.is_empty() {
        return Err(CoreError::parameter("noise scale needs at least one sample"));
    }
    match &samples[0].inputs {
        BranchInputs::Sensor(first) => {
            let dims = [
                first.dilatation.len(),
                first.dilatation_loc.len(),
                first.distensibility.len(),
                first.distensibility_loc.len(),
            ];
            let mut channels: [Vec<Vec<f64>>; 4] = std::array::from_fn(|k| {
                vec![Vec::with_capacity(samples.len()); dims[k]]
            });
            for s in samples {
                let BranchInputs::Sensor(si) = &s.inputs else {
                    return Err(CoreError::format("mixed input modes in one dataset"));
                };
                for (k, vec) in [
                    &si.dilatation,
                    &si.dilatation_loc,
                    &si.distensibility,
                    &si.distensibility_loc,
                ]
                .into_iter()
                .enumerate()
                {
                    for (c, &v) in vec.iter().enumerate() {
                        channels[k][c].push(v as f64);
                    }
                }
            }
            Ok(NoiseScale {
                sensor_channels: Some(std::array::from_fn(|k| {
                    channels[k].iter().map(|c| std_of(c)).collect()
                })),
                image_channels: None,
            })
        }
        BranchInputs::Image(_) => {
            let mut dia = Vec::new();
            let mut dist = Vec::new();
            for s in samples {
                let BranchInputs::Image(ii) = &s.inputs else {
                    return Err(CoreError::format("mixed input modes in one dataset"));
                };
                dia.extend(ii.dilatation.pixels.iter().map(|&p| p as f64));
                dist.extend(ii.distensibility.pixels.iter().map(|&p| p as f64));
            }
            Ok(NoiseScale {
                sensor_channels: None,
                image_channels: Some([std_of(&dia), std_of(&dist)]),
            })
        }
    }
}

/// Perturb continuous inputs with zero-mean Gaussians of standard deviation
/// `level * channel_std`. Flags and targets are untouched; image pixels are
/// re-clamped to [0, 1].
pub fn add_noise(
    samples: &[SampleRecord],
    scale: &NoiseScale,
    level: f64,
    rng: &mut impl Rng,
) -> Result<Vec<SampleRecord>> {
    if level < 0.0 {
        return Err(CoreError::parameter("noise level must be non-negative"));
    }
    if level == 0.0 {
        return Ok(samples.to_vec());
    }
    let mut out = Vec::with_capacity(samples.len());
    for s in samples {
        let mut s = s.clone();
        match &mut s.inputs {
            BranchInputs::Sensor(si) => {
                let chans = scale
                    .sensor_channels
                    .as_ref()
                    .ok_or_else(|| CoreError::format("noise scale mode mismatch"))?;
                for (k, vec) in [
                    &mut si.dilatation,
                    &mut si.dilatation_loc,
                    &mut si.distensibility,
                    &mut si.distensibility_loc,
                ]
                .into_iter()
                .enumerate()
                {
                    for (c, v) in vec.iter_mut().enumerate() {
                        let g: f64 = rng.sample(StandardNormal);
                        *v += (level * chans[k][c] * g) as f32;
                    }
                }
            }
            BranchInputs::Image(ii) => {
                let chans = scale
                    .image_channels
                    .as_ref()
                    .ok_or_else(|| CoreError::format("noise scale mode mismatch"))?;
                for (img, sd) in [
                    (&mut ii.dilatation, chans[0]),
                    (&mut ii.distensibility, chans[1]),
                ] {
                    for p in img.pixels.iter_mut() {
                        let g: f64 = rng.sample(StandardNormal);
                        *p = (*p as f64 + level * sd * g).clamp(0.0, 1.0) as f32;
                    }
                }
            }
        }
        out.push(s);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// serialization: manifest.json + payload.bin
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct BlockRef {
    offset: u64,
    /// f32 element count.
    count: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SampleMeta {
    case_id: String,
    kind: InsultKind,
    scenario: Scenario,
    severity_max: f64,
    inputs: BranchInputsMeta,
    targets: BlockRef,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
enum BranchInputsMeta {
    Sensor {
        dilatation: BlockRef,
        dilatation_loc: BlockRef,
        distensibility: BlockRef,
        distensibility_loc: BlockRef,
        pressure_flag: f32,
    },
    Image {
        width: usize,
        height: usize,
        dilatation: BlockRef,
        distensibility: BlockRef,
        pressure_flag: f32,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetManifest {
    version: u32,
    grid: CylindricalGrid,
    mode: InputMode,
    n_samples: usize,
    n_test: usize,
    seed: u64,
    query_points: BlockRef,
    samples: Vec<SampleMeta>,
    train_ids: Vec<usize>,
    test_ids: Vec<usize>,
    payload_len: u64,
    provenance: Option<Provenance>,
}

struct PayloadWriter {
    buf: Vec<u8>,
}

impl PayloadWriter {
    fn new() -> Self {
        PayloadWriter { buf: Vec::new() }
    }

    fn push(&mut self, values: &[f32]) -> BlockRef {
        let offset = self.buf.len() as u64;
        self.buf.extend_from_slice(&f32_to_bytes(values));
        BlockRef {
            offset,
            count: values.len() as u64,
        }
    }
}

fn read_block(payload: &[u8], r: &BlockRef) -> Result<Vec<f32>> {
    let start = r.offset as usize;
    let end = start + r.count as usize * 4;
    if end > payload.len() {
        return Err(CoreError::format(format!(
            "block [{start}, {end}) overruns payload of {} bytes",
            payload.len()
        )));
    }
    bytes_to_f32(&payload[start..end])
}

/// Write a dataset as `manifest.json` + `payload.bin` inside `dir`.
pub fn write_dataset(dir: &Path, dataset: &Dataset, prov: Option<Provenance>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = PayloadWriter::new();
    let flat_query: Vec<f32> = dataset.query_points.iter().flatten().copied().collect();
    let query_ref = w.push(&flat_query);

    let mut metas = Vec::with_capacity(dataset.samples.len());
    for s in &dataset.samples {
        let inputs = match &s.inputs {
            BranchInputs::Sensor(si) => BranchInputsMeta::Sensor {
                dilatation: w.push(&si.dilatation),
                dilatation_loc: w.push(&si.dilatation_loc),
                distensibility: w.push(&si.distensibility),
                distensibility_loc: w.push(&si.distensibility_loc),
                pressure_flag: si.pressure_flag,
            },
            BranchInputs::Image(ii) => BranchInputsMeta::Image {
                width: ii.dilatation.width,
                height: ii.dilatation.height,
                dilatation: w.push(&ii.dilatation.pixels),
                distensibility: w.push(&ii.distensibility.pixels),
                pressure_flag: ii.pressure_flag,
            },
        };
        metas.push(SampleMeta {
            case_id: s.case_id.clone(),
            kind: s.kind,
            scenario: s.scenario,
            severity_max: s.severity_max,
            inputs,
            targets: w.push(&s.targets),
        });
    }

    let manifest = DatasetManifest {
        version: 1,
        grid: dataset.grid.clone(),
        mode: dataset.mode,
        n_samples: dataset.samples.len(),
        n_test: dataset.test_ids.len(),
        seed: dataset.seed,
        query_points: query_ref,
        samples: metas,
        train_ids: dataset.train_ids.clone(),
        test_ids: dataset.test_ids.clone(),
        payload_len: w.buf.len() as u64,
        provenance: prov,
    };

    let mut mf = fs::File::create(dir.join("manifest.json"))?;
    mf.write_all(&serde_json::to_vec_pretty(&manifest)?)?;
    let mut pf = fs::File::create(dir.join("payload.bin"))?;
    pf.write_all(&w.buf)?;
    Ok(())
}

/// Read a dataset back from `dir`, verifying offsets and sizes.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_bytes = fs::read(dir.join("manifest.json"))?;
    let manifest: DatasetManifest = serde_json::from_slice(&manifest_bytes)?;
    let mut payload = Vec::new();
    fs::File::open(dir.join("payload.bin"))?.read_to_end(&mut payload)?;
    if payload.len() as u64 != manifest.payload_len {
        return Err(CoreError::format(format!(
            "payload.bin holds {} bytes, manifest says {}",
            payload.len(),
            manifest.payload_len
        )));
    }

    let flat_query = read_block(&payload, &manifest.query_points)?;
    if flat_query.len() % 3 != 0 {
        return Err(CoreError::format("query point block not a multiple of 3"));
    }
    let query_points: Vec<[f32; 3]> = flat_query
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect();

    let mut samples = Vec::with_capacity(manifest.samples.len());
    for m in &manifest.samples {
        let inputs = match &m.inputs {
            BranchInputsMeta::Sensor {
                dilatation,
                dilatation_loc,
                distensibility,
                distensibility_loc,
                pressure_flag,
            } => BranchInputs::Sensor(SensorInputs {
                dilatation: read_block(&payload, dilatation)?,
                dilatation_loc: read_block(&payload, dilatation_loc)?,
                distensibility: read_block(&payload, distensibility)?,
                distensibility_loc: read_block(&payload, distensibility_loc)?,
                pressure_flag: *pressure_flag,
            }),
            BranchInputsMeta::Image {
                width,
                height,
                dilatation,
                distensibility,
                pressure_flag,
            } => {
                let dia = read_block(&payload, dilatation)?;
                let dist = read_block(&payload, distensibility)?;
                if dia.len() != width * height || dist.len() != width * height {
                    return Err(CoreError::format("image block size mismatch"));
                }
                BranchInputs::Image(ImageInputs {
                    dilatation: GrayscaleImage {
                        width: *width,
                        height: *height,
                        pixels: dia,
                    },
                    distensibility: GrayscaleImage {
                        width: *width,
                        height: *height,
                        pixels: dist,
                    },
                    pressure_flag: *pressure_flag,
                })
            }
        };
        samples.push(SampleRecord {
            case_id: m.case_id.clone(),
            kind: m.kind,
            scenario: m.scenario,
            severity_max: m.severity_max,
            inputs,
            targets: read_block(&payload, &m.targets)?,
        });
    }

    Ok(Dataset {
        grid: manifest.grid,
        mode: manifest.mode,
        samples,
        query_points,
        train_ids: manifest.train_ids,
        test_ids: manifest.test_ids,
        seed: manifest.seed,
    })
}

/// Export an image as binary PGM (P5, maxval 255), quantizing by half-up
/// rounding.
pub fn write_pgm(path: &Path, image: &GrayscaleImage) -> Result<()> {
    let mut f = fs::File::create(path)?;
    write!(f, "P5\n{} {}\n255\n", image.width, image.height)?;
    let bytes: Vec<u8> = image
        .pixels
        .iter()
        .map(|&p| ((p as f64 * 255.0 + 0.5).floor().clamp(0.0, 255.0)) as u8)
        .collect();
    f.write_all(&bytes)?;
    Ok(())
}

/// Read back a PGM written by [`write_pgm`] (quantized values over 255).
pub fn read_pgm(path: &Path) -> Result<GrayscaleImage> {
    let bytes = fs::read(path)?;
    let header_end = bytes
        .windows(4)
        .position(|w| w == b"255\n")
        .ok_or_else(|| CoreError::format("PGM missing maxval"))?
        + 4;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| CoreError::format("PGM header not UTF-8"))?;
    let mut lines = header.lines();
    if lines.next() != Some("P5") {
        return Err(CoreError::format("not a P5 PGM"));
    }
    let dims = lines
        .next()
        .ok_or_else(|| CoreError::format("PGM missing dimensions"))?;
    let mut parts = dims.split_whitespace();
    let width: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CoreError::format("bad PGM width"))?;
    let height: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CoreError::format("bad PGM height"))?;
    let data = &bytes[header_end..];
    if data.len() != width * height {
        return Err(CoreError::format("PGM payload size mismatch"));
    }
    Ok(GrayscaleImage {
        width,
        height,
        pixels: data.iter().map(|&b| b as f32 / 255.0).collect(),
    })
}
