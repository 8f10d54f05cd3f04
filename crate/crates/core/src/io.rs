//! Binary artifact container: a length-prefixed JSON header followed by raw
//! little-endian float blocks. Insult profiles, field maps and model
//! checkpoints all share this framing; datasets use a standalone
//! `manifest.json` + `payload.bin` pair built from the same block helpers.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::grid::CylindricalGrid;
use crate::growth::FieldMaps;
use crate::insult::InsultProfile;
use crate::material::Scenario;

const MAGIC: &[u8; 4] = b"TAA1";

/// FNV-1a hash of a byte string, used for compact provenance fingerprints.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Provenance stamp carried by every artifact header.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Provenance {
    pub stage: String,
    pub seed: u64,
    pub config_hash: String,
}

impl Provenance {
    pub fn new(stage: &str, seed: u64, config: &impl Serialize) -> Self {
        let canonical = serde_json::to_vec(config).expect("config serializes");
        Provenance {
            stage: stage.to_string(),
            seed,
            config_hash: format!("{:016x}", fnv1a(&canonical)),
        }
    }
}

pub fn f32_to_bytes(values: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn f64_to_bytes(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 8);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn bytes_to_f32(bytes: &[u8]) -> Result<Vec<f32>> {
    if bytes.len() % 4 != 0 {
        return Err(CoreError::format("f32 block length not a multiple of 4"));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub fn bytes_to_f64(bytes: &[u8]) -> Result<Vec<f64>> {
    if bytes.len() % 8 != 0 {
        return Err(CoreError::format("f64 block length not a multiple of 8"));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
        .collect())
}

/// Write `magic | u32 header_len | header JSON | payload`.
pub fn write_framed<H: Serialize>(path: &Path, header: &H, payload: &[u8]) -> Result<()> {
    let header_bytes = serde_json::to_vec(header)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    w.write_all(payload)?;
    w.flush()?;
    Ok(())
}

/// Read back a framed artifact, returning the typed header and raw payload.
pub fn read_framed<H: DeserializeOwned>(path: &Path) -> Result<(H, Vec<u8>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| CoreError::format(format!("{}: truncated magic", path.display())))?;
    if &magic != MAGIC {
        return Err(CoreError::format(format!(
            "{}: bad magic {magic:?}",
            path.display()
        )));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)
        .map_err(|_| CoreError::format(format!("{}: truncated header length", path.display())))?;
    let header_len = u32::from_le_bytes(len) as usize;
    let mut header_bytes = vec![0u8; header_len];
    r.read_exact(&mut header_bytes)
        .map_err(|_| CoreError::format(format!("{}: truncated header", path.display())))?;
    let header: H = serde_json::from_slice(&header_bytes)?;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    Ok((header, payload))
}

#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct ProfileHeader {
    grid: CylindricalGrid,
    kind: crate::insult::InsultKind,
    severity_max: f64,
    params: crate::insult::InsultParams,
    seed: Option<u64>,
    provenance: Option<Provenance>,
}

/// Write an insult profile: header + one f32 block, row-major (z outer).
pub fn write_profile(path: &Path, profile: &InsultProfile, prov: Option<Provenance>) -> Result<()> {
    let header = ProfileHeader {
        grid: profile.grid.clone(),
        kind: profile.kind,
        severity_max: profile.severity_max,
        params: profile.params.clone(),
        seed: profile.seed,
        provenance: prov,
    };
    let quantized: Vec<f32> = profile.values.iter().map(|&v| v as f32).collect();
    write_framed(path, &header, &f32_to_bytes(&quantized))
}

pub fn read_profile(path: &Path) -> Result<InsultProfile> {
    let (header, payload): (ProfileHeader, Vec<u8>) = read_framed(path)?;
    let values: Vec<f64> = bytes_to_f32(&payload)?
        .into_iter()
        .map(|v| v as f64)
        .collect();
    if values.len() != header.grid.len() {
        return Err(CoreError::format(format!(
            "{}: payload holds {} values for a {}-node grid",
            path.display(),
            values.len(),
            header.grid.len()
        )));
    }
    let profile = InsultProfile {
        grid: header.grid,
        values,
        kind: header.kind,
        severity_max: header.severity_max,
        params: header.params,
        seed: header.seed,
    };
    profile.validate()?;
    Ok(profile)
}

#[derive(Debug, serde::Serialize, serde::Deserialize)]
struct MapsHeader {
    grid: CylindricalGrid,
    scenario: Scenario,
    source: String,
    provenance: Option<Provenance>,
}

/// Write field maps: header + three f32 blocks (diastolic dilatation,
/// systolic dilatation, distensibility), each row-major.
pub fn write_maps(path: &Path, maps: &FieldMaps, prov: Option<Provenance>) -> Result<()> {
    let header = MapsHeader {
        grid: maps.grid.clone(),
        scenario: maps.scenario,
        source: maps.source.clone(),
        provenance: prov,
    };
    let mut payload = Vec::with_capacity(maps.grid.len() * 12);
    for block in [&maps.dilatation_dia, &maps.dilatation_sys, &maps.distensibility] {
        let q: Vec<f32> = block.iter().map(|&v| v as f32).collect();
        payload.extend_from_slice(&f32_to_bytes(&q));
    }
    write_framed(path, &header, &payload)
}

pub fn read_maps(path: &Path) -> Result<FieldMaps> {
    let (header, payload): (MapsHeader, Vec<u8>) = read_framed(path)?;
    let n = header.grid.len();
    if payload.len() != n * 12 {
        return Err(CoreError::format(format!(
            "{}: expected {} payload bytes, found {}",
            path.display(),
            n * 12,
            payload.len()
        )));
    }
    let all = bytes_to_f32(&payload)?;
    let to_f64 = |s: &[f32]| s.iter().map(|&v| v as f64).collect::<Vec<f64>>();
    let maps = FieldMaps {
        grid: header.grid,
        dilatation_dia: to_f64(&all[..n]),
        dilatation_sys: to_f64(&all[n..2 * n]),
        distensibility: to_f64(&all[2 * n..]),
        scenario: header.scenario,
        source: header.source,
    };
    maps.validate()?;
    Ok(maps)
}
