//! Instance datasets: generation and a small self-describing on-disk format.
//!
//! A dataset directory holds `manifest.json` plus one binary record per
//! instance. Each record is
//!
//! ```text
//! b"DLHIMREC" | u32 LE header length | JSON header | k, f, [u*] as f64 LE
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::direct::direct_solve;
use super::grf::{make_coefficient, GrfConfig, GrfSampler};
use super::grid::{FieldSample, Grid1D};
use super::mix_seed;
use super::system::{assemble, LinearSystem, ProblemKind};
use crate::par::{map_indexed, Parallelism};
use crate::{Error, Result};

pub const DATASET_FORMAT_VERSION: &str = "dlhim-dataset/1";
const RECORD_MAGIC: &[u8; 8] = b"DLHIMREC";
const RECORD_FORMAT: &str = "dlhim-record/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub kind: ProblemKind,
    pub n_interior: usize,
    pub coefficient: GrfConfig,
    pub source: GrfConfig,
    pub count: usize,
    pub master_seed: u64,
    pub with_reference: bool,
}

impl DatasetSpec {
    pub fn new(kind: ProblemKind, n_interior: usize, count: usize, master_seed: u64) -> Self {
        let coefficient = match kind {
            ProblemKind::Diffusion => GrfConfig::diffusion_coefficient(),
            ProblemKind::Helmholtz => GrfConfig::helmholtz_wavenumber(),
        };
        Self {
            kind,
            n_interior,
            coefficient,
            source: GrfConfig::source(),
            count,
            master_seed,
            with_reference: true,
        }
    }
}

/// One PDE instance: coefficient field, source, assembled system and
/// (optionally) the reference solution.
#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub k: FieldSample,
    pub system: LinearSystem,
    pub u_star: Option<Vec<f64>>,
}

impl Instance {
    pub fn from_fields(
        kind: ProblemKind,
        seed: u64,
        k: FieldSample,
        f: Vec<f64>,
        with_reference: bool,
    ) -> Result<Self> {
        let system = assemble(kind, &k, f)?;
        let u_star = if with_reference {
            Some(direct_solve(&system)?)
        } else {
            None
        };
        Ok(Self {
            seed,
            k,
            system,
            u_star,
        })
    }

    pub fn grid(&self) -> Grid1D {
        self.system.grid
    }

    pub fn f(&self) -> &[f64] {
        &self.system.rhs
    }

    pub fn kind(&self) -> ProblemKind {
        self.system.kind
    }
}

/// Generate `spec.count` instances; instance `i` depends only on
/// `(spec, i)`, so output is identical in sequential and parallel mode.
pub fn generate_instances(spec: &DatasetSpec, mode: Parallelism) -> Result<Vec<Instance>> {
    let grid = Grid1D::new(spec.n_interior)?;
    let k_sampler = GrfSampler::new(&spec.coefficient, grid)?;
    let f_sampler = GrfSampler::interior(&spec.source, grid)?;
    map_indexed(spec.count, mode, |i| {
        let seed = mix_seed(spec.master_seed, i as u64);
        instance_from_seed(spec, &k_sampler, &f_sampler, seed)
    })
    .into_iter()
    .collect()
}

fn instance_from_seed(
    spec: &DatasetSpec,
    k_sampler: &GrfSampler,
    f_sampler: &GrfSampler,
    seed: u64,
) -> Result<Instance> {
    let raw = k_sampler.sample(mix_seed(seed, 1));
    let k = make_coefficient(&raw, spec.coefficient.mean_shift, spec.coefficient.clip_min);
    let f = f_sampler.sample(mix_seed(seed, 2)).values;
    Instance::from_fields(spec.kind, seed, k, f, spec.with_reference)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: String,
    pub spec: DatasetSpec,
    pub records: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordHeader {
    format: String,
    kind: ProblemKind,
    n_interior: usize,
    seed: u64,
    coefficient: GrfConfig,
    source: GrfConfig,
    k_len: usize,
    f_len: usize,
    u_star_len: usize,
}

pub fn save_dataset(dir: &Path, spec: &DatasetSpec, instances: &[Instance]) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut records = Vec::with_capacity(instances.len());
    for (i, inst) in instances.iter().enumerate() {
        let file = format!("rec_{i:05}.bin");
        write_record(&dir.join(&file), spec, inst)?;
        records.push(ManifestEntry {
            file,
            seed: inst.seed,
        });
    }
    let manifest = Manifest {
        format_version: DATASET_FORMAT_VERSION.to_string(),
        spec: spec.clone(),
        records,
    };
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn write_record(path: &Path, spec: &DatasetSpec, inst: &Instance) -> Result<()> {
    let u_len = inst.u_star.as_ref().map_or(0, Vec::len);
    let header = RecordHeader {
        format: RECORD_FORMAT.to_string(),
        kind: inst.kind(),
        n_interior: inst.grid().n_interior(),
        seed: inst.seed,
        coefficient: spec.coefficient,
        source: spec.source,
        k_len: inst.k.values.len(),
        f_len: inst.f().len(),
        u_star_len: u_len,
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut buf = Vec::with_capacity(12 + header.len() + 8 * (header.len() + inst.f().len() * 3));
    buf.extend_from_slice(RECORD_MAGIC);
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    let payload = inst
        .k
        .values
        .iter()
        .chain(inst.f())
        .chain(inst.u_star.iter().flatten());
    for v in payload {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

fn read_record(path: &Path) -> Result<Instance> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[..8] != RECORD_MAGIC {
        return Err(Error::format(path, "missing record magic"));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = bytes
        .get(12..12 + hlen)
        .ok_or_else(|| Error::format(path, "truncated header"))?;
    let header: RecordHeader = serde_json::from_slice(body)
        .map_err(|e| Error::format(path, format!("bad header: {e}")))?;
    if header.format != RECORD_FORMAT {
        return Err(Error::format(
            path,
            format!("unsupported record format {}", header.format),
        ));
    }
    let payload = &bytes[12 + hlen..];
    let total = header.k_len + header.f_len + header.u_star_len;
    if payload.len() != 8 * total {
        return Err(Error::format(
            path,
            format!(
                "payload has {} bytes, expected {}",
                payload.len(),
                8 * total
            ),
        ));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let k: Vec<f64> = values.by_ref().take(header.k_len).collect();
    let f: Vec<f64> = values.by_ref().take(header.f_len).collect();
    let u: Vec<f64> = values.collect();
    let grid = Grid1D::new(header.n_interior)?;
    let k = FieldSample::new(grid, k)?;
    let system = assemble(header.kind, &k, f)?;
    Ok(Instance {
        seed: header.seed,
        k,
        system,
        u_star: (header.u_star_len > 0).then_some(u),
    })
}

pub fn load_dataset(dir: &Path) -> Result<(Manifest, Vec<Instance>)> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::format(&path, format!("bad manifest: {e}")))?;
    if manifest.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::format(
            &path,
            format!("unsupported dataset version {}", manifest.format_version),
        ));
    }
    let instances = manifest
        .records
        .iter()
        .map(|r| read_record(&PathBuf::from(dir).join(&r.file)))
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, instances))
}
