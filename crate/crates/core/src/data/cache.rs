use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{io_err, Channel, DataError, Dataset, RawObject};
use crate::filtration::{
    cubical_filtration, degree_filtration, height_transform, shortest_path_metric,
    uniform_directions, vietoris_rips, FilteredComplex, DEFAULT_THRESHOLD,
};
use crate::persistence::{read_jsonl, reduce, write_jsonl, DiagramHeader, PersistenceDiagram};

pub const CACHE_FORMAT: &str = "diagram-cache/1";

/// One filtration of a run config. Height filtrations expand into one channel
/// per direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FiltrationSpec {
    /// Vietoris–Rips on the shortest-path metric.
    Rips {
        #[serde(default = "default_max_dim")]
        max_dim: usize,
        /// Cells above this value are dropped; unbounded when absent.
        #[serde(default)]
        max_scale: Option<f64>,
    },
    Degree,
    Cubical,
    Height {
        directions: usize,
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
}

fn default_max_dim() -> usize {
    2
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

impl FiltrationSpec {
    pub fn channel_names(&self) -> Vec<String> {
        match self {
            Self::Rips { .. } => vec!["rips".into()],
            Self::Degree => vec!["degree".into()],
            Self::Cubical => vec!["cubical".into()],
            Self::Height { directions, .. } => {
                (0..*directions).map(|i| format!("height-{i}")).collect()
            }
        }
    }

    fn input_kind(&self) -> &'static str {
        match self {
            Self::Rips { .. } | Self::Degree => "graph",
            Self::Cubical | Self::Height { .. } => "image",
        }
    }

    fn complexes(&self, obj: &RawObject) -> Option<Vec<FilteredComplex>> {
        let out = match (self, obj) {
            (Self::Rips { max_dim, max_scale }, RawObject::Graph(g)) => vec![vietoris_rips(
                &shortest_path_metric(g),
                *max_dim,
                max_scale.unwrap_or(f64::INFINITY),
            )
            .ok()?],
            (Self::Degree, RawObject::Graph(g)) => vec![degree_filtration(g)],
            (Self::Cubical, RawObject::Image(img)) => vec![cubical_filtration(img)],
            (
                Self::Height {
                    directions,
                    threshold,
                },
                RawObject::Image(img),
            ) => uniform_directions(*directions)
                .into_iter()
                .map(|dir| height_transform(img, dir, *threshold).map(|h| cubical_filtration(&h)))
                .collect::<Result<_, _>>()
                .ok()?,
            _ => return None,
        };
        Some(out)
    }
}

/// Dataset-level summary of the computed diagrams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagramStats {
    /// Largest finite filtration value over every complex.
    pub max_filtration_value: f64,
    /// Smallest and largest finite persistence; `(0, 0)` without finite points.
    pub persistence_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheIndex {
    pub format: String,
    pub config_hash: String,
    pub filtrations: Vec<FiltrationSpec>,
    pub channels: Vec<String>,
    pub samples: usize,
    pub header: DiagramHeader,
    pub stats: DiagramStats,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    /// Diagrams were loaded from the cache.
    Hit,
    /// Diagrams were computed (and written when a cache dir was given).
    Computed,
}

/// SHA-256 of the raw objects (graph structure and weights, pixel values).
pub fn dataset_fingerprint(ds: &Dataset) -> String {
    let mut h = Sha256::new();
    for obj in &ds.objects {
        match obj {
            RawObject::Graph(g) => {
                h.update(b"g");
                h.update((g.n_vertices() as u64).to_le_bytes());
                h.update((g.edges().len() as u64).to_le_bytes());
                for e in g.edges() {
                    h.update((e.u as u64).to_le_bytes());
                    h.update((e.v as u64).to_le_bytes());
                    h.update(e.weight.to_bits().to_le_bytes());
                }
            }
            RawObject::Image(img) => {
                h.update(b"i");
                h.update((img.width() as u64).to_le_bytes());
                h.update((img.height() as u64).to_le_bytes());
                for v in img.values() {
                    h.update(v.to_bits().to_le_bytes());
                }
            }
        }
    }
    hex(&h.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn config_hash(ds: &Dataset, specs: &[FiltrationSpec]) -> String {
    let key = serde_json::json!({
        "format": CACHE_FORMAT,
        "filtrations": specs,
        "data": dataset_fingerprint(ds),
    });
    hex(&Sha256::digest(key.to_string().as_bytes()))
}

struct SampleDiagrams {
    diagrams: Vec<PersistenceDiagram>,
    max_value: f64,
}

fn compute_sample(
    ds: &Dataset,
    specs: &[FiltrationSpec],
    index: usize,
) -> Result<SampleDiagrams, DataError> {
    let obj = &ds.objects[index];
    let mut diagrams = Vec::new();
    let mut max_value = f64::NEG_INFINITY;
    for spec in specs {
        let wrong_kind = || DataError::WrongKind {
            index,
            id: ds.ids[index].clone(),
            filtration: spec.channel_names().first().cloned().unwrap_or_default(),
            expected: spec.input_kind(),
            found: obj.kind(),
        };
        if spec.input_kind() != obj.kind() {
            return Err(wrong_kind());
        }
        for fc in spec.complexes(obj).ok_or_else(wrong_kind)? {
            if let Some(v) = fc.max_value() {
                max_value = max_value.max(v);
            }
            let d = reduce(&fc).map_err(|source| DataError::Sample {
                index,
                id: ds.ids[index].clone(),
                source,
            })?;
            diagrams.push(d);
        }
    }
    Ok(SampleDiagrams {
        diagrams,
        max_value,
    })
}

fn stats_of(channels: &[Channel], max_value: f64) -> DiagramStats {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in channels
        .iter()
        .flat_map(|c| &c.diagrams)
        .flat_map(|d| d.points())
        .filter(|p| !p.is_essential())
    {
        lo = lo.min(p.persistence());
        hi = hi.max(p.persistence());
    }
    DiagramStats {
        max_filtration_value: if max_value.is_finite() {
            max_value
        } else {
            0.0
        },
        persistence_range: if lo <= hi { (lo, hi) } else { (0.0, 0.0) },
    }
}

fn sample_path(dir: &Path, channel: &str, index: usize) -> PathBuf {
    dir.join(channel).join(format!("{index:06}.jsonl"))
}

fn load_cache(dir: &Path, hash: &str, n: usize) -> Option<(Vec<Channel>, DiagramStats)> {
    let text = fs::read_to_string(dir.join("index.json")).ok()?;
    let index: CacheIndex = serde_json::from_str(&text).ok()?;
    if index.format != CACHE_FORMAT || index.config_hash != hash || index.samples != n {
        return None;
    }
    let mut channels = Vec::new();
    for name in &index.channels {
        let mut diagrams = Vec::with_capacity(n);
        for i in 0..n {
            let f = fs::File::open(sample_path(dir, name, i)).ok()?;
            diagrams.push(read_jsonl(BufReader::new(f)).ok()?);
        }
        channels.push(Channel {
            name: name.clone(),
            diagrams,
        });
    }
    Some((channels, index.stats))
}

fn write_cache(dir: &Path, index: &CacheIndex, channels: &[Channel]) -> Result<(), DataError> {
    // Written under a temporary name and renamed, so an interrupted run never
    // leaves a directory that looks complete.
    let parent = dir.parent().expect("cache entry has a parent");
    fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    let tmp = parent.join(format!(".{}.tmp", index.config_hash));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| io_err(&tmp, e))?;
    }
    for c in channels {
        let cdir = tmp.join(&c.name);
        fs::create_dir_all(&cdir).map_err(|e| io_err(&cdir, e))?;
        for (i, d) in c.diagrams.iter().enumerate() {
            let path = sample_path(&tmp, &c.name, i);
            let f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
            let mut w = BufWriter::new(f);
            write_jsonl(&mut w, d).map_err(|e| io_err(&path, e))?;
            w.flush().map_err(|e| io_err(&path, e))?;
        }
    }
    let ipath = tmp.join("index.json");
    let text = serde_json::to_string_pretty(index).map_err(|e| DataError::Cache(e.to_string()))?;
    fs::write(&ipath, text).map_err(|e| io_err(&ipath, e))?;
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::rename(&tmp, dir).map_err(|e| io_err(dir, e))
}

/// Computes the diagrams of every sample under every filtration, in
/// parallel across samples, and stores them on `ds`.
///
/// With a cache directory, results live in `<cache>/<hash>/` where the hash
/// covers the filtration configs and the raw data; a matching entry is
/// loaded instead of recomputed.
pub fn precompute_diagrams(
    ds: &mut Dataset,
    specs: &[FiltrationSpec],
    cache: Option<&Path>,
) -> Result<CacheStatus, DataError> {
    let names: Vec<String> = specs
        .iter()
        .flat_map(FiltrationSpec::channel_names)
        .collect();
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(DataError::Config(format!("duplicate channel {n:?}")));
        }
    }
    if names.is_empty() {
        return Err(DataError::Config("no filtrations configured".into()));
    }
    let hash = config_hash(ds, specs);
    let entry = cache.map(|c| c.join(&hash));
    if let Some(dir) = &entry {
        if let Some((channels, stats)) = load_cache(dir, &hash, ds.len()) {
            ds.channels = channels;
            ds.stats = Some(stats);
            return Ok(CacheStatus::Hit);
        }
    }

    let results: Vec<Result<SampleDiagrams, DataError>> = (0..ds.len())
        .into_par_iter()
        .map(|i| compute_sample(ds, specs, i))
        .collect();
    let mut channels: Vec<Channel> = names
        .iter()
        .map(|n| Channel {
            name: n.clone(),
            diagrams: Vec::with_capacity(ds.len()),
        })
        .collect();
    let mut max_value = f64::NEG_INFINITY;
    for r in results {
        let s = r?;
        max_value = max_value.max(s.max_value);
        for (c, d) in channels.iter_mut().zip(s.diagrams) {
            c.diagrams.push(d);
        }
    }
    let stats = stats_of(&channels, max_value);
    if let Some(dir) = &entry {
        let index = CacheIndex {
            format: CACHE_FORMAT.into(),
            config_hash: hash.clone(),
            filtrations: specs.to_vec(),
            channels: names,
            samples: ds.len(),
            header: DiagramHeader::new(stats.max_filtration_value),
            stats: stats.clone(),
        };
        write_cache(dir, &index, &channels)?;
    }
    ds.channels = channels;
    ds.stats = Some(stats);
    Ok(CacheStatus::Computed)
}
