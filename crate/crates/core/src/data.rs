//! Dataset construction: synthetic low-rank generators, feature-file
//! ingestion, mask sampling, and the on-disk dataset layout.
//!
//! A dataset directory holds `graph.txt` (edge list over dense node indices),
//! `manifest.json`, `tensors/NNNN.gtt`, and optionally `masks/NNNN.txt`.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    induced_subgraph, load_edge_list, spectral_transform, Graph, GraphTransform, TransformKind,
};
use crate::solvers::ObservationMask;
use crate::tensor::{inverse_transform, GraphTensor};

/// Splitmix64-style seed derivation so that per-tensor and per-trial seeds
/// are reproducible and independent of evaluation order.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e3779b97f4a7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }
    mix(mix(mix(base) ^ tag) ^ index)
}

const TAG_GRAPH: u64 = 1;
const TAG_TENSOR: u64 = 2;

/// Where the dataset's graph topology comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum GraphSource {
    ErdosRenyi { p: f64 },
    File { path: PathBuf },
}

impl FromStr for GraphSource {
    type Err = Error;

    /// Parses `er:<p>` or `file:<path>`.
    fn from_str(s: &str) -> Result<Self> {
        if let Some(p) = s.strip_prefix("er:") {
            let p: f64 = p
                .parse()
                .map_err(|_| Error::Validation(format!("invalid edge probability `{p}`")))?;
            Ok(GraphSource::ErdosRenyi { p })
        } else if let Some(path) = s.strip_prefix("file:") {
            Ok(GraphSource::File { path: path.into() })
        } else {
            Err(Error::Validation(format!(
                "graph spec must be `er:<p>` or `file:<path>`, got `{s}`"
            )))
        }
    }
}

/// Erdős–Rényi graph: each pair is an edge with probability `p`, unit weight.
pub fn erdos_renyi(n3: usize, p: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Validation(format!(
            "edge probability must be in [0, 1], got {p}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n3 {
        for j in (i + 1)..n3 {
            if rng.random::<f64>() < p {
                edges.push((i, j, 1.0));
            }
        }
    }
    Graph::from_edges(n3, &edges)
}

/// Uniformly samples `ceil(rho * n3)` missing nodes without replacement;
/// the rest are observed. Deterministic per seed.
pub fn sample_mask(n3: usize, missing_rate: f64, seed: u64) -> Result<ObservationMask> {
    if !(0.0..1.0).contains(&missing_rate) {
        return Err(Error::Validation(format!(
            "missing rate must be in [0, 1), got {missing_rate}"
        )));
    }
    let missing_count = (missing_rate * n3 as f64).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ids: Vec<usize> = (0..n3).collect();
    ids.shuffle(&mut rng);
    let observed = ids[missing_count..].to_vec();
    ObservationMask::from_observed(n3, observed)
}

/// How a dataset's ground-truth tensors were produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Synthetic {
        rank: usize,
        graph: GraphSource,
    },
    FacebookFeatures {
        edge_file: PathBuf,
        feature_file: PathBuf,
        id_lo: u64,
        id_hi: u64,
    },
}

/// Disjoint train/test index lists covering all tensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// `manifest.json` contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub count: usize,
    pub seed: u64,
    pub transform: TransformKind,
    pub provenance: Provenance,
    pub split: Split,
    pub graph_connected: bool,
}

/// Complete ground-truth tensors plus the graph and transform they live on.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub tensors: Vec<GraphTensor>,
    pub graph: Graph,
    pub transform: GraphTransform,
    pub manifest: Manifest,
    /// Per-tensor masks, when the dataset ships them.
    pub masks: Option<Vec<ObservationMask>>,
    pub warnings: Vec<String>,
}

impl Dataset {
    pub fn train_tensors(&self) -> Vec<&GraphTensor> {
        self.manifest.split.train.iter().map(|&i| &self.tensors[i]).collect()
    }

    pub fn test_tensors(&self) -> Vec<&GraphTensor> {
        self.manifest.split.test.iter().map(|&i| &self.tensors[i]).collect()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.manifest.n1, self.manifest.n2, self.manifest.n3)
    }
}

fn make_split(count: usize, test_count: usize) -> Result<Split> {
    if test_count > count {
        return Err(Error::Validation(format!(
            "test count {test_count} exceeds tensor count {count}"
        )));
    }
    Ok(Split {
        train: (0..count - test_count).collect(),
        test: (count - test_count..count).collect(),
    })
}

fn resolve_graph(source: &GraphSource, n3: usize, seed: u64) -> Result<Graph> {
    match source {
        GraphSource::ErdosRenyi { p } => erdos_renyi(n3, *p, derive_seed(seed, TAG_GRAPH, 0)),
        GraphSource::File { path } => {
            let (g, _) = load_edge_list(std::io::BufReader::new(std::fs::File::open(path)?))?;
            if g.node_count() != n3 {
                return Err(Error::Validation(format!(
                    "graph file has {} nodes but the dataset needs {n3}",
                    g.node_count()
                )));
            }
            Ok(g)
        }
    }
}

/// Builds a synthetic dataset whose ground truths are exactly rank-`rank`
/// per spectral slice: slice k is sampled as `A_k B_k^T` with standard
/// normal factors, then moved to the time domain.
#[allow(clippy::too_many_arguments)]
pub fn build_synthetic_dataset(
    source: &GraphSource,
    n1: usize,
    n2: usize,
    n3: usize,
    rank: usize,
    count: usize,
    test_count: usize,
    seed: u64,
) -> Result<Dataset> {
    if rank > n1.min(n2) {
        return Err(Error::Validation(format!(
            "rank {rank} exceeds min(n1, n2) = {}",
            n1.min(n2)
        )));
    }
    if count == 0 {
        return Err(Error::Validation("dataset needs at least one tensor".into()));
    }
    let split = make_split(count, test_count)?;
    let graph = resolve_graph(source, n3, seed)?;
    let mut warnings = Vec::new();
    let connected = graph.is_connected();
    if !connected {
        warnings.push("graph is disconnected; the transform is still valid".into());
    }
    let transform = spectral_transform(&graph, TransformKind::Laplacian)?;

    let mut tensors = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_TENSOR, i as u64));
        let mut spec = GraphTensor::zeros(n1, n2, n3)?;
        if rank > 0 {
            let mut normal = |_: usize, _: usize| -> f64 { StandardNormal.sample(&mut rng) };
            for k in 0..n3 {
                let a = DMatrix::from_fn(n1, rank, &mut normal);
                let b = DMatrix::from_fn(n2, rank, &mut normal);
                spec.set_slice_matrix(k, &(a * b.transpose()));
            }
        }
        tensors.push(inverse_transform(&spec, &transform)?);
    }

    let manifest = Manifest {
        n1,
        n2,
        n3,
        count,
        seed,
        transform: TransformKind::Laplacian,
        provenance: Provenance::Synthetic {
            rank,
            graph: source.clone(),
        },
        split,
        graph_connected: connected,
    };
    Ok(Dataset {
        tensors,
        graph,
        transform,
        manifest,
        masks: None,
        warnings,
    })
}

/// Configuration of the feature-file ingestion pipeline.
#[derive(Debug, Clone)]
pub struct FeatureDatasetConfig {
    /// Window of original node ids carrying the topology.
    pub id_lo: u64,
    pub id_hi: u64,
    /// Feature matrices are `n1 x n2`; only feature vectors of exactly
    /// `n1 * n2` entries are eligible.
    pub n1: usize,
    pub n2: usize,
    pub count: usize,
    pub test_count: usize,
    pub seed: u64,
}

impl Default for FeatureDatasetConfig {
    fn default() -> Self {
        Self {
            id_lo: 896,
            id_hi: 995,
            n1: 24,
            n2: 24,
            count: 932,
            test_count: 32,
            seed: 0,
        }
    }
}

/// Parses a feature file: one `node_id v1 v2 ... vk` row per line, `#`
/// comments ignored. Returns the rows whose vector length is exactly
/// `expected_len`.
fn parse_feature_file<R: BufRead>(r: R, expected_len: usize) -> Result<Vec<Vec<f64>>> {
    let mut pool = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let _id = fields.next().ok_or(Error::Parse {
            line: lineno,
            msg: "empty feature row".into(),
        })?;
        let mut values = Vec::new();
        for tok in fields {
            let v: f64 = tok.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid feature value `{tok}`"),
            })?;
            values.push(v);
        }
        if values.len() == expected_len {
            pool.push(values);
        }
    }
    Ok(pool)
}

/// Builds the feature-matrix dataset: the topology is the subgraph induced
/// by original ids `[id_lo, id_hi]`; each tensor assigns `n3` eligible
/// feature vectors (reshaped row-major to `n1 x n2`) to the nodes as
/// spectral-domain slices and applies the inverse transform to obtain the
/// time-domain ground truth.
pub fn build_feature_dataset(
    edge_path: &Path,
    feature_path: &Path,
    cfg: &FeatureDatasetConfig,
) -> Result<Dataset> {
    if cfg.id_hi < cfg.id_lo {
        return Err(Error::Validation(format!(
            "id window inverted: {}..{}",
            cfg.id_lo, cfg.id_hi
        )));
    }
    let split = make_split(cfg.count, cfg.test_count)?;

    let (full, stats) =
        load_edge_list(std::io::BufReader::new(std::fs::File::open(edge_path)?))?;
    let window: Vec<usize> = (cfg.id_lo..=cfg.id_hi)
        .filter_map(|id| stats.dense_index(id))
        .collect();
    let expected_nodes = (cfg.id_hi - cfg.id_lo + 1) as usize;
    if window.len() != expected_nodes {
        return Err(Error::Data(format!(
            "id window {}..{} has {} nodes in the edge file, expected {expected_nodes}",
            cfg.id_lo,
            cfg.id_hi,
            window.len()
        )));
    }
    let graph = induced_subgraph(&full, &window)?;
    let n3 = graph.node_count();
    let mut warnings = Vec::new();
    let connected = graph.is_connected();
    if !connected {
        warnings.push("induced subgraph is disconnected".into());
    }
    let transform = spectral_transform(&graph, TransformKind::Laplacian)?;

    let slice_len = cfg.n1 * cfg.n2;
    let pool = parse_feature_file(
        std::io::BufReader::new(std::fs::File::open(feature_path)?),
        slice_len,
    )?;
    if pool.is_empty() {
        return Err(Error::Validation(format!(
            "no feature vectors of length {slice_len} = {} x {} in the feature file",
            cfg.n1, cfg.n2
        )));
    }
    if pool.len() < n3 {
        return Err(Error::Data(format!(
            "only {} eligible feature vectors for {n3} nodes",
            pool.len()
        )));
    }

    let mut tensors = Vec::with_capacity(cfg.count);
    for i in 0..cfg.count {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, TAG_TENSOR, i as u64));
        // a fresh node-to-feature assignment per tensor: choose n3 distinct
        // pool rows (with replacement across tensors)
        let mut idx: Vec<usize> = (0..pool.len()).collect();
        idx.shuffle(&mut rng);
        let mut spec = GraphTensor::zeros(cfg.n1, cfg.n2, n3)?;
        for (k, &row) in idx.iter().take(n3).enumerate() {
            spec.slice_mut(k).copy_from_slice(&pool[row]);
        }
        tensors.push(inverse_transform(&spec, &transform)?);
    }

    let manifest = Manifest {
        n1: cfg.n1,
        n2: cfg.n2,
        n3,
        count: cfg.count,
        seed: cfg.seed,
        transform: TransformKind::Laplacian,
        provenance: Provenance::FacebookFeatures {
            edge_file: edge_path.to_path_buf(),
            feature_file: feature_path.to_path_buf(),
            id_lo: cfg.id_lo,
            id_hi: cfg.id_hi,
        },
        split,
        graph_connected: connected,
    };
    Ok(Dataset {
        tensors,
        graph,
        transform,
        manifest,
        masks: None,
        warnings,
    })
}

fn tensor_file_name(i: usize) -> String {
    format!("{i:04}.gtt")
}

fn mask_file_name(i: usize) -> String {
    format!("{i:04}.txt")
}

/// Writes the dataset directory layout: `graph.txt`, `manifest.json`,
/// `tensors/NNNN.gtt`, and `masks/NNNN.txt` when masks are present.
pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir.join("tensors"))?;

    let mut gf = std::io::BufWriter::new(std::fs::File::create(dir.join("graph.txt"))?);
    writeln!(gf, "# dense node indices 0..{}", ds.graph.node_count() - 1)?;
    for (u, v, w) in ds.graph.edges() {
        writeln!(gf, "{u} {v} {w}")?;
    }
    gf.flush()?;

    let manifest = serde_json::to_string_pretty(&ds.manifest)
        .map_err(|e| Error::Format(format!("manifest serialization failed: {e}")))?;
    std::fs::write(dir.join("manifest.json"), manifest)?;

    for (i, t) in ds.tensors.iter().enumerate() {
        t.save(&dir.join("tensors").join(tensor_file_name(i)))?;
    }
    if let Some(masks) = &ds.masks {
        std::fs::create_dir_all(dir.join("masks"))?;
        for (i, m) in masks.iter().enumerate() {
            m.save(&dir.join("masks").join(mask_file_name(i)))?;
        }
    }
    Ok(())
}

/// Parses `graph.txt` inside a dataset directory: edges are over the dense
/// indices `0..n3`, so no re-indexing happens (isolated nodes stay put).
fn read_dataset_graph(path: &Path, n3: usize) -> Result<Graph> {
    let reader = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut edges = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: "dataset graph lines must be `u v w`".into(),
            });
        }
        let u: usize = fields[0].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("invalid node id `{}`", fields[0]),
        })?;
        let v: usize = fields[1].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("invalid node id `{}`", fields[1]),
        })?;
        let w: f64 = fields[2].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("invalid weight `{}`", fields[2]),
        })?;
        edges.push((u, v, w));
    }
    Graph::from_edges(n3, &edges)
}

/// Loads a dataset directory written by [`save_dataset`].
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let manifest_text = std::fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: Manifest = serde_json::from_str(&manifest_text)
        .map_err(|e| Error::Format(format!("invalid manifest.json: {e}")))?;

    let graph = read_dataset_graph(&dir.join("graph.txt"), manifest.n3)?;
    let transform = spectral_transform(&graph, manifest.transform)?;

    let mut tensors = Vec::with_capacity(manifest.count);
    for i in 0..manifest.count {
        let t = GraphTensor::load(&dir.join("tensors").join(tensor_file_name(i)))?;
        if t.dims() != (manifest.n1, manifest.n2, manifest.n3) {
            return Err(Error::Format(format!(
                "tensor {i} has dims {:?}, manifest says {:?}",
                t.dims(),
                (manifest.n1, manifest.n2, manifest.n3)
            )));
        }
        tensors.push(t);
    }

    let masks_dir = dir.join("masks");
    let masks = if masks_dir.is_dir() {
        let mut ms = Vec::with_capacity(manifest.count);
        for i in 0..manifest.count {
            ms.push(ObservationMask::load(&masks_dir.join(mask_file_name(i)))?);
        }
        Some(ms)
    } else {
        None
    };

    Ok(Dataset {
        tensors,
        graph,
        transform,
        manifest,
        masks,
        warnings: Vec::new(),
    })
}
