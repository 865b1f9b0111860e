//! Object codes, the local object catalog, and code retrieval from grasp
//! exemplars.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{load_mesh, pca_obb, Mesh, ObbResult};
use crate::hand::{HandModel, FINGERS, ROOT};
use crate::Vec3;

/// Shape key `[l3/b, l2/l3, l1/l2]` with `l1 ≥ l2 ≥ l3` the bounding-box
/// lengths and `b` the hand's principal bone length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectCode(pub [f64; 3]);

impl ObjectCode {
    pub fn new(x: [f64; 3]) -> Result<Self> {
        if x.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!("object code components must be positive: {x:?}")));
        }
        Ok(ObjectCode(x))
    }

    /// Box lengths in ascending order for bone length `b`.
    pub fn extents(&self, b: f64) -> [f64; 3] {
        let [x1, x2, x3] = self.0;
        [x1 * b, x1 * x2 * b, x1 * x2 * x3 * b]
    }
}

pub fn compute_object_code(object: &Mesh, b: f64) -> Result<ObjectCode> {
    if !(b > 0.0) {
        return Err(Error::Contract(format!("bone length must be positive, got {b}")));
    }
    code_from_obb(&pca_obb(object.vertices())?, b)
}

fn code_from_obb(obb: &ObbResult, b: f64) -> Result<ObjectCode> {
    let [small, mid, large] = obb.lengths;
    if !(small > 0.0) {
        return Err(Error::Degenerate("zero bounding-box extent".into()));
    }
    Ok(ObjectCode([small / b, mid / small, large / mid]))
}

/// Scales the object along its box axes (about its centroid) so its sorted
/// box lengths become `code.extents(b)`.
pub fn rescale_to_code(object: &Mesh, code: &ObjectCode, b: f64) -> Result<Mesh> {
    if !(b > 0.0) {
        return Err(Error::Contract(format!("bone length must be positive, got {b}")));
    }
    let obb = pca_obb(object.vertices())?;
    let target = code.extents(b);
    let factors: [f64; 3] = std::array::from_fn(|k| target[k] / obb.lengths[k]);
    let c = obb.center;
    object.map_vertices(|v| {
        let d = v - c;
        c + (0..3)
            .map(|k| obb.axes[k] * (obb.axes[k].dot(&d) * factors[k]))
            .sum::<Vec3>()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub id: String,
    pub category: String,
    /// Mesh file, relative to the catalog root.
    pub mesh: String,
    /// Code computed with b = 1.
    pub canonical_code: ObjectCode,
    pub obb: ObbResult,
    pub watertight: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub file: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    /// Directory holding the meshes; relative paths resolve against the
    /// index file's directory.
    pub root: PathBuf,
    pub entries: Vec<CatalogEntry>,
    pub excluded: Vec<Exclusion>,
}

/// Name of the `{id: category}` manifest inside a catalog directory.
pub const CATEGORIES_FILE: &str = "categories.json";

/// Indexes every `*.obj` in `dir`. Meshes that fail to load or are not
/// watertight are excluded with a reason; every mesh must be listed in the
/// categories manifest and vice versa.
pub fn build_catalog(dir: impl AsRef<Path>) -> Result<Catalog> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(CATEGORIES_FILE);
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let categories: BTreeMap<String, String> =
        serde_json::from_str(&text).map_err(|e| Error::json(&manifest_path, e))?;

    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("obj"))
        .collect();
    files.sort();

    let mut entries = Vec::new();
    let mut excluded = Vec::new();
    let mut seen = Vec::new();
    for path in &files {
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Catalog(format!("non-UTF-8 file name {}", path.display())))?
            .to_string();
        let file = format!("{id}.obj");
        let category = categories
            .get(&id)
            .ok_or_else(|| Error::Catalog(format!("{file} is missing from {CATEGORIES_FILE}")))?
            .clone();
        seen.push(id.clone());
        match index_mesh(path) {
            Ok((canonical_code, obb)) => entries.push(CatalogEntry {
                id,
                category,
                mesh: file,
                canonical_code,
                obb,
                watertight: true,
            }),
            Err(e) => {
                warn!("excluding {file}: {e}");
                excluded.push(Exclusion {
                    file,
                    reason: e.to_string(),
                });
            }
        }
    }
    if let Some(id) = categories.keys().find(|id| !seen.contains(id)) {
        return Err(Error::Catalog(format!(
            "{CATEGORIES_FILE} lists {id} but {id}.obj does not exist"
        )));
    }
    if entries.is_empty() {
        return Err(Error::Catalog(format!("no usable meshes in {}", dir.display())));
    }
    info!("catalog: {} entries, {} excluded", entries.len(), excluded.len());
    Ok(Catalog {
        root: dir.to_path_buf(),
        entries,
        excluded,
    })
}

fn index_mesh(path: &Path) -> Result<(ObjectCode, ObbResult)> {
    let mesh = load_mesh(path)?;
    mesh.check_watertight()?;
    let obb = pca_obb(mesh.vertices())?;
    Ok((code_from_obb(&obb, 1.0)?, obb))
}

impl Catalog {
    /// Writes the index. The root is stored relative to the index file's
    /// directory when possible, so the directory tree can be relocated.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new(""));
        let root = relative_to(&self.root, base);
        let stored = Catalog {
            root,
            entries: self.entries.clone(),
            excluded: self.excluded.clone(),
        };
        crate::fixtures::write_json(path, &stored)
    }

    pub fn mesh_path(&self, entry: &CatalogEntry) -> PathBuf {
        self.root.join(&entry.mesh)
    }

    pub fn load_mesh(&self, entry: &CatalogEntry) -> Result<Mesh> {
        load_mesh(self.mesh_path(entry))
    }
}

fn relative_to(target: &Path, base: &Path) -> PathBuf {
    let abs = |p: &Path| std::fs::canonicalize(p).ok();
    match (abs(target), abs(if base.as_os_str().is_empty() { Path::new(".") } else { base })) {
        (Some(t), Some(b)) => match t.strip_prefix(&b) {
            Ok(rel) if rel.as_os_str().is_empty() => PathBuf::from("."),
            Ok(rel) => rel.to_path_buf(),
            Err(_) => t,
        },
        _ => target.to_path_buf(),
    }
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut catalog: Catalog = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    if catalog.entries.is_empty() {
        return Err(Error::Catalog(format!("{} has no entries", path.display())));
    }
    if catalog.root.is_relative() {
        catalog.root = path.parent().unwrap_or(Path::new("")).join(&catalog.root);
    }
    Ok(catalog)
}

/// Rigid-invariant hand pose signature: the 20 bone lengths followed by the
/// 10 fingertip-to-fingertip and 5 fingertip-to-palm-center distances, all
/// divided by the principal bone length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HandDescriptor(pub Vec<f64>);

pub const DESCRIPTOR_LEN: usize = 35;

impl HandDescriptor {
    pub fn from_hand(hand: &HandModel) -> Self {
        let j = hand.joints();
        let b = hand.principal_bone_length();
        let mut d = Vec::with_capacity(DESCRIPTOR_LEN);
        for chain in FINGERS {
            let mut prev = j[ROOT];
            for &k in &chain {
                d.push((j[k] - prev).norm() / b);
                prev = j[k];
            }
        }
        let tips: Vec<Vec3> = FINGERS.iter().map(|c| j[c[3]]).collect();
        for a in 0..5 {
            for c in a + 1..5 {
                d.push((tips[a] - tips[c]).norm() / b);
            }
        }
        let palm = (j[ROOT] + FINGERS[1..].iter().map(|c| j[c[0]]).sum::<Vec3>()) / 5.0;
        for t in &tips {
            d.push((t - palm).norm() / b);
        }
        HandDescriptor(d)
    }

    pub fn distance(&self, other: &HandDescriptor) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exemplar {
    pub descriptor: HandDescriptor,
    pub code: ObjectCode,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarSet(Vec<Exemplar>);

impl ExemplarSet {
    pub fn new(exemplars: Vec<Exemplar>) -> Result<Self> {
        if exemplars.is_empty() {
            return Err(Error::Config("exemplar set is empty".into()));
        }
        for (i, e) in exemplars.iter().enumerate() {
            if e.descriptor.0.len() != DESCRIPTOR_LEN {
                return Err(Error::Config(format!(
                    "exemplar {i}: descriptor has {} values, expected {DESCRIPTOR_LEN}",
                    e.descriptor.0.len()
                )));
            }
            ObjectCode::new(e.code.0)?;
        }
        Ok(ExemplarSet(exemplars))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::new(serde_json::from_str(&text).map_err(|e| Error::json(path, e))?)
    }

    pub fn as_slice(&self) -> &[Exemplar] {
        &self.0
    }

    /// The `k` nearest exemplars to `query` as (index, distance), nearest
    /// first; ties keep table order.
    pub fn nearest(&self, query: &HandDescriptor, k: usize) -> Vec<(usize, f64)> {
        let mut d: Vec<(usize, f64)> = self
            .0
            .iter()
            .enumerate()
            .map(|(i, e)| (i, query.distance(&e.descriptor)))
            .collect();
        d.sort_by(|a, b| a.1.total_cmp(&b.1));
        d.truncate(k.max(1));
        d
    }
}

/// Inverse-distance weights used to sample among the nearest exemplars.
pub fn exemplar_weights(distances: &[f64]) -> Vec<f64> {
    distances.iter().map(|d| 1.0 / (d + 1e-6)).collect()
}

/// Samples an object code for the hand from its `k` nearest exemplars with
/// probability proportional to inverse descriptor distance.
pub fn predict_code(hand: &HandModel, exemplars: &ExemplarSet, k: usize, seed: u64) -> (ObjectCode, String) {
    let query = HandDescriptor::from_hand(hand);
    let near = exemplars.nearest(&query, k);
    let weights = exemplar_weights(&near.iter().map(|n| n.1).collect::<Vec<_>>());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = near[sample_index(&weights, rng.gen::<f64>())].0;
    let e = &exemplars.0[pick];
    (e.code, e.category.clone())
}

fn sample_index(weights: &[f64], u: f64) -> usize {
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u * total < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// A catalog object fetched and rescaled for a target code.
#[derive(Debug, Clone)]
pub struct Selection {
    pub id: String,
    pub category: String,
    /// Code distance of the chosen entry.
    pub distance: f64,
    /// Rescaled mesh, centered at its vertex centroid.
    pub mesh: Mesh,
}

/// Catalog ranking distance: shape ratios plus the smallest extent relative
/// to the hand scale.
pub fn code_distance(code: &ObjectCode, canonical: &ObjectCode, b: f64) -> f64 {
    let [x1, x2, x3] = code.0;
    let [c1, c2, c3] = canonical.0;
    ((x2 - c2).powi(2) + (x3 - c3).powi(2) + ((x1 * b - c1) / b).powi(2)).sqrt()
}

/// Ranks the catalog (restricted to `category` when present) by code
/// distance, samples one of the three closest with the seed, and rescales it
/// to the code.
pub fn select_object(code: &ObjectCode, category: &str, catalog: &Catalog, b: f64, seed: u64) -> Result<Selection> {
    if catalog.entries.is_empty() {
        return Err(Error::Catalog("catalog is empty".into()));
    }
    let ranked = rank_catalog(code, category, catalog, b);
    let pool = ranked.len().min(3);
    // Separate stream so the pick is independent of the code draw in
    // `predict_code` under the same seed.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let (entry, distance) = ranked[rng.gen_range(0..pool)];
    let mesh = rescale_to_code(&catalog.load_mesh(entry)?, code, b)?;
    let c = mesh.centroid();
    Ok(Selection {
        id: entry.id.clone(),
        category: entry.category.clone(),
        distance,
        mesh: mesh.translated(&-c),
    })
}

/// Entries of `category` (or all, if none match) by ascending code distance.
pub fn rank_catalog<'a>(code: &ObjectCode, category: &str, catalog: &'a Catalog, b: f64) -> Vec<(&'a CatalogEntry, f64)> {
    let in_category: Vec<&CatalogEntry> = catalog.entries.iter().filter(|e| e.category == category).collect();
    let pool = if in_category.is_empty() {
        catalog.entries.iter().collect()
    } else {
        in_category
    };
    let mut ranked: Vec<(&CatalogEntry, f64)> = pool
        .into_iter()
        .map(|e| (e, code_distance(code, &e.canonical_code, b)))
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    ranked
}
