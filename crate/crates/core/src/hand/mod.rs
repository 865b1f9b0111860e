//! Hand representation, canonical frame, contact labeling and the
//! non-grasping pose gate.

mod gate;
mod prepared;

use std::path::{Path, PathBuf};

use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{load_mesh, Mesh, PointGrid};
use crate::Vec3;

pub use prepared::{InsideCache, PreparedHand};
pub use gate::{grasp_gate, inscribed_ball, GateReport, InscribedBall, DEFAULT_GATE_THRESHOLD};

pub const NUM_JOINTS: usize = 21;
pub const NUM_REGIONS: usize = 6;

pub const ROOT: usize = 0;
/// Joint chains from the finger base outward, thumb first.
pub const FINGERS: [[usize; 4]; 5] = [
    [1, 2, 3, 4],
    [5, 6, 7, 8],
    [9, 10, 11, 12],
    [13, 14, 15, 16],
    [17, 18, 19, 20],
];
pub const THUMB_BASE: usize = 1;
pub const INDEX_BASE: usize = 5;
pub const MIDDLE_BASE: usize = 9;
pub const PINKY_BASE: usize = 17;

/// Default hand/object contact threshold [cm].
pub const DEFAULT_CONTACT_THRESHOLD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// JSON sidecar stored next to the hand OBJ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandSidecar {
    pub joints: Vec<[f64; 3]>,
    pub contact_regions: Vec<Vec<usize>>,
    pub side: Side,
}

/// A hand mesh with its 21 joints and six contact regions (five fingertip
/// pads, then the palm). Never modified by fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct HandModel {
    mesh: Mesh,
    joints: Vec<Vec3>,
    contact_regions: Vec<Vec<usize>>,
    side: Side,
}

impl HandModel {
    pub fn new(
        mesh: Mesh,
        joints: Vec<Vec3>,
        contact_regions: Vec<Vec<usize>>,
        side: Side,
    ) -> Result<Self> {
        if joints.len() != NUM_JOINTS {
            return Err(Error::Config(format!(
                "hand needs {NUM_JOINTS} joints, got {}",
                joints.len()
            )));
        }
        if contact_regions.len() != NUM_REGIONS {
            return Err(Error::Config(format!(
                "hand needs {NUM_REGIONS} contact regions, got {}",
                contact_regions.len()
            )));
        }
        let n = mesh.vertices().len();
        let mut owner = vec![usize::MAX; n];
        for (r, region) in contact_regions.iter().enumerate() {
            if region.is_empty() {
                return Err(Error::Config(format!("contact region {r} is empty")));
            }
            for &v in region {
                if v >= n {
                    return Err(Error::Config(format!(
                        "contact region {r} references vertex {v} beyond {n}"
                    )));
                }
                if owner[v] != usize::MAX {
                    return Err(Error::Config(format!(
                        "vertex {v} belongs to regions {} and {r}",
                        owner[v]
                    )));
                }
                owner[v] = r;
            }
        }
        let hand = HandModel {
            mesh,
            joints,
            contact_regions,
            side,
        };
        if !(hand.principal_bone_length() > 0.0) {
            return Err(Error::Degenerate("principal bone length is zero".into()));
        }
        Ok(hand)
    }

    pub fn from_sidecar(mesh: Mesh, sidecar: HandSidecar) -> Result<Self> {
        let joints = sidecar.joints.iter().map(|j| Vec3::from(*j)).collect();
        Self::new(mesh, joints, sidecar.contact_regions, sidecar.side)
    }

    pub fn sidecar(&self) -> HandSidecar {
        HandSidecar {
            joints: self.joints.iter().map(|j| [j.x, j.y, j.z]).collect(),
            contact_regions: self.contact_regions.clone(),
            side: self.side,
        }
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn joints(&self) -> &[Vec3] {
        &self.joints
    }

    pub fn contact_regions(&self) -> &[Vec<usize>] {
        &self.contact_regions
    }

    pub fn side(&self) -> Side {
        self.side
    }

    /// Distance between the root joint and the first thumb joint [cm].
    pub fn principal_bone_length(&self) -> f64 {
        (self.joints[THUMB_BASE] - self.joints[ROOT]).norm()
    }

    /// Scale of the normalized hand space: largest vertex distance from the
    /// vertex centroid.
    pub fn normalization_scale(&self) -> f64 {
        let c = self.mesh.centroid();
        self.mesh
            .vertices()
            .iter()
            .map(|v| (v - c).norm())
            .fold(0.0, f64::max)
    }

    /// Applies a rigid transform to mesh and joints.
    pub fn transformed(&self, iso: &Isometry3<f64>) -> Result<HandModel> {
        let mesh = self
            .mesh
            .map_vertices(|v| (iso * nalgebra::Point3::from(*v)).coords)?;
        let joints = self
            .joints
            .iter()
            .map(|j| (iso * nalgebra::Point3::from(*j)).coords)
            .collect();
        Ok(HandModel {
            mesh,
            joints,
            contact_regions: self.contact_regions.clone(),
            side: self.side,
        })
    }

    /// Uniformly scales the hand about the origin.
    pub fn scaled(&self, s: f64) -> Result<HandModel> {
        let mesh = Mesh::new(
            self.mesh.vertices().iter().map(|v| v * s).collect(),
            self.mesh.faces().to_vec(),
        )?;
        Ok(HandModel {
            mesh,
            joints: self.joints.iter().map(|j| j * s).collect(),
            contact_regions: self.contact_regions.clone(),
            side: self.side,
        })
    }

    /// Rigid map taking this hand into its canonical frame: vertex centroid at
    /// the origin, wrist → middle-finger base along +y, palm normal along +z.
    pub fn canonical_transform(&self) -> Result<Isometry3<f64>> {
        let j = &self.joints;
        let y = (j[MIDDLE_BASE] - j[ROOT])
            .try_normalize(1e-9)
            .ok_or_else(|| Error::Degenerate("wrist and middle-finger base coincide".into()))?;
        let across = j[INDEX_BASE] - j[PINKY_BASE];
        let mut normal = across.cross(&y);
        if self.side == Side::Left {
            normal = -normal;
        }
        let z = (normal - y * normal.dot(&y))
            .try_normalize(1e-9)
            .ok_or_else(|| Error::Degenerate("palm frame vectors are collinear".into()))?;
        let x = y.cross(&z);
        let rot = Rotation3::from_matrix_unchecked(Matrix3::from_rows(&[
            x.transpose(),
            y.transpose(),
            z.transpose(),
        ]));
        let c = self.mesh.centroid();
        let t = -(rot * c);
        Ok(Isometry3::from_parts(
            Translation3::from(t),
            UnitQuaternion::from_rotation_matrix(&rot),
        ))
    }

    /// The hand expressed in its canonical frame.
    pub fn canonicalize(&self) -> Result<HandModel> {
        let iso = self.canonical_transform()?;
        self.transformed(&iso)
    }

    pub fn load(obj: impl AsRef<Path>, sidecar: impl AsRef<Path>) -> Result<HandModel> {
        let mesh = load_mesh(obj)?;
        let path = sidecar.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let sc: HandSidecar = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        Self::from_sidecar(mesh, sc)
    }

    /// Loads `<stem>.obj` + `<stem>.json`; `path` may name either file or the
    /// bare stem.
    pub fn load_pair(path: impl AsRef<Path>) -> Result<HandModel> {
        let (obj, json) = hand_paths(path.as_ref());
        Self::load(obj, json)
    }

    pub fn save_pair(&self, stem: impl AsRef<Path>) -> Result<()> {
        let (obj, json) = hand_paths(stem.as_ref());
        self.mesh.write_obj(&obj)?;
        let text = serde_json::to_string_pretty(&self.sidecar()).expect("sidecar serializes");
        std::fs::write(&json, text).map_err(|e| Error::io(&json, e))
    }
}

pub fn hand_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("obj") | Some("json") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let with = |ext: &str| {
        let mut s = stem.clone().into_os_string();
        s.push(".");
        s.push(ext);
        PathBuf::from(s)
    };
    (with("obj"), with("json"))
}

/// Hand vertices within a distance threshold of an object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactLabels {
    pub in_contact: Vec<bool>,
    /// Indices of labeled hand vertices, ascending.
    pub indices: Vec<usize>,
    /// Positions of the labeled hand vertices [cm].
    pub points: Vec<Vec3>,
}

/// Labels hand vertices whose distance to the nearest object vertex is at most
/// `threshold` [cm].
pub fn contact_labels(hand: &HandModel, object: &Mesh, threshold: f64) -> Result<ContactLabels> {
    let grid = PointGrid::new(object.vertices())?;
    Ok(label_with_grid(hand.mesh().vertices(), &grid, threshold))
}

pub(crate) fn label_with_grid(hand_vertices: &[Vec3], object: &PointGrid, threshold: f64) -> ContactLabels {
    let in_contact: Vec<bool> = hand_vertices
        .iter()
        .map(|v| object.nearest(v).0 <= threshold)
        .collect();
    let indices: Vec<usize> = (0..in_contact.len()).filter(|&i| in_contact[i]).collect();
    let points = indices.iter().map(|&i| hand_vertices[i]).collect();
    ContactLabels {
        in_contact,
        indices,
        points,
    }
}
