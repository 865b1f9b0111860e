//! Procedural test assets: synthetic hands with joints and contact regions,
//! and a small object set (boxes, cylinders, spheres, mugs).
//!
//! Hands are unions of disjoint closed parts (a rounded-box palm plus fifteen
//! phalanx ellipsoids). Curled poses are built around a grasped cylinder: each
//! phalanx is a chord tangent to the cylinder, so the matched object touches
//! every finger pad and the palm without penetrating.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{compute_object_code, Exemplar, HandDescriptor};
use crate::error::{Error, Result};
use crate::geometry::{shapes, Mesh};
use crate::hand::{HandModel, Side, NUM_JOINTS};
use crate::Vec3;

/// Target vertex spacing of fixture hands [cm].
pub const HAND_SPACING: f64 = 0.3;
/// Target vertex spacing of fixture objects [cm].
pub const OBJECT_SPACING: f64 = 0.45;

const JOINT_GAP: f64 = 0.25;
const FINGER_LATERAL: f64 = 0.8;
const FINGER_RADIAL: f64 = 0.7;
const PALM_SEMI: [f64; 3] = [4.0, 4.3, 1.0];
const FINGER_X: [f64; 4] = [2.7, 0.9, -0.9, -2.7];
const FINGER_LENGTHS: [[f64; 3]; 4] = [
    [4.3, 2.6, 2.2],
    [4.6, 2.9, 2.3],
    [4.4, 2.8, 2.2],
    [3.6, 2.2, 2.0],
];
const THUMB_X: f64 = 5.2;
const THUMB_LENGTHS: [f64; 2] = [3.0, 2.6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandPose {
    /// Power grasp around a cylinder.
    Curled,
    /// Precision grasp around a thin cylinder.
    Pinch,
    /// Palm-up cradle holding a box on the palm.
    Cup,
    /// Splayed open hand; not a grasp.
    Flat,
}

impl HandPose {
    pub const ALL: [HandPose; 4] = [HandPose::Curled, HandPose::Pinch, HandPose::Cup, HandPose::Flat];

    pub fn name(self) -> &'static str {
        match self {
            HandPose::Curled => "curled",
            HandPose::Pinch => "pinch",
            HandPose::Cup => "cup",
            HandPose::Flat => "flat",
        }
    }

    /// Whether the pose is meant to hold an object (and pass the gate).
    pub fn is_grasp(self) -> bool {
        self != HandPose::Flat
    }
}

/// A generated hand together with the object it was built around, both in the
/// hand's world frame.
#[derive(Debug, Clone)]
pub struct HandFixture {
    pub pose: HandPose,
    pub hand: HandModel,
    /// The grasped object in place (the flat hand gets a cylinder above the
    /// palm so every fixture carries one).
    pub matched_object: Mesh,
    /// Category of the matched object.
    pub category: String,
    /// Individual closed parts of the hand mesh, in the world frame.
    pub parts: Vec<Mesh>,
}

struct Part {
    mesh: Mesh,
    /// For phalanges: (finger, segment, start, end, palmar direction).
    phalanx: Option<(usize, usize, Vec3, Vec3, Vec3)>,
}

struct Chord {
    a: Vec3,
    b: Vec3,
    palmar: Vec3,
}

/// Geometry of a cylinder grasp in the design frame (palm normal +z, fingers
/// along +y, index toward +x): cylinder axis along x through (0, cy, cz).
struct Wrap {
    radius: f64,
    cy: f64,
    cz: f64,
}

impl Wrap {
    fn at(&self, x: f64, theta: f64, r: f64) -> Vec3 {
        Vec3::new(x, self.cy + r * theta.sin(), self.cz - r * theta.cos())
    }

    /// Chords tangent to the cylinder inflated by the finger thickness,
    /// walking from `theta0` in direction `sign`.
    fn chain(&self, x: f64, lengths: &[f64], theta0: f64, sign: f64) -> Vec<Chord> {
        let h = self.radius + FINGER_RADIAL;
        let mut theta = theta0;
        let mut out = Vec::new();
        for &len in lengths {
            let half = (len / 2.0 / h).atan();
            let r = h / half.cos();
            let a = self.at(x, theta, r);
            let mid = theta + sign * half;
            let b = self.at(x, theta + 2.0 * sign * half, r);
            let palmar = Vec3::new(0.0, -mid.sin(), mid.cos());
            out.push(Chord { a, b, palmar });
            theta += sign * (2.0 * half + 0.3 / r);
        }
        out
    }
}

fn phalanx(a: Vec3, b: Vec3, spacing: f64, scale: f64) -> Mesh {
    let dir = (b - a).normalize();
    shapes::segment_ellipsoid(
        a + dir * JOINT_GAP * scale,
        b - dir * JOINT_GAP * scale,
        (FINGER_LATERAL * scale, FINGER_RADIAL * scale),
        Vec3::x(),
        spacing,
    )
}

/// Rounded box |x/a|⁴ + |y/b|⁴ + |z/c|⁴ = 1 from a radially projected box lattice.
fn palm(semi: Vec3, spacing: f64) -> Mesh {
    shapes::box_mesh(semi * 2.0, spacing)
        .map_vertices(|v| {
            let w = v.component_div(&semi);
            let n4 = (w.x.powi(4) + w.y.powi(4) + w.z.powi(4)).powf(0.25);
            (w / n4).component_mul(&semi)
        })
        .expect("palm lattice is non-degenerate")
}

/// Concatenates disjoint closed meshes into one.
pub fn union_disjoint(parts: &[Mesh]) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for p in parts {
        let base = vertices.len();
        vertices.extend_from_slice(p.vertices());
        faces.extend(p.faces().iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
    }
    Mesh::new(vertices, faces)
}

fn world_transform(pose: HandPose) -> Isometry3<f64> {
    let rot = match pose {
        // thumb side up, palm facing +y: the cylinder stands vertically and
        // is held by friction alone
        HandPose::Curled | HandPose::Pinch => Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[
            Vec3::z(),
            Vec3::x(),
            Vec3::y(),
        ])),
        HandPose::Cup => Rotation3::identity(),
        HandPose::Flat => Rotation3::from_axis_angle(&Vec3::x_axis(), 0.7),
    };
    let offset = match pose {
        HandPose::Curled => Vec3::new(10.0, -5.0, 20.0),
        HandPose::Pinch => Vec3::new(-4.0, 6.0, 15.0),
        HandPose::Cup => Vec3::new(0.0, 0.0, 10.0),
        HandPose::Flat => Vec3::new(3.0, 2.0, 12.0),
    };
    Isometry3::from_parts(Translation3::from(offset), UnitQuaternion::from_rotation_matrix(&rot))
}

/// Generates the fixture hand for `pose`. The seed perturbs proportions by a
/// few percent; seed-to-output is deterministic.
pub fn hand(pose: HandPose, seed: u64) -> HandFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6a09_e667_f3bc_c908);
    let s = 1.0 + rng.gen_range(-0.05..0.05);
    let finger_scale: [f64; 5] = std::array::from_fn(|_| 1.0 + rng.gen_range(-0.03..0.03));

    let semi = Vec3::from(PALM_SEMI) * s;
    let sp = HAND_SPACING;
    let mut parts = vec![Part {
        mesh: palm(semi, sp),
        phalanx: None,
    }];
    let mut joints = vec![Vec3::zeros(); NUM_JOINTS];
    joints[0] = Vec3::new(0.0, -semi.y, 0.0);
    joints[1] = Vec3::new(2.0 * s, -3.3 * s, 0.0);

    let wrap_radius = match pose {
        HandPose::Curled => 2.5 * s,
        HandPose::Pinch => 1.4 * s,
        HandPose::Cup => 4.0 * s,
        HandPose::Flat => 0.0,
    };
    let wrap = Wrap {
        radius: wrap_radius,
        cy: 2.0 * s,
        cz: semi.z + wrap_radius,
    };

    let add_chain = |finger: usize, chords: &[Chord], joints: &mut Vec<Vec3>, parts: &mut Vec<Part>| {
        let base = 1 + 4 * finger;
        let first = usize::from(finger == 0);
        let offset = base + first;
        for (k, c) in chords.iter().enumerate() {
            parts.push(Part {
                mesh: phalanx(c.a, c.b, sp, s),
                phalanx: Some((finger, k, c.a, c.b, c.palmar)),
            });
            if finger == 0 && k == 0 {
                continue;
            }
            let seg = k - first;
            if seg == 0 {
                joints[offset] = c.a;
            } else {
                joints[offset + seg] = (chords[k - 1].b + c.a) / 2.0;
            }
        }
        joints[base + 3] = chords.last().expect("chain is non-empty").b;
    };

    for f in 0..4 {
        let x = FINGER_X[f] * s;
        let lengths = FINGER_LENGTHS[f].map(|l| l * s * finger_scale[f + 1]);
        let chords = if pose == HandPose::Flat {
            straight_chain(Vec3::new(x, semi.y + 0.25 * s, 0.0), Vec3::y(), &lengths)
        } else {
            let theta0 = start_angle(&wrap, semi.y + 0.2 * s, lengths[0]);
            wrap.chain(x, &lengths, theta0, 1.0)
        };
        add_chain(f + 1, &chords, &mut joints, &mut parts);
    }

    let thumb_lengths = THUMB_LENGTHS.map(|l| l * s * finger_scale[0]);
    let meta_start = Vec3::new(THUMB_X * s, -2.9 * s, 0.0);
    let mut chords = if pose == HandPose::Flat {
        let dir = Vec3::new(0.8, 0.6, 0.0);
        let start = meta_start + Vec3::new(0.0, 2.4 * s, 0.0) + dir * 0.3 * s;
        let mut c = straight_chain(start, dir, &thumb_lengths);
        c.insert(
            0,
            Chord {
                a: meta_start,
                b: start,
                palmar: Vec3::z(),
            },
        );
        c
    } else {
        let theta0 = -60f64.to_radians();
        let c = wrap.chain(THUMB_X * s, &thumb_lengths, theta0, -1.0);
        let mut all = vec![Chord {
            a: meta_start,
            b: c[0].a,
            palmar: Vec3::z(),
        }];
        all.extend(c);
        all
    };
    // the thumb's metacarpal joint sits at the start of its proximal phalanx
    chords[0].palmar = Vec3::z();
    add_chain(0, &chords, &mut joints, &mut parts);

    // contact regions in the design frame
    let mut regions: Vec<Vec<usize>> = vec![Vec::new(); 6];
    let mut meshes = Vec::with_capacity(parts.len());
    let mut base = 0;
    let distal = [2usize, 2, 2, 2, 2];
    for part in &parts {
        let m = &part.mesh;
        match part.phalanx {
            None => {
                for (i, (v, n)) in m.vertices().iter().zip(m.vertex_normals()).enumerate() {
                    if n.z > 0.8 && v.x.abs() <= 2.5 * s && v.y.abs() <= 3.0 * s {
                        regions[5].push(base + i);
                    }
                }
            }
            Some((finger, seg, a, b, palmar)) if seg == distal[finger] => {
                let axis = b - a;
                for (i, (v, n)) in m.vertices().iter().zip(m.vertex_normals()).enumerate() {
                    let t = (v - a).dot(&axis) / axis.norm_squared();
                    if n.dot(&palmar) >= 0.5 && t >= 0.45 {
                        regions[finger].push(base + i);
                    }
                }
            }
            _ => {}
        }
        base += m.vertices().len();
        meshes.push(m.clone());
    }

    let design_hand = union_disjoint(&meshes).expect("fixture parts are valid");
    let object_design = match pose {
        HandPose::Curled | HandPose::Pinch => cylinder_along_x(wrap.radius, 13.0 * s, wrap.cy, wrap.cz),
        HandPose::Cup => {
            let size = Vec3::new(3.0, 3.0, 2.0) * s;
            shapes::box_mesh(size, OBJECT_SPACING).translated(&Vec3::new(0.0, 0.0, semi.z + size.z / 2.0))
        }
        HandPose::Flat => cylinder_along_x(2.5 * s, 10.0 * s, 0.0, semi.z + 3.0 * s),
    };
    let category = match pose {
        HandPose::Curled | HandPose::Flat => "bottle",
        HandPose::Pinch => "pen",
        HandPose::Cup => "box",
    };

    let iso = world_transform(pose);
    let to_world = |p: &Vec3| (iso * nalgebra::Point3::from(*p)).coords;
    let hand_mesh = design_hand.map_vertices(to_world).expect("rigid map");
    let joints: Vec<Vec3> = joints.iter().map(to_world).collect();
    let hand = HandModel::new(hand_mesh, joints, regions, Side::Right).expect("fixture hand is valid");
    HandFixture {
        pose,
        hand,
        matched_object: object_design.map_vertices(to_world).expect("rigid map"),
        category: category.to_string(),
        parts: meshes
            .iter()
            .map(|m| m.map_vertices(to_world).expect("rigid map"))
            .collect(),
    }
}

/// Angle on the wrap circle at which a first chord of length `len` starts
/// just past the palm's distal edge.
fn start_angle(wrap: &Wrap, edge_y: f64, len: f64) -> f64 {
    let h = wrap.radius + FINGER_RADIAL;
    let r = h / (len / 2.0 / h).atan().cos();
    ((edge_y - wrap.cy) / r).clamp(-1.0, 1.0).asin()
}

fn straight_chain(start: Vec3, dir: Vec3, lengths: &[f64]) -> Vec<Chord> {
    let dir = dir.normalize();
    let mut p = start;
    lengths
        .iter()
        .map(|&l| {
            let c = Chord {
                a: p,
                b: p + dir * l,
                palmar: Vec3::z(),
            };
            p += dir * (l + 0.3);
            c
        })
        .collect()
}

fn cylinder_along_x(radius: f64, length: f64, cy: f64, cz: f64) -> Mesh {
    let rot = Rotation3::from_axis_angle(&Vec3::y_axis(), PI / 2.0);
    shapes::cylinder(radius, length, OBJECT_SPACING)
        .map_vertices(|v| rot * v + Vec3::new(0.0, cy, cz))
        .expect("rigid map")
}

/// Catalog objects, centered at the origin: (id, category, mesh).
pub fn objects(seed: u64) -> Vec<(String, String, Mesh)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbb67_ae85_84ca_a73b);
    let mut j = |lo: f64, hi: f64| rng.gen_range(lo..hi);
    let sp = OBJECT_SPACING;
    let mut out = Vec::new();
    for (i, (r, h)) in [(2.5, 13.0), (3.0, 11.0), (2.2, 15.0)].iter().enumerate() {
        out.push((
            format!("bottle_{i}"),
            "bottle".to_string(),
            shapes::cylinder(r * j(0.97, 1.03), h * j(0.97, 1.03), sp),
        ));
    }
    for (i, (r, h)) in [(1.4, 13.0), (1.0, 14.0)].iter().enumerate() {
        out.push((
            format!("pen_{i}"),
            "pen".to_string(),
            shapes::cylinder(r * j(0.97, 1.03), h * j(0.97, 1.03), 0.3),
        ));
    }
    for (i, size) in [[3.0, 3.0, 2.0], [6.0, 4.0, 2.5], [8.0, 5.0, 3.0]].iter().enumerate() {
        let size = Vec3::from(*size) * j(0.97, 1.03);
        out.push((format!("box_{i}"), "box".to_string(), shapes::box_mesh(size, sp)));
    }
    for (i, r) in [3.0, 4.5].iter().enumerate() {
        out.push((
            format!("ball_{i}"),
            "ball".to_string(),
            shapes::sphere(r * j(0.97, 1.03), sp),
        ));
    }
    for (i, (r, h)) in [(4.0, 9.0), (3.5, 10.0)].iter().enumerate() {
        let m = shapes::mug(r * j(0.97, 1.03), h * j(0.97, 1.03), 0.5, sp);
        let c = m.centroid();
        out.push((format!("mug_{i}"), "mug".to_string(), m.translated(&-c)));
    }
    out
}

/// Exemplar table built from seeded fixture grasps.
pub fn exemplars(seed: u64) -> Result<Vec<Exemplar>> {
    let mut out = Vec::new();
    for pose in [HandPose::Curled, HandPose::Pinch, HandPose::Cup] {
        for k in 0..4 {
            let fx = hand(pose, seed.wrapping_mul(31).wrapping_add(k));
            let b = fx.hand.principal_bone_length();
            let code = compute_object_code(&fx.matched_object, b)?;
            out.push(Exemplar {
                descriptor: HandDescriptor::from_hand(&fx.hand),
                code,
                category: fx.category.clone(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub seed: u64,
    /// Hand stem → whether the pose is a grasp (expected gate decision).
    pub labels: BTreeMap<String, bool>,
    /// Object id → category.
    pub categories: BTreeMap<String, String>,
}

/// Writes the full fixture set under `dir`:
/// `hands/<pose>.{obj,json}`, `hands/<pose>_object.obj`, `objects/*.obj`,
/// `categories.json`, `exemplars.json`, `labels.json`, `catalog.json`.
pub fn write_fixtures(dir: &Path, seed: u64) -> Result<FixtureManifest> {
    let hands_dir = dir.join("hands");
    let objects_dir = dir.join("objects");
    for d in [&hands_dir, &objects_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let mut labels = BTreeMap::new();
    for pose in HandPose::ALL {
        let fx = hand(pose, seed);
        fx.hand.save_pair(hands_dir.join(pose.name()))?;
        fx.matched_object
            .write_obj(hands_dir.join(format!("{}_object.obj", pose.name())))?;
        labels.insert(pose.name().to_string(), pose.is_grasp());
    }
    let mut categories = BTreeMap::new();
    for (id, category, mesh) in objects(seed) {
        mesh.write_obj(objects_dir.join(format!("{id}.obj")))?;
        categories.insert(id, category);
    }
    write_json(&objects_dir.join("categories.json"), &categories)?;
    write_json(&dir.join("exemplars.json"), &exemplars(seed)?)?;
    write_json(&dir.join("labels.json"), &labels)?;
    let catalog = crate::catalog::build_catalog(&objects_dir)?;
    catalog.save(dir.join("catalog.json"))?;
    Ok(FixtureManifest {
        seed,
        labels,
        categories,
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
