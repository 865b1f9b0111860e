//! Procedural closed meshes used for fixtures and tests.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3};

use super::mesh::Mesh;
use crate::Vec3;

fn segments(length: f64, spacing: f64) -> usize {
    ((length / spacing).ceil() as usize).max(1)
}

/// Axis-aligned box centered at the origin with faces subdivided to `spacing`.
pub fn box_mesh(size: Vec3, spacing: f64) -> Mesh {
    let n = [
        segments(size.x, spacing),
        segments(size.y, spacing),
        segments(size.z, spacing),
    ];
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut vid = |c: [usize; 3], vertices: &mut Vec<Vec3>| -> usize {
        *index.entry(c).or_insert_with(|| {
            let p = Vec3::new(
                size.x * (c[0] as f64 / n[0] as f64 - 0.5),
                size.y * (c[1] as f64 / n[1] as f64 - 0.5),
                size.z * (c[2] as f64 / n[2] as f64 - 0.5),
            );
            vertices.push(p);
            vertices.len() - 1
        })
    };
    let mut faces = Vec::new();
    for a in 0..3 {
        let u = (a + 1) % 3;
        let v = (a + 2) % 3;
        for side in [0, n[a]] {
            for p in 0..n[u] {
                for q in 0..n[v] {
                    let corner = |dp: usize, dq: usize| {
                        let mut c = [0; 3];
                        c[a] = side;
                        c[u] = p + dp;
                        c[v] = q + dq;
                        c
                    };
                    let quad = [
                        vid(corner(0, 0), &mut vertices),
                        vid(corner(1, 0), &mut vertices),
                        vid(corner(1, 1), &mut vertices),
                        vid(corner(0, 1), &mut vertices),
                    ];
                    let (t1, t2) = if side == 0 {
                        ([quad[0], quad[2], quad[1]], [quad[0], quad[3], quad[2]])
                    } else {
                        ([quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]])
                    };
                    faces.push(t1);
                    faces.push(t2);
                }
            }
        }
    }
    Mesh::new(vertices, faces).expect("box is non-degenerate")
}

/// Inserts points along a polyline so no segment exceeds `spacing`.
pub fn subdivide_profile(keys: &[(f64, f64)], spacing: f64) -> Vec<(f64, f64)> {
    let mut out = vec![keys[0]];
    for w in keys.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = ((b.0 - a.0).powi(2) + (b.1 - a.1).powi(2)).sqrt();
        let n = segments(len, spacing);
        for k in 1..=n {
            let t = k as f64 / n as f64;
            out.push((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)));
        }
    }
    out
}

/// Surface of revolution about +z of a profile of `(radius, z)` points.
/// Only the first and last profile points may sit on the axis.
pub fn lathe(profile: &[(f64, f64)], around: usize) -> Mesh {
    let around = around.max(3);
    let mut vertices = Vec::new();
    // per profile point: either a single pole index or a ring start
    let mut rings: Vec<Result<usize, usize>> = Vec::new();
    for &(r, z) in profile {
        if r.abs() < 1e-12 {
            vertices.push(Vec3::new(0.0, 0.0, z));
            rings.push(Ok(vertices.len() - 1));
        } else {
            let start = vertices.len();
            for j in 0..around {
                let th = 2.0 * PI * j as f64 / around as f64;
                vertices.push(Vec3::new(r * th.cos(), r * th.sin(), z));
            }
            rings.push(Err(start));
        }
    }
    let at = |ring: Result<usize, usize>, j: usize| match ring {
        Ok(pole) => pole,
        Err(start) => start + j % around,
    };
    let mut faces = Vec::new();
    for k in 0..rings.len() - 1 {
        let (r0, r1) = (rings[k], rings[k + 1]);
        for j in 0..around {
            let (a, b, c, d) = (at(r0, j), at(r0, j + 1), at(r1, j + 1), at(r1, j));
            match (r0, r1) {
                (Ok(_), Ok(_)) => {}
                (Ok(_), Err(_)) => faces.push([a, c, d]),
                (Err(_), Ok(_)) => faces.push([a, b, c]),
                (Err(_), Err(_)) => {
                    faces.push([a, b, c]);
                    faces.push([a, c, d]);
                }
            }
        }
    }
    let mesh = Mesh::new(vertices, faces).expect("lathe profile is non-degenerate");
    if mesh.signed_volume() < 0.0 {
        mesh.flipped()
    } else {
        mesh
    }
}

fn around_count(radius: f64, spacing: f64) -> usize {
    segments(2.0 * PI * radius, spacing).max(8)
}

/// Closed cylinder along z centered at the origin.
pub fn cylinder(radius: f64, height: f64, spacing: f64) -> Mesh {
    let h = height / 2.0;
    let profile = subdivide_profile(
        &[(0.0, -h), (radius, -h), (radius, h), (0.0, h)],
        spacing,
    );
    lathe(&profile, around_count(radius, spacing))
}

pub fn sphere(radius: f64, spacing: f64) -> Mesh {
    let n = segments(PI * radius, spacing).max(4);
    let profile: Vec<(f64, f64)> = (0..=n)
        .map(|k| {
            let phi = PI * k as f64 / n as f64;
            (radius * phi.sin(), -radius * phi.cos())
        })
        .collect();
    lathe(&profile, around_count(radius, spacing))
}

/// Ellipsoid with semi-axes `semi` along the columns of `axes` (orthonormal).
pub fn ellipsoid(center: Vec3, axes: Matrix3<f64>, semi: Vec3, spacing: f64) -> Mesh {
    let n = segments(PI * semi.z, spacing).max(6);
    let profile: Vec<(f64, f64)> = (0..=n)
        .map(|k| {
            let phi = PI * k as f64 / n as f64;
            (phi.sin(), -phi.cos())
        })
        .collect();
    let around = around_count(semi.x.max(semi.y), spacing);
    let unit = lathe(&profile, around);
    unit.map_vertices(|v| center + axes * v.component_mul(&semi))
        .expect("ellipsoid is non-degenerate")
}

/// Elongated ellipsoid spanning the segment `a → b` with cross-section
/// semi-axes `radii`; `up` fixes the roll of the first cross-section axis.
pub fn segment_ellipsoid(a: Vec3, b: Vec3, radii: (f64, f64), up: Vec3, spacing: f64) -> Mesh {
    let axis = b - a;
    let len = axis.norm();
    let z = axis / len;
    let x = (up - z * up.dot(&z))
        .try_normalize(1e-9)
        .unwrap_or_else(|| z.cross(&Vec3::x()).try_normalize(1e-9).unwrap_or_else(Vec3::y));
    let y = z.cross(&x);
    let axes = Matrix3::from_columns(&[x, y, z]);
    ellipsoid((a + b) / 2.0, axes, Vec3::new(radii.0, radii.1, len / 2.0), spacing)
}

/// Open-top cup of revolution (wall thickness `wall`) standing on z = 0.
pub fn mug(outer_radius: f64, height: f64, wall: f64, spacing: f64) -> Mesh {
    let inner = outer_radius - wall;
    let profile = subdivide_profile(
        &[
            (0.0, 0.0),
            (outer_radius, 0.0),
            (outer_radius, height),
            (inner, height),
            (inner, wall),
            (0.0, wall),
        ],
        spacing,
    );
    lathe(&profile, around_count(outer_radius, spacing))
}

/// Rotation taking +z to `dir`.
pub fn rotation_z_to(dir: &Vec3) -> Rotation3<f64> {
    Rotation3::rotation_between(&Vec3::z(), dir)
        .unwrap_or_else(|| Rotation3::from_axis_angle(&Vec3::x_axis(), PI))
}
