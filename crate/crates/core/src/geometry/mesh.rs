use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::Vec3;

/// Faces with area at or below this are dropped at construction [cm²].
pub const MIN_FACE_AREA: f64 = 1e-12;

/// Indexed triangle surface. Lengths are centimeters.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    vertex_normals: Vec<Vec3>,
}

impl Mesh {
    /// Builds a mesh, dropping degenerate faces and computing vertex normals.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let (mesh, dropped) = Self::new_counting(vertices, faces)?;
        if dropped > 0 {
            warn!("dropped {dropped} degenerate face(s)");
        }
        Ok(mesh)
    }

    pub(crate) fn new_counting(
        vertices: Vec<Vec3>,
        faces: Vec<[usize; 3]>,
    ) -> Result<(Self, usize)> {
        if vertices.is_empty() {
            return Err(Error::EmptyMesh);
        }
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::Contract(format!("non-finite vertex {v:?}")));
        }
        let n = vertices.len();
        for f in &faces {
            if f.iter().any(|&i| i >= n) {
                return Err(Error::Contract(format!(
                    "face {f:?} references a vertex beyond {n}"
                )));
            }
        }
        let before = faces.len();
        let faces: Vec<[usize; 3]> = faces
            .into_iter()
            .filter(|f| {
                f[0] != f[1]
                    && f[1] != f[2]
                    && f[0] != f[2]
                    && triangle_area(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]])
                        > MIN_FACE_AREA
            })
            .collect();
        let dropped = before - faces.len();
        if faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let vertex_normals = compute_vertex_normals(&vertices, &faces);
        Ok((
            Mesh {
                vertices,
                faces,
                vertex_normals,
            },
            dropped,
        ))
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_normals(&self) -> &[Vec3] {
        &self.vertex_normals
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let f = self.faces[face];
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    /// Unit normal of a face following its winding.
    pub fn face_normal(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a)).normalize()
    }

    /// Mean of the vertex positions.
    pub fn centroid(&self) -> Vec3 {
        vertex_centroid(&self.vertices)
    }

    pub fn aabb(&self) -> (Vec3, Vec3) {
        aabb_of(&self.vertices)
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                triangle_area(&a, &b, &c)
            })
            .sum()
    }

    /// Signed enclosed volume; positive for closed meshes with outward winding.
    pub fn signed_volume(&self) -> f64 {
        (0..self.faces.len())
            .map(|i| {
                let [a, b, c] = self.triangle(i);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Volume centroid and inertia tensor about it for unit density.
    pub fn mass_properties(&self) -> (f64, Vec3, Matrix3<f64>) {
        let mut volume = 0.0;
        let mut first = Vec3::zeros();
        // second moments about the origin: integral of x_i x_j
        let mut second = Matrix3::zeros();
        for i in 0..self.faces.len() {
            let [a, b, c] = self.triangle(i);
            let v = a.dot(&b.cross(&c)) / 6.0;
            volume += v;
            first += v * (a + b + c) / 4.0;
            let s = a + b + c;
            // integral over tetrahedron (0,a,b,c) of x x^T
            let m = (a * a.transpose() + b * b.transpose() + c * c.transpose() + s * s.transpose())
                * (v / 20.0);
            second += m;
        }
        let com = first / volume;
        let second_c = second - volume * com * com.transpose();
        let inertia = Matrix3::identity() * second_c.trace() - second_c;
        (volume, com, inertia)
    }

    /// Applies `f` to every vertex. Orientation-reversing maps flip the winding.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<Mesh> {
        let vertices: Vec<Vec3> = self.vertices.iter().map(f).collect();
        let before = self.signed_volume();
        let mesh = Mesh::new(vertices, self.faces.clone())?;
        if before * mesh.signed_volume() < 0.0 {
            return Ok(mesh.flipped());
        }
        Ok(mesh)
    }

    pub fn translated(&self, t: &Vec3) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|v| v + t).collect(),
            faces: self.faces.clone(),
            vertex_normals: self.vertex_normals.clone(),
        }
    }

    /// Reverses the winding of every face.
    pub fn flipped(&self) -> Mesh {
        Mesh {
            vertices: self.vertices.clone(),
            faces: self.faces.iter().map(|f| [f[0], f[2], f[1]]).collect(),
            vertex_normals: self.vertex_normals.iter().map(|n| -n).collect(),
        }
    }

    /// Every edge shared by exactly two faces with opposite orientation.
    pub fn check_watertight(&self) -> Result<()> {
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                *directed.entry((f[k], f[(k + 1) % 3])).or_default() += 1;
            }
        }
        // face order keeps the reported edge deterministic
        for (a, b) in self.faces.iter().flat_map(|f| (0..3).map(move |k| (f[k], f[(k + 1) % 3]))) {
            let count = directed[&(a, b)];
            if count != 1 {
                return Err(Error::NotWatertight(format!(
                    "directed edge ({a}, {b}) used by {count} faces"
                )));
            }
            if directed.get(&(b, a)) != Some(&1) {
                return Err(Error::NotWatertight(format!(
                    "edge ({a}, {b}) has no opposite twin"
                )));
            }
        }
        Ok(())
    }

    pub fn is_watertight(&self) -> bool {
        self.check_watertight().is_ok()
    }

    pub fn to_obj_string(&self) -> String {
        let mut out = String::with_capacity(self.vertices.len() * 40 + self.faces.len() * 20);
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        for f in &self.faces {
            let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        out
    }

    pub fn write_obj(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_obj_string()).map_err(|e| Error::io(path, e))
    }
}

pub fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

pub fn vertex_centroid(points: &[Vec3]) -> Vec3 {
    let sum: Vec3 = points.iter().sum();
    sum / points.len() as f64
}

pub fn aabb_of(points: &[Vec3]) -> (Vec3, Vec3) {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (lo, hi)
}

fn compute_vertex_normals(vertices: &[Vec3], faces: &[[usize; 3]]) -> Vec<Vec3> {
    let mut acc = vec![Vec3::zeros(); vertices.len()];
    for f in faces {
        let (a, b, c) = (vertices[f[0]], vertices[f[1]], vertices[f[2]]);
        // area weighted
        let n = (b - a).cross(&(c - a));
        for &i in f {
            acc[i] += n;
        }
    }
    let centroid = vertex_centroid(vertices);
    acc.iter()
        .zip(vertices)
        .map(|(n, v)| {
            if let Some(u) = n.try_normalize(1e-300) {
                u
            } else {
                (v - centroid)
                    .try_normalize(1e-300)
                    .unwrap_or_else(Vec3::z)
            }
        })
        .collect()
}

/// Reads an ASCII OBJ file. Polygons are fan-triangulated; `vn`/`vt` records
/// and texture/normal indices are ignored.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mesh = parse_obj(&text, path)?;
    Ok(mesh)
}

pub fn parse_obj(text: &str, path: &Path) -> Result<Mesh> {
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut vertices = Vec::new();
    // (line, raw index) pairs resolved once every vertex is known
    let mut polys: Vec<(usize, Vec<i64>)> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| perr(lineno, format!("bad vertex coordinate: {e}")))?;
                if coords.len() != 3 {
                    return Err(perr(lineno, "vertex needs three coordinates".into()));
                }
                vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let idx: Vec<i64> = tokens
                    .map(|t| {
                        t.split('/')
                            .next()
                            .unwrap_or("")
                            .parse::<i64>()
                            .map_err(|e| perr(lineno, format!("bad face index '{t}': {e}")))
                    })
                    .collect::<Result<_>>()?;
                if idx.len() < 3 {
                    return Err(perr(lineno, "face needs at least three vertices".into()));
                }
                // negative indices are relative to the vertices read so far
                let resolved = idx
                    .into_iter()
                    .map(|i| if i < 0 { vertices.len() as i64 + i + 1 } else { i })
                    .collect();
                polys.push((lineno, resolved));
            }
            _ => {}
        }
    }
    let n = vertices.len() as i64;
    let mut faces = Vec::new();
    for (lineno, poly) in polys {
        if let Some(bad) = poly.iter().find(|&&i| i < 1 || i > n) {
            return Err(perr(
                lineno,
                format!("face index {bad} out of range for {n} vertices"),
            ));
        }
        let p: Vec<usize> = poly.iter().map(|&i| (i - 1) as usize).collect();
        for k in 1..p.len() - 1 {
            faces.push([p[0], p[k], p[k + 1]]);
        }
    }
    if vertices.is_empty() || faces.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let (mesh, dropped) = Mesh::new_counting(vertices, faces)?;
    if dropped > 0 {
        warn!("{}: dropped {dropped} degenerate face(s)", path.display());
    }
    Ok(mesh)
}
