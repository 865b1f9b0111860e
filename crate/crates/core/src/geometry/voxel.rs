use bitvec::prelude::*;
use rayon::prelude::*;

use super::mesh::Mesh;
use super::query::MeshQuery;
use crate::error::{Error, Result};
use crate::Vec3;

/// Occupancy over a regular grid of voxel centers.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub origin: Vec3,
    pub voxel_size: f64,
    pub dims: [usize; 3],
    pub occupancy: BitVec,
}

impl VoxelGrid {
    pub fn center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * self.voxel_size
    }

    pub fn occupied_count(&self) -> usize {
        self.occupancy.count_ones()
    }

    pub fn occupied_volume(&self) -> f64 {
        self.occupied_count() as f64 * self.voxel_size.powi(3)
    }
}

/// Voxels whose centers lie inside both meshes, over the intersection of the
/// two bounding boxes plus one voxel of margin. `None` when the boxes do not
/// overlap.
pub fn intersection_voxels(a: &MeshQuery, b: &MeshQuery, voxel_size: f64) -> Result<Option<VoxelGrid>> {
    if !(voxel_size > 0.0) || !voxel_size.is_finite() {
        return Err(Error::Contract(format!("voxel size must be positive, got {voxel_size}")));
    }
    let (alo, ahi) = a.mesh().aabb();
    let (blo, bhi) = b.mesh().aabb();
    let lo = alo.sup(&blo);
    let hi = ahi.inf(&bhi);
    if (0..3).any(|k| lo[k] > hi[k]) {
        return Ok(None);
    }
    let origin = lo - Vec3::repeat(voxel_size);
    let dims = [0, 1, 2].map(|k| ((hi[k] - lo[k]) / voxel_size).ceil() as usize + 2);
    let total = dims[0] * dims[1] * dims[2];
    let mut grid = VoxelGrid {
        origin,
        voxel_size,
        dims,
        occupancy: bitvec![0; total],
    };
    let flags: Vec<bool> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let i = idx % dims[0];
            let j = (idx / dims[0]) % dims[1];
            let k = idx / (dims[0] * dims[1]);
            let c = grid.center(i, j, k);
            a.contains(&c) && b.contains(&c)
        })
        .collect();
    for (idx, f) in flags.into_iter().enumerate() {
        grid.occupancy.set(idx, f);
    }
    Ok(Some(grid))
}

/// Voxelized overlap volume of two watertight meshes [cm³].
pub fn intersection_volume(a: &Mesh, b: &Mesh, voxel_size: f64) -> Result<f64> {
    let qa = MeshQuery::new(a.clone())?;
    let qb = MeshQuery::new(b.clone())?;
    intersection_volume_prepared(&qa, &qb, voxel_size)
}

pub fn intersection_volume_prepared(a: &MeshQuery, b: &MeshQuery, voxel_size: f64) -> Result<f64> {
    Ok(intersection_voxels(a, b, voxel_size)?
        .map(|g| g.occupied_volume())
        .unwrap_or(0.0))
}
