//! Meshes and geometric primitives. All lengths are centimeters.

mod hull;
mod mesh;
mod obb;
mod primitives;
mod query;
pub mod shapes;
mod spatial;
mod voxel;

pub use hull::{convex_hull, sdf_convex, ConvexPolytope};
pub use mesh::{aabb_of, load_mesh, parse_obj, triangle_area, vertex_centroid, Mesh};
pub use obb::{pca_obb, ObbResult};
pub use primitives::{closest_point_triangle, ray_triangle};
pub use query::{points_inside, MeshQuery, TriangleBvh};
pub use spatial::{min_dist_point_set, min_dist_set_set, PointGrid};
pub use voxel::{intersection_volume, intersection_volume_prepared, intersection_voxels, VoxelGrid};
