use crate::error::Result;
use crate::geometry::{MeshQuery, PointGrid};
use crate::Vec3;

use super::HandModel;

/// A hand with the acceleration structures shared by fitting and evaluation.
#[derive(Debug, Clone)]
pub struct PreparedHand {
    hand: HandModel,
    query: MeshQuery,
    contact_grid: PointGrid,
    contact_threshold: f64,
}

impl PreparedHand {
    /// Fails if the hand mesh is not watertight.
    pub fn new(hand: &HandModel, contact_threshold: f64) -> Result<Self> {
        let query = MeshQuery::new(hand.mesh().clone())?;
        let contact_grid = PointGrid::with_cell(hand.mesh().vertices(), contact_threshold.max(1e-3))?;
        Ok(PreparedHand {
            hand: hand.clone(),
            query,
            contact_grid,
            contact_threshold,
        })
    }

    pub fn hand(&self) -> &HandModel {
        &self.hand
    }

    pub fn query(&self) -> &MeshQuery {
        &self.query
    }

    pub fn contact_threshold(&self) -> f64 {
        self.contact_threshold
    }

    /// Visits every hand vertex within the contact threshold of `p` as
    /// (distance, hand vertex index).
    pub fn contacts_near(&self, p: &Vec3, f: impl FnMut(f64, usize)) {
        self.contact_grid.within(p, self.contact_threshold, f);
    }

    /// Strict containment of `points`, reusing earlier answers for points
    /// that stayed within their distance to the hand surface since the last
    /// exact test.
    pub fn inside_cached(&self, points: &[Vec3], cache: &mut InsideCache) -> Vec<bool> {
        if cache.entries.len() != points.len() {
            cache.entries = vec![None; points.len()];
        }
        points
            .iter()
            .zip(cache.entries.iter_mut())
            .map(|(p, entry)| {
                if let Some(e) = entry {
                    if (p - e.at).norm() < e.free_radius {
                        return e.inside;
                    }
                }
                let inside = self.query.contains(p);
                let free_radius = self.query.closest_point(p).2;
                *entry = Some(CacheEntry {
                    at: *p,
                    inside,
                    free_radius,
                });
                inside
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct CacheEntry {
    at: Vec3,
    inside: bool,
    free_radius: f64,
}

/// Per-point memo for [`PreparedHand::inside_cached`].
#[derive(Debug, Clone, Default)]
pub struct InsideCache {
    entries: Vec<Option<CacheEntry>>,
}

impl InsideCache {
    /// Lower bound on the distance from point `i`, now at `p`, to the hand
    /// surface; 0 when unknown.
    pub fn surface_distance_bound(&self, i: usize, p: &Vec3) -> f64 {
        match self.entries.get(i) {
            Some(Some(e)) => (e.free_radius - (p - e.at).norm()).max(0.0),
            _ => 0.0,
        }
    }
}
