//! Grasp matrix and the force-closure part of the simulation loss.

use nalgebra::{DMatrix, Matrix3, Matrix6, SymmetricEigen, Vector6};

use crate::error::{Error, Result};
use crate::geometry::{Mesh, PointGrid};
use crate::hand::ContactLabels;
use crate::Vec3;

/// Loss value when no hand vertex is in contact.
pub const NO_CONTACT_PENALTY: f64 = 1e3;

/// Cross-product matrix: `skew(g) * w == g × w`.
pub fn skew(g: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -g.z, g.y, g.z, 0.0, -g.x, -g.y, g.x, 0.0)
}

/// The 6×3N grasp matrix `[I … I; [g₁]× … [g_N]×]`.
pub fn grasp_matrix(contacts: &[Vec3]) -> Result<DMatrix<f64>> {
    if contacts.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut g = DMatrix::zeros(6, 3 * contacts.len());
    for (i, c) in contacts.iter().enumerate() {
        g.fixed_view_mut::<3, 3>(0, 3 * i).copy_from(&Matrix3::identity());
        g.fixed_view_mut::<3, 3>(3, 3 * i).copy_from(&skew(c));
    }
    Ok(g)
}

/// `G Gᵀ` from the contact sums: `[N I, −[Σg]×; [Σg]×, Σ(|g|² I − g gᵀ)]`.
pub fn grasp_gram(contacts: &[Vec3]) -> Matrix6<f64> {
    let mut sum = Vec3::zeros();
    let mut second = Matrix3::zeros();
    let mut sq = 0.0;
    for g in contacts {
        sum += g;
        second += g * g.transpose();
        sq += g.norm_squared();
    }
    let s = skew(&sum);
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(Matrix3::identity() * contacts.len() as f64));
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&s.transpose());
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&s);
    m.fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&(Matrix3::identity() * sq - second));
    m
}

/// Net wrench of unit contact normals, `G n̂` = (Σ n, Σ g × n).
pub fn normal_wrench(contacts: &[Vec3], normals: &[Vec3]) -> Vector6<f64> {
    let mut f = Vec3::zeros();
    let mut t = Vec3::zeros();
    for (g, n) in contacts.iter().zip(normals) {
        f += n;
        t += g.cross(n);
    }
    Vector6::new(f.x, f.y, f.z, t.x, t.y, t.z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureTerms {
    /// Smallest eigenvalue of G Gᵀ.
    pub lambda_min: f64,
    /// max(0, ε − λ_min): zero exactly when G Gᵀ ⪰ ε I.
    pub hinge: f64,
    /// ‖G n̂‖₂.
    pub wrench: f64,
}

/// Force-closure terms for contacts expressed relative to the object center.
pub fn closure_terms(contacts: &[Vec3], normals: &[Vec3], epsilon: f64) -> ClosureTerms {
    let eig = SymmetricEigen::new(grasp_gram(contacts));
    let lambda_min = eig.eigenvalues.min();
    ClosureTerms {
        lambda_min,
        hinge: (epsilon - lambda_min).max(0.0),
        wrench: normal_wrench(contacts, normals).norm(),
    }
}

/// Gradient of `hinge + wrench` with respect to the object center `c`, for
/// contacts given as `g_i − c`. At a repeated smallest eigenvalue the
/// eigenvalue gradient is averaged over the eigenspace.
pub fn closure_center_gradient(contacts: &[Vec3], normals: &[Vec3], epsilon: f64) -> Vec3 {
    let mut grad = Vec3::zeros();
    let eig = SymmetricEigen::new(grasp_gram(contacts));
    let lambda_min = eig.eigenvalues.min();
    if lambda_min < epsilon {
        let scale = eig.eigenvalues.amax().max(1.0);
        let space: Vec<usize> = (0..6)
            .filter(|&k| eig.eigenvalues[k] - lambda_min <= 1e-9 * scale)
            .collect();
        // uᵀ G Gᵀ u = Σ |a + b × g_i|² for u = (a, b); its gradient in c
        // (with g_i = p_i − c) is −Σ 2 (a + b × g_i) × b
        let n = contacts.len() as f64;
        let sum: Vec3 = contacts.iter().sum();
        let mut d_lambda = Vec3::zeros();
        for &k in &space {
            let u = eig.eigenvectors.column(k);
            let a = Vec3::new(u[0], u[1], u[2]);
            let b = Vec3::new(u[3], u[4], u[5]);
            let w_sum = a * n + b.cross(&sum);
            d_lambda -= 2.0 * w_sum.cross(&b);
        }
        // hinge = ε − λ_min
        grad -= d_lambda / space.len() as f64;
    }
    let w = normal_wrench(contacts, normals);
    let norm = w.norm();
    if norm > 0.0 {
        let f = Vec3::new(w[0], w[1], w[2]);
        let t = Vec3::new(w[3], w[4], w[5]);
        grad += t.cross(&f) / norm;
    }
    grad
}

/// Simulation loss for labeled contacts on a posed object: closure hinge +
/// ‖G n̂‖ + `lambda_dist` × Σ distance from each contact to the nearest object
/// vertex. Contacts are taken relative to the object's vertex centroid.
///
/// This is the unnormalized form; the fitting loss divides it by the contact
/// count (with ε scaled to match) so dense hand meshes do not dominate.
pub fn sim_loss(
    contacts: &ContactLabels,
    normals: &[Vec3],
    object: &Mesh,
    epsilon: f64,
    lambda_dist: f64,
) -> Result<f64> {
    if contacts.points.is_empty() {
        return Ok(NO_CONTACT_PENALTY);
    }
    if normals.len() != contacts.points.len() {
        return Err(Error::Contract(format!(
            "{} contact normals for {} contacts",
            normals.len(),
            contacts.points.len()
        )));
    }
    let c = object.centroid();
    let rel: Vec<Vec3> = contacts.points.iter().map(|g| g - c).collect();
    let terms = closure_terms(&rel, normals, epsilon);
    let grid = PointGrid::new(object.vertices())?;
    let dist: f64 = contacts.points.iter().map(|g| grid.nearest(g).0).sum();
    Ok(terms.hinge + terms.wrench + lambda_dist * dist)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_min_eig(contacts: &[Vec3]) -> f64 {
        let g = grasp_matrix(contacts).unwrap();
        let m = &g * g.transpose();
        SymmetricEigen::new(m).eigenvalues.min()
    }

    #[test]
    fn skew_examples() {
        let m = skew(&Vec3::x());
        assert_eq!(m, Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0));
        let g = Vec3::new(0.3, -2.0, 1.5);
        assert!((skew(&g) * g).norm() < 1e-15);
        assert_eq!(skew(&g) + skew(&g).transpose(), Matrix3::zeros());
        let w = Vec3::new(1.0, 4.0, -2.0);
        assert!((skew(&g) * w - g.cross(&w)).norm() < 1e-14);
    }

    #[test]
    fn single_contact_at_origin() {
        let g = grasp_matrix(&[Vec3::zeros()]).unwrap();
        let m = &g * g.transpose();
        let mut expected = Matrix6::zeros();
        for k in 0..3 {
            expected[(k, k)] = 1.0;
        }
        assert_eq!(m, nalgebra::DMatrix::from_iterator(6, 6, expected.iter().copied()));
        assert_eq!(grasp_gram(&[Vec3::zeros()]), expected);
    }

    #[test]
    fn gram_matches_dense_product() {
        let c = [Vec3::new(1.0, 2.0, -0.5), Vec3::new(-0.3, 0.1, 0.9), Vec3::new(0.0, -1.2, 0.4)];
        let g = grasp_matrix(&c).unwrap();
        let dense = &g * g.transpose();
        let fast = grasp_gram(&c);
        for r in 0..6 {
            for k in 0..6 {
                assert!((dense[(r, k)] - fast[(r, k)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn antipodal_pair_is_degenerate() {
        let c = [Vec3::x(), -Vec3::x()];
        let eig = SymmetricEigen::new(grasp_gram(&c));
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        let expected = [0.0, 2.0, 2.0, 2.0, 2.0, 2.0];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(dense_min_eig(&c).abs() < 1e-12);
        let w = normal_wrench(&c, &[-Vec3::x(), Vec3::x()]);
        assert_eq!(w.norm(), 0.0);
    }

    #[test]
    fn tetrahedral_contacts_close() {
        let s = 1.0 / 3f64.sqrt();
        let c = [
            Vec3::new(1.0, 1.0, 1.0) * s,
            Vec3::new(1.0, -1.0, -1.0) * s,
            Vec3::new(-1.0, 1.0, -1.0) * s,
            Vec3::new(-1.0, -1.0, 1.0) * s,
        ];
        let n: Vec<Vec3> = c.iter().map(|g| -g).collect();
        let t = closure_terms(&c, &n, 1e-2);
        assert!(t.wrench < 1e-9);
        assert!(t.lambda_min > 0.0);
        assert!((t.lambda_min - dense_min_eig(&c)).abs() < 1e-12);
        assert_eq!(t.hinge, 0.0);
    }

    #[test]
    fn single_contact_hinge_is_epsilon() {
        let t = closure_terms(&[Vec3::new(0.2, 0.1, -0.3)], &[Vec3::z()], 1e-2);
        assert!(t.lambda_min.abs() < 1e-12);
        assert!((t.hinge - 1e-2).abs() < 1e-12);
    }

    #[test]
    fn center_gradient_matches_differences() {
        let g = [
            Vec3::new(1.0, 0.2, 0.1),
            Vec3::new(-0.9, 0.1, 0.3),
            Vec3::new(0.1, 1.1, -0.2),
        ];
        let n = [Vec3::x(), -Vec3::y(), Vec3::new(0.0, 0.6, 0.8)];
        let eps = 0.5;
        let f = |c: Vec3| {
            let rel: Vec<Vec3> = g.iter().map(|p| p - c).collect();
            let t = closure_terms(&rel, &n, eps);
            t.hinge + t.wrench
        };
        let c0 = Vec3::new(0.05, -0.1, 0.2);
        let rel: Vec<Vec3> = g.iter().map(|p| p - c0).collect();
        let an = closure_center_gradient(&rel, &n, eps);
        let h = 1e-6;
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            let fd = (f(c0 + e) - f(c0 - e)) / (2.0 * h);
            assert!((fd - an[k]).abs() < 1e-6 * fd.abs().max(1.0), "{k}: {fd} vs {}", an[k]);
        }
    }

    #[test]
    fn sim_loss_cases() {
        let sphere = crate::geometry::shapes::sphere(1.0, 0.3);
        let labels = ContactLabels {
            in_contact: vec![],
            indices: vec![],
            points: vec![],
        };
        assert_eq!(sim_loss(&labels, &[], &sphere, 1e-2, 0.1).unwrap(), NO_CONTACT_PENALTY);
        // contacts on object vertices: distance term vanishes
        let pts: Vec<Vec3> = sphere.vertices().iter().step_by(7).copied().collect();
        let normals: Vec<Vec3> = pts.iter().map(|p| -p.normalize()).collect();
        let labels = ContactLabels {
            in_contact: vec![],
            indices: (0..pts.len()).collect(),
            points: pts.clone(),
        };
        let with = sim_loss(&labels, &normals, &sphere, 1e-2, 0.1).unwrap();
        let without = sim_loss(&labels, &normals, &sphere, 1e-2, 0.0).unwrap();
        assert_eq!(with, without);
    }
}
