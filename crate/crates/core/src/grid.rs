//! Cylindrical node grid on which insult profiles and field maps live.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Regular node grid on the unrolled vessel surface.
///
/// Axial nodes run `z_i = i * length / (n_z - 1)` for `i = 0..n_z`, so the
/// first and last rows sit exactly on the vessel ends. Circumferential nodes
/// run `theta_j = 2*pi*j / n_theta` and wrap: node `n_theta - 1` is adjacent
/// to node 0. Row-major storage is z-outer, theta-inner throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylindricalGrid {
    /// Axial node count.
    pub n_z: usize,
    /// Circumferential node count.
    pub n_theta: usize,
    /// Vessel length in mm.
    pub length: f64,
    /// Inner radius in mm.
    pub radius: f64,
}

impl CylindricalGrid {
    pub fn new(n_z: usize, n_theta: usize, length: f64, radius: f64) -> Result<Self> {
        if n_z < 3 {
            return Err(CoreError::parameter(format!("n_z must be >= 3, got {n_z}")));
        }
        if n_theta < 4 {
            return Err(CoreError::parameter(format!(
                "n_theta must be >= 4, got {n_theta}"
            )));
        }
        if !(length > 0.0) || !(radius > 0.0) {
            return Err(CoreError::parameter(
                "grid length and radius must be positive",
            ));
        }
        Ok(CylindricalGrid {
            n_z,
            n_theta,
            length,
            radius,
        })
    }

    /// Standard 21 x 20 grid of the 15 mm / 0.647 mm mouse aorta segment.
    pub fn standard() -> Self {
        CylindricalGrid {
            n_z: 21,
            n_theta: 20,
            length: 15.0,
            radius: 0.647,
        }
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.n_z * self.n_theta
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Axial coordinate of row `i`, in mm.
    pub fn z(&self, i: usize) -> f64 {
        self.length * i as f64 / (self.n_z - 1) as f64
    }

    /// Circumferential coordinate of column `j`, in radians.
    pub fn theta(&self, j: usize) -> f64 {
        std::f64::consts::TAU * j as f64 / self.n_theta as f64
    }

    /// Flat index of node `(i, j)` in row-major (z outer, theta inner) order.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }

    /// Inverse of [`CylindricalGrid::index`].
    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx / self.n_theta, idx % self.n_theta)
    }

    /// Flat indices of the first and last axial rows (the vessel ends).
    pub fn boundary_indices(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(2 * self.n_theta);
        for j in 0..self.n_theta {
            out.push(self.index(0, j));
        }
        for j in 0..self.n_theta {
            out.push(self.index(self.n_z - 1, j));
        }
        out
    }

    /// Flat indices of all interior rows, in row-major order.
    pub fn interior_indices(&self) -> Vec<usize> {
        (self.n_theta..(self.n_z - 1) * self.n_theta).collect()
    }
}

/// Wrapped circumferential offset `|dtheta|` reduced to `[0, pi]`.
pub fn wrap_angle_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).abs() % std::f64::consts::TAU;
    d.min(std::f64::consts::TAU - d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn node_coordinates_span_the_domain() {
        let g = CylindricalGrid::standard();
        assert_eq!(g.z(0), 0.0);
        assert_eq!(g.z(g.n_z - 1), g.length);
        assert_eq!(g.theta(0), 0.0);
        assert!(g.theta(g.n_theta - 1) < TAU);
        assert_eq!(g.len(), 420);
    }

    #[test]
    fn index_roundtrip() {
        let g = CylindricalGrid::standard();
        for idx in 0..g.len() {
            let (i, j) = g.coords(idx);
            assert_eq!(g.index(i, j), idx);
        }
    }

    #[test]
    fn boundary_and_interior_partition_the_grid() {
        let g = CylindricalGrid::new(5, 4, 10.0, 1.0).unwrap();
        let b = g.boundary_indices();
        let a = g.interior_indices();
        assert_eq!(b.len() + a.len(), g.len());
        let mut all: Vec<usize> = b.iter().chain(a.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..g.len()).collect::<Vec<_>>());
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(CylindricalGrid::new(2, 20, 15.0, 0.647).is_err());
        assert!(CylindricalGrid::new(21, 3, 15.0, 0.647).is_err());
        assert!(CylindricalGrid::new(21, 20, 0.0, 0.647).is_err());
    }

    #[test]
    fn wrapped_distance_is_periodic_and_bounded() {
        assert!((wrap_angle_distance(0.1, TAU - 0.1) - 0.2).abs() < 1e-15);
        assert!((wrap_angle_distance(0.0, PI) - PI).abs() < 1e-15);
        assert_eq!(wrap_angle_distance(1.0, 1.0), 0.0);
    }
}
