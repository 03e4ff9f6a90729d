use crate::error::{Error, Result};
use crate::numerics::{distance, dot};
use crate::problem::AffineConstraint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiskObstacle {
    pub center: [f64; 2],
    pub radius: f64,
}

impl DiskObstacle {
    pub fn new(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidArgument("obstacles need a finite center and positive radius".into()));
        }
        Ok(Self { center, radius })
    }

    /// Distance from `p` to the disk boundary (negative inside).
    pub fn clearance(&self, p: &[f64]) -> f64 {
        distance(p, &self.center) - self.radius
    }
}

/// Fails unless every pair of disks is strictly separated.
pub fn check_disjoint(obstacles: &[DiskObstacle]) -> Result<()> {
    for (i, a) in obstacles.iter().enumerate() {
        for b in &obstacles[i + 1..] {
            if distance(&a.center, &b.center) <= a.radius + b.radius {
                return Err(Error::InvalidArgument(format!(
                    "obstacles at {:?} and {:?} intersect",
                    a.center, b.center
                )));
            }
        }
    }
    Ok(())
}

/// `aᵀy ≤ b` separating the robot's position set from one obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalWorkspaceHalfspace {
    pub a: [f64; 2],
    pub b: f64,
    pub obstacle: usize,
}

impl LocalWorkspaceHalfspace {
    /// `aᵀy − b`, nonpositive inside.
    pub fn value(&self, y: &[f64]) -> f64 {
        dot(&self.a, y) - self.b
    }

    pub fn to_constraint(&self) -> AffineConstraint {
        AffineConstraint::halfspace(self.a.to_vec(), self.b)
    }
}

/// Halfspaces of the collision-free local workspace around a robot of
/// radius `r` centred at `y_c`. The reported failure time is NaN; callers
/// that know the time attach it with [`Error::with_time`].
pub fn local_workspace_halfspaces(y_c: &[f64], obstacles: &[DiskObstacle], r: f64) -> Result<Vec<LocalWorkspaceHalfspace>> {
    if y_c.len() != 2 {
        return Err(Error::Dimension(format!("robot position must be planar, got {} entries", y_c.len())));
    }
    obstacles
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let d = distance(y_c, &o.center);
            if !(d > r + o.radius) {
                return Err(Error::InCollision { t: f64::NAN, obstacle: i });
            }
            let a = [o.center[0] - y_c[0], o.center[1] - y_c[1]];
            let theta = 0.5 - (o.radius * o.radius - r * r) / (2.0 * d * d);
            let point: Vec<f64> = (0..2)
                .map(|k| theta * o.center[k] + (1.0 - theta) * y_c[k] - r * a[k] / d)
                .collect();
            Ok(LocalWorkspaceHalfspace {
                a,
                b: dot(&a, &point),
                obstacle: i,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn hand_evaluated_halfspace() {
        let obs = [DiskObstacle::new([4.0, 0.0], 1.0).unwrap()];
        let h = local_workspace_halfspaces(&[0.0, 0.0], &obs, 0.2).unwrap();
        assert_eq!(h[0].a, [4.0, 0.0]);
        assert!((h[0].b - 6.72).abs() < 1e-12);
        assert!(h[0].value(&[0.0, 0.0]) < 0.0);
    }

    #[test]
    fn margin_at_the_robot_matches_closed_form() {
        let obs = [DiskObstacle::new([1.0, 2.0], 0.7).unwrap()];
        let yc = [-0.5, 0.3];
        let h = local_workspace_halfspaces(&yc, &obs, 0.2).unwrap()[0];
        let d = distance(&yc, &obs[0].center);
        let expected = ((d - 0.2).powi(2) - 0.49) / 2.0;
        assert!((-h.value(&yc) - expected).abs() < 1e-12);
    }

    #[test]
    fn mirror_symmetry() {
        let obs = [DiskObstacle::new([3.0, 1.0], 0.5).unwrap(), DiskObstacle::new([-3.0, 1.0], 0.5).unwrap()];
        let h = local_workspace_halfspaces(&[0.0, 1.0], &obs, 0.2).unwrap();
        assert_eq!(h[0].a[0], -h[1].a[0]);
        assert_eq!(h[0].a[1], h[1].a[1]);
        // Reflecting the first halfspace about x = 0 gives the second.
        for p in [[1.0, 1.0], [2.2, 1.3], [-2.2, 0.4]] {
            let mirrored = [-p[0], p[1]];
            assert!((h[0].value(&p) - h[1].value(&mirrored)).abs() < 1e-12);
        }
    }

    #[test]
    fn collision_is_reported() {
        let obs = [DiskObstacle::new([1.0, 0.0], 0.85).unwrap()];
        assert!(matches!(
            local_workspace_halfspaces(&[0.0, 0.0], &obs, 0.2),
            Err(Error::InCollision { obstacle: 0, .. })
        ));
    }

    #[test]
    fn robot_ball_lies_in_the_uneroded_workspace() {
        // The returned halfspaces are the local workspace shrunk by r, so
        // the robot's own ball satisfies them only after growing each one
        // back by r‖a‖. Points sampled in the shrunk set must keep their
        // whole ball clear of every obstacle.
        let mut rng = StdRng::seed_from_u64(0);
        let mut checked = 0;
        while checked < 200 {
            let r = rng.random_range(0.05..0.5);
            let obs: Vec<DiskObstacle> = (0..3)
                .map(|_| DiskObstacle::new([rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)], rng.random_range(0.1..1.0)).unwrap())
                .collect();
            let yc = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
            let Ok(hs) = local_workspace_halfspaces(&yc, &obs, r) else { continue };
            checked += 1;
            assert!(hs.iter().all(|h| h.value(&yc) <= 1e-12));
            for k in 0..360 {
                let ang = k as f64 * std::f64::consts::TAU / 360.0;
                let p = [yc[0] + r * ang.cos(), yc[1] + r * ang.sin()];
                for h in &hs {
                    let grown = h.value(&p) - r * distance(&h.a, &[0.0, 0.0]);
                    assert!(grown <= 1e-12, "ball point outside the local workspace");
                }
            }
            for _ in 0..50 {
                let y = [yc[0] + rng.random_range(-2.0..2.0), yc[1] + rng.random_range(-2.0..2.0)];
                if hs.iter().any(|h| h.value(&y) > 0.0) {
                    continue;
                }
                for o in &obs {
                    assert!(o.clearance(&y) >= r - 1e-12, "admissible position collides");
                }
            }
        }
    }

    #[test]
    fn halfspace_excludes_the_inflated_obstacle() {
        // Every point of an obstacle inflated by r violates its halfspace,
        // so positions in the local workspace keep the robot clear.
        let obs = [DiskObstacle::new([2.0, -1.0], 0.6).unwrap()];
        let r = 0.2;
        let h = local_workspace_halfspaces(&[0.0, 0.0], &obs, r).unwrap()[0];
        for k in 0..360 {
            let ang = k as f64 * std::f64::consts::TAU / 360.0;
            let p = [2.0 + (0.6 + r) * ang.cos(), -1.0 + (0.6 + r) * ang.sin()];
            assert!(h.value(&p) >= -1e-12);
        }
    }

    #[test]
    fn disjointness() {
        let a = DiskObstacle::new([0.0, 0.0], 1.0).unwrap();
        let b = DiskObstacle::new([1.5, 0.0], 1.0).unwrap();
        let c = DiskObstacle::new([3.0, 0.0], 0.5).unwrap();
        assert!(check_disjoint(&[a, c]).is_ok());
        assert!(check_disjoint(&[a, b]).is_err());
    }
}
