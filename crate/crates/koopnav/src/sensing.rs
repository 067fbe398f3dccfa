//! Synthetic LiDAR: samples noisy points off obstacle spheres, filters ground
//! and self returns, and clusters what remains into centroid + bounding-radius
//! observations.
//!
//! Points are drawn on the UAV-facing hemisphere of each obstacle, mimicking
//! self-occlusion of a scanning sensor. The resulting centroid bias toward the
//! UAV is conservative for avoidance and is absorbed by the tracker margin.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

/// World-frame point cloud with its sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub stamp: f64,
}

/// Cluster summary: mean point, bounding radius about the mean, member count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterObservation {
    pub centroid: Vector3<f64>,
    pub radius: f64,
    pub count: usize,
}

/// Sensor emulation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorSpec {
    pub range: f64,
    pub noise_sigma: f64,
    pub rays_per_obstacle: usize,
    pub ground_z_cut: f64,
    pub self_radius_cut: f64,
    pub link_dist: f64,
    pub min_cluster_size: usize,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            range: 20.0,
            noise_sigma: 0.01,
            rays_per_obstacle: 120,
            ground_z_cut: 0.05,
            self_radius_cut: 0.5,
            link_dist: 0.5,
            min_cluster_size: 3,
        }
    }
}

/// Samples one scan: points on the UAV-facing hemisphere of every obstacle
/// sphere within sensor range, perturbed by isotropic Gaussian noise.
pub fn sample_cloud<R: Rng>(
    uav_pos: Vector3<f64>,
    truth: &[(Vector3<f64>, f64)],
    spec: &SensorSpec,
    stamp: f64,
    rng: &mut R,
) -> PointCloud {
    let noise = Normal::new(0.0, spec.noise_sigma.max(0.0)).expect("valid sigma");
    let mut points = Vec::new();
    for &(center, radius) in truth {
        let to_uav = uav_pos - center;
        let dist = to_uav.norm();
        if dist > spec.range {
            continue;
        }
        // Degenerate geometry (UAV at the center): facing direction is moot.
        let facing = if dist > 1e-12 {
            to_uav / dist
        } else {
            Vector3::new(0.0, 0.0, 1.0)
        };
        for _ in 0..spec.rays_per_obstacle {
            let mut dir = random_unit_vector(rng);
            if dir.dot(&facing) < 0.0 {
                dir = -dir;
            }
            let jitter = Vector3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng));
            points.push(center + dir * radius + jitter);
        }
    }
    PointCloud { points, stamp }
}

fn random_unit_vector<R: Rng>(rng: &mut R) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        );
        let n = v.norm();
        if n > 1e-9 {
            return v / n;
        }
    }
}

/// Drops ground returns (z below the cut) and self returns (within the
/// self-radius of the UAV).
pub fn filter_cloud(cloud: &PointCloud, uav_pos: Vector3<f64>, spec: &SensorSpec) -> PointCloud {
    let points = cloud
        .points
        .iter()
        .filter(|p| p.z >= spec.ground_z_cut && (*p - uav_pos).norm() > spec.self_radius_cut)
        .copied()
        .collect();
    PointCloud {
        points,
        stamp: cloud.stamp,
    }
}

/// Partitions the cloud into connected components under "within `link_dist`",
/// discards components below `min_size`, and summarizes each survivor by its
/// mean point and the max distance from the mean to any member.
pub fn cluster(cloud: &PointCloud, link_dist: f64, min_size: usize) -> Vec<ClusterObservation> {
    assert!(link_dist > 0.0, "link_dist must be positive");
    let pts = &cloud.points;
    let n = pts.len();
    if n == 0 {
        return Vec::new();
    }

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = i;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }

    let link_sq = link_dist * link_dist;
    for i in 0..n {
        for j in (i + 1)..n {
            if (pts[i] - pts[j]).norm_squared() <= link_sq {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }

    // Group members by root, keeping first-appearance order for determinism.
    let mut order: Vec<usize> = Vec::new();
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut slot_of_root = vec![usize::MAX; n];
    for i in 0..n {
        let root = find(&mut parent, i);
        if slot_of_root[root] == usize::MAX {
            slot_of_root[root] = order.len();
            order.push(root);
            members.push(Vec::new());
        }
        members[slot_of_root[root]].push(i);
    }

    members
        .iter()
        .filter(|m| m.len() >= min_size.max(1))
        .map(|m| {
            let centroid = m.iter().map(|&i| pts[i]).sum::<Vector3<f64>>() / m.len() as f64;
            let radius = m
                .iter()
                .map(|&i| (pts[i] - centroid).norm())
                .fold(0.0, f64::max);
            ClusterObservation {
                centroid,
                radius,
                count: m.len(),
            }
        })
        .collect()
}
