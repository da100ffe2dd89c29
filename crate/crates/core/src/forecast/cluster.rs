//! Seeded k-means over station coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng64;

pub const MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Cluster id per station. Ids are numbered by first appearance in
    /// station order.
    pub labels: Vec<usize>,
    pub centroids: Vec<[f64; 2]>,
}

impl ClusterAssignment {
    pub fn cluster_count(&self) -> usize {
        self.centroids.len()
    }

    pub fn members(&self, cluster: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == cluster).collect()
    }

    /// Every station in one cluster.
    pub fn single(coords: &[[f64; 2]]) -> Self {
        ClusterAssignment {
            labels: vec![0; coords.len()],
            centroids: vec![centroid(coords.iter())],
        }
    }

    /// Sum of squared distances from stations to their centroid.
    pub fn inertia(&self, coords: &[[f64; 2]]) -> f64 {
        coords.iter().zip(&self.labels).map(|(p, &l)| sq_dist(p, &self.centroids[l])).sum()
    }
}

fn sq_dist(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn centroid<'a>(points: impl Iterator<Item = &'a [f64; 2]>) -> [f64; 2] {
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for p in points {
        sx += p[0];
        sy += p[1];
        n += 1;
    }
    if n == 0 {
        [0.0, 0.0]
    } else {
        [sx / n as f64, sy / n as f64]
    }
}

fn nearest(p: &[f64; 2], centers: &[[f64; 2]]) -> usize {
    let mut best = 0;
    for (c, center) in centers.iter().enumerate().skip(1) {
        if sq_dist(p, center) < sq_dist(p, &centers[best]) {
            best = c;
        }
    }
    best
}

fn seed_centers(coords: &[[f64; 2]], k: usize, rng: &mut Rng64) -> Vec<[f64; 2]> {
    let n = coords.len();
    let mut chosen = vec![rng.below(n)];
    while chosen.len() < k {
        let weights: Vec<f64> = coords
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if chosen.contains(&i) {
                    0.0
                } else {
                    chosen.iter().map(|&c| sq_dist(p, &coords[c])).fold(f64::INFINITY, f64::min)
                }
            })
            .collect();
        let next = rng.categorical(&weights).unwrap_or_else(|| {
            // every remaining point coincides with a center
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.below(free.len())]
        });
        chosen.push(next);
    }
    chosen.into_iter().map(|i| coords[i]).collect()
}

/// Nearest-center labels; an empty cluster takes the point farthest from
/// its center among clusters that can spare one.
fn assign(coords: &[[f64; 2]], centers: &[[f64; 2]]) -> Vec<usize> {
    let mut labels: Vec<usize> = coords.iter().map(|p| nearest(p, centers)).collect();
    for c in 0..centers.len() {
        if labels.contains(&c) {
            continue;
        }
        let far = (0..coords.len())
            .filter(|&i| labels.iter().filter(|&&l| l == labels[i]).count() > 1)
            .max_by(|&a, &b| sq_dist(&coords[a], &centers[labels[a]]).total_cmp(&sq_dist(&coords[b], &centers[labels[b]])));
        if let Some(i) = far {
            labels[i] = c;
        }
    }
    labels
}

/// Groups stations into `k` spatial clusters with k-means++ seeding and at
/// most [`MAX_ITERATIONS`] Lloyd iterations.
pub fn cluster_stations(coords: &[[f64; 2]], k: usize, seed: u64) -> Result<ClusterAssignment> {
    let n = coords.len();
    if k == 0 {
        return Err(Error::validation("k", "must be positive"));
    }
    if k > n {
        return Err(Error::validation("k", format!("{k} clusters for {n} stations")));
    }
    if coords.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("station coordinates".into()));
    }
    let mut rng = Rng64::new(seed);
    let mut centers = seed_centers(coords, k, &mut rng);
    let mut labels = assign(coords, &centers);
    for _ in 0..MAX_ITERATIONS {
        for (c, center) in centers.iter_mut().enumerate() {
            *center = centroid(coords.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| p));
        }
        let next = assign(coords, &centers);
        if next == labels {
            break;
        }
        labels = next;
    }

    let mut remap = vec![usize::MAX; k];
    let mut order = Vec::with_capacity(k);
    for &l in &labels {
        if remap[l] == usize::MAX {
            remap[l] = order.len();
            order.push(l);
        }
    }
    let labels: Vec<usize> = labels.iter().map(|&l| remap[l]).collect();
    let centroids = (0..order.len())
        .map(|c| centroid(coords.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| p)))
        .collect();
    Ok(ClusterAssignment { labels, centroids })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn within_variance(coords: &[[f64; 2]], labels: &[usize], k: usize) -> f64 {
        (0..k)
            .map(|c| {
                let pts: Vec<&[f64; 2]> = coords.iter().zip(labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
                let m = centroid(pts.iter().copied());
                pts.iter().map(|p| sq_dist(p, &m)).sum::<f64>()
            })
            .sum()
    }

    /// Best split into two non-empty groups by exhaustive enumeration.
    fn best_two_partition(coords: &[[f64; 2]]) -> Vec<usize> {
        let n = coords.len();
        let mut best = (f64::INFINITY, vec![]);
        for mask in 1u32..(1 << (n - 1)) {
            let labels: Vec<usize> = (0..n).map(|i| if i > 0 && mask & (1 << (i - 1)) != 0 { 1 } else { 0 }).collect();
            let v = within_variance(coords, &labels, 2);
            if v < best.0 {
                best = (v, labels);
            }
        }
        best.1
    }

    #[test]
    fn separated_clouds_match_exhaustive_search() {
        let mut rng = Rng64::new(4);
        let mut coords = Vec::new();
        for i in 0..10 {
            let (cx, cy) = if i % 3 == 0 { (0.0, 0.0) } else { (20.0, 15.0) };
            coords.push([cx + rng.uniform(-1.0, 1.0), cy + rng.uniform(-1.0, 1.0)]);
        }
        let got = cluster_stations(&coords, 2, 9).unwrap();
        let want = best_two_partition(&coords);
        let same = got.labels == want;
        let flipped = got.labels.iter().zip(&want).all(|(a, b)| a != b);
        assert!(same || flipped, "{:?} vs {:?}", got.labels, want);
        assert_eq!(got.labels[0], 0);
    }

    #[test]
    fn k_extremes() {
        let coords = [[0.0, 0.0], [1.0, 0.0], [5.0, 5.0], [9.0, 1.0]];
        let one = cluster_stations(&coords, 1, 0).unwrap();
        assert_eq!(one.labels, vec![0; 4]);
        assert_eq!(one, ClusterAssignment::single(&coords));
        let all = cluster_stations(&coords, 4, 0).unwrap();
        assert_eq!(all.labels, vec![0, 1, 2, 3]);
        assert_eq!(all.inertia(&coords), 0.0);
    }

    #[test]
    fn bad_k() {
        let coords = [[0.0, 0.0], [1.0, 0.0]];
        assert!(cluster_stations(&coords, 0, 0).unwrap_err().is_validation());
        assert!(cluster_stations(&coords, 3, 0).is_err());
    }

    #[test]
    fn duplicate_points_still_fill_k_clusters() {
        let coords = [[1.0, 1.0]; 4];
        let a = cluster_stations(&coords, 3, 1).unwrap();
        assert_eq!(a.cluster_count(), 3);
        for c in 0..3 {
            assert!(!a.members(c).is_empty());
        }
    }

    proptest! {
        #[test]
        fn deterministic_and_complete(
            pts in proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..20),
            k in 1usize..6,
            seed in any::<u64>(),
        ) {
            let coords: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
            let k = k.min(coords.len());
            let a = cluster_stations(&coords, k, seed).unwrap();
            let b = cluster_stations(&coords, k, seed).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.labels.len(), coords.len());
            prop_assert!(a.labels.iter().all(|&l| l < a.cluster_count()));
            prop_assert!(a.cluster_count() <= k);
        }
    }
}
