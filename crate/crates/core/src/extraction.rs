//! Vehicle isolation: background subtraction, density clustering, and 2D
//! projection of the surviving cluster.

use std::collections::HashMap;

use crate::background::BackgroundBox;
use crate::error::{Error, Result};
use crate::geometry::{Point2, Point3, PointCloud, RigidTransform};

/// Density-clustering parameters.
#[derive(Debug, Clone)]
pub struct ClusterParams {
    /// Neighborhood radius, meters.
    pub epsilon: f64,
    /// Minimum neighborhood size (the point itself counts) for a core point.
    pub min_points: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            epsilon: 0.8,
            min_points: 5,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if self.min_points < 1 {
            return Err(Error::InvalidParameter(
                "min_points must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A cluster as indices into the input point list, sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cluster {
    pub members: Vec<usize>,
}

impl Cluster {
    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Density clustering of 3D points.
///
/// Core points have at least `min_points` neighbors within `epsilon`
/// (themselves included); clusters are the connected components of core
/// points, and each non-core point within reach joins the cluster of its
/// closest core. Noise points belong to no cluster. The induced partition is
/// independent of input order; cluster numbering follows the lowest member
/// index.
pub fn dbscan(points: &[Point3], params: &ClusterParams) -> Vec<Cluster> {
    let coords: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
    dbscan_impl(&coords, params)
}

/// Density clustering of 2D points (same metric, z fixed to 0).
pub fn dbscan_2d(points: &[Point2], params: &ClusterParams) -> Vec<Cluster> {
    let coords: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, 0.0]).collect();
    dbscan_impl(&coords, params)
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Uniform grid hash with cell size epsilon; neighborhood queries scan the
/// 27 surrounding cells. Output is exactly what a brute-force neighbor scan
/// would produce.
struct GridIndex<'a> {
    coords: &'a [[f64; 3]],
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
    eps: f64,
}

impl<'a> GridIndex<'a> {
    fn build(coords: &'a [[f64; 3]], eps: f64) -> Self {
        let mut cells: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, c) in coords.iter().enumerate() {
            cells.entry(Self::key(c, eps)).or_default().push(i);
        }
        Self { coords, cells, eps }
    }

    fn key(c: &[f64; 3], eps: f64) -> (i64, i64, i64) {
        (
            (c[0] / eps).floor() as i64,
            (c[1] / eps).floor() as i64,
            (c[2] / eps).floor() as i64,
        )
    }

    fn neighbors(&self, i: usize) -> Vec<usize> {
        let c = &self.coords[i];
        let (kx, ky, kz) = Self::key(c, self.eps);
        let eps2 = self.eps * self.eps;
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(bucket) = self.cells.get(&(kx + dx, ky + dy, kz + dz)) {
                        for &j in bucket {
                            if dist2(c, &self.coords[j]) <= eps2 {
                                out.push(j);
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = i;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            // Smaller index wins so roots are stable.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

fn dbscan_impl(coords: &[[f64; 3]], params: &ClusterParams) -> Vec<Cluster> {
    let n = coords.len();
    if n == 0 {
        return Vec::new();
    }
    let index = GridIndex::build(coords, params.epsilon);
    let neighborhoods: Vec<Vec<usize>> = (0..n).map(|i| index.neighbors(i)).collect();
    let core: Vec<bool> = neighborhoods
        .iter()
        .map(|nb| nb.len() >= params.min_points)
        .collect();

    let mut uf = UnionFind::new(n);
    for i in 0..n {
        if !core[i] {
            continue;
        }
        for &j in &neighborhoods[i] {
            if core[j] {
                uf.union(i, j);
            }
        }
    }

    // Attach each reachable border point to its closest core neighbor; ties
    // break on coordinates so the partition stays order-independent.
    let mut assignment: Vec<Option<usize>> = (0..n)
        .map(|i| if core[i] { Some(i) } else { None })
        .collect();
    for i in 0..n {
        if core[i] {
            continue;
        }
        let mut best: Option<(f64, [f64; 3], usize)> = None;
        for &j in &neighborhoods[i] {
            if !core[j] {
                continue;
            }
            let d = dist2(&coords[i], &coords[j]);
            let candidate = (d, coords[j], j);
            let better = match &best {
                None => true,
                Some((bd, bc, _)) => {
                    d < *bd
                        || (d == *bd
                            && (candidate.1[0], candidate.1[1], candidate.1[2])
                                < (bc[0], bc[1], bc[2]))
                }
            };
            if better {
                best = Some(candidate);
            }
        }
        if let Some((_, _, j)) = best {
            assignment[i] = Some(j);
        }
    }

    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for (i, anchor) in assignment.iter().enumerate() {
        if let Some(anchor) = anchor {
            let root = uf.find(*anchor);
            groups.entry(root).or_default().push(i);
        }
    }
    let mut clusters: Vec<Cluster> = groups
        .into_values()
        .map(|mut members| {
            members.sort_unstable();
            Cluster { members }
        })
        .collect();
    clusters.sort_by_key(|c| c.members[0]);
    clusters
}

/// Picks the largest cluster; ties break toward the lowest minimum member
/// index so the choice is deterministic.
pub fn select_vehicle_cluster(clusters: &[Cluster]) -> Result<&Cluster> {
    clusters
        .iter()
        .max_by(|a, b| {
            a.size()
                .cmp(&b.size())
                .then_with(|| b.members[0].cmp(&a.members[0]))
        })
        .ok_or(Error::NoVehicleDetected)
}

/// Aligns a raw frame into the ground frame, then drops ground points
/// (z ≤ θ_g) and points lying inside any inflated background box at or below
/// that box's height allowance. Returns the survivors in the aligned frame.
pub fn remove_ground_and_background(
    frame: &PointCloud,
    alignment: &RigidTransform,
    theta_g: f64,
    boxes: &[BackgroundBox],
) -> Vec<Point3> {
    frame
        .points
        .iter()
        .map(|p| alignment.apply(*p))
        .filter(|p| p.z > theta_g)
        .filter(|p| {
            !boxes
                .iter()
                .any(|b| p.z <= b.max_height + b.margin && b.contains(p.xy()))
        })
        .collect()
}

/// Projects ground-aligned points onto the z = 0 plane; duplicates retained.
pub fn project_to_ground(points: &[Point3]) -> Vec<Point2> {
    points.iter().map(|p| p.xy()).collect()
}
