//! Static-background handling on the ground-aligned scan: height-threshold
//! segmentation, reusable 2D background boxes, and the point-in-polygon test
//! that filters later frames.

use crate::error::{Error, Result};
use crate::extraction::{dbscan, ClusterParams};
use crate::geometry::{Point2, Point3, PointCloud};
use crate::lshape::{fit_box, fit_vehicle_box, LShapeParams};

/// Ground/static split of a ground-aligned scan at the height threshold θ_g.
#[derive(Debug, Clone)]
pub struct HeightSegmentation {
    /// Points with z ≤ θ_g.
    pub ground: Vec<Point3>,
    /// Points above θ_g, attributed to static background objects.
    pub statics: Vec<Point3>,
    pub theta_g: f64,
}

/// Splits an aligned scan by height. A point at exactly θ_g counts as ground.
pub fn segment_by_height(aligned: &PointCloud, theta_g: f64) -> HeightSegmentation {
    let (ground, statics) = aligned.points.iter().partition(|p| p.z <= theta_g);
    HeightSegmentation {
        ground,
        statics,
        theta_g,
    }
}

/// A learned background object: its 2D outline in the ground-aligned frame,
/// the height of its tallest point, and the inflation used for membership
/// tests so sensor noise on background returns does not leak foreground.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundBox {
    /// Simple polygon, counter-clockwise, at least 3 vertices.
    pub polygon: Vec<Point2>,
    pub max_height: f64,
    pub margin: f64,
}

impl BackgroundBox {
    /// Membership against the polygon inflated by `margin`: inside, or within
    /// `margin` of the boundary.
    pub fn contains(&self, p: Point2) -> bool {
        match point_in_polygon(p, &self.polygon) {
            Ok(true) => true,
            Ok(false) => self.margin > 0.0 && boundary_distance(p, &self.polygon) <= self.margin,
            Err(_) => false,
        }
    }
}

/// Crossing-number test; points exactly on an edge count as inside, which is
/// the conservative call when the polygon marks background to be removed.
pub fn point_in_polygon(p: Point2, polygon: &[Point2]) -> Result<bool> {
    if polygon.len() < 3 {
        return Err(Error::MalformedPolygon(polygon.len()));
    }
    for i in 0..polygon.len() {
        let a = polygon[i];
        let b = polygon[(i + 1) % polygon.len()];
        if on_segment(p, a, b) {
            return Ok(true);
        }
    }
    let mut inside = false;
    for i in 0..polygon.len() {
        let a = polygon[i];
        let b = polygon[(i + 1) % polygon.len()];
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    Ok(inside)
}

fn on_segment(p: Point2, a: Point2, b: Point2) -> bool {
    let ab = Point2::new(b.x - a.x, b.y - a.y);
    let ap = Point2::new(p.x - a.x, p.y - a.y);
    let len2 = ab.x * ab.x + ab.y * ab.y;
    if len2 == 0.0 {
        return p.distance(a) <= 1e-12;
    }
    let cross = ab.x * ap.y - ab.y * ap.x;
    let perp = cross.abs() / len2.sqrt();
    if perp > 1e-12 * (1.0 + ap.x.hypot(ap.y)) {
        return false;
    }
    let t = (ab.x * ap.x + ab.y * ap.y) / len2;
    (-1e-12..=1.0 + 1e-12).contains(&t)
}

fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = Point2::new(b.x - a.x, b.y - a.y);
    let ap = Point2::new(p.x - a.x, p.y - a.y);
    let len2 = ab.x * ab.x + ab.y * ab.y;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((ab.x * ap.x + ab.y * ap.y) / len2).clamp(0.0, 1.0);
    p.distance(Point2::new(a.x + t * ab.x, a.y + t * ab.y))
}

fn boundary_distance(p: Point2, polygon: &[Point2]) -> f64 {
    (0..polygon.len())
        .map(|i| point_segment_distance(p, polygon[i], polygon[(i + 1) % polygon.len()]))
        .fold(f64::INFINITY, f64::min)
}

/// Background-box extraction parameters.
#[derive(Debug, Clone)]
pub struct BackgroundParams {
    /// Clusters below this size are clutter, not background objects.
    pub min_cluster_size: usize,
    /// Inflation margin applied to each learned polygon, meters.
    pub margin: f64,
}

impl Default for BackgroundParams {
    fn default() -> Self {
        Self {
            min_cluster_size: 10,
            margin: 0.2,
        }
    }
}

impl BackgroundParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_cluster_size < 1 {
            return Err(Error::InvalidParameter(
                "min_cluster_size must be at least 1".into(),
            ));
        }
        if self.margin < 0.0 {
            return Err(Error::InvalidParameter("margin must not be negative".into()));
        }
        Ok(())
    }
}

/// Clusters the static points, fits an oriented box around each sufficiently
/// large cluster, and returns the boxes with the cluster's peak height.
/// Clusters whose silhouette defeats the L-shape sweep fall back to an
/// axis-aligned box; nothing is dropped besides undersized clusters.
pub fn extract_background_boxes(
    static_points: &[Point3],
    cluster_params: &ClusterParams,
    lshape_params: &LShapeParams,
    params: &BackgroundParams,
) -> Vec<BackgroundBox> {
    if static_points.is_empty() {
        return Vec::new();
    }
    let clusters = dbscan(static_points, cluster_params);
    clusters
        .iter()
        .filter(|c| c.size() >= params.min_cluster_size)
        .map(|c| {
            let pts2: Vec<Point2> = c.members.iter().map(|&i| static_points[i].xy()).collect();
            let max_height = c
                .members
                .iter()
                .map(|&i| static_points[i].z)
                .fold(f64::NEG_INFINITY, f64::max);
            let bbox = if pts2.len() >= 3 {
                match fit_vehicle_box(&pts2, lshape_params) {
                    Ok(fit) => fit.bbox,
                    Err(_) => fit_box(&pts2, 0.0).bbox,
                }
            } else {
                fit_box(&pts2, 0.0).bbox
            };
            BackgroundBox {
                polygon: bbox.corners().to_vec(),
                max_height,
                margin: params.margin,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_square() -> Vec<Point2> {
        vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
        ]
    }

    #[test]
    fn segmentation_boundaries() {
        let cloud = PointCloud::new(
            "bg",
            0.0,
            vec![
                Point3::new(0.0, 0.0, 0.1),
                Point3::new(0.0, 0.0, 0.5),
                Point3::new(0.0, 0.0, 0.6),
            ],
        );
        let seg = segment_by_height(&cloud, 0.5);
        assert_eq!(seg.ground.len(), 2); // 0.1 and the boundary point 0.5
        assert_eq!(seg.statics.len(), 1);
        assert!(seg.ground.iter().all(|p| p.z <= 0.5));
        assert!(seg.statics.iter().all(|p| p.z > 0.5));
    }

    #[test]
    fn segmentation_partitions_and_is_stable_on_ground() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let pts: Vec<Point3> = (0..200)
            .map(|_| {
                Point3::new(
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-10.0..10.0),
                    rng.random_range(-0.2..3.0),
                )
            })
            .collect();
        let cloud = PointCloud::new("bg", 0.0, pts.clone());
        let seg = segment_by_height(&cloud, 0.5);
        assert_eq!(seg.ground.len() + seg.statics.len(), pts.len());
        let again = segment_by_height(&PointCloud::new("g", 0.0, seg.ground.clone()), 0.5);
        assert_eq!(again.ground, seg.ground);
        assert!(again.statics.is_empty());
    }

    #[test]
    fn polygon_membership_basics() {
        let square = unit_square();
        assert!(point_in_polygon(Point2::new(0.5, 0.5), &square).unwrap());
        assert!(!point_in_polygon(Point2::new(1.5, 0.5), &square).unwrap());
        // Boundary point counts as inside.
        assert!(point_in_polygon(Point2::new(1.0, 0.5), &square).unwrap());
        assert!(matches!(
            point_in_polygon(Point2::new(0.0, 0.0), &square[..2]),
            Err(Error::MalformedPolygon(2))
        ));
    }

    #[test]
    fn membership_with_margin() {
        let b = BackgroundBox {
            polygon: unit_square(),
            max_height: 2.0,
            margin: 0.2,
        };
        assert!(b.contains(Point2::new(0.5, 0.5)));
        assert!(b.contains(Point2::new(1.15, 0.5)));
        assert!(!b.contains(Point2::new(1.25, 0.5)));
    }

    /// Winding-number oracle built from summed signed angles; an independent
    /// formulation of polygon membership.
    fn winding_oracle(p: Point2, polygon: &[Point2]) -> bool {
        let mut total = 0.0;
        for i in 0..polygon.len() {
            let a = polygon[i];
            let b = polygon[(i + 1) % polygon.len()];
            let va = Point2::new(a.x - p.x, a.y - p.y);
            let vb = Point2::new(b.x - p.x, b.y - p.y);
            let cross = va.x * vb.y - va.y * vb.x;
            let dot = va.x * vb.x + va.y * vb.y;
            total += cross.atan2(dot);
        }
        total.abs() > std::f64::consts::PI
    }

    fn random_convex_polygon(rng: &mut impl Rng) -> Vec<Point2> {
        let n = rng.random_range(3..9);
        let cx = rng.random_range(-5.0..5.0);
        let cy = rng.random_range(-5.0..5.0);
        let r = rng.random_range(0.5..4.0);
        let mut angles: Vec<f64> = (0..n)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        angles.sort_by(f64::total_cmp);
        angles.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
        while angles.len() < 3 {
            angles.push(angles.last().unwrap() + 0.5);
        }
        angles
            .iter()
            .map(|&t| Point2::new(cx + r * t.cos(), cy + r * t.sin()))
            .collect()
    }

    #[test]
    fn membership_matches_winding_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        for _ in 0..1000 {
            let poly = random_convex_polygon(&mut rng);
            let p = Point2::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
            let got = point_in_polygon(p, &poly).unwrap();
            let expected = winding_oracle(p, &poly);
            assert_eq!(got, expected, "p={p:?} poly={poly:?}");
        }
    }

    #[test]
    fn empty_static_set_yields_no_boxes() {
        let boxes = extract_background_boxes(
            &[],
            &ClusterParams::default(),
            &LShapeParams::default(),
            &BackgroundParams::default(),
        );
        assert!(boxes.is_empty());
    }

    fn wall_cluster(rng: &mut impl Rng, x0: f64, y0: f64, len: f64, wid: f64, n: usize) -> Vec<Point3> {
        (0..n)
            .map(|_| {
                Point3::new(
                    x0 + rng.random_range(0.0..len),
                    y0 + rng.random_range(0.0..wid),
                    rng.random_range(0.6..2.5),
                )
            })
            .collect()
    }

    #[test]
    fn single_wall_cluster_box_contains_its_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let pts = wall_cluster(&mut rng, 3.0, 7.0, 2.0, 1.0, 200);
        let boxes = extract_background_boxes(
            &pts,
            &ClusterParams::default(),
            &LShapeParams::default(),
            &BackgroundParams {
                min_cluster_size: 10,
                margin: 0.0,
            },
        );
        assert_eq!(boxes.len(), 1);
        let b = &boxes[0];
        assert!(b.max_height > 0.6 && b.max_height <= 2.5);
        for p in &pts {
            assert!(b.contains(p.xy()), "{p:?} escaped the background box");
        }
    }

    #[test]
    fn well_separated_clusters_make_separate_boxes() {
        let mut rng = ChaCha8Rng::seed_from_u64(54);
        let mut pts = wall_cluster(&mut rng, 0.0, 0.0, 2.0, 0.5, 120);
        pts.extend(wall_cluster(&mut rng, 10.0, 10.0, 1.0, 1.0, 80));
        let boxes = extract_background_boxes(
            &pts,
            &ClusterParams {
                epsilon: 0.8,
                min_points: 5,
            },
            &LShapeParams::default(),
            &BackgroundParams::default(),
        );
        assert_eq!(boxes.len(), 2);
    }

    #[test]
    fn undersized_clusters_dropped() {
        let pts: Vec<Point3> = (0..5)
            .map(|i| Point3::new(i as f64 * 0.1, 0.0, 1.0))
            .collect();
        let boxes = extract_background_boxes(
            &pts,
            &ClusterParams::default(),
            &LShapeParams::default(),
            &BackgroundParams::default(),
        );
        assert!(boxes.is_empty());
    }
}
