//! Oriented rectangle fitting for the 2D vehicle silhouette.
//!
//! The cluster is split into two legs by a beam sweep: points are binned along
//! x, the closest return per bin seeds a probe-line regression, and a histogram
//! of the projections onto that line separates the dense "bar" (leg P) from the
//! points hugging the line (leg Q). A constrained least-squares problem then
//! fits two orthogonal lines through the legs; the smallest-eigenvalue
//! eigenvector of a 2×2 Schur complement gives the shared direction. The box is
//! the maximal extent of all points along that direction.
//!
//! A straight silhouette (one visible side, or a full outline seen edge-on)
//! flattens the histogram; in that case leg P collapses to a single point and
//! the direction comes from the regression over Q alone.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Extents below this are clamped and flagged as degenerate, meters.
pub const MIN_EXTENT: f64 = 1e-6;

/// Beam-partitioning and histogram parameters.
#[derive(Debug, Clone)]
pub struct LShapeParams {
    /// Beam width Δx, meters; should exceed the point spacing on the target.
    pub delta_x: f64,
    /// Tolerance band around the probe line for leg-Q assignment, meters.
    pub theta_thresh: f64,
    /// Width of the projection histogram bins, meters.
    pub histogram_bin_width: f64,
    /// Straight-silhouette detector: if the second-highest bin count reaches
    /// this fraction of the highest, the shape is not an L.
    pub flatness_ratio: f64,
}

impl Default for LShapeParams {
    fn default() -> Self {
        Self {
            delta_x: 0.2,
            theta_thresh: 0.15,
            histogram_bin_width: 0.1,
            flatness_ratio: 0.6,
        }
    }
}

impl LShapeParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("delta_x", self.delta_x),
            ("theta_thresh", self.theta_thresh),
            ("histogram_bin_width", self.histogram_bin_width),
            ("flatness_ratio", self.flatness_ratio),
        ] {
            if !(v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive")));
            }
        }
        if self.flatness_ratio > 1.0 {
            return Err(Error::InvalidParameter(
                "flatness_ratio must be at most 1".into(),
            ));
        }
        Ok(())
    }
}

/// Silhouette class decided by the histogram flatness test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeClass {
    LShape,
    IOrBox,
}

impl std::fmt::Display for ShapeClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ShapeClass::LShape => write!(f, "L"),
            ShapeClass::IOrBox => write!(f, "I-or-box"),
        }
    }
}

/// Outcome of the beam partition: leg index sets, the probe line, and the
/// shape class. Indices refer to the input point slice.
#[derive(Debug, Clone)]
pub struct Partition {
    pub p_indices: Vec<usize>,
    pub q_indices: Vec<usize>,
    /// Slope and intercept of the probe line `y = a·x + b`.
    pub probe_slope: f64,
    pub probe_intercept: f64,
    pub shape_class: ShapeClass,
    /// Fraction of x-bins that received no point; high values mean the beams
    /// run nearly parallel to the front edge.
    pub empty_beam_fraction: f64,
}

/// The orthogonal line pair: `α1·x + α2·y + c1 = 0` through leg P and
/// `α1·y − α2·x + c2 = 0` through leg Q.
#[derive(Debug, Clone)]
pub struct LShapeSolution {
    /// Unit vector (α1, α2); normal of line P and direction of line Q.
    pub alpha: [f64; 2],
    /// Line offsets (c1, c2).
    pub c: [f64; 2],
    /// Intersection of the two lines.
    pub corner: Point2,
    /// Direction of line Q folded into [0, π/2), radians.
    pub orientation: f64,
    /// Root-mean-square orthogonal distance over both legs, meters.
    pub residual: f64,
}

/// An oriented rectangle; `yaw` points along the longer extent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox2D {
    pub center: Point2,
    pub half_length: f64,
    pub half_width: f64,
    /// Direction of the length axis in [0, π), radians.
    pub yaw: f64,
}

impl OrientedBox2D {
    /// Corner points in counter-clockwise order.
    pub fn corners(&self) -> [Point2; 4] {
        let locals = [
            (self.half_length, self.half_width),
            (-self.half_length, self.half_width),
            (-self.half_length, -self.half_width),
            (self.half_length, -self.half_width),
        ];
        locals.map(|(u, v)| {
            let r = Point2::new(u, v).rotated(self.yaw);
            Point2::new(self.center.x + r.x, self.center.y + r.y)
        })
    }

    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        let local = Point2::new(p.x - self.center.x, p.y - self.center.y).rotated(-self.yaw);
        local.x.abs() <= self.half_length + tol && local.y.abs() <= self.half_width + tol
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_length * self.half_width
    }
}

/// A fitted box plus the degenerate-extent flag.
#[derive(Debug, Clone)]
pub struct BoxFit {
    pub bbox: OrientedBox2D,
    /// Set when an extent fell below [`MIN_EXTENT`] (collinear input); the
    /// extent is clamped, not rejected.
    pub zero_extent: bool,
}

/// Full vehicle box fit: the final partition, line pair, and bounding box.
#[derive(Debug, Clone)]
pub struct VehicleBoxFit {
    pub bbox: OrientedBox2D,
    pub solution: LShapeSolution,
    /// The partition of the last (stable) sweep.
    pub partition: Partition,
    pub zero_extent: bool,
}

impl VehicleBoxFit {
    pub fn shape_class(&self) -> ShapeClass {
        self.partition.shape_class
    }
}

/// Splits the points into legs P and Q with beams along +y.
///
/// Points are grouped into x-bins of width Δx; the minimum-y point of each
/// non-empty bin feeds an ordinary least-squares probe line. All points are
/// then projected onto the probe line; leg P is the highest-count bin of the
/// along-line histogram, leg Q collects the points within `theta_thresh` of
/// the line. If the histogram is flat the silhouette is straight: the class
/// becomes [`ShapeClass::IOrBox`] and P is reduced to one point.
pub fn partition_beams(points: &[Point2], params: &LShapeParams) -> Result<Partition> {
    params.validate()?;
    if points.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "{} point(s), need at least 2",
            points.len()
        )));
    }

    let x_min = points.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let x_max = points.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let span = x_max - x_min;
    let num_bins = ((span / params.delta_x).ceil() as usize).max(1);
    let bin_of = |x: f64| (((x - x_min) / params.delta_x) as usize).min(num_bins - 1);

    // Closest reflection per beam.
    let mut closest: Vec<Option<usize>> = vec![None; num_bins];
    for (i, p) in points.iter().enumerate() {
        let b = bin_of(p.x);
        match closest[b] {
            None => closest[b] = Some(i),
            Some(j) if p.y < points[j].y => closest[b] = Some(i),
            _ => {}
        }
    }
    let probe: Vec<usize> = closest.iter().filter_map(|&i| i).collect();
    let empty_beam_fraction = 1.0 - probe.len() as f64 / num_bins as f64;
    if probe.len() < 2 {
        return Err(Error::DegenerateInput(
            "all points fall into a single beam".into(),
        ));
    }

    // Probe line y = a·x + b over the closest reflections.
    let np = probe.len() as f64;
    let mean_x = probe.iter().map(|&i| points[i].x).sum::<f64>() / np;
    let mean_y = probe.iter().map(|&i| points[i].y).sum::<f64>() / np;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for &i in &probe {
        let dx = points[i].x - mean_x;
        sxx += dx * dx;
        sxy += dx * (points[i].y - mean_y);
    }
    if sxx <= 1e-12 * np * (1.0 + mean_x * mean_x) {
        return Err(Error::DegenerateInput(
            "probe points carry no x spread".into(),
        ));
    }
    let a = sxy / sxx;
    let b = mean_y - a * mean_x;

    // Arc-length coordinate along the probe line and perpendicular offset.
    let inv_norm = 1.0 / (1.0 + a * a).sqrt();
    let along: Vec<f64> = points
        .iter()
        .map(|p| (p.x + a * (p.y - b)) * inv_norm)
        .collect();
    let offset: Vec<f64> = points
        .iter()
        .map(|p| (p.y - a * p.x - b) * inv_norm)
        .collect();

    let s_min = along.iter().copied().fold(f64::INFINITY, f64::min);
    let s_max = along.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let h_bins = (((s_max - s_min) / params.histogram_bin_width).ceil() as usize).max(1);
    let mut bins: Vec<Vec<usize>> = vec![Vec::new(); h_bins];
    for (i, &s) in along.iter().enumerate() {
        let b = (((s - s_min) / params.histogram_bin_width) as usize).min(h_bins - 1);
        bins[b].push(i);
    }

    let best_count = bins.iter().map(Vec::len).max().unwrap_or(0);
    // Tie on the highest count: prefer the bin closest to the probe-line
    // endpoint nearest x_min.
    let endpoint = Point2::new(x_min, a * x_min + b);
    let best_bin = bins
        .iter()
        .enumerate()
        .filter(|(_, members)| members.len() == best_count)
        .min_by(|(ia, ma), (ib, mb)| {
            let mean_dist = |members: &[usize]| {
                members.iter().map(|&i| points[i].distance(endpoint)).sum::<f64>()
                    / members.len() as f64
            };
            mean_dist(ma)
                .total_cmp(&mean_dist(mb))
                .then_with(|| ia.cmp(ib))
        })
        .map(|(i, _)| i)
        .expect("histogram has at least one bin");
    let second_count = bins
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != best_bin)
        .map(|(_, m)| m.len())
        .max()
        .unwrap_or(0);

    let flat = second_count as f64 >= params.flatness_ratio * best_count as f64;
    let (shape_class, p_indices) = if flat {
        // Straight silhouette: one representative keeps the P leg from
        // constraining the direction.
        (ShapeClass::IOrBox, vec![bins[best_bin][0]])
    } else {
        (ShapeClass::LShape, bins[best_bin].clone())
    };

    let mut in_p = vec![false; points.len()];
    for &i in &p_indices {
        in_p[i] = true;
    }
    let q_indices: Vec<usize> = (0..points.len())
        .filter(|&i| !in_p[i] && offset[i].abs() <= params.theta_thresh)
        .collect();

    Ok(Partition {
        p_indices,
        q_indices,
        probe_slope: a,
        probe_intercept: b,
        shape_class,
        empty_beam_fraction,
    })
}

/// Fits the orthogonal line pair through the partition legs.
///
/// Builds the normal matrix of the stacked residual system (leg-P rows
/// constrain `α1·x + α2·y + c1`, leg-Q rows `α1·y − α2·x + c2`), reduces it by
/// the Schur complement over the offsets, and takes the smallest-eigenvalue
/// unit eigenvector of the remaining 2×2 block as α. The offsets follow from
/// stationarity: `c = −M11⁻¹·M12·α`.
pub fn fit_orthogonal_lines(points: &[Point2], partition: &Partition) -> Result<LShapeSolution> {
    let p = partition.p_indices.len();
    let q = partition.q_indices.len();
    if p == 0 || q == 0 {
        return Err(Error::SingularNormalMatrix);
    }
    if p + q < 3 {
        return Err(Error::DegenerateInput(format!(
            "{} partitioned point(s), need at least 3",
            p + q
        )));
    }

    let (mut sx_p, mut sy_p, mut sxx_p, mut syy_p, mut sxy_p) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &i in &partition.p_indices {
        let Point2 { x, y } = points[i];
        sx_p += x;
        sy_p += y;
        sxx_p += x * x;
        syy_p += y * y;
        sxy_p += x * y;
    }
    let (mut sx_q, mut sy_q, mut sxx_q, mut syy_q, mut sxy_q) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &i in &partition.q_indices {
        let Point2 { x, y } = points[i];
        sx_q += x;
        sy_q += y;
        sxx_q += x * x;
        syy_q += y * y;
        sxy_q += x * y;
    }

    let m12 = Matrix2::new(sx_p, sy_p, sy_q, -sx_q);
    let m22 = Matrix2::new(
        sxx_p + syy_q,
        sxy_p - sxy_q,
        sxy_p - sxy_q,
        syy_p + sxx_q,
    );
    let m11_inv = Matrix2::new(1.0 / p as f64, 0.0, 0.0, 1.0 / q as f64);
    let m_tilde = m22 - m12.transpose() * m11_inv * m12;

    let alpha_v = smallest_eigenvector(&m_tilde);
    // The offsets minimize the cost for the chosen direction.
    let c_v = -(m11_inv * m12 * alpha_v);

    let (alpha_v, c_v) = normalize_sign(alpha_v, c_v);
    let (a1, a2) = (alpha_v.x, alpha_v.y);
    let (c1, c2) = (c_v.x, c_v.y);

    let corner = Point2::new(-a1 * c1 + a2 * c2, -a2 * c1 - a1 * c2);
    let orientation = fold_quarter(f64::atan2(a2, a1));

    let mut cost = 0.0;
    for &i in &partition.p_indices {
        let r = a1 * points[i].x + a2 * points[i].y + c1;
        cost += r * r;
    }
    for &i in &partition.q_indices {
        let r = a1 * points[i].y - a2 * points[i].x + c2;
        cost += r * r;
    }
    let residual = (cost / (p + q) as f64).sqrt();

    Ok(LShapeSolution {
        alpha: [a1, a2],
        c: [c1, c2],
        corner,
        orientation,
        residual,
    })
}

/// Unit eigenvector of the smallest eigenvalue of a symmetric 2×2 matrix.
fn smallest_eigenvector(m: &Matrix2<f64>) -> Vector2<f64> {
    let (m00, m01, m11) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
    let half_diff = 0.5 * (m00 - m11);
    let lambda = 0.5 * (m00 + m11) - half_diff.hypot(m01);
    let v_a = Vector2::new(-m01, m00 - lambda);
    let v_b = Vector2::new(m11 - lambda, -m01);
    let v = if v_a.norm_squared() >= v_b.norm_squared() {
        v_a
    } else {
        v_b
    };
    if v.norm_squared() <= f64::MIN_POSITIVE {
        // Isotropic block: every direction costs the same.
        Vector2::new(1.0, 0.0)
    } else {
        v.normalize()
    }
}

/// Flips (α, c) jointly so the representative is unique: α1 > 0, or α2 > 0
/// when α1 vanishes. Both signs describe the same line pair.
fn normalize_sign(alpha: Vector2<f64>, c: Vector2<f64>) -> (Vector2<f64>, Vector2<f64>) {
    if alpha.x < 0.0 || (alpha.x == 0.0 && alpha.y < 0.0) {
        (-alpha, -c)
    } else {
        (alpha, c)
    }
}

fn fold_quarter(angle: f64) -> f64 {
    let mut a = angle % FRAC_PI_2;
    if a < 0.0 {
        a += FRAC_PI_2;
    }
    if a >= FRAC_PI_2 {
        a -= FRAC_PI_2;
    }
    a
}

fn fold_half(angle: f64) -> f64 {
    let mut a = angle % PI;
    if a < 0.0 {
        a += PI;
    }
    if a >= PI {
        a -= PI;
    }
    a
}

/// Maximal bounding box of the points along the given direction.
///
/// The longer extent defines the length axis and the reported yaw. Collinear
/// input yields an extent below [`MIN_EXTENT`]; it is clamped and flagged.
pub fn fit_box(points: &[Point2], orientation: f64) -> BoxFit {
    assert!(!points.is_empty(), "fit_box needs at least one point");
    let mut min_u = f64::INFINITY;
    let mut max_u = f64::NEG_INFINITY;
    let mut min_v = f64::INFINITY;
    let mut max_v = f64::NEG_INFINITY;
    for p in points {
        let r = p.rotated(-orientation);
        min_u = min_u.min(r.x);
        max_u = max_u.max(r.x);
        min_v = min_v.min(r.y);
        max_v = max_v.max(r.y);
    }
    let mut half_u = 0.5 * (max_u - min_u);
    let mut half_v = 0.5 * (max_v - min_v);
    let zero_extent = half_u < MIN_EXTENT || half_v < MIN_EXTENT;
    half_u = half_u.max(MIN_EXTENT);
    half_v = half_v.max(MIN_EXTENT);
    let local_center = Point2::new(0.5 * (min_u + max_u), 0.5 * (min_v + max_v));
    let center = local_center.rotated(orientation);
    let (half_length, half_width, yaw) = if half_u >= half_v {
        (half_u, half_v, orientation)
    } else {
        (half_v, half_u, orientation + FRAC_PI_2)
    };
    BoxFit {
        bbox: OrientedBox2D {
            center,
            half_length,
            half_width,
            yaw: fold_half(yaw),
        },
        zero_extent,
    }
}

/// Pre-rotation refinement passes; each is O(N) so this stays far inside the
/// per-frame runtime budget.
const MAX_REFINE_PASSES: usize = 8;
/// Orientation change (radians, mod 90°) below which the sweep is stable;
/// exact data reaches an exact fixed point, noisy data runs the pass budget.
const REFINE_STABLE_TOL: f64 = 1e-9;

/// End-to-end box fit: beam partition, orthogonal line pair, bounding box.
///
/// A single sweep along +y degrades whenever the short leg extends toward the
/// beam source: its tip becomes the closest reflection of its beam and tilts
/// the probe regression by several degrees, which the tolerance band then
/// bakes into the partition — a self-consistent but wrong fixed point. The
/// sweep is therefore iterated: each round re-runs it in the four frames that
/// lay the estimated legs on the axes (one per quarter turn, so the short leg
/// points away from the beams in at least one of them) and keeps the
/// lowest-residual solution, until the orientation stops moving. Everything
/// steering the re-sweeps is relative to the cluster itself, so the full fit
/// stays translation-equivariant. Degenerate sweeps (every point in one beam,
/// or most beams empty) retry at 90° or along the probe estimate.
pub fn fit_vehicle_box(points: &[Point2], params: &LShapeParams) -> Result<VehicleBoxFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "{} point(s), need at least 3",
            points.len()
        )));
    }
    let (mut partition, mut solution) = fit_pass(points, params, 0.0)?;
    #[cfg(feature = "sweep-trace")]
    eprintln!(
        "pass0: orient={:.8} res={:.3e} p={} q={} shape={:?}",
        solution.orientation,
        solution.residual,
        partition.p_indices.len(),
        partition.q_indices.len(),
        partition.shape_class
    );
    for _pass in 0..MAX_REFINE_PASSES {
        let base = -solution.orientation;
        let best = (0..4)
            .filter_map(|k| fit_pass(points, params, base + k as f64 * FRAC_PI_2).ok())
            .min_by(|a, b| a.1.residual.total_cmp(&b.1.residual));
        let Some((part, sol)) = best else {
            break;
        };
        let moved = quarter_distance(sol.orientation, solution.orientation);
        partition = part;
        solution = sol;
        #[cfg(feature = "sweep-trace")]
        eprintln!(
            "pass{}: orient={:.8} res={:.3e} p={} q={} shape={:?} moved={:.2e}",
            _pass + 1,
            solution.orientation,
            solution.residual,
            partition.p_indices.len(),
            partition.q_indices.len(),
            partition.shape_class,
            moved
        );
        if moved < REFINE_STABLE_TOL {
            break;
        }
    }
    let BoxFit { bbox, zero_extent } = fit_box(points, solution.orientation);
    Ok(VehicleBoxFit {
        bbox,
        solution,
        partition,
        zero_extent,
    })
}

/// Angular distance modulo the 90° box symmetry.
fn quarter_distance(a: f64, b: f64) -> f64 {
    let d = fold_quarter(a - b);
    d.min(FRAC_PI_2 - d)
}

/// One sweep at pre-rotation `gamma`, with the degradation fallbacks: a
/// single-beam cloud retries at +90°, a sweep with over half the beams empty
/// retries with the probe estimate laid along x.
fn fit_pass(
    points: &[Point2],
    params: &LShapeParams,
    gamma: f64,
) -> Result<(Partition, LShapeSolution)> {
    match fit_at_rotation(points, params, gamma) {
        Ok((part, sol)) if part.empty_beam_fraction <= 0.5 => Ok((part, sol)),
        Ok((part, _)) => fit_at_rotation(points, params, gamma - part.probe_slope.atan()),
        Err(Error::DegenerateInput(_)) => fit_at_rotation(points, params, gamma + FRAC_PI_2),
        Err(e) => Err(e),
    }
}

/// Partition and line fit under a pre-rotation by `gamma`, with the solution
/// mapped back into the original frame. Partition indices are unaffected.
fn fit_at_rotation(
    points: &[Point2],
    params: &LShapeParams,
    gamma: f64,
) -> Result<(Partition, LShapeSolution)> {
    if gamma == 0.0 {
        let part = partition_beams(points, params)?;
        let sol = fit_orthogonal_lines(points, &part)?;
        return Ok((part, sol));
    }
    let rotated: Vec<Point2> = points.iter().map(|p| p.rotated(gamma)).collect();
    let part = partition_beams(&rotated, params)?;
    let sol = fit_orthogonal_lines(&rotated, &part)?;

    // A line α·p̃ + c = 0 in the rotated frame p̃ = R(γ)·p becomes
    // (R(−γ)·α)·p + c = 0 in the original frame.
    let alpha_rot = Point2::new(sol.alpha[0], sol.alpha[1]).rotated(-gamma);
    let (alpha_v, c_v) = normalize_sign(
        Vector2::new(alpha_rot.x, alpha_rot.y),
        Vector2::new(sol.c[0], sol.c[1]),
    );
    let corner = sol.corner.rotated(-gamma);
    let orientation = fold_quarter(f64::atan2(alpha_v.y, alpha_v.x));
    Ok((
        part,
        LShapeSolution {
            alpha: [alpha_v.x, alpha_v.y],
            c: [c_v.x, c_v.y],
            corner,
            orientation,
            residual: sol.residual,
        },
    ))
}
