//! Ground-plane fitting on the background scan.
//!
//! A principal-component decomposition of the centered point matrix yields two
//! in-plane axes and the plane normal; points far off the first estimate are
//! rejected and the fit repeated until the normal settles. The resulting
//! alignment maps the fitted plane onto z = 0 with the sensor origin at its
//! mounting height.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{Point3, PointCloud, RigidTransform};

/// Relative tolerance for rank and singular-value-tie detection.
const DEGENERACY_TOL: f64 = 1e-9;

/// Principal-axis decomposition of a (near-)planar point cloud.
#[derive(Debug, Clone)]
pub struct PlaneFit {
    /// Columns are the principal axes `v1`, `v2`, `n`, ordered by descending
    /// singular value; orthonormal with determinant +1.
    pub axes: Matrix3<f64>,
    /// Mean of the fitted points.
    pub centroid: Vector3<f64>,
    /// Singular values of the centered point matrix, descending.
    pub singular_values: [f64; 3],
    /// `-Vᵀ·centroid`; the third component is the sensor mounting height.
    pub mounting_offset: Vector3<f64>,
}

impl PlaneFit {
    /// The plane normal, oriented so the sensor origin ends up at positive z.
    pub fn normal(&self) -> Vector3<f64> {
        self.axes.column(2).into_owned()
    }

    /// Estimated mounting height of the sensor above the plane, meters.
    pub fn mounting_height(&self) -> f64 {
        self.mounting_offset.z
    }

    /// Unsigned off-plane distance of a point, meters.
    pub fn offplane_distance(&self, p: Point3) -> f64 {
        self.normal().dot(&(p.to_vector() - self.centroid)).abs()
    }
}

/// Parameters of the iterative off-plane rejection.
#[derive(Debug, Clone)]
pub struct PlaneFitConfig {
    /// Off-plane distance beyond which a point is treated as non-ground, meters.
    /// Must exceed the sensor range noise but stay below background-object heights.
    pub reject_distance: f64,
    pub max_iterations: usize,
    /// Stop once the normal moves less than this between passes, degrees.
    pub convergence_angle_deg: f64,
}

impl Default for PlaneFitConfig {
    fn default() -> Self {
        Self {
            reject_distance: 0.3,
            max_iterations: 5,
            convergence_angle_deg: 0.05,
        }
    }
}

impl PlaneFitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reject_distance > 0.0) {
            return Err(Error::InvalidParameter(
                "reject_distance must be positive".into(),
            ));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidParameter(
                "max_iterations must be at least 1".into(),
            ));
        }
        if !(self.convergence_angle_deg > 0.0) {
            return Err(Error::InvalidParameter(
                "convergence_angle_deg must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A refined plane fit plus rejection diagnostics.
#[derive(Debug, Clone)]
pub struct RefinedPlaneFit {
    pub fit: PlaneFit,
    /// Refit passes performed after the initial all-point fit.
    pub iterations: usize,
    /// Points within the reject distance of the final plane.
    pub retained: usize,
    pub total: usize,
    /// Root-mean-square off-plane distance of the retained points, meters.
    pub rms_residual: f64,
}

impl RefinedPlaneFit {
    /// Fraction of input points retained; low values indicate the scene
    /// violates the many-more-ground-points assumption.
    pub fn retained_fraction(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.retained as f64 / self.total as f64
        }
    }
}

/// Fits a plane through all points of the cloud by a centered singular value
/// decomposition. The normal is the axis of smallest singular value, sign-fixed
/// so the sensor origin maps to positive z under [`ground_alignment`].
pub fn fit_plane_kl(cloud: &PointCloud) -> Result<PlaneFit> {
    fit_points(&cloud.points)
}

fn fit_points(points: &[Point3]) -> Result<PlaneFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateCloud(format!(
            "{} point(s), need at least 3",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let centroid = points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + p.to_vector())
        / n;
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = p.to_vector() - centroid;
        scatter += d * d.transpose();
    }

    let eig = nalgebra::SymmetricEigen::new(scatter);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let singular_values = [
        eig.eigenvalues[order[0]].max(0.0).sqrt(),
        eig.eigenvalues[order[1]].max(0.0).sqrt(),
        eig.eigenvalues[order[2]].max(0.0).sqrt(),
    ];
    let scale = singular_values[0];
    if singular_values[1] <= DEGENERACY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::DegenerateCloud(
            "points are collinear (rank of centered matrix < 2)".into(),
        ));
    }
    if singular_values[1] - singular_values[2] <= DEGENERACY_TOL * scale {
        return Err(Error::DegenerateCloud(
            "no unique normal (singular-value tie)".into(),
        ));
    }

    let mut axes = Matrix3::zeros();
    for (dst, &src) in order.iter().enumerate() {
        axes.set_column(dst, &eig.eigenvectors.column(src));
    }
    // Orient the normal so the sensor origin lands at positive z after
    // alignment: the aligned origin height is -n·centroid.
    if axes.column(2).dot(&centroid) > 0.0 {
        let flipped = -axes.column(2);
        axes.set_column(2, &flipped);
    }
    // Keep the rotation proper; v2 carries no sign meaning.
    if axes.determinant() < 0.0 {
        let flipped = -axes.column(1);
        axes.set_column(1, &flipped);
    }

    let mounting_offset = -(axes.transpose() * centroid);
    Ok(PlaneFit {
        axes,
        centroid,
        singular_values,
        mounting_offset,
    })
}

/// Iteratively refits the plane, dropping points whose off-plane distance
/// exceeds `cfg.reject_distance`. Inliers are re-selected from the full cloud
/// against the current plane each pass, so points can re-enter as the estimate
/// improves.
pub fn refine_plane(cloud: &PointCloud, cfg: &PlaneFitConfig) -> Result<RefinedPlaneFit> {
    cfg.validate()?;
    let total = cloud.points.len();
    let mut fit = fit_points(&cloud.points)?;
    let convergence = cfg.convergence_angle_deg.to_radians();
    let mut iterations = 0;
    let retained = loop {
        let inliers: Vec<Point3> = cloud
            .points
            .iter()
            .copied()
            .filter(|p| fit.offplane_distance(*p) <= cfg.reject_distance)
            .collect();
        if inliers.len() < 3 {
            return Err(Error::DegenerateCloud(
                "fewer than 3 points within the reject distance".into(),
            ));
        }
        let refit = fit_points(&inliers)?;
        iterations += 1;
        let moved = normal_angle(&fit, &refit);
        fit = refit;
        if moved < convergence || iterations >= cfg.max_iterations {
            break inliers;
        }
    };
    let rms_residual = (retained
        .iter()
        .map(|p| fit.offplane_distance(*p).powi(2))
        .sum::<f64>()
        / retained.len() as f64)
        .sqrt();
    Ok(RefinedPlaneFit {
        fit,
        iterations,
        retained: retained.len(),
        total,
        rms_residual,
    })
}

fn normal_angle(a: &PlaneFit, b: &PlaneFit) -> f64 {
    a.normal().dot(&b.normal()).abs().min(1.0).acos()
}

/// The transform that maps the fitted plane onto z = 0: rotation `Vᵀ` and
/// translation `(0, 0, ĥ)`. In-plane translation is left for model matching.
pub fn ground_alignment(fit: &PlaneFit) -> RigidTransform {
    RigidTransform::new(
        fit.axes.transpose(),
        Vector3::new(0.0, 0.0, fit.mounting_height()),
    )
}
