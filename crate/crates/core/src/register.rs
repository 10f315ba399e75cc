//! Coherent Point Drift registration of directory control points onto map
//! control points.
//!
//! The source set `Y` supplies the centroids of an isotropic Gaussian mixture
//! and the target set `X` is treated as samples from that mixture plus a
//! uniform outlier component with weight `w`. EM alternates posterior
//! correspondences (E-step) with a closed-form update of the transform and of
//! the shared variance `sigma2` (M-step). Both sets are normalized to zero mean
//! and unit RMS radius before solving; the recovered transform is expressed in
//! the original coordinates.
//!
//! The objective recorded in `log_likelihood_trace` is the observed-data log
//! likelihood in normalized coordinates. For the nonrigid model it includes
//! the smoothness prior `-lambda/2 * tr(W^T G W)`, which is what the
//! conditional M-step increases.

use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{Point, Polygon, RasterError};

#[derive(Debug, Error)]
pub enum RegisterError {
    #[error("need at least {needed} points in {which}, got {got}")]
    TooFewPoints { which: &'static str, needed: usize, got: usize },
    #[error("degenerate point set {which}: {reason}")]
    Degenerate { which: &'static str, reason: String },
    #[error("non-finite coordinate at index {0}")]
    NonFinite(usize),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("warped polygon is invalid: {0}")]
    Polygon(#[from] RasterError),
}

/// An ordered set of 2-D points with finite coordinates.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Point>", into = "Vec<Point>")]
pub struct PointSet {
    points: Vec<Point>,
}

impl TryFrom<Vec<Point>> for PointSet {
    type Error = RegisterError;

    fn try_from(points: Vec<Point>) -> Result<Self, Self::Error> {
        PointSet::new(points)
    }
}

impl From<PointSet> for Vec<Point> {
    fn from(p: PointSet) -> Self {
        p.points
    }
}

impl PointSet {
    pub fn new(points: Vec<Point>) -> Result<Self, RegisterError> {
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(RegisterError::NonFinite(i));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.points.len(), 2, |i, j| if j == 0 { self.points[i].x } else { self.points[i].y })
    }

    fn from_matrix(m: &DMatrix<f64>) -> Self {
        Self { points: (0..m.nrows()).map(|i| Point::new(m[(i, 0)], m[(i, 1)])).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CpdMode {
    Rigid,
    Affine,
    Nonrigid,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CpdParams {
    pub mode: CpdMode,
    /// Prior weight of the uniform outlier component.
    pub w: f64,
    /// Gaussian kernel width (normalized units), nonrigid only.
    pub beta: f64,
    /// Smoothness weight, nonrigid only.
    pub lambda: f64,
    pub max_iter: usize,
    /// Stop once the objective changes by less than this.
    pub tol: f64,
    pub sigma2_floor: f64,
    /// Rigid and affine runs start EM from this many initial rotations,
    /// evenly spaced from 0, and keep the best final objective. Ties go to
    /// the earliest start, so 0 wins on symmetric layouts.
    pub rotation_starts: u32,
}

impl Default for CpdParams {
    fn default() -> Self {
        Self {
            mode: CpdMode::Nonrigid,
            w: 0.3,
            beta: 2.0,
            lambda: 3.0,
            max_iter: 150,
            tol: 1e-8,
            sigma2_floor: 1e-10,
            rotation_starts: 1,
        }
    }
}

impl CpdParams {
    pub fn with_mode(mode: CpdMode) -> Self {
        Self { mode, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), RegisterError> {
        let bad = |m: &str| Err(RegisterError::InvalidParams(m.to_string()));
        if !(0.0..1.0).contains(&self.w) {
            return bad("w must lie in [0, 1)");
        }
        if !(self.beta > 0.0) || !(self.lambda > 0.0) {
            return bad("beta and lambda must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1");
        }
        if !(self.tol >= 0.0) || !(self.sigma2_floor > 0.0) {
            return bad("tol must be >= 0 and sigma2_floor > 0");
        }
        if !(1..=36).contains(&self.rotation_starts) {
            return bad("rotation_starts must lie in 1..=36");
        }
        Ok(())
    }
}

/// Normalization frame: `normalized = (p - mean) / scale`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub mean: Point,
    pub scale: f64,
}

impl Frame {
    fn of(set: &PointSet, which: &'static str) -> Result<Frame, RegisterError> {
        let n = set.len() as f64;
        let mean = set.points.iter().fold(Point::default(), |a, &p| a.add(p)).scale(1.0 / n);
        let ms = set.points.iter().map(|p| p.sub(mean).dot(p.sub(mean))).sum::<f64>() / n;
        let scale = ms.sqrt();
        if !(scale > 1e-12) {
            return Err(RegisterError::Degenerate { which, reason: "all points coincide".into() });
        }
        Ok(Frame { mean, scale })
    }

    pub fn normalize(&self, p: Point) -> Point {
        p.sub(self.mean).scale(1.0 / self.scale)
    }

    pub fn denormalize(&self, p: Point) -> Point {
        p.scale(self.scale).add(self.mean)
    }
}

/// A mapping from source (directory) coordinates to target (map) coordinates.
/// Matrices are stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Transform {
    Rigid { rotation: [f64; 4], scale: f64, translation: [f64; 2] },
    Affine { matrix: [f64; 4], translation: [f64; 2] },
    Nonrigid {
        /// Source points in the source frame's normalized coordinates.
        basis_points: Vec<Point>,
        coefficients: Vec<Point>,
        beta: f64,
        source_frame: Frame,
        target_frame: Frame,
    },
    /// Steps applied in order.
    Chain { steps: Vec<Transform> },
}

fn mat_from(a: [f64; 4]) -> Matrix2<f64> {
    Matrix2::new(a[0], a[1], a[2], a[3])
}

fn to_mat2(m: &DMatrix<f64>) -> Matrix2<f64> {
    Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)])
}

fn mat_to(m: &Matrix2<f64>) -> [f64; 4] {
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

impl Transform {
    pub fn identity() -> Self {
        Transform::Rigid { rotation: [1.0, 0.0, 0.0, 1.0], scale: 1.0, translation: [0.0, 0.0] }
    }

    /// Rigid transform `p -> scale * R(angle) * p + t` with `angle` in radians
    /// (counterclockwise in x-right/y-up axes).
    pub fn similarity(angle: f64, scale: f64, translation: [f64; 2]) -> Self {
        let (s, c) = angle.sin_cos();
        Transform::Rigid { rotation: [c, -s, s, c], scale, translation }
    }

    pub fn mode(&self) -> CpdMode {
        match self {
            Transform::Rigid { .. } => CpdMode::Rigid,
            Transform::Affine { .. } => CpdMode::Affine,
            Transform::Nonrigid { .. } => CpdMode::Nonrigid,
            Transform::Chain { steps } => steps.last().map_or(CpdMode::Rigid, Transform::mode),
        }
    }

    pub fn apply(&self, p: Point) -> Point {
        match self {
            Transform::Rigid { rotation, scale, translation } => {
                let v = mat_from(*rotation) * Vector2::new(p.x, p.y) * *scale;
                Point::new(v.x + translation[0], v.y + translation[1])
            }
            Transform::Affine { matrix, translation } => {
                let v = mat_from(*matrix) * Vector2::new(p.x, p.y);
                Point::new(v.x + translation[0], v.y + translation[1])
            }
            Transform::Nonrigid { basis_points, coefficients, beta, source_frame, target_frame } => {
                let q = source_frame.normalize(p);
                let k = -0.5 / (beta * beta);
                let disp = basis_points.iter().zip(coefficients).fold(Point::default(), |acc, (b, c)| {
                    let d = q.sub(*b);
                    acc.add(c.scale((k * d.dot(d)).exp()))
                });
                target_frame.denormalize(q.add(disp))
            }
            Transform::Chain { steps } => steps.iter().fold(p, |q, t| t.apply(q)),
        }
    }

    /// Inverse for rigid and affine transforms; `None` for nonrigid ones.
    pub fn inverse(&self) -> Option<Transform> {
        match self {
            Transform::Rigid { rotation, scale, translation } => {
                let rt = mat_from(*rotation).transpose();
                let t = -(rt * Vector2::new(translation[0], translation[1])) / *scale;
                Some(Transform::Rigid { rotation: mat_to(&rt), scale: 1.0 / scale, translation: [t.x, t.y] })
            }
            Transform::Affine { matrix, translation } => {
                let inv = mat_from(*matrix).try_inverse()?;
                let t = -(inv * Vector2::new(translation[0], translation[1]));
                Some(Transform::Affine { matrix: mat_to(&inv), translation: [t.x, t.y] })
            }
            Transform::Nonrigid { .. } => None,
            Transform::Chain { steps } => {
                Some(Transform::Chain { steps: steps.iter().rev().map(Transform::inverse).collect::<Option<_>>()? })
            }
        }
    }
}

pub fn apply_transform(t: &Transform, pts: &PointSet) -> PointSet {
    PointSet { points: pts.points.iter().map(|&p| t.apply(p)).collect() }
}

/// Vertex-wise warp; vertex order is preserved.
pub fn warp_polygon(t: &Transform, poly: &Polygon) -> Result<Polygon, RegisterError> {
    Ok(poly.map_vertices(|p| t.apply(p))?)
}

/// Snapshot handed to an iteration observer.
#[derive(Debug)]
pub struct IterationState<'a> {
    pub iteration: usize,
    pub sigma2: f64,
    pub log_likelihood: f64,
    pub transform: &'a Transform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegistrationResult {
    pub transform: Transform,
    pub sigma2: f64,
    /// Posterior `P(m | x_n)`, `M x N` (rows: source points, columns: targets).
    pub correspondence: DMatrix<f64>,
    /// Posterior mass of the outlier component for each target point.
    pub outlier_mass: Vec<f64>,
    pub log_likelihood_trace: Vec<f64>,
    /// Trace of the rigid pre-alignment stage, empty for single-stage runs.
    pub coarse_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Source points after the final transform.
    pub moved: PointSet,
}

/// Compact, serializable digest of a registration run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegistrationSummary {
    pub mode: CpdMode,
    pub target_points: usize,
    pub source_points: usize,
    pub sigma2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_log_likelihood: f64,
}

impl RegistrationResult {
    pub fn summary(&self) -> RegistrationSummary {
        RegistrationSummary {
            mode: self.transform.mode(),
            target_points: self.correspondence.ncols(),
            source_points: self.correspondence.nrows(),
            sigma2: self.sigma2,
            iterations: self.iterations,
            converged: self.converged,
            final_log_likelihood: *self.log_likelihood_trace.last().unwrap_or(&f64::NAN),
        }
    }
}

pub fn cpd_register(
    x: &PointSet,
    y: &PointSet,
    params: &CpdParams,
) -> Result<RegistrationResult, RegisterError> {
    cpd_register_observed(x, y, params, |_| {})
}

/// Like [`cpd_register`], calling `observer` after the initial E-step and
/// after every EM iteration.
pub fn cpd_register_observed(
    x: &PointSet,
    y: &PointSet,
    params: &CpdParams,
    mut observer: impl FnMut(&IterationState<'_>),
) -> Result<RegistrationResult, RegisterError> {
    params.validate()?;
    for (set, which) in [(x, "X"), (y, "Y")] {
        if set.len() < 3 {
            return Err(RegisterError::TooFewPoints { which, needed: 3, got: set.len() });
        }
    }
    let fx = Frame::of(x, "X")?;
    let fy = Frame::of(y, "Y")?;
    let starts = if params.mode == CpdMode::Nonrigid { 1 } else { params.rotation_starts };
    let mut chosen = Start::Classic;
    if starts > 1 {
        let objective = |r: &RegistrationResult| *r.log_likelihood_trace.last().expect("trace starts non-empty");
        let mut best = objective(&register_in_frames(x, y, params, fx, fy, Start::Classic, &mut |_| {})?);
        for k in 0..starts {
            let s = Start::Rotated(std::f64::consts::TAU * f64::from(k) / f64::from(starts));
            let obj = objective(&register_in_frames(x, y, params, fx, fy, s, &mut |_| {})?);
            if obj > best + 1e-9 * (1.0 + best.abs()) {
                best = obj;
                chosen = s;
            }
        }
    }
    // Deterministic, so rerunning the winner replays the same iterations.
    register_in_frames(x, y, params, fx, fy, chosen, &mut observer)
}

/// How EM is initialized.
#[derive(Clone, Copy)]
enum Start {
    /// Identity transform, variance from all point pairs.
    Classic,
    /// Rotated start, variance from nearest-neighbour residuals.
    Rotated(f64),
}

fn register_in_frames(
    x: &PointSet,
    y: &PointSet,
    params: &CpdParams,
    fx: Frame,
    fy: Frame,
    start: Start,
    observer: &mut impl FnMut(&IterationState<'_>),
) -> Result<RegistrationResult, RegisterError> {
    let xn = PointSet { points: x.points.iter().map(|&p| fx.normalize(p)).collect() }.to_matrix();
    let yn = PointSet { points: y.points.iter().map(|&p| fy.normalize(p)).collect() }.to_matrix();
    if params.mode != CpdMode::Nonrigid {
        check_not_collinear(&xn, "X")?;
        check_not_collinear(&yn, "Y")?;
    }

    let (n, m) = (xn.nrows(), yn.nrows());
    let start_angle = if let Start::Rotated(a) = start { a } else { 0.0 };
    let mut model = Model::new(params, &yn, start_angle);
    let d2 = |i: usize, mv: &DMatrix<f64>, j: usize| (xn[(i, 0)] - mv[(j, 0)]).powi(2) + (xn[(i, 1)] - mv[(j, 1)]).powi(2);
    let mut sigma2 = match start {
        Start::Classic => {
            let acc: f64 = (0..n).flat_map(|i| (0..m).map(move |j| (i, j))).map(|(i, j)| d2(i, &yn, j)).sum();
            acc / (2.0 * (m * n) as f64)
        }
        // Local residuals keep the starting rotation from being annealed away.
        Start::Rotated(_) => {
            let acc: f64 = (0..n).map(|i| (0..m).map(|j| d2(i, &model.moved, j)).fold(f64::INFINITY, f64::min)).sum();
            (acc / (2.0 * n as f64)).max(params.sigma2_floor)
        }
    };

    let mut estep = e_step(&xn, &model.moved, sigma2, params.w);
    let mut trace = vec![estep.log_likelihood + model.penalty()];
    let mut transform = model.denormalized(&fx, &fy);
    observer(&IterationState { iteration: 0, sigma2, log_likelihood: trace[0], transform: &transform });

    let mut iterations = 0;
    let mut converged = false;
    for iter in 1..=params.max_iter {
        sigma2 = model.m_step(&xn, &yn, &estep, sigma2);
        let floored = !(sigma2 >= params.sigma2_floor);
        if floored {
            sigma2 = params.sigma2_floor;
        }
        estep = e_step(&xn, &model.moved, sigma2, params.w);
        let objective = estep.log_likelihood + model.penalty();
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(objective);
        iterations = iter;
        transform = model.denormalized(&fx, &fy);
        observer(&IterationState { iteration: iter, sigma2, log_likelihood: objective, transform: &transform });
        if floored || (objective - prev).abs() < params.tol {
            converged = true;
            break;
        }
    }

    let moved = apply_transform(&transform, y);
    Ok(RegistrationResult {
        transform,
        sigma2,
        correspondence: estep.posterior,
        outlier_mass: estep.outlier,
        log_likelihood_trace: trace,
        coarse_trace: Vec::new(),
        iterations,
        converged,
        moved,
    })
}

/// Rigid registration first, then `params.mode` starting from the rigidly
/// moved source. The rigid stage runs with the roles swapped, so points only
/// the source has fall to the uniform outlier component instead of dragging
/// the fit. The returned trace, posterior and sigma2 belong to the second
/// stage.
pub fn cpd_register_prealigned(
    x: &PointSet,
    y: &PointSet,
    params: &CpdParams,
) -> Result<RegistrationResult, RegisterError> {
    cpd_register_prealigned_observed(x, y, params, |_| {})
}

/// Like [`cpd_register_prealigned`]. The observer sees both stages with
/// iterations numbered continuously and transforms that map the original
/// source.
pub fn cpd_register_prealigned_observed(
    x: &PointSet,
    y: &PointSet,
    params: &CpdParams,
    mut observer: impl FnMut(&IterationState<'_>),
) -> Result<RegistrationResult, RegisterError> {
    let rigid = CpdParams { mode: CpdMode::Rigid, ..*params };
    let back = cpd_register_observed(y, x, &rigid, |st| {
        if let Some(t) = st.transform.inverse() {
            observer(&IterationState { transform: &t, ..*st });
        }
    })?;
    let coarse = back.transform.inverse().ok_or_else(|| RegisterError::Degenerate {
        which: "Y",
        reason: "rigid stage collapsed to zero scale".into(),
    })?;
    let moved = apply_transform(&coarse, y);
    // Both sets now live in target coordinates, so they share its frame, and
    // the variance starts from nearest-neighbour residuals of the coarse fit.
    let fx = Frame::of(x, "X")?;
    let offset = back.iterations + 1;
    let mut relay = |st: &IterationState<'_>| {
        let chained = Transform::Chain { steps: vec![coarse.clone(), st.transform.clone()] };
        observer(&IterationState { iteration: offset + st.iteration, transform: &chained, ..*st });
    };
    let fine = register_in_frames(x, &moved, params, fx, fx, Start::Rotated(0.0), &mut relay)?;
    Ok(RegistrationResult {
        transform: Transform::Chain { steps: vec![coarse, fine.transform] },
        iterations: back.iterations + fine.iterations,
        coarse_trace: back.log_likelihood_trace,
        converged: back.converged && fine.converged,
        ..fine
    })
}

fn check_not_collinear(pts: &DMatrix<f64>, which: &'static str) -> Result<(), RegisterError> {
    // Points are centered with unit RMS radius, so the covariance trace is 1.
    let n = pts.nrows() as f64;
    let cov = pts.transpose() * pts / n;
    let eig = Matrix2::new(cov[(0, 0)], cov[(0, 1)], cov[(1, 0)], cov[(1, 1)]).symmetric_eigenvalues();
    if eig.min() < 1e-10 {
        return Err(RegisterError::Degenerate { which, reason: "points are collinear".into() });
    }
    Ok(())
}

struct EStep {
    posterior: DMatrix<f64>,
    outlier: Vec<f64>,
    log_likelihood: f64,
}

fn e_step(xn: &DMatrix<f64>, moved: &DMatrix<f64>, sigma2: f64, w: f64) -> EStep {
    let (n, m) = (xn.nrows(), moved.nrows());
    let log_in = ((1.0 - w) / m as f64).ln() - (2.0 * std::f64::consts::PI * sigma2).ln();
    let log_out = if w > 0.0 { Some((w / n as f64).ln()) } else { None };
    let mut posterior = DMatrix::zeros(m, n);
    let mut outlier = vec![0.0; n];
    let mut total = 0.0;
    let mut terms = vec![0.0; m];
    for i in 0..n {
        let mut hi = log_out.unwrap_or(f64::NEG_INFINITY);
        for j in 0..m {
            let d2 = (xn[(i, 0)] - moved[(j, 0)]).powi(2) + (xn[(i, 1)] - moved[(j, 1)]).powi(2);
            terms[j] = log_in - d2 / (2.0 * sigma2);
            hi = hi.max(terms[j]);
        }
        let mut sum: f64 = terms.iter().map(|t| (t - hi).exp()).sum();
        if let Some(lo) = log_out {
            sum += (lo - hi).exp();
        }
        let lse = hi + sum.ln();
        for j in 0..m {
            posterior[(j, i)] = (terms[j] - lse).exp();
        }
        outlier[i] = log_out.map_or(0.0, |lo| (lo - lse).exp());
        total += lse;
    }
    EStep { posterior, outlier, log_likelihood: total }
}

/// Transform state in normalized coordinates.
struct Model {
    kind: ModelKind,
    /// Source points after the current transform.
    moved: DMatrix<f64>,
    lambda: f64,
}

enum ModelKind {
    Rigid { rotation: Matrix2<f64>, scale: f64, translation: Vector2<f64> },
    Affine { matrix: Matrix2<f64>, translation: Vector2<f64> },
    Nonrigid { kernel: DMatrix<f64>, coefficients: DMatrix<f64>, basis: DMatrix<f64>, beta: f64 },
}

impl Model {
    fn new(params: &CpdParams, yn: &DMatrix<f64>, start_angle: f64) -> Self {
        let (s, c) = start_angle.sin_cos();
        let start = Matrix2::new(c, -s, s, c);
        let kind = match params.mode {
            CpdMode::Rigid => ModelKind::Rigid { rotation: start, scale: 1.0, translation: Vector2::zeros() },
            CpdMode::Affine => ModelKind::Affine { matrix: start, translation: Vector2::zeros() },
            CpdMode::Nonrigid => {
                let m = yn.nrows();
                let k = -0.5 / (params.beta * params.beta);
                let kernel = DMatrix::from_fn(m, m, |i, j| {
                    let d2 = (yn[(i, 0)] - yn[(j, 0)]).powi(2) + (yn[(i, 1)] - yn[(j, 1)]).powi(2);
                    (k * d2).exp()
                });
                ModelKind::Nonrigid {
                    kernel,
                    coefficients: DMatrix::zeros(m, 2),
                    basis: yn.clone(),
                    beta: params.beta,
                }
            }
        };
        let mut model = Model { kind, moved: yn.clone(), lambda: params.lambda };
        model.refresh_moved(yn);
        model
    }

    fn penalty(&self) -> f64 {
        match &self.kind {
            ModelKind::Nonrigid { kernel, coefficients, .. } => {
                -0.5 * self.lambda * (coefficients.transpose() * kernel * coefficients).trace()
            }
            _ => 0.0,
        }
    }

    /// Closed-form M-step; returns the updated variance (unclamped).
    fn m_step(&mut self, xn: &DMatrix<f64>, yn: &DMatrix<f64>, e: &EStep, sigma2: f64) -> f64 {
        let p = &e.posterior;
        let p1 = p.column_sum(); // M
        let pt1 = p.row_sum_tr(); // N
        let np = p1.sum();
        if !(np > 0.0) {
            return sigma2;
        }
        if let ModelKind::Nonrigid { kernel, coefficients, .. } = &mut self.kind {
            let m = yn.nrows();
            let dp1 = DMatrix::from_diagonal(&p1);
            let lhs = &dp1 * &*kernel + DMatrix::identity(m, m) * (self.lambda * sigma2);
            let px = p * xn;
            let rhs = &px - &dp1 * yn;
            if let Some(w) = lhs.lu().solve(&rhs) {
                *coefficients = w;
            }
            let moved = yn + &*kernel * &*coefficients;
            let x_term: f64 =
                (0..xn.nrows()).map(|i| pt1[i] * (xn[(i, 0)].powi(2) + xn[(i, 1)].powi(2))).sum();
            let cross = px.component_mul(&moved).sum();
            let t_term: f64 =
                (0..m).map(|j| p1[j] * (moved[(j, 0)].powi(2) + moved[(j, 1)].powi(2))).sum();
            self.moved = moved;
            return ((x_term - 2.0 * cross + t_term) / (2.0 * np)).abs();
        }

        let mu_x = xn.transpose() * &pt1 / np;
        let mu_y = yn.transpose() * &p1 / np;
        let xc = DMatrix::from_fn(xn.nrows(), 2, |i, j| xn[(i, j)] - mu_x[j]);
        let yc = DMatrix::from_fn(yn.nrows(), 2, |i, j| yn[(i, j)] - mu_y[j]);
        let a = to_mat2(&(xc.transpose() * p.transpose() * &yc));
        let yy = to_mat2(&(yc.transpose() * DMatrix::from_diagonal(&p1) * &yc));
        let x_term: f64 =
            (0..xn.nrows()).map(|i| pt1[i] * (xc[(i, 0)].powi(2) + xc[(i, 1)].powi(2))).sum();
        let mu_x = Vector2::new(mu_x[0], mu_x[1]);
        let mu_y = Vector2::new(mu_y[0], mu_y[1]);
        let new_sigma2 = match &mut self.kind {
            ModelKind::Rigid { rotation, scale, translation } => {
                let svd = a.svd(true, true);
                let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
                let d = (u * v_t).determinant().signum();
                let r = u * Matrix2::new(1.0, 0.0, 0.0, d) * v_t;
                let tr_ar = (a.transpose() * r).trace();
                let s = tr_ar / yy.trace();
                *rotation = r;
                *scale = s;
                *translation = mu_x - s * r * mu_y;
                (x_term - s * tr_ar) / (2.0 * np)
            }
            ModelKind::Affine { matrix, translation } => match yy.try_inverse() {
                Some(inv) => {
                    let b = a * inv;
                    *matrix = b;
                    *translation = mu_x - b * mu_y;
                    (x_term - (a * b.transpose()).trace()) / (2.0 * np)
                }
                None => sigma2,
            },
            ModelKind::Nonrigid { .. } => unreachable!("handled above"),
        };
        self.refresh_moved(yn);
        new_sigma2.abs()
    }

    fn refresh_moved(&mut self, yn: &DMatrix<f64>) {
        let (lin, t) = match &self.kind {
            ModelKind::Rigid { rotation, scale, translation } => (rotation * *scale, *translation),
            ModelKind::Affine { matrix, translation } => (*matrix, *translation),
            ModelKind::Nonrigid { .. } => return,
        };
        self.moved = DMatrix::from_fn(yn.nrows(), 2, |i, j| {
            lin[(j, 0)] * yn[(i, 0)] + lin[(j, 1)] * yn[(i, 1)] + t[j]
        });
    }

    /// The current transform in original (unnormalized) coordinates.
    fn denormalized(&self, fx: &Frame, fy: &Frame) -> Transform {
        let ratio = fx.scale / fy.scale;
        let mu_y = Vector2::new(fy.mean.x, fy.mean.y);
        let mu_x = Vector2::new(fx.mean.x, fx.mean.y);
        match &self.kind {
            ModelKind::Rigid { rotation, scale, translation } => {
                let s = scale * ratio;
                let t = fx.scale * translation - s * rotation * mu_y + mu_x;
                Transform::Rigid { rotation: mat_to(rotation), scale: s, translation: [t.x, t.y] }
            }
            ModelKind::Affine { matrix, translation } => {
                let b = matrix * ratio;
                let t = fx.scale * translation - b * mu_y + mu_x;
                Transform::Affine { matrix: mat_to(&b), translation: [t.x, t.y] }
            }
            ModelKind::Nonrigid { coefficients, basis, beta, .. } => Transform::Nonrigid {
                basis_points: PointSet::from_matrix(basis).points,
                coefficients: PointSet::from_matrix(coefficients).points,
                beta: *beta,
                source_frame: *fy,
                target_frame: *fx,
            },
        }
    }
}
