//! Planar homography between the intensity and depth images.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix3, Point2, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::Blob;

pub const MIN_CORRESPONDENCES: usize = 8;
const HEADER: &str = "MF-H v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignmentSource {
    Calibrated,
    Manual,
    Identity,
}

impl fmt::Display for AlignmentSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Calibrated => "calibrated",
            Self::Manual => "manual",
            Self::Identity => "identity",
        })
    }
}

impl FromStr for AlignmentSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "calibrated" => Ok(Self::Calibrated),
            "manual" => Ok(Self::Manual),
            "identity" => Ok(Self::Identity),
            other => Err(format!("unknown alignment source `{other}`")),
        }
    }
}

/// Maps intensity pixels to depth pixels (continuous coordinates).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentTransform {
    h: Matrix3<f64>,
    h_inv: Matrix3<f64>,
    pub rms_reproj_px: f64,
    pub source: AlignmentSource,
}

impl AlignmentTransform {
    pub fn identity() -> Self {
        Self {
            h: Matrix3::identity(),
            h_inv: Matrix3::identity(),
            rms_reproj_px: 0.0,
            source: AlignmentSource::Identity,
        }
    }

    /// Normalizes so that `H[2][2] = 1`; rejects singular matrices.
    pub fn new(h: Matrix3<f64>, rms_reproj_px: f64, source: AlignmentSource) -> Result<Self> {
        if !h.iter().all(|v| v.is_finite()) || h[(2, 2)].abs() < 1e-12 {
            return Err(Error::Calibration("homography must be finite with H[2][2] != 0".into()));
        }
        let h = h / h[(2, 2)];
        let scale = h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if h.determinant().abs() < 1e-12 * scale.powi(3) {
            return Err(Error::Calibration("homography is singular".into()));
        }
        let h_inv = h.try_inverse().ok_or_else(|| Error::Calibration("homography is singular".into()))?;
        Ok(Self {
            h,
            h_inv,
            rms_reproj_px,
            source,
        })
    }

    /// A user-supplied row-major matrix.
    pub fn manual(values: [f64; 9]) -> Result<Self> {
        Self::new(Matrix3::from_row_slice(&values), 0.0, AlignmentSource::Manual)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.h
    }

    pub fn inverse_matrix(&self) -> &Matrix3<f64> {
        &self.h_inv
    }

    pub fn apply(&self, p: &Point2<f64>) -> Point2<f64> {
        apply_h(&self.h, p)
    }

    pub fn apply_inverse(&self, p: &Point2<f64>) -> Point2<f64> {
        apply_h(&self.h_inv, p)
    }

    /// RMS distance between `H src` and `dst`.
    pub fn rms_error(&self, pairs: &[(Point2<f64>, Point2<f64>)]) -> f64 {
        if pairs.is_empty() {
            return 0.0;
        }
        let ss: f64 = pairs.iter().map(|(s, d)| (self.apply(s) - d).norm_squared()).sum();
        (ss / pairs.len() as f64).sqrt()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{HEADER} {} {}\n", self.rms_reproj_px, self.source);
        for r in 0..3 {
            s.push_str(&format!("{} {} {}\n", self.h[(r, 0)], self.h[(r, 1)], self.h[(r, 2)]));
        }
        s
    }

    pub fn from_text(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or("empty alignment file")?;
        let rest = header
            .strip_prefix(HEADER)
            .ok_or_else(|| format!("expected `{HEADER}` header"))?;
        let fields: Vec<&str> = rest.split_whitespace().collect();
        let [rms, source] = fields[..] else {
            return Err("header needs rms and source".into());
        };
        let rms: f64 = rms.parse().map_err(|_| format!("bad rms `{rms}`"))?;
        let source: AlignmentSource = source.parse()?;
        let mut values = Vec::with_capacity(9);
        for line in lines {
            for tok in line.split_whitespace() {
                values.push(tok.parse::<f64>().map_err(|_| format!("bad matrix entry `{tok}`"))?);
            }
        }
        if values.len() != 9 {
            return Err(format!("expected 9 matrix entries, found {}", values.len()));
        }
        Self::new(Matrix3::from_row_slice(&values), rms, source).map_err(|e| e.to_string())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text).map_err(|reason| Error::Malformed {
            path: path.to_path_buf(),
            reason,
        })
    }
}

pub fn apply_h(h: &Matrix3<f64>, p: &Point2<f64>) -> Point2<f64> {
    let v = h * Vector3::new(p.x, p.y, 1.0);
    Point2::new(v.x / v.z, v.y / v.z)
}

/// Similarity that moves the centroid to the origin and the mean distance to sqrt(2).
fn normalizer(pts: &[Point2<f64>]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let c = pts.iter().fold(nalgebra::Vector2::zeros(), |a, p| a + p.coords) / n;
    let mean_d = pts.iter().map(|p| (p.coords - c).norm()).sum::<f64>() / n;
    let s = if mean_d > 0.0 { std::f64::consts::SQRT_2 / mean_d } else { 1.0 };
    Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0)
}

/// Ratio of the smaller to the larger principal spread of a point set.
fn spread_ratio(pts: &[Point2<f64>]) -> f64 {
    let n = pts.len() as f64;
    let c = pts.iter().fold(nalgebra::Vector2::zeros(), |a, p| a + p.coords) / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let d = p.coords - c;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    let tr = sxx + syy;
    if tr <= 0.0 {
        return 0.0;
    }
    let disc = ((sxx - syy).powi(2) / 4.0 + sxy * sxy).sqrt();
    let (hi, lo) = (tr / 2.0 + disc, (tr / 2.0 - disc).max(0.0));
    (lo / hi).sqrt()
}

fn check_configuration(src: &[Point2<f64>], dst: &[Point2<f64>]) -> Result<()> {
    if src.len() != dst.len() {
        return Err(Error::Calibration("point lists differ in length".into()));
    }
    if src.len() < MIN_CORRESPONDENCES {
        return Err(Error::Calibration(format!(
            "need at least {MIN_CORRESPONDENCES} correspondences, got {}",
            src.len()
        )));
    }
    if spread_ratio(src) < 1e-6 || spread_ratio(dst) < 1e-6 {
        return Err(Error::Calibration("correspondences are collinear".into()));
    }
    Ok(())
}

/// Normalized direct linear transform.
fn dlt(src: &[Point2<f64>], dst: &[Point2<f64>]) -> Result<Matrix3<f64>> {
    let ts = normalizer(src);
    let td = normalizer(dst);
    let mut a = DMatrix::<f64>::zeros(2 * src.len(), 9);
    for (i, (s, d)) in src.iter().zip(dst).enumerate() {
        let s = apply_h(&ts, s);
        let d = apply_h(&td, d);
        let r = 2 * i;
        a.row_mut(r)
            .copy_from_slice(&[-s.x, -s.y, -1.0, 0.0, 0.0, 0.0, d.x * s.x, d.x * s.y, d.x]);
        a.row_mut(r + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, -s.x, -s.y, -1.0, d.y * s.x, d.y * s.y, d.y]);
    }
    // The null vector of A is the eigenvector of A^T A with the smallest eigenvalue.
    let ata = a.transpose() * &a;
    let eig = nalgebra::SymmetricEigen::new(ata);
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    // A second near-zero eigenvalue means the solution is not unique.
    if eig.eigenvalues[order[1]] <= 1e-12 * eig.eigenvalues[order[8]] {
        return Err(Error::Calibration("degenerate correspondence configuration".into()));
    }
    let v = eig.eigenvectors.column(order[0]);
    let hn = Matrix3::from_row_slice(v.as_slice());
    let td_inv = td
        .try_inverse()
        .ok_or_else(|| Error::Calibration("degenerate normalization".into()))?;
    Ok(td_inv * hn * ts)
}

/// Gauss-Newton refinement of the eight free entries on reprojection error.
fn refine(h: Matrix3<f64>, src: &[Point2<f64>], dst: &[Point2<f64>]) -> Matrix3<f64> {
    let mut p = SVector::<f64, 8>::from_iterator((h / h[(2, 2)]).transpose().iter().take(8).copied());
    let to_h = |p: &SVector<f64, 8>| Matrix3::new(p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], 1.0);
    let cost = |p: &SVector<f64, 8>| -> f64 {
        let h = to_h(p);
        src.iter().zip(dst).map(|(s, d)| (apply_h(&h, s) - d).norm_squared()).sum()
    };
    let mut current = cost(&p);
    for _ in 0..20 {
        let mut jtj = SMatrix::<f64, 8, 8>::zeros();
        let mut jtr = SVector::<f64, 8>::zeros();
        for (s, d) in src.iter().zip(dst) {
            let w = p[6] * s.x + p[7] * s.y + 1.0;
            let u = (p[0] * s.x + p[1] * s.y + p[2]) / w;
            let v = (p[3] * s.x + p[4] * s.y + p[5]) / w;
            let ju = SVector::<f64, 8>::from_column_slice(&[
                s.x / w,
                s.y / w,
                1.0 / w,
                0.0,
                0.0,
                0.0,
                -u * s.x / w,
                -u * s.y / w,
            ]);
            let jv = SVector::<f64, 8>::from_column_slice(&[
                0.0,
                0.0,
                0.0,
                s.x / w,
                s.y / w,
                1.0 / w,
                -v * s.x / w,
                -v * s.y / w,
            ]);
            jtj += ju * ju.transpose() + jv * jv.transpose();
            jtr += ju * (u - d.x) + jv * (v - d.y);
        }
        let Some(step) = jtj.cholesky().map(|c| c.solve(&jtr)) else {
            break;
        };
        let cand = p - step;
        let c = cost(&cand);
        if !(c < current) {
            break;
        }
        let done = current - c < 1e-15 * current.max(1e-300);
        p = cand;
        current = c;
        if done {
            break;
        }
    }
    to_h(&p)
}

/// Least-squares homography taking `src` onto `dst`.
pub fn fit_homography(src: &[Point2<f64>], dst: &[Point2<f64>]) -> Result<Matrix3<f64>> {
    check_configuration(src, dst)?;
    let h = dlt(src, dst)?;
    if h[(2, 2)].abs() < 1e-12 {
        return Err(Error::Calibration("homography sends the origin to infinity".into()));
    }
    Ok(refine(h / h[(2, 2)], src, dst))
}

/// Fits a calibrated transform to (intensity px, depth px) pairs.
pub fn fit_alignment(pairs: &[(Point2<f64>, Point2<f64>)]) -> Result<AlignmentTransform> {
    let src: Vec<_> = pairs.iter().map(|p| p.0).collect();
    let dst: Vec<_> = pairs.iter().map(|p| p.1).collect();
    let h = fit_homography(&src, &dst)?;
    let mut t = AlignmentTransform::new(h, 0.0, AlignmentSource::Calibrated)?;
    t.rms_reproj_px = t.rms_error(pairs);
    Ok(t)
}

/// Nominal dot positions in one image, indexed by dot id.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPrior {
    pub pixels: Vec<Point2<f64>>,
    pub spacing_px: f64,
}

impl GridPrior {
    pub fn from_rig(rig: &crate::rig::SensorRig, camera: &crate::camera::CameraModel) -> Self {
        Self {
            pixels: rig.dot_pixels(camera),
            spacing_px: rig.dot_spacing_px(camera),
        }
    }

    /// Blob index for every dot id whose nearest blob also has it as nearest dot.
    pub fn match_blobs(&self, blobs: &[Blob]) -> Vec<Option<usize>> {
        let reach = self.spacing_px / 2.0;
        let nearest_dot = |b: &Blob| {
            self.pixels
                .iter()
                .enumerate()
                .map(|(i, g)| (i, (g - b.center).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|x| x.0)
        };
        self.pixels
            .iter()
            .enumerate()
            .map(|(id, g)| {
                let (bi, d) = blobs
                    .iter()
                    .enumerate()
                    .map(|(bi, b)| (bi, (b.center - g).norm()))
                    .min_by(|a, b| a.1.total_cmp(&b.1))?;
                (d <= reach && nearest_dot(&blobs[bi]) == Some(id)).then_some(bi)
            })
            .collect()
    }
}

/// Dot correspondences `(dot_id, intensity px, depth px)` matched through grid ids.
pub fn match_by_grid(
    rgb_blobs: &[Blob],
    depth_blobs: &[Blob],
    rgb_prior: &GridPrior,
    depth_prior: &GridPrior,
) -> Vec<(usize, Point2<f64>, Point2<f64>)> {
    let a = rgb_prior.match_blobs(rgb_blobs);
    let b = depth_prior.match_blobs(depth_blobs);
    a.iter()
        .zip(&b)
        .enumerate()
        .filter_map(|(id, (ra, rb))| Some((id, rgb_blobs[(*ra)?].center, depth_blobs[(*rb)?].center)))
        .collect()
}

pub fn calibrate_alignment(
    rgb_blobs: &[Blob],
    depth_blobs: &[Blob],
    rgb_prior: &GridPrior,
    depth_prior: &GridPrior,
) -> Result<AlignmentTransform> {
    let pairs: Vec<_> = match_by_grid(rgb_blobs, depth_blobs, rgb_prior, depth_prior)
        .into_iter()
        .map(|(_, a, b)| (a, b))
        .collect();
    fit_alignment(&pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_points() -> Vec<Point2<f64>> {
        let mut v = Vec::new();
        for j in 0..4 {
            for i in 0..5 {
                v.push(Point2::new(100.0 + 150.0 * i as f64, 60.0 + 120.0 * j as f64 + 3.0 * i as f64));
            }
        }
        v
    }

    #[test]
    fn identical_sets_give_identity() {
        let p = grid_points();
        let h = fit_homography(&p, &p).unwrap();
        assert!((h - Matrix3::identity()).abs().max() < 1e-9, "{h}");
    }

    #[test]
    fn recovers_a_known_homography() {
        let h0 = Matrix3::new(0.68, 0.01, -12.0, -0.005, 0.67, 35.0, 1e-5, -2e-5, 1.0);
        let src = grid_points();
        let dst: Vec<_> = src.iter().map(|p| apply_h(&h0, p)).collect();
        let h = fit_homography(&src, &dst).unwrap();
        for (a, b) in h.iter().zip(h0.iter()) {
            assert!((a - b).abs() <= 1e-6 * b.abs().max(1e-3), "{h} vs {h0}");
        }
    }

    #[test]
    fn too_few_or_collinear_points_fail() {
        let p = grid_points();
        assert!(matches!(fit_homography(&p[..7], &p[..7]), Err(Error::Calibration(_))));
        let line: Vec<_> = (0..10).map(|i| Point2::new(i as f64, 2.0 * i as f64)).collect();
        assert!(matches!(fit_homography(&line, &line), Err(Error::Calibration(_))));
    }

    #[test]
    fn text_round_trip() {
        let t = AlignmentTransform::manual([0.7, 0.0, -10.0, 0.0, 0.7, 30.25, 0.0, 0.0, 1.0]).unwrap();
        let back = AlignmentTransform::from_text(&t.to_text()).unwrap();
        assert_eq!(back, t);
        assert!(t.to_text().starts_with("MF-H v1 0 manual\n0.7 0 -10\n"));
        assert!(AlignmentTransform::from_text("MF-H v1 0 manual\n1 2 3\n").is_err());
        assert!(AlignmentTransform::from_text("nope").is_err());
    }

    #[test]
    fn normalizes_and_rejects_singular() {
        let t = AlignmentTransform::new(Matrix3::identity() * 2.0, 0.0, AlignmentSource::Manual).unwrap();
        assert_eq!(t.matrix()[(2, 2)], 1.0);
        assert!(AlignmentTransform::manual([1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn inverse_round_trips() {
        let t = AlignmentTransform::new(
            Matrix3::new(0.7, 0.02, 5.0, -0.01, 0.69, 8.0, 2e-5, 1e-5, 1.0),
            0.0,
            AlignmentSource::Manual,
        )
        .unwrap();
        let p = Point2::new(321.5, 77.25);
        assert!((t.apply_inverse(&t.apply(&p)) - p).norm() < 1e-9);
    }
}
