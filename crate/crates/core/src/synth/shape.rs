//! Analytic primitives, their poses, and ray intersection.

use nalgebra::{Point3, Rotation3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EPS: f64 = 1e-9;

/// Primitive in its local frame. Boxes, spheres and cylinders are centered on
/// the local origin; the cylinder axis is local z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// Points with `normal . p = offset_mm`.
    Plane { normal: [f64; 3], offset_mm: f64 },
    Box { half_extents_mm: [f64; 3] },
    Sphere { radius_mm: f64 },
    Cylinder { radius_mm: f64, height_mm: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    /// Infrared reflectance in (0, 1].
    pub ir_reflectance: f64,
    /// Depth bias at the reflectance extremes; `None` uses the artifact model's default.
    #[serde(default)]
    pub albedo_bias_mm: Option<f64>,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            ir_reflectance: 0.5,
            albedo_bias_mm: None,
        }
    }
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        if !(self.ir_reflectance > 0.0 && self.ir_reflectance <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "reflectance {} outside (0, 1]",
                self.ir_reflectance
            )));
        }
        Ok(())
    }
}

/// Rigid transform from the local frame to the sensor frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Rotation3::identity(),
            translation: t,
        }
    }

    /// Roll, pitch, yaw about x, y, z in degrees.
    pub fn from_euler_deg(translation: Vector3<f64>, rpy_deg: [f64; 3]) -> Self {
        Self {
            rotation: Rotation3::from_euler_angles(
                rpy_deg[0].to_radians(),
                rpy_deg[1].to_radians(),
                rpy_deg[2].to_radians(),
            ),
            translation,
        }
    }

    pub fn to_local(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.inverse_transform_vector(&(p.coords - self.translation)))
    }

    pub fn to_world_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }
}

/// A ray hit: parameter along the (unnormalized) direction and the unit surface normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub normal: Vector3<f64>,
}

impl Shape {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        let ok = match self {
            Shape::Plane { normal, offset_mm } => {
                let n = Vector3::from(*normal).norm();
                if (n - 1.0).abs() > 1e-6 {
                    return Err(Error::InvalidParameter(format!("plane normal has length {n}")));
                }
                offset_mm.is_finite()
            }
            Shape::Box { half_extents_mm } => half_extents_mm.iter().all(|&v| positive(v)),
            Shape::Sphere { radius_mm } => positive(*radius_mm),
            Shape::Cylinder {
                radius_mm,
                height_mm,
            } => positive(*radius_mm) && positive(*height_mm),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("bad shape dimensions: {self:?}")))
        }
    }

    /// Nearest hit with `t > 0` of the ray `o + t d`, both in the local frame.
    pub fn intersect_local(&self, o: &Point3<f64>, d: &Vector3<f64>) -> Option<Hit> {
        match *self {
            Shape::Plane { normal, offset_mm } => {
                let n = Vector3::from(normal);
                let denom = n.dot(d);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let t = (offset_mm - n.dot(&o.coords)) / denom;
                (t > EPS).then_some(Hit { t, normal: n })
            }
            Shape::Box { half_extents_mm: h } => {
                let mut t_near = f64::NEG_INFINITY;
                let mut t_far = f64::INFINITY;
                let mut axis_near = 0;
                let mut axis_far = 0;
                for i in 0..3 {
                    if d[i].abs() < 1e-15 {
                        if o[i].abs() > h[i] {
                            return None;
                        }
                        continue;
                    }
                    let mut t0 = (-h[i] - o[i]) / d[i];
                    let mut t1 = (h[i] - o[i]) / d[i];
                    if t0 > t1 {
                        std::mem::swap(&mut t0, &mut t1);
                    }
                    if t0 > t_near {
                        t_near = t0;
                        axis_near = i;
                    }
                    if t1 < t_far {
                        t_far = t1;
                        axis_far = i;
                    }
                }
                if t_near > t_far {
                    return None;
                }
                let (t, axis) = if t_near > EPS {
                    (t_near, axis_near)
                } else if t_far > EPS {
                    (t_far, axis_far)
                } else {
                    return None;
                };
                let mut normal = Vector3::zeros();
                normal[axis] = (o[axis] + t * d[axis]).signum();
                Some(Hit { t, normal })
            }
            Shape::Sphere { radius_mm: r } => {
                let a = d.dot(d);
                let b = 2.0 * o.coords.dot(d);
                let c = o.coords.dot(&o.coords) - r * r;
                let t = smallest_positive_root(a, b, c)?;
                Some(Hit {
                    t,
                    normal: (o.coords + t * d) / r,
                })
            }
            Shape::Cylinder {
                radius_mm: r,
                height_mm,
            } => {
                let hz = height_mm / 2.0;
                let mut best: Option<Hit> = None;
                let mut consider = |hit: Hit| {
                    if best.is_none_or(|b| hit.t < b.t) {
                        best = Some(hit);
                    }
                };
                let a = d.x * d.x + d.y * d.y;
                if a > 1e-15 {
                    let b = 2.0 * (o.x * d.x + o.y * d.y);
                    let c = o.x * o.x + o.y * o.y - r * r;
                    let disc = b * b - 4.0 * a * c;
                    if disc >= 0.0 {
                        let sq = disc.sqrt();
                        for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                            let z = o.z + t * d.z;
                            if t > EPS && z.abs() <= hz {
                                let p = o.coords + t * d;
                                consider(Hit {
                                    t,
                                    normal: Vector3::new(p.x / r, p.y / r, 0.0),
                                });
                            }
                        }
                    }
                }
                if d.z.abs() > 1e-15 {
                    for cap in [-hz, hz] {
                        let t = (cap - o.z) / d.z;
                        let x = o.x + t * d.x;
                        let y = o.y + t * d.y;
                        if t > EPS && x * x + y * y <= r * r {
                            consider(Hit {
                                t,
                                normal: Vector3::new(0.0, 0.0, cap.signum()),
                            });
                        }
                    }
                }
                best
            }
        }
    }

    /// Largest extent of the shape along unit direction `v` (local frame), the
    /// support function. `None` for unbounded shapes.
    pub fn support(&self, v: &Vector3<f64>) -> Option<f64> {
        match *self {
            Shape::Plane { .. } => None,
            Shape::Box { half_extents_mm: h } => {
                Some(h[0] * v.x.abs() + h[1] * v.y.abs() + h[2] * v.z.abs())
            }
            Shape::Sphere { radius_mm } => Some(radius_mm * v.norm()),
            Shape::Cylinder {
                radius_mm,
                height_mm,
            } => Some(radius_mm * v.xy().norm() + height_mm / 2.0 * v.z.abs()),
        }
    }
}

fn smallest_positive_root(a: f64, b: f64, c: f64) -> Option<f64> {
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 || a == 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let t0 = (-b - sq) / (2.0 * a);
    let t1 = (-b + sq) / (2.0 * a);
    if t0 > EPS {
        Some(t0)
    } else if t1 > EPS {
        Some(t1)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub name: String,
    pub shape: Shape,
    pub material: Material,
    pub pose: Pose,
    pub velocity_mm_s: Option<Vector3<f64>>,
    /// In-plane drag the object applies to the membrane it touches.
    pub surface_shear_mm: Vector2<f64>,
}

impl SceneObject {
    pub fn new(name: impl Into<String>, shape: Shape, pose: Pose) -> Self {
        Self {
            name: name.into(),
            shape,
            material: Material::default(),
            pose,
            velocity_mm_s: None,
            surface_shear_mm: Vector2::zeros(),
        }
    }

    pub fn with_material(mut self, material: Material) -> Self {
        self.material = material;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.shape.validate()?;
        self.material.validate()?;
        let det = self.pose.rotation.matrix().determinant();
        if (det - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("rotation determinant {det}")));
        }
        Ok(())
    }

    /// Nearest hit of a sensor-frame ray; the normal is returned in the sensor frame.
    pub fn intersect(&self, o: &Point3<f64>, d: &Vector3<f64>) -> Option<Hit> {
        let lo = self.pose.to_local(o);
        let ld = self.pose.rotation.inverse_transform_vector(d);
        self.shape.intersect_local(&lo, &ld).map(|h| Hit {
            t: h.t,
            normal: self.pose.to_world_vector(&h.normal),
        })
    }

    /// Smallest sensor-frame z over the object, if bounded.
    pub fn min_z(&self) -> Option<f64> {
        let down = self
            .pose
            .rotation
            .inverse_transform_vector(&Vector3::new(0.0, 0.0, -1.0));
        self.shape.support(&down).map(|s| self.pose.translation.z - s)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
}

impl Scene {
    pub fn new(objects: Vec<SceneObject>) -> Self {
        Self { objects }
    }

    pub fn validate(&self) -> Result<()> {
        self.objects.iter().try_for_each(SceneObject::validate)
    }

    /// Nearest hit over all objects, with the index of the object hit.
    pub fn intersect(&self, o: &Point3<f64>, d: &Vector3<f64>) -> Option<(usize, Hit)> {
        let mut best: Option<(usize, Hit)> = None;
        for (i, obj) in self.objects.iter().enumerate() {
            if let Some(h) = obj.intersect(o, d) {
                if best.is_none_or(|(_, b)| h.t < b.t) {
                    best = Some((i, h));
                }
            }
        }
        best
    }
}
