//! Scripts built in code rather than loaded from presets.

use crate::synth::{Keyframe, Material, Motion, ObjectTrack, RoiMm, ScenarioScript, Shape};

fn held(position_mm: [f64; 3]) -> Keyframe {
    Keyframe {
        t: 0.0,
        position_mm,
        rotation_deg: [0.0; 3],
        shear_mm: [0.0; 2],
        motion: Motion::Hold,
    }
}

fn table(z_mm: f64) -> ObjectTrack {
    ObjectTrack {
        name: "table".into(),
        shape: Shape::Plane {
            normal: [0.0, 0.0, 1.0],
            offset_mm: 0.0,
        },
        material: Material::default(),
        keyframes: vec![held([0.0, 0.0, z_mm])],
    }
}

/// A flat target held `distance_mm` beyond the membrane for `frames` frames.
pub fn plane_script(distance_mm: f64, frames: usize, seed: u64) -> ScenarioScript {
    ScenarioScript {
        name: format!("plane_{distance_mm}"),
        duration_s: frames as f64 / crate::DEFAULT_FRAME_RATE_HZ,
        frame_rate_hz: crate::DEFAULT_FRAME_RATE_HZ,
        seed,
        baseline_frames: 0,
        gravity_mm_s2: 9810.0,
        roi_mm: RoiMm::default(),
        objects: vec![table(distance_mm)],
        sensor: None,
    }
}

/// Objects sized by [`measurement_script`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasuredObject {
    /// 57 mm cube, all edges.
    Box57,
    /// 20 mm radius sphere, all curve.
    Sphere20,
}

impl MeasuredObject {
    pub const ALL: [MeasuredObject; 2] = [MeasuredObject::Box57, MeasuredObject::Sphere20];

    pub fn name(self) -> &'static str {
        match self {
            MeasuredObject::Box57 => "box57",
            MeasuredObject::Sphere20 => "sphere20",
        }
    }

    pub fn shape(self) -> Shape {
        match self {
            MeasuredObject::Box57 => Shape::Box {
                half_extents_mm: [28.5; 3],
            },
            MeasuredObject::Sphere20 => Shape::Sphere { radius_mm: 20.0 },
        }
    }

    /// True width, depth and height in mm.
    pub fn dimensions_mm(self) -> [f64; 3] {
        match self {
            MeasuredObject::Box57 => [57.0; 3],
            MeasuredObject::Sphere20 => [40.0; 3],
        }
    }
}

/// Gap between the object's near face and the membrane in measurement scenes.
pub const MEASUREMENT_STANDOFF_MM: f64 = 0.5;

/// The object floats just off the membrane at `(x, y)` in front of a table
/// touching its far side. Returns the script and the table's distance from
/// the rest membrane plane.
pub fn measurement_script(object: MeasuredObject, x_mm: f64, y_mm: f64, frames: usize, seed: u64) -> (ScenarioScript, f64) {
    let height = object.dimensions_mm()[2];
    let center_z = MEASUREMENT_STANDOFF_MM + height / 2.0;
    let table_z = MEASUREMENT_STANDOFF_MM + height;
    let track = ObjectTrack {
        name: object.name().into(),
        shape: object.shape(),
        material: Material::default(),
        keyframes: vec![held([x_mm, y_mm, center_z])],
    };
    let script = ScenarioScript {
        name: format!("measure_{}", object.name()),
        objects: vec![track, table(table_z)],
        ..plane_script(table_z, frames, seed)
    };
    (script, table_z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripts_validate() {
        plane_script(45.0, 10, 1).validate().unwrap();
        assert_eq!(plane_script(45.0, 10, 1).frame_count(), 10);
        for o in MeasuredObject::ALL {
            let (s, z) = measurement_script(o, 3.0, -2.0, 1, 5);
            s.validate().unwrap();
            assert_eq!(z, 0.5 + o.dimensions_mm()[2]);
        }
    }
}
