//! Persistent dot identities across frames.

use std::io::Write;

use nalgebra::{Point2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::blob::Blob;
use crate::imgproc::flow::{lk_flow_pyramids, FlowParams, Pyramid};
use crate::raster::Raster;

/// Invalid flows in a row before a track is dropped.
pub const MAX_INVALID_STREAK: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DotTrack {
    pub dot_id: usize,
    pub initial_px: Point2<f64>,
    pub current_px: Point2<f64>,
    pub displacement_px: Vector2<f64>,
    pub alive: bool,
    /// Flow applied on the latest frame (zero when invalid or re-acquired).
    pub last_flow_px: Vector2<f64>,
    pub invalid_streak: u32,
}

/// Assigns grid ids to blobs by the nearest nominal dot position within
/// `spacing_px / 2`. Blobs farther than that from every dot are ignored.
pub fn assign_grid_ids(blobs: &[Blob], grid_px: &[Point2<f64>], spacing_px: f64) -> Result<Vec<(usize, usize)>> {
    let reach = spacing_px / 2.0;
    let mut owner: Vec<Option<usize>> = vec![None; grid_px.len()];
    for (bi, b) in blobs.iter().enumerate() {
        let nearest = grid_px
            .iter()
            .enumerate()
            .map(|(id, g)| (id, (g - b.center).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        let Some((id, d)) = nearest else { break };
        if d > reach {
            continue;
        }
        if let Some(first) = owner[id] {
            return Err(Error::AmbiguousAssignment {
                dot_id: id,
                first,
                second: bi,
            });
        }
        owner[id] = Some(bi);
    }
    Ok(owner
        .iter()
        .enumerate()
        .filter_map(|(id, o)| o.map(|bi| (id, bi)))
        .collect())
}

#[derive(Debug, Clone)]
pub struct DotTracker {
    tracks: Vec<DotTrack>,
    params: FlowParams,
    spacing_px: f64,
    prev: Option<Pyramid>,
}

impl DotTracker {
    /// Starts tracks at the blobs of the first frame.
    pub fn initialize(
        first: &Raster<u8>,
        blobs: &[Blob],
        grid_px: &[Point2<f64>],
        spacing_px: f64,
        params: FlowParams,
    ) -> Result<Self> {
        params.validate()?;
        let tracks = assign_grid_ids(blobs, grid_px, spacing_px)?
            .into_iter()
            .map(|(id, bi)| DotTrack {
                dot_id: id,
                initial_px: blobs[bi].center,
                current_px: blobs[bi].center,
                displacement_px: Vector2::zeros(),
                alive: true,
                last_flow_px: Vector2::zeros(),
                invalid_streak: 0,
            })
            .collect();
        Ok(Self {
            tracks,
            prev: Some(Pyramid::from_u8(first, params.pyramid_levels)),
            params,
            spacing_px,
        })
    }

    pub fn tracks(&self) -> &[DotTrack] {
        &self.tracks
    }

    pub fn alive_count(&self) -> usize {
        self.tracks.iter().filter(|t| t.alive).count()
    }

    pub fn has_dead_tracks(&self) -> bool {
        self.tracks.iter().any(|t| !t.alive)
    }

    /// Advances every live track by its flow into `frame`; dead tracks are
    /// re-acquired from `blobs` when given.
    pub fn update(&mut self, frame: &Raster<u8>, blobs: Option<&[Blob]>) {
        let curr = Pyramid::from_u8(frame, self.params.pyramid_levels);
        if let Some(prev) = &self.prev {
            let live: Vec<usize> = (0..self.tracks.len()).filter(|&i| self.tracks[i].alive).collect();
            let pts: Vec<Point2<f64>> = live.iter().map(|&i| self.tracks[i].current_px).collect();
            let flows = lk_flow_pyramids(prev, &curr, &pts, &self.params);
            for (&i, f) in live.iter().zip(&flows) {
                let t = &mut self.tracks[i];
                if f.valid {
                    t.current_px += f.flow;
                    t.last_flow_px = f.flow;
                    t.invalid_streak = 0;
                } else {
                    t.last_flow_px = Vector2::zeros();
                    t.invalid_streak += 1;
                    if t.invalid_streak >= MAX_INVALID_STREAK {
                        t.alive = false;
                    }
                }
                t.displacement_px = t.current_px - t.initial_px;
            }
        }
        if let Some(blobs) = blobs {
            self.reacquire(blobs);
        }
        self.prev = Some(curr);
    }

    fn reacquire(&mut self, blobs: &[Blob]) {
        let reach = self.spacing_px / 2.0;
        let mut taken = vec![false; blobs.len()];
        for t in self.tracks.iter().filter(|t| t.alive) {
            for (bi, b) in blobs.iter().enumerate() {
                if (b.center - t.current_px).norm() <= reach {
                    taken[bi] = true;
                }
            }
        }
        for t in self.tracks.iter_mut().filter(|t| !t.alive) {
            let best = blobs
                .iter()
                .enumerate()
                .filter(|(bi, _)| !taken[*bi])
                .map(|(bi, b)| (bi, (b.center - t.current_px).norm()))
                .filter(|(_, d)| *d <= reach)
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            if let Some((bi, _)) = best {
                taken[bi] = true;
                t.current_px = blobs[bi].center;
                t.displacement_px = t.current_px - t.initial_px;
                t.alive = true;
                t.invalid_streak = 0;
                t.last_flow_px = Vector2::zeros();
            }
        }
    }

    /// Sum of per-frame flow magnitudes over live tracks.
    pub fn flow_sum(&self) -> f64 {
        flow_sum(&self.tracks)
    }
}

pub fn flow_sum(tracks: &[DotTrack]) -> f64 {
    tracks.iter().filter(|t| t.alive).map(|t| t.last_flow_px.norm()).sum()
}

/// CSV rows `frame,dot_id,x,y,dx,dy,alive`.
pub fn write_tracks_csv<W: Write>(out: &mut csv::Writer<W>, frame: u64, tracks: &[DotTrack]) -> Result<()> {
    for t in tracks {
        out.write_record([
            frame.to_string(),
            t.dot_id.to_string(),
            format!("{:.4}", t.current_px.x),
            format!("{:.4}", t.current_px.y),
            format!("{:.4}", t.displacement_px.x),
            format!("{:.4}", t.displacement_px.y),
            (t.alive as u8).to_string(),
        ])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(x: f64, y: f64) -> Blob {
        Blob {
            center: Point2::new(x, y),
            area_px: 50.0,
            circularity: 0.9,
        }
    }

    #[test]
    fn ambiguous_assignment_is_an_error() {
        let grid = [Point2::new(10.0, 10.0), Point2::new(42.0, 10.0)];
        let blobs = [blob(11.0, 10.0), blob(9.0, 11.0)];
        assert!(matches!(
            assign_grid_ids(&blobs, &grid, 32.0),
            Err(Error::AmbiguousAssignment { dot_id: 0, .. })
        ));
        let ok = assign_grid_ids(&[blob(11.0, 10.0), blob(40.0, 12.0), blob(200.0, 0.0)], &grid, 32.0).unwrap();
        assert_eq!(ok, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn no_blobs_no_tracks() {
        let img = Raster::filled(64, 64, 0u8);
        let t = DotTracker::initialize(&img, &[], &[Point2::new(5.0, 5.0)], 32.0, FlowParams::default()).unwrap();
        assert!(t.tracks().is_empty());
        assert_eq!(t.flow_sum(), 0.0);
    }

    #[test]
    fn flow_sum_counts_only_live_tracks() {
        let mk = |alive| DotTrack {
            dot_id: 0,
            initial_px: Point2::origin(),
            current_px: Point2::origin(),
            displacement_px: Vector2::zeros(),
            alive,
            last_flow_px: Vector2::new(3.0, 4.0),
            invalid_streak: 0,
        };
        assert_eq!(flow_sum(&[mk(true), mk(false), mk(true)]), 10.0);
    }

    #[test]
    fn tracks_die_on_textureless_frames_and_come_back() {
        use crate::synth::render::rasterize_disks;
        let img = rasterize_disks(96, 96, &[(Point2::new(48.0, 48.0), 4.0)]).map(|a| (15.0 + 205.0 * a) as u8);
        let blank = Raster::filled(96, 96, 15u8);
        let blobs = crate::imgproc::detect_blobs(&img, &Default::default());
        let mut t =
            DotTracker::initialize(&img, &blobs, &[Point2::new(48.0, 48.0)], 32.0, FlowParams::default()).unwrap();
        // The first step still has texture in the previous frame.
        for _ in 0..4 {
            t.update(&blank, None);
        }
        assert_eq!(t.alive_count(), 0);
        t.update(&img, Some(&blobs));
        assert_eq!(t.alive_count(), 1);
        assert_eq!(t.tracks()[0].last_flow_px, Vector2::zeros());
    }
}
