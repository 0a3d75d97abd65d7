//! Which source views see each point, and what color they record there.

use rayon::prelude::*;

use crate::error::Result;
use crate::geometry::{project_point, ColorRGB};
use crate::scene_io::{Scene, SourceView};
use crate::visibility::{frustum_select, hidden_point_removal};

/// One source view's sighting of a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub view_id: u32,
    pub pixel: (u32, u32),
    pub color: ColorRGB,
    /// Depth along the view's optical axis.
    pub depth: f64,
}

/// Observations per cloud point, each list sorted by view id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationTable {
    entries: Vec<Vec<Observation>>,
}

impl ObservationTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn observations(&self, point: usize) -> &[Observation] {
        &self.entries[point]
    }

    pub fn is_observed(&self, point: usize) -> bool {
        !self.entries[point].is_empty()
    }

    pub fn observed_count(&self) -> usize {
        self.entries.iter().filter(|e| !e.is_empty()).count()
    }
}

/// Occlusion handling while building the table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Occlusion {
    /// Every in-frustum point counts as seen.
    Ignore,
    /// Hidden point removal from each view center with this radius factor.
    HiddenPointRemoval { gamma: f64 },
}

fn sightings(scene: &Scene, view: &SourceView, occlusion: Occlusion) -> Result<Vec<(usize, Observation)>> {
    let cloud = &scene.cloud;
    let mut subset = frustum_select(cloud, &view.pose, &view.intrinsics);
    if let Occlusion::HiddenPointRemoval { gamma } = occlusion {
        let center = crate::geometry::camera_center(&view.pose);
        subset = hidden_point_removal(cloud, &subset, &center, gamma)?;
    }
    let mut out = Vec::with_capacity(subset.len());
    for &i in subset.indices() {
        let Some(proj) = project_point(&cloud.positions()[i], &view.pose, &view.intrinsics) else {
            continue;
        };
        let Some((x, y)) = view.intrinsics.pixel_index(proj.pixel) else {
            continue;
        };
        out.push((
            i,
            Observation {
                view_id: view.id,
                pixel: (x, y),
                color: view.image.get(x, y),
                depth: proj.depth,
            },
        ));
    }
    Ok(out)
}

/// Projects the cloud into every source view and records sampled colors.
///
/// Views are processed in parallel; merging follows view-id order so the
/// table is identical for any thread count.
pub fn build_observation_table(scene: &Scene, occlusion: Occlusion) -> Result<ObservationTable> {
    let per_view: Vec<Vec<(usize, Observation)>> = scene
        .views
        .par_iter()
        .map(|v| sightings(scene, v, occlusion))
        .collect::<Result<_>>()?;
    let mut entries = vec![Vec::new(); scene.cloud.len()];
    for list in per_view {
        for (i, obs) in list {
            entries[i].push(obs);
        }
    }
    Ok(ObservationTable { entries })
}
