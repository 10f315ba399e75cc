//! Registration overlap and detection precision/recall.

use serde::{Deserialize, Serialize};

use crate::extract::StoreRegion;
use crate::raster::{BinaryMask, Point, Polygon, RasterError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub overlap_percent: f64,
    pub map_store_pixels: usize,
    pub registered_store_pixels: usize,
    pub intersection_pixels: usize,
}

impl OverlapReport {
    pub fn summary(&self) -> String {
        format!(
            "overlap {:.2}% ({} of {} map store pixels; {} registered)",
            self.overlap_percent, self.intersection_pixels, self.map_store_pixels, self.registered_store_pixels
        )
    }
}

/// Share of the map's store pixels covered by the registered stores. The
/// denominator is the map mask, so swapping the arguments generally changes
/// the result. An empty map mask gives 0.
pub fn overlap_percentage(
    map_stores_mask: &BinaryMask,
    registered_stores_mask: &BinaryMask,
) -> Result<OverlapReport, RasterError> {
    let inter = map_stores_mask.intersection(registered_stores_mask)?.count();
    let map_px = map_stores_mask.count();
    let overlap_percent = if map_px == 0 { 0.0 } else { 100.0 * inter as f64 / map_px as f64 };
    Ok(OverlapReport {
        overlap_percent,
        map_store_pixels: map_px,
        registered_store_pixels: registered_stores_mask.count(),
        intersection_pixels: inter,
    })
}

/// Pixels whose centers fall inside any of the polygons (boundary inclusive).
pub fn rasterize_polygons<'a>(polys: impl IntoIterator<Item = &'a Polygon>, width: u32, height: u32) -> BinaryMask {
    let mut mask = BinaryMask::new(width, height);
    for poly in polys {
        let (lo, hi) = poly.bbox();
        let x0 = lo.x.ceil().max(0.0) as u32;
        let y0 = lo.y.ceil().max(0.0) as u32;
        let x1 = hi.x.floor().min(width as f64 - 1.0);
        let y1 = hi.y.floor().min(height as f64 - 1.0);
        if x1 < 0.0 || y1 < 0.0 {
            continue;
        }
        for y in y0..=y1 as u32 {
            for x in x0..=x1 as u32 {
                if poly.contains(Point::new(x as f64, y as f64)) {
                    mask.set(x, y, true);
                }
            }
        }
    }
    mask
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrReport {
    pub precision: f64,
    pub recall: f64,
    pub matched: usize,
    pub detected: usize,
    pub truth: usize,
    /// False when there were no detections and precision is 1 by convention.
    pub precision_defined: bool,
}

impl PrReport {
    pub fn summary(&self) -> String {
        let note = if self.precision_defined { "" } else { " (no detections)" };
        format!(
            "precision {:.4}{note}, recall {:.4} ({} matched, {} detected, {} truth)",
            self.precision, self.recall, self.matched, self.detected, self.truth
        )
    }
}

/// Greedy nearest-centroid matching: candidate pairs within `match_dist` are
/// taken shortest first, each detection and truth item used at most once.
pub fn detection_pr(detected: &[StoreRegion], truth: &[Point], match_dist: f64) -> PrReport {
    assert!(match_dist > 0.0, "match_dist must be positive");
    let mut pairs = Vec::new();
    for (i, d) in detected.iter().enumerate() {
        for (j, t) in truth.iter().enumerate() {
            let dist = d.centroid.distance(*t);
            if dist <= match_dist {
                pairs.push((dist, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut det_used = vec![false; detected.len()];
    let mut truth_used = vec![false; truth.len()];
    let mut matched = 0;
    for (_, i, j) in pairs {
        if !det_used[i] && !truth_used[j] {
            det_used[i] = true;
            truth_used[j] = true;
            matched += 1;
        }
    }
    let precision_defined = !detected.is_empty();
    PrReport {
        precision: if precision_defined { matched as f64 / detected.len() as f64 } else { 1.0 },
        recall: if truth.is_empty() { 1.0 } else { matched as f64 / truth.len() as f64 },
        matched,
        detected: detected.len(),
        truth: truth.len(),
        precision_defined,
    }
}
