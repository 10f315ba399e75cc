//! Deterministic synthetic street-map / store-directory pairs with ground
//! truth, for exercising the whole pipeline.
//!
//! Street map layout (pixel rows top to bottom): a yellow boulevard, a row of
//! stores, a grey walkway band, an unlabelled white parking lot, a second band
//! and a second row of stores. A labelled white avenue runs down the west
//! edge; grey connectors join the two bands on both sides, and a short
//! labelled street cuts the west connector where the sidecar marks a crossing.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extract::ExtractConfig;
use crate::layers::{GeoAnchor, SafetyClass, Sidecar, SidecarBusStop, SidecarCrossing, SidecarStore, SidecarStreet};
use crate::narrate::NarrationConfig;
use crate::pipeline::PipelineConfig;
use crate::raster::{BinaryMask, ColorSpec, Point, Polygon, RasterError, RasterImage, Rgb};
use crate::register::CpdParams;
use crate::route::{CostWeights, Pose, DEFAULT_GRID_STEP};

pub const BACKGROUND: Rgb = [244, 240, 226];
pub const BOULEVARD: Rgb = [255, 221, 85];
pub const WHITE: Rgb = [255, 255, 255];
pub const WALKWAY: Rgb = [235, 235, 235];
pub const LABEL: Rgb = [20, 20, 20];
pub const DIRECTORY_STORE: Rgb = [240, 222, 180];
const DIRECTORY_BORDER: Rgb = [170, 150, 110];
const DIRECTORY_LEGEND: Rgb = [200, 225, 245];
const STORE_COLORS: [Rgb; 6] =
    [[226, 196, 160], [200, 220, 240], [222, 200, 232], [250, 210, 200], [208, 234, 200], [238, 226, 176]];

const ROAD: u32 = 14;
const WEST_CONNECTOR: (u32, u32) = (18, 29);
const STORE_X0: u32 = 36;
const STORE_W: u32 = 50;
const STORE_H: u32 = 36;
/// Gap between neighbouring stores, drawn per store so no row is periodic.
const STORE_GAP: (u32, u32) = (4, 24);
const ROW1_Y: u32 = 20;
const BAND1_Y: (u32, u32) = (56, 67);
const PARKING_Y: (u32, u32) = (68, 127);
const BAND2_Y: (u32, u32) = (128, 139);
const ROW2_Y: u32 = 140;
const HEIGHT: u32 = 186;
const STREET_Y: (u32, u32) = (92, 103);
const STREET_X_END: u32 = 33;
const LABEL_W: u32 = 8;
const LABEL_H: u32 = 4;
const DIRECTORY_MARGIN: f64 = 24.0;
const CLUTTER_SIZE: u32 = 30;

pub const PIXELS_PER_FOOT: f64 = 0.5;

const NAMES: [&str; 20] = [
    "Cactus Coffee",
    "Blue Door Books",
    "Mesa Outfitters",
    "Saguaro Shoes",
    "Juniper Gifts",
    "Copper Kettle",
    "Desert Bloom Florist",
    "Sunset Optical",
    "Canyon Sports",
    "Agave Kitchen",
    "Quail Run Toys",
    "Palo Verde Pharmacy",
    "Red Rock Records",
    "Yucca Yoga",
    "Ironwood Hardware",
    "Mirage Salon",
    "Ocotillo Outdoor",
    "Pueblo Bakery",
    "Roadrunner Bikes",
    "Sandstone Jewelers",
];
const CLUTTER_NAMES: [&str; 3] = ["Information Kiosk", "Mall Office", "Restrooms"];

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("invalid fixture parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixtureParams {
    pub seed: u64,
    pub n_stores: u32,
    pub rotation_max_deg: f64,
    pub scale_range: (f64, f64),
    pub shear_max: f64,
    /// Amplitude of the smooth displacement field, directory pixels.
    pub jitter_px: f64,
    /// Directory-only stores with no counterpart on the map.
    pub clutter: u32,
}

impl Default for FixtureParams {
    fn default() -> Self {
        Self {
            seed: 1,
            n_stores: 12,
            rotation_max_deg: 8.0,
            scale_range: (1.1, 1.35),
            shear_max: 0.04,
            jitter_px: 1.5,
            clutter: 3,
        }
    }
}

impl FixtureParams {
    pub fn validate(&self) -> Result<(), FixtureError> {
        let bad = |m: &str| Err(FixtureError::Params(m.into()));
        if !(2..=40).contains(&self.n_stores) {
            return bad("n_stores must lie in 2..=40");
        }
        if !(0.0..=30.0).contains(&self.rotation_max_deg) {
            return bad("rotation_max_deg must lie in [0, 30]");
        }
        let (lo, hi) = self.scale_range;
        if !(lo > 0.5 && lo <= hi && hi <= 3.0) {
            return bad("scale_range must satisfy 0.5 < lo <= hi <= 3");
        }
        if !(0.0..=0.2).contains(&self.shear_max) || !(0.0..=5.0).contains(&self.jitter_px) {
            return bad("shear_max must lie in [0, 0.2] and jitter_px in [0, 5]");
        }
        if self.clutter > CLUTTER_NAMES.len() as u32 + 5 {
            return bad("at most 8 clutter stores");
        }
        Ok(())
    }
}

/// Map-to-directory warp: shear, rotation and scale about `center`, a
/// translation, then a smooth sinusoidal displacement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Warp {
    pub center: Point,
    pub rotation_deg: f64,
    pub scale: f64,
    pub shear: f64,
    pub translation: Point,
    pub jitter_px: f64,
    pub wavelength: Point,
    pub phase: Point,
}

impl Warp {
    pub fn apply(&self, p: Point) -> Point {
        let q = p.sub(self.center);
        let q = Point::new(q.x + self.shear * q.y, q.y);
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        let r = Point::new(c * q.x - s * q.y, s * q.x + c * q.y).scale(self.scale);
        let tau = std::f64::consts::TAU;
        let jitter = Point::new(
            (tau * p.y / self.wavelength.y + self.phase.x).sin(),
            (tau * p.x / self.wavelength.x + self.phase.y).sin(),
        )
        .scale(self.jitter_px);
        r.add(self.translation).add(jitter)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthRegion {
    pub id: u32,
    pub centroid: Point,
    /// Inclusive pixel bounds `[x0, y0, x1, y1]`.
    pub bbox: [u32; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DirectoryTruth {
    pub id: u32,
    pub name: String,
    /// Approximate centroid in directory pixels.
    pub centroid: Point,
    /// Matching map store, `None` for directory-only clutter.
    pub map_store: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub stores: Vec<TruthRegion>,
    pub parking: Vec<TruthRegion>,
    pub roads_mask: String,
    pub directory: Vec<DirectoryTruth>,
    pub warp: Warp,
    /// A walkway position facing East, handy for walk-throughs.
    pub start_pose: Pose,
}

#[derive(Clone, Debug)]
pub struct Fixture {
    pub params: FixtureParams,
    pub map: RasterImage,
    pub directory: RasterImage,
    pub roads: BinaryMask,
    pub truth: GroundTruth,
    pub sidecar: Sidecar,
    pub config: PipelineConfig,
}

fn fill(img: &mut RasterImage, (x0, y0): (u32, u32), (x1, y1): (u32, u32), c: Rgb) {
    for y in y0..=y1.min(img.height() - 1) {
        for x in x0..=x1.min(img.width() - 1) {
            img.set(x, y, c);
        }
    }
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
    Polygon::rectangle(Point::new(x0, y0), Point::new(x1, y1)).expect("non-degenerate rectangle")
}

fn darker(c: Rgb) -> Rgb {
    c.map(|v| v.saturating_sub(50))
}

/// Draws a label block centered on the pixel-center point `(cx, cy)`.
fn label(img: &mut RasterImage, cx: f64, cy: f64) {
    let x0 = (cx - (LABEL_W as f64 - 1.0) / 2.0) as u32;
    let y0 = (cy - (LABEL_H as f64 - 1.0) / 2.0) as u32;
    fill(img, (x0, y0), (x0 + LABEL_W - 1, y0 + LABEL_H - 1), LABEL);
}

/// Subdivided outline of a pixel-extent rectangle so the warp bends edges.
fn outline(x0: u32, y0: u32, x1: u32, y1: u32) -> Vec<Point> {
    let (a, b) = (Point::new(x0 as f64 - 0.5, y0 as f64 - 0.5), Point::new(x1 as f64 + 0.5, y1 as f64 + 0.5));
    let corners = [a, Point::new(b.x, a.y), b, Point::new(a.x, b.y)];
    let mut pts = Vec::new();
    for i in 0..4 {
        let (p, q) = (corners[i], corners[(i + 1) % 4]);
        for k in 0..8 {
            pts.push(p.add(q.sub(p).scale(k as f64 / 8.0)));
        }
    }
    pts
}

fn outline_f(x0: f64, y0: f64, size: f64) -> Vec<Point> {
    outline(0, 0, size as u32 - 1, size as u32 - 1).into_iter().map(|p| p.add(Point::new(x0, y0))).collect()
}

fn boundary_distance(poly: &[Point], p: Point) -> f64 {
    (0..poly.len())
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
            let d = b.sub(a);
            let t = (p.sub(a).dot(d) / d.dot(d)).clamp(0.0, 1.0);
            a.add(d.scale(t)).distance(p)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Paints a polygon with a one-pixel border; returns the raster index of
/// its first interior pixel.
fn paint_store(img: &mut RasterImage, verts: &[Point]) -> usize {
    let poly = Polygon::new(verts.to_vec()).expect("warped outline is valid");
    let (lo, hi) = poly.bbox();
    let mut first = usize::MAX;
    for y in lo.y.ceil().max(0.0) as u32..=(hi.y.floor() as u32).min(img.height() - 1) {
        for x in lo.x.ceil().max(0.0) as u32..=(hi.x.floor() as u32).min(img.width() - 1) {
            let p = Point::new(x as f64, y as f64);
            if !poly.contains(p) {
                continue;
            }
            if boundary_distance(verts, p) <= 1.0 {
                img.set(x, y, DIRECTORY_BORDER);
            } else {
                img.set(x, y, DIRECTORY_STORE);
                first = first.min(y as usize * img.width() as usize + x as usize);
            }
        }
    }
    first
}

struct StoreBox {
    x0: u32,
    y0: u32,
}

impl StoreBox {
    fn interior_center(&self) -> Point {
        Point::new(self.x0 as f64 + (STORE_W as f64 - 1.0) / 2.0, self.y0 as f64 + (STORE_H as f64 - 1.0) / 2.0)
    }
}

pub fn generate(params: &FixtureParams) -> Result<Fixture, FixtureError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.n_stores;
    let per_row = n.div_ceil(2);
    let mut boxes = Vec::new();
    for (y0, count) in [(ROW1_Y, per_row), (ROW2_Y, n - per_row)] {
        let mut x0 = STORE_X0;
        for _ in 0..count {
            boxes.push(StoreBox { x0, y0 });
            x0 += STORE_W + rng.gen_range(STORE_GAP.0..=STORE_GAP.1);
        }
    }
    let row_end = boxes.iter().map(|b| b.x0 + STORE_W - 1).max().expect("at least one store");
    let east_connector = (row_end + 3, row_end + 14);
    let width = row_end + 21;

    // --- street map
    let mut map = RasterImage::filled(width, HEIGHT, BACKGROUND)?;
    let mut roads = BinaryMask::new(width, HEIGHT);
    fill(&mut map, (0, ROAD), (ROAD - 1, HEIGHT - 1), WHITE);
    fill(&mut map, (0, 0), (width - 1, ROAD - 1), BOULEVARD);
    for band in [BAND1_Y, BAND2_Y] {
        fill(&mut map, (WEST_CONNECTOR.0, band.0), (east_connector.1, band.1), WALKWAY);
    }
    for (x0, x1) in [WEST_CONNECTOR, east_connector] {
        fill(&mut map, (x0, BAND1_Y.0), (x1, BAND2_Y.1), WALKWAY);
    }
    fill(&mut map, (STORE_X0, PARKING_Y.0), (row_end, PARKING_Y.1), WHITE);
    fill(&mut map, (ROAD, STREET_Y.0), (STREET_X_END, STREET_Y.1), WHITE);
    label(&mut map, (width / 2) as f64 + 0.5, 6.5);
    label(&mut map, 6.5, 151.5);
    label(&mut map, 23.5, 97.5);
    for y in 0..HEIGHT {
        for x in 0..width {
            let on_road = y < ROAD
                || x < ROAD
                || ((STREET_Y.0..=STREET_Y.1).contains(&y) && x <= STREET_X_END);
            roads.set(x, y, on_road);
        }
    }

    let mut stores = Vec::new();
    for (i, b) in boxes.iter().enumerate() {
        let color = *STORE_COLORS.choose(&mut rng).expect("palette");
        fill(&mut map, (b.x0, b.y0), (b.x0 + STORE_W - 1, b.y0 + STORE_H - 1), darker(color));
        fill(&mut map, (b.x0 + 1, b.y0 + 1), (b.x0 + STORE_W - 2, b.y0 + STORE_H - 2), color);
        let c = b.interior_center();
        label(&mut map, c.x, c.y);
        stores.push(TruthRegion {
            id: i as u32 + 1,
            centroid: c,
            bbox: [b.x0 + 1, b.y0 + 1, b.x0 + STORE_W - 2, b.y0 + STORE_H - 2],
        });
    }
    let parking = vec![TruthRegion {
        id: 1,
        centroid: Point::new((STORE_X0 + row_end) as f64 / 2.0, (PARKING_Y.0 + PARKING_Y.1) as f64 / 2.0),
        bbox: [STORE_X0, PARKING_Y.0, row_end, PARKING_Y.1],
    }];

    // --- directory
    let (lo, hi) = params.scale_range;
    let mut warp = Warp {
        center: Point::new(width as f64 / 2.0, HEIGHT as f64 / 2.0),
        rotation_deg: rng.gen_range(-params.rotation_max_deg..=params.rotation_max_deg),
        scale: rng.gen_range(lo..=hi),
        shear: rng.gen_range(-params.shear_max..=params.shear_max),
        translation: Point::default(),
        jitter_px: params.jitter_px,
        wavelength: Point::new(1.5 * width as f64, 1.5 * HEIGHT as f64),
        phase: Point::new(rng.gen_range(0.0..std::f64::consts::TAU), rng.gen_range(0.0..std::f64::consts::TAU)),
    };
    let mut outlines: Vec<(Option<u32>, Vec<Point>)> = boxes
        .iter()
        .enumerate()
        .map(|(i, b)| (Some(i as u32 + 1), outline(b.x0, b.y0, b.x0 + STORE_W - 1, b.y0 + STORE_H - 1)))
        .collect();
    // Kiosks alternate west and east of the map around mid-height; a single
    // lopsided column would read as one more column of the store lattice.
    for k in 0..params.clutter {
        let side = k / 2;
        let x0 = if k % 2 == 0 { -(CLUTTER_SIZE as i64) - 40 - 50 * side as i64 } else { width as i64 + 40 + 50 * side as i64 };
        let y0 = (HEIGHT as i64 - CLUTTER_SIZE as i64) / 2 + if side % 2 == 0 { -20 } else { 20 };
        outlines.push((None, outline_f(x0 as f64, y0 as f64, CLUTTER_SIZE as f64)));
    }
    let warped_all: Vec<Point> = outlines.iter().flat_map(|(_, o)| o.iter().map(|&p| warp.apply(p))).collect();
    let min = warped_all.iter().fold(Point::new(f64::INFINITY, f64::INFINITY), |m, p| Point::new(m.x.min(p.x), m.y.min(p.y)));
    let max = warped_all
        .iter()
        .fold(Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |m, p| Point::new(m.x.max(p.x), m.y.max(p.y)));
    warp.translation = Point::new(DIRECTORY_MARGIN - min.x, DIRECTORY_MARGIN - min.y);
    let dir_w = (max.x - min.x + 2.0 * DIRECTORY_MARGIN).ceil() as u32;
    let dir_h = (max.y - min.y + 2.0 * DIRECTORY_MARGIN).ceil() as u32 + 40;
    let mut directory = RasterImage::filled(dir_w, dir_h, WHITE)?;
    fill(&mut directory, (8, dir_h - 32), (dir_w.min(200) - 8, dir_h - 8), DIRECTORY_LEGEND);

    let mut painted: Vec<(usize, Option<u32>, Point)> = Vec::new();
    for (map_id, o) in &outlines {
        let verts: Vec<Point> = o.iter().map(|&p| warp.apply(p)).collect();
        let first = paint_store(&mut directory, &verts);
        let center = o.iter().fold(Point::default(), |a, &p| a.add(p)).scale(1.0 / o.len() as f64);
        painted.push((first, *map_id, warp.apply(center)));
    }
    painted.sort_by_key(|&(first, _, _)| first);

    let mut names: Vec<&str> = NAMES.to_vec();
    names.shuffle(&mut rng);
    let map_name = |id: u32| names.get(id as usize - 1).map(|s| s.to_string()).unwrap_or_else(|| format!("Shop {id}"));
    let mut clutter_idx = 0;
    let dir_truth: Vec<DirectoryTruth> = painted
        .iter()
        .enumerate()
        .map(|(i, &(_, map_store, centroid))| {
            let name = match map_store {
                Some(id) => map_name(id),
                None => {
                    clutter_idx += 1;
                    CLUTTER_NAMES.get(clutter_idx - 1).map(|s| s.to_string()).unwrap_or_else(|| format!("Kiosk {clutter_idx}"))
                }
            };
            DirectoryTruth { id: i as u32 + 1, name, centroid, map_store }
        })
        .collect();

    // --- sidecar and config
    let (w, h) = (width as f64, HEIGHT as f64);
    let road = ROAD as f64;
    let sidecar = Sidecar {
        stores: dir_truth.iter().map(|d| SidecarStore { id: d.id, name: d.name.clone() }).collect(),
        streets: vec![
            SidecarStreet { name: "Main Boulevard".into(), polygon: rect(-0.5, -0.5, w - 0.5, road - 0.5), safety: SafetyClass::Unsafe },
            SidecarStreet { name: "Oak Avenue".into(), polygon: rect(-0.5, road - 0.5, road - 0.5, h - 0.5), safety: SafetyClass::Unsafe },
            SidecarStreet {
                name: "Elm Street".into(),
                polygon: rect(road - 0.5, STREET_Y.0 as f64 - 0.5, STREET_X_END as f64 + 0.5, STREET_Y.1 as f64 + 0.5),
                safety: SafetyClass::Caution,
            },
        ],
        bus_stops: vec![SidecarBusStop {
            name: "Route 72 bus stop".into(),
            position: Point::new(row_end as f64 - 10.0, (BAND2_Y.0 + BAND2_Y.1) as f64 / 2.0),
        }],
        crossings: vec![SidecarCrossing {
            polygon: rect(
                WEST_CONNECTOR.0 as f64 - 0.5,
                STREET_Y.0 as f64 - 4.5,
                WEST_CONNECTOR.1 as f64 + 0.5,
                STREET_Y.1 as f64 + 4.5,
            ),
            name: Some("Elm Street crossing".into()),
        }],
    };
    let config = PipelineConfig {
        map_image: "map.png".into(),
        directory_image: "directory.png".into(),
        sidecar: "sidecar.json".into(),
        output: "out".into(),
        anchor: GeoAnchor::north_up(-111.94, 33.30, 5.5e-6).expect("valid anchor"),
        seed_colors: vec![ColorSpec::new(DIRECTORY_STORE, 10)],
        extract: ExtractConfig::default(),
        // Floor near a pixel of residual keeps the kernel regularizer alive once
        // the stores fit; the rotated starts cover small layouts where the classic
        // start collapses.
        cpd: CpdParams { rotation_starts: 4, sigma2_floor: 1e-4, ..CpdParams::default() },
        weights: CostWeights::default(),
        narration: NarrationConfig { pixels_per_foot: PIXELS_PER_FOOT, ..Default::default() },
        prealign: true,
        grid_step: DEFAULT_GRID_STEP,
        walkway_solidity: 0.9,
        base_dir: Default::default(),
    };
    let truth = GroundTruth {
        seed: params.seed,
        width,
        height: HEIGHT,
        stores,
        parking,
        roads_mask: "roads_mask.png".into(),
        directory: dir_truth,
        warp,
        start_pose: Pose::new(Point::new(40.0, 60.0), 90.0),
    };
    Ok(Fixture { params: *params, map, directory, roads, truth, sidecar, config })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), FixtureError> {
    let mut text = serde_json::to_string_pretty(value).expect("fixture data serializes");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

impl Fixture {
    /// Writes map.png, directory.png, roads_mask.png, truth.json,
    /// sidecar.json and config.json into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(), FixtureError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        self.map.save_png(dir.join("map.png"))?;
        self.directory.save_png(dir.join("directory.png"))?;
        self.roads.save_png(dir.join(&self.truth.roads_mask))?;
        write_json(&dir.join("truth.json"), &self.truth)?;
        write_json(&dir.join("sidecar.json"), &self.sidecar)?;
        write_json(&dir.join("config.json"), &self.config)?;
        Ok(())
    }

    /// Config with paths resolved against `dir`, as if loaded from there.
    pub fn config_in(&self, dir: impl AsRef<Path>) -> PipelineConfig {
        PipelineConfig { base_dir: dir.as_ref().to_path_buf(), ..self.config.clone() }
    }

    pub fn store_name(&self, map_store: u32) -> Option<&str> {
        self.truth.directory.iter().find(|d| d.map_store == Some(map_store)).map(|d| d.name.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extract::{detect_stores_directory, extract_map_features};

    #[test]
    fn same_seed_same_bytes() {
        let a = generate(&FixtureParams { seed: 7, ..Default::default() }).unwrap();
        let b = generate(&FixtureParams { seed: 7, ..Default::default() }).unwrap();
        let c = generate(&FixtureParams { seed: 8, ..Default::default() }).unwrap();
        assert_eq!(a.map, b.map);
        assert_eq!(a.directory, b.directory);
        assert_eq!(a.truth, b.truth);
        assert_ne!(a.directory, c.directory);
    }

    #[test]
    fn detectors_recover_truth() {
        let f = generate(&FixtureParams::default()).unwrap();
        let feats = extract_map_features(&f.map, &ExtractConfig::default()).unwrap();
        assert_eq!(feats.stores.len(), 12);
        for (s, t) in feats.stores.iter().zip(&f.truth.stores) {
            assert!(s.centroid.distance(t.centroid) <= 0.5, "{} {:?} {:?}", t.id, s.centroid, t.centroid);
        }
        assert_eq!(feats.parking.len(), 1);
        assert!(feats.parking[0].centroid.distance(f.truth.parking[0].centroid) <= 0.5);
        assert!(feats.masks.roads.intersection(&feats.masks.parking).unwrap().is_empty());
        // every road pixel that is not a boulevard label is found
        let missed = f.roads.difference(&feats.masks.roads).unwrap().count();
        assert!(missed <= (LABEL_W * LABEL_H) as usize, "missed {missed}");

        let dir = detect_stores_directory(&f.directory, &f.config.seed_colors, &ExtractConfig::default()).unwrap();
        assert_eq!(dir.len(), 12 + 3);
        for (s, t) in dir.iter().zip(&f.truth.directory) {
            assert!(s.centroid.distance(t.centroid) < 1.5, "{} {:?} {:?}", t.id, s.centroid, t.centroid);
        }
    }

    #[test]
    fn odd_store_count_and_bad_params() {
        let f = generate(&FixtureParams { n_stores: 5, clutter: 0, ..Default::default() }).unwrap();
        assert_eq!(f.truth.stores.len(), 5);
        assert_eq!(f.truth.directory.len(), 5);
        assert!(generate(&FixtureParams { n_stores: 1, ..Default::default() }).is_err());
        assert!(generate(&FixtureParams { scale_range: (2.0, 1.0), ..Default::default() }).is_err());
    }
}
