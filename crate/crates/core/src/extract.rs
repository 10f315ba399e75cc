//! Map-specific feature detectors: text labels, roads, parking lots,
//! walkways and stores, plus control-point extraction.
//!
//! Classification precedence where color classes overlap: road, then parking,
//! then walkway.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::raster::{
    connected_components, flood_fill, pixel_hull, region_grow_mask, segment_by_color, shape_regularity,
    squared_distance_to_set, BinaryMask, ColorSpec, Connectivity, LabeledRegions, Point, Polygon, RasterError,
    RasterImage, Region, Rgb,
};
use crate::register::PointSet;

/// Glyph-cluster scale for text labels, in pixels.
pub const LABEL_AREA_RANGE: (usize, usize) = (4, 2000);
/// Half-width of the ring sampled around a label to find its background color.
pub const LABEL_RING: u32 = 8;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("invalid extract config: {0}")]
    InvalidConfig(String),
    #[error("at least one store seed color is required")]
    NoSeedColors,
    #[error(transparent)]
    Raster(#[from] RasterError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    pub major_road_color: ColorSpec,
    pub freeway_color: ColorSpec,
    pub minor_road_color: ColorSpec,
    pub label_color: ColorSpec,
    pub walkway_color: ColorSpec,
    /// Tolerance used when flood-filling a store's background color.
    pub store_tolerance: u8,
    pub min_road_halfwidth: u32,
    pub min_store_area: usize,
    pub solidity_min: f64,
    pub extent_min: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self {
            major_road_color: ColorSpec::new([255, 221, 85], 24),
            freeway_color: ColorSpec::new([250, 165, 90], 24),
            minor_road_color: ColorSpec::new([255, 255, 255], 8),
            label_color: ColorSpec::new([0, 0, 0], 60),
            walkway_color: ColorSpec::new([235, 235, 235], 6),
            store_tolerance: 12,
            min_road_halfwidth: 3,
            min_store_area: 40,
            solidity_min: 0.85,
            extent_min: 0.60,
        }
    }
}

impl ExtractConfig {
    pub fn validate(&self) -> Result<(), ExtractError> {
        if self.min_road_halfwidth < 1 {
            return Err(ExtractError::InvalidConfig("min_road_halfwidth must be >= 1".into()));
        }
        for (name, v) in [("solidity_min", self.solidity_min), ("extent_min", self.extent_min)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(ExtractError::InvalidConfig(format!("{name} must lie in (0, 1]")));
            }
        }
        Ok(())
    }

    fn road_like(&self, c: Rgb) -> bool {
        [self.major_road_color, self.freeway_color, self.minor_road_color, self.walkway_color]
            .iter()
            .any(|s| s.matches(c))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoreSource {
    Map,
    Directory,
}

/// A detected store (or store-shaped region such as a parking lot).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreRegion {
    pub id: u32,
    pub footprint: Polygon,
    /// Mean of the region's pixel centers.
    pub centroid: Point,
    pub area: usize,
    pub source: StoreSource,
    pub name: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMasks {
    pub roads: BinaryMask,
    pub parking: BinaryMask,
    pub walkways: BinaryMask,
    pub labels: LabeledRegions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParkingLots {
    pub regions: Vec<StoreRegion>,
    pub mask: BinaryMask,
}

/// Everything detected on a street-map image.
#[derive(Clone, Debug, PartialEq)]
pub struct MapFeatures {
    pub masks: FeatureMasks,
    pub parking: Vec<StoreRegion>,
    pub stores: Vec<StoreRegion>,
}

/// Dark glyph clusters of plausible label size.
pub fn detect_text_labels(img: &RasterImage, cfg: &ExtractConfig) -> LabeledRegions {
    let mask = segment_by_color(img, &cfg.label_color);
    let (lo, hi) = LABEL_AREA_RANGE;
    connected_components(&mask, Connectivity::Eight).retain(|r| (lo..=hi).contains(&r.area))
}

/// A pixel of the label to seed growth from: the rounded centroid when it lies
/// on the label, else its first boundary pixel.
fn label_seed(labels: &LabeledRegions, region: &Region) -> (u32, u32) {
    let (cx, cy) = (region.centroid.x.round() as u32, region.centroid.y.round() as u32);
    if labels.label_at(cx, cy) == region.id {
        (cx, cy)
    } else {
        region.boundary[0]
    }
}

/// Union of yellow major roads, orange freeways and white roads grown from
/// text labels. Label glyphs count as road surface so that seeds sitting on
/// them can grow; the grown core is widened back to the full corridor.
pub fn detect_roads(img: &RasterImage, cfg: &ExtractConfig, labels: &LabeledRegions) -> BinaryMask {
    let major = segment_by_color(img, &cfg.major_road_color);
    let freeway = segment_by_color(img, &cfg.freeway_color);
    let white = segment_by_color(img, &cfg.minor_road_color)
        .union(&labels.foreground())
        .expect("same image");
    let seeds: Vec<_> = labels.regions.iter().map(|r| label_seed(labels, r)).collect();
    let core = region_grow_mask(&white, &seeds, cfg.min_road_halfwidth).expect("seeds come from the image");

    // Restore the pixels the width check trimmed off the corridor edges.
    let hw2 = u64::from(cfg.min_road_halfwidth).pow(2);
    let near_core = squared_distance_to_set(&core);
    let widened: Vec<bool> = white
        .bits()
        .iter()
        .zip(&near_core)
        .map(|(&w, &d)| w && d <= hw2)
        .collect();
    let widened = BinaryMask::from_bits(img.width(), img.height(), widened).expect("same dims");
    // Keep only the widened pixels attached to the core.
    let core_seeds: Vec<_> = core.iter_set().collect();
    let corridor = flood_fill(&widened, &core_seeds);

    major.union(&freeway).and_then(|m| m.union(&corridor)).expect("same image")
}

fn region_to_store(region: &Region, source: StoreSource) -> Result<StoreRegion, RasterError> {
    Ok(StoreRegion {
        id: region.id,
        footprint: pixel_hull(region)?,
        centroid: region.centroid,
        area: region.area,
        source,
        name: None,
    })
}

/// White areas that are not roads, are large, and carry no text label.
pub fn detect_parking_lots(
    img: &RasterImage,
    cfg: &ExtractConfig,
    roads: &BinaryMask,
    labels: &LabeledRegions,
) -> ParkingLots {
    let white = segment_by_color(img, &cfg.minor_road_color).difference(roads).expect("same image");
    let comps = connected_components(&white, Connectivity::Four);
    let min_area = 4 * cfg.min_store_area;
    let mut regions = Vec::new();
    let mut keep = BTreeSet::new();
    for r in comps.regions.iter().filter(|r| r.area >= min_area) {
        let Ok(store) = region_to_store(r, StoreSource::Map) else { continue };
        let labelled = labels.regions.iter().any(|l| store.footprint.contains(l.centroid));
        if !labelled {
            keep.insert(r.id);
            regions.push(StoreRegion { id: regions.len() as u32 + 1, ..store });
        }
    }
    let bits = comps.label_map.iter().map(|l| keep.contains(l)).collect();
    let mask = BinaryMask::from_bits(img.width(), img.height(), bits).expect("same dims");
    ParkingLots { regions, mask }
}

/// Grey walkway pixels not already claimed by any of `claimed` (roads,
/// parking).
pub fn detect_walkways(img: &RasterImage, cfg: &ExtractConfig, claimed: &[&BinaryMask]) -> BinaryMask {
    claimed.iter().fold(segment_by_color(img, &cfg.walkway_color), |acc, m| {
        acc.difference(m).expect("masks share the image dims")
    })
}

fn passes_shape_filters(region: &Region, hull: &Polygon, cfg: &ExtractConfig) -> bool {
    region.area >= cfg.min_store_area
        && shape_regularity(region, hull)
            .map(|s| s.solidity >= cfg.solidity_min && s.extent >= cfg.extent_min)
            .unwrap_or(false)
}

/// Most frequent color in the ring of width [`LABEL_RING`] around the label's
/// bounding box; ties go to the smallest RGB triple.
fn ring_color(img: &RasterImage, region: &Region) -> Option<Rgb> {
    let (x0, y0, x1, y1) = region.bbox;
    let r = LABEL_RING;
    let (ox0, oy0) = (x0.saturating_sub(r), y0.saturating_sub(r));
    let (ox1, oy1) = ((x1 + r).min(img.width() - 1), (y1 + r).min(img.height() - 1));
    let mut counts: BTreeMap<Rgb, usize> = BTreeMap::new();
    for y in oy0..=oy1 {
        for x in ox0..=ox1 {
            if (x0..=x1).contains(&x) && (y0..=y1).contains(&y) {
                continue;
            }
            *counts.entry(img.get(x, y)).or_default() += 1;
        }
    }
    let best = counts.values().copied().max()?;
    counts.into_iter().find(|&(_, c)| c == best).map(|(color, _)| color)
}

/// Stores on the street map: the same-colored area around each text label,
/// kept when large and rectangular enough. Each store is reported once even
/// when several labels sit on it; ids follow the raster order of the stores'
/// first pixels.
pub fn detect_stores_map(img: &RasterImage, cfg: &ExtractConfig, labels: &LabeledRegions) -> Vec<StoreRegion> {
    let glyphs = labels.foreground();
    let mut candidates: HashMap<Rgb, BinaryMask> = HashMap::new();
    let mut found: BTreeMap<usize, StoreRegion> = BTreeMap::new();
    for label in &labels.regions {
        let Some(color) = ring_color(img, label) else { continue };
        if cfg.road_like(color) || cfg.label_color.matches(color) {
            continue;
        }
        let allowed = candidates.entry(color).or_insert_with(|| {
            segment_by_color(img, &ColorSpec::new(color, cfg.store_tolerance))
                .union(&glyphs)
                .expect("same image")
        });
        let grown = flood_fill(allowed, &label.boundary);
        let Some(first) = grown.bits().iter().position(|&b| b) else { continue };
        if found.contains_key(&first) {
            continue;
        }
        let comps = connected_components(&grown, Connectivity::Four);
        let region = &comps.regions[0];
        let Ok(hull) = pixel_hull(region) else { continue };
        if passes_shape_filters(region, &hull, cfg) {
            found.insert(
                first,
                StoreRegion {
                    id: 0,
                    footprint: hull,
                    centroid: region.centroid,
                    area: region.area,
                    source: StoreSource::Map,
                    name: None,
                },
            );
        }
    }
    found
        .into_values()
        .enumerate()
        .map(|(i, s)| StoreRegion { id: i as u32 + 1, ..s })
        .collect()
}

/// Stores on a directory image, segmented by the user-picked store colors.
pub fn detect_stores_directory(
    img: &RasterImage,
    seed_colors: &[ColorSpec],
    cfg: &ExtractConfig,
) -> Result<Vec<StoreRegion>, ExtractError> {
    if seed_colors.is_empty() {
        return Err(ExtractError::NoSeedColors);
    }
    let mut mask = BinaryMask::new(img.width(), img.height());
    for spec in seed_colors {
        mask = mask.union(&segment_by_color(img, spec))?;
    }
    let comps = connected_components(&mask, Connectivity::Four);
    let mut stores = Vec::new();
    for region in &comps.regions {
        let Ok(hull) = pixel_hull(region) else { continue };
        if passes_shape_filters(region, &hull, cfg) {
            stores.push(StoreRegion {
                id: stores.len() as u32 + 1,
                footprint: hull,
                centroid: region.centroid,
                area: region.area,
                source: StoreSource::Directory,
                name: None,
            });
        }
    }
    Ok(stores)
}

/// Store centroids ordered by store id.
pub fn control_points(stores: &[StoreRegion]) -> PointSet {
    let mut sorted: Vec<&StoreRegion> = stores.iter().collect();
    sorted.sort_by_key(|s| s.id);
    PointSet::new(sorted.iter().map(|s| s.centroid).collect()).expect("centroids are finite")
}

/// Runs every street-map detector with the documented precedence.
pub fn extract_map_features(img: &RasterImage, cfg: &ExtractConfig) -> Result<MapFeatures, ExtractError> {
    cfg.validate()?;
    let labels = detect_text_labels(img, cfg);
    let roads = detect_roads(img, cfg, &labels);
    let parking = detect_parking_lots(img, cfg, &roads, &labels);
    let walkways = detect_walkways(img, cfg, &[&roads, &parking.mask]);
    let stores = detect_stores_map(img, cfg, &labels);
    Ok(MapFeatures {
        masks: FeatureMasks { roads, parking: parking.mask, walkways, labels },
        parking: parking.regions,
        stores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const BG: Rgb = [244, 240, 226];
    const BLACK: Rgb = [0, 0, 0];
    const WHITE: Rgb = [255, 255, 255];
    const YELLOW: Rgb = [255, 221, 85];
    const STORE: Rgb = [226, 196, 160];
    const BORDER: Rgb = [170, 150, 130];
    const GREY: Rgb = [235, 235, 235];

    fn canvas(w: u32, h: u32) -> RasterImage {
        RasterImage::filled(w, h, BG).unwrap()
    }

    fn fill(img: &mut RasterImage, x0: u32, y0: u32, x1: u32, y1: u32, c: Rgb) {
        for y in y0..=y1 {
            for x in x0..=x1 {
                img.set(x, y, c);
            }
        }
    }

    /// Store with a one-pixel border and a centered label; returns the
    /// expected centroid (the interior, label included).
    fn store(img: &mut RasterImage, x0: u32, y0: u32, x1: u32, y1: u32) -> Point {
        fill(img, x0, y0, x1, y1, BORDER);
        fill(img, x0 + 1, y0 + 1, x1 - 1, y1 - 1, STORE);
        let (cx, cy) = ((x0 + x1) / 2, (y0 + y1) / 2);
        fill(img, cx - 3, cy - 1, cx + 3, cy + 1, BLACK);
        Point::new((x0 + x1) as f64 / 2.0, (y0 + y1) as f64 / 2.0)
    }

    #[test]
    fn no_dark_pixels_no_labels() {
        assert!(detect_text_labels(&canvas(40, 40), &ExtractConfig::default()).is_empty());
    }

    #[test]
    fn labels_found_and_tiny_blobs_dropped() {
        let mut img = canvas(80, 40);
        fill(&mut img, 5, 5, 12, 8, BLACK);
        fill(&mut img, 30, 20, 39, 23, BLACK);
        fill(&mut img, 60, 30, 65, 32, BLACK);
        img.set(70, 5, BLACK);
        img.set(71, 5, BLACK);
        img.set(70, 6, BLACK);
        let labels = detect_text_labels(&img, &ExtractConfig::default());
        assert_eq!(labels.len(), 3);
        assert_eq!(labels.regions[0].centroid, Point::new(8.5, 6.5));
        assert_eq!(labels.regions[1].centroid, Point::new(34.5, 21.5));
        assert_eq!(labels.regions[2].centroid, Point::new(62.5, 31.0));
    }

    #[test]
    fn yellow_stripe_is_road_without_labels() {
        let mut img = canvas(50, 30);
        fill(&mut img, 0, 10, 49, 14, YELLOW);
        let cfg = ExtractConfig::default();
        let labels = detect_text_labels(&img, &cfg);
        let roads = detect_roads(&img, &cfg, &labels);
        assert_eq!(roads, BinaryMask::from_fn(50, 30, |_, y| (10..=14).contains(&y)));
    }

    #[test]
    fn labelled_white_corridor_is_road() {
        let mut img = canvas(80, 40);
        fill(&mut img, 0, 15, 79, 23, WHITE);
        fill(&mut img, 30, 18, 37, 20, BLACK);
        let cfg = ExtractConfig::default();
        let labels = detect_text_labels(&img, &cfg);
        let roads = detect_roads(&img, &cfg, &labels);
        let expected = BinaryMask::from_fn(80, 40, |_, y| (15..=23).contains(&y));
        assert_eq!(roads, expected);

        // same corridor, no label: nothing to grow from
        let mut bare = canvas(80, 40);
        fill(&mut bare, 0, 15, 79, 23, WHITE);
        let labels = detect_text_labels(&bare, &cfg);
        assert!(detect_roads(&bare, &cfg, &labels).is_empty());
    }

    #[test]
    fn parking_lot_is_unlabelled_white_blob() {
        let mut img = canvas(120, 80);
        fill(&mut img, 0, 5, 119, 13, WHITE);
        fill(&mut img, 50, 8, 57, 10, BLACK);
        fill(&mut img, 30, 30, 49, 49, WHITE); // 400 px lot
        let cfg = ExtractConfig::default();
        let labels = detect_text_labels(&img, &cfg);
        let roads = detect_roads(&img, &cfg, &labels);
        let lots = detect_parking_lots(&img, &cfg, &roads, &labels);
        assert_eq!(lots.regions.len(), 1);
        assert_eq!(lots.regions[0].area, 400);
        assert_eq!(lots.regions[0].centroid, Point::new(39.5, 39.5));
        assert!(lots.mask.intersection(&roads).unwrap().is_empty());

        let all_yellow = RasterImage::filled(30, 30, YELLOW).unwrap();
        let labels = detect_text_labels(&all_yellow, &cfg);
        let roads = detect_roads(&all_yellow, &cfg, &labels);
        assert!(detect_parking_lots(&all_yellow, &cfg, &roads, &labels).regions.is_empty());
    }

    #[test]
    fn labelled_white_area_is_not_parking() {
        // A labelled white area too narrow to be a road still is not parking.
        let mut img = canvas(120, 80);
        fill(&mut img, 20, 30, 99, 33, WHITE);
        fill(&mut img, 45, 31, 52, 32, BLACK);
        let cfg = ExtractConfig::default();
        let labels = detect_text_labels(&img, &cfg);
        let roads = detect_roads(&img, &cfg, &labels);
        assert!(roads.is_empty());
        assert!(detect_parking_lots(&img, &cfg, &roads, &labels).regions.is_empty());
    }

    #[test]
    fn walkway_band_and_precedence() {
        let mut img = canvas(60, 40);
        fill(&mut img, 5, 20, 54, 25, GREY);
        let cfg = ExtractConfig::default();
        let walk = detect_walkways(&img, &cfg, &[]);
        assert_eq!(walk, BinaryMask::from_fn(60, 40, |x, y| (5..=54).contains(&x) && (20..=25).contains(&y)));
        assert!(detect_walkways(&canvas(10, 10), &cfg, &[]).is_empty());

        // Overlapping tolerances: the road mask wins.
        let loose = ExtractConfig { walkway_color: ColorSpec::new(GREY, 30), ..cfg.clone() };
        let mut img = canvas(20, 20);
        img.set(3, 3, [250, 250, 250]);
        let road = BinaryMask::from_fn(20, 20, |x, y| x == 3 && y == 3);
        assert!(detect_walkways(&img, &loose, &[]).get(3, 3));
        assert!(!detect_walkways(&img, &loose, &[&road]).get(3, 3));
    }

    #[test]
    fn five_labelled_rectangles_are_stores() {
        let mut img = canvas(300, 80);
        let mut truth = Vec::new();
        for i in 0..5 {
            let x0 = 10 + i * 56;
            truth.push(store(&mut img, x0, 10, x0 + 49, 45));
        }
        let cfg = ExtractConfig::default();
        let labels = detect_text_labels(&img, &cfg);
        let stores = detect_stores_map(&img, &cfg, &labels);
        assert_eq!(stores.len(), 5);
        for (s, t) in stores.iter().zip(&truth) {
            assert!(s.centroid.distance(*t) <= 0.5, "{:?} vs {t:?}", s.centroid);
            // interior is 48 x 34
            assert_eq!(s.area, 48 * 34);
            assert_eq!(s.source, StoreSource::Map);
        }
        let cps = control_points(&stores);
        assert_eq!(cps.len(), 5);
    }

    #[test]
    fn l_shape_rejected_and_double_label_deduplicated() {
        let mut img = canvas(200, 120);
        // L-shaped store: extent well below 0.6
        fill(&mut img, 10, 10, 80, 100, BORDER);
        fill(&mut img, 11, 11, 79, 99, STORE);
        fill(&mut img, 30, 11, 79, 80, BG);
        fill(&mut img, 13, 50, 19, 52, BLACK);
        // rectangle with two labels
        fill(&mut img, 100, 10, 190, 60, BORDER);
        fill(&mut img, 101, 11, 189, 59, STORE);
        fill(&mut img, 120, 30, 127, 32, BLACK);
        fill(&mut img, 160, 30, 167, 32, BLACK);
        let cfg = ExtractConfig::default();
        let labels = detect_text_labels(&img, &cfg);
        assert_eq!(labels.len(), 3);
        let stores = detect_stores_map(&img, &cfg, &labels);
        assert_eq!(stores.len(), 1);
        assert!(stores[0].centroid.distance(Point::new(145.0, 35.0)) < 0.5);
    }

    #[test]
    fn store_detection_ignores_label_order() {
        let mut img = canvas(300, 80);
        for i in 0..4 {
            let x0 = 10 + i * 70;
            store(&mut img, x0, 10 + 5 * i, x0 + 55, 50 + 5 * i);
        }
        let cfg = ExtractConfig::default();
        let labels = detect_text_labels(&img, &cfg);
        let mut reversed = labels.clone();
        reversed.regions.reverse();
        let key = |v: Vec<StoreRegion>| {
            let mut k: Vec<_> = v.into_iter().map(|s| format!("{:?}", s.footprint)).collect();
            k.sort();
            k
        };
        assert_eq!(
            key(detect_stores_map(&img, &cfg, &labels)),
            key(detect_stores_map(&img, &cfg, &reversed))
        );
    }

    #[test]
    fn directory_stores_by_seed_color() {
        const BEIGE: Rgb = [240, 220, 180];
        const MINT: Rgb = [190, 230, 200];
        let mut img = RasterImage::filled(400, 200, WHITE).unwrap();
        for i in 0..6 {
            for j in 0..2 {
                let (x0, y0) = (10 + i * 64, 10 + j * 90);
                fill(&mut img, x0, y0, x0 + 55, y0 + 70, if i == 5 { MINT } else { BEIGE });
            }
        }
        let cfg = ExtractConfig::default();
        let beige = ColorSpec::new(BEIGE, 5);
        let mint = ColorSpec::new(MINT, 5);
        assert_eq!(detect_stores_directory(&img, &[beige], &cfg).unwrap().len(), 10);
        assert_eq!(detect_stores_directory(&img, &[beige, mint], &cfg).unwrap().len(), 12);
        assert!(detect_stores_directory(&img, &[ColorSpec::new([1, 2, 3], 0)], &cfg).unwrap().is_empty());
        assert!(matches!(detect_stores_directory(&img, &[], &cfg), Err(ExtractError::NoSeedColors)));
    }

    #[test]
    fn control_points_follow_ids() {
        assert!(control_points(&[]).is_empty());
        let poly = Polygon::rectangle(Point::new(0.0, 0.0), Point::new(30.0, 30.0)).unwrap();
        let mk = |id, c: Point| StoreRegion {
            id,
            footprint: poly.clone(),
            centroid: c,
            area: 1,
            source: StoreSource::Map,
            name: None,
        };
        let cps = control_points(&[mk(2, Point::new(1.0, 1.0)), mk(1, Point::new(10.5, 20.0))]);
        assert_eq!(cps.points(), &[Point::new(10.5, 20.0), Point::new(1.0, 1.0)]);
    }

    #[test]
    fn config_validation() {
        assert!(ExtractConfig::default().validate().is_ok());
        assert!(ExtractConfig { min_road_halfwidth: 0, ..Default::default() }.validate().is_err());
        assert!(ExtractConfig { solidity_min: 0.0, ..Default::default() }.validate().is_err());
        assert!(ExtractConfig { extent_min: 1.5, ..Default::default() }.validate().is_err());
    }
}
