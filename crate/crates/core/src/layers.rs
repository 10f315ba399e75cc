//! Four-tier fused map: geo-anchored base, registered directory stores,
//! annotations, and user tags. Persisted as one canonical JSON document.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::extract::StoreRegion;
use crate::raster::{
    connected_components, pixel_hull, shape_regularity, BinaryMask, Connectivity, Point, Polygon, Region,
};
use crate::register::RegistrationSummary;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LayersError {
    #[error("geo anchor is not invertible (det {0:e})")]
    SingularAnchor(f64),
    #[error("duplicate store id {0} in sidecar")]
    DuplicateStoreId(u32),
    #[error("tag position ({x}, {y}) lies outside the {width}x{height} base map")]
    TagOutOfBounds { x: f64, y: f64, width: u32, height: u32 },
    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),
    #[error("parse error in {tier}{}: {message}", index.map(|i| format!("[{i}]")).unwrap_or_default())]
    Parse { tier: String, index: Option<usize>, message: String },
    #[error("unsupported format_version {0}")]
    Version(u64),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Affine map from base-map pixel `(x, y)` to `(longitude, latitude)`:
/// `lon = m[0][0] x + m[0][1] y + m[0][2]`, likewise `lat` from row 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[[f64; 3]; 2]", into = "[[f64; 3]; 2]")]
pub struct GeoAnchor {
    m: [[f64; 3]; 2],
}

impl GeoAnchor {
    pub fn new(m: [[f64; 3]; 2]) -> Result<Self, LayersError> {
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if !(det.abs() > 1e-15) || m.iter().flatten().any(|v| !v.is_finite()) {
            return Err(LayersError::SingularAnchor(det));
        }
        Ok(Self { m })
    }

    /// North-up anchor: pixel (0, 0) at `origin`, `deg_per_px` degrees per
    /// pixel, latitude decreasing downwards.
    pub fn north_up(origin_lon: f64, origin_lat: f64, deg_per_px: f64) -> Result<Self, LayersError> {
        Self::new([[deg_per_px, 0.0, origin_lon], [0.0, -deg_per_px, origin_lat]])
    }

    pub fn matrix(&self) -> [[f64; 3]; 2] {
        self.m
    }

    pub fn pixel_to_geo(&self, p: Point) -> (f64, f64) {
        let m = &self.m;
        (m[0][0] * p.x + m[0][1] * p.y + m[0][2], m[1][0] * p.x + m[1][1] * p.y + m[1][2])
    }

    pub fn geo_to_pixel(&self, (lon, lat): (f64, f64)) -> Point {
        let m = &self.m;
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let (u, v) = (lon - m[0][2], lat - m[1][2]);
        Point::new((m[1][1] * u - m[0][1] * v) / det, (m[0][0] * v - m[1][0] * u) / det)
    }
}

impl TryFrom<[[f64; 3]; 2]> for GeoAnchor {
    type Error = LayersError;
    fn try_from(m: [[f64; 3]; 2]) -> Result<Self, Self::Error> {
        Self::new(m)
    }
}

impl From<GeoAnchor> for [[f64; 3]; 2] {
    fn from(a: GeoAnchor) -> Self {
        a.m
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaseLayer {
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub anchor: GeoAnchor,
}

impl BaseLayer {
    /// Whether `p` lies on the image, pixel extents included.
    pub fn contains(&self, p: Point) -> bool {
        p.x >= -0.5 && p.y >= -0.5 && p.x <= self.width as f64 - 0.5 && p.y <= self.height as f64 - 0.5
    }

    fn overlaps(&self, poly: &Polygon) -> bool {
        let (lo, hi) = poly.bbox();
        hi.x >= -0.5 && hi.y >= -0.5 && lo.x <= self.width as f64 - 0.5 && lo.y <= self.height as f64 - 0.5
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Store {
    pub id: u32,
    pub name: String,
    pub footprint: Polygon,
    pub centroid: Point,
    #[serde(default)]
    pub entrance: Option<Point>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    Parking,
    Walkway,
    BusStop,
    Street,
    /// Marked pedestrian crossing over a street.
    Crossing,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SafetyClass {
    #[default]
    Safe,
    Caution,
    Unsafe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Geometry {
    Polygon(Polygon),
    Point(Point),
}

impl Geometry {
    pub fn as_polygon(&self) -> Option<&Polygon> {
        match self {
            Geometry::Polygon(p) => Some(p),
            Geometry::Point(_) => None,
        }
    }

    /// Representative point: the point itself or the polygon's area centroid.
    pub fn anchor_point(&self) -> Point {
        match self {
            Geometry::Polygon(p) => p.centroid(),
            Geometry::Point(p) => *p,
        }
    }

    pub fn distance_to(&self, q: Point) -> f64 {
        match self {
            Geometry::Polygon(p) => p.distance_to(q),
            Geometry::Point(p) => p.distance(q),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub kind: AnnotationKind,
    pub geometry: Geometry,
    #[serde(default)]
    pub name: Option<String>,
    /// Streets only.
    #[serde(default)]
    pub safety_class: Option<SafetyClass>,
}

impl Annotation {
    pub fn parking(poly: Polygon) -> Self {
        Self { kind: AnnotationKind::Parking, geometry: Geometry::Polygon(poly), name: None, safety_class: None }
    }

    pub fn walkway(poly: Polygon) -> Self {
        Self { kind: AnnotationKind::Walkway, geometry: Geometry::Polygon(poly), name: None, safety_class: None }
    }

    pub fn crossing(poly: Polygon, name: Option<String>) -> Self {
        Self { kind: AnnotationKind::Crossing, geometry: Geometry::Polygon(poly), name, safety_class: None }
    }

    pub fn bus_stop(position: Point, name: impl Into<String>) -> Self {
        Self {
            kind: AnnotationKind::BusStop,
            geometry: Geometry::Point(position),
            name: Some(name.into()),
            safety_class: None,
        }
    }

    pub fn street(poly: Polygon, name: impl Into<String>, safety: SafetyClass) -> Self {
        Self {
            kind: AnnotationKind::Street,
            geometry: Geometry::Polygon(poly),
            name: Some(name.into()),
            safety_class: Some(safety),
        }
    }

    pub fn validate(&self) -> Result<(), LayersError> {
        let point = matches!(self.geometry, Geometry::Point(_));
        if point != (self.kind == AnnotationKind::BusStop) {
            return Err(LayersError::InvalidAnnotation(format!(
                "{:?} needs {} geometry",
                self.kind,
                if point { "polygon" } else { "point" }
            )));
        }
        if self.safety_class.is_some() && self.kind != AnnotationKind::Street {
            return Err(LayersError::InvalidAnnotation("safety_class is only allowed on streets".into()));
        }
        Ok(())
    }

    /// Street safety, defaulting to safe.
    pub fn safety(&self) -> SafetyClass {
        self.safety_class.unwrap_or_default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserTag {
    pub position: Point,
    pub text: String,
    pub author: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub registration: Option<RegistrationSummary>,
    /// Configuration the map was built with.
    pub config: Value,
    /// Stores dropped for lying entirely outside the base map.
    pub dropped: usize,
    /// Stores detected directly on the base map.
    pub map_store_count: usize,
    pub pixels_per_foot: f64,
}

impl Default for Provenance {
    fn default() -> Self {
        Self { registration: None, config: Value::Null, dropped: 0, map_store_count: 0, pixels_per_foot: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusedMap {
    pub format_version: u32,
    pub base: BaseLayer,
    pub directory: Vec<Store>,
    pub annotations: Vec<Annotation>,
    pub tags: Vec<UserTag>,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SidecarStore {
    pub id: u32,
    pub name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SidecarStreet {
    pub name: String,
    pub polygon: Polygon,
    #[serde(default)]
    pub safety: SafetyClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SidecarBusStop {
    pub name: String,
    pub position: Point,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SidecarCrossing {
    pub polygon: Polygon,
    #[serde(default)]
    pub name: Option<String>,
}

/// Hand-authored metadata shipped with a directory image: store names keyed
/// by directory store id, plus streets, bus stops and marked crossings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Sidecar {
    pub stores: Vec<SidecarStore>,
    pub streets: Vec<SidecarStreet>,
    pub bus_stops: Vec<SidecarBusStop>,
    pub crossings: Vec<SidecarCrossing>,
}

impl Sidecar {
    pub fn annotations(&self) -> Vec<Annotation> {
        let streets = self.streets.iter().map(|s| Annotation::street(s.polygon.clone(), &s.name, s.safety));
        let stops = self.bus_stops.iter().map(|b| Annotation::bus_stop(b.position, &b.name));
        let crossings = self.crossings.iter().map(|c| Annotation::crossing(c.polygon.clone(), c.name.clone()));
        streets.chain(stops).chain(crossings).collect()
    }
}

/// Assembles the four tiers. Directory stores (already warped into base
/// pixels) take their names from the sidecar; unnamed ones get "Store <id>".
/// Stores entirely outside the base map are dropped and counted.
pub fn build_fused_map(
    base: BaseLayer,
    stores_map: &[StoreRegion],
    stores_dir_warped: &[StoreRegion],
    sidecar: &Sidecar,
    annotations: Vec<Annotation>,
    mut provenance: Provenance,
) -> Result<FusedMap, LayersError> {
    let mut seen = BTreeSet::new();
    for s in &sidecar.stores {
        if !seen.insert(s.id) {
            return Err(LayersError::DuplicateStoreId(s.id));
        }
    }
    for a in &annotations {
        a.validate()?;
    }
    let mut directory = Vec::new();
    let mut dropped = 0;
    for s in stores_dir_warped {
        if !base.overlaps(&s.footprint) {
            dropped += 1;
            continue;
        }
        let name = sidecar
            .stores
            .iter()
            .find(|n| n.id == s.id)
            .map(|n| n.name.clone())
            .or_else(|| s.name.clone())
            .unwrap_or_else(|| format!("Store {}", s.id));
        directory.push(Store { id: s.id, name, footprint: s.footprint.clone(), centroid: s.centroid, entrance: None });
    }
    provenance.dropped = dropped;
    provenance.map_store_count = stores_map.len();
    Ok(FusedMap { format_version: FORMAT_VERSION, base, directory, annotations, tags: Vec::new(), provenance })
}

impl FusedMap {
    pub fn empty(base: BaseLayer) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            base,
            directory: Vec::new(),
            annotations: Vec::new(),
            tags: Vec::new(),
            provenance: Provenance::default(),
        }
    }

    pub fn store(&self, id: u32) -> Option<&Store> {
        self.directory.iter().find(|s| s.id == id)
    }

    pub fn store_by_name(&self, name: &str) -> Option<&Store> {
        self.directory.iter().find(|s| s.name.eq_ignore_ascii_case(name))
    }

    pub fn annotations_of(&self, kind: AnnotationKind) -> impl Iterator<Item = &Annotation> {
        self.annotations.iter().filter(move |a| a.kind == kind)
    }

    pub fn pixel_to_geo(&self, p: Point) -> (f64, f64) {
        self.base.anchor.pixel_to_geo(p)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("fused map serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, LayersError> {
        let root: Value = serde_json::from_str(text).map_err(|e| parse_err("document", None, e))?;
        let obj = root.as_object().ok_or_else(|| parse_err("document", None, "expected an object"))?;
        let field = |k: &str| obj.get(k).ok_or_else(|| parse_err(k, None, "missing"));
        let version = field("format_version")?.as_u64().ok_or_else(|| parse_err("format_version", None, "not an integer"))?;
        if version != u64::from(FORMAT_VERSION) {
            return Err(LayersError::Version(version));
        }
        let base: BaseLayer = serde_json::from_value(field("base")?.clone()).map_err(|e| parse_err("base", None, e))?;
        let provenance: Provenance =
            serde_json::from_value(field("provenance")?.clone()).map_err(|e| parse_err("provenance", None, e))?;
        let directory: Vec<Store> = parse_tier(field("directory")?, "directory")?;
        let annotations: Vec<Annotation> = parse_tier(field("annotations")?, "annotations")?;
        for (i, a) in annotations.iter().enumerate() {
            a.validate().map_err(|e| parse_err("annotations", Some(i), e))?;
        }
        let tags: Vec<UserTag> = parse_tier(field("tags")?, "tags")?;
        Ok(Self { format_version: FORMAT_VERSION, base, directory, annotations, tags, provenance })
    }
}

fn parse_err(tier: &str, index: Option<usize>, e: impl ToString) -> LayersError {
    LayersError::Parse { tier: tier.to_string(), index, message: e.to_string() }
}

fn parse_tier<T: serde::de::DeserializeOwned>(v: &Value, tier: &str) -> Result<Vec<T>, LayersError> {
    let items = v.as_array().ok_or_else(|| parse_err(tier, None, "expected an array"))?;
    items
        .iter()
        .enumerate()
        .map(|(i, item)| serde_json::from_value(item.clone()).map_err(|e| parse_err(tier, Some(i), e)))
        .collect()
}

/// Returns a copy of `map` with `tag` appended.
pub fn add_user_tag(map: &FusedMap, tag: UserTag) -> Result<FusedMap, LayersError> {
    if !map.base.contains(tag.position) {
        return Err(LayersError::TagOutOfBounds {
            x: tag.position.x,
            y: tag.position.y,
            width: map.base.width,
            height: map.base.height,
        });
    }
    let mut out = map.clone();
    out.tags.push(tag);
    Ok(out)
}

pub fn save_fused_map(map: &FusedMap, path: impl AsRef<Path>) -> Result<(), LayersError> {
    fs::write(path, map.to_json())?;
    Ok(())
}

pub fn load_fused_map(path: impl AsRef<Path>) -> Result<FusedMap, LayersError> {
    FusedMap::from_json(&fs::read_to_string(path)?)
}

/// Convex polygons covering a mask: each 4-connected component is split in
/// half along its longer side until every piece's hull has solidity at least
/// `solidity_min`. Pieces smaller than `min_area` pixels are discarded.
pub fn polygonize_mask(mask: &BinaryMask, solidity_min: f64, min_area: usize) -> Vec<Polygon> {
    let mut out = Vec::new();
    for region in connected_components(mask, Connectivity::Four).regions {
        split_region(mask, &region, solidity_min, min_area, &mut out);
    }
    out
}

fn split_region(mask: &BinaryMask, region: &Region, solidity_min: f64, min_area: usize, out: &mut Vec<Polygon>) {
    if region.area < min_area.max(1) {
        return;
    }
    let Ok(hull) = pixel_hull(region) else { return };
    let (x0, y0, x1, y1) = region.bbox;
    let solid = shape_regularity(region, &hull).map(|s| s.solidity >= solidity_min).unwrap_or(true);
    if solid || (x0 == x1 && y0 == y1) {
        out.push(hull);
        return;
    }
    let (w, h) = (x1 - x0 + 1, y1 - y0 + 1);
    let halves: [Box<dyn Fn(u32, u32) -> bool>; 2] = if w >= h {
        let mid = x0 + w / 2;
        [Box::new(move |x, _| x < mid), Box::new(move |x, _| x >= mid)]
    } else {
        let mid = y0 + h / 2;
        [Box::new(move |_, y| y < mid), Box::new(move |_, y| y >= mid)]
    };
    for half in halves {
        let in_box = |x: u32, y: u32| (x0..=x1).contains(&x) && (y0..=y1).contains(&y);
        let part = BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
            in_box(x, y) && half(x, y) && mask.get(x, y)
        });
        for piece in connected_components(&part, Connectivity::Four).regions {
            split_region(&part, &piece, solidity_min, min_area, out);
        }
    }
}
