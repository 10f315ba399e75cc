//! End-to-end orchestration: extract features from both images, register the
//! directory onto the map, and assemble the fused map.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evalmetrics::{overlap_percentage, rasterize_polygons, OverlapReport};
use crate::extract::{
    control_points, detect_stores_directory, extract_map_features, ExtractConfig, ExtractError, MapFeatures,
    StoreRegion,
};
use crate::layers::{
    build_fused_map, polygonize_mask, Annotation, BaseLayer, FusedMap, GeoAnchor, LayersError, Provenance, Sidecar,
};
use crate::narrate::{NarrateError, NarrationConfig};
use crate::raster::{BinaryMask, ColorSpec, RasterError, RasterImage};
use crate::register::{apply_transform, cpd_register, cpd_register_prealigned, warp_polygon, CpdParams, PointSet, RegisterError, RegistrationResult};
use crate::route::{CostWeights, RouteError, DEFAULT_GRID_STEP};

/// Walkway pieces smaller than this many pixels are not worth a polygon.
const MIN_WALKWAY_PIECE: usize = 16;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Register(#[from] RegisterError),
    #[error(transparent)]
    Layers(#[from] LayersError),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Narrate(#[from] NarrateError),
}

impl PipelineError {
    /// Whether the failure lies in the inputs rather than in processing.
    pub fn is_input_error(&self) -> bool {
        matches!(self, PipelineError::Config(_) | PipelineError::Io { .. } | PipelineError::Json { .. })
    }
}

fn default_grid_step() -> u32 {
    DEFAULT_GRID_STEP
}

fn default_walkway_solidity() -> f64 {
    0.9
}

fn yes() -> bool {
    true
}

/// Everything needed to run the pipeline. Relative paths are resolved
/// against the directory of the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub map_image: PathBuf,
    pub directory_image: PathBuf,
    pub sidecar: PathBuf,
    pub output: PathBuf,
    pub anchor: GeoAnchor,
    pub seed_colors: Vec<ColorSpec>,
    #[serde(default)]
    pub extract: ExtractConfig,
    #[serde(default)]
    pub cpd: CpdParams,
    #[serde(default)]
    pub weights: CostWeights,
    #[serde(default)]
    pub narration: NarrationConfig,
    /// Fit a similarity first and refine with `cpd.mode` from there.
    #[serde(default = "yes")]
    pub prealign: bool,
    #[serde(default = "default_grid_step")]
    pub grid_step: u32,
    /// Solidity a walkway polygon must reach before it stops being split.
    #[serde(default = "default_walkway_solidity")]
    pub walkway_solidity: f64,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.into(), source })?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|source| PipelineError::Json { path: path.into(), source })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.output)
    }

    /// Checks parameter ranges and that every input file exists.
    pub fn validate(&self) -> Result<(), PipelineError> {
        for p in [&self.map_image, &self.directory_image, &self.sidecar] {
            let full = self.resolve(p);
            if !full.is_file() {
                return Err(PipelineError::Config(format!("input file {} does not exist", full.display())));
            }
        }
        self.validate_params()
    }

    /// The range checks of [`validate`](Self::validate), without touching the filesystem.
    pub fn validate_params(&self) -> Result<(), PipelineError> {
        if self.seed_colors.is_empty() {
            return Err(PipelineError::Config("seed_colors must not be empty".into()));
        }
        if self.grid_step < 1 {
            return Err(PipelineError::Config("grid_step must be at least 1".into()));
        }
        if !(self.walkway_solidity > 0.0 && self.walkway_solidity <= 1.0) {
            return Err(PipelineError::Config("walkway_solidity must lie in (0, 1]".into()));
        }
        self.extract.validate()?;
        self.cpd.validate()?;
        self.weights.validate()?;
        self.narration.validate()?;
        Ok(())
    }

    pub fn load_sidecar(&self) -> Result<Sidecar, PipelineError> {
        let path = self.resolve(&self.sidecar);
        let text = fs::read_to_string(&path).map_err(|source| PipelineError::Io { path: path.clone(), source })?;
        serde_json::from_str(&text).map_err(|source| PipelineError::Json { path, source })
    }

    /// Parameters recorded in the fused map's provenance.
    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[derive(Clone, Debug)]
pub struct Extracted {
    pub map_image: RasterImage,
    pub map: MapFeatures,
    pub directory_stores: Vec<StoreRegion>,
    pub map_points: PointSet,
    pub directory_points: PointSet,
}

pub fn extract(cfg: &PipelineConfig) -> Result<Extracted, PipelineError> {
    let map_image = RasterImage::load(cfg.resolve(&cfg.map_image))?;
    let dir_image = RasterImage::load(cfg.resolve(&cfg.directory_image))?;
    extract_images(cfg, map_image, &dir_image)
}

/// [`extract`] on images already in memory.
pub fn extract_images(
    cfg: &PipelineConfig,
    map_image: RasterImage,
    dir_image: &RasterImage,
) -> Result<Extracted, PipelineError> {
    let map = extract_map_features(&map_image, &cfg.extract)?;
    let directory_stores = detect_stores_directory(dir_image, &cfg.seed_colors, &cfg.extract)?;
    let map_points = control_points(&map.stores);
    let directory_points = control_points(&directory_stores);
    Ok(Extracted { map_image, map, directory_stores, map_points, directory_points })
}

#[derive(Clone, Debug)]
pub struct Registered {
    pub result: RegistrationResult,
    /// Directory stores carried into base-map pixels.
    pub warped: Vec<StoreRegion>,
}

pub fn register(cfg: &PipelineConfig, ex: &Extracted) -> Result<Registered, PipelineError> {
    let result = if cfg.prealign {
        cpd_register_prealigned(&ex.map_points, &ex.directory_points, &cfg.cpd)?
    } else {
        cpd_register(&ex.map_points, &ex.directory_points, &cfg.cpd)?
    };
    let centroids = apply_transform(&result.transform, &ex.directory_points);
    let warped = ex
        .directory_stores
        .iter()
        .zip(centroids.points())
        .map(|(s, &c)| {
            Ok(StoreRegion { footprint: warp_polygon(&result.transform, &s.footprint)?, centroid: c, ..s.clone() })
        })
        .collect::<Result<Vec<_>, RegisterError>>()?;
    Ok(Registered { result, warped })
}

pub fn fuse(cfg: &PipelineConfig, ex: &Extracted, reg: &Registered) -> Result<FusedMap, PipelineError> {
    fuse_with(cfg, ex, reg, &cfg.load_sidecar()?)
}

/// [`fuse`] with the sidecar already in memory.
pub fn fuse_with(
    cfg: &PipelineConfig,
    ex: &Extracted,
    reg: &Registered,
    sidecar: &Sidecar,
) -> Result<FusedMap, PipelineError> {
    let mut annotations: Vec<Annotation> =
        ex.map.parking.iter().map(|p| Annotation::parking(p.footprint.clone())).collect();
    annotations.extend(
        polygonize_mask(&ex.map.masks.walkways, cfg.walkway_solidity, MIN_WALKWAY_PIECE)
            .into_iter()
            .map(Annotation::walkway),
    );
    annotations.extend(sidecar.annotations());
    let base = BaseLayer {
        image: cfg.resolve(&cfg.map_image).to_string_lossy().into_owned(),
        width: ex.map_image.width(),
        height: ex.map_image.height(),
        anchor: cfg.anchor,
    };
    let provenance = Provenance {
        registration: Some(reg.result.summary()),
        config: cfg.snapshot(),
        pixels_per_foot: cfg.narration.pixels_per_foot,
        ..Default::default()
    };
    Ok(build_fused_map(base, &ex.map.stores, &reg.warped, sidecar, annotations, provenance)?)
}

/// Pixels covered by the stores detected on the base map.
pub fn map_store_mask(ex: &Extracted) -> BinaryMask {
    rasterize_polygons(ex.map.stores.iter().map(|s| &s.footprint), ex.map_image.width(), ex.map_image.height())
}

/// Pixels covered by the fused map's directory tier.
pub fn registered_store_mask(map: &FusedMap) -> BinaryMask {
    rasterize_polygons(map.directory.iter().map(|s| &s.footprint), map.base.width, map.base.height)
}

/// Routing and narration settings recorded in a fused map, falling back to
/// defaults for anything missing. The map's own pixels-per-foot wins.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapSettings {
    pub weights: CostWeights,
    pub narration: NarrationConfig,
    pub grid_step: u32,
}

impl MapSettings {
    pub fn from_map(map: &FusedMap) -> Self {
        let cfg = &map.provenance.config;
        let field = |k: &str| cfg.get(k).cloned().unwrap_or(serde_json::Value::Null);
        let weights = serde_json::from_value(field("weights")).unwrap_or_default();
        let mut narration: NarrationConfig = serde_json::from_value(field("narration")).unwrap_or_default();
        narration.pixels_per_foot = map.provenance.pixels_per_foot;
        let grid_step = serde_json::from_value(field("grid_step")).unwrap_or(DEFAULT_GRID_STEP);
        Self { weights, narration, grid_step }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub extracted: Extracted,
    pub registered: Registered,
    pub map: FusedMap,
    pub overlap: OverlapReport,
}

pub fn run(cfg: &PipelineConfig) -> Result<PipelineRun, PipelineError> {
    cfg.validate()?;
    finish(cfg, extract(cfg)?, &cfg.load_sidecar()?)
}

/// Runs the pipeline on in-memory inputs. File paths in `cfg` are only
/// recorded, never read.
pub fn run_images(
    cfg: &PipelineConfig,
    map_image: RasterImage,
    dir_image: &RasterImage,
    sidecar: &Sidecar,
) -> Result<PipelineRun, PipelineError> {
    cfg.validate_params()?;
    finish(cfg, extract_images(cfg, map_image, dir_image)?, sidecar)
}

fn finish(cfg: &PipelineConfig, extracted: Extracted, sidecar: &Sidecar) -> Result<PipelineRun, PipelineError> {
    let registered = register(cfg, &extracted)?;
    let map = fuse_with(cfg, &extracted, &registered, sidecar)?;
    let overlap = overlap_percentage(&map_store_mask(&extracted), &registered_store_mask(&map))?;
    Ok(PipelineRun { extracted, registered, map, overlap })
}

/// Base map with the registered stores blended in at 50%.
pub fn overlay(base: &RasterImage, stores: &[StoreRegion]) -> RasterImage {
    const TINT: [u8; 3] = [220, 40, 160];
    let mask = rasterize_polygons(stores.iter().map(|s| &s.footprint), base.width(), base.height());
    let mut out = base.clone();
    for (x, y) in mask.iter_set() {
        let p = base.get(x, y);
        out.set(x, y, std::array::from_fn(|i| ((u16::from(p[i]) + u16::from(TINT[i])) / 2) as u8));
    }
    out
}
