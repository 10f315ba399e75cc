//! Browser demo: a generated shopping complex, registration playback,
//! routing under a parking penalty and "where am I" on click.

use mallnav::fixture::{generate, Fixture, FixtureParams};
use mallnav::layers::FusedMap;
use mallnav::narrate::{describe_position, describe_route_to};
use mallnav::pipeline::{run_images, MapSettings, PipelineRun};
use mallnav::raster::RasterImage;
use mallnav::register::{apply_transform, cpd_register_prealigned_observed, CpdMode};
use mallnav::route::{build_walk_graph, route_between_stores, Pose, WalkGraph};
use mallnav::Point;
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct StoreInfo<'a> {
    id: u32,
    name: &'a str,
    centroid: [f64; 2],
}

#[derive(Serialize)]
struct Frame {
    iteration: usize,
    sigma2: f64,
    log_likelihood: f64,
    points: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct Playback {
    targets: Vec<[f64; 2]>,
    frames: Vec<Frame>,
    overlap_percent: f64,
}

#[derive(Serialize)]
struct RouteView {
    path: Vec<[f64; 2]>,
    sentences: Vec<String>,
    length_feet: f64,
    walkway_fraction: f64,
    contains_parking: bool,
}

#[derive(Serialize)]
struct Spoken {
    sentences: Vec<String>,
}

fn xy(p: Point) -> [f64; 2] {
    [p.x, p.y]
}

fn rgba(img: &RasterImage) -> Vec<u8> {
    img.pixels().iter().flat_map(|&[r, g, b]| [r, g, b, 255]).collect()
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("view serializes")
}

#[wasm_bindgen]
pub struct Demo {
    fixture: Fixture,
    run: PipelineRun,
    graph: WalkGraph,
    settings: MapSettings,
}

#[wasm_bindgen]
impl Demo {
    /// Generates the fixture for `seed` and fuses it.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, n_stores: u32) -> Result<Demo, String> {
        let params = FixtureParams { seed: u64::from(seed), n_stores, ..Default::default() };
        let fixture = generate(&params).map_err(|e| e.to_string())?;
        let run = run_images(&fixture.config, fixture.map.clone(), &fixture.directory, &fixture.sidecar)
            .map_err(|e| e.to_string())?;
        let settings = MapSettings::from_map(&run.map);
        let graph = build_walk_graph(&run.map, settings.grid_step).map_err(|e| e.to_string())?;
        Ok(Demo { fixture, run, graph, settings })
    }

    pub fn width(&self) -> u32 {
        self.fixture.map.width()
    }

    pub fn height(&self) -> u32 {
        self.fixture.map.height()
    }

    pub fn directory_width(&self) -> u32 {
        self.fixture.directory.width()
    }

    pub fn directory_height(&self) -> u32 {
        self.fixture.directory.height()
    }

    /// Base map as RGBA bytes, row-major.
    pub fn map_rgba(&self) -> Vec<u8> {
        rgba(&self.fixture.map)
    }

    pub fn directory_rgba(&self) -> Vec<u8> {
        rgba(&self.fixture.directory)
    }

    pub fn start_x(&self) -> f64 {
        self.fixture.truth.start_pose.position.x
    }

    pub fn start_y(&self) -> f64 {
        self.fixture.truth.start_pose.position.y
    }

    /// `[{id, name, centroid}]` for every fused store.
    pub fn stores(&self) -> String {
        let list: Vec<_> = self
            .run
            .map
            .directory
            .iter()
            .map(|s| StoreInfo { id: s.id, name: &s.name, centroid: xy(s.centroid) })
            .collect();
        json(&list)
    }

    /// Every EM iteration of the registration, with the directory centroids
    /// carried into map pixels. `mode` is rigid, affine or nonrigid.
    pub fn registration(&self, mode: &str) -> Result<String, String> {
        let mode = match mode {
            "rigid" => CpdMode::Rigid,
            "affine" => CpdMode::Affine,
            "nonrigid" => CpdMode::Nonrigid,
            other => return Err(format!("unknown mode {other}")),
        };
        let ex = &self.run.extracted;
        let y = &ex.directory_points;
        let params = mallnav::register::CpdParams { mode, ..self.fixture.config.cpd };
        let mut frames = Vec::new();
        cpd_register_prealigned_observed(&ex.map_points, y, &params, |st| {
            frames.push(Frame {
                iteration: st.iteration,
                sigma2: st.sigma2,
                log_likelihood: st.log_likelihood,
                points: apply_transform(st.transform, y).points().iter().map(|&p| xy(p)).collect(),
            })
        })
        .map_err(|e| e.to_string())?;
        let targets = ex.map_points.points().iter().map(|&p| xy(p)).collect();
        Ok(json(&Playback { targets, frames, overlap_percent: self.run.overlap.overlap_percent }))
    }

    /// Route between two stores with the given parking multiplier.
    pub fn route(&self, from: u32, to: u32, parking: f64) -> Result<String, String> {
        let weights = mallnav::route::CostWeights { parking, ..self.settings.weights };
        weights.validate().map_err(|e| e.to_string())?;
        let map: &FusedMap = &self.run.map;
        let route = route_between_stores(&self.graph, from, to, &weights).map_err(|e| e.to_string())?;
        let u = describe_route_to(map, &self.graph, &route, map.store(to), None, &self.settings.narration)
            .map_err(|e| e.to_string())?;
        Ok(json(&RouteView {
            path: route.positions(&self.graph).into_iter().map(xy).collect(),
            sentences: u.sentences,
            length_feet: route.total_length / self.settings.narration.pixels_per_foot,
            walkway_fraction: route.walkway_fraction(&self.graph),
            contains_parking: route.contains_parking,
        }))
    }

    /// Spoken description of the position `(x, y)` facing `heading`.
    pub fn where_am_i(&self, x: f64, y: f64, heading: f64) -> Result<String, String> {
        let pose = Pose::new(Point::new(x, y), heading);
        let u = describe_position(&self.run.map, &self.graph, pose, &self.settings.narration)
            .map_err(|e| e.to_string())?;
        Ok(json(&Spoken { sentences: u.sentences }))
    }
}
