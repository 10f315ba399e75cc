//! Spoken-style descriptions for blind and low-vision pedestrians: distance
//! wording, direction quantization, and the where-am-I, points-of-interest,
//! destination and extended-information utterances.
//!
//! Every sentence comes with a [`Fact`] holding the values it mentions, so
//! callers and tests never need to parse prose.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layers::{AnnotationKind, FusedMap, Store};
use crate::raster::Point;
use crate::route::{all_landmarks, bearing, nearest_landmarks, normalize_180, Landmark, LandmarkRef, Pose, Route, Terrain, WalkGraph};

#[derive(Debug, Error, PartialEq)]
pub enum NarrateError {
    #[error("invalid narration config: {0}")]
    InvalidConfig(String),
    #[error("step calibration needs at least one step and a positive distance")]
    InvalidCalibration,
    #[error("route is empty")]
    EmptyRoute,
    #[error("route is not valid on this graph: {0}")]
    InvalidRoute(String),
    #[error("k must be at least 1")]
    InvalidK,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceUnit {
    Feet,
    Steps,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Egocentric,
    Allocentric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vision {
    Blind,
    LowVision,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NarrationConfig {
    pub distance_unit: DistanceUnit,
    pub step_length_feet: f64,
    pub frame: Frame,
    /// Recorded with the user profile; the wording is the same for both.
    pub vision: Vision,
    pub pixels_per_foot: f64,
    /// Stores this close to a route segment (pixels) may be mentioned.
    pub pass_radius: f64,
    /// User tags this close (pixels) are read out.
    pub tag_radius: f64,
    /// Route simplification tolerance in pixels before segmenting.
    pub simplify_tolerance: f64,
}

impl Default for NarrationConfig {
    fn default() -> Self {
        Self {
            distance_unit: DistanceUnit::Feet,
            step_length_feet: 2.5,
            frame: Frame::Egocentric,
            vision: Vision::Blind,
            pixels_per_foot: 1.0,
            pass_radius: 25.0,
            tag_radius: 40.0,
            simplify_tolerance: 6.0,
        }
    }
}

impl NarrationConfig {
    pub fn validate(&self) -> Result<(), NarrateError> {
        for (name, v) in [
            ("step_length_feet", self.step_length_feet),
            ("pixels_per_foot", self.pixels_per_foot),
            ("pass_radius", self.pass_radius),
            ("tag_radius", self.tag_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(NarrateError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(self.simplify_tolerance >= 0.0) {
            return Err(NarrateError::InvalidConfig("simplify_tolerance must be >= 0".into()));
        }
        Ok(())
    }

    fn feet(&self, pixels: f64) -> f64 {
        pixels / self.pixels_per_foot
    }
}

pub fn calibrate_steps(walked_feet: f64, steps: u32) -> Result<f64, NarrateError> {
    if steps == 0 || !(walked_feet > 0.0 && walked_feet.is_finite()) {
        return Err(NarrateError::InvalidCalibration);
    }
    Ok(walked_feet / f64::from(steps))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceFact {
    pub feet: f64,
    pub unit: DistanceUnit,
    /// The rounded count that is spoken.
    pub count: u64,
}

impl DistanceFact {
    pub fn text(&self) -> String {
        match (self.unit, self.count) {
            (DistanceUnit::Steps, 0) => "less than one step".into(),
            (DistanceUnit::Steps, 1) => "1 step".into(),
            (DistanceUnit::Steps, n) => format!("{n} steps"),
            (DistanceUnit::Feet, 1) => "1 foot".into(),
            (DistanceUnit::Feet, n) => format!("{n} feet"),
        }
    }
}

pub fn format_distance(feet: f64, cfg: &NarrationConfig) -> (String, DistanceFact) {
    let feet = feet.max(0.0);
    let count = match cfg.distance_unit {
        DistanceUnit::Feet => feet.round(),
        DistanceUnit::Steps => (feet / cfg.step_length_feet).round(),
    } as u64;
    let fact = DistanceFact { feet, unit: cfg.distance_unit, count };
    (fact.text(), fact)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionTerm {
    StraightAhead,
    DiagonallyRight,
    ToYourRight,
    BehindYouRight,
    BehindYou,
    BehindYouLeft,
    ToYourLeft,
    DiagonallyLeft,
}

impl DirectionTerm {
    const CLOCKWISE: [DirectionTerm; 8] = [
        DirectionTerm::StraightAhead,
        DirectionTerm::DiagonallyRight,
        DirectionTerm::ToYourRight,
        DirectionTerm::BehindYouRight,
        DirectionTerm::BehindYou,
        DirectionTerm::BehindYouLeft,
        DirectionTerm::ToYourLeft,
        DirectionTerm::DiagonallyLeft,
    ];

    pub fn text(self) -> &'static str {
        match self {
            DirectionTerm::StraightAhead => "straight ahead",
            DirectionTerm::DiagonallyRight => "diagonally right",
            DirectionTerm::ToYourRight => "to your right",
            DirectionTerm::BehindYouRight => "behind you to the right",
            DirectionTerm::BehindYou => "behind you",
            DirectionTerm::BehindYouLeft => "behind you to the left",
            DirectionTerm::ToYourLeft => "to your left",
            DirectionTerm::DiagonallyLeft => "diagonally left",
        }
    }

    /// Wording after "Turn" in route instructions.
    pub fn turn_text(self) -> &'static str {
        match self {
            DirectionTerm::BehindYouRight => "sharply right",
            DirectionTerm::BehindYou => "around",
            DirectionTerm::BehindYouLeft => "sharply left",
            other => other.text(),
        }
    }

    pub fn mirror(self) -> DirectionTerm {
        let i = Self::CLOCKWISE.iter().position(|&t| t == self).expect("listed");
        Self::CLOCKWISE[(8 - i) % 8]
    }
}

/// Index of the 45-degree sector centered on `k * 45`, sectors half-open
/// on their clockwise side.
fn sector(deg: f64) -> usize {
    (((deg + 22.5) / 45.0).floor() as i64).rem_euclid(8) as usize
}

pub fn quantize_direction(relative_bearing: f64) -> DirectionTerm {
    DirectionTerm::CLOCKWISE[sector(relative_bearing)]
}

pub fn compass_word(heading: f64) -> &'static str {
    const WORDS: [&str; 8] = ["North", "Northeast", "East", "Southeast", "South", "Southwest", "West", "Northwest"];
    WORDS[sector(heading)]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtteranceKind {
    WhereAmI,
    Poi,
    Destination,
    Extended,
}

/// Structured content of one sentence.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub landmark: Option<LandmarkRef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<DistanceFact>,
    /// The direction wording used in the sentence.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub direction: Option<String>,
    /// Bearing relative to the listener's heading, degrees in (-180, 180].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_bearing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heading: Option<String>,
    /// Quoted user-tag text.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub kind: UtteranceKind,
    pub sentences: Vec<String>,
    pub facts: Vec<Fact>,
}

impl Utterance {
    fn new(kind: UtteranceKind) -> Self {
        Self { kind, sentences: Vec::new(), facts: Vec::new() }
    }

    fn push(&mut self, sentence: String, fact: Fact) {
        self.sentences.push(sentence);
        self.facts.push(fact);
    }

    /// One sentence per line.
    pub fn text(&self) -> String {
        self.sentences.iter().map(|s| format!("{s}\n")).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("utterance serializes")
    }
}

/// Direction words for a target at `relative` degrees from the heading and
/// `absolute` degrees from North.
fn direction_words(relative: f64, absolute: f64, cfg: &NarrationConfig) -> String {
    match cfg.frame {
        Frame::Egocentric => quantize_direction(relative).text().to_string(),
        Frame::Allocentric => format!("to the {}", compass_word(absolute)),
    }
}

fn landmark_fact(l: &Landmark, heading: f64, cfg: &NarrationConfig) -> (String, String, Fact) {
    let (dist, dfact) = format_distance(cfg.feet(l.distance), cfg);
    let dir = direction_words(l.relative_bearing, normalize_180(l.relative_bearing + heading).rem_euclid(360.0), cfg);
    let fact = Fact {
        subject: Some(l.name.clone()),
        landmark: Some(l.landmark.clone()),
        distance: Some(dfact),
        direction: Some(dir.clone()),
        relative_bearing: Some(l.relative_bearing),
        ..Default::default()
    };
    (dist, dir, fact)
}

/// Orientation, the closest landmark, and the nearest landmark on each side.
pub fn describe_position(
    map: &FusedMap,
    g: &WalkGraph,
    pose: Pose,
    cfg: &NarrationConfig,
) -> Result<Utterance, NarrateError> {
    cfg.validate()?;
    let mut u = Utterance::new(UtteranceKind::WhereAmI);
    let facing = compass_word(pose.heading);
    u.push(format!("Facing {facing}."), Fact { heading: Some(facing.into()), ..Default::default() });

    let landmarks = all_landmarks(map, pose);
    if let Some((closest, rest)) = landmarks.split_first() {
        let (dist, dir, fact) = landmark_fact(closest, pose.heading, cfg);
        u.push(format!("Closest is {}, {dist} {dir}.", closest.name), fact);
        let right = rest.iter().find(|l| l.relative_bearing > 0.0);
        let left = rest.iter().find(|l| l.relative_bearing < 0.0);
        for (side, l) in [("right", right), ("left", left)] {
            let Some(l) = l else { continue };
            let (dist, dir, fact) = landmark_fact(l, pose.heading, cfg);
            let sentence = match cfg.frame {
                Frame::Egocentric => format!("On your {side}, {}, {dist} {dir}.", l.name),
                Frame::Allocentric => format!("Also nearby, {}, {dist} {dir}.", l.name),
            };
            u.push(sentence, fact);
        }
    }

    // Grid spacing is the shortest edge; a parking node that close means the
    // listener is standing in a lot.
    let spacing = g.edges.iter().map(|e| e.length).fold(f64::INFINITY, f64::min);
    if let Some(n) = g.nearest_node(pose.position, |_| true) {
        let node = &g.nodes[n];
        if node.terrain == Terrain::Parking && node.position.distance(pose.position) <= spacing {
            u.push(
                "You are in a parking lot.".into(),
                Fact { subject: Some("parking lot".into()), ..Default::default() },
            );
        }
    }
    Ok(u)
}

/// One sentence per nearby landmark, nearest first.
pub fn describe_poi(map: &FusedMap, pose: Pose, k: usize, cfg: &NarrationConfig) -> Result<Utterance, NarrateError> {
    cfg.validate()?;
    let landmarks = nearest_landmarks(map, pose, k).map_err(|_| NarrateError::InvalidK)?;
    let mut u = Utterance::new(UtteranceKind::Poi);
    for l in &landmarks {
        let (dist, dir, fact) = landmark_fact(l, pose.heading, cfg);
        u.push(format!("{}, {dist} {dir}.", l.name), fact);
    }
    Ok(u)
}

/// A stretch of the route walked in one compass sector on one terrain.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub start: Point,
    pub end: Point,
    pub points: Vec<Point>,
    pub terrain: Terrain,
    pub length: f64,
    pub heading: f64,
}

fn perpendicular_distance(p: Point, a: Point, b: Point) -> f64 {
    let d = b.sub(a);
    let len = d.norm();
    if len == 0.0 {
        return p.distance(a);
    }
    d.cross(p.sub(a)).abs() / len
}

/// Ramer-Douglas-Peucker simplification; endpoints are always kept.
pub fn simplify_polyline(points: &[Point], tolerance: f64) -> Vec<Point> {
    if points.len() < 3 {
        return points.to_vec();
    }
    let (first, last) = (points[0], points[points.len() - 1]);
    let (idx, dmax) = points[1..points.len() - 1]
        .iter()
        .enumerate()
        .map(|(i, &p)| (i + 1, perpendicular_distance(p, first, last)))
        .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
    if dmax <= tolerance {
        return vec![first, last];
    }
    let mut left = simplify_polyline(&points[..=idx], tolerance);
    let right = simplify_polyline(&points[idx..], tolerance);
    left.pop();
    left.extend(right);
    left
}

/// Splits a route into maneuver segments: runs of one terrain are simplified,
/// then consecutive pieces are merged while they stay in the same compass
/// sector.
pub fn route_segments(g: &WalkGraph, route: &Route, tolerance: f64) -> Vec<Segment> {
    let pts = route.positions(g);
    let mut pieces: Vec<(Point, Point, Terrain)> = Vec::new();
    let mut i = 0;
    while i < route.terrains.len() {
        let t = route.terrains[i];
        let mut j = i;
        while j < route.terrains.len() && route.terrains[j] == t {
            j += 1;
        }
        let run = simplify_polyline(&pts[i..=j], tolerance);
        pieces.extend(run.windows(2).map(|w| (w[0], w[1], t)));
        i = j;
    }
    let mut segments: Vec<Segment> = Vec::new();
    for (a, b, terrain) in pieces {
        let h = bearing(a, b);
        match segments.last_mut() {
            Some(s) if s.terrain == terrain && sector(s.heading) == sector(h) => {
                s.end = b;
                s.points.push(b);
                s.length += a.distance(b);
                s.heading = bearing(s.start, s.end);
            }
            _ => segments.push(Segment { start: a, end: b, points: vec![a, b], terrain, length: a.distance(b), heading: h }),
        }
    }
    segments
}

fn distance_to_polyline(p: Point, pts: &[Point]) -> f64 {
    pts.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let d = b.sub(a);
            let len2 = d.dot(d);
            let t = if len2 == 0.0 { 0.0 } else { (p.sub(a).dot(d) / len2).clamp(0.0, 1.0) };
            a.add(d.scale(t)).distance(p)
        })
        .fold(f64::INFINITY, f64::min)
}

fn side_word(heading: f64, from: Point, target: Point) -> &'static str {
    let rel = normalize_180(bearing(from, target) - heading);
    if rel >= 0.0 {
        "right"
    } else {
        "left"
    }
}

/// Turn-by-turn description of `route`. When the last node anchors a store,
/// the closing sentence says on which side it will be.
pub fn describe_route(
    map: &FusedMap,
    g: &WalkGraph,
    route: &Route,
    cfg: &NarrationConfig,
) -> Result<Utterance, NarrateError> {
    let last = route.nodes.last().copied().ok_or(NarrateError::EmptyRoute)?;
    let dest = g.store_anchors.iter().find(|&(_, &n)| n == last).and_then(|(&id, _)| map.store(id));
    describe_route_to(map, g, route, dest, None, cfg)
}

/// [`describe_route`] with an explicit destination and starting heading.
/// Without a heading the listener is assumed to face along the first
/// segment.
pub fn describe_route_to(
    map: &FusedMap,
    g: &WalkGraph,
    route: &Route,
    dest: Option<&Store>,
    start_heading: Option<f64>,
    cfg: &NarrationConfig,
) -> Result<Utterance, NarrateError> {
    cfg.validate()?;
    if route.nodes.len() < 2 {
        return Err(NarrateError::EmptyRoute);
    }
    if route.nodes.iter().any(|&n| n >= g.nodes.len()) || route.edges.iter().any(|&e| e >= g.edges.len()) {
        return Err(NarrateError::InvalidRoute("node or edge index out of range".into()));
    }
    let segments = route_segments(g, route, cfg.simplify_tolerance);
    let mut u = Utterance::new(UtteranceKind::Destination);
    let mut mentioned: Vec<u32> = dest.map(|d| vec![d.id]).into_iter().flatten().collect();
    let mut quoted = vec![false; map.tags.len()];
    let mut heading = start_heading.unwrap_or(segments[0].heading);

    for seg in &segments {
        let turn = normalize_180(seg.heading - heading);
        let term = quantize_direction(turn);
        let (dist, dfact) = format_distance(cfg.feet(seg.length), cfg);
        let street = (seg.terrain == Terrain::Crossing).then(|| street_at(map, seg)).flatten();
        let action = match (seg.terrain, &street) {
            (Terrain::Crossing, Some(name)) => format!("cross {name}"),
            (Terrain::Crossing, None) => "cross the street".to_string(),
            (Terrain::Parking, _) => "walk through the parking lot".to_string(),
            (Terrain::Walkway, _) => "walk".to_string(),
        };
        let (sentence, dir) = match cfg.frame {
            Frame::Egocentric if term == DirectionTerm::StraightAhead => {
                (format!("{} straight ahead for {dist}.", capitalize(&action)), term.text().to_string())
            }
            Frame::Egocentric => (format!("Turn {} and {action} for {dist}.", term.turn_text()), term.turn_text().to_string()),
            Frame::Allocentric => {
                let c = compass_word(seg.heading);
                (format!("Head {c} and {action} for {dist}."), format!("to the {c}"))
            }
        };
        u.push(
            sentence,
            Fact {
                subject: street.clone(),
                distance: Some(dfact),
                direction: Some(dir),
                relative_bearing: Some(turn),
                heading: Some(compass_word(seg.heading).into()),
                ..Default::default()
            },
        );
        heading = seg.heading;

        let passing = map
            .directory
            .iter()
            .filter(|s| !mentioned.contains(&s.id))
            .map(|s| (distance_to_polyline(s.centroid, &seg.points), s))
            .filter(|(d, _)| *d <= cfg.pass_radius)
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.id.cmp(&b.1.id)));
        if let Some((_, s)) = passing {
            mentioned.push(s.id);
            let (sentence, dir) = match cfg.frame {
                Frame::Egocentric => {
                    let side = side_word(seg.heading, seg.start, s.centroid);
                    (format!("You will pass {} on your {side}.", s.name), format!("on your {side}"))
                }
                Frame::Allocentric => {
                    let c = compass_word(bearing(nearest_on(&seg.points, s.centroid), s.centroid));
                    (format!("You will pass {} to the {c}.", s.name), format!("to the {c}"))
                }
            };
            u.push(
                sentence,
                Fact {
                    subject: Some(s.name.clone()),
                    landmark: Some(LandmarkRef::Store { id: s.id }),
                    direction: Some(dir),
                    ..Default::default()
                },
            );
        }

        for (i, tag) in map.tags.iter().enumerate() {
            if !quoted[i] && distance_to_polyline(tag.position, &seg.points) <= cfg.tag_radius {
                quoted[i] = true;
                u.push(
                    format!("Note: \u{201c}{}\u{201d}.", tag.text),
                    Fact { note: Some(tag.text.clone()), ..Default::default() },
                );
            }
        }
    }

    if let Some(d) = dest {
        let end = segments.last().expect("nonempty").end;
        let (sentence, dir) = match cfg.frame {
            Frame::Egocentric => {
                let rel = normalize_180(bearing(end, d.centroid) - heading);
                if quantize_direction(rel) == DirectionTerm::StraightAhead {
                    (format!("{} will be straight ahead.", d.name), "straight ahead".to_string())
                } else {
                    let side = side_word(heading, end, d.centroid);
                    (format!("{} will be on your {side}.", d.name), format!("on your {side}"))
                }
            }
            Frame::Allocentric => {
                let c = compass_word(bearing(end, d.centroid));
                (format!("{} will be to the {c}.", d.name), format!("to the {c}"))
            }
        };
        u.push(
            sentence,
            Fact {
                subject: Some(d.name.clone()),
                landmark: Some(LandmarkRef::Store { id: d.id }),
                direction: Some(dir),
                ..Default::default()
            },
        );
    }
    Ok(u)
}

fn nearest_on(pts: &[Point], p: Point) -> Point {
    pts.windows(2)
        .map(|w| {
            let d = w[1].sub(w[0]);
            let len2 = d.dot(d);
            let t = if len2 == 0.0 { 0.0 } else { (p.sub(w[0]).dot(d) / len2).clamp(0.0, 1.0) };
            w[0].add(d.scale(t))
        })
        .min_by(|a, b| a.distance(p).total_cmp(&b.distance(p)))
        .unwrap_or(pts[0])
}

fn street_at(map: &FusedMap, seg: &Segment) -> Option<String> {
    let mid = seg.start.add(seg.end).scale(0.5);
    map.annotations_of(AnnotationKind::Street)
        .filter(|a| a.geometry.as_polygon().is_some_and(|p| seg.points.iter().chain([&mid]).any(|&q| p.contains(q))))
        .find_map(|a| a.name.clone())
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

/// Up to two nearest streets, then user tags within `tag_radius`.
pub fn extended_info(map: &FusedMap, pose: Pose, cfg: &NarrationConfig) -> Result<Utterance, NarrateError> {
    cfg.validate()?;
    let mut u = Utterance::new(UtteranceKind::Extended);
    let mut streets: Vec<_> = map
        .annotations_of(AnnotationKind::Street)
        .filter_map(|a| a.geometry.as_polygon().map(|p| (p.nearest_point(pose.position), a)))
        .collect();
    streets.sort_by(|a, b| a.0.distance(pose.position).total_cmp(&b.0.distance(pose.position)));
    for (near, a) in streets.into_iter().take(2) {
        let name = a.name.clone().unwrap_or_else(|| "An unnamed street".into());
        let d = near.distance(pose.position);
        if d == 0.0 {
            u.push(format!("You are on {name}."), Fact { subject: Some(name), ..Default::default() });
            continue;
        }
        let abs = bearing(pose.position, near);
        let rel = normalize_180(abs - pose.heading);
        let (dist, dfact) = format_distance(cfg.feet(d), cfg);
        let dir = direction_words(rel, abs, cfg);
        u.push(
            format!("{name} is {dist} {dir}."),
            Fact {
                subject: Some(name),
                distance: Some(dfact),
                direction: Some(dir),
                relative_bearing: Some(rel),
                ..Default::default()
            },
        );
    }
    let mut tags: Vec<_> = map
        .tags
        .iter()
        .map(|t| (t.position.distance(pose.position), t))
        .filter(|(d, _)| *d <= cfg.tag_radius)
        .collect();
    tags.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (d, t) in tags {
        let (dist, dfact) = format_distance(cfg.feet(d), cfg);
        u.push(
            format!("Note {dist} away: \u{201c}{}\u{201d}.", t.text),
            Fact { distance: Some(dfact), note: Some(t.text.clone()), ..Default::default() },
        );
    }
    if u.sentences.is_empty() {
        u.push("No additional information nearby.".into(), Fact::default());
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{Annotation, BaseLayer, GeoAnchor, SafetyClass, UserTag};
    use crate::raster::Polygon;
    use crate::route::{shortest_walkable_path, CostWeights, Edge, Node};
    use chrono::TimeZone;

    fn feet_cfg() -> NarrationConfig {
        NarrationConfig::default()
    }

    fn steps_cfg() -> NarrationConfig {
        NarrationConfig { distance_unit: DistanceUnit::Steps, ..Default::default() }
    }

    fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Polygon {
        Polygon::rectangle(Point::new(x0, y0), Point::new(x1, y1)).unwrap()
    }

    fn store(id: u32, name: &str, c: Point) -> Store {
        let footprint = rect(c.x - 5.0, c.y - 5.0, c.x + 5.0, c.y + 5.0);
        Store { id, name: name.into(), footprint, centroid: c, entrance: None }
    }

    fn map() -> FusedMap {
        FusedMap::empty(BaseLayer {
            image: "m.png".into(),
            width: 400,
            height: 400,
            anchor: GeoAnchor::north_up(0.0, 0.0, 1e-5).unwrap(),
        })
    }

    fn empty_graph() -> WalkGraph {
        WalkGraph::from_parts(vec![], vec![]).unwrap()
    }

    /// Straight path of nodes along `pts`, all walkway.
    fn path_graph(pts: &[Point]) -> (WalkGraph, Route) {
        let nodes: Vec<Node> =
            pts.iter().enumerate().map(|(i, &p)| Node { id: i, position: p, terrain: Terrain::Walkway }).collect();
        let edges: Vec<Edge> = (1..pts.len())
            .map(|i| Edge { a: i - 1, b: i, length: pts[i - 1].distance(pts[i]), terrain: Terrain::Walkway, unsafe_street: false })
            .collect();
        let g = WalkGraph::from_parts(nodes, edges).unwrap();
        let r = shortest_walkable_path(&g, 0, pts.len() - 1, &CostWeights::default()).unwrap();
        (g, r)
    }

    fn tag(p: Point, text: &str) -> UserTag {
        UserTag {
            position: p,
            text: text.into(),
            author: "a".into(),
            created_at: chrono::Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap(),
        }
    }

    #[test]
    fn calibration() {
        assert_eq!(calibrate_steps(50.0, 20), Ok(2.5));
        assert_eq!(calibrate_steps(20.0, 20), Ok(1.0));
        assert_eq!(calibrate_steps(20.0, 0), Err(NarrateError::InvalidCalibration));
        assert_eq!(calibrate_steps(0.0, 3), Err(NarrateError::InvalidCalibration));
    }

    #[test]
    fn distance_wording() {
        assert_eq!(format_distance(25.0, &steps_cfg()).0, "10 steps");
        assert_eq!(format_distance(25.4, &feet_cfg()).0, "25 feet");
        assert_eq!(format_distance(0.3, &steps_cfg()).0, "less than one step");
        assert_eq!(format_distance(2.0, &steps_cfg()).0, "1 step");
        assert_eq!(format_distance(1.2, &feet_cfg()).0, "1 foot");
    }

    /// Sector table written out independently of the implementation.
    fn table(b: i32) -> &'static str {
        let b = b as f64;
        if (-22.5..22.5).contains(&b) {
            "straight ahead"
        } else if (22.5..67.5).contains(&b) {
            "diagonally right"
        } else if (67.5..112.5).contains(&b) {
            "to your right"
        } else if (112.5..157.5).contains(&b) {
            "behind you to the right"
        } else if b >= 157.5 || b < -157.5 {
            "behind you"
        } else if (-157.5..-112.5).contains(&b) {
            "behind you to the left"
        } else if (-112.5..-67.5).contains(&b) {
            "to your left"
        } else {
            "diagonally left"
        }
    }

    #[test]
    fn direction_sweep_and_symmetry() {
        for b in -180..=180 {
            let t = quantize_direction(b as f64);
            assert_eq!(t.text(), table(b), "{b}");
            if !matches!(t, DirectionTerm::StraightAhead | DirectionTerm::BehindYou) {
                assert_eq!(quantize_direction(-b as f64), t.mirror(), "{b}");
            }
        }
        assert_eq!(quantize_direction(0.0).text(), "straight ahead");
        assert_eq!(quantize_direction(45.0).text(), "diagonally right");
        assert_eq!(quantize_direction(-100.0).text(), "to your left");
    }

    #[test]
    fn compass_words() {
        assert_eq!(compass_word(0.0), "North");
        assert_eq!(compass_word(350.0), "North");
        assert_eq!(compass_word(90.0), "East");
        assert_eq!(compass_word(225.0), "Southwest");
    }

    #[test]
    fn position_examples() {
        let u = describe_position(&map(), &empty_graph(), Pose::new(Point::new(5.0, 5.0), 0.0), &feet_cfg()).unwrap();
        assert_eq!(u.sentences, vec!["Facing North."]);

        let mut m = map();
        m.directory.push(store(1, "Cafe", Point::new(100.0, 90.0)));
        m.directory.push(store(2, "Books", Point::new(130.0, 100.0)));
        m.directory.push(store(3, "Shoes", Point::new(60.0, 110.0)));
        let pose = Pose::new(Point::new(100.0, 100.0), 0.0);
        let u = describe_position(&m, &empty_graph(), pose, &feet_cfg()).unwrap();
        assert_eq!(
            u.sentences,
            vec![
                "Facing North.",
                "Closest is Cafe, 10 feet straight ahead.",
                "On your right, Books, 30 feet to your right.",
                "On your left, Shoes, 41 feet to your left.",
            ]
        );
        assert_eq!(u.facts.len(), u.sentences.len());

        let allo = NarrationConfig { frame: Frame::Allocentric, ..feet_cfg() };
        let v = describe_position(&m, &empty_graph(), pose, &allo).unwrap();
        assert!(v.sentences.iter().all(|s| !s.contains("your right") && !s.contains("your left")));
        assert_eq!(v.sentences[2], "Also nearby, Books, 30 feet to the East.");
        assert_same_except_direction(&u, &v);
    }

    fn assert_same_except_direction(a: &Utterance, b: &Utterance) {
        assert_eq!(a.facts.len(), b.facts.len());
        for (x, y) in a.facts.iter().zip(&b.facts) {
            let strip = |f: &Fact| Fact { direction: None, ..f.clone() };
            assert_eq!(strip(x), strip(y));
        }
    }

    #[test]
    fn parking_sentence_from_graph() {
        let nodes = vec![
            Node { id: 0, position: Point::new(0.0, 0.0), terrain: Terrain::Parking },
            Node { id: 1, position: Point::new(4.0, 0.0), terrain: Terrain::Parking },
        ];
        let edges = vec![Edge { a: 0, b: 1, length: 4.0, terrain: Terrain::Parking, unsafe_street: false }];
        let g = WalkGraph::from_parts(nodes, edges).unwrap();
        let u = describe_position(&map(), &g, Pose::new(Point::new(1.0, 1.0), 90.0), &feet_cfg()).unwrap();
        assert_eq!(u.sentences, vec!["Facing East.", "You are in a parking lot."]);
    }

    #[test]
    fn poi_sorted() {
        let mut m = map();
        for (i, x) in [50.0, 10.0, 30.0, 70.0].iter().enumerate() {
            m.directory.push(store(i as u32 + 1, &format!("S{i}"), Point::new(100.0 + x, 100.0)));
        }
        let pose = Pose::new(Point::new(100.0, 100.0), 90.0);
        let u = describe_poi(&m, pose, 3, &feet_cfg()).unwrap();
        assert_eq!(u.sentences, vec!["S1, 10 feet straight ahead.", "S2, 30 feet straight ahead.", "S0, 50 feet straight ahead."]);
        let counts: Vec<u64> = u.facts.iter().map(|f| f.distance.unwrap().count).collect();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]));
        assert!(describe_poi(&map(), pose, 3, &feet_cfg()).unwrap().sentences.is_empty());
        assert_eq!(describe_poi(&m, pose, 0, &feet_cfg()), Err(NarrateError::InvalidK));
    }

    #[test]
    fn straight_route_past_one_store() {
        let pts: Vec<Point> = (0..=25).map(|i| Point::new(100.0, 200.0 - 4.0 * i as f64)).collect();
        let (g, r) = path_graph(&pts);
        let mut m = map();
        m.directory.push(store(1, "Cafe", Point::new(120.0, 150.0)));
        let u = describe_route(&m, &g, &r, &feet_cfg()).unwrap();
        assert_eq!(u.sentences, vec!["Walk straight ahead for 100 feet.", "You will pass Cafe on your right."]);
    }

    #[test]
    fn left_turn_and_destination_side() {
        let mut pts: Vec<Point> = (0..=10).map(|i| Point::new(200.0, 200.0 - 4.0 * i as f64)).collect();
        pts.extend((1..=10).map(|i| Point::new(200.0 - 4.0 * i as f64, 160.0)));
        let (mut g, r) = path_graph(&pts);
        let mut m = map();
        m.directory.push(store(9, "Shoes", Point::new(160.0, 145.0)));
        g.store_anchors.insert(9, pts.len() - 1);
        let u = describe_route(&m, &g, &r, &feet_cfg()).unwrap();
        assert_eq!(
            u.sentences,
            vec!["Walk straight ahead for 40 feet.", "Turn to your left and walk for 40 feet.", "Shoes will be on your right."]
        );
        let allo = NarrationConfig { frame: Frame::Allocentric, ..feet_cfg() };
        let v = describe_route(&m, &g, &r, &allo).unwrap();
        assert_eq!(v.sentences[1], "Head West and walk for 40 feet.");
        assert!(v.sentences.iter().all(|s| !s.contains("your")));
    }

    #[test]
    fn reversal_reads_as_turn_around() {
        let pts: Vec<Point> = (0..=10).map(|i| Point::new(200.0, 200.0 - 4.0 * i as f64)).collect();
        let (g, r) = path_graph(&pts);
        let u = describe_route_to(&map(), &g, &r, None, Some(180.0), &feet_cfg()).unwrap();
        assert_eq!(u.sentences, vec!["Turn around and walk for 40 feet."]);
        let u = describe_route_to(&map(), &g, &r, None, Some(140.0), &feet_cfg()).unwrap();
        assert_eq!(u.sentences, vec!["Turn sharply left and walk for 40 feet."]);
    }

    #[test]
    fn tag_quoted_once_and_staircase_merged() {
        // zig-zag staircase heading roughly North-East stays one segment
        let pts: Vec<Point> = (0..20)
            .map(|i| Point::new(100.0 + 4.0 * ((i + 1) / 2) as f64, 300.0 - 4.0 * (i / 2) as f64))
            .collect();
        let (g, r) = path_graph(&pts);
        let mut m = map();
        m.tags.push(tag(Point::new(115.0, 280.0), "loose bricks"));
        let u = describe_route(&m, &g, &r, &feet_cfg()).unwrap();
        assert_eq!(u.sentences.iter().filter(|s| s.contains("loose bricks")).count(), 1);
        assert_eq!(u.sentences.len(), 2, "{:?}", u.sentences);
        assert!(describe_route(&m, &g, &Route { nodes: vec![], edges: vec![], terrains: vec![], total_length: 0.0, total_cost: 0.0, contains_parking: false }, &feet_cfg()).is_err());
    }

    #[test]
    fn extended_examples() {
        let pose = Pose::new(Point::new(100.0, 100.0), 0.0);
        let u = extended_info(&map(), pose, &feet_cfg()).unwrap();
        assert_eq!(u.sentences, vec!["No additional information nearby."]);

        let mut m = map();
        m.tags.push(tag(Point::new(100.0, 80.0), "bench"));
        let u = extended_info(&m, pose, &feet_cfg()).unwrap();
        assert_eq!(u.sentences, vec!["Note 20 feet away: \u{201c}bench\u{201d}."]);

        m.annotations.push(Annotation::street(rect(0.0, 150.0, 399.0, 160.0), "Main Street", SafetyClass::Caution));
        let u = extended_info(&m, pose, &feet_cfg()).unwrap();
        assert_eq!(u.sentences[0], "Main Street is 50 feet behind you.");
        assert_eq!(u.sentences.len(), 2);
    }

    #[test]
    fn numbers_come_from_facts() {
        let mut m = map();
        for i in 0..6 {
            m.directory.push(store(i + 1, &format!("Shop {}", i + 1), Point::new(40.0 + 53.0 * i as f64, 70.0 + 11.0 * i as f64)));
        }
        for cfg in [feet_cfg(), steps_cfg(), NarrationConfig { frame: Frame::Allocentric, ..steps_cfg() }] {
            let pose = Pose::new(Point::new(150.0, 150.0), 33.0);
            for u in [describe_position(&m, &empty_graph(), pose, &cfg).unwrap(), describe_poi(&m, pose, 4, &cfg).unwrap()] {
                for (s, f) in u.sentences.iter().zip(&u.facts) {
                    let fact_json = serde_json::to_string(f).unwrap();
                    for num in s.split(|c: char| !c.is_ascii_digit()).filter(|n| !n.is_empty()) {
                        assert!(fact_json.contains(num), "{num} of {s:?} missing from {fact_json}");
                    }
                    if let Some(d) = f.distance {
                        assert!(s.contains(&format_distance(d.feet, &cfg).0));
                    }
                }
            }
        }
    }

    #[test]
    fn simplify_keeps_corners() {
        let pts = [Point::new(0.0, 0.0), Point::new(5.0, 0.1), Point::new(10.0, 0.0), Point::new(10.0, 10.0)];
        assert_eq!(simplify_polyline(&pts, 1.0), vec![pts[0], pts[2], pts[3]]);
    }
}
