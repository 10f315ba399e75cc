//! Line-oriented walk-through of a fused map as a simulated pedestrian.
//!
//! Commands:
//!   step [feet]                 move forward (default one step length)
//!   turn left|right|around|DEG  rotate; DEG is clockwise degrees
//!   face DEG                    set an absolute heading
//!   where                       position description
//!   poi [k]                     the k nearest landmarks (default 3)
//!   dest STORE                  route from here to a store, by id or name
//!   info                        nearby streets and notes
//!   tag TEXT                    leave a note at the current position
//!   pose                        print the raw pose
//!   help, quit

use std::io::{BufRead, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::layers::{add_user_tag, FusedMap, LayersError, UserTag};
use crate::narrate::{
    compass_word, describe_poi, describe_position, describe_route_to, extended_info, format_distance, NarrateError,
    NarrationConfig,
};
use crate::raster::Point;
use crate::route::{bearing, shortest_walkable_path, CostWeights, Pose, RouteError, Terrain, WalkGraph};

pub const HELP: &str = "\
commands:
  step [feet]                 move forward
  turn left|right|around|DEG  rotate by a quarter, a half or DEG clockwise
  face DEG                    set heading, 0 is North
  where                       describe the current position
  poi [k]                     list the k nearest landmarks
  dest STORE                  directions to a store (id or name)
  info                        nearby streets and notes
  tag TEXT                    leave a note here
  pose                        print position and heading
  help                        this text
  quit                        leave
";

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Route(#[from] RouteError),
    #[error(transparent)]
    Narrate(#[from] NarrateError),
    #[error(transparent)]
    Layers(#[from] LayersError),
}

/// What a command produced.
#[derive(Clone, Debug, PartialEq)]
pub enum Reply {
    Text(String),
    Quit,
}

pub struct WalkSession {
    pub map: FusedMap,
    pub graph: WalkGraph,
    pub weights: CostWeights,
    pub narration: NarrationConfig,
    pub pose: Pose,
    pub author: String,
    /// Fixed timestamp for new tags; the system clock when `None`.
    pub tag_time: Option<DateTime<Utc>>,
}

fn usage<T>(msg: impl Into<String>) -> Result<T, WalkError> {
    Err(WalkError::Usage(msg.into()))
}

fn parse_num(s: &str, what: &str) -> Result<f64, WalkError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => usage(format!("{what} must be a number, got {s:?}")),
    }
}

fn now() -> DateTime<Utc> {
    let d = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    DateTime::from_timestamp(d.as_secs() as i64, d.subsec_nanos()).unwrap_or_default()
}

impl WalkSession {
    pub fn new(map: FusedMap, graph: WalkGraph, weights: CostWeights, narration: NarrationConfig, pose: Pose) -> Self {
        Self { map, graph, weights, narration, pose, author: "walker".into(), tag_time: None }
    }

    fn forward(&self, feet: f64) -> Point {
        let px = feet * self.narration.pixels_per_foot;
        let h = self.pose.heading.to_radians();
        self.pose.position.add(Point::new(h.sin(), -h.cos()).scale(px))
    }

    /// Runs one command line. Blank lines produce empty text.
    pub fn execute(&mut self, line: &str) -> Result<Reply, WalkError> {
        let line = line.trim();
        let (cmd, rest) = line.split_once(char::is_whitespace).map_or((line, ""), |(c, r)| (c, r.trim()));
        let text = match cmd.to_ascii_lowercase().as_str() {
            "" => String::new(),
            "help" | "?" => HELP.to_string(),
            "quit" | "exit" => return Ok(Reply::Quit),
            "step" => self.step(rest)?,
            "turn" => self.turn(rest)?,
            "face" => {
                self.pose = Pose::new(self.pose.position, parse_num(rest, "heading")?);
                format!("Facing {}.\n", compass_word(self.pose.heading))
            }
            "where" => describe_position(&self.map, &self.graph, self.pose, &self.narration)?.text(),
            "poi" => {
                let k = if rest.is_empty() {
                    3
                } else {
                    rest.parse::<usize>().map_err(|_| WalkError::Usage(format!("k must be a count, got {rest:?}")))?
                };
                let u = describe_poi(&self.map, self.pose, k, &self.narration)?;
                if u.sentences.is_empty() {
                    "No landmarks nearby.\n".into()
                } else {
                    u.text()
                }
            }
            "dest" => self.dest(rest)?,
            "info" => extended_info(&self.map, self.pose, &self.narration)?.text(),
            "tag" => {
                if rest.is_empty() {
                    return usage("tag needs some text");
                }
                let tag = UserTag {
                    position: self.pose.position,
                    text: rest.to_string(),
                    author: self.author.clone(),
                    created_at: self.tag_time.unwrap_or_else(now),
                };
                self.map = add_user_tag(&self.map, tag)?;
                "Note saved.\n".into()
            }
            "pose" => format!(
                "x {:.1}, y {:.1}, heading {:.1}\n",
                self.pose.position.x, self.pose.position.y, self.pose.heading
            ),
            other => return usage(format!("unknown command {other:?}; try help")),
        };
        Ok(Reply::Text(text))
    }

    fn step(&mut self, arg: &str) -> Result<String, WalkError> {
        let feet = if arg.is_empty() { self.narration.step_length_feet } else { parse_num(arg, "distance")? };
        if feet <= 0.0 {
            return usage("distance must be positive");
        }
        let to = self.forward(feet);
        if !self.map.base.contains(to) {
            return Ok("That would leave the map.\n".into());
        }
        self.pose = Pose::new(to, self.pose.heading);
        let (dist, _) = format_distance(feet, &self.narration);
        Ok(format!("Walked {dist} {}.\n", compass_word(self.pose.heading)))
    }

    fn turn(&mut self, arg: &str) -> Result<String, WalkError> {
        let delta = match arg.to_ascii_lowercase().as_str() {
            "left" => -90.0,
            "right" => 90.0,
            "around" => 180.0,
            "" => return usage("turn needs left, right, around or degrees"),
            s => parse_num(s, "turn")?,
        };
        self.pose = Pose::new(self.pose.position, self.pose.heading + delta);
        Ok(format!("Facing {}.\n", compass_word(self.pose.heading)))
    }

    fn dest(&self, arg: &str) -> Result<String, WalkError> {
        if arg.is_empty() {
            return usage("dest needs a store id or name");
        }
        let store = arg
            .parse::<u32>()
            .ok()
            .and_then(|id| self.map.store(id))
            .or_else(|| self.map.store_by_name(arg))
            .ok_or_else(|| RouteError::UnknownStore(arg.to_string()))?;
        let target = *self.graph.store_anchors.get(&store.id).ok_or(RouteError::UnreachableStore(store.id))?;
        let here = self.pose.position;
        let start = self
            .graph
            .nearest_node(here, |n| n.terrain != Terrain::Parking)
            .or_else(|| self.graph.nearest_node(here, |_| true))
            .ok_or(RouteError::InvalidGraph("graph has no nodes".into()))?;
        if start == target {
            return Ok(format!("{} is right here.\n", store.name));
        }
        let route = shortest_walkable_path(&self.graph, start, target, &self.weights)?;
        // The listener faces along the pose, not along the first edge.
        let mut out = String::new();
        let first = self.graph.nodes[start].position;
        let gap = self.narration_feet(first.distance(here));
        if gap >= self.narration.step_length_feet {
            let rel = crate::route::normalize_180(bearing(here, first) - self.pose.heading);
            let (dist, _) = format_distance(gap, &self.narration);
            out.push_str(&format!(
                "The walkway starts {dist} {}.\n",
                crate::narrate::quantize_direction(rel).text()
            ));
        }
        let u = describe_route_to(&self.map, &self.graph, &route, Some(store), Some(self.pose.heading), &self.narration)?;
        out.push_str(&u.text());
        Ok(out)
    }

    fn narration_feet(&self, px: f64) -> f64 {
        px / self.narration.pixels_per_foot
    }

    /// Prompt-read-reply loop until `quit` or end of input. Command errors
    /// are reported inline and do not end the session.
    pub fn run(&mut self, input: impl BufRead, mut output: impl Write, prompt: bool) -> std::io::Result<()> {
        if prompt {
            write!(output, "> ")?;
            output.flush()?;
        }
        for line in input.lines() {
            match self.execute(&line?) {
                Ok(Reply::Quit) => break,
                Ok(Reply::Text(t)) => write!(output, "{t}")?,
                Err(e) => writeln!(output, "error: {e}")?,
            }
            if prompt {
                write!(output, "> ")?;
                output.flush()?;
            }
        }
        Ok(())
    }
}
