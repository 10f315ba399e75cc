pub mod raster;

pub mod evalmetrics;
pub mod extract;
pub mod fixture;
pub mod layers;
pub mod narrate;
pub mod pipeline;
pub mod register;
pub mod route;
pub mod walk;

pub use raster::Point;
