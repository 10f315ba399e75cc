//! Low-level image primitives shared by the map detectors.
//!
//! Everything here is a pure function of its inputs. Pixel `(x, y)` is
//! addressed with `x` growing to the right and `y` growing downward; when a
//! pixel is treated as a unit square it covers `[x - 0.5, x + 0.5] ×
//! [y - 0.5, y + 0.5]`, so pixel centers sit on integer coordinates.

mod components;
mod distance;
mod grow;
mod hull;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use components::{connected_components, Connectivity, LabeledRegions, Region};
pub use distance::{distance_transform, squared_distance_to_set, DistanceField};
pub use grow::{flood_fill, region_grow, region_grow_mask};
pub use hull::{convex_hull, pixel_hull, shape_regularity, Point, Polygon, ShapeScores};

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("image dimensions must be positive, got {width}x{height}")]
    EmptyImage { width: u32, height: u32 },
    #[error("pixel buffer holds {actual} pixels, expected {expected}")]
    PixelCount { expected: usize, actual: usize },
    #[error("seed ({x}, {y}) lies outside the {width}x{height} image")]
    SeedOutOfBounds { x: i64, y: i64, width: u32, height: u32 },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("mask dimensions {a:?} and {b:?} differ")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("image i/o: {0}")]
    Image(#[from] image::ImageError),
}

pub type Rgb = [u8; 3];

/// 8-bit RGB image stored row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<Rgb>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, pixels: Vec<Rgb>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyImage { width, height });
        }
        let expected = width as usize * height as usize;
        if pixels.len() != expected {
            return Err(RasterError::PixelCount { expected, actual: pixels.len() });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, color: Rgb) -> Result<Self, RasterError> {
        Self::new(width, height, vec![color; width as usize * height as usize])
    }

    pub fn from_fn(
        width: u32,
        height: u32,
        mut f: impl FnMut(u32, u32) -> Rgb,
    ) -> Result<Self, RasterError> {
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> Rgb {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, color: Rgb) {
        let w = self.width as usize;
        self.pixels[y as usize * w + x as usize] = color;
    }

    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && x < self.width as i64 && y < self.height as i64
    }

    /// Loads a PNG (or any format the `image` crate decodes); alpha is dropped.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let rgb = image::open(path)?.to_rgb8();
        Self::from_rgb_image(&rgb)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        self.to_rgb_image()
            .save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn from_rgb_image(img: &image::RgbImage) -> Result<Self, RasterError> {
        let pixels = img.pixels().map(|p| p.0).collect();
        Self::new(img.width(), img.height(), pixels)
    }

    pub fn to_rgb_image(&self) -> image::RgbImage {
        image::RgbImage::from_fn(self.width, self.height, |x, y| image::Rgb(self.get(x, y)))
    }
}

/// A reference color with a per-channel tolerance (Chebyshev distance in RGB).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorSpec {
    pub reference: Rgb,
    pub tolerance: u8,
}

impl ColorSpec {
    pub const fn new(reference: Rgb, tolerance: u8) -> Self {
        Self { reference, tolerance }
    }

    #[inline]
    pub fn matches(&self, px: Rgb) -> bool {
        px.iter()
            .zip(self.reference.iter())
            .all(|(&a, &b)| a.abs_diff(b) <= self.tolerance)
    }
}

/// One boolean per pixel, same layout as the image it came from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, bits: vec![false; width as usize * height as usize] }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, RasterError> {
        let expected = width as usize * height as usize;
        if bits.len() != expected {
            return Err(RasterError::PixelCount { expected, actual: bits.len() });
        }
        Ok(Self { width, height, bits })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    /// Out-of-bounds reads are `false`.
    #[inline]
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && x < self.width as i64
            && y < self.height as i64
            && self.get(x as u32, y as u32)
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Iterates over the coordinates of set pixels in raster order.
    pub fn iter_set(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        let w = self.width as usize;
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| ((i % w) as u32, (i / w) as u32))
    }

    fn check_dims(&self, other: &BinaryMask) -> Result<(), RasterError> {
        if self.dims() != other.dims() {
            return Err(RasterError::DimensionMismatch { a: self.dims(), b: other.dims() });
        }
        Ok(())
    }

    fn zip_with(
        &self,
        other: &BinaryMask,
        f: impl Fn(bool, bool) -> bool,
    ) -> Result<BinaryMask, RasterError> {
        self.check_dims(other)?;
        let bits = self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect();
        Ok(BinaryMask { width: self.width, height: self.height, bits })
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask, RasterError> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask, RasterError> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &BinaryMask) -> Result<BinaryMask, RasterError> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn invert(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// Grayscale PNG, 255 for set pixels.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        let img = image::GrayImage::from_fn(self.width, self.height, |x, y| {
            image::Luma([if self.get(x, y) { 255 } else { 0 }])
        });
        img.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    /// Any nonzero luma counts as set.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let img = image::open(path)?.to_luma8();
        let bits = img.pixels().map(|p| p.0[0] > 0).collect();
        Self::from_bits(img.width(), img.height(), bits)
    }
}

/// Marks every pixel whose Chebyshev RGB distance to `spec.reference` is at
/// most `spec.tolerance`.
pub fn segment_by_color(img: &RasterImage, spec: &ColorSpec) -> BinaryMask {
    BinaryMask {
        width: img.width,
        height: img.height,
        bits: img.pixels.iter().map(|&px| spec.matches(px)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn within_tolerance_matches() {
        let img = RasterImage::new(1, 1, vec![[250, 220, 90]]).unwrap();
        let mask = segment_by_color(&img, &ColorSpec::new([255, 221, 85], 10));
        assert_eq!(mask.bits(), &[true]);
        let mask = segment_by_color(&img, &ColorSpec::new([255, 221, 85], 4));
        assert_eq!(mask.bits(), &[false]);
    }

    #[test]
    fn zero_tolerance_is_exact_equality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let reference = [10, 20, 30];
        let img = RasterImage::from_fn(64, 64, |_, _| {
            if rng.gen_bool(0.2) {
                reference
            } else {
                [rng.gen_range(0..32), rng.gen_range(0..32), rng.gen_range(0..32)]
            }
        })
        .unwrap();
        let spec = ColorSpec::new(reference, 0);
        let mask = segment_by_color(&img, &spec);
        for y in 0..64 {
            for x in 0..64 {
                assert_eq!(mask.get(x, y), img.get(x, y) == reference);
            }
        }
        assert_eq!(mask, segment_by_color(&img, &spec));
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(matches!(RasterImage::new(0, 3, vec![]), Err(RasterError::EmptyImage { .. })));
        assert!(matches!(
            RasterImage::new(2, 2, vec![[0; 3]; 3]),
            Err(RasterError::PixelCount { expected: 4, actual: 3 })
        ));
    }

    #[test]
    fn mask_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let mask = BinaryMask::from_fn(9, 5, |x, y| (x + y) % 3 == 0);
        mask.save_png(&path).unwrap();
        assert_eq!(BinaryMask::load_png(&path).unwrap(), mask);
    }

    #[test]
    fn set_algebra_requires_equal_dims() {
        let a = BinaryMask::new(3, 3);
        let b = BinaryMask::new(3, 4);
        assert!(a.union(&b).is_err());
    }
}
