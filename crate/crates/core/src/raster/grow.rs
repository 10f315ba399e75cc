use std::collections::VecDeque;

use super::{distance_transform, segment_by_color, BinaryMask, ColorSpec, RasterError, RasterImage};

/// 4-connected flood fill over `allowed`, starting from every seed that lies on
/// an allowed pixel. Seeds must be in bounds.
pub fn flood_fill(allowed: &BinaryMask, seeds: &[(u32, u32)]) -> BinaryMask {
    let (w, h) = allowed.dims();
    let mut out = BinaryMask::new(w, h);
    let mut queue = VecDeque::new();
    for &(x, y) in seeds {
        if allowed.get(x, y) && !out.get(x, y) {
            out.set(x, y, true);
            queue.push_back((x as i64, y as i64));
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if allowed.get_signed(nx, ny) && !out.get(nx as u32, ny as u32) {
                out.set(nx as u32, ny as u32, true);
                queue.push_back((nx, ny));
            }
        }
    }
    out
}

/// Seeded growth over a precomputed candidate mask. Pixels closer than
/// `min_halfwidth` to the candidate mask's background are pruned before
/// growing, so growth stops wherever the corridor gets too narrow.
pub fn region_grow_mask(
    candidates: &BinaryMask,
    seeds: &[(u32, u32)],
    min_halfwidth: u32,
) -> Result<BinaryMask, RasterError> {
    let (w, h) = candidates.dims();
    if let Some(&(x, y)) = seeds.iter().find(|&&(x, y)| x >= w || y >= h) {
        return Err(RasterError::SeedOutOfBounds { x: x as i64, y: y as i64, width: w, height: h });
    }
    let threshold = u64::from(min_halfwidth) * u64::from(min_halfwidth);
    let dt = distance_transform(candidates);
    let bits = candidates
        .bits()
        .iter()
        .zip(&dt.values)
        .map(|(&c, &d)| c && d >= threshold)
        .collect();
    let pruned = BinaryMask::from_bits(w, h, bits)?;
    Ok(flood_fill(&pruned, seeds))
}

/// Seeded region growing over pixels matching `grow_spec`, with the
/// distance-transform width check applied to the matching-color mask.
pub fn region_grow(
    img: &RasterImage,
    seeds: &[(u32, u32)],
    grow_spec: &ColorSpec,
    min_halfwidth: u32,
) -> Result<BinaryMask, RasterError> {
    region_grow_mask(&segment_by_color(img, grow_spec), seeds, min_halfwidth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{connected_components, Connectivity};

    const ROAD: [u8; 3] = [255, 255, 255];
    const GROUND: [u8; 3] = [200, 190, 170];

    fn stripe(width: u32, height: u32, x0: u32, stripe_w: u32) -> RasterImage {
        RasterImage::from_fn(width, height, |x, _| {
            if x >= x0 && x < x0 + stripe_w {
                ROAD
            } else {
                GROUND
            }
        })
        .unwrap()
    }

    #[test]
    fn wide_stripe_keeps_its_core() {
        // 7 px stripe at columns 10..=16, center 13.
        let img = stripe(30, 20, 10, 7);
        let spec = ColorSpec::new(ROAD, 0);
        let grown = region_grow(&img, &[(13, 10)], &spec, 3).unwrap();
        // Hand oracle: dt >= 9 needs >= 3 px to the side walls and to the
        // top/bottom border, i.e. columns 12..=14 and rows 2..=17.
        let expected =
            BinaryMask::from_fn(30, 20, |x, y| (12..=14).contains(&x) && (2..=17).contains(&y));
        assert_eq!(grown, expected);
    }

    #[test]
    fn narrow_stripe_is_pruned_away() {
        let img = stripe(30, 20, 10, 3);
        let spec = ColorSpec::new(ROAD, 0);
        let grown = region_grow(&img, &[(11, 10)], &spec, 3).unwrap();
        assert!(grown.is_empty());
    }

    #[test]
    fn zero_halfwidth_is_plain_flood_fill() {
        let img = RasterImage::from_fn(20, 20, |x, y| {
            if (x < 5 && y < 5) || (x > 10 && y > 10) || x == 15 {
                ROAD
            } else {
                GROUND
            }
        })
        .unwrap();
        let spec = ColorSpec::new(ROAD, 0);
        let grown = region_grow(&img, &[(1, 1)], &spec, 0).unwrap();
        let color = segment_by_color(&img, &spec);
        let labels = connected_components(&color, Connectivity::Four);
        assert_eq!(grown, labels.mask_of(labels.label_at(1, 1)));
    }

    #[test]
    fn seed_off_color_contributes_nothing() {
        let img = stripe(30, 20, 10, 7);
        let grown = region_grow(&img, &[(2, 2)], &ColorSpec::new(ROAD, 0), 1).unwrap();
        assert!(grown.is_empty());
    }

    #[test]
    fn seed_out_of_bounds_is_an_error() {
        let img = stripe(30, 20, 10, 7);
        let err = region_grow(&img, &[(30, 0)], &ColorSpec::new(ROAD, 0), 1).unwrap_err();
        assert!(matches!(err, RasterError::SeedOutOfBounds { .. }));
    }

    #[test]
    fn output_is_subset_of_color_mask() {
        let img = RasterImage::from_fn(40, 40, |x, y| {
            if (x * 7 + y * 3) % 11 < 8 {
                ROAD
            } else {
                GROUND
            }
        })
        .unwrap();
        let spec = ColorSpec::new(ROAD, 0);
        let seeds: Vec<_> = (0..40).step_by(5).map(|i| (i, 39 - i)).collect();
        for hw in 0..3 {
            let grown = region_grow(&img, &seeds, &spec, hw).unwrap();
            let color = segment_by_color(&img, &spec);
            assert!(grown.difference(&color).unwrap().is_empty());
            for region in connected_components(&grown, Connectivity::Four).regions {
                let mask = connected_components(&grown, Connectivity::Four).mask_of(region.id);
                assert!(seeds.iter().any(|&(x, y)| mask.get(x, y)));
            }
        }
    }
}
