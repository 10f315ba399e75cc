use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{BinaryMask, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

impl Connectivity {
    pub(crate) fn offsets(self) -> &'static [(i64, i64)] {
        const FOUR: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
        const EIGHT: [(i64, i64); 8] =
            [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
        match self {
            Connectivity::Four => &FOUR,
            Connectivity::Eight => &EIGHT,
        }
    }
}

/// Statistics of one labeled component.
#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub id: u32,
    pub area: usize,
    /// Mean of the pixel centers.
    pub centroid: Point,
    /// Inclusive pixel bounds `(x0, y0, x1, y1)`.
    pub bbox: (u32, u32, u32, u32),
    /// Pixels with at least one 4-neighbour outside the region, in raster order.
    pub boundary: Vec<(u32, u32)>,
}

impl Region {
    pub fn bbox_area(&self) -> usize {
        let (x0, y0, x1, y1) = self.bbox;
        (x1 - x0 + 1) as usize * (y1 - y0 + 1) as usize
    }
}

/// Per-pixel labels (0 = background) plus one record per label `1..=K`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledRegions {
    pub width: u32,
    pub height: u32,
    pub label_map: Vec<u32>,
    pub regions: Vec<Region>,
}

impl LabeledRegions {
    pub fn empty(width: u32, height: u32) -> Self {
        Self { width, height, label_map: vec![0; width as usize * height as usize], regions: vec![] }
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn label_at(&self, x: u32, y: u32) -> u32 {
        self.label_map[y as usize * self.width as usize + x as usize]
    }

    pub fn region(&self, id: u32) -> Option<&Region> {
        id.checked_sub(1).and_then(|i| self.regions.get(i as usize))
    }

    pub fn mask_of(&self, id: u32) -> BinaryMask {
        let bits = self.label_map.iter().map(|&l| l == id).collect();
        BinaryMask::from_bits(self.width, self.height, bits).expect("label map matches dims")
    }

    /// Union of all labeled pixels.
    pub fn foreground(&self) -> BinaryMask {
        let bits = self.label_map.iter().map(|&l| l != 0).collect();
        BinaryMask::from_bits(self.width, self.height, bits).expect("label map matches dims")
    }

    /// Keeps the regions accepted by `keep` and renumbers them `1..=K'` in
    /// their original order.
    pub fn retain(&self, mut keep: impl FnMut(&Region) -> bool) -> LabeledRegions {
        let mut remap = vec![0u32; self.regions.len() + 1];
        let mut regions = Vec::new();
        for r in &self.regions {
            if keep(r) {
                let new_id = regions.len() as u32 + 1;
                remap[r.id as usize] = new_id;
                regions.push(Region { id: new_id, ..r.clone() });
            }
        }
        let label_map = self.label_map.iter().map(|&l| remap[l as usize]).collect();
        LabeledRegions { width: self.width, height: self.height, label_map, regions }
    }
}

/// Labels connected components of `mask`. Ids are assigned in the raster order
/// of each component's first pixel.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> LabeledRegions {
    let (w, h) = mask.dims();
    let mut labels = LabeledRegions::empty(w, h);
    let offsets = connectivity.offsets();
    let mut queue = VecDeque::new();
    let mut members = Vec::new();

    for start in 0..(w as usize * h as usize) {
        if !mask.bits()[start] || labels.label_map[start] != 0 {
            continue;
        }
        let id = labels.regions.len() as u32 + 1;
        labels.label_map[start] = id;
        queue.push_back(start);
        members.clear();
        while let Some(idx) = queue.pop_front() {
            members.push(idx);
            let (x, y) = ((idx % w as usize) as i64, (idx / w as usize) as i64);
            for &(dx, dy) in offsets {
                let (nx, ny) = (x + dx, y + dy);
                if mask.get_signed(nx, ny) {
                    let n = ny as usize * w as usize + nx as usize;
                    if labels.label_map[n] == 0 {
                        labels.label_map[n] = id;
                        queue.push_back(n);
                    }
                }
            }
        }
        members.sort_unstable();
        labels.regions.push(region_stats(id, &members, &labels.label_map, w, h));
    }
    labels
}

fn region_stats(id: u32, members: &[usize], label_map: &[u32], w: u32, h: u32) -> Region {
    let (mut sx, mut sy) = (0f64, 0f64);
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
    let mut boundary = Vec::new();
    let inside = |x: i64, y: i64| {
        x >= 0
            && y >= 0
            && x < w as i64
            && y < h as i64
            && label_map[y as usize * w as usize + x as usize] == id
    };
    for &idx in members {
        let (x, y) = ((idx % w as usize) as u32, (idx / w as usize) as u32);
        sx += x as f64;
        sy += y as f64;
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
        let (xi, yi) = (x as i64, y as i64);
        if !(inside(xi + 1, yi) && inside(xi - 1, yi) && inside(xi, yi + 1) && inside(xi, yi - 1)) {
            boundary.push((x, y));
        }
    }
    let n = members.len() as f64;
    Region {
        id,
        area: members.len(),
        centroid: Point::new(sx / n, sy / n),
        bbox: (x0, y0, x1, y1),
        boundary,
    }
}
