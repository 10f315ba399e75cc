use super::BinaryMask;

/// Exact squared Euclidean distance from every pixel to the nearest background
/// pixel. Pixels outside the image count as background.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DistanceField {
    pub width: u32,
    pub height: u32,
    pub values: Vec<u64>,
}

impl DistanceField {
    #[inline]
    pub fn get(&self, x: u32, y: u32) -> u64 {
        self.values[y as usize * self.width as usize + x as usize]
    }
}

/// Two-pass separable exact EDT (Meijster et al. lower-envelope scan).
pub fn distance_transform(mask: &BinaryMask) -> DistanceField {
    let values = squared_edt(mask.width(), mask.height(), |i| !mask.bits()[i], true);
    DistanceField { width: mask.width(), height: mask.height(), values }
}

/// Squared distance from every pixel to the nearest set pixel of `set`,
/// ignoring the image border. `u64::MAX` everywhere when `set` is empty.
pub fn squared_distance_to_set(set: &BinaryMask) -> Vec<u64> {
    squared_edt(set.width(), set.height(), |i| set.bits()[i], false)
}

fn squared_edt(
    width: u32,
    height: u32,
    is_site: impl Fn(usize) -> bool,
    outside_is_site: bool,
) -> Vec<u64> {
    let (w, h) = (width as usize, height as usize);
    // Larger than any in-image distance; squares stay well inside i64.
    let inf = (w + h + 2) as i64;

    // Column pass: vertical distance to the nearest site.
    let mut g = vec![inf; w * h];
    for x in 0..w {
        let mut run = if outside_is_site { 0 } else { inf };
        for y in 0..h {
            run = if is_site(y * w + x) { 0 } else { (run + 1).min(inf) };
            g[y * w + x] = run;
        }
        let mut run = if outside_is_site { 0 } else { inf };
        for y in (0..h).rev() {
            run = if is_site(y * w + x) { 0 } else { (run + 1).min(inf) };
            let cell = &mut g[y * w + x];
            *cell = (*cell).min(run);
        }
    }

    // Row pass over an extended row; the virtual columns at both ends are
    // sites when the border counts as background.
    let pad = usize::from(outside_is_site);
    let n = w + 2 * pad;
    let mut row = vec![0i64; n];
    let mut s = vec![0usize; n];
    let mut t = vec![0usize; n];
    let mut out = vec![0u64; w * h];
    for y in 0..h {
        for e in 0..n {
            row[e] = if e < pad || e >= w + pad { 0 } else { g[y * w + e - pad] };
        }
        let f = |x: usize, i: usize| -> i64 {
            let d = x as i64 - i as i64;
            d * d + row[i] * row[i]
        };
        let sep = |i: usize, u: usize| -> i64 {
            let (i2, u2) = (i as i64, u as i64);
            (u2 * u2 - i2 * i2 + row[u] * row[u] - row[i] * row[i]).div_euclid(2 * (u2 - i2))
        };

        let mut q: isize = 0;
        s[0] = 0;
        t[0] = 0;
        for u in 1..n {
            while q >= 0 && f(t[q as usize], s[q as usize]) > f(t[q as usize], u) {
                q -= 1;
            }
            if q < 0 {
                q = 0;
                s[0] = u;
            } else {
                let wv = 1 + sep(s[q as usize], u);
                if wv >= 0 && (wv as usize) < n {
                    q += 1;
                    s[q as usize] = u;
                    t[q as usize] = wv as usize;
                }
            }
        }
        for u in (0..n).rev() {
            let d = f(u, s[q as usize]);
            if u >= pad && u < w + pad {
                out[y * w + u - pad] = if d >= inf * inf { u64::MAX } else { d as u64 };
            }
            if u == t[q as usize] {
                q -= 1;
            }
        }
    }
    out
}
