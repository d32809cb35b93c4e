//! Supersampled rasterization in world coordinates.
//!
//! Pixel `(i, j)` (0-based row, column) has its centre at world point
//! `(j − c + ox, i − c + oy)` with `c = n/2 − 1`. Pixel centres are therefore
//! mapped onto each other by point reflections and quarter turns about the
//! world origin when the offset is zero.

/// Subsamples per pixel side when anti-aliasing.
pub(crate) const SUPERSAMPLE: usize = 4;

#[derive(Clone, Copy, Debug)]
pub(crate) struct Window {
    pub n: usize,
    pub offset: [f64; 2],
    pub samples: usize,
}

impl Window {
    pub fn new(n: usize, offset: [f64; 2], antialias: bool) -> Self {
        let samples = if antialias { SUPERSAMPLE } else { 1 };
        Self { n, offset, samples }
    }

    fn centre(&self) -> f64 {
        (self.n / 2) as f64 - 1.0
    }

    /// World position of subsample `s` along one axis of pixel index `p`.
    fn coord(&self, p: usize, s: usize, axis: usize) -> f64 {
        let sub = (s as f64 + 0.5) / self.samples as f64 - 0.5;
        p as f64 - self.centre() + sub + self.offset[axis]
    }

    /// World-space bounding box of all sample points: `[xmin, xmax, ymin, ymax]`.
    pub fn bounds(&self) -> [f64; 4] {
        let last = self.n - 1;
        [
            self.coord(0, 0, 0),
            self.coord(last, self.samples - 1, 0),
            self.coord(0, 0, 1),
            self.coord(last, self.samples - 1, 1),
        ]
    }

    /// Pixel values equal to the fraction of subsamples where `inside` holds.
    pub fn fill(&self, inside: impl Fn(f64, f64) -> bool) -> Vec<f64> {
        let s = self.samples;
        let total = (s * s) as f64;
        let mut out = Vec::with_capacity(self.n * self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let mut hits = 0usize;
                for a in 0..s {
                    let y = self.coord(i, a, 1);
                    for b in 0..s {
                        if inside(self.coord(j, b, 0), y) {
                            hits += 1;
                        }
                    }
                }
                out.push(hits as f64 / total);
            }
        }
        out
    }

    /// Black strokes of the given width on white; overlapping strokes do
    /// not darken twice.
    pub fn strokes(&self, segments: &[[[f64; 2]; 2]], width: f64) -> Vec<f64> {
        let s = self.samples;
        let mut masks = vec![0u16; self.n * self.n];
        let half = width / 2.0;
        let c = self.centre();
        let to_pixel = |w: f64, axis: usize| w + c - self.offset[axis];
        for &[p, q] in segments {
            let lo_x = to_pixel(p[0].min(q[0]) - half, 0).floor() - 1.0;
            let hi_x = to_pixel(p[0].max(q[0]) + half, 0).ceil() + 1.0;
            let lo_y = to_pixel(p[1].min(q[1]) - half, 1).floor() - 1.0;
            let hi_y = to_pixel(p[1].max(q[1]) + half, 1).ceil() + 1.0;
            let clamp = |v: f64| v.clamp(0.0, (self.n - 1) as f64) as usize;
            if hi_x < 0.0 || hi_y < 0.0 || lo_x > (self.n - 1) as f64 || lo_y > (self.n - 1) as f64
            {
                continue;
            }
            let d = [q[0] - p[0], q[1] - p[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            for i in clamp(lo_y)..=clamp(hi_y) {
                for j in clamp(lo_x)..=clamp(hi_x) {
                    let mut mask = 0u16;
                    for a in 0..s {
                        let y = self.coord(i, a, 1);
                        for b in 0..s {
                            let x = self.coord(j, b, 0);
                            let t = if len2 > 0.0 {
                                (((x - p[0]) * d[0] + (y - p[1]) * d[1]) / len2).clamp(0.0, 1.0)
                            } else {
                                0.0
                            };
                            let ex = x - p[0] - t * d[0];
                            let ey = y - p[1] - t * d[1];
                            if ex * ex + ey * ey <= half * half {
                                mask |= 1 << (a * s + b);
                            }
                        }
                    }
                    masks[i * self.n + j] |= mask;
                }
            }
        }
        let total = (s * s) as f64;
        masks
            .into_iter()
            .map(|m| 1.0 - m.count_ones() as f64 / total)
            .collect()
    }
}
