//! De Bruijn multigrid duals: rhombus tilings from `m` families of
//! parallel lines.

use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// A tiling vertex together with its integer lift.
#[derive(Clone, Debug, PartialEq)]
pub struct MultigridVertex {
    pub position: [f64; 2],
    pub lift: Vec<i64>,
}

impl MultigridVertex {
    /// Sum of the lift coordinates. For the canonical pentagrid it lies in
    /// `1..=4`.
    pub fn index(&self) -> i64 {
        self.lift.iter().sum()
    }
}

pub(crate) struct Multigrid {
    dirs: Vec<[f64; 2]>,
    offsets: Vec<f64>,
    edge: f64,
}

impl Multigrid {
    /// `m` directions at angles `π·j·step/m`; offsets `γ_j`.
    pub fn new(dirs: Vec<[f64; 2]>, offsets: Vec<f64>, edge: f64) -> Self {
        Self {
            dirs,
            offsets,
            edge,
        }
    }

    /// Five directions at 72° with offsets `gamma/5 + δ_j`, `Σ δ_j = 0`.
    /// The δ_j are random only for `gamma = 0`, where equal offsets make
    /// the grid singular; otherwise they vanish and the tiling has a centre
    /// of five-fold symmetry at the origin.
    pub fn pentagrid(gamma: f64, edge: f64, rng: &mut ChaCha8Rng) -> Self {
        let dirs = star(5, std::f64::consts::TAU / 5.0);
        Self::new(dirs, balanced_offsets(5, gamma, rng), edge)
    }

    /// Four directions at 45°; the offsets are generic.
    pub fn octagrid(edge: f64, rng: &mut ChaCha8Rng) -> Self {
        let dirs = star(4, std::f64::consts::FRAC_PI_4);
        let offsets = (0..4).map(|_| rng.random::<f64>()).collect();
        Self::new(dirs, offsets, edge)
    }

    fn project(&self, lift: &[i64]) -> [f64; 2] {
        let mut p = [0.0, 0.0];
        for (k, e) in lift.iter().zip(&self.dirs) {
            p[0] += *k as f64 * e[0];
            p[1] += *k as f64 * e[1];
        }
        [p[0] * self.edge, p[1] * self.edge]
    }

    /// Grid-space box whose dual covers the world box `[xmin, xmax, ymin, ymax]`.
    fn grid_box(&self, world: [f64; 4]) -> [f64; 4] {
        let m = self.dirs.len() as f64;
        let mut shift = [0.0, 0.0];
        for (g, e) in self.offsets.iter().zip(&self.dirs) {
            shift[0] += (g + 0.5) * e[0];
            shift[1] += (g + 0.5) * e[1];
        }
        let margin = self.edge * (m / 2.0 + 2.0);
        let map = |w: f64, axis: usize| (w / self.edge - shift[axis]) / (m / 2.0);
        let pad = margin / self.edge / (m / 2.0);
        [
            map(world[0], 0) - pad,
            map(world[1], 0) + pad,
            map(world[2], 1) - pad,
            map(world[3], 1) + pad,
        ]
    }

    /// Calls `visit` with the lifts of the four corners of every rhombus
    /// dual to a line intersection inside the grid box.
    fn for_each_rhombus(&self, world: [f64; 4], mut visit: impl FnMut(usize, usize, &[i64])) {
        let gb = self.grid_box(world);
        let corners = [[gb[0], gb[2]], [gb[1], gb[2]], [gb[0], gb[3]], [gb[1], gb[3]]];
        let m = self.dirs.len();
        let range = |j: usize| {
            let vals = corners.map(|c| c[0] * self.dirs[j][0] + c[1] * self.dirs[j][1] + self.offsets[j]);
            let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min).floor() as i64;
            let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil() as i64;
            lo..=hi
        };
        let mut lift = vec![0i64; m];
        for r in 0..m {
            for s in r + 1..m {
                let (er, es) = (self.dirs[r], self.dirs[s]);
                let det = er[0] * es[1] - er[1] * es[0];
                for kr in range(r) {
                    for ks in range(s) {
                        let br = kr as f64 - self.offsets[r];
                        let bs = ks as f64 - self.offsets[s];
                        let z = [(br * es[1] - bs * er[1]) / det, (er[0] * bs - es[0] * br) / det];
                        if z[0] < gb[0] || z[0] > gb[1] || z[1] < gb[2] || z[1] > gb[3] {
                            continue;
                        }
                        for j in 0..m {
                            lift[j] = if j == r {
                                kr
                            } else if j == s {
                                ks
                            } else {
                                (z[0] * self.dirs[j][0] + z[1] * self.dirs[j][1] + self.offsets[j]).ceil()
                                    as i64
                            };
                        }
                        visit(r, s, &lift);
                    }
                }
            }
        }
    }

    /// Deduplicated rhombus edges intersecting the world box.
    pub fn edges(&self, world: [f64; 4]) -> Vec<[[f64; 2]; 2]> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let margin = self.edge;
        let near = |p: [f64; 2]| {
            p[0] >= world[0] - margin
                && p[0] <= world[1] + margin
                && p[1] >= world[2] - margin
                && p[1] <= world[3] + margin
        };
        self.for_each_rhombus(world, |r, s, base| {
            let mut corner = base.to_vec();
            // Edges along e_r start at lifts with K_s ∈ {k_s, k_s+1}, and vice versa.
            for (along, other) in [(r, s), (s, r)] {
                for b in 0..2 {
                    corner.copy_from_slice(base);
                    corner[other] += b;
                    let p = self.project(&corner);
                    let mut q_lift = corner.clone();
                    q_lift[along] += 1;
                    let q = self.project(&q_lift);
                    if !(near(p) || near(q)) {
                        continue;
                    }
                    if seen.insert((corner.clone(), along)) {
                        out.push([p, q]);
                    }
                }
            }
        });
        out
    }

    pub fn vertices(&self, world: [f64; 4]) -> Vec<MultigridVertex> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        self.for_each_rhombus(world, |r, s, base| {
            for (a, b) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                let mut lift = base.to_vec();
                lift[r] += a;
                lift[s] += b;
                let position = self.project(&lift);
                let inside = position[0] >= world[0]
                    && position[0] <= world[1]
                    && position[1] >= world[2]
                    && position[1] <= world[3];
                if inside && seen.insert(lift.clone()) {
                    out.push(MultigridVertex { position, lift });
                }
            }
        });
        out
    }
}

fn star(m: usize, step: f64) -> Vec<[f64; 2]> {
    (0..m)
        .map(|j| {
            let (s, c) = (step * j as f64).sin_cos();
            [c, s]
        })
        .collect()
}

/// `gamma/m + δ_j` with small generic `δ_j` summing to zero, which keeps
/// the grid regular (no three lines through a point).
fn balanced_offsets(m: usize, gamma: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if gamma != 0.0 {
        return vec![gamma / m as f64; m];
    }
    let mut delta: Vec<f64> = (0..m).map(|_| rng.random_range(-0.2..0.2)).collect();
    let mean = delta.iter().sum::<f64>() / m as f64;
    delta.iter_mut().for_each(|d| *d -= mean);
    delta.into_iter().map(|d| gamma / m as f64 + d).collect()
}

/// Vertices of a pentagrid rhombus tiling within `[-half, half]²`.
pub fn pentagrid_vertices(gamma: f64, edge: f64, half: f64, seed: u64) -> Vec<MultigridVertex> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Multigrid::pentagrid(gamma, edge, &mut rng).vertices([-half, half, -half, half])
}
