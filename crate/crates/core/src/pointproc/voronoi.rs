//! Planar Poisson–Voronoi edge skeleton by half-plane clipping.
//!
//! Each cell starts as the enlarged sampling box and is clipped by the
//! bisector with every nucleus that could still cut it: once the search ring
//! is further than twice the current cell radius, no further nucleus can.

use crate::geometry::{CellGrid, Cube};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl Segment {
    pub fn length(&self) -> f64 {
        ((self.b[0] - self.a[0]).powi(2) + (self.b[1] - self.a[1]).powi(2)).sqrt()
    }

    pub fn lerp(&self, t: f64) -> [f64; 2] {
        [
            self.a[0] + t * (self.b[0] - self.a[0]),
            self.a[1] + t * (self.b[1] - self.a[1]),
        ]
    }

    pub fn distance_to(&self, x: &[f64]) -> f64 {
        let (dx, dy) = (self.b[0] - self.a[0], self.b[1] - self.a[1]);
        let len2 = dx * dx + dy * dy;
        let t = if len2 > 0.0 {
            (((x[0] - self.a[0]) * dx + (x[1] - self.a[1]) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let p = self.lerp(t);
        ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt()
    }

    /// Liang–Barsky clip to a square.
    pub fn clip(&self, bounds: &Cube) -> Option<Segment> {
        let d = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let (mut t0, mut t1) = (0.0_f64, 1.0_f64);
        for axis in 0..2 {
            let lo = bounds.low(axis);
            let hi = bounds.high(axis);
            for (p, q) in [(-d[axis], self.a[axis] - lo), (d[axis], hi - self.a[axis])] {
                if p == 0.0 {
                    if q < 0.0 {
                        return None;
                    }
                } else {
                    let r = q / p;
                    if p < 0.0 {
                        t0 = t0.max(r);
                    } else {
                        t1 = t1.min(r);
                    }
                }
            }
        }
        if t0 >= t1 {
            return None;
        }
        Some(Segment {
            a: self.lerp(t0),
            b: self.lerp(t1),
        })
    }
}

pub(crate) struct VoronoiSkeleton {
    pub segments: Vec<Segment>,
    /// Cells reaching the sampling box boundary whose polygon meets the clip box.
    pub flagged_cells: usize,
}

struct Cell {
    verts: Vec<[f64; 2]>,
    // label[k] is the neighbor across edge verts[k] -> verts[k+1]; None on the box
    labels: Vec<Option<usize>>,
}

impl Cell {
    fn boxed(b: &Cube) -> Self {
        let (x0, x1, y0, y1) = (b.low(0), b.high(0), b.low(1), b.high(1));
        Self {
            verts: vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
            labels: vec![None; 4],
        }
    }

    fn radius_from(&self, p: &[f64; 2]) -> f64 {
        self.verts
            .iter()
            .map(|v| ((v[0] - p[0]).powi(2) + (v[1] - p[1]).powi(2)).sqrt())
            .fold(0.0, f64::max)
    }

    /// Keep `{x : n.x <= c}`.
    fn clip(&mut self, n: [f64; 2], c: f64, label: usize) {
        let m = self.verts.len();
        if m == 0 {
            return;
        }
        let side = |v: &[f64; 2]| n[0] * v[0] + n[1] * v[1] - c;
        if self.verts.iter().all(|v| side(v) <= 0.0) {
            return;
        }
        let mut verts = Vec::with_capacity(m + 1);
        let mut labels = Vec::with_capacity(m + 1);
        for k in 0..m {
            let a = self.verts[k];
            let b = self.verts[(k + 1) % m];
            let (sa, sb) = (side(&a), side(&b));
            let a_in = sa <= 0.0;
            let b_in = sb <= 0.0;
            if a_in {
                verts.push(a);
                labels.push(self.labels[k]);
            }
            if a_in != b_in {
                let t = sa / (sa - sb);
                let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                verts.push(x);
                labels.push(if a_in { Some(label) } else { self.labels[k] });
            }
        }
        self.verts = verts;
        self.labels = labels;
    }

    fn meets(&self, b: &Cube) -> bool {
        let m = self.verts.len();
        (0..m).any(|k| {
            Segment {
                a: self.verts[k],
                b: self.verts[(k + 1) % m],
            }
            .clip(b)
            .is_some()
        }) || (m > 0 && {
            // box entirely inside the polygon
            let c = [b.center[0], b.center[1]];
            (0..m).all(|k| {
                let (a, bb) = (self.verts[k], self.verts[(k + 1) % m]);
                (bb[0] - a[0]) * (c[1] - a[1]) - (bb[1] - a[1]) * (c[0] - a[0]) >= 0.0
            })
        })
    }
}

/// Voronoi edges of `nuclei` (computed inside `sampling_box`), clipped to `clip_box`.
pub(crate) fn voronoi_skeleton(
    nuclei: &[[f64; 2]],
    sampling_box: &Cube,
    clip_box: &Cube,
    cell_size: f64,
) -> VoronoiSkeleton {
    let flat: Vec<f64> = nuclei.iter().flat_map(|p| [p[0], p[1]]).collect();
    let grid = CellGrid::build(&flat, 2, sampling_box, cell_size);
    let mut segments = Vec::new();
    let mut flagged_cells = 0;

    for (i, p) in nuclei.iter().enumerate() {
        let mut cell = Cell::boxed(sampling_box);
        let mut done = vec![false; nuclei.len()];
        done[i] = true;
        let mut reach = 2.0 * cell.radius_from(p);
        let mut searched = 0.0;
        // grow the search radius until it exceeds twice the cell radius
        loop {
            let next = (searched + cell_size).max(cell_size);
            let mut cands = Vec::new();
            grid.for_each_candidate(p, next.min(reach), |j| {
                if !done[j] {
                    cands.push(j);
                }
            });
            cands.sort_by(|&a, &b| {
                let da = (nuclei[a][0] - p[0]).powi(2) + (nuclei[a][1] - p[1]).powi(2);
                let db = (nuclei[b][0] - p[0]).powi(2) + (nuclei[b][1] - p[1]).powi(2);
                da.total_cmp(&db)
            });
            for j in cands {
                let q = nuclei[j];
                let d2 = (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
                if d2.sqrt() > reach {
                    continue;
                }
                done[j] = true;
                let n = [q[0] - p[0], q[1] - p[1]];
                let c = (q[0] * q[0] + q[1] * q[1] - p[0] * p[0] - p[1] * p[1]) / 2.0;
                cell.clip(n, c, j);
                reach = 2.0 * cell.radius_from(p);
            }
            searched = next;
            if searched >= reach || searched > sampling_box.side * 2.0 {
                break;
            }
        }

        if cell.labels.iter().any(Option::is_none) && cell.meets(clip_box) {
            flagged_cells += 1;
        }
        let m = cell.verts.len();
        for k in 0..m {
            if let Some(j) = cell.labels[k] {
                if j > i {
                    let s = Segment {
                        a: cell.verts[k],
                        b: cell.verts[(k + 1) % m],
                    };
                    if let Some(c) = s.clip(clip_box) {
                        if c.length() > 1e-12 {
                            segments.push(c);
                        }
                    }
                }
            }
        }
    }
    VoronoiSkeleton {
        segments,
        flagged_cells,
    }
}
