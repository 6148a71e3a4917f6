//! Indicator kriging surfaces over an embedded map, their probability
//! contours and point containment.
//!
//! Ordinary kriging with an exponential covariance `σ²·exp(−h/ρ)` and a nugget
//! proportional to `σ²`. With the nugget expressed as a fraction of the sill,
//! the prediction does not depend on `σ²`, so one factorization of the
//! kriging system serves every means of every doculect over the same points
//! ([`KrigingSystem`]).

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::matrix::UsageMatrix;
use crate::{Error, Result};

pub type Point = [f64; 2];

/// Contour levels used for area extraction, outermost last.
pub const LEVELS: [f64; 3] = [0.35, 0.32, 0.29];
pub const CONTAINMENT_LEVEL: f64 = 0.29;
pub const MIN_POINTS: usize = 5;
const MAX_JITTER_STEPS: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrigParams {
    /// Covariance range; `None` uses the median pairwise distance.
    pub range: Option<f64>,
    /// Nugget as a fraction of the sill.
    pub nugget: f64,
    /// Grid nodes per axis.
    pub grid: usize,
    /// Bounding-box padding as a fraction of the extent on each side.
    pub padding: f64,
}

impl Default for KrigParams {
    fn default() -> Self {
        KrigParams {
            range: None,
            nugget: 0.05,
            grid: 200,
            padding: 0.05,
        }
    }
}

/// Regular lattice; node `(i, j)` sits at `(x0 + i·dx, y0 + j·dy)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn covering(points: &[Point], g: usize, padding: f64) -> Result<Self> {
        if g < 2 {
            return Err(Error::InvalidArgument(
                "grid needs at least 2 nodes per axis".into(),
            ));
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in points {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        if !lo[0].is_finite() || !hi[0].is_finite() {
            return Err(Error::InvalidArgument("no finite points for grid".into()));
        }
        let mut bounds = [[0.0; 2]; 2];
        for a in 0..2 {
            let extent = hi[a] - lo[a];
            let pad = if extent > 0.0 { extent * padding } else { 1.0 };
            bounds[a] = [lo[a] - pad, hi[a] + pad];
        }
        let step = |b: [f64; 2]| (b[1] - b[0]) / (g - 1) as f64;
        Ok(Grid {
            x0: bounds[0][0],
            y0: bounds[1][0],
            dx: step(bounds[0]),
            dy: step(bounds[1]),
            nx: g,
            ny: g,
        })
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        [self.x0 + i as f64 * self.dx, self.y0 + j as f64 * self.dy]
    }

    pub fn bbox(&self) -> [Point; 2] {
        [self.node(0, 0), self.node(self.nx - 1, self.ny - 1)]
    }
}

/// Closed ring of vertices; the closing edge from last to first is implicit.
pub type Polygon = Vec<Point>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KrigSurface {
    pub means: String,
    pub grid: Grid,
    /// Row-major by `j` then `i`: `prob[j * nx + i]`.
    pub prob: Vec<f64>,
    pub range: f64,
    pub nugget: f64,
    /// `(level, polygons)` for each of [`LEVELS`].
    pub contours: Vec<(f64, Vec<Polygon>)>,
}

impl KrigSurface {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.prob[j * self.grid.nx + i]
    }

    pub fn area(&self, level: f64) -> Option<&[Polygon]> {
        self.contours
            .iter()
            .find(|(l, _)| (l - level).abs() < 1e-12)
            .map(|(_, p)| p.as_slice())
    }
}

fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub fn median_pairwise_distance(points: &[Point]) -> f64 {
    let mut d: Vec<f64> = Vec::with_capacity(points.len() * points.len().saturating_sub(1) / 2);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            d.push(dist(&points[i], &points[j]));
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    let m = *m;
    if d.len() % 2 == 1 {
        m
    } else {
        let lower = d[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lower + m) / 2.0
    }
}

/// Factorized ordinary-kriging system over a fixed point set.
pub struct KrigingSystem {
    points: Vec<Point>,
    range: f64,
    nugget: f64,
    grid: Grid,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl KrigingSystem {
    pub fn new(points: &[Point], params: &KrigParams) -> Result<Self> {
        if points.len() < MIN_POINTS {
            return Err(Error::InvalidArgument(format!(
                "kriging needs at least {MIN_POINTS} points, got {}",
                points.len()
            )));
        }
        if !(0.0..1.0).contains(&params.nugget) {
            return Err(Error::InvalidArgument(
                "nugget fraction must be in [0,1)".into(),
            ));
        }
        let grid = Grid::covering(points, params.grid, params.padding)?;
        let range = match params.range {
            Some(r) if r > 0.0 && r.is_finite() => r,
            Some(r) => return Err(Error::InvalidArgument(format!("invalid kriging range {r}"))),
            None => {
                let m = median_pairwise_distance(points);
                if m > 0.0 {
                    m
                } else {
                    1.0
                }
            }
        };
        let n = points.len();
        let mut jitter = 0.0;
        for step in 0..=MAX_JITTER_STEPS {
            let mut a = DMatrix::zeros(n + 1, n + 1);
            for i in 0..n {
                a[(i, i)] = 1.0 + params.nugget + jitter;
                for j in i + 1..n {
                    let c = (-dist(&points[i], &points[j]) / range).exp();
                    a[(i, j)] = c;
                    a[(j, i)] = c;
                }
                a[(i, n)] = 1.0;
                a[(n, i)] = 1.0;
            }
            let lu = a.clone().lu();
            if Self::well_posed(&lu, &a) {
                return Ok(KrigingSystem {
                    points: points.to_vec(),
                    range,
                    nugget: params.nugget,
                    grid,
                    lu,
                });
            }
            jitter = 1e-10 * 100f64.powi(step as i32);
        }
        Err(Error::Numerical("degenerate configuration".into()))
    }

    fn well_posed(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, a: &DMatrix<f64>) -> bool {
        let n = a.nrows();
        let probe = DVector::from_fn(n, |i, _| ((i % 7) as f64 - 3.0) * 0.25 + 1.0);
        match lu.solve(&probe) {
            Some(x) if x.iter().all(|v| v.is_finite()) => {
                let resid = (a * &x - &probe).amax();
                resid <= 1e-8 * probe.amax().max(1.0) * (1.0 + x.amax())
            }
            _ => false,
        }
    }

    pub fn range(&self) -> f64 {
        self.range
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Dual weights `(w, μ)` for one indicator vector.
    fn weights(&self, z: &[f64]) -> Result<(DVector<f64>, f64)> {
        let n = self.points.len();
        let mut rhs = DVector::zeros(n + 1);
        for (i, v) in z.iter().enumerate() {
            rhs[i] = *v;
        }
        let sol = self
            .lu
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("degenerate configuration".into()))?;
        let mu = sol[n];
        Ok((sol.rows(0, n).into_owned(), mu))
    }

    /// Unclamped prediction of several weight sets at one location.
    fn predict_into(&self, x: &Point, weights: &[(DVector<f64>, f64)], out: &mut [f64]) {
        for (o, (_, mu)) in out.iter_mut().zip(weights) {
            *o = *mu;
        }
        for (k, p) in self.points.iter().enumerate() {
            let h = dist(x, p);
            // Measurement-error nugget: it never enters the cross-covariance.
            let c = (-h / self.range).exp();
            for (o, (w, _)) in out.iter_mut().zip(weights) {
                *o += c * w[k];
            }
        }
    }

    /// Clamped probability of `target` at an arbitrary location.
    pub fn predict(&self, labels: &[String], target: &str, x: Point) -> Result<f64> {
        let z = indicator(labels, target, self.points.len())?;
        let w = [self.weights(&z)?];
        let mut out = [0.0];
        self.predict_into(&x, &w, &mut out);
        Ok(out[0].clamp(0.0, 1.0))
    }

    /// Surfaces for each target means of one doculect.
    pub fn fit_many(&self, labels: &[String], targets: &[String]) -> Result<Vec<KrigSurface>> {
        let mut weights = Vec::with_capacity(targets.len());
        for t in targets {
            let z = indicator(labels, t, self.points.len())?;
            weights.push(self.weights(&z)?);
        }
        let g = self.grid;
        let mut fields = vec![vec![0.0; g.nx * g.ny]; targets.len()];
        let mut buf = vec![0.0; targets.len()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                self.predict_into(&g.node(i, j), &weights, &mut buf);
                for (f, v) in fields.iter_mut().zip(&buf) {
                    f[j * g.nx + i] = v.clamp(0.0, 1.0);
                }
            }
        }
        Ok(targets
            .iter()
            .zip(fields)
            .map(|(t, prob)| {
                let contours = LEVELS
                    .iter()
                    .map(|&l| (l, contour_field(&g, &prob, l)))
                    .collect();
                KrigSurface {
                    means: t.clone(),
                    grid: g,
                    prob,
                    range: self.range,
                    nugget: self.nugget,
                    contours,
                }
            })
            .collect())
    }
}

fn indicator(labels: &[String], target: &str, n: usize) -> Result<Vec<f64>> {
    if labels.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} labels for {n} points",
            labels.len()
        )));
    }
    let z: Vec<f64> = labels
        .iter()
        .map(|l| if l == target { 1.0 } else { 0.0 })
        .collect();
    if !z.iter().any(|&v| v > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "means {target:?} labels no point"
        )));
    }
    Ok(z)
}

/// Single surface fit: builds the kriging system and predicts on the grid.
pub fn fit_surface(
    points: &[Point],
    labels: &[String],
    target: &str,
    params: &KrigParams,
) -> Result<KrigSurface> {
    let sys = KrigingSystem::new(points, params)?;
    let mut v = sys.fit_many(labels, &[target.to_string()])?;
    Ok(v.pop().expect("one target"))
}

/// Isolines of `surface` at `level`, as closed polygons.
pub fn contour(surface: &KrigSurface, level: f64) -> Result<Vec<Polygon>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "contour level {level} outside (0,1)"
        )));
    }
    Ok(contour_field(&surface.grid, &surface.prob, level))
}

/// Marching squares over the grid surrounded by a virtual ring of zero-valued
/// nodes that share the coordinates of the boundary nodes. Every isoline is
/// therefore closed, and regions touching the map edge are closed along it.
pub fn contour_field(grid: &Grid, values: &[f64], level: f64) -> Vec<Polygon> {
    let (nx, ny) = (grid.nx as i64, grid.ny as i64);
    let value = |i: i64, j: i64| -> f64 {
        if i < 0 || j < 0 || i >= nx || j >= ny {
            0.0
        } else {
            values[(j * nx + i) as usize]
        }
    };
    let pos = |i: i64, j: i64| grid.node(i.clamp(0, nx - 1) as usize, j.clamp(0, ny - 1) as usize);
    let inside = |i: i64, j: i64| value(i, j) >= level;

    // Edge ids: horizontal edge from (i,j) to (i+1,j) and vertical edge from
    // (i,j) to (i,j+1), in extended coordinates shifted by one.
    let w = nx + 2;
    let h_edge = |i: i64, j: i64| 2 * ((j + 1) * w + (i + 1));
    let v_edge = |i: i64, j: i64| 2 * ((j + 1) * w + (i + 1)) + 1;
    let crossing = |a: (i64, i64), b: (i64, i64)| -> Point {
        let (va, vb) = (value(a.0, a.1), value(b.0, b.1));
        let (pa, pb) = (pos(a.0, a.1), pos(b.0, b.1));
        let t = if (vb - va).abs() > 0.0 {
            ((level - va) / (vb - va)).clamp(0.0, 1.0)
        } else {
            0.5
        };
        [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
    };

    let mut points: HashMap<i64, Point> = HashMap::new();
    let mut links: HashMap<i64, Vec<i64>> = HashMap::new();
    let mut add = |a: i64, b: i64| {
        links.entry(a).or_default().push(b);
        links.entry(b).or_default().push(a);
    };
    for j in -1..ny {
        for i in -1..nx {
            // Corners counter-clockwise from bottom-left.
            let c = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let mask = c
                .iter()
                .enumerate()
                .fold(0u8, |m, (k, &(a, b))| m | (u8::from(inside(a, b)) << k));
            if mask == 0 || mask == 15 {
                continue;
            }
            // Edges: 0 bottom, 1 right, 2 top, 3 left.
            let edges = [
                h_edge(i, j),
                v_edge(i + 1, j),
                h_edge(i, j + 1),
                v_edge(i, j),
            ];
            let ends = [(c[0], c[1]), (c[1], c[2]), (c[3], c[2]), (c[0], c[3])];
            let mut seg = |e1: usize, e2: usize| {
                for e in [e1, e2] {
                    points
                        .entry(edges[e])
                        .or_insert_with(|| crossing(ends[e].0, ends[e].1));
                }
                add(edges[e1], edges[e2]);
            };
            match mask {
                1 | 14 => seg(3, 0),
                2 | 13 => seg(0, 1),
                3 | 12 => seg(3, 1),
                4 | 11 => seg(1, 2),
                6 | 9 => seg(0, 2),
                7 | 8 => seg(2, 3),
                5 | 10 => {
                    let centre = c.iter().map(|&(a, b)| value(a, b)).sum::<f64>() / 4.0;
                    // mask 5: corners 0 and 2 inside.
                    let joined = centre >= level;
                    match (mask, joined) {
                        (5, true) | (10, false) => {
                            seg(0, 1);
                            seg(2, 3);
                        }
                        _ => {
                            seg(3, 0);
                            seg(1, 2);
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    // Each crossing belongs to exactly two segments; walk the cycles.
    let mut keys: Vec<i64> = links.keys().copied().collect();
    keys.sort_unstable();
    let mut used: HashMap<i64, bool> = HashMap::new();
    let mut polys = Vec::new();
    for start in keys {
        if used.get(&start).copied().unwrap_or(false) {
            continue;
        }
        let mut ring = Vec::new();
        let mut prev = -1;
        let mut cur = start;
        loop {
            used.insert(cur, true);
            let p = points[&cur];
            if ring.last() != Some(&p) {
                ring.push(p);
            }
            let nb = &links[&cur];
            let next = if nb[0] == prev && nb.len() > 1 {
                nb[1]
            } else {
                nb[0]
            };
            prev = cur;
            cur = next;
            if cur == start || used.get(&cur).copied().unwrap_or(false) {
                break;
            }
        }
        while ring.len() > 1 && ring.first() == ring.last() {
            ring.pop();
        }
        if ring.len() >= 3 {
            polys.push(ring);
        }
    }
    polys
}

/// Signed shoelace area.
pub fn signed_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|k| {
            let (a, b) = (poly[k], poly[(k + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Area of the even–odd region enclosed by a polygon set.
pub fn region_area(polys: &[Polygon]) -> f64 {
    polys
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let depth = polys
                .iter()
                .enumerate()
                .filter(|&(m, q)| m != k && strictly_inside(q, &p[0]))
                .count();
            let a = signed_area(p).abs();
            if depth % 2 == 0 {
                a
            } else {
                -a
            }
        })
        .sum()
}

fn on_segment(p: &Point, a: &Point, b: &Point) -> bool {
    let scale = 1e-12 * (1.0 + a[0].abs() + a[1].abs() + b[0].abs() + b[1].abs());
    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    let len = dist(a, b);
    if cross.abs() > scale * (1.0 + len) {
        return false;
    }
    p[0] >= a[0].min(b[0]) - scale
        && p[0] <= a[0].max(b[0]) + scale
        && p[1] >= a[1].min(b[1]) - scale
        && p[1] <= a[1].max(b[1]) + scale
}

fn strictly_inside(poly: &[Point], p: &Point) -> bool {
    let n = poly.len();
    let mut odd = false;
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + n - 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                odd = !odd;
            }
        }
    }
    odd
}

/// Even–odd containment over a polygon set; boundary points count as inside.
pub fn contains(area: &[Polygon], p: Point) -> bool {
    let on_boundary = area.iter().any(|poly| {
        let n = poly.len();
        (0..n).any(|k| on_segment(&p, &poly[k], &poly[(k + 1) % n]))
    });
    on_boundary || area.iter().filter(|poly| strictly_inside(poly, &p)).count() % 2 == 1
}

/// Per usage point, the number of doculects realizing it with NULL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatLayer {
    pub counts: Vec<usize>,
    pub doculects: usize,
}

pub fn null_heat(m: &UsageMatrix) -> HeatLayer {
    HeatLayer {
        counts: (0..m.n_rows())
            .map(|r| m.row_codes(r).iter().filter(|&&c| c == 0).count())
            .collect(),
        doculects: m.n_cols(),
    }
}

/// Grid TSV (`x y prob` per node) followed by contour vertices
/// (`level polygon x y`), both under a `#` metadata header.
pub fn write_surface_tsv(s: &KrigSurface, header: &str) -> String {
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(
        out,
        "# means={} range={:.9} nugget={} grid={}x{}",
        s.means, s.range, s.nugget, s.grid.nx, s.grid.ny
    );
    out.push_str("x\ty\tprob\n");
    for j in 0..s.grid.ny {
        for i in 0..s.grid.nx {
            let p = s.grid.node(i, j);
            let _ = writeln!(out, "{:.6}\t{:.6}\t{:.6}", p[0], p[1], s.at(i, j));
        }
    }
    out.push_str("level\tpolygon\tx\ty\n");
    for (level, polys) in &s.contours {
        for (k, poly) in polys.iter().enumerate() {
            for v in poly {
                let _ = writeln!(out, "{level}\t{k}\t{:.6}\t{:.6}", v[0], v[1]);
            }
        }
    }
    out
}
