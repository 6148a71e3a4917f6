//! Gaussian mixture clustering of the embedded map, model selection and
//! ball-tree core points.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::surface::Point;
use crate::{Error, Result};

pub const COV_FLOOR: f64 = 1e-6;
pub const TOL: f64 = 1e-7;
pub const MAX_ITER: usize = 500;
pub const N_INIT: u64 = 4;
pub const CORE_K: usize = 30;
const LLOYD_TOL: f64 = 1e-6;
const LLOYD_MAX_ITER: usize = 300;
const LEAF_SIZE: usize = 16;

fn sq(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

fn distinct_count(points: &[Point], limit: usize) -> usize {
    let mut seen: Vec<Point> = Vec::new();
    for p in points {
        if !seen.contains(p) {
            seen.push(*p);
            if seen.len() >= limit {
                break;
            }
        }
    }
    seen.len()
}

/// k-means++ seeding followed by Lloyd iterations.
pub fn kmeans_init(points: &[Point], k: usize, seed: u64) -> Result<Vec<Point>> {
    let n = points.len();
    if k < 1 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k-means needs 1 <= K <= n, got K={k}, n={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = points.iter().map(|p| sq(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total has a positive weight")
        } else {
            // Remaining points coincide with centres; take unchosen indices in order.
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq(p, &points[next]));
        }
    }
    let mut centers: Vec<Point> = chosen.iter().map(|&i| points[i]).collect();
    let mut labels = vec![0usize; n];
    for _ in 0..LLOYD_MAX_ITER {
        for (l, p) in labels.iter_mut().zip(points) {
            *l = nearest(&centers, p);
        }
        let mut sums = vec![[0.0; 2]; k];
        let mut counts = vec![0usize; k];
        for (l, p) in labels.iter().zip(points) {
            sums[*l][0] += p[0];
            sums[*l][1] += p[1];
            counts[*l] += 1;
        }
        let mut moved: f64 = 0.0;
        for c in 0..k {
            if counts[c] == 0 {
                continue;
            }
            let m = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            moved = moved.max(sq(&m, &centers[c]).sqrt());
            centers[c] = m;
        }
        if moved < LLOYD_TOL {
            break;
        }
    }
    Ok(centers)
}

fn nearest(centers: &[Point], p: &Point) -> usize {
    let mut best = 0;
    for c in 1..centers.len() {
        if sq(p, &centers[c]) < sq(p, &centers[best]) {
            best = c;
        }
    }
    best
}

/// Symmetric 2×2 matrix `[xx, xy, yy]`.
pub type Cov = [f64; 3];

fn det(c: &Cov) -> f64 {
    c[0] * c[2] - c[1] * c[1]
}

fn min_eigen(c: &Cov) -> f64 {
    let mean = (c[0] + c[2]) / 2.0;
    let r = (((c[0] - c[2]) / 2.0).powi(2) + c[1] * c[1]).sqrt();
    mean - r
}

fn log_gauss(p: &Point, mu: &Point, c: &Cov) -> f64 {
    let d = det(c);
    let (dx, dy) = (p[0] - mu[0], p[1] - mu[1]);
    let maha = (c[2] * dx * dx - 2.0 * c[1] * dx * dy + c[0] * dy * dy) / d;
    -0.5 * maha - 0.5 * d.ln() - std::f64::consts::TAU.ln()
}

/// Penalty `ε/2·tr Σ⁻¹` whose per-point inclusion makes the floored
/// covariance the exact M-step.
fn floor_penalty(c: &Cov) -> f64 {
    0.5 * COV_FLOOR * (c[0] + c[2]) / det(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmModel {
    pub weights: Vec<f64>,
    pub means: Vec<Point>,
    pub covariances: Vec<Cov>,
    /// `n × K`, rows sum to 1.
    pub responsibilities: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    /// Plain log-likelihood at the final parameters.
    pub loglik: f64,
    /// Per-iteration EM objective: the log-likelihood with the covariance
    /// floor's penalty. Never decreases.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
}

impl GmmModel {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    /// Free parameters in 2D: `K−1 + 2K + 3K`.
    pub fn n_params(&self) -> usize {
        6 * self.k() - 1
    }

    pub fn aic(&self) -> f64 {
        2.0 * self.n_params() as f64 - 2.0 * self.loglik
    }

    pub fn bic(&self, n: usize) -> f64 {
        self.n_params() as f64 * (n as f64).ln() - 2.0 * self.loglik
    }
}

struct EStep {
    /// Row-major `n × K`.
    resp: Vec<f64>,
    objective: f64,
    loglik: f64,
}

fn e_step(points: &[Point], w: &[f64], mu: &[Point], cov: &[Cov]) -> EStep {
    let k = w.len();
    let pen: Vec<f64> = cov.iter().map(floor_penalty).collect();
    let log_w: Vec<f64> = w.iter().map(|v| v.ln()).collect();
    let mut resp = vec![0.0; points.len() * k];
    let (mut objective, mut loglik) = (0.0, 0.0);
    let mut plain = vec![0.0; k];
    for (p, row) in points.iter().zip(resp.chunks_exact_mut(k)) {
        for c in 0..k {
            plain[c] = log_w[c] + log_gauss(p, &mu[c], &cov[c]);
            row[c] = plain[c] - pen[c];
        }
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            s += *v;
        }
        objective += m + s.ln();
        let pm = plain.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        loglik += pm + plain.iter().map(|v| (v - pm).exp()).sum::<f64>().ln();
        row.iter_mut().for_each(|r| *r /= s);
    }
    EStep {
        resp,
        objective,
        loglik,
    }
}

fn m_step(points: &[Point], resp: &[f64], k: usize) -> Result<(Vec<f64>, Vec<Point>, Vec<Cov>)> {
    let n = points.len() as f64;
    let mut nk = vec![0.0; k];
    let mut mu = vec![[0.0; 2]; k];
    for (p, r) in points.iter().zip(resp.chunks_exact(k)) {
        for c in 0..k {
            nk[c] += r[c];
            mu[c][0] += r[c] * p[0];
            mu[c][1] += r[c] * p[1];
        }
    }
    for c in 0..k {
        if nk[c].is_nan() || nk[c] <= 1e-10 {
            return Err(Error::Numerical(format!("component {c} collapsed")));
        }
        mu[c] = [mu[c][0] / nk[c], mu[c][1] / nk[c]];
    }
    let mut cov = vec![[0.0; 3]; k];
    for (p, r) in points.iter().zip(resp.chunks_exact(k)) {
        for c in 0..k {
            let (dx, dy) = (p[0] - mu[c][0], p[1] - mu[c][1]);
            cov[c][0] += r[c] * dx * dx;
            cov[c][1] += r[c] * dx * dy;
            cov[c][2] += r[c] * dy * dy;
        }
    }
    for c in 0..k {
        let s = cov[c];
        cov[c] = [
            s[0] / nk[c] + COV_FLOOR,
            s[1] / nk[c],
            s[2] / nk[c] + COV_FLOOR,
        ];
    }
    let w = nk.iter().map(|v| v / n).collect();
    Ok((w, mu, cov))
}

fn fit_once(points: &[Point], k: usize, seed: u64) -> Result<GmmModel> {
    let centers = kmeans_init(points, k, seed)?;
    let mut resp = vec![0.0; points.len() * k];
    for (r, p) in resp.chunks_exact_mut(k).zip(points) {
        r[nearest(&centers, p)] = 1.0;
    }
    let (mut w, mut mu, mut cov) = m_step(points, &resp, k)?;
    let mut trace: Vec<f64> = Vec::new();
    let mut last;
    let mut iterations = 0;
    loop {
        last = e_step(points, &w, &mu, &cov);
        if !last.objective.is_finite() {
            return Err(Error::Numerical(
                "numerical failure: non-finite log-likelihood".into(),
            ));
        }
        let done =
            trace.last().is_some_and(|prev| last.objective - prev < TOL) || iterations >= MAX_ITER;
        trace.push(last.objective);
        if done {
            break;
        }
        (w, mu, cov) = m_step(points, &last.resp, k)?;
        iterations += 1;
    }
    Ok(GmmModel {
        weights: w,
        means: mu,
        covariances: cov,
        assignments: Vec::new(),
        responsibilities: last.resp.chunks_exact(k).map(<[f64]>::to_vec).collect(),
        loglik: last.loglik,
        loglik_trace: trace,
        iterations,
    })
}

/// Full-covariance EM from [`N_INIT`] k-means starts; the run with the
/// highest objective wins. Components are ordered by mean (x, then y).
pub fn fit_gmm(points: &[Point], k: usize, seed: u64) -> Result<GmmModel> {
    if k < 1 || points.len() < 3 * k {
        return Err(Error::InvalidArgument(format!(
            "GMM needs n >= 3K, got n={} K={k}",
            points.len()
        )));
    }
    if distinct_count(points, k.max(2)) < k.max(2) {
        return Err(Error::Numerical(
            "degenerate input: too few distinct points".into(),
        ));
    }
    let mut best: Option<GmmModel> = None;
    let mut last_err = None;
    for run in 0..N_INIT {
        let run_seed = seed.wrapping_mul(N_INIT).wrapping_add(run);
        match fit_once(points, k, run_seed) {
            Ok(m) => {
                let better = best
                    .as_ref()
                    .is_none_or(|b| m.loglik_trace.last() > b.loglik_trace.last());
                if better {
                    best = Some(m);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let mut model = best.ok_or_else(|| last_err.expect("at least one run"))?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let (ma, mb) = (model.means[a], model.means[b]);
        ma[0]
            .total_cmp(&mb[0])
            .then(ma[1].total_cmp(&mb[1]))
            .then(a.cmp(&b))
    });
    model.weights = order.iter().map(|&c| model.weights[c]).collect();
    model.means = order.iter().map(|&c| model.means[c]).collect();
    model.covariances = order.iter().map(|&c| model.covariances[c]).collect();
    for r in model.responsibilities.iter_mut() {
        *r = order.iter().map(|&c| r[c]).collect();
    }
    model.assignments = model.responsibilities.iter().map(|r| argmax(r)).collect();
    if model
        .covariances
        .iter()
        .any(|c| min_eigen(c) < COV_FLOOR * (1.0 - 1e-9))
    {
        return Err(Error::Numerical(
            "covariance lost positive definiteness".into(),
        ));
    }
    Ok(model)
}

fn argmax(r: &[f64]) -> usize {
    let mut best = 0;
    for c in 1..r.len() {
        if r[c] > r[best] {
            best = c;
        }
    }
    best
}

/// Mean silhouette over hard assignments; points in singleton clusters
/// score 0.
pub fn silhouette(points: &[Point], labels: &[usize]) -> Result<f64> {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::InvalidArgument(
            "silhouette needs at least two clusters".into(),
        ));
    }
    let total: f64 = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            if sizes[labels[i]] <= 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for (q, &l) in points.iter().zip(labels) {
                sums[l] += sq(p, q).sqrt();
            }
            let a = sums[labels[i]] / (sizes[labels[i]] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != labels[i] && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let d = a.max(b);
            if d > 0.0 {
                (b - a) / d
            } else {
                0.0
            }
        })
        .sum();
    Ok(total / points.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KScore {
    pub k: usize,
    pub loglik: f64,
    pub aic: f64,
    pub bic: f64,
    pub silhouette: f64,
    /// Reason the fit was excluded.
    pub failed: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub scores: Vec<KScore>,
    /// BIC argmin over successful fits.
    pub chosen: usize,
    pub aic_agrees: bool,
    pub silhouette_agrees: bool,
}

pub fn select_k(
    points: &[Point],
    candidates: std::ops::RangeInclusive<usize>,
    seed: u64,
) -> Result<Selection> {
    let n = points.len();
    if *candidates.start() < 2 || *candidates.end() > n / 3 || candidates.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "candidate range {candidates:?} outside [2, {}]",
            n / 3
        )));
    }
    let ks: Vec<usize> = candidates.collect();
    let scores: Vec<KScore> = ks
        .par_iter()
        .map(|&k| {
            match fit_gmm(points, k, seed)
                .and_then(|m| Ok((silhouette(points, &m.assignments)?, m)))
            {
                Ok((s, m)) => KScore {
                    k,
                    loglik: m.loglik,
                    aic: m.aic(),
                    bic: m.bic(n),
                    silhouette: s,
                    failed: None,
                },
                Err(e) => KScore {
                    k,
                    loglik: f64::NAN,
                    aic: f64::NAN,
                    bic: f64::NAN,
                    silhouette: f64::NAN,
                    failed: Some(e.to_string()),
                },
            }
        })
        .collect();
    let ok: Vec<&KScore> = scores.iter().filter(|s| s.failed.is_none()).collect();
    let pick = |f: &dyn Fn(&KScore) -> f64| {
        ok.iter()
            .min_by(|a, b| f(a).total_cmp(&f(b)).then(a.k.cmp(&b.k)))
            .map(|s| s.k)
    };
    let chosen = pick(&|s| s.bic)
        .ok_or_else(|| Error::Numerical("every candidate K failed (degenerate input)".into()))?;
    let by_aic = pick(&|s| s.aic);
    let by_sil = pick(&|s| -s.silhouette);
    Ok(Selection {
        scores,
        chosen,
        aic_agrees: by_aic == Some(chosen),
        silhouette_agrees: by_sil == Some(chosen),
    })
}

/// Static ball tree over 2D points for exact k-nearest-neighbor queries.
pub struct BallTree<'a> {
    points: &'a [Point],
    nodes: Vec<BallNode>,
    /// Point indices, permuted so each node covers a contiguous slice.
    index: Vec<usize>,
}

struct BallNode {
    center: Point,
    radius: f64,
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
}

#[derive(PartialEq)]
struct Cand(f64, usize);

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, o: &Self) -> Ordering {
        self.0.total_cmp(&o.0).then(self.1.cmp(&o.1))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl<'a> BallTree<'a> {
    pub fn new(points: &'a [Point]) -> Self {
        let mut t = BallTree {
            points,
            nodes: Vec::new(),
            index: (0..points.len()).collect(),
        };
        if !points.is_empty() {
            t.build(0, points.len());
        }
        t
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let slice = &self.index[start..end];
        let cnt = slice.len() as f64;
        let center = slice.iter().fold([0.0; 2], |c, &i| {
            [
                c[0] + self.points[i][0] / cnt,
                c[1] + self.points[i][1] / cnt,
            ]
        });
        let radius = slice
            .iter()
            .map(|&i| sq(&center, &self.points[i]).sqrt())
            .fold(0.0, f64::max);
        let id = self.nodes.len();
        self.nodes.push(BallNode {
            center,
            radius,
            start,
            end,
            children: None,
        });
        if end - start > LEAF_SIZE {
            let spread = |a: usize| {
                let vals = self.index[start..end].iter().map(|&i| self.points[i][a]);
                vals.clone().fold(f64::NEG_INFINITY, f64::max) - vals.fold(f64::INFINITY, f64::min)
            };
            let axis = if spread(1) > spread(0) { 1 } else { 0 };
            let pts = self.points;
            self.index[start..end]
                .sort_by(|&a, &b| pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b)));
            let mid = start + (end - start) / 2;
            let l = self.build(start, mid);
            let r = self.build(mid, end);
            self.nodes[id].children = Some((l, r));
        }
        id
    }

    /// The `k` nearest points to `q` as `(index, distance)`, nearest first,
    /// equal distances ordered by index.
    pub fn knn(&self, q: &Point, k: usize) -> Vec<(usize, f64)> {
        let mut heap: BinaryHeap<Cand> = BinaryHeap::new();
        if k > 0 && !self.nodes.is_empty() {
            self.search(0, q, k, &mut heap);
        }
        let mut v: Vec<Cand> = heap.into_vec();
        v.sort();
        v.into_iter().map(|c| (c.1, c.0.sqrt())).collect()
    }

    fn search(&self, node: usize, q: &Point, k: usize, heap: &mut BinaryHeap<Cand>) {
        let n = &self.nodes[node];
        if heap.len() == k {
            let worst = heap.peek().expect("full heap").0.sqrt();
            let lower = sq(q, &n.center).sqrt() - n.radius;
            // Slack keeps rounding in the bound from pruning exact ties.
            if lower > worst + 1e-9 * (1.0 + worst) {
                return;
            }
        }
        match n.children {
            None => {
                for &i in &self.index[n.start..n.end] {
                    let c = Cand(sq(q, &self.points[i]), i);
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("full heap") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Some((l, r)) => {
                let dl = sq(q, &self.nodes[l].center);
                let dr = sq(q, &self.nodes[r].center);
                let (a, b) = if dl <= dr { (l, r) } else { (r, l) };
                self.search(a, q, k, heap);
                self.search(b, q, k, heap);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorePointSet {
    pub cluster: usize,
    pub centroid: Point,
    /// Indices of the `k` nearest observations, nearest first.
    pub members: Vec<usize>,
    pub distances: Vec<f64>,
}

/// Centroid of the cluster's hard-assigned points and its `k` nearest
/// observations over all points.
pub fn core_points(
    model: &GmmModel,
    cluster: usize,
    k: usize,
    points: &[Point],
) -> Result<CorePointSet> {
    if k > points.len() {
        return Err(Error::InvalidArgument(format!(
            "k={k} exceeds {} points",
            points.len()
        )));
    }
    if model.assignments.len() != points.len() {
        return Err(Error::InvalidArgument(
            "model assignments do not match points".into(),
        ));
    }
    let members: Vec<&Point> = points
        .iter()
        .zip(&model.assignments)
        .filter(|(_, &a)| a == cluster)
        .map(|(p, _)| p)
        .collect();
    if members.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "cluster {cluster} has no points"
        )));
    }
    let m = members.len() as f64;
    let centroid = members
        .iter()
        .fold([0.0; 2], |c, p| [c[0] + p[0], c[1] + p[1]]);
    let centroid = [centroid[0] / m, centroid[1] / m];
    let tree = BallTree::new(points);
    let nn = tree.knn(&centroid, k);
    Ok(CorePointSet {
        cluster,
        centroid,
        members: nn.iter().map(|x| x.0).collect(),
        distances: nn.iter().map(|x| x.1).collect(),
    })
}

fn header_lines(out: &mut String, header: &str) {
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
}

pub fn write_model_tsv(m: &GmmModel, header: &str) -> String {
    let mut out = String::new();
    header_lines(&mut out, header);
    let _ = writeln!(out, "# loglik={:.9} iterations={}", m.loglik, m.iterations);
    out.push_str("component\tweight\tmean_x\tmean_y\tcov_xx\tcov_xy\tcov_yy\n");
    for c in 0..m.k() {
        let (mu, cv) = (m.means[c], m.covariances[c]);
        let _ = writeln!(
            out,
            "{c}\t{:.9}\t{:.9}\t{:.9}\t{:.9}\t{:.9}\t{:.9}",
            m.weights[c], mu[0], mu[1], cv[0], cv[1], cv[2]
        );
    }
    out
}

pub fn write_assignment_tsv(row_ids: &[String], m: &GmmModel, header: &str) -> String {
    let mut out = String::new();
    header_lines(&mut out, header);
    out.push_str("row-id\tcluster");
    for c in 0..m.k() {
        let _ = write!(out, "\tp{c}");
    }
    out.push('\n');
    for ((id, a), r) in row_ids.iter().zip(&m.assignments).zip(&m.responsibilities) {
        let _ = write!(out, "{id}\t{a}");
        for v in r {
            let _ = write!(out, "\t{v:.6}");
        }
        out.push('\n');
    }
    out
}

pub fn write_selection_tsv(s: &Selection, header: &str) -> String {
    let mut out = String::new();
    header_lines(&mut out, header);
    let _ = writeln!(
        out,
        "# chosen={} aic_agrees={} silhouette_agrees={}",
        s.chosen, s.aic_agrees, s.silhouette_agrees
    );
    out.push_str("k\tloglik\taic\tbic\tsilhouette\tstatus\n");
    for k in &s.scores {
        let _ = writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}",
            k.k,
            k.loglik,
            k.aic,
            k.bic,
            k.silhouette,
            k.failed.as_deref().unwrap_or("ok")
        );
    }
    out
}
