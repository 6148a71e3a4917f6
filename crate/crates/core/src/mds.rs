//! Classical (Torgerson) multidimensional scaling.
//!
//! Squared distances are double-centered, `B = -1/2 J D² J`, and the top
//! eigenpairs of `B` give the coordinates. Small inputs use a dense symmetric
//! eigendecomposition; above [`DENSE_LIMIT`] points the top eigenpairs come
//! from a block subspace iteration that applies `B` implicitly from the packed
//! distances.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::matrix::DistanceMatrix;
use crate::{Error, Result};

pub const DENSE_LIMIT: usize = 2000;
/// Subspace width of the iterative solver; fixed so that the leading axes do
/// not depend on how many dimensions are requested.
const BLOCK: usize = 12;
const SUBSPACE_TOL: f64 = 1e-10;
const SUBSPACE_MAX_ITER: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddedMap {
    /// One coordinate vector of length `k` per point.
    pub coords: Vec<Vec<f64>>,
    /// The `k` leading eigenvalues, non-increasing. May include non-positive
    /// values, whose axes carry zero coordinates.
    pub eigenvalues: Vec<f64>,
    /// Set when fewer than `k` eigenvalues are positive.
    pub padded: bool,
    /// Per point |z|, the distance from the plane of the first two axes
    /// (present for 3D maps).
    pub plane_distance: Option<Vec<f64>>,
}

impl EmbeddedMap {
    pub fn dims(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn xy(&self) -> Vec<[f64; 2]> {
        self.coords
            .iter()
            .map(|c| [c[0], c.get(1).copied().unwrap_or(0.0)])
            .collect()
    }
}

/// Eigenpairs of the double-centered matrix, eigenvalues non-increasing.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    /// Column `i` is the unit eigenvector of `values[i]`.
    pub vectors: DMatrix<f64>,
    /// True when every eigenvalue was computed.
    pub complete: bool,
}

/// Symmetric dissimilarities with a zero diagonal.
pub trait Dissimilarity {
    fn n(&self) -> usize;
    fn dist(&self, i: usize, j: usize) -> f64;
}

impl Dissimilarity for DistanceMatrix {
    fn n(&self) -> usize {
        DistanceMatrix::n(self)
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        f64::from(self.get(i, j))
    }
}

/// A square real matrix; only the upper triangle is read.
impl Dissimilarity for DMatrix<f64> {
    fn n(&self) -> usize {
        self.nrows()
    }

    fn dist(&self, i: usize, j: usize) -> f64 {
        if i <= j {
            self[(i, j)]
        } else {
            self[(j, i)]
        }
    }
}

fn squared<D: Dissimilarity + ?Sized>(d: &D, i: usize, j: usize) -> f64 {
    let v = d.dist(i, j);
    v * v
}

/// Dense `B = -1/2 J D² J`.
pub fn double_center<D: Dissimilarity + ?Sized>(d: &D) -> DMatrix<f64> {
    let n = d.n();
    let mut b = DMatrix::from_fn(n, n, |i, j| squared(d, i, j));
    let row_means: Vec<f64> = (0..n).map(|i| b.row(i).sum() / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    for i in 0..n {
        for j in 0..n {
            b[(i, j)] = -0.5 * (b[(i, j)] - row_means[i] - row_means[j] + grand);
        }
    }
    b
}

pub fn spectrum<D: Dissimilarity + ?Sized>(d: &D) -> Result<Spectrum> {
    if d.n() <= DENSE_LIMIT {
        dense_spectrum(d)
    } else {
        subspace_spectrum(d, BLOCK)
    }
}

pub fn dense_spectrum<D: Dissimilarity + ?Sized>(d: &D) -> Result<Spectrum> {
    let b = double_center(d);
    let eig = SymmetricEigen::new(b);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &c| {
        eig.eigenvalues[c]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&c))
    });
    if order.iter().any(|&i| !eig.eigenvalues[i].is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue in MDS".into()));
    }
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(d.n(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Spectrum {
        values,
        vectors,
        complete: true,
    })
}

/// Applies `B` to each column of `x` without materializing it.
fn apply_b<D: Dissimilarity + ?Sized>(d: &D, x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = d.n();
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        let mean: f64 = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
    }
    let mut y = DMatrix::zeros(n, x.ncols());
    for i in 0..n {
        for j in i + 1..n {
            let s = squared(d, i, j);
            if s == 0.0 {
                continue;
            }
            for c in 0..x.ncols() {
                y[(i, c)] += s * centered[(j, c)];
                y[(j, c)] += s * centered[(i, c)];
            }
        }
    }
    for mut col in y.column_iter_mut() {
        let mean: f64 = col.sum() / n as f64;
        col.add_scalar_mut(-mean);
        col.scale_mut(-0.5);
    }
    y
}

/// Top `block` eigenpairs (by magnitude, then sorted algebraically) via
/// orthogonal subspace iteration with Rayleigh–Ritz projection.
pub fn subspace_spectrum<D: Dissimilarity + ?Sized>(d: &D, block: usize) -> Result<Spectrum> {
    let n = d.n();
    let block = block.min(n);
    // Deterministic, non-degenerate start.
    let mut q = DMatrix::from_fn(n, block, |i, j| {
        ((i * 7 + j * 13 + 1) as f64 * 0.618_033_988_75).fract() - 0.5
    });
    q = q.qr().q();
    let mut prev: Option<Vec<f64>> = None;
    let mut ritz_values = Vec::new();
    let mut ritz_vectors = DMatrix::zeros(n, block);
    for _ in 0..SUBSPACE_MAX_ITER {
        let z = apply_b(d, &q);
        let small = q.transpose() * &z;
        let small = (&small + small.transpose()) * 0.5;
        let eig = SymmetricEigen::new(small);
        let mut order: Vec<usize> = (0..block).collect();
        order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
        ritz_values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let rot = DMatrix::from_fn(block, block, |r, c| eig.eigenvectors[(r, order[c])]);
        ritz_vectors = &q * &rot;
        let scale = ritz_values
            .iter()
            .fold(1e-300f64, |m, v: &f64| m.max(v.abs()));
        let converged = prev.as_ref().is_some_and(|p: &Vec<f64>| {
            p.iter()
                .zip(&ritz_values)
                .all(|(a, b)| (a - b).abs() <= SUBSPACE_TOL * scale)
        });
        if converged {
            break;
        }
        prev = Some(ritz_values.clone());
        q = (&z * rot).qr().q();
    }
    if ritz_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue in MDS".into()));
    }
    Ok(Spectrum {
        values: ritz_values,
        vectors: ritz_vectors,
        complete: block == n,
    })
}

impl Spectrum {
    /// Coordinates on the first `k` axes. Axes with non-positive eigenvalues
    /// get zero coordinates; each axis is sign-fixed so that its largest
    /// absolute coordinate is positive.
    pub fn embed(&self, k: usize) -> Result<EmbeddedMap> {
        let n = self.vectors.nrows();
        if k == 0 || k >= n.max(1) || k > self.values.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot embed {n} points in {k} dimensions"
            )));
        }
        let scale_ref = self.values.first().copied().unwrap_or(0.0).abs().max(1.0);
        let positive_tol = 1e-12 * scale_ref;
        let mut coords = vec![vec![0.0; k]; n];
        let mut padded = false;
        for axis in 0..k {
            let lambda = self.values[axis];
            if lambda <= positive_tol {
                padded = true;
                continue;
            }
            let col: DVector<f64> = self.vectors.column(axis).into_owned();
            // Sign convention: largest |coordinate| positive (first such on ties).
            let mut pivot = 0;
            for i in 1..n {
                if col[i].abs() > col[pivot].abs() {
                    pivot = i;
                }
            }
            let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
            let s = lambda.sqrt() * sign;
            for (i, c) in coords.iter_mut().enumerate() {
                c[axis] = col[i] * s;
            }
        }
        Ok(EmbeddedMap {
            coords,
            eigenvalues: self.values[..k].to_vec(),
            padded,
            plane_distance: None,
        })
    }
}

/// Classical MDS into `k` dimensions.
pub fn classical_mds<D: Dissimilarity + ?Sized>(d: &D, k: usize) -> Result<EmbeddedMap> {
    spectrum(d)?.embed(k)
}

/// Three-dimensional map whose first two axes equal the 2D map, plus each
/// point's distance from the xy-plane.
pub fn add_dimension<D: Dissimilarity + ?Sized>(d: &D) -> Result<EmbeddedMap> {
    let mut map = classical_mds(d, 3)?;
    map.plane_distance = Some(map.coords.iter().map(|c| c[2].abs()).collect());
    Ok(map)
}

/// Euclidean distance between two points of a map.
pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn write_embedding_tsv(row_ids: &[String], map: &EmbeddedMap, header: &str) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    for line in header.lines() {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(
        out,
        "# eigenvalues={}",
        map.eigenvalues
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect::<Vec<_>>()
            .join(",")
    );
    for (id, c) in row_ids.iter().zip(&map.coords) {
        let _ = write!(out, "{id}");
        for v in c {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    out
}

/// Reads `row-id<TAB>x<TAB>y[<TAB>z]`.
pub fn parse_embedding_tsv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut ids = Vec::new();
    let mut coords = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        ids.push(parts.next().unwrap_or_default().to_string());
        let c: std::result::Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
        let c = c.map_err(|_| Error::parse(format!("embedding:{}", n + 1), "bad coordinate"))?;
        if !(2..=3).contains(&c.len()) {
            return Err(Error::parse(
                format!("embedding:{}", n + 1),
                "expected 2 or 3 coordinates",
            ));
        }
        coords.push(c);
    }
    Ok((ids, coords))
}
