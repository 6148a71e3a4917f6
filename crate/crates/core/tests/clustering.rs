use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use semmap_core::mixture::{core_points, fit_gmm, select_k, silhouette, BallTree};
use semmap_core::surface::Point;

const CENTERS: [Point; 3] = [[0.0, 0.0], [10.0, 0.0], [5.0, 8.0]];

fn blobs(per: usize, seed: u64) -> (Vec<Point>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut pts = Vec::new();
    let mut truth = Vec::new();
    for (c, mu) in CENTERS.iter().enumerate() {
        for _ in 0..per {
            pts.push([
                mu[0] + noise.sample(&mut rng),
                mu[1] + noise.sample(&mut rng),
            ]);
            truth.push(c);
        }
    }
    (pts, truth)
}

fn purity(found: &[usize], truth: &[usize], k: usize) -> f64 {
    let mut table = vec![vec![0usize; 3]; k];
    for (&f, &t) in found.iter().zip(truth) {
        table[f][t] += 1;
    }
    table
        .iter()
        .map(|row| *row.iter().max().unwrap())
        .sum::<usize>() as f64
        / found.len() as f64
}

#[test]
fn planted_blobs_recovered_by_bic() {
    let mut hits = 0;
    for seed in 0..20 {
        let (pts, truth) = blobs(200, 100 + seed);
        let sel = select_k(&pts, 2..=6, seed).unwrap();
        if sel.chosen == 3 {
            hits += 1;
        }
        let m = fit_gmm(&pts, 3, seed).unwrap();
        assert!(purity(&m.assignments, &truth, 3) >= 0.98, "seed {seed}");
    }
    assert!(hits >= 19, "BIC chose K=3 in {hits}/20 seeds");
}

#[test]
fn components_are_ordered_by_mean() {
    let (pts, _) = blobs(100, 7);
    let m = fit_gmm(&pts, 3, 1).unwrap();
    for w in m.means.windows(2) {
        assert!(w[0][0] < w[1][0] || (w[0][0] == w[1][0] && w[0][1] <= w[1][1]));
    }
    for r in &m.responsibilities {
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn identical_seeds_reproduce() {
    let (pts, _) = blobs(80, 9);
    assert_eq!(fit_gmm(&pts, 4, 3).unwrap(), fit_gmm(&pts, 4, 3).unwrap());
}

#[test]
fn too_few_distinct_points_is_degenerate() {
    let pts = vec![[1.0, 1.0]; 30];
    assert!(fit_gmm(&pts, 3, 0).is_err());
    let sel = select_k(&pts, 2..=4, 0);
    assert!(sel.is_err());
}

fn naive_silhouette(points: &[Point], labels: &[usize]) -> f64 {
    let d = |a: &Point, b: &Point| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let k = labels.iter().max().unwrap() + 1;
    let mut total = 0.0;
    for i in 0..points.len() {
        let mut sums = vec![0.0; k];
        let mut counts = vec![0usize; k];
        for j in 0..points.len() {
            if j != i {
                sums[labels[j]] += d(&points[i], &points[j]);
                counts[labels[j]] += 1;
            }
        }
        let own = labels[i];
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        total += (b - a) / a.max(b);
    }
    total / points.len() as f64
}

#[test]
fn silhouette_matches_naive() {
    let (pts, truth) = blobs(30, 12);
    let got = silhouette(&pts, &truth).unwrap();
    assert!((got - naive_silhouette(&pts, &truth)).abs() < 1e-12);
}

fn linear_knn(points: &[Point], q: &Point, k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2), i))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.truncate(k);
    all.into_iter().map(|(d, i)| (i, d.sqrt())).collect()
}

#[test]
fn ball_tree_equals_linear_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let pts: Vec<Point> = (0..1000)
        .map(|_| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)])
        .collect();
    let tree = BallTree::new(&pts);
    for _ in 0..100 {
        let q = [rng.random_range(-6.0..6.0), rng.random_range(-6.0..6.0)];
        assert_eq!(tree.knn(&q, 30), linear_knn(&pts, &q, 30));
    }
}

#[test]
fn ball_tree_breaks_ties_by_index() {
    // Integer lattice with duplicates: many exactly equal distances.
    let pts: Vec<Point> = (0..900)
        .map(|i| [(i % 30 / 2) as f64, (i / 30 % 15) as f64])
        .collect();
    let tree = BallTree::new(&pts);
    for q in [[7.0, 7.0], [0.0, 0.0], [3.5, 2.5], [20.0, -1.0]] {
        assert_eq!(tree.knn(&q, 30), linear_knn(&pts, &q, 30));
    }
}

#[test]
fn core_points_are_nearest_to_centroid() {
    let (pts, _) = blobs(100, 13);
    let m = fit_gmm(&pts, 3, 2).unwrap();
    for c in 0..3 {
        let core = core_points(&m, c, 30, &pts).unwrap();
        let members: Vec<&Point> = pts
            .iter()
            .zip(&m.assignments)
            .filter(|(_, &a)| a == c)
            .map(|(p, _)| p)
            .collect();
        let n = members.len() as f64;
        let cx = members.iter().map(|p| p[0]).sum::<f64>() / n;
        let cy = members.iter().map(|p| p[1]).sum::<f64>() / n;
        assert!((core.centroid[0] - cx).abs() < 1e-9 && (core.centroid[1] - cy).abs() < 1e-9);
        let expect: Vec<usize> = linear_knn(&pts, &core.centroid, 30)
            .into_iter()
            .map(|x| x.0)
            .collect();
        assert_eq!(core.members, expect);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn em_objective_never_decreases(
        raw in prop::collection::vec((-50i32..50, -50i32..50), 12..80),
        k in 1usize..4,
        seed in 0u64..1000,
    ) {
        // Coarse integer coordinates produce duplicates and near-collapsed
        // components, which is where the floor matters.
        let pts: Vec<Point> = raw.iter().map(|&(x, y)| [x as f64 / 10.0, y as f64 / 10.0]).collect();
        prop_assume!(pts.len() >= 3 * k);
        if let Ok(m) = fit_gmm(&pts, k, seed) {
            for w in m.loglik_trace.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9, "trace dipped: {} -> {}", w[0], w[1]);
            }
            prop_assert!(m.loglik.is_finite());
        }
    }

    #[test]
    fn ball_tree_matches_scan_on_random_sets(
        raw in prop::collection::vec((-1000i32..1000, -1000i32..1000), 1..300),
        qx in -1200i32..1200,
        qy in -1200i32..1200,
        k in 1usize..40,
    ) {
        let pts: Vec<Point> = raw.iter().map(|&(x, y)| [x as f64 / 7.0, y as f64 / 7.0]).collect();
        let q = [qx as f64 / 7.0, qy as f64 / 7.0];
        prop_assert_eq!(BallTree::new(&pts).knn(&q, k), linear_knn(&pts, &q, k));
    }
}
