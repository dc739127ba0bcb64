use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timbre::gtm::{self, GtmConfig};
use timbre::spatial::{brute_force, KdTree};
use timbre::surface::{SurfaceEntry, TimbreSurface};
use timbre::synth::step_counts;
use timbre::ParameterVector;

fn random_params(rng: &mut ChaCha8Rng) -> ParameterVector {
    let steps = step_counts();
    let mut v = [0.0; 16];
    for (slot, s) in v.iter_mut().zip(steps) {
        *slot = rng.random_range(0..s) as f64 / (s - 1) as f64;
    }
    ParameterVector::new(v).unwrap()
}

fn points(n: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
        .collect()
}

#[test]
fn ten_thousand_point_document_is_under_5_mb() {
    let n = 10_000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xy = points(n, 6);
    let entries: Vec<SurfaceEntry> = (0..n)
        .map(|i| SurfaceEntry {
            id: format!("{:016x}", rng.random::<u64>() ^ i as u64),
            params: random_params(&mut rng),
            octave: rng.random_range(-2..=2),
        })
        .collect();
    let features = DMatrix::from_fn(n, 66, |_, _| rng.random::<f64>());
    let surface = TimbreSurface::build(&xy, &features, &entries, 50, "scale").unwrap();
    let doc = surface.to_document();
    assert!(doc.len() < 5_000_000, "{} bytes", doc.len());
    assert_eq!(
        TimbreSurface::from_document(&doc).unwrap().points(),
        surface.points()
    );
}

#[test]
fn query_cost_grows_like_log_n() {
    let queries = points(2_000, 99);
    let mut per_log = Vec::new();
    let mut big = None;
    for (n, seed) in [(1_000, 1), (10_000, 2), (100_000, 3), (1_000_000, 4)] {
        let tree = KdTree::new(points(n, seed));
        let evaluated: usize = queries.iter().map(|&q| tree.nearest_counted(q, 1).1).sum();
        let mean = evaluated as f64 / queries.len() as f64;
        per_log.push(mean / (n as f64).log2());
        big = Some(tree);
    }
    // cost per log2(n) stays flat while n grows a thousandfold
    let (first, last) = (per_log[0], per_log[3]);
    assert!(last <= 2.0 * first, "{per_log:?}");

    let tree = big.unwrap();
    let t0 = Instant::now();
    for &q in &queries {
        std::hint::black_box(tree.nearest(q, 1));
    }
    let tree_time = t0.elapsed();
    let t0 = Instant::now();
    for &q in &queries[..50] {
        std::hint::black_box(brute_force(tree.points(), q, 1));
    }
    let scan_time = t0.elapsed() * (queries.len() as u32 / 50);
    assert!(
        tree_time * 50 < scan_time,
        "tree {tree_time:?}, scan {scan_time:?}"
    );
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        for &k in &idx[i..=j] {
            r[k] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn latent_and_image_distances_agree_in_rank() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let data = DMatrix::from_fn(400, 3, |i, j| {
        let t = (i as f64 / 399.0) * 2.0 - 1.0;
        let s = ((i * 37) % 400) as f64 / 399.0;
        [t, s, (2.0 * t).sin() * 0.5][j]
    });
    let cfg = GtmConfig {
        latent_grid: (12, 12),
        basis_grid: (4, 4),
        max_iter: 40,
        ..GtmConfig::default()
    };
    let (model, _) = gtm::fit(&data, &cfg).unwrap();
    let latent = model.project_all(&data).unwrap();
    let (mut dl, mut dy) = (Vec::new(), Vec::new());
    for _ in 0..2_000 {
        let (i, j) = (rng.random_range(0..400), rng.random_range(0..400));
        if i == j {
            continue;
        }
        let (a, b) = (latent[i], latent[j]);
        dl.push(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
        dy.push((model.map(a) - model.map(b)).norm());
    }
    let rho = spearman(&dl, &dy);
    assert!(rho > 0.0, "rank correlation {rho}");
}
