mod common;

use common::checks;
use hemobench::classic::forest::{grow_tree, Node};
use hemobench::classic::{knn_fit, KernelKind, KnnConfig};
use hemobench::imageprep::{self, GrayImage};
use hemobench::rng::SeededRng;
use hemobench::Matrix;

#[test]
fn metrics_match_counting_oracle() {
    checks::metric_oracle(1000).unwrap();
}

#[test]
fn folds_partition_random_inputs() {
    checks::fold_invariants(1000).unwrap();
}

#[test]
fn anfis_strengths_normalize() {
    checks::anfis_normalization(10_000).unwrap();
}

#[test]
fn svm_satisfies_kkt_on_separable_problems() {
    checks::svm_kkt(50).unwrap();
}

#[test]
fn svm_dual_matches_grid_search() {
    checks::svm_four_point_dual(5).unwrap();
}

#[test]
fn sigmoid_kernel_svm_terminates() {
    let (x, y) = checks::separable_problem(77, 40, 0.05);
    let model = hemobench::classic::svm_fit(&x, &y, &hemobench::classic::SvmConfig::with_kernel(KernelKind::Sigmoid))
        .unwrap();
    assert!(model.iterations <= 10_000);
    assert!(model.alphas.iter().all(|&a| a > 0.0 && a <= model.c));
}

#[test]
fn image_transform_properties() {
    checks::image_transforms(500).unwrap();
}

#[test]
fn knn_matches_exhaustive_sort() {
    let mut rng = SeededRng::new(11);
    for _ in 0..100 {
        let n = 5 + rng.below(40);
        let p = 1 + rng.below(4);
        // coarse grid values produce many distance ties
        let data: Vec<f64> = (0..n * p).map(|_| rng.below(4) as f64).collect();
        let x = Matrix::from_vec(n, p, data).unwrap();
        let y = common::random_labels(n, &mut rng);
        let k = 1 + rng.below(n.min(9));
        let model = knn_fit(&x, &y, &KnnConfig { k }).unwrap();
        let q: Vec<f64> = (0..p).map(|_| rng.below(4) as f64).collect();
        let mut order: Vec<(f64, usize)> = (0..n)
            .map(|i| (x.row(i).iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum(), i))
            .collect();
        order.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected: Vec<usize> = order[..k].iter().map(|&(_, i)| i).collect();
        let mut got = model.neighbours(&q).unwrap();
        got.sort_by_key(|&i| order.iter().position(|&(_, j)| j == i));
        assert_eq!(got, expected);
        let ones = expected.iter().filter(|&&i| y[i] == 1).count();
        assert_eq!(model.predict(&q).unwrap(), u8::from(2 * ones >= k));
    }
}

fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    1.0 - (counts[0] as f64 / n).powi(2) - (counts[1] as f64 / n).powi(2)
}

/// Best weighted child impurity over every feature and every midpoint, by
/// enumeration.
fn best_split(x: &Matrix, y: &[u8], idx: &[usize]) -> Option<(usize, f64, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for j in 0..x.cols() {
        let mut values: Vec<f64> = idx.iter().map(|&i| x.get(i, j)).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        values.dedup();
        for w in values.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let mut l = [0usize; 2];
            let mut r = [0usize; 2];
            for &i in idx {
                let side = if x.get(i, j) <= t { &mut l } else { &mut r };
                side[usize::from(y[i])] += 1;
            }
            let n = idx.len() as f64;
            let score = (l[0] + l[1]) as f64 / n * gini(l) + (r[0] + r[1]) as f64 / n * gini(r);
            if best.is_none_or(|(_, _, s)| score < s - 1e-12) {
                best = Some((j, t, score));
            }
        }
    }
    best
}

#[test]
fn root_split_matches_exhaustive_cart() {
    let mut rng = SeededRng::new(5);
    for trial in 0..200 {
        let n = 4 + rng.below(20);
        let p = 1 + rng.below(3);
        let data: Vec<f64> = (0..n * p).map(|_| (rng.below(10) as f64) / 10.0).collect();
        let x = Matrix::from_vec(n, p, data).unwrap();
        let y = common::random_labels(n, &mut rng);
        let idx: Vec<usize> = (0..n).collect();
        let tree = grow_tree(&x, &y, idx.clone(), p, 1000 + trial);
        let counts = [y.iter().filter(|&&l| l == 0).count(), y.iter().filter(|&&l| l == 1).count()];
        match (&tree.nodes[0], best_split(&x, &y, &idx)) {
            (Node::Split { feature, threshold, .. }, Some((_, _, score))) => {
                // the chosen split must reach the optimal impurity
                let mut l = [0usize; 2];
                let mut r = [0usize; 2];
                for i in 0..n {
                    let side = if x.get(i, *feature) <= *threshold { &mut l } else { &mut r };
                    side[usize::from(y[i])] += 1;
                }
                let nf = n as f64;
                let got = (l[0] + l[1]) as f64 / nf * gini(l) + (r[0] + r[1]) as f64 / nf * gini(r);
                assert!((got - score).abs() < 1e-12, "trial {trial}: {got} vs {score}");
                assert!(score < gini(counts));
            }
            (Node::Leaf { .. }, best) => {
                // a leaf is only correct when the node is pure or no split helps
                let helps = best.is_some_and(|(_, _, s)| s < gini(counts) - 1e-12);
                assert!(!helps, "trial {trial}: leaf despite improving split");
            }
            (Node::Split { .. }, None) => panic!("trial {trial}: split on unsplittable node"),
        }
        // fully grown: every training row lands in a leaf of its own class unless duplicates conflict
        for i in 0..n {
            let leaf = tree.leaf_counts(x.row(i));
            let same_x_other_label = (0..n).any(|k| x.row(k) == x.row(i) && y[k] != y[i]);
            if !same_x_other_label {
                assert_eq!(leaf[1 - usize::from(y[i])], 0, "trial {trial}: impure leaf");
            }
        }
    }
}

/// Direct per-pixel CLAHE: rebuilds the clipped mapping of every tile a pixel
/// touches and interpolates in tile-center coordinates. Returns the
/// unrounded interpolated values.
fn clahe_oracle(img: &GrayImage, tiles: (usize, usize), clip: f64) -> Vec<f64> {
    let (tx, ty) = tiles;
    let tw = img.width as f64 / tx as f64;
    let th = img.height as f64 / ty as f64;
    let mapping = |txi: usize, tyi: usize, level: u8| -> f64 {
        let x0 = txi * img.width / tx;
        let x1 = (txi + 1) * img.width / tx;
        let y0 = tyi * img.height / ty;
        let y1 = (tyi + 1) * img.height / ty;
        let mut hist = [0.0f64; 256];
        for y in y0..y1 {
            for x in x0..x1 {
                hist[usize::from(img.get(x, y))] += 1.0;
            }
        }
        let total = ((x1 - x0) * (y1 - y0)) as f64;
        let limit = clip * total / 256.0;
        let excess: f64 = hist.iter().map(|&c| (c - limit).max(0.0)).sum();
        let mut cum = 0.0;
        for (k, &c) in hist.iter().enumerate() {
            cum += c.min(limit) + excess / 256.0;
            if k == usize::from(level) {
                break;
            }
        }
        (255.0 * cum / total + 0.5).floor().clamp(0.0, 255.0)
    };
    let mut out = Vec::with_capacity(img.pixels.len());
    for (x, y) in (0..img.height).flat_map(|y| (0..img.width).map(move |x| (x, y))) {
        let fx = ((x as f64 + 0.5) / tw - 0.5).clamp(0.0, (tx - 1) as f64);
        let fy = ((y as f64 + 0.5) / th - 0.5).clamp(0.0, (ty - 1) as f64);
        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(tx - 1), (y0 + 1).min(ty - 1));
        let (wx, wy) = (fx - x0 as f64, fy - y0 as f64);
        let v = img.get(x, y);
        let top = (1.0 - wx) * mapping(x0, y0, v) + wx * mapping(x1, y0, v);
        let bottom = (1.0 - wx) * mapping(x0, y1, v) + wx * mapping(x1, y1, v);
        out.push((1.0 - wy) * top + wy * bottom);
    }
    out
}

/// Exact match after round-half-up, except that values within 1e-9 of a
/// half-integer may round either way.
fn assert_matches_oracle(fast: &GrayImage, slow: &[f64], what: &str) {
    for (i, (&got, &v)) in fast.pixels.iter().zip(slow).enumerate() {
        let got = f64::from(got);
        let ok = if (v - v.floor() - 0.5).abs() < 1e-9 {
            got == v.floor() || got == v.ceil()
        } else {
            got == (v + 0.5).floor()
        };
        assert!(ok, "{what}: pixel {i} is {got}, oracle {v}");
    }
}

#[test]
fn clahe_matches_direct_oracle_on_gradient() {
    let img = GrayImage::from_fn(64, 64, |x, y| (2 * (x + y)) as u8);
    let fast = imageprep::clahe(&img, (2, 2), 2.0).unwrap();
    assert_matches_oracle(&fast, &clahe_oracle(&img, (2, 2), 2.0), "gradient");
    let (eq, _) = imageprep::equalize(&img).unwrap();
    assert_ne!(fast, eq);
}

#[test]
fn clahe_matches_direct_oracle_on_noise() {
    // the oracle assumes equal tiles, so only evenly dividing grids are compared
    let mut rng = SeededRng::new(3);
    let img = GrayImage::new(48, 32, (0..48 * 32).map(|_| rng.below(256) as u8).collect()).unwrap();
    for tiles in [(4, 2), (6, 4), (8, 8)] {
        let fast = imageprep::clahe(&img, tiles, 3.0).unwrap();
        assert_matches_oracle(&fast, &clahe_oracle(&img, tiles, 3.0), &format!("{tiles:?}"));
    }
}

#[test]
fn histogram_matches_counting_loop() {
    let mut rng = SeededRng::new(9);
    let pixels: Vec<u8> = (0..256).map(|_| rng.below(256) as u8).collect();
    let img = GrayImage::new(16, 16, pixels.clone()).unwrap();
    let h = imageprep::histogram(&img).unwrap();
    for level in 0..256 {
        let count = pixels.iter().filter(|&&p| usize::from(p) == level).count() as u64;
        assert_eq!(h[level], count);
    }
}
