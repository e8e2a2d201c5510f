//! Randomized oracle checks used by both the integration tests and the
//! acceptance target. Each returns a description of the first failure.

use hemobench::anfis::AnfisModel;
use hemobench::classic::svm::{dual_objective, to_sign};
use hemobench::classic::{svm_fit, Kernel, KernelKind, SvmConfig};
use hemobench::dataio::make_folds;
use hemobench::imageprep::{self, GrayImage};
use hemobench::metrics::{compute_metrics, confusion};
use hemobench::nn::{flatten_grads, FeedForward};
use hemobench::rng::SeededRng;
use hemobench::sae::AutoencoderLayer;
use hemobench::Matrix;

use super::{normal, numeric_gradient, random_labels, random_matrix, relative_error};

pub const GRAD_STEP: f64 = 1e-6;
pub const GRAD_TOLERANCE: f64 = 1e-4;
pub const GRAD_INSTANCES: u64 = 20;

type Check = std::result::Result<(), String>;

fn worst(errors: impl Iterator<Item = (u64, f64)>, what: &str) -> Check {
    for (i, e) in errors {
        if !(e < GRAD_TOLERANCE) {
            return Err(format!("{what} instance {i}: relative error {e:.3e}"));
        }
    }
    Ok(())
}

pub fn random_anfis(inputs: usize, rules: usize, rng: &mut SeededRng) -> AnfisModel {
    let mut m = AnfisModel::new(inputs, rules).unwrap();
    let k = inputs * rules;
    m.widths = (0..k).map(|_| rng.uniform_in(0.3, 1.5)).collect();
    m.shapes = (0..k).map(|_| rng.uniform_in(0.6, 3.0)).collect();
    m.centers = (0..k).map(|_| rng.uniform()).collect();
    m.coefficients = (0..k).map(|_| normal(rng)).collect();
    m.biases = (0..rules).map(|_| normal(rng)).collect();
    m
}

pub fn anfis_gradients() -> Check {
    worst(
        (0..GRAD_INSTANCES).map(|seed| {
            let mut rng = SeededRng::new(0xA0 + seed);
            let inputs = 1 + rng.below(4);
            let rules = 1 + rng.below(4);
            let rows = 3 + rng.below(4);
            let model = random_anfis(inputs, rules, &mut rng);
            let x = random_matrix(rows, inputs, &mut rng);
            let y = random_labels(rows, &mut rng);
            let idx: Vec<usize> = (0..rows).collect();
            let analytic = model.loss_and_grad(&x, &y, &idx).1.flatten();
            let mut probe = model.clone();
            let numeric = numeric_gradient(&model.flat_params(), GRAD_STEP, |p| {
                probe.set_flat_params(p);
                probe.loss(&x, &y, &idx).unwrap()
            });
            (seed, relative_error(&analytic, &numeric))
        }),
        "ANFIS",
    )
}

pub fn autoencoder_gradients() -> Check {
    worst(
        (0..GRAD_INSTANCES).map(|seed| {
            let mut rng = SeededRng::new(0xB0 + seed);
            let (inputs, hidden) = (3, 4);
            let rows = 2 + rng.below(5);
            let lambda = rng.uniform_in(0.0, 0.01);
            let layer = AutoencoderLayer::random(inputs, hidden, 0.01, &mut rng).unwrap();
            let x = random_matrix(rows, inputs, &mut rng);
            let idx: Vec<usize> = (0..rows).collect();
            let analytic = layer.loss_and_grad(&x, &idx, lambda).1.flatten();
            let mut probe = layer.clone();
            let numeric = numeric_gradient(&layer.flat_params(), GRAD_STEP, |p| {
                probe.set_flat_params(p);
                probe.loss_and_grad(&x, &idx, lambda).0
            });
            (seed, relative_error(&analytic, &numeric))
        }),
        "autoencoder",
    )
}

fn network_gradients(dims: &[usize], slope: f64, seed: u64, rows: usize) -> f64 {
    let mut rng = SeededRng::new(seed);
    let net = FeedForward::random(dims, slope, &mut rng).unwrap();
    let x = random_matrix(rows, dims[0], &mut rng);
    let y = random_labels(rows, &mut rng);
    let idx: Vec<usize> = (0..rows).collect();
    let analytic = flatten_grads(&net.loss_and_grad(&x, &y, &idx).1);
    let mut probe = net.clone();
    let numeric = numeric_gradient(&net.flat_params(), GRAD_STEP, |p| {
        probe.set_flat_params(p);
        probe.loss(&x, &y, &idx)
    });
    relative_error(&analytic, &numeric)
}

/// Fine-tuning network: leaky-ReLU encoders of shrinking width and a softmax head.
pub fn finetune_gradients() -> Check {
    worst(
        (0..GRAD_INSTANCES).map(|seed| {
            let mut rng = SeededRng::new(0xC0 + seed);
            let dims = [2 + rng.below(4), 3 + rng.below(4), 2 + rng.below(3), 2];
            (seed, network_gradients(&dims, 0.01, 0xC00 + seed, 2 + rng.below(5)))
        }),
        "fine-tune network",
    )
}

pub fn mlp_gradients() -> Check {
    worst(
        (0..GRAD_INSTANCES).map(|seed| {
            let mut rng = SeededRng::new(0xD0 + seed);
            let dims = [2 + rng.below(4), 16, 8, 2];
            (seed, network_gradients(&dims, 0.0, 0xD00 + seed, 2 + rng.below(5)))
        }),
        "MLP",
    )
}

/// Confusion counts and every ratio against direct counting on `trials`
/// random vectors.
pub fn metric_oracle(trials: u64) -> Check {
    for t in 0..trials {
        let mut rng = SeededRng::new(0xE000 + t);
        let n = 1 + rng.below(200);
        let truth = random_labels(n, &mut rng);
        let skew = rng.uniform();
        let pred: Vec<u8> = (0..n).map(|_| u8::from(rng.uniform() < skew)).collect();
        let cm = confusion(&pred, &truth).map_err(|e| e.to_string())?;
        let count = |p: u8, y: u8| pred.iter().zip(&truth).filter(|&(&a, &b)| a == p && b == y).count() as u64;
        let (tp, tn, fp, fnn) = (count(1, 1), count(0, 0), count(1, 0), count(0, 1));
        if (cm.tp, cm.tn, cm.fp, cm.fn_) != (tp, tn, fp, fnn) {
            return Err(format!("trial {t}: confusion {cm:?} vs oracle {tp}/{tn}/{fp}/{fnn}"));
        }
        let m = compute_metrics(&cm).map_err(|e| e.to_string())?;
        let div = |a: u64, b: u64| (b > 0).then(|| a as f64 / b as f64);
        let precision = div(tp, tp + fp);
        let recall = div(tp, tp + fnn);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        let expected = [div(tp + tn, n as u64), precision, recall, f1, div(tn, tn + fp)];
        let got = [m.accuracy, m.precision, m.recall, m.f1, m.inverse_recall];
        for (g, e) in got.iter().zip(&expected) {
            let ok = match (g, e) {
                (Some(g), Some(e)) => (g - e).abs() <= 1e-12,
                (None, None) => true,
                _ => false,
            };
            if !ok {
                return Err(format!("trial {t}: metrics {got:?} vs oracle {expected:?}"));
            }
        }
    }
    Ok(())
}

/// Disjoint, covering and size-balanced folds on `trials` random (n, seed) pairs.
pub fn fold_invariants(trials: u64) -> Check {
    let mut rng = SeededRng::new(0xF01D);
    for t in 0..trials {
        let n = 2 + rng.below(999);
        let k = 2 + rng.below(n.min(10) - 1);
        let seed = rng.next_u64();
        let plan = make_folds(n, k, seed).map_err(|e| e.to_string())?;
        let mut seen = vec![0u8; n];
        for f in &plan.folds {
            for &i in f {
                seen[i] += 1;
            }
        }
        if seen.iter().any(|&c| c != 1) {
            return Err(format!("trial {t}: n={n} k={k} seed={seed} not a partition"));
        }
        let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
        let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
        if hi - lo > 1 {
            return Err(format!("trial {t}: unbalanced folds {sizes:?}"));
        }
        for f in 0..k {
            let train = plan.train_indices(f);
            if train.len() + sizes[f] != n || train.iter().any(|i| plan.folds[f].binary_search(i).is_ok()) {
                return Err(format!("trial {t}: fold {f} train/test overlap"));
            }
        }
    }
    Ok(())
}

/// Normalized firing strengths sum to one on `trials` random (model, input)
/// pairs, including widths small enough to underflow every raw strength.
pub fn anfis_normalization(trials: u64) -> Check {
    let mut rng = SeededRng::new(0x0A0F);
    for t in 0..trials {
        let inputs = 1 + rng.below(10);
        let rules = 1 + rng.below(18);
        let mut m = random_anfis(inputs, rules, &mut rng);
        if t % 10 == 0 {
            m.widths.iter_mut().for_each(|a| *a = 1e-3);
            m.shapes.iter_mut().for_each(|b| *b = 5.0);
        }
        let x: Vec<f64> = (0..inputs).map(|_| rng.uniform_in(-0.5, 1.5)).collect();
        let w = m.normalized_strengths(&x).map_err(|e| format!("trial {t}: {e}"))?;
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 || w.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(format!("trial {t}: strengths {w:?} sum to {sum}"));
        }
    }
    Ok(())
}

/// Random linearly separable 2D problem: labels from a random line with a
/// margin of at least `margin`.
pub fn separable_problem(seed: u64, n: usize, margin: f64) -> (Matrix, Vec<u8>) {
    let mut rng = SeededRng::new(seed);
    let angle = rng.uniform_in(0.0, std::f64::consts::TAU);
    let (nx, ny) = (angle.cos(), angle.sin());
    let offset = rng.uniform_in(-0.2, 0.2);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while rows.len() < n {
        let p = [rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)];
        let d = p[0] * nx + p[1] * ny - offset;
        if d.abs() < margin {
            continue;
        }
        // keep both classes present
        let label = u8::from(d > 0.0);
        if rows.len() == n - 1 && labels.iter().all(|&l| l == label) {
            continue;
        }
        rows.push(p);
        labels.push(label);
    }
    (Matrix::from_rows(&rows).unwrap(), labels)
}

/// Largest KKT violation of a trained SVM on its training set.
pub fn kkt_violation(x: &Matrix, y: &[u8], kernel: KernelKind) -> std::result::Result<f64, String> {
    let cfg = SvmConfig::with_kernel(kernel);
    let model = svm_fit(x, y, &cfg).map_err(|e| e.to_string())?;
    if !model.converged {
        return Err("SMO did not converge".into());
    }
    let alphas = model.full_alphas(x.rows());
    let signs: Vec<f64> = y.iter().map(|&l| to_sign(l)).collect();
    let eq: f64 = alphas.iter().zip(&signs).map(|(a, s)| a * s).sum();
    let mut worst = eq.abs();
    for i in 0..x.rows() {
        let margin = signs[i] * model.decision(x.row(i)).map_err(|e| e.to_string())?;
        let a = alphas[i];
        let v = if a <= 0.0 {
            (1.0 - margin).max(0.0)
        } else if a >= model.c {
            (margin - 1.0).max(0.0)
        } else {
            (margin - 1.0).abs()
        };
        worst = worst.max(v);
        if a < 0.0 || a > model.c {
            return Err(format!("alpha {a} outside [0, C]"));
        }
    }
    Ok(worst)
}

pub fn svm_kkt(problems: u64) -> Check {
    for p in 0..problems {
        let (x, y) = separable_problem(0x5000 + p, 30, 0.1);
        for kernel in [KernelKind::Linear, KernelKind::Rbf] {
            let v = kkt_violation(&x, &y, kernel).map_err(|e| format!("problem {p} {kernel:?}: {e}"))?;
            if v > 1e-3 + 1e-9 {
                return Err(format!("problem {p} {kernel:?}: KKT violation {v:.3e}"));
            }
        }
    }
    Ok(())
}

/// Brute-force maximum of the dual on four points (two per class) with
/// linear kernel and C = 1: a coarse grid over three free multipliers (the
/// fourth follows from the equality constraint), then a fine grid around
/// the best coarse point.
pub fn grid_dual_max(x: &Matrix, signs: &[f64]) -> f64 {
    let kernel = Kernel::Linear;
    // signs are (+, +, -, -): a1 + a2 = a3 + a4
    let eval = |a1: f64, a2: f64, a3: f64| -> Option<f64> {
        let a4 = a1 + a2 - a3;
        if !(0.0..=1.0).contains(&a1) || !(0.0..=1.0).contains(&a2) || !(0.0..=1.0).contains(&a3) {
            return None;
        }
        (0.0..=1.0)
            .contains(&a4)
            .then(|| dual_objective(&kernel, x, signs, &[a1, a2, a3, a4]))
    };
    let search = |center: [f64; 3], half: f64, steps: usize| -> ([f64; 3], f64) {
        let mut best = ([0.0; 3], f64::NEG_INFINITY);
        let h = 2.0 * half / steps as f64;
        for i in 0..=steps {
            for j in 0..=steps {
                for k in 0..=steps {
                    let a = [
                        center[0] - half + i as f64 * h,
                        center[1] - half + j as f64 * h,
                        center[2] - half + k as f64 * h,
                    ];
                    if let Some(v) = eval(a[0], a[1], a[2]) {
                        if v > best.1 {
                            best = (a, v);
                        }
                    }
                }
            }
        }
        best
    };
    let coarse = search([0.5; 3], 0.5, 100);
    search(coarse.0, 0.02, 80).1
}

pub fn svm_four_point_dual(problems: u64) -> Check {
    for p in 0..problems {
        let mut rng = SeededRng::new(0x4000 + p);
        let mut rows = Vec::new();
        for class in [1.0, -1.0] {
            for _ in 0..2 {
                rows.push([class * rng.uniform_in(0.2, 1.0), rng.uniform_in(-1.0, 1.0)]);
            }
        }
        let x = Matrix::from_rows(&rows).unwrap();
        let y = [1u8, 1, 0, 0];
        let signs = [1.0, 1.0, -1.0, -1.0];
        let cfg = SvmConfig {
            c: 1.0,
            ..SvmConfig::with_kernel(KernelKind::Linear)
        };
        let model = svm_fit(&x, &y, &cfg).map_err(|e| e.to_string())?;
        let smo = dual_objective(&Kernel::Linear, &x, &signs, &model.full_alphas(4));
        let grid = grid_dual_max(&x, &signs);
        if (smo - grid).abs() > 1e-3 {
            return Err(format!("problem {p}: SMO dual {smo:.6} vs grid {grid:.6}"));
        }
    }
    Ok(())
}

pub fn random_image(rng: &mut SeededRng) -> GrayImage {
    let w = 1 + rng.below(40);
    let h = 1 + rng.below(40);
    // mix of full-range noise and narrow-band images
    let lo = rng.below(256) as u8;
    let span = 1 + rng.below(256 - lo as usize);
    let pixels = (0..w * h).map(|_| lo + rng.below(span) as u8).collect();
    GrayImage::new(w, h, pixels).unwrap()
}

/// LUT monotone on random images; single-tile unbounded CLAHE equals
/// equalization; the uniform histogram is a fixed point within one level.
pub fn image_transforms(images: u64) -> Check {
    let mut rng = SeededRng::new(0x1AA6E);
    for t in 0..images {
        let img = random_image(&mut rng);
        let (eq, map) = imageprep::equalize(&img).map_err(|e| e.to_string())?;
        if !map.is_monotone() {
            return Err(format!("image {t}: non-monotone LUT"));
        }
        let single = imageprep::clahe(&img, (1, 1), f64::INFINITY).map_err(|e| e.to_string())?;
        if single != eq {
            return Err(format!("image {t}: single-tile CLAHE differs from equalization"));
        }
    }
    let uniform = GrayImage::from_fn(16, 16, |x, y| (y * 16 + x) as u8);
    let (_, map) = imageprep::equalize(&uniform).map_err(|e| e.to_string())?;
    if let Some(k) = (0..256).find(|&k| (i32::from(map.lut[k]) - k as i32).abs() > 1) {
        return Err(format!("uniform histogram moved level {k} to {}", map.lut[k]));
    }
    Ok(())
}
